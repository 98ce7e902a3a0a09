import hypothesis
import pytest

hypothesis.settings.register_profile(
    "suite",
    deadline=None,
    max_examples=40,
    derandomize=True,
)
hypothesis.settings.load_profile("suite")


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture
def record_criterion(request):
    """Collect one human-readable line per acceptance criterion."""

    def rec(line: str) -> None:
        request.config._criterion_lines.append(line)

    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
