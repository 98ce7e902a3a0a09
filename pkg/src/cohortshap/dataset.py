"""Tabular cohort construction: layout-driven parsing, missing policy, synthesis.

Two ingestion paths produce the same in-memory form: fixed-width survey
records described by a byte layout, and delimited text with a header row.
Missing cells are tracked in a boolean mask; the sentinel value used for
modeling is applied as an explicit, separate step so provenance is never
lost.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .seeding import substream

MISSING_SENTINEL = -1.0


class FeatureKind(str, Enum):
    """Which feature group a column belongs to."""

    PHI_CHAR = "phichar"
    NUTRITIONAL = "nutritional"


def _coerce_kind(kind: "FeatureKind | str") -> FeatureKind:
    if isinstance(kind, FeatureKind):
        return kind
    try:
        return FeatureKind(str(kind).strip().lower())
    except ValueError:
        raise ValueError(
            f"unknown feature kind {kind!r}; expected 'phichar' or 'nutritional'"
        ) from None


@dataclass(frozen=True)
class FeatureSpec:
    """A named feature column and the group it belongs to.

    ``source`` records where the column came from (byte range or column
    index) and is informational only; it does not participate in equality.
    """

    name: str
    kind: FeatureKind
    source: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class LayoutField:
    """One field of a fixed-width record layout (byte offsets, 0-based)."""

    name: str
    start: int
    width: int
    vtype: str = "numeric"
    missing_codes: tuple[str, ...] = ()
    kind: str = "nutritional"

    @property
    def end(self) -> int:
        return self.start + self.width


class LayoutSpec:
    """An ordered, validated collection of fixed-width fields.

    Fields must occupy strictly increasing, non-overlapping byte ranges.
    Exactly one field may carry ``kind="label"``; the rest are features.
    """

    def __init__(self, fields: Sequence[LayoutField]):
        if not fields:
            raise ValueError("layout has no fields")
        names = [f.name for f in fields]
        if len(set(names)) != len(names):
            raise ValueError("layout field names are not unique")
        prev_end = -1
        prev_name = None
        for f in fields:
            if f.width < 1:
                raise ValueError(f"field {f.name!r}: width must be >= 1")
            if f.start < 0:
                raise ValueError(f"field {f.name!r}: start must be >= 0")
            if f.start < prev_end:
                raise ValueError(
                    f"field {f.name!r} overlaps or is out of order with {prev_name!r}"
                )
            if f.vtype not in ("numeric", "int", "float"):
                raise ValueError(f"field {f.name!r}: unsupported type {f.vtype!r}")
            if f.kind not in ("phichar", "nutritional", "label"):
                raise ValueError(f"field {f.name!r}: unsupported kind {f.kind!r}")
            prev_end = f.end
            prev_name = f.name
        n_label = sum(1 for f in fields if f.kind == "label")
        if n_label > 1:
            raise ValueError("layout declares more than one label field")
        self.fields = tuple(fields)

    @property
    def label_field(self) -> LayoutField | None:
        for f in self.fields:
            if f.kind == "label":
                return f
        return None

    @property
    def feature_fields(self) -> tuple[LayoutField, ...]:
        return tuple(f for f in self.fields if f.kind != "label")

    @property
    def record_width(self) -> int:
        return max(f.end for f in self.fields)

    @classmethod
    def from_json(cls, text: str) -> "LayoutSpec":
        raw = json.loads(text)
        if not isinstance(raw, list):
            raise ValueError("layout JSON must be an array of field objects")
        fields = []
        for i, item in enumerate(raw):
            try:
                fields.append(
                    LayoutField(
                        name=str(item["name"]),
                        start=int(item["start"]),
                        width=int(item["width"]),
                        vtype=str(item.get("type", "numeric")),
                        missing_codes=tuple(
                            str(c) for c in item.get("missing_codes", [])
                        ),
                        kind=str(item.get("kind", "nutritional")),
                    )
                )
            except KeyError as exc:
                raise ValueError(f"layout entry {i}: missing key {exc}") from None
        return cls(fields)

    def to_json(self) -> str:
        out = [
            {
                "name": f.name,
                "start": f.start,
                "width": f.width,
                "type": f.vtype,
                "missing_codes": list(f.missing_codes),
                "kind": f.kind,
            }
            for f in self.fields
        ]
        return json.dumps(out, indent=2) + "\n"


def load_layout(path: "str | Path") -> LayoutSpec:
    return LayoutSpec.from_json(Path(path).read_text(encoding="utf-8"))


class Dataset:
    """An immutable numeric table with binary labels and a missingness mask.

    values   : float64 array (n rows, p features); masked cells hold NaN
               until :func:`apply_missing_policy` replaces them.
    labels   : int array of 0/1 (1 marks a case).
    specs    : one FeatureSpec per column.
    missing  : bool array, True where the source cell was absent or coded
               missing.
    """

    def __init__(
        self,
        values: np.ndarray,
        labels: np.ndarray,
        specs: Sequence[FeatureSpec],
        missing: np.ndarray | None = None,
    ):
        values = np.ascontiguousarray(values, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        n, p = values.shape
        if n < 1 or p < 1:
            raise ValueError("dataset must have at least one row and one feature")
        if labels.shape != (n,):
            raise ValueError("labels length does not match row count")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must contain only 0 and 1")
        specs = tuple(specs)
        if len(specs) != p:
            raise ValueError("one FeatureSpec is required per column")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ValueError("feature names are not unique")
        if missing is None:
            missing = np.zeros((n, p), dtype=bool)
        else:
            missing = np.asarray(missing, dtype=bool)
            if missing.shape != (n, p):
                raise ValueError("missing mask shape does not match values")
        missing = missing.copy()
        for arr in (values, labels, missing):
            arr.setflags(write=False)
        self.values = values
        self.labels = labels
        self.specs = specs
        self.missing = missing

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def kind_map(self) -> dict[str, FeatureKind]:
        return {s.name: s.kind for s in self.specs}


def apply_missing_policy(ds: Dataset) -> Dataset:
    """Return a copy with every masked cell set to the -1.0 sentinel.

    Unmasked cells are untouched and the mask is preserved, so a raw value
    that happens to equal -1.0 stays distinguishable from an imputed one.
    """
    values = ds.values.copy()
    values[ds.missing] = MISSING_SENTINEL
    return Dataset(values, ds.labels, ds.specs, ds.missing)


def select_feature_set(ds: Dataset, which: "FeatureKind | str") -> Dataset:
    """Project the dataset onto one feature group, or keep both.

    ``which`` is ``"phichar"``, ``"nutritional"`` or ``"both"``.  Column
    order is preserved.
    """
    token = which.value if isinstance(which, FeatureKind) else str(which).strip().lower()
    if token == "both":
        return ds
    kind = _coerce_kind(token)
    cols = [j for j, s in enumerate(ds.specs) if s.kind == kind]
    if not cols:
        raise ValueError(f"dataset has no features of kind {kind.value!r}")
    specs = tuple(ds.specs[j] for j in cols)
    return Dataset(ds.values[:, cols], ds.labels, specs, ds.missing[:, cols])


# ---------------------------------------------------------------------------
# Fixed-width parsing


def _cell_is_missing(text: str, codes: tuple[str, ...]) -> bool:
    stripped = text.strip()
    for code in codes:
        if stripped == code.strip():
            return True
    if stripped and codes:
        try:
            value = float(stripped)
        except ValueError:
            return False
        for code in codes:
            try:
                if float(code) == value:
                    return True
            except ValueError:
                continue
    return False


def parse_fixed_width(data: "bytes | str", layout: LayoutSpec) -> Dataset:
    """Parse fixed-width records (one per line) against a byte layout.

    Raises ValueError naming the record number and field for short records
    and for non-numeric content not covered by a missing code.  The layout
    must declare exactly one ``kind="label"`` field holding 0 or 1.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    label_field = layout.label_field
    if label_field is None:
        raise ValueError("layout declares no label field")
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    if not lines:
        raise ValueError("no records in input")

    feat_fields = layout.feature_fields
    n, p = len(lines), len(feat_fields)
    values = np.full((n, p), np.nan, dtype=np.float64)
    missing = np.zeros((n, p), dtype=bool)
    labels = np.zeros(n, dtype=np.int64)

    for i, line in enumerate(lines):
        if line.endswith(b"\r"):
            line = line[:-1]
        for dest, f in enumerate(feat_fields + (label_field,)):
            if f.end > len(line):
                raise ValueError(
                    f"record {i}: field {f.name!r} needs bytes "
                    f"{f.start}..{f.end} but record has {len(line)}"
                )
            text = line[f.start : f.end].decode("utf-8", errors="replace")
            if f is label_field:
                stripped = text.strip()
                try:
                    lab = float(stripped)
                except ValueError:
                    raise ValueError(
                        f"record {i}: label field {f.name!r} is not numeric: {stripped!r}"
                    ) from None
                if lab not in (0.0, 1.0):
                    raise ValueError(
                        f"record {i}: label must be 0 or 1, got {stripped!r}"
                    )
                labels[i] = int(lab)
                continue
            if _cell_is_missing(text, f.missing_codes):
                missing[i, dest] = True
                continue
            stripped = text.strip()
            try:
                values[i, dest] = float(stripped)
            except ValueError:
                raise ValueError(
                    f"record {i}: field {f.name!r} is not numeric and matches "
                    f"no missing code: {stripped!r}"
                ) from None

    specs = tuple(
        FeatureSpec(
            name=f.name,
            kind=_coerce_kind(f.kind),
            source=f"bytes {f.start}:{f.end}",
        )
        for f in feat_fields
    )
    return Dataset(values, labels, specs, missing)


# ---------------------------------------------------------------------------
# Delimited parsing and serialization


def parse_delimited(
    text: str,
    kind_map: "Mapping[str, FeatureKind | str] | None" = None,
    label_column: str = "label",
) -> Dataset:
    """Parse comma-separated text with a header row into a Dataset.

    Empty cells are flagged missing.  Features named in ``kind_map`` take
    that kind; anything unmapped defaults to nutritional.
    """
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("delimited input has no header row") from None
    header = [h.strip() for h in header]
    if label_column not in header:
        raise ValueError(f"no {label_column!r} column in header")
    label_idx = header.index(label_column)
    feat_idx = [j for j, h in enumerate(header) if j != label_idx]
    names = [header[j] for j in feat_idx]
    if len(set(names)) != len(names):
        raise ValueError("duplicate feature names in header")

    kinds: dict[str, FeatureKind] = {}
    if kind_map:
        for key, kind in kind_map.items():
            if key not in names:
                raise ValueError(f"kind map names unknown feature {key!r}")
            kinds[key] = _coerce_kind(kind)

    rows = list(reader)
    if not rows:
        raise ValueError("delimited input has no data rows")
    n, p = len(rows), len(names)
    values = np.full((n, p), np.nan, dtype=np.float64)
    missing = np.zeros((n, p), dtype=bool)
    labels = np.zeros(n, dtype=np.int64)

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(
                f"row {i}: expected {len(header)} cells, got {len(row)}"
            )
        lab_text = row[label_idx].strip()
        try:
            lab = float(lab_text)
        except ValueError:
            raise ValueError(f"row {i}: label is not numeric: {lab_text!r}") from None
        if lab not in (0.0, 1.0):
            raise ValueError(f"row {i}: label must be 0 or 1, got {lab_text!r}")
        labels[i] = int(lab)
        for dest, j in enumerate(feat_idx):
            cell = row[j].strip()
            if cell == "":
                missing[i, dest] = True
                continue
            try:
                values[i, dest] = float(cell)
            except ValueError:
                raise ValueError(
                    f"row {i}: cell {header[j]!r} is not numeric: {cell!r}"
                ) from None

    specs = tuple(
        FeatureSpec(
            name=name,
            kind=kinds.get(name, FeatureKind.NUTRITIONAL),
            source=f"col {feat_idx[dest]}",
        )
        for dest, name in enumerate(names)
    )
    return Dataset(values, labels, specs, missing)


def to_delimited_text(ds: Dataset) -> str:
    """Render a Dataset as CSV: header, features then label, missing as empty."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.feature_names + ["label"])
    for i in range(ds.n):
        row: list[str] = []
        for j in range(ds.p):
            if ds.missing[i, j]:
                row.append("")
            else:
                row.append(repr(float(ds.values[i, j])))
        row.append(str(int(ds.labels[i])))
        writer.writerow(row)
    return buf.getvalue()


def _kinds_sidecar(path: Path) -> Path:
    return path.with_suffix(".kinds.json")


def save_dataset(ds: Dataset, path: "str | Path") -> Path:
    """Write the dataset as CSV plus a sidecar JSON mapping feature to kind."""
    path = Path(path)
    path.write_text(to_delimited_text(ds), encoding="utf-8", newline="")
    sidecar = _kinds_sidecar(path)
    kinds = {s.name: s.kind.value for s in ds.specs}
    sidecar.write_text(json.dumps(kinds, indent=2) + "\n", encoding="utf-8")
    return path


def load_dataset(
    path: "str | Path",
    kind_map: "Mapping[str, FeatureKind | str] | None" = None,
) -> Dataset:
    """Read a CSV dataset, picking up the kinds sidecar when present."""
    path = Path(path)
    if kind_map is None:
        sidecar = _kinds_sidecar(path)
        if sidecar.exists():
            kind_map = json.loads(sidecar.read_text(encoding="utf-8"))
    return parse_delimited(path.read_text(encoding="utf-8"), kind_map=kind_map)


def missing_counts(ds: Dataset) -> dict[str, int]:
    """Per-feature count of missing cells, in column order."""
    totals = ds.missing.sum(axis=0)
    return {s.name: int(totals[j]) for j, s in enumerate(ds.specs)}


# ---------------------------------------------------------------------------
# Synthetic cohorts


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic case/control cohort.

    Features are unit-variance Gaussians; each ``(column, effect)`` pair in
    ``informative`` shifts that column's mean by ``effect`` standard
    deviations in the cases.  Columns are nutritional first, then phichar.
    Cells go missing independently with probability ``missing_prob``.
    """

    n_cases: int
    n_controls: int
    p_nutritional: int
    p_phichar: int
    informative: tuple[tuple[int, float], ...] = ()
    missing_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_cases < 1 or self.n_controls < 1:
            raise ValueError("need at least one case and one control")
        if self.p_nutritional < 0 or self.p_phichar < 0:
            raise ValueError("feature counts must be non-negative")
        if self.p_nutritional + self.p_phichar < 1:
            raise ValueError("need at least one feature")
        if not 0.0 <= self.missing_prob < 1.0:
            raise ValueError("missing_prob must be in [0, 1)")
        p = self.p_nutritional + self.p_phichar
        for col, _effect in self.informative:
            if not 0 <= col < p:
                raise ValueError(f"informative column {col} out of range")


def synthetic_feature_specs(spec: SyntheticSpec) -> tuple[FeatureSpec, ...]:
    specs = []
    for i in range(spec.p_nutritional):
        specs.append(FeatureSpec(f"NUT{i + 1:03d}", FeatureKind.NUTRITIONAL))
    for i in range(spec.p_phichar):
        specs.append(FeatureSpec(f"PHI{i + 1:02d}", FeatureKind.PHI_CHAR))
    return tuple(specs)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw a deterministic synthetic cohort; cases first, then controls."""
    n = spec.n_cases + spec.n_controls
    p = spec.p_nutritional + spec.p_phichar
    rng = substream(spec.seed, "synthetic")
    values = rng.standard_normal((n, p))
    for col, effect in spec.informative:
        values[: spec.n_cases, col] += effect
    labels = np.zeros(n, dtype=np.int64)
    labels[: spec.n_cases] = 1
    if spec.missing_prob > 0.0:
        missing = rng.random((n, p)) < spec.missing_prob
        values[missing] = np.nan
    else:
        missing = np.zeros((n, p), dtype=bool)
    return Dataset(values, labels, synthetic_feature_specs(spec), missing)


# ---------------------------------------------------------------------------
# Example layout


_PHICHAR_CODES = (
    "AGE", "SEX", "RACE", "EDU", "MAR", "SMK",
    "BMI", "WHR", "WAIST", "SBP", "DBP", "PHI12",
)

_NUTRITIONAL_CODES = (
    "VBP", "GHP", "NCPNVK", "BUP", "UBP", "SSBTP", "SEP", "UAP",
    "NCPN3ME", "BCP", "C1P", "TIP", "RWP", "PBP", "URP", "FOP",
    "FBP", "UDP", "G1P", "BXP",
)


def example_survey_layout(field_width: int = 8) -> LayoutSpec:
    """A ready-made fixed-width layout: 93 nutritional and 12 phichar fields.

    The first twenty nutritional fields and eleven of the phichar fields use
    the survey abbreviations that ranked reports are expected to echo; the
    rest are numbered fillers.  All fields treat blanks as missing.
    """
    names: list[tuple[str, str]] = []
    for code in _NUTRITIONAL_CODES:
        names.append((code, "nutritional"))
    for i in range(len(_NUTRITIONAL_CODES), 93):
        names.append((f"NUT{i + 1:03d}", "nutritional"))
    for code in _PHICHAR_CODES:
        names.append((code, "phichar"))
    names.append(("label", "label"))

    fields = []
    for pos, (name, kind) in enumerate(names):
        fields.append(
            LayoutField(
                name=name,
                start=pos * field_width,
                width=field_width,
                vtype="numeric",
                missing_codes=("",),
                kind=kind,
            )
        )
    return LayoutSpec(fields)
