"""Balanced-subgroup evaluation pipeline.

The class imbalance is handled by slicing the majority class into as many
disjoint blocks as fit the minority count; each block pairs with the full
minority set to form a balanced subgroup.  Every subgroup runs stratified
k-fold cross-validation, once per random state, and each (subgroup, fold,
random-state) cell contributes one metric row and one mean-|SHAP| vector.
Cells are independent, so they may run on a worker pool; results are
aggregated in cell-coordinate order and do not depend on scheduling.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .dataset import Dataset, apply_missing_policy, select_feature_set
from .explain import mean_abs_shap
from .models.forest import ForestParams, fit_forest, predict_forest_batch
from .models.mlp import MlpParams, fit_mlp, predict_mlp_batch
from .models.scaler import fit_scaler, transform
from .models.svm import SvmParams, decision_function, fit_svm_smo
from .seeding import derive_seed, substream

MODEL_KINDS = ("forest", "svm", "mlp")
FEATURE_SETS = ("both", "nutritional", "phichar")


# ---------------------------------------------------------------------------
# Subgroups and folds


@dataclass(frozen=True)
class SubgroupPlan:
    """How the cohort splits into balanced subgroups.

    ``minority`` holds the case rows, shared by every subgroup;
    ``partitions`` holds one equally sized block of shuffled majority rows
    per subgroup; ``discarded`` is the remainder that fit no block.  When
    minority bootstrapping is on, ``minority_draws`` carries one resample
    of the minority per subgroup.
    """

    minority: np.ndarray
    partitions: tuple[np.ndarray, ...]
    discarded: np.ndarray
    minority_draws: tuple[np.ndarray, ...] | None = None

    @property
    def n_subgroups(self) -> int:
        return len(self.partitions)

    def subgroup_rows(self, g: int) -> np.ndarray:
        minority = (
            self.minority if self.minority_draws is None else self.minority_draws[g]
        )
        return np.concatenate([minority, self.partitions[g]])


def make_balanced_subgroups(
    labels, seed: int, bootstrap_minority: bool = False
) -> SubgroupPlan:
    """Slice the majority class into floor(majority/minority) blocks.

    Cases (label 1) are the minority; raises if they outnumber controls.
    The majority is shuffled deterministically before slicing and the
    remainder is discarded.
    """
    labels = np.asarray(labels)
    minority = np.flatnonzero(labels == 1)
    majority = np.flatnonzero(labels == 0)
    if minority.size == 0:
        raise ValueError("no cases (label 1) in the cohort")
    if majority.size < minority.size:
        raise ValueError(
            f"majority class ({majority.size}) is smaller than minority "
            f"({minority.size})"
        )
    rng = substream(seed, "subgroups")
    shuffled = majority[rng.permutation(majority.size)]
    n_groups = majority.size // minority.size
    block = minority.size
    partitions = tuple(
        shuffled[g * block : (g + 1) * block] for g in range(n_groups)
    )
    discarded = shuffled[n_groups * block :]
    draws = None
    if bootstrap_minority:
        draws = tuple(
            minority[substream(seed, "minority-boot", g).integers(0, block, block)]
            for g in range(n_groups)
        )
    return SubgroupPlan(
        minority=minority,
        partitions=partitions,
        discarded=discarded,
        minority_draws=draws,
    )


def kfold_split(indices, labels, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic stratified k-fold: k disjoint test-index arrays.

    ``labels`` aligns with ``indices``.  Each class is shuffled and dealt
    into k chunks whose sizes differ by at most one, so per-fold class
    counts stay within one sample of the proportional share.
    """
    indices = np.asarray(indices)
    labels = np.asarray(labels)
    if indices.shape != labels.shape:
        raise ValueError("indices and labels must align")
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > indices.size:
        raise ValueError("more folds than samples")
    rng = substream(seed, "kfold")
    parts: list[list[np.ndarray]] = [[] for _ in range(k)]
    # Each class hands its remainder to a rotating window of folds, so
    # total fold sizes also stay within one of each other.
    extra_start = 0
    for cls in (0, 1):
        pos = np.flatnonzero(labels == cls)
        if pos.size == 0:
            continue
        pos = pos[rng.permutation(pos.size)]
        rem = pos.size % k
        sizes = np.full(k, pos.size // k)
        for t in range(rem):
            sizes[(extra_start + t) % k] += 1
        extra_start = (extra_start + rem) % k
        off = 0
        for f in range(k):
            parts[f].append(indices[pos[off : off + sizes[f]]])
            off += sizes[f]
    return [np.sort(np.concatenate(p)) for p in parts]


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class FoldMetrics:
    """Accuracy, precision, and recall as fractions, with degeneracy flags.

    A metric whose denominator is zero scores 0.0 and is flagged so it can
    be counted rather than silently polluting averages.
    """

    accuracy: float
    precision: float
    recall: float
    precision_degenerate: bool = False
    recall_degenerate: bool = False


def evaluate_fold(predictions, truth) -> FoldMetrics:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise ValueError("predictions and truth must be equal-length vectors")
    if predictions.size == 0:
        raise ValueError("cannot score an empty fold")
    for arr, name in ((predictions, "predictions"), (truth, "truth")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must contain only 0 and 1")
    tp = int(np.sum((predictions == 1) & (truth == 1)))
    fp = int(np.sum((predictions == 1) & (truth == 0)))
    fn = int(np.sum((predictions == 0) & (truth == 1)))
    accuracy = float(np.mean(predictions == truth))
    prec_den = tp + fp
    rec_den = tp + fn
    precision = tp / prec_den if prec_den else 0.0
    recall = tp / rec_den if rec_den else 0.0
    return FoldMetrics(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        precision_degenerate=prec_den == 0,
        recall_degenerate=rec_den == 0,
    )


@dataclass(frozen=True)
class MetricSummary:
    """Mean and population standard deviation over all cells, in percent."""

    accuracy_mean: float
    accuracy_std: float
    precision_mean: float
    precision_std: float
    recall_mean: float
    recall_std: float
    n_cells: int
    precision_degenerate_cells: int = 0
    recall_degenerate_cells: int = 0


def summarize_cells(cells: "list[CellRecord]") -> MetricSummary:
    if not cells:
        raise ValueError("no cells to summarize")
    acc = np.array([c.metrics.accuracy for c in cells])
    pre = np.array([c.metrics.precision for c in cells])
    rec = np.array([c.metrics.recall for c in cells])
    return MetricSummary(
        accuracy_mean=float(acc.mean() * 100.0),
        accuracy_std=float(acc.std() * 100.0),
        precision_mean=float(pre.mean() * 100.0),
        precision_std=float(pre.std() * 100.0),
        recall_mean=float(rec.mean() * 100.0),
        recall_std=float(rec.std() * 100.0),
        n_cells=len(cells),
        precision_degenerate_cells=sum(c.metrics.precision_degenerate for c in cells),
        recall_degenerate_cells=sum(c.metrics.recall_degenerate for c in cells),
    )


# ---------------------------------------------------------------------------
# Experiment configuration and execution


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; defaults follow the reference protocol."""

    model: str = "forest"
    feature_set: str = "both"
    k: int = 10
    n_random_states: int = 1
    seed: int = 0
    pairing_label: str = "case-vs-control"
    bootstrap_minority: bool = False
    forest: ForestParams = field(default_factory=ForestParams)
    svm: SvmParams = field(default_factory=SvmParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    shap_permutations: int = 20

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}; pick from {MODEL_KINDS}")
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(
                f"unknown feature set {self.feature_set!r}; pick from {FEATURE_SETS}"
            )
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.n_random_states < 1:
            raise ValueError("n_random_states must be >= 1")
        if self.shap_permutations < 1:
            raise ValueError("shap_permutations must be >= 1")


@dataclass(frozen=True)
class CellRecord:
    subgroup: int
    fold: int
    random_state: int
    metrics: FoldMetrics


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: MetricSummary
    cells: list[CellRecord]
    importances: list[np.ndarray]
    feature_names: list[str]
    plan: SubgroupPlan


def _cell_seed(config: ExperimentConfig, what: str, g: int, f: int, r: int) -> int:
    return derive_seed(config.seed, what, g, f, r)


def run_cell(
    values: np.ndarray,
    labels: np.ndarray,
    config: ExperimentConfig,
    g: int,
    f: int,
    r: int,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
) -> tuple[FoldMetrics, np.ndarray]:
    """Train, score, and explain one (subgroup, fold, random-state) cell."""
    X_train = values[train_idx]
    y_train = labels[train_idx]
    X_test = values[test_idx]
    y_test = labels[test_idx]
    model_seed = _cell_seed(config, "model", g, f, r)

    if config.model == "forest":
        model = fit_forest(X_train, y_train, config.forest, seed=model_seed)
        probs = predict_forest_batch(model, X_test)
        pred = (probs >= 0.5).astype(np.int64)
        importance = mean_abs_shap(model, X_test)
    elif config.model == "svm":
        scaler = fit_scaler(X_train)
        Xtr = transform(scaler, X_train)
        Xte = transform(scaler, X_test)
        model = fit_svm_smo(
            Xtr,
            y_train,
            C=config.svm.C,
            gamma=config.svm.gamma,
            tol=config.svm.tol,
            max_passes=config.svm.max_passes,
        )
        dec = decision_function(model, Xte)
        pred = (dec >= 0.0).astype(np.int64)
        importance = mean_abs_shap(
            model,
            Xte,
            background=Xtr,
            n_permutations=config.shap_permutations,
            seed=_cell_seed(config, "shap", g, f, r),
        )
    else:
        scaler = fit_scaler(X_train)
        Xtr = transform(scaler, X_train)
        Xte = transform(scaler, X_test)
        model = fit_mlp(Xtr, y_train, config.mlp, seed=model_seed)
        score = predict_mlp_batch(model, Xte)
        pred = (score >= 0.5).astype(np.int64)
        importance = mean_abs_shap(
            model,
            Xte,
            background=Xtr,
            n_permutations=config.shap_permutations,
            seed=_cell_seed(config, "shap", g, f, r),
        )

    return evaluate_fold(pred, y_test), importance


_WORKER_CTX: dict = {}


def _init_worker(values, labels, config, tasks):
    _WORKER_CTX["values"] = values
    _WORKER_CTX["labels"] = labels
    _WORKER_CTX["config"] = config
    _WORKER_CTX["tasks"] = tasks


def _run_cell_guarded(values, labels, config, g, f, r, train_idx, test_idx):
    """Run one cell, tagging any failure with the cell's coordinates."""
    try:
        return run_cell(values, labels, config, g, f, r, train_idx, test_idx)
    except Exception as exc:
        raise RuntimeError(
            f"cell (subgroup={g}, fold={f}, random_state={r}) failed: {exc}"
        ) from exc


def _run_cell_by_id(task_id: int):
    g, f, r, train_idx, test_idx = _WORKER_CTX["tasks"][task_id]
    metrics, importance = _run_cell_guarded(
        _WORKER_CTX["values"],
        _WORKER_CTX["labels"],
        _WORKER_CTX["config"],
        g,
        f,
        r,
        train_idx,
        test_idx,
    )
    return task_id, metrics, importance


def plan_cells(ds: Dataset, config: ExperimentConfig):
    """The subgroup plan plus one (g, f, r, train, test) task per cell."""
    plan = make_balanced_subgroups(
        ds.labels, seed=config.seed, bootstrap_minority=config.bootstrap_minority
    )
    tasks = []
    for g in range(plan.n_subgroups):
        rows = plan.subgroup_rows(g)
        folds = kfold_split(
            rows, ds.labels[rows], config.k, seed=derive_seed(config.seed, "folds", g)
        )
        for f in range(config.k):
            test_idx = folds[f]
            train_idx = np.sort(
                np.concatenate([folds[j] for j in range(config.k) if j != f])
            )
            for r in range(config.n_random_states):
                tasks.append((g, f, r, train_idx, test_idx))
    return plan, tasks


def run_experiment(
    ds: Dataset, config: ExperimentConfig, n_workers: int = 1
) -> ExperimentResult:
    """Run every cell of the experiment grid and aggregate.

    Results are byte-identical for any ``n_workers``: each cell derives its
    own random substreams from the master seed, and aggregation sorts by
    cell coordinates.
    """
    ds = apply_missing_policy(select_feature_set(ds, config.feature_set))
    plan, tasks = plan_cells(ds, config)
    values, labels = ds.values, ds.labels

    results: list[tuple[int, FoldMetrics, np.ndarray]] = []
    if n_workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=n_workers,
            initializer=_init_worker,
            initargs=(values, labels, config, tasks),
        ) as pool:
            for item in pool.map(_run_cell_by_id, range(len(tasks)), chunksize=8):
                results.append(item)
    else:
        for i, (g, f, r, train_idx, test_idx) in enumerate(tasks):
            metrics, importance = _run_cell_guarded(
                values, labels, config, g, f, r, train_idx, test_idx
            )
            results.append((i, metrics, importance))

    results.sort(key=lambda item: item[0])
    cells = [
        CellRecord(
            subgroup=tasks[i][0],
            fold=tasks[i][1],
            random_state=tasks[i][2],
            metrics=m,
        )
        for i, m, _ in results
    ]
    importances = [imp for _, _, imp in results]
    return ExperimentResult(
        config=config,
        summary=summarize_cells(cells),
        cells=cells,
        importances=importances,
        feature_names=ds.feature_names,
        plan=plan,
    )


# ---------------------------------------------------------------------------
# Importance aggregation and report formatting


@dataclass(frozen=True)
class RankedImportanceReport:
    """Features with softmax-normalized weights in percent, best first."""

    entries: tuple[tuple[str, float], ...]

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, w in self.entries))

    def top(self, k: int) -> tuple[tuple[str, float], ...]:
        return self.entries[:k]


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically safe softmax (shifts by the max before exponentiating)."""
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def aggregate_importance(vectors, names) -> RankedImportanceReport:
    """Softmax each per-cell importance vector, average, rank in percent.

    Ties break by feature name so the ordering is total and reproducible.
    """
    names = list(names)
    if not vectors:
        raise ValueError("no importance vectors to aggregate")
    mat = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    if mat.shape[1] != len(names):
        raise ValueError("importance vectors do not match the feature names")
    probs = np.stack([softmax(row) for row in mat])
    weights = probs.mean(axis=0) * 100.0
    order = sorted(range(len(names)), key=lambda j: (-weights[j], names[j]))
    return RankedImportanceReport(
        entries=tuple((names[j], float(weights[j])) for j in order)
    )


def _round_half_away(x: float, places: int) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def format_mean_std(mean_pct: float, std_pct: float) -> str:
    """Render a metric as ``mean(std)`` with one decimal, ties away from zero."""
    return f"{_round_half_away(mean_pct, 1)}({_round_half_away(std_pct, 1)})"


def format_weight(weight_pct: float) -> str:
    """Render an importance weight percent with two decimals."""
    return _round_half_away(weight_pct, 2)


def format_score_rows(rows: "list[tuple[str, str, MetricSummary]]") -> str:
    lines = [
        "| Model | Feature set | Accuracy | Precision | Recall |",
        "| --- | --- | --- | --- | --- |",
    ]
    for model, feature_set, s in rows:
        lines.append(
            "| {} | {} | {} | {} | {} |".format(
                model,
                feature_set,
                format_mean_std(s.accuracy_mean, s.accuracy_std),
                format_mean_std(s.precision_mean, s.precision_std),
                format_mean_std(s.recall_mean, s.recall_std),
            )
        )
    return "\n".join(lines)


def format_importance_rows(ranked: RankedImportanceReport, top_k: int) -> str:
    lines = [
        "| Rank | Feature | Weight (%) |",
        "| --- | --- | --- |",
    ]
    for rank, (name, weight) in enumerate(ranked.top(top_k), start=1):
        lines.append(f"| {rank} | {name} | {format_weight(weight)} |")
    return "\n".join(lines)


def format_report(
    summary: MetricSummary,
    ranked: RankedImportanceReport,
    model: str = "forest",
    feature_set: str = "both",
    top_k: int = 10,
) -> str:
    """One experiment's scores and top features as a small markdown report."""
    parts = [
        "# Classification report",
        "",
        "## Scores",
        "",
        format_score_rows([(model, feature_set, summary)]),
        "",
        f"## Top {top_k} features ({model}, {feature_set})",
        "",
        format_importance_rows(ranked, top_k),
        "",
    ]
    return "\n".join(parts)
