"""Command line interface.

Five subcommands cover the workflow: ``ingest`` normalizes raw files into
the canonical CSV form, ``synth`` draws a synthetic cohort, ``run``
executes the balanced-subgroup experiment grid and writes metrics,
importance, and a report, ``explain`` attributes saved-model predictions,
and ``report`` re-renders the report from saved outputs.

Runs are reproducible: the master seed is required, every output file is
deterministic (no timestamps), and ``run`` echoes its fully resolved
configuration to ``manifest.json``, which can itself be passed back via
``--config``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (
    Dataset,
    SyntheticSpec,
    apply_missing_policy,
    example_survey_layout,
    generate_synthetic,
    load_dataset,
    load_layout,
    missing_counts,
    parse_fixed_width,
    save_dataset,
    select_feature_set,
)
from .explain import (
    exact_shap_oracle,
    forest_shap,
    sampling_shap,
    explanation_records,
)
from .models import (
    ForestModel,
    ForestParams,
    MlpParams,
    SvmModel,
    SvmParams,
    fit_forest,
    fit_mlp,
    fit_scaler,
    fit_svm_smo,
    load_model,
    predict_mlp_batch,
    save_model,
    transform,
)
from .models.svm import decision_function
from .pipeline import (
    FEATURE_SETS,
    MODEL_KINDS,
    CellRecord,
    ExperimentConfig,
    FoldMetrics,
    RankedImportanceReport,
    aggregate_importance,
    format_importance_rows,
    format_score_rows,
    run_experiment,
    summarize_cells,
)
from .seeding import derive_seed

OUT_DIR_ENV = "COHORTSHAP_OUT"

METRICS_HEADER = [
    "row_type",
    "model",
    "feature_set",
    "subgroup",
    "fold",
    "random_state",
    "accuracy",
    "precision",
    "recall",
    "precision_degenerate",
    "recall_degenerate",
    "n_cells",
]

IMPORTANCE_HEADER = ["model", "feature_set", "rank", "feature", "weight_pct"]


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    """Fully resolved settings for one ``run`` invocation."""

    dataset: str | None = None
    synth: str | None = None
    models: tuple[str, ...] = ("forest",)
    feature_sets: tuple[str, ...] = ("both",)
    k: int = 10
    n_random_states: int = 1
    seed: int | None = None
    out_dir: str = "out"
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    bootstrap_minority: bool = False
    forest: ForestParams = field(default_factory=ForestParams)
    svm: SvmParams = field(default_factory=SvmParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    shap_permutations: int = 20
    save_models: bool = False
    top_k: int = 10

    def validate(self) -> None:
        sources = [s for s in (self.dataset, self.synth) if s]
        if len(sources) != 1:
            raise ValueError("exactly one input source (--dataset or --synth) is required")
        if self.seed is None:
            raise ValueError("a master --seed is required; runs are never clock-seeded")
        if not self.models:
            raise ValueError("no models selected")
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ValueError(f"unknown model {m!r}; pick from {MODEL_KINDS}")
        for fs in self.feature_sets:
            if fs not in FEATURE_SETS:
                raise ValueError(f"unknown feature set {fs!r}; pick from {FEATURE_SETS}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_manifest(self) -> dict:
        return {
            "command": "run",
            "dataset": self.dataset,
            "synth": self.synth,
            "models": list(self.models),
            "feature_sets": list(self.feature_sets),
            "k": self.k,
            "n_random_states": self.n_random_states,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "workers": self.workers,
            "bootstrap_minority": self.bootstrap_minority,
            "forest": {
                "n_trees": self.forest.n_trees,
                "min_leaf": self.forest.min_leaf,
                "features_per_split": self.forest.features_per_split,
                "bootstrap": self.forest.bootstrap,
            },
            "svm": {
                "C": self.svm.C,
                "gamma": self.svm.gamma,
                "tol": self.svm.tol,
                "max_passes": self.svm.max_passes,
            },
            "mlp": {
                "learning_rate": self.mlp.learning_rate,
                "epochs": self.mlp.epochs,
                "batch_size": self.mlp.batch_size,
            },
            "shap_permutations": self.shap_permutations,
            "save_models": self.save_models,
            "top_k": self.top_k,
        }

    @classmethod
    def from_sources(cls, config_file: dict | None, args: argparse.Namespace) -> "RunConfig":
        cfg = cls()
        if os.environ.get(OUT_DIR_ENV):
            cfg.out_dir = os.environ[OUT_DIR_ENV]
        if config_file:
            cfg = _apply_config_dict(cfg, config_file)
        return _apply_run_flags(cfg, args)


def _apply_config_dict(cfg: RunConfig, doc: dict) -> RunConfig:
    simple = {
        "dataset": str,
        "synth": str,
        "k": int,
        "n_random_states": int,
        "seed": int,
        "out_dir": str,
        "workers": int,
        "bootstrap_minority": bool,
        "shap_permutations": int,
        "save_models": bool,
        "top_k": int,
    }
    for key, conv in simple.items():
        if doc.get(key) is not None:
            setattr(cfg, key, conv(doc[key]))
    if doc.get("models"):
        cfg.models = tuple(doc["models"])
    if doc.get("feature_sets"):
        cfg.feature_sets = tuple(doc["feature_sets"])
    if doc.get("forest"):
        cfg.forest = ForestParams(**doc["forest"])
    if doc.get("svm"):
        cfg.svm = SvmParams(**doc["svm"])
    if doc.get("mlp"):
        cfg.mlp = MlpParams(**doc["mlp"])
    return cfg


def _apply_run_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.dataset is not None:
        cfg.dataset = args.dataset
    if args.synth is not None:
        cfg.synth = args.synth
    if args.models is not None:
        cfg.models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    if args.feature_sets is not None:
        cfg.feature_sets = tuple(
            f.strip() for f in args.feature_sets.split(",") if f.strip()
        )
    if args.k is not None:
        cfg.k = args.k
    if args.random_states is not None:
        cfg.n_random_states = args.random_states
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.trees is not None:
        cfg.forest = ForestParams(
            n_trees=args.trees,
            min_leaf=cfg.forest.min_leaf,
            features_per_split=cfg.forest.features_per_split,
            bootstrap=cfg.forest.bootstrap,
        )
    if args.shap_permutations is not None:
        cfg.shap_permutations = args.shap_permutations
    if args.bootstrap_minority:
        cfg.bootstrap_minority = True
    if args.save_models:
        cfg.save_models = True
    return cfg


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.emit_example_layout:
        Path(args.emit_example_layout).write_text(
            example_survey_layout().to_json(), encoding="utf-8"
        )
        print(f"wrote example layout to {args.emit_example_layout}")
        if not args.input:
            return 0
    if not args.input or not args.output:
        raise ValueError("ingest needs --input and --output")
    if bool(args.layout) == bool(args.delimited):
        raise ValueError("pick exactly one of --layout (fixed width) or --delimited")

    if args.layout:
        layout = load_layout(args.layout)
        ds = parse_fixed_width(Path(args.input).read_bytes(), layout)
    else:
        kind_map = None
        if args.kinds:
            kind_map = json.loads(Path(args.kinds).read_text(encoding="utf-8"))
        ds = load_dataset(args.input, kind_map=kind_map)

    save_dataset(ds, args.output)
    audit_path = args.audit or str(Path(args.output).with_suffix(".audit.json"))
    _write_audit(ds, audit_path)
    total_missing = int(ds.missing.sum())
    print(
        f"ingested {ds.n} rows, {ds.p} features, {total_missing} missing cells "
        f"({100.0 * total_missing / (ds.n * ds.p):.2f}%)"
    )
    print(f"dataset: {args.output}")
    print(f"audit: {audit_path}")
    return 0


def _write_audit(ds: Dataset, path: str) -> None:
    total = int(ds.missing.sum())
    doc = {
        "n_rows": ds.n,
        "n_features": ds.p,
        "missing_cells": total,
        "missing_fraction": total / (ds.n * ds.p),
        "per_feature": missing_counts(ds),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synth


def _parse_informative(text: str | None) -> tuple[tuple[int, float], ...]:
    if not text:
        return ()
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        col, _, eff = part.partition(":")
        out.append((int(col), float(eff) if eff else 1.0))
    return tuple(out)


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_cases=args.cases,
        n_controls=args.controls,
        p_nutritional=args.nutritional,
        p_phichar=args.phichar,
        informative=_parse_informative(args.informative),
        missing_prob=args.missing_prob,
        seed=args.seed,
    )
    ds = generate_synthetic(spec)
    save_dataset(ds, args.output)
    audit_path = str(Path(args.output).with_suffix(".audit.json"))
    _write_audit(ds, audit_path)
    manifest = {
        "command": "synth",
        "n_cases": spec.n_cases,
        "n_controls": spec.n_controls,
        "p_nutritional": spec.p_nutritional,
        "p_phichar": spec.p_phichar,
        "informative": [[c, e] for c, e in spec.informative],
        "informative_features": [ds.feature_names[c] for c, _ in spec.informative],
        "missing_prob": spec.missing_prob,
        "seed": spec.seed,
        "output": str(args.output),
    }
    manifest_path = Path(args.output).with_suffix(".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(
        f"synthesized {ds.n} rows ({spec.n_cases} cases, {spec.n_controls} controls), "
        f"{ds.p} features"
    )
    print(f"dataset: {args.output}")
    print(f"manifest: {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# run


def _load_run_input(cfg: RunConfig) -> Dataset:
    if cfg.dataset:
        return load_dataset(cfg.dataset)
    doc = json.loads(Path(cfg.synth).read_text(encoding="utf-8"))
    spec = SyntheticSpec(
        n_cases=int(doc["n_cases"]),
        n_controls=int(doc["n_controls"]),
        p_nutritional=int(doc["p_nutritional"]),
        p_phichar=int(doc["p_phichar"]),
        informative=tuple((int(c), float(e)) for c, e in doc.get("informative", [])),
        missing_prob=float(doc.get("missing_prob", 0.0)),
        seed=int(doc.get("seed", 0)),
    )
    return generate_synthetic(spec)


def _metrics_csv(results) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for res in results:
        model, fs = res.config.model, res.config.feature_set
        for cell in res.cells:
            m = cell.metrics
            writer.writerow(
                [
                    "cell",
                    model,
                    fs,
                    cell.subgroup,
                    cell.fold,
                    cell.random_state,
                    repr(m.accuracy),
                    repr(m.precision),
                    repr(m.recall),
                    int(m.precision_degenerate),
                    int(m.recall_degenerate),
                    "",
                ]
            )
        s = res.summary
        writer.writerow(
            [
                "summary_mean_pct",
                model,
                fs,
                "",
                "",
                "",
                repr(s.accuracy_mean),
                repr(s.precision_mean),
                repr(s.recall_mean),
                s.precision_degenerate_cells,
                s.recall_degenerate_cells,
                s.n_cells,
            ]
        )
        writer.writerow(
            [
                "summary_std_pct",
                model,
                fs,
                "",
                "",
                "",
                repr(s.accuracy_std),
                repr(s.precision_std),
                repr(s.recall_std),
                s.precision_degenerate_cells,
                s.recall_degenerate_cells,
                s.n_cells,
            ]
        )
    return buf.getvalue()


def _importance_csv(ranked_by_combo) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(IMPORTANCE_HEADER)
    for (model, fs), ranked in ranked_by_combo.items():
        for rank, (name, weight) in enumerate(ranked.entries, start=1):
            writer.writerow([model, fs, rank, name, repr(weight)])
    return buf.getvalue()


def _render_report(score_rows, ranked_by_combo, top_k: int) -> str:
    parts = ["# Classification report", "", "## Scores", "", format_score_rows(score_rows)]
    for (model, fs), ranked in ranked_by_combo.items():
        parts += [
            "",
            f"## Top {top_k} features ({model}, {fs})",
            "",
            format_importance_rows(ranked, top_k),
        ]
    parts.append("")
    return "\n".join(parts)


def _save_final_models(cfg: RunConfig, ds: Dataset, out: Path) -> list[str]:
    """Fit one model per combo on the first balanced subgroup and save it.

    The experiment protocol trains only on balanced data, so the saved
    artifact does too; it exists to feed ``explain``.
    """
    from .pipeline import make_balanced_subgroups

    written = []
    for model_kind in cfg.models:
        for fs in cfg.feature_sets:
            sub = apply_missing_policy(select_feature_set(ds, fs))
            plan = make_balanced_subgroups(sub.labels, seed=cfg.seed)
            rows = plan.subgroup_rows(0)
            X = sub.values[rows]
            y = sub.labels[rows]
            seed = derive_seed(cfg.seed, "final", model_kind, fs)
            scaler = None
            if model_kind == "forest":
                model = fit_forest(X, y, cfg.forest, seed=seed)
            elif model_kind == "svm":
                scaler = fit_scaler(X)
                model = fit_svm_smo(
                    transform(scaler, X),
                    y,
                    C=cfg.svm.C,
                    gamma=cfg.svm.gamma,
                    tol=cfg.svm.tol,
                    max_passes=cfg.svm.max_passes,
                )
            else:
                scaler = fit_scaler(X)
                model = fit_mlp(transform(scaler, X), y, cfg.mlp, seed=seed)
            path = out / f"model_{model_kind}_{fs}.json"
            save_model(
                path,
                model,
                scaler=scaler,
                meta={"model": model_kind, "feature_set": fs, "seed": seed},
            )
            written.append(str(path))
    return written


def cmd_run(args: argparse.Namespace) -> int:
    config_file = None
    if args.config:
        config_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
    cfg = RunConfig.from_sources(config_file, args)
    cfg.validate()

    ds = _load_run_input(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results = []
    ranked_by_combo: dict[tuple[str, str], RankedImportanceReport] = {}
    for model_kind in cfg.models:
        for fs in cfg.feature_sets:
            exp_config = ExperimentConfig(
                model=model_kind,
                feature_set=fs,
                k=cfg.k,
                n_random_states=cfg.n_random_states,
                seed=cfg.seed,
                bootstrap_minority=cfg.bootstrap_minority,
                forest=cfg.forest,
                svm=cfg.svm,
                mlp=cfg.mlp,
                shap_permutations=cfg.shap_permutations,
            )
            res = run_experiment(ds, exp_config, n_workers=cfg.workers)
            ranked = aggregate_importance(res.importances, res.feature_names)
            total = ranked.total_weight
            if abs(total - 100.0) > 1e-6:
                raise RuntimeError(
                    f"importance weights sum to {total!r}, expected 100"
                )
            results.append(res)
            ranked_by_combo[(model_kind, fs)] = ranked
            print(
                f"[{model_kind}/{fs}] {res.summary.n_cells} cells, accuracy "
                f"{res.summary.accuracy_mean:.1f}({res.summary.accuracy_std:.1f})"
            )

    score_rows = [(r.config.model, r.config.feature_set, r.summary) for r in results]
    outputs = {
        out / "metrics.csv": _metrics_csv(results),
        out / "importance.csv": _importance_csv(ranked_by_combo),
        out / "report.md": _render_report(score_rows, ranked_by_combo, cfg.top_k),
        out / "manifest.json": json.dumps(cfg.to_manifest(), indent=2) + "\n",
    }
    written: list[Path] = []
    try:
        for path, content in outputs.items():
            path.write_text(content, encoding="utf-8", newline="")
            written.append(path)
        if cfg.save_models:
            _save_final_models(cfg, ds, out)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    for path in outputs:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# explain


def _parse_rows(text: str, n: int) -> list[int]:
    if text == "all":
        return list(range(n))
    rows = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, _, b = part.partition("-")
            rows.extend(range(int(a), int(b) + 1))
        else:
            rows.append(int(part))
    for r in rows:
        if not 0 <= r < n:
            raise ValueError(f"row {r} out of range (dataset has {n} rows)")
    return rows


def cmd_explain(args: argparse.Namespace) -> int:
    model, scaler, meta = load_model(args.model)
    fs = (meta or {}).get("feature_set", "both")
    ds = apply_missing_policy(select_feature_set(load_dataset(args.dataset), fs))
    rows = _parse_rows(args.rows, ds.n)
    X = ds.values[rows]
    if scaler is not None:
        X_model = transform(scaler, X)
        background = transform(scaler, ds.values)
    else:
        X_model = X
        background = ds.values

    explanations = []
    if isinstance(model, ForestModel):
        for i in range(X_model.shape[0]):
            explanations.append(forest_shap(model, X_model[i]))
    else:
        if isinstance(model, SvmModel):
            predict_fn = lambda M: decision_function(model, M)
        else:
            predict_fn = lambda M: predict_mlp_batch(model, M)
        for i in range(X_model.shape[0]):
            explanations.append(
                sampling_shap(
                    predict_fn,
                    X_model[i],
                    background,
                    n_permutations=args.permutations,
                    seed=derive_seed(args.seed, "explain", rows[i]),
                )
            )

    if args.oracle:
        if not isinstance(model, ForestModel):
            raise ValueError("--oracle applies to tree models only")
        if model.n_features > 12:
            raise ValueError(
                "--oracle enumerates feature subsets and is capped at 12 features"
            )
        worst = 0.0
        for i, exp in zip(range(X_model.shape[0]), explanations):
            oracle = exact_shap_oracle(model, X_model[i])
            dev = float(np.max(np.abs(oracle.contributions - exp.contributions)))
            worst = max(worst, dev)
        print(f"max deviation from exact enumeration: {worst:.3e}")

    text = explanation_records(explanations, ds.feature_names)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="")
        print(f"wrote {len(rows)} explanations to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# report


def _read_metrics_csv(path: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cells: dict[tuple[str, str], list[CellRecord]] = {}
        order: list[tuple[str, str]] = []
        for row in reader:
            if row["row_type"] != "cell":
                continue
            key = (row["model"], row["feature_set"])
            if key not in cells:
                cells[key] = []
                order.append(key)
            cells[key].append(
                CellRecord(
                    subgroup=int(row["subgroup"]),
                    fold=int(row["fold"]),
                    random_state=int(row["random_state"]),
                    metrics=FoldMetrics(
                        accuracy=float(row["accuracy"]),
                        precision=float(row["precision"]),
                        recall=float(row["recall"]),
                        precision_degenerate=bool(int(row["precision_degenerate"])),
                        recall_degenerate=bool(int(row["recall_degenerate"])),
                    ),
                )
            )
    return order, cells


def _read_importance_csv(path: str):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        entries: dict[tuple[str, str], list[tuple[int, str, float]]] = {}
        for row in reader:
            key = (row["model"], row["feature_set"])
            entries.setdefault(key, []).append(
                (int(row["rank"]), row["feature"], float(row["weight_pct"]))
            )
    ranked = {}
    for key, rows in entries.items():
        rows.sort(key=lambda t: t[0])
        ranked[key] = RankedImportanceReport(
            entries=tuple((name, weight) for _, name, weight in rows)
        )
    return ranked


def cmd_report(args: argparse.Namespace) -> int:
    order, cells = _read_metrics_csv(args.metrics)
    ranked_by_combo = _read_importance_csv(args.importance)
    score_rows = [(m, fs, summarize_cells(cells[(m, fs)])) for m, fs in order]
    ranked_ordered = {
        key: ranked_by_combo[key] for key in order if key in ranked_by_combo
    }
    text = _render_report(score_rows, ranked_ordered, args.top)
    Path(args.output).write_text(text, encoding="utf-8", newline="")
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortshap",
        description=(
            "Balanced-subgroup classification with Shapley feature attribution"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a raw file into the canonical CSV")
    p.add_argument("--input", help="raw input file")
    p.add_argument("--layout", help="fixed-width layout JSON")
    p.add_argument("--delimited", action="store_true", help="input is delimited text")
    p.add_argument("--kinds", help="JSON mapping feature name to kind (delimited mode)")
    p.add_argument("--output", help="canonical dataset CSV to write")
    p.add_argument("--audit", help="audit JSON path (default: <output>.audit.json)")
    p.add_argument(
        "--emit-example-layout",
        metavar="PATH",
        help="write the bundled example layout JSON and exit if no --input",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="draw a synthetic cohort")
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--controls", type=int, required=True)
    p.add_argument("--nutritional", type=int, default=93)
    p.add_argument("--phichar", type=int, default=12)
    p.add_argument(
        "--informative",
        help="comma list of COL:EFFECT mean shifts for cases, e.g. '0:1.0,7:0.5'",
    )
    p.add_argument("--missing-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the balanced-subgroup experiment grid")
    p.add_argument("--config", help="JSON config (a previous manifest.json works)")
    p.add_argument("--dataset", help="canonical dataset CSV")
    p.add_argument("--synth", help="synthetic spec JSON as the input source")
    p.add_argument("--models", help="comma list from: forest,svm,mlp")
    p.add_argument("--feature-sets", dest="feature_sets", help="comma list from: both,nutritional,phichar")
    p.add_argument("--k", type=int, help="folds per subgroup (default 10)")
    p.add_argument("--random-states", dest="random_states", type=int)
    p.add_argument("--seed", type=int, help="master seed (required)")
    p.add_argument("--out", help=f"output directory (or ${OUT_DIR_ENV})")
    p.add_argument("--workers", type=int, help="cell worker processes")
    p.add_argument("--trees", type=int, help="forest size override")
    p.add_argument("--shap-permutations", dest="shap_permutations", type=int)
    p.add_argument("--bootstrap-minority", action="store_true")
    p.add_argument(
        "--save-models",
        action="store_true",
        help="also save one model per combo, fit on the first balanced subgroup",
    )
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explain", help="attribute saved-model predictions")
    p.add_argument("--model", required=True, help="model JSON from run --save-models")
    p.add_argument("--dataset", required=True)
    p.add_argument("--rows", default="0-9", help="rows to explain, e.g. '0,3,7' or '0-19' or 'all'")
    p.add_argument("--oracle", action="store_true", help="cross-check against subset enumeration (tree models, p <= 12)")
    p.add_argument("--permutations", type=int, default=200, help="sampling permutations for svm/mlp models")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="explanation CSV (default: stdout)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="re-render report.md from saved outputs")
    p.add_argument("--metrics", required=True)
    p.add_argument("--importance", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
