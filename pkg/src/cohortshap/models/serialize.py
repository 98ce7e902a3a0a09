"""Model persistence as self-describing JSON.

Floats are serialized with Python's shortest round-trip repr, so a loaded
model predicts bit-for-bit identically to the one that was saved.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import FlatTree, ForestModel, ForestParams
from .mlp import MlpModel
from .scaler import Scaler
from .svm import SvmModel


def _forest_payload(model: ForestModel) -> dict:
    return {
        "params": {
            "n_trees": model.params.n_trees,
            "min_leaf": model.params.min_leaf,
            "features_per_split": model.params.features_per_split,
            "bootstrap": model.params.bootstrap,
        },
        "seed": model.seed,
        "n_features": model.n_features,
        "trees": [
            {
                "feature": flat.feature.tolist(),
                "threshold": flat.threshold.tolist(),
                "left": flat.left.tolist(),
                "right": flat.right.tolist(),
                "value": flat.value.tolist(),
                "cover": flat.cover.tolist(),
                "max_depth": flat.max_depth,
            }
            for flat in model.flats
        ],
    }


def _forest_from_payload(data: dict) -> ForestModel:
    flats = [
        FlatTree(
            np.asarray(t["feature"], np.int32),
            np.asarray(t["threshold"], np.float64),
            np.asarray(t["left"], np.int32),
            np.asarray(t["right"], np.int32),
            np.asarray(t["value"], np.float64),
            np.asarray(t["cover"], np.float64),
            int(t["max_depth"]),
        )
        for t in data["trees"]
    ]
    return ForestModel(
        params=ForestParams(**data["params"]),
        seed=int(data["seed"]),
        n_features=int(data["n_features"]),
        flats=flats,
    )


def _svm_payload(model: SvmModel) -> dict:
    return {
        "support_vectors": model.support_vectors.tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "bias": model.bias,
        "gamma": model.gamma,
        "C": model.C,
        "support_indices": model.support_indices.tolist(),
    }


def _svm_from_payload(data: dict) -> SvmModel:
    return SvmModel(
        support_vectors=np.asarray(data["support_vectors"], np.float64).reshape(
            len(data["support_vectors"]), -1
        ),
        dual_coef=np.asarray(data["dual_coef"], np.float64),
        bias=float(data["bias"]),
        gamma=float(data["gamma"]),
        C=float(data["C"]),
        support_indices=np.asarray(data["support_indices"], np.int64),
        dual_objective_path=(),
    )


def _mlp_payload(model: MlpModel) -> dict:
    return {
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "W2": model.W2.tolist(),
        "b2": model.b2.tolist(),
        "w3": model.w3.tolist(),
        "b3": model.b3,
    }


def _mlp_from_payload(data: dict) -> MlpModel:
    return MlpModel(
        W1=np.asarray(data["W1"], np.float64),
        b1=np.asarray(data["b1"], np.float64),
        W2=np.asarray(data["W2"], np.float64),
        b2=np.asarray(data["b2"], np.float64),
        w3=np.asarray(data["w3"], np.float64),
        b3=float(data["b3"]),
    )


def save_model(path, model, scaler: Scaler | None = None, meta: dict | None = None) -> Path:
    """Write a model (and the scaler it expects, if any) to JSON.

    ``meta`` is an optional JSON-serializable dict stored verbatim, for
    callers that need to remember how the model was produced (e.g. which
    feature set it was trained on).
    """
    if isinstance(model, ForestModel):
        kind, payload = "forest", _forest_payload(model)
    elif isinstance(model, SvmModel):
        kind, payload = "svm", _svm_payload(model)
    elif isinstance(model, MlpModel):
        kind, payload = "mlp", _mlp_payload(model)
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    doc = {
        "kind": kind,
        "scaler": None
        if scaler is None
        else {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()},
        "meta": meta,
        "model": payload,
    }
    path = Path(path)
    path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return path


def load_model(path):
    """Read a model file; returns (model, scaler_or_None, meta_or_None)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("kind")
    if kind == "forest":
        model = _forest_from_payload(doc["model"])
    elif kind == "svm":
        model = _svm_from_payload(doc["model"])
    elif kind == "mlp":
        model = _mlp_from_payload(doc["model"])
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    scaler = None
    if doc.get("scaler") is not None:
        scaler = Scaler(
            mean=np.asarray(doc["scaler"]["mean"], np.float64),
            std=np.asarray(doc["scaler"]["std"], np.float64),
        )
    return model, scaler, doc.get("meta")
