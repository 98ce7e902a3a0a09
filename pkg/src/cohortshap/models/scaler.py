"""Per-feature standardization, fit on training rows only."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Scaler:
    """Column means and population standard deviations of the training rows.

    A std of exactly 0.0 marks a constant training column (or one whose
    spread is too small for float64 to square); those columns are divided
    by 1 instead, so a constant column's training data maps to exactly zero.
    """

    mean: np.ndarray
    std: np.ndarray


def fit_scaler(X: np.ndarray) -> Scaler:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("scaler needs a 2-d array with at least one row")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = X.max(axis=0) == X.min(axis=0)
    # For constant columns the arithmetic mean can pick up rounding error;
    # pin it to the constant so the training transform is exactly zero.
    mean[constant] = X[0, constant]
    std[constant] = 0.0
    return Scaler(mean=mean, std=std)


def transform(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != scaler.mean.shape[0]:
        raise ValueError(
            f"expected {scaler.mean.shape[0]} features, got {X.shape[1]}"
        )
    divisor = np.where(scaler.std == 0.0, 1.0, scaler.std)
    return (X - scaler.mean) / divisor
