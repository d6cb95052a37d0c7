"""Deterministic three-way splits and invertible per-column standardization.

Splitting shuffles ``0..n-1`` with numpy's ``default_rng`` (PCG64) and
partitions the permutation into train/test/validation bins, so the same seed
reproduces the same bins on any machine. Scalers are fit on the training bin
only and applied to every bin; standardization uses the population standard
deviation (divide by n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from surrkit.data import FidelityDataset, FlatMatrix, flatten
from surrkit.errors import InputError, NumericError


@dataclass(frozen=True)
class SplitSpec:
    """Fractions and seed for the train/test/validation partition."""

    train_frac: float = 0.70
    test_frac: float = 0.15
    val_frac: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        for name, frac in (
            ("train_frac", self.train_frac),
            ("test_frac", self.test_frac),
            ("val_frac", self.val_frac),
        ):
            if not 0.0 < frac < 1.0:
                raise InputError(f"{name} must lie in (0, 1), got {frac}")
        total = self.train_frac + self.test_frac + self.val_frac
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"split fractions must sum to 1, got {total!r}")


def _round_half_up(x: float) -> int:
    # Documented rounding rule so splits reproduce across implementations.
    return int(math.floor(x + 0.5))


def split_data_cv(
    data: FidelityDataset | int, spec: SplitSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partition sample indices into disjoint train/test/validation bins.

    Bin sizes are round(frac * n) with the remainder assigned to train; a bin
    that rounds to zero is bumped to one sample (taken from train) so all
    three bins are nonempty whenever n >= 3.
    """
    n = data if isinstance(data, int) else data.n
    if n < 3:
        raise InputError(f"need at least 3 samples to form three bins, got {n}")
    n_test = _round_half_up(spec.test_frac * n)
    n_val = _round_half_up(spec.val_frac * n)
    n_test = max(n_test, 1)
    n_val = max(n_val, 1)
    n_train = n - n_test - n_val
    if n_train < 1:
        raise InputError(
            f"split of {n} samples leaves no training rows "
            f"(test={n_test}, val={n_val})"
        )
    perm = np.random.default_rng(spec.seed).permutation(n)
    train = perm[:n_train]
    test = perm[n_train : n_train + n_test]
    val = perm[n_train + n_test :]
    return train, test, val


@dataclass(frozen=True, eq=False)
class StandardScaler:
    """Per-column mean/std map fitted once and frozen.

    Constant columns are recorded with std 0; they transform to 0 and
    inverse-transform back to the stored mean.
    """

    means: np.ndarray
    stds: np.ndarray
    fitted_on: int

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.shape != (self.fitted_on,) or stds.shape != (self.fitted_on,):
            raise InputError("scaler parameter lengths must match fitted_on")
        if (stds < 0).any():
            raise InputError("scaler stds must be nonnegative")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @classmethod
    def identity(cls, n_cols: int) -> "StandardScaler":
        return cls(np.zeros(n_cols), np.ones(n_cols), n_cols)

    @property
    def _scale(self) -> np.ndarray:
        return np.where(self.stds == 0.0, 1.0, self.stds)


def fit_scaler(matrix: FlatMatrix | np.ndarray) -> StandardScaler:
    """Fit per-column means and population stds."""
    values = matrix.values if isinstance(matrix, FlatMatrix) else np.asarray(matrix)
    if values.ndim != 2:
        raise InputError(f"expected a rank-2 matrix, got rank {values.ndim}")
    if values.shape[0] < 1:
        raise InputError("cannot fit a scaler on an empty matrix")
    means = values.mean(axis=0)
    stds = values.std(axis=0)  # population (ddof=0)
    return StandardScaler(means, stds, values.shape[1])


def _apply(scaler: StandardScaler, matrix, forward: bool):
    values = matrix.values if isinstance(matrix, FlatMatrix) else np.asarray(matrix)
    if values.ndim != 2 or values.shape[1] != scaler.fitted_on:
        got = values.shape[1] if values.ndim == 2 else None
        raise InputError(
            f"scaler fitted on {scaler.fitted_on} columns, got matrix with {got}"
        )
    if forward:
        out = (values - scaler.means) / scaler._scale
    else:
        out = values * scaler._scale + scaler.means
    if isinstance(matrix, FlatMatrix):
        return matrix.with_values(out)
    return out


def transform(scaler: StandardScaler, matrix: FlatMatrix | np.ndarray):
    """Standardize columns: (v - mean) / std, constant columns to 0."""
    return _apply(scaler, matrix, forward=True)


def inverse_transform(scaler: StandardScaler, matrix: FlatMatrix | np.ndarray):
    """Undo :func:`transform`; constant columns return to the stored mean."""
    return _apply(scaler, matrix, forward=False)


@dataclass(frozen=True, eq=False)
class PreparedData:
    """Scaled train/test/validation bins plus the scalers that made them."""

    X_train: FlatMatrix
    X_test: FlatMatrix
    X_val: FlatMatrix
    Y_train: FlatMatrix
    Y_test: FlatMatrix
    Y_val: FlatMatrix
    x_scaler: StandardScaler
    y_scaler: StandardScaler
    split_indices: tuple[np.ndarray, np.ndarray, np.ndarray]
    seed: int


def _verify_inverse(scaler: StandardScaler, raw: np.ndarray, label: str) -> None:
    restored = inverse_transform(scaler, transform(scaler, raw))
    tol = 1e-12 * np.maximum(1.0, np.abs(raw))
    if not (np.abs(restored - raw) <= tol).all():
        worst = float(np.max(np.abs(restored - raw) / np.maximum(1.0, np.abs(raw))))
        raise NumericError(
            f"inverse transform failed to restore {label} bin "
            f"(worst relative error {worst:.3e})"
        )


def preprocess_data_pipeline(data: FidelityDataset, spec: SplitSpec) -> PreparedData:
    """Flatten, split, fit scalers on the training bin, and scale every bin.

    After scaling, each bin is checked to restore its raw values through the
    inverse transform to within 1e-12 relative.
    """
    X = flatten(data.X)
    Y = flatten(data.Y)
    train, test, val = split_data_cv(data.n, spec)

    x_scaler = fit_scaler(X.values[train])
    y_scaler = fit_scaler(Y.values[train])

    bins = {}
    for label, idx in (("train", train), ("test", test), ("val", val)):
        x_raw = X.values[idx]
        y_raw = Y.values[idx]
        _verify_inverse(x_scaler, x_raw, f"X {label}")
        _verify_inverse(y_scaler, y_raw, f"Y {label}")
        bins[label] = (
            X.with_values(transform(x_scaler, x_raw)),
            Y.with_values(transform(y_scaler, y_raw)),
        )

    return PreparedData(
        X_train=bins["train"][0],
        X_test=bins["test"][0],
        X_val=bins["val"][0],
        Y_train=bins["train"][1],
        Y_test=bins["test"][1],
        Y_val=bins["val"][1],
        x_scaler=x_scaler,
        y_scaler=y_scaler,
        split_indices=(train, test, val),
        seed=spec.seed,
    )
