"""Training kernels, test kernel rows, the ridge effective kernel and the small-C check."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import (
    NumericFailure,
    SizeMismatch,
    ValidationError,
    _read_manifest,
    _resolve,
    as_row,
    read_f64le,
)

PSD_JITTER = 1e-12
SYMMETRY_RTOL = 1e-9


def _features(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValidationError(f"expected a non-empty feature matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite feature value")
    return x


def linear_ntk_train(x) -> np.ndarray:
    """NTK of an infinitely wide one-hidden-layer linear network: ``2 <x_i, x_j>``.

    The input-layer and output-layer gradients each contribute one inner product.
    """
    x = _features(x)
    gram = x @ x.T
    # BLAS may differ in the last bit across the diagonal; mirror the upper triangle
    return 2.0 * (np.triu(gram) + np.triu(gram, 1).T)


def linear_ntk_row(x, t) -> np.ndarray:
    x = _features(x)
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (x.shape[1],):
        raise SizeMismatch(f"test vector has shape {t.shape}, expected ({x.shape[1]},)")
    if not np.all(np.isfinite(t)):
        raise ValidationError("non-finite test feature")
    return 2.0 * (x @ t)


def linear_ntk_rows(x, t) -> np.ndarray:
    """Kernel rows for a batch of test vectors, shape ``(n_test, m)``."""
    return 2.0 * (_features(t) @ _features(x).T)


def validate_train_kernel(q) -> np.ndarray:
    """Check symmetry and positive semidefiniteness; returns the kernel as float64."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise ValidationError(f"training kernel must be square and non-empty, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValidationError("training kernel contains non-finite values")
    scale = max(np.abs(q).max(), 1.0)
    if np.abs(q - q.T).max() > SYMMETRY_RTOL * scale:
        raise ValidationError("training kernel is not symmetric")
    try:
        linalg.cholesky(q + PSD_JITTER * scale * np.eye(q.shape[0]), lower=True)
    except linalg.LinAlgError as exc:
        raise ValidationError("training kernel is not positive semidefinite") from exc
    return q


def check_small_c(q, C: float) -> bool:
    """True iff ``max_i sum_j |Q_ij| <= 1/C``.

    In that regime every SVM dual variable sits at ``C`` whatever the labels,
    so the prediction is a fixed linear function of the labels.
    """
    if not C > 0:
        raise ValidationError(f"C must be positive, got {C}")
    q = np.asarray(q, dtype=np.float64)
    return bool(np.abs(q).sum(axis=1).max() <= 1.0 / C)


def max_small_c(q) -> float:
    """Largest ``C`` for which :func:`check_small_c` holds (``inf`` for a zero kernel)."""
    s = np.abs(np.asarray(q, dtype=np.float64)).sum(axis=1).max()
    return np.inf if s == 0 else 1.0 / s


class EffectiveKernel:
    """Cholesky factor of ``Q + lam*I`` shared by every test row of one partition.

    ``row(q)`` returns ``(Q + lam*I)^{-1} q``, so the ridge regression scores become
    ``p_c = sum_i y_i^c z_i`` like the small-C SVM.
    """

    def __init__(self, q, lam: float):
        if not lam >= 0:
            raise ValidationError(f"lambda must be non-negative, got {lam}")
        q = validate_train_kernel(q)
        self.lam = float(lam)
        self.matrix = q + self.lam * np.eye(q.shape[0])
        self.matrix.setflags(write=False)
        try:
            self._factor = linalg.cho_factor(self.matrix, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericFailure("Q + lambda*I is singular or indefinite") from exc
        diag = np.abs(np.diag(self._factor[0]))
        if diag.min() <= np.finfo(float).eps * diag.max() * q.shape[0]:
            raise NumericFailure("Q + lambda*I is numerically singular")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def row(self, q_row) -> np.ndarray:
        b = as_row(q_row, self.size)
        z = linalg.cho_solve(self._factor, b, check_finite=False)
        # one refinement step keeps the residual near machine precision for small lam
        z += linalg.cho_solve(self._factor, b - self.matrix @ z, check_finite=False)
        return z

    def rows(self, q_rows) -> np.ndarray:
        b = np.asarray(q_rows, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] != self.size:
            raise SizeMismatch(f"expected rows of length {self.size}, got shape {b.shape}")
        z = linalg.cho_solve(self._factor, b.T, check_finite=False)
        z += linalg.cho_solve(self._factor, b.T - self.matrix @ z, check_finite=False)
        return z.T

    def residual(self, q_row, z) -> float:
        return float(np.abs(self.matrix @ z - q_row).max())


def effective_kernel(q, q_row, lam: float) -> np.ndarray:
    return EffectiveKernel(q, lam).row(q_row)


@dataclass(frozen=True)
class PrecomputedKernel:
    """Kernel values loaded from disk: ``m x m`` training block and ``n_test x m`` rows."""

    train: np.ndarray
    test_rows: np.ndarray

    def __post_init__(self):
        tr = validate_train_kernel(self.train)
        te = np.asarray(self.test_rows, dtype=np.float64)
        if te.ndim != 2 or te.shape[1] != tr.shape[0]:
            raise SizeMismatch(f"test rows shape {te.shape} incompatible with {tr.shape[0]} training samples")
        if not np.all(np.isfinite(te)):
            raise ValidationError("test kernel rows contain non-finite values")
        object.__setattr__(self, "train", tr)
        object.__setattr__(self, "test_rows", te)


def load_precomputed_kernel(manifest_path) -> PrecomputedKernel:
    m = _read_manifest(manifest_path)
    try:
        size, n_test = int(m["m"]), int(m["n_test"])
        train_path, rows_path = m["train_kernel"], m["test_rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed kernel manifest: {exc}") from exc
    train = read_f64le(_resolve(manifest_path, train_path), size * size).reshape(size, size)
    rows = read_f64le(_resolve(manifest_path, rows_path), n_test * size).reshape(n_test, size)
    return PrecomputedKernel(train, rows)


def save_precomputed_kernel(kernel: PrecomputedKernel, manifest_path, stem: str = "kernel") -> None:
    base = os.path.dirname(os.path.abspath(manifest_path))
    kernel.train.astype("<f8").tofile(os.path.join(base, f"{stem}.train.f64"))
    kernel.test_rows.astype("<f8").tofile(os.path.join(base, f"{stem}.test.f64"))
    with open(manifest_path, "w") as fh:
        json.dump(
            {
                "m": int(kernel.train.shape[0]),
                "n_test": int(kernel.test_rows.shape[0]),
                "train_kernel": f"{stem}.train.f64",
                "test_rows": f"{stem}.test.f64",
            },
            fh,
            indent=2,
        )
