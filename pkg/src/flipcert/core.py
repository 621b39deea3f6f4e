"""Shared domain types, validation and the tie conventions used across the package.

Flip counts are non-negative integers or ``INF`` (``math.inf``), which marks a
target that no labeling within reach can produce.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

INF = math.inf

FlipCount = Union[int, float]  # int, or INF


class CertError(ValueError):
    """Base class for every error raised by flipcert."""


class ValidationError(CertError):
    pass


class SizeMismatch(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class AmbiguousPrediction(CertError):
    pass


class SmallCViolation(CertError):
    pass


class NumericFailure(CertError):
    pass


class InstanceTooLarge(CertError):
    pass


class ConsistencyError(CertError):
    pass


def is_inf(x: FlipCount) -> bool:
    return isinstance(x, float) and math.isinf(x)


def fmt_count(x: FlipCount) -> Union[int, str]:
    """JSON-friendly flip count: ints stay ints, infinity becomes ``"inf"``."""
    return "inf" if is_inf(x) else int(x)


def parse_count(x) -> FlipCount:
    if x == "inf":
        return INF
    return int(x)


# --------------------------------------------------------------------------
# labels and scores


def as_labels(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValidationError(f"labels must be a vector, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValidationError("labels must be integers")
    y = y.astype(np.int64)
    if num_classes < 2:
        raise ValidationError(f"need at least 2 classes, got K={num_classes}")
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        bad = y[(y < 0) | (y >= num_classes)][0]
        raise LabelOutOfRange(f"label {bad} outside [0, {num_classes})")
    return y


def one_hot(labels, num_classes: int) -> np.ndarray:
    y = as_labels(labels, num_classes)
    out = np.zeros((y.size, num_classes), dtype=np.int8)
    out[np.arange(y.size), y] = 1
    return out


def from_one_hot(onehot) -> np.ndarray:
    m = np.asarray(onehot)
    if m.ndim != 2 or not np.all((m == 0) | (m == 1)) or not np.all(m.sum(axis=1) == 1):
        raise ValidationError("one-hot labels must be 0/1 rows summing to 1")
    return m.argmax(axis=1).astype(np.int64)


def as_signed(y) -> np.ndarray:
    s = np.asarray(y)
    if s.ndim != 1 or not np.all((s == 1) | (s == -1)):
        raise ValidationError("signed labels must be a vector of +1/-1")
    return s.astype(np.int64)


def as_row(q, length: Optional[int] = None) -> np.ndarray:
    row = np.asarray(q, dtype=np.float64)
    if row.ndim != 1:
        raise ValidationError(f"kernel row must be a vector, got shape {row.shape}")
    if length is not None and row.size != length:
        raise SizeMismatch(f"kernel row has length {row.size}, expected {length}")
    if not np.all(np.isfinite(row)):
        raise ValidationError("kernel row contains non-finite values")
    return row


def class_scores(labels, q, num_classes: int) -> np.ndarray:
    """Per-class score ``p_c``: the sum of ``q`` over the samples labeled ``c``.

    ``labels`` may be an integer label vector or an ``n x K`` one-hot matrix.
    """
    y = np.asarray(labels)
    if y.ndim == 2:
        if y.shape[1] != num_classes:
            raise SizeMismatch(f"one-hot width {y.shape[1]} != K={num_classes}")
        y = from_one_hot(y)
    y = as_labels(y, num_classes)
    row = as_row(q, y.size)
    return np.bincount(y, weights=row, minlength=num_classes).astype(np.float64)


def predict(scores) -> int:
    """Index of the largest score; ties go to the smaller index."""
    p = np.asarray(scores, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ValidationError("need a score vector with at least two classes")
    if not np.all(np.isfinite(p)):
        raise ValidationError("non-finite class score")
    return int(np.argmax(p))


def wins_over(challenger: int, incumbent: int) -> bool:
    """Whether ``challenger`` takes the prediction from ``incumbent`` on an exact tie."""
    return challenger < incumbent


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty n x d matrix, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("non-finite feature value")
        y = as_labels(self.labels, self.num_classes)
        if y.size != x.shape[0]:
            raise SizeMismatch(f"{y.size} labels for {x.shape[0]} feature rows")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _read_manifest(path) -> dict:
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ValidationError(f"manifest {path} is not a JSON object")
    return manifest


def _resolve(manifest_path, rel: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rel)


def read_f64le(path, count: int) -> np.ndarray:
    try:
        raw = np.fromfile(path, dtype="<f8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if raw.size != count or os.path.getsize(path) != 8 * count:
        raise SizeMismatch(f"{path}: expected {count} float64 values, found {os.path.getsize(path) / 8:g}")
    return raw.astype(np.float64)


def load_dataset(manifest_path) -> Dataset:
    """Load a dataset described by a JSON manifest (raw f64le features, text labels)."""
    m = _read_manifest(manifest_path)
    try:
        n, d, k = int(m["n"]), int(m["d"]), int(m["K"])
        feat_path, label_path = m["features"], m["labels"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed dataset manifest: {exc}") from exc
    if m.get("dtype", "f64le") != "f64le" or m.get("layout", "row-major") != "row-major":
        raise ValidationError("only dtype f64le in row-major layout is supported")
    if n < 1 or d < 1:
        raise ValidationError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if k < 2:
        raise ValidationError(f"need K >= 2, got K={k}")

    x = read_f64le(_resolve(manifest_path, feat_path), n * d).reshape(n, d)
    try:
        with open(_resolve(manifest_path, label_path)) as fh:
            lines = [ln.strip() for ln in fh.read().splitlines()]
    except OSError as exc:
        raise ValidationError(f"cannot read labels: {exc}") from exc
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != n:
        raise SizeMismatch(f"label file has {len(lines)} lines, expected {n}")
    try:
        y = np.array([int(s) for s in lines], dtype=np.int64)
    except ValueError as exc:
        raise ValidationError(f"bad label value: {exc}") from exc
    return Dataset(x, y, k)


def save_dataset(dataset: Dataset, manifest_path, stem: Optional[str] = None) -> None:
    """Write ``dataset`` as a manifest plus feature/label files next to it."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    stem = stem or os.path.splitext(os.path.basename(manifest_path))[0]
    feat, lab = f"{stem}.features.f64", f"{stem}.labels.txt"
    dataset.features.astype("<f8").tofile(os.path.join(base, feat))
    with open(os.path.join(base, lab), "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in dataset.labels))
    manifest = {
        "n": dataset.n, "d": dataset.d, "K": dataset.num_classes,
        "features": feat, "labels": lab, "dtype": "f64le", "layout": "row-major",
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)


@dataclass(frozen=True)
class VoteConfig:
    """Votes of the base classifiers of an ensemble for one test sample."""

    votes: np.ndarray
    num_classes: int

    def __post_init__(self):
        v = as_labels(self.votes, self.num_classes)
        if v.size == 0:
            raise ValidationError("empty vote vector")
        v.setflags(write=False)
        object.__setattr__(self, "votes", v)

    @property
    def num_partitions(self) -> int:
        return self.votes.size

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.votes, minlength=self.num_classes)

    @property
    def winner(self) -> int:
        return int(np.argmax(self.counts))


BOUND_KINDS = ("exact", "lower", "upper")


@dataclass(frozen=True)
class FlipCostMatrix:
    """Per-classifier, per-class minimum flips (``INF`` where unreachable)."""

    rho: np.ndarray
    bound_kind: str = "exact"

    def __post_init__(self):
        r = np.array(self.rho, dtype=np.float64)
        if r.ndim != 2:
            raise ValidationError(f"flip-cost matrix must be 2-D, got shape {r.shape}")
        if self.bound_kind not in BOUND_KINDS:
            raise ValidationError(f"unknown bound kind {self.bound_kind!r}")
        finite = np.isfinite(r)
        if np.any(np.isnan(r)) or np.any(r[~finite] < 0):
            raise ValidationError("flip costs must be non-negative integers or +inf")
        if np.any(r[finite] < 0) or np.any(r[finite] != np.floor(r[finite])):
            raise ValidationError("flip costs must be non-negative integers or +inf")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @property
    def shape(self):
        return self.rho.shape

    def check_votes(self, votes: VoteConfig) -> None:
        if self.rho.shape != (votes.num_partitions, votes.num_classes):
            raise SizeMismatch(
                f"flip-cost matrix shape {self.rho.shape} does not match "
                f"{votes.num_partitions} partitions x {votes.num_classes} classes"
            )
        at_vote = self.rho[np.arange(votes.num_partitions), votes.votes]
        if np.any(at_vote != 0):
            i = int(np.flatnonzero(at_vote != 0)[0])
            raise ConsistencyError(f"classifier {i} has non-zero cost for its own vote")

    def entry(self, i: int, c: int) -> FlipCount:
        v = self.rho[i, c]
        return INF if math.isinf(v) else int(v)


@dataclass(frozen=True)
class CertConfig:
    loss: str = "regression"
    C: float = 1e-3
    lam: float = 1.0
    tol: float = 0.0

    def __post_init__(self):
        if self.loss not in ("svm", "regression"):
            raise ValidationError(f"loss must be 'svm' or 'regression', got {self.loss!r}")
        if not self.C > 0:
            raise ValidationError(f"C must be positive, got {self.C}")
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be non-negative, got {self.lam}")
        if not self.tol >= 0:
            raise ValidationError(f"tolerance must be non-negative, got {self.tol}")


@dataclass(frozen=True)
class CertificateOutcome:
    index: int
    predicted: int
    radius_lower: FlipCount
    radius_upper: FlipCount
    correct: Optional[bool] = None
    blackbox_radius: Optional[int] = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.radius_lower < 0 or self.radius_upper < 0:
            raise ConsistencyError("radii must be non-negative")
        if self.radius_lower > self.radius_upper:
            raise ConsistencyError(
                f"sample {self.index}: lower radius {self.radius_lower} exceeds upper {self.radius_upper}"
            )

    def to_json(self) -> dict:
        out = {
            "index": self.index,
            "predicted": self.predicted,
            "correct": self.correct,
            "radius_lb": fmt_count(self.radius_lower),
            "radius_ub": fmt_count(self.radius_upper),
        }
        if self.blackbox_radius is not None:
            out["blackbox_radius"] = int(self.blackbox_radius)
        return out
