"""End-to-end certification of a partition-aggregation ensemble of kernel classifiers."""
from __future__ import annotations

import csv
import io
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    INF,
    CertConfig,
    CertificateOutcome,
    Dataset,
    FlipCount,
    SizeMismatch,
    SmallCViolation,
    ValidationError,
    VoteConfig,
    as_labels,
    class_scores,
    fmt_count,
    is_inf,
    predict,
)
from .ensemble import ensemble_radius, ssdpa_radius
from .kernels import (
    EffectiveKernel,
    PrecomputedKernel,
    check_small_c,
    linear_ntk_rows,
    linear_ntk_train,
    load_precomputed_kernel,
    max_small_c,
)
from .whitebox import flip_cost_matrix, standalone_exact_radius

log = logging.getLogger(__name__)

MODES = ("whitebox", "blackbox", "both", "standalone")


@dataclass(frozen=True)
class Partitioning:
    assignment: np.ndarray
    num_partitions: int

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == i)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_partitions)


def partition_data(dataset_or_features, num_partitions: int) -> Partitioning:
    """Label-free partitioning: sort rows by their raw little-endian bytes, deal round-robin."""
    x = dataset_or_features.features if isinstance(dataset_or_features, Dataset) else dataset_or_features
    x = np.ascontiguousarray(np.asarray(x, dtype="<f8"))
    n = x.shape[0]
    if not 1 <= num_partitions <= n:
        raise ValidationError(f"number of partitions must lie in [1, {n}], got {num_partitions}")
    keys = [x[i].tobytes() for i in range(n)]
    order = sorted(range(n), key=lambda i: (keys[i], i))
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % num_partitions
    assignment.setflags(write=False)
    return Partitioning(assignment, num_partitions)


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear_ntk"
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("linear_ntk", "precomputed"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "precomputed" and not self.path:
            raise ValidationError("precomputed kernel needs a manifest path")

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        if text in ("linear", "linear_ntk"):
            return cls("linear_ntk")
        if text.startswith("precomputed:"):
            return cls("precomputed", text.split(":", 1)[1])
        raise ValidationError(f"kernel must be 'linear' or 'precomputed:PATH', got {text!r}")

    def __str__(self) -> str:
        return "linear" if self.kind == "linear_ntk" else f"precomputed:{self.path}"


class PreparedEnsemble:
    """Per-partition kernels (and ridge factorizations) for a fixed training set.

    Everything is computed once and only read afterwards, so ``rows`` and
    ``certify`` may be called from several threads.
    """

    def __init__(
        self,
        train: Dataset,
        num_partitions: int,
        config: CertConfig,
        kernel: KernelSpec = KernelSpec(),
        precomputed: Optional[PrecomputedKernel] = None,
    ):
        self.train = train
        self.config = config
        self.kernel = kernel
        self.partitioning = partition_data(train, num_partitions)
        if kernel.kind == "precomputed":
            precomputed = precomputed or load_precomputed_kernel(kernel.path)
            if precomputed.train.shape[0] != train.n:
                raise SizeMismatch(
                    f"precomputed kernel covers {precomputed.train.shape[0]} samples, training set has {train.n}"
                )
        self.precomputed = precomputed
        self.members = [self.partitioning.members(i) for i in range(num_partitions)]
        self.labels = [train.labels[idx] for idx in self.members]
        self.solvers: list[Optional[EffectiveKernel]] = []
        for i, idx in enumerate(self.members):
            q = self._train_block(idx)
            if config.loss == "svm":
                if not check_small_c(q, config.C):
                    raise SmallCViolation(
                        f"partition {i}: C={config.C:g} exceeds the small-C limit {max_small_c(q):.6g}"
                    )
                self.solvers.append(None)
            else:
                self.solvers.append(EffectiveKernel(q, config.lam))

    @property
    def num_partitions(self) -> int:
        return self.partitioning.num_partitions

    @property
    def num_classes(self) -> int:
        return self.train.num_classes

    def _train_block(self, idx: np.ndarray) -> np.ndarray:
        if self.precomputed is not None:
            return self.precomputed.train[np.ix_(idx, idx)]
        return linear_ntk_train(self.train.features[idx])

    def rows(self, test_features: Optional[np.ndarray] = None, test_indices: Optional[Sequence[int]] = None):
        """Score rows per partition, each of shape ``(n_test, partition size)``.

        Linear kernels need ``test_features``; precomputed ones need ``test_indices``
        into the ingested test rows. Regression rows come back already solved
        against ``Q + lam*I``.
        """
        out = []
        for idx, solver in zip(self.members, self.solvers):
            if self.precomputed is not None:
                if test_indices is None:
                    raise ValidationError("precomputed kernels are addressed by test index")
                raw = self.precomputed.test_rows[np.ix_(np.asarray(test_indices), idx)]
            else:
                if test_features is None:
                    raise ValidationError("linear kernels need test features")
                tf = np.asarray(test_features, dtype=np.float64)
                if tf.ndim != 2 or tf.shape[1] != self.train.d:
                    raise SizeMismatch(f"test features shape {tf.shape} incompatible with d={self.train.d}")
                raw = linear_ntk_rows(self.train.features[idx], tf)
            out.append(raw if solver is None else solver.rows(raw))
        return out


def certify_sample(
    rows: Sequence[np.ndarray],
    labels: Sequence[np.ndarray],
    num_classes: int,
    mode: str = "whitebox",
    index: int = 0,
    true_label: Optional[int] = None,
    tol: float = 0.0,
) -> CertificateOutcome:
    """Certificate for one test sample from its per-partition score rows.

    ``whitebox`` returns the ensemble radius under lower- and upper-bound flip
    costs; ``blackbox`` the vote-count radius (upper reported as ``INF``);
    ``both`` adds the vote-count radius to the white-box outcome; ``standalone``
    the exact radius of a single unpartitioned model.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if len(rows) != len(labels) or not rows:
        raise SizeMismatch("need one score row per partition")
    if mode == "standalone":
        if len(rows) != 1:
            raise ValidationError(f"standalone mode needs a single partition, got {len(rows)}")
        return standalone_exact_radius(labels[0], rows[0], num_classes, index, true_label, tol)

    if mode == "blackbox":
        votes = VoteConfig(
            np.array([predict(class_scores(y, q, num_classes)) for y, q in zip(labels, rows)]),
            num_classes,
        )
        bb = ssdpa_radius(votes)
        return CertificateOutcome(index, votes.winner, bb, INF, _correct(votes.winner, true_label), bb)

    rho_lo, votes = flip_cost_matrix(labels, rows, num_classes, "lower", tol)
    lower = ensemble_radius(rho_lo, votes)
    if len(rows) == 1:
        # one model: the relaxed minimum over targets is exact
        upper = lower
    else:
        rho_hi, _ = flip_cost_matrix(labels, rows, num_classes, "upper")
        upper = ensemble_radius(rho_hi, votes)
    bb = ssdpa_radius(votes) if mode == "both" else None
    return CertificateOutcome(index, votes.winner, lower, upper, _correct(votes.winner, true_label), bb)


def _correct(pred: int, true_label: Optional[int]) -> Optional[bool]:
    return None if true_label is None else bool(pred == true_label)


# --------------------------------------------------------------------------
# metrics


def certified_accuracy(radii: Sequence[FlipCount], correct: Sequence[bool], r: int) -> float:
    if not radii:
        return 0.0
    return sum(1 for rad, ok in zip(radii, correct) if ok and rad >= r) / len(radii)


def median_certified_robustness(radii: Sequence[FlipCount], correct: Sequence[bool]) -> Optional[FlipCount]:
    """Lower median of the radii of correctly classified samples; ``None`` if there are none.

    Infinite radii sort last, so the result is infinite only when more than
    half of the correct samples are.
    """
    kept = [rad for rad, ok in zip(radii, correct) if ok]
    if not kept:
        return None
    return statistics.median_low(kept)


RADIUS_FIELDS = {"lb": "radius_lower", "ub": "radius_upper", "blackbox": "blackbox_radius"}


@dataclass
class RobustnessReport:
    outcomes: list
    header: dict = field(default_factory=dict)

    def radii(self, which: str) -> Optional[list]:
        attr = RADIUS_FIELDS[which]
        vals = [getattr(o, attr) for o in self.outcomes]
        if any(v is None for v in vals):
            return None
        return vals

    @property
    def correct(self) -> list:
        return [bool(o.correct) for o in self.outcomes]

    @property
    def clean_accuracy(self) -> float:
        return sum(self.correct) / len(self.outcomes) if self.outcomes else 0.0

    def max_finite_radius(self) -> int:
        vals = [v for w in RADIUS_FIELDS if (rs := self.radii(w)) for v in rs if not is_inf(v)]
        return int(max(vals)) if vals else 0

    def curve(self, which: str, max_r: Optional[int] = None) -> Optional[list]:
        radii = self.radii(which)
        if radii is None:
            return None
        top = self.max_finite_radius() if max_r is None else max_r
        return [certified_accuracy(radii, self.correct, r) for r in range(top + 1)]

    def mcr(self, which: str) -> Optional[FlipCount]:
        radii = self.radii(which)
        if radii is None:
            return None
        return median_certified_robustness(radii, self.correct)

    def curve_csv(self) -> str:
        top = self.max_finite_radius()
        cols = {w: self.curve(w, top) for w in RADIUS_FIELDS}
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "cert_acc_lb", "cert_acc_ub", "cert_acc_blackbox"])
        for r in range(top + 1):
            writer.writerow([r] + [("" if cols[w] is None else repr(cols[w][r])) for w in RADIUS_FIELDS])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {"n_test": len(self.outcomes), "clean_accuracy": self.clean_accuracy}
        for w in RADIUS_FIELDS:
            m = self.mcr(w) if self.radii(w) is not None else None
            out[f"mcr_{w}"] = None if m is None else fmt_count(m)
        return out

    def to_json(self) -> dict:
        return {"header": self.header, "results": [o.to_json() for o in self.outcomes]}


def evaluate(
    train: Dataset,
    test: Dataset,
    num_partitions: int,
    config: CertConfig,
    kernel: KernelSpec = KernelSpec(),
    mode: str = "whitebox",
    limit: Optional[int] = None,
    threads: int = 1,
    precomputed: Optional[PrecomputedKernel] = None,
) -> RobustnessReport:
    """Certify every test sample (or the first ``limit``) and collect the outcomes."""
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "standalone" and num_partitions != 1:
        raise ValidationError("standalone mode needs exactly one partition")
    if test.num_classes != train.num_classes:
        raise ValidationError("train and test declare different numbers of classes")
    if kernel.kind == "linear_ntk" and test.d != train.d:
        raise SizeMismatch(f"train has d={train.d}, test has d={test.d}")
    ens = PreparedEnsemble(train, num_partitions, config, kernel, precomputed)
    count = test.n if limit is None else min(limit, test.n)
    if ens.precomputed is not None and ens.precomputed.test_rows.shape[0] < count:
        raise SizeMismatch("precomputed kernel has fewer test rows than test samples")
    idx = np.arange(count)
    rows = ens.rows(test_features=test.features[:count], test_indices=idx)
    truth = as_labels(test.labels[:count], test.num_classes)
    log.info("certifying %d test samples over %d partitions (%s)", count, num_partitions, mode)

    def one(j: int) -> CertificateOutcome:
        return certify_sample(
            [r[j] for r in rows], ens.labels, ens.num_classes, mode, j, int(truth[j]), config.tol
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(count)))
    else:
        outcomes = [one(j) for j in range(count)]
    header = {
        "mode": mode,
        "Np": num_partitions,
        "loss": config.loss,
        "C": config.C,
        "lambda": config.lam,
        "kernel": str(kernel),
    }
    return RobustnessReport(outcomes, header)


def make_two_gaussians(n: int, d: int, separation: float, seed: int) -> Dataset:
    """Balanced two-class data: unit-variance blobs centred at ``+-separation/2`` on axis 0."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    rng.shuffle(y)
    x = rng.standard_normal((n, d))
    x[:, 0] += np.where(y == 0, -separation / 2, separation / 2)
    return Dataset(x, y, 2)
