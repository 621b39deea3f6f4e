"""Certified robustness of kernel classifiers and their partition ensembles to label flipping."""

from .core import (
    INF,
    AmbiguousPrediction,
    CertConfig,
    CertError,
    CertificateOutcome,
    ConsistencyError,
    Dataset,
    FlipCostMatrix,
    InstanceTooLarge,
    LabelOutOfRange,
    NumericFailure,
    SizeMismatch,
    SmallCViolation,
    ValidationError,
    VoteConfig,
    class_scores,
    load_dataset,
    one_hot,
    predict,
    save_dataset,
)
from .ensemble import ensemble_radius, mckp_p2, rs_certified_flips, rs_targeted_radius, ssdpa_radius
from .kernels import (
    EffectiveKernel,
    check_small_c,
    effective_kernel,
    linear_ntk_row,
    linear_ntk_train,
    load_precomputed_kernel,
)
from .pipeline import KernelSpec, RobustnessReport, certify_sample, evaluate, partition_data
from .whitebox import (
    binary_exact_min_flips,
    flip_cost_matrix,
    standalone_exact_radius,
    targeted_flips_lower,
    targeted_flips_upper,
)

__version__ = "0.1.0"
