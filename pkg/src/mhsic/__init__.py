"""Permutation-free kernel independence tests (mHSIC and split-martingale mdHSIC)."""

from .baselines import PermutationConfig, dhsic_v, hsic_v, hsic_v_elementwise, permutation_test
from .dgp import (
    LinearGaussianDgpConfig,
    MixtureDgpConfig,
    generate,
    linear_gaussian_dgp,
    random_mixture_dgp,
)
from .errors import (
    BandwidthLeak,
    ConfigInvalid,
    DegenerateSample,
    DegenerateVariance,
    DimensionMismatch,
    MhsicError,
    NotSymmetric,
    TooFewObservations,
)
from .kernels import (
    BandwidthSource,
    Family,
    KernelSpec,
    center_full,
    center_split,
    gram,
    median_heuristic,
    resolve_bandwidth,
)
from .martingale import (
    MartingaleSummary,
    TestResult,
    mdhsic_test,
    mhsic_test,
    naive_mdhsic_test,
    normal_quantile,
    studentized_lower_triangular,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthLeak",
    "BandwidthSource",
    "ConfigInvalid",
    "DegenerateSample",
    "DegenerateVariance",
    "DimensionMismatch",
    "Family",
    "KernelSpec",
    "LinearGaussianDgpConfig",
    "MartingaleSummary",
    "MhsicError",
    "MixtureDgpConfig",
    "NotSymmetric",
    "PermutationConfig",
    "TestResult",
    "TooFewObservations",
    "center_full",
    "center_split",
    "dhsic_v",
    "generate",
    "gram",
    "hsic_v",
    "hsic_v_elementwise",
    "linear_gaussian_dgp",
    "mdhsic_test",
    "median_heuristic",
    "mhsic_test",
    "naive_mdhsic_test",
    "normal_quantile",
    "permutation_test",
    "random_mixture_dgp",
    "resolve_bandwidth",
    "studentized_lower_triangular",
    "__version__",
]
