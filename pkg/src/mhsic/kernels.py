"""Kernels, Gram matrices, bandwidth selection and the two centring schemes.

Samples are ``(n, q)`` float arrays with one observation per row; 1-D input
is treated as a single column.  Gram matrices are plain ``ndarray`` objects.
"""

from __future__ import annotations

import dataclasses
import math
import enum
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import pdist

from . import _jit
from .errors import DegenerateSample, DimensionMismatch, NotSymmetric

#: Above this many rows the median heuristic runs on a seeded subsample.
MEDIAN_SUBSAMPLE = 2048
#: Gaussian Gram matrices of wider inputs go through a BLAS inner product.
DIRECT_MAX_DIM = 32
#: Packed entries per exp and row-sum block, sized to stay in cache.
EXP_BLOCK = 1 << 16
_NO_HISTOGRAM = np.zeros(0, np.int64)

RngLike = Union[None, int, np.random.Generator]


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"

    @property
    def norm(self) -> str:
        return "l2" if self is Family.GAUSSIAN else "l1"


class BandwidthSource(str, enum.Enum):
    FIXED = "fixed"
    MEDIAN_FULL = "median_full"
    MEDIAN_FIRST_HALF = "median_first_half"


@dataclasses.dataclass(frozen=True)
class KernelSpec:
    """A translation-invariant kernel and where its bandwidth comes from.

    ``bandwidth`` stays ``None`` for median-heuristic specs until
    :func:`resolve_bandwidth` fills it in.
    """

    family: Family = Family.GAUSSIAN
    bandwidth: Optional[float] = None
    source: BandwidthSource = BandwidthSource.MEDIAN_FULL

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "source", BandwidthSource(self.source))
        if self.bandwidth is not None:
            bw = float(self.bandwidth)
            if not np.isfinite(bw) or bw <= 0:
                raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
            object.__setattr__(self, "bandwidth", bw)
        elif self.source is BandwidthSource.FIXED:
            raise ValueError("a fixed-bandwidth kernel needs a bandwidth")

    @classmethod
    def fixed(cls, bandwidth: float, family: Family = Family.GAUSSIAN) -> "KernelSpec":
        return cls(family, bandwidth, BandwidthSource.FIXED)

    @classmethod
    def median(cls, family: Family = Family.GAUSSIAN, first_half: bool = False) -> "KernelSpec":
        source = BandwidthSource.MEDIAN_FIRST_HALF if first_half else BandwidthSource.MEDIAN_FULL
        return cls(family, None, source)

    @property
    def resolved(self) -> bool:
        return self.bandwidth is not None

    def __call__(self, x, y) -> float:
        """Evaluate the kernel on a single pair of points."""
        self._require_resolved()
        diff = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.family is Family.GAUSSIAN:
            return float(np.exp(-np.dot(diff, diff) / (2.0 * self.bandwidth**2)))
        return float(np.exp(-np.abs(diff).sum() / self.bandwidth))

    def _require_resolved(self):
        if self.bandwidth is None:
            raise ValueError("kernel bandwidth has not been resolved")


def as_sample(x) -> np.ndarray:
    """Return ``x`` as a C-contiguous float64 ``(n, q)`` array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 1-D or 2-D sample, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def _as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def pairwise_distances(x, norm: str = "l2") -> np.ndarray:
    """Condensed vector of distances over pairs ``i < j``."""
    x = as_sample(x)
    if norm == "l1":
        return pdist(x, "cityblock")
    if norm != "l2":
        raise ValueError(f"unknown norm {norm!r}")
    if x.shape[1] <= DIRECT_MAX_DIM:
        return pdist(x, "euclidean")
    xc = x - x.mean(axis=0)
    sq = np.einsum("ij,ij->i", xc, xc)
    g = xc @ xc.T
    iu = np.triu_indices(x.shape[0], k=1)
    d2 = sq[iu[0]] + sq[iu[1]] - 2.0 * g[iu]
    return np.sqrt(np.maximum(d2, 0.0))


def median_heuristic(sample, norm: str = "l2", rng: RngLike = None) -> float:
    """Lower median of the pairwise distances of ``sample``.

    Samples with more than :data:`MEDIAN_SUBSAMPLE` rows are first reduced to
    a uniform subsample drawn from ``rng``.  If the median itself is zero
    (heavy ties) the median of the nonzero distances is used instead.
    """
    x = as_sample(sample)
    n = x.shape[0]
    if n < 2:
        raise DegenerateSample("the median heuristic needs at least two rows")
    if n > MEDIAN_SUBSAMPLE:
        idx = np.sort(_as_rng(rng).choice(n, MEDIAN_SUBSAMPLE, replace=False))
        x = x[idx]
    if norm == "l1" or (norm == "l2" and x.shape[1] <= DIRECT_MAX_DIM):
        packed, top = _packed_median_distances(x, norm)
        return _median_of_packed(packed, top, x.shape[0], norm == "l2")
    return _median_of(pairwise_distances(x, norm))


def _packed_distances(x: np.ndarray, norm: str, top: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-packed L1 distances, or squared L2 distances.

    ``top``, if given, is filled with the histogram the packed median needs.
    """
    xt = np.ascontiguousarray(x.T)
    top = _NO_HISTOGRAM if top is None else top
    return _jit.l1dist_packed(xt, top) if norm == "l1" else _jit.sqdist_packed(xt, top)


def _packed_median_distances(x: np.ndarray, norm: str):
    top = np.zeros(1 << 15, np.int64)
    return _packed_distances(x, norm, top), top


def _median_of_packed(packed: np.ndarray, top: np.ndarray, n: int, squared: bool) -> float:
    med = _jit.packed_lower_median(packed, n, top)
    if med < 0:
        raise DegenerateSample("all pairwise distances are zero")
    return math.sqrt(med) if squared else med


def _median_of(dist: np.ndarray) -> float:
    if not np.any(dist > 0):
        raise DegenerateSample("all pairwise distances are zero")
    med = _lower_median(dist)
    if med <= 0:
        med = _lower_median(dist[dist > 0])
    return float(med)


def _lower_median(values: np.ndarray) -> float:
    k = (values.size - 1) // 2
    return np.partition(values, k)[k]


def resolve_bandwidth(spec: KernelSpec, sample, rng: RngLike = None) -> KernelSpec:
    """Return ``spec`` with its bandwidth filled in from ``sample``.

    ``MEDIAN_FIRST_HALF`` only ever looks at the first ``n // 2`` rows.
    """
    if spec.source is BandwidthSource.FIXED:
        return spec
    x = as_sample(sample)
    if spec.source is BandwidthSource.MEDIAN_FIRST_HALF:
        x = x[: x.shape[0] // 2]
    bw = median_heuristic(x, spec.family.norm, rng)
    return dataclasses.replace(spec, bandwidth=bw)


def gram(spec: KernelSpec, rows_a, rows_b=None) -> np.ndarray:
    """Kernel matrix between the rows of ``rows_a`` and ``rows_b``.

    Leaving ``rows_b`` out (or passing the same object) builds the symmetric
    Gram matrix of ``rows_a``: exactly symmetric, with a unit diagonal, and
    entry for entry equal to :func:`gram_packed`.
    """
    if rows_b is None or rows_b is rows_a:
        x = as_sample(rows_a)
        if _wide(spec, x):
            return _jit.mirror_lower(_wide_gaussian(spec, x))
        return _jit.unpack_symmetric(gram_packed(spec, x)[0], x.shape[0])
    spec._require_resolved()
    a, b = as_sample(rows_a), as_sample(rows_b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"ambient dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    bw = spec.bandwidth
    if spec.family is Family.LAPLACE:
        return _jit.laplace_gram_cross(a, b, bw)
    if a.shape[1] <= DIRECT_MAX_DIM:
        return _jit.gaussian_gram_cross(a, b, bw)
    # wide inputs: shift by a's mean first so the inner-product form keeps precision
    shift = a.mean(axis=0)
    ac, bc = a - shift, b - shift
    sq_a = np.einsum("ij,ij->i", ac, ac)
    sq_b = np.einsum("ij,ij->i", bc, bc)
    return _jit.gaussian_from_inner(np.ascontiguousarray(ac @ bc.T), sq_a, sq_b, bw, False)


def _wide(spec: KernelSpec, x: np.ndarray) -> bool:
    return spec.family is Family.GAUSSIAN and x.shape[1] > DIRECT_MAX_DIM


def _wide_gaussian(spec: KernelSpec, x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    sq = np.einsum("ij,ij->i", xc, xc)
    return _jit.gaussian_from_inner(xc @ xc.T, sq, sq, spec.bandwidth, True)


def gram_packed(spec: KernelSpec, x):
    """Row-packed lower triangle of the Gram matrix of ``x`` and its row means.

    Row ``i`` occupies ``packed[i*(i+1)//2 : (i+1)*(i+2)//2]``.  Row means
    match ``center_full``'s bit for bit.  For narrow inputs entry ``(i, j)``
    depends only on rows ``i`` and ``j``, so reindexing reproduces the Gram
    matrix of a row-permuted sample exactly.
    """
    spec._require_resolved()
    x = as_sample(x)
    n = x.shape[0]
    if _wide(spec, x):
        return _jit.pack_lower(_wide_gaussian(spec, x))
    return _exp_packed(spec, _packed_distances(x, spec.family.norm), n)


def _exp_packed(spec: KernelSpec, packed: np.ndarray, n: int):
    if spec.family is Family.LAPLACE:
        scale = -1.0 / spec.bandwidth
    else:
        scale = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth)
    # row blocks small enough that the row sums read them back from cache
    sums = np.zeros(n)
    i0 = 0
    while i0 < n:
        start = i0 * (i0 + 1) // 2
        i1 = min(n, max(i0 + 1, math.isqrt(2 * (start + EXP_BLOCK))))
        block = packed[start : i1 * (i1 + 1) // 2]
        block *= scale
        np.exp(block, out=block)
        _jit.packed_row_sums_into(packed, sums, i0, i1)
        i0 = i1
    return packed, sums / n


def resolved_gram_packed(spec: KernelSpec, x, rng: RngLike = None):
    """Resolve ``spec`` on ``x`` and build its packed Gram matrix.

    When the median needs every pair of rows anyway, the distances are
    computed once and shared by the bandwidth and the Gram matrix.
    Returns ``(spec, packed, row_means)``.
    """
    x = as_sample(x)
    n = x.shape[0]
    shared = (
        spec.source is BandwidthSource.MEDIAN_FULL
        and 2 <= n <= MEDIAN_SUBSAMPLE
        and not _wide(spec, x)
    )
    if not shared:
        spec = resolve_bandwidth(spec, x, rng)
        return (spec, *gram_packed(spec, x))
    packed, top = _packed_median_distances(x, spec.family.norm)
    bw = _median_of_packed(packed, top, n, spec.family is Family.GAUSSIAN)
    spec = dataclasses.replace(spec, bandwidth=bw)
    return (spec, *_exp_packed(spec, packed, n))


def center_full(K, check: bool = True, overwrite: bool = False) -> np.ndarray:
    """Empirically centred Gram matrix ``HKH`` by the four-term formula.

    ``H`` is never formed.  Means are taken over the lower triangle and
    reused for columns, so the output is exactly symmetric.
    ``overwrite=True`` centres ``K`` in place.
    """
    if not (isinstance(K, np.ndarray) and K.dtype == np.float64):
        K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {K.shape}")
    if K.shape[0] < 2:
        raise DimensionMismatch("centring needs at least two rows")
    if check and not np.allclose(K, K.T, rtol=0.0, atol=1e-12):
        raise NotSymmetric("Gram matrix is not symmetric")
    row_mean = _jit.sym_row_means(np.ascontiguousarray(K))
    grand = row_mean.mean()
    out = K if overwrite and K.flags.c_contiguous and K.flags.writeable else K.copy()
    _jit.center_inplace(out, row_mean, row_mean, grand)
    return out


def center_split(K22, K12, K11) -> np.ndarray:
    """Centre a second-half Gram block on the first-half mean embedding.

    ``K11`` is the ``m x m`` first-half Gram matrix, ``K12`` the ``m x n2``
    cross block and ``K22`` the ``n2 x n2`` second-half block.  Entry
    ``(i, j)`` of the result is the inner product of the feature vectors of
    second-half points ``i`` and ``j`` after subtracting the first-half mean.
    """
    K22 = np.asarray(K22, dtype=np.float64)
    K12 = np.asarray(K12, dtype=np.float64)
    K11 = np.asarray(K11, dtype=np.float64)
    m, n2 = K12.shape
    if K11.shape != (m, m) or K22.shape != (n2, n2):
        raise DimensionMismatch(
            f"blocks do not line up: K11 {K11.shape}, K12 {K12.shape}, K22 {K22.shape}"
        )
    mu = K12.mean(axis=0)
    nu = K11.mean()
    return _jit.center_inplace(np.array(K22, order="C"), mu, mu, nu)
