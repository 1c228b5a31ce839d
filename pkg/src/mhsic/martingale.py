"""Permutation-free martingale HSIC statistics.

``mhsic_test`` pairs two variables through their fully centred Gram matrices;
``mdhsic_test`` handles ``d >= 2`` variables by centring on the first half of
the sample and running the martingale over the second half.
``naive_mdhsic_test`` is the unsplit ``d``-variable product, kept only as a
diagnostic: its calibration breaks down once ``d`` is comparable to
``sqrt(n)``.
"""

from __future__ import annotations

import dataclasses
import time
from statistics import NormalDist
from typing import Optional, Sequence

import numpy as np

from . import _jit
from .errors import (
    BandwidthLeak,
    DegenerateSample,
    DegenerateVariance,
    DimensionMismatch,
    TooFewObservations,
)
from .kernels import (
    BandwidthSource,
    KernelSpec,
    as_sample,
    center_full,
    center_split,
    gram,
    resolve_bandwidth,
    resolved_gram_packed,
)

_STD_NORMAL = NormalDist()


def normal_quantile(p: float) -> float:
    return _STD_NORMAL.inv_cdf(p)


@dataclasses.dataclass(frozen=True)
class MartingaleSummary:
    """Numerator, studentising scale and studentised value of a martingale sum.

    ``u[k]`` is the normalised inner sum of row ``k + 2`` (1-based).
    """

    T_hat: float
    sigma_hat: float
    eta: float
    u: np.ndarray = dataclasses.field(repr=False)
    n_effective: int


@dataclasses.dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    threshold: float
    alpha: float
    reject: bool
    p_value: Optional[float] = None
    summary: Optional[MartingaleSummary] = None
    bandwidths: tuple = ()
    n: int = 0
    m: Optional[int] = None
    runtime_seconds: float = 0.0
    seed: Optional[int] = None

    __test__ = False  # keep pytest from collecting this class

    @property
    def decision(self) -> str:
        return "reject" if self.reject else "fail_to_reject"

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "decision": self.decision,
            "p_value": self.p_value,
            "n": self.n,
            "m": self.m,
            "bandwidths": list(self.bandwidths),
            "runtime_seconds": self.runtime_seconds,
            "seed": self.seed,
        }
        if self.summary is not None:
            out["T_hat"] = self.summary.T_hat
            out["sigma_hat"] = self.summary.sigma_hat
        return out


def studentized_lower_triangular(P) -> MartingaleSummary:
    """Studentise the lower-triangular martingale sum of a pair matrix.

    With ``u_i = (1/i) * sum_{j<i} P[i, j]`` for ``i = 2..n`` (1-based),
    ``T = sum(u) / n``, ``sigma**2 = sum(u**2) / n**2`` and ``eta = T / sigma``.
    Diagonal entries of ``P`` are never read.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    n = P.shape[0]
    if P.ndim != 2 or P.shape[1] != n:
        raise DimensionMismatch(f"expected a square matrix, got shape {P.shape}")
    if n < 2:
        raise TooFewObservations("need at least two observations")
    return _studentize(_jit.lower_row_sums(P))


def _studentize(row_sums) -> MartingaleSummary:
    n = row_sums.shape[0]
    u = row_sums[1:] / np.arange(2, n + 1)
    T = u.sum() / n
    sigma = np.sqrt(np.dot(u, u)) / n
    if not sigma > 0:
        raise DegenerateVariance("studentising scale is zero")
    return MartingaleSummary(float(T), float(sigma), float(T / sigma), u, n)


def _decide(method, summary, alpha, **extra) -> TestResult:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    z = normal_quantile(1.0 - alpha)
    return TestResult(
        method=method,
        statistic=summary.eta,
        threshold=z,
        alpha=alpha,
        reject=bool(summary.eta > z),
        p_value=1.0 - _STD_NORMAL.cdf(summary.eta),
        summary=summary,
        **extra,
    )


def _resolve(spec: Optional[KernelSpec], sample, rng) -> KernelSpec:
    spec = KernelSpec() if spec is None else spec
    try:
        return resolve_bandwidth(spec, sample, rng)
    except DegenerateSample as exc:
        # no spread means a zero centred Gram, whatever the bandwidth
        raise DegenerateVariance(str(exc)) from exc


def _resolved_packed(spec: Optional[KernelSpec], sample, rng):
    spec = KernelSpec() if spec is None else spec
    try:
        return resolved_gram_packed(spec, sample, rng)
    except DegenerateSample as exc:
        raise DegenerateVariance(str(exc)) from exc


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(0 if seed is None else seed)


def _aligned(xs) -> list:
    samples = [as_sample(x) for x in xs]
    n = samples[0].shape[0]
    if any(s.shape[0] != n for s in samples):
        raise DimensionMismatch(f"row counts differ: {[s.shape[0] for s in samples]}")
    return samples


def _specs(ks, d):
    if ks is None:
        return [None] * d
    if isinstance(ks, KernelSpec):
        return [ks] * d
    ks = list(ks)
    if len(ks) != d:
        raise DimensionMismatch(f"got {len(ks)} kernel specs for {d} variables")
    return ks


def mhsic_test(
    x,
    y,
    alpha: float = 0.05,
    kx: Optional[KernelSpec] = None,
    ky: Optional[KernelSpec] = None,
    seed: Optional[int] = None,
) -> TestResult:
    """Martingale HSIC independence test; rejects when ``eta > z_{1-alpha}``.

    Kernels default to Gaussian with the median-heuristic bandwidth on the
    full sample.  ``seed`` only drives the median subsample for large ``n``.
    """
    start = time.perf_counter()
    x, y = _aligned([x, y])
    if x.shape[0] < 2:
        raise TooFewObservations("need at least two observations")
    rng = _rng(seed)
    kx, Kx, rx = _resolved_packed(kx, x, rng)
    ky, Ky, ry = _resolved_packed(ky, y, rng)
    # fused: centre both lower triangles on the fly, never form H K H
    sums = _jit.centred_pair_packed_row_sums(Kx, rx, rx.mean(), Ky, ry, ry.mean())
    summary = _studentize(sums)
    return _decide(
        "mhsic",
        summary,
        alpha,
        bandwidths=(kx.bandwidth, ky.bandwidth),
        n=x.shape[0],
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
    )


def split_centred_grams(xs, ks) -> list:
    """Second-half Gram blocks centred on the first-half mean embedding."""
    out = []
    for x, k in zip(xs, ks):
        m = x.shape[0] // 2
        s1, s2 = x[:m], x[m:]
        out.append(center_split(gram(k, s2), gram(k, s1, s2), gram(k, s1)))
    return out


def mdhsic_test(
    xs: Sequence,
    alpha: float = 0.05,
    ks=None,
    seed: Optional[int] = None,
) -> TestResult:
    """Split-martingale joint-independence test for ``d >= 2`` variables.

    The first ``m = n // 2`` rows fix each variable's centring (and its
    median bandwidth); the studentised martingale runs over the remaining
    ``n - m`` rows.  Row order defines the split, so shuffle upstream if a
    random split is wanted.
    """
    start = time.perf_counter()
    xs = _aligned(xs)
    d, n = len(xs), xs[0].shape[0]
    if d < 2:
        raise DimensionMismatch("joint independence needs at least two variables")
    if n < 6:
        raise TooFewObservations(f"mdhsic needs n >= 6 observations, got {n}")
    ks = [KernelSpec.median(first_half=True) if k is None else k for k in _specs(ks, d)]
    for k in ks:
        if k.source is BandwidthSource.MEDIAN_FULL:
            raise BandwidthLeak(
                "mdhsic bandwidths must depend on the first half only; "
                "use a fixed or first-half median bandwidth"
            )
    rng = _rng(seed)
    ks = [_resolve(k, x, rng) for k, x in zip(ks, xs)]
    grams = split_centred_grams(xs, ks)
    P = grams[0]
    for G in grams[1:]:
        P *= G
    summary = studentized_lower_triangular(P)
    return _decide(
        "mdhsic",
        summary,
        alpha,
        bandwidths=tuple(k.bandwidth for k in ks),
        n=n,
        m=n // 2,
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
    )


def naive_mdhsic_test(
    xs: Sequence,
    alpha: float = 0.05,
    ks=None,
    seed: Optional[int] = None,
) -> TestResult:
    """Unsplit product of fully centred Grams.  Diagnostic only.

    Not a valid test for many variables: the full-sample centring bias adds
    up across factors and inflates the type-I error.
    """
    start = time.perf_counter()
    xs = _aligned(xs)
    d, n = len(xs), xs[0].shape[0]
    if d < 2:
        raise DimensionMismatch("joint independence needs at least two variables")
    if n < 2:
        raise TooFewObservations("need at least two observations")
    rng = _rng(seed)
    ks = [_resolve(k, x, rng) for k, x in zip(_specs(ks, d), xs)]
    P = None
    for k, x in zip(ks, xs):
        G = center_full(gram(k, x), check=False, overwrite=True)
        if P is None:
            P = G
        else:
            P *= G
    summary = studentized_lower_triangular(P)
    return _decide(
        "naive-mdhsic",
        summary,
        alpha,
        bandwidths=tuple(k.bandwidth for k in ks),
        n=n,
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
    )
