"""Permutation-calibrated HSIC and dHSIC V-statistic baselines."""

from __future__ import annotations

import dataclasses
import time
from typing import Optional, Sequence

import numpy as np

from . import _jit
from .errors import DegenerateSample, DimensionMismatch
from .kernels import KernelSpec, as_sample, center_full, gram, gram_packed, resolve_bandwidth
from .martingale import TestResult


@dataclasses.dataclass(frozen=True)
class PermutationConfig:
    B: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"need at least one permutation, got B={self.B}")

    def replicate_rng(self, b: int) -> np.random.Generator:
        """Independent stream for replicate ``b``, fixed by ``(rng_seed, b)``."""
        return np.random.default_rng([self.rng_seed, b])


def _square_pair(KX, KY):
    KX = np.ascontiguousarray(KX, dtype=np.float64)
    KY = np.ascontiguousarray(KY, dtype=np.float64)
    if KX.ndim != 2 or KX.shape[0] != KX.shape[1] or KX.shape != KY.shape:
        raise DimensionMismatch(f"need two equal square matrices, got {KX.shape} and {KY.shape}")
    return KX, KY


def hsic_v(KX, KY) -> float:
    """Biased HSIC V-statistic ``tr(K_X H K_Y H) / n**2``.

    Evaluated as ``sum((H K_X H) * K_Y) / n**2``, which needs one centring.
    """
    KX, KY = _square_pair(KX, KY)
    n = KX.shape[0]
    KXc, _ = _jit.pack_lower(center_full(KX, check=False))
    return _jit.reindexed_inner(KXc, KY, np.arange(n)) / n**2


def hsic_v_elementwise(KX, KY) -> float:
    """Same statistic as :func:`hsic_v`, via both centred Grams."""
    KX, KY = _square_pair(KX, KY)
    n = KX.shape[0]
    return float(np.sum(center_full(KX, check=False) * center_full(KY, check=False)) / n**2)


def dhsic_v(Ks: Sequence) -> float:
    """Biased dHSIC V-statistic of ``d >= 2`` Gram matrices in ``O(d n^2)``.

    ``mean(prod K) + prod(mean K) - 2 * mean_i(prod_k rowmean(K_k)_i)``.
    """
    Ks = [np.asarray(K, dtype=np.float64) for K in Ks]
    if len(Ks) < 2:
        raise DimensionMismatch("dHSIC needs at least two Gram matrices")
    shape = Ks[0].shape
    if len(shape) != 2 or shape[0] != shape[1] or any(K.shape != shape for K in Ks):
        raise DimensionMismatch(f"Gram matrices must share a square shape: {[K.shape for K in Ks]}")
    joint = Ks[0].copy()
    for K in Ks[1:]:
        joint *= K
    row_means = [K.mean(axis=1) for K in Ks]
    term_joint = joint.mean()
    term_product = np.prod([r.mean() for r in row_means])
    term_cross = np.prod(row_means, axis=0).mean()
    return float(term_joint + term_product - 2.0 * term_cross)


def _permutation_pvalue(observed, null_stats) -> float:
    null_stats = np.asarray(null_stats)
    return (1.0 + np.count_nonzero(null_stats >= observed)) / (null_stats.size + 1.0)


def permutation_test(
    xs: Sequence,
    statistic: str = "hsic",
    cfg: PermutationConfig = PermutationConfig(),
    alpha: float = 0.05,
    ks=None,
    seed: Optional[int] = None,
    return_null: bool = False,
):
    """Permutation test with the HSIC (``d = 2``) or dHSIC statistic.

    Bandwidths are set once on the observed data.  Each replicate permutes
    the rows of variables ``2..d`` independently, reusing the cached Gram
    matrices by reindexing.  ``p = (1 + #{t_b >= t_0}) / (B + 1)`` and the
    test rejects when ``p <= alpha``.

    ``seed`` drives the median subsample; ``cfg.rng_seed`` the permutations.
    """
    start = time.perf_counter()
    samples = [as_sample(x) for x in xs]
    d, n = len(samples), samples[0].shape[0]
    if any(s.shape[0] != n for s in samples):
        raise DimensionMismatch(f"row counts differ: {[s.shape[0] for s in samples]}")
    if d < 2 or n < 2:
        raise DimensionMismatch("need at least two variables and two observations")
    if statistic == "hsic" and d != 2:
        raise DimensionMismatch("the HSIC statistic takes exactly two variables")
    if statistic not in ("hsic", "dhsic"):
        raise ValueError(f"unknown statistic {statistic!r}")

    if ks is None or isinstance(ks, KernelSpec):
        ks = [ks or KernelSpec()] * d
    rng = np.random.default_rng(0 if seed is None else seed)
    resolved = []
    for k, x in zip(ks, samples):
        try:
            resolved.append(resolve_bandwidth(k, x, rng))
        except DegenerateSample:
            # constant variable: every bandwidth yields the same all-ones Gram
            resolved.append(KernelSpec.fixed(1.0, k.family))
    null = np.empty(cfg.B)
    if statistic == "hsic":
        # only the lower triangle of the centred K_X is ever read
        KXc, rx = gram_packed(resolved[0], samples[0])
        _jit.center_packed_inplace(KXc, rx, rx.mean())
        KY = gram(resolved[1], samples[1])
        observed = _jit.reindexed_inner(KXc, KY, np.arange(n)) / n**2
        for b in range(cfg.B):
            perm = cfg.replicate_rng(b).permutation(n)
            null[b] = _jit.reindexed_inner(KXc, KY, perm) / n**2
    else:
        grams = [gram(k, x) for k, x in zip(resolved, samples)]
        observed = dhsic_v(grams)
        for b in range(cfg.B):
            rng_b = cfg.replicate_rng(b)
            permuted = [grams[0]]
            for K in grams[1:]:
                perm = rng_b.permutation(n)
                permuted.append(K[np.ix_(perm, perm)])
            null[b] = dhsic_v(permuted)

    p = _permutation_pvalue(observed, null)
    result = TestResult(
        method=f"{statistic}-perm",
        statistic=float(observed),
        threshold=float(np.quantile(null, 1.0 - alpha)),
        alpha=alpha,
        reject=bool(p <= alpha),
        p_value=float(p),
        bandwidths=tuple(k.bandwidth for k in resolved),
        n=n,
        runtime_seconds=time.perf_counter() - start,
        seed=seed,
    )
    return (result, null) if return_null else result
