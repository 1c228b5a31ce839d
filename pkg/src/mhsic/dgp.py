"""Synthetic data-generating processes used by the experiments.

Each purpose (inputs, random maps, weights, noise family, noise draws) gets
its own stream spawned from the config seed, so no randomness is shared
between variables that are independent by construction when ``a = 0``.
"""

from __future__ import annotations

import dataclasses
from typing import List, Tuple

import numpy as np

NOISE_FAMILIES = ("gaussian", "laplace", "uniform")


def _streams(seed, count: int) -> List[np.random.Generator]:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seed.spawn(count)]


def unit_noise(family: str, size, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance draws from one of :data:`NOISE_FAMILIES`."""
    if family == "gaussian":
        return rng.standard_normal(size)
    if family == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size)
    if family == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
    raise ValueError(f"unknown noise family {family!r}")


@dataclasses.dataclass(frozen=True)
class MixtureDgpConfig:
    """``X ~ U[-1, 1]^q`` and ``Y = a * G(F(X)) + noise_scale * eps``."""

    d_ambient: int = 1
    n: int = 100
    a: float = 0.0
    noise_scale: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.d_ambient < 1 or self.n < 1:
            raise ValueError("d_ambient and n must be positive")
        if self.a < 0:
            raise ValueError("dependence strength a must be nonnegative")


@dataclasses.dataclass(frozen=True)
class LinearGaussianDgpConfig:
    """``X^k = a * sum_{l<k} A_l X^l + eps^k`` with ``p``-dimensional blocks."""

    d: int = 2
    p: int = 5
    n: int = 100
    a: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 2 or self.p < 1 or self.n < 1:
            raise ValueError("need d >= 2, p >= 1 and n >= 1")


@dataclasses.dataclass(frozen=True)
class RandomMixtureMap:
    """``z -> w1 * (A z) + w2 * (A z)**3 + w3 * tanh(A z)`` applied row-wise."""

    A: np.ndarray
    w: np.ndarray

    @classmethod
    def draw(cls, q: int, rng: np.random.Generator) -> "RandomMixtureMap":
        A = rng.normal(0.0, 1.0 / np.sqrt(q), size=(q, q))
        return cls(A, rng.dirichlet(np.ones(3)))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.A.T
        return self.w[0] * z + self.w[1] * z**3 + self.w[2] * np.tanh(z)


def random_mixture_dgp(cfg: MixtureDgpConfig) -> Tuple[np.ndarray, np.ndarray]:
    s_x, s_f, s_g, s_family, s_noise = _streams(cfg.seed, 5)
    q = cfg.d_ambient
    x = s_x.uniform(-1.0, 1.0, size=(cfg.n, q))
    F = RandomMixtureMap.draw(q, s_f)
    G = RandomMixtureMap.draw(q, s_g)
    family = NOISE_FAMILIES[s_family.integers(len(NOISE_FAMILIES))]
    noise = cfg.noise_scale * unit_noise(family, (cfg.n, q), s_noise)
    if cfg.a == 0:
        return x, noise
    return x, cfg.a * G(F(x)) + noise


def linear_gaussian_dgp(cfg: LinearGaussianDgpConfig) -> List[np.ndarray]:
    maps_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    s_maps = np.random.default_rng(maps_seq)
    eps = [g.standard_normal((cfg.n, cfg.p)) for g in _streams(noise_seq, cfg.d)]
    xs = [eps[0]]
    for k in range(2, cfg.d + 1):
        A = s_maps.normal(0.0, 1.0 / np.sqrt(cfg.p * k), size=(k - 1, cfg.p, cfg.p))
        if cfg.a == 0:
            xs.append(eps[k - 1])
            continue
        signal = sum(xs[l] @ A[l].T for l in range(k - 1))
        xs.append(cfg.a * signal + eps[k - 1])
    return xs


def generate(cfg) -> List[np.ndarray]:
    """Draw one sample as a list of per-variable arrays."""
    if isinstance(cfg, MixtureDgpConfig):
        return list(random_mixture_dgp(cfg))
    if isinstance(cfg, LinearGaussianDgpConfig):
        return linear_gaussian_dgp(cfg)
    raise TypeError(f"unknown DGP config {type(cfg).__name__}")
