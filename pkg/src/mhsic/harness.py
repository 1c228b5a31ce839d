"""Seeded Monte-Carlo driver for calibration, power, runtime and normality runs.

Rejection counts are a pure function of the configuration: every trial's
data seed is derived from ``(base_seed, cell coordinates, trial index)``.
Wall-clock times cover the test only (Gram build, statistic, threshold),
never the data generation.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from . import __version__
from .baselines import PermutationConfig, permutation_test
from .dgp import LinearGaussianDgpConfig, MixtureDgpConfig, generate
from .errors import ConfigInvalid, DegenerateVariance
from .martingale import TestResult, mdhsic_test, mhsic_test, naive_mdhsic_test

CSV_FIELDS = (
    "method",
    "d",
    "d_ambient",
    "p",
    "n",
    "a",
    "alpha",
    "M",
    "trials_completed",
    "degenerate_count",
    "rejection_rate",
    "stderr_rate",
    "mean_runtime_s",
    "base_seed",
)

DgpConfig = Union[MixtureDgpConfig, LinearGaussianDgpConfig]


# method registry: (samples, alpha, seed, B) -> TestResult


def _run_mhsic(xs, alpha, seed, B):
    if len(xs) != 2:
        raise ConfigInvalid("mhsic tests exactly two variables")
    return mhsic_test(xs[0], xs[1], alpha, seed=seed)


def _run_mdhsic(xs, alpha, seed, B):
    return mdhsic_test(xs, alpha, seed=seed)


def _run_naive(xs, alpha, seed, B):
    return naive_mdhsic_test(xs, alpha, seed=seed)


def _run_hsic_perm(xs, alpha, seed, B):
    return permutation_test(xs, "hsic", PermutationConfig(B, seed), alpha, seed=seed)


def _run_dhsic_perm(xs, alpha, seed, B):
    return permutation_test(xs, "dhsic", PermutationConfig(B, seed), alpha, seed=seed)


METHODS: Dict[str, Callable] = {
    "mhsic": _run_mhsic,
    "mdhsic": _run_mdhsic,
    "naive-mdhsic": _run_naive,
    "hsic-perm": _run_hsic_perm,
    "dhsic-perm": _run_dhsic_perm,
}


def _method(method) -> Callable:
    if callable(method):
        return method
    try:
        return METHODS[method]
    except KeyError:
        raise ConfigInvalid(f"unknown method {method!r}; choose from {sorted(METHODS)}") from None


def _method_name(method) -> str:
    return method if isinstance(method, str) else getattr(method, "__name__", "custom")


def cell_coordinates(dgp) -> dict:
    """``d``, ``d_ambient``, ``p``, ``n``, ``a`` of a DGP config (``None`` if not applicable)."""
    if isinstance(dgp, MixtureDgpConfig):
        return {"d": 2, "d_ambient": dgp.d_ambient, "p": None, "n": dgp.n, "a": dgp.a}
    if isinstance(dgp, LinearGaussianDgpConfig):
        return {"d": dgp.d, "d_ambient": None, "p": dgp.p, "n": dgp.n, "a": dgp.a}
    coords = getattr(dgp, "coordinates", None)
    return dict(coords) if coords else {"d": None, "d_ambient": None, "p": None, "n": None, "a": None}


def trial_seed(base_seed: int, coords: dict, trial: int) -> int:
    """63-bit seed for one trial, stable across platforms and Python runs."""
    key = json.dumps([base_seed, coords, trial], sort_keys=True).encode()
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _sampler(dgp) -> Callable[[int], list]:
    if isinstance(dgp, (MixtureDgpConfig, LinearGaussianDgpConfig)):
        return lambda seed: generate(dataclasses.replace(dgp, seed=seed))
    if callable(dgp):
        return dgp
    raise ConfigInvalid(f"unsupported DGP {dgp!r}")


@dataclasses.dataclass
class CellResult:
    method: str
    d: Optional[int]
    d_ambient: Optional[int]
    p: Optional[int]
    n: Optional[int]
    a: Optional[float]
    alpha: float
    M: int
    trials_completed: int
    degenerate_count: int
    rejection_rate: float
    stderr_rate: float
    mean_runtime_s: float
    base_seed: int
    statistics: Optional[np.ndarray] = dataclasses.field(default=None, repr=False, compare=False)

    @property
    def rejections(self) -> int:
        if self.trials_completed == 0:
            return 0
        return int(round(self.rejection_rate * self.trials_completed))

    def sort_key(self):
        def k(v):
            return (v is not None, -1 if v is None else v)

        return (self.method, k(self.d), k(self.d_ambient), k(self.n), k(self.a))

    def row(self) -> dict:
        return {f: _fmt(getattr(self, f)) for f in CSV_FIELDS}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def run_cell(
    method,
    dgp,
    alpha: float = 0.05,
    M: int = 1000,
    base_seed: int = 0,
    B: int = 200,
    workers: int = 1,
    keep_statistics: bool = False,
) -> CellResult:
    """Run ``M`` independent trials of one method on one DGP cell.

    ``method`` is a registry name or a callable ``(xs, alpha, seed, B)`` that
    returns a :class:`TestResult` (or a plain reject flag).  ``dgp`` is a DGP
    config or a callable ``seed -> list of samples``.  Trials whose data
    cannot calibrate the test are counted in ``degenerate_count`` and left
    out of the rate.
    """
    if M < 1:
        raise ConfigInvalid("need at least one trial")
    run = _method(method)
    sample = _sampler(dgp)
    coords = cell_coordinates(dgp)

    def one(trial):
        seed = trial_seed(base_seed, coords, trial)
        xs = sample(seed)
        start = time.perf_counter()
        try:
            out = run(xs, alpha, seed, B)
        except DegenerateVariance:
            return None
        elapsed = time.perf_counter() - start
        if isinstance(out, TestResult):
            return out.reject, out.runtime_seconds, out.statistic
        return bool(out), elapsed, math.nan

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(one, range(M)))
    else:
        outcomes = [one(t) for t in range(M)]

    done = [o for o in outcomes if o is not None]
    completed = len(done)
    rejections = sum(o[0] for o in done)
    rate = rejections / completed if completed else math.nan
    return CellResult(
        method=_method_name(method),
        alpha=alpha,
        M=M,
        trials_completed=completed,
        degenerate_count=M - completed,
        rejection_rate=rate,
        stderr_rate=math.sqrt(rate * (1 - rate) / completed) if completed else math.nan,
        mean_runtime_s=float(np.mean([o[1] for o in done])) if done else math.nan,
        base_seed=base_seed,
        statistics=np.array([o[2] for o in done]) if keep_statistics else None,
        **coords,
    )


@dataclasses.dataclass
class GridConfig:
    """Cartesian sweep.  ``dgp`` is ``"mixture"`` or ``"linear-gaussian"``."""

    methods: List[str]
    dgp: str = "mixture"
    n: List[int] = dataclasses.field(default_factory=lambda: [500])
    a: List[float] = dataclasses.field(default_factory=lambda: [0.0])
    d: List[int] = dataclasses.field(default_factory=lambda: [2])
    d_ambient: List[int] = dataclasses.field(default_factory=lambda: [1])
    p: int = 5
    noise_scale: float = 0.25
    M: int = 1000
    alpha: float = 0.05
    base_seed: int = 0
    B: int = 200

    def validate(self):
        if not self.methods:
            raise ConfigInvalid("method list is empty")
        for m in self.methods:
            _method(m)
        if self.dgp not in ("mixture", "linear-gaussian"):
            raise ConfigInvalid(f"unknown dgp {self.dgp!r}")
        for name in ("n", "a", "d", "d_ambient"):
            if not getattr(self, name):
                raise ConfigInvalid(f"grid list {name!r} is empty")
        if self.M < 1:
            raise ConfigInvalid("M must be at least 1")
        if not 0 < self.alpha < 1:
            raise ConfigInvalid("alpha must lie in (0, 1)")

    def cells(self) -> List[DgpConfig]:
        self.validate()
        if self.dgp == "mixture":
            return [
                MixtureDgpConfig(d_ambient=q, n=n, a=a, noise_scale=self.noise_scale)
                for q, n, a in itertools.product(self.d_ambient, self.n, self.a)
            ]
        return [
            LinearGaussianDgpConfig(d=d, p=self.p, n=n, a=a)
            for d, n, a in itertools.product(self.d, self.n, self.a)
        ]

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclasses.dataclass
class GridReport:
    cells: List[CellResult]
    config_hash: str = ""
    tool_version: str = __version__
    hardware: str = ""

    def write(self, path) -> Path:
        """Write the CSV and its ``.meta`` provenance sidecar."""
        path = Path(path)
        write_csv(path, self.cells)
        meta = {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "hardware": self.hardware or hardware_string(),
        }
        path.with_suffix(".meta").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
        return path


def hardware_string() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'} x{os.cpu_count()} {platform.system()}"


def run_grid(cfg: GridConfig, workers: int = 1, progress: Optional[Callable] = None) -> GridReport:
    results = []
    for method, dgp in itertools.product(cfg.methods, cfg.cells()):
        cell = run_cell(method, dgp, cfg.alpha, cfg.M, cfg.base_seed, cfg.B, workers=workers)
        if progress is not None:
            progress(cell)
        results.append(cell)
    results.sort(key=CellResult.sort_key)
    return GridReport(results, cfg.digest(), __version__, hardware_string())


def write_csv(path, cells: Sequence[CellResult]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for cell in cells:
            writer.writerow(cell.row())


_INT_FIELDS = {"d", "d_ambient", "p", "n", "M", "trials_completed", "degenerate_count", "base_seed"}


def read_csv(path) -> List[CellResult]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kwargs = {}
            for key in CSV_FIELDS:
                raw = row[key]
                if key == "method":
                    kwargs[key] = raw
                elif raw == "":
                    kwargs[key] = None
                elif key in _INT_FIELDS:
                    kwargs[key] = int(raw)
                else:
                    kwargs[key] = float(raw)
            out.append(CellResult(**kwargs))
    return out


@dataclasses.dataclass
class RuntimeTable:
    n_grid: List[int]
    mean_seconds: Dict[str, List[float]]
    speedup: List[float]
    repeats: int

    def format(self) -> str:
        head = ["n"] + [f"{n:,}" for n in self.n_grid]
        rows = [head]
        for method, times in self.mean_seconds.items():
            rows.append([method] + [f"{t:.4g}" for t in times])
        rows.append(["speed-up"] + [f"{s:.1f}x" for s in self.speedup])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows)


def bench_runtime(
    methods: Sequence[str] = ("hsic-perm", "mhsic"),
    n_grid: Sequence[int] = (500, 1000, 2000, 4000),
    dgp: Optional[DgpConfig] = None,
    repeats: int = 50,
    base_seed: int = 0,
    B: int = 200,
    baseline: str = "hsic-perm",
    fast: str = "mhsic",
) -> RuntimeTable:
    """Mean per-test wall-clock per ``(method, n)`` plus the speed-up row.

    Trials run one after another on the calling thread.  Each method is
    warmed up once on a tiny sample so compilation never lands in a timing.
    """
    if baseline not in methods or fast not in methods:
        raise ConfigInvalid(f"methods must include {baseline!r} and {fast!r}")
    dgp = dgp or MixtureDgpConfig(d_ambient=10, a=0.5)
    for m in methods:
        _method(m)(generate(dataclasses.replace(dgp, n=20, seed=0)), 0.05, 0, 2)
    means = {m: [] for m in methods}
    for n in n_grid:
        cell = dataclasses.replace(dgp, n=n)
        coords = cell_coordinates(cell)
        totals = {m: 0.0 for m in methods}
        for r in range(repeats):
            seed = trial_seed(base_seed, coords, r)
            xs = _sampler(cell)(seed)
            for m in methods:
                totals[m] += _method(m)(xs, 0.05, seed, B).runtime_seconds
        for m in methods:
            means[m].append(totals[m] / repeats)
    speedup = [b / f for b, f in zip(means[baseline], means[fast])]
    return RuntimeTable(list(n_grid), means, speedup, repeats)


@dataclasses.dataclass
class NormalityReport:
    ks_distance: float
    quantiles: Dict[float, float]
    M: int
    degenerate_count: int = 0

    def format(self) -> str:
        qs = ", ".join(f"q{q:g}={v:.3f} (N(0,1): {stats.norm.ppf(q):.3f})" for q, v in self.quantiles.items())
        return f"KS={self.ks_distance:.4f} over M={self.M}; {qs}"


QUANTILE_LEVELS = (0.9, 0.95, 0.99)


def normality_of(values) -> NormalityReport:
    """KS distance to N(0, 1) and empirical upper quantiles of ``values``."""
    values = np.asarray(values, dtype=float)
    ks = stats.kstest(values, "norm").statistic
    quantiles = {q: float(np.quantile(values, q)) for q in QUANTILE_LEVELS}
    return NormalityReport(float(ks), quantiles, values.size)


def normality_report(method: str, dgp: DgpConfig, M: int = 500, base_seed: int = 0) -> NormalityReport:
    """Collect studentised statistics over ``M`` trials of a null DGP."""
    if method not in ("mhsic", "mdhsic", "naive-mdhsic"):
        raise ConfigInvalid("normality reports need a martingale method")
    cell = run_cell(method, dgp, M=M, base_seed=base_seed, keep_statistics=True)
    report = normality_of(cell.statistics)
    report.degenerate_count = cell.degenerate_count
    return report
