"""Command-line entry point: ``mhsic {test,generate,sweep,bench,normality}``.

Exit codes: 0 the command ran (whatever the test decided), 2 usage, file or
config errors, 3 degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dgp import LinearGaussianDgpConfig, MixtureDgpConfig, generate
from .errors import ConfigInvalid, DegenerateVariance, MhsicError
from .harness import GridConfig, bench_runtime, normality_report, run_grid
from .kernels import Family, KernelSpec

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3

METHOD_CHOICES = ("mhsic", "mdhsic", "naive-mdhsic", "hsic-perm", "dhsic-perm")

PRESETS: Dict[str, dict] = {
    "fig1-desk": dict(
        methods=["mhsic"],
        dgp="mixture",
        d_ambient=[1, 10],
        n=[100, 500, 2000],
        a=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        M=200,
    ),
    "fig2-desk": dict(
        methods=["mdhsic"],
        dgp="linear-gaussian",
        d=[2, 3, 5],
        n=[100, 500, 2000],
        a=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        M=200,
    ),
    "table1-desk": dict(
        methods=["mhsic", "hsic-perm"],
        dgp="mixture",
        d_ambient=[10],
        n=[500, 1000, 2000],
        a=[0.0],
        M=20,
    ),
}


class UsageError(Exception):
    """Bad flags, unreadable files or malformed configs."""


# data files


_PREFIX = re.compile(r"^v(\d+)_")


def _read_csv_matrix(path: Path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise UsageError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if data.size == 0:
        raise UsageError(f"{path} has no data rows")
    if data.ndim != 2 or data.shape[1] != len(header):
        raise UsageError(f"{path}: rows do not match the header width {len(header)}")
    if not np.all(np.isfinite(data)):
        raise UsageError(f"{path} contains non-finite values")
    return header, data


def read_variables(paths: Sequence[str]) -> List[np.ndarray]:
    """Load the variables to test.

    Several files mean one variable per file.  A single file is grouped by
    ``v1_``, ``v2_`` ... column prefixes when every column has one;
    otherwise each column is its own variable.
    """
    if not paths:
        raise UsageError("no input files given")
    if len(paths) > 1:
        xs = [_read_csv_matrix(Path(p))[1] for p in paths]
        rows = {x.shape[0] for x in xs}
        if len(rows) != 1:
            raise UsageError(f"files have different row counts: {[x.shape[0] for x in xs]}")
        return xs
    header, data = _read_csv_matrix(Path(paths[0]))
    tags = [_PREFIX.match(h.strip()) for h in header]
    if all(tags):
        groups: Dict[int, List[int]] = {}
        for col, tag in enumerate(tags):
            groups.setdefault(int(tag.group(1)), []).append(col)
        return [data[:, groups[k]] for k in sorted(groups)]
    return [data[:, [c]] for c in range(data.shape[1])]


def write_variables(path, xs: Sequence[np.ndarray]):
    header = [f"v{k + 1}_{j + 1}" for k, x in enumerate(xs) for j in range(x.shape[1])]
    data = np.hstack(xs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


# sweep configs


_LIST_KEYS = {"method", "methods", "n", "a", "d", "d_ambient"}
_SCALAR_KEYS = {"dgp", "p", "M", "alpha", "base_seed", "B", "noise_scale"}


def parse_config(text: str) -> GridConfig:
    """``key=value`` lines; repeated keys build lists, ``#`` starts a comment."""
    lists: Dict[str, list] = {}
    scalars: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _LIST_KEYS:
            key = "methods" if key == "method" else key
            lists.setdefault(key, []).extend(v.strip() for v in value.split(",") if v.strip())
        elif key in _SCALAR_KEYS:
            scalars[key] = value
        else:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
    try:
        kwargs = {"methods": lists.get("methods", [])}
        for key, cast in (("n", int), ("d", int), ("d_ambient", int), ("a", float)):
            if key in lists:
                kwargs[key] = [cast(v) for v in lists[key]]
        for key, cast in (("p", int), ("M", int), ("alpha", float), ("base_seed", int), ("B", int), ("noise_scale", float)):
            if key in scalars:
                kwargs[key] = cast(scalars[key])
        if "dgp" in scalars:
            kwargs["dgp"] = scalars["dgp"]
    except ValueError as exc:
        raise UsageError(f"config value: {exc}") from None
    return GridConfig(**kwargs)


# commands


def _default_seed() -> int:
    raw = os.environ.get("MHSIC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MHSIC_SEED must be an integer, got {raw!r}") from None


def _kernel_spec(args) -> KernelSpec:
    family = Family(args.kernel)
    if args.bandwidth == "median":
        return KernelSpec.median(family, first_half=args.method == "mdhsic")
    if args.bandwidth == "median-full":
        return KernelSpec.median(family)
    try:
        return KernelSpec.fixed(float(args.bandwidth), family)
    except ValueError:
        raise UsageError(f"--bandwidth must be 'median' or a positive number, got {args.bandwidth!r}") from None


def cmd_test(args) -> int:
    from .baselines import PermutationConfig, permutation_test
    from .martingale import mdhsic_test, mhsic_test, naive_mdhsic_test

    xs = read_variables(args.files)
    seed = args.seed if args.seed is not None else _default_seed()
    spec = _kernel_spec(args)
    d = len(xs)
    if d < 2:
        raise UsageError("need at least two variables")
    if args.method in ("mhsic", "hsic-perm") and d != 2:
        raise UsageError(f"{args.method} tests exactly two variables, got {d}")
    if args.method == "mhsic":
        result = mhsic_test(xs[0], xs[1], args.alpha, spec, spec, seed=seed)
    elif args.method == "mdhsic":
        result = mdhsic_test(xs, args.alpha, [spec] * d, seed=seed)
    elif args.method == "naive-mdhsic":
        result = naive_mdhsic_test(xs, args.alpha, [spec] * d, seed=seed)
    else:
        stat = args.method.split("-")[0]
        result = permutation_test(xs, stat, PermutationConfig(args.B, seed), args.alpha, [spec] * d, seed=seed)
    if args.json:
        print(json.dumps(result.to_dict(), sort_keys=True))
    else:
        print(f"method     {result.method}")
        print(f"statistic  {result.statistic:.6g}")
        print(f"threshold  {result.threshold:.6g}")
        if result.p_value is not None:
            print(f"p-value    {result.p_value:.6g}")
        print(f"decision   {result.decision.replace('_', ' ')}")
        print(f"runtime    {result.runtime_seconds:.4g} s")
    return EXIT_OK


def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        if args.dgp == "mixture":
            cfg = MixtureDgpConfig(d_ambient=args.d_ambient, n=args.n, a=args.a, seed=seed)
        else:
            cfg = LinearGaussianDgpConfig(d=args.d, p=args.p, n=args.n, a=args.a, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        write_variables(args.out, generate(cfg))
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.preset:
        cfg = GridConfig(**PRESETS[args.preset])
    elif args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc.strerror}") from None
        cfg = parse_config(text)
    else:
        raise UsageError("sweep needs a config file or --preset")
    for key in ("M", "base_seed"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()

    def progress(cell):
        if not args.quiet:
            print(
                f"{cell.method} d={cell.d} q={cell.d_ambient} n={cell.n} a={cell.a:g}: "
                f"rate={cell.rejection_rate:.3f}",
                file=sys.stderr,
            )

    report = run_grid(cfg, workers=args.threads, progress=progress)
    try:
        report.write(args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_OK


def cmd_bench(args) -> int:
    table = bench_runtime(
        methods=("hsic-perm", "mhsic"),
        n_grid=args.n,
        dgp=MixtureDgpConfig(d_ambient=args.d_ambient, a=0.5),
        repeats=args.repeats,
        B=args.B,
    )
    print(table.format())
    return EXIT_OK


def cmd_normality(args) -> int:
    if args.method == "mhsic":
        cfg = MixtureDgpConfig(d_ambient=args.d_ambient, n=args.n)
    else:
        cfg = LinearGaussianDgpConfig(d=args.d, p=args.p, n=args.n)
    seed = args.seed if args.seed is not None else _default_seed()
    print(normality_report(args.method, cfg, M=args.M, base_seed=seed).format())
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhsic", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=_positive_int, default=1, help="worker threads for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="run one independence test on CSV data")
    p.add_argument("files", nargs="+")
    p.add_argument("--method", choices=METHOD_CHOICES, default="mhsic")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kernel", choices=[f.value for f in Family], default="gaussian")
    p.add_argument("--bandwidth", default="median", help="'median' or a positive number")
    p.add_argument("--B", type=_positive_int, default=200, help="permutations for *-perm methods")
    p.add_argument("--seed", type=int, default=None, help="defaults to $MHSIC_SEED or 0")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_test)

    g = sub.add_parser("generate", help="write a synthetic sample as CSV")
    g.add_argument("--dgp", choices=("mixture", "linear-gaussian"), default="mixture")
    g.add_argument("--n", type=_positive_int, default=100)
    g.add_argument("--d-ambient", type=_positive_int, default=1)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--p", type=_positive_int, default=5)
    g.add_argument("--a", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sweep", help="Monte-Carlo grid sweep to CSV")
    s.add_argument("config", nargs="?")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--out", required=True)
    s.add_argument("--M", type=_positive_int, default=None, help="override trials per cell")
    s.add_argument("--base-seed", dest="base_seed", type=int, default=None)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="runtime table for mhsic vs hsic-perm")
    b.add_argument("--n", type=_positive_int, nargs="+", default=[500, 1000, 2000, 4000])
    b.add_argument("--d-ambient", type=_positive_int, default=10)
    b.add_argument("--repeats", type=_positive_int, default=10)
    b.add_argument("--B", type=_positive_int, default=200)
    b.set_defaults(func=cmd_bench)

    nm = sub.add_parser("normality", help="KS distance of the null statistic to N(0, 1)")
    nm.add_argument("--method", choices=("mhsic", "mdhsic", "naive-mdhsic"), default="mhsic")
    nm.add_argument("--n", type=_positive_int, default=2000)
    nm.add_argument("--d-ambient", type=_positive_int, default=1)
    nm.add_argument("--d", type=int, default=3)
    nm.add_argument("--p", type=_positive_int, default=5)
    nm.add_argument("--M", type=_positive_int, default=500)
    nm.add_argument("--seed", type=int, default=None)
    nm.set_defaults(func=cmd_normality)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DegenerateVariance as exc:
        print(f"mhsic: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, MhsicError, ConfigInvalid, ValueError) as exc:
        print(f"mhsic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
