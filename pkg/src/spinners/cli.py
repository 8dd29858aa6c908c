"""Command-line front end.

Every subcommand builds a plain config dict, runs it through a registered
runner and writes an :class:`ExperimentResult`. CSV output starts with one
``# {json}`` line echoing the config, then a header row; JSON output holds
the whole result. ``spinners replay FILE`` re-runs a stored config and
checks every non-timing value for bit-for-bit equality.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, seeding
from .data import distance_pairs, gaussian_blob, load_csv
from .diagnostics import (
    balancedness_rate,
    bench_matvec,
    ks_distance,
    loglog_slope,
    projection_covariance,
    projection_samples,
)
from .errors import SingularSystemError, SpinnerError
from .kernels import SIGMA_PROFILES, Kernel, error_curve, gram_exact, median_sigma
from .lsh import collision_curve, compare_families, hasher_factory, max_rise
from .newton import EXACT, LogisticProblem, SketchConfig, generate_ar1_problem, reference_optimum, solve
from .spinner import SpinnerSpec, Variant, build, fit_to_target
from .transforms import is_power_of_two, pad_to_power_of_two

log = logging.getLogger("spinners")


class UsageError(Exception):
    """Invalid flag combination; reported with exit code 2."""


@dataclass
class ExperimentResult:
    command: str
    config: dict
    tables: dict[str, list[dict]]
    summary: dict = field(default_factory=dict)
    timing_columns: list[str] = field(default_factory=list)
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(d["command"], d["config"], d["tables"], d.get("summary", {}),
                   d.get("timing_columns", []), d.get("version", ""))

    def metrics(self) -> dict:
        """Tables and summary without wall-clock values."""
        skip = set(self.timing_columns)
        tables = {name: [{k: v for k, v in row.items() if k not in skip} for row in rows]
                  for name, rows in self.tables.items()}
        return {"tables": tables, "summary": {k: v for k, v in self.summary.items() if k not in skip}}


RUNNERS: dict[str, Callable[[dict], ExperimentResult]] = {}


def runner(name: str):
    def register(fn):
        RUNNERS[name] = fn
        return fn
    return register


def _variants(names) -> list[Variant]:
    return [Variant.parse(v) for v in names]


def _prepare_rows(X: np.ndarray, variants: list[Variant], pad: bool) -> np.ndarray:
    if any(v.uses_hadamard for v in variants) and not is_power_of_two(X.shape[1]):
        if not pad:
            raise UsageError(f"input dimension {X.shape[1]} is not a power of two; "
                             f"pass --pad to zero-pad it for Hadamard-based variants")
        return pad_to_power_of_two(X)
    return X


def _resolve_sigma(value, X: np.ndarray) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    if value == "median":
        return median_sigma(X)
    if value in SIGMA_PROFILES:
        return SIGMA_PROFILES[value]
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"--sigma must be a number, 'median' or one of {sorted(SIGMA_PROFILES)}")


@runner("kernel-approx")
def run_kernel_approx(cfg: dict) -> ExperimentResult:
    if cfg["data"]:
        ds = load_csv(cfg["data"], label_column=cfg["label_column"])
    else:
        ds = gaussian_blob(cfg["dim"], cfg["points"], cfg["data_seed"], cfg["clusters"])
    variants = _variants(cfg["variant"])
    # bandwidth comes from the unpadded data; zero padding leaves distances unchanged
    sigma = _resolve_sigma(cfg["sigma"], ds.rows)
    X = _prepare_rows(ds.rows, variants, cfg["pad"])
    n = X.shape[1]
    kernel = Kernel.gaussian(sigma) if cfg["kernel"] == "gaussian" else Kernel.angular()
    features = cfg["features"] or [n // 2, n, 2 * n, 4 * n]
    seeds = [seeding.derive_seed(cfg["seed"], i) for i in range(cfg["seeds"])]
    K = gram_exact(X, kernel)
    rows = []
    for v in variants:
        for row in error_curve(X, v, kernel, features, seeds, K=K):
            row["sigma"] = sigma if kernel.kind == "gaussian" else float("nan")
            rows.append(row)
    return ExperimentResult("kernel-approx", cfg, {"errors": rows}, {"n": n, "points": len(X)})


def _pairs(cfg: dict):
    return distance_pairs(cfg["pairs"], cfg["n"], seeding.derive_seed(cfg["seed"], 0),
                          distance=cfg["distance"])


@runner("lsh-collision")
def run_lsh_collision(cfg: dict) -> ExperimentResult:
    X, Y = _pairs(cfg)
    curve = collision_curve(X, Y, hasher_factory(cfg["variant"], cfg["n"], cfg["rows"]),
                            cfg["trials"], seeding.derive_seed(cfg["seed"], 1), cfg["buckets"])
    return ExperimentResult("lsh-collision", cfg, {"curve": curve.rows()},
                            {"max_rise": max_rise(curve)})


@runner("lsh-compare")
def run_lsh_compare(cfg: dict) -> ExperimentResult:
    X, Y = _pairs(cfg)
    seed_a = seeding.derive_seed(cfg["seed"], 1)
    seed_b = seeding.derive_seed(cfg["seed"], 2) if cfg["independent_seeds"] else seed_a
    cmp = compare_families(X, Y, hasher_factory(cfg["a"], cfg["n"], cfg["rows"]),
                           hasher_factory(cfg["b"], cfg["n"], cfg["rows"]), cfg["trials"],
                           seed_a, seed_b, cfg["buckets"])
    return ExperimentResult("lsh-compare", cfg, {"buckets": cmp.rows()},
                            {"sup_difference": cmp.sup_difference,
                             "max_rise_a": max_rise(cmp.curve_a),
                             "max_rise_b": max_rise(cmp.curve_b)})


@runner("newton-sketch")
def run_newton_sketch(cfg: dict) -> ExperimentResult:
    if cfg["data"]:
        ds = load_csv(cfg["data"], label_column=True)
        problem = LogisticProblem(ds.rows, ds.labels)
    else:
        problem = generate_ar1_problem(cfg["n"], cfg["d"], seeding.derive_seed(cfg["seed"], 0))
    sketch = EXACT if cfg["sketch"].lower() == "exact" else Variant.parse(cfg["sketch"]).value
    config = SketchConfig(sketch, cfg["rows"], cfg["iters"], cfg["tol"], cfg["line_search"])
    f_star = reference_optimum(problem)
    trace = solve(problem, config, seeding.derive_seed(cfg["seed"], 1), f_star=f_star)
    return ExperimentResult("newton-sketch", cfg, {"trace": trace.rows()},
                            {"f_star": f_star, "status": trace.status,
                             "iterations": trace.iterations, "final_gap": trace.final_gap,
                             "rows": None if sketch == EXACT else config.rows_for(problem.d)},
                            timing_columns=["seconds"])


@runner("fit")
def run_fit(cfg: dict) -> ExperimentResult:
    n, m, d = cfg["n"], cfg["m"], cfg["d"]
    rows = []
    for t in range(cfg["trials"]):
        seed = seeding.derive_seed(cfg["seed"], t)
        gen = seeding.rng(seed, 0)
        target = gen.standard_normal((m, n))
        basis = np.linalg.qr(gen.standard_normal((n, d)))[0].T
        sp = build(SpinnerSpec(cfg["variant"], n, m, seed=seed))
        try:
            res = fit_to_target(sp, target, basis)
            rows.append({"trial": t, "seed": seed, "status": "ok", "residual": res.residual})
        except SingularSystemError as exc:
            log.warning("trial %d: %s", t, exc)
            rows.append({"trial": t, "seed": seed, "status": "singular", "residual": float("nan")})
    ok = [r["residual"] for r in rows if r["status"] == "ok"]
    within = sum(r <= cfg["tolerance"] for r in ok)
    return ExperimentResult("fit", cfg, {"trials": rows},
                            {"within_tolerance": within, "trials": len(rows),
                             "max_residual": max(ok) if ok else float("nan")})


def parse_sizes(text: str) -> list[int]:
    """``2^9..2^15``, ``512..4096`` (doubling) or a comma list."""
    def one(tok: str) -> int:
        tok = tok.strip()
        m = re.fullmatch(r"(\d+)\^(\d+)", tok)
        return int(m.group(1)) ** int(m.group(2)) if m else int(tok)

    if ".." in text:
        lo, hi = (one(t) for t in text.split("..", 1))
        sizes = []
        while lo <= hi:
            sizes.append(lo)
            lo *= 2
        return sizes
    return [one(t) for t in text.split(",") if t.strip()]


@runner("bench")
def run_bench(cfg: dict) -> ExperimentResult:
    sizes = parse_sizes(cfg["sizes"])
    bad = [s for s in sizes if not is_power_of_two(s)]
    if bad:
        raise UsageError(f"benchmark sizes must be powers of two: {bad}")
    rows = [asdict(r) for r in bench_matvec(cfg["variant"], sizes, cfg["reps"], cfg["seed"])]
    summary = {}
    if len(rows) >= 2:
        summary = {"structured_slope": loglog_slope(sizes, [r["structured_ns"] for r in rows]),
                   "dense_slope": loglog_slope(sizes, [r["dense_ns"] for r in rows])}
    return ExperimentResult("bench", cfg, {"bench": rows}, summary,
                            timing_columns=["structured_ns", "dense_ns", "speedup",
                                            "structured_slope", "dense_slope"])


@runner("diag-balance")
def run_diag_balance(cfg: dict) -> ExperimentResult:
    rows = [asdict(balancedness_rate(n, cfg["delta"], cfg["trials"],
                                     seeding.derive_seed(cfg["seed"], n)))
            for n in parse_sizes(cfg["n"])]
    return ExperimentResult("diag-balance", cfg, {"balance": rows})


@runner("diag-covariance")
def run_diag_covariance(cfg: dict) -> ExperimentResult:
    n, d = cfg["n"], cfg["d"]
    basis = np.linalg.qr(seeding.rng(cfg["seed"], 0).standard_normal((n, d)))[0].T
    rep = projection_covariance(cfg["variant"], n, cfg["m"], basis, cfg["resamples"],
                                seeding.derive_seed(cfg["seed"], 1))
    summary = rep.to_dict()
    cov = summary.pop("covariance")
    rows = [{"row": i, **{f"c{j}": v for j, v in enumerate(r)}} for i, r in enumerate(cov)]
    return ExperimentResult("diag-covariance", cfg, {"covariance": rows}, summary)


@runner("diag-ks")
def run_diag_ks(cfg: dict) -> ExperimentResult:
    gen = seeding.rng(cfg["seed"], 0)
    x = gen.standard_normal(cfg["n"])
    x /= np.linalg.norm(x)
    a = projection_samples(cfg["a"], x, cfg["samples"], seeding.derive_seed(cfg["seed"], 1))
    b = projection_samples(cfg["b"], x, cfg["samples"], seeding.derive_seed(cfg["seed"], 2))
    ks = ks_distance(a, b)
    return ExperimentResult("diag-ks", cfg,
                            {"ks": [{"a": Variant.parse(cfg["a"]).value,
                                     "b": Variant.parse(cfg["b"]).value,
                                     "n": cfg["n"], "samples": cfg["samples"], "ks": ks}]},
                            {"ks": ks})


def run_config(command: str, cfg: dict) -> ExperimentResult:
    if command not in RUNNERS:
        raise UsageError(f"unknown command {command!r}")
    return RUNNERS[command](cfg)


# --- output -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    return str(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    header = {"command": result.command, "config": result.config, "summary": result.summary,
              "timing_columns": result.timing_columns, "version": result.version}
    buf.write("# " + json.dumps(header, sort_keys=True, default=_json_default) + "\n")
    for name, rows in result.tables.items():
        if len(result.tables) > 1:
            buf.write(f"# table: {name}\n")
        if not rows:
            continue
        cols = list(rows[0])
        buf.write(",".join(cols) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def to_json(result: ExperimentResult) -> str:
    return json.dumps(result.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _parse_cell(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return {"true": True, "false": False, "": None}.get(text, text)


def read_result(path) -> ExperimentResult:
    """Load a result written as JSON or CSV."""
    text = Path(path).read_text()
    if not text.startswith("#"):
        return ExperimentResult.from_dict(json.loads(text))
    lines = text.splitlines()
    header = json.loads(lines[0][2:])
    tables: dict[str, list[dict]] = {}
    name, cols = "table", None
    for line in lines[1:]:
        if line.startswith("# table: "):
            name, cols = line[len("# table: "):], None
            continue
        if cols is None:
            cols = line.split(",")
            tables[name] = []
            continue
        tables[name].append(dict(zip(cols, map(_parse_cell, line.split(",")))))
    if len(tables) == 1 and "table" in tables:
        # single-table CSVs do not name their table; recover it by re-running
        tables = {"__single__": tables["table"]}
    return ExperimentResult(header["command"], header["config"], tables, header["summary"],
                            header["timing_columns"], header.get("version", ""))


def _normalize(value):
    """Canonical comparison form: floats through their 17-digit text."""
    if isinstance(value, dict):
        return {k: _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return _fmt(float(value))
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return _fmt(float(value)) if isinstance(value, np.floating) else str(int(value))
    return _fmt(value) if value is None or isinstance(value, bool) else value


def replay(path) -> tuple[bool, ExperimentResult]:
    stored = read_result(path)
    fresh = run_config(stored.command, stored.config)
    if "__single__" in stored.tables:
        stored.tables = {next(iter(fresh.tables)): stored.tables["__single__"]}
    return _normalize(stored.metrics()) == _normalize(fresh.metrics()), fresh


# --- argument parsing --------------------------------------------------------

def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", "-o", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"),
                   help="output format (default: from --out suffix, else csv)")


def _feature_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinners",
                                     description="Structured spinner experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    variant_names = [v.value for v in Variant]

    p = sub.add_parser("kernel-approx", help="Gram reconstruction error vs number of features")
    p.add_argument("--variant", action="append", help="spinner variant (repeatable; default all)")
    p.add_argument("--kernel", choices=("gaussian", "angular"), default="gaussian")
    p.add_argument("--sigma", default="median",
                   help="Gaussian bandwidth: a number, 'median', or a dataset profile "
                        "(g50c=17.4734, uspst=9.4338); default median")
    p.add_argument("--features", action="append", type=_feature_list,
                   help="feature counts, comma separated or repeated (default n/2,n,2n,4n)")
    p.add_argument("--seeds", type=int, default=10, help="feature maps per count")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--data", help="CSV dataset, one sample per line")
    source.add_argument("--synth", choices=("gaussian_blob",), default="gaussian_blob",
                        help="synthetic dataset used when --data is absent (default gaussian_blob)")
    p.add_argument("--label-column", action="store_true", help="last CSV column is a label")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--pad", action="store_true",
                   help="zero-pad non-power-of-two inputs for Hadamard-based variants")
    _add_output(p)

    for name, helptext in (("lsh-collision", "cross-polytope collision probability curve"),
                           ("lsh-compare", "compare two families' collision curves")):
        p = sub.add_parser(name, help=helptext)
        if name == "lsh-collision":
            p.add_argument("--variant", default="HD3HD2HD1", choices=variant_names)
        else:
            p.add_argument("--a", default="GaussianDense", choices=variant_names)
            p.add_argument("--b", default="HD3HD2HD1", choices=variant_names)
            p.add_argument("--independent-seeds", action="store_true",
                           help="draw family b's hashers from a different seed")
        p.add_argument("--n", type=int, default=256)
        p.add_argument("--rows", type=int, default=64)
        p.add_argument("--pairs", type=int, default=20_000)
        p.add_argument("--trials", type=int, default=100)
        p.add_argument("--buckets", type=int, default=25)
        p.add_argument("--distance", type=float, help="put every pair at this distance")
        _add_output(p)

    p = sub.add_parser("newton-sketch", help="Newton sketch on AR(1) logistic regression")
    p.add_argument("--sketch", default="HD3HD2HD1", help=f"'exact' or one of {variant_names}")
    p.add_argument("--rows", type=int, help="sketch rows m (default 4d)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-6, help="optimality gap tolerance")
    p.add_argument("--line-search", choices=("backtracking", "none"), default="backtracking")
    p.add_argument("--data", help="CSV with a final +/-1 label column instead of AR(1) data")
    _add_output(p)

    p = sub.add_parser("fit", help="fit M3 so a spinner matches a target on a subspace")
    p.add_argument("--variant", default="HD3HD2HD1", choices=variant_names)
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-8)
    _add_output(p)

    p = sub.add_parser("bench", help="single-thread matvec timing against a naive dense matvec")
    p.add_argument("--variant", default="HD3HD2HD1", choices=variant_names)
    p.add_argument("--sizes", default="2^9..2^15")
    p.add_argument("--reps", type=int, default=20)
    _add_output(p)

    p = sub.add_parser("diag", help="diagnostics: balance, covariance, ks")
    dsub = p.add_subparsers(dest="diag", required=True, metavar="DIAG")
    q = dsub.add_parser("balance", help="balancedness exceedance rate of H D1")
    q.add_argument("--n", default="2^10,2^12,2^14", help="sizes (same syntax as bench --sizes)")
    q.add_argument("--delta", type=float, help="threshold multiplier (default ln n)")
    q.add_argument("--trials", type=int, default=10_000)
    _add_output(q)
    q = dsub.add_parser("covariance", help="covariance of stacked projections over M3 draws")
    q.add_argument("--variant", default="HD3HD2HD1", choices=variant_names)
    q.add_argument("--n", type=int, default=256)
    q.add_argument("--m", type=int, default=8)
    q.add_argument("--d", type=int, default=2)
    q.add_argument("--resamples", type=int, default=20_000)
    _add_output(q)
    q = dsub.add_parser("ks", help="KS distance between two families' projections")
    q.add_argument("--a", default="GaussianDense", choices=variant_names)
    q.add_argument("--b", default="HD3HD2HD1", choices=variant_names)
    q.add_argument("--n", type=int, default=1024)
    q.add_argument("--samples", type=int, default=5000)
    _add_output(q)

    p = sub.add_parser("replay", help="re-run a result file and compare its metrics")
    p.add_argument("file")
    return parser


_OUTPUT_KEYS = {"out", "format", "verbose", "command", "diag"}


def config_from_args(args: argparse.Namespace) -> tuple[str, dict]:
    command = f"diag-{args.diag}" if args.command == "diag" else args.command
    cfg = {k: v for k, v in vars(args).items() if k not in _OUTPUT_KEYS}
    if command == "kernel-approx":
        cfg["variant"] = [Variant.parse(v).value for v in (cfg["variant"] or [v.value for v in Variant])]
        cfg["features"] = [f for group in (cfg["features"] or []) for f in group]
        if cfg["data"]:
            cfg["data"] = str(Path(cfg["data"]).resolve())
    if command == "newton-sketch" and cfg["data"]:
        cfg["data"] = str(Path(cfg["data"]).resolve())
    return command, cfg


def _write(result: ExperimentResult, out: str | None, fmt: str | None) -> None:
    if fmt is None:
        fmt = "json" if out and out.endswith(".json") else "csv"
    text = to_json(result) if fmt == "json" else to_csv(result)
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            ok, _ = replay(args.file)
            print("replay: metrics identical" if ok else "replay: metrics DIFFER", file=sys.stderr)
            return 0 if ok else 1
        command, cfg = config_from_args(args)
        result = run_config(command, cfg)
        for key, value in result.summary.items():
            log.info("%s = %s", key, value)
        _write(result, args.out, args.format)
    except UsageError as exc:
        parser.error(str(exc))
    except (SpinnerError, ValueError, OSError) as exc:
        print(f"spinners: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
