"""Command-line interface: ``python -m ouest <command>`` or ``ouest <command>``.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 estimation failure.
Option values resolve as command-line flag, then ``--config`` JSON file, then
built-in default.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from . import __version__
from .estimators import (
    ESTIMATORS,
    EstimationError,
    KnownContext,
    MissingParameterError,
    ObservationSample,
    canonical_kind,
    running_trace,
)
from .experiments import (
    ExperimentConfig,
    config_hash,
    run_consistency,
    run_covariance_check,
    run_equidistribution_check,
    run_moment_check,
)
from .gauss_sim import DEFAULT_TRUNCATION, GaussianDriver, TrajectoryGrid, sample_observations, simulate_paths
from .ou_model import OuParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_ESTIMATION = 4

TABLE_SIZES = tuple(range(5, 101, 5))
TABLE_ORDER = ("x0", "mu", "theta", "sigma2")
TABLE_TITLES = {
    "x0": "initial value x0",
    "mu": "equilibrium mu",
    "theta": "rate theta",
    "sigma2": "squared volatility sigma^2",
}

DEFAULTS = {
    "theta": 0.5, "mu": -3.0, "sigma": 1.0, "x0": 3.0, "t": 0.5,
    "n": 100, "seed": None, "weyl_stream": None, "truncation": DEFAULT_TRUNCATION,
    "sampler": "exact", "estimator": None, "format": None, "out": None,
    "grid": None, "paths": 1, "fixture": None,
    "sizes": "100,1000,10000", "replications": 200, "workers": 1,
    "bins": 10, "target": "uniform", "s": 0.25,
}
DEFAULT_SEED = 2024


class UsageError(Exception):
    pass


def _fixture_path(name: str = "observations_t05.csv") -> Path:
    return Path(str(resources.files("ouest") / "data" / name))


def read_observations(path) -> list[tuple[int, float]]:
    """Parse a ``k,z`` CSV; lines starting with ``#`` are metadata and skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["k", "z"]:
        raise ValueError(f"{path}: expected header 'k,z'")
    rows = [(int(r["k"]), float(r["z"])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: no observations")
    if [k for k, _ in rows] != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: indices must run 1..n contiguously")
    if not all(math.isfinite(z) for _, z in rows):
        raise ValueError(f"{path}: non-finite value")
    return rows


def load_fixture(path=None) -> list[float]:
    return [z for _, z in read_observations(path or _fixture_path())]


def load_reference_estimates() -> dict[str, dict[int, float]]:
    with open(_fixture_path("reference_estimates.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {kind: {int(r["n"]): float(r[kind]) for r in rows} for kind in TABLE_ORDER}


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def dumps_report(doc: dict) -> str:
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc}") from exc


def _resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError:
            raise
        except ValueError as exc:
            raise UsageError(f"bad config file {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            opts[key] = value
    return opts


def _params(opts) -> OuParams:
    try:
        return OuParams(theta=opts["theta"], mu=opts["mu"], sigma=opts["sigma"], x0=opts["x0"])
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _driver(opts) -> GaussianDriver:
    if opts["seed"] is not None and opts["weyl_stream"] is not None:
        raise UsageError("--seed and --weyl-stream are mutually exclusive")
    try:
        if opts["weyl_stream"] is not None:
            return GaussianDriver.weyl(int(opts["weyl_stream"]))
        seed = DEFAULT_SEED if opts["seed"] is None else int(opts["seed"])
        return GaussianDriver.prng(seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _header_lines(meta: dict) -> str:
    return "".join(f"# {k}={json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())


def cmd_simulate(opts) -> int:
    p = _params(opts)
    driver = _driver(opts)
    fmt = opts["format"] or "csv"
    meta = {"params": asdict(p), "driver": driver.describe(), "truncation": opts["truncation"]}
    if opts["grid"] is not None:
        try:
            grid = TrajectoryGrid(_float_list(opts["grid"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        n_paths = int(opts["paths"])
        if n_paths < 1:
            raise UsageError("--paths must be >= 1")
        meta.update(mode="trajectory", grid=list(grid.times), paths=n_paths)
        x = simulate_paths(p, grid, n_paths, driver)
        rows = [(i + 1, t, float(v)) for i in range(n_paths) for t, v in zip(grid.times, x[i])]
        columns = ("path_id", "t", "x")
    else:
        t, n = float(opts["t"]), int(opts["n"])
        if not t > 0 or n < 1:
            raise UsageError("need --t > 0 and --n >= 1")
        if opts["sampler"] not in ("exact", "fourier"):
            raise UsageError(f"unknown sampler {opts['sampler']!r}")
        meta.update(mode="observations", t=t, n=n, sampler=opts["sampler"])
        z = sample_observations(p, t, n, driver, opts["sampler"], opts["truncation"])
        rows = [(k + 1, float(v)) for k, v in enumerate(z)]
        columns = ("k", "z")
    head = {"version": __version__, "config_hash": config_hash(meta), **meta}
    if fmt == "json":
        text = dumps_report({**head, "columns": list(columns), "results": [list(r) for r in rows]})
    else:
        buf = io.StringIO()
        buf.write(_header_lines(head))
        buf.write(",".join(columns) + "\n")
        for r in rows:
            buf.write(",".join(repr(v) for v in r) + "\n")
        text = buf.getvalue()
    _emit(text, opts["out"])
    return EXIT_OK


def _context(opts, kind: str) -> KnownContext:
    # the estimated parameter is never taken as known
    known = {name: opts[name] for name in ("theta", "mu", "sigma", "x0")}
    target = {"sigma2": "sigma"}.get(kind, kind)
    known[target] = None
    return KnownContext(**known)


def estimate_document(values: list[float], t: float, kinds, opts, source: str) -> tuple[dict, bool]:
    sample = ObservationSample(t, values)
    meta = {"source": source, "t": t, "n": len(values), "estimators": list(kinds),
            "known": {k: opts[k] for k in ("theta", "mu", "sigma", "x0")}}
    results = []
    failed = False
    for kind in kinds:
        ctx = _context(opts, kind)
        entry = {"estimator": kind, "n": len(values)}
        try:
            point = ESTIMATORS[kind](sample, ctx)
            entry["estimate"] = point
        except MissingParameterError as exc:
            raise UsageError(str(exc)) from exc
        except EstimationError as exc:
            failed = True
            entry["error"] = {"type": type(exc).__name__, "message": str(exc),
                              "ratio": getattr(exc, "ratio", None)}
        trace = running_trace(sample, kind, ctx)
        entry["trace"] = trace.values.tolist()
        entry["suffix_min"] = trace.suffix_min.tolist()
        entry["suffix_max"] = trace.suffix_max.tolist()
        entry["gaps"] = list(trace.gaps)
        results.append(entry)
    doc = {"kind": "estimate", "version": __version__, "config_hash": config_hash(meta),
           "config": meta, "results": results}
    return doc, failed


def cmd_estimate(opts, input_path) -> int:
    try:
        values = [z for _, z in read_observations(input_path)]
    except OSError as exc:
        print(f"error: cannot read {input_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    kinds = [canonical_kind(opts["estimator"])] if opts["estimator"] else list(TABLE_ORDER)
    doc, failed = estimate_document(values, float(opts["t"]), kinds, opts, str(input_path))
    if (opts["format"] or "json") == "csv":
        buf = io.StringIO()
        buf.write(_header_lines({"version": __version__, "config_hash": doc["config_hash"]}))
        buf.write("estimator,n,estimate,suffix_min,suffix_max\n")
        for entry in doc["results"]:
            for i, v in enumerate(entry["trace"]):
                buf.write(f"{entry['estimator']},{i + 1},{v!r},{entry['suffix_min'][i]!r},"
                          f"{entry['suffix_max'][i]!r}\n")
        text = buf.getvalue()
    else:
        text = dumps_report(doc)
    _emit(text, opts["out"])
    for entry in doc["results"]:
        if "error" in entry:
            print(f"estimation failed: {entry['error']['message']}", file=sys.stderr)
    return EXIT_ESTIMATION if failed else EXIT_OK


def reproduce_tables(values: list[float]) -> dict[str, list[tuple[int, float]]]:
    """Each estimator on the first ``n = 5, 10, ..., 100`` fixture values."""
    known = {"theta": 0.5, "mu": -3.0, "sigma": 1.0, "x0": 3.0}
    sample = ObservationSample(0.5, values)
    out = {}
    for kind in TABLE_ORDER:
        trace = running_trace(sample, kind, _context(known, kind))
        out[kind] = [(n, trace.at(n)) for n in TABLE_SIZES if n <= len(sample)]
    return out


def format_tables(tables, reference=None) -> str:
    lines = []
    for kind in TABLE_ORDER:
        lines.append(f"Estimator of the {TABLE_TITLES[kind]} (theta=0.5, sigma=1, mu=-3, x0=3, t=0.5)")
        lines.append(f"{'n':>5}  {'estimate':>14}" + (f"  {'reference':>14}  {'abs err':>9}" if reference else ""))
        for n, v in tables[kind]:
            row = f"{n:>5}  {v:>14.9f}"
            if reference:
                ref = reference[kind][n]
                row += f"  {ref:>14.9f}  {abs(v - ref):>9.1e}"
            lines.append(row)
        lines.append("")
    return "\n".join(lines)


def cmd_reproduce_tables(opts) -> int:
    fixture = opts["fixture"]
    try:
        values = load_fixture(fixture)
    except OSError as exc:
        print(f"error: fixture unavailable: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: corrupt fixture: {exc}", file=sys.stderr)
        return EXIT_IO
    tables = reproduce_tables(values)
    reference = load_reference_estimates()
    sys.stdout.write(format_tables(tables, reference))
    if opts["out"] is not None:
        meta = {"fixture": str(fixture or "bundled:observations_t05.csv"), "sizes": list(TABLE_SIZES)}
        if (opts["format"] or "csv") == "json":
            results = [{"estimator": k, "n": n, "value": v, "reference": reference[k][n]}
                       for k in TABLE_ORDER for n, v in tables[k]]
            text = dumps_report({"kind": "tables", "version": __version__,
                                 "config_hash": config_hash(meta), "config": meta,
                                 "results": results})
        else:
            buf = io.StringIO()
            buf.write(_header_lines({"version": __version__, "config_hash": config_hash(meta)}))
            buf.write("estimator,n,value,reference,abs_error\n")
            for k in TABLE_ORDER:
                for n, v in tables[k]:
                    ref = reference[k][n]
                    buf.write(f"{k},{n},{v:.9f},{ref!r},{abs(v - ref):.3e}\n")
            text = buf.getvalue()
        _emit(text, opts["out"])
    return EXIT_OK


def cmd_experiment(opts) -> int:
    try:
        kinds = (opts["estimator"],) if opts["estimator"] else TABLE_ORDER
        cfg = ExperimentConfig(
            params=_params(opts), t=float(opts["t"]), sample_sizes=_int_list(opts["sizes"]),
            replications=int(opts["replications"]), driver=_driver(opts),
            truncation=int(opts["truncation"]), estimators=kinds, sampler=opts["sampler"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = run_consistency(cfg, workers=int(opts["workers"]))
    _emit(dumps_report(report.to_dict()), opts["out"])
    return EXIT_OK


def cmd_moments(opts) -> int:
    n = int(opts["n"])
    if n < 2:
        raise UsageError("--n must be >= 2")
    report = run_moment_check(_params(opts), float(opts["t"]), n, _driver(opts),
                              opts["sampler"], int(opts["truncation"]))
    _emit(dumps_report(report.to_dict()), opts["out"])
    return EXIT_OK


def cmd_covariance(opts) -> int:
    s, t = float(opts["s"]), float(opts["t"])
    if not 0 < s <= t:
        raise UsageError("need 0 < --s <= --t")
    report = run_covariance_check(_params(opts), s, t, int(opts["n"]), _driver(opts))
    _emit(dumps_report(report.to_dict()), opts["out"])
    return EXIT_OK


def cmd_equidist(opts) -> int:
    if opts["target"] not in ("uniform", "gaussian"):
        raise UsageError("--target must be uniform or gaussian")
    report = run_equidistribution_check(_driver(opts), int(opts["n"]), int(opts["bins"]), opts["target"])
    _emit(dumps_report(report.to_dict()), opts["out"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theta", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--sigma", type=float)
    common.add_argument("--x0", type=float)
    common.add_argument("--t", type=float, help="observation time")
    common.add_argument("--n", type=int, help="number of observations / paths")
    common.add_argument("--seed", type=int, help="PRNG seed (default %d)" % DEFAULT_SEED)
    common.add_argument("--weyl-stream", dest="weyl_stream", type=int,
                        help="use the Weyl sequence of the k-th prime instead of the PRNG")
    common.add_argument("--truncation", type=int, help="Fourier terms (default 800)")
    common.add_argument("--sampler", choices=("exact", "fourier"))
    common.add_argument("--estimator", choices=("x0", "mu", "theta", "sigma2"))
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--config", metavar="PATH", help="JSON file of option defaults")

    parser = argparse.ArgumentParser(prog="ouest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ouest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="sample observations or paths")
    sim.add_argument("--grid", help="comma-separated times; switches to path output")
    sim.add_argument("--paths", type=int, help="number of paths with --grid")

    est = sub.add_parser("estimate", parents=[common], help="estimate from a k,z CSV")
    est.add_argument("input", help="observation CSV with header k,z")

    rep = sub.add_parser("reproduce-tables", parents=[common], help="estimates on the bundled fixture")
    rep.add_argument("--fixture", metavar="PATH", help="alternative k,z fixture")

    exp = sub.add_parser("experiment", parents=[common], help="replicated consistency study")
    exp.add_argument("--sizes", help="comma-separated sample sizes")
    exp.add_argument("--replications", type=int)
    exp.add_argument("--workers", type=int)

    sub.add_parser("moments", parents=[common], help="sample moments vs closed form")

    cov = sub.add_parser("covariance", parents=[common], help="two-time covariance vs closed form")
    cov.add_argument("--s", type=float, help="earlier time")

    eq = sub.add_parser("equidist", parents=[common], help="bin-count diagnostic of a driver")
    eq.add_argument("--bins", type=int)
    eq.add_argument("--target", choices=("uniform", "gaussian"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        opts = _resolve(args)
        if args.command == "simulate":
            return cmd_simulate(opts)
        if args.command == "estimate":
            return cmd_estimate(opts, args.input)
        if args.command == "reproduce-tables":
            return cmd_reproduce_tables(opts)
        if args.command == "experiment":
            return cmd_experiment(opts)
        if args.command == "moments":
            return cmd_moments(opts)
        if args.command == "covariance":
            return cmd_covariance(opts)
        return cmd_equidist(opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
