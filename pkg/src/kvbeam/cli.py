"""Command-line front end: ``kvbeam <command> [options]``.

Commands write CSV files, a deterministic ``report.txt`` and a
``manifest.json`` (arguments, config hash, versions, timings, output hashes)
into ``--out``.

Exit codes: 0 success, 1 internal or I/O error, 2 configuration error,
3 refusal because a stability hypothesis fails (override with ``--force``),
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from ._csv import write_table
from .config import default_config_path, parse_config
from .crosscheck import crosscheck
from .errors import (
    AssemblyError,
    ConfigurationError,
    InsufficientDataError,
    KVBeamError,
    NumericalError,
    UnsupportedInputError,
)
from .exact import blowup_slope, optimality_sequence, write_optimality_csv
from .experiments import (
    RUN_DEFAULTS,
    decay_run,
    evidence_bundle,
    rising_bands,
)
from .fem import assemble
from .model import MotionKind, TransmissionConfig, hypothesis_report, validate
from .rates import decay_report, write_verdict_csv
from .spectral import (
    _threads,
    abscissa_below,
    band_max_real,
    growth_exponent,
    log_grid,
    peak_grid,
    resolved_frequency,
    scan,
    spectrum,
    sup_envelope,
    write_scan_csv,
    write_spectrum_csv,
)
from .timeloop import write_trace_csv

__all__ = ["main", "build_parser", "HypothesisRefusal", "EXIT_OK", "EXIT_INTERNAL", "EXIT_CONFIG", "EXIT_REFUSED", "EXIT_NUMERICAL"]

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_REFUSED = 3
EXIT_NUMERICAL = 4

from . import __version__ as VERSION


class HypothesisRefusal(KVBeamError):
    """A stability experiment was requested on a configuration violating its hypotheses."""


class _Run:
    """Collects outputs, report lines and timings for one command."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out)
        self.report: list[str] = []
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        self.configs: dict[str, TransmissionConfig] = {}

    @contextmanager
    def timed(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def line(self, text: str = "") -> None:
        self.report.append(text)


# ----------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _kind(text: str) -> MotionKind:
    try:
        return MotionKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="configuration file (default: shipped default)")
    common.add_argument("--out", default="kvbeam-out", help="output directory (created if missing)")
    common.add_argument("--force", action="store_true", help="run even if stability hypotheses fail")

    parser = argparse.ArgumentParser(prog="kvbeam", description="Transmission bar/beam with local Kelvin-Voigt damping.")
    parser.add_argument("--version", action="version", version=f"kvbeam {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="energy trace of a free decay run")
    p.add_argument("--kind", type=_kind, default=MotionKind.TRANSVERSAL)
    p.add_argument("--n", type=int, default=None, help="number of elements")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--T", type=float, default=None, help="final time")
    p.add_argument("--damping-scale", type=float, default=1.0, help="multiply the damping (0 = conservative)")

    p = sub.add_parser("scan", parents=[common], help="resolvent norm along the imaginary axis")
    p.add_argument("--kind", type=_kind, default=MotionKind.LONGITUDINAL)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--lambda-min", type=float, default=10.0)
    p.add_argument("--lambda-max", type=float, default=1e3)
    p.add_argument("--per-decade", type=int, default=64)
    p.add_argument("--peaks", action=argparse.BooleanOptionalAction, default=None,
                   help="add eigenfrequencies to the grid (default: on for longitudinal)")
    p.add_argument("--method", choices=("auto", "dense", "sparse"), default="auto")
    p.add_argument("--no-jitter", action="store_true", help="do not retry singular points off the eigenvalue")

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues of the discrete generator")
    p.add_argument("--kind", type=_kind, default=MotionKind.TRANSVERSAL)
    p.add_argument("--n", type=_int_list, default=[128, 256, 512], help="comma-separated element counts")
    p.add_argument("--bands", type=int, default=4, help="number of log bands in [1e2, 1e3]")

    p = sub.add_parser("optimality", parents=[common], help="exact lower bounds along the optimality sequence")
    p.add_argument("--n-min", type=int, default=10)
    p.add_argument("--n-max", type=int, default=10000)
    p.add_argument("--count", type=int, default=64, help="number of log-spaced indices")
    p.add_argument("--eps", type=float, default=0.5)

    p = sub.add_parser("crosscheck", parents=[common], help="finite elements against the exact resolvent")
    p.add_argument("--kind", type=_kind, default=MotionKind.LONGITUDINAL)
    p.add_argument("--lambda", dest="lams", type=_float_list, default=[5.3, 17.9, 37.3])
    p.add_argument("--n", type=_int_list, default=[128, 256, 512])

    p = sub.add_parser("report", parents=[common], help="consolidated stability verdicts")
    p.add_argument("--kind", type=_kind, default=None, help="one kind (default: both)")
    p.add_argument("--n", type=_int_list, default=[128, 256, 512])
    p.add_argument("--no-time-domain", action="store_true", help="skip the simulation evidence")
    return parser


# ----------------------------------------------------------------------------
# helpers


def _load(run: _Run, kind: MotionKind | None, stability: bool) -> TransmissionConfig:
    """Parse the config for ``kind``, print the hypothesis report, and refuse if needed."""
    cfg = parse_config(run.args.config, kind)
    text = hypothesis_report(cfg, kind)
    print(text, end="")
    run.configs[kind.value if kind else "base"] = cfg
    if stability and kind is not None:
        rep = validate(cfg, kind)
        if not rep.stability_eligible:
            failed = ", ".join(c.name for c in rep.failures) or "hypotheses"
            if run.args.force:
                print(f"warning: {failed} failed; continuing because of --force", file=sys.stderr)
                run.line(f"forced: {failed} failed")
            else:
                raise HypothesisRefusal(f"{kind.value}: {failed} failed; rerun with --force to explore anyway")
    return cfg


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigurationError(msg)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ----------------------------------------------------------------------------
# commands


def _cmd_simulate(run: _Run) -> int:
    a = run.args
    kind = a.kind
    cfg = _load(run, kind, stability=True)
    d = RUN_DEFAULTS[kind]
    n = d["n_elems"] if a.n is None else a.n
    dt = d["dt"] if a.dt is None else a.dt
    T = d["T"] if a.T is None else a.T
    _require(n >= 2, "--n must be at least 2")
    _require(dt > 0 and T > 0, "--dt and --T must be positive")
    _require(a.damping_scale >= 0, "--damping-scale must be nonnegative")
    with run.timed("simulate"):
        res = decay_run(cfg, kind, n, dt, T, a.damping_scale)
    write_trace_csv(res.trace, run.path("trace.csv"))
    header = ["kind", "model", "rate", "semigroup_rate", "amplitude", "r_squared", "window_lo", "window_hi",
              "n_points", "curvature", "dissipation_residual"]
    f = res.fit
    if f is None:
        row = [kind.value, "none", math.nan, math.nan, math.nan, math.nan, res.window[0], res.window[1],
               len(res.trace), math.nan, res.residual]
    else:
        row = [kind.value, f.model, f.rate, f.semigroup_rate, f.amplitude, f.r_squared, f.window[0], f.window[1],
               f.n_points, f.curvature, res.residual]
    write_table(run.path("fit.csv"), header, [row])
    run.line(f"command=simulate kind={kind.value} n_elems={n} dt={_fmt(dt)} T={_fmt(T)} damping_scale={_fmt(a.damping_scale)}")
    run.line(f"dissipation_residual={_fmt(res.residual)}")
    e = res.trace.energy
    run.line(f"energy_initial={_fmt(e[0])} energy_final={_fmt(e[-1])} max_relative_drift={_fmt(float(np.max(np.abs(e - e[0])) / e[0]))}")
    if f is not None:
        run.line(f"fit model={f.model} rate={_fmt(f.rate)} r_squared={_fmt(f.r_squared)} window=[{_fmt(f.window[0])}, {_fmt(f.window[1])}]")
        if f.model == "exponential":
            run.line(f"semigroup_rate={_fmt(f.semigroup_rate)}")
    if res.fit_error:
        run.line(f"fit unavailable: {res.fit_error}")
        raise InsufficientDataError(f"energy fit failed: {res.fit_error}")
    return EXIT_OK


def _cmd_scan(run: _Run) -> int:
    a = run.args
    kind = a.kind
    cfg = _load(run, kind, stability=True)
    _require(a.n >= 2, "--n must be at least 2")
    _require(0 < a.lambda_min < a.lambda_max, "need 0 < --lambda-min < --lambda-max")
    _require(a.per_decade >= 1, "--per-decade must be positive")
    peaks = (kind is MotionKind.LONGITUDINAL) if a.peaks is None else a.peaks
    with run.timed("assemble"):
        pencil = assemble(cfg, kind, a.n)
    with run.timed("grid"):
        grid = peak_grid(pencil, a.lambda_min, a.lambda_max, a.per_decade) if peaks else log_grid(a.lambda_min, a.lambda_max, a.per_decade)
    with run.timed("scan"):
        sc = scan(pencil, grid, method=a.method, jitter=0.0 if a.no_jitter else 1e-6)
    env = sup_envelope(sc)
    write_scan_csv(sc, run.path("scan.csv"))
    write_scan_csv(env, run.path("envelope.csv"))
    _, nrm = sc.valid()
    run.line(f"command=scan kind={kind.value} n_elems={a.n} points={len(sc)} peaks={'yes' if peaks else 'no'} method={a.method}")
    run.line(f"flags ok={sc.flags.count('ok')} jittered={sc.flags.count('jittered')} singular={sc.flags.count('singular')}")
    if nrm.size:
        run.line(f"max_norm={_fmt(float(nrm.max()))}")
    try:
        g = growth_exponent(env)
        r = growth_exponent(sc)
        run.line(f"growth_exponent_envelope={_fmt(g.slope)} ci=[{_fmt(g.low)}, {_fmt(g.high)}]")
        run.line(f"growth_exponent_raw={_fmt(r.slope)}")
    except InsufficientDataError as exc:
        run.line(f"growth_exponent=unavailable ({exc})")
    if "singular" in sc.flags:
        raise NumericalError(f"{sc.flags.count('singular')} grid points hit the spectrum")
    return EXIT_OK


def _cmd_spectrum(run: _Run) -> int:
    a = run.args
    kind = a.kind
    cfg = _load(run, kind, stability=True)
    _require(all(n >= 2 for n in a.n), "--n entries must be at least 2")
    _require(a.bands >= 1, "--bands must be positive")
    bands = rising_bands(count=a.bands)
    run.line(f"command=spectrum kind={kind.value} meshes={','.join(map(str, a.n))}")
    band_rows = []
    for n in a.n:
        with run.timed(f"spectrum_n{n}"):
            pencil = assemble(cfg, kind, n)
            res = spectrum(pencil)
            reals = band_max_real(res, bands)
        write_spectrum_csv(res, run.path(f"spectrum_n{n}.csv"))
        cut = resolved_frequency(cfg, pencil)
        run.line(
            f"n_elems={n} n_dofs={pencil.n} abscissa={_fmt(res.abscissa)} "
            f"resolved_cutoff={_fmt(cut)} resolved_abscissa={_fmt(abscissa_below(res, cut))}"
        )
        for (lo, hi), r in zip(bands, reals):
            band_rows.append((n, lo, hi, r))
            run.line(f"  band [{_fmt(lo)}, {_fmt(hi)}] max_re={_fmt(r)}")
    write_table(run.path("bands.csv"), ["n_elems", "band_lo", "band_hi", "max_re"], band_rows)
    return EXIT_OK


def _cmd_optimality(run: _Run) -> int:
    a = run.args
    cfg = _load(run, MotionKind.LONGITUDINAL, stability=False)
    _require(1 <= a.n_min < a.n_max, "need 1 <= --n-min < --n-max")
    _require(a.count >= 2, "--count must be at least 2")
    _require(0 < a.eps <= 0.5, "--eps must lie in (0, 1/2]")
    ns = np.unique(np.round(np.geomspace(a.n_min, a.n_max, a.count)).astype(int))
    with run.timed("optimality"):
        pts = optimality_sequence(cfg, ns, a.eps)
        slope = blowup_slope(pts)
    write_optimality_csv(pts, run.path("optimality.csv"))
    tail = [abs(p.coth_value - 1.0) for p in pts if p.n >= 100]
    run.line(f"command=optimality n_min={a.n_min} n_max={a.n_max} points={len(pts)} epsilon={_fmt(a.eps)}")
    run.line(f"blowup_slope={_fmt(slope)}")
    if tail:
        run.line(f"max_abs_coth_minus_1_n_ge_100={_fmt(max(tail))}")
    return EXIT_OK


def _cmd_crosscheck(run: _Run) -> int:
    a = run.args
    kind = a.kind
    cfg = _load(run, kind, stability=False)
    _require(len(a.n) >= 2 and all(n >= 2 for n in a.n), "--n needs at least two element counts >= 2")
    _require(all(lam > 0 for lam in a.lams), "--lambda values must be positive")
    rows = []
    run.line(f"command=crosscheck kind={kind.value} meshes={','.join(map(str, a.n))}")
    for lam in a.lams:
        with run.timed(f"crosscheck_{lam:g}"):
            res = crosscheck(cfg, kind, lam, a.n)
        orders = (math.nan,) + res.orders
        for r, o in zip(res.rows, orders):
            rows.append((kind.value, lam, r.n_elems, r.n_dofs, r.discrepancy, r.exact_norm, o))
        run.line(
            f"lambda={_fmt(lam)} discrepancies={','.join(_fmt(r.discrepancy) for r in res.rows)} "
            f"pairwise_orders={','.join(_fmt(o) for o in res.orders)} observed_order={_fmt(res.observed_order)}"
        )
    write_table(
        run.path("crosscheck.csv"),
        ["kind", "lambda", "n_elems", "n_dofs", "discrepancy", "exact_norm", "pairwise_order"],
        rows,
    )
    return EXIT_OK


def _cmd_report(run: _Run) -> int:
    a = run.args
    kinds = [a.kind] if a.kind is not None else [MotionKind.TRANSVERSAL, MotionKind.LONGITUDINAL]
    _require(len(a.n) >= 2 and all(n >= 2 for n in a.n), "--n needs at least two element counts >= 2")
    verdicts = []
    for kind in kinds:
        cfg = _load(run, kind, stability=True)
        with run.timed(f"evidence_{kind.value}"):
            bundle = evidence_bundle(cfg, kind, a.n, time_domain=not a.no_time_domain)
        v = decay_report(cfg, bundle)
        verdicts.append(v)
        run.line(v.as_text().rstrip("\n"))
    write_verdict_csv(verdicts, run.path("verdicts.csv"))
    return EXIT_OK


COMMANDS: dict[str, Callable[[_Run], int]] = {
    "simulate": _cmd_simulate,
    "scan": _cmd_scan,
    "spectrum": _cmd_spectrum,
    "optimality": _cmd_optimality,
    "crosscheck": _cmd_crosscheck,
    "report": _cmd_report,
}


# ----------------------------------------------------------------------------
# emission


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_source(args) -> Path:
    return default_config_path() if args.config is None else Path(args.config)


def _emit(run: _Run, status: int) -> None:
    report_path = run.path("report.txt")
    report_path.write_text("\n".join(run.report) + "\n", encoding="utf-8")
    src = _config_source(run.args)
    manifest = {
        "argv": run.argv,
        "command": run.args.command,
        "config_path": str(src),
        "config_sha256": _sha256(src) if src.is_file() else None,
        "config_text": src.read_text(encoding="utf-8") if src.is_file() else None,
        "exit_code": status,
        "outputs": {name: _sha256(run.out / name) for name in run.outputs},
        "seeds": "none",
        "threads": _threads(),
        "timings_seconds": run.timings,
        "versions": {
            "kvbeam": VERSION,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "scipy": scipy.__version__,
        },
    }
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    run = _Run(args, argv)
    try:
        run.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {run.out}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    status = EXIT_INTERNAL
    try:
        with run.timed("total"):
            status = COMMANDS[args.command](run)
    except (ConfigurationError, UnsupportedInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (NumericalError, AssemblyError, InsufficientDataError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    try:
        _emit(run, status)
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    for line in run.report:
        print(line)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
