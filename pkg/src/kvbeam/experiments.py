"""Desk-scale experiments combining assembly, scans, spectra, runs and oracles.

Each function returns a small frozen record; the command-line front end and
the acceptance tests both build on these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidDataError
from .exact import exact_resolvent_norm
from .fem import AssembledPencil, assemble
from .model import MotionKind, TransmissionConfig
from .rates import EvidenceBundle, RateFit, fit_exponential, fit_power, pre_asymptotic_window
from .spectral import (
    AbscissaTrend,
    GrowthFit,
    ResolventScan,
    SpectrumResult,
    band_max_real,
    growth_exponent,
    log_grid,
    peak_grid,
    resolved_frequency,
    resolvent_norm,
    scan,
    spectral_abscissa_trend,
    spectrum,
    sup_envelope,
)
from .timeloop import EnergyTrace, _low_modes, default_initial_state, dissipation_residual, simulate

__all__ = [
    "GrowthStudy",
    "BoundednessStudy",
    "MatchedPoint",
    "DecayRun",
    "growth_study",
    "boundedness_study",
    "resolved_abscissa_trend",
    "rising_bands",
    "band_study",
    "matched_points",
    "fundamental_period",
    "decay_run",
    "evidence_bundle",
]


@dataclass(frozen=True)
class GrowthStudy:
    """Scan on a peak-augmented grid, its running-max envelope and the fit."""

    scan: ResolventScan
    envelope: ResolventScan
    growth: GrowthFit
    raw_growth: GrowthFit


@dataclass(frozen=True)
class BoundednessStudy:
    scans: tuple[ResolventScan, ...]
    maxima: tuple[float, ...]
    spread: float  # (max - min) / min over meshes
    mesh_slope: float  # d log(max norm) / d log(n_dofs)

    @property
    def finite(self) -> bool:
        return all(math.isfinite(m) for m in self.maxima)


@dataclass(frozen=True)
class MatchedPoint:
    lam: float
    fem: float
    fem_coarse: float
    exact: float

    @property
    def relative_error(self) -> float:
        return abs(self.fem - self.exact) / self.exact

    @property
    def mesh_change(self) -> float:
        return abs(self.fem - self.fem_coarse) / self.fem


@dataclass(frozen=True)
class DecayRun:
    trace: EnergyTrace
    residual: float
    fit: RateFit | None  # None for undamped runs or when the fit failed
    window: tuple[float, float]
    fit_error: str | None = None


def growth_study(
    config: TransmissionConfig,
    n_elems: int = 512,
    lo: float = 10.0,
    hi: float = 1e3,
    per_decade: int = 64,
    method: str = "auto",
    threads: int | None = None,
) -> GrowthStudy:
    """Longitudinal resolvent growth on ``[lo, hi]``.

    The grid contains every eigenfrequency in the window, and the exponent is
    fitted to ``sup_{s <= lam} |R(i s)|``, which is what the growth bound
    ``|R(i lam)| <= C |lam|^alpha`` constrains.
    """
    pencil = assemble(config, MotionKind.LONGITUDINAL, n_elems)
    grid = peak_grid(pencil, lo, hi, per_decade)
    sc = scan(pencil, grid, method=method, threads=threads)
    env = sup_envelope(sc)
    return GrowthStudy(sc, env, growth_exponent(env), growth_exponent(sc))


def boundedness_study(
    config: TransmissionConfig,
    n_elems: Sequence[int] = (128, 256, 512),
    lo: float = 1.0,
    hi: float = 1e3,
    per_decade: int = 32,
    method: str = "auto",
    threads: int | None = None,
) -> BoundednessStudy:
    """Transversal scans on a common log grid, one per mesh."""
    if len(n_elems) < 2:
        raise ValueError("need at least two meshes")
    grid = log_grid(lo, hi, per_decade)
    scans, maxima, dofs = [], [], []
    for n in n_elems:
        pencil = assemble(config, MotionKind.TRANSVERSAL, int(n))
        sc = scan(pencil, grid, method=method, threads=threads)
        _, nrm = sc.valid()
        scans.append(sc)
        maxima.append(float(nrm.max()) if nrm.size and sc.flags.count("singular") == 0 else math.inf)
        dofs.append(pencil.n)
    m = np.array(maxima)
    if np.all(np.isfinite(m)):
        spread = float((m.max() - m.min()) / m.min())
        slope = float(np.polyfit(np.log(dofs), np.log(m), 1)[0])
    else:
        spread, slope = math.inf, math.inf
    return BoundednessStudy(tuple(scans), tuple(maxima), spread, slope)


def resolved_abscissa_trend(
    config: TransmissionConfig, kind: MotionKind | str, n_elems: Sequence[int], points_per_wavelength: float = 8.0
) -> AbscissaTrend:
    """Abscissa per mesh over the modes the mesh resolves (see ``full_abscissae`` for all)."""
    kind = MotionKind.parse(kind)
    pencils = [assemble(config, kind, int(n)) for n in n_elems]
    cut = [resolved_frequency(config, p, points_per_wavelength) for p in pencils]
    return spectral_abscissa_trend(pencils, cut)


def rising_bands(lo: float = 1e2, hi: float = 1e3, count: int = 4) -> list[tuple[float, float]]:
    """``count`` log-equal frequency bands covering ``[lo, hi]``."""
    edges = np.geomspace(lo, hi, count + 1)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def band_study(
    config: TransmissionConfig,
    kind: MotionKind | str = MotionKind.LONGITUDINAL,
    n_elems: int = 512,
    bands: Sequence[tuple[float, float]] | None = None,
) -> tuple[SpectrumResult, list[float]]:
    """Spectrum and the largest real part per band."""
    pencil = assemble(config, MotionKind.parse(kind), n_elems)
    res = spectrum(pencil)
    return res, band_max_real(res, rising_bands() if bands is None else bands)


def matched_points(
    config: TransmissionConfig,
    lams: Sequence[float] | None = None,
    n_elems: int = 1024,
    kind: MotionKind | str = MotionKind.LONGITUDINAL,
) -> list[MatchedPoint]:
    """FEM norm on ``n_elems`` and ``n_elems / 2`` against the exact norm.

    The default frequencies, ten log-spaced points in ``[10, 60]``, lie where
    piecewise-linear elements at these mesh sizes have converged.
    """
    kind = MotionKind.parse(kind)
    lams = np.geomspace(10.0, 60.0, 10) if lams is None else np.asarray(lams, float)
    fine = assemble(config, kind, n_elems)
    coarse = assemble(config, kind, n_elems // 2)
    out = []
    for lam in lams:
        out.append(
            MatchedPoint(
                float(lam),
                resolvent_norm(fine, lam),
                resolvent_norm(coarse, lam),
                exact_resolvent_norm(config, kind, lam),
            )
        )
    return out


def fundamental_period(pencil: AssembledPencil) -> float:
    """``2 pi / omega_1`` of the undamped problem."""
    vals, _ = _low_modes(pencil, 1)
    return 2.0 * math.pi / math.sqrt(float(vals[0]))


RUN_DEFAULTS = {
    MotionKind.TRANSVERSAL: {"n_elems": 256, "dt": 1e-3, "T": 20.0},
    MotionKind.LONGITUDINAL: {"n_elems": 512, "dt": 1e-2, "T": 320.0},
}


def decay_run(
    config: TransmissionConfig,
    kind: MotionKind | str,
    n_elems: int | None = None,
    dt: float | None = None,
    T: float | None = None,
    damping_scale: float = 1.0,
) -> DecayRun:
    """Simulate from the default initial state and fit the energy decay.

    Transversal runs get an exponential fit over the whole trace.
    Longitudinal runs get a power fit on the pre-asymptotic window.
    ``damping_scale = 0`` gives a conservative run without a fit.
    """
    kind = MotionKind.parse(kind)
    d = RUN_DEFAULTS[kind]
    n_elems = d["n_elems"] if n_elems is None else n_elems
    dt = d["dt"] if dt is None else dt
    T = d["T"] if T is None else T
    pencil = assemble(config, kind, n_elems)
    if damping_scale != 1.0:
        pencil = pencil.scaled_damping(damping_scale)
    trace = simulate(pencil, default_initial_state(pencil), T, dt)
    res = dissipation_residual(trace)
    if damping_scale == 0.0:
        return DecayRun(trace, res, None, (float(trace.t[0]), float(trace.t[-1])))
    full = (float(trace.t[0]), float(trace.t[-1]))
    try:
        if kind is MotionKind.TRANSVERSAL:
            fit = fit_exponential(trace)
            window = fit.window
        else:
            window = pre_asymptotic_window(trace, fundamental_period(pencil))
            fit = fit_power(trace, window)
    except (InsufficientDataError, InvalidDataError) as exc:
        # keep the trace: it is valid even when it cannot be fitted
        return DecayRun(trace, res, None, full, str(exc))
    return DecayRun(trace, res, fit, window)


def _time_domain_fit(config, kind, n_elems, notes: list[str]) -> RateFit | None:
    run = decay_run(config, kind, n_elems=n_elems)
    if run.fit_error:
        notes.append(f"time-domain fit unavailable: {run.fit_error}")
    return run.fit


def evidence_bundle(
    config: TransmissionConfig,
    kind: MotionKind | str,
    n_elems: Sequence[int] = (128, 256, 512),
    time_domain: bool = True,
) -> EvidenceBundle:
    """Frequency- and time-domain evidence for :func:`decay_report`.

    Transversal evidence uses every mesh in ``n_elems``; longitudinal evidence
    uses the finest one, since the growth window ``[10, 1e3]`` needs about 512
    linear elements to be resolved.
    """
    kind = MotionKind.parse(kind)
    n_elems = tuple(int(n) for n in n_elems)
    notes: list[str] = []
    if kind is MotionKind.TRANSVERSAL:
        bs = boundedness_study(config, n_elems)
        trend = resolved_abscissa_trend(config, kind, n_elems)
        notes.append(f"max-norm mesh trend slope {bs.mesh_slope:.4f}")
        notes.append("full-spectrum abscissae " + ", ".join(f"{x:.6g}" for x in trend.full_abscissae))
        exp_fit = _time_domain_fit(config, kind, None, notes) if time_domain else None
        return EvidenceBundle(
            kind,
            scan_max=max(bs.maxima),
            scan_max_spread=bs.spread,
            abscissa=trend,
            exponential_fit=exp_fit,
            notes=notes,
        )
    gs = growth_study(config, n_elems[-1])
    _, bands = band_study(config, kind, n_elems[-1])
    power = _time_domain_fit(config, kind, n_elems[-1], notes) if time_domain else None
    notes.append(f"raw scan growth exponent {gs.raw_growth.slope:.4f}")
    return EvidenceBundle(kind, growth=gs.growth, band_real_parts=bands, power_fit=power, notes=notes)
