"""Decay-rate estimation and stability verdicts.

Energies (quadratic quantities) are fitted directly; a semigroup rate is the
energy rate halved, since ``|e^{At}| <= C e^{-mu t}`` gives ``E(t) <~ e^{-2 mu t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._csv import write_table
from .errors import InsufficientDataError, InvalidDataError
from .model import MotionKind, TransmissionConfig
from .spectral import AbscissaTrend, GrowthFit, ResolventScan
from .timeloop import EnergyTrace

__all__ = [
    "RateFit",
    "EvidenceBundle",
    "Verdict",
    "fit_exponential",
    "fit_power",
    "curvature_statistic",
    "pre_asymptotic_window",
    "shift_sensitivity",
    "decay_report",
    "write_verdict_csv",
]

R2_EXPONENTIAL = 0.99
CURVATURE_LIMIT = 0.05
MIN_SAMPLES = 16


@dataclass(frozen=True)
class RateFit:
    """``model`` is ``"exponential"`` (rate = energy decay rate) or ``"power"`` (rate = slope)."""

    model: str
    rate: float
    amplitude: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    curvature: float = 0.0

    @property
    def semigroup_rate(self) -> float:
        """``mu`` for an exponential fit (half the energy rate)."""
        return 0.5 * self.rate if self.model == "exponential" else float("nan")

    @property
    def power_like(self) -> bool:
        return self.curvature <= CURVATURE_LIMIT


def _xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, EnergyTrace):
        return np.asarray(data.t, float), np.asarray(data.energy, float)
    if isinstance(data, ResolventScan):
        return data.valid()
    x, y = data
    return np.asarray(x, float), np.asarray(y, float)


def _select(x, y, window):
    if window is None:
        lo, hi = float(x.min()), float(x.max())
    else:
        lo, hi = map(float, window)
        if lo > hi:
            raise ValueError("window must satisfy lo <= hi")
    m = (x >= lo) & (x <= hi)
    return x[m], y[m], (lo, hi)


def _r_squared(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-24 * max(1.0, float(np.sum(y * y))) else 0.0
    return float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))


def fit_exponential(trace, window: tuple[float, float] | None = None) -> RateFit:
    """Least squares on ``log E = log A - rate * t``."""
    t, e = _xy(trace)
    t, e, win = _select(t, e, window)
    if t.size < MIN_SAMPLES:
        raise InsufficientDataError(f"{t.size} samples in window, need {MIN_SAMPLES}")
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise InvalidDataError("energies in the window must be positive and finite")
    y = np.log(e)
    c1, c0 = np.polyfit(t, y, 1)
    return RateFit("exponential", float(-c1), float(math.exp(c0)), _r_squared(y, c0 + c1 * t), win, int(t.size))


def curvature_statistic(logx: np.ndarray, logy: np.ndarray) -> float:
    """``|c2| dl^2 / (|c1| dl)`` from a quadratic fit in ``l = log x``.

    Compares the quadratic's contribution across the window with the linear
    one; zero for an exact power law.
    """
    dl = float(np.ptp(logx))
    if dl == 0:
        return 0.0
    mid = 0.5 * (logx.max() + logx.min())
    c2, c1, _ = np.polyfit(logx - mid, logy, 2)
    lin = abs(c1) * dl
    quad = abs(c2) * dl * dl
    if lin == 0:
        return 0.0 if quad <= 1e-14 else float("inf")
    return float(quad / lin)


def fit_power(data, window: tuple[float, float] | None = None) -> RateFit:
    """Slope of ``log y`` against ``log x`` with a curvature (non-power) flag."""
    x, y = _xy(data)
    x, y, win = _select(x, y, window)
    if x.size < MIN_SAMPLES:
        raise InsufficientDataError(f"{x.size} samples in window, need {MIN_SAMPLES}")
    if np.any(x <= 0):
        raise InvalidDataError("power fits need positive abscissae")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise InvalidDataError("values in the window must be positive and finite")
    lx, ly = np.log(x), np.log(y)
    c1, c0 = np.polyfit(lx, ly, 1)
    return RateFit(
        "power",
        float(c1),
        float(math.exp(c0)),
        _r_squared(ly, c0 + c1 * lx),
        win,
        int(x.size),
        curvature_statistic(lx, ly),
    )


def _local_slopes(t, e, t_start, factor):
    out = []
    a = t_start
    while a * factor <= t[-1]:
        m = (t >= a) & (t <= a * factor)
        if m.sum() >= 4:
            out.append((a, float(np.polyfit(np.log(t[m]), np.log(e[m]), 1)[0])))
        a *= factor ** 0.25
    return out


def pre_asymptotic_window(trace: EnergyTrace, period: float, n_periods: float = 5.0, tol: float = 0.05) -> tuple[float, float]:
    """``[T0, T1]`` for polynomial fits of a discretized trace.

    ``T0`` skips ``n_periods`` fundamental periods.  ``T1`` is the start of the
    first octave window whose local log-log slope agrees within ``tol`` with the
    next two (overlapping) windows: from there on the trace follows the
    late-time behaviour of the finite-dimensional system.  If no such point
    exists the window runs to the end of the trace.
    """
    t, e = np.asarray(trace.t), np.asarray(trace.energy)
    keep = (t > 0) & (e > 0)
    t, e = t[keep], e[keep]
    t0 = float(n_periods * period)
    if t.size == 0 or t0 >= t[-1]:
        raise InsufficientDataError("trace ends before the pre-asymptotic window starts")
    slopes = _local_slopes(t, e, t0, 2.0)
    for i in range(len(slopes) - 2):
        s0 = slopes[i][1]
        nxt = [s for _, s in slopes[i + 1 : i + 3]]
        if all(abs(s - s0) <= tol * abs(s0) for s in nxt) and slopes[i][0] > t0:
            return t0, float(slopes[i][0])
    return t0, float(t[-1])


def shift_sensitivity(trace: EnergyTrace, window: tuple[float, float], shift: float) -> tuple[float, float]:
    """``(slope change, bound)`` when times are shifted by ``shift``.

    Refitting ``E`` against ``t + c`` changes the log-log slope by roughly
    ``slope * c / t_min``; the bound reported is ``|slope| * |c| / t_min``.
    """
    base = fit_power(trace, window)
    tt = np.asarray(trace.t) + shift
    shifted = fit_power((tt, trace.energy), (window[0] + shift, window[1] + shift))
    bound = abs(base.rate) * abs(shift) / window[0]
    return shifted.rate - base.rate, bound


@dataclass
class EvidenceBundle:
    """Inputs to :func:`decay_report` for one motion kind."""

    kind: MotionKind
    scan_max: float | None = None  # max resolvent norm over the scan window
    scan_max_spread: float | None = None  # relative spread of the max across meshes
    growth: GrowthFit | None = None
    abscissa: AbscissaTrend | None = None
    band_real_parts: Sequence[float] | None = None  # max Re per rising band
    exponential_fit: RateFit | None = None
    power_fit: RateFit | None = None
    notes: list[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return all(
            v is None
            for v in (
                self.scan_max,
                self.growth,
                self.abscissa,
                self.band_real_parts,
                self.exponential_fit,
                self.power_fit,
            )
        )


@dataclass(frozen=True)
class Verdict:
    kind: MotionKind
    verdict: str  # "exponential", "polynomial(t^-2 semigroup)", "inconclusive"
    evidence: tuple[str, ...]

    def as_text(self) -> str:
        lines = [f"kind={self.kind.value}", f"verdict={self.verdict}"]
        lines += [f"evidence={e}" for e in self.evidence]
        return "\n".join(lines) + "\n"


def _polynomial_label(alpha: float) -> str:
    order = 1.0 / alpha if alpha > 0 else float("inf")
    rounded = round(order)
    label = f"{rounded:d}" if abs(order - rounded) < 0.15 else f"{order:.2f}"
    return f"polynomial(t^-{label} semigroup)"


def decay_report(config: TransmissionConfig | None, bundle: EvidenceBundle) -> Verdict:
    """Consolidated verdict from frequency- and time-domain evidence.

    * exponential: bounded, mesh-stable scan; negative mesh-stable abscissa;
      exponential energy fit with ``r^2 >= 0.99``.
    * polynomial: resolvent growth exponent ``alpha`` clearly positive, band
      real parts rising towards zero, and (if present) a power-law energy
      fit; the semigroup order is ``1/alpha``.
    * otherwise inconclusive.
    """
    kind = bundle.kind
    if bundle.is_empty():
        return Verdict(kind, "inconclusive", ("no evidence supplied",))
    ev: list[str] = []
    exp_votes, poly_votes, against = 0, 0, 0

    if bundle.scan_max is not None:
        finite = math.isfinite(bundle.scan_max)
        spread = bundle.scan_max_spread
        ev.append(f"scan max norm {bundle.scan_max:.6g}" + (f", spread {spread:.3g}" if spread is not None else ""))
        if finite and (spread is None or spread < 0.25):
            exp_votes += 1
    if bundle.growth is not None:
        g = bundle.growth
        ev.append(f"growth exponent {g.slope:.4f} [{g.low:.4f}, {g.high:.4f}]")
        if g.low > 0.1:
            poly_votes += 1
        elif abs(g.slope) < 0.1:
            exp_votes += 1
        else:
            against += 1
    if bundle.abscissa is not None:
        a = bundle.abscissa
        ev.append(
            "abscissae " + ", ".join(f"{x:.6g}" for x in a.abscissae) + f" (spread {a.relative_spread:.3g})"
        )
        if max(a.abscissae) < 0 and a.relative_spread < 0.3:
            exp_votes += 1
        elif max(a.abscissae) < 0 and abs(a.abscissae[-1]) < abs(a.abscissae[0]):
            poly_votes += 1
    if bundle.band_real_parts is not None:
        br = list(bundle.band_real_parts)
        rising = all(b2 > b1 for b1, b2 in zip(br, br[1:])) and br[-1] <= 0
        ev.append("band max Re " + ", ".join(f"{x:.6g}" for x in br) + (" (rising to 0)" if rising else ""))
        if rising:
            poly_votes += 1
    if bundle.exponential_fit is not None:
        f = bundle.exponential_fit
        ev.append(f"exponential fit rate {f.rate:.6g} (mu {f.semigroup_rate:.6g}), r2 {f.r_squared:.5f}")
        if f.r_squared >= R2_EXPONENTIAL and f.rate > 0:
            exp_votes += 1
        else:
            against += 1
    if bundle.power_fit is not None:
        f = bundle.power_fit
        ev.append(f"power fit slope {f.rate:.6g} on [{f.window[0]:.4g}, {f.window[1]:.4g}], curvature {f.curvature:.3g}")
        if f.rate < 0:
            poly_votes += 1
    ev.extend(bundle.notes)

    if exp_votes >= 2 and poly_votes == 0 and against == 0:
        return Verdict(kind, "exponential", tuple(ev))
    if poly_votes >= 2 and exp_votes <= 1:
        alpha = bundle.growth.slope if bundle.growth is not None else 0.5
        return Verdict(kind, _polynomial_label(alpha), tuple(ev))
    return Verdict(kind, "inconclusive", tuple(ev))


def write_verdict_csv(verdicts: Sequence[Verdict], path) -> None:
    write_table(path, ["kind", "verdict", "evidence"], ((v.kind.value, v.verdict, " | ".join(v.evidence)) for v in verdicts))
