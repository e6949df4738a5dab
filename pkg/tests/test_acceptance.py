"""Acceptance criteria at full desk scale.

Each test prints one ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary) with the measured quantities, then asserts.  Tolerances are
the contract values; nothing here is relaxed.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from kvbeam.crosscheck import crosscheck, default_forcing
from kvbeam.exact import (
    ExpPoly,
    Forcing,
    ForcingPiece,
    beam_layer,
    blowup_slope,
    exact_resolvent,
    optimality_sequence,
    wave_layer,
)
from kvbeam.experiments import (
    RUN_DEFAULTS,
    band_study,
    boundedness_study,
    decay_run,
    growth_study,
    matched_points,
    resolved_abscissa_trend,
    rising_bands,
)
from kvbeam.fem import assemble
from kvbeam.model import CoefficientProfile, MotionKind, TransmissionConfig, validate
from kvbeam.spectral import conjugation_mismatch, spectrum
from kvbeam.timeloop import default_initial_state, dissipation_residual, simulate

pytestmark = pytest.mark.slow

MESHES = (128, 256, 512)


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


@pytest.fixture(scope="module")
def config() -> TransmissionConfig:
    return TransmissionConfig.default()


@pytest.fixture(scope="module")
def default_runs(config):
    """The default free-decay runs of both kinds (reused by criteria 5 and 6)."""
    runs = {}
    for kind in MotionKind:
        with Clock() as c:
            runs[kind] = decay_run(config, kind)
        runs[kind, "seconds"] = c.seconds
    return runs


def test_1_optimality_exponent(config):
    with Clock() as c:
        ns = np.unique(np.round(np.geomspace(10, 1e4, 64)).astype(int))
        pts = optimality_sequence(config, ns, 0.5)
        slope = blowup_slope(pts)
        coth_err = max(abs(p.coth_value - 1.0) for p in pts if p.n >= 100)
    ok = abs(slope - 0.5) <= 0.05 and coth_err < 1e-6 and c.seconds < 5.0
    report(1, "optimality exponent", ok,
           f"blowup_slope={slope:.5f} (0.50+-0.05), max|coth-1| for n>=100 = {coth_err:.2e} (<1e-6), "
           f"{len(pts)} points, {c.seconds:.2f}s (<5s)")
    assert ok


def test_2_resolvent_growth(config):
    with Clock() as c:
        gs = growth_study(config, 512, 10.0, 1e3)
        matched = matched_points(config)
    worst = max(m.relative_error for m in matched)
    mesh = max(m.mesh_change for m in matched)
    slope = gs.growth.slope
    ok = abs(slope - 0.5) <= 0.15 and len(matched) == 10 and worst <= 0.05 and c.seconds < 300.0
    report(2, "resolvent growth", ok,
           f"growth_exponent={slope:.4f} (0.50+-0.15; raw scan {gs.raw_growth.slope:.4f}), "
           f"max rel err vs exact at {len(matched)} matched lambda = {100 * worst:.2f}% (<=5%, "
           f"mesh change {100 * mesh:.2f}%), {c.seconds:.1f}s (<300s)")
    assert ok


def test_3_resolvent_boundedness(config):
    assert validate(config, MotionKind.TRANSVERSAL).exp_stable_eligible
    with Clock() as c:
        bs = boundedness_study(config, MESHES, 1.0, 1e3)
    ok = bs.finite and bs.spread < 0.25 and abs(bs.mesh_slope) < 0.1 and c.seconds < 600.0
    report(3, "resolvent boundedness", ok,
           "max norms " + ", ".join(f"{m:.5f}" for m in bs.maxima)
           + f" over N={MESHES}, spread {100 * bs.spread:.3f}% (<25%), trend slope {bs.mesh_slope:.2e} (|.|<0.1), "
           f"{c.seconds:.1f}s (<600s)")
    assert ok


def test_4_spectral_dichotomy(config):
    with Clock() as c:
        trend = resolved_abscissa_trend(config, MotionKind.TRANSVERSAL, MESHES)
        _, bands = band_study(config, MotionKind.LONGITUDINAL, 512, rising_bands(1e2, 1e3, 4))
    delta = [-a for a in trend.abscissae]
    rising = all(b > a for a, b in zip(bands, bands[1:])) and bands[-1] <= 0
    ok = min(delta) > 0 and trend.relative_spread < 0.3 and rising and c.seconds < 300.0
    report(4, "spectral dichotomy", ok,
           "transversal delta " + ", ".join(f"{d:.4f}" for d in delta)
           + f" (spread {100 * trend.relative_spread:.2f}% <30%; full-spectrum abscissae "
           + ", ".join(f"{a:.4g}" for a in trend.full_abscissae)
           + "), longitudinal band max Re " + ", ".join(f"{b:.4f}" for b in bands)
           + f" ({'rising to 0' if rising else 'NOT monotone'}), {c.seconds:.1f}s (<300s)")
    assert ok


def test_5_energy_identity(config, default_runs):
    residuals = {k.value: default_runs[k].residual for k in MotionKind}
    pencil = assemble(config, MotionKind.LONGITUDINAL, 128).undamped()
    trace = simulate(pencil, default_initial_state(pencil), T=100.0, dt=0.01)
    steps = len(trace) - 1
    drift = float(np.max(np.abs(trace.energy - trace.energy[0])) / trace.energy[0])
    residuals["undamped"] = dissipation_residual(trace)
    ok = max(residuals.values()) <= 1e-10 and drift <= 1e-10 and steps >= 10_000
    report(5, "energy identity", ok,
           "dissipation residuals " + ", ".join(f"{k}={v:.1e}" for k, v in residuals.items())
           + f" (<=1e-10), undamped drift {drift:.1e} over {steps} steps (<=1e-10)")
    assert ok


def test_6_time_domain_rates(config, default_runs):
    trans = default_runs[MotionKind.TRANSVERSAL]
    longi = default_runs[MotionKind.LONGITUDINAL]
    n_run = RUN_DEFAULTS[MotionKind.TRANSVERSAL]["n_elems"]
    trend = resolved_abscissa_trend(config, MotionKind.TRANSVERSAL, (n_run, 2 * n_run))
    abscissa = trend.abscissae[0]
    mu = trans.fit.semigroup_rate
    mu_err = abs(mu - (-abscissa)) / (-abscissa)
    ok_t = trans.fit.r_squared >= 0.99 and mu_err < 0.2
    ok_l = longi.fit is not None and longi.fit.rate <= -3.0
    ok = ok_t and ok_l
    slope = longi.fit.rate if longi.fit is not None else math.nan
    report(6, "time-domain rates", ok,
           f"transversal r2={trans.fit.r_squared:.5f} (>=0.99), mu={mu:.4f} vs -abscissa={-abscissa:.4f} "
           f"({100 * mu_err:.2f}% <20%); longitudinal log-log slope {slope:.3f} (<=-3) on "
           f"[{longi.window[0]:.2f}, {longi.window[1]:.2f}]; runs "
           f"{default_runs[MotionKind.TRANSVERSAL, 'seconds']:.1f}s + {default_runs[MotionKind.LONGITUDINAL, 'seconds']:.1f}s")
    assert ok


def test_7_oracle_equivalence(config):
    results = [crosscheck(config, MotionKind.LONGITUDINAL, lam, MESHES) for lam in (5.3, 17.9, 37.3)]
    orders = [r.observed_order for r in results]
    ok = min(orders) >= 1.8
    report(7, "oracle equivalence", ok,
           "; ".join(
               f"lambda={r.lam:g}: order {r.observed_order:.3f} (pairwise "
               + ", ".join(f"{o:.3f}" for o in r.orders) + ")"
               for r in results
           ) + f" over N={MESHES} (>=1.8)")
    assert ok


def _layer_invariants(rng) -> tuple[float, float]:
    worst_det, worst_comp = 0.0, 0.0
    for i in range(1000):
        build = wave_layer if i % 2 == 0 else beam_layer
        lam, mod, damp = rng.uniform(0.05, 60.0), rng.uniform(0.2, 5.0), rng.uniform(0.0, 2.0)
        l1, l2 = rng.uniform(0.01, 0.5, size=2)
        m = build(lam, mod, damp, l1).matrix
        scale = max(1.0, np.abs(m).max()) ** m.shape[0]
        worst_det = max(worst_det, abs(np.linalg.det(m) - 1.0) / scale)
        whole = build(lam, mod, damp, l1 + l2).matrix
        parts = build(lam, mod, damp, l2).matrix @ m
        worst_comp = max(worst_comp, np.abs(parts - whole).max() / max(1.0, np.abs(whole).max()))
    return worst_det, worst_comp


def _linearity(config) -> float:
    worst = 0.0
    for kind in MotionKind:
        f1 = default_forcing(config, kind)
        p = f1.pieces[0]
        f2 = Forcing((ForcingPiece(p.x0, p.x1, ExpPoly.cos(2.0), ExpPoly.sin(5.0)),))
        combo = Forcing((ForcingPiece(p.x0, p.x1, p.f * 2.0 - f2.pieces[0].f * 3.0, p.g * 2.0 - f2.pieces[0].g * 3.0),))
        a, b, ab = (exact_resolvent(config, kind, 9.0, f) for f in (f1, f2, combo))
        for x in np.linspace(0.0, config.L, 11):
            rhs = 2.0 * a.state(x) - 3.0 * b.state(x)
            worst = max(worst, np.abs(ab.state(x) - rhs).max() / max(1.0, np.abs(rhs).max()))
    return worst


def _validation_total(rng) -> int:
    specials = [math.nan, math.inf, -math.inf, 0.0, -1.0, 1e308]
    count = 0
    for _ in range(300):
        vals = [specials[rng.integers(len(specials))] if rng.random() < 0.3 else rng.normal() for _ in range(6)]
        prof = CoefficientProfile((vals[4], vals[5]), (vals[0],))
        cfg = TransmissionConfig(vals[0], vals[1], vals[2], vals[3], prof, prof, prof, prof, prof, prof)
        for kind in MotionKind:
            validate(cfg, kind)  # must return, never raise
            count += 1
    return count


def test_8_invariant_suites(config):
    rng = np.random.default_rng(20240601)
    det_err, comp_err = _layer_invariants(rng)
    conj = max(conjugation_mismatch(spectrum(assemble(config, k, 64)).eigenvalues) for k in MotionKind)
    lin = _linearity(config)
    total = _validation_total(rng)
    ok = det_err <= 1e-12 and comp_err <= 1e-11 and conj <= 1e-8 and lin <= 1e-12 and total == 600
    report(8, "invariant suites", ok,
           f"layer det=1 err {det_err:.1e}, composition err {comp_err:.1e} (1000 draws); "
           f"conjugation mismatch {conj:.1e} (<=1e-8); linearity err {lin:.1e} (<=1e-12); "
           f"validation total on {total} hostile configs")
    assert ok
