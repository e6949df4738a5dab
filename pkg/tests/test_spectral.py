"""Resolvent norms, spectra and growth fits."""

from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_pencil
from kvbeam.errors import InsufficientDataError, SingularityError
from kvbeam.exact import exact_resolvent_norm, optimality_frequency
from kvbeam.fem import assemble
from kvbeam.model import MotionKind
from kvbeam.spectral import (
    DENSE_LIMIT,
    ResolventScan,
    _threads,
    abscissa_below,
    band_max_real,
    conjugation_mismatch,
    congruent_generator,
    growth_exponent,
    log_grid,
    peak_grid,
    resolved_frequency,
    resolvent_norm,
    scan,
    spectral_abscissa_trend,
    spectrum,
    sup_envelope,
    write_scan_csv,
    write_spectrum_csv,
)


@pytest.fixture(scope="module")
def oscillator():
    return small_pencil([1.0], [1.0])


@pytest.fixture(scope="module")
def long_128(default_config):
    return assemble(default_config, MotionKind.LONGITUDINAL, 128)


class TestResolventNorm:
    def test_eigenvalue_hit(self, oscillator):
        with pytest.raises(SingularityError) as info:
            resolvent_norm(oscillator, 1.0)
        assert info.value.eigenvalue == pytest.approx(1j)

    def test_origin(self, oscillator):
        assert resolvent_norm(oscillator, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_oscillator_closed_form(self, oscillator):
        # skew generator with eigenvalues +-i: norm = 1 / min |lam -+ 1|
        assert resolvent_norm(oscillator, 3.0) == pytest.approx(0.5, rel=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 400.0))
    def test_even_in_lambda(self, long_pencil_64, lam):
        a = resolvent_norm(long_pencil_64, lam)
        b = resolvent_norm(long_pencil_64, -lam)
        assert a == pytest.approx(b, rel=1e-10)

    @pytest.mark.parametrize("lam", [0.5, 7.3, 41.0, 180.0])
    def test_dense_and_sparse_agree(self, long_pencil_64, trans_pencil_32, lam):
        for p in (long_pencil_64, trans_pencil_32):
            d = resolvent_norm(p, lam, "dense")
            s = resolvent_norm(p, lam, "sparse")
            assert s == pytest.approx(d, rel=1e-7)

    def test_unknown_method(self, oscillator):
        with pytest.raises(ValueError):
            resolvent_norm(oscillator, 0.0, "magic")

    @pytest.mark.parametrize("kind", list(MotionKind))
    def test_nearest_eigenvalue_lower_bound(self, default_config, kind):
        p = assemble(default_config, kind, 24)
        ev = spectrum(p).eigenvalues
        for lam in np.geomspace(0.3, 300.0, 17):
            dist = np.min(np.abs(1j * lam - ev))
            assert resolvent_norm(p, lam) >= (1.0 - 1e-8) / dist

    def test_auto_switches_at_dense_limit(self):
        assert 100 < DENSE_LIMIT < 5000


class TestScan:
    def test_empty_grid(self, oscillator):
        sc = scan(oscillator, [])
        assert len(sc) == 0 and sc.points == []

    def test_unsorted_grid(self, oscillator):
        with pytest.raises(ValueError):
            scan(oscillator, [2.0, 1.0])

    def test_flags(self, oscillator):
        sc = scan(oscillator, [0.5, 1.0, 2.0])
        assert sc.flags == ["ok", "jittered", "ok"]
        assert np.all(np.isfinite(sc.norms))
        hard = scan(oscillator, [0.5, 1.0, 2.0], jitter=0.0)
        assert hard.flags[1] == "singular" and math.isnan(hard.norms[1])
        lam, nrm = hard.valid()
        assert lam.tolist() == [0.5, 2.0]

    def test_transversal_bounded(self, trans_pencil_32):
        sc = scan(trans_pencil_32, log_grid(1.0, 1e3, 16))
        lam, nrm = sc.valid()
        assert lam.size == len(sc)
        assert np.all(np.isfinite(nrm)) and nrm.max() < 10.0

    def test_longitudinal_grows(self, long_128):
        env = sup_envelope(scan(long_128, peak_grid(long_128, 10.0, 200.0, 16)))
        lam, nrm = env.valid()
        assert nrm[-1] > 2.0 * nrm[0]

    def test_threads_do_not_change_results(self, long_pencil_64):
        grid = log_grid(1.0, 100.0, 8)
        a = scan(long_pencil_64, grid, threads=1)
        b = scan(long_pencil_64, grid, threads=3)
        assert np.array_equal(a.norms, b.norms)

    def test_thread_cap_from_environment(self, monkeypatch):
        monkeypatch.setenv("KVBEAM_THREADS", "2")
        assert _threads() == 2
        monkeypatch.setenv("KVBEAM_THREADS", "nonsense")
        assert _threads() >= 1

    def test_log_grid(self):
        g = log_grid(10.0, 1000.0, 64)
        assert g[0] == pytest.approx(10.0) and g[-1] == pytest.approx(1000.0)
        assert g.size == 129

    def test_peak_grid_contains_eigenfrequencies(self, long_128):
        ev = spectrum(long_128).eigenvalues
        g = peak_grid(long_128, 10.0, 100.0, 8)
        im = ev.imag[(ev.imag >= 10.0) & (ev.imag <= 100.0)]
        assert all(np.isclose(g, x, rtol=1e-8).any() for x in im)
        assert np.all(np.diff(g) > 0)

    def test_envelope_is_running_max(self):
        sc = ResolventScan(np.arange(1.0, 6.0), np.array([1.0, 3.0, 2.0, 5.0, 4.0]), ["ok"] * 5, {})
        assert sup_envelope(sc).norms.tolist() == [1.0, 3.0, 3.0, 5.0, 5.0]


class TestSpectrum:
    def test_single_dof(self):
        ev = spectrum(small_pencil([1 / 3], [4.0])).eigenvalues
        assert np.allclose(sorted(ev.imag), [-2 * math.sqrt(3), 2 * math.sqrt(3)])
        assert np.allclose(ev.real, 0.0, atol=1e-12)

    @pytest.mark.parametrize("kind", list(MotionKind))
    def test_dissipative(self, default_config, kind):
        res = spectrum(assemble(default_config, kind, 32))
        assert res.abscissa <= 1e-8
        assert conjugation_mismatch(res.eigenvalues) <= 1e-8

    @pytest.mark.parametrize("kind", list(MotionKind))
    def test_undamped_on_axis(self, default_config, kind):
        res = spectrum(assemble(default_config, kind, 32).undamped())
        assert np.max(np.abs(res.eigenvalues.real)) <= 1e-8
        assert res.abscissa == pytest.approx(0.0, abs=1e-8)

    def test_generator_is_congruent(self, long_pencil_64):
        A = congruent_generator(long_pencil_64)
        res = spectrum(long_pencil_64)
        assert A.shape == (2 * long_pencil_64.n,) * 2
        assert len(res.eigenvalues) == A.shape[0]

    def test_band_max_real(self):
        from kvbeam.spectral import SpectrumResult

        res = SpectrumResult(np.array([-1 + 5j, -0.5 + 50j, -2 + 60j]), -0.5, {})
        assert band_max_real(res, [(0, 10), (40, 70), (100, 200)])[:2] == [-1.0, -0.5]
        assert math.isnan(band_max_real(res, [(100, 200)])[0])
        assert abscissa_below(res, 10.0) == -1.0
        with pytest.raises(InsufficientDataError):
            abscissa_below(res, 1.0)


class TestAbscissaTrend:
    def test_single_mesh_rejected(self, long_pencil_64):
        with pytest.raises(InsufficientDataError):
            spectral_abscissa_trend([long_pencil_64])

    def test_transversal_resolved_band_stable(self, default_config):
        pencils = [assemble(default_config, "transversal", n) for n in (16, 32, 64)]
        cut = [resolved_frequency(default_config, p) for p in pencils]
        tr = spectral_abscissa_trend(pencils, cut)
        assert max(tr.abscissae) < 0
        assert tr.relative_spread < 0.3
        assert len(tr.full_abscissae) == 3

    def test_longitudinal_abscissa_tends_to_zero(self, default_config):
        # consecutive coarse meshes can tie (64 vs 128); doubling twice cannot
        pencils = [assemble(default_config, "longitudinal", n) for n in (32, 64, 256)]
        tr = spectral_abscissa_trend(pencils)
        assert tr.monotone
        assert max(tr.abscissae) < 0
        assert abs(tr.abscissae[-1]) < 0.01 * abs(tr.abscissae[0])

    def test_resolved_frequency(self, default_config, long_128, trans_pencil_32):
        h = long_128.mesh.sizes.max()
        assert resolved_frequency(default_config, long_128) == pytest.approx(math.pi / (4 * h))
        h = trans_pencil_32.mesh.sizes.max()
        assert resolved_frequency(default_config, trans_pencil_32) == pytest.approx((math.pi / (4 * h)) ** 2)


class TestGrowthExponent:
    @pytest.fixture
    def lams(self):
        return np.geomspace(10.0, 1000.0, 40)

    def test_square_root(self, lams):
        g = growth_exponent(list(zip(lams, 3 * np.sqrt(lams))))
        assert g.slope == pytest.approx(0.5, abs=1e-6)
        assert g.low <= 0.5 <= g.high

    def test_constant(self, lams):
        assert growth_exponent(list(zip(lams, np.full_like(lams, 7.0)))).slope == pytest.approx(0.0, abs=1e-12)

    def test_window_and_minimum(self, lams):
        pts = list(zip(lams, lams))
        with pytest.raises(InsufficientDataError):
            growth_exponent(pts, window=(10.0, 12.0))
        g = growth_exponent(pts, window=(20.0, 500.0))
        assert g.window == (20.0, 500.0)

    def test_single_frequency(self):
        with pytest.raises(InsufficientDataError):
            growth_exponent([(5.0, 1.0)] * 10)

    def test_exact_oracle_scan(self, default_config):
        pts = []
        for n in (1, 2, 3, 4, 6, 8, 11, 16, 23, 32):
            lam = optimality_frequency(default_config, n)
            pts.append((lam, exact_resolvent_norm(default_config, "longitudinal", lam)))
        assert growth_exponent(pts).slope == pytest.approx(0.5, abs=0.05)


class TestCsv:
    def test_scan_schema(self, tmp_path, oscillator):
        path = tmp_path / "scan.csv"
        write_scan_csv(scan(oscillator, [0.5, 1.0], jitter=0.0), path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["lambda", "norm", "flag"]
        assert rows[1][2] == "ok" and rows[2][2] == "singular"

    def test_spectrum_schema(self, tmp_path):
        path = tmp_path / "spectrum.csv"
        write_spectrum_csv(spectrum(small_pencil([1 / 3], [4.0])), path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["re", "im"] and len(rows) == 3
        assert abs(float(rows[2][1])) == pytest.approx(2 * math.sqrt(3), rel=1e-15)
