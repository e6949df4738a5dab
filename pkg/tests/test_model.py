"""Problem definition: profiles, configurations and hypothesis validation."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from kvbeam.model import (
    CoefficientProfile,
    DomainError,
    MotionKind,
    TransmissionConfig,
    damping_profile,
    hard_failures,
    hypothesis_report,
    validate,
)

any_float = st.floats(allow_nan=True, allow_infinity=True, width=64)
finite = st.floats(-10.0, 10.0, allow_nan=False)


class TestMotionKind:
    def test_exactly_two_variants(self):
        assert {k.value for k in MotionKind} == {"longitudinal", "transversal"}

    @pytest.mark.parametrize("text", ["longitudinal", "LONGITUDINAL", " Longitudinal "])
    def test_parse_is_case_insensitive(self, text):
        assert MotionKind.parse(text) is MotionKind.LONGITUDINAL

    def test_parse_rejects_unknown(self):
        with pytest.raises(ValueError, match="unknown motion kind"):
            MotionKind.parse("torsional")


class TestCoefficientProfile:
    def test_single_layer(self):
        assert CoefficientProfile.constant(0.0, 1.0, 2.0).eval(0.5) == 2.0

    def test_right_continuous_at_breakpoint(self):
        prof = CoefficientProfile((0.0, 0.5, 1.0), (1.0, 3.0))
        assert prof.eval(0.5) == 3.0
        assert prof.left_limit(0.5) == 1.0

    def test_closed_at_right_end(self):
        prof = CoefficientProfile((0.0, 0.5, 1.0), (1.0, 3.0))
        assert prof.eval(1.0) == 3.0

    @pytest.mark.parametrize("x", [-0.1, 1.0000001, math.nan])
    def test_out_of_domain(self, x):
        with pytest.raises(DomainError):
            CoefficientProfile.constant(0.0, 1.0, 2.0).eval(x)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            CoefficientProfile((0.0, 1.0), (1.0, 2.0))

    def test_from_pieces(self):
        prof = CoefficientProfile.from_pieces(0.0, 1.0, [(0.0, 1.0), (0.25, 2.0)])
        assert prof.breakpoints == (0.0, 0.25, 1.0)
        assert prof.values == (1.0, 2.0)

    def test_simplified_drops_redundant_breakpoints(self):
        prof = CoefficientProfile((0.0, 0.3, 0.6, 1.0), (2.0, 2.0, 5.0))
        assert prof.simplified() == CoefficientProfile((0.0, 0.6, 1.0), (2.0, 5.0))
        assert prof.interior_breakpoints() == (0.6,)

    @given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=6), st.floats(0.0, 1.0))
    def test_eval_nonnegative_for_nonnegative_values(self, values, x):
        bp = np.linspace(0.0, 1.0, len(values) + 1)
        assert CoefficientProfile(tuple(bp), tuple(values)).eval(x) >= 0.0


class TestDampingProfile:
    def test_support(self):
        prof = damping_profile(1.0, 0.25, 0.75, 2.0)
        assert prof.eval(0.1) == 0.0
        assert prof.eval(0.5) == 2.0
        assert prof.eval(0.9) == 0.0

    def test_touching_ends(self):
        prof = damping_profile(1.0, 0.0, 1.0, 2.0)
        assert prof.values == (2.0,)


class TestValidate:
    def test_default_passes_everything(self, default_config):
        for kind in MotionKind:
            rep = validate(default_config, kind)
            assert rep.ok
            assert rep.exact_eligible
            assert rep.stability_eligible

    def test_interface_violation_named(self, weak_interface_config):
        rep = validate(weak_interface_config, MotionKind.TRANSVERSAL)
        assert not rep.passed("interface-moduli")
        assert not rep.exp_stable_eligible
        assert rep.exact_eligible
        assert not hard_failures(rep)
        assert any("q2(l) >= q1(l)" in note for note in rep.notes)

    def test_interface_irrelevant_for_longitudinal(self, weak_interface_config):
        rep = validate(weak_interface_config, MotionKind.LONGITUDINAL)
        assert rep.stability_eligible

    def test_ordering_violation(self):
        cfg = TransmissionConfig.uniform(alpha=0.75, beta=0.25)
        rep = validate(cfg, MotionKind.LONGITUDINAL)
        assert not rep.passed("geometry")
        assert [c.name for c in hard_failures(rep)][0] == "geometry"
        assert not rep.exact_eligible

    def test_non_constant_outside_breaks_exactness(self, default_config):
        q1 = CoefficientProfile((0.0, 0.1, 1.0), (1.0, 2.0))
        cfg = default_config.replace(q1=q1)
        rep = validate(cfg, MotionKind.TRANSVERSAL)
        assert not rep.passed("constant-outside-q")
        assert not rep.exact_eligible

    def test_breakpoint_at_alpha_keeps_exactness(self, default_config):
        q1 = CoefficientProfile((0.0, 0.25, 1.0), (1.0, 2.0))
        rep = validate(default_config.replace(q1=q1), MotionKind.TRANSVERSAL)
        assert rep.exact_eligible

    def test_damping_outside_interval_reported(self, default_config):
        cfg = default_config.replace(a=CoefficientProfile.constant(0.0, 1.0, 1.0))
        rep = validate(cfg, MotionKind.LONGITUDINAL)
        assert not rep.passed("damping-a")

    def test_positivity(self, default_config):
        cfg = default_config.replace(p2=CoefficientProfile.constant(1.0, 1.25, 0.0))
        assert not validate(cfg, "longitudinal").passed("positivity-p2")

    @settings(max_examples=300, suppress_health_check=[HealthCheck.too_slow])
    @given(
        any_float, any_float, any_float, any_float,
        st.lists(any_float, min_size=2, max_size=5),
        st.lists(any_float, min_size=1, max_size=4),
        st.sampled_from(list(MotionKind)),
    )
    def test_total_on_arbitrary_numbers(self, L, l, alpha, beta, bps, vals, kind):
        n = min(len(bps) - 1, len(vals))
        prof = CoefficientProfile(tuple(bps[: n + 1]), tuple(vals[:n]))
        cfg = TransmissionConfig(L, l, alpha, beta, prof, prof, prof, prof, prof, prof)
        rep = validate(cfg, kind)
        assert len(rep.checks) >= 6
        hypothesis_report(cfg, kind)

    @given(st.floats(0.01, 0.99), st.floats(0.1, 5.0), st.sampled_from(list(MotionKind)))
    def test_redundant_breakpoints_do_not_change_verdicts(self, frac, value, kind):
        base = TransmissionConfig.uniform(q1=value, p1=value)
        x = frac * base.l
        split = CoefficientProfile((0.0, x, base.l), (value, value))
        cfg = base.replace(p1=split, q1=split)
        assert validate(cfg, kind).signature() == validate(base, kind).signature()


class TestHypothesisReport:
    def test_default_rendering(self, default_config):
        text = hypothesis_report(default_config)
        assert "[longitudinal]" in text and "[transversal]" in text
        assert "FAIL" not in text
        assert "exp-stable-eligible: yes" in text

    def test_violation_rendering(self, weak_interface_config):
        text = hypothesis_report(weak_interface_config, "transversal")
        assert "FAIL  interface-moduli" in text
        assert "exp-stable-eligible: no" in text

    def test_ordering_rendering(self):
        text = hypothesis_report(TransmissionConfig.uniform(alpha=0.75, beta=0.25), "longitudinal")
        assert "FAIL  geometry" in text

    def test_deterministic(self, default_config):
        assert hypothesis_report(default_config) == hypothesis_report(default_config)
