"""Problem definition for the transmission beam with local Kelvin-Voigt damping.

A :class:`TransmissionConfig` describes a clamped bar/beam on ``[0, L]`` with a
material interface at ``x = l`` and viscoelastic damping confined to
``(alpha, beta)`` on the left of the interface.  All coefficients are
piecewise-constant :class:`CoefficientProfile` objects.

:func:`validate` checks the standing hypotheses of the stability results and
never raises; findings are collected in a :class:`ValidationReport`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MotionKind",
    "DomainError",
    "CoefficientProfile",
    "TransmissionConfig",
    "HypothesisCheck",
    "ValidationReport",
    "validate",
    "hypothesis_report",
]

DEFAULT_C0 = 1e-8


class DomainError(ValueError):
    """Raised when a profile is evaluated outside its domain."""


class MotionKind(enum.Enum):
    """Longitudinal (wave equation) or transversal (Euler-Bernoulli) motion."""

    LONGITUDINAL = "longitudinal"
    TRANSVERSAL = "transversal"

    @classmethod
    def parse(cls, value: "str | MotionKind") -> "MotionKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown motion kind {value!r}") from None


@dataclass(frozen=True)
class CoefficientProfile:
    """Piecewise-constant function on ``[breakpoints[0], breakpoints[-1]]``.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``; the last
    sub-layer is closed on the right.  No ordering checks are made here,
    :func:`validate` reports them.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) != len(vals) + 1 or not vals:
            raise ValueError(
                "a profile needs len(breakpoints) == len(values) + 1 >= 2, got "
                f"{len(bp)} breakpoints and {len(vals)} values"
            )
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, start: float, stop: float, value: float) -> "CoefficientProfile":
        return cls((start, stop), (value,))

    @classmethod
    def from_pieces(
        cls, start: float, stop: float, pieces: Sequence[tuple[float, float]]
    ) -> "CoefficientProfile":
        """Build from ``[(x0, v0), (x1, v1), ...]`` meaning ``v_i`` from ``x_i`` on.

        The first piece must start at ``start``; pieces starting at or after
        ``stop`` are rejected.
        """
        if not pieces:
            raise ValueError("at least one piece is required")
        xs = [float(x) for x, _ in pieces]
        if not math.isclose(xs[0], start, rel_tol=0.0, abs_tol=1e-12 * max(1.0, abs(stop))):
            raise ValueError(f"first piece must start at {start}, got {xs[0]}")
        if xs[-1] >= stop:
            raise ValueError(f"piece starting at {xs[-1]} is outside [{start}, {stop})")
        return cls(tuple([start] + xs[1:] + [stop]), tuple(float(v) for _, v in pieces))

    @property
    def start(self) -> float:
        return self.breakpoints[0]

    @property
    def stop(self) -> float:
        return self.breakpoints[-1]

    def eval(self, x: float) -> float:
        """Value of the sub-layer containing ``x`` (right-continuous)."""
        x = float(x)
        if not (self.start <= x <= self.stop):
            raise DomainError(f"x={x} outside profile domain [{self.start}, {self.stop}]")
        # rightmost i with breakpoints[i] <= x, capped to the last layer
        i = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return self.values[min(i, len(self.values) - 1)]

    __call__ = eval

    def left_limit(self, x: float) -> float:
        """Value just left of ``x`` (``x`` in ``(start, stop]``)."""
        x = float(x)
        if not (self.start < x <= self.stop):
            raise DomainError(f"left limit at x={x} outside ({self.start}, {self.stop}]")
        i = int(np.searchsorted(self.breakpoints, x, side="left")) - 1
        return self.values[i]

    def sample(self, xs: Iterable[float]) -> np.ndarray:
        return np.array([self.eval(x) for x in xs])

    def simplified(self) -> "CoefficientProfile":
        """Drop breakpoints between equal adjacent values."""
        bp = [self.breakpoints[0]]
        vals = [self.values[0]]
        for x, v in zip(self.breakpoints[1:-1], self.values[1:]):
            if v == vals[-1]:
                continue
            bp.append(x)
            vals.append(v)
        bp.append(self.breakpoints[-1])
        return CoefficientProfile(tuple(bp), tuple(vals))

    def interior_breakpoints(self) -> tuple[float, ...]:
        """Positions where the value actually changes."""
        return self.simplified().breakpoints[1:-1]

    def values_on(self, lo: float, hi: float) -> list[float]:
        """Values of sub-layers overlapping ``(lo, hi)`` with positive length."""
        out = []
        for x0, x1, v in zip(self.breakpoints[:-1], self.breakpoints[1:], self.values):
            if min(x1, hi) > max(x0, lo):
                out.append(v)
        return out

    def is_constant_on(self, lo: float, hi: float) -> bool:
        return len(set(self.values_on(lo, hi))) <= 1

    def scaled(self, factor: float) -> "CoefficientProfile":
        return CoefficientProfile(self.breakpoints, tuple(factor * v for v in self.values))


@dataclass(frozen=True)
class TransmissionConfig:
    """Geometry and coefficient profiles of the transmission problem.

    ``p1, q1, a, b`` live on ``[0, l]`` and ``p2, q2`` on ``[l, L]``.  The
    damping profiles ``a`` (longitudinal) and ``b`` (transversal) are meant to
    vanish outside ``(alpha, beta)``.
    """

    L: float
    l: float
    alpha: float
    beta: float
    p1: CoefficientProfile
    p2: CoefficientProfile
    q1: CoefficientProfile
    q2: CoefficientProfile
    a: CoefficientProfile
    b: CoefficientProfile
    c0: float = DEFAULT_C0

    @classmethod
    def uniform(
        cls,
        L: float = 1.25,
        l: float = 1.0,
        alpha: float = 0.25,
        beta: float = 0.75,
        p1: float = 1.0,
        p2: float = 1.0,
        q1: float = 1.0,
        q2: float = 1.0,
        a: float = 1.0,
        b: float = 1.0,
        c0: float = DEFAULT_C0,
    ) -> "TransmissionConfig":
        """Constant coefficients per side; damping constant on ``(alpha, beta)``."""
        return cls(
            L=L,
            l=l,
            alpha=alpha,
            beta=beta,
            p1=CoefficientProfile.constant(0.0, l, p1),
            p2=CoefficientProfile.constant(l, L, p2),
            q1=CoefficientProfile.constant(0.0, l, q1),
            q2=CoefficientProfile.constant(l, L, q2),
            a=damping_profile(l, alpha, beta, a),
            b=damping_profile(l, alpha, beta, b),
            c0=c0,
        )

    @classmethod
    def default(cls) -> "TransmissionConfig":
        return cls.uniform()

    def replace(self, **changes) -> "TransmissionConfig":
        from dataclasses import replace

        return replace(self, **changes)

    def profiles(self, kind: MotionKind) -> tuple[CoefficientProfile, CoefficientProfile, CoefficientProfile]:
        """``(left modulus, right modulus, damping)`` for ``kind``."""
        if MotionKind.parse(kind) is MotionKind.LONGITUDINAL:
            return self.p1, self.p2, self.a
        return self.q1, self.q2, self.b

    def modulus(self, kind: MotionKind, x: float) -> float:
        left, right, _ = self.profiles(kind)
        return left.eval(x) if x < self.l else right.eval(x)

    def damping(self, kind: MotionKind, x: float) -> float:
        _, _, damp = self.profiles(kind)
        return damp.eval(x) if x < self.l else 0.0

    def mandatory_points(self) -> list[float]:
        """``0, alpha, beta, l, L`` and every coefficient breakpoint, sorted."""
        pts = {0.0, self.alpha, self.beta, self.l, self.L}
        for prof in (self.p1, self.p2, self.q1, self.q2, self.a, self.b):
            pts.update(prof.interior_breakpoints())
        return sorted(pts)


def damping_profile(l: float, alpha: float, beta: float, value: float) -> CoefficientProfile:
    """``value`` on ``[alpha, beta)`` and zero elsewhere on ``[0, l]``."""
    bp = [0.0]
    vals = []
    if alpha > 0.0:
        bp.append(alpha)
        vals.append(0.0)
    vals.append(value)
    if beta < l:
        bp.append(beta)
        vals.append(0.0)
    bp.append(l)
    return CoefficientProfile(tuple(bp), tuple(vals))


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    kind: MotionKind
    checks: tuple[HypothesisCheck, ...]
    exact_eligible: bool
    stability_eligible: bool
    notes: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[HypothesisCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    @property
    def exp_stable_eligible(self) -> bool:
        return self.kind is MotionKind.TRANSVERSAL and self.stability_eligible

    def check(self, name: str) -> HypothesisCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def passed(self, name: str) -> bool:
        return self.check(name).passed

    def signature(self) -> tuple:
        """Comparable summary (names and verdicts, no free-text details)."""
        return (
            self.kind,
            tuple((c.name, c.passed) for c in self.checks),
            self.exact_eligible,
            self.stability_eligible,
        )


# Check names, in report order.
GEOMETRY = "geometry"
DOMAINS = "profile-domains"
INTERFACE = "interface-moduli"  # q2(l) >= q1(l)

_HARD = (GEOMETRY, DOMAINS)


def _safe(name: str, fn) -> HypothesisCheck:
    try:
        passed, detail = fn()
        return HypothesisCheck(name, bool(passed), detail)
    except Exception as exc:  # validate must stay total
        return HypothesisCheck(name, False, f"could not evaluate: {exc}")


def _check_geometry(cfg: TransmissionConfig):
    vals = (cfg.alpha, cfg.beta, cfg.l, cfg.L)
    if not all(math.isfinite(float(v)) for v in vals):
        return False, "non-finite geometry"
    ok = 0.0 <= cfg.alpha < cfg.beta <= cfg.l < cfg.L
    detail = f"0 <= alpha={cfg.alpha:g} < beta={cfg.beta:g} <= l={cfg.l:g} < L={cfg.L:g}"
    return ok, detail if ok else "violated: " + detail


def _profile_shape_ok(prof: CoefficientProfile, lo: float, hi: float, name: str) -> list[str]:
    errs = []
    bp = prof.breakpoints
    if not all(math.isfinite(x) for x in bp) or not all(math.isfinite(v) for v in prof.values):
        errs.append(f"{name}: non-finite entries")
        return errs
    if any(x1 <= x0 for x0, x1 in zip(bp[:-1], bp[1:])):
        errs.append(f"{name}: breakpoints not strictly increasing")
    tol = 1e-12 * max(1.0, abs(hi))
    if abs(bp[0] - lo) > tol or abs(bp[-1] - hi) > tol:
        errs.append(f"{name}: domain [{bp[0]:g}, {bp[-1]:g}] != [{lo:g}, {hi:g}]")
    return errs


def _check_domains(cfg: TransmissionConfig, kind: MotionKind):
    left, right, damp = cfg.profiles(kind)
    names = ("p1", "p2", "a") if kind is MotionKind.LONGITUDINAL else ("q1", "q2", "b")
    errs = (
        _profile_shape_ok(left, 0.0, cfg.l, names[0])
        + _profile_shape_ok(right, cfg.l, cfg.L, names[1])
        + _profile_shape_ok(damp, 0.0, cfg.l, names[2])
    )
    return not errs, "; ".join(errs) if errs else f"{', '.join(names)} cover their sub-domains"


def _check_positive(prof: CoefficientProfile, c0: float, name: str):
    lo = min(prof.values)
    ok = lo >= c0
    return ok, f"min {name} = {lo:g} {'>=' if ok else '<'} c0 = {c0:g}"


def _check_damping(cfg: TransmissionConfig, prof: CoefficientProfile, name: str):
    inside = prof.values_on(cfg.alpha, cfg.beta)
    outside = prof.values_on(prof.start, cfg.alpha) + prof.values_on(cfg.beta, prof.stop)
    errs = []
    if any(not v >= 0.0 for v in prof.values):
        errs.append(f"{name} has negative values")
    if not inside or min(inside) < cfg.c0:
        errs.append(f"{name} < c0 somewhere on (alpha, beta)")
    if any(v != 0.0 for v in outside):
        errs.append(f"{name} nonzero outside (alpha, beta)")
    return not errs, "; ".join(errs) if errs else f"{name} >= c0 on (alpha, beta), zero outside"


def _check_constant_outside(cfg: TransmissionConfig, left: CoefficientProfile, right: CoefficientProfile, names):
    errs = []
    if not left.is_constant_on(0.0, cfg.alpha):
        errs.append(f"{names[0]} not constant on (0, alpha)")
    if not left.is_constant_on(cfg.beta, cfg.l):
        errs.append(f"{names[0]} not constant on (beta, l)")
    if not right.is_constant_on(cfg.l, cfg.L):
        errs.append(f"{names[1]} not constant on (l, L)")
    return not errs, "; ".join(errs) if errs else "constant outside the damped interval"


def _check_interface(cfg: TransmissionConfig):
    q1l = cfg.q1.left_limit(cfg.l)
    q2l = cfg.q2.eval(cfg.l)
    ok = q2l >= q1l
    return ok, f"q2(l+) = {q2l:g} {'>=' if ok else '<'} q1(l-) = {q1l:g}"


def _exact_eligible(cfg: TransmissionConfig, kind: MotionKind) -> bool:
    allowed = (cfg.alpha, cfg.beta, cfg.l)
    tol = 1e-12 * max(1.0, abs(cfg.L))
    for prof in cfg.profiles(kind):
        for x in prof.interior_breakpoints():
            if not any(abs(x - y) <= tol for y in allowed):
                return False
    return True


def validate(config: TransmissionConfig, kind: MotionKind | str) -> ValidationReport:
    """Check the standing hypotheses for ``kind``.  Never raises."""
    kind = MotionKind.parse(kind)
    cfg = config
    checks = [_safe(GEOMETRY, lambda: _check_geometry(cfg))]
    checks.append(_safe(DOMAINS, lambda: _check_domains(cfg, kind)))
    left, right, damp = cfg.profiles(kind)
    if kind is MotionKind.LONGITUDINAL:
        names = ("p1", "p2", "a")
    else:
        names = ("q1", "q2", "b")
    checks.append(_safe(f"positivity-{names[0]}", lambda: _check_positive(left, cfg.c0, names[0])))
    checks.append(_safe(f"positivity-{names[1]}", lambda: _check_positive(right, cfg.c0, names[1])))
    checks.append(_safe(f"damping-{names[2]}", lambda: _check_damping(cfg, damp, names[2])))
    checks.append(
        _safe(f"constant-outside-{names[0][0]}", lambda: _check_constant_outside(cfg, left, right, names))
    )
    if kind is MotionKind.TRANSVERSAL:
        checks.append(_safe(INTERFACE, lambda: _check_interface(cfg)))

    by_name = {c.name: c.passed for c in checks}
    structural = by_name[GEOMETRY] and by_name[DOMAINS]
    try:
        exact = structural and _exact_eligible(cfg, kind)
    except Exception:
        exact = False
    stability = all(by_name.values())
    notes = []
    if kind is MotionKind.TRANSVERSAL and not by_name.get(INTERFACE, True):
        notes.append("exponential-stability hypothesis q2(l) >= q1(l) fails")
    return ValidationReport(kind, tuple(checks), exact, stability, tuple(notes))


def hard_failures(report: ValidationReport) -> tuple[HypothesisCheck, ...]:
    """Failures that make the problem ill-posed (as opposed to hypothesis misses)."""
    return tuple(c for c in report.failures if c.name in _HARD)


def hypothesis_report(config: TransmissionConfig, kind: MotionKind | str | None = None) -> str:
    """Plain-text rendering of :func:`validate` for one or both motion kinds."""
    kinds = [MotionKind.parse(kind)] if kind is not None else list(MotionKind)
    lines = [
        f"geometry: L={config.L:g} l={config.l:g} alpha={config.alpha:g} "
        f"beta={config.beta:g} c0={config.c0:g}"
    ]
    for k in kinds:
        rep = validate(config, k)
        lines.append(f"[{k.value}]")
        for c in rep.checks:
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
        lines.append(f"  exact-eligible: {'yes' if rep.exact_eligible else 'no'}")
        label = "exp-stable-eligible" if k is MotionKind.TRANSVERSAL else "poly-stable-eligible"
        lines.append(f"  {label}: {'yes' if rep.stability_eligible else 'no'}")
        for note in rep.notes:
            lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n"
