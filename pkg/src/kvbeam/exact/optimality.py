"""Closed-form sequence showing the ``lam^(1/2)`` resolvent growth is sharp.

At ``lam_n = 2 n pi sqrt(p2) / (L - l)`` and with the geometry
``alpha = l - beta = (L - l) sqrt(p1 / p2)``, the data
``f = lam^(eps - 1/2) sin(lam (x - l) / sqrt(p2)) / lam`` and
``g = lam^(eps - 1/2) cos(lam (x - l) / sqrt(p2))`` on ``(l, L)`` (zero on
``(0, l)``) give a longitudinal resolvent solution whose outgoing amplitude
``z_+(L) = (v + sqrt(p2) u')(L) / 2`` has the closed form

    z_+(L) = mu omega (p1 + i a lam) (L - l) coth(omega (beta - alpha)) / (4 i lam p2)
             - mu (L - l) / (4 sqrt(p2)),            mu = lam^(eps - 1/2),

while ``v(l+) = mu (L - l) / (2 sqrt(p2))``.  The data have unit-order norm
``||(f, g)||^2 = L - l`` (times ``mu^2``), so ``|z_+(L)| ~ lam^eps``
forces ``||lam^(eps - 1/2) (i lam - A)^(-1)||`` to be unbounded.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .._csv import write_table
from ..errors import ConfigurationError, InsufficientDataError
from ..model import TransmissionConfig
from .forcing import ExpPoly, Forcing, ForcingPiece
from .layers import complex_omega

__all__ = [
    "OptimalityPoint",
    "optimality_point",
    "optimality_sequence",
    "optimality_forcing",
    "optimality_frequency",
    "blowup_slope",
    "stable_coth",
    "write_optimality_csv",
]


@dataclass(frozen=True)
class OptimalityPoint:
    n: int
    epsilon: float
    lam: float
    omega: complex
    c1: complex
    z_plus_L: complex
    v_l_plus: complex
    coth_value: complex
    lower_bound: float


def stable_coth(x: complex) -> complex:
    """``coth(x)`` for ``Re x >= 0`` without overflow."""
    if x.real < 0:
        return -stable_coth(-x)
    e = cmath.exp(-2.0 * x)
    return (1.0 + e) / (1.0 - e)


def _stable_csch(x: complex) -> complex:
    if x.real < 0:
        return -_stable_csch(-x)
    e = cmath.exp(-x)
    return 2.0 * e / (1.0 - e * e)


def _constant(profile, lo, hi, name):
    vals = set(profile.values_on(lo, hi))
    if len(vals) != 1:
        raise ConfigurationError(f"{name} must be constant on ({lo:g}, {hi:g})")
    return vals.pop()


def _check_geometry(config: TransmissionConfig) -> tuple[float, float, float]:
    L, l, al, be = config.L, config.l, config.alpha, config.beta
    p1 = _constant(config.p1, 0.0, l, "p1")
    p2 = _constant(config.p2, l, L, "p2")
    a = _constant(config.a, al, be, "a")
    outside = set(config.a.values_on(0.0, al)) | set(config.a.values_on(be, l))
    if outside - {0.0}:
        raise ConfigurationError("damping a must vanish outside (alpha, beta)")
    if not (0 < al < be < l < L) or not a > 0 or p1 <= 0 or p2 <= 0:
        raise ConfigurationError("need 0 < alpha < beta < l < L, a > 0 and positive moduli")
    target = (L - l) * math.sqrt(p1 / p2)
    tol = 1e-9 * max(1.0, L)
    if abs(al - target) > tol or abs((l - be) - target) > tol:
        raise ConfigurationError(
            f"geometry requires alpha = l - beta = (L - l) sqrt(p1/p2) = {target:.12g}; "
            f"got alpha = {al:.12g}, l - beta = {l - be:.12g}"
        )
    return p1, p2, a


def optimality_frequency(config: TransmissionConfig, n: int) -> float:
    p2 = _constant(config.p2, config.l, config.L, "p2")
    return 2.0 * n * math.pi * math.sqrt(p2) / (config.L - config.l)


def optimality_point(config: TransmissionConfig, n: int, epsilon: float) -> OptimalityPoint:
    """Evaluate the closed forms at index ``n`` and exponent ``epsilon``."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not (0.0 < epsilon <= 0.5):
        raise ValueError("epsilon must lie in (0, 1/2]")
    p1, p2, a = _check_geometry(config)
    L, l = config.L, config.l
    lam = optimality_frequency(config, int(n))
    mu = lam ** (epsilon - 0.5)
    om = complex_omega(lam, p1, a)
    kappa = complex(p1, a * lam)
    x = om * (config.beta - config.alpha)
    coth = stable_coth(x)
    z_plus = mu * om * kappa * (L - l) * coth / (4j * lam * p2) - mu * (L - l) / (4.0 * math.sqrt(p2))
    v_l = mu * (L - l) / (2.0 * math.sqrt(p2))
    # u = c1 sin(lam x / sqrt(p1)) on (0, alpha), from u(l-) = u(l+)
    c1 = mu * (L - l) * om * kappa * _stable_csch(x) / (2j * lam * lam * math.sqrt(p1 * p2))
    bound = max(0.0, 2.0 * (L - l) * abs(z_plus) ** 2 - (L - l) ** 2 * lam ** (2 * epsilon - 1) / (2.0 * p2))
    return OptimalityPoint(int(n), float(epsilon), lam, om, c1, z_plus, complex(v_l), coth, bound)


def optimality_sequence(config: TransmissionConfig, ns: Sequence[int], epsilon: float) -> list[OptimalityPoint]:
    return [optimality_point(config, int(n), epsilon) for n in ns]


def optimality_forcing(config: TransmissionConfig, n: int, epsilon: float) -> Forcing:
    """The data ``lam^(eps-1/2) (f_n, g_n)`` as a closed-form :class:`Forcing`."""
    _, p2, _ = _check_geometry(config)
    lam = optimality_frequency(config, n)
    mu = lam ** (epsilon - 0.5)
    k = lam / math.sqrt(p2)
    f = ExpPoly.sin(k, mu / lam)
    g = ExpPoly.cos(k, mu)
    return Forcing((ForcingPiece(config.l, config.L, f, g),))


def blowup_slope(points: Sequence[OptimalityPoint]) -> float:
    """Slope of ``log sqrt(lower_bound)`` against ``log lam_n``."""
    pts = [p for p in points if p.lower_bound > 0]
    if len(pts) < 8:
        raise InsufficientDataError(f"{len(pts)} usable points, need 8")
    eps = {p.epsilon for p in pts}
    if len(eps) != 1:
        raise ValueError("all points must share one epsilon")
    lam = np.array([p.lam for p in pts])
    if np.ptp(lam) == 0:
        raise InsufficientDataError("all points share one frequency")
    y = 0.5 * np.log([p.lower_bound for p in pts])
    return float(stats.linregress(np.log(lam), y).slope)


def write_optimality_csv(points: Sequence[OptimalityPoint], path) -> None:
    write_table(
        path,
        ["n", "epsilon", "lambda", "re_omega", "im_omega", "abs_z_plus_L", "lower_bound"],
        (
            (p.n, p.epsilon, p.lam, p.omega.real, p.omega.imag, abs(p.z_plus_L), p.lower_bound)
            for p in points
        ),
    )
