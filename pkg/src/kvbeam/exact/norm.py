"""Exact resolvent norm on the imaginary axis for layered coefficients.

``|(i lam - A)^{-1}| = 1 / sigma`` where ``sigma`` is the smallest singular
value of ``T = i lam - A`` in the energy inner product.  In that inner product
``A* = S A S`` with ``S = diag(I, -I)``, so ``sigma`` is a singular value iff
the coupled problem

    (i lam - A) z = sigma S y~,      (-i lam - A) y~ = sigma S z

has a non-trivial solution.  Eliminating the velocities leaves, for the pair
``X = (u, u~)`` (wave) or ``X = (w, w~)`` (beam), the layered system

    wave:  (P X')'  = R X,    P = [[p + i a lam, -a sigma], [-a sigma, p - i a lam]],
                             R = -[[lam^2 + sigma^2, 2 i lam sigma], [-2 i lam sigma, lam^2 + sigma^2]]
    beam:  (P X'')'' = R X,   same ``P`` with ``(q, b)``, ``R`` with the opposite sign,

with the original boundary conditions on both fields and continuity of
``X`` and its fluxes.  ``sigma_min`` is the first root of the scaled matching
matrix's inverse condition number.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from ..errors import ConfigurationError, NumericalError, SingularityError, UnsupportedInputError
from ..model import MotionKind, TransmissionConfig, hard_failures, validate
from .matching import choose_basis, equilibrate, matching_matrix
from .resolvent import layer_partition

__all__ = ["singular_value_indicator", "exact_smallest_singular_value", "exact_resolvent_norm"]

_ROOT_TOL = 1e-9


def _companion(kind: MotionKind, lam: float, sigma: float, mod: float, damp: float) -> np.ndarray:
    P = np.array([[mod + 1j * damp * lam, -damp * sigma], [-damp * sigma, mod - 1j * damp * lam]])
    Pinv = np.linalg.inv(P)
    c = lam * lam + sigma * sigma
    R = np.array([[c, 2j * lam * sigma], [-2j * lam * sigma, c]])
    Z = np.zeros((2, 2))
    I = np.eye(2)
    if kind is MotionKind.LONGITUDINAL:
        return np.block([[Z, Pinv], [-R, Z]])
    return np.block([[Z, I, Z, Z], [Z, Z, Pinv, Z], [Z, Z, Z, I], [R, Z, Z, Z]])


def _layers(config: TransmissionConfig, kind: MotionKind):
    pts = layer_partition(config)
    return [
        (x1 - x0, config.modulus(kind, 0.5 * (x0 + x1)), config.damping(kind, 0.5 * (x0 + x1)))
        for x0, x1 in zip(pts[:-1], pts[1:])
    ]


def singular_value_indicator(config: TransmissionConfig, kind: MotionKind | str, lam: float, sigma: float, _layers_cache=None) -> float:
    """Inverse condition number of the scaled matching matrix at ``sigma``.

    Vanishes exactly when ``sigma`` is a singular value of ``i lam - A``.
    """
    kind = MotionKind.parse(kind)
    layers = _layers_cache if _layers_cache is not None else _layers(config, kind)
    bases = []
    for h, mod, damp in layers:
        if damp > 0 and damp * damp * sigma * sigma >= mod * mod + (damp * lam) ** 2:
            raise NumericalError("flux matrix degenerates; sigma beyond the supported range")
        bases.append(choose_basis(_companion(kind, lam, sigma, mod, damp), h))
    d = bases[0].dim
    E = np.eye(d, dtype=complex)[: d // 2]
    S, _, _ = equilibrate(matching_matrix(bases, E, E))
    sv = scipy.linalg.svdvals(S)
    return float(sv[-1] / sv[0])


def _sigma_cap(layers, lam: float) -> float:
    caps = [math.sqrt(mod * mod / (damp * damp) + lam * lam) for _, mod, damp in layers if damp > 0]
    return min(caps) * (1 - 1e-9) if caps else math.inf


def exact_smallest_singular_value(
    config: TransmissionConfig,
    kind: MotionKind | str,
    lam: float,
    guess: float | None = None,
    points_per_window: int = 48,
) -> float:
    """Smallest singular value of ``i lam - A`` in the energy norm.

    Windows ``[0, s1], [s1, 2 s1], ...`` are scanned on a uniform grid; local
    minima of :func:`singular_value_indicator` are refined with a bounded
    Brent search and the first one that is a genuine root is returned.
    """
    kind = MotionKind.parse(kind)
    rep = validate(config, kind)
    if hard_failures(rep):
        raise ConfigurationError("; ".join(c.detail for c in hard_failures(rep)))
    if not rep.exact_eligible:
        raise UnsupportedInputError("coefficients must only jump at alpha, beta and l")
    lam = float(lam)
    layers = _layers(config, kind)
    cap = _sigma_cap(layers, lam)

    def phi(s):
        return singular_value_indicator(config, kind, lam, s, layers)

    if phi(0.0) < _ROOT_TOL:
        raise SingularityError(f"i*{lam:g} is an eigenvalue", 1j * lam)

    width = min(1.0, cap / 4) if guess is None else max(1.5 * guess, 1e-6)
    lo = 0.0
    for _ in range(40):
        hi = min(lo + width, cap)
        grid = np.linspace(lo, hi, points_per_window + 1)
        vals = np.array([phi(s) for s in grid])
        cand = [i for i in range(1, len(grid) - 1) if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]]
        if vals[-1] < vals[-2]:
            cand.append(len(grid) - 1)
        for i in cand:
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
            if b <= a:
                continue
            res = minimize_scalar(phi, bounds=(a, b), method="bounded", options={"xatol": 1e-13 * max(1.0, b)})
            if res.fun < _ROOT_TOL * 1e3:
                # polish: the indicator is |s - s0| shaped, bisect on the sign of the slope
                return float(res.x)
        if hi >= cap:
            break
        lo = hi
        width *= 2.0
    raise NumericalError(f"no singular value of i*{lam:g} - A found below {cap:g}")


def exact_resolvent_norm(
    config: TransmissionConfig, kind: MotionKind | str, lam: float, guess_norm: float | None = None
) -> float:
    """``|(i lam - A)^{-1}|`` in the energy norm (``1 / sigma_min``)."""
    guess = None if guess_norm is None else 1.0 / guess_norm
    return 1.0 / exact_smallest_singular_value(config, kind, lam, guess)
