"""Layer propagators for constant-coefficient resolvent equations.

Wave layer: ``(p + i a lam) u'' + lam^2 u = 0`` in the state ``(u, kappa u')``.
Beam layer: ``(q + i lam b) w'''' - lam^2 w = 0`` in the state
``(w, w', kappa w'', kappa w''')``.  Here ``kappa`` is the complex modulus.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LayerMatrix",
    "complex_modulus",
    "complex_omega",
    "beam_eta",
    "wave_layer",
    "beam_layer",
    "krylov_functions",
]


@dataclass(frozen=True)
class LayerMatrix:
    """Propagator of the state vector across one layer."""

    matrix: np.ndarray
    lam: float
    modulus: float
    damping: float
    length: float
    provenance: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def __matmul__(self, other):
        if isinstance(other, LayerMatrix):
            return self.matrix @ other.matrix
        return self.matrix @ other


def complex_modulus(lam: float, modulus: float, damping: float) -> complex:
    """``modulus + i * damping * lam``."""
    return complex(modulus, damping * lam)


def complex_omega(lam: float, p: float, a: float) -> complex:
    """Decay/oscillation root of the damped wave layer.

    ``omega = lam (p^2 + a^2 lam^2)^(-1/4) (cos(theta/2) + i sin(theta/2))``
    with ``cos(theta) = -p / sqrt(p^2 + a^2 lam^2)``, ``sin(theta) =
    a lam / sqrt(p^2 + a^2 lam^2)`` and ``theta`` in ``(pi/2, pi]``, so that
    ``omega^2 = -lam^2 / (p + i a lam)`` and ``Re(omega) >= 0``.
    """
    if not lam > 0 or not p > 0 or a < 0:
        raise ValueError("complex_omega needs lam > 0, p > 0, a >= 0")
    r = math.hypot(p, a * lam)
    theta = math.atan2(a * lam, -p)
    return lam / math.sqrt(r) * cmath.exp(0.5j * theta)


def beam_eta(lam: float, q: float, b: float) -> complex:
    """A fourth root of ``lam^2 / (q + i lam b)`` with non-negative real part."""
    kappa = complex_modulus(lam, q, b)
    eta = cmath.sqrt(lam / cmath.sqrt(kappa)) if lam >= 0 else cmath.sqrt(-lam / cmath.sqrt(kappa))
    return eta if eta.real >= 0 else -eta


def _wave_omega(lam: float, p: float, a: float) -> complex:
    if lam > 0:
        return complex_omega(lam, p, a)
    # negative lam: conjugate symmetry of the layer ODE
    return cmath.sqrt(-(lam * lam) / complex_modulus(lam, p, a))


def wave_layer(lam: float, p: float, a: float, length: float) -> LayerMatrix:
    """Propagator of ``(u, (p + i a lam) u')`` across ``length``."""
    kappa = complex_modulus(lam, p, a)
    if lam == 0:
        m = np.array([[1.0, length / kappa], [0.0, 1.0]], dtype=complex)
    elif a == 0:
        k = abs(lam) / math.sqrt(p)
        c, s = math.cos(k * length), math.sin(k * length)
        m = np.array([[c, s / (k * p)], [-k * p * s, c]], dtype=complex)
    else:
        om = _wave_omega(lam, p, a)
        x = om * length
        ch, sh = cmath.cosh(x), cmath.sinh(x)
        m = np.array([[ch, sh / (om * kappa)], [om * kappa * sh, ch]], dtype=complex)
    return LayerMatrix(m, float(lam), float(p), float(a), float(length), {"type": "wave"})


def krylov_functions(eta: complex, s: float) -> tuple[complex, complex, complex, complex]:
    """Krylov functions ``K1..K4`` of ``y'''' = eta^4 y``.

    ``K1(0) = 1``, ``K2'(0) = 1``, ``K3''(0) = 1``, ``K4'''(0) = 1`` with all
    other initial derivatives zero; each is an entire function of ``eta^4``,
    so the choice of fourth root is immaterial.
    """
    x = eta * s
    if abs(x) < 1.0:
        x4 = x ** 4
        sums = [0j, 0j, 0j, 0j]
        term = 1.0 + 0j
        for k in range(10):
            base = 4 * k
            for j in range(4):
                sums[j] += term / math.factorial(base + j)
            term *= x4
        return sums[0], s * sums[1], s * s * sums[2], s ** 3 * sums[3]
    ch, sh = cmath.cosh(x), cmath.sinh(x)
    c, sn = cmath.cos(x), cmath.sin(x)
    return (
        0.5 * (ch + c),
        0.5 * (sh + sn) / eta,
        0.5 * (ch - c) / eta ** 2,
        0.5 * (sh - sn) / eta ** 3,
    )


def beam_layer(lam: float, q: float, b: float, length: float) -> LayerMatrix:
    """Propagator of ``(w, w', kappa w'', kappa w''')`` across ``length``."""
    kappa = complex_modulus(lam, q, b)
    e4 = lam * lam / kappa
    eta = cmath.sqrt(cmath.sqrt(e4)) if e4 != 0 else 0j
    k1, k2, k3, k4 = krylov_functions(eta, length)
    W = np.array(
        [
            [k1, k2, k3, k4],
            [e4 * k4, k1, k2, k3],
            [e4 * k3, e4 * k4, k1, k2],
            [e4 * k2, e4 * k3, e4 * k4, k1],
        ],
        dtype=complex,
    )
    scale = np.array([1.0, 1.0, kappa, kappa])
    m = (scale[:, None] * W) / scale[None, :]
    return LayerMatrix(m, float(lam), float(q), float(b), float(length), {"type": "beam"})
