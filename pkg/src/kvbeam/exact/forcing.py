"""Closed-form forcing family and particular solutions.

Forcing terms are finite sums ``c * s**m * exp(rho * s)`` (an
:class:`ExpPoly`), which covers polynomials and products of polynomials with
sin, cos and exp.  For a constant-coefficient operator ``P(D)`` the image of
this family is the family itself, so particular solutions follow from
undetermined coefficients; resonant rates (roots of ``P``) raise the
polynomial degree by the root multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import UnsupportedInputError

__all__ = ["ExpPoly", "ForcingPiece", "Forcing", "particular_solution"]

_RATE_DIGITS = 12


def _rate_key(rho: complex, scale: float) -> tuple[float, float]:
    s = max(1.0, scale)
    return (round(rho.real / s, _RATE_DIGITS), round(rho.imag / s, _RATE_DIGITS))


@dataclass(frozen=True)
class ExpPoly:
    """``sum_k coef_k * s**power_k * exp(rate_k * s)``."""

    terms: tuple[tuple[complex, int, complex], ...] = ()

    def __post_init__(self):
        clean = []
        for c, m, r in self.terms:
            m = int(m)
            if m < 0:
                raise UnsupportedInputError("negative powers are not in the forcing family")
            c, r = complex(c), complex(r)
            if not (np.isfinite(c) and np.isfinite(r)):
                raise UnsupportedInputError("non-finite forcing coefficient")
            if c != 0:
                clean.append((c, m, r))
        object.__setattr__(self, "terms", tuple(clean))

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls) -> "ExpPoly":
        return cls(())

    @classmethod
    def const(cls, c: complex) -> "ExpPoly":
        return cls(((c, 0, 0j),))

    @classmethod
    def poly(cls, coeffs: Sequence[complex]) -> "ExpPoly":
        """``sum_k coeffs[k] * s**k``."""
        return cls(tuple((c, k, 0j) for k, c in enumerate(coeffs)))

    @classmethod
    def exp(cls, rate: complex, amp: complex = 1.0) -> "ExpPoly":
        return cls(((amp, 0, rate),))

    @classmethod
    def cos(cls, k: float, amp: complex = 1.0, phase: float = 0.0) -> "ExpPoly":
        """``amp * cos(k s + phase)``."""
        e = np.exp(1j * phase)
        return cls(((0.5 * amp * e, 0, 1j * k), (0.5 * amp / e, 0, -1j * k)))

    @classmethod
    def sin(cls, k: float, amp: complex = 1.0, phase: float = 0.0) -> "ExpPoly":
        """``amp * sin(k s + phase)``."""
        e = np.exp(1j * phase)
        return cls(((-0.5j * amp * e, 0, 1j * k), (0.5j * amp / e, 0, -1j * k)))

    # algebra ------------------------------------------------------------
    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        return ExpPoly(self.terms + other.terms).simplified()

    def __mul__(self, c: complex) -> "ExpPoly":
        return ExpPoly(tuple((c * a, m, r) for a, m, r in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> "ExpPoly":
        return self * -1.0

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + (-other)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def times_poly(self, coeffs: Sequence[complex]) -> "ExpPoly":
        out = []
        for c, m, r in self.terms:
            out.extend((c * a, m + k, r) for k, a in enumerate(coeffs))
        return ExpPoly(tuple(out)).simplified()

    def simplified(self) -> "ExpPoly":
        """Merge terms sharing power and rate."""
        acc: dict[tuple, list] = {}
        for c, m, r in self.terms:
            key = (m, r)
            if key in acc:
                acc[key][0] += c
            else:
                acc[key] = [c, m, r]
        return ExpPoly(tuple((c, m, r) for c, m, r in acc.values()))

    def deriv(self, n: int = 1) -> "ExpPoly":
        out = self
        for _ in range(n):
            terms = []
            for c, m, r in out.terms:
                if r != 0:
                    terms.append((c * r, m, r))
                if m > 0:
                    terms.append((c * m, m - 1, r))
            out = ExpPoly(tuple(terms)).simplified()
        return out

    def shift(self, d: float) -> "ExpPoly":
        """``t -> self(t + d)`` re-expressed in the family."""
        if d == 0:
            return self
        out = []
        for c, m, r in self.terms:
            cr = c * np.exp(r * d)
            for k in range(m + 1):
                out.append((cr * math.comb(m, k) * d ** (m - k), k, r))
        return ExpPoly(tuple(out)).simplified()

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape, dtype=complex)
        for c, m, r in self.terms:
            out = out + c * s ** m * np.exp(r * s)
        return out

    def max_rate(self) -> float:
        return max((abs(r) for _, _, r in self.terms), default=0.0)

    def groups(self) -> dict[complex, np.ndarray]:
        """Rate -> ascending polynomial coefficient array."""
        tmp: dict[complex, dict[int, complex]] = {}
        for c, m, r in self.terms:
            tmp.setdefault(r, {})
            tmp[r][m] = tmp[r].get(m, 0) + c
        out = {}
        for r, d in tmp.items():
            arr = np.zeros(max(d) + 1, dtype=complex)
            for m, c in d.items():
                arr[m] = c
            out[r] = arr
        return out


def _poly_derivs(coeffs_desc: np.ndarray, rho: complex) -> list[complex]:
    """``[P(rho), P'(rho), ..., P^(k)(rho)]``."""
    vals = []
    c = np.array(coeffs_desc, dtype=complex)
    while c.size:
        vals.append(complex(np.polyval(c, rho)))
        c = np.polyder(c) if c.size > 1 else np.array([], dtype=complex)
    return vals


def particular_solution(coeffs_desc: Sequence[complex], rhs: ExpPoly, rtol: float = 1e-11) -> ExpPoly:
    """A particular solution ``y`` of ``P(D) y = rhs``.

    ``coeffs_desc`` lists ``P``'s coefficients from the highest power down.
    Uses ``P(D)(e^{rho s} h) = e^{rho s} sum_i P^(i)(rho)/i! h^(i)``.
    """
    coeffs = np.asarray(coeffs_desc, dtype=complex)
    order = coeffs.size - 1
    out = []
    for rho, a in rhs.groups().items():
        derivs = _poly_derivs(coeffs, rho)
        size = sum(abs(c) * max(1.0, abs(rho)) ** (order - k) for k, c in enumerate(coeffs))
        mult = 0
        while mult < order and abs(derivs[mult]) <= rtol * size:
            mult += 1
        weights = [derivs[i] / math.factorial(i) for i in range(order + 1)]
        d = a.size - 1
        # unknown h = sum_{k=mult}^{d+mult} b_k s^k ; match s^0..s^d
        n = d + 1
        A = np.zeros((n, n), dtype=complex)
        for col in range(n):
            k = col + mult
            for i in range(order + 1):
                if i > k:
                    break
                j = k - i  # power after i derivatives
                if j <= d:
                    A[j, col] += weights[i] * math.perm(k, i)
        b = np.linalg.solve(A, a)
        out.extend((bk, col + mult, rho) for col, bk in enumerate(b))
    return ExpPoly(tuple(out)).simplified()


@dataclass(frozen=True)
class ForcingPiece:
    """``f`` and ``g`` on ``[x0, x1]`` written in ``s = x - x0``."""

    x0: float
    x1: float
    f: ExpPoly
    g: ExpPoly


@dataclass(frozen=True)
class Forcing:
    """Piecewise closed-form data ``(f, g)``; zero outside the pieces."""

    pieces: tuple[ForcingPiece, ...] = ()

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for p in pieces:
            if not isinstance(p, ForcingPiece) or not isinstance(p.f, ExpPoly) or not isinstance(p.g, ExpPoly):
                raise UnsupportedInputError("forcing pieces must be ForcingPiece of ExpPoly terms")
            if not p.x1 > p.x0:
                raise UnsupportedInputError(f"empty forcing piece [{p.x0}, {p.x1}]")
        ordered = sorted(pieces, key=lambda p: p.x0)
        for a, b in zip(ordered, ordered[1:]):
            if b.x0 < a.x1 - 1e-14:
                raise UnsupportedInputError("forcing pieces overlap")
        object.__setattr__(self, "pieces", tuple(ordered))

    @classmethod
    def zero(cls) -> "Forcing":
        return cls(())

    def scaled(self, c: complex) -> "Forcing":
        return Forcing(tuple(ForcingPiece(p.x0, p.x1, p.f * c, p.g * c) for p in self.pieces))

    def breakpoints(self) -> list[float]:
        pts = set()
        for p in self.pieces:
            pts.update((p.x0, p.x1))
        return sorted(pts)

    def on(self, lo: float, hi: float) -> tuple[ExpPoly, ExpPoly]:
        """``(f, g)`` on ``[lo, hi]`` in the local coordinate ``s = x - lo``."""
        mid = 0.5 * (lo + hi)
        for p in self.pieces:
            if p.x0 <= mid <= p.x1:
                if lo < p.x0 - 1e-12 or hi > p.x1 + 1e-12:
                    raise UnsupportedInputError("layer straddles a forcing breakpoint")
                return p.f.shift(lo - p.x0), p.g.shift(lo - p.x0)
        return ExpPoly.zero(), ExpPoly.zero()

    def evaluate(self, x: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(list(x), dtype=float)
        f = np.zeros(x.shape, dtype=complex)
        g = np.zeros(x.shape, dtype=complex)
        for p in self.pieces:
            m = (x >= p.x0) & (x <= p.x1)
            f[m] = p.f(x[m] - p.x0)
            g[m] = p.g(x[m] - p.x0)
        return f, g

    def max_rate(self) -> float:
        return max((max(p.f.max_rate(), p.g.max_rate()) for p in self.pieces), default=0.0)
