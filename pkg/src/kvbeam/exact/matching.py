"""Generic boundary/transmission matching for layered linear ODE systems.

Each layer carries a basis of homogeneous solutions of ``Y' = C Y``.  Mildly
growing layers use the propagator ``Phi(s)`` (coefficients are the state at
the left end); stiff layers use exponentials scaled by their value at the end
where they are largest, so every basis column is bounded by one on the layer.
The unknown coefficients are fixed by the boundary rows and by continuity of
the full state at every interface.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ..errors import SingularityError

__all__ = [
    "LayerBasis",
    "PropagatorBasis",
    "ExponentialBasis",
    "choose_basis",
    "matching_matrix",
    "equilibrate",
    "solve_matching",
    "COND_LIMIT",
]

COND_LIMIT = 1e12
STIFF_LIMIT = 2.0  # max |Re r| * length handled with a plain propagator


class LayerBasis:
    dim: int
    length: float

    def at(self, s: float) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def left(self) -> np.ndarray:
        return self.at(0.0)

    def right(self) -> np.ndarray:
        return self.at(self.length)


class PropagatorBasis(LayerBasis):
    def __init__(self, propagator: Callable[[float], np.ndarray], dim: int, length: float):
        self._prop = propagator
        self.dim = dim
        self.length = float(length)

    def at(self, s: float) -> np.ndarray:
        return np.asarray(self._prop(float(s)), dtype=complex)

    def left(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


class ExponentialBasis(LayerBasis):
    """Columns ``V[:, j] * exp(r_j (s - s_j))`` with ``s_j`` at the growing end."""

    def __init__(self, rates: np.ndarray, vectors: np.ndarray, length: float):
        self.rates = np.asarray(rates, dtype=complex)
        self.vectors = np.asarray(vectors, dtype=complex)
        self.dim = self.rates.size
        self.length = float(length)
        self.anchor = np.where(self.rates.real > 0, self.length, 0.0)

    def at(self, s: float) -> np.ndarray:
        return self.vectors * np.exp(self.rates * (float(s) - self.anchor))[None, :]


def choose_basis(C: np.ndarray, length: float, propagator: Callable[[float], np.ndarray] | None = None) -> LayerBasis:
    """Pick a propagator or a scaled exponential basis for ``Y' = C Y``."""
    C = np.asarray(C, dtype=complex)
    rates, vecs = np.linalg.eig(C)
    stiff = float(np.max(np.abs(rates.real))) * length
    if stiff <= STIFF_LIMIT or np.linalg.cond(vecs) > 1e8:
        if propagator is None:
            propagator = lambda s, C=C: scipy.linalg.expm(C * s)  # noqa: E731
        return PropagatorBasis(propagator, C.shape[0], length)
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    return ExponentialBasis(rates, vecs, length)


def matching_matrix(bases: Sequence[LayerBasis], left_rows: np.ndarray, right_rows: np.ndarray) -> np.ndarray:
    """Square matrix of boundary rows plus interface continuity rows."""
    n = len(bases)
    d = bases[0].dim
    A = np.zeros((n * d, n * d), dtype=complex)
    kl = left_rows.shape[0]
    A[:kl, :d] = left_rows @ bases[0].left()
    row = kl
    for i in range(n - 1):
        A[row : row + d, i * d : (i + 1) * d] = bases[i].right()
        A[row : row + d, (i + 1) * d : (i + 2) * d] = -bases[i + 1].left()
        row += d
    A[row:, (n - 1) * d :] = right_rows @ bases[-1].right()
    return A


def equilibrate(A: np.ndarray, sweeps: int = 4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ruiz-style scaling ``Dr A Dc``; returns ``(scaled, Dr, Dc)``."""
    dr = np.ones(A.shape[0])
    dc = np.ones(A.shape[1])
    S = np.asarray(A, dtype=complex).copy()
    for _ in range(sweeps):
        r = np.sqrt(np.max(np.abs(S), axis=1))
        r[r == 0] = 1.0
        c = np.sqrt(np.max(np.abs(S), axis=0))
        c[c == 0] = 1.0
        S = S / r[:, None] / c[None, :]
        dr /= r
        dc /= c
    return S, dr, dc


def solve_matching(
    bases: Sequence[LayerBasis],
    left_rows: np.ndarray,
    right_rows: np.ndarray,
    rhs: np.ndarray,
    eigenvalue_hint: complex | None = None,
) -> tuple[list[np.ndarray], float]:
    """Solve for per-layer coefficients; returns ``(coefficients, cond)``.

    Raises :class:`SingularityError` when the scaled matching matrix has
    condition number above :data:`COND_LIMIT`.
    """
    A = matching_matrix(bases, left_rows, right_rows)
    S, dr, dc = equilibrate(A)
    sv = scipy.linalg.svdvals(S)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if not cond <= COND_LIMIT:
        raise SingularityError(
            f"matching matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}", eigenvalue_hint
        )
    y = np.linalg.solve(S, dr * np.asarray(rhs, dtype=complex))
    x = dc * y
    d = bases[0].dim
    return [x[i * d : (i + 1) * d] for i in range(len(bases))], cond
