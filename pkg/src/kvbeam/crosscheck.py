"""Finite elements against the exact layered solution of the resolvent equation.

For a closed-form right-hand side ``(f, g)`` the Galerkin problem

    (K + i lam D - lam^2 M) w_h = b,   b_i = int (g + i lam f) phi_i + int c f^(k) phi_i^(k)

(``k = 1`` with ``c = a`` for the bar, ``k = 2`` with ``c = b`` for the beam) is
solved on a mesh and compared with the nodal interpolant of the exact
solution, in the discrete energy norm ``|z|_G^2 = w^T K w + v^T M v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exact import ExactSolution, ExpPoly, Forcing, ForcingPiece, exact_resolvent
from .fem import AssembledPencil, _hermite_basis, assemble
from .model import MotionKind, TransmissionConfig
from .spectral import solve_resolvent

__all__ = [
    "CrosscheckRow",
    "CrosscheckResult",
    "default_forcing",
    "galerkin_load",
    "nodal_interpolant",
    "crosscheck",
]

_LOAD_GAUSS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class CrosscheckRow:
    n_elems: int
    n_dofs: int
    discrepancy: float
    exact_norm: float


@dataclass(frozen=True)
class CrosscheckResult:
    kind: MotionKind
    lam: float
    rows: tuple[CrosscheckRow, ...]

    @property
    def orders(self) -> tuple[float, ...]:
        out = []
        for a, b in zip(self.rows, self.rows[1:]):
            out.append(math.log(a.discrepancy / b.discrepancy) / math.log(b.n_elems / a.n_elems))
        return tuple(out)

    @property
    def observed_order(self) -> float:
        """Least-squares order over all meshes."""
        n = np.log([r.n_elems for r in self.rows])
        e = np.log([r.discrepancy for r in self.rows])
        return float(-np.polyfit(n, e, 1)[0])


def default_forcing(config: TransmissionConfig, kind: MotionKind | str) -> Forcing:
    """Smooth data compatible with the boundary conditions on all of ``[0, L]``."""
    kind = MotionKind.parse(kind)
    L = config.L
    k = 2.0 * math.pi / L
    if kind is MotionKind.LONGITUDINAL:
        f = ExpPoly.sin(0.5 * k)  # vanishes at 0 and L
    else:
        f = ExpPoly.const(1.0) - ExpPoly.cos(k)  # f = f' = 0 at both ends
    g = ExpPoly.cos(3.0) + ExpPoly.poly([0.0, 1.0])
    return Forcing((ForcingPiece(0.0, L, f, g),))


def _element_basis(kind: MotionKind, xi: np.ndarray, h: float):
    """Shape functions and their order-k derivatives at reference points."""
    if kind is MotionKind.LONGITUDINAL:
        N = np.stack([1.0 - xi, xi], axis=1)
        dN = np.tile(np.array([-1.0, 1.0]) / h, (xi.size, 1))
        return N, dN
    return _hermite_basis(xi, h)


def galerkin_load(pencil: AssembledPencil, config: TransmissionConfig, lam: float, forcing: Forcing) -> np.ndarray:
    """Load vector of the displacement equation, integrated by Gauss rules."""
    mesh = pencil.mesh
    kind = pencil.kind
    order = 1 if kind is MotionKind.LONGITUDINAL else 2
    xg, wg = _LOAD_GAUSS
    xi = 0.5 * (xg + 1.0)
    wq = 0.5 * wg
    dofs = mesh.element_dofs(kind)
    b = np.zeros(pencil.n, dtype=complex)
    for e, (x0, x1) in enumerate(zip(mesh.nodes[:-1], mesh.nodes[1:])):
        h = x1 - x0
        x = x0 + h * xi
        c = config.damping(kind, 0.5 * (x0 + x1))
        N, dN = _element_basis(kind, xi, h)
        fv, gv, fk = _forcing_samples(forcing, x, order)
        loc = h * (wq * (gv + 1j * lam * fv)) @ N + h * (wq * (c * fk)) @ dN
        for i, d in enumerate(dofs[e]):
            if d >= 0:
                b[d] += loc[i]
    return b


def _forcing_samples(forcing: Forcing, x: np.ndarray, order: int):
    f = np.zeros(x.shape, dtype=complex)
    g = np.zeros(x.shape, dtype=complex)
    fk = np.zeros(x.shape, dtype=complex)
    for p in forcing.pieces:
        m = (x >= p.x0) & (x <= p.x1)
        s = x[m] - p.x0
        f[m] = p.f(s)
        g[m] = p.g(s)
        fk[m] = p.f.deriv(order)(s)
    return f, g, fk


def nodal_interpolant(pencil: AssembledPencil, sol: ExactSolution) -> np.ndarray:
    """Exact displacement (and slope, for the beam) at the free mesh dofs."""
    nodes = pencil.mesh.nodes[1:-1]
    if pencil.kind is MotionKind.LONGITUDINAL:
        return np.array([sol.fields(x)["displacement"] for x in nodes])
    out = np.empty(2 * nodes.size, dtype=complex)
    for i, x in enumerate(nodes):
        fl = sol.fields(x)
        out[2 * i] = fl["displacement"]
        out[2 * i + 1] = fl["slope"]
    return out


def _forcing_interpolant(pencil: AssembledPencil, forcing: Forcing) -> np.ndarray:
    nodes = pencil.mesh.nodes[1:-1]
    f, _ = forcing.evaluate(nodes)
    if pencil.kind is MotionKind.LONGITUDINAL:
        return f
    df = np.zeros(nodes.shape, dtype=complex)
    for p in forcing.pieces:
        m = (nodes >= p.x0) & (nodes <= p.x1)
        df[m] = p.f.deriv()(nodes[m] - p.x0)
    out = np.empty(2 * nodes.size, dtype=complex)
    out[0::2] = f
    out[1::2] = df
    return out


def _g_norm(pencil: AssembledPencil, w: np.ndarray, v: np.ndarray) -> float:
    K, M = pencil.K, pencil.M
    val = np.vdot(w, K @ w).real + np.vdot(v, M @ v).real
    return math.sqrt(max(val, 0.0))


def crosscheck(
    config: TransmissionConfig,
    kind: MotionKind | str,
    lam: float,
    n_elems: Sequence[int] = (128, 256, 512),
    forcing: Forcing | None = None,
) -> CrosscheckResult:
    """Relative G-norm gap between FEM and the interpolated exact solution."""
    kind = MotionKind.parse(kind)
    forcing = default_forcing(config, kind) if forcing is None else forcing
    sol = exact_resolvent(config, kind, lam, forcing)
    rows = []
    for n in n_elems:
        pencil = assemble(config, kind, int(n))
        load = galerkin_load(pencil, config, lam, forcing)
        fh = _forcing_interpolant(pencil, forcing)
        w, v = solve_resolvent(pencil, lam, load, fh)
        wi = nodal_interpolant(pencil, sol)
        vi = 1j * lam * wi - fh
        ref = _g_norm(pencil, wi, vi)
        gap = _g_norm(pencil, w - wi, v - vi)
        rows.append(CrosscheckRow(int(n), pencil.n, gap / ref, ref))
    return CrosscheckResult(kind, float(lam), tuple(rows))
