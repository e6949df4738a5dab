"""Conforming finite elements for the longitudinal and transversal systems.

Longitudinal motion uses piecewise-linear elements, transversal motion cubic
Hermite elements with (value, slope) nodal dofs.  Clamped/Dirichlet dofs are
eliminated; the interface conditions on displacement (and slope) hold through
shared dofs, the flux/moment/shear conditions hold weakly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError
from .model import MotionKind, TransmissionConfig

__all__ = [
    "Mesh",
    "AssembledPencil",
    "build_mesh",
    "p1_element_matrices",
    "hermite_element_matrices",
    "assemble_p1",
    "assemble_hermite",
    "assemble_longitudinal",
    "assemble_transversal",
    "assemble",
    "strain_factors",
    "energy_gram",
    "graph_norm",
    "write_coo",
]


@dataclass(frozen=True)
class Mesh:
    """Nodes on ``[0, L]``; element ``e`` spans ``nodes[e]..nodes[e+1]``."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("mesh nodes must be a strictly increasing 1-D array")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_elems(self) -> int:
        return self.nodes.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def n_dofs(self, kind: MotionKind) -> int:
        per_node = 1 if MotionKind.parse(kind) is MotionKind.LONGITUDINAL else 2
        return per_node * (self.nodes.size - 2)

    def node_index(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.nodes - x)))
        if abs(self.nodes[i] - x) > 1e-12 * max(1.0, self.nodes[-1]):
            raise KeyError(f"{x} is not a mesh node")
        return i

    def element_dofs(self, kind: MotionKind) -> np.ndarray:
        """Global dof per local dof for every element, ``-1`` for eliminated dofs."""
        n = self.nodes.size
        if MotionKind.parse(kind) is MotionKind.LONGITUDINAL:
            node_dof = np.arange(n) - 1
            node_dof[[0, -1]] = -1
            return np.stack([node_dof[:-1], node_dof[1:]], axis=1)
        w = 2 * (np.arange(n) - 1)
        s = w + 1
        w[[0, -1]] = -1
        s[[0, -1]] = -1
        return np.stack([w[:-1], s[:-1], w[1:], s[1:]], axis=1)


def build_mesh(config: TransmissionConfig, n_elems: int) -> Mesh:
    """Quasi-uniform mesh with exactly ``n_elems`` elements.

    Every point of ``config.mandatory_points()`` is a node; elements are
    distributed over the segments between them by largest remainder.
    """
    if n_elems < 4:
        raise ConfigurationError(f"n_elems must be >= 4, got {n_elems}")
    pts = np.array(config.mandatory_points())
    if pts[0] != 0.0 or pts[-1] != config.L or np.any(np.diff(pts) <= 0):
        raise ConfigurationError("mandatory mesh points are not ordered inside [0, L]")
    seg = np.diff(pts)
    if n_elems < seg.size:
        raise ConfigurationError(
            f"{n_elems} elements cannot separate {seg.size + 1} mandatory nodes"
        )
    quota = seg / config.L * n_elems
    counts = np.maximum(np.floor(quota).astype(int), 1)
    while counts.sum() < n_elems:
        # largest remaining quota first; ties resolved left to right
        counts[int(np.argmax(quota - counts))] += 1
    while counts.sum() > n_elems:
        candidates = np.where(counts > 1, quota - counts, np.inf)
        counts[int(np.argmin(candidates))] -= 1
    h = seg / counts
    if h.max() > 2.0 * h.min() * (1 + 1e-12):
        raise ConfigurationError(
            f"{n_elems} elements give element sizes {h.min():.3g}..{h.max():.3g} "
            "(more than 2x apart); increase n_elems"
        )
    parts = [np.linspace(x0, x1, c + 1)[:-1] for x0, x1, c in zip(pts[:-1], pts[1:], counts)]
    nodes = np.concatenate(parts + [pts[-1:]])
    return Mesh(nodes)


# Reference-element quadrature: 2 points for P1, 4 points for Hermite (the
# consistent Hermite mass integrand has degree 6).
_P1_GAUSS = np.polynomial.legendre.leggauss(2)
_HERMITE_GAUSS = np.polynomial.legendre.leggauss(4)


def _unit_gauss(rule):
    x, w = rule
    return 0.5 * (x + 1.0), 0.5 * w


def p1_element_matrices(h: float, p: float, a: float = 0.0):
    """Mass, stiffness and damping matrices (2x2) of one linear element."""
    xi, wq = _unit_gauss(_P1_GAUSS)
    N = np.stack([1.0 - xi, xi], axis=1)
    dN = np.tile(np.array([-1.0, 1.0]) / h, (xi.size, 1))
    Me = h * np.einsum("q,qi,qj->ij", wq, N, N)
    G = h * np.einsum("q,qi,qj->ij", wq, dN, dN)
    return Me, p * G, a * G


def _hermite_basis(xi: np.ndarray, h: float):
    N = np.stack(
        [
            1 - 3 * xi**2 + 2 * xi**3,
            h * (xi - 2 * xi**2 + xi**3),
            3 * xi**2 - 2 * xi**3,
            h * (-(xi**2) + xi**3),
        ],
        axis=1,
    )
    d2N = np.stack(
        [(-6 + 12 * xi) / h**2, (-4 + 6 * xi) / h, (6 - 12 * xi) / h**2, (-2 + 6 * xi) / h],
        axis=1,
    )
    return N, d2N


def hermite_element_matrices(h: float, q: float, b: float = 0.0):
    """Mass, stiffness and damping matrices (4x4) of one Hermite beam element.

    Local dof order is ``(w0, w0', w1, w1')``.
    """
    xi, wq = _unit_gauss(_HERMITE_GAUSS)
    N, d2N = _hermite_basis(xi, h)
    Me = h * np.einsum("q,qi,qj->ij", wq, N, N)
    G = h * np.einsum("q,qi,qj->ij", wq, d2N, d2N)
    return Me, q * G, b * G


def _scatter(elems: np.ndarray, dofs: np.ndarray, n: int) -> sp.csr_matrix:
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    vals = elems.reshape(len(elems), -1).ravel()
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A = 0.5 * (A + A.T)  # exact symmetry
    A.sum_duplicates()
    A.sort_indices()
    return A.tocsr()


def _check_coefficients(modulus: np.ndarray, damping: np.ndarray):
    if np.any(~np.isfinite(modulus)) or np.any(modulus <= 0):
        raise AssemblyError("elastic modulus must be positive on every element")
    if np.any(~np.isfinite(damping)) or np.any(damping < 0):
        raise AssemblyError("damping coefficient must be nonnegative on every element")


def assemble_p1(nodes: np.ndarray, modulus: np.ndarray, damping: np.ndarray):
    """Global ``(M, K, D)`` for linear elements with both end values eliminated."""
    mesh = nodes if isinstance(nodes, Mesh) else Mesh(nodes)
    modulus = np.broadcast_to(np.asarray(modulus, float), (mesh.n_elems,))
    damping = np.broadcast_to(np.asarray(damping, float), (mesh.n_elems,))
    _check_coefficients(modulus, damping)
    h = mesh.sizes
    xi, wq = _unit_gauss(_P1_GAUSS)
    N = np.stack([1.0 - xi, xi], axis=1)
    mass_ref = np.einsum("q,qi,qj->ij", wq, N, N)
    grad_ref = np.array([[1.0, -1.0], [-1.0, 1.0]])
    Me = h[:, None, None] * mass_ref
    Ge = (1.0 / h)[:, None, None] * grad_ref
    dofs = mesh.element_dofs(MotionKind.LONGITUDINAL)
    n = mesh.n_dofs(MotionKind.LONGITUDINAL)
    return (
        _scatter(Me, dofs, n),
        _scatter(modulus[:, None, None] * Ge, dofs, n),
        _scatter(damping[:, None, None] * Ge, dofs, n),
    )


def assemble_hermite(nodes: np.ndarray, modulus: np.ndarray, damping: np.ndarray):
    """Global ``(M, K, D)`` for Hermite elements, clamped at both ends."""
    mesh = nodes if isinstance(nodes, Mesh) else Mesh(nodes)
    modulus = np.broadcast_to(np.asarray(modulus, float), (mesh.n_elems,))
    damping = np.broadcast_to(np.asarray(damping, float), (mesh.n_elems,))
    _check_coefficients(modulus, damping)
    mats = [hermite_element_matrices(h, 1.0, 1.0) for h in mesh.sizes]
    Me = np.array([m[0] for m in mats])
    Ge = np.array([m[1] for m in mats])
    dofs = mesh.element_dofs(MotionKind.TRANSVERSAL)
    n = mesh.n_dofs(MotionKind.TRANSVERSAL)
    return (
        _scatter(Me, dofs, n),
        _scatter(modulus[:, None, None] * Ge, dofs, n),
        _scatter(damping[:, None, None] * Ge, dofs, n),
    )


def _strain_rows(mesh: Mesh, kind: MotionKind, coeff: np.ndarray) -> sp.csr_matrix:
    """``B`` with ``B^T B`` equal to the stiffness-type form weighted by ``coeff``.

    Each row is ``sqrt(coeff_e h_e w_q)`` times the gradient (P1) or curvature
    (Hermite) of the basis at one Gauss point, so ``|B w|^2`` evaluates the
    form as a sum of squares.
    """
    dofs = mesh.element_dofs(kind)
    h = mesh.sizes
    if kind is MotionKind.LONGITUDINAL:
        xi, wq = np.array([0.5]), np.array([1.0])
        local = np.tile(np.array([[-1.0, 1.0]]), (mesh.n_elems, 1, 1)) / h[:, None, None]
    else:
        xi, wq = _unit_gauss(np.polynomial.legendre.leggauss(2))
        local = np.array([_hermite_basis(xi, he)[1] for he in h])
    scale = np.sqrt(coeff[:, None] * h[:, None] * wq[None, :])
    local = local * scale[:, :, None]
    nq, k = local.shape[1], local.shape[2]
    rows = np.repeat(np.arange(mesh.n_elems * nq).reshape(mesh.n_elems, nq), k, axis=1)
    cols = np.repeat(dofs[:, None, :], nq, axis=1).reshape(mesh.n_elems, nq * k)
    vals = local.reshape(mesh.n_elems, nq * k)
    keep = (cols >= 0) & (vals != 0)
    B = sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(mesh.n_elems * nq, mesh.n_dofs(kind)),
    )
    return B.tocsr()


def strain_factors(mesh: Mesh, kind: MotionKind, modulus, damping):
    """``(B_K, B_D)`` with ``K = B_K^T B_K`` and ``D = B_D^T B_D``."""
    kind = MotionKind.parse(kind)
    modulus = np.broadcast_to(np.asarray(modulus, float), (mesh.n_elems,))
    damping = np.broadcast_to(np.asarray(damping, float), (mesh.n_elems,))
    _check_coefficients(modulus, damping)
    return _strain_rows(mesh, kind, modulus), _strain_rows(mesh, kind, damping)


def _to_upper_banded(A: sp.spmatrix, u: int) -> np.ndarray:
    A = A.tocoo()
    n = A.shape[0]
    ab = np.zeros((u + 1, n), dtype=A.dtype)
    upper = A.col >= A.row
    ab[u + A.row[upper] - A.col[upper], A.col[upper]] = A.data[upper]
    return ab


@dataclass(frozen=True, eq=False)
class AssembledPencil:
    """Mass, stiffness and damping matrices of one discretized system.

    The first-order generator acts on ``z = (w, v)`` as
    ``A_h z = (v, -M^{-1}(K w + D v))``.
    """

    M: sp.csr_matrix
    K: sp.csr_matrix
    D: sp.csr_matrix
    kind: MotionKind
    mesh: Mesh | None = None
    BK: sp.csr_matrix | None = None
    BD: sp.csr_matrix | None = None

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def half_bandwidth(self) -> int:
        return 1 if self.kind is MotionKind.LONGITUDINAL else 3

    @cached_property
    def _chol_M(self) -> np.ndarray:
        return _banded_cholesky(self.M, self.half_bandwidth, "mass")

    @cached_property
    def _chol_K(self) -> np.ndarray:
        return _banded_cholesky(self.K, self.half_bandwidth, "stiffness")

    def factor_M(self) -> np.ndarray:
        """Upper Cholesky factor ``U`` (``M = U^T U``) as a dense array."""
        return _banded_to_dense_upper(self._chol_M)

    def factor_K(self) -> np.ndarray:
        return _banded_to_dense_upper(self._chol_K)

    def factor_M_sparse(self) -> sp.csr_matrix:
        return _banded_to_sparse_upper(self._chol_M)

    def factor_K_sparse(self) -> sp.csr_matrix:
        return _banded_to_sparse_upper(self._chol_K)

    def solve_M(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve_banded((self._chol_M, False), rhs)

    def apply_generator(self, state: np.ndarray) -> np.ndarray:
        w, v = _split(self, state)
        return np.concatenate([v, -self.solve_M(self.K @ w + self.D @ v)])

    def stiffness_energy(self, w: np.ndarray) -> float:
        """``w^T K w`` evaluated as a sum of squares when a factor is known."""
        if self.BK is not None:
            r = self.BK @ w
            return float(np.real(np.vdot(r, r)))
        return float(np.real(np.vdot(w, self.K @ w)))

    def damping_energy(self, v: np.ndarray) -> float:
        if self.BD is not None:
            r = self.BD @ v
            return float(np.real(np.vdot(r, r)))
        return float(np.real(np.vdot(v, self.D @ v)))

    def apply_K(self, w: np.ndarray) -> np.ndarray:
        return self.BK.T @ (self.BK @ w) if self.BK is not None else self.K @ w

    def apply_D(self, v: np.ndarray) -> np.ndarray:
        return self.BD.T @ (self.BD @ v) if self.BD is not None else self.D @ v

    def scaled_damping(self, factor: float) -> "AssembledPencil":
        BD = None if self.BD is None else np.sqrt(factor) * self.BD
        return AssembledPencil(self.M, self.K, factor * self.D, self.kind, self.mesh, self.BK, BD)

    def undamped(self) -> "AssembledPencil":
        return self.scaled_damping(0.0)


def _banded_cholesky(A: sp.spmatrix, u: int, name: str) -> np.ndarray:
    try:
        return scipy.linalg.cholesky_banded(_to_upper_banded(A, u), lower=False)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"{name} matrix is not positive definite") from exc


def _banded_to_sparse_upper(ab: np.ndarray) -> sp.csr_matrix:
    u, n = ab.shape[0] - 1, ab.shape[1]
    diags = [ab[u - k, k:] for k in range(u + 1)]
    return sp.diags(diags, list(range(u + 1)), shape=(n, n), format="csr")


def _banded_to_dense_upper(ab: np.ndarray) -> np.ndarray:
    return _banded_to_sparse_upper(ab).toarray()


def _split(pencil: AssembledPencil, state) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(state, "w") and hasattr(state, "v"):
        w, v = np.asarray(state.w), np.asarray(state.v)
    else:
        z = np.asarray(state)
        if z.ndim != 1 or z.size != 2 * pencil.n:
            raise ValueError(f"state has size {z.size}, expected {2 * pencil.n}")
        w, v = z[: pencil.n], z[pencil.n :]
    if w.shape != (pencil.n,) or v.shape != (pencil.n,):
        raise ValueError(f"state blocks must have {pencil.n} entries each")
    return w, v


def _verify(pencil: AssembledPencil) -> AssembledPencil:
    pencil._chol_M
    pencil._chol_K
    return pencil


def assemble_longitudinal(mesh: Mesh, config: TransmissionConfig) -> AssembledPencil:
    """P1 pencil with coefficients sampled at element midpoints."""
    mid = mesh.midpoints
    p = np.array([config.modulus(MotionKind.LONGITUDINAL, x) for x in mid])
    a = np.array([config.damping(MotionKind.LONGITUDINAL, x) for x in mid])
    M, K, D = assemble_p1(mesh, p, a)
    BK, BD = strain_factors(mesh, MotionKind.LONGITUDINAL, p, a)
    return _verify(AssembledPencil(M, K, D, MotionKind.LONGITUDINAL, mesh, BK, BD))


def assemble_transversal(mesh: Mesh, config: TransmissionConfig) -> AssembledPencil:
    """Hermite-cubic pencil with coefficients sampled at element midpoints."""
    mid = mesh.midpoints
    q = np.array([config.modulus(MotionKind.TRANSVERSAL, x) for x in mid])
    b = np.array([config.damping(MotionKind.TRANSVERSAL, x) for x in mid])
    M, K, D = assemble_hermite(mesh, q, b)
    BK, BD = strain_factors(mesh, MotionKind.TRANSVERSAL, q, b)
    return _verify(AssembledPencil(M, K, D, MotionKind.TRANSVERSAL, mesh, BK, BD))


def assemble(config: TransmissionConfig, kind: MotionKind | str, n_elems: int) -> AssembledPencil:
    """Mesh and assemble in one call."""
    kind = MotionKind.parse(kind)
    mesh = build_mesh(config, n_elems)
    if kind is MotionKind.LONGITUDINAL:
        return assemble_longitudinal(mesh, config)
    return assemble_transversal(mesh, config)


def energy_gram(pencil: AssembledPencil) -> sp.csr_matrix:
    """Block-diagonal ``diag(K, M)`` realizing the energy inner product."""
    return sp.block_diag([pencil.K, pencil.M], format="csr")


def graph_norm(pencil: AssembledPencil, state) -> float:
    """``sqrt(|z|_G^2 + |A_h z|_G^2)``."""
    w, v = _split(pencil, state)
    z = np.concatenate([w, v])
    G = energy_gram(pencil)
    Az = pencil.apply_generator(z)
    return float(np.sqrt(max(np.real(np.vdot(z, G @ z)), 0.0) + max(np.real(np.vdot(Az, G @ Az)), 0.0)))


def write_coo(matrix, path) -> None:
    """Dump a matrix in MatrixMarket coordinate format with 17 significant digits."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), precision=17, symmetry="general")
