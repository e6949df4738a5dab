"""Frequency-domain diagnostics of the discretized generator.

Norms are measured in the discrete energy norm ``|z|_G^2 = w^T K w + v^T M v``.
With ``G = F^T F`` (``F = diag(U_K, U_M)``, upper Cholesky factors) the
generator is congruent to

    At = F A_h F^{-1} = [[0, S], [-S^T, -Dt]],   S = U_K U_M^{-1},
                                                 Dt = U_M^{-T} D U_M^{-1},

a skew matrix plus a negative semidefinite block, and
``|(i lam - A_h)^{-1}|_G = 1 / sigma_min(i lam - At)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import stats

from ._csv import write_table
from .errors import InsufficientDataError, NumericalError, SingularityError
from .fem import AssembledPencil
from .model import MotionKind, TransmissionConfig

__all__ = [
    "ResolventScan",
    "SpectrumResult",
    "GrowthFit",
    "AbscissaTrend",
    "congruent_generator",
    "resolvent_norm",
    "scan",
    "log_grid",
    "spectrum",
    "band_max_real",
    "conjugation_mismatch",
    "spectral_abscissa_trend",
    "abscissa_below",
    "resolved_frequency",
    "sup_envelope",
    "peak_grid",
    "growth_exponent",
    "solve_resolvent",
    "write_scan_csv",
    "write_spectrum_csv",
]

DENSE_LIMIT = 600  # state dimension up to which dense SVD is used
_SINGULAR_RTOL = 100 * np.finfo(float).eps


@dataclass
class ResolventScan:
    """Resolvent norms on a frequency grid.

    ``flags`` is ``"ok"``, ``"jittered"`` (evaluated at ``lam*(1+1e-6)``) or
    ``"singular"`` (norm is NaN and the point is excluded from ``points``).
    """

    lambdas: np.ndarray
    norms: np.ndarray
    flags: list[str]
    provenance: dict = field(default_factory=dict)

    @property
    def points(self) -> list[tuple[float, float]]:
        return [
            (float(lam), float(nrm))
            for lam, nrm, flag in zip(self.lambdas, self.norms, self.flags)
            if flag != "singular"
        ]

    def valid(self) -> tuple[np.ndarray, np.ndarray]:
        mask = np.array([f != "singular" for f in self.flags], dtype=bool)
        return self.lambdas[mask], self.norms[mask]

    def __len__(self) -> int:
        return len(self.lambdas)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    abscissa: float
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    stderr: float
    low: float
    high: float
    n_points: int
    window: tuple[float, float]


@dataclass(frozen=True)
class AbscissaTrend:
    """Per-mesh abscissae (restricted to ``cutoffs`` when given) and trend.

    ``full_abscissae`` always holds the unrestricted values.
    """

    n_dofs: tuple[int, ...]
    abscissae: tuple[float, ...]
    relative_spread: float
    slope: float
    full_abscissae: tuple[float, ...] = ()
    cutoffs: tuple[float, ...] | None = None

    @property
    def monotone(self) -> bool:
        """Abscissae move monotonically (either direction) with refinement."""
        d = np.diff(self.abscissae)
        return bool(np.all(d >= 0) or np.all(d <= 0))


@lru_cache(maxsize=4)
def _congruence_blocks(pencil: AssembledPencil):
    UM = pencil.factor_M()
    UK = pencil.factor_K()
    S = scipy.linalg.solve_triangular(UM, UK.T, trans="T", lower=False).T
    if pencil.BD is not None:
        C = scipy.linalg.solve_triangular(UM, pencil.BD.toarray().T, trans="T", lower=False).T
        Dt = C.T @ C
    else:
        Dt = scipy.linalg.solve_triangular(
            UM, scipy.linalg.solve_triangular(UM, pencil.D.toarray(), trans="T"), trans="T"
        ).T
    Dt = 0.5 * (Dt + Dt.T)
    return S, Dt


def congruent_generator(pencil: AssembledPencil) -> np.ndarray:
    """Dense ``F A_h F^{-1}`` (see module docstring)."""
    S, Dt = _congruence_blocks(pencil)
    n = pencil.n
    At = np.zeros((2 * n, 2 * n))
    At[:n, n:] = S
    At[n:, :n] = -S.T
    At[n:, n:] = -Dt
    return At


def _top_generalized_eig(A, M) -> float:
    if A.nnz == 0:
        return 0.0
    if A.shape[0] <= 64:
        return float(scipy.linalg.eigh(A.toarray(), M.toarray(), eigvals_only=True)[-1])
    v0 = np.linspace(1.0, 2.0, A.shape[0])  # deterministic ARPACK start
    return float(spla.eigsh(A, k=1, M=M, which="LM", v0=v0, return_eigenvectors=False)[0])


@lru_cache(maxsize=8)
def _generator_scale(pencil: AssembledPencil) -> tuple[float, float]:
    """``(top undamped frequency, top damping rate)`` of the pencil.

    Their sum bounds ``|At|_2``, which limits what a dense SVD can resolve;
    the sparse path only sees the frequency scale.
    """
    wmax = _top_generalized_eig(pencil.K, pencil.M)
    dmax = _top_generalized_eig(pencil.D, pencil.M)
    return math.sqrt(abs(wmax)), abs(dmax)


@lru_cache(maxsize=4)
def _sparse_parts(pencil: AssembledPencil):
    K, M, D = pencil.K, pencil.M, pencil.D
    GA = sp.bmat([[None, K], [-K, -D]], format="csc")
    G = sp.block_diag([K, M], format="csc")
    F = sp.block_diag([pencil.factor_K_sparse(), pencil.factor_M_sparse()], format="csr")
    return GA, G, F


def _dense_sigma_min(pencil: AssembledPencil, lam: float) -> float:
    At = congruent_generator(pencil)
    T = 1j * lam * np.eye(At.shape[0]) - At
    return float(scipy.linalg.svdvals(T)[-1])


def _sparse_sigma_min(pencil: AssembledPencil, lam: float) -> float:
    GA, G, F = _sparse_parts(pencil)
    B = (1j * lam * G - GA).tocsc()
    try:
        lu = spla.splu(B)
    except RuntimeError as exc:
        raise SingularityError(f"i*{lam} is an eigenvalue (LU breakdown)", 1j * lam) from exc
    n = B.shape[0]
    FT = F.T.tocsr()

    def matvec(x):
        return F @ lu.solve(FT @ np.asarray(x, dtype=complex).ravel())

    def rmatvec(x):
        return F @ lu.solve(FT @ np.asarray(x, dtype=complex).ravel(), trans="H")

    op = spla.LinearOperator((n, n), matvec=matvec, rmatvec=rmatvec, dtype=complex)
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    s = spla.svds(op, k=1, which="LM", v0=v0, return_singular_vectors=False, tol=1e-10)
    smax = float(s[0])
    if not math.isfinite(smax) or smax <= 0:
        raise SingularityError(f"i*{lam} is an eigenvalue (inverse norm overflow)", 1j * lam)
    return 1.0 / smax


def resolvent_norm(pencil: AssembledPencil, lam: float, method: str = "auto") -> float:
    """``|(i lam - A_h)^{-1}|`` in the energy norm.

    ``method`` is ``"dense"`` (complex SVD), ``"sparse"`` (ARPACK on the
    inverse with a sparse LU) or ``"auto"`` (dense up to ``DENSE_LIMIT``).
    Raises :class:`SingularityError` when ``i lam`` is (numerically) an
    eigenvalue.
    """
    lam = float(lam)
    if method == "auto":
        method = "dense" if 2 * pencil.n <= DENSE_LIMIT else "sparse"
    if method == "dense":
        smin = _dense_sigma_min(pencil, lam)
    elif method == "sparse":
        smin = _sparse_sigma_min(pencil, lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    freq, damp = _generator_scale(pencil)
    scale = abs(lam) + freq + (damp if method == "dense" else 0.0)
    if not smin > _SINGULAR_RTOL * scale:
        raise SingularityError(
            f"i*{lam:g} is within {smin:.3g} of the discrete spectrum", complex(0.0, lam)
        )
    return 1.0 / smin


def log_grid(lo: float, hi: float, per_decade: int = 64) -> np.ndarray:
    """Log-spaced grid from ``lo`` to ``hi`` inclusive."""
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def _threads() -> int:
    env = os.environ.get("KVBEAM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _scan_point(pencil: AssembledPencil, lam: float, method: str, jitter: float):
    try:
        return resolvent_norm(pencil, lam, method), "ok"
    except SingularityError:
        pass
    try:
        return resolvent_norm(pencil, lam * (1.0 + jitter), method), "jittered"
    except SingularityError:
        return float("nan"), "singular"


def scan(
    pencil: AssembledPencil,
    grid: Sequence[float],
    method: str = "auto",
    jitter: float = 1e-6,
    threads: int | None = None,
) -> ResolventScan:
    """Pointwise :func:`resolvent_norm` over a sorted grid."""
    lams = np.asarray(list(grid), dtype=float)
    if lams.size and np.any(np.diff(lams) <= 0):
        raise ValueError("grid must be strictly increasing")
    workers = threads or _threads()
    if workers > 1 and lams.size > 1:
        # warm shared caches before fanning out
        _generator_scale(pencil)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda x: _scan_point(pencil, x, method, jitter), lams))
    else:
        results = [_scan_point(pencil, x, method, jitter) for x in lams]
    norms = np.array([r[0] for r in results], dtype=float)
    flags = [r[1] for r in results]
    return ResolventScan(lams, norms, flags, {"kind": pencil.kind.value, "n_dofs": pencil.n})


def spectrum(pencil: AssembledPencil) -> SpectrumResult:
    """All eigenvalues of the generator (dense, via the congruent form)."""
    At = congruent_generator(pencil)
    try:
        ev = scipy.linalg.eigvals(At, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigensolver did not converge") from exc
    ev = ev[np.lexsort((ev.imag, ev.real))]
    return SpectrumResult(ev, float(np.max(ev.real)), {"kind": pencil.kind.value, "n_dofs": pencil.n})


def band_max_real(result: SpectrumResult, bands: Sequence[tuple[float, float]]) -> list[float]:
    """Largest real part among eigenvalues with ``lo <= Im <= hi`` per band."""
    ev = result.eigenvalues
    out = []
    for lo, hi in bands:
        sel = ev[(ev.imag >= lo) & (ev.imag <= hi)]
        out.append(float(np.max(sel.real)) if sel.size else float("nan"))
    return out


def conjugation_mismatch(eigenvalues: np.ndarray) -> float:
    """Max relative distance from each eigenvalue to the nearest conjugate."""
    ev = np.asarray(eigenvalues)
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    conj = np.conj(ev)
    worst = 0.0
    order = np.argsort(conj.real)
    cs = conj[order]
    for z in ev:
        i = np.searchsorted(cs.real, z.real)
        lo, hi = max(0, i - 8), min(cs.size, i + 8)
        d = np.min(np.abs(cs[lo:hi] - z)) if hi > lo else np.inf
        if d > 1e-6 * scale:
            d = np.min(np.abs(cs - z))
        worst = max(worst, d / max(abs(z), 1.0))
    return float(worst)


def abscissa_below(result: SpectrumResult, max_imag: float | None) -> float:
    """Largest real part among eigenvalues with ``|Im| <= max_imag``."""
    ev = result.eigenvalues
    if max_imag is None:
        return result.abscissa
    sel = ev[np.abs(ev.imag) <= max_imag]
    if not sel.size:
        raise InsufficientDataError(f"no eigenvalues with |Im| <= {max_imag:g}")
    return float(np.max(sel.real))


def resolved_frequency(config: TransmissionConfig, pencil: AssembledPencil, points_per_wavelength: float = 8.0) -> float:
    """Highest frequency whose wavelength spans ``points_per_wavelength`` elements.

    Uses the largest element and the smallest modulus: ``omega = sqrt(p) k``
    for the bar, ``omega = sqrt(q) k^2`` for the beam, ``k = 2 pi / (n h)``.
    """
    if pencil.mesh is None:
        raise ValueError("pencil carries no mesh")
    h = float(np.max(pencil.mesh.sizes))
    k = 2.0 * math.pi / (points_per_wavelength * h)
    left, right, _ = config.profiles(pencil.kind)
    mod = min(min(left.values), min(right.values))
    if pencil.kind is MotionKind.LONGITUDINAL:
        return math.sqrt(mod) * k
    return math.sqrt(mod) * k * k


def spectral_abscissa_trend(
    pencils: Sequence[AssembledPencil], cutoffs: Sequence[float] | None = None
) -> AbscissaTrend:
    """Abscissa per mesh plus spread and log-log trend against dof count.

    With ``cutoffs`` the abscissa of mesh ``i`` is taken over eigenvalues with
    ``|Im| <= cutoffs[i]`` (e.g. the mesh-resolved band).
    """
    pencils = list(pencils)
    if len(pencils) < 2:
        raise InsufficientDataError("need at least two meshes")
    if cutoffs is not None and len(cutoffs) != len(pencils):
        raise ValueError("one cutoff per pencil required")
    spectra = [spectrum(p) for p in pencils]
    full = [s.abscissa for s in spectra]
    if cutoffs is None:
        absc = full
    else:
        absc = [abscissa_below(s, c) for s, c in zip(spectra, cutoffs)]
    n = [p.n for p in pencils]
    mags = np.abs(absc)
    spread = float((mags.max() - mags.min()) / mags.mean()) if mags.mean() > 0 else float("inf")
    slope = float(np.polyfit(np.log(n), np.log(np.maximum(mags, 1e-300)), 1)[0])
    return AbscissaTrend(
        tuple(n), tuple(absc), spread, slope, tuple(full), None if cutoffs is None else tuple(map(float, cutoffs))
    )


def sup_envelope(result: ResolventScan) -> ResolventScan:
    """Running maximum ``sup_{s <= lam} |R(i s)|`` over the valid points."""
    lam, nrm = result.valid()
    env = np.maximum.accumulate(nrm) if nrm.size else nrm
    return ResolventScan(lam, env, ["envelope"] * lam.size, dict(result.provenance, envelope=True))


def peak_grid(pencil: AssembledPencil, lo: float, hi: float, per_decade: int = 64, result: SpectrumResult | None = None) -> np.ndarray:
    """Log grid on ``[lo, hi]`` merged with the eigenfrequencies inside it.

    Resonance peaks of width ``|Re z|`` fall between log-grid points; adding
    ``Im z`` of every eigenvalue in the window puts a sample on each peak.
    """
    result = spectrum(pencil) if result is None else result
    im = result.eigenvalues.imag
    peaks = np.unique(im[(im >= lo) & (im <= hi)])
    grid = np.union1d(log_grid(lo, hi, per_decade), peaks)
    # drop near-duplicates so the grid stays strictly increasing
    keep = np.concatenate([[True], np.diff(grid) > 1e-9 * grid[1:]])
    return grid[keep]


def growth_exponent(
    scan_or_points,
    window: tuple[float, float] | None = None,
    min_points: int = 8,
) -> GrowthFit:
    """Least-squares slope of ``log norm`` against ``log lam`` in ``window``."""
    if isinstance(scan_or_points, ResolventScan):
        lam, nrm = scan_or_points.valid()
    else:
        pts = np.asarray(list(scan_or_points), dtype=float).reshape(-1, 2)
        lam, nrm = pts[:, 0], pts[:, 1]
    if window is not None:
        sel = (lam >= window[0]) & (lam <= window[1])
        lam, nrm = lam[sel], nrm[sel]
    if lam.size < min_points:
        raise InsufficientDataError(f"{lam.size} points in window, need {min_points}")
    if np.ptp(lam) == 0:
        raise InsufficientDataError("all points share one frequency")
    if np.any(nrm <= 0) or np.any(lam <= 0):
        raise ValueError("growth fit needs positive frequencies and norms")
    res = stats.linregress(np.log(lam), np.log(nrm))
    tq = stats.t.ppf(0.975, lam.size - 2)
    win = (float(lam.min()), float(lam.max())) if window is None else (float(window[0]), float(window[1]))
    return GrowthFit(
        float(res.slope),
        float(res.intercept),
        float(res.stderr),
        float(res.slope - tq * res.stderr),
        float(res.slope + tq * res.stderr),
        int(lam.size),
        win,
    )


def solve_resolvent(pencil: AssembledPencil, lam: float, load: np.ndarray, f_nodal: np.ndarray):
    """Solve ``(i lam - A_h) z = (f, g)`` in Galerkin form.

    ``load`` is the assembled displacement equation right-hand side
    ``b = M g + i lam M f + D f`` (or its exact-quadrature counterpart) and
    ``f_nodal`` the displacement-slot forcing in dof coordinates.  Returns
    ``(w, v)``.
    """
    A = (pencil.K + 1j * lam * pencil.D - lam * lam * pencil.M).tocsc()
    try:
        w = spla.splu(A).solve(np.asarray(load, dtype=complex))
    except RuntimeError as exc:
        raise SingularityError(f"i*{lam} is an eigenvalue", 1j * lam) from exc
    v = 1j * lam * w - f_nodal
    return w, v


def write_scan_csv(result: ResolventScan, path) -> None:
    write_table(path, ["lambda", "norm", "flag"], zip(result.lambdas, result.norms, result.flags))


def write_spectrum_csv(result: SpectrumResult, path) -> None:
    write_table(path, ["re", "im"], ((z.real, z.imag) for z in result.eigenvalues))
