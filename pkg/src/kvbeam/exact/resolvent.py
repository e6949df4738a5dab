"""Exact resolvent solutions ``(i lam - A) (u, v) = (f, g)`` for layered data.

Wave system: ``i lam u - v = f``, ``i lam v - (p u' + a v')' = g`` with
``u(0) = u(L) = 0``; the state is ``(u, flux)`` with
``flux = p u' + a v' = kappa u' - a f'`` and ``kappa = p + i a lam``.

Beam system: ``i lam w - v = f``, ``i lam v + (q w'' + b v'')'' = g`` with
clamped ends; the state is ``(w, w', m, m')`` with
``m = q w'' + b v'' = kappa w'' - b f''`` and ``kappa = q + i b lam``.

In both cases transmission conditions are continuity of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, UnsupportedInputError
from ..model import MotionKind, TransmissionConfig, hard_failures, validate
from .forcing import ExpPoly, Forcing, particular_solution
from .layers import beam_layer, wave_layer
from .matching import choose_basis, solve_matching

__all__ = ["ExactSolution", "LayerSolution", "exact_resolvent", "layer_partition"]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


@dataclass
class LayerSolution:
    x0: float
    x1: float
    modulus: float
    damping: float
    kappa: complex
    coefficients: np.ndarray
    basis: object = field(repr=False)
    C: np.ndarray = field(repr=False)
    f: ExpPoly = field(repr=False)
    g: ExpPoly = field(repr=False)
    particular: tuple = field(repr=False)  # ExpPoly per state component
    inhomogeneity: tuple = field(repr=False)  # ExpPoly per state component

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    def state(self, s: float) -> np.ndarray:
        hom = self.basis.at(s) @ self.coefficients
        return hom + np.array([complex(p(s)) for p in self.particular])

    def rate_scale(self, lam: float) -> float:
        ev = np.abs(np.linalg.eigvals(self.C))
        return float(max(ev.max(initial=0.0), self.f.max_rate(), self.g.max_rate(), abs(lam) / math.sqrt(self.modulus)))


def layer_partition(config: TransmissionConfig, forcing: Forcing | None = None) -> list[float]:
    """Sorted points splitting ``[0, L]`` into constant-coefficient layers."""
    pts = list(config.mandatory_points())
    if forcing is not None:
        pts += [x for x in forcing.breakpoints() if 0.0 < x < config.L]
    pts.sort()
    tol = 1e-12 * max(1.0, config.L)
    out = [pts[0]]
    for x in pts[1:]:
        if x - out[-1] > tol:
            out.append(x)
    return out


class ExactSolution:
    """Layer-by-layer closed-form solution with traces and norms."""

    def __init__(self, kind: MotionKind, lam: float, config: TransmissionConfig, layers, cond: float):
        self.kind = kind
        self.lam = float(lam)
        self.config = config
        self.layers: list[LayerSolution] = layers
        self.cond = cond
        self.traces = {x: self.trace(x) for x in (config.alpha, config.beta, config.l)}
        self.norms = self._norms()

    # evaluation ---------------------------------------------------------
    def _locate(self, x: float, side: str = "right") -> tuple[LayerSolution, float]:
        x = float(x)
        if not (self.layers[0].x0 - 1e-14 <= x <= self.layers[-1].x1 + 1e-14):
            raise ValueError(f"x={x} outside [0, L]")
        if side == "left":
            for lay in self.layers:
                if lay.x0 < x <= lay.x1 + 1e-14:
                    return lay, x - lay.x0
            lay = self.layers[0]
        else:
            for lay in self.layers:
                if lay.x0 - 1e-14 <= x < lay.x1:
                    return lay, x - lay.x0
            lay = self.layers[-1]
        return lay, x - lay.x0

    def state(self, x: float, side: str = "right") -> np.ndarray:
        lay, s = self._locate(x, side)
        return lay.state(s)

    def fields(self, x: float, side: str = "right") -> dict[str, complex]:
        """Physical quantities at ``x`` (one-sided at interfaces)."""
        lay, s = self._locate(x, side)
        Y = lay.state(s)
        f = complex(lay.f(s))
        lam = self.lam
        if self.kind is MotionKind.LONGITUDINAL:
            slope = (Y[1] + lay.damping * complex(lay.f.deriv()(s))) / lay.kappa
            return {
                "displacement": Y[0],
                "velocity": 1j * lam * Y[0] - f,
                "slope": slope,
                "flux": Y[1],
            }
        curv = (Y[2] + lay.damping * complex(lay.f.deriv(2)(s))) / lay.kappa
        return {
            "displacement": Y[0],
            "velocity": 1j * lam * Y[0] - f,
            "slope": Y[1],
            "curvature": curv,
            "moment": Y[2],
            "shear": Y[3],
        }

    def trace(self, x: float) -> dict[str, dict[str, complex] | None]:
        left = self.fields(x, "left") if x > self.layers[0].x0 else None
        right = self.fields(x, "right") if x < self.layers[-1].x1 else None
        return {"left": left, "right": right}

    # quadrature ---------------------------------------------------------
    def _layer_nodes(self, lay: LayerSolution, lo: float | None = None, hi: float | None = None):
        a = lay.x0 if lo is None else max(lay.x0, lo)
        b = lay.x1 if hi is None else min(lay.x1, hi)
        if b <= a:
            return np.empty(0), np.empty(0)
        k = lay.rate_scale(self.lam)
        panels = max(2, int(math.ceil((b - a) * k / math.pi)))
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
        w = (half[:, None] * _GAUSS_W[None, :]).ravel()
        return x, w

    def _field_samples(self, lay: LayerSolution, s: np.ndarray) -> dict[str, np.ndarray]:
        hom = np.stack([lay.basis.at(t) @ lay.coefficients for t in s]) if s.size else np.zeros((0, lay.C.shape[0]))
        part = np.stack([p(s) for p in lay.particular], axis=1) if s.size else hom
        Y = hom + part
        f = lay.f(s)
        out = {"displacement": Y[:, 0], "velocity": 1j * self.lam * Y[:, 0] - f}
        if self.kind is MotionKind.LONGITUDINAL:
            out["slope"] = (Y[:, 1] + lay.damping * lay.f.deriv()(s)) / lay.kappa
            out["flux"] = Y[:, 1]
            out["strain"] = out["slope"]
        else:
            out["slope"] = Y[:, 1]
            out["curvature"] = (Y[:, 2] + lay.damping * lay.f.deriv(2)(s)) / lay.kappa
            out["moment"] = Y[:, 2]
            out["shear"] = Y[:, 3]
            out["strain"] = out["curvature"]
        return out

    def l2_squared(self, name: str, lo: float | None = None, hi: float | None = None, weighted: bool = False) -> float:
        """``int |field|^2`` over ``[lo, hi]`` (optionally weighted by the modulus)."""
        total = 0.0
        for lay in self.layers:
            x, w = self._layer_nodes(lay, lo, hi)
            if not x.size:
                continue
            vals = self._field_samples(lay, x - lay.x0)[name]
            wt = lay.modulus if weighted else 1.0
            total += wt * float(np.sum(w * np.abs(vals) ** 2))
        return total

    def _norms(self) -> dict[str, float]:
        names = ("displacement", "velocity", "slope", "flux") if self.kind is MotionKind.LONGITUDINAL else (
            "displacement", "velocity", "slope", "curvature", "moment", "shear")
        out = {n: math.sqrt(self.l2_squared(n)) for n in names}
        out["state"] = math.sqrt(self.l2_squared("strain", weighted=True) + self.l2_squared("velocity"))
        return out

    def energy_norm(self) -> float:
        return self.norms["state"]

    # residual checks ----------------------------------------------------
    def ode_residual(self, points=None, n_points: int = 7) -> float:
        """Max relative residual of ``Y' = C Y + F`` by 4th-order differences."""
        worst = 0.0
        for lay in self.layers:
            k = lay.rate_scale(self.lam)
            if points is None:
                # golden-ratio offsets avoid probe grids commensurate with the waves
                frac = np.mod(0.5 + 0.6180339887498949 * np.arange(n_points), 1.0)
                ss = lay.length * (0.05 + 0.9 * frac)
            else:
                ss = [x - lay.x0 for x in points if lay.x0 < x < lay.x1]
            d = 1e-3 * min(lay.length / 4, 1.0 / max(k, 1e-12))
            errs, scales = [], []
            for s in ss:
                d_eff = min(d, s / 3, (lay.length - s) / 3)
                Y = [lay.state(s + j * d_eff) for j in (-2, -1, 1, 2)]
                dY = (Y[0] - 8 * Y[1] + 8 * Y[2] - Y[3]) / (12 * d_eff)
                F = np.array([complex(p(s)) for p in lay.inhomogeneity])
                Ys = lay.state(s)
                errs.append(np.abs(dY - (lay.C @ Ys + F)))
                scales.append(np.abs(lay.C) @ np.abs(Ys) + np.abs(F))
            if not errs:
                continue
            # each component relative to its own size across the layer
            scale = np.max(scales, axis=0)
            scale = np.maximum(scale, 1e-14 * scale.max() + 1e-300)
            worst = max(worst, float(np.max(np.max(errs, axis=0) / scale)))
        return worst

    def _component_scale(self) -> np.ndarray:
        vals = []
        for lay in self.layers:
            vals.append(np.abs(lay.state(0.0)))
            vals.append(np.abs(lay.state(lay.length)))
        return np.max(vals, axis=0)

    def transmission_residual(self) -> float:
        """Max relative state jump over interior layer interfaces."""
        scale = np.maximum(self._component_scale(), 1e-300)
        worst = 0.0
        for a, b in zip(self.layers, self.layers[1:]):
            jump = np.abs(a.state(a.length) - b.state(0.0))
            worst = max(worst, float(np.max(jump / scale)))
        return worst

    def boundary_residual(self) -> float:
        k = 1 if self.kind is MotionKind.LONGITUDINAL else 2
        scale = np.maximum(self._component_scale(), 1e-300)
        left = np.abs(self.layers[0].state(0.0))[:k] / scale[:k]
        right = np.abs(self.layers[-1].state(self.layers[-1].length))[:k] / scale[:k]
        return float(max(left.max(), right.max()))

    @property
    def coefficients(self) -> list[np.ndarray]:
        return [lay.coefficients for lay in self.layers]


def _layer_system(kind: MotionKind, lam: float, mod: float, damp: float, f: ExpPoly, g: ExpPoly):
    """Companion matrix, propagator, particular state and inhomogeneity."""
    kappa = complex(mod, damp * lam)
    if kind is MotionKind.LONGITUDINAL:
        C = np.array([[0.0, 1.0 / kappa], [-lam * lam, 0.0]], dtype=complex)
        rhs = damp * f.deriv(2) - 1j * lam * f - g
        up = particular_solution([kappa, 0.0, lam * lam], rhs)
        part = (up, kappa * up.deriv() - damp * f.deriv())
        inh = ((damp / kappa) * f.deriv(), -1j * lam * f - g)
        prop = lambda s: wave_layer(lam, mod, damp, s).matrix  # noqa: E731
    else:
        C = np.zeros((4, 4), dtype=complex)
        C[0, 1] = 1.0
        C[1, 2] = 1.0 / kappa
        C[2, 3] = 1.0
        C[3, 0] = lam * lam
        rhs = damp * f.deriv(4) + 1j * lam * f + g
        wp = particular_solution([kappa, 0.0, 0.0, 0.0, -lam * lam], rhs)
        part = (
            wp,
            wp.deriv(),
            kappa * wp.deriv(2) - damp * f.deriv(2),
            kappa * wp.deriv(3) - damp * f.deriv(3),
        )
        inh = (ExpPoly.zero(), (damp / kappa) * f.deriv(2), ExpPoly.zero(), 1j * lam * f + g)
        prop = lambda s: beam_layer(lam, mod, damp, s).matrix  # noqa: E731
    return kappa, C, prop, part, inh


def exact_resolvent(
    config: TransmissionConfig,
    kind: MotionKind | str,
    lam: float,
    forcing: Forcing | None = None,
) -> ExactSolution:
    """Solve the resolvent equation at ``i lam`` exactly for layered data.

    Raises :class:`SingularityError` if ``i lam`` is (numerically) an
    eigenvalue and :class:`UnsupportedInputError` for data outside the
    closed-form family or configurations with breakpoints other than
    ``alpha``, ``beta``, ``l``.
    """
    kind = MotionKind.parse(kind)
    forcing = Forcing.zero() if forcing is None else forcing
    if not isinstance(forcing, Forcing):
        raise UnsupportedInputError("forcing must be a Forcing of closed-form pieces")
    report = validate(config, kind)
    bad = hard_failures(report)
    if bad:
        raise ConfigurationError("; ".join(f"{c.name}: {c.detail}" for c in bad))
    if not report.exact_eligible:
        raise UnsupportedInputError("coefficients must only jump at alpha, beta and l")
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError("lam must be finite")
    for p in forcing.pieces:
        if p.x0 < -1e-12 or p.x1 > config.L + 1e-12:
            raise UnsupportedInputError("forcing piece outside [0, L]")

    pts = layer_partition(config, forcing)
    layers = []
    for x0, x1 in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (x0 + x1)
        mod = config.modulus(kind, mid)
        damp = config.damping(kind, mid)
        f, g = forcing.on(x0, x1)
        kappa, C, prop, part, inh = _layer_system(kind, lam, mod, damp, f, g)
        basis = choose_basis(C, x1 - x0, prop)
        layers.append(
            LayerSolution(x0, x1, mod, damp, kappa, np.zeros(C.shape[0], complex), basis, C, f, g, part, inh)
        )

    d = layers[0].C.shape[0]
    k = d // 2
    E = np.eye(d, dtype=complex)[:k]
    rhs = [-(E @ np.array([complex(p(0.0)) for p in layers[0].particular]))]
    for a, b in zip(layers, layers[1:]):
        ya = np.array([complex(p(a.length)) for p in a.particular])
        yb = np.array([complex(p(0.0)) for p in b.particular])
        rhs.append(yb - ya)
    last = layers[-1]
    rhs.append(-(E @ np.array([complex(p(last.length)) for p in last.particular])))
    coeffs, cond = solve_matching([lay.basis for lay in layers], E, E, np.concatenate(rhs), 1j * lam)
    for lay, c in zip(layers, coeffs):
        lay.coefficients = c
    return ExactSolution(kind, lam, config, layers, cond)
