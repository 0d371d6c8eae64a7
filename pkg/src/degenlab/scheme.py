"""Monotone finite-difference discretisation of ``u + F(x, Du, D^2u) = f``.

No boundary nodes exist.  At a layer node (a stencil arm leaves the domain)
the missing value is handled by a :class:`LayerMode`:

* ``drop``: the missing arm carries no information.  First-order terms see a
  zero one-sided difference on that side (only the interior arm can act) and
  the whole second difference on that axis is omitted.  Monotone.
* ``ghost``: the missing value is ``g`` at the boundary point the arm
  crosses, used with the uniform spacing ``h``.  Monotone.
* ``one_sided``: shifted interior three-point second differences and
  linearly extrapolated first differences.  Consistent but not monotone;
  diagnostic only.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from .errors import DegenerateTimestep
from .geometry import Grid
from .operators.families import (Family, OperatorSpec, UpwindGradient, axis_sum,
                                  drift_coefficient, evaluate)

CFL_SAFETY = 0.9


class LayerKind(str, enum.Enum):
    DROP = "drop"
    ONE_SIDED = "one_sided"
    GHOST = "ghost"


@dataclass(frozen=True)
class LayerMode:
    kind: LayerKind = LayerKind.DROP
    # ghost: a real, a callable of boundary points (M, dim), or "source" (use f)
    ghost: Union[float, Callable, str, None] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        if self.kind is LayerKind.GHOST:
            g = self.ghost
            if g is None:
                object.__setattr__(self, "ghost", 0.0)
            elif isinstance(g, str):
                if g != "source":
                    raise ValueError(f"ghost must be a real, a callable or 'source', got {g!r}")
            elif not callable(g):
                if not math.isfinite(float(g)):
                    raise ValueError("ghost value must be finite")
                object.__setattr__(self, "ghost", float(g))

    @property
    def monotone(self) -> bool:
        return self.kind is not LayerKind.ONE_SIDED

    def describe(self) -> str:
        if self.kind is LayerKind.GHOST:
            g = self.ghost if isinstance(self.ghost, (str, float)) else "function"
            return f"ghost({g})"
        return self.kind.value


DROP = LayerMode(LayerKind.DROP)
ONE_SIDED = LayerMode(LayerKind.ONE_SIDED)


def ghost(value=0.0) -> LayerMode:
    return LayerMode(LayerKind.GHOST, value)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"field has {v.shape} values for a grid of {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: Grid, func) -> "Field":
        return cls(grid, grid.sample(func))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.size, float(c)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


class Stencil:
    """Index bookkeeping for one (grid, layer mode, source) combination.

    Neighbour values are gathered from the extended vector ``[u, ghosts]``;
    under ``drop`` a missing arm points back at the node itself.
    """

    def __init__(self, grid: Grid, mode: LayerMode, spec: Optional[OperatorSpec] = None):
        self.grid, self.mode = grid, mode
        n, dim = grid.size, grid.dim
        self.h = grid.h
        self_idx = np.repeat(np.arange(n)[:, None], dim, axis=1)
        miss_m, miss_p = grid.nbr_minus < 0, grid.nbr_plus < 0
        self.miss_m, self.miss_p = miss_m, miss_p
        self.im = np.where(miss_m, self_idx, grid.nbr_minus)
        self.ip = np.where(miss_p, self_idx, grid.nbr_plus)
        self.ghosts = np.zeros(0)
        self.d2_mask = ~(miss_m | miss_p)
        if mode.kind is LayerKind.GHOST:
            values = []
            offset = n
            for miss, idx, sign in ((miss_m, self.im, -1), (miss_p, self.ip, +1)):
                rows, axes = np.nonzero(miss)
                pts = np.array([grid.domain.clip_to_boundary(grid.coords[i], k, sign)
                                for i, k in zip(rows, axes)]).reshape(-1, dim)
                values.append(self._ghost_values(pts, spec))
                idx[rows, axes] = offset + np.arange(len(rows))
                offset += len(rows)
            self.ghosts = np.concatenate(values) if values else np.zeros(0)
            self.d2_mask = np.ones_like(self.d2_mask)
        elif mode.kind is LayerKind.ONE_SIDED:
            # second neighbours for shifted three-point formulas
            nm, np_ = grid.nbr_minus, grid.nbr_plus
            self.imm = np.full_like(nm, -1)
            self.ipp = np.full_like(np_, -1)
            for k in range(dim):
                ok = nm[:, k] >= 0
                self.imm[ok, k] = nm[nm[ok, k], k]
                ok = np_[:, k] >= 0
                self.ipp[ok, k] = np_[np_[ok, k], k]

    def _ghost_values(self, pts, spec):
        g = self.mode.ghost
        if len(pts) == 0:
            return np.zeros(0)
        if isinstance(g, float):
            return np.full(len(pts), g)
        if g == "source":
            if spec is None:
                raise ValueError("ghost='source' needs an operator with a source")
            return spec.f(pts)
        return np.asarray(g(pts), dtype=float) * np.ones(len(pts))

    def differences(self, u: np.ndarray):
        """One-sided first differences and second differences, each (N, dim)."""
        h = self.h
        uc = u[:, None]
        if self.mode.kind is LayerKind.ONE_SIDED:
            return self._one_sided(u)
        ext = np.concatenate((u, self.ghosts)) if self.ghosts.size else u
        um, up = ext[self.im], ext[self.ip]
        dminus = (uc - um) / h
        dplus = (up - uc) / h
        d2 = (dplus - dminus) / h
        if self.mode.kind is LayerKind.DROP:
            d2 = d2 * self.d2_mask
        return dminus, dplus, d2

    def _one_sided(self, u):
        h = self.h
        uc = u[:, None]
        um, up = u[self.im], u[self.ip]
        dminus = (uc - um) / h
        dplus = (up - uc) / h
        # extrapolate the missing arm from the interior one
        dminus = np.where(self.miss_m & ~self.miss_p, dplus, dminus)
        dplus = np.where(self.miss_p & ~self.miss_m, dminus, dplus)
        d2 = (dplus - dminus) / h
        d2 = np.where(self.d2_mask, d2, 0.0)
        shift_f = self.miss_m & (self.ipp >= 0)
        shift_b = self.miss_p & (self.imm >= 0)
        upp = u[np.where(self.ipp >= 0, self.ipp, 0)]
        umm = u[np.where(self.imm >= 0, self.imm, 0)]
        d2 = np.where(shift_f, (uc - 2 * up + upp) / h ** 2, d2)
        d2 = np.where(shift_b, (umm - 2 * um + uc) / h ** 2, d2)
        return dminus, dplus, d2


class Discretization:
    """The residual map ``u -> u + F_h(u) - f`` on a fixed grid."""

    def __init__(self, spec: OperatorSpec, grid: Grid, mode: LayerMode = DROP):
        self.spec, self.grid, self.mode = spec, grid, mode
        self.stencil = Stencil(grid, mode, spec)
        self.x = grid.coords
        self.d = grid.d
        self.f = spec.f(grid.coords)
        self.d_mu = grid.d ** spec.mu
        self._drift = drift_coefficient(spec, grid.coords, grid.d)
        self._fast_laplace = spec.family is Family.DEG_LAPLACE
        self._isaacs = self._isaacs_tables(spec, grid.dim)

    @staticmethod
    def _isaacs_tables(spec, dim):
        """Stacked controls (rows, cols) for a rectangular Isaacs table, else None."""
        if spec.family is not Family.ISAACS or len({len(r) for r in spec.controls}) != 1:
            return None
        rows, cols = len(spec.controls), len(spec.controls[0])
        flat = [c for row in spec.controls for c in row]
        sig2 = np.array([c.sigma_scale ** 2 for c in flat])[:, None]
        b = np.array([np.resize(np.asarray(c.drift, dtype=float), dim) for c in flat])
        return rows, cols, sig2, np.maximum(b, 0.0), np.maximum(-b, 0.0)

    def operator(self, u: np.ndarray) -> np.ndarray:
        dminus, dplus, d2 = self.stencil.differences(u)
        if self._fast_laplace:
            return -self.d_mu * axis_sum(d2)
        if self._isaacs is not None:
            rows, cols, sig2, bpos, bneg = self._isaacs
            vals = sig2 * axis_sum(d2)
            # axis loop: numpy reductions over a length-2 trailing axis are slow
            for k in range(d2.shape[1]):
                vals += bpos[:, k, None] * dplus[:, k] - bneg[:, k, None] * dminus[:, k]
            vals = vals.reshape(rows, cols, -1)
            return -self.d_mu * vals.max(axis=1).min(axis=0)
        return evaluate(self.spec, self.x, self.d, UpwindGradient(dminus, dplus), d2)

    def residual(self, u: np.ndarray) -> np.ndarray:
        return u + self.operator(u) - self.f

    def local_solve(self, u: np.ndarray, iterations: int = 100) -> np.ndarray:
        """Nodewise root of r_i(t) = 0 with every neighbour frozen at ``u`` (first-order HJ).

        The Godunov magnitude on axis k is pos(t - c_k)/h with c_k the smaller
        neighbour value, so r_i(t) = t + d^mu |pos(t - c)/h|^m - f_i is
        increasing in t and is bracketed by [min(f_i, min_k c_k), f_i].
        """
        if self.spec.family is not Family.FIRST_ORDER_HJ or self.mode.kind is LayerKind.ONE_SIDED:
            raise ValueError("local_solve needs first_order_hj and a monotone layer mode")
        st = self.stencil
        ext = np.concatenate((u, st.ghosts)) if st.ghosts.size else u
        um, up = ext[st.im], ext[st.ip]
        if self.mode.kind is LayerKind.DROP:
            # a dropped arm has a zero difference and never drives the magnitude
            um = np.where(st.miss_m, np.inf, um)
            up = np.where(st.miss_p, np.inf, up)
        c = np.minimum(um, up)
        f, m = self.f, self.spec.m
        lo = np.minimum(f, c.min(axis=1))
        hi = f.copy()
        scale = self.d_mu / self.grid.h ** m
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            pos = np.maximum(mid[:, None] - c, 0.0)
            above = mid + scale * np.sqrt(axis_sum(pos * pos)) ** m - f > 0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
            if np.all(hi - lo <= 1e-15 * (1.0 + np.abs(hi))):
                break
        return 0.5 * (lo + hi)

    def gradient_bound(self, u: np.ndarray) -> float:
        dminus, dplus, _ = self.stencil.differences(u)
        return float(np.max(UpwindGradient(dminus, dplus).godunov_norm()))

    def timestep(self, u: Optional[np.ndarray] = None) -> float:
        spec, h, dim = self.spec, self.grid.h, self.grid.dim
        coef = self.d_mu * spec.diffusion_scale
        rate = 1.0 + 2.0 * dim * coef / h ** 2 + self._drift * dim / h
        if spec.family is Family.FIRST_ORDER_HJ:
            # slope of a |p|^m at each node's own gradient; gradients below 1 are
            # lifted to 1 so the step still scales like h
            if u is None:
                g = 1.0
            else:
                dminus, dplus, _ = self.stencil.differences(u)
                g = np.maximum(1.0, UpwindGradient(dminus, dplus).godunov_norm())
            slope = self.d_mu * spec.m * g ** (spec.m - 1.0) * dim
            rate = rate + slope / h
        dt = CFL_SAFETY * float(np.min(1.0 / rate))
        if not math.isfinite(dt) or dt < 1e-300:
            raise DegenerateTimestep(f"time step underflow (dt={dt})")
        return dt


# --- pointwise API ------------------------------------------------------------

class GradientAtNode(NamedTuple):
    dminus: np.ndarray
    dplus: np.ndarray
    magnitude: np.ndarray  # per-axis Godunov magnitude
    norm: float


def _values(u):
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def upwind_gradient(u, grid: Grid, node: int, mode: LayerMode = DROP) -> GradientAtNode:
    """One-sided differences and Godunov magnitude at a single node."""
    dminus, dplus, _ = Stencil(grid, mode).differences(_values(u))
    g = UpwindGradient(dminus[node], dplus[node])
    mag = g.godunov_axes()
    return GradientAtNode(dminus[node], dplus[node], mag, float(np.sqrt((mag ** 2).sum())))


def second_difference(u, grid: Grid, node: int, mode: LayerMode = DROP) -> np.ndarray:
    """Per-axis second difference at a node under the given layer policy."""
    return Stencil(grid, mode).differences(_values(u))[2][node]


def discrete_residual(spec: OperatorSpec, grid: Grid, u, mode: LayerMode = DROP) -> Field:
    r = Discretization(spec, grid, mode).residual(_values(u))
    return Field(grid, r)


def cfl_timestep(spec: OperatorSpec, grid: Grid, u=None, mode: LayerMode = DROP) -> float:
    """Explicit relaxation step: 0.9 / max_i (1 + 2n c_i/h^2 + n|b_i|/h + slope_i/h)."""
    disc = Discretization(spec, grid, mode)
    return disc.timestep(None if u is None else _values(u))
