"""Closed-form references and estimators for traces, exponents and rates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (DegenerateField, EmptyFilter, NonPositiveTrace, OutOfDomain,
                     SupercriticalParams)
from .geometry import Grid
from .scheme import DROP, Discretization, Field, LayerMode
from .solve import Trajectory

FIT_FLOOR = 1e-12
MAX_PAIRS = 100_000


# --- closed-form bounded solutions of u + d^mu |u'|^m = 0 on (0, 2) ---------

@dataclass(frozen=True)
class ClosedFormHJ:
    m: float
    mu: float

    def __post_init__(self):
        if not self.m > 0 or not self.mu >= 0:
            raise ValueError(f"need m > 0 and mu >= 0, got m={self.m}, mu={self.mu}")
        if not self.mu < self.m:
            raise SupercriticalParams(f"closed form requires mu < m (got m={self.m}, mu={self.mu})")


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x >= 2)):
        raise OutOfDomain("closed form is defined on the open interval (0, 2)")
    return x


def closed_form_hj1d(cf: ClosedFormHJ, x):
    """Piecewise bounded classical solution on (0, 2); left branch on (0, 1]."""
    m, mu = cf.m, cf.mu
    x = _check_x(x)
    left = x <= 1
    d = np.where(left, x, 2 - x)
    if m > 1:
        c = ((m - 1) / (m - mu)) ** (m / (m - 1))
        lo = -c * d ** ((m - mu) / (m - 1))
        hi = -c * np.abs(2 - d ** ((m - mu) / m)) ** (m / (m - 1))
    elif m < 1:
        c = ((m - mu) / (1 - m)) ** (m / (1 - m))
        q = m / (1 - m)
        s = d ** ((m - mu) / m)
        lo = -c * (3 - s) ** (-q)
        hi = -c * (1 + s) ** (-q)
    else:
        lo = -np.exp(d ** (1 - mu) / (1 - mu))
        hi = -np.exp((2 - d ** (1 - mu)) / (1 - mu))
    out = np.where(left, lo, hi)
    return float(out) if out.ndim == 0 else out


def closed_form_derivative(cf: ClosedFormHJ, x):
    """Exact u'(x) of :func:`closed_form_hj1d`, branch by branch."""
    m, mu = cf.m, cf.mu
    x = _check_x(x)
    left = x <= 1
    d = np.where(left, x, 2 - x)
    if m > 1:
        c = ((m - 1) / (m - mu)) ** (m / (m - 1))
        k = (m - mu) / (m - 1)
        s = (m - mu) / m
        lo = -c * k * d ** (k - 1)
        # u = -c (2 - d^s)^{m/(m-1)}, d = 2 - x
        hi = -c * k * (2 - d ** s) ** (1 / (m - 1)) * d ** (s - 1)
    elif m < 1:
        c = ((m - mu) / (1 - m)) ** (m / (1 - m))
        q = m / (1 - m)
        s = (m - mu) / m
        ds = d ** s
        lo = -c * q * s * d ** (s - 1) * (3 - ds) ** (-q - 1)
        hi = -c * q * s * d ** (s - 1) * (1 + ds) ** (-q - 1)
    else:
        lo = -np.exp(d ** (1 - mu) / (1 - mu)) * d ** (-mu)
        hi = -np.exp((2 - d ** (1 - mu)) / (1 - mu)) * d ** (-mu)
    out = np.where(left, lo, hi)
    return float(out) if out.ndim == 0 else out


def closed_form_residual(cf: ClosedFormHJ, x):
    """u + d^mu |u'|^m evaluated with the exact derivative."""
    x = _check_x(x)
    d = np.minimum(x, 2 - x)
    return closed_form_hj1d(cf, x) + d ** cf.mu * np.abs(closed_form_derivative(cf, x)) ** cf.m


# --- residual statistics --------------------------------------------------------

def residual_of_field(spec, grid: Grid, field, mode: LayerMode = DROP, d_min: float = 0.0):
    """(max |r|, mean |r|, node count) over nodes with d >= d_min."""
    if d_min < 0:
        raise ValueError("d_min must be nonnegative")
    u = field.values if isinstance(field, Field) else np.asarray(field, dtype=float)
    r = np.abs(Discretization(spec, grid, mode).residual(u))
    keep = grid.d >= d_min
    if not np.any(keep):
        raise EmptyFilter(f"no node has d >= {d_min}")
    return float(r[keep].max()), float(r[keep].mean()), int(keep.sum())


# --- fits -------------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    exponent_or_rate: float
    prefactor: float
    r_squared: float
    sample_count: int


def _loglog_fit(x, y) -> tuple:
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


@dataclass(frozen=True)
class AllPairs:
    max_pairs: int = MAX_PAIRS
    seed: int = 42


@dataclass(frozen=True)
class BoundaryPairs:
    """Pairs (anchor, y) where the anchor is the layer node nearest ``near``
    (every layer node when ``near`` is None) and y ranges over nodes within
    ``d_max`` of the anchor."""

    d_max: float
    near: Optional[Sequence[float]] = None


def _pairs(grid: Grid, policy):
    n = grid.size
    if isinstance(policy, AllPairs):
        total = n * (n - 1) // 2
        if total <= policy.max_pairs:
            i, j = np.triu_indices(n, k=1)
            return i, j
        rng = np.random.default_rng(policy.seed)
        i = rng.integers(0, n, size=policy.max_pairs)
        j = rng.integers(0, n, size=policy.max_pairs)
        keep = i != j
        return i[keep], j[keep]
    if isinstance(policy, BoundaryPairs):
        layer = grid.layer_ids
        if policy.near is not None:
            target = np.atleast_1d(np.asarray(policy.near, dtype=float))
            dist = np.linalg.norm(grid.coords[layer] - target, axis=1)
            layer = layer[[int(np.argmin(dist))]]
        ii, jj = [], []
        for a in layer:
            sep = np.linalg.norm(grid.coords - grid.coords[a], axis=1)
            partners = np.flatnonzero((sep > 0) & (sep <= policy.d_max * (1 + 1e-12)))
            ii.append(np.full(len(partners), a))
            jj.append(partners)
        return np.concatenate(ii), np.concatenate(jj)
    raise TypeError(f"unknown pair policy {policy!r}")


def holder_exponent(field, grid: Grid, pair_policy=AllPairs()) -> FitResult:
    """Least-squares slope of log|u(x)-u(y)| against log|x-y| over a pair set."""
    u = field.values if isinstance(field, Field) else np.asarray(field, dtype=float)
    i, j = _pairs(grid, pair_policy)
    if len(i) < 3:
        raise ValueError("need at least 3 pairs under this policy")
    du = np.abs(u[i] - u[j])
    dx = np.linalg.norm(grid.coords[i] - grid.coords[j], axis=1)
    keep = du > FIT_FLOOR
    if keep.sum() < 3:
        raise DegenerateField("all pair differences are below the fit floor; "
                              "the exponent is undefined (the field is Hölder for every alpha)")
    slope, intercept, r2 = _loglog_fit(np.log(dx[keep]), np.log(du[keep]))
    return FitResult(slope, math.exp(intercept), r2, int(keep.sum()))


def boundary_trace(field, grid: Grid, depth: int = 1, g: Optional[Callable] = None):
    """max |u - g| over nodes within depth*h of the boundary.

    ``g`` (default 0) is evaluated at the boundary point nearest each node,
    so the result measures how far the discrete solution is from the trace
    ``g`` on the boundary.  Returns (max_abs, argmax_node).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    u = field.values if isinstance(field, Field) else np.asarray(field, dtype=float)
    ids = np.flatnonzero(grid.d <= depth * grid.h * (1 + 1e-12))
    if len(ids) == 0:
        ids = grid.layer_ids
    target = np.zeros(len(ids))
    if g is not None:
        target = np.asarray(g(grid.domain.project_to_boundary(grid.coords[ids])), dtype=float)
    gap = np.abs(u[ids] - target)
    k = int(np.argmax(gap))
    return float(gap[k]), int(ids[k])


def decay_rate_fit(trajectory: Trajectory, window=(0.0, math.inf)) -> FitResult:
    """Exponential decay rate of the layer trace: minus the slope of log(trace) vs t."""
    t0, t1 = window
    t = np.asarray(trajectory.times)
    tr = np.asarray(trajectory.boundary_traces)
    sel = (t >= t0) & (t <= t1)
    if sel.sum() < 3:
        raise ValueError("need at least 3 snapshots in the window")
    if np.any(tr[sel] <= FIT_FLOOR):
        raise NonPositiveTrace("boundary trace vanishes inside the fit window")
    slope, intercept, r2 = _loglog_fit(t[sel], np.log(tr[sel]))
    return FitResult(-slope, math.exp(intercept), r2, int(sel.sum()))
