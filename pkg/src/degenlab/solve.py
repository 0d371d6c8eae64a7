"""Steady states by pseudo-time relaxation and explicit parabolic evolution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import NonFiniteValue
from .geometry import Grid
from .operators.families import Family, OperatorSpec
from .scheme import DROP, Discretization, Field, LayerMode

DIVERGENCE_FACTOR = 1e6


@dataclass
class SolveResult:
    field: Field
    iterations: int
    final_residual_sup: float
    converged: bool
    residual_history: np.ndarray
    tol: float = 0.0

    def __post_init__(self):
        if len(self.residual_history) == 0:
            raise ValueError("residual history must be nonempty")


@dataclass
class Trajectory:
    times: List[float]
    snapshots: List[Field] = field(repr=False)
    sup_norms: List[float]
    boundary_traces: List[float]

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.snapshots) == len(self.sup_norms) == len(self.boundary_traces) == n):
            raise ValueError("trajectory columns must have equal length")
        if n == 0 or self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")


def _init_values(grid, init):
    u = init.values if isinstance(init, Field) else np.asarray(init, dtype=float)
    if u.shape != (grid.size,):
        raise ValueError(f"init has shape {u.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(u)):
        raise ValueError("init must be finite")
    return u.copy()


def solve_elliptic(spec: OperatorSpec, grid: Grid, init, mode: LayerMode = DROP,
                   tol: float = 1e-8, max_iter: int = 10 ** 6) -> SolveResult:
    """Jacobi pseudo-time relaxation ``u <- u - dt * r(u)`` until sup|r| <= tol.

    For monotone layer modes the update is a sup-norm contraction with factor
    at most ``1 - dt``.  First-order HJ with m < 1 replaces the explicit
    step by the nodal solve of :meth:`Discretization.local_solve`.  Returns
    the best iterate with ``converged=False`` when ``max_iter`` is
    exhausted; raises :class:`NonFiniteValue` on blow-up.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = _init_values(grid, init)
    disc = Discretization(spec, grid, mode)
    adaptive = spec.family is Family.FIRST_ORDER_HJ
    # |p|^m with m < 1 has no Lipschitz bound at p = 0, so no explicit step is
    # monotone there; those runs use the nodal exact solve instead
    local = adaptive and spec.m < 1 and mode.monotone
    dt = None if adaptive else disc.timestep()
    limit = DIVERGENCE_FACTOR * (1.0 + float(np.max(np.abs(u))))
    history = []
    best_u, best_res = u, math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = disc.residual(u)
        res = float(np.max(np.abs(r)))
        history.append(res)
        if not math.isfinite(res):
            raise NonFiniteValue(f"non-finite residual at iteration {it}", it, float(np.max(np.abs(u))))
        if res < best_res:
            best_u, best_res = u, res
        if res <= tol:
            converged = True
            break
        if local:
            u = disc.local_solve(u)
        else:
            step = disc.timestep(u) if adaptive else dt
            u = u - step * r
        sup = float(np.max(np.abs(u)))
        if not math.isfinite(sup) or sup > limit:
            raise NonFiniteValue(f"iteration diverged at step {it}: sup|u| = {sup:.3e}", it, sup)
    out = u if converged else best_u
    return SolveResult(Field(grid, out), it, res if converged else best_res, converged,
                       np.asarray(history), tol)


def _layer_trace(grid, u):
    ids = grid.layer_ids
    return float(np.max(np.abs(u[ids]))) if len(ids) else 0.0


def evolve_parabolic(spec: OperatorSpec, grid: Grid, init, mode: LayerMode = DROP,
                     T: float = 1.0, snapshot_times=None) -> Trajectory:
    """Explicit evolution of ``u_t + u + F(x, Du, D^2u) = f`` up to time T.

    Steps have the relaxation size and are clipped to land on every snapshot
    time.  The zeroth-order term is integrated exactly over each step,
    ``u <- e^{-dt} u + (1 - e^{-dt}) (f - F_h(u))``, which keeps the update
    monotone under the same step restriction and reproduces ``e^{-t}`` for
    spatially constant data.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    targets = sorted({float(t) for t in (() if snapshot_times is None else snapshot_times)} | {float(T)})
    if targets[0] < 0 or targets[-1] > T:
        raise ValueError("snapshot times must lie in [0, T]")
    targets = [t for t in targets if t > 0]
    u = _init_values(grid, init)
    disc = Discretization(spec, grid, mode)
    adaptive = spec.family is Family.FIRST_ORDER_HJ
    dt_fixed = None if adaptive else disc.timestep()
    limit = DIVERGENCE_FACTOR * (1.0 + float(np.max(np.abs(u))))

    times, snaps, sups, traces = [0.0], [Field(grid, u)], [float(np.max(np.abs(u)))], [_layer_trace(grid, u)]
    t, step_count = 0.0, 0
    for target in targets:
        while t < target:
            dt = disc.timestep(u) if adaptive else dt_fixed
            if t + dt >= target * (1 - 1e-14):
                dt, t_next = target - t, target
            else:
                t_next = t + dt
            decay = math.exp(-dt)
            u = decay * u + (1.0 - decay) * (disc.f - disc.operator(u))
            t = t_next
            step_count += 1
            sup = float(np.max(np.abs(u)))
            if not math.isfinite(sup) or sup > limit:
                raise NonFiniteValue(f"evolution diverged at t={t:.6g}", step_count, sup)
        times.append(t)
        snaps.append(Field(grid, u))
        sups.append(float(np.max(np.abs(u))))
        traces.append(_layer_trace(grid, u))
    return Trajectory(times, snaps, sups, traces)
