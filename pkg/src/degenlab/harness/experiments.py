"""Experiment dispatch: build grids, solve or evolve, analyse, apply thresholds."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ..analysis import (AllPairs, BoundaryPairs, ClosedFormHJ, boundary_trace, closed_form_hj1d,
                        decay_rate_fit, holder_exponent, residual_of_field)
from ..errors import DegenlabError, ValidationError
from ..geometry import DomainKind, Grid, build_grid
from ..operators import Family, check_f3, f6_constants, lemma_f5_constants
from ..scheme import DROP, Field, LayerKind, ghost
from ..solve import evolve_parabolic, solve_elliptic
from .config import ExperimentKind, Scenario
from .report import Report, Row, Threshold, decide_verdict

# Declared acceptance thresholds, one place for all experiments.
THRESHOLDS = {
    "collapse_sup": Threshold("<=", 1e-6),
    "collapse_sup_2d_control": Threshold("<=", 1e-5),  # isaacs / pucci
    "subcritical_interior_error": Threshold("<=", 0.05),
    "subcritical_sup": Threshold(">=", 0.5),
    "closed_form_residual_ratio": Threshold("in", 1.5, 2.5),
    "sweep_sub": Threshold(">=", 0.3),
    "sweep_super": Threshold("<=", 0.02),
    "implicit_trace": Threshold("<=", 0.05),
    "implicit_trace_ratio": Threshold("<", 1.0),
    "decay_rate": Threshold("in", 0.95, 1.05),
    "nodal_exp_error": Threshold("<=", 1e-6),
    "mode_gap_sub": Threshold(">=", 0.1),
}
DEFAULT_D_MIN = 0.2
# down to 2^-16 so the slowest column (gamma=0.5, value delta^0.5) can drop below the sweep tolerance
DEFAULT_DELTAS = tuple(2.0 ** -k for k in range(1, 17))
DEFAULT_GAMMAS = (0.5, 1.0)
_CONVERGED = Threshold("==", 1.0)
# Informational trace-ghost solves get a fixed budget: for mu >= threshold
# boundary data travels inward at speed ~ d^mu and Jacobi relaxation stalls.
PROBE_MAX_ITER = 100_000


def thread_count() -> int:
    raw = os.environ.get("DEGENLAB_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise ValidationError(f"DEGENLAB_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ValidationError(f"DEGENLAB_THREADS must be a positive integer, got {raw!r}")
    return k


# --- initial data -----------------------------------------------------------------

def init_function(s: Scenario, mu=None):
    """The scenario's initial profile as a function of points (M, dim)."""
    dom, kind = s.domain, s.init
    if kind == "zero":
        return lambda x: np.zeros(len(x))
    if kind == "one":
        return lambda x: np.ones(len(x))
    if kind == "closed_form":
        cf = ClosedFormHJ(s.operator.m, s.operator.mu if mu is None else mu)
        return lambda x: closed_form_hj1d(cf, np.clip(x[:, 0], 1e-12, 2 - 1e-12))
    if kind == "random":
        raise ValueError("random init is sampled per grid")
    if dom.kind is DomainKind.INTERVAL:
        a, b = dom.params
        return lambda x: np.sin(math.pi * (x[:, 0] - a) / (b - a))
    r = lambda x: np.sqrt((x ** 2).sum(axis=1))
    if dom.kind is DomainKind.DISK:
        R = dom.params[0]
        return lambda x: np.cos(0.5 * math.pi * np.minimum(r(x), R) / R)
    r_in, r_out = dom.params
    return lambda x: np.sin(math.pi * np.clip(r(x) - r_in, 0, r_out - r_in) / (r_out - r_in))


def initial_values(s: Scenario, grid: Grid, mu=None) -> np.ndarray:
    if s.init == "random":
        rng = np.random.default_rng([s.seed, grid.n])
        return rng.uniform(-1.0, 1.0, grid.size)
    return np.asarray(init_function(s, mu)(grid.coords), dtype=float)


def trace_ghost(s: Scenario, mu=None):
    """Ghost mode carrying the boundary values of the initial profile."""
    func = init_function(s, mu)
    return ghost(lambda pts: func(pts))


def _solve(s, spec, grid, init, mode):
    return solve_elliptic(spec, grid, init, mode, tol=s.solver.tol, max_iter=s.solver.max_iter)


def _probe(s, spec, grid, init, mode):
    return solve_elliptic(spec, grid, init, mode, tol=s.solver.tol,
                          max_iter=min(s.solver.max_iter, PROBE_MAX_ITER))


def _interior_sup(grid, u, d_min):
    keep = grid.d >= d_min
    return float(np.max(np.abs(u[keep]))) if np.any(keep) else float("nan")


# --- per-grid pipelines ------------------------------------------------------------
#
# Each returns (rows, fields, extras); extras feed cross-grid rows.

def _collapse(s, grid):
    name = s.experiment.value
    res = _solve(s, s.operator, grid, initial_values(s, grid), s.layer_mode)
    fam = s.operator.family
    thr = THRESHOLDS["collapse_sup_2d_control" if fam in (Family.ISAACS, Family.PUCCI)
                     else "collapse_sup"]
    rows = [Row(name, grid.n, grid.h, "converged", float(res.converged), _CONVERGED),
            Row(name, grid.n, grid.h, "sup_u", res.field.sup(), thr),
            Row(name, grid.n, grid.h, "iterations", res.iterations),
            Row(name, grid.n, grid.h, "final_residual", res.final_residual_sup)]
    return rows, {f"{grid.n}": res.field}, {}


def _subcritical(s, grid):
    name = s.experiment.value
    d_min = s.params.get("d_min", DEFAULT_D_MIN)
    cf = ClosedFormHJ(s.operator.m, s.operator.mu)
    exact = closed_form_hj1d(cf, grid.coords[:, 0])
    keep = grid.d >= d_min
    res = _solve(s, s.operator, grid, exact, s.layer_mode)
    u = res.field.values
    cf_res = residual_of_field(s.operator, grid, exact, s.layer_mode, d_min)[0]
    alt = _probe(s, s.operator, grid, exact, trace_ghost(replace(s, init="closed_form")))
    rows = [Row(name, grid.n, grid.h, "converged", float(res.converged), _CONVERGED),
            Row(name, grid.n, grid.h, "interior_error", float(np.max(np.abs(u - exact)[keep])),
                THRESHOLDS["subcritical_interior_error"]),
            Row(name, grid.n, grid.h, "sup_u", res.field.sup(), THRESHOLDS["subcritical_sup"]),
            Row(name, grid.n, grid.h, "closed_form_discrete_residual", cf_res),
            Row(name, grid.n, grid.h, "interior_error_trace_ghost",
                float(np.max(np.abs(alt.field.values - exact)[keep]))),
            Row(name, grid.n, grid.h, "trace_ghost_residual", alt.final_residual_sup),
            Row(name, grid.n, grid.h, "iterations", res.iterations)]
    fields = {f"{grid.n}": res.field, f"{grid.n}_closed_form": Field(grid, exact),
              f"{grid.n}_trace_ghost": alt.field}
    return rows, fields, {"cf_res": cf_res}


def _sweep_mu_values(s):
    return s.params.get("mu_values", (s.operator.mu,))


def _threshold_sweep(s, grid):
    name = s.experiment.value
    thr = s.operator.threshold
    mus = _sweep_mu_values(s)
    below = [m for m in mus if m < thr]
    init_mu = s.params.get("init_mu", min(below) if below else None)
    if s.init == "closed_form" and init_mu is None:
        raise ValidationError("closed-form init needs some mu below the threshold (or init_mu)")
    init = initial_values(s, grid, init_mu)
    g_mode = trace_ghost(s, init_mu)
    d_min = s.params.get("d_min", DEFAULT_D_MIN)
    rows, fields = [], {}
    for mu in mus:
        spec = replace(s.operator, mu=float(mu))
        res = _solve(s, spec, grid, init, s.layer_mode)
        alt = _probe(s, spec, grid, init, g_mode)
        t = THRESHOLDS["sweep_sub"] if mu < thr else THRESHOLDS["sweep_super"]
        rows += [Row(name, grid.n, grid.h, f"sup_u[mu={mu:g}]", res.field.sup(), t),
                 Row(name, grid.n, grid.h, f"converged[mu={mu:g}]", float(res.converged)),
                 Row(name, grid.n, grid.h, f"interior_sup_trace_ghost[mu={mu:g}]",
                     _interior_sup(grid, alt.field.values, d_min)),
                 Row(name, grid.n, grid.h, f"trace_ghost_residual[mu={mu:g}]", alt.final_residual_sup)]
        fields[f"{grid.n}_mu{mu:g}"] = res.field
        fields[f"{grid.n}_mu{mu:g}_trace_ghost"] = alt.field
    return rows, fields, {}


def _implicit_dirichlet(s, grid):
    name = s.experiment.value
    depth = s.params.get("depth", 2)
    res = _solve(s, s.operator, grid, initial_values(s, grid), s.layer_mode)
    trace, node = boundary_trace(res.field, grid, depth, s.operator.f)
    rows = [Row(name, grid.n, grid.h, "converged", float(res.converged), _CONVERGED),
            Row(name, grid.n, grid.h, f"trace_gap_depth{depth}", trace, THRESHOLDS["implicit_trace"]),
            Row(name, grid.n, grid.h, "trace_gap_node", node)]
    return rows, {f"{grid.n}": res.field}, {"trace": trace}


def _dynamic_bc(s, grid):
    name = s.experiment.value
    T = s.solver.T
    snaps = s.solver.snapshot_times or tuple(T * k / 40 for k in range(1, 41))
    traj = evolve_parabolic(s.operator, grid, initial_values(s, grid), s.layer_mode, T, snaps)
    fit = decay_rate_fit(traj, s.params.get("window", (0.0, T)))
    rows = [Row(name, grid.n, grid.h, "decay_rate", fit.exponent_or_rate, THRESHOLDS["decay_rate"]),
            Row(name, grid.n, grid.h, "decay_fit_r_squared", fit.r_squared),
            Row(name, grid.n, grid.h, "final_trace", traj.boundary_traces[-1])]
    if (s.init == "one" and not s.operator.has_source and s.layer_mode.kind is LayerKind.DROP):
        err = max(float(np.max(np.abs(f.values - math.exp(-t))))
                  for t, f in zip(traj.times, traj.snapshots))
        rows.append(Row(name, grid.n, grid.h, "nodal_error_vs_exp", err, THRESHOLDS["nodal_exp_error"]))
    fields = {f"{grid.n}": traj.snapshots[-1]}
    return rows, fields, {}


def _holder(s, grid):
    name = s.experiment.value
    p = s.params
    kind = p.get("field", "solve")
    if kind == "closed_form":
        u = closed_form_hj1d(ClosedFormHJ(s.operator.m, s.operator.mu), grid.coords[:, 0])
    elif kind == "linear":
        u = grid.coords.sum(axis=1)
    else:
        u = _solve(s, s.operator, grid, initial_values(s, grid), s.layer_mode).field.values
    if p.get("policy", "boundary") == "all":
        policy = AllPairs(seed=s.seed)
    else:
        near = p.get("near")
        if near is None and s.domain.kind is DomainKind.INTERVAL:
            near = (s.domain.params[1],)
        policy = BoundaryPairs(p.get("d_max", 0.1), near)
    fit = holder_exponent(u, grid, policy)
    thr = None
    if "expected" in p:
        tol = p.get("tolerance", 0.1)
        thr = Threshold("in", p["expected"] - tol, p["expected"] + tol)
    rows = [Row(name, grid.n, grid.h, "holder_exponent", fit.exponent_or_rate, thr),
            Row(name, grid.n, grid.h, "prefactor", fit.prefactor),
            Row(name, grid.n, grid.h, "r_squared", fit.r_squared),
            Row(name, grid.n, grid.h, "pair_count", fit.sample_count)]
    return rows, {f"{grid.n}": Field(grid, u)}, {}


def _layer_mode_compare(s, grid):
    name = s.experiment.value
    init = initial_values(s, grid)
    other = s.layer_mode if s.layer_mode.kind is LayerKind.GHOST else ghost(0.0)
    a = _solve(s, s.operator, grid, init, DROP)
    b = _solve(s, s.operator, grid, init, other)
    gap = float(np.max(np.abs(a.field.values - b.field.values)))
    if s.operator.mu >= s.operator.threshold:
        thr = Threshold("<=", 2 * s.solver.tol)
    else:
        thr = THRESHOLDS["mode_gap_sub"]
    rows = [Row(name, grid.n, grid.h, f"mode_gap[drop vs {other.describe()}]", gap, thr),
            Row(name, grid.n, grid.h, "sup_u_drop", a.field.sup()),
            Row(name, grid.n, grid.h, f"sup_u_{other.describe()}", b.field.sup())]
    fields = {f"{grid.n}_drop": a.field, f"{grid.n}_ghost": b.field}
    if s.init == "closed_form" or s.init == "sin":
        c = _probe(s, s.operator, grid, init, trace_ghost(s))
        rows.append(Row(name, grid.n, grid.h, "mode_gap[drop vs trace ghost]",
                        float(np.max(np.abs(a.field.values - c.field.values)))))
        rows.append(Row(name, grid.n, grid.h, "trace_ghost_residual", c.final_residual_sup))
        fields[f"{grid.n}_trace_ghost"] = c.field
    return rows, fields, {}


_PIPELINES = {
    ExperimentKind.COLLAPSE: _collapse,
    ExperimentKind.SUBCRITICAL: _subcritical,
    ExperimentKind.THRESHOLD_SWEEP: _threshold_sweep,
    ExperimentKind.IMPLICIT_DIRICHLET: _implicit_dirichlet,
    ExperimentKind.DYNAMIC_BC: _dynamic_bc,
    ExperimentKind.HOLDER_ESTIMATE: _holder,
    ExperimentKind.LAYER_MODE_COMPARE: _layer_mode_compare,
}


# --- grid-free experiments ---------------------------------------------------------

def _f3_rows(s):
    name = s.experiment.value
    p = s.params
    rep = check_f3(s.operator, s.domain, p.get("gammas", DEFAULT_GAMMAS), p.get("deltas", DEFAULT_DELTAS))
    rows = [Row(name, None, None, f"sup[gamma={g:g},delta={d:.17g}]", v) for g, d, v in rep.table]
    for g, ratio in rep.constants["min_growth_per_step"].items():
        rows.append(Row(name, None, None, f"min_step_ratio[gamma={g:g}]", ratio))
    expect = p.get("expect")
    thr = Threshold("==", expect.capitalize()) if expect else None
    rows.append(Row(name, None, None, "verdict", rep.verdict.value, thr))
    return rows


def _constants_rows(s):
    name = s.experiment.value
    p = s.params
    D = s.domain.max_distance
    rep = lemma_f5_constants(p.get("sigma_lip", 1.0), p.get("sigma_over_d", 1.0),
                             p.get("psi_lip", 1.0), p.get("psi_over_d", 1.0), p.get("L2", 1.0), D)
    c = rep.constants
    b_F, ell = f6_constants(c["L1"], c["L2"], D)
    return [Row(name, None, None, k, c[k]) for k in ("L1", "L2", "D", "alpha", "beta", "L")] + \
        [Row(name, None, None, "b_F", b_F), Row(name, None, None, "ell", ell)]


# --- entry point -------------------------------------------------------------------

_RECOVERABLE = (DegenlabError, ValueError, ArithmeticError)


def _error_row(s, n, h, exc):
    return Row(s.experiment.value, n, h, "error", f"{type(exc).__name__}: {exc}",
               Threshold("==", "none"), False)


def _run_grid(s, n):
    grid = build_grid(s.domain, n)
    return _PIPELINES[s.experiment](s, grid)


def run_experiment(s: Scenario) -> Report:
    """Run every grid of the scenario and assemble a report ordered by grid size."""
    start = time.perf_counter()
    rows, fields, errors = [], {}, []
    if s.experiment in _PIPELINES:
        workers = min(thread_count(), len(s.grid_sizes))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_grid, s, n) for n in s.grid_sizes]
                outcomes = [_collect(f.result) for f in futures]
        else:
            outcomes = [_collect(lambda n=n: _run_grid(s, n)) for n in s.grid_sizes]
        extras = {}
        for n, (out, exc) in zip(s.grid_sizes, outcomes):
            if exc is not None:
                h = s.domain.characteristic_length / n
                rows.append(_error_row(s, n, h, exc))
                errors.append(f"n={n}: {type(exc).__name__}: {exc}")
                continue
            r, f, e = out
            rows += r
            fields.update(f)
            extras[n] = e
        rows += _cross_grid_rows(s, extras)
    else:
        try:
            rows = _f3_rows(s) if s.experiment is ExperimentKind.F3_TABLE else _constants_rows(s)
        except _RECOVERABLE as exc:
            rows = [_error_row(s, None, None, exc)]
            errors.append(f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - start
    return Report(s, rows, decide_verdict(rows, errors), wall, fields, errors)


def _collect(call):
    try:
        return call(), None
    except _RECOVERABLE as exc:
        return None, exc


def _cross_grid_rows(s, extras):
    """Rows comparing consecutive grid sizes (both must have succeeded)."""
    name = s.experiment.value
    sizes = [n for n in s.grid_sizes if n in extras]
    rows = []
    for a, b in zip(sizes, sizes[1:]):
        h = s.domain.characteristic_length / b
        if s.experiment is ExperimentKind.SUBCRITICAL and extras[b]["cf_res"] > 0:
            rows.append(Row(name, b, h, f"closed_form_residual_ratio[{a}/{b}]",
                            extras[a]["cf_res"] / extras[b]["cf_res"],
                            THRESHOLDS["closed_form_residual_ratio"]))
        if s.experiment is ExperimentKind.IMPLICIT_DIRICHLET and extras[a]["trace"] > 0:
            rows.append(Row(name, b, h, f"trace_gap_ratio[{b}/{a}]",
                            extras[b]["trace"] / extras[a]["trace"], THRESHOLDS["implicit_trace_ratio"]))
    return rows
