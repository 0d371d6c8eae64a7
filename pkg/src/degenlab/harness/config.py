"""Scenario files.

A scenario is a TOML document with four tables::

    [experiment]
    kind = "collapse"          # see ExperimentKind
    grid_sizes = [64, 128, 256]
    init = "sin"               # sin | one | zero | random | closed_form
    seed = 42
    output = "out/collapse"
    # ... experiment-specific keys (see EXPERIMENT_KEYS)

    [domain]                   # or: domain = { kind = "interval", a = 0.0, b = 2.0 }
    kind = "interval"
    a = 0.0
    b = 2.0

    [operator]
    family = "deg_laplace"
    mu = 2.0
    source = { intercept = 0.0, slope = [1.0] }   # optional, f(x) = intercept + <slope, x>

    [solver]
    tol = 1e-8
    max_iter = 1000000
    layer_mode = "drop"        # drop | one_sided | ghost
    ghost_value = 0.0          # with layer_mode = "ghost"; or ghost = "source"
    T = 2.0
    snapshot_times = [0.5, 1.0]
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import tomli
import tomli_w

from ..errors import InvalidDomainParams, InvalidOperatorParams, ParseError, ValidationError
from ..geometry import Domain, DomainKind, make_domain
from ..operators import Family, OperatorSpec, make_operator
from ..scheme import LayerKind, LayerMode


class ExperimentKind(str, enum.Enum):
    COLLAPSE = "collapse"
    SUBCRITICAL = "subcritical"
    THRESHOLD_SWEEP = "threshold_sweep"
    IMPLICIT_DIRICHLET = "implicit_dirichlet"
    DYNAMIC_BC = "dynamic_bc"
    F3_TABLE = "f3_table"
    HOLDER_ESTIMATE = "holder_estimate"
    LAYER_MODE_COMPARE = "layer_mode_compare"
    CONDITION_CONSTANTS = "condition_constants"


INITS = ("sin", "one", "zero", "random", "closed_form")

# experiment-specific keys and their expected kinds
_REAL, _INT, _STR, _REALS = "real", "int", "str", "reals"
EXPERIMENT_KEYS = {
    ExperimentKind.COLLAPSE: {},
    ExperimentKind.SUBCRITICAL: {"d_min": _REAL},
    ExperimentKind.THRESHOLD_SWEEP: {"mu_values": _REALS, "init_mu": _REAL},
    ExperimentKind.IMPLICIT_DIRICHLET: {"depth": _INT},
    ExperimentKind.DYNAMIC_BC: {"window": _REALS},
    ExperimentKind.F3_TABLE: {"gammas": _REALS, "deltas": _REALS, "expect": _STR,
                              "f4_samples": _INT, "radii": _REALS},
    ExperimentKind.HOLDER_ESTIMATE: {"field": _STR, "policy": _STR, "d_max": _REAL,
                                     "near": _REALS, "expected": _REAL, "tolerance": _REAL},
    ExperimentKind.LAYER_MODE_COMPARE: {},
    ExperimentKind.CONDITION_CONSTANTS: {"sigma_lip": _REAL, "sigma_over_d": _REAL,
                                         "psi_lip": _REAL, "psi_over_d": _REAL, "L2": _REAL},
}
_BASE_EXPERIMENT_KEYS = {"kind", "grid_sizes", "init", "seed", "output"}
_SOLVER_KEYS = {"tol", "max_iter", "layer_mode", "ghost_value", "ghost", "T", "snapshot_times"}


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 10 ** 6
    T: float = 2.0
    snapshot_times: tuple = ()


@dataclass(frozen=True)
class Scenario:
    experiment: ExperimentKind
    domain: Domain
    operator: OperatorSpec
    grid_sizes: tuple
    layer_mode: LayerMode = LayerMode()
    solver: SolverSettings = SolverSettings()
    seed: int = 42
    output: str = ""
    init: str = "sin"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = self.grid_sizes
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError(f"grid sizes must be nonempty and strictly increasing, got {list(sizes)}")

    def __hash__(self):
        return hash((self.experiment, self.domain, self.grid_sizes, self.seed))


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check(value, kind, where):
    if kind == _REAL and not _is_real(value):
        raise ValidationError(f"{where} must be a finite real, got {value!r}")
    if kind == _INT and not _is_int(value):
        raise ValidationError(f"{where} must be an integer, got {value!r}")
    if kind == _STR and not isinstance(value, str):
        raise ValidationError(f"{where} must be a string, got {value!r}")
    if kind == _REALS:
        if not isinstance(value, list) or not value or not all(_is_real(v) for v in value):
            raise ValidationError(f"{where} must be a nonempty list of reals, got {value!r}")
        return tuple(float(v) for v in value)
    return float(value) if kind == _REAL else value


def _table(doc, name, required=True):
    t = doc.get(name)
    if t is None:
        if required:
            raise ValidationError(f"missing [{name}] section")
        return {}
    if not isinstance(t, dict):
        raise ValidationError(f"[{name}] must be a table")
    return t


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document; defaults are filled in."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = getattr(exc, "msg", str(exc))
        raise ParseError(f"malformed config: {msg}", getattr(exc, "lineno", None),
                         getattr(exc, "colno", None)) from None
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> Scenario:
    unknown = set(doc) - {"experiment", "domain", "operator", "solver"}
    if unknown:
        raise ValidationError(f"unknown section(s) {sorted(unknown)}; expected "
                              "experiment, domain, operator, solver")
    exp = _table(doc, "experiment")
    dom = _table(doc, "domain")
    op = _table(doc, "operator")
    sol = _table(doc, "solver", required=False)

    # experiment
    try:
        kind = ExperimentKind(exp.get("kind"))
    except ValueError:
        raise ValidationError(f"unknown experiment kind {exp.get('kind')!r}; choose from "
                              f"{[k.value for k in ExperimentKind]}") from None
    extra_keys = EXPERIMENT_KEYS[kind]
    unknown = set(exp) - _BASE_EXPERIMENT_KEYS - set(extra_keys)
    if unknown:
        raise ValidationError(f"[experiment] {kind.value} does not take key(s) {sorted(unknown)}")
    sizes = exp.get("grid_sizes", [64])
    if not isinstance(sizes, list) or not sizes or not all(_is_int(n) and n >= 2 for n in sizes):
        raise ValidationError(f"grid_sizes must be a nonempty list of integers >= 2, got {sizes!r}")
    seed = exp.get("seed", 42)
    if not _is_int(seed):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    init = exp.get("init", "sin")
    if init not in INITS:
        raise ValidationError(f"init must be one of {INITS}, got {init!r}")
    output = exp.get("output", f"degenlab_out/{kind.value}")
    if not isinstance(output, str):
        raise ValidationError("output must be a string path")
    params = {k: _check(exp[k], t, f"experiment.{k}") for k, t in extra_keys.items() if k in exp}

    # domain
    dom = dict(dom)
    dkind = dom.pop("kind", None)
    try:
        domain = make_domain(dkind, **dom)
    except InvalidDomainParams as exc:
        raise ValidationError(f"[domain] {exc}") from None

    # operator
    op = dict(op)
    family = op.pop("family", None)
    source = op.pop("source", None)
    if source is not None:
        if not isinstance(source, dict) or set(source) - {"intercept", "slope"}:
            raise ValidationError("operator.source must be a table with keys intercept, slope")
        if "slope" in source and (not isinstance(source["slope"], list)
                                  or not all(_is_real(v) for v in source["slope"])):
            raise ValidationError("operator.source.slope must be a list of reals")
        if "intercept" in source and not _is_real(source["intercept"]):
            raise ValidationError("operator.source.intercept must be a finite real")
        if len(source.get("slope", [])) > domain.dim:
            raise ValidationError("operator.source.slope is longer than the domain dimension")
    try:
        operator = make_operator(family, source=source, **op)
    except InvalidOperatorParams as exc:
        raise ValidationError(f"[operator] {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"[operator] {exc}") from None

    # solver
    unknown = set(sol) - _SOLVER_KEYS
    if unknown:
        raise ValidationError(f"[solver] unknown key(s) {sorted(unknown)}")
    tol = sol.get("tol", 1e-8)
    if not _is_real(tol) or tol <= 0:
        raise ValidationError(f"solver.tol must be a positive real, got {tol!r}")
    max_iter = sol.get("max_iter", 10 ** 6)
    if not _is_int(max_iter) or max_iter < 1:
        raise ValidationError(f"solver.max_iter must be a positive integer, got {max_iter!r}")
    T = sol.get("T", 2.0)
    if not _is_real(T) or T <= 0:
        raise ValidationError(f"solver.T must be a positive real, got {T!r}")
    snaps = sol.get("snapshot_times", [])
    if not isinstance(snaps, list) or not all(_is_real(t) and 0 <= t <= T for t in snaps):
        raise ValidationError(f"solver.snapshot_times must be reals in [0, T], got {snaps!r}")
    layer = _layer_mode(sol)
    settings = SolverSettings(float(tol), int(max_iter), float(T), tuple(float(t) for t in snaps))

    scenario = Scenario(kind, domain, operator, tuple(sizes), layer, settings, seed, output, init, params)
    _validate_semantics(scenario)
    return scenario


def _layer_mode(sol) -> LayerMode:
    name = sol.get("layer_mode", "drop")
    try:
        kind = LayerKind(name)
    except ValueError:
        raise ValidationError(f"solver.layer_mode must be drop, one_sided or ghost, got {name!r}") from None
    if kind is not LayerKind.GHOST:
        if "ghost" in sol or "ghost_value" in sol:
            raise ValidationError("ghost settings need layer_mode = \"ghost\"")
        return LayerMode(kind)
    if "ghost" in sol and "ghost_value" in sol:
        raise ValidationError("give either solver.ghost or solver.ghost_value, not both")
    if "ghost" in sol:
        if sol["ghost"] != "source":
            raise ValidationError(f"solver.ghost must be \"source\", got {sol['ghost']!r}")
        return LayerMode(kind, "source")
    value = sol.get("ghost_value", 0.0)
    if not _is_real(value):
        raise ValidationError(f"solver.ghost_value must be a finite real, got {value!r}")
    return LayerMode(kind, float(value))


def _validate_semantics(s: Scenario):
    op, kind, p = s.operator, s.experiment, s.params
    on_unit_hj_interval = (s.domain.kind is DomainKind.INTERVAL and s.domain.params == (0.0, 2.0)
                           and op.family is Family.FIRST_ORDER_HJ)
    if kind is ExperimentKind.SUBCRITICAL:
        if not on_unit_hj_interval:
            raise ValidationError("subcritical needs first_order_hj on the interval (0, 2)")
        if not op.mu < op.m:
            raise ValidationError(f"closed form requires μ<m (mu < m); got mu={op.mu}, m={op.m}")
    if s.init == "closed_form":
        if not on_unit_hj_interval:
            raise ValidationError("init = \"closed_form\" needs first_order_hj on the interval (0, 2)")
        mu_ref = p.get("init_mu", op.mu)
        if kind is ExperimentKind.THRESHOLD_SWEEP and "init_mu" not in p:
            below = [v for v in p.get("mu_values", ()) if v < op.m]
            mu_ref = min(below) if below else op.mu
        if not mu_ref < op.m:
            raise ValidationError(f"closed form requires μ<m (mu < m); got mu={mu_ref}, m={op.m}")
    if kind is ExperimentKind.THRESHOLD_SWEEP and "mu_values" in p:
        if any(v < 0 for v in p["mu_values"]):
            raise ValidationError("mu_values must be nonnegative")
    if kind is ExperimentKind.DYNAMIC_BC and "window" in p:
        w = p["window"]
        if len(w) != 2 or not w[0] < w[1]:
            raise ValidationError("window must be [t0, t1] with t0 < t1")
    if kind is ExperimentKind.F3_TABLE:
        if "expect" in p and p["expect"] not in ("supports", "refutes"):
            raise ValidationError("expect must be \"supports\" or \"refutes\"")
        for key in ("gammas", "deltas", "radii"):
            if key in p and any(v <= 0 for v in p[key]):
                raise ValidationError(f"{key} must be positive")
        if "gammas" in p and any(g > 1 for g in p["gammas"]):
            raise ValidationError("gammas must lie in (0, 1]")
        for key in ("deltas", "radii"):
            if key in p and any(b >= a for a, b in zip(p[key], p[key][1:])):
                raise ValidationError(f"{key} must be strictly decreasing")
        if p.get("f4_samples", 100) < 100:
            raise ValidationError("f4_samples must be >= 100")
    if kind is ExperimentKind.HOLDER_ESTIMATE:
        if p.get("field", "solve") not in ("solve", "closed_form", "linear"):
            raise ValidationError("field must be solve, closed_form or linear")
        if p.get("field") == "closed_form" and not on_unit_hj_interval:
            raise ValidationError("field = \"closed_form\" needs first_order_hj on (0, 2)")
        if p.get("field") == "closed_form" and not op.mu < op.m:
            raise ValidationError(f"closed form requires μ<m (mu < m); got mu={op.mu}, m={op.m}")
        if p.get("policy", "boundary") not in ("boundary", "all"):
            raise ValidationError("policy must be boundary or all")
        if "near" in p and len(p["near"]) != s.domain.dim:
            raise ValidationError("near must have the domain dimension")
        if p.get("d_max", 1.0) <= 0 or p.get("tolerance", 1.0) <= 0:
            raise ValidationError("d_max and tolerance must be positive")
    if kind is ExperimentKind.IMPLICIT_DIRICHLET and p.get("depth", 2) < 1:
        raise ValidationError("depth must be >= 1")
    if kind is ExperimentKind.CONDITION_CONSTANTS:
        if any(p.get(k, 0.0) < 0 for k in EXPERIMENT_KEYS[kind]):
            raise ValidationError("structural bounds must be nonnegative")
        if p.get("L2", 1.0) <= 0:
            raise ValidationError("L2 must be positive")


def scenario_to_dict(s: Scenario) -> dict:
    exp = {"kind": s.experiment.value, "grid_sizes": list(s.grid_sizes), "init": s.init,
           "seed": s.seed, "output": s.output}
    for k, v in s.params.items():
        exp[k] = list(v) if isinstance(v, tuple) else v
    solver = {"tol": s.solver.tol, "max_iter": s.solver.max_iter, "T": s.solver.T,
              "snapshot_times": list(s.solver.snapshot_times), "layer_mode": s.layer_mode.kind.value}
    if s.layer_mode.kind is LayerKind.GHOST:
        if s.layer_mode.ghost == "source":
            solver["ghost"] = "source"
        elif isinstance(s.layer_mode.ghost, float):
            solver["ghost_value"] = s.layer_mode.ghost
        else:
            raise ValidationError("a ghost function cannot be written to a config file")
    return {"experiment": exp, "domain": s.domain.as_dict(), "operator": s.operator.as_dict(),
            "solver": solver}


def dump_scenario(s: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(s))
