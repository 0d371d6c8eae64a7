"""Numerical checks of the degeneracy / zero-solution conditions and the
constants of the sufficient condition for Hölder regularity.

Suprema are estimated by deterministic structured sweeps: points on level
sets of the distance function, combined with extremal gradients and
diagonal Hessians.  A sweep over a finite witness family cannot certify a
statement quantified over all moduli of continuity; reports say so.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import NoValidAlpha
from ..geometry import Domain, DomainKind
from .families import Family, OperatorSpec, drift_field, evaluate


class Condition(str, enum.Enum):
    F3 = "F3"
    F4 = "F4"
    F5_CONSTANTS = "F5Constants"
    F6_CONSTANTS = "F6Constants"


class Verdict(str, enum.Enum):
    SUPPORTS = "Supports"
    REFUTES = "Refutes"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ConditionReport:
    condition: Condition
    table: list
    verdict: Verdict
    constants: Optional[dict] = None
    columns: tuple = ()
    witnesses: list = field(default_factory=list)
    note: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.REFUTES and not self.witnesses:
            raise ValueError("a Refutes verdict needs at least one witness row")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.table:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()


SWEEP_TOL = 1e-2
_ANGLES = 8


def points_at_distance(domain: Domain, level: float) -> np.ndarray:
    """A deterministic set of points with d(x) == level."""
    if domain.kind is DomainKind.INTERVAL:
        a, b = domain.params
        return np.array([[a + level], [b - level]])
    theta = 2 * math.pi * np.arange(_ANGLES) / _ANGLES
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if domain.kind is DomainKind.DISK:
        return (domain.params[0] - level) * ring
    r_in, r_out = domain.params
    return np.concatenate([(r_in + level) * ring, (r_out - level) * ring])


def _sweep_sup(spec: OperatorSpec, domain: Domain, levels, p_rad: float, x_rad: float) -> float:
    """max |F| over points on the given d-levels, |p| <= p_rad, diagonal |X| <= x_rad."""
    dim = domain.dim
    best = 0.0
    patterns = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=dim)))
    pts = [points_at_distance(domain, level) for level in levels]
    x = np.concatenate(pts)
    d = np.concatenate([np.full(len(p), level) for p, level in zip(pts, levels)])
    normal = x - domain.project_to_boundary(x)
    nrm = np.linalg.norm(normal, axis=1, keepdims=True)
    normal = np.divide(normal, nrm, out=np.zeros_like(normal), where=nrm > 0)
    dirs = [np.zeros_like(x), normal, -normal]
    for k in range(dim):
        e = np.zeros_like(x)
        e[:, k] = 1.0
        dirs += [e, -e]
    if spec.family is Family.DEG_DRIFT:
        b = drift_field(spec, x, d)
        bn = np.linalg.norm(b, axis=1, keepdims=True)
        ub = np.divide(b, bn, out=np.zeros_like(b), where=bn > 0)
        dirs += [ub, -ub]
    for direction in dirs:
        p = p_rad * direction
        for pat in patterns:
            X = np.broadcast_to(x_rad * pat, x.shape)
            val = np.abs(evaluate(spec, x, d, p, X))
            best = max(best, float(np.max(val)))
    return best


def _column_trend(values):
    """'decays', 'grows' or 'flat/irregular' for values ordered by decreasing parameter."""
    v = np.asarray(values, dtype=float)
    if np.all(np.diff(v) <= 1e-12 * np.maximum(np.abs(v[:-1]), 1e-300)):
        return "decays"
    if v[-1] >= v[0] > 0:
        return "grows"
    return "irregular"


def check_f3(spec: OperatorSpec, domain: Domain, gammas, deltas, levels: int = 16,
             tol: float = SWEEP_TOL) -> ConditionReport:
    """Degeneracy condition with power moduli omega(delta) = delta**gamma.

    For each gamma and delta: sup |F(x, p, X)| over d(x) <= delta,
    |p| <= omega/delta, |X| <= omega/delta**2.  Supports when every column is
    nonincreasing as delta shrinks and ends below ``tol``; Refutes when a
    column ends at or above its first value (bounded below or growing).
    """
    gammas = [float(g) for g in gammas]
    deltas = [float(x) for x in deltas]
    if not gammas:
        raise ValueError("gammas must be nonempty")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    D = domain.max_distance
    table, witnesses, growth = [], [], {}
    verdicts = []
    for g in gammas:
        column = []
        for delta in deltas:
            omega = delta ** g
            top = min(delta, D)
            lv = top * np.arange(1, levels + 1) / levels
            sup = _sweep_sup(spec, domain, lv, omega / delta, omega / delta ** 2)
            column.append(sup)
            table.append((g, delta, sup))
        trend = _column_trend(column)
        ratios = [b / a for a, b in zip(column, column[1:]) if a > 0]
        growth[g] = float(np.min(ratios)) if ratios else float("nan")
        if trend == "decays" and column[-1] <= tol:
            verdicts.append(Verdict.SUPPORTS)
        elif trend == "grows":
            verdicts.append(Verdict.REFUTES)
            witnesses += [row for row in table if row[0] == g]
        else:
            verdicts.append(Verdict.INCONCLUSIVE)
    if Verdict.REFUTES in verdicts:
        verdict = Verdict.REFUTES
    elif all(v is Verdict.SUPPORTS for v in verdicts):
        verdict = Verdict.SUPPORTS
    else:
        verdict = Verdict.INCONCLUSIVE
    note = ("finite witness family omega(delta)=delta**gamma; a sweep cannot certify the "
            "statement for every modulus of continuity")
    return ConditionReport(Condition.F3, table, verdict, columns=("gamma", "delta", "sup_value"),
                           witnesses=witnesses, note=note,
                           constants={"min_growth_per_step": growth})


def check_f4(spec: OperatorSpec, domain: Domain, samples: int, radii,
             tol: float = SWEEP_TOL) -> ConditionReport:
    """sup over the whole domain of |F(x, p, X)| with |p|, |X| <= r, for each radius r."""
    if samples < 100:
        raise ValueError("check_f4 needs at least 100 samples")
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    D = domain.max_distance
    lv = D * np.arange(1, samples + 1) / samples
    table = [(r, _sweep_sup(spec, domain, lv, r, r) if r > 0 else 0.0) for r in radii]
    column = [v for _, v in table]
    if _column_trend(column) == "decays" and column[-1] <= tol:
        verdict, witnesses = Verdict.SUPPORTS, []
    elif _column_trend(column) == "grows":
        verdict, witnesses = Verdict.REFUTES, list(table)
    else:
        verdict, witnesses = Verdict.INCONCLUSIVE, []
    return ConditionReport(Condition.F4, table, verdict, columns=("radius", "sup_value"),
                           witnesses=witnesses)


def _alpha_candidates():
    scale = 1.0
    while scale > 1e-300:
        for mant in (0.5, 0.25, 0.1):
            yield mant * scale
        scale /= 10.0


def lemma_f5_constants(sigma_lip, sigma_over_d, psi_lip, psi_over_d, L2, D,
                       beta_max: float = 0.9) -> ConditionReport:
    """Constants of the sufficient condition for the Hölder-type condition.

    L1 bounds the Lipschitz constants of sigma, psi and their ratios to d;
    alpha is the largest of 0.5, 0.25, 0.1, 0.05, ... with
    beta = alpha (1 + L1) L1 L2 <= beta_max; L = 2 L1 L2 (1 + L1 (1 + D^2)).
    a_F is left free (any positive value works).
    """
    vals = [sigma_lip, sigma_over_d, psi_lip, psi_over_d]
    if any(v < 0 for v in vals) or L2 <= 0 or D <= 0:
        raise ValueError("inputs must be nonnegative with L2 > 0 and D > 0")
    L1 = float(max(vals))
    table = []
    for alpha in _alpha_candidates():
        beta = alpha * (1 + L1) * L1 * L2
        table.append((alpha, beta))
        if beta <= beta_max:
            break
    else:
        raise NoValidAlpha(f"no alpha gives beta < 1 (L1={L1}, L2={L2})")
    if not beta < 1:
        raise NoValidAlpha(f"no alpha gives beta < 1 (L1={L1}, L2={L2})")
    L = 2 * L1 * L2 * (1 + L1 * (1 + D * D))
    constants = {"L1": L1, "L2": float(L2), "alpha": alpha, "beta": beta, "a_F": None,
                 "L": L, "D": float(D)}
    return ConditionReport(Condition.F5_CONSTANTS, table, Verdict.SUPPORTS, constants=constants,
                           columns=("alpha", "beta"),
                           note="sufficient-condition constants, not a proof of necessity")


def f6_constants(L1, L2, D):
    """(b_F, ell) for the parabolic regularity condition of Isaacs-type operators."""
    if L1 < 0 or L2 < 0 or D < 0:
        raise ValueError("inputs must be nonnegative")
    b_F = (1 + L1) * L1 * L2
    ell = 2 * L1 * L2 * (1 + L1 * (1 + D * D))
    return b_F, ell


def f6_report(L1, L2, D) -> ConditionReport:
    b_F, ell = f6_constants(L1, L2, D)
    return ConditionReport(Condition.F6_CONSTANTS, [("b_F", b_F), ("ell", ell)], Verdict.SUPPORTS,
                           constants={"L1": L1, "L2": L2, "D": D, "b_F": b_F, "ell": ell},
                           columns=("constant", "value"))
