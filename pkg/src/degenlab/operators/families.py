"""Boundary-degenerate operator families F(x, p, X).

Every family has the form ``d(x)**mu * (something elliptic)``; the equation is
``u + F(x, grad u, hess u) = f(x)``.  Hessians are diagonal: ``X`` is passed as
the per-axis second derivatives, shape ``(N, dim)``.

The gradient argument is either a plain array ``p`` of shape ``(N, dim)`` or
an :class:`UpwindGradient` holding one-sided differences.  In the latter case
each first-order term picks the arm that keeps the discrete operator
nonincreasing in neighbour values (Godunov for ``|p|**m``, sign-of-drift
upwinding for transport terms).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidOperatorParams


def axis_sum(a):
    """Sum over the last (short) axis; much faster than ``a.sum(-1)`` for dim <= 3."""
    a = np.asarray(a)
    out = a[..., 0].copy()
    for k in range(1, a.shape[-1]):
        out += a[..., k]
    return out


class Family(str, enum.Enum):
    DEG_LAPLACE = "deg_laplace"
    DEG_DRIFT = "deg_drift"
    ISAACS = "isaacs"
    PUCCI = "pucci"
    FIRST_ORDER_HJ = "first_order_hj"


SECOND_ORDER = {Family.DEG_LAPLACE, Family.DEG_DRIFT, Family.ISAACS, Family.PUCCI}


@dataclass(frozen=True)
class Control:
    """One (lambda, theta) entry of an Isaacs table: diffusion ``sigma_scale**2 * I`` and a constant drift."""

    sigma_scale: float
    drift: tuple


@dataclass(frozen=True)
class AffineSource:
    """``f(x) = intercept + <slope, x>``; a constant source has zero slope."""

    intercept: float = 0.0
    slope: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        out = np.full(x.shape[0], float(self.intercept))
        for k, s in enumerate(self.slope):
            out = out + s * x[:, k]
        return out

    @property
    def is_zero(self):
        return self.intercept == 0 and not any(self.slope)


@dataclass(frozen=True)
class UpwindGradient:
    """One-sided differences ``dminus = (u_i - u_{i-1})/h`` and ``dplus = (u_{i+1} - u_i)/h`` per axis."""

    dminus: np.ndarray
    dplus: np.ndarray

    def godunov_axes(self):
        """Per-axis Godunov magnitude max(pos(D-), neg(D+))."""
        return np.maximum(np.maximum(self.dminus, 0.0), np.maximum(-self.dplus, 0.0))

    def godunov_norm(self):
        return np.sqrt(axis_sum(self.godunov_axes() ** 2))

    def transport(self, b):
        """Monotone approximation of <b, p>: forward arm where b > 0, backward where b < 0."""
        return axis_sum(np.maximum(b, 0.0) * self.dplus - np.maximum(-b, 0.0) * self.dminus)


@dataclass(frozen=True)
class OperatorSpec:
    family: Family
    mu: float
    # deg_drift
    tau: float = 0.0
    drift_scale: float = 1.0
    radius: float = 1.0
    center: tuple = (0.0,)
    extension: str = "odd_cubic"
    # pucci
    lam: float = 1.0
    Lam: float = 1.0
    extremal: str = "max"
    # isaacs: controls[theta][lambda]
    controls: tuple = ()
    # first_order_hj
    m: float = 2.0
    source: Optional[Callable] = field(default=None, compare=False)
    source_params: Optional[dict] = None

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[0] if x.ndim else 1
        if self.source is None:
            return np.zeros(n)
        return np.asarray(self.source(x), dtype=float) * np.ones(n)

    @property
    def has_source(self) -> bool:
        if self.source is None:
            return False
        return not getattr(self.source, "is_zero", False)

    @property
    def diffusion_scale(self) -> float:
        """Largest diffusion coefficient in front of ``d**mu * X_kk``."""
        if self.family is Family.FIRST_ORDER_HJ:
            return 0.0
        if self.family is Family.PUCCI:
            return self.Lam
        if self.family is Family.ISAACS:
            return max(c.sigma_scale ** 2 for row in self.controls for c in row)
        return 1.0

    @property
    def threshold(self) -> float:
        """Degeneracy exponent separating collapse (mu >= threshold) from nontrivial solutions."""
        return self.m if self.family is Family.FIRST_ORDER_HJ else 2.0

    def as_dict(self) -> dict:
        out = {"family": self.family.value, "mu": self.mu}
        if self.family is Family.DEG_DRIFT:
            out.update(tau=self.tau, drift_scale=self.drift_scale, radius=self.radius,
                       center=list(self.center), extension=self.extension)
        elif self.family is Family.PUCCI:
            out.update(lam=self.lam, Lam=self.Lam, extremal=self.extremal)
        elif self.family is Family.ISAACS:
            out["controls"] = [[{"sigma": c.sigma_scale, "drift": list(c.drift)} for c in row]
                               for row in self.controls]
        elif self.family is Family.FIRST_ORDER_HJ:
            out["m"] = self.m
        if self.source_params is not None:
            out["source"] = dict(self.source_params)
        return out


_EXTENSIONS = ("odd_cubic", "even_cubic")


def make_operator(family, source=None, **params) -> OperatorSpec:
    """Validate family parameters and build an :class:`OperatorSpec`.

    ``source`` may be ``None``, a callable of node coordinates ``(N, dim)``,
    or a dict ``{"intercept": c, "slope": [...]}``.
    """
    try:
        family = Family(family)
    except ValueError:
        raise InvalidOperatorParams(f"unknown operator family {family!r}") from None

    allowed = {
        Family.DEG_LAPLACE: {"mu"},
        Family.DEG_DRIFT: {"mu", "tau", "drift_scale", "radius", "center", "extension"},
        Family.ISAACS: {"mu", "controls"},
        Family.PUCCI: {"mu", "lam", "Lam", "extremal"},
        Family.FIRST_ORDER_HJ: {"mu", "m"},
    }[family]
    unknown = set(params) - allowed
    if unknown:
        raise InvalidOperatorParams(f"{family.value} does not take parameter(s) {sorted(unknown)}")
    if "mu" not in params:
        raise InvalidOperatorParams(f"{family.value} requires mu")

    def real(name, default=None):
        v = params.get(name, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InvalidOperatorParams(f"{name} must be a finite real, got {v!r}")
        return float(v)

    kw = {"mu": real("mu")}
    if kw["mu"] < 0:
        raise InvalidOperatorParams(f"mu must be >= 0, got {kw['mu']}")

    if family is Family.DEG_DRIFT:
        kw["tau"] = real("tau", 0.0)
        kw["drift_scale"] = real("drift_scale", 1.0)
        kw["radius"] = real("radius", 1.0)
        if kw["tau"] < 0:
            raise InvalidOperatorParams(f"tau must be >= 0, got {kw['tau']}")
        if kw["radius"] <= 0:
            raise InvalidOperatorParams("radius must be positive")
        center = params.get("center", (0.0,))
        try:
            kw["center"] = tuple(float(c) for c in np.atleast_1d(center))
        except (TypeError, ValueError):
            raise InvalidOperatorParams(f"bad center {center!r}") from None
        ext = params.get("extension", "odd_cubic")
        if ext not in _EXTENSIONS:
            raise InvalidOperatorParams(f"extension must be one of {_EXTENSIONS}, got {ext!r}")
        kw["extension"] = ext
    elif family is Family.PUCCI:
        kw["lam"] = real("lam", 1.0)
        kw["Lam"] = real("Lam", 1.0)
        if not 0 < kw["lam"] <= kw["Lam"]:
            raise InvalidOperatorParams(f"Pucci needs 0 < lam <= Lam, got lam={kw['lam']}, Lam={kw['Lam']}")
        ext = params.get("extremal", "max")
        if ext not in ("max", "min"):
            raise InvalidOperatorParams(f"extremal must be 'max' or 'min', got {ext!r}")
        kw["extremal"] = ext
    elif family is Family.ISAACS:
        kw["controls"] = _controls(params.get("controls"))
    elif family is Family.FIRST_ORDER_HJ:
        kw["m"] = real("m", 2.0)
        if kw["m"] <= 0:
            raise InvalidOperatorParams(f"m must be > 0, got {kw['m']}")

    src_params = None
    if isinstance(source, dict):
        src_params = dict(source)
        try:
            source = AffineSource(float(source.get("intercept", 0.0)),
                                  tuple(float(s) for s in source.get("slope", ())))
        except (TypeError, ValueError):
            raise InvalidOperatorParams(f"bad source {src_params!r}") from None
        if not all(math.isfinite(v) for v in (source.intercept, *source.slope)):
            raise InvalidOperatorParams("source coefficients must be finite")
    elif source is not None and not callable(source):
        raise InvalidOperatorParams("source must be callable, a dict, or None")
    return OperatorSpec(family=family, source=source, source_params=src_params, **kw)


def _controls(table):
    if table is None:
        raise InvalidOperatorParams("isaacs requires a control table")
    try:
        rows = []
        for row in table:
            entries = []
            for c in row:
                if isinstance(c, Control):
                    entries.append(c)
                    continue
                if isinstance(c, dict):
                    sigma, drift = c["sigma"], c.get("drift", ())
                else:
                    sigma, drift = c
                drift = tuple(float(v) for v in np.atleast_1d(drift))
                sigma = float(sigma)
                if not all(math.isfinite(v) for v in (sigma, *drift)):
                    raise ValueError
                entries.append(Control(sigma, drift))
            if not entries:
                raise InvalidOperatorParams("empty control row")
            rows.append(tuple(entries))
    except (TypeError, ValueError, KeyError):
        raise InvalidOperatorParams(f"malformed control table {table!r}") from None
    if not rows:
        raise InvalidOperatorParams("control table must be nonempty")
    return tuple(rows)


# --- drift of the Laplace-with-drift family --------------------------------
#
# b(x) = g(r) (x - c)/r with r = |x - c|.  Near the boundary (r > 3R/4, i.e.
# d < R/4 on a ball of radius R) g(r) = d**(-tau).  Inside, g is a cubic
# matching value and slope at r0 = 3R/4 so that b is C^1 and bounded:
#   odd_cubic:  g = a1 r + a3 r^3
#   even_cubic: g = r^2 (A + B r / r0) / r0^2 * g(r0)

def drift_magnitude(spec: OperatorSpec, r, d):
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    R, tau = spec.radius, spec.tau
    r0 = 0.75 * R
    g0 = (R / 4.0) ** (-tau)
    g1 = tau * (R / 4.0) ** (-tau - 1.0)
    if spec.extension == "odd_cubic":
        a3 = (g1 - g0 / r0) / (2.0 * r0 * r0)
        a1 = g0 / r0 - a3 * r0 * r0
        inner = a1 * r + a3 * r ** 3
    else:
        B = g1 * r0 / g0 - 2.0
        A = 1.0 - B
        s = r / r0
        inner = g0 * s * s * (A + B * s)
    outer = np.power(np.maximum(d, 1e-300), -tau)
    return spec.drift_scale * np.where(r > r0, outer, inner)


def drift_field(spec: OperatorSpec, x, d):
    """The vector field b(x), shape (N, dim)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c = np.asarray(spec.center, dtype=float)
    c = np.broadcast_to(c if c.size == x.shape[1] else np.zeros(x.shape[1]), (x.shape[1],))
    rel = x - c
    r = np.sqrt((rel ** 2).sum(axis=1))
    g = drift_magnitude(spec, r, d)
    unit = np.divide(rel, r[:, None], out=np.zeros_like(rel), where=r[:, None] > 0)
    return g[:, None] * unit


# --- evaluation -------------------------------------------------------------

def _pucci(spec, X):
    pos, neg = np.maximum(X, 0.0), np.maximum(-X, 0.0)
    if spec.extremal == "max":
        return axis_sum(spec.Lam * pos - spec.lam * neg)
    return axis_sum(spec.lam * pos - spec.Lam * neg)


def _first_order(grad, b):
    if isinstance(grad, UpwindGradient):
        return grad.transport(b)
    return axis_sum(b * grad)


def evaluate(spec: OperatorSpec, x, d, grad, X) -> np.ndarray:
    """Vectorised F over N points; ``x`` (N, dim), ``d`` (N,), ``X`` (N, dim)."""
    d = np.asarray(d, dtype=float)
    X = np.asarray(X, dtype=float)
    w = d ** spec.mu
    fam = spec.family
    if fam is Family.DEG_LAPLACE:
        return -w * axis_sum(X)
    if fam is Family.PUCCI:
        return -w * _pucci(spec, X)
    if fam is Family.DEG_DRIFT:
        b = drift_field(spec, x, d)
        return -w * (axis_sum(X) + _first_order(grad, b))
    if fam is Family.ISAACS:
        trX = axis_sum(X)
        dim = X.shape[-1]
        row_max = []
        for row in spec.controls:
            vals = []
            for c in row:
                b = np.broadcast_to(np.resize(np.asarray(c.drift, dtype=float), dim), X.shape)
                vals.append(c.sigma_scale ** 2 * trX + _first_order(grad, b))
            row_max.append(np.max(vals, axis=0))
        return -w * np.min(row_max, axis=0)
    # first-order Hamilton-Jacobi
    if isinstance(grad, UpwindGradient):
        norm = grad.godunov_norm()
    else:
        norm = np.sqrt(axis_sum(np.asarray(grad, dtype=float) ** 2))
    return w * norm ** spec.m


def eval_operator(spec: OperatorSpec, x, d, p, X) -> float:
    """F(x, p, X) at a single point.  ``X`` holds the diagonal of the Hessian."""
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    X = np.atleast_1d(np.asarray(X, dtype=float))[None, :]
    if isinstance(p, UpwindGradient):
        p = UpwindGradient(np.atleast_1d(p.dminus)[None, :], np.atleast_1d(p.dplus)[None, :])
    else:
        p = np.atleast_1d(np.asarray(p, dtype=float))[None, :]
    return float(evaluate(spec, x, np.atleast_1d(float(d)), p, X)[0])


def drift_coefficient(spec: OperatorSpec, x, d) -> np.ndarray:
    """|first-order transport coefficient| per point (already multiplied by d**mu)."""
    d = np.asarray(d, dtype=float)
    w = d ** spec.mu
    if spec.family is Family.DEG_DRIFT:
        b = drift_field(spec, x, d)
        return w * np.sqrt((b ** 2).sum(axis=1))
    if spec.family is Family.ISAACS:
        mags = [math.sqrt(sum(v * v for v in c.drift)) for row in spec.controls for c in row]
        return w * max(mags)
    return np.zeros_like(d)
