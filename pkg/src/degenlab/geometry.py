"""Computational domains with exact distance functions, and interior lattices.

Only shapes whose distance to the boundary has a closed form are supported:
the degeneracy weight ``d(x)**mu`` has to be exact, not a numerical artifact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse, InvalidDomainParams, PointOutsideDomain

# Points this close to the boundary (relative to the domain size) count as boundary points.
_BOUNDARY_RTOL = 1e-12
MIN_NODES = 3


class DomainKind(str, enum.Enum):
    INTERVAL = "interval"
    DISK = "disk"
    ANNULUS = "annulus"


_PARAM_NAMES = {
    DomainKind.INTERVAL: ("a", "b"),
    DomainKind.DISK: ("R",),
    DomainKind.ANNULUS: ("r_in", "r_out"),
}


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    params: tuple

    @property
    def dim(self) -> int:
        return 1 if self.kind is DomainKind.INTERVAL else 2

    def param(self, name):
        return self.params[_PARAM_NAMES[self.kind].index(name)]

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, **dict(zip(_PARAM_NAMES[self.kind], self.params))}

    @property
    def center(self) -> np.ndarray:
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            return np.array([0.5 * (a + b)])
        return np.zeros(2)

    @property
    def characteristic_length(self) -> float:
        """Length that is split into ``n`` cells by :func:`build_grid`."""
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            return b - a
        return 2.0 * self.params[-1]

    @property
    def max_distance(self) -> float:
        """D = max of d over the closed domain."""
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            return 0.5 * (b - a)
        if self.kind is DomainKind.DISK:
            return self.params[0]
        r_in, r_out = self.params
        return 0.5 * (r_out - r_in)

    def _raw_distance(self, x: np.ndarray) -> np.ndarray:
        """Signed distance, positive inside; ``x`` has shape (..., dim)."""
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            t = x[..., 0]
            return np.minimum(t - a, b - t)
        r = np.hypot(x[..., 0], x[..., 1])
        if self.kind is DomainKind.DISK:
            return self.params[0] - r
        r_in, r_out = self.params
        return np.minimum(r - r_in, r_out - r)

    def contains(self, x) -> np.ndarray:
        """True for points strictly inside the domain."""
        x = _as_points(x, self.dim)
        return self._raw_distance(x) > _BOUNDARY_RTOL * self.characteristic_length

    def project_to_boundary(self, x) -> np.ndarray:
        """Nearest boundary point for each row of ``x``."""
        x = _as_points(x, self.dim)
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            t = x[..., 0]
            return np.where(t - a <= b - t, a, b)[..., None] * np.ones_like(x)
        r = np.hypot(x[..., 0], x[..., 1])
        safe = np.where(r > 0, r, 1.0)
        direction = np.where((r > 0)[..., None], x / safe[..., None], np.array([1.0, 0.0]))
        if self.kind is DomainKind.DISK:
            target = np.full_like(r, self.params[0])
        else:
            r_in, r_out = self.params
            target = np.where(r - r_in <= r_out - r, r_in, r_out)
        return direction * target[..., None]

    def clip_to_boundary(self, x, axis: int, sign: int) -> np.ndarray:
        """First boundary crossing of the ray ``x + t*sign*e_axis``, t > 0.

        Used for ghost values: where a stencil arm exits the domain, this is
        the boundary point it crosses.
        """
        x = np.array(_as_points(x, self.dim), dtype=float, copy=True)
        if self.kind is DomainKind.INTERVAL:
            a, b = self.params
            x[..., 0] = b if sign > 0 else a
            return x
        other = x[..., 1 - axis]
        along = x[..., axis]
        radii = [self.params[0]] if self.kind is DomainKind.DISK else list(self.params)
        best = np.full(along.shape, np.inf)
        for rad in radii:
            disc = rad * rad - other * other
            ok = disc >= 0
            root = np.sqrt(np.where(ok, disc, 0.0))
            for cand in (root, -root):
                t = sign * (cand - along)
                good = ok & (t > 0)
                best = np.where(good & (t < best), t, best)
        x[..., axis] = along + sign * best
        return x


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def make_domain(kind, **params) -> Domain:
    """Validate parameters and build a :class:`Domain`.

    ``kind`` is a :class:`DomainKind` or its string value; parameters by name:
    interval ``a, b``; disk ``R``; annulus ``r_in, r_out``.
    """
    try:
        kind = DomainKind(kind)
    except ValueError:
        raise InvalidDomainParams(f"unknown domain kind {kind!r}") from None
    names = _PARAM_NAMES[kind]
    if set(params) != set(names):
        raise InvalidDomainParams(f"{kind.value} domain needs parameters {names}, got {tuple(params)}")
    try:
        values = tuple(float(params[k]) for k in names)
    except (TypeError, ValueError):
        raise InvalidDomainParams(f"non-numeric parameter in {params}") from None
    if not all(math.isfinite(v) for v in values):
        raise InvalidDomainParams(f"non-finite parameter in {params}")
    if kind is DomainKind.INTERVAL:
        a, b = values
        if not 0 <= a < b:
            raise InvalidDomainParams(f"interval needs 0 <= a < b, got a={a}, b={b}")
    elif kind is DomainKind.DISK:
        if values[0] <= 0:
            raise InvalidDomainParams(f"disk radius must be positive, got R={values[0]}")
    else:
        r_in, r_out = values
        if not 0 < r_in < r_out:
            raise InvalidDomainParams(f"annulus needs 0 < r_in < r_out, got {r_in}, {r_out}")
    return Domain(kind, values)


def distance(domain: Domain, x):
    """Exact Euclidean distance from ``x`` (a point or array of points) to the boundary."""
    pts = _as_points(x, domain.dim)
    raw = domain._raw_distance(pts)
    tol = _BOUNDARY_RTOL * domain.characteristic_length
    if np.any(raw < -tol):
        raise PointOutsideDomain(f"point(s) outside the closed domain: {np.asarray(x)[raw < -tol][:3]}")
    out = np.maximum(raw, 0.0)
    return float(out) if np.ndim(x) <= 1 and out.size == 1 else out


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice clipped to the open domain.

    ``nbr_minus[i, k]`` / ``nbr_plus[i, k]`` hold the node id one step of
    ``h`` along axis ``k``, or ``-1`` when that point is not inside the domain.
    """

    domain: Domain
    n: int
    h: float
    coords: np.ndarray
    d: np.ndarray
    nbr_minus: np.ndarray
    nbr_plus: np.ndarray
    is_layer: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.d)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def layer_ids(self) -> np.ndarray:
        return np.flatnonzero(self.is_layer)

    def nodes(self):
        """Yield ``(id, coords, d, is_layer)`` in node order."""
        for i in range(self.size):
            yield i, tuple(self.coords[i]), float(self.d[i]), bool(self.is_layer[i])

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func`` on node coordinates (1D functions get a flat array)."""
        x = self.coords[:, 0] if self.dim == 1 else self.coords
        return np.asarray(func(x), dtype=float) * np.ones(self.size)


def build_grid(domain: Domain, n: int) -> Grid:
    """Lattice of spacing ``characteristic_length / n`` strictly inside ``domain``."""
    n = int(n)
    if n < 1:
        raise GridTooCoarse(f"n must be positive, got {n}")
    h = domain.characteristic_length / n
    if domain.kind is DomainKind.INTERVAL:
        a = domain.params[0]
        idx = np.arange(1, n)[:, None]
        coords = a + idx * h
    else:
        m = n // 2 + 1
        ii, jj = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1), indexing="ij")
        idx = np.stack([ii.ravel(), jj.ravel()], axis=1)
        coords = idx * h
        if domain.kind is DomainKind.DISK:
            # |i h| < R with h = 2R/n, decided in exact integer arithmetic
            inside = 4 * (idx ** 2).sum(axis=1) < n * n
        else:
            inside = domain.contains(coords)
        idx, coords = idx[inside], coords[inside]
    if len(idx) < MIN_NODES:
        raise GridTooCoarse(f"only {len(idx)} interior node(s) at n={n}; need at least {MIN_NODES}")

    order = np.lexsort(tuple(idx[:, k] for k in reversed(range(idx.shape[1]))))
    idx, coords = idx[order], coords[order]
    lookup = {tuple(row): i for i, row in enumerate(idx.tolist())}
    dim = idx.shape[1]
    nbr_minus = np.full((len(idx), dim), -1, dtype=np.int64)
    nbr_plus = np.full((len(idx), dim), -1, dtype=np.int64)
    for i, row in enumerate(idx.tolist()):
        for k in range(dim):
            row[k] -= 1
            nbr_minus[i, k] = lookup.get(tuple(row), -1)
            row[k] += 2
            nbr_plus[i, k] = lookup.get(tuple(row), -1)
            row[k] -= 1
    is_layer = ((nbr_minus < 0) | (nbr_plus < 0)).any(axis=1)
    d = np.asarray(distance(domain, coords), dtype=float).reshape(-1)
    for arr in (coords, d, nbr_minus, nbr_plus, is_layer):
        arr.setflags(write=False)
    return Grid(domain, n, h, coords, d, nbr_minus, nbr_plus, is_layer)
