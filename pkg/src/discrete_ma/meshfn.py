"""Mesh functions, directional second differences and convexity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLine, MissingNode, NonFiniteValue
from .lattice import LatticeDomain


@dataclass(frozen=True, eq=False)
class MeshFunction:
    """One real value per node of a :class:`LatticeDomain`, indexed by node id."""

    dom: LatticeDomain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.dom.n_nodes,):
            raise ValueError(f"expected {self.dom.n_nodes} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("mesh function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values))) + 1.0

    def __add__(self, other):
        if isinstance(other, MeshFunction):
            return MeshFunction(self.dom, self.values + other.values)
        return MeshFunction(self.dom, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, alpha: float):
        return MeshFunction(self.dom, alpha * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return MeshFunction(self.dom, -self.values)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[: self.dom.n_interior]

    @property
    def boundary_values(self) -> np.ndarray:
        return self.values[self.dom.n_interior :]


def sample(f, dom: LatticeDomain, boundary=None) -> MeshFunction:
    """Evaluate ``f`` at every node.

    With ``boundary`` given, ``f`` fills the interior and ``boundary`` the
    boundary nodes.
    """
    vals = np.empty(dom.n_nodes)
    for i, p in enumerate(dom.nodes):
        g = boundary if (boundary is not None and i >= dom.n_interior) else f
        vals[i] = g(p)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteValue(f"function is not finite at node {bad} = {dom.nodes[bad].tolist()}")
    return MeshFunction(dom, vals)


def _direction_pair(dom: LatticeDomain, e):
    j = dom.V.index(e)
    jm = dom.V.index(-np.atleast_1d(np.asarray(e)))
    return j, jm


def delta_all(u: MeshFunction, j: int) -> np.ndarray:
    """Delta_e u at every interior node for direction index ``j`` of V."""
    dom = u.dom
    e = dom.V.directions[j]
    jm = dom.V.index(-e)
    hp, hm = dom.steps[:, j], dom.steps[:, jm]
    u0 = u.interior_values
    up = u.values[dom.neighbors[:, j]]
    um = u.values[dom.neighbors[:, jm]]
    return 2.0 / (hp + hm) * ((up - u0) / hp + (um - u0) / hm)


def delta_e(u: MeshFunction, x, e) -> float:
    """Second difference of u at interior node x along e with boundary-fitted steps."""
    dom = u.dom
    i = dom.interior_id(x)
    j, jm = _direction_pair(dom, e)
    hp, hm = dom.steps[i, j], dom.steps[i, jm]
    nb_p, nb_m = dom.neighbors[i, j], dom.neighbors[i, jm]
    if nb_p < 0 or nb_m < 0:
        raise MissingNode(f"stencil endpoint missing at node {i} along {np.atleast_1d(e).tolist()}")
    u0 = u.values[i]
    return 2.0 / (hp + hm) * ((u.values[nb_p] - u0) / hp + (u.values[nb_m] - u0) / hm)


@dataclass
class ConvexityReport:
    is_discrete_convex: bool
    violations: list  # (node id, direction tuple, Delta_e value)
    min_delta: float


def is_discrete_convex(u: MeshFunction) -> ConvexityReport:
    dom = u.dom
    tol = 1e-12 * u.scale
    violations = []
    min_delta = np.inf
    for j in dom.V.representatives:
        d = delta_all(u, j)
        min_delta = min(min_delta, float(d.min()))
        e = tuple(int(c) for c in dom.V.directions[j])
        for i in np.flatnonzero(d < -tol):
            violations.append((int(i), e, float(d[i])))
    violations.sort()
    return ConvexityReport(not violations, violations, float(min_delta))


def line_nodes(dom: LatticeDomain, x0, e) -> np.ndarray:
    """Node ids on the lattice line through x0 along e, ordered by the e-coordinate."""
    i0 = dom.interior_id(x0)
    j, jm = _direction_pair(dom, e)
    fwd, back = [], []
    i = i0
    while True:
        nb = int(dom.neighbors[i, j])
        fwd.append(nb)
        if nb >= dom.n_interior:
            break
        i = nb
    i = i0
    while True:
        nb = int(dom.neighbors[i, jm])
        back.append(nb)
        if nb >= dom.n_interior:
            break
        i = nb
    return np.array(back[::-1] + [i0] + fwd, dtype=np.int64)


def line_interpolant_is_convex(u: MeshFunction, x0, e) -> bool:
    """Whether the piecewise linear interpolant of u along the lattice line is convex."""
    ids = line_nodes(u.dom, x0, e)
    if len(ids) < 3:
        raise DegenerateLine("fewer than 3 nodes on the line")
    e = np.atleast_1d(np.asarray(e, dtype=float))
    t = u.dom.nodes[ids] @ e / (e @ e)
    slopes = np.diff(u.values[ids]) / np.diff(t)
    tol = 1e-12 * (float(np.max(np.abs(slopes))) + 1.0)
    return bool(np.all(np.diff(slopes) >= -tol))


def lipschitz_ratio_max(u: MeshFunction, max_pairs: int = 10**6) -> float:
    """max |u(x) - u(y)| / ||x - y|| over node pairs (strided subsample above ``max_pairs``)."""
    pts, vals = u.dom.nodes, u.values
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two nodes")
    total = n * (n - 1) // 2
    stride = max(1, -(-total // max_pairs))
    best = 0.0
    if stride == 1:
        for i in range(n - 1):
            dx = np.linalg.norm(pts[i + 1 :] - pts[i], axis=1)
            r = np.abs(vals[i + 1 :] - vals[i]) / dx
            best = max(best, float(r.max()))
        return best
    # deterministic stride over the flattened upper-triangular pair index
    k = np.arange(0, total, stride, dtype=np.int64)
    # invert k = i*n - i*(i+1)/2 + (j - i - 1)
    i = (n - 2 - np.floor(np.sqrt(-8 * k + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = k + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    dx = np.linalg.norm(pts[j] - pts[i], axis=1)
    return float(np.max(np.abs(vals[j] - vals[i]) / dx))
