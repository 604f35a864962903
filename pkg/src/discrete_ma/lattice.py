"""Lattice discretizations of convex domains.

Interior nodes are the points of h*Z^d strictly inside the domain.  Boundary
nodes are the points where the rays x + t*e (x interior, e in the stencil)
first meet the boundary, with t <= h; they are generally *not* lattice points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import DomainError, EmptyInterior, MissingNode

# relative (to h) tolerance for closure / interior tests and node dedup
NODE_TOL = 1e-10


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    kind = "box"

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise DomainError("box corners must have matching dimension 1 or 2")
        if not all(a < b for a, b in zip(lo, hi)):
            raise DomainError(f"box needs lo < hi componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def bbox(self):
        return np.array(self.lo), np.array(self.hi)

    def signed_distance(self, x):
        """Negative inside (exact distance to the boundary), positive outside."""
        x = np.asarray(x, dtype=float)
        lo, hi = np.array(self.lo), np.array(self.hi)
        return np.max(np.maximum(lo - x, x - hi), axis=-1)

    def ray_exit(self, x, v) -> float:
        x, v = np.asarray(x, float), np.asarray(v, float)
        t = math.inf
        for xi, vi, a, b in zip(x, v, self.lo, self.hi):
            if vi > 0:
                t = min(t, (b - xi) / vi)
            elif vi < 0:
                t = min(t, (a - xi) / vi)
        return max(t, 0.0)

    def to_text(self) -> str:
        return "box:" + ",".join(repr(v) for v in self.lo + self.hi)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float
    kind = "ball"

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) not in (1, 2):
            raise DomainError("ball center must have dimension 1 or 2")
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bbox(self):
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.array(self.center), axis=-1) - self.radius

    def ray_exit(self, x, v) -> float:
        # largest root of |x - c + t v|^2 = r^2
        w = np.asarray(x, float) - np.array(self.center)
        v = np.asarray(v, float)
        a = float(v @ v)
        b = float(w @ v)
        c = float(w @ w) - self.radius**2
        disc = max(b * b - a * c, 0.0)
        sq = math.sqrt(disc)
        # numerically stable form of (-b + sq) / a
        t = -c / (b + sq) if b > 0 else (-b + sq) / a
        return max(t, 0.0)

    def to_text(self) -> str:
        return "ball:" + ",".join(repr(v) for v in self.center + (self.radius,))


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon needs at least 3 planar vertices")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        scale = float(np.max(np.abs(v))) + 1.0
        if np.any(cross <= 1e-12 * scale**2):
            raise DomainError("polygon vertices must be strictly convex and counter-clockwise")
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))

    @property
    def dim(self) -> int:
        return 2

    @cached_property
    def _halfplanes(self):
        v = np.asarray(self.vertices)
        e = np.roll(v, -1, axis=0) - v
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n, np.einsum("ij,ij->i", n, v)

    @property
    def diameter(self) -> float:
        v = np.asarray(self.vertices)
        return float(np.max(np.linalg.norm(v[:, None] - v[None], axis=-1)))

    def bbox(self):
        v = np.asarray(self.vertices)
        return v.min(axis=0), v.max(axis=0)

    def signed_distance(self, x):
        n, c = self._halfplanes
        x = np.asarray(x, dtype=float)
        return np.max(x @ n.T - c, axis=-1)

    def ray_exit(self, x, v) -> float:
        n, c = self._halfplanes
        nv = n @ np.asarray(v, float)
        slack = c - n @ np.asarray(x, float)
        hit = nv > 0
        if not np.any(hit):
            return math.inf
        return max(float(np.min(slack[hit] / nv[hit])), 0.0)

    def to_text(self) -> str:
        return "polygon:" + ",".join(repr(c) for p in self.vertices for c in p)


ConvexDomainSpec = Union[Box, Ball, Polygon]


def contains(spec: ConvexDomainSpec, x, tol: float = 0.0):
    return spec.signed_distance(x) < -tol


def contains_closure(spec: ConvexDomainSpec, x, tol: float = 0.0):
    return spec.signed_distance(x) <= tol


def parse_domain(text: str) -> ConvexDomainSpec:
    """Parse ``box:x0,y0,x1,y1``, ``ball:cx,cy,r`` or ``polygon:<file or x,y,...>``.

    One-dimensional boxes and balls take ``box:a,b`` and ``ball:c,r``.
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "polygon" and Path(rest).is_file():
        nums = [float(t) for t in Path(rest).read_text().replace(",", " ").split()]
    else:
        try:
            nums = [float(t) for t in rest.split(",") if t.strip()]
        except ValueError as exc:
            raise DomainError(f"cannot parse domain {text!r}") from exc
    if kind == "box":
        if len(nums) not in (2, 4):
            raise DomainError("box takes 2 (1-D) or 4 (2-D) numbers")
        k = len(nums) // 2
        return Box(tuple(nums[:k]), tuple(nums[k:]))
    if kind == "ball":
        if len(nums) not in (2, 3):
            raise DomainError("ball takes 2 (1-D) or 3 (2-D) numbers")
        return Ball(tuple(nums[:-1]), nums[-1])
    if kind == "polygon":
        if len(nums) % 2:
            raise DomainError("polygon needs an even number of coordinates")
        return Polygon(tuple(zip(nums[0::2], nums[1::2])))
    raise DomainError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True)
class DirectionSet:
    """A symmetric set V of primitive integer directions containing the axes.

    Use :meth:`of_radius` for all gcd-1 vectors with ||e||_inf <= r, or
    :meth:`canonical` for the axis directions only.
    """

    dim: int
    directions: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("only d = 1, 2 are supported")
        dirs = sorted(
            {tuple(int(c) for c in e) for e in np.asarray(self.directions).reshape(-1, self.dim)},
            key=lambda e: (max(map(abs, e)), sum(x * x for x in e), tuple(-x for x in e)),
        )
        keys = set(dirs)
        for e in dirs:
            if math.gcd(*e) != 1:
                raise DomainError(f"direction {e} is not primitive")
            if tuple(-x for x in e) not in keys:
                raise DomainError(f"direction set is not symmetric: {e}")
        for k in range(self.dim):
            if tuple(int(k == m) for m in range(self.dim)) not in keys:
                raise DomainError("direction set must contain the canonical basis")
        arr = np.array(dirs, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "directions", arr)

    @classmethod
    def of_radius(cls, dim: int, radius: int) -> "DirectionSet":
        if radius < 1:
            raise DomainError("stencil radius must be >= 1")
        r = int(radius)
        if dim == 1:
            return cls(1, np.array([[1], [-1]]))
        dirs = [
            (a, b)
            for a in range(-r, r + 1)
            for b in range(-r, r + 1)
            if (a, b) != (0, 0) and math.gcd(a, b) == 1
        ]
        return cls(dim, np.array(dirs))

    @classmethod
    def canonical(cls, dim: int) -> "DirectionSet":
        eye = np.eye(dim, dtype=np.int64)
        return cls(dim, np.vstack([eye, -eye]))

    @property
    def radius(self) -> int:
        return int(np.max(np.abs(self.directions)))

    def __len__(self):
        return len(self.directions)

    @cached_property
    def _lookup(self) -> dict:
        return {tuple(int(c) for c in e): j for j, e in enumerate(self.directions)}

    def index(self, e) -> int:
        key = tuple(int(c) for c in np.atleast_1d(e))
        try:
            return self._lookup[key]
        except KeyError:
            raise MissingNode(f"direction {key} is not in the stencil of radius {self.radius}") from None

    def __contains__(self, e) -> bool:
        return tuple(int(c) for c in np.atleast_1d(e)) in self._lookup

    @cached_property
    def representatives(self) -> np.ndarray:
        """One index per {e, -e} pair: the member whose first nonzero entry is positive."""
        keep = []
        for j, e in enumerate(self.directions):
            nz = e[np.nonzero(e)[0][0]]
            if nz > 0:
                keep.append(j)
        return np.array(keep, dtype=np.int64)


def _ray_step(spec, x, e, h, tol) -> float:
    target = x + h * e
    if spec.signed_distance(target) <= tol:
        return h
    t = spec.ray_exit(x, h * e)
    return min(t, 1.0) * h


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    """Interior lattice nodes, boundary nodes and the per-direction stencil table.

    Node ids: interior nodes come first (lexicographic lattice order), followed
    by boundary nodes (lexicographic coordinate order).  ``steps[i, j]`` is
    h^e_x for interior node i and direction ``V.directions[j]`` and
    ``neighbors[i, j]`` the id of the node x + steps[i, j] * e.
    """

    spec: ConvexDomainSpec
    h: float
    V: DirectionSet
    nodes: np.ndarray = field(repr=False)
    n_interior: int
    lattice: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    neighbors: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[: self.n_interior]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.nodes[self.n_interior :]

    def is_interior(self, i: int) -> bool:
        return 0 <= i < self.n_interior

    @cached_property
    def _tree(self):
        return cKDTree(self.nodes)

    @cached_property
    def _lattice_lookup(self) -> dict:
        return {tuple(k): i for i, k in enumerate(self.lattice.tolist())}

    def node_id(self, point) -> int:
        """Id of the node at ``point`` (coordinate tolerance 1e-9*h)."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        dist, i = self._tree.query(p)
        if dist > 1e-9 * self.h:
            raise MissingNode(f"no node at {p.tolist()}")
        return int(i)

    def resolve(self, x) -> int:
        """Accept a node id or a point and return the node id."""
        if isinstance(x, (int, np.integer)):
            if not 0 <= x < self.n_nodes:
                raise MissingNode(f"node id {x} out of range")
            return int(x)
        return self.node_id(x)

    def interior_id(self, x) -> int:
        i = self.resolve(x)
        if i >= self.n_interior:
            raise MissingNode(f"node {i} is a boundary node, not an interior node")
        return i

    def lattice_neighbor(self, i: int, e) -> int | None:
        """Interior node id of the lattice point x_i + h*e, or None."""
        k = tuple(int(a) + int(b) for a, b in zip(self.lattice[i], np.atleast_1d(e)))
        return self._lattice_lookup.get(k)

    def dist_to_boundary(self, x):
        return -self.spec.signed_distance(x)

    def dump(self) -> str:
        lines = []
        for i, p in enumerate(self.nodes):
            tag = "I" if i < self.n_interior else "B"
            lines.append(tag + " " + " ".join(f"{c:.17g}" for c in p))
        return "\n".join(lines) + "\n"


def boundary_step(dom: LatticeDomain, x, e) -> float:
    """h^e_x = sup{ r*h : r in [0,1], x + r*h*e in closure(domain) }."""
    i = dom.interior_id(x)
    # well defined for any integer direction, not only those in V
    e = np.atleast_1d(np.asarray(e, dtype=float))
    return _ray_step(dom.spec, dom.nodes[i], e, dom.h, NODE_TOL * dom.h)


def build_domain(spec: ConvexDomainSpec, h: float, V: DirectionSet | int = 2) -> LatticeDomain:
    if not h > 0:
        raise DomainError("mesh length must be positive")
    if h > spec.diameter:
        raise DomainError("mesh length exceeds the domain diameter")
    d = spec.dim
    if isinstance(V, (int, np.integer)):
        V = DirectionSet.of_radius(d, int(V))
    if V.dim != d:
        raise DomainError("stencil and domain dimensions differ")
    tol = NODE_TOL * h

    lo, hi = spec.bbox()
    kmin = np.ceil(lo / h - 1e-9).astype(np.int64)
    kmax = np.floor(hi / h + 1e-9).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    pts = grid * h
    inside = spec.signed_distance(pts) < -tol
    lattice = grid[inside]
    interior = pts[inside]
    n_int = len(interior)
    if n_int == 0:
        raise EmptyInterior(f"no lattice point of {h}*Z^{d} lies inside the domain")
    lookup = {tuple(k): i for i, k in enumerate(lattice.tolist())}

    n_dir = len(V)
    steps = np.full((n_int, n_dir), h)
    neighbors = np.full((n_int, n_dir), -1, dtype=np.int64)
    cand_pts, cand_owner = [], []
    for j, e in enumerate(V.directions):
        ef = e.astype(float)
        for i in range(n_int):
            k = tuple((lattice[i] + e).tolist())
            nb = lookup.get(k)
            if nb is not None:
                neighbors[i, j] = nb
                continue
            x = interior[i]
            target = np.array(k, dtype=float) * h
            if spec.signed_distance(target) <= tol:
                s, p = h, target
            else:
                s = min(spec.ray_exit(x, h * ef), 1.0) * h
                p = x + s * ef
            steps[i, j] = s
            cand_pts.append(p)
            cand_owner.append((i, j))

    cand = np.array(cand_pts, dtype=float).reshape(-1, d)
    if len(cand):
        pairs = cKDTree(cand).query_pairs(r=tol, output_type="ndarray")
        m = len(cand)
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
        n_comp, labels = connected_components(graph, directed=False)
        first = np.full(n_comp, -1, dtype=np.int64)
        for idx in range(m - 1, -1, -1):
            first[labels[idx]] = idx
        reps = cand[first]
        order = np.lexsort(reps.T[::-1])
        rank = np.empty(n_comp, dtype=np.int64)
        rank[order] = np.arange(n_comp)
        boundary = reps[order]
        for idx, (i, j) in enumerate(cand_owner):
            neighbors[i, j] = n_int + rank[labels[idx]]
    else:
        boundary = np.zeros((0, d))

    nodes = np.vstack([interior, boundary])
    for arr in (nodes, lattice, steps, neighbors):
        arr.setflags(write=False)
    return LatticeDomain(spec, float(h), V, nodes, n_int, lattice, steps, neighbors)
