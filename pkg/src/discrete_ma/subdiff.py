"""Discrete subdifferentials as slope-space polytopes.

Two independent constructions are provided for an interior node x:

* :func:`discrete_subdifferential` intersects the halfspaces
  p . (y - x) <= u(y) - u(x) over every other node y;
* :func:`hull_normal_cell` takes the convex hull of the slopes of the
  envelope pieces active at x.

At contact nodes the two agree; elsewhere the first is empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from .envelope import CONTACT_TOL, LowerHull, envelope_at_nodes
from .errors import EquivalenceViolation
from .geometry import clip_halfplane, hausdorff, hull2d, points_in_convex, polygon_area, prune_polygon
from .meshfn import MeshFunction

PRUNE_TOL = 1e-10
EQUIV_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SlopeCell:
    """Bounded convex set of slopes.

    ``vertices`` has shape (k, d).  For d = 1 it holds the endpoints of an
    interval in increasing order (k = 2), a single point (k = 1) or nothing.
    For d = 2 it is a CCW strictly convex polygon, a segment, a point or empty.
    """

    dim: int
    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def empty(cls, dim: int) -> "SlopeCell":
        return cls(dim, np.zeros((0, dim)))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "SlopeCell":
        if hi < lo:
            return cls.empty(1)
        if hi == lo:
            return cls(1, [[lo]])
        return cls(1, [[lo], [hi]])

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @property
    def lo(self) -> float:
        return float(self.vertices[0, 0])

    @property
    def hi(self) -> float:
        return float(self.vertices[-1, 0])

    def translate(self, a) -> "SlopeCell":
        return SlopeCell(self.dim, self.vertices + np.asarray(a, dtype=float))

    def dump(self, node: int) -> str:
        flat = " ".join(f"{c:.17g}" for c in self.vertices.ravel())
        return f"C {node} {len(self.vertices)} {flat}".rstrip()


def cell_volume(c: SlopeCell) -> float:
    if c.is_empty or len(c.vertices) == 1:
        return 0.0
    if c.dim == 1:
        return c.hi - c.lo
    return abs(polygon_area(c.vertices)) if len(c.vertices) >= 3 else 0.0


def cell_hausdorff(a: SlopeCell, b: SlopeCell) -> float:
    if a.is_empty and b.is_empty:
        return 0.0
    if a.is_empty or b.is_empty:
        return math.inf
    if a.dim == 1:
        return max(abs(a.lo - b.lo), abs(a.hi - b.hi))
    return hausdorff(a.vertices, b.vertices)


def _polygon_cell(verts, scale) -> SlopeCell:
    v = prune_polygon(verts, PRUNE_TOL * scale)
    if len(v) >= 3 and polygon_area(v) < 0:
        v = v[::-1]
    return SlopeCell(2, v)


def _direct_1d(u: MeshFunction, i: int) -> SlopeCell:
    x = u.dom.nodes[:, 0]
    dx = x - x[i]
    du = u.values - u.values[i]
    left, right = dx < 0, dx > 0
    lo = float(np.max(du[left] / dx[left]))
    hi = float(np.min(du[right] / dx[right]))
    tol = 1e-12 * (max(abs(lo), abs(hi)) + 1.0)
    if lo > hi + tol:
        return SlopeCell.empty(1)
    if lo >= hi:
        mid = 0.5 * (lo + hi)
        return SlopeCell(1, [[mid]])
    return SlopeCell.interval(lo, hi)


def _direct_2d(u: MeshFunction, i: int) -> SlopeCell:
    pts, vals = u.dom.nodes, u.values
    A = np.delete(pts - pts[i], i, axis=0)
    b = np.delete(vals - vals[i], i)
    eps = 1e-12 * u.scale
    dist = np.linalg.norm(A, axis=1)
    pmax = 2.0 * float(np.max(np.abs(b) / dist)) + 1.0
    poly = [(-pmax, -pmax), (pmax, -pmax), (pmax, pmax), (-pmax, pmax)]

    order = np.argsort(dist, kind="stable")
    A, b = A[order], b[order] + eps
    # nearest constraints first; then only those still violated
    for k in range(min(16, len(b))):
        poly = clip_halfplane(poly, A[k, 0], A[k, 1], b[k])
    while poly:
        P = np.array(poly)
        viol = np.max(P @ A.T - b, axis=0)
        bad = np.flatnonzero(viol > 0.5 * eps)
        if len(bad) == 0:
            break
        for k in bad[np.argsort(-viol[bad])]:
            poly = clip_halfplane(poly, A[k, 0], A[k, 1], b[k])
            if not poly:
                break

    scale = pmax
    if poly and abs(polygon_area(poly)) >= 1e-16:
        return _polygon_cell(poly, scale)
    # thin or empty: confirm with an LP (min t s.t. A p - t <= b)
    res = linprog(
        [0.0, 0.0, 1.0],
        A_ub=np.column_stack([A, -np.ones(len(b))]),
        b_ub=b - eps,
        bounds=[(-pmax, pmax), (-pmax, pmax), (None, None)],
        method="highs",
    )
    if res.status != 0 or res.x[2] > eps:
        return SlopeCell.empty(2)
    if poly:
        return _polygon_cell(poly, scale)
    return SlopeCell(2, res.x[None, :2])


def discrete_subdifferential(u: MeshFunction, x) -> SlopeCell:
    """{p : u(y) >= u(x) + p . (y - x) for every node y}, x an interior node."""
    i = u.dom.interior_id(x)
    if u.dom.dim == 1:
        return _direct_1d(u, i)
    return _direct_2d(u, i)


def _cell_from_slopes(slopes: np.ndarray) -> SlopeCell:
    d = slopes.shape[1]
    if len(slopes) == 0:
        return SlopeCell.empty(d)
    if d == 1:
        return SlopeCell.interval(float(slopes.min()), float(slopes.max()))
    scale = float(np.max(np.abs(slopes))) + 1.0
    ring = hull2d(slopes)
    return _polygon_cell(slopes[ring], scale)


def active_pieces(hull: LowerHull, x) -> np.ndarray:
    """Ids of the envelope pieces active at x (node id or point)."""
    if isinstance(x, (int, np.integer)):
        if hull.is_vertex(x):
            return hull.adjacency[int(x)]
        x = hull.points[int(x)]
    return hull.locate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0]


def hull_normal_cell(hull: LowerHull, u: MeshFunction | None, x) -> SlopeCell:
    """Subdifferential of the envelope at x: hull of the slopes of the active pieces.

    ``x`` is a node id or a point; ``u`` is accepted for interface symmetry and
    used only to resolve a point to a node id.
    """
    if u is not None and not isinstance(x, (int, np.integer)):
        try:
            x = u.dom.resolve(x)
        except Exception:
            pass
    return _cell_from_slopes(hull.slopes[active_pieces(hull, x)])


def hull_cells(u: MeshFunction, hull: LowerHull, gamma=None):
    """Hull normal cells of every interior node and the contact mask.

    Non-contact nodes get an empty cell (their envelope cell is null).
    """
    n = u.dom.n_interior
    if gamma is None:
        gamma = envelope_at_nodes(hull)
    contact = np.abs(gamma[:n] - u.values[:n]) <= CONTACT_TOL * u.scale
    cells = [SlopeCell.empty(u.dom.dim)] * n
    ids = np.flatnonzero(contact)
    located_ids = [i for i in ids if not hull.is_vertex(i)]
    located = dict(zip(located_ids, hull.locate_many(u.dom.nodes[located_ids]))) if located_ids else {}
    for i in ids:
        act = hull.adjacency[int(i)] if hull.is_vertex(i) else located[i]
        cells[i] = _cell_from_slopes(hull.slopes[act])
    return cells, contact


@dataclass
class CellPair:
    node: int
    direct_cell: SlopeCell
    hull_cell: SlopeCell
    equal: bool
    hausdorff: float
    contact: bool = True


def equivalence_check(u: MeshFunction, hull: LowerHull, x, contact: bool | None = None) -> CellPair:
    """Compare the halfspace cell with the hull cell at an interior node.

    Contact nodes must agree to Hausdorff distance 1e-8 (relative to the slope
    scale); non-contact nodes must have an empty halfspace cell.
    """
    i = u.dom.interior_id(x)
    if contact is None:
        act = active_pieces(hull, i)
        if len(act) == 0:
            contact = False
        else:
            k = act[0]
            g = float(hull.slopes[k] @ u.dom.nodes[i] + hull.offsets[k])
            contact = abs(g - u.values[i]) <= CONTACT_TOL * u.scale
    direct = discrete_subdifferential(u, i)
    hcell = hull_normal_cell(hull, u, i)
    if contact:
        hd = cell_hausdorff(direct, hcell)
        scale = 1.0
        for c in (direct, hcell):
            if not c.is_empty:
                scale = max(scale, float(np.max(np.abs(c.vertices))))
        pair = CellPair(i, direct, hcell, hd <= EQUIV_TOL * scale, hd, True)
    else:
        pair = CellPair(i, direct, hcell, direct.is_empty, 0.0 if direct.is_empty else math.inf, False)
    if not pair.equal:
        raise EquivalenceViolation(pair)
    return pair


def union_volume(cells, n_samples: int = 2**20, seed: int = 0) -> float:
    """Volume of the union of cells.

    d = 1: exact interval union.  d = 2: quasi-Monte Carlo with a scrambled
    Sobol sequence over the joint bounding box.
    """
    cells = [c for c in cells if not c.is_empty and cell_volume(c) > 0]
    if not cells:
        return 0.0
    if cells[0].dim == 1:
        iv = sorted((c.lo, c.hi) for c in cells)
        total, cur_lo, cur_hi = 0.0, iv[0][0], iv[0][1]
        for lo, hi in iv[1:]:
            if lo > cur_hi:
                total += cur_hi - cur_lo
                cur_lo, cur_hi = lo, hi
            else:
                cur_hi = max(cur_hi, hi)
        return total + (cur_hi - cur_lo)
    allv = np.vstack([c.vertices for c in cells])
    lo, hi = allv.min(axis=0), allv.max(axis=0)
    m = int(np.ceil(np.log2(n_samples)))
    S = qmc.scale(qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m), lo, hi)
    order = np.argsort(S[:, 0], kind="stable")
    S = S[order]
    xs = S[:, 0]
    hit = np.zeros(len(S), dtype=bool)
    for c in cells:
        v = c.vertices
        a, b = np.searchsorted(xs, [v[:, 0].min(), v[:, 0].max()], side="left")
        b = np.searchsorted(xs, v[:, 0].max(), side="right")
        sub = S[a:b]
        yin = (sub[:, 1] >= v[:, 1].min()) & (sub[:, 1] <= v[:, 1].max())
        idx = np.flatnonzero(yin)
        inside = points_in_convex(sub[idx], v)
        hit[a + idx[inside]] = True
    return float(hit.mean() * np.prod(hi - lo))
