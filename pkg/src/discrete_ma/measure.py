"""R-curvature weights of mesh functions and derived diagnostics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .envelope import CONTACT_TOL, LowerHull, envelope_at_nodes, gamma_eval, lower_hull
from .errors import BoundaryNotNonnegative, QuadratureNotConverged
from .lattice import ConvexDomainSpec, LatticeDomain
from .meshfn import MeshFunction, delta_e
from .subdiff import SlopeCell, cell_volume, hull_cells, hull_normal_cell

# symmetric degree-5 rule on the reference triangle, barycentric coordinates
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_TRI_POINTS = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
_TRI_WEIGHTS = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)
# 3-point Gauss-Legendre on [0, 1] (also degree 5)
_GL_POINTS = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_WEIGHTS = np.array([5 / 18, 8 / 18, 5 / 18])


@dataclass(frozen=True)
class DensitySpec:
    """Density R on slope space: ``unit``, ``rq`` (1/(1+c|p|^2)) or ``callable``."""

    kind: str = "unit"
    c: float = 1.0
    func: Callable | None = field(default=None, compare=False)

    @classmethod
    def unit(cls) -> "DensitySpec":
        return cls("unit")

    @classmethod
    def rational_quadratic(cls, c: float) -> "DensitySpec":
        return cls("rq", c=float(c))

    @classmethod
    def from_callable(cls, R: Callable) -> "DensitySpec":
        return cls("callable", func=R)

    @classmethod
    def parse(cls, text: str) -> "DensitySpec":
        if text == "unit":
            return cls.unit()
        if text.startswith("rq:"):
            return cls.rational_quadratic(float(text[3:]))
        raise ValueError(f"unknown density {text!r}")

    def __call__(self, P) -> np.ndarray:
        """Evaluate R at the rows of P (shape (k, d))."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if self.kind == "unit":
            return np.ones(len(P))
        if self.kind == "rq":
            return 1.0 / (1.0 + self.c * np.einsum("ij,ij->i", P, P))
        vals = np.array([float(self.func(p)) for p in P])
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")
        return vals


UNIT = DensitySpec.unit()


def _quad_1d(lo, hi, R, level):
    n = 2**level
    edges = np.linspace(lo, hi, n + 1)
    a, w = edges[:-1], np.diff(edges)
    pts = (a[:, None] + w[:, None] * _GL_POINTS[None]).reshape(-1, 1)
    return float(np.sum(R(pts).reshape(n, 3) * _GL_WEIGHTS[None] * w[:, None]))


def _refine(tris):
    """Split each triangle (k, 3, 2) into four by edge midpoints."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return np.concatenate(
        [np.stack(t, axis=1) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
    )


def _quad_tris(tris, R):
    e1, e2 = tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = np.einsum("qk,tkd->tqd", _TRI_POINTS, tris).reshape(-1, 2)
    vals = R(pts).reshape(len(tris), -1)
    return float(np.sum(vals @ _TRI_WEIGHTS * area))


def integrate_density(cell: SlopeCell, R: DensitySpec, levels: int = 3, rtol: float = 1e-6):
    """(integral of R over the cell, Richardson error estimate).

    The cell is fan-triangulated from its centroid (d = 2) and each piece is
    refined ``levels`` times; the last two levels must agree to ``rtol``.
    """
    if cell_volume(cell) == 0.0:
        return 0.0, 0.0
    if cell.dim == 1:
        coarse = _quad_1d(cell.lo, cell.hi, R, levels - 1)
        fine = _quad_1d(cell.lo, cell.hi, R, levels)
    else:
        v = cell.vertices
        cen = v.mean(axis=0)
        tris = np.stack([np.broadcast_to(cen, v.shape), v, np.roll(v, -1, axis=0)], axis=1)
        for _ in range(levels - 1):
            tris = _refine(tris)
        coarse = _quad_tris(tris, R)
        fine = _quad_tris(_refine(tris), R)
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-300):
        raise QuadratureNotConverged(f"levels disagree: {coarse!r} vs {fine!r}")
    return fine, abs(fine - coarse) / (2**6 - 1)


def cell_weight(cell: SlopeCell, R: DensitySpec = UNIT, levels: int = 3) -> float:
    if R.kind == "unit":
        return cell_volume(cell)
    return integrate_density(cell, R, levels)[0]


def ma_weight(u: MeshFunction, hull: LowerHull, x, R: DensitySpec = UNIT, levels: int = 3) -> float:
    """omega(R, u_h, {x}) for an interior node x; zero off the contact set."""
    i = u.dom.interior_id(x)
    if hull.is_vertex(i):
        g = u.values[i]
    else:
        g = gamma_eval(hull, u.dom.nodes[i])
    if abs(g - u.values[i]) > CONTACT_TOL * u.scale:
        return 0.0
    return cell_weight(hull_normal_cell(hull, u, i), R, levels)


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Nonnegative weights on interior nodes (indexed by node id)."""

    dom: LatticeDomain
    weights: np.ndarray = field(repr=False)
    density: DensitySpec = UNIT
    contact: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.dom.n_interior,) or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite, nonnegative, one per interior node")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def to_csv(self) -> str:
        d = self.dom.dim
        head = "node_id,x," + ("y," if d == 2 else "") + "weight"
        rows = [head]
        for i, w in enumerate(self.weights):
            coords = ",".join(f"{c:.17g}" for c in self.dom.nodes[i])
            rows.append(f"{i},{coords},{w:.17g}")
        return "\n".join(rows) + "\n"


def discrete_measure(u: MeshFunction, hull: LowerHull | None = None, R: DensitySpec = UNIT, levels: int = 3, nodes=None) -> AtomicMeasure:
    """All weights omega(R, u_h, {x}); restrict work to ``nodes`` if given."""
    if hull is None:
        hull = lower_hull(u)
    n = u.dom.n_interior
    gamma = envelope_at_nodes(hull)
    cells, contact = hull_cells(u, hull, gamma)
    w = np.zeros(n)
    todo = range(n) if nodes is None else nodes
    for i in todo:
        if not contact[i]:
            continue
        w[i] = cell_weight(cells[i], R, levels)
    return AtomicMeasure(u.dom, w, R, contact)


QueryRegion = ConvexDomainSpec


def region_contains(E: QueryRegion, points, tol: float = 1e-12) -> np.ndarray:
    """Closed containment of points in a box/ball/polygon region."""
    return E.signed_distance(points) <= tol


def measure_of_region(m: AtomicMeasure, E: QueryRegion) -> float:
    inside = region_contains(E, m.dom.interior_nodes)
    return float(m.weights[inside].sum())


def total_mass(u: MeshFunction, hull: LowerHull | None = None) -> float:
    """omega(1, u_h, Omega_h): summed volume of the contact-node cells."""
    return discrete_measure(u, hull).total


@dataclass
class ABPReport:
    max_ratio: float
    argmax: int | None
    total_mass: float


def abp_check(u: MeshFunction, hull: LowerHull | None = None) -> ABPReport:
    """Empirical constant in the discrete Aleksandrov-Bakelman-Pucci estimate.

    ratio(x) = (-u(x))^d / (diam^(d-1) * dist(x, boundary) * mass) over nodes
    with u(x) < 0.
    """
    dom = u.dom
    if np.any(u.boundary_values < -1e-12):
        raise BoundaryNotNonnegative("u must be nonnegative on the boundary nodes")
    mass = total_mass(u, hull)
    neg = np.flatnonzero(u.interior_values < 0)
    if len(neg) == 0:
        return ABPReport(0.0, None, mass)
    d = dom.dim
    diam = dom.spec.diameter
    dist = dom.dist_to_boundary(dom.nodes[neg])
    ratio = (-u.values[neg]) ** d / (diam ** (d - 1) * dist * mass)
    if not np.all(np.isfinite(ratio)):
        raise ValueError("ABP ratio is not finite (zero mass with negative values?)")
    k = int(np.argmax(ratio))
    return ABPReport(float(ratio[k]), int(neg[k]), mass)


def orthogonal_bases(d: int, r_W: int) -> list:
    """Orthogonal integer bases (e, e_perp) with primitive e, |e|_inf <= r_W.

    Each basis is listed once: of the four rotations of e only the one with
    e_1 > 0, e_2 >= 0 is kept.
    """
    if d == 1:
        return [((1,),)]
    out = []
    for a in range(1, r_W + 1):
        for b in range(0, r_W + 1):
            if math.gcd(a, b) == 1:
                out.append(((a, b), (-b, a)))
    return out


def oberman_operator(u: MeshFunction, x, r_W: int = 2) -> float:
    """inf over orthogonal bases of prod_i max(Delta_{e_i} u(x), 0) / |e_i|^2."""
    if r_W < 1:
        raise ValueError("r_W must be >= 1")
    best = math.inf
    for basis in orthogonal_bases(u.dom.dim, r_W):
        prod = 1.0
        for e in basis:
            e_arr = np.array(e)
            prod *= max(delta_e(u, x, e_arr), 0.0) / float(e_arr @ e_arr)
        best = min(best, prod)
    return best
