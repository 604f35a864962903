"""Convex envelopes of mesh functions as lower hulls of the lifted node set.

The envelope Gamma(u_h) is the pointwise largest convex function lying below
u_h at every node.  Its graph over conv(N_h) is the lower boundary of
conv{(x, u_h(x))}; each lower face is an affine piece.  Non-triangular faces
are fan-triangulated from their lexicographically smallest vertex, which
gives one admissible induced triangulation.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateInput, OutsideHull, UnboundedEnvelope
from .geometry import hull2d
from .meshfn import MeshFunction

ORIENT_TOL = 1e-12  # normalized orientation / coplanarity threshold
BARY_TOL = 1e-12  # barycentric containment slack
CONTACT_TOL = 1e-9  # relative to the value scale


@dataclass(frozen=True, eq=False)
class LowerHull:
    """Affine pieces of the lower convex hull of lifted points.

    ``simplices[k]`` lists the point ids of piece k (2 for d=1, 3 for d=2);
    ``face_id[k]`` labels the planar face the simplex was cut from.
    """

    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    simplices: np.ndarray = field(repr=False)
    face_id: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_faces(self) -> int:
        return len(self.offsets)

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values))) + 1.0

    @property
    def vertex_nodes(self) -> np.ndarray:
        return np.unique(self.simplices)

    @property
    def adjacency(self) -> dict:
        """node id -> ids of the pieces having it as a vertex."""
        return self._adjacency

    def __post_init__(self):
        adj = defaultdict(list)
        for k, simplex in enumerate(self.simplices.tolist()):
            for v in simplex:
                adj[v].append(k)
        object.__setattr__(self, "_adjacency", {v: np.array(f) for v, f in adj.items()})
        d = self.dim
        V = self.points[self.simplices]  # (m, d+1, d)
        if d == 1:
            lo = V[:, :, 0].min(axis=1)
            hi = V[:, :, 0].max(axis=1)
            object.__setattr__(self, "_box", (lo[:, None], hi[:, None]))
            object.__setattr__(self, "_seg", (lo, hi))
        else:
            object.__setattr__(self, "_box", (V.min(axis=1), V.max(axis=1)))
            T = np.stack([V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]], axis=-1)  # columns are edges
            object.__setattr__(self, "_origin", V[:, 0])
            object.__setattr__(self, "_inv", np.linalg.inv(T))

    def is_vertex(self, i: int) -> bool:
        return int(i) in self._adjacency

    def locate(self, x) -> np.ndarray:
        """Ids of all pieces whose projection contains x (closed, small slack)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self._box
        span = hi - lo
        cand = np.flatnonzero(np.all((x >= lo - 1e-9 * span - 1e-300) & (x <= hi + 1e-9 * span + 1e-300), axis=1))
        return self._contains(x, cand)

    def _contains(self, q, cand) -> np.ndarray:
        if self.dim == 1:
            a, b = self._seg
            L = b[cand] - a[cand]
            ok = (q[0] >= a[cand] - BARY_TOL * L) & (q[0] <= b[cand] + BARY_TOL * L)
        else:
            lam = np.einsum("kij,kj->ki", self._inv[cand], q - self._origin[cand])
            ok = (lam[:, 0] >= -BARY_TOL) & (lam[:, 1] >= -BARY_TOL) & (lam.sum(axis=1) <= 1 + BARY_TOL)
        return cand[ok]

    def locate_many(self, X, chunk: int = 128) -> list:
        """:meth:`locate` for every row of X.

        Candidates are the pieces attaining the max-representation
        max_F (p_F x + b_F) within tolerance; on conv(N_h) these are exactly
        the pieces whose closure contains x, confirmed by a barycentric test.
        """
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        tol = CONTACT_TOL * self.scale
        out = []
        for s in range(0, len(X), chunk):
            Q = X[s : s + chunk]
            vals = Q @ self.slopes.T + self.offsets
            top = vals.max(axis=1)
            for q, row, t in zip(Q, vals, top):
                cand = np.flatnonzero(row >= t - tol)
                out.append(self._contains(q, cand))
        return out

    def dump(self) -> str:
        lines = []
        for v in self.vertex_nodes:
            coords = " ".join(f"{c:.17g}" for c in self.points[v])
            lines.append(f"V {v} {coords} {self.values[v]:.17g}")
        for p, b, s in zip(self.slopes, self.offsets, self.simplices):
            lines.append(
                "F " + " ".join(f"{c:.17g}" for c in p) + f" {b:.17g} " + " ".join(str(int(v)) for v in s)
            )
        return "\n".join(lines) + "\n"


def _fit_plane(pts, vals):
    A = np.column_stack([pts, np.ones(len(pts))])
    sol, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return sol[:-1], sol[-1]


def _single_face(points, values, p, b) -> LowerHull:
    if points.shape[1] == 1:
        i0, i1 = int(np.argmin(points[:, 0])), int(np.argmax(points[:, 0]))
        simplices = np.array([[i0, i1]])
    else:
        ring = hull2d(points)
        simplices = np.array([[ring[0], ring[k], ring[k + 1]] for k in range(1, len(ring) - 1)])
    m = len(simplices)
    return LowerHull(points, values, np.tile(p, (m, 1)), np.full(m, b), simplices, np.zeros(m, dtype=np.int64))


def _lower_hull_1d(points, values) -> LowerHull:
    x = points[:, 0]
    order = np.lexsort((values, x))
    xs = x.tolist()
    vs = ((values - values.min()) / max(np.ptp(values), 1e-300)).tolist()
    xs_n = ((x - x.min()) / max(np.ptp(x), 1e-300)).tolist()
    chain = []
    for k in order.tolist():
        if chain and xs[chain[-1]] == xs[k]:
            continue  # same abscissa, keep the lower value (sorted first)
        while len(chain) >= 2:
            o, a = chain[-2], chain[-1]
            ax, ay = xs_n[a] - xs_n[o], vs[a] - vs[o]
            bx, by = xs_n[k] - xs_n[o], vs[k] - vs[o]
            c = ax * by - ay * bx
            if c > ORIENT_TOL * np.hypot(ax, ay) * np.hypot(bx, by):
                break
            chain.pop()
        chain.append(k)
    simplices = np.array([[chain[k], chain[k + 1]] for k in range(len(chain) - 1)], dtype=np.int64)
    a, b = x[simplices[:, 0]], x[simplices[:, 1]]
    slopes = (values[simplices[:, 1]] - values[simplices[:, 0]]) / (b - a)
    offsets = values[simplices[:, 0]] - slopes * a
    return LowerHull(points, values, slopes[:, None], offsets, simplices, np.arange(len(simplices)))


def _lower_hull_2d(points, values) -> LowerHull:
    center = points.mean(axis=0)
    cscale = float(np.max(np.abs(points - center)))
    vmin, vrange = float(values.min()), float(np.ptp(values))
    vscale = vrange if vrange > 0 else 1.0
    lifted = np.column_stack([(points - center) / cscale, (values - vmin) / vscale])
    try:
        qh = ConvexHull(lifted)
    except QhullError as exc:
        raise DegenerateInput(f"qhull failed on lifted points: {exc}") from exc
    eq = qh.equations
    lower = eq[:, 2] < -ORIENT_TOL
    lower_ids = np.flatnonzero(lower)
    nf = len(eq)

    # merge adjacent lower facets whose vertices are coplanar within tolerance
    F = np.repeat(lower_ids, 3)
    G = qh.neighbors[lower_ids].ravel()
    keep = (G >= 0) & lower[np.maximum(G, 0)]
    F, G = F[keep], G[keep]
    dist = np.abs(np.einsum("kij,kj->ki", lifted[qh.simplices[G]], eq[F, :3]) + eq[F, 3][:, None])
    same = np.all(dist <= ORIENT_TOL, axis=1)
    graph = coo_matrix((np.ones(int(same.sum())), (F[same], G[same])), shape=(nf, nf))
    _, labels = connected_components(graph, directed=False)
    labels = labels[lower_ids]
    sizes = np.bincount(labels)

    # single-facet faces: triangles straight from qhull, planes by batched solve
    single = lower_ids[sizes[labels] == 1]
    tri = np.sort(qh.simplices[single], axis=1)
    A = np.concatenate([points[tri], np.ones(tri.shape + (1,))], axis=2)
    sol = np.linalg.solve(A, values[tri][..., None])[..., 0]
    simplices = [tri]
    slopes = [sol[:, :2]]
    offsets = [sol[:, 2]]
    face_id = [single]

    multi = np.flatnonzero(sizes > 1)
    if len(multi):
        members = defaultdict(set)
        for f, lab in zip(lower_ids, labels):
            if sizes[lab] > 1:
                members[lab].update(qh.simplices[f].tolist())
        ms, mp, mo, mf = [], [], [], []
        for lab in multi:
            verts = np.array(sorted(members[lab]), dtype=np.int64)
            ring = verts[hull2d(points[verts], tol=ORIENT_TOL)]
            if len(ring) < 3:
                continue  # vertical face
            p, b = _fit_plane(points[ring], values[ring])
            # fan from the lexicographically smallest vertex (hull2d starts there)
            for k in range(1, len(ring) - 1):
                ms.append([ring[0], ring[k], ring[k + 1]])
                mp.append(p)
                mo.append(b)
                mf.append(nf + lab)
        if ms:
            simplices.append(np.array(ms, dtype=np.int64))
            slopes.append(np.array(mp))
            offsets.append(np.array(mo))
            face_id.append(np.array(mf, dtype=np.int64))
    simplices = np.concatenate(simplices)
    if not len(simplices):
        raise DegenerateInput("lifted point set has no lower faces")
    face_id = np.concatenate(face_id)
    _, face_id = np.unique(face_id, return_inverse=True)
    return LowerHull(
        points,
        values,
        np.concatenate(slopes),
        np.concatenate(offsets),
        simplices,
        face_id.astype(np.int64),
    )


def lower_hull_points(points, values) -> LowerHull:
    """Lower hull of the lifted set {(x_i, values_i)} for points in R^1 or R^2."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    d = points.shape[1]
    if len(points) < d + 1:
        raise DegenerateInput("need at least d+1 points")
    centered = points - points.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=ORIENT_TOL * (np.max(np.abs(centered)) + 1e-300)) < d:
        raise DegenerateInput("node set is affinely dependent")
    if d == 1:
        return _lower_hull_1d(points, values)
    p, b = _fit_plane(points, values)
    resid = np.max(np.abs(points @ p + b - values))
    if resid <= ORIENT_TOL * (np.max(np.abs(values)) + 1.0):
        return _single_face(points, values, p, b)
    return _lower_hull_2d(points, values)


def lower_hull(u: MeshFunction) -> LowerHull:
    return lower_hull_points(u.dom.nodes, u.values)


def gamma_eval(hull: LowerHull, x) -> float:
    """Gamma(u_h)(x) for x in conv(N_h)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    found = hull.locate(x)
    if len(found) == 0:
        raise OutsideHull(f"{x.tolist()} is outside the convex hull of the nodes")
    k = found[0]
    return float(hull.slopes[k] @ x + hull.offsets[k])


def gamma_extension_eval(hull: LowerHull, x) -> float:
    """Max over all affine pieces: the canonical convex extension to R^d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.max(hull.slopes @ x + hull.offsets))


def envelope_at_nodes(hull: LowerHull) -> np.ndarray:
    """Gamma(u_h) at every point the hull was built from."""
    out = np.array(hull.values, dtype=float)
    others = np.array([i for i in range(len(hull.points)) if not hull.is_vertex(i)], dtype=np.int64)
    if len(others):
        located = hull.locate_many(hull.points[others])
        for i, ks in zip(others, located):
            if len(ks) == 0:
                raise OutsideHull(f"node {i} not covered by the hull")
            k = ks[0]
            out[i] = hull.slopes[k] @ hull.points[i] + hull.offsets[k]
    return out


@dataclass(frozen=True)
class ContactSet:
    nodes: np.ndarray

    def __contains__(self, i) -> bool:
        return int(i) in set(self.nodes.tolist())

    def __len__(self):
        return len(self.nodes)


def contact_mask(u: MeshFunction, hull: LowerHull, gamma=None) -> np.ndarray:
    """Boolean mask over interior nodes of the contact set."""
    if gamma is None:
        gamma = envelope_at_nodes(hull)
    n = u.dom.n_interior
    return np.abs(gamma[:n] - u.values[:n]) <= CONTACT_TOL * u.scale


def contact_set(u: MeshFunction, hull: LowerHull) -> ContactSet:
    return ContactSet(np.flatnonzero(contact_mask(u, hull)))


def boundary_envelope_eval(g, boundary_samples, x) -> float:
    """Largest affine L(x) with L(s) <= g(s) at every boundary sample s.

    ``g`` is a callable or an array of values at ``boundary_samples``.
    """
    S = np.asarray(boundary_samples, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    gv = np.array([g(s) for s in S]) if callable(g) else np.asarray(g, dtype=float)
    d = S.shape[1]
    if len(S) < d + 1:
        raise DegenerateInput("need at least d+1 boundary samples")
    A = np.column_stack([S, np.ones(len(S))])
    c = -np.append(x, 1.0)
    res = linprog(c, A_ub=A, b_ub=gv, bounds=[(None, None)] * (d + 1), method="highs")
    if res.status == 3:
        raise UnboundedEnvelope(f"{x.tolist()} is outside the hull of the boundary samples")
    if res.status != 0:
        raise DegenerateInput(f"envelope LP failed: {res.message}")
    return float(-res.fun)
