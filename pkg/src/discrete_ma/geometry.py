"""Small planar convex-geometry kernels shared by the hull and cell code."""

from __future__ import annotations

import math

import numpy as np


def hull2d(points, tol: float = 1e-12) -> np.ndarray:
    """Indices of the strict convex hull vertices, CCW from the lexicographic minimum.

    Collinear and duplicate points are dropped; the turn test is normalized by
    the lengths of both legs, so ``tol`` is a sine.  Degenerate inputs return
    one (all points equal) or two (all collinear) indices.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    P = pts.tolist()

    def turn(o, a, b):
        ax, ay = P[a][0] - P[o][0], P[a][1] - P[o][1]
        bx, by = P[b][0] - P[o][0], P[b][1] - P[o][1]
        c = ax * by - ay * bx
        return c > tol * math.hypot(ax, ay) * math.hypot(bx, by)

    def chain(idx):
        out = []
        for k in idx:
            while len(out) >= 2 and not turn(out[-2], out[-1], k):
                out.pop()
            if out and P[out[-1]] == P[k]:
                continue
            out.append(k)
        return out

    lower = chain(order.tolist())
    upper = chain(order[::-1].tolist())
    hull = lower[:-1] + upper[:-1]
    if not hull:
        hull = lower[:1]
    if len(hull) == 2 and P[hull[0]] == P[hull[1]]:
        hull = hull[:1]
    return np.array(hull, dtype=np.int64)


def polygon_area(verts) -> float:
    """Signed shoelace area (positive for CCW); 0 for fewer than 3 vertices."""
    v = np.asarray(verts, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_halfplane(poly: list, a0: float, a1: float, b: float) -> list:
    """Sutherland-Hodgman clip of a convex polygon (list of (x, y)) to a0*x + a1*y <= b."""
    n = len(poly)
    if n == 0:
        return poly
    out = []
    prev = poly[-1]
    sp = a0 * prev[0] + a1 * prev[1] - b
    for cur in poly:
        sc = a0 * cur[0] + a1 * cur[1] - b
        if sc <= 0.0:
            if sp > 0.0:
                t = sp / (sp - sc)
                out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
            out.append(cur)
        elif sp <= 0.0:
            t = sp / (sp - sc)
            out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
        prev, sp = cur, sc
    return out


def prune_polygon(verts, tol: float) -> np.ndarray:
    """Merge near-duplicate and near-collinear vertices (absolute distance ``tol``).

    The result is a strictly convex CCW polygon, a segment (2 rows), a point
    (1 row) or empty.
    """
    v = [tuple(p) for p in np.asarray(verts, dtype=float).reshape(-1, 2)]
    if not v:
        return np.zeros((0, 2))
    changed = True
    while changed and len(v) > 1:
        changed = False
        # duplicates
        k = 0
        while k < len(v) and len(v) > 1:
            p, q = v[k], v[(k + 1) % len(v)]
            if math.hypot(p[0] - q[0], p[1] - q[1]) <= tol:
                del v[(k + 1) % len(v)]
                changed = True
            else:
                k += 1
        if len(v) < 3:
            break
        # collinear: distance of v[k] from the chord of its neighbours
        for k in range(len(v)):
            a, b, c = v[k - 1], v[k], v[(k + 1) % len(v)]
            cx, cy = c[0] - a[0], c[1] - a[1]
            L = math.hypot(cx, cy)
            if L == 0.0:
                dist = math.hypot(b[0] - a[0], b[1] - a[1])
            else:
                dist = abs(cx * (b[1] - a[1]) - cy * (b[0] - a[0])) / L
            if dist <= tol:
                del v[k]
                changed = True
                break
    if len(v) == 2:
        a, b = v
        if math.hypot(a[0] - b[0], a[1] - b[1]) <= tol:
            v = [a]
    return np.array(v, dtype=float).reshape(-1, 2)


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return float(np.linalg.norm(p - a))
    t = min(max(float((p - a) @ ab) / L2, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def point_convex_distance(p, verts) -> float:
    """Euclidean distance from p to the convex set with CCW vertices ``verts``."""
    v = np.asarray(verts, dtype=float).reshape(-1, 2)
    p = np.asarray(p, dtype=float)
    k = len(v)
    if k == 0:
        return math.inf
    if k == 1:
        return float(np.linalg.norm(p - v[0]))
    if k == 2:
        return _point_segment_distance(p, v[0], v[1])
    e = np.roll(v, -1, axis=0) - v
    w = p - v
    if np.all(e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0] >= 0.0):
        return 0.0
    return min(_point_segment_distance(p, v[i], v[(i + 1) % k]) for i in range(k))


def hausdorff(A, B) -> float:
    """Hausdorff distance between two convex sets given by vertex lists.

    Both empty gives 0; exactly one empty gives inf.  For convex sets the
    one-sided distance is attained at a vertex.
    """
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if len(A) == 0 and len(B) == 0:
        return 0.0
    if len(A) == 0 or len(B) == 0:
        return math.inf
    dab = max(point_convex_distance(a, B) for a in A)
    dba = max(point_convex_distance(b, A) for b in B)
    return max(dab, dba)


def convex_intersection(P, Q) -> np.ndarray:
    """Intersection polygon of two convex CCW polygons."""
    P = np.asarray(P, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float).reshape(-1, 2)
    if len(P) < 3 or len(Q) < 3:
        return np.zeros((0, 2))
    poly = [tuple(p) for p in P]
    for i in range(len(Q)):
        a, b = Q[i], Q[(i + 1) % len(Q)]
        # keep the left side of edge a->b
        n0, n1 = b[1] - a[1], -(b[0] - a[0])
        poly = clip_halfplane(poly, n0, n1, n0 * a[0] + n1 * a[1])
        if not poly:
            break
    return np.array(poly, dtype=float).reshape(-1, 2)


def points_in_convex(points, verts, tol: float = 0.0) -> np.ndarray:
    """Boolean mask of points inside a convex CCW polygon (closed, with slack ``tol``)."""
    pts = np.asarray(points, dtype=float)
    v = np.asarray(verts, dtype=float).reshape(-1, 2)
    mask = np.ones(len(pts), dtype=bool)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        ex, ey = b - a
        L = math.hypot(ex, ey)
        side = ex * (pts[:, 1] - a[1]) - ey * (pts[:, 0] - a[0])
        mask &= side >= -tol * L
    return mask
