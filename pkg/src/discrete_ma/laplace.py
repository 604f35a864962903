"""Discrete Laplace Dirichlet problem with boundary-fitted steps.

The operator is the sum of the second differences along the canonical
directions.  Rows belong to interior nodes; boundary values enter the
right-hand side.  The matrix is an M-matrix (negative diagonal, nonnegative
off-diagonals, nonpositive row sums), which gives the discrete maximum and
comparison principles checked below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DomainError, HypothesisViolated, SingularSystem
from .lattice import LatticeDomain
from .meshfn import MeshFunction, delta_all

MAX_PRINCIPLE_TOL = 1e-10
COMPARISON_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteLaplaceSystem:
    """A w_I + B g = 0, with A over interior unknowns and B coupling to boundary nodes."""

    dom: LatticeDomain
    A: sp.csr_matrix = field(repr=False)
    B: sp.csr_matrix = field(repr=False)

    @property
    def diagonal(self) -> np.ndarray:
        return self.A.diagonal()

    def is_m_matrix(self, tol: float = 1e-12) -> bool:
        diag = self.A.diagonal()
        off = self.A - sp.diags(diag)
        row = np.asarray(self.A.sum(axis=1)).ravel() + np.asarray(self.B.sum(axis=1)).ravel()
        scale = np.abs(diag)
        return bool(
            np.all(diag < 0)
            and (off.nnz == 0 or off.data.min() >= 0)
            and (self.B.nnz == 0 or self.B.data.min() >= 0)
            # rows of the full operator sum to zero (constants are harmonic)
            and np.all(np.abs(row) <= tol * scale)
        )


def _canonical_indices(dom: LatticeDomain):
    out = []
    for k in range(dom.dim):
        e = np.zeros(dom.dim, dtype=np.int64)
        e[k] = 1
        out.append((dom.V.index(e), dom.V.index(-e)))
    return out


def assemble(dom: LatticeDomain) -> DiscreteLaplaceSystem:
    n = dom.n_interior
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    ids = np.arange(n)
    for j, jm in _canonical_indices(dom):
        hp, hm = dom.steps[:, j], dom.steps[:, jm]
        cp = 2.0 / ((hp + hm) * hp)
        cm = 2.0 / ((hp + hm) * hm)
        diag -= cp + cm
        for nb, c in ((dom.neighbors[:, j], cp), (dom.neighbors[:, jm], cm)):
            rows.append(ids)
            cols.append(nb)
            vals.append(c)
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    inner = cols < n
    A = sp.csr_matrix((vals[inner], (rows[inner], cols[inner])), shape=(n, n)) + sp.diags(diag)
    B = sp.csr_matrix(
        (vals[~inner], (rows[~inner], cols[~inner] - n)), shape=(n, dom.n_nodes - n)
    )
    return DiscreteLaplaceSystem(dom, A.tocsr(), B)


def apply_laplacian(u: MeshFunction) -> np.ndarray:
    """Delta_h u at every interior node (sum of canonical second differences)."""
    return sum(delta_all(u, j) for j, _ in _canonical_indices(u.dom))


def laplacian_diagonal(dom: LatticeDomain) -> np.ndarray:
    """|diagonal| of Delta_h per interior node: sum over axes of 2/(h+ h-)."""
    out = np.zeros(dom.n_interior)
    for j, jm in _canonical_indices(dom):
        out += 2.0 / (dom.steps[:, j] * dom.steps[:, jm])
    return out


def scaled_laplacian(u: MeshFunction) -> np.ndarray:
    """Delta_h u divided by its |diagonal|: a weighted average of u minus u(x).

    Same sign as Delta_h u, but free of the 1/h^2 (or 1/(h h_short)) growth, so
    absolute tolerances on it are meaningful at every mesh size.
    """
    return apply_laplacian(u) / laplacian_diagonal(u.dom)


def _boundary_values(dom: LatticeDomain, g) -> np.ndarray:
    if callable(g):
        vals = np.array([float(g(p)) for p in dom.boundary_nodes])
    else:
        vals = np.asarray(g, dtype=float)
        if vals.shape != (dom.n_nodes - dom.n_interior,):
            raise ValueError("need one boundary value per boundary node")
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary data must be finite")
    return vals


def solve_dirichlet(dom: LatticeDomain, g, system: DiscreteLaplaceSystem | None = None) -> MeshFunction:
    """Mesh function with Delta_h w = 0 on interior nodes and w = g on boundary nodes.

    ``g`` is a callable on points or an array of boundary values.  Direct
    sparse LU, one step of iterative refinement, then a check of the
    diagonally scaled residual against 1e-12 * max|g|.
    """
    gb = _boundary_values(dom, g)
    S = system if system is not None else assemble(dom)
    rhs = -(S.B @ gb)
    w = spsolve(S.A.tocsc(), rhs)
    if not np.all(np.isfinite(w)):
        raise SingularSystem("sparse solve returned non-finite values")
    r = rhs - S.A @ w
    w = w + spsolve(S.A.tocsc(), r)
    res = np.max(np.abs((rhs - S.A @ w) / S.diagonal)) if len(w) else 0.0
    gmax = float(np.max(np.abs(gb))) if len(gb) else 0.0
    if res > 1e-12 * max(gmax, 1e-300) and res > 0:
        raise SingularSystem(f"residual {res:.3e} exceeds target")
    return MeshFunction(dom, np.concatenate([w, gb]))


def check_max_principle(w: MeshFunction, g_values=None) -> bool:
    """Interior values lie within [min g, max g] up to 1e-10."""
    gb = w.boundary_values if g_values is None else np.asarray(g_values, dtype=float)
    wi = w.interior_values
    return bool(np.all(wi >= gb.min() - MAX_PRINCIPLE_TOL) and np.all(wi <= gb.max() + MAX_PRINCIPLE_TOL))


def check_comparison(w1: MeshFunction, w2: MeshFunction) -> bool:
    """w1 <= w2 everywhere, given Delta_h w1 >= 0 >= Delta_h w2 and w1 <= w2 on the boundary.

    The hypotheses are verified first and failures raise
    :class:`HypothesisViolated` listing the offending nodes.  The sign
    conditions use :func:`scaled_laplacian` with tolerance 1e-10 times the
    value scale; boundary ordering uses 1e-12.
    """
    if w1.dom is not w2.dom:
        raise ValueError("mesh functions live on different domains")
    n = w1.dom.n_interior
    tol = 1e-10 * max(w1.scale, w2.scale)
    bad1 = np.flatnonzero(scaled_laplacian(w1) < -tol)
    if len(bad1):
        raise HypothesisViolated("Delta_h w1 < 0 at some nodes", bad1)
    bad2 = np.flatnonzero(scaled_laplacian(w2) > tol)
    if len(bad2):
        raise HypothesisViolated("Delta_h w2 > 0 at some nodes", bad2)
    badg = np.flatnonzero(w1.boundary_values > w2.boundary_values + 1e-12) + n
    if len(badg):
        raise HypothesisViolated("boundary data not ordered", badg)
    return bool(np.all(w1.values <= w2.values + COMPARISON_TOL))


@dataclass(frozen=True)
class BarrierConstants:
    mu: float
    d: int
    eta: float
    xi: int
    theta: float
    a: float
    b: float
    a_prime: float
    b_prime: float
    gamma: float

    def as_rows(self):
        return [
            ("theta", self.theta),
            ("a", self.a),
            ("b", self.b),
            ("a_prime", self.a_prime),
            ("b_prime", self.b_prime),
            ("gamma", self.gamma),
        ]


def barrier_constants(mu: float, d: int, eta: float) -> BarrierConstants:
    """Constants of the radial barrier built from |x|^(2-d) on nested annuli."""
    if not (0.0 < mu < 1.0):
        raise DomainError(f"mu must lie in (0, 1), got {mu}")
    if int(d) != d or d < 3:
        raise DomainError(f"d must be an integer >= 3, got {d}")
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    d = int(d)
    xi = d - 2
    p_far = (mu / (2.0 - mu)) ** xi
    p_half = (mu / 2.0) ** xi
    p_quarter = (mu / 4.0) ** xi
    # same as (1 - p_far/2 - p_half/2) / (1 - p_half), without cancellation near 1
    theta = 1.0 - 0.5 * (p_far - p_half) / (1.0 - p_half)
    a = (1.0 - p_half) / (1.0 - p_quarter)
    b = 1.0 - a
    a_prime = (1.0 - p_far) / (1.0 - p_quarter)
    b_prime = (p_far - p_quarter) / (1.0 - p_quarter)
    gamma = 0.25 * (p_far - p_half) / (1.0 - p_quarter) * eta / 4.0
    out = BarrierConstants(mu, d, eta, xi, theta, a, b, a_prime, b_prime, gamma)
    checks = {
        "theta in (0,1)": 0.0 < theta < 1.0,
        "a in (0,1)": 0.0 < a < 1.0,
        "a' in (0,1)": 0.0 < a_prime < 1.0,
        "b' - b + a' = a": abs(b_prime - b + a_prime - a) <= 1e-12,
        "gamma > 0": gamma > 0.0,
    }
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise DomainError(f"barrier constants violate {failed} at mu={mu}, d={d}")
    return out
