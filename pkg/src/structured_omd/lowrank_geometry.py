"""Minimum-volume enclosing ellipsoid machinery for the low-rank regularizer.

Losses of the form l = Uv live in the polytope {Uv : Uv in [0,1]^N}, whose
coefficient body K = {v : Uv in [0,1]^N} is a full-dimensional polytope in
R^d when U has rank d. The low-rank regularizer matrix is H = I_N + U M U^T
where M defines the Lowner-John ellipsoid of the symmetrized coefficient
body. Symmetrization uses the difference body K - K: pairwise differences of
extreme points, which for K = [0,1]^d reproduces the cube [-1,1]^d.

mvee implements Khachiyan's barycentric coordinate ascent with away steps
(the Wolfe-Atwood modification) for linear local convergence; plain ascent
stalls at O(1/k) and cannot reach the default 1e-7 residual in reasonable
time on clustered point sets.
"""

import math
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

MVEE_MAX_ITER = 100000

# vertex enumeration tries all d-subsets of facets; beyond this many subsets
# (or above d = 4) the builder switches to hit-and-run boundary sampling
VERTEX_ENUM_CAP = 200000
PAIR_CAP = 60000

DESK_SCALE_D = 10
DESK_SCALE_N = 4096


class SubspaceSpec:
    """Rank-d subspace given by an N x d basis matrix U."""

    def __init__(self, U):
        U = np.asarray(U, dtype=np.float64)
        if U.ndim != 2:
            raise ValueError("U must be a 2-d array")
        N, d = U.shape
        if not (1 <= d <= N):
            raise ValueError("need 1 <= d <= N")
        svals = np.linalg.svd(U, compute_uv=False)
        if svals[-1] <= 1e-10 * svals[0]:
            raise ValueError("U is numerically rank-deficient")
        self.U = U
        self.U.setflags(write=False)
        self.d = d
        self.N = N

    def __repr__(self):
        return "SubspaceSpec(N=%d, d=%d)" % (self.N, self.d)


class EllipsoidResult:
    """MVEE output: {x : (x - center) . M (x - center) <= 1}."""

    __slots__ = ("M", "center", "iterations", "gap")

    def __init__(self, M, center, iterations, gap):
        self.M = M
        self.center = center
        self.iterations = int(iterations)
        self.gap = float(gap)

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=np.float64)
        y = x - self.center
        val = np.einsum("...i,ij,...j->...", y, self.M, y)
        return val <= 1.0 + slack


def mvee(points, tol=1e-7):
    """Minimum-volume enclosing ellipsoid of a finite point set.

    Khachiyan ascent on the barycentric weights u: X(u) = sum u_j q_j q_j^T
    over lifted points q_j = (p_j, 1), with w_j = q_j . X^-1 q_j. Each round
    takes the most violated add step or the strongest away step. Stops when
    the residual max_j w_j/(d+1) - 1 falls below tol/2, which puts every
    point inside the reported ellipsoid within 1 + tol.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError("points must form a 2-d array")
    m, d = P.shape
    if m < d + 1:
        raise ValueError("need at least d+1 points")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    centered = P - P.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(P).max())) < d:
        raise ValueError("degenerate point set: affine dimension below d")

    Q = np.hstack([P, np.ones((m, 1))])
    u = np.full(m, 1.0 / m)
    stop = tol / 2.0
    gap = np.inf
    it = 0
    for it in range(1, MVEE_MAX_ITER + 1):
        X = (Q * u[:, None]).T @ Q
        S = np.linalg.solve(X, Q.T)
        w = np.einsum("jk,kj->j", Q, S)
        j_plus = int(np.argmax(w))
        gap = w[j_plus] / (d + 1.0) - 1.0
        if gap <= stop:
            break
        support = u > 0.0
        w_support = np.where(support, w, np.inf)
        j_minus = int(np.argmin(w_support))
        drop = 1.0 - w[j_minus] / (d + 1.0)
        if gap >= drop:
            kappa = w[j_plus]
            beta = (kappa - d - 1.0) / ((d + 1.0) * (kappa - 1.0))
            j = j_plus
        else:
            kappa = w[j_minus]
            beta = (kappa - d - 1.0) / ((d + 1.0) * (kappa - 1.0))
            beta = max(beta, -u[j_minus] / (1.0 - u[j_minus]))
            j = j_minus
        u *= 1.0 - beta
        u[j] += beta
        u[u < 0.0] = 0.0
    else:
        raise RuntimeError("mvee did not converge within the iteration cap")

    c = u @ P
    sigma = (P * u[:, None]).T @ P - np.outer(c, c)
    M = np.linalg.inv(sigma) / d
    M = 0.5 * (M + M.T)
    return EllipsoidResult(M=M, center=c, iterations=it, gap=gap)


def _coefficient_constraints(U):
    """Facet system C v <= b of {v : Uv in [0,1]^N}, deduplicated."""
    N = U.shape[0]
    C = np.vstack([U, -U])
    b = np.concatenate([np.ones(N), np.zeros(N)])
    norms = np.linalg.norm(C, axis=1)
    keep = norms > 1e-12
    C, b, norms = C[keep], b[keep], norms[keep]
    C = C / norms[:, None]
    b = b / norms
    stacked = np.round(np.column_stack([C, b]), 12)
    _, idx = np.unique(stacked, axis=0, return_index=True)
    idx = np.sort(idx)
    return C[idx], b[idx]


def _polytope_vertices(C, b):
    """All vertices of {v : Cv <= b} by d-subset enumeration."""
    m, d = C.shape
    idx = np.array(list(combinations(range(m), d)), dtype=np.intp)
    A = C[idx]
    dets = np.abs(np.linalg.det(A))
    ok = dets > 1e-12
    if not np.any(ok):
        return np.empty((0, d))
    sols = np.linalg.solve(A[ok], b[idx[ok]][..., None])[..., 0]
    feas = np.all(sols @ C.T <= b + 1e-9, axis=1)
    verts = sols[feas]
    if verts.shape[0] == 0:
        return verts
    _, uniq = np.unique(np.round(verts, 9), axis=0, return_index=True)
    return verts[np.sort(uniq)]


def _interior_point(C, b):
    """Max-margin interior point of {Cv <= b} (rows are unit-norm)."""
    m, d = C.shape
    A_ub = np.column_stack([C, np.ones(m)])
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b, bounds=[(None, None)] * d + [(0, None)],
                  method="highs")
    if not res.success:
        raise ValueError("coefficient polytope appears empty")
    margin = res.x[-1]
    if margin <= 1e-9:
        raise ValueError("coefficient polytope is lower-dimensional")
    return res.x[:d], margin


def _hit_and_run_boundary(C, b, x0, count, rng):
    """Boundary points of {Cv <= b} collected along a hit-and-run chain."""
    d = C.shape[1]
    x = x0.copy()
    out = np.empty((count, d))
    filled = 0
    warmup = 100
    step = 0
    while filled < count:
        direction = rng.standard_normal(d)
        nrm = np.linalg.norm(direction)
        if nrm < 1e-12:
            continue
        direction /= nrm
        cu = C @ direction
        slack = b - C @ x
        with np.errstate(divide="ignore"):
            ratios = slack / cu
        hi = np.min(ratios[cu > 1e-14]) if np.any(cu > 1e-14) else np.inf
        lo = np.max(ratios[cu < -1e-14]) if np.any(cu < -1e-14) else -np.inf
        if not (np.isfinite(hi) and np.isfinite(lo)) or hi <= lo:
            continue
        step += 1
        if step > warmup:
            out[filled] = x + hi * direction
            filled += 1
            if filled < count:
                out[filled] = x + lo * direction
                filled += 1
        x = x + rng.uniform(lo, hi) * direction
    return out


def _difference_points(P, rng):
    """Pairwise differences p_i - p_j (the difference-body point cloud),
    subsampled to PAIR_CAP when the full set is too large."""
    m = P.shape[0]
    total = m * (m - 1)
    if total <= PAIR_CAP:
        ii, jj = np.where(~np.eye(m, dtype=bool))
        return P[ii] - P[jj]
    half = PAIR_CAP // 2
    ii = rng.integers(0, m, size=half)
    jj = rng.integers(0, m, size=half)
    fix = ii == jj
    jj[fix] = (jj[fix] + 1) % m
    diffs = P[ii] - P[jj]
    return np.vstack([diffs, -diffs])


def build_H(subspace, sample_count=512, tol=1e-7, rng=None):
    """Low-rank regularizer matrix H = I_N + U M U^T.

    The coefficient polytope of the subspace is recovered from its facet
    system; its extreme points come from exact vertex enumeration when d <= 4
    and the subset count is manageable, otherwise from hit-and-run boundary
    sampling with sample_count points. M is the MVEE form matrix of the
    difference-body point cloud.
    """
    if not isinstance(subspace, SubspaceSpec):
        subspace = SubspaceSpec(subspace)
    U, d, N = subspace.U, subspace.d, subspace.N
    if d > DESK_SCALE_D or N > DESK_SCALE_N:
        raise ValueError("build_H is tuned for d <= %d, N <= %d" % (DESK_SCALE_D, DESK_SCALE_N))
    if sample_count < d + 1:
        raise ValueError("sample_count too small")
    if rng is None:
        rng = np.random.default_rng(0)

    C, b = _coefficient_constraints(U)
    use_enum = d <= 4 and math.comb(C.shape[0], d) <= VERTEX_ENUM_CAP
    if use_enum:
        pts = _polytope_vertices(C, b)
        if pts.shape[0] < d + 1 or np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9) < d:
            raise ValueError("coefficient polytope is lower-dimensional")
    else:
        x0, _ = _interior_point(C, b)
        pts = _hit_and_run_boundary(C, b, x0, sample_count, rng)

    diffs = _difference_points(pts, rng)
    res = mvee(diffs, tol=tol)
    H = np.eye(N) + U @ res.M @ U.T
    return 0.5 * (H + H.T)
