"""Atomic norms, their duals, and Minkowski-sum norms.

An atomic set A here is convex, compact, and centrally symmetric; it induces
the gauge ||x||_A = inf {t > 0 : x in tA} (0 at the origin by convention) and
the dual norm sup {x.z : z in A}, the support function of A. Supported sets:
scaled p-norm balls, ellipsoids, and Minkowski sums of those.

The gauge of a Minkowski sum has no closed form; minkowski_norm computes it
through the decomposition characterization

    ||x||_{A1+A2} = inf { max(||x1||_{A1}, ||x2||_{A2}) : x1 + x2 = x }

by bisection on t over the feasibility predicate dist_{A2}(x, t*A1) <= t,
with exact Euclidean inner projections wherever the metric operand is
spherical (or both operands are ellipsoidal) and an alternating-projection
feasibility check for the remaining pairs. The returned value carries a
witness decomposition retrievable via minkowski_decompose.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh, solve_triangular


class AtomicSet:
    """Base class carrying the ambient dimension."""

    def __init__(self, dimension):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = int(dimension)

    def _check_dim(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ValueError(
                "vector dimension %d does not match set dimension %d"
                % (x.shape[-1], self.dimension)
            )
        return x


class ScaledPNormBall(AtomicSet):
    """The set {x : ||x||_p <= scale}.

    Gauge: ||x||_p / scale. Dual norm: scale * ||x||_q with 1/p + 1/q = 1;
    the p = 1 and p = inf endpoints are handled as explicit limit cases.
    """

    def __init__(self, p, scale, dimension):
        super().__init__(dimension)
        if not (p >= 1.0):
            raise ValueError("p must be >= 1")
        if not (scale > 0.0):
            raise ValueError("scale must be positive")
        self.p = float(p)
        self.scale = float(scale)
        if self.p == 1.0:
            self.q = np.inf
        elif np.isinf(self.p):
            self.q = 1.0
        else:
            self.q = self.p / (self.p - 1.0)

    def norm(self, x):
        x = self._check_dim(x)
        return np.linalg.norm(x, ord=self.p, axis=-1) / self.scale

    def dual_norm(self, x):
        x = self._check_dim(x)
        return self.scale * np.linalg.norm(x, ord=self.q, axis=-1)

    def __repr__(self):
        return "ScaledPNormBall(p=%g, scale=%g, dim=%d)" % (self.p, self.scale, self.dimension)


class Ellipsoid(AtomicSet):
    """The set {x : x.Qx <= 1} for symmetric positive-definite Q.

    Gauge: sqrt(x.Qx). Dual norm: sqrt(x.Q^-1 x), evaluated through a cached
    Cholesky factorization; the inverse is never formed.
    """

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if np.max(np.abs(Q - Q.T)) > 1e-12:
            raise ValueError("Q must be symmetric within 1e-12")
        super().__init__(Q.shape[0])
        self.Q = 0.5 * (Q + Q.T)
        self.Q.setflags(write=False)
        # Raises LinAlgError when Q is not positive definite.
        self._chol = cho_factor(self.Q, lower=True)
        self._eig = None

    def norm(self, x):
        x = self._check_dim(x)
        return np.sqrt(np.einsum("...i,ij,...j->...", x, self.Q, x))

    def dual_norm(self, x):
        x = self._check_dim(x)
        flat = x.reshape(-1, self.dimension)
        sol = cho_solve(self._chol, flat.T)
        vals = np.sqrt(np.einsum("ni,in->n", flat, sol))
        return vals.reshape(x.shape[:-1]) if x.ndim > 1 else float(vals[0])

    def eig(self):
        if self._eig is None:
            w, v = eigh(self.Q)
            self._eig = (w, v)
        return self._eig

    def __repr__(self):
        return "Ellipsoid(dim=%d)" % self.dimension


class MinkowskiSum(AtomicSet):
    """The Minkowski sum A1 + A2 of two atomic sets of equal dimension."""

    def __init__(self, left, right):
        if left.dimension != right.dimension:
            raise ValueError("Minkowski sum children must share dimension")
        super().__init__(left.dimension)
        self.left = left
        self.right = right

    def norm(self, x):
        x = self._check_dim(x)
        if x.ndim > 1:
            flat = x.reshape(-1, self.dimension)
            out = np.array([minkowski_norm(self.left, self.right, row) for row in flat])
            return out.reshape(x.shape[:-1])
        return minkowski_norm(self.left, self.right, x)

    def dual_norm(self, x):
        # Support functions add exactly over Minkowski sums.
        x = self._check_dim(x)
        return self.left.dual_norm(x) + self.right.dual_norm(x)

    def __repr__(self):
        return "MinkowskiSum(%r, %r)" % (self.left, self.right)


def norm(set_, x):
    """Gauge of x with respect to the atomic set."""
    return set_.norm(x)


def dual_norm(set_, x):
    """Support function of the atomic set evaluated at x."""
    return set_.dual_norm(x)


# ---------------------------------------------------------------------------
# Exact Euclidean projections used by the Minkowski-norm solver.
# ---------------------------------------------------------------------------


def _project_l1_ball(x, r):
    if np.sum(np.abs(x)) <= r:
        return x.copy()
    u = np.sort(np.abs(x))[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, x.shape[0] + 1)
    cond = u - (css - r) / ks > 0.0
    k = np.nonzero(cond)[0][-1] + 1
    theta = (css[k - 1] - r) / k
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def _project_pball(x, p, r):
    if r <= 0.0:
        return np.zeros_like(x)
    if p == 1.0:
        return _project_l1_ball(x, r)
    if p == 2.0:
        nx = np.linalg.norm(x)
        return x if nx <= r else x * (r / nx)
    if np.isinf(p):
        return np.clip(x, -r, r)
    raise NotImplementedError("no exact Euclidean projection for p=%g balls" % p)


def _project_ellipsoid(x, eig_pair, r):
    """Euclidean projection onto {w : w.Qw <= r^2} given eigh(Q)."""
    lam, vec = eig_pair
    if r <= 0.0:
        return np.zeros_like(x)
    c = vec.T @ x
    val = np.sum(lam * c * c)
    r2 = r * r
    if val <= r2:
        return x.copy()
    # Solve sum lam_i c_i^2 / (1 + mu lam_i)^2 = r^2 for mu > 0 by bisection;
    # the left side is strictly decreasing in mu.
    lam_min = lam[0]
    hi = (np.sqrt(val / r2) - 1.0) / lam_min
    lo = 0.0
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        f = np.sum(lam * c * c / (1.0 + mu * lam) ** 2)
        if f > r2:
            lo = mu
        else:
            hi = mu
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    mu = 0.5 * (lo + hi)
    return vec @ (c / (1.0 + mu * lam))


def _leaf_kind(s):
    if isinstance(s, ScaledPNormBall):
        if s.p in (1.0, 2.0) or np.isinf(s.p):
            return "pball"
        return "pball_general"
    if isinstance(s, Ellipsoid):
        return "ellipsoid"
    return "sum"


def _is_l2_like(s):
    kind = _leaf_kind(s)
    return kind == "ellipsoid" or (kind == "pball" and s.p == 2.0)


def _dist_to_scaled_set(x, set_, t, whiten=None):
    """Euclidean distance from x to t * set_, with the witness point.

    whiten, when given, is the lower Cholesky factor L of the metric Q2 in
    which the distance is measured (distance of z measured as ||L^T z||_2).
    """
    if whiten is None:
        if isinstance(set_, ScaledPNormBall):
            w = _project_pball(x, set_.p, t * set_.scale)
        else:
            w = _project_ellipsoid(x, set_.eig(), t)
        return np.linalg.norm(x - w), w
    # Whitened coordinates y = L^T w; a source ellipsoid w.Q1w <= t^2 maps to
    # y.(L^-1 Q1 L^-T)y <= t^2, still an ellipsoid.
    L = whiten
    y = L.T @ x
    if isinstance(set_, Ellipsoid):
        B = solve_triangular(L, set_.Q, lower=True)
        Qt = solve_triangular(L, B.T, lower=True)
        Qt = 0.5 * (Qt + Qt.T)
        lam, vec = eigh(Qt)
        yproj = _project_ellipsoid(y, (lam, vec), t)
    elif isinstance(set_, ScaledPNormBall) and set_.p == 2.0:
        # A scaled l2 ball maps to an ellipsoid with Q = (L^-1 L^-T)/c^2.
        Minv = cho_solve((L, True), np.eye(L.shape[0]))
        Qt = Minv / (set_.scale**2)
        Qt = 0.5 * (Qt + Qt.T)
        lam, vec = eigh(Qt)
        yproj = _project_ellipsoid(y, (lam, vec), t)
    else:
        raise NotImplementedError
    w = solve_triangular(L.T, yproj, lower=False)
    return np.linalg.norm(y - L.T @ w), w


def _feasible_l2like(x, a1, a2, t):
    """Feasibility of the split at level t when a2 is l2-like.

    Checks dist_{A2}(x, t*A1) <= t exactly; returns (ok, witness x1).
    """
    if isinstance(a2, ScaledPNormBall):
        d, w = _dist_to_scaled_set(x, a1, t)
        return d <= t * a2.scale, w
    lam2, _ = a2.eig()
    L = np.linalg.cholesky(a2.Q)
    d, w = _dist_to_scaled_set(x, a1, t, whiten=L)
    return d <= t, w


def _euclidean_project(set_, v, t):
    """Euclidean projection of v onto t * set_."""
    if isinstance(set_, ScaledPNormBall):
        return _project_pball(v, set_.p, t * set_.scale)
    return _project_ellipsoid(v, set_.eig(), t)


def _feasible_alternating(x, a1, a2, t, eps, cap=2000):
    """Alternating-projection feasibility between t*A1 and x - t*A2.

    Used for the operand pairs without an exact inner projection (l1/linf
    against each other or against a non-spherical ellipsoid); both sets
    admit exact Euclidean projections, and the alternation gap shrinks to
    zero exactly when the split is feasible.
    """

    def proj1(v):
        return _euclidean_project(a1, v, t)

    def proj2(v):
        return x - _euclidean_project(a2, x - v, t)

    a = proj1(x * 0.5)
    prev_gap = np.inf
    for _ in range(cap):
        b = proj2(a)
        a_next = proj1(b)
        gap = np.linalg.norm(a_next - b)
        if gap <= eps:
            return True, a_next
        if prev_gap - gap <= eps * 1e-3:
            return False, a_next
        prev_gap = gap
        a = a_next
    return False, a


def minkowski_decompose(left, right, x, tol=1e-8, max_iter=10000):
    """Minkowski-sum gauge with a witness split x = x1 + x2.

    Returns (value, x1, x2) where value approximates
    inf max(||x1||_left, ||x2||_right) within absolute tolerance tol and the
    witness attains it up to the same slack. Bisection on the level t: the
    scaling argument behind the decomposition characterization makes
    feasibility of {dist_right(x, t*left) <= t} monotone in t.
    """
    if left.dimension != right.dimension:
        raise ValueError("operands must share dimension")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (left.dimension,):
        raise ValueError("x must be a vector of the operand dimension")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if not np.any(x):
        z = np.zeros_like(x)
        return 0.0, z, z

    swapped = False
    a1, a2 = left, right
    if not _is_l2_like(a2) and _is_l2_like(a1):
        a1, a2 = a2, a1
        swapped = True

    k1, k2 = _leaf_kind(a1), _leaf_kind(a2)
    if k1 in ("sum", "pball_general") or k2 in ("sum", "pball_general"):
        raise NotImplementedError(
            "minkowski_norm supports l1/l2/linf balls and ellipsoids as operands"
        )

    exact_inner = _is_l2_like(a2) and (
        isinstance(a2, ScaledPNormBall) or _is_l2_like(a1))
    if exact_inner:
        feasible = lambda t: _feasible_l2like(x, a1, a2, t)
    else:
        # l1/linf against each other or against a non-spherical ellipsoid.
        feasible = lambda t: _feasible_alternating(x, a1, a2, t, eps=max(0.25 * tol, 1e-12))

    hi = min(float(a1.norm(x)), float(a2.norm(x)))
    lo = 0.0
    ok, wit = feasible(hi)
    if not ok:
        # The single-set assignment is always feasible; only numerical slack
        # can make it fail, so widen slightly.
        hi *= 1.0 + 1e-9
        ok, wit = feasible(hi)
    steps = 0
    while hi - lo > tol and steps < max_iter:
        mid = 0.5 * (lo + hi)
        ok, w = feasible(mid)
        if ok:
            hi, wit = mid, w
        else:
            lo = mid
        steps += 1
    if hi - lo > tol:
        raise RuntimeError("minkowski_norm failed to bracket within %d steps" % max_iter)
    x1 = wit
    x2 = x - x1
    if swapped:
        x1, x2 = x2, x1
    return 0.5 * (lo + hi), x1, x2


def minkowski_norm(left, right, x, tol=1e-8, max_iter=10000):
    """Gauge of x under the Minkowski sum left + right (see minkowski_decompose)."""
    value, _, _ = minkowski_decompose(left, right, x, tol=tol, max_iter=max_iter)
    return value
