"""Strictly convex regularizers with certified geometry.

Each regularizer carries a Certificate (D_squared, alpha, dual_norm, G):
R(p) - min R <= D_squared over the simplex, R is alpha-strongly convex with
respect to the certificate norm, and the matched loss family has norm at most
G under that norm's dual. These three numbers drive the learning rate and the
regret bound of the mirror-descent learner.

Catalog:
  NegEntropy            sum x ln x - x          (ln N, 1, ||.||_1)
  SquaredQNorm(q)       ||x||_q^2               (1, q-1, sqrt(2)||.||_q)
  ScaledEuclidean(eps)  eps ||x||_2^2           (eps, 2, sqrt(eps)||.||_2)
  EllipsoidalQuadratic  eps x.A^-1 x            (eps lmax(A^-1), 2, sqrt(eps)||.||_{A^-1})
  LowRankQuadratic(H,d) x.Hx                    (16d, 2, ||.||_H)
  Composite(R1, R2)     R1 + R2                 (D1^2+D2^2, min(a1,a2)/2, dual sum)

G is fixed to 1 for every catalog entry: each pairs with a primal norm scaled
so the intended loss family sits inside the unit ball. Regularizers are
immutable after construction and certificates are computed eagerly.
"""

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class Certificate:
    """Geometry certificate feeding the regret bound D*G*sqrt(2T/alpha).

    dual_norm is a callable evaluating the norm in which the regularizer is
    strongly convex (batched over leading axes). in_proven_range is False
    when the certificate is constructed outside its proven parameter range
    (q > 2 from sparsity s = 1); values are still reported but the
    strong-convexity guarantee does not hold there.
    """

    __slots__ = ("D_squared", "alpha", "dual_norm", "G", "in_proven_range")

    def __init__(self, D_squared, alpha, dual_norm, G=1.0, in_proven_range=True):
        if not (np.isfinite(D_squared) and D_squared >= 0.0):
            raise ValueError("D_squared must be finite and nonnegative")
        if not (np.isfinite(alpha) and alpha > 0.0):
            raise ValueError("alpha must be finite and positive")
        if not (np.isfinite(G) and G > 0.0):
            raise ValueError("G must be finite and positive")
        self.D_squared = float(D_squared)
        self.alpha = float(alpha)
        self.dual_norm = dual_norm
        self.G = float(G)
        self.in_proven_range = bool(in_proven_range)

    def __repr__(self):
        return "Certificate(D2=%.6g, alpha=%.6g, G=%g)" % (self.D_squared, self.alpha, self.G)


class Regularizer:
    """Base class: dimension, value/gradient, cached certificate."""

    def __init__(self, dimension):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = int(dimension)
        self._cert = None

    def certificate(self):
        if self._cert is None:
            self._cert = self._build_certificate()
        return self._cert

    def __getstate__(self):
        # the cached certificate holds norm closures, which do not pickle;
        # worker processes rebuild it on demand
        state = dict(self.__dict__)
        state["_cert"] = None
        return state

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ValueError("dimension mismatch: %d vs %d" % (x.shape[-1], self.dimension))
        return x

    # Smooth decomposition used by the proximal solvers: returns
    # (quadratic form matrix or None, [(weight, q), ...], entropy weight).
    def _smooth_parts(self):
        raise NotImplementedError


class NegEntropy(Regularizer):
    """Unnormalized negative entropy sum_i (x_i ln x_i - x_i), with the
    0 ln 0 = 0 convention. The induced mirror step is the multiplicative
    weights update."""

    def value(self, x):
        x = self._check(x)
        safe = np.where(x > 0.0, x, 1.0)
        return np.sum(np.where(x > 0.0, x * np.log(safe), 0.0) - x, axis=-1)

    def gradient(self, x):
        x = self._check(x)
        if np.any(x <= 0.0):
            raise ValueError("negative entropy gradient needs strictly positive entries")
        return np.log(x)

    def _build_certificate(self):
        return Certificate(
            D_squared=math.log(self.dimension),
            alpha=1.0,
            dual_norm=lambda v: np.sum(np.abs(v), axis=-1),
        )

    def _smooth_parts(self):
        return None, [], 1.0

    def __repr__(self):
        return "NegEntropy(dim=%d)" % self.dimension


class SquaredQNorm(Regularizer):
    """R(x) = ||x||_q^2 for q in (1, 2].

    The gradient entry 2 ||x||_q^{2-q} |x_i|^{q-1} sign(x_i) is extended by
    continuity to coordinates at zero. Construction with q > 2 is reserved
    for the sparsity helper, which flags the certificate as outside its
    proven range.
    """

    def __init__(self, q, dimension, _allow_wide_q=False):
        super().__init__(dimension)
        if not (1.0 < q <= 2.0) and not (_allow_wide_q and q > 1.0):
            raise ValueError("q must lie in (1, 2]")
        self.q = float(q)

    def value(self, x):
        x = self._check(x)
        s = np.sum(np.abs(x) ** self.q, axis=-1)
        return s ** (2.0 / self.q)

    def gradient(self, x):
        x = self._check(x)
        q = self.q
        ax = np.abs(x)
        s = np.sum(ax**q, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = 2.0 * s ** (2.0 / q - 1.0) * ax ** (q - 1.0) * np.sign(x)
        return np.where(s > 0.0, grad, 0.0)

    def _build_certificate(self):
        q = self.q
        return Certificate(
            D_squared=1.0,
            alpha=q - 1.0,
            dual_norm=lambda v: math.sqrt(2.0) * np.sum(np.abs(v) ** q, axis=-1) ** (1.0 / q),
            in_proven_range=(q <= 2.0),
        )

    def _smooth_parts(self):
        return None, [(1.0, self.q)], 0.0

    def __repr__(self):
        return "SquaredQNorm(q=%.6g, dim=%d)" % (self.q, self.dimension)


class ScaledEuclidean(Regularizer):
    """R(x) = eps ||x||_2^2."""

    def __init__(self, eps, dimension):
        super().__init__(dimension)
        if not (eps > 0.0):
            raise ValueError("eps must be positive")
        self.eps = float(eps)

    def value(self, x):
        x = self._check(x)
        return self.eps * np.sum(x * x, axis=-1)

    def gradient(self, x):
        x = self._check(x)
        return 2.0 * self.eps * x

    def _build_certificate(self):
        eps = self.eps
        return Certificate(
            D_squared=eps,
            alpha=2.0,
            dual_norm=lambda v: math.sqrt(eps) * np.linalg.norm(v, axis=-1),
        )

    def _smooth_parts(self):
        return self.eps * np.eye(self.dimension), [], 0.0

    def __repr__(self):
        return "ScaledEuclidean(eps=%g, dim=%d)" % (self.eps, self.dimension)


def _check_spd(A, name):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("%s must be square" % name)
    if np.max(np.abs(A - A.T)) > 1e-10:
        raise ValueError("%s must be symmetric" % name)
    A = 0.5 * (A + A.T)
    chol = cho_factor(A, lower=True)
    return A, chol


def _power_lambda_max(matvec, n, tol=1e-10, max_iter=100000):
    """Largest eigenvalue of an SPD operator by power iteration."""
    v = np.arange(1.0, n + 1.0)
    v /= np.linalg.norm(v)
    lam_prev = None
    for _ in range(max_iter):
        w = matvec(v)
        lam = float(v @ w)
        v = w / np.linalg.norm(w)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            return lam
        lam_prev = lam
    raise RuntimeError("power iteration did not converge")


class EllipsoidalQuadratic(Regularizer):
    """R(x) = scale * x.Qx for an SPD form matrix Q.

    Matched to the spherical loss space {l : l.Al <= eps} through
    from_space_matrix, which sets Q = A^-1 and scale = eps; lmax(Q) is then
    found by power iteration through the factorization of A rather than by
    inverting it eagerly.
    """

    def __init__(self, form, scale, _lam_max=None):
        form, _ = _check_spd(form, "form")
        super().__init__(form.shape[0])
        if not (scale > 0.0):
            raise ValueError("scale must be positive")
        self.form_matrix = form
        self.form_matrix.setflags(write=False)
        self.scale = float(scale)
        if _lam_max is None:
            _lam_max = _power_lambda_max(lambda v: form @ v, self.dimension)
        self._lam_max = float(_lam_max)

    @classmethod
    def from_space_matrix(cls, A, scale):
        A, chol = _check_spd(A, "A")
        n = A.shape[0]
        lam = _power_lambda_max(lambda v: cho_solve(chol, v), n)
        M = cho_solve(chol, np.eye(n))
        return cls(0.5 * (M + M.T), scale, _lam_max=lam)

    def value(self, x):
        x = self._check(x)
        return self.scale * np.einsum("...i,ij,...j->...", x, self.form_matrix, x)

    def gradient(self, x):
        x = self._check(x)
        return 2.0 * self.scale * (x @ self.form_matrix)

    def _build_certificate(self):
        scale, M = self.scale, self.form_matrix
        return Certificate(
            D_squared=scale * self._lam_max,
            alpha=2.0,
            dual_norm=lambda v: np.sqrt(scale * np.einsum("...i,ij,...j->...", v, M, v)),
        )

    def _smooth_parts(self):
        return self.scale * self.form_matrix, [], 0.0

    def __repr__(self):
        return "EllipsoidalQuadratic(scale=%g, dim=%d)" % (self.scale, self.dimension)


class LowRankQuadratic(Regularizer):
    """R(x) = x.Hx with H = I + U M U^T built from a rank-d subspace.

    d is the subspace rank; the diameter constant 16d comes with the
    enclosing-ellipsoid construction of H.
    """

    def __init__(self, H, d):
        H, chol = _check_spd(H, "H")
        super().__init__(H.shape[0])
        if not (1 <= int(d) <= H.shape[0]):
            raise ValueError("d must lie in [1, N]")
        self.H = H
        self.H.setflags(write=False)
        self.d = int(d)

    def value(self, x):
        x = self._check(x)
        return np.einsum("...i,ij,...j->...", x, self.H, x)

    def gradient(self, x):
        x = self._check(x)
        return 2.0 * (x @ self.H)

    def _build_certificate(self):
        H = self.H
        return Certificate(
            D_squared=16.0 * self.d,
            alpha=2.0,
            dual_norm=lambda v: np.sqrt(np.einsum("...i,ij,...j->...", v, H, v)),
        )

    def _smooth_parts(self):
        return self.H.copy(), [], 0.0

    def __repr__(self):
        return "LowRankQuadratic(d=%d, dim=%d)" % (self.d, self.dimension)


class Composite(Regularizer):
    """Sum of two regularizers; the certificate composes as
    (D1^2 + D2^2, min(alpha1, alpha2)/2, dual1 + dual2)."""

    def __init__(self, left, right):
        if left.dimension != right.dimension:
            raise ValueError("composite children must share dimension")
        super().__init__(left.dimension)
        self.left = left
        self.right = right

    def value(self, x):
        return self.left.value(x) + self.right.value(x)

    def gradient(self, x):
        return self.left.gradient(x) + self.right.gradient(x)

    def _build_certificate(self):
        c1 = self.left.certificate()
        c2 = self.right.certificate()
        d1, d2 = c1.dual_norm, c2.dual_norm
        return Certificate(
            D_squared=c1.D_squared + c2.D_squared,
            alpha=min(c1.alpha, c2.alpha) / 2.0,
            dual_norm=lambda v: d1(v) + d2(v),
            in_proven_range=c1.in_proven_range and c2.in_proven_range,
        )

    def _smooth_parts(self):
        q1, terms1, e1 = self.left._smooth_parts()
        q2, terms2, e2 = self.right._smooth_parts()
        if q1 is None:
            quad = q2
        elif q2 is None:
            quad = q1
        else:
            quad = q1 + q2
        return quad, terms1 + terms2, e1 + e2

    def __repr__(self):
        return "Composite(%r, %r)" % (self.left, self.right)


def value(R, x):
    """R(x), batched over leading axes of x."""
    return R.value(x)


def gradient(R, x):
    """Gradient of R at x (interior of the domain where required)."""
    return R.gradient(x)


def certificate(R):
    """The cached (D^2, alpha, dual norm, G) certificate of R."""
    return R.certificate()


def make_qnorm_for_sparsity(s, N):
    """Squared q-norm regularizer matched to s-sparse losses.

    q = 2 ln(s+1) / (2 ln(s+1) - 1), the Holder conjugate of p = 2 ln(s+1).
    For s < e - 1 this yields q > 2, outside the proven certificate range;
    the regularizer is built anyway with the certificate flagged.
    """
    if s < 1:
        raise ValueError("sparsity must be >= 1")
    if s > N:
        raise ValueError("sparsity cannot exceed the dimension")
    p = 2.0 * math.log(s + 1.0)
    q = p / (p - 1.0)
    return SquaredQNorm(q, N, _allow_wide_q=True)


def compose(R1, R2):
    """Additive composition; value and gradient are sums, the certificate
    follows the composition rule."""
    return Composite(R1, R2)
