"""Online Mirror Descent on the probability simplex, plus the Hedge baseline.

Each round solves the proximal step

    p_{t+1} = argmin_{p in simplex}  eta * l_t . p + B_R(p, p_t)

instead of the two-line mirror-map form; the two coincide whenever the dual
update stays inside the gradient range of R, and the proximal form is well
defined for every regularizer in the catalog, including composites with no
closed-form inverse gradient.

Inner solvers, chosen per regularizer structure:
  negative entropy         closed-form multiplicative weights
  pure quadratic, eps*I    sort-based Euclidean projection
  pure quadratic, general  active-set QP on the simplex (exact pivots)
  q-norm terms present     active-set Newton, entropic fallback
  entropy in a composite   entropic mirror descent inner loop

The first three are exact up to floating point; the last two stop at a
Frank-Wolfe gap of 1e-10, which bounds the suboptimality on the simplex.
Projected gradient is a poor fit for the q-norm cases: with q < 2 the
curvature grows like z^(q-2) at small coordinates, so additive steps either
violate the descent test or round to no movement. Newton on the current
support has no such limit because the offending coordinates are pinned at
exactly zero or solved directly.
"""

import math
import weakref

import numpy as np

from .core import LossSequence, LossVector, SimplexPoint, regret_of
from .kernels import prox_pgd, simplex_project

GAP_TOL = 1e-10
PGD_CAP_FACTOR = 50

# Regularizers are immutable, so their smooth decomposition and the
# scaled-identity detection are computed once per instance, not per round.
_PROFILE_CACHE = weakref.WeakKeyDictionary()


def _profile(R):
    prof = _PROFILE_CACHE.get(R)
    if prof is None:
        quad, qterms, entw = R._smooth_parts()
        scale = None if quad is None else _scaled_identity(quad)
        prof = (quad, qterms, entw, scale)
        _PROFILE_CACHE[R] = prof
    return prof


class SolverError(RuntimeError):
    """An inner proximal solve failed to reach an acceptable gap."""


class OmdState:
    """Learner state: the point to play this round, plus bookkeeping.

    eta is fixed for the lifetime of the state. _tau carries the inner
    solver's step-size hint between rounds (warm start only; no effect on
    the solution).
    """

    __slots__ = ("current", "regularizer", "eta", "round", "cumulative_loss", "_tau")

    def __init__(self, current, regularizer, eta, round, cumulative_loss, _tau=1.0):
        if eta <= 0.0 or not np.isfinite(eta):
            raise ValueError("eta must be positive and finite")
        if round < 1:
            raise ValueError("round starts at 1")
        self.current = current
        self.regularizer = regularizer
        self.eta = float(eta)
        self.round = int(round)
        self.cumulative_loss = float(cumulative_loss)
        self._tau = float(_tau)

    def __repr__(self):
        return "OmdState(round=%d, eta=%g, cumulative_loss=%.6g)" % (
            self.round, self.eta, self.cumulative_loss)


class BregmanQuery:
    """One proximal subproblem: argmin eta * loss . p + B_R(p, anchor)."""

    __slots__ = ("regularizer", "anchor", "loss", "eta")

    def __init__(self, regularizer, anchor, loss, eta):
        if anchor.dimension != regularizer.dimension or loss.dimension != regularizer.dimension:
            raise ValueError("query dimensions disagree")
        self.regularizer = regularizer
        self.anchor = anchor
        self.loss = loss
        self.eta = float(eta)


def _scaled_identity(quad):
    """eps if quad == eps * I exactly, else None."""
    dg = np.diagonal(quad)
    if dg[0] <= 0.0 or np.ptp(dg) != 0.0:
        return None
    off = quad - np.diag(dg)
    if np.count_nonzero(off):
        return None
    return float(dg[0])


def _active_set_qp(Q, c, start):
    """Exact minimizer of p.Qp + c.p over the simplex, Q SPD.

    Primal active-set iteration warm-started from the support of `start`.
    Each pivot solves the equality-constrained KKT system on the free set;
    blocking constraints are dropped one at a time. Returns None if the
    pivot cap is hit (caller falls back to the gap-certified solver).
    """
    n = c.shape[0]
    p = start.copy()
    free = p > 0.0
    if not np.any(free):
        free[int(np.argmin(c))] = True
        p = np.zeros(n)
        p[free] = 1.0
    ones_col = None
    for _ in range(3 * n + 10):
        idx = np.where(free)[0]
        k = idx.shape[0]
        kkt = np.empty((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * Q[np.ix_(idx, idx)]
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        kkt[k, k] = 0.0
        rhs = np.empty(k + 1)
        rhs[:k] = -c[idx]
        rhs[k] = 1.0
        sol = np.linalg.solve(kkt, rhs)
        x_f = sol[:k]
        lam = sol[k]
        if np.min(x_f) < -1e-13:
            d_f = x_f - p[idx]
            shrink = (x_f < -1e-13) & (d_f < 0.0)
            alphas = p[idx][shrink] / -d_f[shrink]
            j = int(np.argmin(alphas))
            alpha = alphas[j]
            block = idx[np.where(shrink)[0][j]]
            p[idx] += alpha * d_f
            p[block] = 0.0
            free[block] = False
            continue
        p = np.zeros(n)
        p[idx] = np.maximum(x_f, 0.0)
        g = 2.0 * (Q @ p) + c
        mu = g + lam
        mu[free] = np.inf
        worst = int(np.argmin(mu))
        scale = max(1.0, float(np.max(np.abs(g))))
        if mu[worst] >= -1e-12 * scale:
            return p
        free[worst] = True
    return None


def _entropy_value_grad(p, lin, quad, qterms, entw):
    val = float(lin @ p)
    grad = lin.copy()
    if quad is not None:
        qp = quad @ p
        val += float(p @ qp)
        grad += 2.0 * qp
    for w, q in qterms:
        s = float(np.sum(p**q))
        if s > 0.0:
            val += w * s ** (2.0 / q)
            grad += w * (2.0 * s ** (2.0 / q - 1.0)) * p ** (q - 1.0)
    if entw != 0.0:
        logp = np.log(p)
        val += entw * float(np.sum(p * logp - p))
        grad += entw * logp
    return val, grad


def _lift_root(margin, a, uterms):
    """Positive root of a*t + sum_j u_j * t^(q_j - 1) = margin.

    The left side is zero at t = 0 and strictly increasing, so bisection on
    a bracket is enough; accuracy only seeds a new support coordinate.
    """
    def h(t):
        out = a * t
        for u, q in uterms:
            out += u * t ** (q - 1.0)
        return out

    hi = 1.0
    for _ in range(200):
        if h(hi) >= margin:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if h(mid) < margin:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _qnorm_newton(lin, quad, qterms, start, tol):
    """Active-set Newton for proximal subproblems with q-norm terms.

    Minimizes lin.p + p.Qp + sum_j w_j ||p||_{q_j}^2 over the simplex. On a
    fixed support the objective is smooth, so equality-constrained Newton
    steps converge quadratically; coordinates leave the support by hitting
    zero during the line search and enter through a dual lift-off at their
    one-dimensional stationarity estimate. Returns (p, gap); gap is the
    Frank-Wolfe certificate at the returned point.
    """
    n = lin.shape[0]
    z = np.maximum(np.asarray(start, dtype=np.float64), 0.0)
    z[z < 1e-15] = 0.0
    tot = z.sum()
    z = np.full(n, 1.0 / n) if tot <= 0.0 else z / tot
    best_z = z
    best_gap = np.inf
    last_lift = -1
    lifts = 0
    for _ in range(60 + 3 * n):
        idx = np.flatnonzero(z > 0.0)
        if idx.shape[0] == 0:
            z = np.full(n, 1.0 / n)
            idx = np.flatnonzero(z)
        k = idx.shape[0]
        val, grad = _entropy_value_grad(z, lin, quad, qterms, 0.0)
        gap = float(grad @ z) - float(np.min(grad))
        if gap < best_gap:
            best_z, best_gap = z, gap
        if gap <= tol:
            return z, gap
        zF = z[idx]
        H = np.zeros((k, k))
        if quad is not None:
            H += 2.0 * quad[np.ix_(idx, idx)]
        for w, q in qterms:
            s = float(np.sum(zF**q))
            beta = 2.0 / q - 1.0
            v = zF ** (q - 1.0)
            H += (2.0 * w * q * beta * s ** (beta - 1.0)) * np.outer(v, v)
            H[np.arange(k), np.arange(k)] += (
                2.0 * w * (q - 1.0) * s**beta) * zF ** (q - 2.0)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = H
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[:k] = -grad[idx]
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            kkt[:k, :k] += 1e-10 * np.eye(k)
            sol = np.linalg.solve(kkt, rhs)
        d = sol[:k]
        slope = float(grad[idx] @ d)
        neg = d < -1e-300
        tmax = 1.0
        if np.any(neg):
            tmax = min(1.0, float(np.min(zF[neg] / -d[neg])))
        moved = False
        if slope < -1e-14 * (1.0 + abs(val)):
            # Global phase: damped step under an Armijo decrease test.
            step = tmax
            for _ in range(40):
                zn = z.copy()
                zn[idx] = np.maximum(zF + step * d, 0.0)
                vn, _ = _entropy_value_grad(zn, lin, quad, qterms, 0.0)
                if vn <= val + 1e-4 * step * slope:
                    zn[zn < 1e-16] = 0.0
                    z = zn / zn.sum()
                    moved = True
                    break
                step *= 0.5
        else:
            # Local phase: the remaining objective decrease is below the
            # floating-point noise floor, so objective comparisons cannot
            # steer. The Frank-Wolfe gap is a gradient statement and stays
            # accurate, so accept the Newton step whenever it shrinks it.
            step = tmax
            for _ in range(8):
                zn = z.copy()
                zn[idx] = np.maximum(zF + step * d, 0.0)
                zn[zn < 1e-16] = 0.0
                s = zn.sum()
                if s > 0.0:
                    zn = zn / s
                    _, gn = _entropy_value_grad(zn, lin, quad, qterms, 0.0)
                    if float(gn @ zn) - float(np.min(gn)) < gap:
                        z = zn
                        moved = True
                        break
                step *= 0.5
        if moved:
            continue
        # No step helps on this support: try a dual lift-off, else stop.
        lam = float(np.mean(grad[idx]))
        viol = lam - grad
        viol[z > 0.0] = -np.inf
        worst = int(np.argmax(viol))
        if viol[worst] <= max(tol, 1e-12 * (1.0 + abs(lam))):
            return best_z, best_gap
        if worst == last_lift or lifts >= 30:
            return best_z, best_gap
        a = 2.0 * float(quad[worst, worst]) if quad is not None else 0.0
        uterms = []
        for w, q in qterms:
            s = float(np.sum(z**q))
            uterms.append((2.0 * w * s ** (2.0 / q - 1.0), q))
        z = z.copy()
        z[worst] = max(_lift_root(float(viol[worst]), a, uterms), 1e-12)
        z = z / z.sum()
        last_lift = worst
        lifts += 1
    if np.isfinite(best_gap):
        return best_z, best_gap
    return None


def _entropic_prox(anchor, lin, quad, qterms, entw, tol, max_iter):
    """Inner solve for composites containing negative entropy.

    Entropic mirror descent with monotone backtracking; iterates stay
    strictly positive, matching the interior optimum the entropy term
    enforces, so the Frank-Wolfe gap certifies suboptimality.
    """
    p = np.maximum(np.asarray(anchor, dtype=np.float64), 1e-16)
    p = p / np.sum(p)
    val, grad = _entropy_value_grad(p, lin, quad, qterms, entw)
    tau = 1.0
    gap = float(grad @ p) - float(np.min(grad))
    it = 0
    while gap > tol and it < max_iter:
        accepted = False
        for _ in range(60):
            a = np.log(p) - tau * grad
            a -= np.max(a)
            y = np.exp(a)
            y = np.maximum(y / np.sum(y), 1e-300)
            y_val, y_grad = _entropy_value_grad(y, lin, quad, qterms, entw)
            if y_val < val:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
        p, val, grad = y, y_val, y_grad
        tau *= 1.2
        gap = float(grad @ p) - float(np.min(grad))
        it += 1
    return p, gap


def _solve_query(query, tau_hint=1.0):
    """Dispatch one proximal subproblem to the matching inner solver.

    Returns (weights, tau_hint_out).
    """
    R = query.regularizer
    anchor = query.anchor.weights
    l = query.loss.entries
    eta = query.eta
    quad, qterms, entw, scale = _profile(R)

    if entw > 0.0 and quad is None and not qterms:
        with np.errstate(divide="ignore"):
            a = np.where(anchor > 0.0, np.log(anchor), -np.inf) - eta * l
        a -= np.max(a)
        w = np.exp(a)
        return w / np.sum(w), tau_hint

    if entw == 0.0 and not qterms:
        if scale is not None:
            return simplex_project(anchor - (eta / (2.0 * scale)) * l), tau_hint
        lin = eta * l - 2.0 * (quad @ anchor)
        p = _active_set_qp(quad, lin, anchor)
        if p is not None:
            return p, tau_hint
        p, gap, _, tau = prox_pgd(anchor, lin, quad, np.empty(0), np.empty(0),
                                  1e-12, 100 * R.dimension, tau_hint)
        if gap > 1e-6:
            raise SolverError("quadratic prox stalled at gap %.3g" % gap)
        return p, tau

    lin = eta * l - R.gradient(anchor)
    if entw == 0.0:
        res = _qnorm_newton(lin, quad, qterms, anchor, GAP_TOL)
        if res is not None and res[1] <= 1e-6:
            return res[0], tau_hint
        p, gap = _entropic_prox(anchor, lin, quad, qterms, 0.0,
                                GAP_TOL, 200 * R.dimension)
        if res is not None and res[1] < gap:
            p, gap = res
        if gap > 1e-6:
            raise SolverError("q-norm prox stalled at gap %.3g" % gap)
        return p, tau_hint

    p, gap = _entropic_prox(anchor, lin, quad, qterms, entw,
                            GAP_TOL, 200 * R.dimension)
    if gap > 1e-6:
        raise SolverError("entropic prox stalled at gap %.3g" % gap)
    return p, tau_hint


def init(R, eta):
    """Initial state: p_1 = argmin of R over the simplex.

    Closed-form uniform whenever every term of R is symmetric under
    coordinate permutation (entropy, q-norms, eps * I quadratics); general
    quadratics go through the active-set solver and other composites through
    the same inner solvers as step, to objective tolerance 1e-10.
    """
    n = R.dimension
    uniform = np.full(n, 1.0 / n)
    quad, qterms, entw, scale = _profile(R)
    if quad is None or scale is not None:
        current = uniform
    elif entw == 0.0 and not qterms:
        current = _active_set_qp(quad, np.zeros(n), uniform)
        if current is None:
            raise SolverError("active-set init did not converge")
    elif entw > 0.0:
        current, gap = _entropic_prox(uniform, np.zeros(n), quad, qterms, entw,
                                      GAP_TOL, 200 * n)
        if gap > 1e-6:
            raise SolverError("entropic init stalled at gap %.3g" % gap)
    else:
        res = _qnorm_newton(np.zeros(n), quad, qterms, uniform, GAP_TOL)
        if res is not None and res[1] <= 1e-6:
            current = res[0]
        else:
            current, gap = _entropic_prox(uniform, np.zeros(n), quad, qterms,
                                          0.0, GAP_TOL, 200 * n)
            if res is not None and res[1] < gap:
                current, gap = res
            if gap > 1e-6:
                raise SolverError("q-norm init stalled at gap %.3g" % gap)
    return OmdState(current=SimplexPoint(current), regularizer=R, eta=eta,
                    round=1, cumulative_loss=0.0)


def optimal_rate(cert, T):
    """Theorem-matched learning rate eta* = (D/G) sqrt(2 alpha / T)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return (math.sqrt(cert.D_squared) / cert.G) * math.sqrt(2.0 * cert.alpha / T)


def step(state, loss):
    """One round: charge the expected loss of the current point, then move
    to the proximal minimizer. Returns the successor state."""
    if isinstance(loss, LossVector):
        lv = loss
    else:
        lv = LossVector(loss)
    query = BregmanQuery(state.regularizer, state.current, lv, state.eta)
    w, tau = _solve_query(query, state._tau)
    played = float(state.current.weights @ lv.entries)
    return OmdState(
        current=SimplexPoint(w),
        regularizer=state.regularizer,
        eta=state.eta,
        round=state.round + 1,
        cumulative_loss=state.cumulative_loss + played,
        _tau=tau,
    )


def run(R, eta, seq):
    """Full OMD run over a loss sequence.

    decisions[t] is the point played before observing loss t.
    """
    if not isinstance(seq, LossSequence):
        seq = LossSequence(seq)
    T, n = seq.horizon, seq.dimension
    if n != R.dimension:
        raise ValueError("regularizer dimension %d does not match losses %d" % (R.dimension, n))
    state = init(R, eta)
    played = np.empty((T, n))
    for t in range(T):
        played[t] = state.current.weights
        state = step(state, seq.matrix[t])
    report = regret_of(played, seq)
    return [SimplexPoint(row) for row in played], report


def hedge(eta, seq):
    """Hedge / exponential weights baseline, closed form.

    Round t plays weights proportional to exp(-eta * cumulative loss before
    t), computed in the log domain with a max shift.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if not isinstance(seq, LossSequence):
        seq = LossSequence(seq)
    m = seq.matrix
    T, n = m.shape
    cum = np.zeros((T, n))
    if T > 1:
        np.cumsum(m[:-1], axis=0, out=cum[1:])
    a = -eta * cum
    a -= a.max(axis=1, keepdims=True)
    w = np.exp(a)
    played = w / w.sum(axis=1, keepdims=True)
    report = regret_of(played, seq)
    return [SimplexPoint(row) for row in played], report
