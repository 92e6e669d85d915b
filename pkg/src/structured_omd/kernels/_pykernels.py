"""Pure-numpy implementations of the hot kernels.

The compiled extension `_ckernels` implements the same three functions with
identical semantics; this module is the fallback selected at import time when
the extension is unavailable. Both backends must agree to floating-point
roundoff (covered by the backend equivalence tests).
"""

import numpy as np

BACKEND_NAME = "python"


def simplex_project(z):
    """Euclidean projection of z onto the probability simplex.

    Sort-based exact algorithm: find the largest k such that the top-k
    entries shifted by a common theta are positive and sum to one.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    u = np.sort(z)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, n + 1)
    cond = u + (1.0 - css) / ks > 0.0
    k = np.nonzero(cond)[0][-1] + 1
    theta = (1.0 - css[k - 1]) / k
    return np.maximum(z + theta, 0.0)


def qnorm_sq_value_grad(x, q):
    """Value and gradient of x -> ||x||_q^2.

    The gradient entry is 2 * S^{2/q - 1} * |x_i|^{q-1} * sign(x_i) with
    S = sum |x_i|^q, extended by continuity (zero) at x = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    s = float(np.sum(ax**q))
    if s == 0.0:
        return 0.0, np.zeros_like(x)
    value = s ** (2.0 / q)
    grad = (2.0 * s ** (2.0 / q - 1.0)) * ax ** (q - 1.0) * np.sign(x)
    return value, grad


def _objective_and_grad(p, lin, quad, qweights, qexps):
    val = float(lin @ p)
    grad = lin.copy()
    if quad is not None:
        qp = quad @ p
        val += float(p @ qp)
        grad += 2.0 * qp
    for w, q in zip(qweights, qexps):
        v, g = qnorm_sq_value_grad(p, q)
        val += w * v
        grad += w * g
    return val, grad


def prox_pgd(anchor, lin, quad, qweights, qexps, tol, max_iter, tau0):
    """Minimize lin.p + p'Qp + sum_j w_j ||p||_{q_j}^2 over the simplex.

    Projected gradient with backtracking line search and a Frank-Wolfe gap
    stopping rule: gap(p) = grad.p - min_i grad_i bounds the suboptimality
    from above on the simplex. Returns (p, gap, iterations, tau).

    Backtracking is required because the q-norm Hessian is unbounded near
    coordinates at zero for q < 2; no fixed step size is safe.
    """
    p = np.asarray(anchor, dtype=np.float64).copy()
    lin = np.asarray(lin, dtype=np.float64)
    # The hint is only a warm start; a poisoned value (stale tiny tau from a
    # round that ground against the floating-point floor) must not carry over.
    tau = tau0 if 1e-6 <= tau0 <= 1e6 else 1.0
    val, grad = _objective_and_grad(p, lin, quad, qweights, qexps)
    gap = float(grad @ p) - float(np.min(grad))
    best_gap = gap
    stale = 0
    it = 0
    while gap > tol and it < max_iter:
        accepted = False
        first_try = True
        for _ in range(60):
            y = simplex_project(p - tau * grad)
            d = y - p
            dd = float(d @ d)
            if dd == 0.0:
                # The step was too small to move the point in floating point.
                # A true optimum is projection-fixed at every step size with
                # gap ~ 0, so growing tau is the only way out.
                tau *= 2.0
                first_try = False
                continue
            y_val, y_grad = _objective_and_grad(y, lin, quad, qweights, qexps)
            if y_val <= val + float(grad @ d) + dd / (2.0 * tau):
                accepted = True
                break
            tau *= 0.5
            first_try = False
        if not accepted:
            break
        p, val, grad = y, y_val, y_grad
        # Doubling on a clean first-try acceptance recovers quickly from a
        # small step size; backtracking guards the overshoot.
        tau *= 2.0 if first_try else 1.25
        gap = float(grad @ p) - float(np.min(grad))
        it += 1
        # Stop once the gap has hit its floating-point floor: 25 consecutive
        # iterations without a 10 percent improvement, and already two
        # decades below the caller's acceptance threshold of 1e-6.
        if gap <= 0.9 * best_gap:
            best_gap = gap
            stale = 0
        else:
            stale += 1
            if stale >= 25 and gap <= 1e-8:
                break
    return p, gap, it, tau
