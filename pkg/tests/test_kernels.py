"""Hot kernels: projection, q-norm, projected gradient, backend parity."""

import numpy as np
import pytest

from structured_omd.kernels import (
    BACKEND,
    prox_pgd,
    qnorm_sq_value_grad,
    simplex_project,
)
from structured_omd.kernels import _pykernels

try:
    from structured_omd.kernels import _ckernels
except ImportError:
    _ckernels = None

NO_QTERMS = (np.empty(0), np.empty(0))


def test_backend_selection_reports_a_known_name():
    assert BACKEND in ("python", "compiled")


def test_simplex_project_kkt_certificate():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        z = rng.uniform(-3.0, 3.0, n)
        p = simplex_project(z)
        assert np.all(p >= 0.0)
        assert abs(float(np.sum(p)) - 1.0) <= 1e-12
        support = p > 0.0
        theta = p[support] - z[support]
        assert float(np.ptp(theta)) <= 1e-12
        if not np.all(support):
            assert float(np.max(z[~support])) <= float(-theta[0]) + 1e-12


def test_simplex_project_fixed_points():
    rng = np.random.default_rng(1)
    for _ in range(50):
        z = rng.uniform(-2.0, 2.0, 6)
        p = simplex_project(z)
        assert np.max(np.abs(simplex_project(p) - p)) <= 1e-15
    feasible = rng.dirichlet(np.ones(6))
    assert np.max(np.abs(simplex_project(feasible) - feasible)) <= 1e-15


def test_simplex_project_hand_values():
    assert np.array_equal(simplex_project(np.array([5.0])), [1.0])
    got = simplex_project(np.array([0.5, 0.5]))
    assert np.max(np.abs(got - [0.5, 0.5])) <= 1e-16
    got = simplex_project(np.array([10.0, 0.0, 0.0]))
    assert np.max(np.abs(got - [1.0, 0.0, 0.0])) <= 1e-16
    # symmetric pull toward the center
    got = simplex_project(np.array([0.8, 0.4]))
    assert np.max(np.abs(got - [0.7, 0.3])) <= 1e-15


def test_qnorm_value_and_gradient():
    x = np.array([0.3, -0.4, 0.5])
    q = 1.5
    s = float(np.sum(np.abs(x) ** q))
    val, grad = qnorm_sq_value_grad(x, q)
    assert val == pytest.approx(s ** (2.0 / q), rel=1e-14)

    rng = np.random.default_rng(2)
    for _ in range(25):
        x = rng.uniform(0.1, 1.0, 5) * rng.choice([-1.0, 1.0], 5)
        q = float(rng.uniform(1.1, 2.0))
        _, grad = qnorm_sq_value_grad(x, q)
        h = 1e-7
        for i in range(5):
            e = np.zeros(5)
            e[i] = h
            fd = (qnorm_sq_value_grad(x + e, q)[0] - qnorm_sq_value_grad(x - e, q)[0]) / (2.0 * h)
            assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_qnorm_at_zero():
    val, grad = qnorm_sq_value_grad(np.zeros(4), 1.5)
    assert val == 0.0
    assert np.array_equal(grad, np.zeros(4))


def test_prox_pgd_identity_quadratic_closed_form():
    # lin.p + p'p = ||p + lin/2||^2 up to a constant, so the solution is the
    # projection of -lin/2 onto the simplex.
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        anchor = rng.dirichlet(np.ones(n))
        lin = rng.uniform(-2.0, 2.0, n)
        p, gap, it, tau = prox_pgd(anchor, lin, np.eye(n), *NO_QTERMS,
                                   1e-12, 20000, 1.0)
        # the solver may stop at its floating-point gap floor (~1e-8)
        # instead of the requested 1e-12; the gap still bounds suboptimality
        assert gap <= 1e-8
        want = simplex_project(-0.5 * lin)
        assert np.max(np.abs(p - want)) <= 1e-6
        obj = lambda v: float(lin @ v + v @ v)
        assert obj(p) <= obj(want) + gap + 1e-15


def test_prox_pgd_qnorm_gap_bounds_suboptimality():
    rng = np.random.default_rng(4)
    n = 6
    anchor = rng.dirichlet(np.ones(n))
    lin = rng.uniform(-1.0, 1.0, n)
    p, gap, _, _ = prox_pgd(anchor, lin, None, np.array([0.5]),
                            np.array([1.5]), 1e-10, 50000, 1.0)
    assert np.all(p >= 0.0) and abs(float(np.sum(p)) - 1.0) <= 1e-12
    assert gap <= 1e-8

    def obj(v):
        return float(lin @ v) + 0.5 * qnorm_sq_value_grad(v, 1.5)[0]

    assert obj(p) <= obj(anchor) + 1e-12
    assert obj(p) <= obj(np.full(n, 1.0 / n)) + 1e-12


def test_prox_pgd_accepts_read_only_inputs():
    anchor = np.full(4, 0.25)
    lin = np.array([1.0, -1.0, 0.5, 0.0])
    anchor.setflags(write=False)
    lin.setflags(write=False)
    p, gap, _, _ = prox_pgd(anchor, lin, None, *NO_QTERMS, 1e-12, 1000, 1.0)
    assert gap <= 1e-12
    assert np.array_equal(lin, [1.0, -1.0, 0.5, 0.0])


def test_prox_pgd_poisoned_tau_hint_is_reset():
    anchor = np.full(3, 1.0 / 3.0)
    lin = np.array([0.4, -0.2, 0.1])
    for bad in (1e-300, 1e12):
        p, gap, _, _ = prox_pgd(anchor, lin, np.eye(3), *NO_QTERMS,
                                1e-12, 5000, bad)
        assert gap <= 1e-12
        assert np.max(np.abs(p - simplex_project(-0.5 * lin))) <= 1e-5


@pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 16))
        z = rng.uniform(-3.0, 3.0, n)
        assert np.array_equal(_pykernels.simplex_project(z),
                              _ckernels.simplex_project(z))
        x = rng.uniform(-1.0, 1.0, n)
        q = float(rng.uniform(1.1, 2.0))
        v1, g1 = _pykernels.qnorm_sq_value_grad(x, q)
        v2, g2 = _ckernels.qnorm_sq_value_grad(x, q)
        # summation order differs between the backends, so agreement is to
        # a few ulps rather than bitwise
        assert v2 == pytest.approx(v1, rel=1e-14)
        assert np.allclose(g1, g2, rtol=1e-14, atol=1e-300)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        anchor = rng.dirichlet(np.ones(n))
        lin = rng.uniform(-1.0, 1.0, n)
        quad = np.eye(n) * float(rng.uniform(0.2, 2.0))
        args = (anchor, lin, quad, np.array([0.3]), np.array([1.5]),
                1e-10, 50000, 1.0)
        p1, gap1, _, _ = _pykernels.prox_pgd(*args)
        p2, gap2, _, _ = _ckernels.prox_pgd(*args)
        # 1e-6 is the acceptance threshold the proximal callers apply
        assert gap1 <= 1e-6 and gap2 <= 1e-6
        assert np.max(np.abs(p1 - p2)) <= 1e-6
