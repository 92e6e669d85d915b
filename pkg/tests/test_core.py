"""Simplex points, loss containers, and regret accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structured_omd.core import (
    LossSequence,
    LossVector,
    SimplexPoint,
    best_expert,
    regret_of,
    validate_simplex,
)


def test_simplex_point_accepts_exact_distribution():
    p = SimplexPoint([0.25, 0.25, 0.5])
    assert np.array_equal(p.weights, [0.25, 0.25, 0.5])
    assert p.dimension == 3
    assert len(p) == 3


def test_simplex_point_preserves_vertex_exactly():
    p = SimplexPoint([0.0, 1.0, 0.0])
    assert np.array_equal(p.weights, [0.0, 1.0, 0.0])


def test_simplex_point_weights_are_read_only():
    p = SimplexPoint([0.5, 0.5])
    with pytest.raises(ValueError):
        p.weights[0] = 0.3


def test_simplex_point_repairs_small_violations():
    # A tiny negative entry within the hard tolerance is clamped and the
    # vector renormalized.
    p = SimplexPoint([1.0 + 5e-10, -5e-10])
    assert p.weights[1] == 0.0
    assert abs(p.weights.sum() - 1.0) <= 1e-15
    # A sum within the repair tolerance but outside the hard one renormalizes.
    q = SimplexPoint([0.5 + 2e-7, 0.5])
    assert abs(q.weights.sum() - 1.0) <= 1e-15


def test_simplex_point_rejects_bad_input():
    with pytest.raises(ValueError):
        SimplexPoint([0.45, 0.45])  # sums to 0.9
    with pytest.raises(ValueError):
        SimplexPoint([1.1, -0.1])  # negative beyond tolerance
    with pytest.raises(ValueError):
        SimplexPoint([])
    with pytest.raises(ValueError):
        SimplexPoint([np.nan, 1.0])
    with pytest.raises(ValueError):
        SimplexPoint(np.eye(2))  # not a vector


def test_validate_simplex_matches_constructor():
    p = validate_simplex([0.2, 0.8])
    assert isinstance(p, SimplexPoint)
    assert np.array_equal(p.weights, [0.2, 0.8])


def test_loss_vector_basics():
    l = LossVector([0.5, -1.0, 2.0])
    assert l.dimension == 3
    assert np.array_equal(l.entries, [0.5, -1.0, 2.0])
    with pytest.raises(ValueError):
        l.entries[0] = 9.0
    with pytest.raises(ValueError):
        LossVector([np.inf])
    with pytest.raises(ValueError):
        LossVector([])


def test_loss_sequence_from_matrix_and_rows():
    m = np.array([[0.1, 0.2], [0.3, 0.4]])
    seq = LossSequence(m)
    assert seq.horizon == 2
    assert seq.dimension == 2
    assert len(seq) == 2
    assert isinstance(seq[1], LossVector)
    assert np.array_equal(seq[1].entries, [0.3, 0.4])
    # Rows may be LossVector objects or plain lists.
    seq2 = LossSequence([LossVector([0.1, 0.2]), [0.3, 0.4]])
    assert np.array_equal(seq2.matrix, m)


def test_loss_sequence_rejects_bad_input():
    with pytest.raises(ValueError):
        LossSequence([])
    with pytest.raises(ValueError):
        LossSequence(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        LossSequence([[1.0, 2.0], [3.0]])


def test_best_expert_hand_example():
    seq = [[0.5, 0.2, 0.9], [0.1, 0.8, 0.0]]
    idx, loss = best_expert(seq)
    assert idx == 0
    assert loss == pytest.approx(0.6, abs=1e-15)


def test_best_expert_tie_breaks_to_smallest_index():
    idx, loss = best_expert([[0.3, 0.3], [0.2, 0.2]])
    assert idx == 0
    assert loss == pytest.approx(0.5, abs=1e-15)


def test_best_expert_matches_exhaustive_scan():
    rng = np.random.default_rng(11)
    for _ in range(20):
        T = int(rng.integers(1, 64))
        N = int(rng.integers(1, 16))
        m = rng.uniform(-1.0, 1.0, (T, N))
        idx, loss = best_expert(m)
        totals = [m[:, j].sum() for j in range(N)]
        want = min(range(N), key=lambda j: totals[j])
        assert idx == want
        assert loss == pytest.approx(totals[want], rel=1e-12)


def test_regret_of_identity_cases():
    # Always playing the eventual best expert gives zero regret.
    m = np.array([[0.2, 0.9], [0.1, 0.8], [0.0, 0.7]])
    dec = np.array([[1.0, 0.0]] * 3)
    rep = regret_of(dec, m)
    assert rep.regret == pytest.approx(0.0, abs=1e-15)
    assert rep.best_expert_index == 0
    assert rep.best_expert_loss == pytest.approx(0.3, abs=1e-15)
    assert rep.cumulative_algorithm_loss == pytest.approx(0.3, abs=1e-15)
    assert rep.per_round_regret.shape == (3,)
    # regret = cumulative algorithm loss - best expert loss by construction.
    assert rep.regret == rep.cumulative_algorithm_loss - rep.best_expert_loss


def test_regret_of_uniform_play_hand_value():
    m = np.array([[1.0, 0.0], [1.0, 0.0]])
    dec = np.full((2, 2), 0.5)
    rep = regret_of(dec, m)
    assert rep.cumulative_algorithm_loss == pytest.approx(1.0, abs=1e-15)
    assert rep.best_expert_index == 1
    assert rep.regret == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(rep.per_round_regret, [0.5, 1.0], atol=1e-15)


def test_regret_running_curve_compares_prefix_best():
    # The running regret uses the best expert of each prefix, so it can
    # decrease when the leader changes.
    m = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    dec = np.array([[0.0, 1.0]] * 3)
    rep = regret_of(dec, m)
    # Algorithm pays 1 then 0, 0; the prefix best is 0, then 1, then 1.
    assert np.allclose(rep.per_round_regret, [1.0, 0.0, 0.0], atol=1e-15)


def test_regret_of_accepts_simplex_points_and_sequences():
    m = np.array([[0.3, 0.6], [0.9, 0.1]])
    dec = [SimplexPoint([1.0, 0.0]), SimplexPoint([0.0, 1.0])]
    rep = regret_of(dec, LossSequence(m))
    assert rep.cumulative_algorithm_loss == pytest.approx(0.4, abs=1e-15)


def test_regret_of_shape_mismatch():
    with pytest.raises(ValueError):
        regret_of(np.full((2, 2), 0.5), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        regret_of(np.full((2, 3), 1.0 / 3.0), np.zeros((2, 2)))


def test_regret_permutation_invariance():
    rng = np.random.default_rng(3)
    m = rng.uniform(0.0, 1.0, (16, 5))
    dec = rng.dirichlet(np.ones(5), size=16)
    perm = rng.permutation(5)
    rep = regret_of(dec, m)
    rep_p = regret_of(dec[:, perm], m[:, perm])
    assert rep_p.regret == pytest.approx(rep.regret, rel=1e-12, abs=1e-12)
    assert np.allclose(rep_p.per_round_regret, rep.per_round_regret, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_regret_matches_direct_accumulation(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 24))
    N = int(rng.integers(1, 8))
    m = rng.uniform(-1.0, 1.0, (T, N))
    dec = rng.dirichlet(np.ones(N), size=T)
    rep = regret_of(dec, m)
    alg = sum(float(dec[t] @ m[t]) for t in range(T))
    best = min(float(m[: T, j].sum()) for j in range(N))
    assert rep.regret == pytest.approx(alg - best, rel=1e-10, abs=1e-10)
    # The curve ends at the final regret.
    assert rep.per_round_regret[-1] == pytest.approx(rep.regret, rel=1e-10, abs=1e-10)
