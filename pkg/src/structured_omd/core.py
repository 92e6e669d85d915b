"""Simplex points, loss vectors and sequences, and regret accounting.

Everything here is a pure function on immutable numpy-backed values; the
learners and the experiment harness build on these types.
"""

import numpy as np

# Hard feasibility tolerance: inner solvers may return points with O(1e-10)
# constraint violation, which construction repairs. Inputs further out than
# the repair tolerance are rejected rather than silently fixed.
SIMPLEX_ATOL_HARD = 1e-9
SIMPLEX_ATOL_REPAIR = 1e-6


class SimplexPoint:
    """A probability distribution over N experts.

    Entries are nonnegative and sum to one within 1e-9; construction repairs
    small violations (clamp at zero, renormalize) and rejects anything beyond
    the repair tolerance.
    """

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = _validated_weights(weights)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self):
        return self.weights.shape[0]

    def __len__(self):
        return self.weights.shape[0]

    def __repr__(self):
        return "SimplexPoint(%s)" % np.array2string(self.weights, separator=", ")


def _validated_weights(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ValueError("simplex point must be a nonempty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("simplex point entries must be finite")
    lo = float(np.min(x))
    if lo < -SIMPLEX_ATOL_HARD:
        raise ValueError("negative entry %g below tolerance" % lo)
    s = float(np.sum(x))
    if abs(s - 1.0) > SIMPLEX_ATOL_REPAIR:
        raise ValueError("entries sum to %g, outside repair tolerance" % s)
    if lo >= 0.0 and abs(s - 1.0) <= SIMPLEX_ATOL_HARD:
        return x.copy()
    w = np.clip(x, 0.0, None)
    return w / np.sum(w)


def validate_simplex(x):
    """Validate and repair a vector into a SimplexPoint.

    Exact input is preserved when already feasible; entries in [-1e-9, 0) are
    clamped and the vector renormalized when the sum is within 1e-6 of one.
    """
    return SimplexPoint(x)


class LossVector:
    """Per-round losses for N experts. Entries are finite reals; negative
    values are legal (the lower-bound adversary uses them)."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        e = np.asarray(entries, dtype=np.float64)
        if e.ndim != 1 or e.shape[0] < 1:
            raise ValueError("loss vector must be a nonempty vector")
        if not np.all(np.isfinite(e)):
            raise ValueError("loss vector entries must be finite")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def dimension(self):
        return self.entries.shape[0]

    def __repr__(self):
        return "LossVector(%s)" % np.array2string(self.entries, separator=", ")


class LossSequence:
    """An ordered sequence of loss vectors of identical dimension.

    Stored as a (T, N) matrix; row t is the loss vector revealed in round t.
    """

    __slots__ = ("matrix",)

    def __init__(self, rounds):
        if isinstance(rounds, np.ndarray) and rounds.ndim == 2:
            m = np.array(rounds, dtype=np.float64)
        else:
            rows = [r.entries if isinstance(r, LossVector) else np.asarray(r, dtype=np.float64) for r in rounds]
            if len(rows) == 0:
                raise ValueError("loss sequence must be nonempty")
            m = np.stack(rows).astype(np.float64)
        if m.shape[0] < 1 or m.ndim != 2:
            raise ValueError("loss sequence must be a nonempty (T, N) array")
        if not np.all(np.isfinite(m)):
            raise ValueError("loss sequence entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def horizon(self):
        return self.matrix.shape[0]

    @property
    def dimension(self):
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def __getitem__(self, t):
        return LossVector(self.matrix[t])


class RegretReport:
    """Regret accounting for one run.

    regret = cumulative_algorithm_loss - best_expert_loss holds exactly by
    construction; per_round_regret[t] is the running regret against the best
    expert over the first t+1 rounds (it may decrease between rounds).
    """

    __slots__ = (
        "cumulative_algorithm_loss",
        "best_expert_index",
        "best_expert_loss",
        "regret",
        "per_round_regret",
    )

    def __init__(self, cumulative_algorithm_loss, best_expert_index, best_expert_loss, per_round_regret):
        self.cumulative_algorithm_loss = float(cumulative_algorithm_loss)
        self.best_expert_index = int(best_expert_index)
        self.best_expert_loss = float(best_expert_loss)
        self.regret = self.cumulative_algorithm_loss - self.best_expert_loss
        curve = np.asarray(per_round_regret, dtype=np.float64).copy()
        curve.setflags(write=False)
        self.per_round_regret = curve

    def __repr__(self):
        return "RegretReport(regret=%.6g, best_expert=%d)" % (self.regret, self.best_expert_index)


def _as_loss_matrix(seq):
    if isinstance(seq, LossSequence):
        return seq.matrix
    return LossSequence(seq).matrix


def _as_decision_matrix(decisions):
    if isinstance(decisions, np.ndarray) and decisions.ndim == 2:
        return decisions
    return np.stack([d.weights if isinstance(d, SimplexPoint) else np.asarray(d, dtype=np.float64) for d in decisions])


def best_expert(seq):
    """Index and cumulative loss of the best fixed expert in hindsight.

    Ties break toward the smallest index.
    """
    m = _as_loss_matrix(seq)
    totals = m.sum(axis=0)
    idx = int(np.argmin(totals))
    return idx, float(totals[idx])


def regret_of(decisions, seq):
    """Regret of a decision sequence against the best fixed expert.

    decisions[t] must be the point played before observing round t's loss.
    The running regret at round t compares against the best expert over the
    prefix of length t+1.
    """
    m = _as_loss_matrix(seq)
    d = _as_decision_matrix(decisions)
    if d.shape != m.shape:
        raise ValueError("decisions shape %s does not match losses %s" % (d.shape, m.shape))
    alg = np.einsum("tn,tn->t", d, m)
    alg_cum = np.cumsum(alg)
    expert_cum = np.cumsum(m, axis=0)
    prefix_best = expert_cum.min(axis=1)
    idx = int(np.argmin(expert_cum[-1]))
    return RegretReport(
        cumulative_algorithm_loss=alg_cum[-1],
        best_expert_index=idx,
        best_expert_loss=float(expert_cum[-1, idx]),
        per_round_regret=alg_cum - prefix_best,
    )
