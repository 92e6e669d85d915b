"""Experiment orchestration: upper-bound runs, lower-bound games, sweeps.

Trials are independent and use derived seeds (base seed + trial index), so
results do not depend on scheduling. Worker count comes from
STRUCTURED_OMD_THREADS when set, else the CPU count; a single worker runs
in-process with no pool.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import omd
from ..core import LossSequence
from ..loss_spaces import (
    adversary_new,
    adversary_next_loss,
    expected_block_deviation,
    lower_bound_value,
    sample,
    theoretical_bound,
)
from .config import ConfigError, parse_regularizer, parse_space


def _worker_count(trials):
    env = os.environ.get("STRUCTURED_OMD_THREADS", "").strip()
    if env:
        try:
            workers = max(1, int(env))
        except ValueError:
            raise ConfigError("STRUCTURED_OMD_THREADS must be an integer") from None
    else:
        workers = os.cpu_count() or 1
    return min(workers, max(1, trials))


def _map_trials(job, args_list):
    workers = _worker_count(len(args_list))
    if workers <= 1:
        return [job(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, args_list))


class RunRecord:
    """Per-trial regret curves plus the bound overlay and aggregates.

    The bound curve is shared by all trials of one experiment; it is stored
    once and replicated per trial in the serialized form, which mirrors the
    per-trial record layout.
    """

    __slots__ = ("seeds", "regrets", "bound")

    def __init__(self, seeds, regrets, bound):
        self.seeds = [int(s) for s in seeds]
        self.regrets = [np.asarray(r, dtype=np.float64) for r in regrets]
        self.bound = np.asarray(bound, dtype=np.float64)
        if len(self.seeds) != len(self.regrets):
            raise ValueError("one seed per regret curve required")
        for r in self.regrets:
            if r.shape != self.bound.shape:
                raise ValueError("regret and bound curves must share length")

    @property
    def final_regrets(self):
        return np.array([r[-1] for r in self.regrets]) if self.regrets else np.empty(0)

    @property
    def bound_satisfied(self):
        if self.bound.size == 0:
            return []
        final_bound = self.bound[-1]
        return [bool(r[-1] <= final_bound) for r in self.regrets]

    @property
    def mean_final_regret(self):
        f = self.final_regrets
        return float(f.mean()) if f.size else 0.0

    @property
    def max_final_regret(self):
        f = self.final_regrets
        return float(f.max()) if f.size else 0.0

    @property
    def bound_violations(self):
        return sum(1 for ok in self.bound_satisfied if not ok)

    def to_dict(self):
        trials = []
        for seed, curve, ok in zip(self.seeds, self.regrets, self.bound_satisfied):
            trials.append({
                "seed": seed,
                "regret": [float(v) for v in curve],
                "final_regret": float(curve[-1]),
                "bound": [float(v) for v in self.bound],
                "bound_satisfied": ok,
            })
        return {
            "trials": trials,
            "aggregate": {
                "mean_final_regret": self.mean_final_regret,
                "max_final_regret": self.max_final_regret,
                "bound_violations": self.bound_violations,
            },
        }

    @classmethod
    def from_dict(cls, d):
        trials = d.get("trials", [])
        seeds = [t["seed"] for t in trials]
        regrets = [t["regret"] for t in trials]
        bound = trials[0]["bound"] if trials else []
        return cls(seeds, regrets, bound)

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return "RunRecord(trials=%d, mean_final=%.6g, violations=%d)" % (
            len(self.seeds), self.mean_final_regret, self.bound_violations)


def _upper_trial(args):
    space_text, N, T, regularizer, eta, trial_seed = args
    space = parse_space(space_text, N)
    rng = np.random.default_rng(trial_seed)
    rows = np.stack([sample(space, rng).entries for _ in range(T)])
    _, report = omd.run(regularizer, eta, LossSequence(rows))
    return report.per_round_regret


def run_experiment(cfg):
    """Run cfg.trials independent trials; deterministic given cfg.seed."""
    space = parse_space(cfg.space, cfg.N)
    bound_T, recipe = theoretical_bound(space, cfg.T)
    R = parse_regularizer(cfg.regularizer, cfg.N)
    if R is None:
        R = recipe
    if cfg.eta == "optimal":
        eta = omd.optimal_rate(R.certificate(), cfg.T)
    else:
        eta = float(cfg.eta)
    rounds = np.arange(1, cfg.T + 1, dtype=np.float64)
    bound_curve = (bound_T / math.sqrt(cfg.T)) * np.sqrt(rounds)
    seeds = [cfg.seed + i for i in range(cfg.trials)]
    args = [(cfg.space, cfg.N, cfg.T, R, eta, s) for s in seeds]
    curves = _map_trials(_upper_trial, args)
    return RunRecord(seeds=seeds, regrets=curves, bound=bound_curve)


def _hedge_game(args):
    V, s, N, T, eta, trial_seed = args
    adv = adversary_new(V, s, N, T, seed=trial_seed)
    rng = np.random.default_rng(trial_seed)
    cum = np.zeros(N)
    alg = 0.0
    for _ in range(T):
        a = -eta * cum
        a -= a.max()
        w = np.exp(a)
        p = w / w.sum()
        l = adversary_next_loss(adv, rng).entries
        alg += float(p @ l)
        cum += l
    return alg - float(cum.min())


def run_lower_bound(V, s, N, T, trials, seed=0, eta=None):
    """Monte Carlo adversary games against Hedge.

    Returns a summary dict with per-trial regrets, their mean and standard
    error, the analytic floor 2s sqrt(VT/8), and the exact predicted mean
    2 s V E|Binomial(k,1/2) - k/2| for k = floor(T/V).
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if eta is None:
        eta = math.sqrt(2.0 * math.log(N) / T)
    args = [(V, s, N, T, eta, seed + i) for i in range(trials)]
    regrets = np.array(_map_trials(_hedge_game, args))
    mean = float(regrets.mean())
    stderr = float(regrets.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    k = T // V
    return {
        "formula": "E[regret] = 2*s*V*E|Binomial(k,1/2)-k/2|, k = floor(T/V)",
        "V": V,
        "s": s,
        "N": N,
        "T": T,
        "k": k,
        "trials": trials,
        "seed": seed,
        "eta": eta,
        "floor": lower_bound_value(V, s, T),
        "predicted_mean": 2.0 * s * V * expected_block_deviation(k),
        "mean_regret": mean,
        "stderr": stderr,
        "max_regret": float(regrets.max()),
        "per_trial": [float(r) for r in regrets],
    }


def run_sweep(base, grid):
    """Run the sweep grid; returns rows for the combined CSV.

    Each grid entry carries the T for that run plus the placeholder values
    substituted into the space template. Rows are ordered by grid position
    then trial index.
    """
    rows = []
    for combo in grid:
        fills = {k: combo[k] for k in ("s", "d", "eps") if k in combo}
        try:
            space_text = base.space.format(**fills)
        except (KeyError, IndexError) as exc:
            raise ConfigError("space template %r needs value for %s" % (base.space, exc)) from None
        if "t" not in combo:
            raise ConfigError("sweep grid entry is missing its t value")
        T = combo["t"]
        cfg = type(base)(N=base.N, T=T, space=space_text,
                         regularizer=base.regularizer, eta=base.eta,
                         seed=base.seed, trials=base.trials)
        record = run_experiment(cfg)
        finals = record.final_regrets
        oks = record.bound_satisfied
        for i, seed in enumerate(record.seeds):
            rows.append((space_text, base.N, T, i, float(finals[i]),
                         float(record.bound[-1]), oks[i]))
    return rows
