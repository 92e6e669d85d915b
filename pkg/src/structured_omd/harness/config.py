"""Experiment configuration: INI files, space strings, regularizer strings.

Config grammar (INI, stdlib configparser):

    [experiment]
    N = 64
    T = 1024
    space = sparse:s=3+noisy:eps=0.25
    regularizer = auto
    eta = optimal
    seed = 0
    trials = 50
    out = results.csv
    format = csv

Space strings name a family with key=value parameters after a colon, and
"+" joins families into Minkowski sums:

    standard
    sparse:s=3
    noisy:eps=0.25
    spherical:eps=0.5,cond=4,aseed=0    (A seeded SPD, lmax(A^-1) = cond)
    lowrank:d=2,useed=0                 (U = [ones | seeded Gaussian], N x d)
    lowrank:d=2+noisy:eps=0.5

Regularizer strings: "auto" (the matched recipe from theoretical_bound),
"negentropy", "euclidean:eps=0.5", "qnorm:s=5" or "qnorm:q=1.5".

The sweep section uses the same space grammar as a template with {s}, {d},
{eps}, {T} placeholders expanded over the listed grid values.
"""

import configparser

import numpy as np

from ..loss_spaces import (
    Additive,
    LowRank,
    Noisy,
    Sparse,
    Spherical,
    Standard,
    make_spherical_matrix,
)
from ..regularizers import NegEntropy, ScaledEuclidean, SquaredQNorm, make_qnorm_for_sparsity


class ConfigError(Exception):
    """Invalid configuration file, flag, or spec string."""


class ExperimentConfig:
    """Resolved experiment settings. space and regularizer stay as spec
    strings so configs pickle cheaply; they are parsed at run time."""

    __slots__ = ("N", "T", "space", "regularizer", "eta", "seed", "trials",
                 "output_path", "format")

    def __init__(self, N, T, space, regularizer="auto", eta="optimal", seed=0,
                 trials=1, output_path=None, format="csv"):
        if N < 1 or T < 1:
            raise ConfigError("N and T must be positive")
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        if format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if eta != "optimal":
            eta = float(eta)
            if eta <= 0.0:
                raise ConfigError("eta must be positive or 'optimal'")
        self.N = int(N)
        self.T = int(T)
        self.space = str(space)
        self.regularizer = str(regularizer)
        self.eta = eta
        self.seed = int(seed)
        self.trials = int(trials)
        self.output_path = output_path
        self.format = format

    def __repr__(self):
        return "ExperimentConfig(space=%r, N=%d, T=%d, trials=%d)" % (
            self.space, self.N, self.T, self.trials)


def _parse_params(text, spec):
    """Parse "k=v,k=v" against a {key: converter} spec; all keys optional."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError("malformed parameter %r" % item)
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in spec:
            raise ConfigError("unknown parameter %r" % key)
        try:
            out[key] = spec[key](val.strip())
        except ValueError as exc:
            raise ConfigError("bad value for %s: %s" % (key, exc)) from None
    return out


def _parse_one_space(term, N):
    name, _, params = term.partition(":")
    name = name.strip().lower()
    if name == "standard":
        if params:
            raise ConfigError("standard takes no parameters")
        return Standard(N)
    if name == "sparse":
        p = _parse_params(params, {"s": int})
        if "s" not in p:
            raise ConfigError("sparse needs s=<int>")
        return Sparse(p["s"], N)
    if name == "noisy":
        p = _parse_params(params, {"eps": float})
        if "eps" not in p:
            raise ConfigError("noisy needs eps=<real>")
        return Noisy(p["eps"], N)
    if name == "spherical":
        p = _parse_params(params, {"eps": float, "cond": float, "aseed": int})
        if "eps" not in p:
            raise ConfigError("spherical needs eps=<real>")
        A = make_spherical_matrix(N, p.get("cond", 4.0), p.get("aseed", 0))
        return Spherical(A, p["eps"])
    if name == "lowrank":
        p = _parse_params(params, {"d": int, "useed": int})
        if "d" not in p:
            raise ConfigError("lowrank needs d=<int>")
        rng = np.random.default_rng(p.get("useed", 0))
        # The first column is all-ones so the slice {v : Uv in [0,1]^N} has
        # an interior point (v = (1/2, 0, ...)); a fully Gaussian U leaves
        # the slice degenerate once N is much larger than d, which breaks
        # both the sampler and the ellipsoid construction.
        U = np.ones((N, 1))
        if p["d"] > 1:
            U = np.column_stack([U, rng.standard_normal((N, p["d"] - 1))])
        return LowRank(U)
    raise ConfigError("unknown space family %r" % name)


def parse_space(text, N):
    """Space spec string -> LossSpaceSpec; "+" builds Minkowski sums."""
    terms = [t.strip() for t in text.split("+")]
    if not terms or any(not t for t in terms):
        raise ConfigError("empty space specification")
    space = _parse_one_space(terms[0], N)
    for term in terms[1:]:
        space = Additive(space, _parse_one_space(term, N))
    return space


def parse_regularizer(text, N):
    """Regularizer spec string -> Regularizer; "auto" returns None (the
    caller substitutes the matched recipe)."""
    name, _, params = text.strip().partition(":")
    name = name.lower()
    if name == "auto":
        return None
    if name == "negentropy":
        return NegEntropy(N)
    if name == "euclidean":
        p = _parse_params(params, {"eps": float})
        if "eps" not in p:
            raise ConfigError("euclidean needs eps=<real>")
        return ScaledEuclidean(p["eps"], N)
    if name == "qnorm":
        p = _parse_params(params, {"q": float, "s": int})
        if "q" in p:
            return SquaredQNorm(p["q"], N)
        if "s" in p:
            return make_qnorm_for_sparsity(p["s"], N)
        raise ConfigError("qnorm needs q=<real> or s=<int>")
    raise ConfigError("unknown regularizer %r" % text)


def _get(section, key, default=None):
    if key in section:
        return section[key].strip()
    return default


def load_config(path):
    """Read an [experiment] INI file into an ExperimentConfig."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError("cannot read config file %s" % path)
    if "experiment" not in cp:
        raise ConfigError("config file %s has no [experiment] section" % path)
    sec = cp["experiment"]
    try:
        N = int(_get(sec, "n", "0"))
        T = int(_get(sec, "t", "0"))
        seed = int(_get(sec, "seed", "0"))
        trials = int(_get(sec, "trials", "1"))
    except ValueError as exc:
        raise ConfigError("bad integer in config: %s" % exc) from None
    space = _get(sec, "space")
    if not space:
        raise ConfigError("config needs a space key")
    return ExperimentConfig(
        N=N,
        T=T,
        space=space,
        regularizer=_get(sec, "regularizer", "auto"),
        eta=_get(sec, "eta", "optimal"),
        seed=seed,
        trials=trials,
        output_path=_get(sec, "out"),
        format=_get(sec, "format", "csv"),
    )


def load_sweep(path):
    """Read a [sweep] INI file: a space template plus grid values.

    Returns (template_config, grid) where grid is a list of dicts, one per
    combination, each containing the T for that run and the placeholder
    values substituted into the space template.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError("cannot read config file %s" % path)
    if "sweep" not in cp:
        raise ConfigError("config file %s has no [sweep] section" % path)
    sec = cp["sweep"]
    template = _get(sec, "space")
    if not template:
        raise ConfigError("sweep needs a space template")
    try:
        N = int(_get(sec, "n", "0"))
        seed = int(_get(sec, "seed", "0"))
        trials = int(_get(sec, "trials", "1"))
    except ValueError as exc:
        raise ConfigError("bad integer in config: %s" % exc) from None
    out = _get(sec, "out")
    if not out:
        raise ConfigError("sweep needs an out path")

    axes = {}
    for key, conv in (("s", int), ("d", int), ("eps", float), ("t", int)):
        raw = _get(sec, key)
        if raw is not None:
            try:
                axes[key] = [conv(v.strip()) for v in raw.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError("bad %s list: %s" % (key, exc)) from None
    if "t" not in axes:
        raise ConfigError("sweep needs T = <list>")

    grid = [{}]
    for key in sorted(axes):
        grid = [dict(g, **{key: v}) for g in grid for v in axes[key]]
    base = ExperimentConfig(N=N, T=axes["t"][0], space=template, seed=seed,
                            trials=trials, output_path=out, format="csv")
    return base, grid
