"""Harness: config parsing, runner determinism, reports, and the CLI."""

import json
import math

import numpy as np
import pytest

from structured_omd.harness import cli
from structured_omd.harness.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    load_sweep,
    parse_regularizer,
    parse_space,
)
from structured_omd.harness.reports import (
    CSV_HEADER,
    SWEEP_HEADER,
    emit_report,
    emit_sweep,
    load_record,
    render_report,
)
from structured_omd.harness.runner import (
    RunRecord,
    run_experiment,
    run_lower_bound,
    run_sweep,
)
from structured_omd.loss_spaces import (
    Additive,
    LowRank,
    Noisy,
    Sparse,
    Spherical,
    Standard,
    make_spherical_matrix,
    theoretical_bound,
)
from structured_omd.omd import SolverError
from structured_omd.regularizers import NegEntropy, ScaledEuclidean, SquaredQNorm


def _write(path, text):
    path.write_text(text)
    return str(path)


def _basic_config(tmp_path, **overrides):
    fields = {
        "n": 8, "t": 32, "space": "sparse:s=2", "seed": 7, "trials": 3,
    }
    fields.update(overrides)
    lines = ["[experiment]"] + ["%s = %s" % (k, v) for k, v in fields.items()]
    return _write(tmp_path / "exp.ini", "\n".join(lines) + "\n")


# ------------------------------------------------------------------ config


def test_experiment_config_validation():
    cfg = ExperimentConfig(N=4, T=8, space="standard", eta="0.5")
    assert cfg.eta == 0.5
    assert ExperimentConfig(N=4, T=8, space="standard").eta == "optimal"
    for bad in (dict(N=0, T=8), dict(N=4, T=0), dict(N=4, T=8, trials=0),
                dict(N=4, T=8, format="xml"), dict(N=4, T=8, eta="-1.0"),
                dict(N=4, T=8, eta="0")):
        with pytest.raises(ConfigError):
            ExperimentConfig(space="standard", **bad)


def test_parse_space_forms():
    assert isinstance(parse_space("standard", 8), Standard)

    sp = parse_space("sparse:s=3", 8)
    assert isinstance(sp, Sparse) and sp.s == 3

    no = parse_space("noisy:eps=0.25", 8)
    assert isinstance(no, Noisy) and no.eps == 0.25

    ball = parse_space("spherical:eps=0.5,cond=4,aseed=1", 8)
    assert isinstance(ball, Spherical) and ball.eps == 0.5
    assert np.array_equal(ball.A, make_spherical_matrix(8, 4.0, 1))

    lr = parse_space("lowrank:d=2,useed=3", 8)
    assert isinstance(lr, LowRank) and lr.d == 2
    U = lr.subspace.U
    assert np.array_equal(U[:, 0], np.ones(8))  # anchor column keeps the slice fat
    assert np.array_equal(U[:, 1:], np.random.default_rng(3).standard_normal((8, 1)))

    add = parse_space("sparse:s=2+noisy:eps=0.1", 8)
    assert isinstance(add, Additive)
    assert isinstance(add.left, Sparse) and isinstance(add.right, Noisy)

    nested = parse_space("sparse:s=2+noisy:eps=0.1+noisy:eps=0.2", 8)
    assert isinstance(nested.left, Additive) and isinstance(nested.right, Noisy)


def test_parse_space_errors():
    for text in ("gaussian", "sparse", "sparse:k=3", "sparse:s", "standard:x=1",
                 "", "sparse:s=2+", "noisy:eps=abc"):
        with pytest.raises(ConfigError):
            parse_space(text, 8)


def test_parse_regularizer_forms():
    assert parse_regularizer("auto", 8) is None
    assert isinstance(parse_regularizer("negentropy", 8), NegEntropy)
    R = parse_regularizer("euclidean:eps=0.5", 8)
    assert isinstance(R, ScaledEuclidean) and R.eps == 0.5
    R = parse_regularizer("qnorm:q=1.5", 8)
    assert isinstance(R, SquaredQNorm) and R.q == 1.5
    R = parse_regularizer("qnorm:s=5", 8)
    want_q = 2.0 * math.log(6.0) / (2.0 * math.log(6.0) - 1.0)
    assert R.q == pytest.approx(want_q, rel=1e-14)
    for text in ("mirror", "qnorm", "euclidean"):
        with pytest.raises(ConfigError):
            parse_regularizer(text, 8)


def test_load_config(tmp_path):
    path = _basic_config(tmp_path, out="res.csv", format="json",
                         regularizer="negentropy", eta="0.25")
    cfg = load_config(path)
    assert (cfg.N, cfg.T, cfg.seed, cfg.trials) == (8, 32, 7, 3)
    assert cfg.space == "sparse:s=2"
    assert cfg.regularizer == "negentropy"
    assert cfg.eta == 0.25
    assert cfg.output_path == "res.csv"
    assert cfg.format == "json"

    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "empty.ini", "[other]\nx = 1\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "nospace.ini", "[experiment]\nn = 4\nt = 8\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "badint.ini",
                           "[experiment]\nn = four\nt = 8\nspace = standard\n"))


def test_load_sweep(tmp_path):
    path = _write(tmp_path / "sweep.ini", "\n".join([
        "[sweep]",
        "n = 8",
        "space = sparse:s={s}",
        "s = 2, 3",
        "t = 16, 32",
        "trials = 1",
        "out = sweep.csv",
    ]) + "\n")
    base, grid = load_sweep(path)
    assert base.N == 8 and base.space == "sparse:s={s}"
    assert base.output_path == "sweep.csv"
    assert grid == [{"s": 2, "t": 16}, {"s": 2, "t": 32},
                    {"s": 3, "t": 16}, {"s": 3, "t": 32}]

    with pytest.raises(ConfigError):
        load_sweep(_write(tmp_path / "not.ini", "[sweep]\nspace = standard\nout = x\n"))
    with pytest.raises(ConfigError):
        load_sweep(_write(tmp_path / "noout.ini", "[sweep]\nn = 4\nspace = standard\nt = 8\n"))


# ------------------------------------------------------------------ runner


def test_run_experiment_determinism_and_bound_curve(monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    cfg = ExperimentConfig(N=8, T=32, space="sparse:s=2", seed=7, trials=3)
    rec1 = run_experiment(cfg)
    rec2 = run_experiment(cfg)
    assert rec1.seeds == [7, 8, 9]
    for a, b in zip(rec1.regrets, rec2.regrets):
        assert np.array_equal(a, b)

    space = parse_space(cfg.space, cfg.N)
    bound_T, _ = theoretical_bound(space, cfg.T)
    # every catalog bound is C * sqrt(T), so the overlay at round t is the
    # bound evaluated at horizon t
    for t in (1, 5, 32):
        want, _ = theoretical_bound(space, t)
        assert rec1.bound[t - 1] == pytest.approx(want, rel=1e-12)
    assert rec1.bound[-1] == pytest.approx(bound_T, rel=1e-12)

    assert all(curve.shape == (32,) for curve in rec1.regrets)


def test_run_experiment_thread_count_invariance(monkeypatch):
    cfg = ExperimentConfig(N=8, T=32, space="noisy:eps=0.5", seed=3, trials=3)
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    rec1 = run_experiment(cfg)
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "2")
    rec2 = run_experiment(cfg)
    assert rec1 == rec2


def test_run_experiment_rejects_bad_thread_env(monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "abc")
    cfg = ExperimentConfig(N=4, T=4, space="standard", seed=0, trials=2)
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_run_experiment_regularizer_and_eta_overrides(monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    cfg = ExperimentConfig(N=6, T=16, space="standard", regularizer="negentropy",
                           eta="0.4", seed=1, trials=1)
    rec = run_experiment(cfg)
    assert len(rec.regrets) == 1
    # the bound overlay still comes from the space, not the override
    want, _ = theoretical_bound(Standard(6), 16)
    assert rec.bound[-1] == pytest.approx(want, rel=1e-12)


def test_run_lower_bound_summary(monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    s1 = run_lower_bound(1, 1.0, 2, 8, trials=1, seed=3)
    assert s1["stderr"] == 0.0
    assert s1["k"] == 8
    assert s1["floor"] == pytest.approx(2.0 * math.sqrt(8.0 / 8.0), rel=1e-14)
    assert len(s1["per_trial"]) == 1

    s2 = run_lower_bound(2, 0.5, 4, 32, trials=4, seed=5)
    s3 = run_lower_bound(2, 0.5, 4, 32, trials=4, seed=5)
    assert s2["per_trial"] == s3["per_trial"]
    assert s2["mean_regret"] == pytest.approx(float(np.mean(s2["per_trial"])), rel=1e-15)
    with pytest.raises(ConfigError):
        run_lower_bound(1, 1.0, 2, 8, trials=0)


def test_run_sweep_rows(monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    base = ExperimentConfig(N=8, T=16, space="sparse:s={s}", seed=0, trials=2)
    rows = run_sweep(base, [{"s": 2, "t": 16}, {"s": 3, "t": 8}])
    assert len(rows) == 4
    assert rows[0][0] == "sparse:s=2" and rows[0][2] == 16
    assert rows[2][0] == "sparse:s=3" and rows[2][2] == 8
    assert [r[3] for r in rows] == [0, 1, 0, 1]
    for r in rows:
        assert isinstance(r[6], bool)
    with pytest.raises(ConfigError):
        run_sweep(base, [{"s": 2}])  # missing t
    bad = ExperimentConfig(N=8, T=16, space="sparse:s={q}", seed=0, trials=1)
    with pytest.raises(ConfigError):
        run_sweep(bad, [{"s": 2, "t": 8}])


# ----------------------------------------------------------------- reports


def _tiny_record():
    return RunRecord(seeds=[0, 1],
                     regrets=[[0.5, 0.9], [0.4, 1.4]],
                     bound=[1.0, 1.2])


def test_run_record_aggregates_and_validation():
    rec = _tiny_record()
    assert np.array_equal(rec.final_regrets, [0.9, 1.4])
    assert rec.bound_satisfied == [True, False]
    assert rec.bound_violations == 1
    assert rec.mean_final_regret == pytest.approx(1.15, rel=1e-15)
    assert rec.max_final_regret == pytest.approx(1.4, rel=1e-15)
    with pytest.raises(ValueError):
        RunRecord(seeds=[0], regrets=[[0.1], [0.2]], bound=[1.0])
    with pytest.raises(ValueError):
        RunRecord(seeds=[0], regrets=[[0.1, 0.2]], bound=[1.0])


def test_report_json_round_trip(tmp_path):
    rec = _tiny_record()
    assert RunRecord.from_dict(rec.to_dict()) == rec
    path = tmp_path / "rec.json"
    emit_report(rec, str(path), "json")
    loaded = load_record(str(path))
    assert loaded == rec
    for a, b in zip(loaded.regrets, rec.regrets):
        assert np.array_equal(a, b)


def test_report_csv_layout():
    rec = _tiny_record()
    lines = render_report(rec, "csv").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 2
    assert lines[1] == "0,1,0.5,1"
    assert lines[2] == "0,2,%.17g,%.17g" % (0.9, 1.2)
    with pytest.raises(ConfigError):
        render_report(rec, "yaml")


def test_emit_errors(tmp_path):
    rec = _tiny_record()
    with pytest.raises(ConfigError):
        emit_report(rec, str(tmp_path / "nodir" / "x.csv"), "csv")
    with pytest.raises(ConfigError):
        load_record(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_record(str(bad))


def test_emit_sweep_layout(tmp_path):
    path = tmp_path / "sweep.csv"
    emit_sweep([("sparse:s=2", 8, 16, 0, 1.25, 2.5, True),
                ("sparse:s=2", 8, 16, 1, 3.0, 2.5, False)], str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER
    assert lines[1] == "sparse:s=2,8,16,0,1.25,2.5,true"
    assert lines[2].endswith(",false")


# --------------------------------------------------------------------- cli


def test_cli_run_is_byte_stable(tmp_path, monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    config = _basic_config(tmp_path, t=16, trials=2)
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert cli.main(["run", "--config", config, "--out", str(out1)]) == 0
    assert cli.main(["run", "--config", config, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 16


def test_cli_run_json_and_stdout(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    config = _basic_config(tmp_path, t=8, trials=1)
    out = tmp_path / "rec.json"
    assert cli.main(["run", "--config", config, "--out", str(out),
                     "--format", "json"]) == 0
    message = capsys.readouterr().out
    assert "wrote %s: 1 trials" % out in message
    data = json.loads(out.read_text())
    assert len(data["trials"]) == 1
    assert len(data["trials"][0]["regret"]) == 8

    assert cli.main(["run", "--config", config]) == 0
    assert capsys.readouterr().out.splitlines()[0] == CSV_HEADER


def test_cli_seed_and_trials_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    config = _basic_config(tmp_path, t=8, trials=1)
    out1 = tmp_path / "s1.csv"
    out2 = tmp_path / "s2.csv"
    assert cli.main(["run", "--config", config, "--seed", "19",
                     "--trials", "2", "--out", str(out1)]) == 0
    assert cli.main(["run", "--config", config, "--seed", "19",
                     "--trials", "2", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text().splitlines()) == 1 + 2 * 8


def test_cli_bound_output(capsys):
    assert cli.main(["bound", "--space", "noisy:eps=0.25", "--T", "100",
                     "--N", "16"]) == 0
    out = capsys.readouterr().out
    lines = dict(line.split(": ", 1) for line in out.strip().splitlines())
    assert float(lines["bound"]) == pytest.approx(math.sqrt(0.25 * 100.0), rel=1e-15)
    assert float(lines["D_squared"]) == pytest.approx(0.25, rel=1e-15)
    assert float(lines["alpha"]) == 2.0
    assert lines["regularizer"] == "ScaledEuclidean"
    assert float(lines["eta_star"]) == pytest.approx(
        math.sqrt(0.25) * math.sqrt(2.0 * 2.0 / 100.0), rel=1e-14)


def test_cli_bound_flags_proven_range(capsys):
    assert cli.main(["bound", "--space", "sparse:s=1", "--T", "64"]) == 0
    assert "outside the proven range" in capsys.readouterr().out


def test_cli_lowerbound(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    out = tmp_path / "lb.json"
    argv = ["lowerbound", "--V", "1", "--s", "1", "--N", "2", "--T", "8",
            "--trials", "1", "--seed", "3", "--out", str(out)]
    assert cli.main(argv) == 0
    text = capsys.readouterr().out
    assert "stderr: 0" in text
    assert "floor: 2" in text
    summary = json.loads(out.read_text())
    assert summary["trials"] == 1 and len(summary["per_trial"]) == 1
    assert cli.main(argv) == 0  # deterministic rerun
    assert json.loads(out.read_text()) == summary


def test_cli_sweep(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRUCTURED_OMD_THREADS", "1")
    out = tmp_path / "sweep.csv"
    config = _write(tmp_path / "sweep.ini", "\n".join([
        "[sweep]",
        "n = 8",
        "space = sparse:s={s}",
        "s = 2, 3",
        "t = 8",
        "trials = 1",
        "out = %s" % out,
    ]) + "\n")
    assert cli.main(["sweep", "--config", config]) == 0
    assert "wrote %s: 2 rows" % out in capsys.readouterr().out
    first = out.read_bytes()
    assert cli.main(["sweep", "--config", config]) == 0
    assert out.read_bytes() == first
    lines = out.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER
    assert len(lines) == 3


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "nope.ini")]) == 1
    assert cli.main(["bound", "--space", "martian", "--T", "10"]) == 1
    assert cli.main(["bound", "--space", "standard", "--T", "0"]) == 1
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["run"]) == 1  # missing required --config

    def boom(cfg):
        raise SolverError("prox stalled")

    monkeypatch.setattr(cli, "run_experiment", boom)
    config = _basic_config(tmp_path, t=4, trials=1)
    assert cli.main(["run", "--config", config]) == 2
    assert "solver failure" in capsys.readouterr().err
