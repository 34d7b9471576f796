import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from setmem.corrector import MeasurementKind, Policy
from setmem.harness import (
    ConfigError,
    ScenarioConfig,
    build_scenario,
    config_from_dict,
    config_to_dict,
    run_scenario,
    run_trial,
    summarize,
    with_case,
)
from setmem.harness.checks import beta_suite, containment_suite, oracle_suite
from setmem.harness.cli import bench_report, main
from setmem.harness.io import TRAJECTORY_HEADER, load_config
from setmem.harness.scenario import Dimensions, EstimatorSettings, MeasurementMix, Schedule

SMALL = {
    "dimensions": {"n": 3, "m": 2, "l": 1},
    "horizon": 20,
    "seed": 11,
    "schedule": {"kind": "random", "prob": 0.6},
    "measurements": {"strips": 1, "halfspaces": 1, "equalities": 0, "half_width": 0.5},
    "stability": "stable",
    "init": {"p0_scale": 10.0, "sigma0": 1.0},
    "estimator": {"criterion": "trace", "ordering": "input", "rescaling": True, "policy": "strict"},
}


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_config_round_trip_and_strictness():
    cfg = config_from_dict(SMALL)
    assert cfg.dimensions.n == 3 and cfg.schedule.prob == 0.6 and cfg.estimator.policy == "strict"
    assert config_from_dict(config_to_dict(cfg)) == cfg
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({**SMALL, "extra": 1})
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({**SMALL, "dimensions": {"n": 3, "k": 1}})
    with pytest.raises(ConfigError):
        config_from_dict({**SMALL, "horizon": "10"})
    with pytest.raises(ConfigError):
        config_from_dict({**SMALL, "schedule": {"kind": "random", "prob": 1.5}})
    with pytest.raises(ConfigError):
        config_from_dict({**SMALL, "dimensions": {"n": 0}})
    with pytest.raises(ConfigError):
        config_from_dict({**SMALL, "estimator": {"rescaling": 1}})
    with pytest.raises(ConfigError):
        config_from_dict([1, 2])


def test_scenario_is_deterministic():
    cfg = config_from_dict(SMALL)
    a, b = build_scenario(cfg, 2), build_scenario(cfg, 2)
    assert np.array_equal(a.x_true, b.x_true) and np.array_equal(a.x0_hat, b.x0_hat)
    assert all(np.array_equal(s.A, t.A) and np.array_equal(s.tau, t.tau) for s, t in zip(a.steps, b.steps))
    assert not np.array_equal(a.x_true, build_scenario(cfg, 3).x_true)


@pytest.mark.parametrize("mode,radius", [("stable", 0.95), ("marginal", 1.0)])
def test_spectral_radius(mode, radius):
    cfg = ScenarioConfig(dimensions=Dimensions(5, 2, 1), horizon=3, stability=mode)
    for t in range(5):
        A = build_scenario(cfg, t).steps[0].A
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        assert abs(rho - radius) <= 1e-9


def test_generated_measurements_are_satisfied_by_truth():
    cfg = ScenarioConfig(dimensions=Dimensions(4, 3, 1), horizon=40,
                         measurements=MeasurementMix(2, 2, 1, 0.3), schedule=Schedule("every"))
    sc = build_scenario(cfg, 0)
    assert sc.x_true.shape == (41, 4)
    for k, ms in enumerate(sc.measurements, start=1):
        assert len(ms) == 5
        x = sc.x_true[k]
        for m in ms:
            v = m.f @ x
            if m.lower is not None:
                assert v >= m.lower - 1e-12
            if m.upper is not None:
                assert v <= m.upper + 1e-12
            if m.kind is MeasurementKind.EQUALITY:
                assert m.lower == m.upper == pytest.approx(v, abs=1e-15)
    # strict policy never trips on synthetic data
    strict = ScenarioConfig(dimensions=Dimensions(4, 3, 1), horizon=40, measurements=MeasurementMix(2, 2, 1, 0.3),
                            schedule=Schedule("every"), estimator=EstimatorSettings(policy="strict"))
    run_trial(strict, 0)


def test_truth_stays_in_propagated_noise_sum():
    cfg = ScenarioConfig(dimensions=Dimensions(3, 2, 1), horizon=1)
    sc = build_scenario(cfg, 0)
    st = sc.steps[0]
    x1 = sc.x_true[1]
    nu = np.linalg.lstsq(st.R, x1 - st.A @ sc.x_true[0] - st.B @ st.tau, rcond=None)[0]
    assert np.all(np.abs(nu) <= 1 + 1e-9)


def test_initial_estimate_on_boundary():
    cfg = ScenarioConfig(dimensions=Dimensions(3, 2, 1), horizon=0)
    sc = build_scenario(cfg, 0)
    d = sc.x_true[0] - sc.x0_hat
    assert d @ np.linalg.solve(sc.sigma0 * sc.P0, d) == pytest.approx(1.0)


def test_case_three_keeps_scale_constant():
    cfg = with_case(ScenarioConfig.benchmark(4, 1, trials=1, horizon=30), 3)
    rec = run_trial(cfg, 0)
    assert np.all(rec.sigma == rec.sigma[0]) and np.all(rec.sigma_bar == rec.sigma[0])
    assert all(r.outcomes == [] for r in rec.reports)


def test_zero_horizon_summary():
    cfg = ScenarioConfig(horizon=0)
    rec = run_trial(cfg, 0)
    s = summarize(rec)
    assert rec.horizon == 0
    assert s.shrink_ratio == 1.0 and s.error_ratio == 1.0
    assert s.trace_mean == pytest.approx(rec.trace[0]) and s.err_mean == pytest.approx(rec.err_norm[0])


def test_trace_metric_uses_unrescaled_product():
    cfg = ScenarioConfig.benchmark(3, 1, trials=1, horizon=20)
    on = run_trial(cfg, 0)
    off = run_trial(replace(cfg, estimator=EstimatorSettings(rescaling=False)), 0)
    assert np.allclose(on.trace, off.trace, rtol=1e-9)
    assert np.allclose(on.sigma_bar, off.sigma, rtol=1e-9)


def test_run_scenario_averages_trials():
    cfg = ScenarioConfig.benchmark(3, 2, trials=3, horizon=10)
    records, avg = run_scenario(cfg)
    assert len(records) == 3
    assert avg.err_mean == pytest.approx(np.mean([summarize(r).err_mean for r in records]))


def test_cli_run_writes_outputs(tmp_path):
    cfg_path = _write(tmp_path, SMALL)
    out, summ, dump = tmp_path / "traj.csv", tmp_path / "sum.json", tmp_path / "e.jsonl"
    assert main(["run", "--config", str(cfg_path), "--out", str(out), "--summary", str(summ), "--dump", str(dump)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == TRAJECTORY_HEADER and len(rows) == SMALL["horizon"] + 2
    rec = run_trial(config_from_dict(SMALL), 0)
    assert [float(r[4]) for r in rows[1:]] == rec.trace.tolist()
    s = json.loads(summ.read_text())
    assert {"shrink_ratio", "trace_mean", "error_ratio", "err_mean", "wall_ms"} <= set(s)
    lines = dump.read_text().splitlines()
    assert len(lines) == SMALL["horizon"] + 1
    first = json.loads(lines[0])
    assert first["k"] == 0 and len(first["c"]) == 3 and len(first["P"]) == 3 and first["sigma"] == 1.0
    first_csv = out.read_bytes()
    assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert out.read_bytes() == first_csv


def test_cli_dump_matches_run_dump(tmp_path):
    cfg_path = _write(tmp_path, SMALL)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["dump-ellipsoids", "--config", str(cfg_path), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "t.csv"), "--dump", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_validation_errors_exit_one(tmp_path, capsys):
    bad = _write(tmp_path, {**SMALL, "colour": "red"}, "bad.json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["run", "--config", str(broken), "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x.csv")]) == 1
    assert main(["bench", "--cases", "4", "--trials", "1"]) == 1
    assert main(["bench", "--dims", "a,b"]) == 1
    assert main(["nonsense"]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_check_suites(capsys):
    assert main(["check", "--suite", "containment", "--trials", "6", "--seed", "7"]) == 0
    assert main(["check", "--suite", "beta", "--trials", "50"]) == 0
    assert main(["check", "--suite", "oracle", "--trials", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3


def test_cli_check_failure_exits_two(monkeypatch):
    from setmem.harness import cli
    from setmem.harness.checks import CheckResult

    monkeypatch.setitem(cli.SUITES, "beta", lambda **kw: CheckResult("beta", 1, failures=1))
    assert main(["check", "--suite", "beta"]) == 2


def test_cli_bench_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["bench", "--dims", "3", "--cases", "1,3", "--trials", "2", "--horizon", "15", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    first = capsys.readouterr().out
    assert main(args + ["--out", str(b)]) == 0
    assert capsys.readouterr().out == first
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert [r["case"] for r in rep["rows"]] == [1, 3] and "wall_ms" not in rep["rows"][0]


def test_bench_report_timing_flag():
    rep = bench_report([2], [1], 1, 0, 5, timing=True)
    assert rep["rows"][0]["wall_ms"] >= 0


def test_load_config_reads_file(tmp_path):
    assert load_config(_write(tmp_path, SMALL)) == config_from_dict(SMALL)


def test_log_level_env(monkeypatch, tmp_path):
    monkeypatch.setenv("SETMEM_LOG", "debug")
    assert main(["check", "--suite", "beta", "--trials", "5"]) == 0
    monkeypatch.setenv("SETMEM_LOG", "loud")
    assert main(["check", "--suite", "beta", "--trials", "5"]) == 0


def test_suites_small_runs_pass():
    assert containment_suite(trials=6, seed=1).passed
    assert oracle_suite(trials=3, seed=1).passed
    assert beta_suite(trials=100, seed=1).passed


def test_strict_policy_option():
    cfg = config_from_dict(SMALL)
    assert cfg.estimator.to_config().policy is Policy.STRICT
