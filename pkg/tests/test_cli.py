import json
import math
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from mecpaoi import cli
from mecpaoi.cli import ResultRow, main, rows_from_csv, rows_to_csv

EXP2 = {"kind": "exponential", "rate": 2.0}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def base(**kw):
    cfg = {"system": "non_preemptive", "transmission": EXP2, "computation": EXP2,
           "policy": {"kind": "fixed_threshold", "theta": 0.3}}
    cfg.update(kw)
    return cfg


def run(tmp_path, command, cfg, *extra, fmt="csv"):
    out = tmp_path / f"out.{fmt}"
    rc = main([command, "--config", write(tmp_path, cfg), "--output", str(out),
               "--format", fmt, *extra])
    return rc, (out.read_text() if out.exists() else "")


def test_eval_flat_case(tmp_path):
    rc, text = run(tmp_path, "eval", base())
    assert rc == 0
    (row,) = rows_from_csv(text)
    assert row.paoi_analytic == pytest.approx(2.0, abs=1e-10)


def test_eval_wait_for_completion(tmp_path):
    cfg = base(transmission={"kind": "pareto", "xm": 0.25, "alpha": 2.0},
               policy={"kind": "fixed_threshold", "theta": "inf"})
    for system in ("non_preemptive", "preemptive"):
        cfg["system"] = system
        rc, text = run(tmp_path, "eval", cfg)
        (row,) = rows_from_csv(text)
        assert row.threshold == math.inf
        assert "inf" in text.splitlines()[1]
        assert row.paoi_analytic == pytest.approx(2 * 0.5 + 2 * 0.5, rel=1e-12)


def test_eval_preemptive_best_effort(tmp_path):
    rc, text = run(tmp_path, "eval", base(system="preemptive",
                                          policy={"kind": "fixed_threshold", "theta": 0}))
    assert rc == 0
    assert rows_from_csv(text)[0].paoi_analytic == pytest.approx(1.75, rel=1e-12)


@pytest.mark.parametrize("cfg", [
    {"system": "non_preemptive"},
    base(system="half"),
    base(computation={"kind": "exponential", "rate": -1}),
    base(policy={"kind": "fixed_threshold", "theta": -0.1}),
    base(policy={"kind": "sometimes"}),
    base(sim={"packets": 1}),
])
def test_schema_violation_exit_2(tmp_path, cfg, capsys):
    rc, _ = run(tmp_path, "eval", cfg)
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_unreadable_config_exit_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["eval", "--config", str(p)]) == 2


def test_incompatible_policy_exit_2(tmp_path):
    cfg = base(system="preemptive", policy={"kind": "randomized_threshold", "theta_dist": EXP2})
    assert run(tmp_path, "eval", cfg)[0] == 2
    cfg = base(policy={"kind": "transmission_aware", "beta": 0.3})
    assert run(tmp_path, "eval", cfg)[0] == 2


def test_quadrature_failure_exit_3(tmp_path, monkeypatch):
    from mecpaoi.numerics import QuadratureError

    def boom(*a, **k):
        raise QuadratureError("forced", 1.0, 1.0)

    monkeypatch.setattr(cli.wop, "paoi_wop", boom)
    assert run(tmp_path, "eval", base())[0] == 3


def test_nonconvergence_exit_4(tmp_path, monkeypatch, capsys):
    real = cli.wp.optimize_fixed_threshold_wp
    monkeypatch.setattr(cli.wp, "optimize_fixed_threshold_wp",
                        lambda T, C: real(T, C, max_iter=1))
    cfg = base(system="preemptive", transmission={"kind": "pareto", "xm": 0.25, "alpha": 2.0},
               policy={"kind": "fixed_threshold"})
    rc, _ = run(tmp_path, "optimize", cfg)
    assert rc == 4
    trace = json.loads((tmp_path / "out.csv.trace.json").read_text())
    assert trace["converged"] is False and len(trace["iterations"]) == 1


@pytest.mark.parametrize("system,policy,theta,paoi", [
    ("non_preemptive", "fixed_threshold", 0.0, 1.875),
    ("preemptive", "fixed_threshold", 0.0, 1.9375),
])
def test_optimize_ratio_three(tmp_path, system, policy, theta, paoi):
    cfg = base(system=system, transmission={"kind": "exponential", "rate": 4 / 3},
               computation={"kind": "exponential", "rate": 4.0}, policy={"kind": policy})
    rc, text = run(tmp_path, "optimize", cfg)
    assert rc == 0
    (row,) = rows_from_csv(text)
    assert row.threshold == theta
    assert row.paoi_analytic == pytest.approx(paoi, rel=1e-9)
    assert (tmp_path / "out.csv.trace.json").exists()


def test_optimize_optimal_preemptive(tmp_path):
    rc, text = run(tmp_path, "optimize", base(system="preemptive", policy={"kind": "optimal"}),
                   fmt="json")
    (row,) = json.loads(text)
    assert row["threshold"] == pytest.approx(0.4585110560, abs=1e-8)
    assert row["paoi_analytic"] == pytest.approx(1.7085110560, abs=1e-8)


def test_optimize_pareto_fixed_is_zero(tmp_path):
    cfg = base(system="preemptive", transmission={"kind": "pareto", "xm": 0.125, "alpha": 2.0},
               computation={"kind": "exponential", "rate": 4 / 3}, policy={"kind": "fixed_threshold"})
    rc, text = run(tmp_path, "optimize", cfg)
    assert rows_from_csv(text)[0].threshold == 0.0


def test_simulate_rows(tmp_path):
    det = {"kind": "deterministic", "value": 0.5}
    cfg = base(transmission=det, computation=det, policy={"kind": "fixed_threshold", "theta": "inf"})
    rc, text = run(tmp_path, "simulate", cfg, "--packets", "10000")
    (row,) = rows_from_csv(text)
    assert row.paoi_sim == 2.0 and row.delivery_ratio == 1.0
    cfg = base(system="preemptive", policy={"kind": "fixed_threshold", "theta": 0})
    rc, text = run(tmp_path, "simulate", cfg, "--packets", "1000000", "--seed", "42")
    (row,) = rows_from_csv(text)
    assert abs(row.paoi_sim - 1.75) <= 3 * row.paoi_stderr
    assert row.paoi_analytic == pytest.approx(1.75)


def test_simulate_seed_override_changes_result(tmp_path):
    cfg = base(sim={"packets": 5000, "seed": 1})
    a = rows_from_csv(run(tmp_path, "simulate", cfg)[1])[0]
    b = rows_from_csv(run(tmp_path, "simulate", cfg, "--seed", "2")[1])[0]
    c = rows_from_csv(run(tmp_path, "simulate", cfg)[1])[0]
    assert a.paoi_sim != b.paoi_sim and a == c


def test_sweep_table(tmp_path):
    cfg = base(sweep={"ratio_grid": [1 / 3, 1, 3]}, sim={"packets": 100_000})
    rc, text = run(tmp_path, "sweep", cfg)
    rows = rows_from_csv(text)
    assert rc == 0 and len(rows) == 18
    keys = [(r.ratio, r.system, r.policy) for r in rows]
    assert keys == sorted(keys, key=lambda k: (k[0], k[1] != "non_preemptive",
                                               ["optimal_fixed", "optimal_transmission_aware",
                                                "mean_threshold"].index(k[2])))
    ta = [r.threshold for r in rows if r.system == "preemptive" and r.policy == "optimal_transmission_aware"]
    assert ta == sorted(ta)
    np_ta = [r for r in rows if r.system == "non_preemptive" and r.policy == "optimal_transmission_aware"]
    assert all(r.error for r in np_ta)


def test_sweep_single_ratio_equals_simulate(tmp_path):
    cfg = base(sweep={"ratio_grid": [1.0], "systems": ["preemptive"],
                      "policies": [{"kind": "fixed_threshold", "theta": 0.2}]},
               sim={"packets": 20_000}, system="preemptive",
               policy={"kind": "fixed_threshold", "theta": 0.2})
    sw = rows_from_csv(run(tmp_path, "sweep", cfg)[1])
    assert len(sw) == 1
    assert sw[0].paoi_analytic == rows_from_csv(run(tmp_path, "eval", cfg)[1])[0].paoi_analytic


def test_sweep_requires_block(tmp_path):
    assert run(tmp_path, "sweep", base())[0] == 2


def test_sweep_gnuplot_script(tmp_path):
    cfg = base(sweep={"ratio_grid": [1.0], "systems": ["preemptive"],
                      "policies": [{"kind": "mean_threshold"}], "gnuplot": True},
               sim={"packets": 5000})
    run(tmp_path, "sweep", cfg)
    assert "plot" in (tmp_path / "out.csv.gp").read_text()


@given(st.floats(0.01, 100.0), st.floats(0.1, 10.0))
def test_sweep_mapping(r, total):
    T, C = cli.sweep_distributions({"transmission": EXP2, "computation": EXP2}, r, total)
    assert T.mean + C.mean == pytest.approx(total, rel=1e-12)
    assert T.mean / C.mean == pytest.approx(r, rel=1e-12)


def test_sweep_mapping_pareto():
    T, _ = cli.sweep_distributions({"transmission": {"kind": "pareto", "xm": 1, "alpha": 2},
                                    "computation": EXP2}, 1.0, 1.0)
    assert T.xm == pytest.approx(0.25) and T.alpha == 2.0


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(finite, finite, st.one_of(finite, st.just(math.inf)))
def test_csv_round_trip(a, b, th):
    row = ResultRow(a, "preemptive", "fixed_threshold", th, b, a, b, a, b)
    (back,) = rows_from_csv(rows_to_csv([row]))
    assert back == row


def test_validate_default_matrix(tmp_path):
    rc, text = run(tmp_path, "validate", base(), "--packets", "1000000")
    report = json.loads(text)
    assert rc == 0 and report["passed"] and report["n_checks"] > 0


def test_validate_corrupted_tolerance(tmp_path):
    rc, text = run(tmp_path, "validate", base(validate={"se_multiplier": 0.0, "abs_tol": 0.0}),
                   "--packets", "20000")
    assert rc != 0 and not json.loads(text)["passed"]


def test_validate_empty_matrix(tmp_path):
    rc, text = run(tmp_path, "validate", base(validate={"matrix": []}))
    report = json.loads(text)
    assert rc == 0 and report["n_checks"] == 0 and report["warnings"]


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, base())
    res = subprocess.run([sys.executable, "-m", "mecpaoi.cli", "eval", "--config", cfg],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ratio,")


def test_numba_flag_forces_numpy():
    env = dict(os.environ, MECPAOI_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from mecpaoi import _accel; print(_accel.default_backend(), _accel.HAVE_NUMBA)"],
                         env=env, capture_output=True, text=True).stdout.split()
    assert out == ["numpy", "False"]
