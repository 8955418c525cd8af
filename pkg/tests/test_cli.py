"""End-to-end checks of the mflow command line."""
import json

import pytest
from click.testing import CliRunner

from mflow.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = {"problem": "heat", "scheme": "stage3_order2",
           "step_counts": [4, 8], "mq_base": 64, "mq_cap": 64,
           "proxy_tol": 1e30}
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_verify_scheme_orders(runner):
    res = runner.invoke(main, ["verify-scheme", "stage3_order2"])
    assert res.exit_code == 0
    assert "order: 2" in res.output
    assert "a_N = 1" in res.output and "b_N = 1/2" in res.output

    res = runner.invoke(main, ["verify-scheme", "diag7_order3"])
    assert res.exit_code == 0
    assert "order: 3" in res.output
    assert "c_N = 1/6" in res.output and "d_N = 1/6" in res.output

    res = runner.invoke(main, ["verify-scheme", "backward_euler"])
    assert "order: 1" in res.output


def test_verify_scheme_usage_errors(runner):
    res = runner.invoke(main, ["verify-scheme"])
    assert res.exit_code == 2
    assert "MFLOW_ERROR" in res.stderr

    res = runner.invoke(main, ["verify-scheme", "not_a_scheme"])
    assert res.exit_code == 2
    payload = json.loads(res.stderr.split("MFLOW_ERROR ", 1)[1])
    assert payload["error"] == "ValueError"
    assert "unknown scheme" in payload["message"]


def test_verify_scheme_from_config(runner, tmp_path):
    cfg = write_cfg(tmp_path, scheme="diag7_order3")
    res = runner.invoke(main, ["verify-scheme", "--config", cfg])
    assert res.exit_code == 0
    assert "order: 3" in res.output


def test_certify_dissipative(runner):
    res = runner.invoke(main, ["certify", "stage3_order2"])
    assert res.exit_code == 0
    assert "dissipative" in res.output
    assert "book" in res.output


def test_certify_bounded(runner):
    res = runner.invoke(main, ["certify", "diag7_order3",
                               "--l1", "0.2", "--l2", "0.3"])
    assert res.exit_code == 0
    assert "bounded" in res.output
    assert "hub-plus-path" in res.output


def test_certify_shift_options_must_pair(runner):
    res = runner.invoke(main, ["certify", "diag7_order3", "--l1", "0.2"])
    assert res.exit_code == 2
    assert "together" in res.stderr


def test_certify_no_project_fails_for_decimal_tables(runner):
    """diag7 ships two-decimal theta values whose independently rounded
    parts can miss the exact shifted weight by up to 0.01 on shared edges;
    without the repair projection the partition check must report that."""
    res = runner.invoke(main, ["certify", "diag7_order3", "--no-project",
                               "--l1", "0.2", "--l2", "0.3"])
    assert res.exit_code == 1
    payload = json.loads(res.stderr.split("MFLOW_ERROR ", 1)[1])
    assert payload["error"] == "CertificateError"
    assert "theta values sum to" in payload["message"]


def test_run_pde(runner, tmp_path):
    cfg = write_cfg(tmp_path, n_steps=3)
    out = tmp_path / "out"
    res = runner.invoke(main, ["run", "--config", cfg, "--out", str(out)])
    assert res.exit_code == 0, res.output
    traj = (out / "trajectory.csv").read_text().strip().split("\n")
    assert traj[0] == "step,time,energy,d2_prev,bootstrap"
    assert len(traj) == 5
    dens = (out / "final_density.csv").read_text().strip().split("\n")
    assert dens[0] == "x,u"
    assert len(dens) == 2049


def test_run_euclidean(runner, tmp_path):
    cfg = write_cfg(tmp_path, problem="euclidean_quadratic",
                    step_counts=[4, 8], n_steps=4, dimension=3)
    out = tmp_path / "out"
    res = runner.invoke(main, ["run", "--config", cfg, "--out", str(out)])
    assert res.exit_code == 0, res.output
    pt = (out / "final_point.csv").read_text().strip().split("\n")
    assert pt[0] == "i,x"
    assert len(pt) == 4


def test_convergence_table_and_repeat_bytes(runner, tmp_path):
    cfg = write_cfg(tmp_path)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    res = runner.invoke(main, ["convergence", "--config", cfg,
                               "--out", str(out1)])
    assert res.exit_code == 0, res.output
    assert "fitted slope:" in res.output
    res2 = runner.invoke(main, ["convergence", "--config", cfg,
                                "--out", str(out2)])
    assert res2.exit_code == 0
    assert (out1 / "table.csv").read_bytes() == (out2 / "table.csv").read_bytes()
    lines = (out1 / "table.csv").read_text().strip().split("\n")
    assert lines[0] == "n,mq,error,order"
    assert len(lines) == 4


def test_energy_trace_cmd(runner, tmp_path):
    cfg = write_cfg(tmp_path, n_steps=4)
    out = tmp_path / "out"
    res = runner.invoke(main, ["energy-trace", "--config", cfg,
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert "max single-step energy rise:" in res.output
    assert "max energy excess over first step:" in res.output
    lines = (out / "trace.csv").read_text().strip().split("\n")
    assert lines[0] == "step,time,energy,d2_prev"
    assert len(lines) == 6


def test_bad_config_is_usage_error(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"problem": "heat", "wrong_key": 1}))
    res = runner.invoke(main, ["convergence", "--config", str(bad)])
    assert res.exit_code == 2
    assert "unknown config keys" in res.stderr

    missing = str(tmp_path / "nope.json")
    res = runner.invoke(main, ["run", "--config", missing])
    assert res.exit_code == 2
