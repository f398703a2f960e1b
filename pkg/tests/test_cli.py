import json

import pytest

from dcresize.cli import main
from dcresize.trace import save_frame_trace, synth_diurnal


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_capacity_prints_json(capsys):
    code, out, _ = run(capsys, "capacity", "--rate", "300", "--delay-bound-s", "0.2", "--violation-prob", "1e-3")
    assert code == 0
    data = json.loads(out)
    assert data["capacity"] == pytest.approx(316.95580845464707)
    code, out, _ = run(capsys, "capacity", "--implicit")
    assert json.loads(out)["capacity"] == pytest.approx(316.95580845464707, rel=1e-9)


def test_capacity_families(capsys):
    _, out, _ = run(capsys, "capacity", "--family", "mm", "--cycle_time", "6")
    assert json.loads(out)["capacity"] == pytest.approx(589.2528821137248)
    _, out, _ = run(capsys, "capacity", "--family", "pareto", "--alpha", "1.5")
    assert json.loads(out)["gamma_star"] > 1


def test_validation_exit_code(capsys):
    code, _, err = run(capsys, "capacity", "--family", "mm", "--cycle-time", "1")
    assert code == 1 and "T >= 3" in err
    code, _, _ = run(capsys, "capacity", "--violation-prob", "2")
    assert code == 1
    with pytest.raises(SystemExit) as exc:
        main(["capacity", "--family", "weibull"])
    assert exc.value.code == 1


def test_convergence_exit_code(capsys, monkeypatch):
    from dcresize import cli
    from dcresize.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("no bracket", frames=[0])

    monkeypatch.setattr(cli, "solve_capacity", boom)
    code, _, err = run(capsys, "capacity")
    assert code == 2 and "no bracket" in err


def test_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--slots", "20000", "--seeds", "0,1", "--servers", "1,4",
                       "--out-dir", str(tmp_path))
    assert code == 0
    data = json.loads(out)
    assert [r["seed"] for r in data["runs"]] == [0, 1]
    assert all(r["split"]["4"]["ok"] for r in data["runs"])
    assert (tmp_path / "run_seed0.csv").read_text().startswith("slot;backlog;delay\n")


def test_simulate_seed_env(capsys, monkeypatch):
    monkeypatch.setenv("DCR_SEED", "9")
    _, out, _ = run(capsys, "simulate", "--slots", "5000")
    assert [r["seed"] for r in json.loads(out)["runs"]] == [9]


def test_plan_exports(capsys, tmp_path):
    save_frame_trace(synth_diurnal(24, 300.0, 2.0, seed=1), tmp_path / "t.csv")
    code, out, _ = run(capsys, "plan", "--trace", str(tmp_path / "t.csv"), "--family", "pareto",
                       "--out-dir", str(tmp_path / "o"))
    assert code == 0
    summary = json.loads((tmp_path / "o" / "plan_summary.json").read_text())
    assert set(summary["plans"]) == {"optimal", "lcp", "static"}
    lines = (tmp_path / "o" / "plan.csv").read_text().splitlines()
    assert lines[0] == "frame;floor;n_opt;n_lcp;n_static"
    assert len(lines) == 25
    assert json.loads(out)["savings_optimal"] == summary["savings_optimal"]


def test_plan_missing_trace(capsys, tmp_path):
    code, _, _ = run(capsys, "plan", "--trace", str(tmp_path / "none.csv"))
    assert code == 1


def _config(tmp_path):
    cfg = {
        "traces": [{"name": "s", "synth": {"K": 24, "mean_rate": 100.0, "pmr": 2.0}}],
        "families": ["poisson", "pareto"],
        "output_dir": "ignored",
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_sweep_flags_and_seed_override(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("DCR_SEED", "4,5")
    out_dir = tmp_path / "res"
    code, out, _ = run(capsys, "sweep", "--config", str(_config(tmp_path)), "--output_dir", str(out_dir),
                       "--betas", "1,6", "--workers", "1")
    assert code == 0
    assert json.loads(out)["rows"] == 2 * 2 * 2
    body = (out_dir / "sweep.csv").read_text().splitlines()
    assert {line.split(";")[1] for line in body[1:]} == {"4", "5"}
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["seeds"] == [4, 5]
    assert manifest["config"]["betas"] == [1.0, 6.0]


def test_sweep_bad_config(capsys, tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    code, _, _ = run(capsys, "sweep", "--config", str(tmp_path / "c.json"))
    assert code == 1


def test_threshold(capsys, tmp_path):
    code, out, _ = run(capsys, "threshold", "--config", str(_config(tmp_path)), "--families", "poisson",
                       "--target", "0.1", "--output-dir", str(tmp_path / "th"), "--workers", "1")
    assert code == 0
    data = json.loads(out)
    assert data["cells"][0]["status"] in ("ok", "unreachable")
    assert (tmp_path / "th" / "threshold_beta.csv").exists()
    assert (tmp_path / "th" / "threshold_beta.json").exists()
