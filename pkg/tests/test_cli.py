import csv
import json

import pytest

from busched.cli import main
from busched.io import load_schedule, save_schedule
from busched.model import TripRecord


@pytest.fixture
def inst_path(tmp_path):
    p = tmp_path / "inst.json"
    assert main(["gen", "--seed", "1", "--departures", "6", "--spare", "2", "--out", str(p)]) == 0
    return p


def test_eval_greedy_prints_objectives(inst_path, tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["eval", "--instance", str(inst_path), "--algo", "greedy", "--csv", str(out)]) == 0
    text = capsys.readouterr().out
    assert "N_u" in text and "T_d" in text and "N_d" in text
    rows = list(csv.DictReader(out.open()))
    assert rows[0]["algo"] == "greedy" and rows[0]["n_uncovered"] == "0"


def test_validate_flags_short_rest(inst_path, tmp_path, capsys):
    sched_path = tmp_path / "s.json"
    assert main(["eval", "--instance", str(inst_path), "--algo", "greedy",
                 "--schedule-out", str(sched_path)]) == 0
    assert main(["validate", "--instance", str(inst_path), "--schedule", str(sched_path)]) == 0
    sched = load_schedule(sched_path)
    by_bus = sched.by_bus()
    bus, trips = next((b, t) for b, t in by_bus.items() if sum(x.kind == "service" for x in t) >= 2)
    first, second = [t for t in trips if t.kind == "service"][:2]
    # pull the second trip forward to 3 minutes after the first arrival
    shift = second.depart_minute - (first.arrive_minute + 3)
    moved = TripRecord(bus, "service", second.from_cp, second.to_cp, second.depart_minute - shift,
                       second.arrive_minute - shift, second.line_id)
    sched.trips = [moved if t == second else t for t in sched.trips if t.kind == "service" or t.bus_id != bus]
    save_schedule(sched, sched_path)
    capsys.readouterr()
    assert main(["validate", "--instance", str(inst_path), "--schedule", str(sched_path)]) == 1
    assert "[2]" in capsys.readouterr().out


def test_ablate_reward_writes_two_curves(inst_path, tmp_path):
    out = tmp_path / "abl"
    assert main(["ablate", "--instance", str(inst_path), "--arms", "reward", "--episodes", "4",
                 "--seeds", "0,1", "--outdir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["ablation_reward.csv", "curve_combined.csv", "curve_final_only.csv"]
    rows = list(csv.DictReader((out / "curve_combined.csv").open()))
    assert len(rows) == 8 and {r["seed"] for r in rows} == {"0", "1"}


def _run_pipeline(d, inst_path):
    d.mkdir()
    assert main(["gen", "--seed", "4", "--departures", "5", "--out", str(d / "i.json")]) == 0
    assert main(["train", "--instance", str(inst_path), "--episodes", "6", "--seed", "2",
                 "--out", str(d / "m.npz"), "--curve", str(d / "curve.csv"), "--csv", str(d / "train.csv")]) == 0
    assert main(["eval", "--instance", str(inst_path), "--algo", "ppo", "--model", str(d / "m.npz"),
                 "--csv", str(d / "eval.csv")]) == 0
    assert main(["eval", "--instance", str(inst_path), "--algo", "lns", "--csv", str(d / "lns.csv")]) == 0
    return {p.name: p.read_bytes() for p in d.iterdir() if p.suffix in (".csv", ".json")}


def test_repeat_runs_are_byte_identical(inst_path, tmp_path):
    a = _run_pipeline(tmp_path / "a", inst_path)
    b = _run_pipeline(tmp_path / "b", inst_path)
    assert a == b and len(a) == 5


def test_online_commands(inst_path, tmp_path, capsys):
    off, on = tmp_path / "off.npz", tmp_path / "on.npz"
    assert main(["train", "--instance", str(inst_path), "--episodes", "4", "--out", str(off),
                 "--curve", str(tmp_path / "c.csv")]) == 0
    assert main(["train-online", "--instance", str(inst_path), "--offline-model", str(off),
                 "--episodes", "4", "--out", str(on), "--curve", str(tmp_path / "oc.csv")]) == 0
    capsys.readouterr()
    logs = tmp_path / "logs"
    assert main(["simulate-online", "--instance", str(inst_path), "--model", str(on), "--offline-model",
                 str(off), "--scenario", "window", "--scenario", "line:1", "--log-dir", str(logs),
                 "--csv", str(tmp_path / "on.csv")]) == 0
    rows = list(csv.DictReader((tmp_path / "on.csv").open()))
    assert [r["scheme"] for r in rows] == ["original", "window", "line:1"]
    assert (logs / "decisions_window.csv").exists()


def test_plot_and_derive(inst_path, tmp_path):
    sched = tmp_path / "s.json"
    main(["eval", "--instance", str(inst_path), "--algo", "greedy", "--schedule-out", str(sched)])
    assert main(["plot", "--instance", str(inst_path), "--schedule", str(sched), "--out", str(tmp_path / "g.svg")]) == 0
    assert (tmp_path / "g.svg").read_text().lstrip().startswith("<?xml")
    assert main(["derive", "--instance", str(inst_path), "--fraction", "0.5", "--out", str(tmp_path / "d.json")]) == 0
    n = sum(len(t["departures"]) for t in json.loads((tmp_path / "d.json").read_text())["timetables"])
    assert n == 12


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("BUSCHED_OUT", str(tmp_path / "env"))
    assert main(["gen", "--seed", "0"]) == 0
    assert (tmp_path / "env" / "instance_s0.json").exists()


def test_config_file_supplies_defaults(inst_path, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": str(inst_path), "episodes": 3, "seeds": [0],
                               "output_dir": str(tmp_path / "o")}))
    assert main(["--config", str(cfg), "ablate", "--arms", "algo"]) == 0
    assert (tmp_path / "o" / "curve_reinforce.csv").exists()
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["--config", str(cfg), "ablate", "--arms", "algo"]) == 2


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["eval", "--instance", str(bad), "--algo", "greedy"]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["eval", "--instance", str(tmp_path / "missing.json"), "--algo", "greedy"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--algo", "greedy"])
    assert exc.value.code == 2


def test_model_dimension_mismatch(inst_path, tmp_path, capsys):
    other = tmp_path / "other.json"
    main(["gen", "--seed", "2", "--lines", "3", "--departures", "4", "--out", str(other)])
    model = tmp_path / "m.npz"
    main(["train", "--instance", str(other), "--episodes", "2", "--out", str(model), "--curve", str(tmp_path / "c.csv")])
    capsys.readouterr()
    assert main(["eval", "--instance", str(inst_path), "--algo", "ppo", "--model", str(model)]) == 1
    assert "state dimension" in capsys.readouterr().err
