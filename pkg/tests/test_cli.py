import json

import pytest

from ehmi.cli import main
from ehmi.data_io import write_encounters, write_trajectories
from ehmi.game import GameForm
from ehmi.payoff import PayoffParams
from ehmi.synthetic import random_encounters, sample_outcomes, synthetic_pair

SMALL_GRID = {"scenario": "av_first", "v_hv": [6, 10, 3], "a_hv": [-1, 1, 3], "v_av": [3, 13, 3], "a_av": [-1, 1, 3]}


@pytest.fixture(scope="module")
def enc_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "enc.csv"
    data = sample_outcomes(random_encounters(120, seed=5), PayoffParams.default(), GameForm.B_FIRST, seed=6)
    write_encounters(data, path)
    return path


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_calibrate_writes_params(enc_csv, tmp_path, capsys):
    code, out, _ = _run(capsys, "calibrate", "--data", enc_csv, "--restarts", 0, "--out", tmp_path)
    assert code == 0
    assert "b-first" in out and (tmp_path / "params_b-first.params").is_file()
    params = PayoffParams.load(tmp_path / "params_b-first.params")
    assert params.values.shape == (20,)
    code, out, _ = _run(capsys, "validate", "--data", enc_csv, "--params", tmp_path / "params_b-first.params")
    assert code == 0 and all(f in out for f in ("sim", "a-first", "b-first"))


def test_empty_and_missing_inputs(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code, _, err = _run(capsys, "calibrate", "--data", empty)
    assert code != 0 and "empty" in err
    code, _, err = _run(capsys, "validate", "--data", tmp_path / "nope.csv")
    assert code != 0 and "no such file" in err
    code, _, err = _run(capsys, "simulate", "--scenario", "missing_scenario")
    assert code != 0


def test_trajectory_input(tmp_path, capsys):
    path = tmp_path / "traj.csv"
    write_trajectories(synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=20, s0_b=20, duration=8), path)
    code, out, _ = _run(capsys, "decide", "--data", path)
    assert code == 0 and out.startswith("encounters 1")


def test_decide_outputs(enc_csv, tmp_path, capsys):
    code, out, _ = _run(capsys, "decide", "--data", enc_csv, "--out", tmp_path)
    assert code == 0 and "successful deceptions" in out
    census = json.loads((tmp_path / "census.json").read_text())
    assert census["deception"]["n_encounters"] + census["deception"]["n_skipped"] == 120
    rows = (tmp_path / "plans.csv").read_text().splitlines()
    assert rows[0].startswith("encounter_id,disclose")


def test_beliefs_file(enc_csv, tmp_path, capsys):
    b = tmp_path / "beliefs.json"
    b.write_text(json.dumps({"rush_accel": 0.5, "yield_accel": -2.5}))
    code, out, _ = _run(capsys, "report", "--data", enc_csv, "--beliefs", b)
    assert code == 0 and "PET shift" in out
    b.write_text(json.dumps({"rush_accel": -3.0, "yield_accel": -1.0}))
    code, _, err = _run(capsys, "decide", "--data", enc_csv, "--beliefs", b)
    assert code != 0 and "belief" in err


def test_simulate(tmp_path, capsys):
    code, out, _ = _run(capsys, "simulate", "--scenario", "av_first", "--out", tmp_path)
    assert code == 0 and "PET increase" in out
    pet = json.loads((tmp_path / "pet.json").read_text())
    assert pet["deception"]["pet"] > pet["no_deception"]["pet"]
    header = (tmp_path / "trajectories.csv").read_text().splitlines()[0]
    assert header == "run,t,vehicle,x,y,heading,speed"


def test_sweep(tmp_path, capsys):
    g = tmp_path / "grid.json"
    g.write_text(json.dumps(SMALL_GRID))
    code, out, _ = _run(capsys, "sweep", "--grid", g, "--out", tmp_path)
    assert code == 0 and out.startswith("cells 81")
    s = json.loads((tmp_path / "sweep.json").read_text())
    assert s["n_cells"] == 81 == s["n_valid"] + s["n_skipped"]
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 82


@pytest.mark.parametrize("argv", [
    ["calibrate", "--restarts", "1"],
    ["decide"],
    ["simulate", "--scenario", "av_later"],
    ["sweep", "--no-simulate"],
])
def test_byte_determinism(argv, enc_csv, tmp_path, capsys):
    extra = ["--data", enc_csv] if argv[0] in ("calibrate", "decide") else []
    if argv[0] == "sweep":
        g = tmp_path / "grid.json"
        g.write_text(json.dumps(SMALL_GRID))
        extra = ["--grid", g]
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        code, out, _ = _run(capsys, *argv, *extra, "--out", d)
        assert code == 0
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outs.append((out, files))
    assert outs[0] == outs[1]
