import csv
import io
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from curved_nbody.cli import (
    EXIT_CONFIG,
    EXIT_NOCONV,
    EXIT_OK,
    EXIT_SINGULAR,
    RunConfig,
    main,
    parse_config,
    run,
    serialize_config,
)
from curved_nbody.errors import ConfigError

R2 = 1 / math.sqrt(2)
EXAMPLE = '{"sigma":1,"k":3,"masses":[1,1],"rates":[1.4142135623730951],"command":"find-eq","starts":100,"seed":7}'
EQ_POSITIONS = [[R2, 0, R2], [-R2, 0, R2]]


def write_config(tmp_path, **fields):
    doc = {"sigma": 1, "k": 3, "masses": [1, 1], "rates": [math.sqrt(2)], **fields}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_example():
    cfg = parse_config(EXAMPLE)
    assert cfg.k == 3 and cfg.masses == [1.0, 1.0] and cfg.starts == 100 and cfg.seed == 7
    assert cfg.command == "find-eq"
    assert cfg.d_values == [1e-1, 1e-2, 1e-3] and cfg.max_iter == 200


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"masses": [1, -1]}, "masses"),
        ({"k": 4, "rates": [1.0]}, "rates"),
        ({"masses": []}, "masses"),
        ({"sigma": 2}, "sigma"),
        ({"bogus": 1}, "bogus"),
        ({"positions": [[1, 0, 0]]}, "positions"),
        ({"cluster": [1]}, "cluster"),
        ({"command": "diagnose", "positions": [[1, 0, 0], [0, 1, 0]], "cluster": [0, 5]}, "cluster"),
        ({"d_values": [0.01, 0.1]}, "d_values"),
        ({"command": "scan", "sigma": -1}, "sigma"),
        ({"command": "simulate"}, "positions"),
        ({"command": "scan", "tol": 1e-2}, "tol"),
    ],
)
def test_parse_errors_name_field(patch, field):
    doc = {**json.loads(EXAMPLE), **patch}
    if "command" not in patch:
        doc.pop("command")
    with pytest.raises(ConfigError) as err:
        parse_config(json.dumps(doc))
    assert err.value.field == field


def test_missing_field():
    with pytest.raises(ConfigError) as err:
        parse_config('{"k": 3, "masses": [1]}')
    assert err.value.field == "rates"


@settings(max_examples=40, deadline=None)
@given(
    k=st.integers(2, 8),
    masses=st.lists(st.floats(0.01, 100), min_size=1, max_size=5),
    seed=st.integers(0, 2**31),
    starts=st.one_of(st.none(), st.integers(1, 1000)),
    tol=st.one_of(st.none(), st.floats(1e-14, 1e-4)),
    data=st.data(),
)
def test_config_round_trip(k, masses, seed, starts, tol, data):
    rates = data.draw(st.lists(st.floats(-10, 10), min_size=k // 2, max_size=k // 2))
    cfg = RunConfig(k=k, masses=masses, rates=rates, seed=seed, starts=starts, tol=tol)
    assert parse_config(serialize_config(cfg)) == cfg


def test_find_eq_example_config(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(EXAMPLE.replace('"starts":100', '"starts":12'))
    assert main(["find-eq", "--config", str(path)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["solutions"]
    for rec in doc["solutions"]:
        assert rec["min_distance"] == pytest.approx(math.sqrt(2), abs=1e-4)


def test_scan_writes_report(tmp_path):
    out = tmp_path / "scan.json"
    assert main(["scan", "--config", write_config(tmp_path, starts=15), "--out", str(out), "--seed", "3"]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["empirical_c"] > 0 and doc["seed"] == 3


def test_scan_csv(tmp_path, capsys):
    assert main(["scan", "--config", write_config(tmp_path, starts=10), "--format", "csv"]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["solution", "classification", "min_distance", "residual_norm"]
    assert len(rows) > 1


def test_simulate_zero_bodies_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"k":3,"masses":[],"rates":[1.0]}')
    assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["field"] == "masses"


def test_simulate_trajectory_csv(tmp_path):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--config", write_config(tmp_path, positions=EQ_POSITIONS, t_end=0.5), "--out", str(out)])
    assert code == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "body", "x1", "x2", "x3", "v1", "v2", "v3"]
    assert float(rows[-1][0]) == 0.5
    assert {r[1] for r in rows[1:]} == {"0", "1"}


def test_simulate_hyperbolic(tmp_path, capsys):
    pos = [[0.3, 0.0, math.sqrt(1.09)], [-0.3, 0.0, math.sqrt(1.09)]]
    path = write_config(tmp_path, sigma=-1, positions=pos, t_end=0.2)
    assert main(["simulate", "--config", path, "--format", "json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_drift"] <= 1e-9


def test_simulate_singularity_exit_code(tmp_path, capsys):
    pos = [[1, 0, 0], [math.cos(0.2), math.sin(0.2), 0]]
    path = write_config(tmp_path, positions=pos, velocities=[[0, 0, 0], [0, 0, 0]], t_end=5.0)
    assert main(["simulate", "--config", path]) == EXIT_SINGULAR
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "singularity"


def test_verify_derived_equilibrium(tmp_path, capsys):
    assert main(["verify", "--config", write_config(tmp_path, positions=EQ_POSITIONS)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and doc["max_deviation"] <= 1e-6


def test_verify_non_equilibrium_fails(tmp_path):
    pos = [[1, 0, 0], [0, 1, 0]]
    code = main(["verify", "--config", write_config(tmp_path, positions=pos, max_iter=1)])
    assert code == EXIT_NOCONV


def test_diagnose_csv(tmp_path, capsys):
    path = write_config(tmp_path, positions=[[1, 0, 0], [0, 1, 0]])
    assert main(["diagnose", "--config", path]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["d", "lhs_value", "rhs_value", "rhs_lower_half", "min_cos_alpha"]
    assert [float(r[0]) for r in rows[1:]] == [0.1, 0.01, 0.001]


def test_run_rejects_unknown_command(capsys):
    cfg = parse_config('{"k":3,"masses":[1],"rates":[1.0]}')
    assert run("explode", cfg) == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    path = write_config(tmp_path, positions=EQ_POSITIONS)
    proc = subprocess.run(
        [sys.executable, "-m", "curved_nbody", "verify", "--config", path],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["passed"] is True
