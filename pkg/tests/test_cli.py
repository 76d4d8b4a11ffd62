import json

import pytest
from hypothesis import given, strategies as st

from heatmetric import cli
from heatmetric.config import COMMANDS, ConfigError, RunConfig


@given(st.sampled_from(COMMANDS), st.sampled_from([2, 4]),
       st.lists(st.floats(0.01, 10), min_size=1, max_size=3), st.integers(0, 2 ** 31), st.booleans())
def test_config_roundtrip(command, k, t, seed, as_json):
    cfg = RunConfig(command=command, k=k, t=t, seed=seed, json=as_json)
    assert RunConfig.from_json(cfg.to_json()) == cfg


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(k=3).validate()
    with pytest.raises(ConfigError):
        RunConfig(rmin=2.0, rmax=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(t=[0.0]).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_json('{"bogus": 1}')
    with pytest.raises(ConfigError):
        RunConfig.from_json("[1, 2]")


def test_flags_override_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(RunConfig(command="cone-metric", k=4, rn=16, seed=7).to_json())
    assert cli.main(["cone-metric", "--config", str(path), "--rn", "8", "--dump-config"]) == 0
    got = json.loads(capsys.readouterr().out)
    assert got["k"] == 4 and got["seed"] == 7 and got["rn"] == 8


def test_cone_metric_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["cone-metric", "--k", "2", "--rn", "12", "--rmin", "1e-3", "--rmax", "50"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().strip().split("\n")
    assert rows[0] == "r,R,A,rho,ell,ratio"
    # [PAPER] the ratio column tends to sqrt(2) pi at small r
    assert float(rows[1].split(",")[-1]) == pytest.approx(4.4429, abs=1e-3)


def test_cone_metric_k4_ratio_vanishes(capsys):
    assert cli.main(["cone-metric", "--k", "4", "--rn", "12"]) == 0
    rows = capsys.readouterr().out.strip().split("\n")
    assert float(rows[1].split(",")[-1]) < 1e-3


def test_usage_errors_exit_1(capsys):
    assert cli.main(["cone-metric", "--rmin", "2", "--rmax", "1"]) == 1
    assert cli.main(["cone-metric", "--k", "3"]) == 1
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["geodesic", "--k", "2"]) == 1
    err = capsys.readouterr().err.strip().split("\n")
    assert all(json.loads(line)["error"] == "usage" for line in err)


def test_numerical_failure_exits_2(capsys):
    # a table that stops short of saturation cannot evaluate far radii
    code = cli.main(["geodesic", "--p", "1", "0", "--q", "40", "1", "--rmax", "2", "--rn", "8"])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "numerical"


def test_geodesic_command(capsys):
    assert cli.main(["geodesic", "--p", "0", "0", "--q", "1", "0", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["branch"] == "apex" and out["distance"] > 0
    assert cli.main(["geodesic", "--p", "1", "0.3", "--q", "1", "0.3"]) == 0
    assert json.loads(capsys.readouterr().out)["distance"] == 0.0
    assert cli.main(["geodesic", "--p", "1", "0", "--q", "2", "1", "--t", "4", "--scaling", "--N", "65"]) == 0
    assert json.loads(capsys.readouterr().out)["scaling_error"] < 1e-4


def test_cone_angle_command(capsys):
    assert cli.main(["cone-angle", "--k", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["limit"] == pytest.approx(4.442883, rel=1e-3)


def test_heis_kernel_command(capsys):
    assert cli.main(["heis", "--kernel", "0", "0", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(1 / 16, abs=1e-12)


def test_accept_subset_json(capsys):
    assert cli.main(["accept", "--only", "1", "6", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and [c["number"] for c in out["criteria"]] == [1, 6]


def test_accept_small_basis_still_monotone(capsys):
    # the angular Galerkin value is a minimum over nested spaces, so it rises with degree
    code = cli.main(["accept", "--only", "2", "--degrees", "2", "4", "--json"])
    crit = json.loads(capsys.readouterr().out)["criteria"][0]
    vals = crit["values"]["values"]
    assert code == 0 and vals[0] <= vals[1]


def test_accept_failing_criterion_exits_2(capsys):
    # the far-field ratio at r = 50 sits just outside its 2% band
    code = cli.main(["accept", "--only", "4", "--json"])
    out = json.loads(capsys.readouterr().out)
    assert code == 2 and not out["passed"]
