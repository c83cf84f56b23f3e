import csv
import json

import pytest

from symblend.cli import Config, main


def _run(tmp_path, *args):
    return main(["--out", str(tmp_path), *args])


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_overrides_resolve_sections():
    cfg = Config()
    cfg.override("chi", "0.1", "covering")
    cfg.override("grid_res", "11", "covering")
    cfg.override("maps.eps", "1e-9", "covering")
    cfg.override("delta", "0.1", "skew-check")
    assert cfg.num("regime", "chi") == 0.1
    assert cfg.int("covering", "grid_res") == 11
    assert cfg.num("maps", "eps") == 1e-9
    assert cfg.num("skew", "delta") == 0.1


def test_config_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[covering]\ngrid_res = 21\n")
    assert _run(tmp_path, "--config", str(p), "covering") == 0
    (row,) = _rows(tmp_path / "covering.csv")
    assert row["grid_res"] == "21" and row["covered"] == "true"


def test_covering_row(tmp_path):
    assert _run(tmp_path, "covering", "--chi", "0.05", "--grid_res=61") == 0
    (row,) = _rows(tmp_path / "covering.csv")
    assert row["covered"] == "true" and float(row["a_estimate"]) >= 0.5
    # the parameter tuple travels with the row
    assert float(row["chi"]) == 0.05 and float(row["eps"]) > 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["runs"][-1]["command"] == "covering"
    assert man["runs"][-1]["config"]["covering"]["grid_res"] == "61"


def test_csv_uses_17_digits(tmp_path):
    assert _run(tmp_path, "r3bp-gap", "--G0_list", "3") == 0
    (row,) = _rows(tmp_path / "gap.csv")
    assert row["mu"] == "0.29999999999999999"


def test_infeasible_regime_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "regime", "--eps", "2", "--tau", "1") == 3
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    rec = json.loads(err[0])
    assert rec["error"] == "RegimeInfeasible" and rec["exit_code"] == 3


def test_other_errors_exit_one(tmp_path, capsys):
    assert _run(tmp_path, "covering", "--maps.kind", "nonsense") == 1
    assert json.loads(capsys.readouterr().err)["exit_code"] == 1


def test_transitivity_verify_and_tamper(tmp_path):
    assert _run(tmp_path, "transitivity", "--pairs", "2") == 0
    rows = _rows(tmp_path / "transitivity.csv")
    assert all(r["success"] == "true" for r in rows)
    cert = tmp_path / "certificates" / "transitivity_0000.json"
    assert _run(tmp_path, "verify", str(cert)) == 0
    d = json.loads(cert.read_text())
    word = d["certificate"]["word"]
    i = next(k for k, (s, c) in enumerate(word) if s == 0 and c > 4)
    s, c = word[i]
    word[i:i + 1] = [[0, 2], [1, 1], [0, c - 3]]
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(d))
    assert _run(tmp_path, "verify", str(bad)) == 2


def test_deterministic_certificates(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(a), "--seed", "7", "transitivity", "--pairs", "2"]) == 0
    assert main(["--out", str(b), "--seed", "7", "transitivity", "--pairs", "2"]) == 0
    for name in ("transitivity_0000.json", "transitivity_0001.json"):
        assert (a / "certificates" / name).read_bytes() == (b / "certificates" / name).read_bytes()


def test_r3bp_subcommands(tmp_path):
    assert _run(tmp_path, "r3bp-integrate", "--t_end", "50", "--samples", "11") == 0
    rows = _rows(tmp_path / "trajectory.csv")
    assert len(rows) == 11 and set(rows[0]) >= {"t", "x", "y", "beta", "G", "mu", "zeta"}
    assert _run(tmp_path, "r3bp-drift") == 0
    rows = _rows(tmp_path / "drift.csv")
    assert float(rows[-1]["G"]) - 10.0 >= 0.01
    assert list(rows[0])[-3:] == ["kick_index", "phi", "G"]


def test_sweep(tmp_path):
    assert _run(tmp_path, "sweep", "grid_res", "--values", "21,41") == 0
    rows = _rows(tmp_path / "sweep_grid_res.csv")
    assert [r["status"] for r in rows] == ["ok", "ok"]


def test_cf_and_regime(tmp_path):
    assert _run(tmp_path, "cf", "--depth", "5") == 0
    assert [r["quotient"] for r in _rows(tmp_path / "cf.csv")] == ["1"] * 5
    assert _run(tmp_path, "regime") == 0
    assert json.loads((tmp_path / "regime.json").read_text())["calN_size"] > 0


def test_blender_subcommands(tmp_path):
    for cmd in ("fixed-points", "manifolds", "double-blender"):
        assert _run(tmp_path, cmd) == 0
    assert len(_rows(tmp_path / "fixed_points.csv")) == 2
    angles = [float(r["angle_deg"]) for r in _rows(tmp_path / "double_blender.csv")]
    assert min(angles) >= 35.0


def test_skew_check(tmp_path):
    assert _run(tmp_path, "skew-check", "--delta", "0.1") == 0
    rows = _rows(tmp_path / "skew_check.csv")
    assert {r["sweep"] for r in rows} == {"depth", "length"}


@pytest.mark.slow
def test_skew_transitivity_and_verify(tmp_path):
    assert _run(tmp_path, "skew-transitivity", "--trials", "1") == 0
    cert = tmp_path / "certificates" / "skew_0000.json"
    assert _run(tmp_path, "verify", str(cert)) == 0
    d = json.loads(cert.read_text())
    d["certificate"]["window_b"][d["certificate"]["N"] + 8] ^= 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert _run(tmp_path, "verify", str(bad)) == 2
