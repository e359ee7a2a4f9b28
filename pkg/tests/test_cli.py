import json

import pytest

from cqnls import cli, snapshot


def run(capsys, *argv):
    status = cli.main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def test_simulate_writes_tables_snapshots_and_figures(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        "[grid]\nd = 1\nm = 64\nL = 32\n\n"
        "[evolution]\ndt = 0.0625\nt_end = 2.0\ncadence = 0.5\nsolver = \"both\"\n"
        "dyadic_snapshots = true\ncheckpoint_every = 1.0\n"
    )
    out_dir = tmp_path / "out"
    status, out, _ = run(capsys, "simulate", str(cfg), "--out", str(out_dir), "--plot")
    assert status == 0
    names = {p.name for p in out_dir.iterdir()}
    assert {"diagnostics_strang_psi.csv", "diagnostics_ifrk4_v.csv", "cross_difference.csv", "summary.json", "diagnostics.png"} <= names
    assert any(n.startswith("dyadic_ifrk4_v_t2") for n in names)
    assert any(n.startswith("checkpoint_") for n in names)
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["meta"]["config"]["grid"]["m"] == 64
    assert 0 < summary["wraparound_horizon"] < summary["meta"]["config"]["grid"]["L"]
    assert len(json.loads(out)["outputs"]) == 5

    snap = next(p for p in out_dir.iterdir() if p.name.startswith("dyadic_"))
    status, out, _ = run(capsys, "info", str(snap))
    assert status == 0 and json.loads(out)["m"] == 64


def test_simulate_is_deterministic(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[grid]\nd = 1\nm = 32\nL = 32\n\n[evolution]\ndt = 0.05\nt_end = 0.5\ncadence = 0.25\n")
    for name in ("a", "b"):
        assert run(capsys, "simulate", str(cfg), "--out", str(tmp_path / name))[0] == 0
    for f in ("diagnostics_strang_psi.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_config_exits_2(tmp_path, capsys):
    status, _, err = run(capsys, "simulate", str(tmp_path / "nope.toml"))
    assert status == 2
    assert json.loads(err)["error"] == "FileNotFound"


def test_bad_config_reports_location(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[grid]\nm = 48\n")
    status, _, err = run(capsys, "simulate", str(cfg))
    body = json.loads(err)
    assert status == 1
    assert body["error"] == "NonPowerOfTwo" and body["line"] == 2


def test_dispersive_command(tmp_path, capsys):
    status, out, _ = run(capsys, "dispersive", "--N", "1", "--tmax", "4", "--nt", "3", "--out", str(tmp_path), "--plot")
    assert status == 0
    assert {"decay_N1.csv", "decay_N1.json", "decay_N1.png"} <= {p.name for p in tmp_path.iterdir()}
    assert "slopes" in json.loads(out)
    status, _, err = run(capsys, "dispersive", "--N", "2", "--tmax", "4", "--out", str(tmp_path))
    assert status == 1 and json.loads(err)["error"] == "DyadicOutOfRange"


def test_atlas_command_without_opnorm(tmp_path, capsys):
    status, out, _ = run(
        capsys, "atlas", "--phase", "plain2", "--dyads", "1,2", "--thresholds", "desk", "--samples", "5000", "--no-opnorm", "--out", str(tmp_path)
    )
    assert status == 0
    lines = (tmp_path / "atlas_plain2.jsonl").read_text().splitlines()
    assert "meta" in json.loads(lines[0])
    assert json.loads(out)["rows"] == len([ln for ln in lines[1:] if "region" in json.loads(ln) and "omitted" not in json.loads(ln)])


def test_parse_dyads():
    assert cli.parse_dyads("0.25:2") == [0.25, 0.5, 1.0, 2.0]
    assert cli.parse_dyads("0.5,2") == [0.5, 2.0]
    assert len(cli.parse_dyads("full")) == 7
    with pytest.raises(Exception):
        cli.parse_dyads("3")


def test_opnorm_command(capsys):
    status, out, _ = run(capsys, "opnorm", "--symbol", "gaussian", "--method", "axial")
    assert status == 0
    assert json.loads(out)["parts"]["xi1"]["Hdot1"] == pytest.approx(2.43024766838, rel=1e-8)
    status, _, err = run(capsys, "opnorm", "--symbol", "nonsense")
    assert status == 1


def test_info_rejects_corrupt_file(tmp_path, capsys):
    p = tmp_path / "x.cqs"
    p.write_bytes(b"CQNLS" + b"\0" * 4)
    status, _, err = run(capsys, "info", str(p))
    assert status == 1 and json.loads(err)["error"] == "TruncatedSnapshot"
    assert snapshot.MAGIC == b"CQNLS"
