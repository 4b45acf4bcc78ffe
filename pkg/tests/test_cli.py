import json

import pytest

from randboson.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_dims_csv(tmp_path, capsys):
    out_file = tmp_path / "dims.csv"
    code, out, _ = run_cli(capsys, "dims", "--ell", "5", "--n", "8",
                           "--out", str(out_file))
    assert code == 0
    assert "total=1514" in out
    lines = out_file.read_text().splitlines()
    assert lines[0].startswith("# manifest:")
    assert lines[1] == "J,multiplets"
    table = {int(r.split(",")[0]): int(r.split(",")[1]) for r in lines[2:]}
    assert table[0] == 12 and table[32] == 7 and table[40] == 1


def test_dims_json(capsys):
    code, out, _ = run_cli(capsys, "dims", "--ell", "6", "--n", "3", "--json")
    assert code == 0
    payload = json.loads(out.splitlines()[0])
    assert payload["total"] == 25
    assert payload["counts"]["0"] == 1
    assert payload["hilbert_dim"] == 455


def test_usage_errors_exit_one(capsys):
    code, _, err = run_cli(capsys, "dims", "--ell", "5", "--n", "8", "--bogus")
    assert code == 1 and "usage error" in err
    code, _, err = run_cli(capsys, "frobnicate")
    assert code == 1


def test_run_deterministic_and_stats(tmp_path, capsys):
    f1, f2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["run", "--ell", "3", "--n", "4", "--realizations", "150",
            "--seed", "7", "--primed", "--out"]
    assert run_cli(capsys, *args, str(f1))[0] == 0
    assert run_cli(capsys, *args, str(f2))[0] == 0
    assert f1.read_bytes() == f2.read_bytes()

    out_csv = tmp_path / "stats.csv"
    code, out, _ = run_cli(capsys, "stats", "--records", str(f1),
                           "--n", "4", "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0].startswith("# manifest:")
    assert lines[1] == "J,probability,sigma"
    probs = {int(r.split(",")[0]): float(r.split(",")[1]) for r in lines[2:]}
    assert abs(sum(probs.values()) - 1.0) < 1e-9

    code, _, err = run_cli(capsys, "stats", "--records", str(f1),
                           "--n", "4", "--ell", "5")
    assert code == 2 and "manifest" in err


def test_gumbel_subcommand(tmp_path, capsys):
    path = tmp_path / "r.jsonl"
    run_cli(capsys, "run", "--ell", "2", "--n", "4", "--realizations", "600",
            "--seed", "3", "--primed", "--out", str(path))
    code, out, _ = run_cli(capsys, "gumbel", "--records", str(path),
                           "--n", "4", "--j", "0")
    assert code == 0
    assert "a=" in out and "D=" in out and "nan" not in out


def test_qmatrix_and_venn_and_clusters(tmp_path, capsys):
    path = tmp_path / "r.jsonl"
    run_cli(capsys, "run", "--ell", "2", "--n", "3,6", "--realizations", "120",
            "--seed", "11", "--primed", "--store-vectors", "--vector-js", "0",
            "--out", str(path))
    code, out, _ = run_cli(capsys, "qmatrix", "--records", str(path),
                           "--n", "6", "--j", "0")
    assert code == 0 and "D_gs=" in out

    code, out, _ = run_cli(capsys, "venn", "--records", str(path),
                           "--n-set", "3,6")
    assert code == 0
    body = [l for l in out.splitlines() if "," in l and not l.startswith("#")]
    assert any(l.startswith("3+6,") for l in body)

    out_csv = tmp_path / "cl.csv"
    code, out, _ = run_cli(capsys, "clusters", "--records", str(path),
                           "--n-hi", "6", "--n-lo", "3", "--out", str(out_csv))
    assert code == 0
    header = out_csv.read_text().splitlines()[1]
    assert header.startswith("id,removal_overlap_sq")


def test_quadrant_value(capsys):
    code, out, _ = run_cli(capsys, "dboson", "--mode", "quadrant")
    assert code == 0
    assert out.strip().startswith("0.3805")


def test_dboson_levels_and_ground(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "dboson", "--mode", "levels", "--n", "3",
                           "--v0", "1.0", "--v2", "0.5", "--v4", "-0.5")
    assert code == 0 and "5 levels" in out
    code, out, _ = run_cli(capsys, "dboson", "--mode", "ground", "--n", "6",
                           "--v0", "-3.0", "--v2", "0.0", "--v4", "0.1")
    assert code == 0 and "J=0" in out


def test_dboson_asymptotics_small(capsys):
    code, out, _ = run_cli(capsys, "dboson", "--mode", "asymptotics",
                           "--residue", "0", "--samples", "20000")
    assert code == 0
    assert "P(2)=0.000" in out


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("ell = 2\nn = 3\nrealizations = 40\nseed = 5\nprimed = true\n")
    f1 = tmp_path / "a.jsonl"
    code, out, _ = run_cli(capsys, "run", "--config", str(cfg),
                           "--realizations", "25", "--out", str(f1))
    assert code == 0
    assert "wrote 25 records" in out
    manifest = json.loads(f1.read_text().splitlines()[0])["manifest"]
    assert manifest["ell"] == 2 and manifest["primed"] is True
    assert manifest["realizations"] == 25  # flag overrides config file


def test_atlas_subcommand(tmp_path, capsys):
    path = tmp_path / "r.jsonl"
    run_cli(capsys, "run", "--ell", "3", "--n", "8", "--realizations", "160",
            "--seed", "17", "--primed", "--store-vectors", "--vector-js", "0",
            "--out", str(path))
    out_csv = tmp_path / "atlas.csv"
    code, out, _ = run_cli(capsys, "atlas", "--records", str(path),
                           "--n", "8", "--j", "0", "--points", "24",
                           "--out", str(out_csv))
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[1] == "label,theta,overlap1,overlap2,overlap3"
    assert sum(1 for l in lines if l.startswith("curve,")) == 24
    assert sum(1 for l in lines if l.startswith("quadrupole,")) == 1
