"""End-to-end CLI: simulate -> calibrate -> verify -> bench."""

import json

import pytest

from bivemos.cli import main


@pytest.fixture(scope="module")
def spec_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("spec") / "gen.json"
    path.write_text(
        json.dumps(
            {
                "n_stations": 3,
                "n_days": 46,
                "group_sizes": [1, 4],
                "dispersion": 0.7,
            }
        )
    )
    return path


@pytest.fixture(scope="module")
def data_file(spec_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "synthetic.csv"
    rc = main(["simulate", "--spec", str(spec_file), "--seed", "5", "--out", str(out)])
    assert rc == 0
    return out


def test_simulate_writes_csv(data_file):
    header = data_file.read_text().splitlines()[0]
    assert header.startswith("date,station,obs_wind,obs_temp,m1_wind")


def test_simulate_deterministic(spec_file, tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["simulate", "--spec", str(spec_file), "--seed", "7", "--out", str(a)]) == 0
    assert main(["simulate", "--spec", str(spec_file), "--seed", "7", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_calibrate_verify_roundtrip(data_file, tmp_path, capsys):
    models = tmp_path / "models"
    rc = main(
        [
            "calibrate",
            "--data", str(data_file),
            "--method", "independent-emos",
            "--train-days", "40",
            "--groups", "1,4",
            "--out", str(models),
        ]
    )
    assert rc == 0
    assert (models / "independent-emos.models.json").exists()

    report = tmp_path / "report.tsv"
    rc = main(
        [
            "verify",
            "--models", str(models),
            "--data", str(data_file),
            "--es-samples", "200",
            "--rank-samples", "8",
            "--out", str(report),
        ]
    )
    assert rc == 0
    lines = report.read_text().splitlines()
    assert lines[0].startswith("method\tes\tdelta\tds")
    methods = {ln.split("\t")[0] for ln in lines[1:]}
    assert methods == {"independent-emos", "raw"}
    assert (tmp_path / "report.ranks.raw.tsv").exists()
    assert (tmp_path / "report.ranks.independent-emos.tsv").exists()


def test_bench_runs_both_optimizers(data_file, capsys):
    rc = main(
        [
            "bench",
            "--data", str(data_file),
            "--methods", "independent-emos",
            "--optimizer", "simplex,quasi-newton",
            "--train-days", "40",
            "--groups", "1,4",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln.startswith("independent-emos")]
    assert len(lines) == 2
    assert {ln.split("\t")[1] for ln in lines} == {"simplex", "quasi-newton"}


def test_copula_without_history_exits_nonzero(data_file, tmp_path, capsys):
    rc = main(
        [
            "calibrate",
            "--data", str(data_file),
            "--method", "copula",
            "--groups", "1,4",
            "--out", str(tmp_path / "m"),
        ]
    )
    assert rc != 0
    assert "correlation-history" in capsys.readouterr().err


def test_bad_group_spec_exits_nonzero(data_file, tmp_path, capsys):
    rc = main(
        [
            "calibrate",
            "--data", str(data_file),
            "--method", "independent-emos",
            "--groups", "2,9",
            "--out", str(tmp_path / "m"),
        ]
    )
    assert rc != 0


def test_unknown_data_file_exits_nonzero(tmp_path):
    rc = main(
        [
            "calibrate",
            "--data", str(tmp_path / "nope.csv"),
            "--method", "independent-emos",
            "--out", str(tmp_path / "m"),
        ]
    )
    assert rc != 0
