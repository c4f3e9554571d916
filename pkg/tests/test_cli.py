"""Command-line interface tests."""

import csv
import json

import pytest

from chainsim.cli import main


def write_config(tmp_path, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


SMALL = {
    "nodes": 25, "sim_time_s": 1200.0, "block_interval_s": 60.0,
    "propagation": "fixed", "fixed_delay_mean_s": 0.7, "seed": 4,
}


def test_happy_path_writes_report(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_blocks"] > 0
    assert set(report) >= {
        "bpd_p50_s", "bpd_p90_s", "avg_block_size_mb", "stale_uncle_rate",
        "total_blocks", "canonical_length", "rewards", "runtime_s",
    }
    assert "simulation summary" in (out / "summary.txt").read_text()
    assert report["total_blocks"] == json.loads(capsys.readouterr().out)["total_blocks"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "absent.json")]) == 2
    err = capsys.readouterr().err
    assert "absent.json" in err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"beta": 2.0})
    assert main(["--config", cfg, "--output", str(tmp_path / "o")]) == 2
    assert "beta" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out),
                 "--sim-time", "600", "--seed", "9"]) == 0
    report = json.loads((out / "report.json").read_text())
    half = report["total_blocks"]
    assert 0 < half < 20


def test_sweep_writes_one_report_per_value(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "out"
    code = main(["--config", cfg, "--output", str(out),
                 "--sweep", "fixed_delay_mean=0.5:1.5:0.5"])
    assert code == 0
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert len(summary) == 3
    assert [pt["fixed_delay_mean_s"] for pt in summary] == [0.5, 1.0, 1.5]
    reports = sorted(p.name for p in out.glob("report_*.json"))
    assert len(reports) == 3


def test_invalid_sweep_spec(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    assert main(["--config", cfg, "--output", str(tmp_path / "o"),
                 "--sweep", "degree=banana"]) == 2
    assert "sweep" in capsys.readouterr().err


def test_unknown_sweep_key(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    assert main(["--config", cfg, "--output", str(tmp_path / "o"),
                 "--sweep", "latency=1:2:1"]) == 2


def test_exports(tmp_path):
    doc = dict(SMALL)
    doc.update(propagation="cbr", avg_degree=4.0, beta=1.0, sim_time_s=600.0)
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out),
                 "--export-topology", "--export-blocks", "--export-txs"]) == 0

    edges = (out / "topology.txt").read_text().strip().splitlines()
    assert len(edges) > 0
    u, v, lat = edges[0].split()
    assert int(u) != int(v) and float(lat) > 0

    with open(out / "blocks.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {"blockId", "parentId", "minerId", "canonical"} <= set(rows[0])

    with open(out / "txs.csv") as fh:
        tx_rows = list(csv.DictReader(fh))
    assert tx_rows and float(tx_rows[0]["sizeMB"]) > 0


def test_preset_flag(tmp_path):
    out = tmp_path / "out"
    code = main(["--preset", "ethereum", "--nodes", "40", "--sim-time", "300",
                 "--propagation", "fixed", "--fixed-delay-mean", "0.7",
                 "--seed", "2", "--output", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["total_blocks"] > 0
