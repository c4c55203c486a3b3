import csv
import json

import numpy as np
import pytest

from birs.cli import main, parse_config_file, ConfigError
from birs.fileio import write_matrix
from birs.rng import make_rng


@pytest.fixture
def pair(tmp_path):
    r = make_rng(5)
    X = r.substream(0).standard_normal((40, 512))
    Y = r.substream(1).standard_normal((30, 512))
    X[:, 100:180] += 1.5
    write_matrix(X, tmp_path / "x.csv")
    write_matrix(Y, tmp_path / "y.csv")
    return tmp_path


def test_detect_writes_json(pair, capsys):
    out = pair / "r.json"
    rc = main(["detect", "--x", str(pair / "x.csv"), "--y", str(pair / "y.csv"), "--alpha", "0.05",
               "--trunc", "6", "--seed", "1", "--boot", "200", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["regions"] and d["config_echo"]["seed"] == 1
    assert "threads" not in d["config_echo"]
    err = capsys.readouterr().err
    assert "region" in err and "tests" in err


def test_detect_dimension_mismatch(pair, capsys):
    write_matrix(np.zeros((5, 10)), pair / "z.csv")
    rc = main(["detect", "--x", str(pair / "x.csv"), "--y", str(pair / "z.csv")])
    assert rc == 2
    assert "dimension" in capsys.readouterr().err


def test_detect_missing_file(pair):
    assert main(["detect", "--x", str(pair / "nope.csv"), "--y", str(pair / "y.csv")]) == 2


def test_detect_bad_config_values(pair):
    base = ["detect", "--x", str(pair / "x.csv"), "--y", str(pair / "y.csv")]
    assert main(base + ["--alpha", "1.5"]) == 3
    assert main(base + ["--trunc", "9"]) == 3
    with pytest.raises(SystemExit) as exc:
        main(base + ["--bogus"])
    assert exc.value.code == 3


def test_detect_scan_count(pair):
    out = pair / "s.json"
    rc = main(["detect", "--x", str(pair / "x.csv"), "--y", str(pair / "y.csv"), "--method", "scan",
               "--windows", "128,160", "--boot", "100", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["tests_performed"] == (512 - 128 + 1) + (512 - 160 + 1)


def test_detect_with_labels(pair):
    r = make_rng(6)
    M = r.standard_normal((20, 64))
    write_matrix(M, pair / "all.bin")
    (pair / "lab.txt").write_text("\n".join("1" if i % 2 else "0" for i in range(20)) + "\n")
    out = pair / "r.tsv"
    rc = main(["detect", "--x", str(pair / "all.bin"), "--labels", str(pair / "lab.txt"), "--trunc", "3",
               "--boot", "100", "--format", "tsv", "--out", str(out)])
    assert rc == 0
    assert "start_1based" in out.read_text()


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_simulate_null_config(tmp_path):
    cfg = _write(tmp_path / "c.cfg", "# null run\ndesign = weak-equal\ndelta = 0\np = 256\nn = 30\nm = 30\nruns = 5\nboot = 100\n")
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert rows[0]["fwer"] != "" and 0 <= float(rows[0]["fwer"]) <= 1


def test_simulate_decay_grid(tmp_path):
    cfg = _write(tmp_path / "c.cfg", "design=weak-equal\ndelta=1\ndelta0=0.05\ndecay=off,on\np=256\nn=60\nm=50\nruns=3\nboot=100\n")
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["decay"] for r in rows] == ["off", "on"]
    assert list(rows[0]) == ["design", "method", "delta", "decay", "fwer", "fdr", "tpr", "mean_tests", "mean_runtime_ms"]


def test_simulate_unknown_key(tmp_path, capsys):
    cfg = _write(tmp_path / "c.cfg", "design=weak-equal\ndeltaa=1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == 3
    assert "deltaa" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_config_parser(tmp_path):
    cfg = _write(tmp_path / "c.cfg", "a_comment_only = 1 # trailing\n")
    with pytest.raises(ConfigError):
        parse_config_file(cfg)
    cfg = _write(tmp_path / "d.cfg", "\n# x\nbeta = 2  # planted\nmax-rounds=4\n")
    assert parse_config_file(cfg) == {"beta": "2", "max_rounds": "4"}


def test_calibrate_single_run(pair):
    out = pair / "c.json"
    rc = main(["calibrate", "--x", str(pair / "x.csv"), "--y", str(pair / "y.csv"), "--runs", "1",
               "--boot", "100", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert len(d["outcomes"]) == 1 and d["fwer"] in (0.0, 1.0)


def test_calibrate_deterministic(pair):
    outs = []
    for i, t in enumerate(("1", "3")):
        out = pair / f"c{i}.json"
        main(["calibrate", "--x", str(pair / "x.csv"), "--y", str(pair / "y.csv"), "--runs", "4",
              "--boot", "100", "--seed", "9", "--threads", t, "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "b.json"
    cfg = _write(tmp_path / "b.cfg", "p=1024\nn=60\nm=50\n")
    rc = main(["bench", "--config", cfg, "--runs", "2", "--boot", "100", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["scan_window_count"] == sum(1024 - L + 1 for L in d["windows"])
    for r in d["runs"]:
        assert r["birs_tests"] <= r["birs_bound"]
        assert r["scan_tests"] == d["scan_window_count"]
        assert r["birs_seconds"] > 0 and r["scan_seconds"] > 0
    assert "scan" in capsys.readouterr().err


def test_bench_threads_same_regions(tmp_path):
    cfg = _write(tmp_path / "b.cfg", "p=1024\nn=60\nm=50\n")
    docs = []
    for t in ("1", "8"):
        out = tmp_path / f"b{t}.json"
        main(["bench", "--config", cfg, "--runs", "2", "--boot", "100", "--threads", t, "--out", str(out)])
        docs.append(json.loads(out.read_text()))
    for a, b in zip(docs[0]["runs"], docs[1]["runs"]):
        assert a["birs_regions"] == b["birs_regions"] and a["scan_regions"] == b["scan_regions"]
