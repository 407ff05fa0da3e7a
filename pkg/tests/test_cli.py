import io
import json

import pytest

from canita import traces as tio
from canita.cli import main


def call(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def test_run_writes_one_trace(tmp_path):
    code, out = call(["run", "--synthetic", "d=50,rows=200", "--algo", "canita", "--compressor", "randk:d/4",
                      "--T", "500", "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    (path,) = out.split()
    tr = tio.read_trace(path)
    assert len(tr) == 501
    assert tr.meta["compressor"] == "randk:12" and tr.meta["seed"] == 1


def test_run_is_byte_identical(tmp_path):
    argv = ["run", "--synthetic", "d=10,rows=60,margin=3", "--n", "5", "--compressor", "quant:sqrt", "--T", "80",
            "--seed", "4", "--ref-steps", "500"]
    assert call(argv + ["--out", str(tmp_path / "a.csv")])[0] == 0
    assert call(argv + ["--out", str(tmp_path / "b.csv")])[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run_uses_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CANITA_OUTPUT_DIR", str(tmp_path))
    code, out = call(["run", "--synthetic", "d=4,rows=20", "--n", "2", "--T", "3", "--seed", "1,2",
                      "--algo", "qsgd", "--format", "jsonl", "--ref-steps", "100"])
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["qsgd_randk-d-4_seed1.jsonl", "qsgd_randk-d-4_seed2.jsonl"]


def test_run_with_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dataset = synthetic:d=6,rows=30\nn = 3\nT = 9\nalgo = diana\nref_steps = 100\n")
    code, out = call(["run", "--config", str(cfg), "--T", "4", "--charge-one", "--h0", "grad", "--log-interval", "2",
                      "--out", str(tmp_path / "r.csv")])
    assert code == 0
    tr = tio.read_trace(tmp_path / "r.csv")
    assert [r.t for r in tr.records] == [0, 2, 4]
    assert tr.meta["algo"] == "diana"


def test_validate_schedule(tmp_path):
    code, out = call(["validate-schedule", "--omega", "10", "--n", "1000", "--L", "1", "--T", "10000"])
    assert code == 0 and "all conditions satisfied" in out
    code, out = call(["validate-schedule", "--omega", "1", "--n", "4", "--L", "2", "--T", "50", "--json"])
    assert code == 0 and json.loads(out)["passed"]


def test_compressor_test_command():
    code, out = call(["compressor-test", "--draws", "5000", "--vectors", "2", "--compressor", "randk:2@5",
                      "--compressor", "natural@8"])
    assert code == 0
    assert out.count("pass") == 2


def test_sweep_and_summarize(tmp_path):
    code, out = call(["sweep", "--synthetic", "d=6,rows=30,margin=3", "--n", "3", "--T", "40", "--seed", "1,2",
                      "--algos", "canita,qsgd", "--compressors", "natural", "--ref-steps", "200", "--out",
                      str(tmp_path), "--thresholds", "0.3,0.1"])
    assert code == 0
    assert out.splitlines()[0].startswith("algo,compressor,threshold")
    assert len(out.splitlines()) == 1 + 2 * 2
    files = sorted(str(p) for p in tmp_path.glob("*_seed*.csv"))
    assert len(files) == 4
    code, again = call(["summarize", *files, "--thresholds", "0.3,0.1"])
    assert code == 0 and again == out
    code, _ = call(["summarize", *files, "--out", str(tmp_path / "s.csv")])
    assert code == 0 and (tmp_path / "s.csv").read_text().startswith("algo,")


@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["run", "--T", "x"], ["run", "--synthetic", "d=0", "--T", "1"],
    ["run", "--synthetic", "q=1"], ["run", "--compressor", "topk:2", "--T", "1"],
    ["run", "--seed", "1,2", "--out", "one.csv", "--T", "1"], ["validate-schedule", "--omega", "1"],
    ["validate-schedule", "--omega", "1", "--n", "1", "--L", "0"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv, out=io.StringIO()) == 2
    assert "error" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    assert main(["summarize", str(tmp_path / "missing.csv")], out=io.StringIO()) == 1
    assert "failed" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "canita", "validate-schedule", "--omega", "0", "--n", "1",
                           "--L", "1", "--T", "100"], capture_output=True, text=True)
    assert proc.returncode == 0 and "all conditions satisfied" in proc.stdout
