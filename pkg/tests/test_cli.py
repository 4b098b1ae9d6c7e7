import csv
import json
import subprocess
import sys

import pytest

from udocrp.cli import main, parse_overrides
from udocrp.core import MarkedPath
from udocrp.experiments import ConfigError

SMALL = ["--experiment", "zeta-laplace", "--alpha-grid", "1", "--samples", "20000", "--chunk", "5000"]


def _load(out):
    doc = json.loads((out / "report.json").read_text())
    meta = doc.pop("metadata")
    return doc, meta


def test_parse_overrides():
    assert parse_overrides(["--a", "1", "--b=0.5,1", "--flag", "--c-d", "x"]) == {
        "a": 1, "b": "0.5,1", "flag": True, "c_d": "x"}
    with pytest.raises(ConfigError):
        parse_overrides(["stray"])


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "r1"
    assert main(["run", *SMALL, "--out", str(out)]) == 0
    doc, meta = _load(out)
    assert doc["passed"] is True
    assert set(meta) >= {"timestamp", "build", "command", "python", "numpy"}
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert rows and all(r["experiment"] == "zeta-laplace" for r in rows)
    assert any(p.name.endswith(".csv") for p in (out / "plotdata").iterdir())
    text = capsys.readouterr().out
    assert "PASS zeta-laplace" in text and text.strip().splitlines()[-1].startswith("PASS")


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", *SMALL, "--out", str(a), "--quiet"]) == 0
    assert main(["run", *SMALL, "--out", str(b), "--quiet", "--workers", "2"]) == 0
    assert _load(a)[0] == _load(b)[0]
    assert (a / "summary.csv").read_text() == (b / "summary.csv").read_text()


def test_config_file_and_seed(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "zeta-laplace", "alpha_grid": "1", "samples": 20000,
                               "chunk": 5000}))
    out = tmp_path / "c"
    assert main(["run", "--config", str(cfg), "--seed", "9", "--out", str(out), "--quiet"]) == 0
    doc, _ = _load(out)
    assert doc["results"][0]["parameters"]["seed"] == 9


def test_failing_run_exit_code(tmp_path):
    out = tmp_path / "f"
    code = main(["run", "--experiment", "stationarity", "--n-grid", "3", "--samples", "20000",
                 "--gamma", "0.9999", "--out", str(out), "--quiet"])
    assert code == 1
    assert _load(out)[0]["passed"] is False


@pytest.mark.parametrize("argv", [
    ["run", "--experiment", "nope"],
    ["run", "--experiment", "zeta-laplace", "--bogus", "1"],
    ["run", "--experiment", "zeta-laplace", "--alpha-grid", "2"],
    ["run", "--criterion", "12"],
    ["run"],
    ["dump", "ocrp", "--alpha", "1.5"],
])
def test_config_errors(argv, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)] if argv[0] == "run" else argv) == 2
    assert "error:" in capsys.readouterr().err


def test_dump_jccp(tmp_path):
    out = tmp_path / "p.jsonl"
    assert main(["dump", "jccp", "--alpha", "0.5", "--n0", "2", "--level-cap", "1", "--seed", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["kind"] == "marked_path"
    p = MarkedPath.loads(out.read_text())
    assert p.jumps[0].mark.initial == 2


@pytest.mark.parametrize("what", ["skewer", "ocrp"])
def test_dump_trajectories(what, capsys):
    assert main(["dump", what, "--alpha", "0.5", "--theta", "0.7", "--start", "1,2",
                 "--level-max", "1", "--seed", "4"]) == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert recs[0] == {"level": 0.0, "composition": [1, 2], "mass": 3}
    levels = [r["level"] for r in recs]
    assert levels == sorted(levels) and levels[-1] <= 1.0


def test_dump_is_seeded(capsys):
    main(["dump", "ocrp", "--seed", "5"])
    a = capsys.readouterr().out
    main(["dump", "ocrp", "--seed", "5"])
    assert capsys.readouterr().out == a


def test_list(capsys):
    assert main(["list-experiments", "-v"]) == 0
    text = capsys.readouterr().out
    assert "zeta-laplace" in text and "--seed" in text and "acceptance criteria" in text


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "udocrp.cli", "list-experiments"], capture_output=True, text=True)
    assert r.returncode == 0 and "levy-tail" in r.stdout
