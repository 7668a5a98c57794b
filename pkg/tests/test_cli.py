from __future__ import annotations

import json

import pytest

from attribqa.cli import main
from attribqa.dataset import dump_dataset
from attribqa.synthetic import make_corpus, passage_labeled_corpus


@pytest.fixture
def data(tmp_path):
    path = tmp_path / "data.jsonl"
    dump_dataset(make_corpus(8, seed=3), path)
    return path


def test_run_report_round_trip(data, tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["run", "--dataset", str(data), "--mock", "echo", "--fewshot-k", "2",
                 "--workdir", str(tmp_path / "w"), "--out", str(out)])
    assert code == 0
    table = capsys.readouterr().out
    assert table.startswith("| Level | CoT |") and len(table.splitlines()) == 14
    assert main(["report", str(out)]) == 0
    assert capsys.readouterr().out == table
    assert main(["report", str(out), "--format", "csv", "--out", str(tmp_path / "r.csv")]) == 0
    assert (tmp_path / "r.csv").read_text().startswith("level,cot,")


def test_score_offline_and_sidecar(data, tmp_path, capsys):
    wd = str(tmp_path / "w")
    main(["run", "--dataset", str(data), "--mock", "echo", "--fewshot-k", "1", "--levels", "passage",
          "--cot", "none", "--workdir", wd, "--format", "json"])
    live = json.loads(capsys.readouterr().out)
    req = tmp_path / "req.jsonl"
    assert main(["score", "--dataset", str(data), "--workdir", wd, "--sidecar-requests", str(req),
                 "--format", "json"]) == 0
    off = json.loads(capsys.readouterr().out)
    assert off["cells"] == live["cells"]
    ids = [json.loads(ln)["id"] for ln in req.read_text().splitlines()]
    resp = tmp_path / "resp.jsonl"
    resp.write_text("".join(json.dumps({"id": i, "metric": "HEM", "score": 1.0}) + "\n" for i in ids))
    main(["score", "--dataset", str(data), "--workdir", wd, "--external", str(resp), "--format", "json"])
    cell = json.loads(capsys.readouterr().out)["cells"]["passage/none"]
    assert cell["means"]["HEM"] == 1.0


def test_malformed_mock(data, tmp_path, capsys):
    main(["run", "--dataset", str(data), "--mock", "malformed", "--fewshot-k", "1", "--levels", "span",
          "--cot", "none", "--workdir", str(tmp_path / "w"), "--format", "json"])
    cell = json.loads(capsys.readouterr().out)["cells"]["span/none"]
    assert cell["means"]["DOC F1"] == 0.0 and cell["means"]["CSCA"] == 0.0


def test_convert(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text("".join(json.dumps(r) + "\n" for r in passage_labeled_corpus(10, seed=1)) + "not json\n")
    assert main(["convert", str(src), str(tmp_path / "out.jsonl")]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["n_converted"] == 10 and stats["n_errors"] == 1
    assert main(["convert", str(src), str(tmp_path / "out.jsonl"), "--strict"]) == 1


def test_config_file(data, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"dataset = {data}\nmock = echo\nfewshot-k = 1\nlevels = sentence\ncot = none\n"
                   f"workdir = {tmp_path / 'w'}\nformat = csv\n")
    assert main(["--config", str(cfg), "run"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("sentence,none,")


def test_errors_exit_2(tmp_path, capsys):
    assert main(["run", "--dataset", str(tmp_path / "missing.jsonl"), "--mock", "echo"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_credential(data, tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("LLM_API_KEY", raising=False)
    code = main(["run", "--dataset", str(data), "--endpoint", "http://localhost:9", "--model", "m",
                 "--workdir", str(tmp_path / "w")])
    assert code == 2 and "LLM_API_KEY" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "attribqa", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "convert" in res.stdout
