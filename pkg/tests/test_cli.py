import json

import pytest

from lexrationale.cli import main

SMALL_GEN = ["--doc-length-min", "120", "--doc-length-max", "220", "--background-vocab", "600", "--topic-vocab", "60"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small corpus pair plus all three trained models, built through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    with pytest.MonkeyPatch.context() as mp:
        mp.chdir(d)
        assert run("gen", "--out", "train.jsonl", "--n-resp", 30, "--n-nonresp", 60, "--seed", 1,
                   "--id-prefix", "tr", *SMALL_GEN) == 0
        assert run("gen", "--out", "test.jsonl", "--truth-out", "truth.jsonl", "--n-resp", 30, "--n-nonresp", 60,
                   "--seed", 2, "--id-prefix", "te", *SMALL_GEN) == 0
        assert run("train-doc", "--train", "train.jsonl", "--model-out", "doc.json") == 0
        assert run("train-snippet", "--train", "train.jsonl", "--doc-model", "doc.json", "--model-out", "snip.json",
                   "--audit", "audit.jsonl") == 0
        assert run("train-iterative", "--train", "train.jsonl", "--doc-model", "doc.json", "--model-out", "iter.json",
                   "--start-snippet-size", 200) == 0
    return d


def test_train_then_evaluate_writes_all_reports(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert run("evaluate", "--test", "test.jsonl", "--doc-model", "doc.json", "--model-in", "snip.json",
               "--report-dir", "ev_snip") == 0
    for name in ("score_reduction.csv", "token_stats.csv", "pr_curve.csv", "report.txt", "pr_curve.png", "buckets.png"):
        assert (workdir / "ev_snip" / name).stat().st_size > 0
    assert "SnippetModel (snippet size 50)" in capsys.readouterr().out
    manifest = json.loads((workdir / "ev_snip" / "manifest.json").read_text())
    assert manifest["command"] == "evaluate"
    assert set(manifest["inputs"]) == {"test.jsonl", "doc.json", "snip.json"}
    assert "ev_snip/score_reduction.csv" in manifest["outputs"]
    assert manifest["warnings"] == []


def test_snippet_size_mismatch_is_recorded(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    assert run("evaluate", "--test", "test.jsonl", "--doc-model", "doc.json", "--model-in", "snip.json",
               "--snippet-size", 64, "--report-dir", "ev_64") == 0
    manifest = json.loads((workdir / "ev_64" / "manifest.json").read_text())
    assert any("snippet-size mismatch" in w and "64" in w for w in manifest["warnings"])


def test_training_manifests(workdir):
    m = json.loads((workdir / "iter.json.manifest.json").read_text())
    assert m["config"]["start_snippet_size"] == 200
    assert m["seeds"] == {"seed": 0}
    assert set(m["outputs"]) == {"iter.json"}
    assert m["wall_clock_seconds"] >= 0
    model = json.loads((workdir / "iter.json").read_text())
    assert model["provenance"]["schedule"] == [200, 100, 50]
    assert (workdir / "audit.jsonl").read_text().count("\n") > 0


def test_extract_lists_top_snippets(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    assert run("extract", "--test", "test.jsonl", "--doc-model", "doc.json", "--model-in", "snip.json",
               "--top", 2, "--out", "rationales.jsonl") == 0
    records = [json.loads(line) for line in (workdir / "rationales.jsonl").read_text().splitlines()]
    assert len(records) == 90
    ranked = [r for r in records if r["rationales"]]
    assert ranked and all(len(r["rationales"]) <= 2 for r in records)
    first = ranked[0]["rationales"]
    assert first[0]["rank"] == 1 and first[0]["score"] >= first[-1]["score"]


def test_report_combines_evaluations(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert run("evaluate", "--test", "test.jsonl", "--doc-model", "doc.json", "--report-dir", "ev_doc") == 0
    assert run("evaluate", "--test", "test.jsonl", "--doc-model", "doc.json", "--model-in", "iter.json",
               "--report-dir", "ev_iter") == 0
    capsys.readouterr()
    assert run("report", "ev_doc", "ev_iter", "--report-dir", "combined") == 0
    out = capsys.readouterr().out
    assert "DocumentLevel (snippet size 50)" in out and "IterativeSnippet (snippet size 50)" in out
    assert "Avg Tokens Removed" in out
    rows = (workdir / "combined" / "comparison.csv").read_text().splitlines()
    assert rows[0].startswith("method,") and len(rows) == 3
    assert (workdir / "combined" / "buckets.png").exists()


def test_report_requires_evaluate_output(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    with pytest.raises(SystemExit) as info:
        run("report", "nowhere", "--report-dir", "x")
    assert info.value.code == 2
    assert "EVAL_DIR nowhere" in capsys.readouterr().err


def test_rerun_reproduces_outputs_at_other_thread_count(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert run("evaluate", "--test", "test.jsonl", "--doc-model", "doc.json", "--model-in", "snip.json",
               "--report-dir", "ev_rerun") == 0
    capsys.readouterr()
    assert run("rerun", "ev_rerun/manifest.json", "--threads", 3) == 0
    assert "outputs identical" in capsys.readouterr().out


def test_rerun_detects_changed_output(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert run("train-doc", "--train", "train.jsonl", "--model-out", "doc2.json") == 0
    manifest = workdir / "doc2.json.manifest.json"
    data = json.loads(manifest.read_text())
    data["outputs"]["doc2.json"] = "0" * 64
    manifest.write_text(json.dumps(data))
    assert run("rerun", str(manifest)) == 1
    assert "differs" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv,flag",
    [
        (["train-snippet", "--train", "t", "--model-out", "m", "--snippet-size", "51"], "--snippet-size"),
        (["train-snippet", "--train", "t", "--model-out", "m", "--min-score-th", "1.5"], "--min-score-th"),
        (["train-snippet", "--train", "t", "--model-out", "m", "--max-num", "0"], "--max-num"),
        (["train-doc", "--train", "t", "--model-out", "m", "--features", "x"], "--features"),
        (["evaluate", "--test", "t", "--doc-model", "d", "--report-dir", "r", "--threads", "0"], "--threads"),
        (["train-iterative", "--train", "t", "--model-out", "m", "--start-snippet-size", "40"], "--start-snippet-size"),
        (["gen", "--out", "o", "--doc-length-min", "900"], "--doc-length-min"),
        (["train-doc", "--train", "t", "--model-out", "m", "--bogus"], "--bogus"),
    ],
)
def test_config_errors_name_the_flag(argv, flag, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "t").write_text("")
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    assert flag in capsys.readouterr().err


def test_unknown_subcommand_fails(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_runtime_errors_exit_nonzero_without_manifest(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["train-doc", "--train", "missing.jsonl", "--model-out", "m.json"]) == 1
    assert "not found" in capsys.readouterr().err
    assert not (tmp_path / "m.json.manifest.json").exists()


def test_doc_model_flag_checks_model_kind(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    with pytest.raises(SystemExit):
        main(["evaluate", "--test", "test.jsonl", "--doc-model", "snip.json", "--report-dir", "bad"])
    assert "--doc-model" in capsys.readouterr().err


def test_rerun_refuses_changed_input(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert run("train-doc", "--train", "train.jsonl", "--model-out", "doc3.json") == 0
    manifest = workdir / "doc3.json.manifest.json"
    data = json.loads(manifest.read_text())
    data["inputs"]["train.jsonl"] = "0" * 64
    manifest.write_text(json.dumps(data))
    assert run("rerun", str(manifest)) == 1
    assert "input differs" in capsys.readouterr().err
