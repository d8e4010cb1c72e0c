import json

import pytest

from tifeed import __version__
from tifeed.cli import build_parser, execute
from tifeed.harness import ClassifierConfig, FeatureConfig
from tifeed.ingest import write_corpus
from tifeed.labeler import write_labels_csv
from tifeed.synthetic import make_corpus


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = make_corpus(330, seed=4, planted_range=(3, 6))
    write_corpus(corpus.events, root / "corpus")
    write_labels_csv({e.event_id: e.label for e in corpus.events}, root / "labels.csv")
    manual = {e.event_id: e.label for e in corpus.events[:120]}
    write_labels_csv(manual, root / "manual.csv")
    (root / "exp.json").write_text(json.dumps({
        "input": str(root / "corpus"), "labels": str(root / "labels.csv"),
        "features": {"kind": "binary", "top_k": 200},
        "classifier": {"kind": "cart", "max_depth": 4},
    }))
    return root


def run(*argv):
    return execute([str(a) for a in argv])


def test_characterize_outputs(workspace):
    out = workspace / "stats"
    assert run("characterize", "--input", workspace / "corpus", "--out", out) == 0
    for name in ("feed_summary.csv", "overlap.csv", "flow.csv"):
        text = (out / name).read_text()
        assert text.startswith(f"# tifeed {__version__}\n# config_sha256=")


def test_unknown_flag_is_usage_error(capsys):
    assert execute(["eval", "--bogus"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_no_command_is_usage_error():
    assert execute([]) == 2


def test_missing_labels_file(workspace, tmp_path, capsys):
    cfg = json.loads((workspace / "exp.json").read_text())
    cfg["labels"] = str(tmp_path / "nope.csv")
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    assert run("eval", "--config", path, "--out", tmp_path / "r") == 1
    err = capsys.readouterr().err
    assert "IoFailure" in err and "labels file not found" in err


def test_bad_config_json(tmp_path, capsys):
    path = tmp_path / "exp.json"
    path.write_text("{not json")
    assert run("eval", "--config", path) == 1
    assert "ConfigError" in capsys.readouterr().err


def test_missing_input_directory(tmp_path):
    assert run("characterize", "--input", tmp_path / "absent", "--out", tmp_path / "o") == 1


def test_eval_reports_are_byte_identical(workspace, tmp_path):
    for name in ("a", "b"):
        assert run("eval", "--config", workspace / "exp.json", "--out", tmp_path / name) == 0
    for f in ("report.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    text = (tmp_path / "a" / "report.csv").read_text()
    assert f"tifeed {__version__}" in text and "config_sha256=" in text
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["tool"] == f"tifeed {__version__}"
    assert doc["config"]["classifier"]["kind"] == "cart"


def test_flags_override_config(workspace, tmp_path):
    assert run("eval", "--config", workspace / "exp.json", "--out", tmp_path,
               "--mode", "aggregate", "--classifier", "gnb") == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"]["mode"] == "aggregate"
    assert doc["config"]["classifier"]["kind"] == "gnb"


def test_ablate(workspace, tmp_path):
    assert run("ablate", "--config", workspace / "exp.json", "--out", tmp_path,
               "--category", "network activity") == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["config"]["category"] == "network activity"
    assert run("ablate", "--config", workspace / "exp.json", "--out", tmp_path / "x",
               "--category", "vulnerability") == 1


def test_rules_then_label(workspace, tmp_path):
    rules = tmp_path / "rules.jsonl"
    assert run("mine-rules", "--input", workspace / "corpus", "--labels", workspace / "manual.csv",
               "--out", rules) == 0
    meta = json.loads(rules.read_text().splitlines()[0])["meta"]
    assert meta["tool"] == f"tifeed {__version__}" and meta["config_sha256"]
    out = tmp_path / "labels.csv"
    assert run("label", "--input", workspace / "corpus", "--labels", workspace / "manual.csv",
               "--rules", rules, "--out", out) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 331


def test_prep_and_embedding_commands(workspace, tmp_path):
    docs = tmp_path / "docs.jsonl"
    assert run("prep", "--input", workspace / "corpus", "--out", docs) == 0
    lines = docs.read_text().splitlines()
    assert "meta" in json.loads(lines[0]) and len(lines) == 331

    model = tmp_path / "m.npz"
    common = ["--input", workspace / "corpus", "--dim", 8, "--epochs", 2, "--infer-steps", 10]
    assert run("train-embed", *common, "--out", model) == 0
    vec = tmp_path / "v.jsonl"
    assert run("export-vectors", "--input", workspace / "corpus", "--model", model,
               "--out", vec) == 0
    rows = vec.read_text().splitlines()
    assert json.loads(rows[0])["meta"]["config_sha256"]
    assert len(json.loads(rows[1])["vector"]) == 8
    csv_out = tmp_path / "v.csv"
    assert run("embed", "--input", workspace / "corpus", "--model", model, "--out", csv_out) == 0
    assert csv_out.read_text().startswith(f"# tifeed {__version__}")


def test_train_writes_model_bundle(workspace, tmp_path):
    out = tmp_path / "clf.json"
    assert run("train", "--config", workspace / "exp.json", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["tool"] == f"tifeed {__version__}" and doc["config_sha256"]


def test_help_lists_module_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices["eval"]
    text = sub.format_help()
    assert f"default {FeatureConfig().dim}" in text
    assert f"default {FeatureConfig().epochs}" in text
    assert f"default {ClassifierConfig().rounds}" in text
