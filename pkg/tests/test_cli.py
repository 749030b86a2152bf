import json
import os
import subprocess
import sys

import pytest

from clinner.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(root), "--n-docs", "8", "--sentences", "2", "4", "--seed", "3"]) == 0
    return root


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    out = capsys.readouterr().out
    assert "model container format 1" in out and "BRAT" in out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "clinner", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("clinner ")


def test_tokenize(tmp_path, capsys):
    p = tmp_path / "t.txt"
    p.write_text("Dr. Smith saw him. He left.", encoding="utf-8")
    assert main(["tokenize", "--in", str(p)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t")[:3] == ["Dr", "0", "2"]
    assert "" in lines  # sentence separator


def test_synth_deterministic(tmp_path, synth_dir):
    other = tmp_path / "again"
    main(["synth", "--out", str(other), "--n-docs", "8", "--sentences", "2", "4", "--seed", "3"])
    for name in ("dictionary.tsv", "headings.tsv", "docs/synth-3-0000.txt", "docs/synth-3-0000.ann", "docs/doc_types.tsv"):
        assert (other / name).read_bytes() == (synth_dir / name).read_bytes()


def test_dict_annotate_and_evaluate(tmp_path, synth_dir, capsys):
    out = tmp_path / "pred"
    assert main(["dict-annotate", "--dict", str(synth_dir / "dictionary.tsv"),
                 "--stopwords", str(synth_dir / "stopwords.txt"),
                 "--in", str(synth_dir / "docs"), "--out-brat", str(out)]) == 0
    capsys.readouterr()
    report = tmp_path / "r.json"
    assert main(["evaluate", "--gold", str(synth_dir / "docs"), "--pred", str(out), "--json", str(report)]) == 0
    text = capsys.readouterr().out
    assert "micro" in text
    data = json.loads(report.read_text())
    assert data["exact"]["micro"]["f"] == 1.0
    assert main(["agree", "--a", str(synth_dir / "docs"), "--b", str(out)]) == 0


def test_train_predict_round_trip(tmp_path, synth_dir, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("word_dim=6\nchar_emb_dim=4\nchar_filters=5\nhidden_dim=6\nlr=0.01\n")
    model = tmp_path / "m.npz"
    common = ["--dict", str(synth_dir / "dictionary.tsv"), "--headings", str(synth_dir / "headings.tsv")]
    assert main(["train", "--train", str(synth_dir / "docs"), "--epochs", "2", "--out", str(model),
                 "--config", str(cfg), "--hybrid", "--seed", "1", "--report", str(tmp_path / "rep.json")]
                + common) == 0
    outs = []
    for i in range(2):
        dest = tmp_path / f"pred{i}"
        assert main(["predict", "--model", str(model), "--in", str(synth_dir / "docs"), "--out-brat", str(dest)]
                    + common) == 0
        outs.append(sorted((p.name, p.read_text()) for p in dest.glob("*.ann")))
    assert outs[0] == outs[1] and outs[0]
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["stopped_epoch"] == 2


def test_train_print_defaults(capsys):
    assert main(["train", "--print-defaults"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["word_dim"] == 25 and d["hidden_dim"] == 50 and d["feature_dim"] == 5


def test_config_error_names_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"corpus": "nowhere", "systems": ["pure", "magic"]}))
    assert main(["experiment", "--config", str(cfg)]) == 2
    assert "systems" in capsys.readouterr().err
    cfg.write_text(json.dumps({"corpus": "x", "systems": ["pure"], "tagger": {"hidden_dim": -1}}))
    assert main(["experiment", "--config", str(cfg)]) == 2
    assert "hidden_dim" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["evaluate", "--gold", str(tmp_path / "none"), "--pred", str(tmp_path / "none2")]) == 2


def test_crossval_terminology(tmp_path, synth_dir, capsys):
    out = tmp_path / "cv"
    assert main(["crossval", "--corpus", str(synth_dir / "docs"), "--k", "2", "--seeds", "1",
                 "--systems", "terminology", "--dict", str(synth_dir / "dictionary.tsv"),
                 "--stopwords", str(synth_dir / "stopwords.txt"), "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "terminology" in table and "100.0" in table
    assert (out / "report.json").exists()


def test_search(tmp_path, synth_dir, capsys):
    space = tmp_path / "space.json"
    space.write_text(json.dumps({"hidden_dim": [4, 6]}))
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("word_dim=6\nchar_emb_dim=4\nchar_filters=5\nmax_epochs=2\n")
    out = tmp_path / "search.json"
    assert main(["search", "--corpus", str(synth_dir / "docs"), "--space", str(space), "--budget", "2",
                 "--k", "2", "--config", str(cfg), "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert len(res["trials"]) == 2 and res["best"]["hidden_dim"] in (4, 6)


def test_gradcheck(capsys):
    assert main(["gradcheck"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6 and all(l.startswith("PASS") for l in lines)


def test_cli_without_jit(tmp_path):
    env = dict(os.environ, CLINNER_DISABLE_JIT="1")
    res = subprocess.run([sys.executable, "-m", "clinner", "synth", "--out", str(tmp_path), "--n-docs", "2"],
                         env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
