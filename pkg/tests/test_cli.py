import json

import pytest

from xsrl.cli import dispatch
from xsrl.corpus import read_conll09, write_conll09
from xsrl.fixtures import synthetic_corpus

from conftest import write_workspace


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    cfg = write_workspace(root)
    assert dispatch(["train", "--config", str(cfg)]) == 0
    return root


def test_no_subcommand():
    assert dispatch([]) == 1


def test_unknown_subcommand():
    assert dispatch(["frobnicate"]) == 1


def test_bad_option():
    assert dispatch(["validate", "--data"]) == 1


def test_validate(tmp_path, capsys):
    p = tmp_path / "en.conll"
    p.write_text(write_conll09(synthetic_corpus("en", 5)), "utf-8")
    assert dispatch(["validate", "--data", str(p), "--lang", "en"]) == 0
    assert "5 sentences, 0 violations" in capsys.readouterr().err


def test_validate_against_foreign_inventory(tmp_path, capsys):
    p = tmp_path / "en.conll"
    p.write_text(write_conll09(synthetic_corpus("en", 5)), "utf-8")
    inv = tmp_path / "inv.json"
    assert dispatch(["inventory", "--data", str(p), "--lang", "en", "--out", str(inv)]) == 0
    d = json.loads(inv.read_text())
    assert d["roles"][0] == "NULL" and d["seed"] == 13
    d["senses"] = d["senses"][:1]
    inv.write_text(json.dumps(d))
    assert dispatch(["validate", "--data", str(p), "--lang", "en", "--inventory", str(inv)]) == 2
    assert "violations" in capsys.readouterr().err


def test_validate_malformed(tmp_path, capsys):
    p = tmp_path / "bad.conll"
    p.write_text("1\tdog\n\n", "utf-8")
    assert dispatch(["validate", "--data", str(p), "--lang", "en"]) == 2
    assert "line 1" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert dispatch(["validate", "--data", str(tmp_path / "nope"), "--lang", "en"]) == 2


def test_train_outputs(trained):
    out = trained / "out"
    assert {"model.ckpt", "history.json", "effective_config.json"} <= {p.name for p in out.iterdir()}
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["seed"] == 13
    hist = json.loads((out / "history.json").read_text())
    assert len(hist["epochs"]) == 2


def test_eval_tsv_and_json(trained, capsys):
    ck = str(trained / "out" / "model.ckpt")
    test = str(trained / "fa.test.conll")
    assert dispatch(["eval", "--checkpoint", ck, "--data", test, "--lang", "fa", "--seed", "4"]) == 0
    rows = dict(l.split("\t") for l in capsys.readouterr().out.splitlines())
    assert rows["seed"] == "4" and 0 <= float(rows["f1"]) <= 100
    assert dispatch(["eval", "--checkpoint", ck, "--data", test, "--lang", "fa", "--format", "json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["f1"] == float(rows["f1"]) and d["seed"] == 13


def test_predict_then_eval_pred(trained, tmp_path, capsys):
    ck = str(trained / "out" / "model.ckpt")
    test = trained / "en.test.conll"
    out = tmp_path / "pred.conll"
    assert dispatch(["predict", "--checkpoint", ck, "--data", str(test), "--lang", "en", "--out", str(out)]) == 0
    text = out.read_text("utf-8")
    assert text.startswith("# seed = 13\n")
    pred = read_conll09(out, "en")
    gold = read_conll09(test, "en")
    assert [len(s) for s in pred.sentences] == [len(s) for s in gold.sentences]
    assert dispatch(["eval", "--checkpoint", ck, "--data", str(test), "--lang", "en", "--pred", str(out)]) == 0
    capsys.readouterr()


def test_eval_misaligned_pred(trained, tmp_path, capsys):
    ck = str(trained / "out" / "model.ckpt")
    gold = read_conll09(trained / "en.test.conll", "en")
    s = gold.sentences[0].without_frames()
    short = type(s)(s.id, s.language, s.tokens[:-1], ())
    pred = type(gold)("en", (short,) + tuple(gold.sentences[1:]))
    p = tmp_path / "short.conll"
    p.write_text(write_conll09(pred), "utf-8")
    code = dispatch(["eval", "--checkpoint", ck, "--data", str(trained / "en.test.conll"),
                     "--lang", "en", "--pred", str(p)])
    assert code == 2
    assert "tokens" in capsys.readouterr().err


def test_predict_unknown_language(trained):
    ck = str(trained / "out" / "model.ckpt")
    assert dispatch(["predict", "--checkpoint", ck, "--data", str(trained / "en.test.conll"), "--lang", "de"]) == 2


def test_bad_config(tmp_path):
    (tmp_path / "run.json").write_text(json.dumps({"data": {"en": {"train": "x"}}, "bogus": 1}))
    assert dispatch(["train", "--config", str(tmp_path / "run.json")]) == 2


def test_sweep(tmp_path, capsys):
    cfg = write_workspace(tmp_path, sizes={"en": (10, 0, 0), "fa": (20, 4, 6)},
                          extra={"train": {"epochs": 1}, "sweep": {"target_fraction": 0.5}})
    assert dispatch(["sweep", "--config", str(cfg), "--fractions", "0,50,100"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "english_percentage\tF1\tPrecision\tRecall"
    assert [l.split("\t")[0] for l in lines[1:]] == ["0", "50", "100"]
    table = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert [r["batches"]["en"] for r in table["rows"]] == [0, 1, 2]
    assert (tmp_path / "out" / "sweep.tsv").read_text() == "\n".join(lines) + "\n"


def test_sweep_bad_fractions(tmp_path):
    cfg = write_workspace(tmp_path, sizes={"en": (4, 0, 0), "fa": (4, 0, 2)})
    assert dispatch(["sweep", "--config", str(cfg), "--fractions", "a,b"]) == 1


@pytest.mark.slow
def test_gradcheck(capsys):
    assert dispatch(["gradcheck"]) == 0
    msg = capsys.readouterr().out
    assert float(msg.split()[3]) < 1e-4
