"""The twelve acceptance criteria, one test each.

Every test records a single PASS/FAIL line (shown in the terminal summary and
echoed to stdout) before asserting, so the verdict is visible even on failure.
"""

import hashlib
import json
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import logsumexp

from xsrl.cli import GRADCHECK_TOL, dispatch, run_gradcheck
from xsrl.config import RunConfig, build_model
from xsrl.corpus import (
    Corpus,
    CorpusError,
    PredicateFrame,
    Sentence,
    Token,
    build_inventory,
    parse_conll09,
    sample_fraction,
    write_conll09,
)
from xsrl.embedder import EmbedderSpec
from xsrl.evaluator import f1, score
from xsrl.fixtures import synthetic_corpus
from xsrl.model import ModelConfig, SrlModel
from xsrl.numerics import swish
from xsrl.trainer import TrainConfig, predict_corpus, total_loss, train

from conftest import ACCEPTANCE, random_corpus, write_workspace


def verdict(n, title, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}; {time.perf_counter() - started:.3f}s]"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_criterion_01_f1_arithmetic():
    t0 = time.perf_counter()
    a, b = f1(78.53, 62.67), f1(76.41, 75.47)
    elapsed = time.perf_counter() - t0
    ok = abs(a - 69.71) <= 0.01 and abs(b - 75.94) <= 0.01 and elapsed < 1e-3
    verdict(1, "F1 arithmetic", ok, f"{a:.4f}, {b:.4f} in {elapsed * 1e6:.1f}us", t0)


@pytest.mark.slow
def test_criterion_02_gradient_fidelity():
    t0 = time.perf_counter()
    err = run_gradcheck()
    elapsed = time.perf_counter() - t0
    ok = err < GRADCHECK_TOL and elapsed < 30
    verdict(2, "full-model gradient check", ok, f"max rel err {err:.2e}", t0)


@pytest.mark.slow
def test_criterion_03_overfit():
    t0 = time.perf_counter()
    corpora = {lang: synthetic_corpus(lang, 25, seed=7) for lang in ("en", "fa")}
    invs = {lang: build_inventory(c) for lang, c in corpora.items()}
    assert all(len(i.senses) == 4 and len(i.roles) == 6 for i in invs.values())
    cfg = ModelConfig(d_e=32, sent_layers=1, arg_layers=1, hidden=16, d_p=32, d_s=32, d_r=32,
                      precision="standard", seed=13)
    model = SrlModel(cfg, invs, EmbedderSpec(d=8, K=4, seed=13))
    model, _ = train(TrainConfig(epochs=200, batch_size=8, patience=None, seed=13), corpora, None, model)
    acc, role = {}, {}
    for lang, gold in corpora.items():
        pred = predict_corpus(model, gold)
        marks = [(g.fill_pred, p.fill_pred) for gs, ps in zip(gold.sentences, pred.sentences)
                 for g, p in zip(gs.tokens, ps.tokens)]
        acc[lang] = sum(g == p for g, p in marks) / len(marks)
        role[lang] = score(gold, pred).role_f1 / 100
    ok = (min(acc.values()) >= 0.99 and min(role.values()) >= 0.95
          and time.perf_counter() - t0 < 300)
    verdict(3, "overfit 50 sentences in 200 epochs", ok, f"pred acc {acc}, role F1 {role}", t0)


def test_criterion_04_sharing():
    t0 = time.perf_counter()
    invs = {lang: build_inventory(synthetic_corpus(lang, 20, seed=0)) for lang in ("en", "fa")}
    model = SrlModel(ModelConfig(d_e=8, hidden=4, d_p=5, d_s=5, d_r=5), invs, EmbedderSpec(d=4, K=4))
    names = list(model.params)
    per_lang = {lang: [n for n in names if n.split(".")[:2] == ["decoders", lang]] for lang in invs}
    shared = [n for n in names if not n.startswith("decoders.")]
    counts_ok = all(len(v) == 6 for v in per_lang.values())
    shared_ok = not any(lang in n.split(".") for n in shared for lang in invs)
    covered = len(shared) + sum(map(len, per_lang.values())) == len(names)

    h = model.embedder.hidden(synthetic_corpus("en", 1, seed=3).sentences[0])
    outs = [model.forward_hidden(h, lang, [0, 1]) for lang in invs]
    same = all(
        getattr(outs[0], k).tobytes() == getattr(o, k).tobytes() for o in outs[1:] for k in ("t", "p", "s")
    )
    ok = counts_ok and shared_ok and covered and same
    verdict(4, "cross-lingual sharing", ok,
            f"{ {l: len(v) for l, v in per_lang.items()} } language tensors, {len(shared)} shared", t0)


def _ce(rows, targets):
    rows = np.asarray(rows, dtype=np.float64).reshape(len(targets), -1)
    if not len(targets):
        return 0.0
    return float(np.mean(logsumexp(rows, axis=1) - rows[np.arange(len(targets)), targets]))


def _six_ces(items, invs):
    total = 0.0
    for lang, inv in invs.items():
        mine = [(s, o) for s, o in items if s.language == lang]
        if not mine:
            continue
        pr = np.concatenate([o.predicate_logits for _, o in mine])
        pt = [int(t.fill_pred) for s, _ in mine for t in s.tokens]
        sr = [o.sense_logits[k] for s, o in mine for k in range(len(s.frames))]
        st = [inv.senses.index(f.sense) for s, _ in mine for f in s.frames]
        rr, rt = [], []
        for s, o in mine:
            for k, f in enumerate(s.frames):
                for i in range(1, len(s) + 1):
                    rr.append(o.role_logits[k, i - 1])
                    rt.append(inv.roles.index(f.roles.get(i, "NULL")))
        total += _ce(pr, pt) + _ce(sr, st) + _ce(rr, rt)
    return total


def test_criterion_05_objective_fidelity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    pool = {lang: synthetic_corpus(lang, 40, seed=11).sentences for lang in ("en", "fa")}
    invs = {lang: build_inventory(Corpus(lang, s)) for lang, s in pool.items()}
    worst = 0.0
    for trial in range(100):
        model = SrlModel(
            ModelConfig(d_e=6, sent_layers=1, arg_layers=1, hidden=3, d_p=4, d_s=4, d_r=4,
                        precision="high", seed=trial),
            invs, EmbedderSpec(d=3, K=4, seed=trial),
        )
        batch = [pool[lang][i] for lang in pool
                 for i in rng.choice(len(pool[lang]), int(rng.integers(1, 4)), replace=False)]
        items = [(s, model.forward_training(s)) for s in batch]
        loss, _, _ = total_loss(items, invs)
        worst = max(worst, abs(float(loss) - _six_ces(items, invs)))
    verdict(5, "objective equals sum of six cross-entropies", worst <= 1e-6, f"max |diff| {worst:.2e}", t0)


def test_criterion_06_dimensions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    invs = {"en": build_inventory(synthetic_corpus("en", 10, seed=0))}
    sentence = synthetic_corpus("en", 1, seed=2).sentences[0]
    bad = []
    for _ in range(100):
        d_e, h, k1, k2 = (int(x) for x in rng.integers([1, 1, 0, 0], [12, 7, 4, 4]))
        cfg = ModelConfig(d_e=d_e, hidden=h, sent_layers=k1, arg_layers=k2, d_p=2, d_s=2, d_r=2,
                          seed=int(rng.integers(1000)))
        out = SrlModel(cfg, invs, EmbedderSpec(d=2, K=4)).forward(sentence)
        wt, wa = d_e + 2 * h * k1, 2 * (d_e + 2 * h * k1) + 2 * h * k2
        if (out.t.shape[-1], out.a.shape[-1], cfg.t_width, cfg.a_width) != (wt, wa, wt, wa):
            bad.append((d_e, h, k1, k2))
    verdict(6, "width bookkeeping over 100 configs", not bad, f"{len(bad)} mismatches", t0)


def _brute(gold, pred):
    def items(c):
        out = []
        for k, s in enumerate(c.sentences):
            for f in s.frames:
                out.append(("sense", k, f.predicate_index, f.sense))
                out.extend(("role", k, f.predicate_index, a, r) for a, r in f.roles.items())
        return out
    g, p = items(gold), items(pred)
    m = sum(x in g for x in p)
    P = 100 * m / len(p) if p else 0.0
    R = 100 * m / len(g) if g else 0.0
    return round(P, 2), round(R, 2), round(2 * P * R / (P + R) if P + R else 0.0, 2)


def _relabel(rng, s):
    frames = []
    for f in s.frames:
        if rng.random() < 0.3:
            continue
        roles = {a: (r if rng.random() < 0.7 else "A9") for a, r in f.roles.items() if rng.random() < 0.85}
        if rng.random() < 0.3:
            roles[int(rng.integers(1, len(s) + 1))] = "A1"
        sense = f.sense if rng.random() < 0.8 else "other.02"
        frames.append(PredicateFrame(f.predicate_index, sense, roles))
    return Sentence(s.id, s.language, s.tokens, tuple(frames))


def test_criterion_07_scorer_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(500):
        gold = random_corpus(rng, "en", n_sent=int(rng.integers(1, 5)))
        if rng.random() < 0.5:
            pred = Corpus("en", tuple(_relabel(rng, s) for s in gold.sentences))
        else:
            other = random_corpus(rng, "en", n_sent=len(gold))
            pred = Corpus("en", tuple(
                Sentence(g.id, "en", g.tokens,
                         tuple(f for f in o.frames if f.predicate_index <= len(g)))
                for g, o in zip(gold.sentences, other.sentences)
            ))
        r = score(gold, pred)
        bad += (r.precision, r.recall, r.f1) != _brute(gold, pred)
    verdict(7, "scorer equals brute force on 500 pairs", bad == 0, f"{bad} disagreements", t0)


ROW = "{i}\tw{i}\tw\tw\tN\tN\t_\t_\t0\t0\tROOT\tROOT\t{fill}\t{pred}"

CORRUPT = {
    "short row": ("1\tdog\tdog\tdog\tN\tN\n", 1, "at least 14 columns"),
    "ragged block": (ROW.format(i=1, fill="_", pred="_") + "\n"
                     + ROW.format(i=2, fill="_", pred="_") + "\t_\n", 2, "column count"),
    "dangling APRED": (ROW.format(i=1, fill="_", pred="_") + "\tA0\n", 1, "1 APRED columns but 0 predicates"),
    "missing APRED": ("\n" + ROW.format(i=1, fill="Y", pred="run.01") + "\n", 2, "0 APRED columns but 1"),
    "bad ID": (ROW.format(i=1, fill="_", pred="_") + "\n" + ROW.format(i=3, fill="_", pred="_") + "\n",
               2, "out of sequence"),
}


def test_criterion_08_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(100):
        c = random_corpus(rng, "en")
        mismatches += parse_conll09(write_conll09(c), "en") != c
    wrong = []
    for name, (text, line, msg) in CORRUPT.items():
        try:
            parse_conll09(text, "en")
            wrong.append(f"{name}: accepted")
        except CorpusError as exc:
            if exc.line != line or msg not in str(exc) or f"line {line}" not in str(exc):
                wrong.append(f"{name}: {exc}")
    verdict(8, "corpus round trip and error lines", mismatches == 0 and not wrong,
            f"{mismatches} round-trip mismatches, corrupt fixtures {wrong or 'ok'}", t0)


@pytest.mark.slow
def test_criterion_09_sweep(tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = write_workspace(tmp_path, sizes={"en": (30, 0, 0), "fa": (30, 6, 10)},
                          extra={"train": {"epochs": 2}, "sweep": {"target_fraction": 0.5}})
    code = dispatch(["sweep", "--config", str(cfg), "--fractions", ",".join(str(f) for f in range(0, 101, 10))])
    lines = capsys.readouterr().out.splitlines()
    table = json.loads((tmp_path / "out" / "sweep.json").read_text()) if code == 0 else {"rows": []}
    en_batches = [r["batches"].get("en", 0) for r in table["rows"]]
    ok = (
        code == 0
        and lines[0].split("\t") == ["english_percentage", "F1", "Precision", "Recall"]
        and len(lines) == 12
        and [int(l.split("\t")[0]) for l in lines[1:]] == list(range(0, 101, 10))
        and en_batches[0] == 0
        and all(b > 0 for b in en_batches[1:])
        and time.perf_counter() - t0 < 1200
    )
    verdict(9, "sweep protocol", ok, f"{len(lines) - 1} rows, English batches {en_batches}", t0)


@pytest.mark.slow
def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = write_workspace(tmp_path, extra={"train": {"epochs": 3}})
    digests = []
    for run in ("a", "b"):
        assert dispatch(["train", "--config", str(cfg), "--output-dir", str(tmp_path / run)]) == 0
        digests.append(hashlib.sha256((tmp_path / run / "model.ckpt").read_bytes()).hexdigest())

    (tmp_path / "frozen").mkdir()
    frozen = write_workspace(tmp_path / "frozen", extra={
        "embedder": {"kind": "trainable-lookup", "d": 4},
        "train": {"epochs": 3, "freeze": ["embedder."]},
    })
    rc = RunConfig.load(frozen)
    corpora = rc.split("train")
    model = build_model(rc, corpora)
    before = {n: p.value.tobytes() for n, p in model.params.items()}
    model, _ = train(rc.train_config(), corpora, rc.split("dev") or None, model)
    emb = [n for n in before if n.startswith("embedder.")]
    frozen_ok = bool(emb) and all(before[n] == model.params[n].value.tobytes() for n in emb)
    moved = any(before[n] != model.params[n].value.tobytes() for n in before if n not in emb)
    ok = digests[0] == digests[1] and frozen_ok and moved
    verdict(10, "determinism and frozen embedder", ok,
            f"checkpoints {'identical' if digests[0] == digests[1] else 'differ'}, "
            f"embedder tensors {'unchanged' if frozen_ok else 'changed'}", t0)


def test_criterion_11_swish():
    t0 = time.perf_counter()
    x = np.array([0.0, 1.0, 20.0])
    y = swish(x)
    ok = y[0] == 0.0 and abs(y[1] - 0.7310586) <= 1e-6 and abs(y[2] - 20) < 1e-7
    verdict(11, "swish values", ok, f"{y.tolist()}", t0)


SAMPLE_SNIPPET = (
    "from xsrl.fixtures import synthetic_corpus;"
    "from xsrl.corpus import sample_fraction;import hashlib;"
    "s=sample_fraction(synthetic_corpus('en',23984,seed=1),0.10,seed=13);"
    "print(len(s), hashlib.sha256('|'.join(x.id for x in s.sentences).encode()).hexdigest())"
)


def test_criterion_12_sampling():
    t0 = time.perf_counter()
    corpus = synthetic_corpus("en", 23984, seed=1)
    a = sample_fraction(corpus, 0.10, seed=13)
    b = sample_fraction(corpus, 0.10, seed=13)
    ids = "|".join(s.id for s in a.sentences)
    here = f"{len(a)} {hashlib.sha256(ids.encode()).hexdigest()}"
    there = subprocess.run([sys.executable, "-c", SAMPLE_SNIPPET], capture_output=True, text=True,
                           check=True).stdout.strip()
    ok = len(a) == 2398 and a == b and here == there
    verdict(12, "sampling 10% of 23984", ok, f"{len(a)} sentences, fresh-process match {here == there}", t0)
