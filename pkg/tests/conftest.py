import numpy as np
import pytest

from xsrl.corpus import Corpus, PredicateFrame, Sentence, Token, build_inventory
from xsrl.embedder import EmbedderSpec
from xsrl.fixtures import synthetic_corpus, tiny_sentence
from xsrl.model import ModelConfig, SrlModel

FORMS = ["dog", "eats", "bread", "Über", "книга", "کتاب", "x-y", "3.5", "«", "a b"]
ROLES = ["A0", "A1", "A2", "AM-TMP", "AM-LOC", "C-A1"]


def random_sentence(rng, language, sid, max_len=7, syntax=True):
    n = int(rng.integers(1, max_len + 1))
    is_pred = rng.random(n) < 0.35
    tokens = []
    for i in range(n):
        form = str(rng.choice(FORMS)).replace(" ", "_")
        lemma = form.lower()
        sx = tuple(
            str(rng.choice(["_", "NN", "2", "SBJ", "Gen=M"])) for _ in range(8)
        ) if syntax else ("_",) * 8
        sense = f"{lemma}.0{int(rng.integers(1, 4))}" if is_pred[i] else None
        tokens.append(Token(i + 1, form, lemma, str(rng.choice(["N", "V", "_"])),
                            bool(is_pred[i]), sense, sx))
    frames = []
    for t in tokens:
        if t.fill_pred:
            roles = {
                j + 1: str(rng.choice(ROLES)) for j in range(n) if rng.random() < 0.3
            }
            frames.append(PredicateFrame(t.index, t.pred_sense, roles))
    return Sentence(sid, language, tuple(tokens), tuple(frames))


def random_corpus(rng, language="en", n_sent=None, **kw):
    n_sent = int(rng.integers(0, 6)) if n_sent is None else n_sent
    ids = [str(i + 1) if rng.random() < 0.5 else f"s{i}" for i in range(n_sent)]
    return Corpus(language, tuple(random_sentence(rng, language, sid, **kw) for sid in ids))


def small_model(languages=("en", "fa"), precision="high", seed=3, embedder=None, **over):
    invs = {l: build_inventory(synthetic_corpus(l, 20, seed=0)) for l in languages}
    kw = dict(d_e=6, sent_layers=1, arg_layers=1, hidden=3, d_p=4, d_s=4, d_r=4,
              precision=precision, seed=seed)
    kw.update(over)
    return SrlModel(ModelConfig(**kw), invs, embedder or EmbedderSpec(d=4, K=5, seed=seed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bilingual():
    return {l: synthetic_corpus(l, 12, seed=5) for l in ("en", "fa")}


@pytest.fixture
def tiny():
    return [tiny_sentence("en"), tiny_sentence("fa")]


SMALL_RUN = {
    "model": {"d_e": 16, "sent_layers": 1, "arg_layers": 1, "hidden": 8, "d_p": 16, "d_s": 16, "d_r": 16},
    "train": {"epochs": 2, "batch_size": 8, "lr": 0.01, "patience": None},
    "embedder": {"kind": "deterministic-toy", "d": 4, "K": 4},
}


def write_workspace(root, sizes=None, extra=None, seed=21):
    """Write synthetic train/dev/test files plus a run.json under ``root``."""
    from xsrl.config import merge
    from xsrl.corpus import write_conll09
    import copy
    import json

    sizes = sizes or {"en": (16, 6, 6), "fa": (16, 6, 6)}
    data = {}
    for k, (lang, counts) in enumerate(sizes.items()):
        data[lang] = {}
        for j, (split, n) in enumerate(zip(("train", "dev", "test"), counts)):
            if not n:
                continue
            name = f"{lang}.{split}.conll"
            (root / name).write_text(write_conll09(synthetic_corpus(lang, n, seed=seed + 10 * k + j)), "utf-8")
            data[lang][split] = name
    raw = merge(copy.deepcopy(SMALL_RUN), {"data": data, "output_dir": "out"})
    if extra:
        raw = merge(raw, extra)
    (root / "run.json").write_text(json.dumps(raw, indent=2), "utf-8")
    return root / "run.json"


# One line per acceptance criterion, printed after the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
