"""
How much English helps Persian
==============================

Train a fresh model per English percentage, always on the same slice of
Persian, and score each on Persian test data. The same loop is exposed as
``srl sweep``.
"""

from xsrl.corpus import build_inventory
from xsrl.embedder import EmbedderSpec
from xsrl.evaluator import render_report, run_sweep
from xsrl.fixtures import synthetic_corpus
from xsrl.model import ModelConfig, SrlModel
from xsrl.trainer import TrainConfig, evaluate, train

en = synthetic_corpus("en", 60, seed=1)
fa_train = synthetic_corpus("fa", 40, seed=2)
fa_test = synthetic_corpus("fa", 20, seed=3)


def runner(english_fraction, seed):
    corpora = {"fa": fa_train}
    fractions = {"fa": 0.5}
    if english_fraction > 0:
        corpora = {"en": en, "fa": fa_train}
        fractions["en"] = english_fraction
    model = SrlModel(
        ModelConfig(d_e=16, sent_layers=1, arg_layers=1, hidden=8, d_p=16, d_s=16, d_r=16, seed=seed),
        {lang: build_inventory(c) for lang, c in corpora.items()},
        EmbedderSpec(d=4, K=4, seed=seed),
    )
    model, history = train(TrainConfig(epochs=12, batch_size=8, lr=1e-2, fractions=fractions, seed=seed),
                           corpora, None, model)
    batches = {"en": 0, "fa": 0}
    for ep in history["epochs"]:
        for lang, k in ep["batches"].items():
            batches[lang] += k
    return evaluate(model, fa_test), batches


table = run_sweep(runner, [0, 25, 50, 100])
print(render_report(table))
print([row.batches for row in table.rows])
