"""
Training one model on two languages
===================================

English and Persian share every encoder tensor; only the three small
decoder heads per language differ.
"""

from xsrl.corpus import Corpus, build_inventory, write_conll09
from xsrl.embedder import EmbedderSpec
from xsrl.fixtures import synthetic_corpus
from xsrl.model import ModelConfig, SrlModel
from xsrl.trainer import TrainConfig, evaluate, train

train_sets = {lang: synthetic_corpus(lang, 40, seed=3) for lang in ("en", "fa")}
dev_sets = {lang: synthetic_corpus(lang, 15, seed=4) for lang in ("en", "fa")}

model = SrlModel(
    ModelConfig(d_e=32, sent_layers=1, arg_layers=1, hidden=16, d_p=32, d_s=32, d_r=32),
    {lang: build_inventory(c) for lang, c in train_sets.items()},
    EmbedderSpec(d=8, K=4),
)
print([n for n in model.params if n.startswith("decoders.")])

model, history = train(TrainConfig(epochs=15, batch_size=8, lr=1e-2, patience=4), train_sets, dev_sets, model)
for ep in history["epochs"]:
    print(ep["epoch"], round(ep["loss"], 3), ep["dev_f1"])
print("kept epoch", history["best_epoch"])

for lang, corpus in dev_sets.items():
    r = evaluate(model, corpus)
    print(lang, "P", r.precision, "R", r.recall, "F1", r.f1)

# decode a single sentence end to end
guess = model.predict_annotation(dev_sets["fa"].sentences[0].without_frames(), "fa")
print(write_conll09(Corpus("fa", (guess,))))
