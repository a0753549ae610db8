"""
Contextual embeddings and the on-disk cache
===========================================

The toy provider stands in for a multilingual language model. Its top four
layers are concatenated per token; a cache file can replace it entirely.
"""

import tempfile
from pathlib import Path

import numpy as np

from xsrl.embedder import EmbedderSpec, cache_key, concat_top_layers, load_cache, toy_embed, write_cache
from xsrl.corpus import build_inventory
from xsrl.fixtures import synthetic_corpus, tiny_sentence
from xsrl.model import ModelConfig, SrlModel

sentence = tiny_sentence("en")
spec = EmbedderSpec(d=8, K=6, seed=1)

stack = toy_embed(sentence, spec)
h = concat_top_layers(stack)
print("layers:", stack.K, "tokens x width:", h.shape)

# the first block of h is the topmost layer
assert np.array_equal(h[:, :8], stack.layers[-1])

# store h for this sentence and train from the file instead
path = Path(tempfile.mkdtemp()) / "en.srle"
write_cache({cache_key(sentence): h}, path)
print("cached keys:", list(load_cache(path)))

cached = EmbedderSpec(kind="precomputed-cache", d=8, cache_path=str(path))
inventory = build_inventory(synthetic_corpus("en", 10))
model = SrlModel(ModelConfig(d_e=16, hidden=8, d_p=8, d_s=8, d_r=8), {"en": inventory}, cached)
out = model.forward(sentence)
print("predicate logits:\n", out.predicate_logits)
