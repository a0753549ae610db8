"""
Reading and writing CoNLL-2009 corpora
======================================

Generate a small synthetic Persian-style corpus, write it out, read it back,
and look at the label inventory the model would be built from.
"""

from xsrl.corpus import build_inventory, parse_conll09, sample_fraction, write_conll09
from xsrl.fixtures import synthetic_corpus

corpus = synthetic_corpus("fa", 6, seed=2)
text = write_conll09(corpus)
print(text.split("\n\n")[0])

# the writer and reader are inverses
assert parse_conll09(text, "fa") == corpus

# one frame per predicate; roles are keyed by 1-based token index
first = corpus.sentences[0]
for frame in first.frames:
    print(frame.predicate_index, frame.sense, frame.roles)

# NULL always sits at role index 0
inv = build_inventory(corpus)
print("senses:", inv.senses)
print("roles: ", inv.roles)

# a seeded subsample keeps the original order
half = sample_fraction(corpus, 0.5, seed=13)
print([s.id for s in half.sentences])
