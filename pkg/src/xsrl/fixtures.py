"""Synthetic bilingual SRL corpora from a tiny deterministic grammar.

English is SVO with prepositional modifiers, the Persian-like language is
SOV with postpositional object marking. Each language has four predicate
senses and five argument roles (A0, A1, A2, AM-LOC, AM-TMP).
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, PredicateFrame, Sentence, Token

LEXICON = {
    "en": {
        "verbs": {"eat.01": "eats", "see.01": "sees", "give.01": "gives", "run.01": "runs"},
        "agents": ["dog", "cat", "man", "woman", "boy"],
        "things": ["bread", "apple", "book", "ball"],
        "places": ["park", "house", "city"],
        "times": ["yesterday", "today"],
    },
    "fa": {
        "verbs": {"khordan.01": "khord", "didan.01": "did", "dadan.01": "dad", "raftan.01": "raft"},
        "agents": ["sag", "gorbe", "mard", "zan", "pesar"],
        "things": ["nan", "sib", "ketab", "tup"],
        "places": ["park", "khane", "shahr"],
        "times": ["diruz", "emruz"],
    },
}

# which roles each sense licenses besides A0
FRAMES = {0: ("A1",), 1: ("A1",), 2: ("A1", "A2"), 3: ()}


def _clause(lang, rng):
    """One clause as (form, lemma, pos, role-or-sense, is_predicate) tuples."""
    lex = LEXICON[lang]
    senses = list(lex["verbs"])
    k = int(rng.integers(len(senses)))
    sense = senses[k]
    verb = lex["verbs"][sense]
    agent = str(rng.choice(lex["agents"]))
    words = {"A0": agent}
    if "A1" in FRAMES[k]:
        words["A1"] = str(rng.choice(lex["things"]))
    if "A2" in FRAMES[k]:
        words["A2"] = str(rng.choice([a for a in lex["agents"] if a != agent]))
    if rng.random() < 0.5:
        words["AM-LOC"] = str(rng.choice(lex["places"]))
    if rng.random() < 0.4:
        words["AM-TMP"] = str(rng.choice(lex["times"]))

    def w(role):
        return (words[role], words[role], "N", role, False)

    v = (verb, sense.split(".")[0], "V", sense, True)
    out = []
    if lang == "en":
        out += [("the", "the", "D", None, False), w("A0"), v]
        if "A1" in words:
            out.append(w("A1"))
        if "A2" in words:
            out += [("to", "to", "P", None, False), w("A2")]
        if "AM-LOC" in words:
            out += [("in", "in", "P", None, False), w("AM-LOC")]
        if "AM-TMP" in words:
            out.append(w("AM-TMP"))
    else:
        out.append(w("A0"))
        if "AM-TMP" in words:
            out.append(w("AM-TMP"))
        if "AM-LOC" in words:
            out += [("dar", "dar", "P", None, False), w("AM-LOC")]
        if "A1" in words:
            out += [w("A1"), ("ra", "ra", "P", None, False)]
        if "A2" in words:
            out += [("be", "be", "P", None, False), w("A2")]
        out.append(v)
    return out


def _sentence(lang, sid, rng, two_clause_rate):
    clauses = [_clause(lang, rng)]
    if rng.random() < two_clause_rate:
        conj = "and" if lang == "en" else "va"
        clauses.append([(conj, conj, "C", None, False)])
        clauses.append(_clause(lang, rng))
    tokens, frames = [], []
    pos = 1
    spans = []
    for cl in clauses:
        spans.append((pos, cl))
        pos += len(cl)
    for start, cl in spans:
        for off, (form, lemma, tag, _, is_pred) in enumerate(cl):
            sense = cl[off][3] if is_pred else None
            tokens.append(Token(start + off, form, lemma, tag, is_pred, sense))
    for start, cl in spans:
        preds = [off for off, x in enumerate(cl) if x[4]]
        if not preds:
            continue
        p = start + preds[0]
        roles = {start + off: x[3] for off, x in enumerate(cl) if x[3] is not None and not x[4]}
        frames.append(PredicateFrame(p, cl[preds[0]][3], roles))
    tokens.append(Token(len(tokens) + 1, ".", ".", "PU"))
    return Sentence(sid, lang, tuple(tokens), tuple(frames))


def synthetic_corpus(language: str, n: int, seed: int = 0, two_clause_rate: float = 0.25) -> Corpus:
    """n generated sentences, deterministic in (language, n, seed)."""
    rng = np.random.default_rng([seed, sum(map(ord, language))])
    return Corpus(
        language,
        tuple(_sentence(language, f"{language}-{i + 1}", rng, two_clause_rate) for i in range(n)),
    )


def tiny_sentence(language: str, sid: str = "t1") -> Sentence:
    """Three tokens, predicate in the middle with an A0 before and A1 after
    (English) or A0, A1, verb (Persian-like)."""
    if language == "en":
        toks = (
            Token(1, "dog", "dog", "N"),
            Token(2, "eats", "eat", "V", True, "eat.01"),
            Token(3, "bread", "bread", "N"),
        )
        frame = PredicateFrame(2, "eat.01", {1: "A0", 3: "A1"})
    else:
        toks = (
            Token(1, "sag", "sag", "N"),
            Token(2, "nan", "nan", "N"),
            Token(3, "khord", "khordan", "V", True, "khordan.01"),
        )
        frame = PredicateFrame(3, "khordan.01", {1: "A0", 2: "A1"})
    return Sentence(sid, language, toks, (frame,))
