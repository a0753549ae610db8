"""CoNLL-2009 corpora: data model, reader/writer, validation, sampling and
label inventories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

NULL_ROLE = "NULL"
EMPTY = "_"

# PLEMMA PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL, kept opaque.
N_SYNTAX = 8
N_FIXED = 14
BLANK_SYNTAX = (EMPTY,) * N_SYNTAX


class CorpusError(ValueError):
    """Malformed CoNLL-2009 input. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    lemma: str = EMPTY
    pos: str = EMPTY
    fill_pred: bool = False
    pred_sense: str | None = None
    syntax: tuple[str, ...] = BLANK_SYNTAX


@dataclass(frozen=True)
class PredicateFrame:
    predicate_index: int
    sense: str
    roles: dict[int, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Sentence:
    id: str
    language: str
    tokens: tuple[Token, ...]
    frames: tuple[PredicateFrame, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    def without_frames(self) -> "Sentence":
        """Copy with predicate marks and frames stripped (the input to prediction)."""
        tokens = tuple(
            Token(t.index, t.form, t.lemma, t.pos, False, None, t.syntax) for t in self.tokens
        )
        return Sentence(self.id, self.language, tokens, ())


@dataclass(frozen=True)
class Corpus:
    language: str
    sentences: tuple[Sentence, ...] = ()

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class LabelInventory:
    language: str
    senses: tuple[str, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        if not self.roles or self.roles[0] != NULL_ROLE or self.roles.count(NULL_ROLE) != 1:
            raise ValueError("role inventory must hold NULL exactly once, at index 0")

    def sense_id(self, sense: str) -> int:
        return self.senses.index(sense)

    def role_id(self, role: str) -> int:
        return self.roles.index(role)

    def to_dict(self) -> dict:
        return {"language": self.language, "senses": list(self.senses), "roles": list(self.roles)}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelInventory":
        return cls(d["language"], tuple(d["senses"]), tuple(d["roles"]))


def _flush(block, language, ordinal, sent_id):
    """Turn a list of (line_no, cells) rows into a Sentence."""
    first_line = block[0][0]
    width = len(block[0][1])
    for line_no, cells in block:
        if len(cells) != width:
            raise CorpusError(
                f"column count {len(cells)} differs from {width} earlier in the sentence", line_no
            )
    if width < N_FIXED:
        raise CorpusError(f"expected at least {N_FIXED} columns, found {width}", first_line)
    n_apreds = width - N_FIXED
    n_preds = sum(1 for _, c in block if c[12] == "Y")
    if n_apreds != n_preds:
        raise CorpusError(
            f"{n_apreds} APRED columns but {n_preds} predicates (FILLPRED=Y)", first_line
        )

    tokens = []
    pred_rows = []
    for pos, (line_no, c) in enumerate(block, start=1):
        try:
            idx = int(c[0])
        except ValueError:
            raise CorpusError(f"token ID {c[0]!r} is not an integer", line_no) from None
        if idx != pos:
            raise CorpusError(f"token ID {idx} out of sequence (expected {pos})", line_no)
        fill = c[12] == "Y"
        if c[12] not in ("Y", EMPTY):
            raise CorpusError(f"FILLPRED must be 'Y' or '_', found {c[12]!r}", line_no)
        if fill and c[13] == EMPTY:
            raise CorpusError("FILLPRED=Y with PRED='_'", line_no)
        if not fill and c[13] != EMPTY:
            raise CorpusError(f"PRED {c[13]!r} on a token without FILLPRED=Y", line_no)
        tokens.append(
            Token(
                index=idx,
                form=c[1],
                lemma=c[2],
                pos=c[4],
                fill_pred=fill,
                pred_sense=c[13] if fill else None,
                syntax=(c[3], c[5], c[6], c[7], c[8], c[9], c[10], c[11]),
            )
        )
        if fill:
            pred_rows.append(idx)

    frames = []
    for j, p_idx in enumerate(pred_rows):
        roles = {}
        for line_no, c in block:
            label = c[N_FIXED + j]
            if label != EMPTY:
                roles[int(c[0])] = label
        frames.append(PredicateFrame(p_idx, tokens[p_idx - 1].pred_sense, roles))
    return Sentence(sent_id or str(ordinal), language, tuple(tokens), tuple(frames))


def parse_conll09(text: Union[str, bytes], language: str) -> Corpus:
    """Parse a CoNLL-2009 document.

    A ``# sent_id = X`` comment line directly before a block sets the sentence
    id; otherwise ids are the 1-based block ordinal. Bytes input must be valid
    UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            line = bytes(text)[: exc.start].count(b"\n") + 1
            raise CorpusError(f"invalid UTF-8 ({exc.reason})", line) from None

    sentences = []
    block: list[tuple[int, list[str]]] = []
    sent_id = None
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            if block:
                sentences.append(_flush(block, language, len(sentences) + 1, sent_id))
                block, sent_id = [], None
            continue
        if line.startswith("#"):
            if block:
                raise CorpusError("comment line inside a sentence block", line_no)
            if line.startswith("# sent_id = "):
                sent_id = line[len("# sent_id = "):]
            continue
        block.append((line_no, line.split("\t")))
    if block:
        sentences.append(_flush(block, language, len(sentences) + 1, sent_id))
    return Corpus(language, tuple(sentences))


def read_conll09(path: Union[str, Path], language: str) -> Corpus:
    return parse_conll09(Path(path).read_bytes(), language)


def _sentence_rows(s: Sentence) -> list[str]:
    rows = []
    for t in s.tokens:
        sx = t.syntax
        cells = [
            str(t.index), t.form, t.lemma, sx[0], t.pos, sx[1], sx[2], sx[3],
            sx[4], sx[5], sx[6], sx[7],
            "Y" if t.fill_pred else EMPTY,
            t.pred_sense if t.fill_pred else EMPTY,
        ]
        cells.extend(f.roles.get(t.index, EMPTY) for f in s.frames)
        rows.append("\t".join(cells))
    return rows


def write_conll09(corpus: Corpus) -> str:
    out = []
    for ordinal, s in enumerate(corpus.sentences, start=1):
        if s.id != str(ordinal):
            out.append(f"# sent_id = {s.id}\n")
        out.append("\n".join(_sentence_rows(s)) + "\n\n")
    return "".join(out)


def validate_sentence(s: Sentence, inv: LabelInventory) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    out = []
    n = len(s.tokens)
    if n < 1:
        out.append("tokens: sentence is empty")
    if s.language != inv.language:
        out.append(f"language: {s.language!r} does not match inventory {inv.language!r}")
    for pos, t in enumerate(s.tokens, start=1):
        if t.index != pos:
            out.append(f"tokens[{pos - 1}].index: {t.index} (expected {pos})")
        if t.fill_pred != (t.pred_sense is not None):
            out.append(f"tokens[{pos - 1}].pred_sense: present iff fill_pred violated")
    n_preds = sum(t.fill_pred for t in s.tokens)
    if len(s.frames) != n_preds:
        out.append(f"frames: {len(s.frames)} frames for {n_preds} predicate tokens")
    prev = 0
    for j, f in enumerate(s.frames):
        p = f.predicate_index
        if not 1 <= p <= n:
            out.append(f"frames[{j}].predicate_index: {p} out of range 1..{n}")
        else:
            if not s.tokens[p - 1].fill_pred:
                out.append(f"frames[{j}].predicate_index: token {p} is not a predicate")
            elif s.tokens[p - 1].pred_sense != f.sense:
                out.append(f"frames[{j}].sense: {f.sense!r} differs from token {p} PRED")
        if p <= prev:
            out.append(f"frames[{j}].predicate_index: {p} not strictly increasing")
        prev = p
        if f.sense not in inv.senses:
            out.append(f"frames[{j}].sense: unknown label {f.sense!r}")
        for a, role in f.roles.items():
            if not 1 <= a <= n:
                out.append(f"frames[{j}].roles[{a}]: argument index out of range 1..{n}")
            if role == NULL_ROLE or role not in inv.roles:
                out.append(f"frames[{j}].roles[{a}]: unknown label {role!r}")
    return out


def build_inventory(c: Corpus) -> LabelInventory:
    """Labels in first-seen order: sentences in corpus order, frames by
    predicate index, roles by argument index."""
    if not c.sentences:
        raise ValueError(f"cannot build an inventory from an empty {c.language!r} corpus")
    senses: dict[str, None] = {}
    roles: dict[str, None] = {NULL_ROLE: None}
    for s in c.sentences:
        for f in s.frames:
            senses.setdefault(f.sense)
            for a in sorted(f.roles):
                roles.setdefault(f.roles[a])
    return LabelInventory(c.language, tuple(senses), tuple(roles))


def merge_inventories(invs: Iterable[LabelInventory]) -> LabelInventory:
    invs = list(invs)
    senses: dict[str, None] = {}
    roles: dict[str, None] = {}
    for inv in invs:
        senses.update(dict.fromkeys(inv.senses))
        roles.update(dict.fromkeys(inv.roles))
    return LabelInventory(invs[0].language, tuple(senses), tuple(roles))


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def sample_fraction(c: Corpus, fraction, seed: int) -> Corpus:
    """Keep floor(fraction * |c|) sentences chosen by a seeded shuffle, in
    their original order."""
    frac = _as_fraction(fraction)
    if not 0 <= frac <= 1:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    n = len(c.sentences)
    k = math.floor(frac * n)
    if k == n:
        return c
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    keep = np.sort(rng.permutation(n)[:k])
    return Corpus(c.language, tuple(c.sentences[i] for i in keep))


def concat(corpora: Sequence[Corpus]) -> Corpus:
    return Corpus(corpora[0].language, tuple(s for c in corpora for s in c.sentences))
