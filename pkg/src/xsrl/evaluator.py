"""Labeled semantic-dependency scoring and the English-fraction sweep."""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .corpus import Corpus, Sentence


class AlignmentError(ValueError):
    pass


class SenseItem(NamedTuple):
    predicate: int
    sense: str


class RoleItem(NamedTuple):
    predicate: int
    argument: int
    role: str


def extract_items(sentence: Sentence) -> set:
    """One SenseItem per frame plus one RoleItem per (frame, argument)."""
    items: set = set()
    for f in sentence.frames:
        items.add(SenseItem(f.predicate_index, f.sense))
        for a, role in f.roles.items():
            items.add(RoleItem(f.predicate_index, a, role))
    return items


def f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _prf(matched: int, gold: int, pred: int) -> tuple[float, float, float]:
    p = 100.0 * matched / pred if pred else 0.0
    r = 100.0 * matched / gold if gold else 0.0
    return round(p, 2), round(r, 2), round(f1(p, r), 2)


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    gold: int
    predicted: int
    matched: int
    predicate_f1: float = 0.0
    sense_accuracy: float = 0.0
    role_f1: float = 0.0
    breakdown: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def check_aligned(gold: Corpus, pred: Corpus) -> None:
    if len(gold.sentences) != len(pred.sentences):
        raise AlignmentError(
            f"corpora differ in length: {len(gold.sentences)} gold vs {len(pred.sentences)} predicted"
        )
    for g, p in zip(gold.sentences, pred.sentences):
        if g.id != p.id:
            raise AlignmentError(f"sentence id mismatch: {g.id!r} vs {p.id!r}")
        if len(g.tokens) != len(p.tokens):
            raise AlignmentError(
                f"sentence {g.id!r}: {len(g.tokens)} gold tokens vs {len(p.tokens)} predicted"
            )


def score(gold: Corpus, pred: Corpus) -> MetricsReport:
    """Micro-averaged labeled P/R/F1 (percent) over sense and role items."""
    check_aligned(gold, pred)
    n_gold = n_pred = n_match = 0
    pg = pp = pm = 0  # predicate identification
    sense_hit = 0
    rg = rp = rm = 0  # roles only
    for g, p in zip(gold.sentences, pred.sentences):
        gi, pi = extract_items(g), extract_items(p)
        n_gold += len(gi)
        n_pred += len(pi)
        n_match += len(gi & pi)
        gpreds = {f.predicate_index: f.sense for f in g.frames}
        ppreds = {f.predicate_index: f.sense for f in p.frames}
        pg += len(gpreds)
        pp += len(ppreds)
        common = gpreds.keys() & ppreds.keys()
        pm += len(common)
        sense_hit += sum(gpreds[i] == ppreds[i] for i in common)
        groles = {x for x in gi if isinstance(x, RoleItem)}
        proles = {x for x in pi if isinstance(x, RoleItem)}
        rg += len(groles)
        rp += len(proles)
        rm += len(groles & proles)
    precision, recall, f = _prf(n_match, n_gold, n_pred)
    pid = _prf(pm, pg, pp)
    role = _prf(rm, rg, rp)
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f,
        gold=n_gold,
        predicted=n_pred,
        matched=n_match,
        predicate_f1=pid[2],
        sense_accuracy=round(100.0 * sense_hit / pm, 2) if pm else 0.0,
        role_f1=role[2],
        breakdown={
            "predicate": {"precision": pid[0], "recall": pid[1], "f1": pid[2],
                          "gold": pg, "predicted": pp, "matched": pm},
            "role": {"precision": role[0], "recall": role[1], "f1": role[2],
                     "gold": rg, "predicted": rp, "matched": rm},
        },
    )


# -- sweep ------------------------------------------------------------------

SWEEP_COLUMNS = ("english_percentage", "F1", "Precision", "Recall")


@dataclass
class SweepRow:
    english_percentage: int
    f1: float
    precision: float
    recall: float
    batches: dict = field(default_factory=dict)


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "meta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepTable":
        return cls([SweepRow(**r) for r in d["rows"]], d.get("meta", {}))


class SweepError(RuntimeError):
    """A training run failed mid-sweep; ``table`` holds the finished rows."""

    def __init__(self, message, table: SweepTable):
        super().__init__(message)
        self.table = table


def run_sweep(runner, fractions, source="en", target="fa", seed=13) -> SweepTable:
    """English-fraction sweep: one fresh training per percentage.

    ``runner(source_fraction, seed)`` trains a fresh model on the target
    training data plus ``source_fraction`` of the source data (0 means the
    target language alone) and returns ``(MetricsReport on the target test
    set, batches-per-language dict)``.
    """
    fractions = [int(f) for f in fractions]
    for f in fractions:
        if not 0 <= f <= 100:
            raise ValueError(f"fraction {f} outside [0, 100]")
    table = SweepTable(meta={"source": source, "target": target, "seed": seed})
    for pct in fractions:
        try:
            report, batches = runner(pct / 100, seed)
        except Exception as exc:
            raise SweepError(f"training failed at {pct}% {source}: {exc}", table) from exc
        table.rows.append(SweepRow(pct, report.f1, report.precision, report.recall, dict(batches)))
    return table


def render_report(obj, fmt: str = "tsv") -> str:
    """Render a MetricsReport or SweepTable as TSV or JSON."""
    if fmt == "json":
        return json.dumps(obj.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt != "tsv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    if isinstance(obj, SweepTable):
        buf.write("\t".join(SWEEP_COLUMNS) + "\n")
        for r in obj.rows:
            buf.write(f"{r.english_percentage}\t{r.f1:.2f}\t{r.precision:.2f}\t{r.recall:.2f}\n")
        return buf.getvalue()
    for key in ("f1", "precision", "recall", "predicate_f1", "sense_accuracy", "role_f1"):
        buf.write(f"{key}\t{getattr(obj, key):.2f}\n")
    for key in ("gold", "predicted", "matched"):
        buf.write(f"{key}\t{getattr(obj, key)}\n")
    return buf.getvalue()


def parse_report(text: str):
    """Inverse of ``render_report(..., "json")``."""
    d = json.loads(text)
    if "rows" in d:
        return SweepTable.from_dict(d)
    return MetricsReport(**d)
