"""Multi-language, multi-task training: batching, the summed objective,
freezing, checkpoints and early stopping."""

from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, LabelInventory, Sentence, sample_fraction
from .embedder import EmbedderSpec
from .evaluator import score
from .model import ForwardOutput, ModelConfig, SrlModel
from .numerics import OptimizerState, adamw_step, clip_grad_norm, softmax_cross_entropy

logger = logging.getLogger(__name__)

TASKS = ("predicate", "sense", "role")
CKPT_MAGIC = b"USRL1\n"
CKPT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class FreezeError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 1e-3
    weight_decay: float = 1e-2
    language_weights: dict = field(default_factory=dict)
    freeze: list = field(default_factory=list)
    patience: int | None = 5
    seed: int = 13
    fractions: dict = field(default_factory=dict)
    clip_norm: float | None = None
    selection_weights: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(w < 0 for w in self.language_weights.values()):
            raise ValueError("language weights must be >= 0")
        if any(not 0 <= f <= 1 for f in self.fractions.values()):
            raise ValueError("fractions must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Batch:
    language: str
    sentences: list


def make_batches(corpora: Mapping[str, Corpus], batch_size: int, seed: int) -> list[Batch]:
    """Shuffle each language, chunk it, and interleave the chunks so every
    language's batches are spread evenly through the epoch."""
    if not any(len(c) for c in corpora.values()):
        raise ValueError("all training corpora are empty")
    keyed = []
    for li, (lang, c) in enumerate(corpora.items()):
        n = len(c.sentences)
        if n == 0:
            continue
        order = np.random.default_rng([seed & 0xFFFFFFFF, li]).permutation(n)
        chunks = [order[i : i + batch_size] for i in range(0, n, batch_size)]
        for j, chunk in enumerate(chunks):
            batch = Batch(lang, [c.sentences[k] for k in chunk])
            keyed.append(((j + 0.5) / len(chunks), li, batch))
    keyed.sort(key=lambda x: (x[0], x[1]))
    return [b for _, _, b in keyed]


def objective(components: Mapping[str, Mapping[str, float]], weights=None) -> float:
    """Sum over languages of weight * (predicate + sense + role) loss."""
    weights = weights or {}
    return sum(
        weights.get(lang, 1.0) * sum(comp[t] for t in TASKS) for lang, comp in components.items()
    )


def _targets(sentence: Sentence, out: ForwardOutput, inv: LabelInventory):
    pred_t = np.array([int(t.fill_pred) for t in sentence.tokens])
    gold = {f.predicate_index - 1: f for f in sentence.frames}
    m, n = len(out.predicates), len(sentence.tokens)
    sense_t = np.zeros(m, dtype=np.int64)
    sense_mask = np.zeros(m, dtype=bool)
    role_t = np.zeros((m, n), dtype=np.int64)
    for k, i in enumerate(out.predicates):
        frame = gold.get(i)
        if frame is None:
            continue
        sense_t[k] = inv.sense_id(frame.sense)
        sense_mask[k] = True
        for a, role in frame.roles.items():
            role_t[k, a - 1] = inv.role_id(role)
    return pred_t, sense_t, sense_mask, role_t


def total_loss(items: Sequence[tuple[Sentence, ForwardOutput]], inventories, weights=None):
    """Cross-entropy objective over a set of forward outputs.

    Per language: predicate loss is the mean over all tokens, sense loss the
    mean over gold predicates, role loss the mean over every (predicate,
    token) pair. Returns ``(loss, components, grads)`` where ``grads[k]`` is
    the (d_predicate, d_sense, d_role) triple for ``items[k]``.
    """
    weights = weights or {}
    by_lang: dict[str, list[int]] = {}
    for k, (_, out) in enumerate(items):
        by_lang.setdefault(out.language, []).append(k)
    components = {}
    grads: list = [None] * len(items)
    for lang, ks in by_lang.items():
        inv = inventories[lang]
        w = weights.get(lang, 1.0)
        tg = [_targets(items[k][0], items[k][1], inv) for k in ks]
        outs = [items[k][1] for k in ks]
        n_roles = len(inv.roles)

        lp, gp = softmax_cross_entropy(
            np.concatenate([o.predicate_logits for o in outs]), np.concatenate([t[0] for t in tg])
        )
        sense_logits = np.concatenate([o.sense_logits for o in outs])
        ls, gs = softmax_cross_entropy(
            sense_logits,
            np.concatenate([t[1] for t in tg]),
            np.concatenate([t[2] for t in tg]),
        )
        lr_, gr = softmax_cross_entropy(
            np.concatenate([o.role_logits.reshape(-1, n_roles) for o in outs]),
            np.concatenate([t[3].reshape(-1) for t in tg]),
        )
        components[lang] = {"predicate": lp, "sense": ls, "role": lr_}
        ip = is_ = ir = 0
        for k, o in zip(ks, outs):
            n = o.predicate_logits.shape[0]
            m = o.sense_logits.shape[0]
            size = o.role_logits.size // n_roles if n_roles else 0
            grads[k] = (
                w * gp[ip : ip + n],
                w * gs[is_ : is_ + m],
                w * gr[ir : ir + size].reshape(o.role_logits.shape),
            )
            ip, is_, ir = ip + n, is_ + m, ir + size
    return objective(components, weights), components, grads


def batch_loss(model: SrlModel, sentences: Sequence[Sentence], weights=None):
    """Zero grads, run forward/backward over the sentences, return
    ``(loss, components)``; parameter grads hold dLoss/dtheta afterwards."""
    model.zero_grad()
    items = [(s, model.forward_training(s)) for s in sentences]
    loss, comps, grads = total_loss(items, model.inventories, weights)
    for (_, out), (dp, ds, dr) in zip(items, grads):
        model.backward(out, dp, ds, dr)
    return loss, comps


def apply_freeze(model: SrlModel, prefixes: Sequence[str]) -> SrlModel:
    """Freeze parameters under any prefix; everything else trains (except a
    lookup table declared non-trainable by its provider spec)."""
    names = list(model.params)
    for prefix in prefixes:
        if not any(n.startswith(prefix) for n in names):
            raise FreezeError(f"freeze prefix {prefix!r} matches no parameter")
    fixed_table = (
        model.embedder_spec.kind == "trainable-lookup" and not model.embedder_spec.trainable
    )
    for name, p in model.params.items():
        frozen = any(name.startswith(pr) for pr in prefixes)
        if fixed_table and name.startswith("embedder."):
            frozen = True
        p.trainable = not frozen
    return model


def predict_corpus(model: SrlModel, corpus: Corpus) -> Corpus:
    return Corpus(
        corpus.language,
        tuple(model.predict_annotation(s.without_frames(), corpus.language) for s in corpus.sentences),
    )


def evaluate(model: SrlModel, corpus: Corpus):
    return score(corpus, predict_corpus(model, corpus))


def train(config: TrainConfig, corpora: Mapping[str, Corpus], dev_corpora=None, model=None):
    """Train ``model`` in place; returns ``(model, history)``.

    Dev F1 (mean over languages, optionally weighted) picks the returned
    parameters. Without dev corpora the training corpora are used.
    """
    if model is None:
        raise ValueError("train needs a constructed model")
    corpora = {
        lang: sample_fraction(c, config.fractions.get(lang, 1), config.seed)
        for lang, c in corpora.items()
    }
    dev_corpora = dev_corpora if dev_corpora is not None else corpora
    apply_freeze(model, config.freeze)
    state = OptimizerState(lr=config.lr, weight_decay=config.weight_decay)
    params = model.parameters()
    history = {"epochs": [], "best_epoch": None, "best_dev_f1": None, "config": config.to_dict()}
    best_state = None
    best_f1 = -math.inf
    stale = 0
    for epoch in range(config.epochs):
        batches = make_batches(corpora, config.batch_size, config.seed + epoch)
        totals: dict[str, dict[str, float]] = {}
        counts: dict[str, int] = {}
        epoch_loss = 0.0
        model.training = True
        for bi, batch in enumerate(batches):
            loss, comps = batch_loss(model, batch.sentences, config.language_weights)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {bi} "
                    f"(language {batch.language}, sentences "
                    f"{[s.id for s in batch.sentences]})"
                )
            if config.clip_norm:
                clip_grad_norm(params, config.clip_norm)
            adamw_step(params, state)
            epoch_loss += float(loss)
            counts[batch.language] = counts.get(batch.language, 0) + 1
            for lang, comp in comps.items():
                acc = totals.setdefault(lang, dict.fromkeys(comp, 0.0))
                for t, v in comp.items():
                    acc[t] += float(v)
        model.training = False
        dev = {lang: evaluate(model, c).f1 for lang, c in dev_corpora.items() if len(c)}
        sw = config.selection_weights
        wsum = sum(sw.get(l, 1.0) for l in dev)
        mean_f1 = sum(sw.get(l, 1.0) * f for l, f in dev.items()) / wsum if wsum else 0.0
        record = {
            "epoch": epoch,
            "loss": epoch_loss / max(len(batches), 1),
            "components": {
                l: {t: v / counts[l] for t, v in comp.items()} for l, comp in totals.items()
            },
            "batches": {l: counts.get(l, 0) for l in corpora},
            "dev_f1": dev,
            "mean_dev_f1": mean_f1,
        }
        history["epochs"].append(record)
        logger.info("epoch %d loss %.4f dev F1 %.2f", epoch, record["loss"], mean_f1)
        if mean_f1 > best_f1:
            best_f1, best_state, stale = mean_f1, model.state_dict(), 0
            history["best_epoch"], history["best_dev_f1"] = epoch, mean_f1
        else:
            stale += 1
            if config.patience is not None and stale >= config.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    return model, history


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(model: SrlModel, meta: Mapping, path) -> None:
    tensors = []
    payload = []
    offset = 0
    for name, p in model.params.items():
        arr = np.ascontiguousarray(p.value, dtype=p.value.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        tensors.append(
            {"name": name, "shape": list(arr.shape), "dtype": arr.dtype.name,
             "offset": offset, "length": len(raw)}
        )
        payload.append(raw)
        offset += len(raw)
    header = {
        "version": CKPT_VERSION,
        "model_config": model.config.to_dict(),
        "embedder": model.embedder_spec.to_dict(),
        "inventories": {l: inv.to_dict() for l, inv in model.inventories.items()},
        "tensors": tensors,
        "payload_bytes": offset,
        "metadata": dict(meta),
    }
    hb = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        for raw in payload:
            fh.write(raw)


def read_checkpoint_header(path) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    if not data.startswith(CKPT_MAGIC):
        raise CheckpointError(f"{path}: bad magic")
    pos = len(CKPT_MAGIC)
    if len(data) < pos + 4:
        raise CheckpointError(f"{path}: truncated header")
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + hlen:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    if header.get("version") != CKPT_VERSION:
        raise CheckpointError(
            f"{path}: version mismatch (file {header.get('version')}, expected {CKPT_VERSION})"
        )
    return header, data[pos + hlen :]


def load_checkpoint(path) -> tuple[SrlModel, dict]:
    """Rebuild the model; returns ``(model, metadata)``."""
    header, payload = read_checkpoint_header(path)
    if len(payload) < header["payload_bytes"]:
        raise CheckpointError(
            f"{path}: truncated payload ({len(payload)} of {header['payload_bytes']} bytes)"
        )
    config = ModelConfig(**header["model_config"])
    invs = {l: LabelInventory.from_dict(d) for l, d in header["inventories"].items()}
    model = SrlModel(config, invs, EmbedderSpec.from_dict(header["embedder"]))
    directory = {t["name"]: t for t in header["tensors"]}
    state = {}
    for name, p in model.params.items():
        entry = directory.get(name)
        if entry is None:
            raise CheckpointError(f"{path}: missing tensor {name}")
        end = entry["offset"] + entry["length"]
        if end > header["payload_bytes"]:
            raise CheckpointError(f"{path}: missing tensor {name} (not in payload)")
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        shape = tuple(entry["shape"])
        if shape != p.value.shape or entry["length"] != int(np.prod(shape)) * dtype.itemsize:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: header {shape}, model {p.value.shape}"
            )
        state[name] = np.frombuffer(payload, dtype=dtype, count=int(np.prod(shape)),
                                    offset=entry["offset"]).reshape(shape)
    for name in directory:
        if name not in model.params:
            raise CheckpointError(f"{path}: unexpected tensor {name}")
    model.load_state_dict(state)
    return model, header["metadata"]
