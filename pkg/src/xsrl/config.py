"""RunConfig loading and the wiring shared by the CLI commands: corpora,
model construction, training runs and the English-fraction sweep."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .corpus import Corpus, CorpusError, build_inventory, read_conll09, validate_sentence
from .embedder import EmbedderSpec, lookup_vocabulary
from .evaluator import run_sweep
from .model import ModelConfig, SrlModel
from .trainer import TrainConfig, evaluate, train

DEFAULT_SEED = 13


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("xsrl").joinpath("runconfig.schema.json").read_text())


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw, path.parent, overrides)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".", overrides: dict | None = None) -> "RunConfig":
        raw = merge(copy.deepcopy(raw), overrides or {})
        try:
            jsonschema.validate(raw, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        cfg = cls(raw, Path(base_dir))
        cfg.check_paths()
        return cfg

    @property
    def seed(self) -> int:
        return self.raw.get("seed", DEFAULT_SEED)

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.raw.get("output_dir", "out"))

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def check_paths(self):
        missing = [
            str(self.resolve(p))
            for splits in self.raw["data"].values()
            for p in splits.values()
            if not self.resolve(p).exists()
        ]
        emb = self.raw.get("embedder", {})
        if emb.get("kind") == "precomputed-cache":
            if "cache_path" not in emb:
                missing.append("<embedder.cache_path unset>")
            elif not self.resolve(emb["cache_path"]).exists():
                missing.append(str(self.resolve(emb["cache_path"])))
        if missing:
            raise ConfigError(f"missing input files: {', '.join(missing)}")

    def corpus(self, lang: str, split: str) -> Corpus | None:
        p = self.raw["data"].get(lang, {}).get(split)
        return read_conll09(self.resolve(p), lang) if p else None

    def split(self, split: str) -> dict[str, Corpus]:
        out = {}
        for lang in self.raw["data"]:
            c = self.corpus(lang, split)
            if c is not None:
                out[lang] = c
        return out

    def model_config(self) -> ModelConfig:
        d = dict(self.raw.get("model", {}))
        d["seed"] = d.get("seed", self.seed)
        return ModelConfig(**d)

    def train_config(self) -> TrainConfig:
        d = dict(self.raw.get("train", {}))
        d["seed"] = d.get("seed", self.seed)
        return TrainConfig(**d)

    def embedder_spec(self, train_corpora) -> EmbedderSpec:
        d = dict(self.raw.get("embedder", {}))
        if d.get("kind") == "trainable-lookup":
            d["vocabulary"] = lookup_vocabulary(train_corpora.values())
        if d.get("kind") == "precomputed-cache":
            d["cache_path"] = str(self.resolve(d["cache_path"]))
        return EmbedderSpec.from_dict(d)


def merge(base: dict, overrides: dict) -> dict:
    """Recursive dict update; override leaves win."""
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            merge(base[k], v)
        else:
            base[k] = v
    return base


def build_model(cfg: RunConfig, train_corpora: dict[str, Corpus]) -> SrlModel:
    invs = {lang: build_inventory(c) for lang, c in train_corpora.items()}
    for lang, c in train_corpora.items():
        for s in c.sentences:
            bad = validate_sentence(s, invs[lang])
            if bad:
                raise CorpusError(f"{lang} sentence {s.id}: {'; '.join(bad)}")
    return SrlModel(cfg.model_config(), invs, cfg.embedder_spec(train_corpora))


def train_run(cfg: RunConfig):
    """Full training run from a RunConfig; returns (model, history)."""
    corpora = cfg.split("train")
    dev = cfg.split("dev") or None
    model = build_model(cfg, corpora)
    return train(cfg.train_config(), corpora, dev, model)


def sweep_run(cfg: RunConfig, fractions):
    """Target-language training at a fixed fraction plus a varying share of
    the source language; each row is scored on the target test split."""
    sw = cfg.raw.get("sweep", {})
    source, target = sw.get("source", "en"), sw.get("target", "fa")
    target_fraction = sw.get("target_fraction", 0.1)
    for lang in (source, target):
        if lang not in cfg.raw["data"]:
            raise ConfigError(f"sweep language {lang!r} has no data entry")
    src_train = cfg.corpus(source, "train")
    tgt_train = cfg.corpus(target, "train")
    tgt_dev = cfg.corpus(target, "dev")
    tgt_test = cfg.corpus(target, "test")
    if tgt_test is None:
        raise ConfigError(f"sweep needs a test split for {target!r}")

    def runner(source_fraction, seed):
        corpora = {target: tgt_train}
        fractions = {target: target_fraction}
        if source_fraction > 0:
            corpora = {source: src_train, target: tgt_train}
            fractions[source] = source_fraction
        tc = cfg.train_config()
        tc.fractions = fractions
        tc.seed = seed
        model = build_model(cfg, corpora)
        dev = {target: tgt_dev} if tgt_dev is not None else None
        model, history = train(tc, corpora, dev, model)
        batches = {source: 0, target: 0}
        for ep in history["epochs"]:
            for lang, k in ep["batches"].items():
                batches[lang] += k
        return evaluate(model, tgt_test), batches

    return run_sweep(runner, fractions, source=source, target=target, seed=cfg.seed)
