"""Token representations: layer stacks from an embedding provider, top-four
concatenation, Swish projection, and the binary embedding cache."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Sentence
from .numerics import Parameter, linear, linear_backward, swish, swish_grad

TOP = 4
KEY_SEP = "\u001f"
CACHE_MAGIC = b"SRLE"
CACHE_VERSION = 1
UNK = "<unk>"

KINDS = ("deterministic-toy", "trainable-lookup", "precomputed-cache")


class EmbeddingError(Exception):
    pass


class CacheFormatError(EmbeddingError):
    pass


class MissingKeyError(EmbeddingError, KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass(frozen=True)
class LayerStack:
    """K layers of shape (n, d); ``layers[k]`` is layer k+1."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        shapes = {l.shape for l in self.layers}
        if len(shapes) > 1:
            raise ValueError(f"layers disagree in shape: {sorted(shapes)}")

    @property
    def K(self) -> int:
        return len(self.layers)

    @property
    def n(self) -> int:
        return self.layers[0].shape[0]

    @property
    def d(self) -> int:
        return self.layers[0].shape[1]


@dataclass(frozen=True)
class EmbeddingSequence:
    h: np.ndarray
    e: np.ndarray | None = None


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "deterministic-toy"
    d: int = 32
    K: int = 12
    seed: int = 0
    vocabulary: tuple[str, ...] = ()
    trainable: bool = True
    cache_path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown embedder kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "deterministic-toy" and self.K < TOP:
            raise ValueError(f"toy embedder needs K >= {TOP} layers, got {self.K}")
        if self.kind == "precomputed-cache" and not self.cache_path:
            raise ValueError("precomputed-cache embedder needs cache_path")
        if self.kind != "trainable-lookup" and self.vocabulary:
            raise ValueError("vocabulary only applies to the trainable-lookup embedder")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "deterministic-toy":
            out.update(K=self.K, seed=self.seed)
        elif self.kind == "trainable-lookup":
            out.update(vocabulary=list(self.vocabulary), trainable=self.trainable, seed=self.seed)
        else:
            out.update(cache_path=self.cache_path)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "EmbedderSpec":
        d = dict(d)
        if "vocabulary" in d:
            d["vocabulary"] = tuple(d["vocabulary"])
        return cls(**d)


def _row_seed(language: str, form: str, k: int, seed: int) -> int:
    key = f"{language}{KEY_SEP}{form}{KEY_SEP}{k}{KEY_SEP}{seed}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


@lru_cache(maxsize=65536)
def _toy_row(language: str, form: str, k: int, seed: int, d: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(_row_seed(language, form, k, seed)))
    row = rng.standard_normal(d)
    row.setflags(write=False)
    return row


def toy_embed(sentence: Sentence, spec: EmbedderSpec) -> LayerStack:
    """Deterministic pseudo-random layer stack: layer k, row i is a standard
    normal vector seeded by (language, form_i, k, seed)."""
    if spec.kind != "deterministic-toy":
        raise ValueError(f"toy_embed needs a deterministic-toy spec, got {spec.kind!r}")
    layers = tuple(
        np.stack([_toy_row(sentence.language, f, k, spec.seed, spec.d) for f in sentence.forms])
        for k in range(1, spec.K + 1)
    )
    return LayerStack(layers)


def concat_top_layers(stack: LayerStack) -> np.ndarray:
    """Row i = [layer K | layer K-1 | layer K-2 | layer K-3] at token i."""
    if stack.K < TOP:
        raise ValueError(f"need at least {TOP} layers, stack has {stack.K}")
    return np.concatenate([stack.layers[-1 - j] for j in range(TOP)], axis=1)


def project(h, W_w, b_w):
    """e = Swish(W_w h_i + b_w) for every row."""
    return swish(linear(h, W_w, b_w))


def project_backward(de, h, W_w, b_w):
    """Returns (dh, dW_w, db_w) for ``project``."""
    z = linear(h, W_w, b_w)
    return linear_backward(de * swish_grad(z), h, W_w)


def cache_key(sentence: Sentence) -> str:
    return f"{sentence.language}{KEY_SEP}{sentence.id}"


def write_cache(entries: Mapping[str, np.ndarray], path) -> None:
    """Write entries (key -> n x D matrix) in the SRLE binary format."""
    widths = {np.shape(m)[1] for m in entries.values()}
    if len(widths) > 1:
        raise ValueError(f"inconsistent widths in cache entries: {sorted(widths)}")
    D = widths.pop() if widths else 0
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<IIQ", CACHE_VERSION, D, len(entries)))
        for key, m in entries.items():
            kb = key.encode("utf-8")
            m = np.ascontiguousarray(m, dtype="<f4")
            fh.write(struct.pack("<I", len(kb)))
            fh.write(kb)
            fh.write(struct.pack("<I", m.shape[0]))
            fh.write(m.tobytes())


def load_cache(path) -> dict[str, np.ndarray]:
    """Read a whole SRLE file into a dict of float32 matrices."""
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 20:
        raise CacheFormatError(f"{path}: truncated header")
    version, D, count = struct.unpack_from("<IIQ", data, 4)
    if version != CACHE_VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    pos = 20
    out = {}
    for i in range(count):
        try:
            (klen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + klen > len(data):
                raise struct.error
            key = data[pos : pos + klen].decode("utf-8")
            pos += klen
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
        except struct.error:
            raise CacheFormatError(f"{path}: truncated payload in entry {i}") from None
        nbytes = n * D * 4
        if pos + nbytes > len(data):
            raise CacheFormatError(f"{path}: truncated payload in entry {i} ({key!r})")
        out[key] = np.frombuffer(data, dtype="<f4", count=n * D, offset=pos).reshape(n, D)
        pos += nbytes
    return out


def read_cache(path, sentence: Sentence) -> np.ndarray:
    """Stored pre-concatenated matrix for one sentence."""
    return _lookup(load_cache(path), sentence)


def _lookup(entries, sentence):
    key = cache_key(sentence)
    if key not in entries:
        raise MissingKeyError(
            f"no cached embedding for sentence {sentence.id!r} (language {sentence.language!r})"
        )
    m = entries[key]
    if m.shape[0] != len(sentence):
        raise EmbeddingError(
            f"row-count mismatch for sentence {sentence.id!r}: cache has {m.shape[0]} rows, "
            f"sentence has {len(sentence)} tokens"
        )
    return m


class Embedder:
    """Provider front-end. ``hidden(sentence)`` returns the n x 4d matrix h;
    ``params`` lists trainable provider tensors (only the lookup table)."""

    def __init__(self, spec: EmbedderSpec, dtype=np.float32):
        self.spec = spec
        self.dtype = dtype
        self.params: list[Parameter] = []
        self._entries = None
        if spec.kind == "trainable-lookup":
            vocab = (UNK,) + tuple(v for v in spec.vocabulary if v != UNK)
            self.index = {w: i for i, w in enumerate(vocab)}
            rng = np.random.default_rng(spec.seed)
            table = rng.standard_normal((len(vocab), spec.d)).astype(dtype)
            self.params.append(Parameter("embedder.table", table, trainable=spec.trainable))
        elif spec.kind == "precomputed-cache":
            self._entries = load_cache(spec.cache_path)

    @property
    def width(self) -> int:
        if self.spec.kind == "precomputed-cache":
            widths = {m.shape[1] for m in self._entries.values()}
            return widths.pop() if widths else 0
        return TOP * self.spec.d

    def layer_stack(self, sentence: Sentence) -> LayerStack:
        if self.spec.kind == "deterministic-toy":
            return toy_embed(sentence, self.spec)
        if self.spec.kind == "trainable-lookup":
            rows = self.params[0].value[self._ids(sentence)]
            return LayerStack((rows,) * TOP)
        raise EmbeddingError("precomputed-cache provider stores concatenated vectors only")

    def _ids(self, sentence):
        return [
            self.index.get(f"{sentence.language}{KEY_SEP}{f}", 0) for f in sentence.forms
        ]

    def hidden(self, sentence: Sentence) -> np.ndarray:
        if self.spec.kind == "precomputed-cache":
            return _lookup(self._entries, sentence).astype(self.dtype)
        return concat_top_layers(self.layer_stack(sentence)).astype(self.dtype, copy=False)

    def backward(self, sentence: Sentence, dh: np.ndarray) -> None:
        """Accumulate dL/dh into provider parameters (lookup table only)."""
        if self.spec.kind != "trainable-lookup":
            return
        table = self.params[0]
        d = self.spec.d
        drows = sum(dh[:, j * d : (j + 1) * d] for j in range(TOP))
        np.add.at(table.grad, self._ids(sentence), drows)


def lookup_vocabulary(corpora) -> tuple[str, ...]:
    """Deterministic (language, form) vocabulary for the lookup provider."""
    seen: dict[str, None] = {}
    for c in corpora:
        for s in c.sentences:
            for f in s.forms:
                seen.setdefault(f"{s.language}{KEY_SEP}{f}")
    return tuple(seen)
