"""Shared-encoder / per-language-decoder SRL network.

Layout of the parameter name space::

    embedder.table                         lookup provider only
    projection.{W,b}                       h -> e
    universal.sent.bilstm{j}.{fwd,bwd}.{W_ih,W_hh,b}
    universal.{pred,sense}.{W,b}           t -> p, t -> s
    universal.arg.bilstm{j}.{fwd,bwd}.{W_ih,W_hh,b}
    universal.role.{W,b}                   a -> r
    decoders.<lang>.{pred,sense,role}.{W,b}

Only the ``decoders.<lang>.*`` tensors depend on the language.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import LabelInventory, PredicateFrame, Sentence, Token
from .embedder import Embedder, EmbedderSpec
from .numerics import (
    Parameter,
    bilstm_backward,
    bilstm_forward,
    linear,
    linear_backward,
    resolve_dtype,
    swish,
    swish_grad,
    uniform_init,
)


class UnknownLanguageError(KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass
class ModelConfig:
    d_e: int = 128
    sent_layers: int = 2
    arg_layers: int = 2
    hidden: int = 128
    d_p: int = 128
    d_s: int = 128
    d_r: int = 128
    seed: int = 13
    precision: str = "standard"
    dropout: float = 0.0
    teacher_forcing: bool = True
    lemma_masking: bool = False

    def __post_init__(self):
        for name in ("d_e", "hidden", "d_p", "d_s", "d_r"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sent_layers < 0 or self.arg_layers < 0:
            raise ValueError("layer counts must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        resolve_dtype(self.precision)

    @property
    def t_width(self) -> int:
        return self.d_e + 2 * self.hidden * self.sent_layers

    @property
    def a_width(self) -> int:
        return 2 * self.t_width + 2 * self.hidden * self.arg_layers

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ForwardOutput:
    predicate_logits: np.ndarray  # n x 2
    sense_logits: np.ndarray  # m x |senses|
    role_logits: np.ndarray  # m x n x |roles|, one matrix per predicate
    predicates: list[int]  # 0-based token positions, increasing
    t: np.ndarray
    p: np.ndarray
    s: np.ndarray
    a: np.ndarray  # m x n x width(a)
    r: np.ndarray
    language: str = ""
    cache: dict = field(default_factory=dict, repr=False)


class SrlModel:
    def __init__(
        self,
        config: ModelConfig,
        inventories: dict[str, LabelInventory],
        embedder_spec: EmbedderSpec | None = None,
    ):
        if not inventories:
            raise ValueError("model needs at least one language")
        self.config = config
        self.dtype = resolve_dtype(config.precision)
        self.inventories = dict(inventories)
        self.embedder_spec = embedder_spec or EmbedderSpec()
        self.embedder = Embedder(self.embedder_spec, self.dtype)
        self.training = False
        self._drop_rng = np.random.default_rng(config.seed + 1)

        rng = np.random.default_rng(config.seed)
        self.params: dict[str, Parameter] = {}
        for p in self.embedder.params:
            self.params[p.name] = p
        self._affine("projection", config.d_e, self.embedder.width, rng)
        self._stack("universal.sent", config.sent_layers, config.d_e, rng)
        self._affine("universal.pred", config.d_p, config.t_width, rng)
        self._affine("universal.sense", config.d_s, config.t_width, rng)
        self._stack("universal.arg", config.arg_layers, 2 * config.t_width, rng)
        self._affine("universal.role", config.d_r, config.a_width, rng)
        for lang, inv in self.inventories.items():
            self._add_language(lang, inv, rng)

    # -- construction ---------------------------------------------------

    def _add(self, name, value):
        if name in self.params:
            raise ValueError(f"duplicate parameter {name}")
        self.params[name] = Parameter(name, value)

    def _affine(self, prefix, n_out, n_in, rng):
        self._add(f"{prefix}.W", uniform_init(rng, (n_out, n_in), n_in, self.dtype))
        self._add(f"{prefix}.b", np.zeros(n_out, dtype=self.dtype))

    def _stack(self, prefix, layers, width, rng):
        h = self.config.hidden
        for j in range(layers):
            for direction in ("fwd", "bwd"):
                base = f"{prefix}.bilstm{j}.{direction}"
                self._add(f"{base}.W_ih", uniform_init(rng, (4 * h, width), width, self.dtype))
                self._add(f"{base}.W_hh", uniform_init(rng, (4 * h, h), h, self.dtype))
                b = np.zeros(4 * h, dtype=self.dtype)
                b[h : 2 * h] = 1.0  # forget gate
                self._add(f"{base}.b", b)
            width += 2 * h

    def _add_language(self, lang, inv, rng):
        c = self.config
        self._affine(f"decoders.{lang}.pred", 2, c.d_p, rng)
        self._affine(f"decoders.{lang}.sense", len(inv.senses), c.d_s, rng)
        self._affine(f"decoders.{lang}.role", len(inv.roles), c.d_r, rng)

    # -- helpers ----------------------------------------------------------

    @property
    def languages(self) -> list[str]:
        return list(self.inventories)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def _v(self, name):
        return self.params[name].value

    def _triple(self, base):
        return (self._v(base + ".W_ih"), self._v(base + ".W_hh"), self._v(base + ".b"))

    def _check_language(self, language):
        if language not in self.inventories:
            raise UnknownLanguageError(
                f"language {language!r} is not registered (known: {self.languages})"
            )

    # -- residual BiLSTM stacks ------------------------------------------------

    def _stack_forward(self, x, prefix, layers):
        caches = []
        for j in range(layers):
            base = f"{prefix}.bilstm{j}"
            y, c = bilstm_forward(x, self._triple(base + ".fwd"), self._triple(base + ".bwd"))
            mask = None
            if self.training and self.config.dropout > 0:
                keep = 1.0 - self.config.dropout
                mask = (self._drop_rng.random(y.shape) < keep).astype(y.dtype) / keep
                y = y * mask
            caches.append((c, mask))
            x = np.concatenate([x, y], axis=-1)
        return x, caches

    def _stack_backward(self, dx, prefix, caches):
        two_h = 2 * self.config.hidden
        for j in range(len(caches) - 1, -1, -1):
            c, mask = caches[j]
            w = dx.shape[-1] - two_h
            dy = dx[..., w:]
            dx = dx[..., :w].copy()
            if mask is not None:
                dy = dy * mask
            dxin, gf, gb = bilstm_backward(dy, c)
            base = f"{prefix}.bilstm{j}"
            for direction, grads in (("fwd", gf), ("bwd", gb)):
                for suffix, g in zip(("W_ih", "W_hh", "b"), grads):
                    self.params[f"{base}.{direction}.{suffix}"].grad += g
            dx += dxin
        return dx

    def _affine_fwd(self, prefix, x):
        z = linear(x, self._v(prefix + ".W"), self._v(prefix + ".b"))
        return swish(z), z

    def _affine_bwd(self, prefix, dy, x, z):
        W = self.params[prefix + ".W"]
        b = self.params[prefix + ".b"]
        dx, dW, db = linear_backward(dy * swish_grad(z), x, W.value)
        W.grad += dW
        b.grad += db
        return dx

    # -- forward pieces ---------------------------------------------------------

    def project(self, h):
        e, _ = self._affine_fwd("projection", h)
        return e

    def encode_sentence(self, e):
        """e: n x d_e -> (t, p, s)."""
        t, p, s, _ = self._encode_sentence(e)
        return t, p, s

    def _encode_sentence(self, e):
        if e.ndim != 2 or e.shape[1] != self.config.d_e:
            raise ValueError(f"encoding has shape {e.shape}, expected (n, {self.config.d_e})")
        t, caches = self._stack_forward(e[None], "universal.sent", self.config.sent_layers)
        t = t[0]
        p, zp = self._affine_fwd("universal.pred", t)
        s, zs = self._affine_fwd("universal.sense", t)
        return t, p, s, (caches, zp, zs)

    def encode_predicate_args(self, t, p_index):
        """Argument encoding for one predicate at 0-based ``p_index``:
        returns (a, r), each n rows."""
        n = t.shape[0]
        if not 0 <= p_index < n:
            raise IndexError(f"predicate index {p_index} out of range [0, {n})")
        a, r, _ = self._encode_args(t, [p_index])
        return a[0], r[0]

    def _encode_args(self, t, predicates):
        n, w = t.shape
        m = len(predicates)
        if m == 0:
            c = self.config
            return (
                np.zeros((0, n, c.a_width), self.dtype),
                np.zeros((0, n, c.d_r), self.dtype),
                None,
            )
        base = np.concatenate(
            [np.broadcast_to(t[predicates][:, None, :], (m, n, w)), np.broadcast_to(t, (m, n, w))],
            axis=-1,
        )
        a, caches = self._stack_forward(base, "universal.arg", self.config.arg_layers)
        r, zr = self._affine_fwd("universal.role", a)
        return a, r, (caches, zr)

    def decode_heads(self, p, s, r, language):
        """Affine per-language logits: (n x 2, rows(s) x |senses|, r.shape[:-1] x |roles|)."""
        self._check_language(language)
        d = f"decoders.{language}"
        return (
            linear(p, self._v(d + ".pred.W"), self._v(d + ".pred.b")),
            linear(s, self._v(d + ".sense.W"), self._v(d + ".sense.b")),
            linear(r, self._v(d + ".role.W"), self._v(d + ".role.b")),
        )

    def forward_hidden(self, h, language, predicates) -> ForwardOutput:
        """Forward from the concatenated representation h (n x 4d)."""
        self._check_language(language)
        predicates = list(predicates)
        ze = linear(h, self._v("projection.W"), self._v("projection.b"))
        e = swish(ze)
        t, p, s, sent_cache = self._encode_sentence(e)
        a, r, arg_cache = self._encode_args(t, predicates)
        pred_logits, sense_logits, role_logits = self.decode_heads(p, s[predicates], r, language)
        return ForwardOutput(
            pred_logits, sense_logits, role_logits, predicates, t, p, s, a, r, language,
            cache={"h": h, "ze": ze, "e": e, "sent": sent_cache, "arg": arg_cache},
        )

    def forward(self, sentence: Sentence, language: str | None = None, predicates=None):
        language = language or sentence.language
        self._check_language(language)
        if predicates is None:
            predicates = [f.predicate_index - 1 for f in sentence.frames]
        out = self.forward_hidden(self.embedder.hidden(sentence), language, predicates)
        out.cache["sentence"] = sentence
        return out

    def forward_training(self, sentence: Sentence, language: str | None = None) -> ForwardOutput:
        """Teacher-forced forward: argument encodings at gold predicates."""
        if self.config.teacher_forcing:
            return self.forward(sentence, language)
        language = language or sentence.language
        h = self.embedder.hidden(sentence)
        first = self.forward_hidden(h, language, [])
        predicted = [int(i) for i in np.flatnonzero(first.predicate_logits.argmax(axis=1) == 1)]
        out = self.forward_hidden(h, language, predicted)
        out.cache["sentence"] = sentence
        return out

    # -- backward ------------------------------------------------------------

    def backward(self, out: ForwardOutput, d_pred, d_sense, d_role) -> None:
        """Accumulate parameter gradients given logits gradients."""
        c = out.cache
        d = f"decoders.{out.language}"
        P = out.predicates
        s_rows = out.s[P]

        dp = self._decoder_bwd(d + ".pred", d_pred, out.p)
        ds_rows = self._decoder_bwd(d + ".sense", d_sense, s_rows)
        t = out.t
        dt = np.zeros_like(t)
        if P:
            dr = self._decoder_bwd(d + ".role", d_role, out.r)
            arg_caches, zr = c["arg"]
            da = self._affine_bwd("universal.role", dr, out.a, zr)
            dbase = self._stack_backward(da, "universal.arg", arg_caches)
            w = t.shape[1]
            dt += dbase[:, :, w:].sum(axis=0)
            np.add.at(dt, P, dbase[:, :, :w].sum(axis=1))
        ds = np.zeros_like(out.s)
        np.add.at(ds, P, ds_rows)
        sent_caches, zp, zs = c["sent"]
        dt += self._affine_bwd("universal.pred", dp, t, zp)
        dt += self._affine_bwd("universal.sense", ds, t, zs)
        de = self._stack_backward(dt[None], "universal.sent", sent_caches)[0]
        dh = self._affine_bwd("projection", de, c["h"], c["ze"])
        if "sentence" in c:
            self.embedder.backward(c["sentence"], dh)

    def _decoder_bwd(self, prefix, dy, x):
        W = self.params[prefix + ".W"]
        b = self.params[prefix + ".b"]
        dx, dW, db = linear_backward(dy, x, W.value)
        W.grad += dW
        b.grad += db
        return dx

    # -- inference -------------------------------------------------------------

    def predict_annotation(
        self, sentence: Sentence, language: str | None = None, lemma_masking: bool | None = None
    ) -> Sentence:
        """Predicted predicates, senses and roles for an unlabeled sentence."""
        language = language or sentence.language
        self._check_language(language)
        if lemma_masking is None:
            lemma_masking = self.config.lemma_masking
        inv = self.inventories[language]
        was_training, self.training = self.training, False
        try:
            h = self.embedder.hidden(sentence)
            first = self.forward_hidden(h, language, [])
            P = [int(i) for i in np.flatnonzero(first.predicate_logits.argmax(axis=1) == 1)]
            out = self.forward_hidden(h, language, P) if P else first
        finally:
            self.training = was_training

        senses = {}
        for k, i in enumerate(P):
            tok = sentence.tokens[i]
            senses[i] = self._pick_sense(out.sense_logits[k], inv, tok, lemma_masking)
        tokens = tuple(
            Token(t.index, t.form, t.lemma, t.pos, i in senses, senses.get(i), t.syntax)
            for i, t in enumerate(sentence.tokens)
        )
        frames = []
        for k, i in enumerate(P):
            best = out.role_logits[k].argmax(axis=1)
            roles = {j + 1: inv.roles[int(rid)] for j, rid in enumerate(best) if rid != 0}
            frames.append(PredicateFrame(i + 1, senses[i], roles))
        return Sentence(sentence.id, sentence.language, tokens, tuple(frames))

    @staticmethod
    def _pick_sense(logits, inv, tok, lemma_masking):
        if not inv.senses:
            lemma = tok.lemma if tok.lemma != "_" else tok.form
            return f"{lemma}.01"
        if not lemma_masking:
            return inv.senses[int(np.argmax(logits[: len(inv.senses)]))]
        lemma = tok.lemma if tok.lemma != "_" else tok.form
        allowed = [k for k, sense in enumerate(inv.senses) if sense.rsplit(".", 1)[0] == lemma]
        if not allowed:
            return f"{lemma}.01"
        return inv.senses[max(allowed, key=lambda k: logits[k])]

    # -- state -------------------------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        if missing:
            raise KeyError(f"missing tensors: {sorted(missing)}")
        for name, p in self.params.items():
            if state[name].shape != p.value.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.value.shape}")
            p.value[...] = state[name]
