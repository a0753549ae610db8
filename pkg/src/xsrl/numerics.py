"""Small numerics core: activations, affine maps, (Bi)LSTM layers with
hand-written backward passes, softmax cross-entropy, AdamW and a central
finite-difference gradient checker.

Arrays are plain numpy arrays. ``float32`` is the training precision and
``float64`` the verification precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.special import expit

STANDARD = np.float32
HIGH = np.float64
# x87 80-bit where the platform has it; the finite-difference oracle's
# rounding floor in float64 is too coarse for the smallest gradient entries.
EXTENDED = np.longdouble


def resolve_dtype(precision) -> type:
    if precision in ("standard", "float32", np.float32):
        return STANDARD
    if precision in ("high", "float64", np.float64):
        return HIGH
    if precision in ("extended", "longdouble", np.longdouble):
        return EXTENDED
    raise ValueError(f"unknown precision {precision!r}")


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = None
    trainable: bool = True

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ValueError(f"{self.name}: grad shape {self.grad.shape} != {self.value.shape}")

    def zero_grad(self):
        self.grad[...] = 0


def sigmoid(x):
    return expit(x)


def swish(x):
    x = np.asarray(x)
    return x * sigmoid(x)


def swish_grad(x):
    """d/dx x*sigmoid(x) = s + x*s*(1-s)."""
    s = sigmoid(x)
    return s + x * s * (1.0 - s)


def linear(x, W, b):
    """Row-wise ``W @ x_i + b`` for x of shape (..., a), W (b, a)."""
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError(f"linear: shapes x{x.shape} W{W.shape} b{b.shape} do not agree")
    return x @ W.T + b


def linear_backward(dy, x, W):
    """Return (dx, dW, db) for ``y = linear(x, W, b)``."""
    dx = dy @ W
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, dy2.T @ x2, dy2.sum(axis=0)


# -- LSTM ---------------------------------------------------------------
#
# Gate layout in the stacked 4h rows: input, forget, candidate, output.
#   z_t = W_ih x_t + W_hh h_{t-1} + b
#   i,f,o = sigmoid(.), g = tanh(.)
#   c_t = f*c_{t-1} + i*g,  h_t = o*tanh(c_t)


def lstm_forward(x, W_ih, W_hh, b, reverse=False):
    """Run one direction over x of shape (B, n, d). Returns (H, cache) with
    H of shape (B, n, h); zero initial state."""
    B, n, d = x.shape
    h = W_hh.shape[1]
    if W_ih.shape != (4 * h, d) or W_hh.shape != (4 * h, h) or b.shape != (4 * h,):
        raise ValueError(
            f"lstm: shapes x{x.shape} W_ih{W_ih.shape} W_hh{W_hh.shape} b{b.shape} do not agree"
        )
    order = range(n - 1, -1, -1) if reverse else range(n)
    xz = x @ W_ih.T + b  # input contribution for every step at once
    H = np.zeros((B, n, h), dtype=x.dtype)
    C = np.zeros((B, n, h), dtype=x.dtype)
    gates = np.zeros((B, n, 4 * h), dtype=x.dtype)
    h_prev = np.zeros((B, h), dtype=x.dtype)
    c_prev = np.zeros((B, h), dtype=x.dtype)
    for t in order:
        z = xz[:, t] + h_prev @ W_hh.T
        act = np.empty_like(z)
        act[:, : 2 * h] = sigmoid(z[:, : 2 * h])
        act[:, 2 * h : 3 * h] = np.tanh(z[:, 2 * h : 3 * h])
        act[:, 3 * h :] = sigmoid(z[:, 3 * h :])
        i, f, g, o = act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        H[:, t], C[:, t], gates[:, t] = h_prev, c_prev, act
    return H, (x, W_ih, W_hh, H, C, gates, reverse)


def lstm_backward(dH, cache):
    """Backprop through time. Returns (dx, dW_ih, dW_hh, db)."""
    x, W_ih, W_hh, H, C, gates, reverse = cache
    B, n, _ = x.shape
    h = W_hh.shape[1]
    order = list(range(n - 1, -1, -1)) if reverse else list(range(n))
    dz_all = np.zeros_like(gates)
    dW_hh = np.zeros_like(W_hh)
    dh_next = np.zeros((B, h), dtype=x.dtype)
    dc_next = np.zeros((B, h), dtype=x.dtype)
    zeros = np.zeros((B, h), dtype=x.dtype)
    for k in range(n - 1, -1, -1):
        t = order[k]
        prev = order[k - 1] if k > 0 else None
        c_prev = C[:, prev] if prev is not None else zeros
        h_prev = H[:, prev] if prev is not None else zeros
        act = gates[:, t]
        i, f, g, o = act[:, :h], act[:, h : 2 * h], act[:, 2 * h : 3 * h], act[:, 3 * h :]
        tc = np.tanh(C[:, t])
        dh = dH[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :h] = dc * g * i * (1.0 - i)
        dz[:, h : 2 * h] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * h : 3 * h] = dc * i * (1.0 - g * g)
        dz[:, 3 * h :] = dh * tc * o * (1.0 - o)
        dW_hh += dz.T @ h_prev
        dh_next = dz @ W_hh
        dc_next = dc * f
    dz2 = dz_all.reshape(B * n, 4 * h)
    dx = dz_all @ W_ih
    dW_ih = dz2.T @ x.reshape(B * n, -1)
    return dx, dW_ih, dW_hh, dz2.sum(axis=0)


def bilstm_forward(x, fwd, bwd):
    """x: (B, n, d); fwd/bwd: (W_ih, W_hh, b) triples. Output (B, n, 2h) with
    row i = [forward state at i | backward state at i]."""
    Hf, cf = lstm_forward(x, *fwd, reverse=False)
    Hb, cb = lstm_forward(x, *bwd, reverse=True)
    return np.concatenate([Hf, Hb], axis=-1), (cf, cb)


def bilstm_backward(dY, cache):
    """Returns (dx, fwd grads triple, bwd grads triple)."""
    cf, cb = cache
    h = cf[2].shape[1]
    dxf, *gf = lstm_backward(np.ascontiguousarray(dY[..., :h]), cf)
    dxb, *gb = lstm_backward(np.ascontiguousarray(dY[..., h:]), cb)
    return dxf + dxb, tuple(gf), tuple(gb)


def bilstm(x, params_fwd, params_bwd):
    """Convenience wrapper for a single (n, d) sequence."""
    y, _ = bilstm_forward(x[None], params_fwd, params_bwd)
    return y[0]


def softmax_cross_entropy(logits, targets, mask=None):
    """Mean of -log softmax(logits)[target] over rows where mask is true.

    Returns (loss, dlogits). With no active rows the loss is 0 and the
    gradient is zero.
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n, C = logits.shape
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} != ({n},)")
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    active = int(mask.sum())
    grad = np.zeros_like(logits)
    if active == 0:
        return logits.dtype.type(0), grad
    if np.any((targets[mask] < 0) | (targets[mask] >= C)):
        raise ValueError(f"target out of range [0, {C})")
    z = logits[mask]
    t = targets[mask]
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    logp = z - logsum[:, None]
    rows = np.arange(active)
    loss = -logp[rows, t].sum() / active
    g = np.exp(logp)
    g[rows, t] -= 1.0
    grad[mask] = g / active
    return loss, grad


@dataclass
class OptimizerState:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-2
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(params: Iterable[Parameter], state: OptimizerState) -> None:
    """One in-place AdamW update (decoupled weight decay, bias-corrected
    moments). Non-trainable parameters are skipped entirely."""
    state.step += 1
    b1, b2 = state.betas
    t = state.step
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for p in params:
        if not p.trainable:
            continue
        m = state.m.setdefault(p.name, np.zeros_like(p.value))
        v = state.v.setdefault(p.name, np.zeros_like(p.value))
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.weight_decay:
            p.value *= 1.0 - state.lr * state.weight_decay
        p.value -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def clip_grad_norm(params: Iterable[Parameter], max_norm: float) -> float:
    params = [p for p in params if p.trainable]
    total = float(np.sqrt(sum(float((p.grad.astype(np.float64) ** 2).sum()) for p in params)))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


def grad_check(
    loss_fn: Callable[[], float], params: Iterable[Parameter], eps: float = 1e-6
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` must zero and fill every ``param.grad`` and return the loss.
    Only trainable parameters are probed; relative error uses the
    denominator max(|analytic|, |numeric|, 1e-8).
    """
    params = [p for p in params if p.trainable]
    base = loss_fn()
    if not np.isfinite(base):
        raise FloatingPointError(f"non-finite loss {base}")
    analytic = {p.name: p.grad.copy() for p in params}
    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        ga = analytic[p.name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            x_up = flat[k]
            up = loss_fn()
            flat[k] = orig - eps
            x_down = flat[k]
            down = loss_fn()
            flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError(f"non-finite loss probing {p.name}[{k}]")
            num = float((up - down) / (x_up - x_down))
            a = float(ga[k])
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    loss_fn()  # leave grads consistent with the unperturbed parameters
    return worst


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
