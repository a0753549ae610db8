"""
Checking hand-written gradients
===============================

Every backward pass in the package is written by hand. Central differences
in 80-bit floats confirm them to about six digits across the whole model.
"""

import numpy as np

from xsrl.cli import default_gradcheck_model
from xsrl.numerics import bilstm_backward, bilstm_forward, grad_check, Parameter
from xsrl.trainer import batch_loss

# a single BiLSTM layer in float64 first
rng = np.random.default_rng(0)
x = rng.normal(size=(1, 4, 3))
params = {}
for side in ("fwd", "bwd"):
    for name, shape in (("W_ih", (8, 3)), ("W_hh", (8, 2)), ("b", (8,))):
        params[f"{side}.{name}"] = Parameter(f"{side}.{name}", rng.normal(scale=0.5, size=shape))
target = rng.normal(size=(1, 4, 4))


def layer_loss():
    p = {k: v.value for k, v in params.items()}
    H, cache = bilstm_forward(x, (p["fwd.W_ih"], p["fwd.W_hh"], p["fwd.b"]),
                              (p["bwd.W_ih"], p["bwd.W_hh"], p["bwd.b"]))
    _, gf, gb = bilstm_backward(H - target, cache)
    for side, g in (("fwd", gf), ("bwd", gb)):
        for name, grad in zip(("W_ih", "W_hh", "b"), g):
            params[f"{side}.{name}"].grad = grad
    return 0.5 * np.sum((H - target) ** 2)


print("BiLSTM layer:", grad_check(layer_loss, list(params.values())))

# the full two-language model, as run by `srl gradcheck`
model, sentences = default_gradcheck_model()
print("parameters:", sum(p.value.size for p in model.parameters()))
print("full model:", grad_check(lambda: batch_loss(model, sentences)[0], model.parameters(), 1e-5))
