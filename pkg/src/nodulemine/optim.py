"""Adam optimizer over ParameterSets.

Standard first/second-moment update with bias correction:

    m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

with m_hat = m/(1-b1^t) and v_hat = v/(1-b2^t). No weight decay, no
gradient clipping, no schedules.
"""

from dataclasses import dataclass, field

import numpy as np

from .ops import ShapeError


@dataclass
class AdamState:
    lr: float
    beta1: float
    beta2: float
    eps: float
    t: int = 0
    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)


def adam_init(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Fresh AdamState with zero moments mirroring the ParameterSet."""
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
        raise ValueError(f"beta1/beta2 must lie in [0, 1), got {beta1}, {beta2}")
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    state = AdamState(lr=float(lr), beta1=float(beta1), beta2=float(beta2), eps=float(eps))
    for layer_id, (w, b) in params.items():
        state.m[layer_id] = (np.zeros_like(w), np.zeros_like(b))
        state.v[layer_id] = (np.zeros_like(w), np.zeros_like(b))
    return state


def adam_step(state, params, grads):
    """One in-place update of (state, params) from a gradient dict.

    grads maps layer_id -> (grad_weights, grad_bias) exactly mirroring the
    ParameterSet. Returns the mutated (state, params) pair.
    """
    if set(grads.keys()) != set(state.m.keys()) or set(grads.keys()) != set(
        params.layers.keys()
    ):
        raise ShapeError("gradient layer ids do not match optimizer state")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for layer_id, (w, b) in params.items():
        gw, gb = grads[layer_id]
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ShapeError(
                f"gradient shape mismatch at {layer_id}: "
                f"{gw.shape}/{gb.shape} vs {w.shape}/{b.shape}"
            )
        for tensor, grad, m, v in (
            (w, gw, state.m[layer_id][0], state.v[layer_id][0]),
            (b, gb, state.m[layer_id][1], state.v[layer_id][1]),
        ):
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * (grad * grad)
            tensor -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state, params
