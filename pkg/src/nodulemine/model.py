"""Encoder-decoder segmentation network with inception encoder blocks.

The network is a U-shaped design: each encoder level applies a conv block
and 2x2 max-pools; the decoder mirrors it with nearest-neighbor upsampling,
a 1x1 channel-reduction conv, a skip concatenation from the matching
encoder level, and a 3x3 merge conv. A final 1x1 conv plus sigmoid yields
a per-pixel nodule probability map.

Encoder levels listed in ``inception_levels`` replace the plain block
(two 3x3 convs) with an inception block of four parallel branches:
1x1 conv, 1x1-reduce -> 3x3 conv, 1x1-reduce -> 5x5 conv, and
3x3 mean-pool -> 1x1 conv, channel-concatenated to the level's output
width. Branch widths split the output channels as evenly as possible with
the remainder going to the 3x3 branch; each reducer is half its branch
width (at least 1).

All parameters live in a :class:`ParameterSet`, an ordered map from layer
id to (weights, bias), which is the unit of checkpointing and of weight
transfer between training phases.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .ops import ShapeError
from .rng import substream

LOSS_EPS = 1e-7


class SpecError(ValueError):
    """NetworkSpec violates one of its constraints."""


@dataclass(frozen=True)
class NetworkSpec:
    input_size: int = 64
    depth: int = 3
    base_channels: int = 8
    inception_levels: tuple = (2, 3)

    def __post_init__(self):
        object.__setattr__(self, "inception_levels", tuple(sorted(set(self.inception_levels))))

    def validate(self):
        if self.depth < 2:
            raise SpecError(f"depth must be >= 2, got {self.depth}")
        if self.base_channels < 4:
            raise SpecError(f"base_channels must be >= 4, got {self.base_channels}")
        if self.input_size <= 0 or self.input_size % (1 << self.depth):
            raise SpecError(
                f"input_size {self.input_size} not divisible by 2^depth = {1 << self.depth}"
            )
        for lvl in self.inception_levels:
            if not 1 <= lvl <= self.depth:
                raise SpecError(
                    f"inception level {lvl} outside encoder levels 1..{self.depth}"
                )
        return self

    def level_channels(self, level):
        return self.base_channels << (level - 1)

    @property
    def bottleneck_channels(self):
        return self.base_channels << self.depth

    def to_dict(self):
        return {
            "input_size": self.input_size,
            "depth": self.depth,
            "base_channels": self.base_channels,
            "inception_levels": list(self.inception_levels),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_size=int(d["input_size"]),
            depth=int(d["depth"]),
            base_channels=int(d["base_channels"]),
            inception_levels=tuple(int(v) for v in d["inception_levels"]),
        ).validate()


DEFAULT_SPEC = NetworkSpec()


def split_branch_widths(channels):
    """Split a level's output channels over the four inception branches.

    Order: (1x1, 3x3, 5x5, pool); the division remainder goes to the 3x3
    branch.
    """
    base, rem = divmod(channels, 4)
    return (base, base + rem, base, base)


@dataclass(frozen=True)
class ConvDef:
    layer_id: str
    c_in: int
    c_out: int
    ksize: int
    padding: int
    relu: bool = True


def _conv_defs(spec):
    """Ordered conv layer definitions demanded by a spec."""
    defs = []

    def add(layer_id, c_in, c_out, ksize, padding, relu=True):
        defs.append(ConvDef(layer_id, c_in, c_out, ksize, padding, relu))

    c_prev = 1
    for lvl in range(1, spec.depth + 1):
        c = spec.level_channels(lvl)
        if lvl in spec.inception_levels:
            w1, w2, w3, w4 = split_branch_widths(c)
            r2 = max(1, w2 // 2)
            r3 = max(1, w3 // 2)
            add(f"enc{lvl}.b1", c_prev, w1, 1, 0)
            add(f"enc{lvl}.b2r", c_prev, r2, 1, 0)
            add(f"enc{lvl}.b2", r2, w2, 3, 1)
            add(f"enc{lvl}.b3r", c_prev, r3, 1, 0)
            add(f"enc{lvl}.b3", r3, w3, 5, 2)
            add(f"enc{lvl}.b4", c_prev, w4, 1, 0)
        else:
            add(f"enc{lvl}.conv1", c_prev, c, 3, 1)
            add(f"enc{lvl}.conv2", c, c, 3, 1)
        c_prev = c

    add("bott", c_prev, spec.bottleneck_channels, 3, 1)

    c_prev = spec.bottleneck_channels
    for lvl in range(spec.depth, 0, -1):
        c = spec.level_channels(lvl)
        add(f"dec{lvl}.up", c_prev, c, 1, 0)
        add(f"dec{lvl}.merge", 2 * c, c, 3, 1)
        c_prev = c

    add("out", c_prev, 1, 1, 0, relu=False)
    return defs


def layer_ids(spec):
    return [d.layer_id for d in _conv_defs(spec)]


class ParameterSet:
    """Ordered map layer_id -> (weights, bias), all float64."""

    def __init__(self, spec, layers):
        self.spec = spec
        self.layers = dict(layers)

    def __getitem__(self, layer_id):
        return self.layers[layer_id]

    def __contains__(self, layer_id):
        return layer_id in self.layers

    def items(self):
        return self.layers.items()

    def layer_ids(self):
        return list(self.layers.keys())

    def copy(self):
        """Deep copy; mutating the copy never touches the source."""
        return ParameterSet(
            self.spec, {k: (w.copy(), b.copy()) for k, (w, b) in self.layers.items()}
        )

    def all_finite(self):
        return all(
            np.all(np.isfinite(w)) and np.all(np.isfinite(b))
            for w, b in self.layers.values()
        )

    def value_equal(self, other):
        if self.layer_ids() != other.layer_ids():
            return False
        return all(
            np.array_equal(w, other.layers[k][0]) and np.array_equal(b, other.layers[k][1])
            for k, (w, b) in self.layers.items()
        )


def build_network(spec, seed):
    """He-initialized ParameterSet for a spec, deterministic given seed."""
    spec.validate()
    rng = substream(seed, "init")
    layers = {}
    for d in _conv_defs(spec):
        fan_in = d.c_in * d.ksize * d.ksize
        w = rng.standard_normal((d.c_out, d.c_in, d.ksize, d.ksize)) * np.sqrt(2.0 / fan_in)
        layers[d.layer_id] = (w, np.zeros(d.c_out))
    return ParameterSet(spec, layers)


def _conv_fwd(params, layer_id, x, padding, cache, relu=True):
    w, b = params[layer_id]
    z = ops.conv2d(x, w, b, stride=1, padding=padding)
    if cache is not None:
        cache[layer_id] = (x, z)
    return ops.activation(z, "relu") if relu else z


def forward(params, batch, cache=None):
    """Probability map for a batch.

    batch: (N, 1, S, S) with S = spec.input_size; returns (N, 1, S, S)
    values in (0, 1). Pass a dict as ``cache`` to retain the activations
    needed by :func:`backward`.
    """
    spec = params.spec
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[1] != 1:
        raise ShapeError(f"batch must be (N, 1, S, S), got {batch.shape}")
    if batch.shape[2] != spec.input_size or batch.shape[3] != spec.input_size:
        raise ShapeError(
            f"batch spatial dims {batch.shape[2]}x{batch.shape[3]} != "
            f"spec input_size {spec.input_size}"
        )

    h = batch
    skips = {}
    for lvl in range(1, spec.depth + 1):
        if lvl in spec.inception_levels:
            h = _inception_fwd(params, lvl, h, cache)
        else:
            h = _conv_fwd(params, f"enc{lvl}.conv1", h, 1, cache)
            h = _conv_fwd(params, f"enc{lvl}.conv2", h, 1, cache)
        skips[lvl] = h
        pooled, argmax = ops.pool2d(h, 2, "max")
        if cache is not None:
            cache[f"pool{lvl}"] = (h.shape, argmax)
        h = pooled

    h = _conv_fwd(params, "bott", h, 1, cache)

    for lvl in range(spec.depth, 0, -1):
        h = ops.upsample2d(h, 2)
        h = _conv_fwd(params, f"dec{lvl}.up", h, 0, cache)
        h = ops.channel_concat(h, skips[lvl])
        h = _conv_fwd(params, f"dec{lvl}.merge", h, 1, cache)

    logits = _conv_fwd(params, "out", h, 0, cache, relu=False)
    return ops.activation(logits, "sigmoid")


def _inception_fwd(params, lvl, h, cache):
    b1 = _conv_fwd(params, f"enc{lvl}.b1", h, 0, cache)
    t2 = _conv_fwd(params, f"enc{lvl}.b2r", h, 0, cache)
    b2 = _conv_fwd(params, f"enc{lvl}.b2", t2, 1, cache)
    t3 = _conv_fwd(params, f"enc{lvl}.b3r", h, 0, cache)
    b3 = _conv_fwd(params, f"enc{lvl}.b3", t3, 2, cache)
    pooled = ops.mean_pool3_same(h)
    b4 = _conv_fwd(params, f"enc{lvl}.b4", pooled, 0, cache)
    return ops.channel_concat(ops.channel_concat(b1, b2), ops.channel_concat(b3, b4))


def _conv_bwd(params, layer_id, upstream, cache, grads, padding, relu=True):
    x, z = cache[layer_id]
    gz = ops.activation_backward(z, "relu", upstream) if relu else upstream
    w, _ = params[layer_id]
    gx, gw, gb = ops.conv2d_backward(x, w, gz, stride=1, padding=padding)
    acc_w, acc_b = grads[layer_id]
    acc_w += gw
    acc_b += gb
    return gx


def backward(params, cache, grad_logits):
    """Backpropagate a gradient w.r.t. the output logits.

    ``cache`` must come from :func:`forward`. Returns a dict
    layer_id -> (grad_weights, grad_bias) covering every layer.
    """
    spec = params.spec
    grads = {
        k: (np.zeros_like(w), np.zeros_like(b)) for k, (w, b) in params.items()
    }

    g = _conv_bwd(params, "out", grad_logits, cache, grads, 0, relu=False)

    # decoder ran depth..1, so unwind 1..depth; skip gradients feed the
    # matching encoder level below
    skip_grads = {}
    for lvl in range(1, spec.depth + 1):
        c = spec.level_channels(lvl)
        g = _conv_bwd(params, f"dec{lvl}.merge", g, cache, grads, 1)
        g, skip_grads[lvl] = ops.channel_concat_backward(g, c)
        g = _conv_bwd(params, f"dec{lvl}.up", g, cache, grads, 0)
        g = ops.upsample2d_backward(g, 2)

    g = _conv_bwd(params, "bott", g, cache, grads, 1)

    for lvl in range(spec.depth, 0, -1):
        shape, argmax = cache[f"pool{lvl}"]
        g = ops.pool2d_backward(g, shape, 2, "max", argmax)
        g = g + skip_grads[lvl]
        if lvl in spec.inception_levels:
            g = _inception_bwd(params, lvl, g, cache, grads)
        else:
            g = _conv_bwd(params, f"enc{lvl}.conv2", g, cache, grads, 1)
            g = _conv_bwd(params, f"enc{lvl}.conv1", g, cache, grads, 1)
    return grads


def _inception_bwd(params, lvl, g, cache, grads):
    w1, w2, w3, _ = split_branch_widths(params.spec.level_channels(lvl))
    g1, rest = ops.channel_concat_backward(g, w1)
    g2, rest = ops.channel_concat_backward(rest, w2)
    g3, g4 = ops.channel_concat_backward(rest, w3)
    gh = _conv_bwd(params, f"enc{lvl}.b1", g1, cache, grads, 0)
    t = _conv_bwd(params, f"enc{lvl}.b2", g2, cache, grads, 1)
    gh += _conv_bwd(params, f"enc{lvl}.b2r", t, cache, grads, 0)
    t = _conv_bwd(params, f"enc{lvl}.b3", g3, cache, grads, 2)
    gh += _conv_bwd(params, f"enc{lvl}.b3r", t, cache, grads, 0)
    gp = _conv_bwd(params, f"enc{lvl}.b4", g4, cache, grads, 0)
    gh += ops.mean_pool3_same_backward(gp)
    return gh


def weighted_bce(pred, target, w_pos, w_neg):
    """Pixel BCE with explicit class weights; returns (loss, grad_logits).

    Predictions are clipped to [eps, 1-eps] for the log only; the gradient
    is the exact derivative w.r.t. the pre-sigmoid logits away from the
    clip.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    n = pred.size
    p = np.clip(pred, LOSS_EPS, 1.0 - LOSS_EPS)
    loss = -np.mean(w_pos * target * np.log(p) + w_neg * (1.0 - target) * np.log(1.0 - p))
    grad_logits = (w_neg * (1.0 - target) * pred - w_pos * target * (1.0 - pred)) / n
    return float(loss), grad_logits


def class_balanced_loss(pred, target):
    """Inverse-frequency-weighted binary cross-entropy over a batch.

    Weights w_pos = N/(2*N_pos) and w_neg = N/(2*N_neg) are computed per
    batch, so a balanced batch reduces to plain BCE and a batch missing
    one class falls back to weight 1 for the absent class. Returns
    (loss, grad_logits).
    """
    target = np.asarray(target, dtype=np.float64)
    n = target.size
    n_pos = float(target.sum())
    n_neg = n - n_pos
    w_pos = n / (2.0 * n_pos) if n_pos > 0 else 1.0
    w_neg = n / (2.0 * n_neg) if n_neg > 0 else 1.0
    return weighted_bce(pred, target, w_pos, w_neg)


@dataclass(frozen=True)
class MacCount:
    """Analytic multiply-accumulate count of one forward pass."""

    per_layer: dict = field(repr=False)
    total: int = 0
    encoder: int = 0


def conv_macs(h, w, c_in, c_out, ksize):
    """MACs of one conv layer: one multiply per (output pixel, c_in, tap)."""
    return h * w * c_out * c_in * ksize * ksize


def count_macs(spec, use_inception):
    """Closed-form MAC count per image; pooling/upsampling cost no multiplies.

    use_inception False prices every encoder level as the plain block (two
    3x3 convs), which is the baseline the inception variant is compared
    against.
    """
    spec.validate()
    effective = spec if use_inception else NetworkSpec(
        spec.input_size, spec.depth, spec.base_channels, ()
    )
    per_layer = {}
    size = spec.input_size
    c_prev = 1
    for lvl in range(1, spec.depth + 1):
        c = spec.level_channels(lvl)
        if lvl in effective.inception_levels:
            w1, w2, w3, w4 = split_branch_widths(c)
            r2 = max(1, w2 // 2)
            r3 = max(1, w3 // 2)
            per_layer[f"enc{lvl}.b1"] = conv_macs(size, size, c_prev, w1, 1)
            per_layer[f"enc{lvl}.b2r"] = conv_macs(size, size, c_prev, r2, 1)
            per_layer[f"enc{lvl}.b2"] = conv_macs(size, size, r2, w2, 3)
            per_layer[f"enc{lvl}.b3r"] = conv_macs(size, size, c_prev, r3, 1)
            per_layer[f"enc{lvl}.b3"] = conv_macs(size, size, r3, w3, 5)
            per_layer[f"enc{lvl}.b4"] = conv_macs(size, size, c_prev, w4, 1)
        else:
            per_layer[f"enc{lvl}.conv1"] = conv_macs(size, size, c_prev, c, 3)
            per_layer[f"enc{lvl}.conv2"] = conv_macs(size, size, c, c, 3)
        c_prev = c
        size //= 2

    per_layer["bott"] = conv_macs(size, size, c_prev, spec.bottleneck_channels, 3)

    c_prev = spec.bottleneck_channels
    for lvl in range(spec.depth, 0, -1):
        size *= 2
        c = spec.level_channels(lvl)
        per_layer[f"dec{lvl}.up"] = conv_macs(size, size, c_prev, c, 1)
        per_layer[f"dec{lvl}.merge"] = conv_macs(size, size, 2 * c, c, 3)
        c_prev = c

    per_layer["out"] = conv_macs(spec.input_size, spec.input_size, c_prev, 1, 1)

    encoder = sum(v for k, v in per_layer.items() if k.startswith("enc"))
    return MacCount(per_layer=per_layer, total=sum(per_layer.values()), encoder=encoder)
