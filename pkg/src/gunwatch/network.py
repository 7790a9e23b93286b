"""Network container: layer specs, parameters, training buffers.

A Network is an ordered list of layer specs plus, for conv2d and dense
layers, weight/bias tensors with matching gradient and momentum buffers
and a per-layer trainable flag. Layer shape compatibility is validated
when the network is built, so forward passes cannot shape-fail later.
"""

import copy as _copy
from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .rng import Rng

LAYER_KINDS = ("conv2d", "relu", "maxpool2x2", "flatten", "dense", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    in_features: int = 0
    out_features: int = 0

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "conv2d":
            d["in_channels"] = self.in_channels
            d["out_channels"] = self.out_channels
        elif self.kind == "dense":
            d["in_features"] = self.in_features
            d["out_features"] = self.out_features
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        return cls(
            kind=kind,
            in_channels=d.get("in_channels", 0),
            out_channels=d.get("out_channels", 0),
            in_features=d.get("in_features", 0),
            out_features=d.get("out_features", 0),
        )


def conv2d(in_channels, out_channels):
    return LayerSpec("conv2d", in_channels=in_channels, out_channels=out_channels)


def relu():
    return LayerSpec("relu")


def maxpool2x2():
    return LayerSpec("maxpool2x2")


def flatten():
    return LayerSpec("flatten")


def dense(in_features, out_features):
    return LayerSpec("dense", in_features=in_features, out_features=out_features)


def softmax_layer():
    return LayerSpec("softmax")


def infer_shapes(specs, input_shape):
    """Per-layer output shapes; raises on any incompatibility."""
    shapes = []
    cur = tuple(int(d) for d in input_shape)
    for i, spec in enumerate(specs):
        kind = spec.kind
        if kind == "conv2d":
            if len(cur) != 3:
                raise ValueError(f"layer {i} (conv2d) needs (C, H, W) input, got {cur}")
            c, h, w = cur
            if c != spec.in_channels:
                raise ValueError(
                    f"layer {i} (conv2d) expects {spec.in_channels} channels, got {c}"
                )
            cur = (spec.out_channels, h, w)
        elif kind == "relu":
            pass
        elif kind == "maxpool2x2":
            if len(cur) != 3:
                raise ValueError(f"layer {i} (maxpool2x2) needs (C, H, W) input, got {cur}")
            c, h, w = cur
            if h % 2 or w % 2:
                raise ValueError(f"layer {i} (maxpool2x2) needs even H, W, got {h}x{w}")
            cur = (c, h // 2, w // 2)
        elif kind == "flatten":
            cur = (int(np.prod(cur)),)
        elif kind == "dense":
            if len(cur) != 1:
                raise ValueError(f"layer {i} (dense) needs flat input, got {cur}")
            if cur[0] != spec.in_features:
                raise ValueError(
                    f"layer {i} (dense) expects {spec.in_features} features, got {cur[0]}"
                )
            cur = (spec.out_features,)
        elif kind == "softmax":
            if len(cur) != 1:
                raise ValueError(f"layer {i} (softmax) needs flat input, got {cur}")
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        shapes.append(cur)
    return shapes


class Network:
    """Layer specs + parameters + gradient/momentum buffers.

    Weights use He-normal initialization (std sqrt(2/fan_in)), biases
    start at zero; all draws come from one seeded stream in layer order,
    so two builds with the same seed are bitwise identical.
    """

    def __init__(self, specs, input_shape, seed=0, meta=None, init="he"):
        self.specs = list(specs)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.shapes = infer_shapes(self.specs, self.input_shape)
        self.meta = dict(meta) if meta else {}
        self.params = []
        self.grads = []
        self.momentum = []
        self.trainable = [True] * len(self.specs)
        if init not in ("he", "zeros"):
            raise ValueError(f"init must be 'he' or 'zeros', got {init!r}")
        rng = Rng(seed)
        for spec in self.specs:
            if spec.kind == "conv2d":
                shape_w = (spec.out_channels, spec.in_channels, L.KERNEL, L.KERNEL)
                fan_in = spec.in_channels * L.KERNEL * L.KERNEL
                if init == "he":
                    w = rng.normal(shape_w) * np.sqrt(2.0 / fan_in)
                else:
                    w = np.zeros(shape_w)
                b = np.zeros(spec.out_channels)
            elif spec.kind == "dense":
                shape_w = (spec.out_features, spec.in_features)
                if init == "he":
                    w = rng.normal(shape_w) * np.sqrt(2.0 / spec.in_features)
                else:
                    w = np.zeros(shape_w)
                b = np.zeros(spec.out_features)
            else:
                self.params.append(None)
                self.grads.append(None)
                self.momentum.append(None)
                continue
            self.params.append({"w": w, "b": b})
            self.grads.append({"w": np.zeros_like(w), "b": np.zeros_like(b)})
            self.momentum.append({"w": np.zeros_like(w), "b": np.zeros_like(b)})

    # -- introspection ------------------------------------------------------

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def num_classes(self):
        return int(self.output_shape[0])

    def parameterized_indices(self):
        return [i for i, p in enumerate(self.params) if p is not None]

    def num_params(self):
        return sum(
            p["w"].size + p["b"].size for p in self.params if p is not None
        )

    def copy(self):
        return _copy.deepcopy(self)

    # -- passes -------------------------------------------------------------

    def _check_input(self, x):
        arr = np.asarray(x, dtype=np.float64)
        nd = len(self.input_shape)
        if arr.shape == self.input_shape:
            return arr[None], False
        if arr.ndim == nd + 1 and arr.shape[1:] == self.input_shape:
            return arr, True
        raise ValueError(
            f"input shape {arr.shape} does not match network input {self.input_shape}"
        )

    def forward(self, x):
        """Class probabilities for one sample or a batch."""
        xb, had_batch = self._check_input(x)
        out, _, _ = self._forward_collect(xb)
        return out if had_batch else out[0]

    def _forward_collect(self, xb):
        """Batched forward keeping per-layer inputs for backprop."""
        acts = []
        aux = []
        cur = xb
        for spec, p in zip(self.specs, self.params):
            acts.append(cur)
            kind = spec.kind
            if kind == "conv2d":
                cur = L.conv2d_forward(cur, p["w"], p["b"])
                aux.append(None)
            elif kind == "relu":
                cur = L.relu_forward(cur)
                aux.append(None)
            elif kind == "maxpool2x2":
                cur, arg = L.maxpool2x2_forward(cur)
                aux.append(arg)
            elif kind == "flatten":
                cur = cur.reshape(cur.shape[0], -1)
                aux.append(None)
            elif kind == "dense":
                cur = L.dense_forward(cur, p["w"], p["b"])
                aux.append(None)
            elif kind == "softmax":
                cur = L.softmax(cur)
                aux.append(None)
        return cur, acts, aux

    def backward_from_logits(self, grad_logits, acts, aux):
        """Backpropagate a gradient taken at the final dense layer's output.

        The network must end with a softmax layer; callers obtain
        grad_logits from cross_entropy, which already folds the softmax
        Jacobian in.
        """
        if not self.specs or self.specs[-1].kind != "softmax":
            raise ValueError("network must end with a softmax layer")
        g = np.asarray(grad_logits, dtype=np.float64)
        for i in range(len(self.specs) - 2, -1, -1):
            spec, p = self.specs[i], self.params[i]
            kind = spec.kind
            if kind == "dense":
                g, dw, db = L.dense_backward(acts[i], p["w"], g)
                self.grads[i]["w"] = dw
                self.grads[i]["b"] = db
            elif kind == "relu":
                g = L.relu_backward(acts[i], g)
            elif kind == "flatten":
                g = g.reshape(acts[i].shape)
            elif kind == "maxpool2x2":
                g = L.maxpool2x2_backward(g, aux[i])
            elif kind == "conv2d":
                g, dw, db = L.conv2d_backward(acts[i], p["w"], g)
                self.grads[i]["w"] = dw
                self.grads[i]["b"] = db
        return g


def loss_and_grads(net, x, labels):
    """Mean cross-entropy for (x, labels); fills net.grads. Returns loss."""
    if not net.specs or net.specs[-1].kind != "softmax":
        raise ValueError("network must end with a softmax layer")
    xb, _ = net._check_input(x)
    labs = np.atleast_1d(np.asarray(labels))
    probs, acts, aux = net._forward_collect(xb)
    loss, grad_logits = L.cross_entropy(probs, labs)
    net.backward_from_logits(grad_logits, acts, aux)
    return loss


def sgd_step(net, lr, momentum=0.0):
    """Momentum SGD update of every trainable parameterized layer.

    v <- momentum * v + grad; param <- param - lr * v. Frozen layers
    (and their momentum buffers) are left bitwise untouched.
    """
    if lr < 0:
        raise ValueError(f"lr must be >= 0, got {lr}")
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for i in net.parameterized_indices():
        if not net.trainable[i]:
            continue
        for key in net.params[i]:
            v = net.momentum[i][key]
            v *= momentum
            v += net.grads[i][key]
            net.params[i][key] -= lr * v


def grad_check(net, x, label, eps=1e-5):
    """Worst relative disagreement between backprop and central differences.

    Runs two forward passes per parameter, so only use on small
    networks. Relative error is |a - b| / max(|a|, |b|, 1e-8).
    """
    loss_and_grads(net, x, np.asarray([label]) if np.ndim(label) == 0 else label)
    analytic = [
        {k: v.copy() for k, v in g.items()} if g is not None else None
        for g in net.grads
    ]

    def loss_only():
        probs = net.forward(x)
        p = probs if probs.ndim == 1 else probs[0]
        return -float(np.log(p[int(label)]))

    worst = 0.0
    for i in net.parameterized_indices():
        for key in net.params[i]:
            p = net.params[i][key]
            flat = p.reshape(-1)
            ga = analytic[i][key].reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + eps
                lp = loss_only()
                flat[j] = orig - eps
                lm = loss_only()
                flat[j] = orig
                numeric = (lp - lm) / (2.0 * eps)
                denom = max(abs(numeric), abs(ga[j]), 1e-8)
                err = abs(numeric - ga[j]) / denom
                if err > worst:
                    worst = err
    return worst
