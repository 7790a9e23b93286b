"""Builders for the detection CNN and the transfer-learning backbone.

The main architecture is a fixed stack of five 3x3 convolutions (32, 32,
64, 64, 64 filters), max pooling after the second and fifth, and three
fully connected layers (1024, 1024, num_classes) behind a softmax. On a
32x32 input the feature maps run 32x32x32 -> 16x16x32 -> 8x8x64 and the
flattened vector has 4096 features.
"""

from dataclasses import dataclass

import numpy as np

from . import network as nn
from .validation import check_finite

CONV_WIDTHS = (32, 32, 64, 64, 64)
DENSE_WIDTH = 1024


@dataclass(frozen=True)
class Prediction:
    class_index: int
    probs: np.ndarray
    prob: float


def _scaled(width, scale):
    return max(1, round(width * scale))


def build_paper_cnn(num_classes, in_channels=1, input_size=32, width_scale=1.0, seed=0):
    """The five-conv/two-pool/three-dense classification network.

    width_scale < 1 shrinks every conv and dense width proportionally
    (layer count and topology unchanged); used for fast gradient checks
    and the desk-scale backbone. input_size must be divisible by 4.
    """
    num_classes = int(num_classes)
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if in_channels not in (1, 3):
        raise ValueError(f"in_channels must be 1 or 3, got {in_channels}")
    input_size = int(input_size)
    if input_size < 4 or input_size % 4:
        raise ValueError(f"input_size must be a positive multiple of 4, got {input_size}")
    c1, c2, c3, c4, c5 = (_scaled(w, width_scale) for w in CONV_WIDTHS)
    dw = _scaled(DENSE_WIDTH, width_scale)
    flat = c5 * (input_size // 4) ** 2
    specs = [
        nn.conv2d(in_channels, c1),
        nn.relu(),
        nn.conv2d(c1, c2),
        nn.relu(),
        nn.maxpool2x2(),
        nn.conv2d(c2, c3),
        nn.relu(),
        nn.conv2d(c3, c4),
        nn.relu(),
        nn.conv2d(c4, c5),
        nn.relu(),
        nn.maxpool2x2(),
        nn.flatten(),
        nn.dense(flat, dw),
        nn.relu(),
        nn.dense(dw, dw),
        nn.relu(),
        nn.dense(dw, num_classes),
        nn.softmax_layer(),
    ]
    meta = {
        "architecture": "paper_cnn",
        "num_classes": num_classes,
        "in_channels": in_channels,
        "input_size": input_size,
        "width_scale": width_scale,
        "seed": int(seed),
        "epochs_trained": 0,
        "class_names": None,
    }
    return nn.Network(specs, (in_channels, input_size, input_size), seed=seed, meta=meta)


def build_mini_backbone(num_classes, seed=0, width_scale=0.25):
    """Desk-scale pretrainable backbone: same topology at quarter width.

    Serves as the pretrained donor in transfer experiments, where a
    full-width network would waste hours for no extra signal.
    """
    net = build_paper_cnn(
        num_classes, in_channels=1, input_size=32, width_scale=width_scale, seed=seed
    )
    net.meta["architecture"] = "mini_backbone"
    return net


def paper_cnn_param_count(num_classes, in_channels=1, input_size=32):
    """Closed-form parameter count of the full-width network."""
    c = (in_channels,) + CONV_WIDTHS
    total = sum(c[i + 1] * c[i] * 9 + c[i + 1] for i in range(5))
    flat = CONV_WIDTHS[-1] * (input_size // 4) ** 2
    total += DENSE_WIDTH * flat + DENSE_WIDTH
    total += DENSE_WIDTH * DENSE_WIDTH + DENSE_WIDTH
    total += num_classes * DENSE_WIDTH + num_classes
    return total


def predict(net, patch):
    """Forward one input (pixel values pre-scaled to [0, 1]) to a Prediction."""
    arr = np.asarray(patch, dtype=np.float64)
    if arr.shape != net.input_shape:
        raise ValueError(
            f"patch shape {arr.shape} does not match network input {net.input_shape}"
        )
    probs = net.forward(arr)
    check_finite(probs, "probabilities")
    idx = int(np.argmax(probs))
    return Prediction(class_index=idx, probs=probs, prob=float(probs[idx]))
