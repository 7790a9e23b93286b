"""Forward and backward passes for every layer kind in the CNN engine.

All math is float64. Functions accept either a single sample (conv/pool:
(C, H, W); dense: (F,)) or a batch with a leading N axis, and are pure:
backward passes take the forward inputs explicitly instead of a cache.

Convolution is cross-correlation (no kernel flip) with a fixed 3x3
kernel, stride 1 and zero same-padding, implemented as im2col plus one
matrix multiply so BLAS does the heavy lifting.
"""

import numpy as np

KERNEL = 3
PAD = 1


def _as_batch(x, ndim):
    """Add a leading batch axis if absent; returns (array, had_batch)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == ndim:
        return arr[None], False
    if arr.ndim == ndim + 1:
        return arr, True
    raise ValueError(f"expected {ndim}-D or {ndim + 1}-D input, got shape {arr.shape}")


def _im2col(x, k=KERNEL, pad=PAD):
    """(N, C, H, W) -> (N*H*W, C*k*k) patch matrix, rows in (n, h, w) order."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # win: (N, C, H, W, k, k) -> (N, H, W, C, k, k) contiguous
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * k * k)


def conv2d_forward(x, weights, bias):
    """Same-padded stride-1 cross-correlation plus per-channel bias.

    x: (C, H, W) or (N, C, H, W); weights: (O, C, 3, 3); bias: (O,).
    Output spatial size equals input spatial size.
    """
    xb, had_batch = _as_batch(x, 3)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 4 or w.shape[2:] != (KERNEL, KERNEL):
        raise ValueError(f"weights must be (O, C, 3, 3), got {w.shape}")
    o, c = w.shape[:2]
    if xb.shape[1] != c:
        raise ValueError(f"input has {xb.shape[1]} channels, weights expect {c}")
    if b.shape != (o,):
        raise ValueError(f"bias must be ({o},), got {b.shape}")
    n, _, h, wd = xb.shape
    cols = _im2col(xb)
    out = cols @ w.reshape(o, -1).T + b
    out = out.reshape(n, h, wd, o).transpose(0, 3, 1, 2)
    return out if had_batch else out[0]


def conv2d_backward(x, weights, grad_out):
    """Exact gradients of conv2d_forward.

    Returns (grad_input, grad_weights, grad_bias) with the shapes of
    (x, weights, bias).
    """
    xb, had_batch = _as_batch(x, 3)
    gb, g_batch = _as_batch(grad_out, 3)
    w = np.asarray(weights, dtype=np.float64)
    if had_batch != g_batch or xb.shape[0] != gb.shape[0]:
        raise ValueError("input and grad_out batch shapes disagree")
    o, c = w.shape[:2]
    n, _, h, wd = xb.shape
    if gb.shape != (n, o, h, wd):
        raise ValueError(f"grad_out must be {(n, o, h, wd)}, got {gb.shape}")
    gmat = np.ascontiguousarray(gb.transpose(0, 2, 3, 1)).reshape(n * h * wd, o)
    grad_bias = gmat.sum(axis=0)
    cols = _im2col(xb)
    grad_weights = (cols.T @ gmat).T.reshape(o, c, KERNEL, KERNEL)
    # grad wrt input: correlate grad_out with the 180-degree-rotated kernels
    gcols = _im2col(gb)
    rot = w[:, :, ::-1, ::-1].transpose(0, 2, 3, 1).reshape(o * KERNEL * KERNEL, c)
    grad_input = (gcols @ rot).reshape(n, h, wd, c).transpose(0, 3, 1, 2)
    if not had_batch:
        grad_input = grad_input[0]
    return grad_input, grad_weights, grad_bias


def relu_forward(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, grad_out):
    """Upstream gradient masked where the forward input was <= 0."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    if x.shape != g.shape:
        raise ValueError(f"x and grad_out shapes differ: {x.shape} vs {g.shape}")
    return g * (x > 0.0)


def maxpool2x2_forward(x):
    """Non-overlapping 2x2 max pooling; H and W must be even.

    Returns (pooled, argmax) where argmax holds the row-major index
    (0..3) of the winning element in each window; ties go to the first.
    """
    xb, had_batch = _as_batch(x, 3)
    n, c, h, w = xb.shape
    if h % 2 or w % 2:
        raise ValueError(f"H and W must be even for 2x2 pooling, got {h}x{w}")
    win = xb.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = np.ascontiguousarray(win).reshape(n, c, h // 2, w // 2, 4)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    if not had_batch:
        return out[0], arg[0]
    return out, arg


def maxpool2x2_backward(grad_out, argmax):
    """Route each window's upstream gradient to its stored argmax cell."""
    gb, had_batch = _as_batch(grad_out, 3)
    ab = np.asarray(argmax)
    if not had_batch:
        ab = ab[None]
    if gb.shape != ab.shape:
        raise ValueError(f"grad_out and argmax shapes differ: {gb.shape} vs {ab.shape}")
    n, c, h2, w2 = gb.shape
    scattered = np.zeros((n, c, h2, w2, 4), dtype=np.float64)
    np.put_along_axis(scattered, ab[..., None], gb[..., None], axis=-1)
    out = (
        scattered.reshape(n, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, 2 * h2, 2 * w2)
    )
    return out if had_batch else out[0]


def dense_forward(x, weights, bias):
    """Affine map W x + b; weights are (out_features, in_features)."""
    xb, had_batch = _as_batch(x, 1)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {w.shape}")
    if xb.shape[1] != w.shape[1]:
        raise ValueError(f"input has {xb.shape[1]} features, weights expect {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias must be ({w.shape[0]},), got {b.shape}")
    out = xb @ w.T + b
    return out if had_batch else out[0]


def dense_backward(x, weights, grad_out):
    """Exact gradients of dense_forward: (grad_input, grad_weights, grad_bias)."""
    xb, had_batch = _as_batch(x, 1)
    gb, g_batch = _as_batch(grad_out, 1)
    w = np.asarray(weights, dtype=np.float64)
    if had_batch != g_batch or xb.shape[0] != gb.shape[0]:
        raise ValueError("input and grad_out batch shapes disagree")
    if gb.shape[1] != w.shape[0]:
        raise ValueError(f"grad_out has {gb.shape[1]} features, weights produce {w.shape[0]}")
    grad_input = gb @ w
    grad_weights = gb.T @ xb
    grad_bias = gb.sum(axis=0)
    if not had_batch:
        grad_input = grad_input[0]
    return grad_input, grad_weights, grad_bias


def softmax(logits):
    """Shift-invariant softmax along the last axis; rejects non-finite input."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise FloatingPointError("softmax input contains non-finite values")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label):
    """Negative log-likelihood of softmax probabilities.

    probs: (K,) with an int label, or (N, K) with (N,) labels (loss is
    the batch mean). Returns (loss, grad) where grad is the gradient
    with respect to the *logits* that produced probs, i.e.
    probs - onehot(label), scaled by 1/N for batches.
    """
    p = np.asarray(probs, dtype=np.float64)
    # log(0) yields inf here; the finiteness check below turns it into an error
    with np.errstate(divide="ignore"):
        if p.ndim == 1:
            k = p.shape[0]
            lab = int(label)
            if not 0 <= lab < k:
                raise ValueError(f"label {lab} out of range for {k} classes")
            loss = -np.log(p[lab])
            grad = p.copy()
            grad[lab] -= 1.0
        elif p.ndim == 2:
            n, k = p.shape
            labs = np.asarray(label)
            if labs.shape != (n,):
                raise ValueError(f"labels must be ({n},), got {labs.shape}")
            if labs.min() < 0 or labs.max() >= k:
                raise ValueError(f"labels out of range for {k} classes")
            loss = -np.log(p[np.arange(n), labs]).mean()
            grad = p.copy()
            grad[np.arange(n), labs] -= 1.0
            grad /= n
        else:
            raise ValueError(f"probs must be 1-D or 2-D, got shape {p.shape}")
    if not np.isfinite(loss):
        raise FloatingPointError("cross-entropy loss is non-finite")
    return float(loss), grad
