"""Image primitives for the motion stage.

Grayscale images are (H, W) uint8 arrays, RGB images (H, W, 3) uint8,
binary images (H, W) uint8 restricted to {0, 255}. File I/O is binary
PGM (P5) / PPM (P6) with maxval 255 only: dependency-free and bit-exact
under round trip.
"""

from dataclasses import dataclass

import numpy as np

from .validation import (
    check_binary_image,
    check_gray_image,
    check_rgb_image,
    check_same_shape,
)


class PnmError(ValueError):
    """Malformed PGM/PPM data; message names the byte offset."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle of a connected component.

    `area` counts the component's foreground pixels, which can be less
    than w * h for non-rectangular blobs.
    """

    x: int
    y: int
    w: int
    h: int
    area: int


# ---------------------------------------------------------------------------
# PGM / PPM codec
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _next_token(data, pos):
    """Skip whitespace/comments, return (token, next_pos)."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in b"\r\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    if pos >= n:
        raise PnmError(f"unexpected end of header at offset {pos}")
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], pos


def decode_pnm(data):
    """Decode binary PGM (P5) or PPM (P6) bytes into a uint8 array.

    Returns (H, W) for P5 and (H, W, 3) for P6. Only maxval 255 is
    accepted; comment lines are skipped.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise PnmError("expected a byte sequence")
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise PnmError(f"bad magic {magic!r} at offset 0 (want P5 or P6)")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise PnmError(f"non-numeric {name} {tok!r} at offset {pos - len(tok)}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PnmError(f"bad dimensions {width}x{height} in header (offset {pos})")
    if maxval != 255:
        raise PnmError(f"unsupported maxval {maxval} at offset {pos - len(str(maxval))}")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PnmError(f"missing whitespace before payload at offset {pos}")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise PnmError(
            f"truncated payload at offset {pos + len(payload)}: "
            f"expected {expected} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, 3).copy()


def encode_pnm(img):
    """Encode a grayscale or RGB uint8 array as binary PGM/PPM bytes.

    Canonical header layout so that encode is deterministic and
    decode(encode(x)) == x bit-exactly.
    """
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = check_gray_image(arr)
        magic = b"P5"
    elif arr.ndim == 3:
        arr = check_rgb_image(arr)
        magic = b"P6"
    else:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")
    h, w = arr.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (w, h)
    return header + arr.tobytes()


def read_pnm(path):
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def write_pnm(path, img):
    with open(path, "wb") as f:
        f.write(encode_pnm(img))


# ---------------------------------------------------------------------------
# Point and neighborhood operations
# ---------------------------------------------------------------------------


def to_grayscale(img):
    """BT.601 luminance: round(0.299 R + 0.587 G + 0.114 B).

    Integer arithmetic (half-up rounding) keeps the result identical on
    every platform.
    """
    arr = check_rgb_image(img).astype(np.int64)
    weighted = 299 * arr[:, :, 0] + 587 * arr[:, :, 1] + 114 * arr[:, :, 2]
    return ((weighted + 500) // 1000).astype(np.uint8)


def box_blur(img, radius):
    """Mean filter over a (2r+1)x(2r+1) window with edge replication.

    Window sums are exact integers; the mean is rounded to nearest
    (halves cannot occur because the window size is odd).
    """
    arr = check_gray_image(img)
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return arr.copy()
    k = 2 * radius + 1
    padded = np.pad(arr, radius, mode="edge").astype(np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    sums = windows.sum(axis=(-1, -2))
    n = k * k
    return ((sums + n // 2) // n).astype(np.uint8)


def abs_diff(a, b):
    """Per-pixel absolute difference of two same-size grayscale images."""
    a = check_gray_image(a, "a")
    b = check_gray_image(b, "b")
    check_same_shape(a, b, "a", "b")
    return np.abs(a.astype(np.int16) - b.astype(np.int16)).astype(np.uint8)


def binarize(img, threshold):
    """Pixels strictly above threshold become 255, the rest 0."""
    arr = check_gray_image(img)
    t = int(threshold)
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return np.where(arr > t, 255, 0).astype(np.uint8)


def triple_diff(prev, cur, nxt, threshold):
    """Double-differencing motion mask from three consecutive frames.

    Thresholds the absolute differences of both adjacent pairs and ANDs
    them, which suppresses static background and keeps only pixels that
    changed on both sides of the middle frame.
    """
    prev = check_gray_image(prev, "prev")
    cur = check_gray_image(cur, "cur")
    nxt = check_gray_image(nxt, "next")
    check_same_shape(prev, cur, "prev", "cur")
    check_same_shape(cur, nxt, "cur", "next")
    d1 = binarize(abs_diff(nxt, cur), threshold)
    d2 = binarize(abs_diff(cur, prev), threshold)
    return d1 & d2


# ---------------------------------------------------------------------------
# Connected components (8-connectivity, two-pass union-find)
# ---------------------------------------------------------------------------


def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        parent[i], i = root, parent[i]
    return root


def connected_components(img, min_area=1):
    """Bounding boxes of 8-connected foreground components.

    Returns one BBox per component with area >= min_area, sorted by
    descending area, ties broken by (y, x) ascending.
    """
    arr = check_binary_image(img)
    h, w = arr.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = [0]
    next_label = 1
    for y in range(h):
        row = arr[y]
        for x in range(w):
            if row[x] == 0:
                continue
            neighbors = []
            if x > 0 and labels[y, x - 1]:
                neighbors.append(labels[y, x - 1])
            if y > 0:
                up = labels[y - 1]
                if x > 0 and up[x - 1]:
                    neighbors.append(up[x - 1])
                if up[x]:
                    neighbors.append(up[x])
                if x + 1 < w and up[x + 1]:
                    neighbors.append(up[x + 1])
            if not neighbors:
                labels[y, x] = next_label
                parent.append(next_label)
                next_label += 1
            else:
                roots = [_find(parent, int(n)) for n in neighbors]
                target = min(roots)
                labels[y, x] = target
                for r in roots:
                    if r != target:
                        parent[r] = target
    # second pass: accumulate extents per root
    stats = {}  # root -> [min_x, min_y, max_x, max_y, area]
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            root = _find(parent, int(lab))
            s = stats.get(root)
            if s is None:
                stats[root] = [x, y, x, y, 1]
            else:
                if x < s[0]:
                    s[0] = x
                elif x > s[2]:
                    s[2] = x
                if y < s[1]:
                    s[1] = y
                elif y > s[3]:
                    s[3] = y
                s[4] += 1
    boxes = [
        BBox(x=s[0], y=s[1], w=s[2] - s[0] + 1, h=s[3] - s[1] + 1, area=s[4])
        for s in stats.values()
        if s[4] >= min_area
    ]
    boxes.sort(key=lambda b: (-b.area, b.y, b.x))
    return boxes


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def resize_gray(img, out_w, out_h, method="bilinear"):
    """Resample a grayscale image to (out_h, out_w).

    Uses half-pixel-center sampling with clamped borders; bilinear by
    default, nearest-neighbor behind a flag for exact-value tests.
    """
    arr = check_gray_image(img)
    out_w, out_h = int(out_w), int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be >= 1, got {out_w}x{out_h}")
    in_h, in_w = arr.shape
    if (in_h, in_w) == (out_h, out_w):
        return arr.copy()
    sx = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    sy = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    if method == "nearest":
        ix = np.clip(np.floor(sx + 0.5).astype(np.int64), 0, in_w - 1)
        iy = np.clip(np.floor(sy + 0.5).astype(np.int64), 0, in_h - 1)
        return arr[np.ix_(iy, ix)].copy()
    if method != "bilinear":
        raise ValueError(f"unknown method {method!r}")
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, in_w - 1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)
    a = arr.astype(np.float64)
    top = a[np.ix_(y0, x0)] * (1 - fx) + a[np.ix_(y0, x1)] * fx
    bot = a[np.ix_(y1, x0)] * (1 - fx) + a[np.ix_(y1, x1)] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def roi_resize(img, box, out_w, out_h, method="bilinear"):
    """Crop `box` from the image and resample it to (out_h, out_w)."""
    arr = check_gray_image(img)
    h, w = arr.shape
    if box.x < 0 or box.y < 0 or box.x + box.w > w or box.y + box.h > h:
        raise ValueError(
            f"box (x={box.x}, y={box.y}, w={box.w}, h={box.h}) "
            f"out of bounds for {w}x{h} image"
        )
    crop = arr[box.y : box.y + box.h, box.x : box.x + box.w]
    return resize_gray(crop, out_w, out_h, method=method)
