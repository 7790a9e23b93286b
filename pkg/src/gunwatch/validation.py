"""Input validation helpers shared across the package.

Image conventions: grayscale images are 2-D uint8 arrays (H, W); RGB images
are 3-D uint8 arrays (H, W, 3); binary images are grayscale images whose
pixels are restricted to {0, 255}. Tensors are float64 arrays.
"""

import numpy as np


def check_gray_image(img, name="image"):
    """Validate and return a (H, W) uint8 grayscale image."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (H, W), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must be integer-valued, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"{name} values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_rgb_image(img, name="image"):
    """Validate and return a (H, W, 3) uint8 RGB image."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must be 3-D (H, W, 3), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} must be integer-valued, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"{name} values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_binary_image(img, name="image"):
    """Validate and return a (H, W) uint8 image with values in {0, 255}."""
    arr = check_gray_image(img, name)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        raise ValueError(f"{name} must contain only 0 and 255")
    return arr


def check_same_shape(a, b, name_a="a", name_b="b"):
    if a.shape != b.shape:
        raise ValueError(
            f"{name_a} and {name_b} must have identical shapes, "
            f"got {a.shape} vs {b.shape}"
        )


def check_finite(arr, name="tensor"):
    """Raise if arr contains NaN or Inf; returns arr unchanged."""
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"{name} contains non-finite values")
    return arr


def as_tensor(x, name="tensor"):
    """Coerce to a float64 array without copying when already float64."""
    arr = np.asarray(x, dtype=np.float64)
    return check_finite(arr, name)


def check_labels(y, num_classes, name="labels"):
    """Validate integer class labels in [0, num_classes)."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be integers, got dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        raise ValueError(
            f"{name} must lie in [0, {num_classes}), got range "
            f"[{arr.min()}, {arr.max()}]"
        )
    return arr.astype(np.int64)
