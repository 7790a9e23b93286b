"""Synthetic datasets and frame sequences, plus labeled-folder ingestion.

Real handgun imagery is not redistributable, so classification tasks run
on parametric shape families rendered at desk scale: each class is one
family (bar, cross, L, disk, ring, corner, T, U, X, Z) drawn with random
position, scale and rotation plus clamped Gaussian pixel noise. Motion
tests use a striped square translating over a black background with
per-frame ground-truth boxes.

All generation is bit-deterministic per seed; classes draw from derived
child streams so they can be generated independently.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .images import BBox, encode_pnm, read_pnm, write_pnm
from .rng import Rng
from .validation import check_gray_image

FAMILY_NAMES = ("bar", "cross", "ell", "disk", "ring", "corner", "tee", "u", "x", "zee")


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int
    samples_per_class: int
    size: int = 32
    noise_std: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.num_classes <= len(FAMILY_NAMES):
            raise ValueError(
                f"num_classes must be in [2, {len(FAMILY_NAMES)}], got {self.num_classes}"
            )
        if self.samples_per_class < 1:
            raise ValueError(f"samples_per_class must be >= 1, got {self.samples_per_class}")
        if self.size < 8:
            raise ValueError(f"size must be >= 8, got {self.size}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


@dataclass(frozen=True)
class LabeledSample:
    image: np.ndarray
    class_index: int
    class_name: str


def _family_mask(family, u, v, t):
    """Indicator of one shape family in canonical [-1, 1] coordinates."""
    e = 0.9  # shape extent within the canonical square
    inside = (np.abs(u) <= e) & (np.abs(v) <= e)
    if family == "bar":
        return inside & (np.abs(v) <= t)
    if family == "cross":
        return inside & ((np.abs(u) <= t) | (np.abs(v) <= t))
    if family == "ell":
        return inside & ((u <= -e + 2 * t) | (v >= e - 2 * t))
    if family == "disk":
        return u * u + v * v <= 0.72**2
    if family == "ring":
        r2 = u * u + v * v
        return (r2 <= 0.8**2) & (r2 >= (0.8 - 2 * t) ** 2)
    if family == "corner":
        # top + right arms: a mirrored L, far from "ell" under small jitter
        return inside & ((u >= e - 2 * t) | (v <= -e + 2 * t))
    if family == "tee":
        return inside & ((v <= -e + 2 * t) | (np.abs(u) <= t))
    if family == "u":
        return inside & ((u <= -e + 2 * t) | (u >= e - 2 * t) | (v >= e - 2 * t))
    if family == "x":
        s2 = np.sqrt(2.0)
        return inside & ((np.abs(u - v) <= t * s2) | (np.abs(u + v) <= t * s2))
    if family == "zee":
        diag = np.abs(u + v) <= t * np.sqrt(2.0)
        return inside & ((v <= -e + 2 * t) | (v >= e - 2 * t) | diag)
    raise ValueError(f"unknown family {family!r}")


def render_shape(family, size, rng, noise_std=0.0):
    """One (size, size) uint8 image of a family with random pose."""
    cx = size / 2.0 + (rng.uniform() - 0.5) * 0.12 * size
    cy = size / 2.0 + (rng.uniform() - 0.5) * 0.12 * size
    scale = (0.32 + 0.06 * rng.uniform()) * size
    theta = (rng.uniform() - 0.5) * (np.pi / 9.0)  # +/- 10 degrees
    t = 0.16 + 0.08 * rng.uniform()
    yy, xx = np.mgrid[0:size, 0:size]
    px = (xx + 0.5 - cx) / scale
    py = (yy + 0.5 - cy) / scale
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    u = cos_t * px + sin_t * py
    v = -sin_t * px + cos_t * py
    img = np.where(_family_mask(family, u, v, t), 255.0, 0.0)
    if noise_std > 0:
        img = img + rng.normal((size, size)) * noise_std
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def generate_samples(spec):
    """In-memory LabeledSample list for a DatasetSpec, grouped by class."""
    root = Rng(spec.seed)
    samples = []
    for cls in range(spec.num_classes):
        rng = root.derive(cls)
        name = FAMILY_NAMES[cls]
        for _ in range(spec.samples_per_class):
            img = render_shape(name, spec.size, rng, spec.noise_std)
            samples.append(LabeledSample(image=img, class_index=cls, class_name=name))
    return samples


def generate_binary_samples(spec, positive_class=3):
    """Binary task: one designated family vs. a mix of the others.

    Label 1 ("handgun") is the designated family, label 0 ("background")
    cycles through the remaining families. Sample counts follow
    spec.samples_per_class for each side.
    """
    if not 0 <= positive_class < spec.num_classes:
        raise ValueError(f"positive_class must name one of the {spec.num_classes} classes")
    root = Rng(spec.seed)
    samples = []
    pos_rng = root.derive(1000 + positive_class)
    pos_name = FAMILY_NAMES[positive_class]
    for _ in range(spec.samples_per_class):
        img = render_shape(pos_name, spec.size, pos_rng, spec.noise_std)
        samples.append(LabeledSample(image=img, class_index=1, class_name="handgun"))
    negatives = [i for i in range(spec.num_classes) if i != positive_class]
    neg_rng = root.derive(2000)
    for k in range(spec.samples_per_class):
        fam = FAMILY_NAMES[negatives[k % len(negatives)]]
        img = render_shape(fam, spec.size, neg_rng, spec.noise_std)
        samples.append(LabeledSample(image=img, class_index=0, class_name="background"))
    return samples


def samples_to_arrays(samples):
    """(X, y) arrays: X is (N, 1, S, S) float64 scaled to [0, 1]."""
    if not samples:
        raise ValueError("no samples given")
    X = np.stack([s.image for s in samples]).astype(np.float64) / 255.0
    return X[:, None, :, :], np.array([s.class_index for s in samples], dtype=np.int64)


def write_samples(samples, out_dir):
    """Write samples as class-subfolder PGMs plus a manifest CSV.

    Returns the manifest path; the manifest has header
    path,class_index,class_name and relative file paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    counters = {}
    with open(manifest_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "class_index", "class_name"])
        for s in samples:
            n = counters.get(s.class_name, 0)
            counters[s.class_name] = n + 1
            rel = os.path.join(s.class_name, f"{n:04d}.pgm")
            path = os.path.join(out_dir, rel)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            write_pnm(path, s.image)
            writer.writerow([rel, s.class_index, s.class_name])
    return manifest_path


def gen_shapes_dataset(spec, out_dir):
    """Render the multi-class shape dataset to disk; returns manifest path."""
    return write_samples(generate_samples(spec), out_dir)


def gen_binary_dataset(spec, out_dir, positive_class=3):
    """Render the binary handgun/background dataset to disk."""
    return write_samples(generate_binary_samples(spec, positive_class), out_dir)


def load_labeled_dir(directory):
    """Read class-subfolder PGMs back into LabeledSamples.

    Ordering is deterministic: class names lexicographic, then file
    names lexicographic. All images must share one size.
    """
    if not os.path.isdir(directory):
        raise ValueError(f"not a directory: {directory}")
    class_names = sorted(
        d for d in os.listdir(directory) if os.path.isdir(os.path.join(directory, d))
    )
    samples = []
    shape = None
    for idx, name in enumerate(class_names):
        class_dir = os.path.join(directory, name)
        files = sorted(f for f in os.listdir(class_dir) if f.endswith(".pgm"))
        for fname in files:
            path = os.path.join(class_dir, fname)
            try:
                img = read_pnm(path)
            except (OSError, ValueError) as e:
                raise ValueError(f"unreadable image {path}: {e}") from None
            if img.ndim != 2:
                raise ValueError(f"expected grayscale PGM, got color image: {path}")
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise ValueError(
                    f"inconsistent image size {img.shape[1]}x{img.shape[0]} "
                    f"(expected {shape[1]}x{shape[0]}): {path}"
                )
            samples.append(LabeledSample(image=img, class_index=idx, class_name=name))
    if not samples:
        raise ValueError(f"no class subfolders with .pgm files under {directory}")
    return samples


# ---------------------------------------------------------------------------
# Motion sequences
# ---------------------------------------------------------------------------


@dataclass
class MotionSequence:
    frames: list
    boxes: list  # ground-truth BBox per frame


def _striped_square(size, velocity):
    """The moving object: vertical stripes rigidly attached to it.

    Stripe width equals the per-frame displacement (period twice that),
    so a shift by one velocity step flips every stripe and every covered
    pixel changes between consecutive frames; a uniform square would
    leave the double-difference empty whenever velocity < size.
    """
    stripe = max(1, abs(int(velocity)))
    cols = np.arange(size) // stripe % 2
    # full-contrast tones keep every stripe transition above the motion
    # threshold even after box blurring; pattern starts bright so the
    # trailing edge always registers in the pair differences
    tones = np.where(cols == 0, 255, 0).astype(np.uint8)
    return np.tile(tones, (size, 1))


def gen_motion_sequence(
    n_frames,
    object_size,
    velocity,
    noise_std=0.0,
    seed=0,
    out_dir=None,
    frame_size=(64, 64),
):
    """Frames of a bright striped square translating over black.

    The square moves `velocity` pixels per frame along x. Raises if the
    trajectory would leave the frame. When out_dir is given, writes
    frame_000001.pgm ... and a truth.csv manifest of per-frame boxes.
    """
    n_frames = int(n_frames)
    object_size = int(object_size)
    velocity = int(velocity)
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if object_size < 1:
        raise ValueError(f"object_size must be >= 1, got {object_size}")
    h, w = int(frame_size[0]), int(frame_size[1])
    margin = 2
    travel = velocity * (n_frames - 1)
    x0 = margin if velocity >= 0 else w - margin - object_size
    if x0 < 0 or not (0 <= x0 + travel and x0 + travel + object_size <= w):
        raise ValueError(
            f"trajectory escapes frame: start {x0}, travel {travel}, "
            f"object {object_size}, width {w}"
        )
    y0 = (h - object_size) // 2
    if y0 < 0 or y0 + object_size > h:
        raise ValueError(f"object_size {object_size} too tall for frame height {h}")
    rng = Rng(seed)
    frames, boxes = [], []
    for i in range(n_frames):
        x = x0 + velocity * i
        frame = np.zeros((h, w), dtype=np.float64)
        frame[y0 : y0 + object_size, x : x + object_size] = _striped_square(
            object_size, velocity
        )
        if noise_std > 0:
            frame = frame + rng.normal((h, w)) * noise_std
        frames.append(np.clip(np.floor(frame + 0.5), 0, 255).astype(np.uint8))
        boxes.append(BBox(x=x, y=y0, w=object_size, h=object_size, area=object_size**2))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for i, frame in enumerate(frames):
            write_pnm(os.path.join(out_dir, f"frame_{i + 1:06d}.pgm"), frame)
        with open(os.path.join(out_dir, "truth.csv"), "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["frame", "x", "y", "w", "h"])
            for i, b in enumerate(boxes):
                writer.writerow([i + 1, b.x, b.y, b.w, b.h])
    return MotionSequence(frames=frames, boxes=boxes)
