"""Frame-stream orchestration: motion gate, ROI classification, events.

Frames flow through a three-frame ring; once full, the ring produces a
double-differencing motion mask whose connected components become the
classifier's region proposals. A frame with no surviving blob skips the
classifier entirely. The result for each step refers to the MIDDLE
frame of the ring (motion at time t needs frames t-1, t, t+1), so event
frame indices lag the newest frame by one.

A sliding-window mode scans static images exhaustively at several
scales with greedy overlap suppression.
"""

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .architectures import predict
from .images import (
    BBox,
    box_blur,
    connected_components,
    read_pnm,
    resize_gray,
    roi_resize,
    triple_diff,
)
from .validation import check_gray_image


@dataclass(frozen=True)
class PipelineConfig:
    motion_threshold: int = 25
    blur_radius: int = 1
    min_blob_area: int = 50
    decision_threshold: float = 0.5
    roi_size: int = 32
    mode: str = "region_proposals"
    stride: int = 8
    scales: tuple = (1.0, 0.75, 0.5)
    nms_iou: float = 0.5
    positive_class: int = 1
    positive_label: str = "handgun"

    def __post_init__(self):
        if not 0 <= self.motion_threshold <= 255:
            raise ValueError(f"motion_threshold must be in [0, 255], got {self.motion_threshold}")
        if self.blur_radius < 0:
            raise ValueError(f"blur_radius must be >= 0, got {self.blur_radius}")
        if self.min_blob_area < 1:
            raise ValueError(f"min_blob_area must be >= 1, got {self.min_blob_area}")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError(
                f"decision_threshold must be in (0, 1), got {self.decision_threshold}"
            )
        if self.roi_size < 4:
            raise ValueError(f"roi_size must be >= 4, got {self.roi_size}")
        if self.mode not in ("region_proposals", "sliding_window"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError(f"scales must be non-empty positives, got {self.scales}")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError(f"nms_iou must be in (0, 1], got {self.nms_iou}")


@dataclass(frozen=True)
class DetectionEvent:
    frame: int
    box: BBox
    prob: float
    label: str

    def to_dict(self):
        return {
            "frame": self.frame,
            "x": self.box.x,
            "y": self.box.y,
            "w": self.box.w,
            "h": self.box.h,
            "prob": self.prob,
            "label": self.label,
        }


def iou(a, b):
    """Intersection-over-union of two BBoxes (by rectangle extent)."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def suppress_overlaps(events, iou_threshold=0.5):
    """Greedy non-maximum suppression: keep the higher-probability event
    of any pair overlapping by more than iou_threshold."""
    ordered = sorted(events, key=lambda e: -e.prob)
    kept = []
    for ev in ordered:
        if all(iou(ev.box, k.box) <= iou_threshold for k in kept):
            kept.append(ev)
    return kept


class FrameRing:
    """The three most recent frames plus a frame counter.

    Stores each frame both raw (for ROI cropping) and blurred (for
    differencing). Differencing only happens once three frames are
    buffered.
    """

    def __init__(self, config):
        self.config = config
        self._frames = []  # (index, raw, blurred), newest last
        self.count = 0

    @property
    def warmed_up(self):
        return len(self._frames) == 3

    @property
    def middle_frame(self):
        if not self.warmed_up:
            raise ValueError("ring has fewer than three frames")
        return self._frames[1][1]

    @property
    def middle_index(self):
        if not self.warmed_up:
            raise ValueError("ring has fewer than three frames")
        return self._frames[1][0]

    def push(self, frame, index=None):
        frame = check_gray_image(frame, "frame")
        if self._frames and frame.shape != self._frames[0][1].shape:
            raise ValueError(
                f"frame size {frame.shape[1]}x{frame.shape[0]} does not match "
                f"ring size {self._frames[0][1].shape[1]}x{self._frames[0][1].shape[0]}"
            )
        self.count += 1
        idx = self.count if index is None else int(index)
        blurred = box_blur(frame, self.config.blur_radius)
        self._frames.append((idx, frame, blurred))
        if len(self._frames) > 3:
            self._frames.pop(0)


def feed_frame(ring, frame, index=None):
    """Push a frame; returns motion-blob boxes for the middle frame.

    Returns None while the ring is warming up (fewer than three frames
    buffered). An empty list means no motion: the classifier stage must
    be skipped for this frame.
    """
    ring.push(frame, index)
    if not ring.warmed_up:
        return None
    cfg = ring.config
    blurred = [f[2] for f in ring._frames]
    mask = triple_diff(blurred[0], blurred[1], blurred[2], cfg.motion_threshold)
    return connected_components(mask, cfg.min_blob_area)


def classify_rois(frame, boxes, net, threshold, positive_class=1, label="handgun", frame_index=0):
    """Classify each proposed box; emit an event when the positive-class
    probability reaches the threshold. Zero boxes means zero classifier
    invocations."""
    frame = check_gray_image(frame, "frame")
    events = []
    for box in boxes:
        size = net.input_shape[-1]
        patch = roi_resize(frame, box, size, size).astype(np.float64) / 255.0
        pred = predict(net, patch[None, :, :])
        p = float(pred.probs[positive_class])
        if p >= threshold:
            events.append(DetectionEvent(frame=frame_index, box=box, prob=p, label=label))
    return events


def _positive_label(net, cfg):
    names = net.meta.get("class_names")
    if names and 0 <= cfg.positive_class < len(names):
        return str(names[cfg.positive_class])
    return cfg.positive_label


def sliding_window_detect(image, net, cfg, frame_index=0):
    """Exhaustive fixed-size window scan at each configured scale.

    Windows are classified in batches; events come back in original
    image coordinates after greedy overlap suppression.
    """
    image = check_gray_image(image, "image")
    h, w = image.shape
    win = cfg.roi_size
    if net.input_shape[-1] != win or net.input_shape[-2] != win:
        raise ValueError(
            f"roi_size {win} does not match network input {net.input_shape}"
        )
    label = _positive_label(net, cfg)
    candidates = []
    for scale in cfg.scales:
        sh, sw = max(1, round(h * scale)), max(1, round(w * scale))
        if sh < win or sw < win:
            raise ValueError(
                f"window {win}x{win} does not fit {sw}x{sh} image at scale {scale}"
            )
        scaled = resize_gray(image, sw, sh) if scale != 1.0 else image
        xs = list(range(0, sw - win + 1, cfg.stride))
        ys = list(range(0, sh - win + 1, cfg.stride))
        patches = np.empty((len(xs) * len(ys), 1, win, win), dtype=np.float64)
        coords = []
        k = 0
        for y in ys:
            for x in xs:
                patches[k, 0] = scaled[y : y + win, x : x + win]
                coords.append((x, y))
                k += 1
        probs = net.forward(patches / 255.0)[:, cfg.positive_class]
        for (x, y), p in zip(coords, probs):
            if p >= cfg.decision_threshold:
                ox = min(round(x / scale), w - 1)
                oy = min(round(y / scale), h - 1)
                ow = min(round(win / scale), w - ox)
                oh = min(round(win / scale), h - oy)
                box = BBox(x=ox, y=oy, w=ow, h=oh, area=ow * oh)
                candidates.append(
                    DetectionEvent(frame=frame_index, box=box, prob=float(p), label=label)
                )
    return suppress_overlaps(candidates, cfg.nms_iou)


@dataclass
class StreamSummary:
    frames: int = 0
    gate_passes: int = 0
    classifier_invocations: int = 0
    events: list = field(default_factory=list)

    def to_dict(self):
        return {
            "frames": self.frames,
            "gate_passes": self.gate_passes,
            "classifier_invocations": self.classifier_invocations,
            "events": len(self.events),
        }


_FRAME_RE = re.compile(r"^frame_(\d{6})\.pgm$")


def list_frame_files(frame_dir):
    """frame_NNNNNN.pgm files sorted by index; indices must be contiguous."""
    if not os.path.isdir(frame_dir):
        raise ValueError(f"not a directory: {frame_dir}")
    found = []
    for name in os.listdir(frame_dir):
        m = _FRAME_RE.match(name)
        if m:
            found.append((int(m.group(1)), name))
    if not found:
        raise ValueError(f"no frame_NNNNNN.pgm files in {frame_dir}")
    found.sort()
    first = found[0][0]
    for offset, (idx, name) in enumerate(found):
        if idx != first + offset:
            raise ValueError(f"missing frame_{first + offset:06d}.pgm before {name}")
    return [(idx, os.path.join(frame_dir, name)) for idx, name in found]


def run_stream(frame_dir, net, cfg, log_path=None):
    """Replay a frame directory through the gate + classifier pipeline.

    Appends one JSON line per event to log_path when given. Returns a
    StreamSummary; processing is strictly sequential and deterministic.
    """
    files = list_frame_files(frame_dir)
    ring = FrameRing(cfg)
    summary = StreamSummary()
    label = _positive_label(net, cfg)
    log = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for idx, path in files:
            try:
                frame = read_pnm(path)
            except (OSError, ValueError) as e:
                raise ValueError(f"unreadable frame {path}: {e}") from None
            if frame.ndim != 2:
                raise ValueError(f"expected grayscale frame, got color: {path}")
            boxes = feed_frame(ring, frame, index=idx)
            summary.frames += 1
            if not boxes:
                continue
            summary.gate_passes += 1
            summary.classifier_invocations += len(boxes)
            events = classify_rois(
                ring.middle_frame,
                boxes,
                net,
                cfg.decision_threshold,
                positive_class=cfg.positive_class,
                label=label,
                frame_index=ring.middle_index,
            )
            for ev in events:
                summary.events.append(ev)
                if log:
                    log.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
    finally:
        if log:
            log.close()
    return summary
