"""Training loop, head replacement, layer freezing, transfer experiments.

Datasets are plain arrays: X with shape (N, *net.input_shape) holding
pixel values already scaled to [0, 1], and integer labels y of shape
(N,). Everything is deterministic for a fixed seed: shuffling, splits
and fresh head initialization all run off the package RNG.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import network as nn
from .architectures import build_mini_backbone
from .network import Network, loss_and_grads, sgd_step
from .rng import Rng
from .validation import check_labels


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass
class TrainReport:
    """Per-epoch loss and accuracy series for one training run."""

    losses: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def epochs_to_target(self, threshold, series="val"):
        """1-based first epoch whose accuracy reaches threshold, or None."""
        values = self.val_acc if series == "val" else self.train_acc
        for i, acc in enumerate(values):
            if acc is not None and acc >= threshold:
                return i + 1
        return None

    def to_jsonl(self):
        lines = []
        for i, loss in enumerate(self.losses):
            lines.append(
                json.dumps(
                    {
                        "epoch": i + 1,
                        "loss": loss,
                        "train_acc": self.train_acc[i],
                        "val_acc": self.val_acc[i] if i < len(self.val_acc) else None,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def save_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())


def evaluate_accuracy(net, X, y, batch_size=64):
    """Fraction of samples whose argmax class matches the label."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    correct = 0
    for start in range(0, len(X), batch_size):
        probs = net.forward(X[start : start + batch_size])
        correct += int((probs.argmax(axis=1) == y[start : start + batch_size]).sum())
    return correct / len(X)


def _check_dataset(net, X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != len(net.input_shape) + 1 or X.shape[1:] != net.input_shape:
        raise ValueError(
            f"samples must have shape (N, {', '.join(map(str, net.input_shape))}), "
            f"got {X.shape}"
        )
    if len(X) == 0:
        raise ValueError("dataset is empty")
    y = check_labels(y, net.num_classes)
    if len(y) != len(X):
        raise ValueError(f"{len(X)} samples but {len(y)} labels")
    return X, y


def train(net, X, y, cfg, X_val=None, y_val=None):
    """Shuffled minibatch SGD for cfg.epochs epochs; returns a TrainReport.

    Mutates the network in place. Per-epoch training accuracy is
    measured with a full forward pass after the epoch's updates;
    validation accuracy is recorded when a validation set is given.
    """
    X, y = _check_dataset(net, X, y)
    if (X_val is None) != (y_val is None):
        raise ValueError("X_val and y_val must be given together")
    if X_val is not None:
        X_val, y_val = _check_dataset(net, X_val, y_val)
    rng = Rng(cfg.seed)
    report = TrainReport()
    n = len(X)
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss = loss_and_grads(net, X[idx], y[idx])
            sgd_step(net, cfg.lr, cfg.momentum)
            total_loss += loss * len(idx)
        report.losses.append(total_loss / n)
        report.train_acc.append(evaluate_accuracy(net, X, y))
        if X_val is not None:
            report.val_acc.append(evaluate_accuracy(net, X_val, y_val))
    net.meta["epochs_trained"] = net.meta.get("epochs_trained", 0) + cfg.epochs
    return report


def replace_head(net, new_num_classes, seed=0):
    """Swap the final dense layer for a fresh (new_num_classes)-way head.

    Returns a new Network; every non-head parameter is copied bitwise,
    the head is He-initialized from `seed`, and all gradient/momentum
    buffers start at zero.
    """
    new_num_classes = int(new_num_classes)
    if new_num_classes < 2:
        raise ValueError(f"new_num_classes must be >= 2, got {new_num_classes}")
    if (
        len(net.specs) < 2
        or net.specs[-1].kind != "softmax"
        or net.specs[-2].kind != "dense"
    ):
        raise ValueError("network must end with a dense layer followed by softmax")
    head_idx = len(net.specs) - 2
    old_head = net.specs[head_idx]
    specs = list(net.specs)
    specs[head_idx] = nn.dense(old_head.in_features, new_num_classes)
    meta = dict(net.meta)
    meta["num_classes"] = new_num_classes
    out = Network(specs, net.input_shape, meta=meta, init="zeros")
    for i in out.parameterized_indices():
        if i == head_idx:
            continue
        out.params[i]["w"] = net.params[i]["w"].copy()
        out.params[i]["b"] = net.params[i]["b"].copy()
    rng = Rng(seed)
    w = rng.normal((new_num_classes, old_head.in_features))
    out.params[head_idx]["w"] = w * np.sqrt(2.0 / old_head.in_features)
    out.params[head_idx]["b"] = np.zeros(new_num_classes)
    out.trainable = list(net.trainable)
    out.trainable[head_idx] = True
    return out


def set_trainable(net, frozen_prefix):
    """Freeze the first `frozen_prefix` parameterized layers in place."""
    param_idx = net.parameterized_indices()
    frozen_prefix = int(frozen_prefix)
    if not 0 <= frozen_prefix <= len(param_idx):
        raise ValueError(
            f"frozen_prefix must be in [0, {len(param_idx)}], got {frozen_prefix}"
        )
    for rank, i in enumerate(param_idx):
        net.trainable[i] = rank >= frozen_prefix
    return net


def split_dataset(X, y, val_fraction, seed):
    """Deterministic stratified train/validation split."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    X = np.asarray(X)
    y = np.asarray(y)
    rng = Rng(seed)
    train_idx, val_idx = [], []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        n_val = max(1, round(len(members) * val_fraction))
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    train_idx = np.sort(np.asarray(train_idx))
    val_idx = np.sort(np.asarray(val_idx))
    return X[train_idx], y[train_idx], X[val_idx], y[val_idx]


@dataclass
class TransferArm:
    report: TrainReport
    epochs_to_target: int | None


@dataclass
class TransferRun:
    seed: int
    transfer: TransferArm
    scratch: TransferArm


@dataclass
class TransferOutcome:
    """Transfer-vs-scratch comparison over several seeds.

    Epochs-to-target of None (target never reached) is scored as
    epoch cap + 1 so medians and win counts stay defined.
    """

    runs: list
    target: float
    epoch_cap: int

    def _score(self, e):
        return self.epoch_cap + 1 if e is None else e

    @property
    def transfer_median(self):
        return float(np.median([self._score(r.transfer.epochs_to_target) for r in self.runs]))

    @property
    def scratch_median(self):
        return float(np.median([self._score(r.scratch.epochs_to_target) for r in self.runs]))

    @property
    def strict_wins(self):
        return sum(
            self._score(r.transfer.epochs_to_target) < self._score(r.scratch.epochs_to_target)
            for r in self.runs
        )

    def to_dict(self):
        return {
            "target": self.target,
            "epoch_cap": self.epoch_cap,
            "transfer_median": self.transfer_median,
            "scratch_median": self.scratch_median,
            "strict_wins": self.strict_wins,
            "runs": [
                {
                    "seed": r.seed,
                    "transfer_epochs": r.transfer.epochs_to_target,
                    "scratch_epochs": r.scratch.epochs_to_target,
                }
                for r in self.runs
            ],
        }


def transfer_experiment(
    pretrain_set,
    binary_set,
    cfg_pre,
    cfg_fine,
    seeds,
    builder=build_mini_backbone,
    target=0.95,
    val_fraction=0.2,
    head_classes=2,
):
    """Pretrain, swap head and fine-tune vs. train from scratch, per seed.

    pretrain_set / binary_set are (X, y) pairs. For each seed the
    backbone is pretrained on the multi-class set, its head replaced
    with a fresh `head_classes`-way layer and fine-tuned on the binary
    training split, while an identically-built fresh network trains on
    the same split with the same data order. Both arms record the first
    epoch whose validation accuracy reaches `target`.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be a non-empty list")
    X_pre, y_pre = pretrain_set
    X_bin, y_bin = binary_set
    num_pre_classes = int(np.max(y_pre)) + 1
    runs = []
    for seed in seeds:
        backbone = builder(num_pre_classes, seed=seed)
        train(backbone, X_pre, y_pre, replace(cfg_pre, seed=seed))
        X_tr, y_tr, X_val, y_val = split_dataset(X_bin, y_bin, val_fraction, seed)

        transferred = replace_head(backbone, head_classes, seed=seed)
        rep_t = train(transferred, X_tr, y_tr, replace(cfg_fine, seed=seed), X_val, y_val)

        scratch = builder(head_classes, seed=seed)
        rep_s = train(scratch, X_tr, y_tr, replace(cfg_fine, seed=seed), X_val, y_val)

        runs.append(
            TransferRun(
                seed=seed,
                transfer=TransferArm(rep_t, rep_t.epochs_to_target(target)),
                scratch=TransferArm(rep_s, rep_s.epochs_to_target(target)),
            )
        )
    return TransferOutcome(runs=runs, target=target, epoch_cap=cfg_fine.epochs)
