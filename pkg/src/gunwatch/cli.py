"""Command-line entry point.

Subcommands: gen-data, pretrain, train, transfer, eval, detect. Options
can come from a single JSON config file (--config) with individual
flags taking precedence; unknown config keys are rejected and the fully
resolved configuration is echoed to stdout before the run. All
randomness flows from --seed (default 0, never wall-clock entropy).

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import checkpoint as ckpt
from . import datasets, metrics
from .architectures import build_mini_backbone, build_paper_cnn
from .detection import PipelineConfig, run_stream, sliding_window_detect
from .images import read_pnm
from .training import TrainConfig, replace_head, split_dataset, train


class ConfigError(Exception):
    """Bad configuration: wrong keys, bad values, unparseable JSON."""


_PIPELINE_KEYS = {f.name for f in dataclasses.fields(PipelineConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_PATH_KEYS = {"checkpoint", "data", "frames", "image", "log", "out", "report", "donor"}


def load_run_config(path):
    """Parse and key-validate the JSON run config."""
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {"pipeline": _PIPELINE_KEYS, "train": _TRAIN_KEYS, "paths": _PATH_KEYS}
    for section, content in doc.items():
        if section not in allowed:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(content, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        unknown = set(content) - allowed[section]
        if unknown:
            raise ConfigError(f"unknown {section} config keys: {sorted(unknown)}")
    return doc


def _resolve(section_defaults, file_section, overrides):
    resolved = dict(section_defaults)
    resolved.update(file_section)
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _echo(label, resolved):
    print(f"{label}: {json.dumps(resolved, sort_keys=True)}")


def _pipeline_config(args):
    doc = load_run_config(args.config) if args.config else {}
    overrides = {
        "motion_threshold": args.motion_threshold,
        "blur_radius": args.blur_radius,
        "min_blob_area": args.min_blob_area,
        "decision_threshold": args.decision_threshold,
        "mode": args.mode,
        "stride": args.stride,
        "scales": tuple(float(s) for s in args.scales.split(",")) if args.scales else None,
    }
    defaults = {f.name: getattr(PipelineConfig(), f.name) for f in dataclasses.fields(PipelineConfig)}
    resolved = _resolve(defaults, doc.get("pipeline", {}), overrides)
    if isinstance(resolved.get("scales"), list):
        resolved["scales"] = tuple(resolved["scales"])
    try:
        cfg = PipelineConfig(**resolved)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    echo = dict(resolved)
    echo["scales"] = list(cfg.scales)
    _echo("pipeline-config", echo)
    return cfg


def _train_config(args):
    doc = load_run_config(args.config) if args.config else {}
    overrides = {
        "epochs": args.epochs,
        "lr": args.lr,
        "momentum": args.momentum,
        "batch_size": args.batch_size,
        "seed": args.seed,
    }
    defaults = {"epochs": 10, "lr": 0.01, "momentum": 0.9, "batch_size": 16, "seed": 0, "shuffle": True}
    resolved = _resolve(defaults, doc.get("train", {}), overrides)
    try:
        cfg = TrainConfig(**resolved)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    _echo("train-config", resolved)
    return cfg


def _load_data_arrays(data_dir):
    samples = datasets.load_labeled_dir(data_dir)
    X, y = datasets.samples_to_arrays(samples)
    class_names = sorted({s.class_name for s in samples})
    return X, y, class_names


def _build_net(arch, num_classes, seed, width_scale):
    if arch == "paper":
        return build_paper_cnn(
            num_classes, seed=seed, width_scale=1.0 if width_scale is None else width_scale
        )
    if arch == "mini":
        return build_mini_backbone(
            num_classes, seed=seed, width_scale=0.25 if width_scale is None else width_scale
        )
    raise ConfigError(f"unknown architecture {arch!r}")


def cmd_gen_data(args):
    spec = datasets.DatasetSpec(
        num_classes=args.classes,
        samples_per_class=args.per_class,
        size=args.size,
        noise_std=args.noise,
        seed=args.seed,
    )
    _echo("gen-data-config", {**dataclasses.asdict(spec), "binary": args.binary, "out": args.out})
    if args.binary:
        manifest = datasets.gen_binary_dataset(spec, args.out, positive_class=args.positive_family)
    else:
        manifest = datasets.gen_shapes_dataset(spec, args.out)
    print(f"manifest: {manifest}")
    return 0


def _run_training(args, donor=None):
    cfg = _train_config(args)
    X, y, class_names = _load_data_arrays(args.data)
    if donor is not None:
        net = replace_head(donor, len(class_names), seed=cfg.seed)
    else:
        net = _build_net(args.arch, len(class_names), cfg.seed, args.width_scale)
    net.meta["class_names"] = class_names
    if args.val_fraction > 0:
        X_tr, y_tr, X_val, y_val = split_dataset(X, y, args.val_fraction, cfg.seed)
        report = train(net, X_tr, y_tr, cfg, X_val, y_val)
    else:
        report = train(net, X, y, cfg)
    ckpt.save_checkpoint(net, args.out)
    if args.report:
        report.save_jsonl(args.report)
    last_val = report.val_acc[-1] if report.val_acc else None
    print(
        f"trained {cfg.epochs} epochs: loss={report.losses[-1]:.4f} "
        f"train_acc={report.train_acc[-1]:.4f}"
        + (f" val_acc={last_val:.4f}" if last_val is not None else "")
    )
    print(f"checkpoint: {args.out}")
    return 0


def cmd_train(args):
    return _run_training(args)


def cmd_transfer(args):
    donor = ckpt.load_checkpoint(args.donor)
    return _run_training(args, donor=donor)


def _print_counts_metrics(row):
    cm = row.cm
    print(f"tp={cm.tp} fn={cm.fn} tn={cm.tn} fp={cm.fp}")
    print(f"accuracy  {100.0 * row.accuracy:.2f}")
    for name, value in (("precision", row.precision), ("recall", row.recall), ("f1", row.f1)):
        print(f"{name:<9} {'undefined' if value is None else f'{100.0 * value:.2f}'}")


def cmd_eval(args):
    counts = (args.tp, args.fn, args.tn, args.fp)
    if any(c is not None for c in counts):
        if any(c is None for c in counts):
            raise ConfigError("counts mode needs all of --tp --fn --tn --fp")
        row = metrics.MetricRow.from_counts(args.name, *counts)
        _print_counts_metrics(row)
        rows = [row]
    elif args.pairs:
        preds, labels = metrics.read_pairs_csv(args.pairs)
        cm = metrics.from_pairs(preds, labels, args.positive)
        row = metrics.MetricRow.from_counts(args.name, cm.tp, cm.fn, cm.tn, cm.fp)
        _print_counts_metrics(row)
        rows = [row]
    else:
        if not args.ckpt or not args.data:
            raise ConfigError("eval needs --tp/--fn/--tn/--fp, --pairs, or --ckpt with --data")
        net = ckpt.load_checkpoint(args.ckpt)
        X, y, class_names = _load_data_arrays(args.data)
        trained_names = net.meta.get("class_names")
        if trained_names and sorted(trained_names) != class_names:
            raise ValueError(
                f"checkpoint classes {trained_names} do not match data classes {class_names}"
            )
        order = trained_names if trained_names else class_names
        name_to_net_idx = {n: i for i, n in enumerate(order)}
        remap = np.array([name_to_net_idx[n] for n in class_names])
        preds = []
        for start in range(0, len(X), 64):
            probs = net.forward(X[start : start + 64])
            preds.extend(int(i) for i in probs.argmax(axis=1))
        y_net = remap[y]
        acc = float(np.mean(np.asarray(preds) == y_net))
        positive_name = args.positive if args.positive else "handgun"
        if positive_name in name_to_net_idx:
            pos = name_to_net_idx[positive_name]
        else:
            pos = 1
        cm = metrics.from_pairs(preds, list(y_net), pos)
        row = metrics.MetricRow.from_counts(args.name, cm.tp, cm.fn, cm.tn, cm.fp)
        print(f"samples={len(X)} accuracy {100.0 * acc:.2f}")
        _print_counts_metrics(row)
        rows = [row]
    print(metrics.render_table(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(metrics.rows_to_json(rows))
        print(f"metrics: {args.out}")
    return 0


def cmd_detect(args):
    cfg = _pipeline_config(args)
    net = ckpt.load_checkpoint(args.ckpt)
    if cfg.mode == "sliding_window":
        if not args.image:
            raise ConfigError("sliding_window mode needs --image")
        image = read_pnm(args.image)
        events = sliding_window_detect(image, net, cfg)
        if args.log:
            with open(args.log, "w", encoding="utf-8") as f:
                for ev in events:
                    f.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")
        print(f"summary: {json.dumps({'frames': 1, 'events': len(events)}, sort_keys=True)}")
        return 0
    if not args.frames:
        raise ConfigError("region_proposals mode needs --frames")
    summary = run_stream(args.frames, net, cfg, log_path=args.log)
    print(f"summary: {json.dumps(summary.to_dict(), sort_keys=True)}")
    return 0


def _add_train_flags(p):
    p.add_argument("--data", required=True, help="labeled class-folder dataset directory")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="single seed for all randomness (default 0)")
    p.add_argument("--arch", choices=("mini", "paper"), default="mini")
    p.add_argument("--width-scale", dest="width_scale", type=float, default=None)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.0)
    p.add_argument("--report", help="write per-epoch JSON-lines training report here")
    p.add_argument("--config", help="JSON run config file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gunwatch",
        description="Motion-gated handgun detection: data generation, training, transfer, evaluation, stream detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic shape dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", dest="per_class", type=int, default=50)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--noise", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true", help="two-class handgun/background dataset")
    p.add_argument("--positive-family", dest="positive_family", type=int, default=3)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("pretrain", help="train a fresh backbone on a labeled dataset")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train", help="train a fresh network on a labeled dataset")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("transfer", help="replace a pretrained checkpoint's head and fine-tune")
    _add_train_flags(p)
    p.add_argument("--from", dest="donor", required=True, help="donor checkpoint path")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval", help="evaluate: raw counts, a pairs CSV, or a checkpoint on a dataset")
    p.add_argument("--tp", type=int)
    p.add_argument("--fn", type=int)
    p.add_argument("--tn", type=int)
    p.add_argument("--fp", type=int)
    p.add_argument("--pairs", help="CSV with header pred,label")
    p.add_argument("--positive", help="positive class name (default handgun)")
    p.add_argument("--ckpt")
    p.add_argument("--data")
    p.add_argument("--name", default="model")
    p.add_argument("--out", help="write MetricRow JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", help="run the detection pipeline on frames or an image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--frames", help="directory of frame_NNNNNN.pgm files")
    p.add_argument("--image", help="single PGM image (sliding_window mode)")
    p.add_argument("--log", help="JSON-lines event log path")
    p.add_argument("--config", help="JSON run config file")
    p.add_argument("--mode", choices=("region_proposals", "sliding_window"), default=None)
    p.add_argument("--motion-threshold", dest="motion_threshold", type=int, default=None)
    p.add_argument("--blur-radius", dest="blur_radius", type=int, default=None)
    p.add_argument("--min-blob-area", dest="min_blob_area", type=int, default=None)
    p.add_argument("--decision-threshold", dest="decision_threshold", type=float, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--scales", help="comma-separated scale factors, e.g. 1.0,0.75,0.5")
    p.set_defaults(func=cmd_detect)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure: missing files, bad checkpoints, training errors
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
