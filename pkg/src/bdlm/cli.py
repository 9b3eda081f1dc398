"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage or plan validation error.
Errors also print a machine-readable ``error kind=... key=value`` line; seeds
are echoed in output headers so published numbers can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import BdlmError, PlanError
from .experiments import (ExperimentPlan, export_embeddings, read_plan, run_plan,
                          synthetic_for_plan, write_epoch_csv, write_report_json)
from .experiments.fixtures import synthetic_segments
from .experiments.metrics import compute_metrics, label_space_of
from .experiments.runners import segments_to_arrays, sweep_patch_stride
from .experiments.splits import SplitSpec, build_splits
from .features import extract_features, write_feature_csv
from .ingest import load_manifest
from .model import (ModelConfig, TrainHyper, load_checkpoint, predict,
                    save_checkpoint, train)
from .signals import SegmentationConfig, segment_sliding_window
from .spectral import stft, write_spectrogram_csv
from .textgen import emit_corpus, render_record


def _default_seed() -> int:
    env = os.environ.get("BD_SEED", "")
    try:
        return int(env)
    except ValueError:
        return 0


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=None,
                        help="random seed (default: BD_SEED env var, else 0)")
    parser.add_argument("--threads", type=int, default=0,
                        help="BLAS thread cap; 1 forces fully serial execution")
    parser.add_argument("--verbose", action="store_true", help="chattier progress output")


def _add_data_source(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="dataset manifest JSON")
    group.add_argument("--synthetic", action="store_true",
                       help="generate synthetic stand-in data instead of loading files")
    parser.add_argument("--synthetic-per-class", type=int, default=40,
                        help="synthetic segments per class (with --synthetic)")


def _add_segmentation(parser: argparse.ArgumentParser):
    parser.add_argument("--window", type=int, default=2048, help="segment window length")
    parser.add_argument("--step", type=int, default=1024, help="sliding-window step")


def _add_model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--patch-len", type=int, default=128)
    parser.add_argument("--stride", type=int, default=8)
    parser.add_argument("--d-model", type=int, default=128)
    parser.add_argument("--n-heads", type=int, default=4)
    parser.add_argument("--n-layers", type=int, default=3)
    parser.add_argument("--pooling", choices=("mean", "last"), default="mean")
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--batch-size", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdlm",
        description="Bearing vibration diagnostics: feature textualization and a "
                    "frozen-transformer classifier with a transfer-experiment harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute the 24-feature CSV from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output feature CSV")
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("corpus", help="emit instruction-tuning corpora (8:2 split)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True,
                   help="output prefix; writes <out>_train.jsonl and <out>_test.jsonl")
    p.add_argument("--template", help="JSON template override file")
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("train", help="train a classifier and save a checkpoint")
    _add_data_source(p)
    p.add_argument("--out", required=True, help="checkpoint output path (.bdlm)")
    p.add_argument("--report", help="optional epoch-log JSON output")
    _add_segmentation(p)
    _add_model_flags(p)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    _add_data_source(p)
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("protocol", help="run an experiment plan file")
    p.add_argument("--plan", required=True, help="plan JSON file")
    _add_data_source(p)
    p.add_argument("--out-dir", required=True, help="directory for report files")
    p.add_argument("--trials", type=int, help="override plan trial count")
    p.add_argument("--epochs", type=int, help="override plan epoch count")
    p.add_argument("--corpus", action="store_true",
                   help="emit fine-tuning corpora for the plan splits instead of training")
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="patch/stride hyperparameter sweep")
    _add_data_source(p)
    p.add_argument("--grid", default="table8",
                   help="'table8' or comma list like '128:8,64:4'")
    p.add_argument("--out", required=True, help="sweep report JSON")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--n-layers", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=32)
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("export-embeddings",
                       help="CSV of penultimate-layer vectors for a dataset")
    p.add_argument("--checkpoint", required=True)
    _add_data_source(p)
    p.add_argument("--out", required=True)
    _add_segmentation(p)
    _add_common(p)

    p = sub.add_parser("export-spectrogram", help="STFT magnitude CSV of one manifest entry")
    p.add_argument("--manifest", required=True)
    p.add_argument("--entry", type=int, default=0, help="manifest entry index")
    p.add_argument("--out", required=True)
    p.add_argument("--stft-window", type=int, default=256)
    p.add_argument("--hop", type=int, default=128)
    p.add_argument("--window-fn", choices=("rect", "hann"), default="hann")
    _add_common(p)

    return parser


def _segments_from_args(args, window=None, step=None):
    cfg = SegmentationConfig(window_len=window or args.window, step=step or args.step)
    if getattr(args, "synthetic", False):
        return synthetic_segments(n_per_class=args.synthetic_per_class,
                                  window_len=cfg.window_len, seed=args.seed)
    signals = load_manifest(args.manifest)
    segments = []
    for signal in signals:
        segments.extend(segment_sliding_window(signal, cfg))
    return segments


def _print_header(args):
    print(f"bdlm seed={args.seed} threads={args.threads or 'auto'}")


def cmd_extract(args) -> int:
    signals = load_manifest(args.manifest)
    cfg = SegmentationConfig(window_len=args.window, step=args.step)
    rows = []
    for signal in signals:
        for segment in segment_sliding_window(signal, cfg):
            rows.append((segment, extract_features(segment)))
    write_feature_csv(rows, args.out)
    print(f"segments={len(rows)} features=24 out={args.out}")
    return 0


def _template_from_file(path):
    if not path:
        return None
    from .textgen import PromptTemplate
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    from .signals import FaultLabel
    kwargs = {}
    if "instruction" in doc:
        kwargs["instruction"] = doc["instruction"]
    if "feature_phrases" in doc:
        kwargs["feature_phrases"] = tuple(doc["feature_phrases"])
    if "output_phrases" in doc:
        kwargs["output_phrases"] = {FaultLabel.from_name(k): v
                                    for k, v in doc["output_phrases"].items()}
    if "sig_digits" in doc:
        kwargs["sig_digits"] = int(doc["sig_digits"])
    if "undefined_phrase" in doc:
        kwargs["undefined_phrase"] = doc["undefined_phrase"]
    return PromptTemplate(**kwargs)


def cmd_corpus(args) -> int:
    template = _template_from_file(args.template)
    segments = _segments_from_args(args)
    splits = build_splits(segments, SplitSpec(mode="train_test_82", seed=args.seed,
                                              balance=True))
    counts = {}
    for part, part_segments in (("train", splits.train), ("test", splits.test)):
        records = [render_record(extract_features(seg), seg.label, template)
                   for seg in part_segments]
        path = f"{args.out}_{part}.jsonl"
        counts[part] = emit_corpus(records, path)
    print(f"train={counts['train']} test={counts['test']} out={args.out}_*.jsonl")
    return 0


def _model_config_from_args(args, n_classes, seed):
    return ModelConfig(n_classes=n_classes, patch_len=args.patch_len, stride=args.stride,
                       d_model=args.d_model, n_heads=args.n_heads, n_layers=args.n_layers,
                       window_len=args.window, seed=seed, pooling=args.pooling)


def cmd_train(args) -> int:
    segments = _segments_from_args(args)
    labels = label_space_of(segments)
    splits = build_splits(segments, SplitSpec(mode="train_val_test_811", seed=args.seed,
                                              balance=True))
    train_x, train_y = segments_to_arrays(splits.train, labels)
    val_x, val_y = segments_to_arrays(splits.val, labels)
    test_x, test_y = segments_to_arrays(splits.test, labels)
    config = _model_config_from_args(args, len(labels), args.seed)
    hyper = TrainHyper(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                       seed=args.seed)
    result = train(train_x, train_y, val_x, val_y, config, hyper)
    save_checkpoint(result.state, args.out)
    preds = predict(result.state, test_x)
    accuracy, confusion = compute_metrics(test_y, preds,
                                          tuple(l.short_name for l in labels))
    print(f"best_epoch={result.best_epoch} "
          f"val_acc={result.best_val_accuracy:.4f} test_acc={accuracy:.4f}")
    print(f"checkpoint={args.out}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump({"seed": args.seed, "config": config.to_dict(),
                       "epochs": [{"epoch": r.epoch, "train_loss": r.train_loss,
                                   "val_accuracy": r.val_accuracy} for r in result.log],
                       "test_accuracy": accuracy,
                       "confusion": confusion.to_dict()}, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_eval(args) -> int:
    state = load_checkpoint(args.checkpoint)
    segments = _segments_from_args(args, window=state.config.window_len)
    labels = label_space_of(segments)
    x, y = segments_to_arrays(segments, labels)
    preds = predict(state, x)
    accuracy, confusion = compute_metrics(y, preds, tuple(l.short_name for l in labels))
    print(f"segments={len(segments)} accuracy={accuracy:.6f}")
    for label, row in zip(confusion.labels, confusion.counts):
        print(f"confusion {label}: " + " ".join(str(int(v)) for v in row))
    return 0


def _apply_plan_overrides(plan: ExperimentPlan, args) -> ExperimentPlan:
    doc = plan.to_dict()
    if getattr(args, "trials", None):
        doc["trials"] = args.trials
    if getattr(args, "epochs", None):
        doc["hyper"] = dict(doc["hyper"], epochs=args.epochs)
    if getattr(args, "corpus", False):
        doc["emit_corpus"] = True
    if args.seed is not None:
        doc["seed"] = args.seed
    return ExperimentPlan(**doc)


def cmd_protocol(args) -> int:
    plan = _apply_plan_overrides(read_plan(args.plan), args)
    if args.synthetic:
        segments = synthetic_for_plan(plan, n_per_class=args.synthetic_per_class,
                                      window_len=args.window, seed=plan.seed)
    else:
        segments = _segments_from_args(args)
    os.makedirs(args.out_dir, exist_ok=True)
    reports = run_plan(segments, plan, corpus_dir=args.out_dir)
    if plan.kind == "sweep":
        path = os.path.join(args.out_dir, f"{plan.plan_id}_sweep.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([c.to_dict() for c in reports], fh, indent=2)
        print(f"cells={len(reports)} out={path}")
        return 0
    for report in reports:
        case_id = report.case.get("case_id", "1")
        path = os.path.join(args.out_dir, f"{plan.plan_id}_{case_id}.json")
        write_report_json(report, path)
        print(f"case={case_id} leakage: {report.leakage}")
        for arm_name, arm in report.arms.items():
            s = arm.summary()
            print(f"case={case_id} arm={arm_name} mean={s['mean']:.4f} "
                  f"+{s['plus']:.4f}/-{s['minus']:.4f}")
    csv_path = os.path.join(args.out_dir, f"{plan.plan_id}_epochs.csv")
    write_epoch_csv(reports, csv_path)
    print(f"reports={len(reports)} out_dir={args.out_dir}")
    return 0


def _parse_grid(text: str):
    if text == "table8":
        return None
    cells = []
    for part in text.split(","):
        patch, _, stride = part.partition(":")
        cells.append([int(patch), int(stride)])
    return cells


def cmd_sweep(args) -> int:
    plan = ExperimentPlan(
        kind="sweep", plan_id="sweep", trials=args.trials, seed=args.seed,
        grid=_parse_grid(args.grid),
        model={"d_model": args.d_model, "n_heads": args.n_heads,
               "n_layers": args.n_layers, "window_len": args.window},
        hyper={"lr": args.lr, "epochs": args.epochs, "batch_size": args.batch_size})
    segments = (synthetic_for_plan(plan, n_per_class=args.synthetic_per_class,
                                   window_len=args.window, seed=args.seed)
                if args.synthetic else _segments_from_args(args))
    cells = sweep_patch_stride(segments, plan)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in cells], fh, indent=2)
        fh.write("\n")
    for cell in cells:
        mark = " chosen" if cell.chosen else ""
        print(f"patch={cell.patch_len} stride={cell.stride} "
              f"mean={cell.summary['mean']:.4f} wall_s={cell.wall_time_s:.1f}{mark}")
    print(f"cells={len(cells)} out={args.out}")
    return 0


def cmd_export_embeddings(args) -> int:
    state = load_checkpoint(args.checkpoint)
    segments = _segments_from_args(args, window=state.config.window_len)
    rows = export_embeddings(state, segments, args.out)
    print(f"rows={rows} out={args.out}")
    return 0


def cmd_export_spectrogram(args) -> int:
    signals = load_manifest(args.manifest)
    if not 0 <= args.entry < len(signals):
        raise PlanError(f"entry {args.entry} out of range, manifest has {len(signals)}")
    signal = signals[args.entry]
    gram = stft(signal.samples, signal.sample_rate_hz, window_len=args.stft_window,
                hop=args.hop, window_fn=args.window_fn)
    frames = write_spectrogram_csv(gram, args.out)
    print(f"frames={frames} bins={gram.freqs_hz.size} out={args.out}")
    return 0


_COMMANDS = {
    "extract": cmd_extract,
    "corpus": cmd_corpus,
    "train": cmd_train,
    "eval": cmd_eval,
    "protocol": cmd_protocol,
    "sweep": cmd_sweep,
    "export-embeddings": cmd_export_embeddings,
    "export-spectrogram": cmd_export_spectrogram,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    _print_header(args)
    try:
        if args.threads and args.threads > 0:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                return _COMMANDS[args.command](args)
        return _COMMANDS[args.command](args)
    except PlanError as exc:
        print(str(exc), file=sys.stderr)
        print(_error_line(exc), file=sys.stderr)
        return 2
    except BdlmError as exc:
        print(str(exc), file=sys.stderr)
        print(_error_line(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        print(f"error kind=OSError msg={exc}", file=sys.stderr)
        return 1


def _error_line(exc: BdlmError) -> str:
    parts = [f"error kind={exc.kind}"]
    for key, value in exc.fields.items():
        parts.append(f"{key}={value}")
    return " ".join(parts)


if __name__ == "__main__":
    sys.exit(main())
