"""Command-line entry point: ``gmfl {gen-synth,train,count,eval,gradcheck}``.

Every command prints a one-line JSON summary on stdout and exits 0.  On
failure it prints one JSON object with an ``error`` key on stderr and exits
with status 2 (bad input) or 1 (runtime failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as gio
from .config import ConfigError, RunConfig, load_config
from .counting import infer_and_count
from .metrics import EvalRecord, mae, obo
from .model import GMFLNet
from .numeric.checkpoint import CheckpointError
from .synth import make_corpus
from .training import (EmptyDatasetError, TrainingError, build_dataset, gradcheck_model,
                       split_sequences, train)

log = logging.getLogger("gmflnet")


class UsageError(ValueError):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_gen_synth(args) -> dict:
    cfg = load_config(args.spec)
    manifest = make_corpus(cfg.synth, args.out)
    return {"command": "gen-synth", "out": str(args.out), "sequences": len(manifest["sequences"]),
            "manifest_hash": manifest["hash"]}


def cmd_train(args) -> dict:
    cfg = load_config(args.config)
    corpus = gio.load_corpus(args.data, split="train")
    if not corpus:
        raise EmptyDatasetError(f"{args.data}: no training sequences in manifest")
    model = GMFLNet(cfg.model)
    tr, va = split_sequences(corpus, cfg.train.val_fraction, cfg.train.seed)
    train_data = build_dataset(tr, model.skeleton, cfg.model.actions)
    val_data = build_dataset(va, model.skeleton, cfg.model.actions) if va else None
    result = train(model, train_data, val_data, cfg.train, cfg.loss)
    meta = {"best_epoch": result.best_epoch, "best_val_loss": result.best_val_loss,
            "lr_initial": result.lr_initial, "epochs": len(result.history)}
    model.save(args.out, meta)
    history = Path(args.history) if args.history else Path(str(args.out) + ".history.csv")
    gio.write_history(history, result.history)
    return {"command": "train", "checkpoint": str(args.out), "history": str(history),
            "train_items": len(train_data), **meta}


def _pose_inputs(path: Path, split: str | None) -> list[Path]:
    if path.is_dir():
        if split is not None:
            manifest = gio.read_manifest(path / gio.MANIFEST_NAME)
            return [path / e["file"] for e in manifest["sequences"] if e["split"] == split]
        files = sorted(path.glob("*.pose.jsonl"))
        if not files:
            raise gio.FormatError(path, None, "directory holds no *.pose.jsonl files")
        return files
    if split is not None:
        raise UsageError("--split needs a corpus directory as input")
    return [path]


def cmd_count(args) -> dict:
    trigger = load_config(args.config).trigger if args.config else RunConfig().trigger
    model = GMFLNet.load(args.checkpoint)
    rows, scores = [], {}
    for f in _pose_inputs(Path(args.input), args.split):
        seq = gio.read_pose_file(f)
        result = infer_and_count(model, seq, trigger)
        action = args.action or seq.action
        if action is None or action not in result.counts:
            action = result.dominant_action()
        rows.append((seq.sequence_id, result.counts[action], action))
        scores[seq.sequence_id] = result.series.scores
    out = Path(args.out)
    gio.write_predictions(out, rows)
    score_path = Path(args.scores) if args.scores else out.with_suffix(".scores.jsonl")
    gio.write_scores(score_path, scores, model.config.actions)
    return {"command": "count", "predictions": str(out), "scores": str(score_path),
            "videos": len(rows), "counts": {sid: c for sid, c, _ in rows}}


def cmd_eval(args) -> dict:
    preds = gio.read_predictions(args.predictions)
    manifest = gio.read_manifest(args.manifest)
    entries = [e for e in manifest["sequences"] if args.split is None or e["split"] == args.split]
    unknown = set(preds) - {e["sequence_id"] for e in manifest["sequences"]}
    if unknown:
        raise UsageError(f"predictions for ids absent from the manifest: {sorted(unknown)[:5]}")
    records = []
    for e in entries:
        if e["sequence_id"] not in preds:
            if args.split is None:
                continue
            raise UsageError(f"no prediction for {e['sequence_id']!r}")
        records.append(EvalRecord(e["sequence_id"], e["true_count"], preds[e["sequence_id"]]))
    if not records:
        raise UsageError("no predictions match the manifest")
    summary = {"videos": len(records), "mae": mae(records), "obo": obo(records)}
    gio.write_report(args.out, summary,
                     [(r.video_id, r.true_count, r.predicted_count) for r in records])
    return {"command": "eval", "report": str(args.out), **summary}


def cmd_gradcheck(args) -> dict:
    cfg = load_config(args.config)
    report = gradcheck_model(GMFLNet(cfg.model), cfg.loss, batch=args.batch, seed=args.seed,
                             step=args.step)
    worst = max(report.values())
    out = {"command": "gradcheck", "max_rel_error": worst, "parameters": len(report)}
    if args.tolerance is not None and not worst < args.tolerance:
        raise TrainingError(f"max relative gradient error {worst:.3e} >= {args.tolerance:g}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmfl", description="Skeleton-based repetition counting.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    s.add_argument("spec", help="config file; its [synth] section is used")
    s.add_argument("out", help="output directory")
    s.set_defaults(func=cmd_gen_synth)

    s = sub.add_parser("train", help="train a model on a corpus's train split")
    s.add_argument("config")
    s.add_argument("data", help="corpus directory with manifest.json and annotations.csv")
    s.add_argument("out", help="checkpoint path")
    s.add_argument("--history", help="loss-history CSV (default: <out>.history.csv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("count", help="count repetitions in pose files")
    s.add_argument("checkpoint")
    s.add_argument("input", help="pose file or directory of *.pose.jsonl")
    s.add_argument("--out", default="predictions.csv")
    s.add_argument("--scores", help="score dump (default: <out stem>.scores.jsonl)")
    s.add_argument("--config", help="config file whose [trigger] section sets thresholds")
    s.add_argument("--split", help="with a corpus directory: only files of this split")
    s.add_argument("--action", help="count this action instead of the header or dominant one")
    s.set_defaults(func=cmd_count)

    s = sub.add_parser("eval", help="score predictions against a manifest")
    s.add_argument("predictions")
    s.add_argument("manifest")
    s.add_argument("--out", default="report.txt")
    s.add_argument("--split", help="require a prediction for every entry of this split")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of the configured model")
    s.add_argument("config")
    s.add_argument("--batch", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--step", type=float, default=1e-5)
    s.add_argument("--tolerance", type=float, help="fail when the error reaches this value")
    s.set_defaults(func=cmd_gradcheck)
    return p


INPUT_ERRORS = (gio.FormatError, ConfigError, CheckpointError, UsageError, EmptyDatasetError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        _emit(args.func(args))
        return 0
    except INPUT_ERRORS as exc:
        err = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        if isinstance(exc, gio.FormatError):
            err.update(path=exc.path, line=exc.line, message=exc.message)
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    except (TrainingError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "command": args.command,
                          "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
