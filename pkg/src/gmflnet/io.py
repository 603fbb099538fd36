"""On-disk formats.

Pose file (``*.pose.jsonl``), one JSON object per line::

    {"format": "gmfl-pose", "version": 1, "sequence_id": "...", "skeleton": "blazepose33",
     "joints": 33, "fps": 30.0, "action": "squat"}            <- header ("action" optional)
    {"frame": 0, "coords": [x0, y0, z0, x1, y1, z1, ...]}     <- N*3 numbers, joint order
    {"frame": 1, "coords": [...]}

Frame indices run contiguously from 0.  Floats are written with ``repr``
precision so a write/read round trip is exact.

Annotation file (``annotations.csv``), columns ``sequence_id,action,field,value``:
``field`` is ``I`` or ``II`` with ``value`` a frame index, or ``count`` with
``value`` the true repetition count.

Manifest (``manifest.json``): corpus settings plus one entry per sequence
with its split, action, file name, file SHA-256 and true count.

Predictions (``predictions.csv``): ``sequence_id,predicted_count,action``.

Loss history (CSV): one row per epoch with the columns of ``HISTORY_FIELDS``.

Evaluation report: ``key = value`` lines (``videos``, ``mae``, ``obo``),
a blank line, then per-video rows ``sequence_id,true_count,predicted_count,abs_error``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .sequence import Annotation, PoseSequence

POSE_FORMAT = "gmfl-pose"
POSE_VERSION = 1
ANNOTATIONS_NAME = "annotations.csv"
MANIFEST_NAME = "manifest.json"
ANNOTATION_FIELDS = ("sequence_id", "action", "field", "value")


class FormatError(ValueError):
    """A file failed to parse; carries the path and 1-based line number."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        self.message = message
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")

    def to_json(self) -> str:
        return json.dumps({"error": "format", "path": self.path, "line": self.line,
                           "message": self.message})


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# pose files

def write_pose_file(path, seq: PoseSequence) -> None:
    header = {"format": POSE_FORMAT, "version": POSE_VERSION, "sequence_id": seq.sequence_id,
              "skeleton": seq.skeleton, "joints": seq.joint_count, "fps": seq.fps}
    if seq.action is not None:
        header["action"] = seq.action
    lines = [json.dumps(header)]
    for i, frame in enumerate(seq.coords):
        lines.append(json.dumps({"frame": i, "coords": frame.reshape(-1).tolist()}))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pose_file(path) -> PoseSequence:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(path, 1, "empty pose file (missing header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(path, 1, f"header is not JSON: {exc.msg}") from exc
    if not isinstance(header, dict) or header.get("format") != POSE_FORMAT:
        raise FormatError(path, 1, f"header must declare format {POSE_FORMAT!r}")
    if header.get("version") != POSE_VERSION:
        raise FormatError(path, 1, f"unsupported pose file version {header.get('version')!r}")
    try:
        n = int(header["joints"])
        skeleton = str(header["skeleton"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(path, 1, "header needs integer 'joints' and a 'skeleton' name") from exc
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(path, lineno, f"not JSON: {exc.msg}") from exc
        if not isinstance(rec, dict) or "frame" not in rec or "coords" not in rec:
            raise FormatError(path, lineno, "frame record needs 'frame' and 'coords'")
        if rec["frame"] != len(frames):
            raise FormatError(path, lineno,
                              f"frame index {rec['frame']!r}, expected {len(frames)}")
        coords = rec["coords"]
        if not isinstance(coords, list) or len(coords) != 3 * n:
            raise FormatError(path, lineno, f"expected {3 * n} coordinates")
        try:
            arr = np.array(coords, dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(path, lineno, "coordinates must be numbers") from exc
        if not np.all(np.isfinite(arr)):
            raise FormatError(path, lineno, "non-finite coordinate")
        frames.append(arr.reshape(n, 3))
    if not frames:
        raise FormatError(path, len(lines), "pose file has no frames")
    return PoseSequence(coords=np.stack(frames), fps=float(header.get("fps", 30.0)),
                        sequence_id=str(header.get("sequence_id", path.stem)),
                        skeleton=skeleton, action=header.get("action"))


# annotations

def write_annotations(path, sequences) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ANNOTATION_FIELDS)
        for seq in sequences:
            for a in seq.annotations:
                w.writerow([seq.sequence_id, a.action, a.pose, a.frame])
            if seq.true_count is not None:
                w.writerow([seq.sequence_id, seq.action or "", "count", seq.true_count])


def read_annotations(path) -> dict[str, dict]:
    """Map sequence id -> {"action", "annotations": [Annotation], "true_count"}."""
    path = Path(path)
    out: dict[str, dict] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != ANNOTATION_FIELDS:
            raise FormatError(path, 1, f"header must be {','.join(ANNOTATION_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(path, lineno, f"expected 4 columns, got {len(row)}")
            sid, action, fld, value = row
            try:
                v = int(value)
            except ValueError as exc:
                raise FormatError(path, lineno, f"value {value!r} is not an integer") from exc
            entry = out.setdefault(sid, {"action": action or None, "annotations": [],
                                         "true_count": None})
            if fld == "count":
                entry["true_count"] = v
            elif fld in ("I", "II"):
                entry["annotations"].append(Annotation(v, action, fld))
            else:
                raise FormatError(path, lineno, f"unknown field {fld!r}")
            if action:
                entry["action"] = action
    return out


def attach_annotations(seq: PoseSequence, table: dict[str, dict]) -> PoseSequence:
    entry = table.get(seq.sequence_id)
    if entry is None:
        return seq
    for a in entry["annotations"]:
        if not 0 <= a.frame < len(seq):
            raise FormatError(seq.sequence_id, None,
                              f"annotation frame {a.frame} outside sequence of {len(seq)} frames")
    seq.annotations = list(entry["annotations"])
    seq.true_count = entry["true_count"]
    if seq.action is None:
        seq.action = entry["action"]
    return seq


# manifest

def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, f"not JSON: {exc.msg}") from exc
    if "sequences" not in data:
        raise FormatError(path, None, "manifest has no 'sequences' list")
    return data


def load_corpus(data_dir, split: str | None = None) -> list[PoseSequence]:
    """Read a generated corpus directory, annotations attached."""
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir / MANIFEST_NAME)
    table = read_annotations(data_dir / ANNOTATIONS_NAME)
    out = []
    for entry in manifest["sequences"]:
        if split is not None and entry["split"] != split:
            continue
        seq = read_pose_file(data_dir / entry["file"])
        out.append(attach_annotations(seq, table))
    return out


# predictions and reports

def write_predictions(path, rows) -> None:
    """``rows``: iterable of (sequence_id, predicted_count, action)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sequence_id", "predicted_count", "action"])
        for sid, count, action in rows:
            w.writerow([sid, int(count), action or ""])


def read_predictions(path) -> dict[str, int]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(path, None, f"cannot read file: {exc}") from exc
    out = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["sequence_id", "predicted_count"]:
            raise FormatError(path, 1, "header must start with sequence_id,predicted_count")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                count = int(row[1])
            except (IndexError, ValueError) as exc:
                raise FormatError(path, lineno, "predicted_count must be an integer") from exc
            if count < 0:
                raise FormatError(path, lineno, "predicted_count must be nonnegative")
            out[row[0]] = count
    return out


def write_report(path, summary: dict, rows) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    lines.append("")
    lines.append("sequence_id,true_count,predicted_count,abs_error")
    for sid, truth, pred in rows:
        lines.append(f"{sid},{truth},{pred},{abs(truth - pred)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> tuple[dict, list[tuple[str, int, int]]]:
    summary: dict = {}
    rows = []
    lines = Path(path).read_text().splitlines()
    i = 0
    while i < len(lines) and lines[i].strip():
        key, _, value = lines[i].partition(" = ")
        summary[key] = _parse(value)
        i += 1
    for line in lines[i + 2:]:
        if line.strip():
            sid, truth, pred, _ = line.split(",")
            rows.append((sid, int(truth), int(pred)))
    return summary, rows


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def _parse(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        f = float(s)
        return f if math.isfinite(f) else s
    except ValueError:
        return s


def write_scores(path, series_by_id: dict[str, np.ndarray], actions) -> None:
    """Score dump: JSON lines ``{"sequence_id", "actions", "scores": [[...], ...]}``."""
    with open(path, "w") as fh:
        for sid, scores in series_by_id.items():
            fh.write(json.dumps({"sequence_id": sid, "actions": list(actions),
                                 "scores": np.asarray(scores).tolist()}) + "\n")


HISTORY_FIELDS = ("epoch", "lr", "train_loss", "train_bce", "train_triplet", "val_loss",
                  "lr_reduced")


def write_history(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        w.writeheader()
        for rec in history:
            w.writerow({k: _fmt(rec[k]) if isinstance(rec[k], float) else rec[k]
                        for k in HISTORY_FIELDS})


def read_history(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        rec = {k: float(row[k]) for k in HISTORY_FIELDS[1:-1]}
        rec["epoch"] = int(row["epoch"])
        rec["lr_reduced"] = row["lr_reduced"] == "True"
        out.append(rec)
    return out
