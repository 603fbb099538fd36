"""Counting accuracy over a set of videos: relative mean absolute error and off-by-one rate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class EvalRecord:
    video_id: str
    true_count: int
    predicted_count: int


def _as_records(records) -> list[EvalRecord]:
    out = list(records)
    if not out:
        raise ValueError("no records to evaluate")
    return out


def mae(records: Iterable[EvalRecord]) -> float:
    """Mean of ``|true - pred| / true``; every true count must be at least 1."""
    recs = _as_records(records)
    total = 0.0
    for r in recs:
        if r.true_count < 1:
            raise ValueError(f"video {r.video_id!r}: true count must be >= 1, got {r.true_count}")
        total += abs(r.true_count - r.predicted_count) / r.true_count
    return total / len(recs)


def obo(records: Iterable[EvalRecord]) -> float:
    """Fraction of videos whose prediction is within one of the truth."""
    recs = _as_records(records)
    return sum(abs(r.true_count - r.predicted_count) <= 1 for r in recs) / len(recs)


def records_from(ids: Sequence[str], truth: Sequence[int], pred: Sequence[int]) -> list[EvalRecord]:
    if not len(ids) == len(truth) == len(pred):
        raise ValueError("ids, truth and pred must have equal length")
    return [EvalRecord(str(i), int(t), int(p)) for i, t, p in zip(ids, truth, pred)]
