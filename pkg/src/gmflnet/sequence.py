"""In-memory pose sequences as ingested from pose files or produced by the generator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SALIENT_POSES = ("I", "II")


@dataclass
class Annotation:
    frame: int
    action: str
    pose: str        # "I" or "II"

    def __post_init__(self):
        if self.pose not in SALIENT_POSES:
            raise ValueError(f"salient pose must be one of {SALIENT_POSES}, got {self.pose!r}")


@dataclass
class PoseSequence:
    coords: np.ndarray                       # (T, N, 3)
    fps: float = 30.0
    sequence_id: str = "seq"
    skeleton: str = "blazepose33"
    action: str | None = None
    annotations: list[Annotation] = field(default_factory=list)
    true_count: int | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 3 or self.coords.shape[2] != 3:
            raise ValueError(f"coords must have shape (T, N, 3), got {self.coords.shape}")
        if self.coords.shape[0] < 1:
            raise ValueError("a pose sequence needs at least one frame")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError(f"sequence {self.sequence_id!r} has non-finite coordinates")
        for a in self.annotations:
            if not 0 <= a.frame < len(self):
                raise ValueError(f"annotation frame {a.frame} outside [0, {len(self)})")
        if self.true_count is not None and self.true_count < 0:
            raise ValueError("true_count must be nonnegative")

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def joint_count(self) -> int:
        return self.coords.shape[1]

    def frames_with(self, pose: str) -> list[int]:
        return [a.frame for a in self.annotations if a.pose == pose]
