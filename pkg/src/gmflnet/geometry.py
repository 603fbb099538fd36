"""Skeleton topology and per-frame joint distances and angles.

The default skeleton is the 33-landmark BlazePose set, in landmark order::

     0 nose             11 left_shoulder   22 right_thumb
     1 left_eye_inner   12 right_shoulder  23 left_hip
     2 left_eye         13 left_elbow      24 right_hip
     3 left_eye_outer   14 right_elbow     25 left_knee
     4 right_eye_inner  15 left_wrist      26 right_knee
     5 right_eye        16 right_wrist     27 left_ankle
     6 right_eye_outer  17 left_pinky      28 right_ankle
     7 left_ear         18 right_pinky     29 left_heel
     8 right_ear        19 left_index      30 right_heel
     9 mouth_left       20 right_index     31 left_foot_index
    10 mouth_right      21 left_thumb      32 right_foot_index

Angles follow the segment-direction convention: for a triple (a, b, c) the
angle is taken between the vectors a->b and b->c, so a straight limb gives 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

EPS_LEN = 1e-8
DEGENERATE_ANGLE = 0.0

BLAZEPOSE_JOINTS = (
    "nose", "left_eye_inner", "left_eye", "left_eye_outer", "right_eye_inner", "right_eye",
    "right_eye_outer", "left_ear", "right_ear", "mouth_left", "mouth_right",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist", "left_pinky", "right_pinky", "left_index", "right_index", "left_thumb",
    "right_thumb", "left_hip", "right_hip", "left_knee", "right_knee", "left_ankle",
    "right_ankle", "left_heel", "right_heel", "left_foot_index", "right_foot_index",
)

# BlazePose connection graph without the closing edges of the hand and foot loops
BLAZEPOSE_BONES = (
    (0, 1), (1, 2), (2, 3), (3, 7), (0, 4), (4, 5), (5, 6), (6, 8), (9, 10),
    (11, 12), (11, 23), (12, 24), (23, 24),
    (11, 13), (13, 15), (15, 17), (15, 19), (15, 21),
    (12, 14), (14, 16), (16, 18), (16, 20), (16, 22),
    (23, 25), (25, 27), (27, 29), (29, 31),
    (24, 26), (26, 28), (28, 30), (30, 32),
)

BLAZEPOSE_DISTANCES = (
    (15, 11), (16, 12),  # wrist <-> shoulder
    (27, 23), (28, 24),  # ankle <-> hip
    (15, 16),            # wrist <-> wrist
    (27, 28),            # ankle <-> ankle
)


class SkeletonError(ValueError):
    pass


def bone_triples(bones) -> list[tuple[int, int, int]]:
    """All (a, b, c) with a-b and b-c both bones and a < c."""
    adj: dict[int, set[int]] = {}
    for a, b in bones:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    out = []
    for b in sorted(adj):
        for a, c in itertools.combinations(sorted(adj[b]), 2):
            out.append((a, b, c))
    return out


@dataclass(frozen=True)
class Skeleton:
    joint_names: tuple[str, ...]
    distance_pairs: tuple[tuple[int, int], ...]
    angle_triples: tuple[tuple[int, int, int], ...]
    name: str = "custom"
    bones: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        n = len(self.joint_names)
        if n < 1:
            raise SkeletonError("skeleton needs at least one joint")
        for a, b in self.distance_pairs:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise SkeletonError(f"bad distance pair {(a, b)} for {n} joints")
        for t in self.angle_triples:
            if not all(0 <= i < n for i in t) or len(set(t)) != 3:
                raise SkeletonError(f"bad angle triple {t} for {n} joints")
        if self.feature_count == 0:
            raise SkeletonError("skeleton defines no distances or angles")

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    @property
    def feature_count(self) -> int:
        return len(self.distance_pairs) + len(self.angle_triples)

    def incidence(self, distances: bool = True, angles: bool = True) -> np.ndarray:
        """N x V 0/1 mask: joint i touches feature v.  Disabled feature kinds are all-zero."""
        mask = np.zeros((self.joint_count, self.feature_count))
        if distances:
            for v, pair in enumerate(self.distance_pairs):
                mask[list(pair), v] = 1.0
        if angles:
            off = len(self.distance_pairs)
            for v, triple in enumerate(self.angle_triples):
                mask[list(triple), off + v] = 1.0
        return mask

    def to_dict(self) -> dict:
        return {"name": self.name, "joint_names": list(self.joint_names),
                "distance_pairs": [list(p) for p in self.distance_pairs],
                "angle_triples": [list(t) for t in self.angle_triples],
                "bones": [list(b) for b in self.bones]}

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        return cls(joint_names=tuple(d["joint_names"]),
                   distance_pairs=tuple(tuple(p) for p in d["distance_pairs"]),
                   angle_triples=tuple(tuple(t) for t in d["angle_triples"]),
                   name=d.get("name", "custom"),
                   bones=tuple(tuple(b) for b in d.get("bones", ())))


def blazepose_skeleton() -> Skeleton:
    return Skeleton(joint_names=BLAZEPOSE_JOINTS, distance_pairs=BLAZEPOSE_DISTANCES,
                    angle_triples=tuple(bone_triples(BLAZEPOSE_BONES)), name="blazepose33",
                    bones=BLAZEPOSE_BONES)


def toy_skeleton() -> Skeleton:
    """Four-joint chain used for gradient checks and small tests."""
    bones = ((0, 1), (1, 2), (2, 3))
    return Skeleton(joint_names=("j0", "j1", "j2", "j3"), distance_pairs=((0, 3), (0, 2)),
                    angle_triples=tuple(bone_triples(bones)), name="toy4", bones=bones)


SKELETONS = {"blazepose33": blazepose_skeleton, "toy4": toy_skeleton}


def get_skeleton(name: str) -> Skeleton:
    try:
        return SKELETONS[name]()
    except KeyError:
        raise SkeletonError(f"unknown skeleton {name!r}; known: {sorted(SKELETONS)}") from None


def joint_distance(pa, pb) -> float:
    return float(np.linalg.norm(np.asarray(pb, dtype=float) - np.asarray(pa, dtype=float)))


def joint_angle(pa, pb, pc, return_flag: bool = False):
    """Angle between a->b and b->c in [0, pi].

    Evaluated as ``atan2(|u x w|, u . w)``, which equals the arccos of the
    clamped cosine but keeps full precision near 0 and pi.  A segment shorter than ``EPS_LEN`` makes the angle undefined; the
    function then returns ``DEGENERATE_ANGLE`` (and ``True`` as the flag when
    ``return_flag`` is set).
    """
    u = np.asarray(pb, dtype=float) - np.asarray(pa, dtype=float)
    w = np.asarray(pc, dtype=float) - np.asarray(pb, dtype=float)
    nu, nw = np.linalg.norm(u), np.linalg.norm(w)
    if nu < EPS_LEN or nw < EPS_LEN:
        return (DEGENERATE_ANGLE, True) if return_flag else DEGENERATE_ANGLE
    theta = float(np.arctan2(np.linalg.norm(np.cross(u, w)), np.dot(u, w)))
    return (theta, False) if return_flag else theta


@dataclass
class GeometricFrame:
    values: np.ndarray          # (V,) distances then angles
    degenerate: np.ndarray      # (V,) bool, True where an angle fell back to the default


def sequence_geometry(coords: np.ndarray, skeleton: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized geometry for a stack of frames.

    ``coords`` has shape (T, N, 3).  Returns ``(values, degenerate)``, both
    of shape (T, V).
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 3 or coords.shape[1:] != (skeleton.joint_count, 3):
        raise SkeletonError(f"frames of shape {coords.shape[1:]} do not fit skeleton "
                            f"{skeleton.name!r} with {skeleton.joint_count} joints")
    t = coords.shape[0]
    parts, flags = [], []
    if skeleton.distance_pairs:
        pairs = np.asarray(skeleton.distance_pairs)
        d = np.linalg.norm(coords[:, pairs[:, 1]] - coords[:, pairs[:, 0]], axis=-1)
        parts.append(d)
        flags.append(np.zeros_like(d, dtype=bool))
    if skeleton.angle_triples:
        tri = np.asarray(skeleton.angle_triples)
        u = coords[:, tri[:, 1]] - coords[:, tri[:, 0]]
        w = coords[:, tri[:, 2]] - coords[:, tri[:, 1]]
        nu = np.linalg.norm(u, axis=-1)
        nw = np.linalg.norm(w, axis=-1)
        bad = (nu < EPS_LEN) | (nw < EPS_LEN)
        ang = np.arctan2(np.linalg.norm(np.cross(u, w), axis=-1), np.einsum("tvi,tvi->tv", u, w))
        ang = np.where(bad, DEGENERATE_ANGLE, ang)
        parts.append(ang)
        flags.append(bad)
    if not parts:
        return np.zeros((t, 0)), np.zeros((t, 0), dtype=bool)
    return np.concatenate(parts, axis=1), np.concatenate(flags, axis=1)


def frame_geometry(frame, skeleton: Skeleton) -> GeometricFrame:
    values, flags = sequence_geometry(np.asarray(frame, dtype=float)[None], skeleton)
    return GeometricFrame(values=values[0], degenerate=flags[0])
