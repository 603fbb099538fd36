"""Synthetic repetitive-action pose sequences with exact ground truth.

Each action template holds two keyposes on the 33-joint skeleton.  A cycle
moves sinusoidally from keypose I to keypose II and back; keypose I is
annotated at the start of every cycle and keypose II at its midpoint.
Optional nuisances: per-cycle period jitter and amplitude variation,
exception segments of unrelated motion between cycles, a global camera
rotation that drifts per frame, and Gaussian coordinate noise.

Poses are built in a body frame (x to the subject's left, y up, z away from
the camera, height about 1) and emitted in image-like units: x and y in
[0, 1] with y pointing down, z scaled like x.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .sequence import Annotation, PoseSequence

IMAGE_SCALE = 0.8

# neutral standing pose, arms hanging
_NEUTRAL = {
    0: (0.0, 0.93, -0.05), 1: (0.015, 0.95, -0.04), 2: (0.03, 0.95, -0.035),
    3: (0.045, 0.95, -0.03), 4: (-0.015, 0.95, -0.04), 5: (-0.03, 0.95, -0.035),
    6: (-0.045, 0.95, -0.03), 7: (0.07, 0.93, 0.0), 8: (-0.07, 0.93, 0.0),
    9: (0.02, 0.90, -0.04), 10: (-0.02, 0.90, -0.04),
    11: (0.17, 0.80, 0.0), 12: (-0.17, 0.80, 0.0),
    13: (0.19, 0.62, 0.0), 14: (-0.19, 0.62, 0.0),
    15: (0.20, 0.45, 0.0), 16: (-0.20, 0.45, 0.0),
    17: (0.21, 0.40, 0.01), 18: (-0.21, 0.40, 0.01),
    19: (0.20, 0.39, -0.01), 20: (-0.20, 0.39, -0.01),
    21: (0.19, 0.41, -0.02), 22: (-0.19, 0.41, -0.02),
    23: (0.10, 0.50, 0.0), 24: (-0.10, 0.50, 0.0),
    25: (0.10, 0.27, 0.0), 26: (-0.10, 0.27, 0.0),
    27: (0.10, 0.04, 0.0), 28: (-0.10, 0.04, 0.0),
    29: (0.10, 0.01, 0.03), 30: (-0.10, 0.01, 0.03),
    31: (0.11, 0.0, -0.08), 32: (-0.11, 0.0, -0.08),
}

HAND_L, HAND_R = [17, 19, 21], [18, 20, 22]
ARM_L, ARM_R = [13, 15] + HAND_L, [14, 16] + HAND_R
FOREARM_L, FOREARM_R = [15] + HAND_L, [16] + HAND_R
LEG_L, LEG_R = [25, 27, 29, 31], [26, 28, 30, 32]
SHIN_L, SHIN_R = [27, 29, 31], [28, 30, 32]
FOOT_L, FOOT_R = [29, 31], [30, 32]
UPPER = list(range(23))


def neutral_pose() -> np.ndarray:
    return np.array([_NEUTRAL[i] for i in range(33)], dtype=float)


def rotation(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise ValueError(axis)


def _rotate(pose: np.ndarray, joints, pivot, axis: str, angle: float) -> np.ndarray:
    out = pose.copy()
    center = pose[pivot] if np.ndim(pivot) == 0 else np.asarray(pivot, dtype=float)
    out[joints] = (pose[joints] - center) @ rotation(axis, angle).T + center
    return out


# Rotation about +x by a positive angle swings a downward limb toward -z,
# i.e. forward toward the camera.

def _flex(pose, chain, pivot, angle):
    return _rotate(pose, chain, pivot, "x", angle)


def _arms_crossed(pose):
    p = _flex(pose, ARM_L, 11, np.pi / 2.2)
    p = _flex(p, ARM_R, 12, np.pi / 2.2)
    p = _rotate(p, FOREARM_L, 13, "y", np.pi / 2.1)
    p = _rotate(p, FOREARM_R, 14, "y", -np.pi / 2.1)
    return p


def _hands_on_hips(pose):
    p = _rotate(pose, ARM_L, 11, "z", np.pi / 5)
    p = _rotate(p, ARM_R, 12, "z", -np.pi / 5)
    p = _rotate(p, FOREARM_L, 13, "z", -np.pi / 2.2)
    p = _rotate(p, FOREARM_R, 14, "z", np.pi / 2.2)
    return p


def _squat(pose, depth=np.deg2rad(65), lean=np.deg2rad(30)):
    p = pose.copy()
    ankle_y = p[27, 1]
    for leg, shin, foot, hip, knee in ((LEG_L, SHIN_L, FOOT_L, 23, 25),
                                       (LEG_R, SHIN_R, FOOT_R, 24, 26)):
        p = _flex(p, leg, hip, depth)
        p = _flex(p, shin, knee, -2 * depth)
        p = _flex(p, foot, shin[0], depth)
    mid_hip = (p[23] + p[24]) / 2
    p = _flex(p, UPPER, mid_hip, -lean)
    p[:, 1] += ankle_y - p[27, 1]
    return p


def _lunge(pose, front=np.deg2rad(80), back=np.deg2rad(35)):
    p = _flex(pose, LEG_L, 23, front)
    p = _flex(p, SHIN_L, 25, -front)
    p = _flex(p, LEG_R, 24, -back)
    p = _flex(p, SHIN_R, 26, -front + back)
    p = _flex(p, FOOT_R, 28, front - back)
    p[:, 1] += pose[27, 1] - p[27, 1]
    return p


def _wide_stance(pose, angle=np.deg2rad(8)):
    p = _rotate(pose, LEG_L, 23, "z", angle)
    return _rotate(p, LEG_R, 24, "z", -angle)


def _front_raise_up(pose):
    p = _flex(pose, ARM_L, 11, np.pi / 2)
    return _flex(p, ARM_R, 12, np.pi / 2)


def default_templates() -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Keyposes (I, II) for the three built-in actions."""
    base = neutral_pose()
    crossed = _arms_crossed(base)
    stance = _wide_stance(base)
    hips = _hands_on_hips(base)
    return {
        "squat": (crossed, _squat(crossed)),
        "front_raise": (stance, _front_raise_up(stance)),
        "lunge": (_lunge(hips), hips),
    }


DEFAULT_ACTIONS = ("squat", "front_raise", "lunge")


@dataclass
class SynthSpec:
    action: str = "squat"
    cycles: int = 5
    period_frames: int = 30
    period_jitter: float = 0.2
    amplitude_range: tuple[float, float] = (1.0, 1.0)
    noise_sigma: float = 0.0
    camera_yaw0: float = 0.0
    camera_pitch0: float = 0.0
    camera_yaw_drift: float = 0.0
    camera_pitch_drift: float = 0.0
    body_scale: float = 1.0
    hold_frames: tuple[int, int] = (0, 0)
    exceptions: list[tuple[int, int]] = field(default_factory=list)  # (after cycle, length)
    fps: float = 30.0
    seed: int = 0
    sequence_id: str = "synth"

    def validate(self) -> None:
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.period_frames * (1 - self.period_jitter) < 4:
            raise ValueError("period must stay >= 4 frames under jitter")
        for pos, length in self.exceptions:
            if not 0 <= pos <= self.cycles or length < 1:
                raise ValueError(f"bad exception segment {(pos, length)}")


def _exception_frames(base: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth random limb motion around the neutral pose, unrelated to any template."""
    knots = max(2, length // 8 + 2)
    t_knots = np.linspace(0, 1, knots)
    t = np.linspace(0, 1, length)
    angles = {name: np.interp(t, t_knots, rng.uniform(lo, hi, size=knots))
              for name, lo, hi in (("abd_l", 0.2, 1.3), ("abd_r", -1.3, -0.2),
                                   ("twist", -0.4, 0.4), ("side", -0.25, 0.25),
                                   ("elbow_l", 0.0, 1.2), ("elbow_r", -1.2, 0.0))}
    out = np.empty((length, 33, 3))
    for i in range(length):
        p = _rotate(base, ARM_L, 11, "z", angles["abd_l"][i])
        p = _rotate(p, ARM_R, 12, "z", angles["abd_r"][i])
        p = _rotate(p, FOREARM_L, 13, "z", angles["elbow_l"][i])
        p = _rotate(p, FOREARM_R, 14, "z", angles["elbow_r"][i])
        mid_hip = (p[23] + p[24]) / 2
        p = _rotate(p, UPPER, mid_hip, "y", angles["twist"][i])
        p = _rotate(p, UPPER, mid_hip, "z", angles["side"][i])
        out[i] = p
    return out


def _blend(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    w = np.linspace(0, 1, n + 2)[1:-1]
    return a[None] * (1 - w)[:, None, None] + b[None] * w[:, None, None]


def generate(spec: SynthSpec, templates: dict | None = None) -> PoseSequence:
    spec.validate()
    templates = templates or default_templates()
    pose_i, pose_ii = templates[spec.action]
    rng = np.random.default_rng(spec.seed)
    frames: list[np.ndarray] = []
    annotations: list[Annotation] = []
    exc_after = {}
    for pos, length in spec.exceptions:
        exc_after.setdefault(pos, []).append(length)
    neutral = neutral_pose()
    lo, hi = spec.hold_frames

    def add_exception(pos: int) -> None:
        for length in exc_after.get(pos, []):
            seg = _exception_frames(neutral, length, rng)
            ramp = 6
            frames.extend(_blend(pose_i, seg[0], ramp))
            frames.extend(seg)
            frames.extend(_blend(seg[-1], pose_i, ramp))

    frames.extend([pose_i] * int(rng.integers(lo, hi + 1)))
    add_exception(0)
    for c in range(spec.cycles):
        period = int(round(spec.period_frames * (1 + rng.uniform(-spec.period_jitter,
                                                                 spec.period_jitter))))
        period += period % 2
        amp = rng.uniform(*spec.amplitude_range)
        start = len(frames)
        for j in range(period):
            w = amp * 0.5 * (1 - np.cos(2 * np.pi * j / period))
            frames.append(pose_i * (1 - w) + pose_ii * w)
        annotations.append(Annotation(start, spec.action, "I"))
        annotations.append(Annotation(start + period // 2, spec.action, "II"))
        add_exception(c + 1)
    frames.append(pose_i)
    frames.extend([pose_i] * int(rng.integers(lo, hi + 1)))

    body = np.stack(frames) * spec.body_scale
    center = (neutral[23] + neutral[24]) / 2 * spec.body_scale
    t = np.arange(len(body))
    coords = np.empty_like(body)
    for i in t:
        rot = rotation("y", spec.camera_yaw0 + spec.camera_yaw_drift * i) @ \
            rotation("x", spec.camera_pitch0 + spec.camera_pitch_drift * i)
        coords[i] = (body[i] - center) @ rot.T + center
    if spec.noise_sigma > 0:
        coords = coords + rng.normal(0.0, spec.noise_sigma, size=coords.shape)
    image = np.empty_like(coords)
    image[..., 0] = 0.5 + IMAGE_SCALE * coords[..., 0]
    image[..., 1] = 0.95 - IMAGE_SCALE * coords[..., 1]
    image[..., 2] = IMAGE_SCALE * coords[..., 2]
    return PoseSequence(coords=image, fps=spec.fps, sequence_id=spec.sequence_id,
                        skeleton="blazepose33", action=spec.action, annotations=annotations,
                        true_count=spec.cycles)


@dataclass
class CorpusConfig:
    actions: tuple[str, ...] = DEFAULT_ACTIONS
    train_per_class: int = 20
    test_per_class: int = 10
    cycles_range: tuple[int, int] = (3, 10)
    period_range: tuple[int, int] = (24, 40)
    period_jitter: float = 0.2
    amplitude_range: tuple[float, float] = (0.85, 1.0)
    noise_sigma: float = 0.004
    yaw0_range: float = 0.6
    yaw_drift_max: float = 0.004
    pitch_drift_max: float = 0.001
    scale_range: tuple[float, float] = (0.9, 1.1)
    exception_prob: float = 0.5
    exception_length: tuple[int, int] = (20, 50)
    hold_frames: tuple[int, int] = (0, 8)
    seed: int = 0


def corpus_specs(cfg: CorpusConfig) -> list[tuple[str, SynthSpec]]:
    """Deterministic (split, spec) list for a corpus."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for split, per_class in (("train", cfg.train_per_class), ("test", cfg.test_per_class)):
        for action in cfg.actions:
            for i in range(per_class):
                cycles = int(rng.integers(cfg.cycles_range[0], cfg.cycles_range[1] + 1))
                exceptions = []
                if rng.random() < cfg.exception_prob:
                    exceptions.append((int(rng.integers(1, cycles)),
                                       int(rng.integers(*cfg.exception_length))))
                spec = SynthSpec(
                    action=action, cycles=cycles,
                    period_frames=int(rng.integers(cfg.period_range[0], cfg.period_range[1] + 1)),
                    period_jitter=cfg.period_jitter, amplitude_range=cfg.amplitude_range,
                    noise_sigma=cfg.noise_sigma,
                    camera_yaw0=float(rng.uniform(-cfg.yaw0_range, cfg.yaw0_range)),
                    camera_yaw_drift=float(rng.uniform(-cfg.yaw_drift_max, cfg.yaw_drift_max)),
                    camera_pitch_drift=float(rng.uniform(-cfg.pitch_drift_max,
                                                         cfg.pitch_drift_max)),
                    body_scale=float(rng.uniform(*cfg.scale_range)),
                    hold_frames=cfg.hold_frames, exceptions=exceptions,
                    seed=int(rng.integers(2**31)), sequence_id=f"{split}_{action}_{i:03d}")
                out.append((split, spec))
    return out


def make_corpus(cfg: CorpusConfig, out_dir: str | Path) -> dict:
    """Generate every sequence, write pose files, annotations and a manifest; return the manifest."""
    from . import io as gio

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise gio.FormatError(str(out_dir), None, f"cannot create corpus directory: {exc}") from exc
    if len(cfg.actions) < 2:
        raise ValueError("a corpus needs at least two action classes for triplet mining")
    sequences = []
    entries = []
    for split, spec in corpus_specs(cfg):
        seq = generate(spec)
        fname = f"{spec.sequence_id}.pose.jsonl"
        gio.write_pose_file(out_dir / fname, seq)
        sequences.append(seq)
        entries.append({"sequence_id": seq.sequence_id, "split": split, "action": seq.action,
                        "file": fname, "sha256": gio.file_sha256(out_dir / fname),
                        "true_count": seq.true_count,
                        "annotations": len(seq.annotations)})
    gio.write_annotations(out_dir / gio.ANNOTATIONS_NAME, sequences)
    manifest = {"version": 1, "actions": list(cfg.actions),
                "corpus_config": json.loads(json.dumps(asdict(cfg))), "sequences": entries}
    manifest["hash"] = manifest_hash(manifest)
    gio.write_manifest(out_dir / gio.MANIFEST_NAME, manifest)
    return manifest


def manifest_hash(manifest: dict) -> str:
    body = {k: v for k, v in manifest.items() if k != "hash"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()
