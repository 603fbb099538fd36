"""The full per-frame network: geometry -> local aggregation -> global learning -> head."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .gbfl import GbflConfig, GbflModule
from .geometry import Skeleton, get_skeleton, sequence_geometry
from .head import ClassificationHead, HeadConfig, probabilities
from .mia import MiaConfig, MiaModule
from .numeric import checkpoint
from .numeric.tensor import Tensor


@dataclass
class ModelConfig:
    skeleton: str = "blazepose33"
    actions: tuple[str, ...] = ("squat", "front_raise", "lunge")
    mia: MiaConfig = field(default_factory=MiaConfig)
    gbfl: GbflConfig = field(default_factory=GbflConfig)
    head_widths: tuple[int, ...] = (1024, 512, 256)
    head_pooling: str = "max+avg"
    seed: int = 0

    def __post_init__(self):
        self.actions = tuple(self.actions)
        self.head_widths = tuple(self.head_widths)
        if len(self.actions) < 1:
            raise ValueError("at least one action class is required")

    @property
    def outputs(self) -> int:
        return 2 * len(self.actions)

    def head_config(self) -> HeadConfig:
        return HeadConfig(widths=self.head_widths, outputs=self.outputs, pooling=self.head_pooling)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["actions"] = list(self.actions)
        d["head_widths"] = list(self.head_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["mia"] = MiaConfig(**d["mia"])
        d["gbfl"] = GbflConfig(**d["gbfl"])
        return cls(**d)


def pose_column(action_index: int, pose: str) -> int:
    """Output column of (action, salient pose); pose is ``"I"`` or ``"II"``."""
    if pose not in ("I", "II"):
        raise ValueError(f"salient pose must be 'I' or 'II', got {pose!r}")
    return 2 * action_index + (0 if pose == "I" else 1)


class GMFLNet:
    def __init__(self, config: ModelConfig, skeleton: Skeleton | None = None,
                 zero_output: bool = False):
        self.config = config
        self.skeleton = skeleton if skeleton is not None else get_skeleton(config.skeleton)
        if self.skeleton.name != config.skeleton:
            raise ValueError(f"skeleton {self.skeleton.name!r} does not match config "
                             f"{config.skeleton!r}")
        rng = np.random.default_rng(config.seed)
        self.mia = MiaModule(config.mia, self.skeleton, rng)
        self.gbfl = GbflModule(config.mia.out_dim, config.gbfl, rng)
        self.head = ClassificationHead(config.mia.out_dim, config.head_config(), rng,
                                       zero_output=zero_output)

    @property
    def blocks(self):
        return self.mia.blocks + self.gbfl.blocks + self.head.blocks

    def parameters(self):
        return [p for b in self.blocks for p in b.parameters()]

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for b in self.blocks:
            out.update(b.buffers())
        return out

    def forward(self, coords: np.ndarray, training: bool = False,
                geometry: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """``coords`` (B, N, 3) -> (logits (B, O), embedding (B, W))."""
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 2:
            coords = coords[None]
        if geometry is None:
            geometry, _ = sequence_geometry(coords, self.skeleton)
        n = coords.shape[1]
        f_local = self.mia(coords, geometry, training)
        f_psi = self.gbfl(f_local, n, training)
        return self.head(f_psi, n, training)

    __call__ = forward

    def predict_proba(self, coords: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Inference-mode sigmoid scores, (T, O)."""
        coords = np.asarray(coords, dtype=float)
        out = []
        for start in range(0, len(coords), batch_size):
            logits, _ = self.forward(coords[start:start + batch_size], training=False)
            out.append(probabilities(logits))
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.config.outputs))

    # persistence
    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {p.name: p.data for p in self.parameters()}
        arrays.update(self.buffers())
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = {p.name: p.data for p in self.parameters()}
        own.update(self.buffers())
        missing = set(own) - set(arrays)
        if missing:
            raise checkpoint.CheckpointError(f"checkpoint lacks arrays: {sorted(missing)[:5]}")
        for name, target in own.items():
            src = arrays[name]
            if src.shape != target.shape:
                raise checkpoint.CheckpointError(f"{name}: shape {src.shape} != {target.shape}")
            target[...] = src

    def save(self, path, meta: dict | None = None) -> None:
        cfg = {"model": self.config.to_dict(), "skeleton": self.skeleton.to_dict()}
        checkpoint.save(path, self.state_arrays(), cfg, meta)

    def to_bytes(self, meta: dict | None = None) -> bytes:
        cfg = {"model": self.config.to_dict(), "skeleton": self.skeleton.to_dict()}
        return checkpoint.dumps(self.state_arrays(), cfg, meta)

    @classmethod
    def load(cls, path) -> "GMFLNet":
        arrays, cfg, _ = checkpoint.load(path)
        return cls.from_parts(arrays, cfg)

    @classmethod
    def from_parts(cls, arrays, cfg) -> "GMFLNet":
        model = cls(ModelConfig.from_dict(cfg["model"]), Skeleton.from_dict(cfg["skeleton"]))
        model.load_arrays(arrays)
        return model
