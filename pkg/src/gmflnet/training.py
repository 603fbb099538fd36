"""Salient-frame datasets, the optimization loop, and learning-rate selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Skeleton, sequence_geometry
from .head import LossConfig, batch_triplet_loss, bce_loss, mine_triplets, total_loss
from .model import GMFLNet, pose_column
from .numeric.gradcheck import grad_check_detail
from .numeric.optim import SGD, Adam, ReduceLROnPlateau
from .numeric.tensor import Parameter, Tensor

log = logging.getLogger(__name__)

LR_FALLBACK = 1e-3


class EmptyDatasetError(ValueError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        self.epoch, self.batch = epoch, batch
        super().__init__(message)


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 60
    seed: int = 0
    lr_initial: float = 1e-3
    auto_lr: bool = False
    lr_grid_min: float = 1e-5
    lr_grid_max: float = 1e-1
    lr_grid_points: int = 20
    plateau_patience: int = 6
    plateau_factor: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 so triplets can be formed")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass
class SalientFrameDataset:
    coords: np.ndarray        # (M, N, 3)
    geometry: np.ndarray      # (M, V)
    labels: np.ndarray        # (M, O) one-hot over (action, pose) columns
    actions: np.ndarray       # (M,) action index
    poses: np.ndarray         # (M,) 0 for pose I, 1 for pose II
    sources: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def keys(self) -> np.ndarray:
        return self.labels.argmax(axis=1)

    def subset(self, idx) -> "SalientFrameDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return SalientFrameDataset(self.coords[idx], self.geometry[idx], self.labels[idx],
                                   self.actions[idx], self.poses[idx],
                                   [self.sources[i] for i in idx])


def build_dataset(sequences: Sequence, skeleton: Skeleton,
                  actions: Sequence[str]) -> SalientFrameDataset:
    """One item per annotated frame; unannotated frames are left out."""
    actions = list(actions)
    coords, labels, act, pose, src = [], [], [], [], []
    for seq in sequences:
        if not seq.annotations:
            log.warning("sequence %s has no salient-pose annotations; skipped", seq.sequence_id)
            continue
        for a in seq.annotations:
            if a.action not in actions:
                raise ValueError(f"{seq.sequence_id}: annotation action {a.action!r} not in "
                                 f"{actions}")
            ai = actions.index(a.action)
            y = np.zeros(2 * len(actions))
            y[pose_column(ai, a.pose)] = 1.0
            coords.append(seq.coords[a.frame])
            labels.append(y)
            act.append(ai)
            pose.append(0 if a.pose == "I" else 1)
            src.append(seq.sequence_id)
    if not coords:
        raise EmptyDatasetError("no annotated frames in any sequence")
    coords = np.stack(coords)
    geometry, _ = sequence_geometry(coords, skeleton)
    return SalientFrameDataset(coords, geometry, np.stack(labels), np.asarray(act),
                               np.asarray(pose), src)


def split_sequences(sequences: Sequence, fraction: float, seed: int) -> tuple[list, list]:
    """Hold out ``fraction`` of the sequences (at least one when fraction > 0) for validation."""
    n = len(sequences)
    n_val = int(round(fraction * n))
    if fraction > 0 and n > 1:
        n_val = max(1, min(n_val, n - 1))
    order = np.random.default_rng(seed).permutation(n)
    val = set(order[:n_val].tolist())
    return ([s for i, s in enumerate(sequences) if i not in val],
            [s for i, s in enumerate(sequences) if i in val])


def batch_loss(model: GMFLNet, data: SalientFrameDataset, idx: np.ndarray,
               loss_cfg: LossConfig, rng: np.random.Generator, training: bool = True):
    """Total, BCE and triplet losses on the items ``idx``."""
    logits, emb = model.forward(data.coords[idx], training=training, geometry=data.geometry[idx])
    bce = bce_loss(logits, data.labels[idx])
    trip = batch_triplet_loss(emb, mine_triplets(data.keys[idx], rng), loss_cfg)
    return total_loss(bce, trip, loss_cfg.alpha), bce, trip


def evaluate_loss(model: GMFLNet, data: SalientFrameDataset, loss_cfg: LossConfig,
                  seed: int, batch_size: int = 256) -> float:
    """Inference-mode loss averaged over batches; triplets drawn from a fixed seed."""
    rng = np.random.default_rng(seed)
    total, weight = 0.0, 0
    for start in range(0, len(data), batch_size):
        idx = np.arange(start, min(start + batch_size, len(data)))
        loss, _, _ = batch_loss(model, data, idx, loss_cfg, rng, training=False)
        total += loss.item() * len(idx)
        weight += len(idx)
    return total / weight


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    order = rng.permutation(n)
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    # a lone trailing item cannot form a triplet or batch statistics
    if len(out) > 1 and len(out[-1]) < 2:
        out[-2] = np.concatenate([out[-2], out[-1]])
        out.pop()
    return out


@dataclass
class TrainResult:
    history: list[dict]
    best_epoch: int
    best_val_loss: float
    best_state: dict[str, np.ndarray]
    lr_initial: float


def train(model: GMFLNet, train_data: SalientFrameDataset, val_data: SalientFrameDataset | None,
          config: TrainConfig, loss_cfg: LossConfig | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Adam with reduce-on-plateau; keeps and finally restores the best-validation weights.

    Without a validation set the training loss drives the plateau policy and
    the checkpoint choice.
    """
    loss_cfg = loss_cfg or LossConfig()
    keys = train_data.keys
    if not np.any(np.bincount(keys) >= 2):
        raise ValueError("training data needs at least two items sharing a class-pose label")
    params = model.parameters()
    rng = np.random.default_rng(config.seed)
    lr = config.lr_initial
    if config.auto_lr:
        lr = find_lr(model, train_data, config, loss_cfg)
    opt = Adam(params, lr=lr, betas=(config.beta1, config.beta2), eps=config.adam_eps)
    sched = ReduceLROnPlateau(opt, patience=config.plateau_patience, factor=config.plateau_factor)
    history: list[dict] = []
    best = (math.inf, -1, _copy_state(model))
    for epoch in range(config.max_epochs):
        sums = np.zeros(3)
        count = 0
        epoch_lr = opt.lr
        for b, idx in enumerate(_batches(len(train_data), config.batch_size, rng)):
            opt.zero_grad()
            loss, bce, trip = batch_loss(model, train_data, idx, loss_cfg, rng, training=True)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}", epoch, b)
            loss.backward()
            opt.step()
            sums += np.array([value, bce.item(), trip.item()]) * len(idx)
            count += len(idx)
        train_loss, train_bce, train_trip = sums / count
        if val_data is not None and len(val_data):
            monitor = evaluate_loss(model, val_data, loss_cfg, seed=config.seed + 1)
        else:
            monitor = train_loss
        if not math.isfinite(monitor):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}", epoch)
        record = {"epoch": epoch, "lr": epoch_lr, "train_loss": train_loss,
                  "train_bce": train_bce, "train_triplet": train_trip, "val_loss": monitor}
        if monitor < best[0]:
            best = (monitor, epoch, _copy_state(model))
        record["lr_reduced"] = sched.step(monitor)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        log.info("epoch %d lr %.2e train %.4f (bce %.4f tri %.4f) val %.4f", epoch, epoch_lr,
                 train_loss, train_bce, train_trip, monitor)
    model.load_arrays(best[2])
    return TrainResult(history, best[1], best[0], best[2], lr)


def _copy_state(model: GMFLNet) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in model.state_arrays().items()}


def lr_autofind(objective: Callable[[], Tensor], params: Sequence[Parameter],
                grid: Sequence[float], optimizer: str = "adam",
                buffers: dict[str, np.ndarray] | None = None, **opt_kwargs) -> float:
    """Pick the learning rate whose single step lowers ``objective`` the most.

    Every candidate starts from the same snapshot of ``params`` (and
    ``buffers``); the snapshot is restored before returning.  If no
    candidate yields a finite decrease the fallback 1e-3 is returned.
    """
    grid = list(grid)
    if len(grid) == 1:
        return float(grid[0])
    snap = [p.data.copy() for p in params]
    buf_snap = {k: v.copy() for k, v in (buffers or {}).items()}

    def restore():
        for p, s in zip(params, snap):
            p.data[...] = s
        for k, v in buf_snap.items():
            buffers[k][...] = v

    best_lr, best_drop = None, -math.inf
    for lr in grid:
        restore()
        opt = Adam(params, lr=lr, **opt_kwargs) if optimizer == "adam" else SGD(params, lr)
        opt.zero_grad()
        with np.errstate(all="ignore"):
            before = objective()
            b = before.item()
            if not math.isfinite(b):
                continue
            before.backward()
            opt.step()
            after = objective().item()
        if math.isfinite(after) and b - after > best_drop:
            best_lr, best_drop = float(lr), b - after
    restore()
    if best_lr is None:
        log.warning("learning-rate sweep diverged for every candidate; using %g", LR_FALLBACK)
        return LR_FALLBACK
    return best_lr


def lr_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.geomspace(lo, hi, points)


def find_lr(model: GMFLNet, data: SalientFrameDataset, config: TrainConfig,
            loss_cfg: LossConfig) -> float:
    """Sweep the configured geometric grid on one fixed mini-batch of ``data``."""
    if len(data) == 0:
        raise EmptyDatasetError("cannot search a learning rate on an empty dataset")
    rng = np.random.default_rng(config.seed)
    idx = rng.permutation(len(data))[:config.batch_size]
    triplets_seed = config.seed + 7

    def objective():
        loss, _, _ = batch_loss(model, data, idx, loss_cfg, np.random.default_rng(triplets_seed),
                                training=True)
        return loss

    return lr_autofind(objective, model.parameters(),
                       lr_grid(config.lr_grid_min, config.lr_grid_max, config.lr_grid_points),
                       buffers=model.buffers(), betas=(config.beta1, config.beta2),
                       eps=config.adam_eps)


def gradcheck_model(model: GMFLNet, loss_cfg: LossConfig | None = None, batch: int = 6,
                    seed: int = 0, step: float = 1e-5) -> dict[str, float]:
    """Finite-difference check of the total loss on a random batch, per parameter.

    Coordinates, labels and triplets are drawn once from ``seed`` and reused
    by every evaluation so the objective is a fixed function of the weights.
    """
    loss_cfg = loss_cfg or LossConfig()
    rng = np.random.default_rng(seed)
    n = model.skeleton.joint_count
    outputs = model.config.outputs
    coords = rng.normal(size=(batch, n, 3))
    geometry, _ = sequence_geometry(coords, model.skeleton)
    keys = np.arange(batch) % min(outputs, max(1, batch // 2))
    labels = np.eye(outputs)[keys]
    data = SalientFrameDataset(coords, geometry, labels, keys // 2, keys % 2,
                               ["gradcheck"] * batch)
    triplets = mine_triplets(keys, rng)

    def objective():
        logits, emb = model.forward(coords, training=True, geometry=geometry)
        bce = bce_loss(logits, data.labels)
        return total_loss(bce, batch_triplet_loss(emb, triplets, loss_cfg), loss_cfg.alpha)

    return grad_check_detail(objective, model.parameters(), step)
