"""Classification head and training losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric.nn import Linear, MlpBlock
from .numeric.tensor import (DTYPE, Tensor, _make, _sigmoid, add, concat_cols, mean_all, mul,
                             pool_rows, relu, sub, take_rows)

HEAD_POOLINGS = ("max+avg", "max+max", "avg+avg")
TRIPLET_SIGNS = ("similarity_corrected", "as_printed")
PROB_CLAMP = 1e-12


@dataclass
class HeadConfig:
    widths: tuple[int, ...] = (1024, 512, 256)
    outputs: int = 6
    pooling: str = "max+avg"

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if self.pooling not in HEAD_POOLINGS:
            raise ValueError(f"head pooling must be one of {HEAD_POOLINGS}")
        if self.outputs < 2 or self.outputs % 2:
            raise ValueError("outputs must be even and >= 2 (two salient poses per action)")
        if len(self.widths) != 3:
            raise ValueError("head needs exactly three hidden widths")


@dataclass
class LossConfig:
    margin: float = 0.2
    alpha: float = 1.0
    triplet_sign: str = "similarity_corrected"

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.triplet_sign not in TRIPLET_SIGNS:
            raise ValueError(f"triplet_sign must be one of {TRIPLET_SIGNS}")


class ClassificationHead:
    def __init__(self, channels: int, config: HeadConfig, rng: np.random.Generator,
                 zero_output: bool = False):
        self.config = config
        dims = (2 * channels,) + config.widths
        self.mlps = [MlpBlock(dims[i], dims[i + 1], rng, name=f"head.mlp{i}")
                     for i in range(3)]
        self.linear = Linear(config.widths[-1], config.outputs, rng, name="head.linear",
                             zero=zero_output)

    def parameters(self):
        return [p for m in self.mlps for p in m.parameters()] + self.linear.parameters()

    @property
    def blocks(self):
        return self.mlps + [self.linear]

    def __call__(self, f_psi: Tensor, points: int, training: bool = False):
        return classify(f_psi, self, points, training)


def classify(f_psi: Tensor, head: ClassificationHead, points: int,
             training: bool = False) -> tuple[Tensor, Tensor]:
    """Pool over points, run the three MLPs, then the linear scorer.

    Returns ``(logits (B, O), embedding F_out (B, widths[-1]))``.
    """
    kinds = head.config.pooling.split("+")
    f_eta = concat_cols([pool_rows(f_psi, points, kind) for kind in kinds])
    h = f_eta
    for m in head.mlps:
        h = m(h, training)
    return head.linear(h), h


def probabilities(logits) -> np.ndarray:
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits, dtype=float)
    return _sigmoid(np.asarray(data, dtype=DTYPE))


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise cosine similarity -> (rows, 1)."""
    na = np.linalg.norm(a.data, axis=1, keepdims=True)
    nb = np.linalg.norm(b.data, axis=1, keepdims=True)
    if np.any(na < 1e-12) or np.any(nb < 1e-12):
        raise ValueError("cosine similarity of a zero-norm embedding")
    dot = (a.data * b.data).sum(axis=1, keepdims=True)
    out = dot / (na * nb)

    def backward(g):
        ga = g * (b.data / (na * nb) - out * a.data / (na * na))
        gb = g * (a.data / (na * nb) - out * b.data / (nb * nb))
        return ga, gb

    return _make(out, (a, b), backward)


def triplet_loss(a: Tensor, p: Tensor, n: Tensor, margin: float = 0.2,
                 triplet_sign: str = "similarity_corrected") -> Tensor:
    """Mean hinge over rows of cosine-similarity triplets.

    ``similarity_corrected`` penalizes an anchor that is not at least
    ``margin`` more similar to its positive than to its negative;
    ``as_printed`` swaps the two similarities.
    """
    a = a if isinstance(a, Tensor) else Tensor(a)
    p = p if isinstance(p, Tensor) else Tensor(p)
    n = n if isinstance(n, Tensor) else Tensor(n)
    cs_ap = cosine_similarity(a, p)
    cs_an = cosine_similarity(a, n)
    if triplet_sign == "similarity_corrected":
        gap = sub(cs_an, cs_ap)
    elif triplet_sign == "as_printed":
        gap = sub(cs_ap, cs_an)
    else:
        raise ValueError(f"unknown triplet_sign {triplet_sign!r}")
    hinge = relu(add(gap, margin))
    return mean_all(hinge)


def bce_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy over a (B, C) logit batch.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]``; where the clamp is
    active the loss is flat, so its gradient is zero there.
    """
    y = np.asarray(labels, dtype=DTYPE).reshape(logits.shape)
    p = _sigmoid(logits.data)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean()
    active = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    scale = 1.0 / y.size

    def backward(g):
        return (g[0, 0] * scale * np.where(active, p - y, 0.0),)

    return _make(np.array([[loss]]), (logits,), backward)


def total_loss(bce, triplet, alpha: float):
    """``bce + alpha * triplet`` for tensors or plain floats."""
    if isinstance(bce, Tensor) or isinstance(triplet, Tensor):
        return add(bce, mul(triplet, alpha))
    return bce + alpha * triplet


def mine_triplets(keys: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pick (anchor, positive, negative) row indices within one batch.

    Every row is an anchor; its positive is a random other row with the same
    key and its negative a random row with a different key.  Anchors lacking
    either companion are skipped.  Returns an (n, 3) int array.
    """
    keys = np.asarray(keys)
    out = []
    idx = np.arange(len(keys))
    for i, key in enumerate(keys):
        same = idx[(keys == key) & (idx != i)]
        diff = idx[keys != key]
        if len(same) == 0 or len(diff) == 0:
            continue
        out.append((i, same[rng.integers(len(same))], diff[rng.integers(len(diff))]))
    return np.asarray(out, dtype=np.intp).reshape(-1, 3)


def batch_triplet_loss(embedding: Tensor, triplets: np.ndarray, config: LossConfig) -> Tensor:
    norms = np.linalg.norm(embedding.data, axis=1)
    ok = np.all(norms[triplets] >= 1e-12, axis=1) if len(triplets) else np.zeros(0, bool)
    triplets = triplets[ok]
    if len(triplets) == 0:
        return Tensor(np.zeros((1, 1)))
    return triplet_loss(take_rows(embedding, triplets[:, 0]), take_rows(embedding, triplets[:, 1]),
                        take_rows(embedding, triplets[:, 2]), config.margin, config.triplet_sign)
