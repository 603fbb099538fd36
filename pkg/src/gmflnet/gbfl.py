"""Global bilinear feature learning over the local feature map.

A shared 1x1 conv reduces the D local channels to D/r.  Two summaries are
pooled from the reduced map: a per-channel vector over the points of each
frame (``G_N``, one row per frame) and a per-point scalar over channels
(``G_C``, one column).  Both broadcast to the reduced map's shape, are fused
element-wise, summed back in as residuals, expanded to D channels, and
combined with the local map before the final activation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric.nn import MlpBlock
from .numeric.tensor import (ShapeError, Tensor, add, div, mul, pool_cols, pool_rows,
                             repeat_rows, sigmoid, sqrt, square, sub, tanh, relu)

FUSIONS = ("sum", "product", "grand_mean", "quadratic_mean", "harmonic_mean", "geometric_mean")
REGULARIZATIONS = ("product", "sum", "subtract")
POOLINGS = ("max", "avg")
FINAL_ACTIVATIONS = ("sigmoid", "relu", "tanh", "none")


@dataclass
class GbflConfig:
    r: int = 4
    fusion: str = "geometric_mean"
    regularization: str = "subtract"
    pooling: str = "avg"
    final_activation: str = "sigmoid"

    def __post_init__(self):
        for value, allowed, label in ((self.fusion, FUSIONS, "fusion"),
                                      (self.regularization, REGULARIZATIONS, "regularization"),
                                      (self.pooling, POOLINGS, "pooling"),
                                      (self.final_activation, FINAL_ACTIVATIONS,
                                       "final_activation")):
            if value not in allowed:
                raise ValueError(f"{label} must be one of {allowed}, got {value!r}")
        if self.r < 1:
            raise ValueError("r must be a positive integer")


class GbflModule:
    def __init__(self, channels: int, config: GbflConfig, rng: np.random.Generator):
        if channels % config.r:
            raise ValueError(f"reduction factor r={config.r} does not divide {channels} channels")
        self.config = config
        self.channels = channels
        reduced = channels // config.r
        self.reduce = MlpBlock(channels, reduced, rng, batchnorm=False, activation="relu",
                               name="gbfl.reduce")
        self.expand = MlpBlock(reduced, channels, rng, batchnorm=False, activation="relu",
                               name="gbfl.expand")

    def parameters(self):
        return self.reduce.parameters() + self.expand.parameters()

    @property
    def blocks(self):
        return [self.reduce, self.expand]

    def __call__(self, f_local: Tensor, points: int, training: bool = False) -> Tensor:
        g_n, g_c, _ = global_summaries(f_local, self, self.config, points, training)
        b = bilinear_fuse(g_n, g_c, self.config, points)
        f_global = global_map(b, g_n, g_c, self, points, training)
        return residual_combine(f_global, f_local, self.config)


def global_summaries(f_local: Tensor, state: GbflModule, config: GbflConfig, points: int,
                     training: bool = False) -> tuple[Tensor, Tensor, Tensor]:
    """Return ``(G_N, G_C, reduced)``.

    ``reduced`` is (B*points, D/r); ``G_N`` pools it over each frame's points
    to (B, D/r); ``G_C`` pools over channels to (B*points, 1).
    """
    reduced = state.reduce(f_local, training)
    g_n = pool_rows(reduced, points, config.pooling)
    g_c = pool_cols(reduced, config.pooling)
    return g_n, g_c, reduced


def bilinear_fuse(g_n: Tensor, g_c: Tensor, config: GbflConfig, points: int | None = None) -> Tensor:
    """Element-wise combination of the broadcast summaries, (B*points, D/r).

    ``g_n`` rows repeat ``points`` times; ``g_c`` broadcasts across channels.
    Pass ``points=None`` when ``g_n`` is already expanded to the point rows.
    """
    if points is not None:
        g_n = repeat_rows(g_n, points)
    if g_n.rows != g_c.rows and g_c.rows != 1 and g_n.rows != 1:
        raise ShapeError(f"bilinear_fuse: G_N {g_n.shape} vs G_C {g_c.shape}")
    kind = config.fusion
    if kind == "sum":
        return add(g_c, g_n)
    if kind == "product":
        return mul(g_c, g_n)
    if kind == "grand_mean":
        return mul(add(g_c, g_n), 0.5)
    if kind == "quadratic_mean":
        return sqrt(mul(add(square(g_c), square(g_n)), 0.5))
    if kind == "geometric_mean":
        return sqrt(mul(g_c, g_n))
    if kind == "harmonic_mean":
        total = add(g_c, g_n)
        zero = total.data == 0
        # 2ab/(a+b) with the 0/0 limit taken as 0
        safe_total = add(total, Tensor(zero.astype(float)))
        return div(mul(mul(g_c, g_n), 2.0), safe_total)
    raise ValueError(f"unknown fusion {kind!r}")


def global_map(b: Tensor, g_n: Tensor, g_c: Tensor, state: GbflModule, points: int,
               training: bool = False) -> Tensor:
    """Residual sum ``B + G_C + G_N`` (broadcast), then the expanding MLP back to D channels."""
    s = add(add(b, g_c), repeat_rows(g_n, points))
    return state.expand(s, training)


def residual_combine(f_global: Tensor, f_local: Tensor, config: GbflConfig) -> Tensor:
    if f_global.shape != f_local.shape:
        raise ShapeError(f"residual_combine: {f_global.shape} vs {f_local.shape}")
    reg = config.regularization
    if reg == "subtract":
        h = sub(f_global, f_local)
    elif reg == "sum":
        h = add(f_global, f_local)
    elif reg == "product":
        h = mul(f_global, f_local)
    else:
        raise ValueError(f"unknown regularization {reg!r}")
    act = config.final_activation
    if act == "sigmoid":
        return sigmoid(h)
    if act == "relu":
        return relu(h)
    if act == "tanh":
        return tanh(h)
    return h
