"""Shared per-point layers: the conv/batchnorm/activation block and a plain linear map."""

from __future__ import annotations

import numpy as np

from .tensor import DTYPE, Parameter, ShapeError, Tensor, _make, relu

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
ACTIVATIONS = ("relu", "none")


def batchnorm(x: Tensor, gamma: Parameter, beta: Parameter,
              running_mean: np.ndarray, running_var: np.ndarray,
              training: bool, eps: float = BN_EPS, momentum: float = BN_MOMENTUM) -> Tensor:
    """Normalize each column over all rows of ``x``.

    Training mode uses batch statistics and updates the running buffers in
    place (unbiased variance, as is conventional); inference mode uses the
    running buffers.
    """
    xd = x.data
    n = xd.shape[0]
    if training:
        mu = xd.mean(axis=0, keepdims=True)
        var = xd.var(axis=0, keepdims=True)
        unbiased = var * n / (n - 1) if n > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    gd = gamma.data
    out = gd * xhat + beta.data

    def backward(g):
        ggamma = (g * xhat).sum(axis=0, keepdims=True)
        gbeta = g.sum(axis=0, keepdims=True)
        gxhat = g * gd
        if training:
            gx = inv / n * (n * gxhat - gxhat.sum(axis=0, keepdims=True)
                            - xhat * (gxhat * xhat).sum(axis=0, keepdims=True))
        else:
            gx = gxhat * inv
        return gx, ggamma, gbeta

    return _make(out, (x, gamma, beta), backward)


class Linear:
    """Row-wise affine map ``x @ W + b``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None,
                 name: str = "linear", zero: bool = False):
        self.in_dim, self.out_dim = in_dim, out_dim
        if zero:
            w = np.zeros((in_dim, out_dim))
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            bound = 1.0 / np.sqrt(in_dim)
            w = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        self.weight = Parameter(w, name=f"{name}.weight")
        self.bias = Parameter(np.zeros((1, out_dim)), name=f"{name}.bias")

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def __call__(self, x: Tensor) -> Tensor:
        if x.cols != self.in_dim:
            raise ShapeError(f"{self.weight.name}: input {x.shape}, weight {self.weight.shape}")
        return x @ self.weight + self.bias


class MlpBlock:
    """Shared 1x1 convolution over points, optional batchnorm, then activation.

    The convolution is a per-row affine map applied to every point row.
    Batchnorm statistics are taken over all rows passed in one call.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None,
                 batchnorm: bool = True, activation: str = "relu", name: str = "mlp"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.name = name
        self.activation = activation
        self.use_bn = batchnorm
        # He-uniform suits the ReLU that follows
        bound = np.sqrt(6.0 / in_dim)
        self.weight = Parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)),
                                name=f"{name}.weight")
        self.bias = Parameter(np.zeros((1, out_dim)), name=f"{name}.bias")
        if batchnorm:
            self.bn_scale = Parameter(np.ones((1, out_dim)), name=f"{name}.bn_scale")
            self.bn_shift = Parameter(np.zeros((1, out_dim)), name=f"{name}.bn_shift")
            self.running_mean = np.zeros((1, out_dim), dtype=DTYPE)
            self.running_var = np.ones((1, out_dim), dtype=DTYPE)

    def parameters(self) -> list[Parameter]:
        ps = [self.weight, self.bias]
        if self.use_bn:
            ps += [self.bn_scale, self.bn_shift]
        return ps

    def buffers(self) -> dict[str, np.ndarray]:
        if not self.use_bn:
            return {}
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def __call__(self, x: Tensor, training: bool = False) -> Tensor:
        return mlp_forward(x, self, training)


def mlp_forward(x: Tensor, block: MlpBlock, training: bool) -> Tensor:
    if x.cols != block.in_dim:
        raise ShapeError(f"{block.name}: input {x.shape} but block expects {block.in_dim} columns "
                         f"(weight {block.weight.shape})")
    h = x @ block.weight + block.bias
    if block.use_bn:
        h = batchnorm(h, block.bn_scale, block.bn_shift, block.running_mean,
                      block.running_var, training)
    if block.activation == "relu":
        h = relu(h)
    return h


def mlp_stack(x: Tensor, blocks, training: bool) -> Tensor:
    for b in blocks:
        x = b(x, training)
    return x
