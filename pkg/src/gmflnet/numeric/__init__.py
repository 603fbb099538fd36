"""Dense 2-D arrays with reverse-mode gradients, layers, optimizers and gradient checking."""

from .gradcheck import grad_check, grad_check_detail
from .nn import Linear, MlpBlock, batchnorm, mlp_forward
from .optim import SGD, Adam, ReduceLROnPlateau
from .tensor import (Parameter, ShapeError, Tensor, add, concat_cols, div, matmul, mean_all,
                     mul, pool, pool_cols, pool_rows, relu, repeat_rows, sigmoid, sqrt, square,
                     sub, sum_all, sum_cols, take_rows)

__all__ = [
    "Adam", "Linear", "MlpBlock", "Parameter", "ReduceLROnPlateau", "SGD", "ShapeError",
    "Tensor", "add", "batchnorm", "concat_cols", "div", "grad_check", "grad_check_detail",
    "matmul", "mean_all", "mlp_forward", "mul", "pool", "pool_cols", "pool_rows", "relu",
    "repeat_rows", "sigmoid", "sqrt", "square", "sub", "sum_all", "sum_cols", "take_rows",
]
