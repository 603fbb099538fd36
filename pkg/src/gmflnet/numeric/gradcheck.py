"""Central finite-difference check of analytic parameter gradients."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .tensor import Parameter, Tensor


def analytic_grads(fn: Callable[[], Tensor], params: Sequence[Parameter]) -> list[np.ndarray]:
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    return [p.grad.copy() for p in params]


def grad_check_detail(fn: Callable[[], Tensor], params: Sequence[Parameter],
                      step: float = 1e-5) -> dict[str, float]:
    """Per-parameter max of ``|analytic - numeric| / max(1, |numeric|)``.

    ``fn`` must rebuild the graph on every call and be deterministic.  A
    non-finite loss anywhere yields ``inf`` for the parameter being probed.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grads = analytic_grads(fn, params)
    report: dict[str, float] = {}
    for idx, (p, g) in enumerate(zip(params, grads)):
        worst = 0.0
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fn().item()
            flat[i] = orig - step
            down = fn().item()
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)) or not math.isfinite(gflat[i]):
                worst = math.inf
                break
            num = (up - down) / (2.0 * step)
            worst = max(worst, abs(gflat[i] - num) / max(1.0, abs(num)))
        report[p.name or f"param{idx}"] = worst
    return report


def grad_check(fn: Callable[[], Tensor], params: Sequence[Parameter], step: float = 1e-5) -> float:
    report = grad_check_detail(fn, params, step)
    return max(report.values()) if report else 0.0
