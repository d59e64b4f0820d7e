"""RMSprop and Adam with decoupled weight decay, plus Glorot initialisation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor import Tensor


@dataclass
class OptimizerState:
    learning_rate: float
    weight_decay: float = 0.0
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def ensure(self, params: Sequence[Tensor], with_first: bool) -> None:
        if not self.second_moment:
            self.second_moment = [np.zeros_like(p.data) for p in params]
            if with_first:
                self.first_moment = [np.zeros_like(p.data) for p in params]
        if len(self.second_moment) != len(params):
            raise DimensionError(f"optimizer tracks {len(self.second_moment)} parameters, got {len(params)}")
        for acc, p in zip(self.second_moment, params):
            if acc.shape != p.shape:
                raise DimensionError(f"accumulator {acc.shape} does not match parameter {p.shape}")


def _grads_for(params: Sequence[Tensor], grads: Optional[Sequence[np.ndarray]]) -> list[np.ndarray]:
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    out = []
    for p, g in zip(params, grads):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise DimensionError(f"gradient {g.shape} does not match parameter {p.shape}")
        out.append(g)
    return out


def rmsprop_step(
    state: OptimizerState,
    params: Sequence[Tensor],
    grads: Optional[Sequence[np.ndarray]] = None,
    rho: float = 0.99,
    eps: float = 1e-8,
) -> Sequence[Tensor]:
    """v <- rho v + (1-rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps) - lr wd theta."""
    grads = _grads_for(params, grads)
    state.ensure(params, with_first=False)
    lr, wd = state.learning_rate, state.weight_decay
    for i, (p, g) in enumerate(zip(params, grads)):
        v = rho * state.second_moment[i] + (1.0 - rho) * g * g
        state.second_moment[i] = v
        p.data = p.data - lr * g / (np.sqrt(v) + eps) - lr * wd * p.data
    state.step_count += 1
    return params


def adam_step(
    state: OptimizerState,
    params: Sequence[Tensor],
    grads: Optional[Sequence[np.ndarray]] = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Sequence[Tensor]:
    """Bias-corrected Adam; weight decay is applied to theta directly."""
    grads = _grads_for(params, grads)
    state.ensure(params, with_first=True)
    state.step_count += 1
    t = state.step_count
    lr, wd = state.learning_rate, state.weight_decay
    for i, (p, g) in enumerate(zip(params, grads)):
        m = beta1 * state.first_moment[i] + (1.0 - beta1) * g
        v = beta2 * state.second_moment[i] + (1.0 - beta2) * g * g
        state.first_moment[i], state.second_moment[i] = m, v
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps) - lr * wd * p.data
    return params


class RMSprop:
    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0):
        self.params = list(params)
        self.state = OptimizerState(lr, weight_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        rmsprop_step(self.state, self.params)


class Adam(RMSprop):
    def step(self) -> None:
        adam_step(self.state, self.params)


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> Tensor:
    """Uniform in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))], trainable."""
    if rows <= 0 or cols <= 0:
        raise ParameterError(f"glorot_init needs positive dimensions, got {rows}x{cols}")
    bound = np.sqrt(6.0 / (rows + cols))
    return Tensor(rng.uniform(-bound, bound, size=(rows, cols)), requires_grad=True)
