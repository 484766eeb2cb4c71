# Adam with bias correction:
#   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
#   theta -= lr * m_hat / (sqrt(v_hat) + eps)

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from src.core.errors import ContractViolation
from src.core.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    @classmethod
    def create(cls, params: Mapping[str, Tensor], **kwargs) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
            **kwargs,
        )


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> AdamState:
    """In-place bias-corrected Adam update; parameters without a gradient see a zero gradient."""
    if lr <= 0:
        raise ContractViolation(f"learning rate must be positive, got {lr}")
    unknown = set(grads) - set(params)
    if unknown:
        raise ContractViolation(f"gradients for unknown parameters: {sorted(unknown)}")
    for name, tensor in params.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        if state.m[name].shape != tensor.shape:
            raise ContractViolation(f"{name}: moment shape {state.m[name].shape} does not match {tensor.shape}")
        if name in grads and np.shape(grads[name]) != tensor.shape:
            raise ContractViolation(f"{name}: gradient shape {np.shape(grads[name])} does not match {tensor.shape}")

    state.step += 1
    b1, b2, t = state.beta1, state.beta2, state.step
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        tensor.sub_(lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
    return state


def clip_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    norm = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))
    if max_norm <= 0 or norm <= max_norm or not np.isfinite(norm):
        return dict(grads), norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm
