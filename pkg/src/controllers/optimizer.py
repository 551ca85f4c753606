"""Adam with bias correction."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..utils.constants import ADAM_BETAS, ADAM_EPS
from ..utils.errors import DivergedError, InvalidArgumentError


@dataclass
class AdamState:
    """First and second moment estimates plus the step count."""

    step: int = 0
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)
    betas: Tuple[float, float] = ADAM_BETAS
    eps: float = ADAM_EPS


def _real_view(array: np.ndarray) -> np.ndarray:
    """Complex arrays are optimized as independent real and imaginary parts."""
    if np.iscomplexobj(array):
        return np.ascontiguousarray(array).view(array.real.dtype)
    return array


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    rate: float,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameter arrays and the state."""
    if set(grads) != set(params):
        raise InvalidArgumentError(
            f"gradient names {sorted(set(grads) ^ set(params))} do not match the parameters"
        )
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise InvalidArgumentError(f"gradient for {name} has shape {grad.shape}")
        if not np.all(np.isfinite(grad)):
            raise DivergedError(f"non-finite gradient for {name}", last_good=params)

    beta1, beta2 = state.betas
    step = state.step + 1
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step
    updated = {}
    first, second = {}, {}
    for name in params:
        value = _real_view(params[name])
        grad = _real_view(grads[name])
        m = state.first.get(name, np.zeros_like(value))
        v = state.second.get(name, np.zeros_like(value))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        new_value = value - rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        if np.iscomplexobj(params[name]):
            new_value = np.ascontiguousarray(new_value, dtype=np.float64).view(np.complex128)
        updated[name] = new_value
        first[name], second[name] = m, v
    return updated, AdamState(step=step, first=first, second=second, betas=state.betas, eps=state.eps)

