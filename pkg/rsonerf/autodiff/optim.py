from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..exceptions import DimensionError
from .tensor import Tensor


__all__ = ("AdamState", "adam_step")


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, learning_rate, **kwargs):
        state = cls(learning_rate=learning_rate, **kwargs)
        for name, value in params.items():
            state.first_moment[name] = np.zeros_like(value)
            state.second_moment[name] = np.zeros_like(value)
        return state


def adam_step(params, grads, state: AdamState):
    """
    One bias-corrected Adam update. Returns new parameter arrays; ``state`` is advanced in place and returned.
    """
    grads = {name: grads[name].values if isinstance(grads[name], Tensor) else grads[name] for name in params}
    for name, value in params.items():
        if grads[name].shape != value.shape:
            raise DimensionError("adam_step[%s]" % name, value.shape, grads[name].shape)
        for moments in (state.first_moment, state.second_moment):
            if name in moments and moments[name].shape != value.shape:
                raise DimensionError("adam_step[%s]" % name, value.shape, moments[name].shape)

    state.step_count += 1
    bias1 = 1.0 - state.beta1**state.step_count
    bias2 = 1.0 - state.beta2**state.step_count
    updated = {}
    for name, value in params.items():
        grad = grads[name]
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m, v = np.zeros_like(value), np.zeros_like(value)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * (grad * grad)
        state.first_moment[name] = m.astype(value.dtype, copy=False)
        state.second_moment[name] = v.astype(value.dtype, copy=False)
        update = (state.learning_rate / bias1) * m / (np.sqrt(v / bias2) + state.epsilon)
        updated[name] = (value - update).astype(value.dtype, copy=False)
    return updated, state
