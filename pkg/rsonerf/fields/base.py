from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..autodiff import Tensor, activation, linear, reshape
from ..exceptions import ContractError
from ..settings import get_float_dtype


__all__ = ("FieldQuery", "FieldOutput", "BaseField", "init_mlp", "run_mlp", "linear_flops")


@dataclass(frozen=True)
class FieldQuery:
    position: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    time: Optional[float] = None

    def __post_init__(self):
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > 1e-6:
            raise ContractError("Query direction must be a unit vector, got norm %.9f" % norm)
        if self.time is not None and not 0.0 <= self.time <= 1.0:
            raise ContractError("Query time must lie in [0, 1], got %r" % self.time)


@dataclass(frozen=True)
class FieldOutput:
    sigma: float
    rgb: Tuple[float, float, float]


def init_mlp(rng, sizes, prefix, dtype):
    """
    Fully connected layers ``sizes[0] -> sizes[1] -> ...``; weights uniform with He fan-in scaling, zero biases.
    """
    params = {}
    for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / fan_in)
        params["%s.%d.weight" % (prefix, index)] = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
        params["%s.%d.bias" % (prefix, index)] = np.zeros(fan_out, dtype=dtype)
    return params


def run_mlp(params, prefix, x, count, hidden="relu", last=None):
    for index in range(count):
        x = linear(x, params["%s.%d.weight" % (prefix, index)], params["%s.%d.bias" % (prefix, index)])
        kind = hidden if index < count - 1 else last
        if kind is not None:
            x = activation(x, kind)
    return x


def linear_flops(sizes):
    return sum(2 * fan_in * fan_out + fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))


class BaseField:
    """
    A radiance field: position (+ direction, + optional time) to (density, colour).

    The instance carries its configuration and its parameter arrays; ``forward`` also accepts
    replacement parameters (tape leaves) so the same field object is used for training and rendering.
    """

    kind: Optional[str] = None
    requires_time = False

    def __init__(self, seed=0, params=None, **options):
        self.seed = seed
        self.options = self.clean_options(options)
        self.params: Dict[str, np.ndarray] = params if params is not None else self.init_params(seed)

    def clean_options(self, options):
        return options

    def init_params(self, seed):
        raise NotImplementedError

    def raw_forward(self, params, positions, directions, times):
        """
        Returns ``(sigma [B, 1], rgb [B, 3])`` tensors, activations applied.
        """
        raise NotImplementedError

    def flops_per_query(self):
        raise NotImplementedError

    def config(self):
        return dict(self.options)

    def forward(self, positions, directions, times=None, params=None):
        """
        Batched query. Returns ``(sigma [B], rgb [B, 3])`` tensors.
        """
        if self.requires_time and times is None:
            raise ContractError("Field %r needs a time input" % self.kind)
        if not self.requires_time and times is not None:
            raise ContractError("Field %r does not take a time input" % self.kind)
        params = self.params if params is None else params
        params = {name: value if isinstance(value, Tensor) else Tensor._wrap(value) for name, value in params.items()}
        sigma, rgb = self.raw_forward(params, _batch(positions), _batch(directions), times)
        return reshape(sigma, (-1,)), rgb

    def query(self, query: FieldQuery):
        times = None if query.time is None else np.array([query.time], dtype=get_float_dtype())
        sigma, rgb = self.forward([query.position], [query.direction], times)
        return FieldOutput(sigma=float(sigma.values[0]), rgb=tuple(float(c) for c in rgb.values[0]))

    def parameter_count(self, prefix=None):
        return sum(
            value.size for name, value in self.params.items() if prefix is None or name.startswith(prefix + ".")
        )

    def __repr__(self):
        return "<%s kind=%s seed=%s>" % (self.__class__.__name__, self.kind, self.seed)


def _batch(values):
    if isinstance(values, Tensor):
        return values
    return Tensor(np.asarray(values).reshape(-1, 3))
