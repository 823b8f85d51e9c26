"""
Input encodings: sinusoidal frequency encoding and the multiresolution hash grid.

Both are tape operations, so gradients reach the table entries as well as the encoded positions
(the deformation field needs the latter).
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, apply
from .exceptions import ContractError
from .settings import HASH_GRID


__all__ = (
    "FrequencyEncodingConfig",
    "HashGridConfig",
    "HashGridTable",
    "HASH_PRIMES",
    "freq_encode",
    "grid_index",
    "grid_indices",
    "hash_encode",
)

HASH_PRIMES = (1, 2654435761, 805459861)
TABLE_INIT_SCALE = 1e-4

# Corner c of a cell is (c >> 2 & 1, c >> 1 & 1, c & 1)
CORNER_OFFSETS = np.array([[(c >> 2) & 1, (c >> 1) & 1, c & 1] for c in range(8)], dtype=np.int64)

_PRIMES = np.array(HASH_PRIMES, dtype=np.uint64)


@dataclass(frozen=True)
class FrequencyEncodingConfig:
    num_frequencies: int = 10
    include_input: bool = True

    def __post_init__(self):
        if self.num_frequencies < 0:
            raise ContractError("num_frequencies must be >= 0, got %r" % self.num_frequencies)

    def output_dim(self, input_dim):
        return input_dim * (2 * self.num_frequencies + (1 if self.include_input else 0))


@dataclass(frozen=True)
class HashGridConfig:
    levels: int = 16
    table_size: int = 2**19
    features_per_level: int = 2
    base_resolution: int = 16
    per_level_scale: float = 2.0

    def __post_init__(self):
        if self.levels < 1 or self.features_per_level < 1 or self.base_resolution < 1:
            raise ContractError("levels, features_per_level and base_resolution must be >= 1")
        if self.table_size < 1 or self.table_size & (self.table_size - 1):
            raise ContractError("table_size must be a power of two, got %r" % self.table_size)
        if not self.per_level_scale > 1:
            raise ContractError("per_level_scale must be > 1, got %r" % self.per_level_scale)

    @classmethod
    def from_finest(cls, finest_resolution=512, **kwargs):
        """
        Chooses ``per_level_scale`` so the last level reaches ``finest_resolution``.
        """
        levels = kwargs.get("levels", cls.levels)
        base = kwargs.get("base_resolution", cls.base_resolution)
        if levels > 1:
            scale = math.exp((math.log(finest_resolution) - math.log(base)) / (levels - 1))
        else:
            scale = 2.0
        return cls(per_level_scale=scale, **kwargs)

    @classmethod
    def from_options(cls, options):
        """
        Builds from a plain dict that may give ``finest_resolution`` instead of ``per_level_scale``.
        """
        options = dict(options)
        finest = options.pop("finest_resolution", None)
        if finest is not None and "per_level_scale" not in options:
            return cls.from_finest(finest, **options)
        return cls(**options)

    @classmethod
    def default(cls, **overrides):
        options = dict(HASH_GRID)
        if "per_level_scale" in overrides:
            options.pop("finest_resolution", None)
        options.update(overrides)
        return cls.from_options(options)

    def resolution(self, level):
        # the epsilon keeps exact powers (16 * 2**k) from flooring one short
        return int(math.floor(self.base_resolution * self.per_level_scale**level + 1e-9))

    def is_dense(self, level):
        return (self.resolution(level) + 1) ** 3 <= self.table_size

    def table_rows(self, level):
        return min(self.table_size, (self.resolution(level) + 1) ** 3)

    @property
    def output_dim(self):
        return self.levels * self.features_per_level

    def as_dict(self):
        return asdict(self)


class HashGridTable:
    """
    Learnable per-level feature arrays of shape ``[table_rows(level), features_per_level]``.
    """

    def __init__(self, config: HashGridConfig, levels):
        self.config = config
        self.levels = list(levels)

    @classmethod
    def initialize(cls, config: HashGridConfig, rng, dtype=np.float32):
        levels = [
            rng.uniform(-TABLE_INIT_SCALE, TABLE_INIT_SCALE, size=(config.table_rows(level), config.features_per_level))
            .astype(dtype)
            for level in range(config.levels)
        ]
        return cls(config, levels)

    def __len__(self):
        return len(self.levels)


def grid_indices(level, corners, config: HashGridConfig):
    """
    Vectorised ``grid_index`` over an integer array whose last axis holds (x, y, z) corners.
    """
    corners = np.asarray(corners, dtype=np.int64)
    side = config.resolution(level) + 1
    if side**3 <= config.table_size:
        return (corners[..., 0] * side + corners[..., 1]) * side + corners[..., 2]
    flat = corners.reshape(-1, 3).astype(np.uint64)
    hashed = (flat[:, 0] * _PRIMES[0]) ^ (flat[:, 1] * _PRIMES[1]) ^ (flat[:, 2] * _PRIMES[2])
    return (hashed % np.uint64(config.table_size)).astype(np.int64).reshape(corners.shape[:-1])


def grid_index(level, corner, config: HashGridConfig):
    resolution = config.resolution(level)
    corner = np.asarray(corner, dtype=np.int64).reshape(3)
    if (corner < 0).any() or (corner > resolution).any():
        raise ContractError("Corner %s outside [0, %d] at level %d" % (corner.tolist(), resolution, level))
    return int(grid_indices(level, corner[None, :], config)[0])


def _as_batch(x):
    tensor = x if isinstance(x, Tensor) else Tensor(x)
    return tensor, tensor.values.ndim == 1


def freq_encode(x, config: FrequencyEncodingConfig):
    """
    Layout per row: ``[x (if include_input), sin(2^0 pi x), cos(2^0 pi x), sin(2^1 pi x), ...]`` where each
    sin/cos block spans all input components.
    """
    tensor, single = _as_batch(x)
    xv = tensor.values.reshape(1, -1) if single else tensor.values
    rows, dim = xv.shape
    freqs = (2.0 ** np.arange(config.num_frequencies)) * np.pi
    scaled = xv[:, None, :] * freqs[None, :, None].astype(xv.dtype)
    sin, cos = np.sin(scaled), np.cos(scaled)
    blocks = np.concatenate([sin, cos], axis=2).reshape(rows, -1)
    out = np.concatenate([xv, blocks], axis=1) if config.include_input else blocks

    def rule(grad):
        grad = grad.reshape(rows, -1)
        gx = grad[:, :dim].copy() if config.include_input else np.zeros_like(xv)
        tail = grad[:, dim:] if config.include_input else grad
        tail = tail.reshape(rows, config.num_frequencies, 2 * dim)
        gsin, gcos = tail[:, :, :dim], tail[:, :, dim:]
        gx = gx + ((gsin * cos - gcos * sin) * freqs[None, :, None]).sum(axis=1)
        return (gx.reshape(tensor.shape).astype(xv.dtype),)

    return apply((tensor,), out.reshape(-1) if single else out, rule)


def hash_encode(x, table, config: HashGridConfig = None):
    """
    Trilinear interpolation of the eight cell-corner features at every level, concatenated across levels.

    ``table`` is a ``HashGridTable`` or a sequence of per-level tensors (tape leaves during training).
    Positions are clamped to the unit cube; clamped coordinates receive no gradient.
    """
    if isinstance(table, HashGridTable):
        config = config or table.config
        levels = table.levels
    else:
        levels = table
    if config is None:
        raise ContractError("hash_encode needs a HashGridConfig")
    level_tensors = [t if isinstance(t, Tensor) else Tensor._wrap(t) for t in levels]
    tensor, single = _as_batch(x)
    raw = tensor.values.reshape(1, 3) if single else tensor.values
    inside = (raw >= 0) & (raw <= 1)
    xv = np.clip(raw, 0, 1)

    outputs, cache = [], []
    offsets = CORNER_OFFSETS[None, :, :]
    for level, entries in enumerate(level_tensors):
        resolution = config.resolution(level)
        scaled = xv * resolution
        base = np.clip(np.floor(scaled), 0, resolution - 1).astype(np.int64)
        frac = scaled - base
        indices = grid_indices(level, base[:, None, :] + offsets, config)
        axis_weights = np.where(offsets == 1, frac[:, None, :], 1 - frac[:, None, :])
        weights = axis_weights.prod(axis=-1)
        features = entries.values[indices]
        outputs.append(np.einsum("bc,bcf->bf", weights, features))
        cache.append((resolution, frac, indices, axis_weights, weights, features))
    out = np.concatenate(outputs, axis=1).astype(np.result_type(xv.dtype, level_tensors[0].values.dtype))
    width = config.features_per_level

    def rule(grad):
        grad = grad.reshape(-1, config.output_dim)
        gx = np.zeros_like(xv)
        level_grads = []
        for level, (resolution, frac, indices, axis_weights, weights, features) in enumerate(cache):
            g_level = grad[:, level * width : (level + 1) * width]
            rows = level_tensors[level].shape[0]
            flat_idx = indices.reshape(-1)
            contrib = (weights[:, :, None] * g_level[:, None, :]).reshape(-1, width)
            g_table = np.stack(
                [np.bincount(flat_idx, weights=contrib[:, f], minlength=rows) for f in range(width)], axis=1
            )
            level_grads.append(g_table.astype(level_tensors[level].values.dtype))
            # d weight / d x_d: the other two axis factors, signed by the corner bit, times the resolution
            corner_dot = np.einsum("bcf,bf->bc", features, g_level)
            for d in range(3):
                others = np.prod(np.delete(axis_weights, d, axis=2), axis=2)
                sign = np.where(CORNER_OFFSETS[:, d] == 1, 1.0, -1.0)[None, :]
                gx[:, d] += resolution * (sign * others * corner_dot).sum(axis=1)
        gx = (gx * inside).reshape(tensor.shape).astype(tensor.values.dtype)
        return (gx, *level_grads)

    return apply((tensor, *level_tensors), out.reshape(-1) if single else out, rule)
