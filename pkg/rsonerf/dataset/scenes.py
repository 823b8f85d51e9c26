"""
Analytic scenes: unions of constant-density boxes and z-aligned cylinders inside the unit cube. They serve as
ground-truth radiance fields for synthetic datasets and as an oracle in tests.
"""
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from ..autodiff import Tensor
from ..exceptions import ContractError
from ..fields.base import FieldOutput
from ..settings import get_float_dtype


__all__ = ("Box", "Cylinder", "Primitive", "AnalyticScene", "analytic_query", "default_satellite")


@dataclass(frozen=True)
class Box:
    low: Tuple[float, float, float]
    high: Tuple[float, float, float]

    def contains(self, points):
        return np.all((points >= np.asarray(self.low)) & (points <= np.asarray(self.high)), axis=-1)

    def bounds(self):
        return np.asarray(self.low, dtype=np.float64), np.asarray(self.high, dtype=np.float64)


@dataclass(frozen=True)
class Cylinder:
    center: Tuple[float, float]
    radius: float
    z_low: float
    z_high: float

    def contains(self, points):
        radial = (points[..., 0] - self.center[0]) ** 2 + (points[..., 1] - self.center[1]) ** 2
        return (radial <= self.radius**2) & (points[..., 2] >= self.z_low) & (points[..., 2] <= self.z_high)

    def bounds(self):
        cx, cy = self.center
        r = self.radius
        return np.array([cx - r, cy - r, self.z_low]), np.array([cx + r, cy + r, self.z_high])


@dataclass(frozen=True)
class Primitive:
    shape: object
    sigma: float
    rgb: Tuple[float, float, float]
    name: str = ""

    def __post_init__(self):
        if self.sigma < 0:
            raise ContractError("Primitive %r has negative density" % self.name)
        if not all(0.0 <= c <= 1.0 for c in self.rgb):
            raise ContractError("Primitive %r colour outside [0, 1]" % self.name)
        low, high = self.shape.bounds()
        if (low < 0).any() or (high > 1).any():
            raise ContractError("Primitive %r extends outside the unit cube" % self.name)


class AnalyticScene:
    """
    Piecewise-constant radiance field. The first primitive (in list order) containing a point wins.
    """

    requires_time = False

    def __init__(self, primitives):
        self.primitives = tuple(primitives)

    def __len__(self):
        return len(self.primitives)

    def scaled(self, lighting_scale):
        """
        Copy with every colour multiplied by ``lighting_scale`` (lamp intensity applied to albedo).
        """
        if not 0 < lighting_scale <= 1:
            raise ContractError("lighting_scale must lie in (0, 1], got %r" % lighting_scale)
        return AnalyticScene(
            replace(p, rgb=tuple(float(c) * lighting_scale for c in p.rgb)) for p in self.primitives
        )

    def evaluate(self, points):
        """
        Returns ``(sigma [B], rgb [B, 3])`` numpy arrays.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        sigma = np.zeros(points.shape[0])
        rgb = np.zeros((points.shape[0], 3))
        claimed = np.zeros(points.shape[0], dtype=bool)
        for primitive in self.primitives:
            hit = primitive.shape.contains(points) & ~claimed
            sigma[hit] = primitive.sigma
            rgb[hit] = primitive.rgb
            claimed |= hit
        return sigma, rgb

    def forward(self, positions, directions, times=None, params=None):
        values = positions.values if isinstance(positions, Tensor) else positions
        sigma, rgb = self.evaluate(values)
        dtype = get_float_dtype()
        return Tensor._wrap(sigma.astype(dtype)), Tensor._wrap(rgb.astype(dtype))


def analytic_query(x, scene: AnalyticScene) -> FieldOutput:
    sigma, rgb = scene.evaluate(np.asarray(x).reshape(1, 3))
    return FieldOutput(sigma=float(sigma[0]), rgb=tuple(float(c) for c in rgb[0]))


def default_satellite(density=60.0):
    """
    Body box, two thin solar panels and a dish on top: occlusions plus thin structures.
    """
    return AnalyticScene(
        [
            Primitive(Cylinder((0.5, 0.5), 0.09, 0.62, 0.66), density, (0.78, 0.78, 0.8), "dish"),
            Primitive(Box((0.40, 0.40, 0.38), (0.60, 0.60, 0.62)), density, (0.85, 0.68, 0.22), "body"),
            Primitive(Box((0.12, 0.49, 0.42), (0.38, 0.51, 0.58)), density, (0.16, 0.26, 0.72), "panel-left"),
            Primitive(Box((0.62, 0.49, 0.42), (0.88, 0.51, 0.58)), density, (0.16, 0.26, 0.72), "panel-right"),
        ]
    )
