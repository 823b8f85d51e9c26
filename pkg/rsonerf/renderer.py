"""
Cameras, rays and the alpha-compositing volume renderer.

All scene content lives in the unit cube; rays are clipped to it and samples outside it carry no density.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from typing import Tuple

import numpy as np
from PIL import Image

from .autodiff import Tensor, apply, mul, reshape
from .exceptions import ContractError
from .settings import FAR, NEAR, RENDER_CHUNK, get_float_dtype, get_worker_count


__all__ = (
    "CameraIntrinsics",
    "Pose",
    "Ray",
    "RenderConfig",
    "pixel_to_ray",
    "generate_rays",
    "intersect_unit_cube",
    "sample_points",
    "stratified_samples",
    "jitter_uniforms",
    "composite",
    "render_rays",
    "render_ray",
    "render_image",
    "save_png",
    "load_png",
    "write_raw",
    "read_raw",
)

logger = logging.getLogger(__name__)

RIGID_TOLERANCE = 1e-4


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ContractError("Focal lengths must be positive, got fx=%r fy=%r" % (self.fx, self.fy))
        if self.width < 1 or self.height < 1:
            raise ContractError("Image size must be positive, got %rx%r" % (self.width, self.height))
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ContractError("Principal point (%r, %r) outside the image" % (self.cx, self.cy))

    @classmethod
    def from_fov(cls, camera_angle_x, width, height, k1=0.0):
        focal = 0.5 * width / math.tan(0.5 * camera_angle_x)
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height, k1=k1)

    @property
    def camera_angle_x(self):
        return 2.0 * math.atan(0.5 * self.width / self.fx)

    def scaled(self, width, height):
        sx, sy = width / self.width, height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height, self.k1)


@dataclass(frozen=True)
class Pose:
    camera_to_world: np.ndarray = dataclass_field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        matrix = np.array(self.camera_to_world, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise ContractError("A pose is a 4x4 matrix, got shape %s" % (matrix.shape,))
        matrix.flags.writeable = False
        object.__setattr__(self, "camera_to_world", matrix)
        problem = self.rigidity_problem()
        if problem:
            raise ContractError("Pose is not rigid: %s" % problem)

    @classmethod
    def canonical(cls):
        """
        Identity rotation and zero translation.
        """
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rotation, translation):
        matrix = np.eye(4)
        matrix[:3, :3] = rotation
        matrix[:3, 3] = translation
        return cls(matrix)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)):
        """
        Camera at ``eye`` looking along its -z axis at ``target``; image rows run along camera +y (world down).
        """
        eye, target, up = (np.asarray(v, dtype=np.float64) for v in (eye, target, up))
        back = eye - target
        back /= np.linalg.norm(back)
        right = np.cross(back, up)
        if np.linalg.norm(right) < 1e-12:
            raise ContractError("look_at: view direction is parallel to the up vector")
        right /= np.linalg.norm(right)
        down = np.cross(back, right)
        return cls.from_rotation_translation(np.stack([right, down, back], axis=1), eye)

    def orbited(self, degrees, center=(0.5, 0.5, 0.5)):
        """
        This pose carried around the vertical axis through ``center`` by ``degrees``.
        """
        angle = math.radians(degrees)
        cos, sin = math.cos(angle), math.sin(angle)
        spin = np.array([[cos, -sin, 0.0], [sin, cos, 0.0], [0.0, 0.0, 1.0]])
        center = np.asarray(center, dtype=np.float64)
        return Pose.from_rotation_translation(spin @ self.rotation, spin @ (self.translation - center) + center)

    @staticmethod
    def check_rigid(matrix, tolerance=RIGID_TOLERANCE):
        """
        Returns a description of the first rigidity violation or an empty string.
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            return "shape %s" % (matrix.shape,)
        if not np.isfinite(matrix).all():
            return "non-finite entries"
        rotation = matrix[:3, :3]
        if np.abs(rotation.T @ rotation - np.eye(3)).max() > tolerance:
            return "rotation not orthonormal"
        if abs(np.linalg.det(rotation) - 1.0) > tolerance:
            return "det(R) = %.6f" % np.linalg.det(rotation)
        if np.abs(matrix[3] - (0.0, 0.0, 0.0, 1.0)).max() > tolerance:
            return "bottom row %s" % matrix[3].tolist()
        return ""

    def rigidity_problem(self):
        return self.check_rigid(self.camera_to_world)

    @property
    def rotation(self):
        return self.camera_to_world[:3, :3]

    @property
    def translation(self):
        return self.camera_to_world[:3, 3]

    def __eq__(self, other):
        return isinstance(other, Pose) and np.array_equal(self.camera_to_world, other.camera_to_world)

    def __hash__(self):
        return hash(self.camera_to_world.tobytes())


@dataclass(frozen=True)
class Ray:
    origin: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    t_near: float
    t_far: float

    def __post_init__(self):
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-6:
            raise ContractError("Ray direction must be a unit vector")
        if not 0 <= self.t_near < self.t_far:
            raise ContractError("Ray range needs 0 <= t_near < t_far, got [%r, %r]" % (self.t_near, self.t_far))


@dataclass(frozen=True)
class RenderConfig:
    samples_per_ray: int = 64
    background_rgb: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    stratified_jitter: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.samples_per_ray < 2:
            raise ContractError("samples_per_ray must be >= 2, got %r" % self.samples_per_ray)
        if len(self.background_rgb) != 3 or not all(0.0 <= c <= 1.0 for c in self.background_rgb):
            raise ContractError("background_rgb must be three values in [0, 1]")
        object.__setattr__(self, "background_rgb", tuple(float(c) for c in self.background_rgb))


def _camera_directions(intr: CameraIntrinsics, i, j):
    x = (np.asarray(i, dtype=np.float64) + 0.5 - intr.cx) / intr.fx
    y = (np.asarray(j, dtype=np.float64) + 0.5 - intr.cy) / intr.fy
    if intr.k1:
        factor = 1.0 + intr.k1 * (x * x + y * y)
        x, y = x * factor, y * factor
    dirs = np.stack([x, y, -np.ones_like(x)], axis=-1)
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def intersect_unit_cube(origins, directions):
    """
    Slab test against ``[0, 1]^3``. Returns ``(near, far, hit)``; missed rays get the global range.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    parallel = directions == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inverse = 1.0 / directions
        t0 = (0.0 - origins) * inverse
        t1 = (1.0 - origins) * inverse
    inside_slab = (origins >= 0) & (origins <= 1)
    low = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t0, t1))
    high = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t0, t1))
    near = np.maximum(low.max(axis=1), 0.0)
    far = high.min(axis=1)
    hit = far > near
    return np.where(hit, near, NEAR), np.where(hit, far, FAR), hit


def generate_rays(intr: CameraIntrinsics, pose: Pose, pixels=None):
    """
    Rays for ``pixels`` (an ``[P, 2]`` array of ``(i, j)``), or for the full raster in row-major order.
    Returns ``(origins, directions, near, far)``.
    """
    if pixels is None:
        j, i = np.mgrid[0 : intr.height, 0 : intr.width]
        i, j = i.reshape(-1), j.reshape(-1)
    else:
        pixels = np.asarray(pixels).reshape(-1, 2)
        i, j = pixels[:, 0], pixels[:, 1]
    directions = _camera_directions(intr, i, j) @ pose.rotation.T
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    origins = np.broadcast_to(pose.translation, directions.shape).copy()
    near, far = intersect_unit_cube(origins, directions)[:2]
    return origins, directions, near, far


def pixel_to_ray(i, j, intr: CameraIntrinsics, pose: Pose) -> Ray:
    if not (0 <= i < intr.width and 0 <= j < intr.height):
        raise ContractError("Pixel (%r, %r) outside a %dx%d image" % (i, j, intr.width, intr.height))
    origins, directions, near, far = generate_rays(intr, pose, [(i, j)])
    return Ray(tuple(origins[0]), tuple(directions[0]), float(near[0]), float(far[0]))


def stratified_samples(near, far, count, uniforms=None):
    """
    ``count`` samples per ray over equal bins of ``[near, far]``: bin midpoints, or ``near + (k + u) * width``
    when ``uniforms`` (shape ``[R, count]``) are given. Returns ``(t, deltas)``.
    """
    near = np.asarray(near, dtype=np.float64).reshape(-1, 1)
    far = np.asarray(far, dtype=np.float64).reshape(-1, 1)
    width = (far - near) / count
    offsets = np.full((near.shape[0], count), 0.5) if uniforms is None else np.asarray(uniforms).reshape(-1, count)
    t = near + (np.arange(count)[None, :] + offsets) * width
    return t, np.broadcast_to(width, t.shape).copy()


def jitter_uniforms(seed, indices, count):
    """
    Stratification offsets ``[len(indices), count]``; the ray with flat pixel index ``p`` draws from ``(seed, p)``.
    """
    return np.stack([np.random.default_rng([seed, int(index)]).random(count) for index in indices])


def sample_points(ray: Ray, cfg: RenderConfig, index=0):
    """
    Returns ``(positions [N, 3], deltas [N], t [N])`` along one ray. Jitter draws from the stream ``(seed, index)``.
    """
    uniforms = None
    if cfg.stratified_jitter:
        uniforms = jitter_uniforms(cfg.rng_seed, [index], cfg.samples_per_ray)
    t, deltas = stratified_samples([ray.t_near], [ray.t_far], cfg.samples_per_ray, uniforms)
    positions = np.asarray(ray.origin)[None, :] + t[0][:, None] * np.asarray(ray.direction)[None, :]
    return positions, deltas[0], t[0]


def composite(sigma, rgb, deltas, background):
    """
    Front-to-back alpha compositing. ``sigma`` is ``[R, N]``, ``rgb`` is ``[R, N, 3]``; returns ``[R, 4]``
    holding the composited colour and the opacity (sum of weights).
    """
    sv, cv = sigma.values, rgb.values
    dtype = np.result_type(sv.dtype, cv.dtype)
    deltas = np.asarray(deltas, dtype=dtype)
    background = np.asarray(background, dtype=dtype)
    alpha = 1.0 - np.exp(-sv * deltas)
    survive = 1.0 - alpha
    running = np.cumprod(survive, axis=1)
    transmittance = np.concatenate([np.ones_like(running[:, :1]), running[:, :-1]], axis=1)
    residual = running[:, -1]
    weights = transmittance * alpha
    opacity = weights.sum(axis=1)
    color = (weights[:, :, None] * cv).sum(axis=1) + (1.0 - opacity)[:, None] * background[None, :]
    out = np.concatenate([color, opacity[:, None]], axis=1)

    def rule(grad):
        g_rgb, g_opacity = grad[:, :3], grad[:, 3]
        per_sample = (g_rgb[:, None, :] * cv).sum(axis=2)
        weighted = weights * per_sample
        behind = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1] - weighted
        through = transmittance * survive
        tail = residual * (g_opacity - g_rgb @ background)
        g_sigma = deltas * (through * per_sample - behind + tail[:, None])
        return g_sigma, weights[:, :, None] * g_rgb[:, None, :]

    return apply((sigma, rgb), out, rule)


def _query_function(field):
    return field.forward if hasattr(field, "forward") else field


def render_rays(field, origins, directions, near, far, cfg: RenderConfig, times=None, uniforms=None, params=None):
    """
    Renders a batch of rays through ``field`` (a field object or a ``(positions, directions, times)`` callable).
    Differentiable with respect to ``params`` when they are tape leaves.
    """
    count = cfg.samples_per_ray
    rays = np.asarray(origins).reshape(-1, 3).shape[0]
    t, deltas = stratified_samples(near, far, count, uniforms)
    dtype = get_float_dtype()
    points = np.asarray(origins)[:, None, :] + t[:, :, None] * np.asarray(directions)[:, None, :]
    inside = np.all((points >= 0.0) & (points <= 1.0), axis=-1).astype(dtype)
    positions = np.clip(points, 0.0, 1.0).reshape(-1, 3).astype(dtype)
    view = np.repeat(np.asarray(directions, dtype=dtype), count, axis=0)
    sample_times = None if times is None else np.repeat(np.asarray(times, dtype=dtype).reshape(-1), count)
    query = _query_function(field)
    kwargs = {} if params is None else {"params": params}
    sigma, rgb = query(Tensor._wrap(positions), Tensor._wrap(view), sample_times, **kwargs)
    sigma = mul(reshape(sigma, (rays, count)), Tensor._wrap(inside))
    rgb = reshape(rgb, (rays, count, 3))
    return composite(sigma, rgb, deltas, cfg.background_rgb)


def render_ray(ray: Ray, field, cfg: RenderConfig, time=None, index=0):
    """
    Returns ``(rgb, opacity)`` for one ray; with jitter on, ``index`` is the flat pixel index it stands for.
    """
    uniforms = None
    if cfg.stratified_jitter:
        uniforms = jitter_uniforms(cfg.rng_seed, [index], cfg.samples_per_ray)
    times = None if time is None else [time]
    out = render_rays(
        field, [ray.origin], [ray.direction], [ray.t_near], [ray.t_far], cfg, times=times, uniforms=uniforms
    ).values[0]
    return tuple(float(c) for c in out[:3]), float(out[3])


def render_image(intr: CameraIntrinsics, pose: Pose, field, cfg: RenderConfig, time=None):
    """
    Renders the full raster; returns a float ``[H, W, 4]`` array (RGB plus opacity).

    Work is split into bands of whole rows. Pixel ``(i, j)`` jitters from the stream ``(seed, j * width + i)``, the
    same stream ``render_ray`` uses for that index, so the result does not depend on the worker count.
    """
    origins, directions, near, far = generate_rays(intr, pose)
    width = intr.width
    rows_per_band = max(1, RENDER_CHUNK // width)
    bands = [(start, min(start + rows_per_band, intr.height)) for start in range(0, intr.height, rows_per_band)]

    def render_band(band):
        start, stop = band
        lo, hi = start * width, stop * width
        uniforms = None
        if cfg.stratified_jitter:
            uniforms = jitter_uniforms(cfg.rng_seed, range(lo, hi), cfg.samples_per_ray)
        times = None if time is None else np.full(hi - lo, time)
        out = render_rays(field, origins[lo:hi], directions[lo:hi], near[lo:hi], far[lo:hi], cfg, times, uniforms)
        return out.values

    workers = min(get_worker_count(), len(bands))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pieces = list(pool.map(render_band, bands))
    else:
        pieces = [render_band(band) for band in bands]
    logger.debug("Rendered %dx%d image in %d bands", intr.width, intr.height, len(bands))
    return np.concatenate(pieces, axis=0).reshape(intr.height, intr.width, 4)


def to_uint8(image):
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_png(path, image):
    """
    Writes a float ``[H, W, 3|4]`` image in ``[0, 1]`` (or a uint8 array) as an 8-bit PNG.
    """
    image = np.asarray(image)
    data = image if image.dtype == np.uint8 else to_uint8(image)
    if data.ndim != 3 or data.shape[-1] not in (3, 4):
        raise ContractError("save_png expects an HxWx3 or HxWx4 image, got shape %s" % (data.shape,))
    Image.fromarray(data).save(path)
    return path


def load_png(path, mode=None):
    """
    Reads a PNG as float in ``[0, 1]``; ``mode`` ("RGB" / "RGBA") converts on load.
    """
    with Image.open(path) as image:
        if mode is not None:
            image = image.convert(mode)
        elif image.mode not in ("RGB", "RGBA"):
            image = image.convert("RGBA" if "A" in image.mode else "RGB")
        return np.asarray(image, dtype=np.float64) / 255.0


RAW_MAGIC = b"RSONERF-RAW 1\n"


def write_raw(path, image):
    """
    Little-endian float32 dump, row-major, preceded by a text header with width, height and channels.
    """
    image = np.asarray(image)
    height, width, channels = image.shape
    with open(path, "wb") as stream:
        stream.write(RAW_MAGIC)
        stream.write(("width: %d\nheight: %d\nchannels: %d\n\n" % (width, height, channels)).encode("ascii"))
        stream.write(np.ascontiguousarray(image, dtype="<f4").tobytes())
    return path


def read_raw(path):
    with open(path, "rb") as stream:
        if stream.readline() != RAW_MAGIC:
            raise ContractError("%s is not a raw image dump" % path)
        header = {}
        for line in iter(stream.readline, b"\n"):
            key, _, value = line.decode("ascii").partition(": ")
            header[key] = int(value)
        data = np.frombuffer(stream.read(), dtype="<f4")
    return data.reshape(header["height"], header["width"], header["channels"])
