"""
Synthetic posed datasets rendered from an analytic scene.

Orbit datasets place the camera on a horizontal circle around the cube centre. Spin datasets express a target
yawing in front of a fixed camera as the equivalent camera orbit around a static target, with per-frame times.
"""
import logging
import math
import os

import numpy as np

from ..exceptions import ContractError
from ..renderer import CameraIntrinsics, Pose, RenderConfig, render_image, save_png
from ..settings import IMAGE_SIZE
from .manifest import DatasetManifest, FrameRecord, PosedImages, write_manifest


__all__ = (
    "SCENE_CENTER",
    "KEY_GREEN",
    "LIGHTING_CASES",
    "default_intrinsics",
    "orbit_poses",
    "generate_dataset",
    "generate_spin_dataset",
    "spin_azimuth_step",
    "green_screen_background",
    "write_dataset",
)

logger = logging.getLogger(__name__)

SCENE_CENTER = np.array([0.5, 0.5, 0.5])
KEY_GREEN = (0.0, 1.0, 0.0)
DEFAULT_FOV = math.radians(40.0)
GROUND_TRUTH_SAMPLES = 384

# Lamp-intensity cases: orbit or spin trajectory at 10% or 100% lighting; case 4 adds a shadow on the screen
LIGHTING_CASES = {
    "case1": {"trajectory": "orbit", "lighting": 0.1, "shadow": 0.0},
    "case2": {"trajectory": "orbit", "lighting": 1.0, "shadow": 0.0},
    "case3": {"trajectory": "spin", "lighting": 0.1, "shadow": 0.0},
    "case4": {"trajectory": "spin", "lighting": 1.0, "shadow": 0.4},
}


def default_intrinsics(width=None, height=None, camera_angle_x=DEFAULT_FOV):
    width = width or IMAGE_SIZE[0]
    height = height or IMAGE_SIZE[1]
    return CameraIntrinsics.from_fov(camera_angle_x, width, height)


def orbit_poses(azimuths_deg, radius, height=0.0):
    """
    Unit-cube poses on a horizontal circle ``height`` above the cube centre, all looking at the centre.
    """
    poses = []
    for azimuth in azimuths_deg:
        angle = math.radians(azimuth)
        eye = SCENE_CENTER + np.array([radius * math.cos(angle), radius * math.sin(angle), height])
        poses.append(Pose.look_at(eye, SCENE_CENTER))
    return poses


def _world_pose(pose, aabb_scale):
    return Pose.from_rotation_translation(pose.rotation, (pose.translation - 0.5) / aabb_scale)


def green_screen_background(height, width, key_rgb=KEY_GREEN, shadow=0.0, shadow_span=(0.55, 0.8)):
    """
    Solid key-colour screen; ``shadow`` darkens a vertical band behind the target by that fraction.
    """
    screen = np.broadcast_to(np.asarray(key_rgb, dtype=np.float64), (height, width, 3)).copy()
    if shadow:
        start, stop = (int(round(f * width)) for f in shadow_span)
        screen[:, start:stop] *= 1.0 - shadow
    return screen


def _render_views(scene, intr, poses, samples, seed):
    cfg = RenderConfig(samples_per_ray=samples, background_rgb=(0.0, 0.0, 0.0), stratified_jitter=False, rng_seed=seed)
    images = []
    for index, pose in enumerate(poses):
        image = render_image(intr, pose, scene, cfg)
        rgb, opacity = image[..., :3], image[..., 3:]
        # straight (un-premultiplied) colour so RGBA files composite correctly
        with np.errstate(divide="ignore", invalid="ignore"):
            straight = np.where(opacity > 0, rgb / np.maximum(opacity, 1e-12), 0.0)
        images.append(np.concatenate([np.clip(straight, 0, 1), opacity], axis=-1))
        logger.debug("Rendered view %d/%d", index + 1, len(poses))
    return np.stack(images)


def _build(scene, intr, poses, times, lighting_scale, seed, samples, aabb_scale, prefix):
    lit = scene.scaled(lighting_scale)
    images = _render_views(lit, intr, poses, samples, seed)
    frames = [
        FrameRecord(
            "%s_%03d.png" % (prefix, index), _world_pose(pose, aabb_scale), None if times is None else times[index]
        )
        for index, pose in enumerate(poses)
    ]
    return PosedImages(DatasetManifest(intrinsics=intr, frames=frames, aabb_scale=aabb_scale), images)


def generate_dataset(
    scene,
    n_views=36,
    radius=1.5,
    intr=None,
    lighting_scale=1.0,
    seed=0,
    height=0.25,
    samples=GROUND_TRUTH_SAMPLES,
    aabb_scale=1.0,
):
    """
    Orbit dataset: ``n_views`` cameras at equal azimuth steps of ``360 / n_views`` degrees.
    """
    if n_views < 2:
        raise ContractError("n_views must be >= 2, got %r" % n_views)
    if radius <= math.sqrt(3) / 2:
        raise ContractError("radius %r places cameras inside the scene cube" % radius)
    intr = intr or default_intrinsics()
    step = 360.0 / n_views
    poses = orbit_poses([index * step for index in range(n_views)], radius, height)
    return _build(scene, intr, poses, None, lighting_scale, seed, samples, aabb_scale, "view")


def spin_azimuth_step(spin_rate_deg_per_s, frame_rate):
    if not frame_rate > 0:
        raise ContractError("frame_rate must be positive, got %r" % frame_rate)
    return spin_rate_deg_per_s / frame_rate


def generate_spin_dataset(
    scene,
    n_frames=80,
    spin_rate_deg_per_s=10.0,
    frame_rate=2.0,
    intr=None,
    seed=0,
    radius=1.5,
    lighting_scale=1.0,
    height=0.25,
    samples=GROUND_TRUTH_SAMPLES,
    aabb_scale=1.0,
):
    """
    Stationary camera, target yawing at ``spin_rate_deg_per_s``: the camera orbits the opposite way by
    ``spin_rate / frame_rate`` degrees per frame. Frame ``k`` has time ``k / (n_frames - 1)``.
    """
    if n_frames < 2:
        raise ContractError("n_frames must be >= 2, got %r" % n_frames)
    intr = intr or default_intrinsics()
    step = spin_azimuth_step(spin_rate_deg_per_s, frame_rate)
    poses = orbit_poses([-index * step for index in range(n_frames)], radius, height)
    times = [index / (n_frames - 1) for index in range(n_frames)]
    return _build(scene, intr, poses, times, lighting_scale, seed, samples, aabb_scale, "frame")


def write_dataset(data: PosedImages, directory, background=None):
    """
    Writes ``transforms.json`` and one PNG per frame. With ``background`` (an ``[H, W, 3]`` array) images are
    composited over it and saved as RGB, otherwise saved as RGBA.
    """
    os.makedirs(directory, exist_ok=True)
    for frame, image in zip(data.manifest.frames, data.images):
        if background is not None:
            alpha = image[..., 3:]
            image = image[..., :3] * alpha + background * (1.0 - alpha)
        save_png(os.path.join(directory, frame.file_path), image)
    write_manifest(data.manifest, os.path.join(directory, "transforms.json"))
    data.root = os.path.abspath(directory)
    return directory
