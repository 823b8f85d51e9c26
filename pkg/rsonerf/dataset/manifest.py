"""
transforms-JSON manifests: shared intrinsics plus per-frame camera-to-world matrices and optional times.

World coordinates map into the unit cube as ``unit = world * aabb_scale + 0.5``; the manifest keeps the
world-space matrices exactly as read so that writing it back is lossless.
"""
import json
import logging
import os
from dataclasses import dataclass, field as dataclass_field, replace
from typing import List, Optional

import numpy as np

from ..exceptions import ContractError, ManifestError, PoseValidationError
from ..renderer import CameraIntrinsics, Pose, load_png


__all__ = (
    "FrameRecord",
    "DatasetManifest",
    "PosedImages",
    "load_manifest",
    "write_manifest",
    "load_dataset",
    "select_frames",
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameRecord:
    file_path: str
    transform: Pose
    time: Optional[float] = None


@dataclass
class DatasetManifest:
    intrinsics: CameraIntrinsics
    frames: List[FrameRecord] = dataclass_field(default_factory=list)
    aabb_scale: float = 1.0

    def __post_init__(self):
        if not self.aabb_scale > 0:
            raise ManifestError("aabb_scale must be positive, got %r" % self.aabb_scale, field="aabb_scale")
        seen = set()
        for frame in self.frames:
            if frame.file_path in seen:
                raise ManifestError("Duplicate frame file_path %r" % frame.file_path, field="file_path")
            seen.add(frame.file_path)

    def __len__(self):
        return len(self.frames)

    @property
    def has_times(self):
        return bool(self.frames) and all(frame.time is not None for frame in self.frames)

    def unit_pose(self, index):
        """
        Pose of frame ``index`` expressed in unit-cube coordinates.
        """
        pose = self.frames[index].transform
        return Pose.from_rotation_translation(pose.rotation, pose.translation * self.aabb_scale + 0.5)

    def times(self):
        """
        Frame times in [0, 1]; timestamps outside that range are min-max normalised.
        """
        if not self.has_times:
            raise ManifestError("Manifest frames carry no time stamps", field="time")
        raw = np.array([frame.time for frame in self.frames], dtype=np.float64)
        if raw.min() >= 0 and raw.max() <= 1:
            return raw
        span = raw.max() - raw.min()
        return (raw - raw.min()) / span if span > 0 else np.zeros_like(raw)

    def at_time(self, value=0.0):
        """
        Copy of the manifest with every frame stamped ``value``.
        """
        frames = [replace(frame, time=float(value)) for frame in self.frames]
        return DatasetManifest(self.intrinsics, frames, self.aabb_scale)

    def to_dict(self):
        intr = self.intrinsics
        data = {
            "camera_angle_x": intr.camera_angle_x,
            "fl_x": intr.fx,
            "fl_y": intr.fy,
            "cx": intr.cx,
            "cy": intr.cy,
            "w": intr.width,
            "h": intr.height,
            "k1": intr.k1,
            "aabb_scale": self.aabb_scale,
            "frames": [],
        }
        for frame in self.frames:
            record = {"file_path": frame.file_path, "transform_matrix": frame.transform.camera_to_world.tolist()}
            if frame.time is not None:
                record["time"] = frame.time
            data["frames"].append(record)
        return data

    @classmethod
    def from_dict(cls, data):
        intrinsics = _parse_intrinsics(data)
        frames, problems = [], []
        if "frames" not in data:
            raise ManifestError("Manifest is missing required key 'frames'", field="frames")
        for index, raw in enumerate(data["frames"]):
            for key in ("file_path", "transform_matrix"):
                if key not in raw:
                    raise ManifestError("Frame %d is missing required key %r" % (index, key), field=key)
            matrix = np.asarray(raw["transform_matrix"], dtype=np.float64)
            problem = Pose.check_rigid(matrix)
            if problem:
                problems.append((raw["file_path"], problem))
                continue
            time = raw.get("time")
            frames.append(FrameRecord(raw["file_path"], Pose(matrix), None if time is None else float(time)))
        if problems:
            raise PoseValidationError(problems)
        return cls(intrinsics=intrinsics, frames=frames, aabb_scale=float(data.get("aabb_scale", 1.0)))


def _require(data, key):
    try:
        return data[key]
    except KeyError:
        raise ManifestError("Manifest is missing required key %r" % key, field=key)


def _parse_intrinsics(data):
    width, height = int(_require(data, "w")), int(_require(data, "h"))
    if "fl_x" in data:
        fx = float(data["fl_x"])
    elif "camera_angle_x" in data:
        fx = CameraIntrinsics.from_fov(float(data["camera_angle_x"]), width, height).fx
    else:
        raise ManifestError("Manifest needs 'fl_x' or 'camera_angle_x'", field="fl_x")
    fy = float(data.get("fl_y", fx))
    cx = float(data.get("cx", width / 2.0))
    cy = float(data.get("cy", height / 2.0))
    try:
        return CameraIntrinsics(fx, fy, cx, cy, width, height, float(data.get("k1", 0.0)))
    except ContractError as exc:
        raise ManifestError(str(exc), field="intrinsics")


def load_manifest(path) -> DatasetManifest:
    with open(path, encoding="utf-8") as stream:
        try:
            data = json.load(stream)
        except ValueError as exc:
            raise ManifestError("%s is not valid JSON: %s" % (path, exc))
    manifest = DatasetManifest.from_dict(data)
    logger.debug("Loaded %d frames from %s", len(manifest), path)
    return manifest


def write_manifest(manifest: DatasetManifest, path):
    # json emits repr() floats, the shortest string that reads back to the same double
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(manifest.to_dict(), stream, indent=2)
        stream.write("\n")
    return path


def select_frames(sequence, source_rate, target_rate):
    """
    Keeps every ``round(source_rate / target_rate)``-th item, starting with the first.
    """
    if not target_rate > 0:
        raise ContractError("target_rate must be positive, got %r" % target_rate)
    if target_rate > source_rate:
        raise ContractError("target_rate %r exceeds source_rate %r" % (target_rate, source_rate))
    stride = max(1, int(round(source_rate / target_rate)))
    return list(sequence)[::stride]


class PosedImages:
    """
    A manifest together with its decoded images as a float ``[F, H, W, 4]`` RGBA array.
    """

    def __init__(self, manifest: DatasetManifest, images, root=None):
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 4 or images.shape[0] != len(manifest):
            raise ContractError("Expected one image per frame, got array of shape %s" % (images.shape,))
        if images.shape[-1] == 3:
            images = np.concatenate([images, np.ones(images.shape[:-1] + (1,))], axis=-1)
        self.manifest = manifest
        self.images = images
        self.root = root

    def __len__(self):
        return len(self.manifest)

    @property
    def height(self):
        return self.images.shape[1]

    @property
    def width(self):
        return self.images.shape[2]

    def intrinsics(self):
        intr = self.manifest.intrinsics
        if (intr.width, intr.height) != (self.width, self.height):
            return intr.scaled(self.width, self.height)
        return intr


def _image_path(root, file_path):
    path = os.path.join(root, file_path)
    if not os.path.splitext(path)[1] and not os.path.exists(path):
        path += ".png"
    return path


def load_dataset(path) -> PosedImages:
    """
    Loads ``transforms.json`` (or the given manifest file) and every referenced image.
    """
    manifest_path = os.path.join(path, "transforms.json") if os.path.isdir(path) else path
    root = os.path.dirname(os.path.abspath(manifest_path))
    manifest = load_manifest(manifest_path)
    images = []
    for frame in manifest.frames:
        image = load_png(_image_path(root, frame.file_path), mode="RGBA")
        images.append(image)
    shapes = {image.shape for image in images}
    if len(shapes) > 1:
        raise ManifestError("Images in %s differ in size: %s" % (path, sorted(shapes)), field="file_path")
    return PosedImages(manifest, np.stack(images) if images else np.zeros((0, 1, 1, 4)), root=root)
