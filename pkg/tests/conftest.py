import math

import numpy as np

import pytest

from rsonerf.dataset import (
    AnalyticScene,
    Box,
    DatasetManifest,
    FrameRecord,
    PosedImages,
    Primitive,
    default_satellite,
    generate_dataset,
    generate_spin_dataset,
    write_dataset,
)
from rsonerf.renderer import CameraIntrinsics


# Reduced architectures that keep gradient checks and short training runs fast
SMALL_GRID = {"levels": 2, "table_size": 2**8, "features_per_level": 2, "base_resolution": 4, "per_level_scale": 2.0}
SMALL_VANILLA = {
    "depth": 3,
    "width": 16,
    "skip_layer": 2,
    "color_width": 8,
    "position_frequencies": 2,
    "direction_frequencies": 1,
}
SMALL_INSTANT = {"hash_grid": SMALL_GRID, "hidden": (8, 8, 8), "direction_frequencies": 1}
SMALL_DEFORMED = {
    "canonical": "instant",
    "canonical_options": SMALL_INSTANT,
    "depth": 2,
    "width": 8,
    "position_frequencies": 2,
    "time_frequencies": 1,
}
SMALL_OPTIONS = {"vanilla": SMALL_VANILLA, "instant": SMALL_INSTANT, "deformed": SMALL_DEFORMED}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reconstruction tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def float64(settings):
    settings.RSONERF_FLOAT_BITS = 64


@pytest.fixture
def tiny_intrinsics():
    return CameraIntrinsics.from_fov(math.radians(40.0), 14, 12)


@pytest.fixture
def box_scene():
    return AnalyticScene(
        [Primitive(Box((0.3, 0.3, 0.3), (0.7, 0.7, 0.7)), sigma=40.0, rgb=(0.8, 0.4, 0.2), name="box")]
    )


@pytest.fixture
def tiny_dataset(tiny_intrinsics):
    return generate_dataset(default_satellite(), n_views=4, intr=tiny_intrinsics, samples=32)


@pytest.fixture
def tiny_spin_dataset(tiny_intrinsics):
    return generate_spin_dataset(default_satellite(), n_frames=3, intr=tiny_intrinsics, samples=32)


@pytest.fixture
def still_dataset(tiny_dataset):
    """
    The orbit dataset with every frame stamped at time zero.
    """
    manifest = tiny_dataset.manifest
    frames = [FrameRecord(frame.file_path, frame.transform, 0.0) for frame in manifest.frames]
    return PosedImages(DatasetManifest(manifest.intrinsics, frames, manifest.aabb_scale), tiny_dataset.images)


@pytest.fixture
def dataset_dir(tmp_path, tiny_dataset):
    return write_dataset(tiny_dataset, str(tmp_path / "dataset"))


@pytest.fixture
def spin_dataset_dir(tmp_path, tiny_spin_dataset):
    return write_dataset(tiny_spin_dataset, str(tmp_path / "spin"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
