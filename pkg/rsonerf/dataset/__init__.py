from .manifest import (
    DatasetManifest,
    FrameRecord,
    PosedImages,
    load_dataset,
    load_manifest,
    select_frames,
    write_manifest,
)
from .scenes import AnalyticScene, Box, Cylinder, Primitive, analytic_query, default_satellite
from .synth import (
    KEY_GREEN,
    LIGHTING_CASES,
    default_intrinsics,
    generate_dataset,
    generate_spin_dataset,
    green_screen_background,
    orbit_poses,
    spin_azimuth_step,
    write_dataset,
)


__all__ = (
    "KEY_GREEN",
    "LIGHTING_CASES",
    "AnalyticScene",
    "Box",
    "Cylinder",
    "DatasetManifest",
    "FrameRecord",
    "PosedImages",
    "Primitive",
    "analytic_query",
    "default_intrinsics",
    "default_satellite",
    "generate_dataset",
    "generate_spin_dataset",
    "green_screen_background",
    "load_dataset",
    "load_manifest",
    "orbit_poses",
    "select_frames",
    "spin_azimuth_step",
    "write_dataset",
    "write_manifest",
)
