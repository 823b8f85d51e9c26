import os
from types import MappingProxyType

from django.conf import settings

import numpy as np


# Importable classes for every field kind accepted by `init_field` and the `train` command.
# You can register your own field implementation in your project's settings module
FIELD_KINDS = MappingProxyType(
    getattr(
        settings,
        "RSONERF_FIELD_KINDS",
        {
            "vanilla": "rsonerf.fields.vanilla.VanillaField",
            "instant": "rsonerf.fields.instant.InstantField",
            "deformed": "rsonerf.fields.deformed.DeformationField",
            "dnerf": "rsonerf.fields.deformed.DeformationField",
        },
    )
)

# Global ray range used when a ray misses the unit cube
NEAR = getattr(settings, "RSONERF_NEAR", 0.0)
FAR = getattr(settings, "RSONERF_FAR", 2.0)

RENDER_CHUNK = getattr(settings, "RSONERF_RENDER_CHUNK", 4096)

IMAGE_SIZE = tuple(getattr(settings, "RSONERF_IMAGE_SIZE", (591, 443)))

HASH_GRID = MappingProxyType(
    getattr(
        settings,
        "RSONERF_HASH_GRID",
        {"levels": 16, "table_size": 2**19, "features_per_level": 2, "base_resolution": 16, "finest_resolution": 512},
    )
)

CHROMA_KEY = MappingProxyType(
    getattr(
        settings,
        "RSONERF_CHROMA_KEY",
        {
            "key_hue": 120.0,
            "hue_tolerance": 35.0,
            "min_saturation": 0.25,
            "min_value": 0.15,
            "despill_strength": 0.5,
            "feather_radius": 1,
        },
    )
)

LOG_LEVEL = getattr(settings, "RSONERF_LOG_LEVEL", "INFO")


def get_float_dtype():
    """
    Scalar width for tensors and parameters. Read on every call so it can be switched per run.
    """
    bits = getattr(settings, "RSONERF_FLOAT_BITS", 32)
    return np.float64 if int(bits) == 64 else np.float32


def get_worker_count():
    """
    Worker cap: the ``RSONERF_THREADS`` environment variable wins over the setting of the same name.
    """
    value = os.environ.get("RSONERF_THREADS") or getattr(settings, "RSONERF_THREADS", None)
    if value is None:
        return os.cpu_count() or 1
    return max(1, int(value))
