"""
Parameter blobs: a plain-text header of ``key: <json>`` lines ended by a blank line, followed by every
parameter array flattened in header layout order as little-endian scalars.
"""
import json

import numpy as np

from django.utils.module_loading import import_string

from ..exceptions import ContractError
from ..settings import FIELD_KINDS


MAGIC = "RSONERF-CHECKPOINT 1"


def write_blob(path, field, step=0, **extra):
    width = next(iter(field.params.values())).dtype.itemsize * 8
    dtype = np.dtype("<f%d" % (width // 8))
    header = {
        "kind": field.kind,
        "config": field.config(),
        "scalar_width": width,
        "seed": field.seed,
        "step": step,
        "layout": [[name, list(value.shape)] for name, value in field.params.items()],
    }
    header.update(extra)
    lines = [MAGIC] + ["%s: %s" % (key, json.dumps(value, sort_keys=True)) for key, value in header.items()]
    with open(path, "wb") as stream:
        stream.write(("\n".join(lines) + "\n\n").encode("utf-8"))
        for value in field.params.values():
            stream.write(np.ascontiguousarray(value, dtype=dtype).tobytes())
    return path


def read_header(stream):
    first = stream.readline().decode("utf-8").rstrip("\n")
    if first != MAGIC:
        raise ContractError("Not a checkpoint file (bad magic %r)" % first[:40])
    header = {}
    for raw in iter(stream.readline, b""):
        line = raw.decode("utf-8").rstrip("\n")
        if not line:
            break
        key, _, value = line.partition(": ")
        header[key] = json.loads(value)
    return header


def read_blob(path):
    """
    Returns ``(field, header)``; the field is rebuilt with exactly the stored parameters.
    """
    with open(path, "rb") as stream:
        header = read_header(stream)
        payload = stream.read()
    dtype = np.dtype("<f%d" % (header["scalar_width"] // 8))
    data = np.frombuffer(payload, dtype=dtype)
    params, offset = {}, 0
    native = np.float64 if header["scalar_width"] == 64 else np.float32
    for name, shape in header["layout"]:
        count = int(np.prod(shape))
        if offset + count > data.size:
            raise ContractError("Checkpoint %s is truncated at parameter %s" % (path, name))
        params[name] = data[offset : offset + count].reshape(shape).astype(native)
        offset += count
    try:
        klass = import_string(FIELD_KINDS[header["kind"]])
    except KeyError:
        raise ContractError("Unknown field kind %r in %s" % (header["kind"], path))
    field = klass(seed=header["seed"], params=params, **header["config"])
    return field, header
