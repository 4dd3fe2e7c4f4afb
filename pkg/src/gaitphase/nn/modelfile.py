"""Binary model container.

Layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"GAITMLP\\0"
    8       4     uint32 format version (currently 1)
    12      4     uint32 header length H in bytes
    16      H     UTF-8 JSON header, keys sorted, no whitespace
    16+H    8*P   float64 parameters, layer by layer: W (fan_in x fan_out,
                  row-major) followed by b (fan_out)

The header holds ``task``, ``layers`` (input_size, output_size, activation),
``n_params`` and ``meta`` (feature layout, label normalization, classes,
training config, seeds). Writing is deterministic: identical models give
identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFileError
from .model import LayerSpec, MlpModel, validate_specs

MAGIC = b"GAITMLP\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def _header(model: MlpModel) -> dict:
    return {
        "format": "gaitphase-mlp",
        "task": model.task,
        "layers": [
            {"input_size": s.input_size, "output_size": s.output_size, "activation": s.activation}
            for s in model.layers
        ],
        "n_params": model.n_params,
        "meta": model.meta,
    }


def to_bytes(model: MlpModel) -> bytes:
    header = json.dumps(_header(model), sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, VERSION, len(header)), header]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def from_bytes(data: bytes) -> MlpModel:
    if len(data) < _PREFIX.size:
        raise ModelFileError("file too short for a model header")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFileError("not a model file (bad magic)")
    if version != VERSION:
        raise ModelFileError(f"unsupported model format version {version}")
    try:
        header = json.loads(data[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"corrupt model header: {exc}") from exc
    specs = validate_specs(LayerSpec(**d) for d in header["layers"])
    offset = _PREFIX.size + hlen
    n_expected = sum(s.n_params for s in specs)
    if len(data) - offset != 8 * n_expected:
        raise ModelFileError(f"expected {n_expected} parameters, found {(len(data) - offset) / 8:g}")
    flat = np.frombuffer(data, dtype="<f8", offset=offset).astype(float)
    weights, biases = [], []
    pos = 0
    for s in specs:
        nw = s.input_size * s.output_size
        weights.append(flat[pos:pos + nw].reshape(s.input_size, s.output_size).copy())
        pos += nw
        biases.append(flat[pos:pos + s.output_size].copy())
        pos += s.output_size
    if not all(np.all(np.isfinite(p)) for p in weights + biases):
        raise ModelFileError("model contains non-finite parameters")
    return MlpModel(specs, weights, biases, header.get("task", "generic"), header.get("meta", {}))


def save_model(model: MlpModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_model(path) -> MlpModel:
    return from_bytes(Path(path).read_bytes())


def to_text(model: MlpModel) -> str:
    """Human-readable JSON export (floats printed round-trip exact)."""
    doc = _header(model)
    doc["format_version"] = VERSION
    doc["parameters"] = [
        {"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(model.weights, model.biases)
    ]
    return json.dumps(doc, sort_keys=True, indent=1)
