"""Deterministic binary checkpoints for models, optimizer state, and config.

Container layout (all integers little-endian):

    bytes 0..3    magic "H2AI"
    bytes 4..7    format version (u32)
    bytes 8..11   header length in bytes (u32)
    header        UTF-8 JSON: model kind, frozen flag, architecture
                  descriptor, training config, ordered tensor manifest
    payload       the manifest's tensors as raw little-endian float32
    trailer       SHA-256 over everything above (32 bytes)

Saving the same model twice produces byte-identical files.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .models import MODEL_KINDS

MAGIC = b"H2AI"
FORMAT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Not a checkpoint file (bad magic or unparsable header)."""


class CheckpointVersionError(ValueError):
    """Checkpoint written by an unknown format version."""


class CheckpointCorruptError(ValueError):
    """Checksum mismatch or truncated payload."""


def _arch_descriptor(model) -> list[dict]:
    return [
        {"name": name, "shape": list(p.data.shape)}
        for name, p in sorted(model.parameters().items())
    ]


def _config_dict(config) -> dict | None:
    if config is None:
        return None
    d = dataclasses.asdict(config)
    return d


def save_checkpoint(model, path, config=None) -> str:
    """Write the model (parameters + Adam moments) to `path`.

    Returns the hex checksum of the written file's content.
    """
    params = model.parameters()
    manifest = []
    blobs = []
    for name in sorted(params):
        p = params[name]
        if not np.all(np.isfinite(p.data)):
            raise ValueError(f"refusing to save non-finite parameter {name}")
        for part, arr in (("value", p.data), ("m1", p.m1), ("m2", p.m2)):
            manifest.append({"name": f"{name}.{part}", "shape": list(arr.shape),
                             "dtype": "float32"})
            blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "frozen": model.frozen,
        "arch": _arch_descriptor(model),
        "steps": {name: params[name].steps for name in sorted(params)},
        "config": _config_dict(config),
        "tensors": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()

    body = bytearray()
    body += MAGIC
    body += struct.pack("<II", FORMAT_VERSION, len(header_bytes))
    body += header_bytes
    for blob in blobs:
        body += blob
    checksum = hashlib.sha256(bytes(body)).digest()
    body += checksum

    Path(path).write_bytes(bytes(body))
    return checksum.hex()


def read_header(path) -> dict:
    """Parse and return just the checkpoint header (with its checksum)."""
    raw = Path(path).read_bytes()
    return _parse(raw, header_only=True)[0]


def _parse(raw: bytes, header_only: bool = False):
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    if len(raw) < 12 + header_len + 32:
        raise CheckpointCorruptError("file truncated")
    try:
        header = json.loads(raw[12:12 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"unreadable header: {e}") from e

    stored = raw[-32:]
    recomputed = hashlib.sha256(raw[:-32]).digest()
    if stored != recomputed:
        raise CheckpointCorruptError("checksum mismatch")
    header["checksum"] = stored.hex()
    if header_only:
        return header, None

    payload = raw[12 + header_len:-32]
    tensors = {}
    offset = 0
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise CheckpointCorruptError(f"payload short at tensor {entry['name']}")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float32)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointCorruptError("payload has trailing bytes")
    return header, tensors


def load_checkpoint(path):
    """Reconstruct a model from `path`; restores parameters, Adam moments,
    step counts, and the frozen flag."""
    header, tensors = _parse(Path(path).read_bytes())
    kind = header["model_kind"]
    if kind not in MODEL_KINDS:
        raise CheckpointFormatError(f"unknown model kind {kind!r}")
    model = MODEL_KINDS[kind](seed=0)

    params = model.parameters()
    expected = _arch_descriptor(model)
    if expected != header["arch"]:
        raise CheckpointFormatError("architecture descriptor does not match this build")
    for name, p in params.items():
        p.value.data = tensors[f"{name}.value"].copy()
        p.m1 = tensors[f"{name}.m1"].copy()
        p.m2 = tensors[f"{name}.m2"].copy()
        p.steps = int(header["steps"][name])
    if header.get("frozen"):
        model.freeze()
    return model


def checkpoint_checksum(path) -> str:
    return read_header(path)["checksum"]
