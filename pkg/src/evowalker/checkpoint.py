"""Versioned binary checkpoints: magic header, format version, config hash."""

from __future__ import annotations

import io
import os
import pickle
import struct

MAGIC = b"EVOWLKR1"
FORMAT_VERSION = 1

KIND_EVOLUTION = "evolution"
KIND_POLICY = "policy"
KIND_STUDENT = "student"
_KINDS = (KIND_EVOLUTION, KIND_POLICY, KIND_STUDENT)


class CheckpointError(RuntimeError):
    """File is not a readable checkpoint of the expected kind."""


def save_checkpoint(path: str, kind: str, payload, config_hash: str):
    """Atomically write `payload` under the versioned envelope."""
    if kind not in _KINDS:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    if len(config_hash) != 64:
        raise ValueError("config_hash must be a sha256 hex digest")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(config_hash.encode("ascii"))
    pickle.dump({"kind": kind, "payload": payload}, buf, protocol=4)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def load_checkpoint(path: str, expected_kind: str | None = None):
    """Returns (kind, payload, config_hash); validates the envelope."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}")
    if len(blob) < len(MAGIC) + 4 + 64 or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a walker checkpoint (bad magic)")
    version = struct.unpack("<I", blob[8:12])[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {version}, "
                              f"expected {FORMAT_VERSION}")
    config_hash = blob[12:76].decode("ascii")
    try:
        doc = pickle.loads(blob[76:])
    except Exception as exc:
        raise CheckpointError(f"{path}: payload is unreadable ({exc})")
    kind = doc.get("kind")
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"{path} holds a {kind!r} checkpoint, "
                              f"expected {expected_kind!r}")
    return kind, doc["payload"], config_hash
