"""Binary model file: versioned header plus named little-endian float32 tensors.

Layout: 8-byte magic, uint32 format version, uint64 header length, UTF-8
JSON header (config, vocabulary, RNG identity, train log, tensor index and
payload checksum), then the raw tensor payload. The checksum makes silent
truncation or bit rot detectable at load time.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import ModelConfig, Params, TrainedModel
from .sentences import Vocab

MAGIC = b"POIPLANM"
FORMAT_VERSION = 1


class ModelFileError(DataError):
    """Model file is corrupt or otherwise unreadable."""


class ModelVersionError(ModelFileError):
    """Model file was written by a newer format than this code understands."""


def _header_dict(model: TrainedModel, tensors: list[dict], payload_sha: str) -> dict:
    return {
        "config": asdict(model.config),
        "vocab": {
            "tokens": list(model.vocab.tokens),
            "poi_ids": list(model.vocab.poi_ids),
            "categories": list(model.vocab.categories),
            "poi_category": dict(model.vocab.poi_category),
        },
        "vocab_hash": model.vocab.fingerprint(),
        "rng_identity": model.rng_identity,
        "train_log": list(model.train_log),
        "tensors": tensors,
        "payload_sha256": payload_sha,
    }


def serialize(model: TrainedModel) -> bytes:
    payload = io.BytesIO()
    tensors = []
    offset = 0
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        raw = arr.tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "<f4", "offset": offset, "nbytes": len(raw)})
        payload.write(raw)
        offset += len(raw)
    raw_payload = payload.getvalue()
    header = _header_dict(model, tensors, hashlib.sha256(raw_payload).hexdigest())
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return b"".join(
        [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(header_bytes)), header_bytes, raw_payload]
    )


def deserialize(blob: bytes) -> TrainedModel:
    fixed = len(MAGIC) + 4 + 8
    if len(blob) < fixed:
        raise ModelFileError("model file truncated before header")
    if blob[: len(MAGIC)] != MAGIC:
        raise ModelFileError("bad magic; not a model file")
    (version,) = struct.unpack_from("<I", blob, len(MAGIC))
    if version > FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version} is newer than supported {FORMAT_VERSION}")
    (header_len,) = struct.unpack_from("<Q", blob, len(MAGIC) + 4)
    header_end = fixed + header_len
    if len(blob) < header_end:
        raise ModelFileError("model file truncated inside header")
    try:
        header = json.loads(blob[fixed:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"model header is not valid JSON: {exc}") from exc

    payload = blob[header_end:]
    expected = sum(t["nbytes"] for t in header["tensors"])
    if len(payload) != expected:
        raise ModelFileError(f"model payload has {len(payload)} bytes, expected {expected}")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ModelFileError("model payload checksum mismatch")

    params: Params = {}
    for spec in header["tensors"]:
        start, nbytes = spec["offset"], spec["nbytes"]
        arr = np.frombuffer(payload[start : start + nbytes], dtype=spec["dtype"]).reshape(spec["shape"])
        params[spec["name"]] = arr.astype(np.float32)

    v = header["vocab"]
    vocab = Vocab(
        tokens=tuple(v["tokens"]),
        poi_ids=tuple(v["poi_ids"]),
        categories=tuple(v["categories"]),
        poi_category=dict(v["poi_category"]),
    )
    if vocab.fingerprint() != header["vocab_hash"]:
        raise ModelFileError("vocabulary hash mismatch in model header")
    return TrainedModel(
        vocab=vocab,
        config=ModelConfig(**header["config"]),
        params=params,
        train_log=tuple(header["train_log"]),
        rng_identity=header["rng_identity"],
    )


def save(model: TrainedModel, path: str | Path) -> str:
    """Write the model; returns the file's fingerprint (sha256 of the bytes)."""
    blob = serialize(model)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load(path: str | Path) -> TrainedModel:
    return deserialize(Path(path).read_bytes())


def fingerprint(model: TrainedModel) -> str:
    """Stable identity of a model in memory: sha256 of its serialized form."""
    return hashlib.sha256(serialize(model)).hexdigest()
