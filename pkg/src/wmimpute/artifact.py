"""Versioned binary container for trained imputers.

Layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"WMIMPUTE"
    8       2     format version (uint16)
    10      4     header length H (uint32)
    14      H     header: UTF-8 JSON, keys sorted
    14+H    P     payload: float64 little-endian tensors, back to back
    14+H+P  32    SHA-256 of bytes [0, 14+H+P)

The header holds ``kind``, ``config``, ``extra`` (e.g. training history),
``norm`` (per-building NormStats), ``metadata`` (package version, PRNG name)
and ``tensors``: a list of ``{name, shape, offset, count}`` where ``offset``
and ``count`` are in float64 elements from the start of the payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import NormStats
from .errors import PipelineError
from .imputers import KINDS
from .rng import PRNG_NAME

MAGIC = b"WMIMPUTE"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sHI")
_DIGEST = 32


@dataclass
class ModelArtifact:
    kind: str
    config: dict
    arrays: dict
    norm: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_imputer(cls, imputer, norm: dict | None = None, metadata: dict | None = None):
        meta = {"package_version": __version__, "prng": PRNG_NAME}
        meta.update(metadata or {})
        return cls(imputer.kind, imputer.get_config(), dict(imputer.get_arrays()), dict(norm or {}),
                   imputer.get_extra(), meta)

    def imputer(self, expected_kind: str | None = None):
        if expected_kind is not None and expected_kind != self.kind:
            raise PipelineError("kind-mismatch", f"artifact holds a {self.kind!r} model, expected {expected_kind!r}")
        return KINDS[self.kind].from_state(self.config, self.arrays, self.extra)

    def to_bytes(self) -> bytes:
        tensors, chunks, offset = [], [], 0
        for name in sorted(self.arrays):
            a = np.ascontiguousarray(self.arrays[name], dtype="<f8")
            tensors.append({"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)})
            chunks.append(a.tobytes())
            offset += a.size
        header = {
            "kind": self.kind,
            "config": self.config,
            "extra": self.extra,
            "norm": {b: s.to_dict() for b, s in sorted(self.norm.items())},
            "metadata": self.metadata,
            "tensors": tensors,
        }
        head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + b"".join(chunks)
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, blob: bytes) -> ModelArtifact:
        if len(blob) < _PREFIX.size + _DIGEST:
            raise PipelineError("checksum-mismatch", "artifact is truncated")
        magic, version, head_len = _PREFIX.unpack_from(blob)
        if magic != MAGIC:
            raise PipelineError("bad-magic", "not a model artifact")
        if version != FORMAT_VERSION:
            raise PipelineError("version-mismatch", f"artifact format v{version}, this build reads v{FORMAT_VERSION}",
                                found=version, expected=FORMAT_VERSION)
        body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
        if hashlib.sha256(body).digest() != digest:
            raise PipelineError("checksum-mismatch", "artifact checksum does not match its contents")
        start = _PREFIX.size
        header = json.loads(body[start:start + head_len])
        payload = np.frombuffer(body, dtype="<f8", offset=start + head_len)
        arrays = {
            t["name"]: payload[t["offset"]: t["offset"] + t["count"]].astype(np.float64).reshape(t["shape"])
            for t in header["tensors"]
        }
        norm = {b: NormStats.from_dict(d) for b, d in header["norm"].items()}
        return cls(header["kind"], header["config"], arrays, norm, header["extra"], header["metadata"])


def save_model(path, imputer, norm: dict | None = None, metadata: dict | None = None) -> ModelArtifact:
    artifact = ModelArtifact.from_imputer(imputer, norm, metadata)
    Path(path).write_bytes(artifact.to_bytes())
    return artifact


def load_model(path) -> ModelArtifact:
    path = Path(path)
    if not path.exists():
        raise PipelineError("missing-input", f"no such artifact: {path}")
    return ModelArtifact.from_bytes(path.read_bytes())
