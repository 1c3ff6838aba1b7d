"""Binary model artifact: a JSON manifest plus named float64 parameter blobs.

Byte layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"ILGMODEL"
    8       4     u32 format version
    12      8     u64 manifest length M
    20      M     UTF-8 JSON manifest (sorted keys, no whitespace)
    20+M    P     parameter blobs, float64 little-endian, C order, in
                  manifest ``parameters`` order
    end-32  32    SHA-256 digest of every preceding byte

The manifest records the model kind, featurizer version, architecture
config, frozen temperature range, seed, the MCM vocabulary when relevant,
and the ordered ``[name, shape]`` list of parameters.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .featurizer import FEATURIZER_VERSION
from .gnn import GnnConfig, GnnModel
from .mcm import McmConfig, McmModel, Vocabulary

MAGIC = b"ILGMODEL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ")
_DIGEST_SIZE = 32


class ArtifactError(ValueError):
    """Unreadable, corrupt or incompatible model artifact."""


def manifest_of(model) -> dict:
    manifest = {
        "kind": model.kind,
        "featurizer_version": FEATURIZER_VERSION,
        "config": model.artifact_config(),
        "t_min": model.t_min,
        "t_max": model.t_max,
        "seed": model.seed,
        "parameters": [[name, list(p.shape)] for name, p in _ordered(model)],
        "num_parameters": model.num_parameters(),
    }
    if model.kind == "mcm":
        manifest["vocabulary"] = model.vocabulary.to_dict()
    return manifest


def _ordered(model):
    return sorted(model.state_dict().items())


def to_bytes(model, extra: dict | None = None) -> bytes:
    if model.t_min is None:
        raise ArtifactError("model has no fitted temperature range; train it first")
    manifest = manifest_of(model)
    if extra:
        manifest["extra"] = extra
    text = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(text)), text]
    for _, value in _ordered(model):
        parts.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save(model, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_bytes(to_bytes(model, extra))


def read_manifest(data: bytes) -> tuple[dict, int]:
    """Verify framing and checksum; return the manifest and blob offset."""
    if len(data) < _HEADER.size + _DIGEST_SIZE:
        raise ArtifactError("file too short to be a model artifact (checksum error)")
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise ArtifactError("checksum error: artifact is truncated or corrupt")
    magic, version, length = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise ArtifactError("not a model artifact (bad magic)")
    if version != FORMAT_VERSION:
        raise ArtifactError(f"unsupported artifact format version {version}")
    start = _HEADER.size
    try:
        manifest = json.loads(body[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"manifest is not valid JSON: {exc}") from None
    return manifest, start + length


def from_bytes(data: bytes):
    manifest, offset = read_manifest(data)
    body = data[:-_DIGEST_SIZE]
    if manifest.get("featurizer_version") != FEATURIZER_VERSION:
        raise ArtifactError(
            f"artifact featurizer version {manifest.get('featurizer_version')!r} does not "
            f"match this build ({FEATURIZER_VERSION!r})"
        )
    model = _build(manifest)
    expected = {name: tuple(value.shape) for name, value in model.state_dict().items()}
    stored = {name: tuple(shape) for name, shape in manifest["parameters"]}
    if stored != expected:
        missing = sorted(set(expected) - set(stored))
        unexpected = sorted(set(stored) - set(expected))
        wrong = sorted(k for k in set(stored) & set(expected) if stored[k] != expected[k])
        raise ArtifactError(
            f"parameter mismatch: missing={missing} unexpected={unexpected} wrong_shape={wrong}"
        )
    state = {}
    for name, shape in manifest["parameters"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(body):
            raise ArtifactError(f"parameter blob {name} runs past the end of the file")
        state[name] = np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(body):
        raise ArtifactError(f"{len(body) - offset} trailing bytes after the parameter blobs")
    model.load_state_dict(state)
    model.t_min, model.t_max = manifest["t_min"], manifest["t_max"]
    return model


def _build(manifest: dict):
    kind = manifest.get("kind")
    if kind == "gnn":
        return GnnModel(GnnConfig.from_dict(manifest["config"]), seed=manifest["seed"])
    if kind == "mcm":
        vocab = Vocabulary.from_dict(manifest["vocabulary"])
        return McmModel(vocab, McmConfig.from_dict(manifest["config"]), seed=manifest["seed"])
    raise ArtifactError(f"unknown model kind {kind!r}")


def load(path: str | Path):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror}") from None
    return from_bytes(data)


def inspect(path: str | Path) -> dict:
    """Checksum-verified manifest with a per-parameter count summary."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror}") from None
    manifest, _ = read_manifest(data)
    counted = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in manifest["parameters"])
    return {
        "kind": manifest["kind"],
        "featurizer_version": manifest["featurizer_version"],
        "config": manifest["config"],
        "t_min": manifest["t_min"],
        "t_max": manifest["t_max"],
        "seed": manifest["seed"],
        "num_parameters": counted,
        "num_tensors": len(manifest["parameters"]),
        "sha256": hashlib.sha256(data[:-_DIGEST_SIZE]).hexdigest(),
    }
