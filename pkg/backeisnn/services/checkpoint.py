"""
Single-file binary checkpoints.

Layout (all integers little-endian)::

    b"BEISNNCK"  uint32 version  uint32 record count
    record*:  uint32 name length, UTF-8 name,
              uint8 kind (0 text, 1 float32, 2 float64, 3 int64),
              uint32 ndim, uint64 extent * ndim,
              uint64 payload length, payload

Records are written in a canonical order, so saving a loaded checkpoint
reproduces the original bytes.
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from backeisnn.run_config import RunConfig
from backeisnn.utils.errors import ConfigError, DataError, DataFormatError, TruncatedDataError


logger = logging.getLogger("backeisnn.checkpoint")

MAGIC = b"BEISNNCK"
VERSION = 1

_KIND_TEXT = 0
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8")}
_KINDS = {np.dtype(np.float32): 1, np.dtype(np.float64): 2, np.dtype(np.int64): 3}


@dataclass
class Checkpoint:
    config_yaml: str
    epoch: int
    params: dict[str, np.ndarray]
    optimizer: dict[str, Any]
    rng_state: dict[str, Any]
    best_accuracy: float = -1.0
    version: int = VERSION
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def config(self) -> RunConfig:
        return RunConfig.model_validate(yaml.safe_load(self.config_yaml))

    def check_compatible(self, config: RunConfig) -> None:
        """Refuse to restore into a network with a different architecture."""
        saved = self.config.network_spec()
        wanted = config.network_spec()
        if saved.structure != wanted.structure:
            raise ConfigError(
                f"checkpoint structure {saved.structure!r} does not match configured {wanted.structure!r}"
            )
        if (saved.sfbm, saved.beim, saved.gate_kernel) != (wanted.sfbm, wanted.beim, wanted.gate_kernel):
            raise ConfigError("checkpoint gate settings (sfbm, beim, gate_kernel) differ from the configuration")


def _pack_record(name: str, kind: int, shape: tuple[int, ...], payload: bytes) -> bytes:
    encoded = name.encode("utf-8")
    head = struct.pack("<I", len(encoded)) + encoded + struct.pack("<BI", kind, len(shape))
    dims = struct.pack(f"<{len(shape)}Q", *shape) if shape else b""
    return head + dims + struct.pack("<Q", len(payload)) + payload


def _text_record(name: str, text: str) -> bytes:
    return _pack_record(name, _KIND_TEXT, (), text.encode("utf-8"))


def _array_record(name: str, array: np.ndarray) -> bytes:
    array = np.asarray(array)
    kind = _KINDS.get(array.dtype)
    if kind is None:
        raise DataFormatError(f"checkpoint cannot store {name} with dtype {array.dtype}")
    data = np.ascontiguousarray(array, dtype=_DTYPES[kind]).tobytes()
    return _pack_record(name, kind, tuple(array.shape), data)


def _dump_yaml(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=True, allow_unicode=True)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    records = [
        _text_record("meta/config", ckpt.config_yaml),
        _array_record("meta/epoch", np.int64(ckpt.epoch)),
        _array_record("meta/best_accuracy", np.float64(ckpt.best_accuracy)),
        _text_record("rng/state", _dump_yaml(ckpt.rng_state)),
        _array_record("adam/t", np.int64(ckpt.optimizer.get("t", 0))),
        _array_record("adam/lr", np.float64(ckpt.optimizer.get("lr", 0.0))),
    ]
    records += [_array_record(f"param/{n}", ckpt.params[n]) for n in sorted(ckpt.params)]
    for moment in ("m", "v"):
        values = ckpt.optimizer.get(moment, {})
        records += [_array_record(f"adam/{moment}/{n}", values[n]) for n in sorted(values)]
    records += [_array_record(f"extra/{n}", ckpt.extra[n]) for n in sorted(ckpt.extra)]
    return MAGIC + struct.pack("<II", ckpt.version, len(records)) + b"".join(records)


class _Reader:
    def __init__(self, raw: bytes, source: str) -> None:
        self.raw = raw
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedDataError(f"{self.source}: checkpoint ends inside a record")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(raw: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(raw, source)
    if reader.take(len(MAGIC)) != MAGIC:
        raise DataFormatError(f"{source}: not a checkpoint (bad magic)")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise DataFormatError(f"{source}: checkpoint version {version}, this build reads version {VERSION}")

    texts: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        kind, ndim = reader.unpack("<BI")
        shape = reader.unpack(f"<{ndim}Q") if ndim else ()
        (length,) = reader.unpack("<Q")
        payload = reader.take(length)
        if kind == _KIND_TEXT:
            texts[name] = payload.decode("utf-8")
        elif kind in _DTYPES:
            arrays[name] = np.frombuffer(payload, dtype=_DTYPES[kind]).reshape(shape).copy()
        else:
            raise DataFormatError(f"{source}: record {name!r} has unknown kind {kind}")
    if reader.pos != len(raw):
        raise DataFormatError(f"{source}: {len(raw) - reader.pos} trailing bytes after the last record")

    def prefixed(prefix: str) -> dict[str, np.ndarray]:
        return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}

    try:
        return Checkpoint(
            config_yaml=texts["meta/config"],
            epoch=int(arrays["meta/epoch"]),
            best_accuracy=float(arrays["meta/best_accuracy"]),
            rng_state=yaml.safe_load(texts["rng/state"]),
            params=prefixed("param/"),
            optimizer={
                "t": int(arrays["adam/t"]),
                "lr": float(arrays["adam/lr"]),
                "m": prefixed("adam/m/"),
                "v": prefixed("adam/v/"),
            },
            extra=prefixed("extra/"),
            version=version,
        )
    except KeyError as e:
        raise DataFormatError(f"{source}: checkpoint lacks record {e.args[0]!r}") from None


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    """Write atomically: a partially written file never replaces a good one."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(ckpt))
    os.replace(tmp, path)
    logger.info("checkpoint_saved path=%s epoch=%d", path, ckpt.epoch)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    ckpt = decode_checkpoint(path.read_bytes(), str(path))
    logger.info("checkpoint_loaded path=%s epoch=%d", path, ckpt.epoch)
    return ckpt
