"""Binary activation dumps.

Layout (little-endian)::

    b"ICRD"  u32 version=1  u32 d  u32 layer_count  u64 record_count
    record_count x (u32 sequence_id, u32 position, u32 token_id, u32 layer, d x f32)

``layer_count`` is the number of distinct layers among the records.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError, DumpFormatError

MAGIC = b"ICRD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")


def record_dtype(d: int) -> np.dtype:
    return np.dtype(
        [
            ("sequence_id", "<u4"),
            ("position", "<u4"),
            ("token_id", "<u4"),
            ("layer", "<u4"),
            ("vector", "<f4", (d,)),
        ]
    )


@dataclass(frozen=True)
class ActivationDump:
    """Per-position activation vectors, stored column-wise.

    Within each ``(sequence_id, layer)`` the positions must be strictly
    increasing in record order.
    """

    d: int
    sequence_id: np.ndarray
    position: np.ndarray
    token_id: np.ndarray
    layer: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        if self.d < 1:
            raise DataError(f"activation dimension must be >= 1, got {self.d}")
        cols = {}
        for name in ("sequence_id", "position", "token_id", "layer"):
            arr = np.asarray(getattr(self, name))
            if arr.ndim != 1 or (arr.size and (arr.min() < 0 or arr.max() > 0xFFFFFFFF)):
                raise DataError(f"{name} must be a 1-D array of u32 values")
            cols[name] = arr.astype(np.uint32)
        vec = np.asarray(self.vectors, dtype=np.float32)
        if vec.size == 0:
            vec = vec.reshape(0, self.d)
        if vec.ndim != 2 or vec.shape[1] != self.d:
            raise DataError(f"vectors must have shape (records, {self.d}), got {vec.shape}")
        sizes = {len(c) for c in cols.values()} | {vec.shape[0]}
        if len(sizes) != 1:
            raise DataError("dump columns have inconsistent record counts")
        for name, arr in cols.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "vectors", vec)
        bad = self._order_violation()
        if bad is not None:
            raise DataError(f"positions not strictly increasing within sequence/layer at record {bad}")

    def _order_violation(self) -> int | None:
        if len(self) < 2:
            return None
        order = np.lexsort((np.arange(len(self)), self.layer, self.sequence_id))
        seq, lay, pos = self.sequence_id[order], self.layer[order], self.position[order].astype(np.int64)
        same = (seq[1:] == seq[:-1]) & (lay[1:] == lay[:-1])
        bad = np.flatnonzero(same & (pos[1:] <= pos[:-1]))
        return int(order[bad[0] + 1]) if bad.size else None

    def __len__(self):
        return int(self.sequence_id.shape[0])

    @property
    def layers(self) -> list[int]:
        return sorted(int(x) for x in np.unique(self.layer))

    @classmethod
    def from_records(cls, d: int, records) -> "ActivationDump":
        """Build from ``(sequence_id, position, token_id, layer, vector)`` tuples."""
        records = list(records)
        if not records:
            return cls(d, *(np.zeros(0, np.uint32) for _ in range(4)), np.zeros((0, d), np.float32))
        seq, pos, tok, lay, vec = zip(*records)
        return cls(d, np.array(seq), np.array(pos), np.array(tok), np.array(lay), np.array(vec, dtype=np.float32))

    @classmethod
    def concat(cls, dumps: list["ActivationDump"]) -> "ActivationDump":
        d = dumps[0].d
        if any(x.d != d for x in dumps):
            raise DataError("cannot concatenate dumps of different dimension")
        return cls(
            d,
            np.concatenate([x.sequence_id for x in dumps]),
            np.concatenate([x.position for x in dumps]),
            np.concatenate([x.token_id for x in dumps]),
            np.concatenate([x.layer for x in dumps]),
            np.concatenate([x.vectors for x in dumps]),
        )


def encode_dump(dump: ActivationDump) -> bytes:
    rec = np.empty(len(dump), dtype=record_dtype(dump.d))
    rec["sequence_id"] = dump.sequence_id
    rec["position"] = dump.position
    rec["token_id"] = dump.token_id
    rec["layer"] = dump.layer
    rec["vector"] = dump.vectors
    header = _HEADER.pack(MAGIC, VERSION, dump.d, len(dump.layers), len(dump))
    return header + rec.tobytes()


def decode_dump(data: bytes) -> ActivationDump:
    if len(data) < _HEADER.size:
        raise DumpFormatError(
            f"truncated header: expected {_HEADER.size} bytes, got {len(data)}", len(data)
        )
    magic, version, d, layer_count, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise DumpFormatError(f"unsupported version {version}", 4)
    if d == 0:
        raise DumpFormatError("vector dimension d is 0", 8)
    dtype = record_dtype(d)
    expected = _HEADER.size + count * dtype.itemsize
    if len(data) != expected:
        what = "truncated payload" if len(data) < expected else "trailing bytes after payload"
        raise DumpFormatError(
            f"{what}: expected {expected} bytes in total, got {len(data)}",
            min(len(data), expected),
        )
    rec = np.frombuffer(data, dtype=dtype, count=count, offset=_HEADER.size)
    try:
        dump = ActivationDump(
            d, rec["sequence_id"].copy(), rec["position"].copy(), rec["token_id"].copy(),
            rec["layer"].copy(), rec["vector"].copy(),
        )
    except DataError as exc:
        raise DumpFormatError(str(exc), _HEADER.size) from exc
    if len(dump.layers) != layer_count:
        raise DumpFormatError(
            f"header declares {layer_count} layers but records contain {len(dump.layers)}", 12
        )
    return dump


def write_dump(path, dump: ActivationDump) -> None:
    Path(path).write_bytes(encode_dump(dump))


def ingest_dump(path) -> ActivationDump:
    return decode_dump(Path(path).read_bytes())
