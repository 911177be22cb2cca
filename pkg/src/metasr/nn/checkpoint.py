"""ParameterStore and the MSRG binary checkpoint format.

Layout (all integers little-endian)::

    b"MSRG"  uint8 version
    repeated until EOF:
        uint32 name_length, name bytes (utf-8)
        uint32 rank, uint64 extents[rank]
        float32 values[prod(extents)]

Records are written in lexicographic name order.
"""

from __future__ import annotations

import os
import struct
from collections.abc import MutableMapping
from typing import Iterator

import numpy as np

from ..errors import BadMagicError, TruncatedCheckpointError, VersionMismatchError
from .tensor import Tensor

MAGIC = b"MSRG"
FORMAT_VERSION = 1


class ParameterStore(MutableMapping):
    """Named tensors iterated in lexicographic order."""

    def __init__(self, entries=None, version: int = FORMAT_VERSION):
        self._entries: dict[str, Tensor] = {}
        self.version = version
        if entries:
            for name, value in dict(entries).items():
                self[name] = value

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __setitem__(self, name: str, value) -> None:
        if not isinstance(name, str) or not name:
            raise KeyError(f"invalid entry name {name!r}")
        if not isinstance(value, Tensor):
            value = Tensor(value, dtype=np.float32)
        self._entries[name] = value

    def __delitem__(self, name: str) -> None:
        del self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"ParameterStore({len(self)} entries, version={self.version})"

    def with_prefix(self, prefix: str) -> "ParameterStore":
        return ParameterStore({k: v for k, v in self._entries.items() if k.startswith(prefix)})

    def update_from(self, other: "ParameterStore") -> "ParameterStore":
        for k in other:
            self[k] = other[k]
        return self


def encode(store: ParameterStore) -> bytes:
    chunks = [MAGIC, bytes([store.version])]
    for name in store:
        data = np.asarray(store[name].data)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(np.asarray(data.shape, dtype="<u8").tobytes())
        chunks.append(np.ascontiguousarray(data, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode(buf: bytes) -> ParameterStore:
    if len(buf) < len(MAGIC):
        raise TruncatedCheckpointError(f"file holds {len(buf)} bytes, shorter than the header")
    if buf[:4] != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {bytes(buf[:4])!r}")
    if len(buf) < 5:
        raise TruncatedCheckpointError("file ends before the version byte")
    if buf[4] != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint version {buf[4]}, this build reads version {FORMAT_VERSION}")

    store = ParameterStore()
    pos = 5

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise TruncatedCheckpointError(f"record truncated while reading {what} at byte {pos}")
        out = buf[pos:pos + n]
        pos += n
        return out

    while pos < len(buf):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, f"rank of {name!r}"))
        shape = tuple(int(e) for e in np.frombuffer(take(8 * rank, f"extents of {name!r}"), dtype="<u8"))
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(take(4 * count, f"values of {name!r}"), dtype="<f4").astype(np.float32)
        store[name] = Tensor(values.reshape(shape), dtype=np.float32)
    return store


def save_checkpoint(store: ParameterStore, path, optimizer_state: ParameterStore | None = None) -> None:
    """Write ``store`` (plus optional optimizer entries) atomically to ``path``."""
    merged = ParameterStore(store, version=store.version)
    if optimizer_state is not None:
        merged.update_from(optimizer_state)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(encode(merged))
    os.replace(tmp, path)


def load_checkpoint(path) -> ParameterStore:
    with open(path, "rb") as fh:
        return decode(fh.read())
