"""TCF1 binary format, the file interface shared with the trainer.

Layout (little-endian): magic "TCF1", u32 version=1, u32 L, u32 T,
u32 hidden, u32 record_count; then per record u32 id_len, UTF-8 id
bytes, then L*T*hidden float32 ordered layer-major, token-major,
hidden-major. The record count is back-patched after the last record.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MAGIC = b"TCF1"
VERSION = 1
HEADER_SIZE = len(MAGIC) + 5 * 4


class TcfError(Exception):
    pass


@dataclass
class TcfHeader:
    layers: int
    seq_len: int
    hidden: int
    record_count: int


def write_records(f, records: Iterable[tuple[str, np.ndarray]],
                  layers: int, seq_len: int, hidden: int) -> int:
    """Write a full TCF1 stream to a seekable binary file; returns the count."""
    count = 0
    f.write(MAGIC)
    f.write(struct.pack("<5I", VERSION, layers, seq_len, hidden, 0))
    for rec_id, arr in records:
        arr = np.asarray(arr, dtype="<f4")
        if arr.shape != (layers, seq_len, hidden):
            raise TcfError(
                f"record {rec_id}: shape {arr.shape} != {(layers, seq_len, hidden)}")
        blob = rec_id.encode("utf-8")
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(arr).tobytes())
        count += 1
    f.seek(len(MAGIC) + 4 * 4)
    f.write(struct.pack("<I", count))
    return count


def read_header(f) -> TcfHeader:
    blob = f.read(HEADER_SIZE)
    if len(blob) < HEADER_SIZE or blob[:len(MAGIC)] != MAGIC:
        raise TcfError("not a TCF1 feature file")
    version, layers, seq_len, hidden, count = struct.unpack("<5I", blob[len(MAGIC):])
    if version != VERSION:
        raise TcfError(f"unsupported TCF version {version}")
    return TcfHeader(layers=layers, seq_len=seq_len, hidden=hidden, record_count=count)


def read_records(path) -> Iterator[tuple[str, np.ndarray]]:
    """Stream (id, array[L, T, hidden]) records; raises TcfError on damage."""
    with open(path, "rb") as f:
        header = read_header(f)
        rec_floats = header.layers * header.seq_len * header.hidden
        for i in range(header.record_count):
            len_blob = f.read(4)
            if len(len_blob) != 4:
                raise TcfError(f"truncated at record {i}")
            (id_len,) = struct.unpack("<I", len_blob)
            rec_id = f.read(id_len).decode("utf-8")
            blob = f.read(4 * rec_floats)
            if len(blob) != 4 * rec_floats:
                raise TcfError(f"truncated at record {i} ({rec_id})")
            arr = np.frombuffer(blob, dtype="<f4").reshape(
                header.layers, header.seq_len, header.hidden)
            yield rec_id, arr
        if f.read(1):
            raise TcfError("trailing bytes after last record")
