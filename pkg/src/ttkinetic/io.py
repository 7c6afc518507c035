"""TT3v1 binary snapshots and deterministic CSV output.

TT3v1 record layout (all little-endian)::

    5 bytes   b"TT3v1"
    5 x u64   N1, N2, N3, r1, r2
    f64[N1*r1]        core1, row-major [k1][a1]
    f64[r1*N2*r2]     core2, row-major [a1][k2][a2]
    f64[r2*N3]        core3, row-major [a2][k3]

A field snapshot is the records of all spatial points, back to back, in
order of the spatial index.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path
from typing import BinaryIO, Iterable, List, Sequence, Union

import numpy as np

from .tt_core import TensorTrain3

__all__ = [
    "TT3_MAGIC",
    "write_tt3",
    "read_tt3",
    "write_tt3_file",
    "read_tt3_file",
    "format_real",
    "write_csv",
]

TT3_MAGIC = b"TT3v1"
_HEADER = struct.Struct("<5Q")


def write_tt3(fh: BinaryIO, tt: TensorTrain3) -> None:
    """Write one unbatched train as a TT3v1 record."""
    if tt.batch_shape:
        raise ValueError("write_tt3 takes a single (unbatched) train")
    (n1, n2, n3), (r1, r2) = tt.mode_sizes, tt.rank
    fh.write(TT3_MAGIC)
    fh.write(_HEADER.pack(n1, n2, n3, r1, r2))
    for c in tt.cores:
        fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise ValueError(f"truncated TT3v1 record: wanted {n} bytes, got {len(b)}")
    return b


def read_tt3(fh: BinaryIO) -> TensorTrain3:
    """Read one TT3v1 record."""
    magic = fh.read(len(TT3_MAGIC))
    if magic != TT3_MAGIC:
        raise ValueError(f"bad TT3v1 magic {magic!r}")
    n1, n2, n3, r1, r2 = _HEADER.unpack(_read_exact(fh, _HEADER.size))
    cores = []
    for shape in ((n1, r1), (r1, n2, r2), (r2, n3)):
        size = int(np.prod(shape))
        cores.append(np.frombuffer(_read_exact(fh, 8 * size), dtype="<f8").reshape(shape).astype(float))
    return TensorTrain3(*cores)


def write_tt3_file(path: Union[str, Path], tt: TensorTrain3) -> None:
    """Write a train, or every point of a train batched over one axis."""
    with open(path, "wb") as fh:
        if tt.batch_shape:
            if len(tt.batch_shape) != 1:
                raise ValueError("only one batch axis is supported")
            for j in range(tt.batch_shape[0]):
                write_tt3(fh, tt[j])
        else:
            write_tt3(fh, tt)


def read_tt3_file(path: Union[str, Path]) -> List[TensorTrain3]:
    """All records of a TT3v1 file."""
    out = []
    with open(path, "rb") as fh:
        while fh.peek(1) if hasattr(fh, "peek") else False:
            out.append(read_tt3(fh))
    return out


def format_real(x) -> str:
    """17 significant digits; empty for ``None``; ``nan``/``inf`` spelled out."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """RFC 4180 CSV with ``\\r\\n`` line ends and :func:`format_real` cells."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_real(v) for v in row])
