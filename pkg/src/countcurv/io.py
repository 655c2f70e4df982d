"""Text and binary serialization of :class:`CellComplex`.

Text format::

    cells N dim m scale a
    id x1 .. xm weight deg n1 n2 ...

``dim 0`` means no positions, ``scale -`` no mesh scale and a ``-`` weight
column means the complex is unweighted.  Floats are written with ``repr`` so
that a round trip is exact.

Binary format (``CCX1``, little-endian)::

    magic   4s   b"CCX1"
    flags   u4   bit0 weights, bit1 positions, bit2 mesh scale
    N       u8
    dim     u4
    scale   f8   (NaN when absent)
    nnz     u8
    indptr  u8[N+1]
    indices u4[nnz]
    pos     f8[N*dim]   if bit1
    weights f8[N]       if bit0
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .complex import DEFAULT_DEGREE_BOUND, CellComplex, from_csr
from .errors import FormatError

MAGIC = b"CCX1"
_HEAD = struct.Struct("<4sIQIdQ")
_F_WEIGHTS, _F_POS, _F_SCALE = 1, 2, 4

PathLike = Union[str, Path]


def _bound(indptr) -> int:
    deg = int(np.diff(indptr).max()) if len(indptr) > 1 else 0
    return max(DEFAULT_DEGREE_BOUND, deg)


# -- text --------------------------------------------------------------------

def write_text(cx: CellComplex, path: PathLike) -> None:
    dim = cx.dim
    scale = "-" if cx.mesh_scale is None else repr(float(cx.mesh_scale))
    lines = [f"cells {cx.cell_count} dim {dim} scale {scale}"]
    for c in range(cx.cell_count):
        nb = cx.indices[cx.indptr[c]:cx.indptr[c + 1]]
        parts = [str(c)]
        if dim:
            parts.extend(repr(float(x)) for x in cx.positions[c])
        parts.append("-" if cx.weights is None else repr(float(cx.weights[c])))
        parts.append(str(len(nb)))
        parts.extend(str(int(x)) for x in nb)
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_text(path: PathLike) -> CellComplex:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6 or head[0] != "cells" or head[2] != "dim" or head[4] != "scale":
            raise FormatError(f"bad header in {path}: {' '.join(head)!r}")
        try:
            n, dim = int(head[1]), int(head[3])
            scale = None if head[5] == "-" else float(head[5])
        except ValueError as exc:
            raise FormatError(f"bad header in {path}") from exc
        pos = np.empty((n, dim)) if dim else None
        weights = np.empty(n)
        have_w = None
        counts = np.zeros(n, dtype=np.int64)
        nbrs = [None] * n
        seen = 0
        for lineno, line in enumerate(fh, start=2):
            tok = line.split()
            if not tok:
                continue
            try:
                c = int(tok[0])
                if not 0 <= c < n or nbrs[c] is not None:
                    raise FormatError(f"line {lineno}: bad or repeated cell id {c}")
                if dim:
                    pos[c] = [float(x) for x in tok[1:1 + dim]]
                w = tok[1 + dim]
                is_w = w != "-"
                if have_w is None:
                    have_w = is_w
                elif have_w != is_w:
                    raise FormatError(f"line {lineno}: mixed weighted/unweighted cells")
                if is_w:
                    weights[c] = float(w)
                deg = int(tok[2 + dim])
                nb = tok[3 + dim:]
                if len(nb) != deg:
                    raise FormatError(f"line {lineno}: degree {deg} but {len(nb)} neighbours")
                nbrs[c] = np.array(nb, dtype=np.int64)
                counts[c] = deg
            except (ValueError, IndexError) as exc:
                raise FormatError(f"line {lineno}: {exc}") from exc
            seen += 1
        if seen != n:
            raise FormatError(f"expected {n} cells, found {seen}")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(nbrs) if n else np.zeros(0, dtype=np.int64)
    return from_csr(indptr, indices, weights if have_w else None, pos, scale,
                    degree_bound=_bound(indptr), validate=True)


# -- binary ------------------------------------------------------------------

def write_binary(cx: CellComplex, path: PathLike) -> None:
    flags = 0
    if cx.weights is not None:
        flags |= _F_WEIGHTS
    if cx.positions is not None:
        flags |= _F_POS
    if cx.mesh_scale is not None:
        flags |= _F_SCALE
    scale = float("nan") if cx.mesh_scale is None else float(cx.mesh_scale)
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, flags, cx.cell_count, cx.dim, scale, len(cx.indices)))
        fh.write(np.asarray(cx.indptr, dtype="<u8").tobytes())
        fh.write(np.asarray(cx.indices, dtype="<u4").tobytes())
        if cx.positions is not None:
            fh.write(np.asarray(cx.positions, dtype="<f8").tobytes())
        if cx.weights is not None:
            fh.write(np.asarray(cx.weights, dtype="<f8").tobytes())


def read_binary(path: PathLike, validate: bool = True) -> CellComplex:
    buf = Path(path).read_bytes()
    if len(buf) < _HEAD.size or buf[:4] != MAGIC:
        raise FormatError(f"{path} is not a CCX1 file")
    _, flags, n, dim, scale, nnz = _HEAD.unpack_from(buf)
    off = _HEAD.size

    def take(dtype, count):
        nonlocal off
        size = np.dtype(dtype).itemsize * count
        if off + size > len(buf):
            raise FormatError(f"{path} is truncated")
        a = np.frombuffer(buf, dtype=dtype, count=count, offset=off)
        off += size
        return a

    indptr = take("<u8", n + 1).astype(np.int64)
    indices = take("<u4", nnz).astype(np.int32)
    pos = take("<f8", n * dim).reshape(n, dim).copy() if flags & _F_POS else None
    weights = take("<f8", n).copy() if flags & _F_WEIGHTS else None
    if off != len(buf):
        raise FormatError(f"{path} has {len(buf) - off} trailing bytes")
    if indptr[0] != 0 or indptr[-1] != nnz or np.any(np.diff(indptr) < 0):
        raise FormatError(f"{path} has inconsistent offsets")
    return from_csr(indptr, indices, weights, pos,
                    scale if flags & _F_SCALE else None,
                    degree_bound=_bound(indptr), validate=validate)


# -- dispatch -----------------------------------------------------------------

def save_complex(cx: CellComplex, path: PathLike, binary: bool | None = None) -> None:
    """Write ``cx``; binary when ``binary`` is set or the suffix is ``.ccx``."""
    if binary is None:
        binary = Path(path).suffix == ".ccx"
    (write_binary if binary else write_text)(cx, path)


def load_complex(path: PathLike) -> CellComplex:
    """Read either format, detected by the leading magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    return read_binary(path) if magic == MAGIC else read_text(path)
