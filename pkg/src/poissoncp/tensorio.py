"""Text formats: FROSTT-style .tns tensors and plain-text Kruskal models.

Tensor format: one nonzero per line as d whitespace-separated 1-based indices
followed by the count. Lines starting with '#' are comments and blank lines
are ignored. Dimensions are inferred as per-mode index maxima unless a
header comment of the form "# dims: I1 I2 ... Id" declares them; the writer
always emits that header so empty trailing slices survive a round-trip.

Model format (version 1), all floats written with shortest round-trip repr:

    pcpmodel 1
    <d> <R>
    <I1> ... <Id>
    <w1> ... <wR>
    then for each mode, I_k lines of R factor entries

Both writers emit canonical bytes: write -> parse -> write is byte-stable.
"""

from __future__ import annotations

import io
import os
from typing import IO, Iterable

import numpy as np

from .errors import NonIntegerValueError, ParseError
from .tensor import KruskalModel, SparseCountTensor, make_sparse

_MODEL_MAGIC = "pcpmodel"
_MODEL_VERSION = 1


def _open_for(path_or_stream, mode: str):
    if isinstance(path_or_stream, (str, os.PathLike)):
        return open(path_or_stream, mode, encoding="utf-8"), True
    return path_or_stream, False


def parse_frostt(source) -> SparseCountTensor:
    """Parse a .tns text stream, string, or path into a SparseCountTensor."""
    if isinstance(source, str) and "\n" in source:
        stream, close = io.StringIO(source), True
    else:
        stream, close = _open_for(source, "r")
    try:
        return _parse_frostt_lines(stream)
    finally:
        if close:
            stream.close()


def _parse_frostt_lines(lines: Iterable[str]) -> SparseCountTensor:
    dims = None
    ndim = None
    coords: list[list[int]] = []
    values: list[int] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("dims:"):
                try:
                    dims = tuple(int(tok) for tok in body[5:].split())
                except ValueError:
                    raise ParseError("malformed dims header", line=lineno) from None
                if not dims or any(s <= 0 for s in dims):
                    raise ParseError("dims header must list positive sizes", line=lineno)
            continue
        parts = line.split()
        if ndim is None:
            ndim = len(parts) - 1
            if dims is not None and len(dims) != ndim:
                raise ParseError(f"line has {ndim} indices but dims header has {len(dims)}", line=lineno)
            if ndim < 1:
                raise ParseError("expected at least one index and a value", line=lineno)
        if len(parts) != ndim + 1:
            raise ParseError(f"expected {ndim + 1} fields, got {len(parts)}", line=lineno)
        idx = []
        for tok in parts[:-1]:
            try:
                i = int(tok)
            except ValueError:
                raise ParseError(f"bad index {tok!r}", line=lineno) from None
            if i < 1:
                raise ParseError(f"indices are 1-based, got {i}", line=lineno)
            idx.append(i - 1)
        try:
            val = float(parts[-1])
        except ValueError:
            raise ParseError(f"bad value {parts[-1]!r}", line=lineno) from None
        if not val.is_integer():
            raise NonIntegerValueError(f"count {parts[-1]} is not an integer", line=lineno)
        coords.append(idx)
        values.append(int(val))
    if ndim is None:
        if dims is None:
            raise ParseError("no data lines and no dims header")
        ndim = len(dims)
    if dims is None:
        dims = tuple(int(c) + 1 for c in np.max(coords, axis=0)) if coords else (1,) * ndim
    return make_sparse(dims, coords, values)


def write_frostt(x: SparseCountTensor, dest) -> None:
    """Write canonical .tns text: dims header, sorted 1-based entries."""
    stream, close = _open_for(dest, "w")
    try:
        stream.write("# dims: " + " ".join(str(s) for s in x.shape) + "\n")
        chunks = []
        for row, val in zip(x.coords, x.values):
            chunks.append(" ".join(str(int(i) + 1) for i in row) + f" {int(val)}\n")
        stream.write("".join(chunks))
    finally:
        if close:
            stream.close()


def _fmt(v: float) -> str:
    return repr(float(v))


def write_model(m: KruskalModel, dest) -> None:
    """Write a model with enough precision for a bitwise float64 round-trip."""
    stream, close = _open_for(dest, "w")
    try:
        out = [f"{_MODEL_MAGIC} {_MODEL_VERSION}\n"]
        out.append(f"{m.ndim} {m.rank}\n")
        out.append(" ".join(str(s) for s in m.shape) + "\n")
        out.append(" ".join(_fmt(w) for w in m.weights) + "\n")
        for f in m.factors:
            for row in f:
                out.append(" ".join(_fmt(v) for v in row) + "\n")
        stream.write("".join(out))
    finally:
        if close:
            stream.close()


def read_model(source) -> KruskalModel:
    """Parse the model text format written by write_model."""
    if isinstance(source, str) and "\n" in source:
        stream, close = io.StringIO(source), True
    else:
        stream, close = _open_for(source, "r")
    try:
        lines = stream.read().splitlines()
    finally:
        if close:
            stream.close()
    pos = 0

    def next_line() -> tuple[int, str]:
        nonlocal pos
        while pos < len(lines):
            pos += 1
            if lines[pos - 1].strip():
                return pos, lines[pos - 1].strip()
        raise ParseError("unexpected end of model file", line=len(lines))

    lineno, header = next_line()
    parts = header.split()
    if len(parts) != 2 or parts[0] != _MODEL_MAGIC or parts[1] != str(_MODEL_VERSION):
        raise ParseError(f"bad model header {header!r}", line=lineno)
    lineno, dims_line = next_line()
    try:
        d, rank = (int(t) for t in dims_line.split())
    except ValueError:
        raise ParseError(f"bad d/R line {dims_line!r}", line=lineno) from None
    lineno, shape_line = next_line()
    try:
        shape = tuple(int(t) for t in shape_line.split())
    except ValueError:
        raise ParseError(f"bad shape line {shape_line!r}", line=lineno) from None
    if len(shape) != d:
        raise ParseError(f"expected {d} dimensions, got {len(shape)}", line=lineno)

    def parse_floats(expect: int) -> np.ndarray:
        n, text = next_line()
        toks = text.split()
        if len(toks) != expect:
            raise ParseError(f"expected {expect} numbers, got {len(toks)}", line=n)
        try:
            return np.array([float(t) for t in toks])
        except ValueError:
            raise ParseError("bad float field", line=n) from None

    weights = parse_floats(rank)
    factors = []
    for size in shape:
        factors.append(np.vstack([parse_floats(rank) for _ in range(size)]))
    return KruskalModel(weights, factors)


def load_tensor(path) -> SparseCountTensor:
    return parse_frostt(path)


def save_tensor(x: SparseCountTensor, path) -> None:
    write_frostt(x, path)


def load_model(path) -> KruskalModel:
    return read_model(path)


def save_model(m: KruskalModel, path) -> None:
    write_model(m, path)
