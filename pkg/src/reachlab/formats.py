"""File formats: the ``RGRID 1`` lattice format and a minimal OBJ subset.

RGRID layout (text header, binary payload)::

    RGRID 1
    dim 2
    size 200 200
    origin -0.995 -0.995
    spacing 0.01
    data raw
    <n1*n2 bytes, 0x00/0x01, axis 0 fastest>

Floats are written with ``repr`` (shortest round-trip form), so reading a
written grid reproduces it bit for bit.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .grid import BinaryGrid

__all__ = [
    "FormatError",
    "write_rgrid",
    "read_rgrid",
    "rgrid_bytes",
    "parse_rgrid",
    "ObjData",
    "write_obj",
    "read_obj",
    "obj_text",
    "parse_obj",
]


class FormatError(ValueError):
    """Malformed input; carries the 1-based line and/or byte offset."""

    def __init__(self, message, line=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        self.line = line
        self.offset = offset
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def _fmt(x):
    return repr(float(x))


def rgrid_bytes(g):
    header = [
        "RGRID 1",
        f"dim {g.dim}",
        "size " + " ".join(str(n) for n in g.size),
        "origin " + " ".join(_fmt(o) for o in g.origin),
        f"spacing {_fmt(g.spacing)}",
        "data raw",
    ]
    payload = g.cells.ravel(order="F").astype(np.uint8).tobytes()
    return ("\n".join(header) + "\n").encode("ascii") + payload


def write_rgrid(g, path):
    data = rgrid_bytes(g)
    if hasattr(path, "write"):
        path.write(data)
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _header_line(buf, pos, lineno):
    end = buf.find(b"\n", pos)
    if end < 0:
        raise FormatError("unexpected end of header", line=lineno, offset=pos)
    try:
        text = buf[pos:end].decode("ascii")
    except UnicodeDecodeError:
        raise FormatError("header is not ASCII", line=lineno, offset=pos) from None
    return text, end + 1


def _floats(parts, lineno, what):
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise FormatError(f"bad {what} value", line=lineno) from None


def parse_rgrid(buf):
    buf = bytes(buf)
    pos = 0
    expected = ["RGRID", "dim", "size", "origin", "spacing", "data"]
    fields = {}
    for lineno, key in enumerate(expected, start=1):
        text, pos = _header_line(buf, pos, lineno)
        parts = text.split()
        if not parts or parts[0] != key:
            raise FormatError(f"expected '{key}' record, got {text!r}", line=lineno)
        fields[key] = (parts[1:], lineno)
        if key == "RGRID" and parts[1:] != ["1"]:
            raise FormatError(f"unsupported RGRID version {' '.join(parts[1:])!r}", line=lineno)

    args, ln = fields["dim"]
    if len(args) != 1 or args[0] not in ("2", "3"):
        raise FormatError("dim must be 2 or 3", line=ln)
    dim = int(args[0])
    args, ln = fields["size"]
    if len(args) != dim:
        raise FormatError(f"size needs {dim} extents", line=ln)
    try:
        size = tuple(int(a) for a in args)
    except ValueError:
        raise FormatError("bad size value", line=ln) from None
    if min(size) < 1:
        raise FormatError("extents must be >= 1", line=ln)
    args, ln = fields["origin"]
    if len(args) != dim:
        raise FormatError(f"origin needs {dim} coordinates", line=ln)
    origin = _floats(args, ln, "origin")
    args, ln = fields["spacing"]
    if len(args) != 1:
        raise FormatError("spacing takes one value", line=ln)
    (h,) = _floats(args, ln, "spacing")
    args, ln = fields["data"]
    if args != ["raw"]:
        raise FormatError("only 'data raw' is supported", line=ln)

    n = int(np.prod(size))
    payload = buf[pos:]
    if len(payload) != n:
        raise FormatError(f"payload has {len(payload)} bytes, expected {n}", offset=pos)
    raw = np.frombuffer(payload, dtype=np.uint8)
    bad = np.flatnonzero(raw > 1)
    if bad.size:
        raise FormatError("cell bytes must be 0x00 or 0x01", offset=pos + int(bad[0]))
    cells = raw.astype(bool).reshape(size, order="F")
    try:
        return BinaryGrid(cells, tuple(origin), h)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_rgrid(path):
    if hasattr(path, "read"):
        return parse_rgrid(path.read())
    with open(path, "rb") as fh:
        return parse_rgrid(fh.read())


@dataclass
class ObjData:
    """Vertices, optional normals, closed polylines and triangles of an OBJ file.

    ``lines`` holds 0-based vertex index loops without the repeated closing
    index; ``flagged`` lists vertices whose normal is not unique.
    """

    vertices: np.ndarray
    normals: np.ndarray | None = None
    lines: list | None = None
    faces: np.ndarray | None = None
    flagged: np.ndarray | None = None


def obj_text(data):
    out = io.StringIO()
    for v in data.vertices:
        out.write("v " + " ".join(_fmt(x) for x in v) + "\n")
    if data.normals is not None:
        for nv in data.normals:
            out.write("vn " + " ".join(_fmt(x) for x in nv) + "\n")
    if data.flagged is not None and len(data.flagged):
        out.write("# flagged " + " ".join(str(int(i) + 1) for i in data.flagged) + "\n")
    for loop in data.lines or ():
        idx = [int(i) + 1 for i in loop]
        out.write("l " + " ".join(str(i) for i in idx + idx[:1]) + "\n")
    if data.faces is not None:
        for f in data.faces:
            out.write("f " + " ".join(str(int(i) + 1) for i in f) + "\n")
    return out.getvalue()


def write_obj(data, path):
    text = obj_text(data)
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def _index(tok, nverts, lineno):
    # tolerate v//vn style references; only the vertex index matters
    try:
        i = int(tok.split("/")[0])
    except ValueError:
        raise FormatError(f"bad index {tok!r}", line=lineno) from None
    if not 1 <= i <= nverts:
        raise FormatError(f"index {i} out of range 1..{nverts}", line=lineno)
    return i - 1


def parse_obj(text):
    verts, normals, lines, faces, flagged = [], [], [], [], []
    pending = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["flagged"]:
                pending.append((parts[1:], lineno))
            continue
        parts = line.split()
        tag, args = parts[0], parts[1:]
        if tag == "v":
            if len(args) not in (2, 3):
                raise FormatError("vertex needs 2 or 3 coordinates", line=lineno)
            verts.append(_floats(args, lineno, "vertex"))
        elif tag == "vn":
            if len(args) not in (2, 3):
                raise FormatError("normal needs 2 or 3 components", line=lineno)
            normals.append(_floats(args, lineno, "normal"))
        elif tag == "l":
            idx = [_index(a, len(verts), lineno) for a in args]
            if len(idx) < 4 or idx[0] != idx[-1]:
                raise FormatError("polyline must be closed (first index repeated last)", line=lineno)
            lines.append(np.array(idx[:-1], dtype=np.int64))
        elif tag == "f":
            if len(args) != 3:
                raise FormatError("only triangles are supported", line=lineno)
            faces.append([_index(a, len(verts), lineno) for a in args])
        else:
            raise FormatError(f"unsupported record {tag!r}", line=lineno)
    if not verts:
        raise FormatError("no vertices")
    dims = {len(v) for v in verts}
    if len(dims) != 1:
        raise FormatError("vertices mix 2-D and 3-D coordinates")
    if normals and len(normals) != len(verts):
        raise FormatError(f"{len(normals)} normals for {len(verts)} vertices")
    for args, lineno in pending:
        flagged.extend(_index(a, len(verts), lineno) for a in args)
    return ObjData(
        vertices=np.array(verts, dtype=np.float64),
        normals=np.array(normals, dtype=np.float64) if normals else None,
        lines=lines or None,
        faces=np.array(faces, dtype=np.int64) if faces else None,
        flagged=np.array(sorted(flagged), dtype=np.int64) if flagged else None,
    )


def read_obj(path):
    if hasattr(path, "read"):
        return parse_obj(path.read())
    with open(os.fspath(path), encoding="ascii") as fh:
        return parse_obj(fh.read())
