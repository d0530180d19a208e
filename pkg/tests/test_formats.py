import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import annulus, curve
from reachlab.formats import FormatError, ObjData, obj_text, parse_obj, parse_rgrid, read_rgrid, rgrid_bytes, write_rgrid
from reachlab.grid import BinaryGrid
from reachlab.shapes import ShapeSpec, make_mesh

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    arrays(bool, st.one_of(st.tuples(st.integers(1, 6), st.integers(1, 6)),
                           st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)))),
    st.data(),
)
def test_rgrid_roundtrip_bit_exact(cells, data):
    origin = tuple(data.draw(finite) for _ in range(cells.ndim))
    h = data.draw(st.floats(1e-6, 1e3, allow_nan=False))
    g = BinaryGrid(cells, origin, h)
    blob = rgrid_bytes(g)
    back = parse_rgrid(blob)
    assert back == g and back.origin == g.origin and back.spacing == g.spacing
    assert rgrid_bytes(back) == blob


def test_rgrid_layout_axis0_fastest():
    c = np.zeros((2, 3), bool)
    c[1, 0] = True
    blob = rgrid_bytes(BinaryGrid(c, (0.5, -1.0), 0.25))
    head, payload = blob.split(b"data raw\n")
    assert head == b"RGRID 1\ndim 2\nsize 2 3\norigin 0.5 -1.0\nspacing 0.25\n"
    assert payload == bytes([0, 1, 0, 0, 0, 0])


def test_rgrid_file_roundtrip(tmp_path):
    g = annulus()[0]
    p = tmp_path / "a.rgrid"
    write_rgrid(g, p)
    assert read_rgrid(p) == g
    assert read_rgrid(io.BytesIO(p.read_bytes())) == g


GOOD = b"RGRID 1\ndim 2\nsize 2 2\norigin 0 0\nspacing 1\ndata raw\n\x00\x01\x01\x00"


@pytest.mark.parametrize(
    "blob,line,offset",
    [
        (GOOD.replace(b"RGRID 1", b"RGRID 2"), 1, None),
        (GOOD.replace(b"dim 2", b"dim 4"), 2, None),
        (GOOD.replace(b"size 2 2", b"size 2"), 3, None),
        (GOOD.replace(b"origin 0 0", b"origin 0 x"), 4, None),
        (GOOD.replace(b"spacing 1", b"spacing -1"), None, None),
        (GOOD.replace(b"data raw", b"data rle"), 6, None),
        (GOOD[:-1], None, len(GOOD) - 4),
        (GOOD[:-1] + b"\x02", None, len(GOOD) - 1),
        (b"RGRID 1\ndim 2", 2, None),
    ],
)
def test_rgrid_malformed(blob, line, offset):
    with pytest.raises(FormatError) as exc:
        parse_rgrid(blob)
    assert exc.value.line == line
    if offset is not None:
        assert exc.value.offset == offset


def test_obj_polyline_roundtrip_bit_exact():
    ps = curve("box", 64, half_width=1.0)
    data = ObjData(ps.points, ps.normals, [lp for lp in ps.loops], None, np.flatnonzero(ps.flagged))
    text = obj_text(data)
    back = parse_obj(text)
    assert np.array_equal(back.vertices, ps.points) and np.array_equal(back.normals, ps.normals)
    assert np.array_equal(back.flagged, np.flatnonzero(ps.flagged))
    assert [list(x) for x in back.lines] == [list(x) for x in ps.loops]
    assert obj_text(back) == text


def test_obj_mesh_roundtrip_bit_exact():
    mesh, _ = make_mesh(ShapeSpec.of("ball", radius=1.0), 2)
    text = obj_text(ObjData(mesh.vertices, None, None, mesh.faces))
    back = parse_obj(text)
    assert np.array_equal(back.vertices, mesh.vertices) and np.array_equal(back.faces, mesh.faces)
    assert obj_text(back) == text


@pytest.mark.parametrize(
    "text,line",
    [
        ("v 0 0\nv 1 0\nv 0 1\nl 1 2 3\n", 4),
        ("v 0 0\nv 1 0\nv 0 1\nl 1 2 4 1\n", 4),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n", 5),
        ("v 0 zero\n", 1),
        ("v 0 0\nvt 1 1\n", 2),
    ],
)
def test_obj_malformed(text, line):
    with pytest.raises(FormatError) as exc:
        parse_obj(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_obj_count_mismatches():
    with pytest.raises(FormatError):
        parse_obj("v 0 0\nv 1 0\nvn 1 0\n")
    with pytest.raises(FormatError):
        parse_obj("v 0 0\nv 1 0 0\n")
    with pytest.raises(FormatError):
        parse_obj("# nothing\n")
