import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PI, annulus, disk, square
from reachlab.grid import (
    BinaryGrid,
    DegenerateSetError,
    GeometryMismatchError,
    GridError,
    PaddingError,
    TrivialGridError,
    boundary_cells,
    boundary_mask,
    contains_inner_block,
    distance_transform,
    inradius,
    outer_margin,
    parallel_set,
    symmetric_difference_volume,
    tau_vol,
    volume,
)
from reachlab._kernels import available_backends
from reachlab.shapes import ShapeSpec, make_grid


def G(cells, h=1.0):
    cells = np.asarray(cells, bool)
    return BinaryGrid(cells, (0.0,) * cells.ndim, h)


# -- BinaryGrid -------------------------------------------------------------


@pytest.mark.parametrize(
    "cells,origin,h",
    [(np.zeros((2, 2, 2, 2)), (0,) * 4, 1.0), (np.zeros((0, 3)), (0, 0), 1.0), (np.zeros((2, 2)), (0, 0), 0.0),
     (np.zeros((2, 2)), (0, 0), math.inf), (np.zeros((2, 2)), (0,), 1.0)],
)
def test_grid_validation(cells, origin, h):
    with pytest.raises(GridError):
        BinaryGrid(cells, origin, h)


def test_grid_is_immutable_copy():
    c = np.zeros((3, 3), bool)
    g = G(c)
    c[1, 1] = True
    assert g.count == 0
    with pytest.raises(ValueError):
        g.cells[0, 0] = True


def test_center_axis0_fastest():
    g = BinaryGrid(np.zeros((3, 4), bool), (1.0, 2.0), 0.5)
    assert g.center(1) == (1.5, 2.0)
    assert g.center(3) == (1.0, 2.5)
    assert g.center((2, 3)) == (2.0, 3.5)


# -- boundary ---------------------------------------------------------------


def test_boundary_ring_around_hole():
    c = np.ones((3, 3), bool)
    c[1, 1] = False
    assert len(boundary_cells(G(c))) == 8


def test_boundary_single_cell():
    c = np.zeros((5, 5), bool)
    c[2, 2] = True
    b = boundary_cells(G(c))
    assert len(b) == 1 and G(c).center(b[0]) == (2.0, 2.0)


def test_boundary_disk_count():
    i, j = np.indices((64, 64)) - 31.5
    b = boundary_cells(G(i * i + j * j <= 400))
    assert 110 <= len(b) <= 140


@pytest.mark.parametrize("fill", [False, True])
def test_trivial_grids_rejected(fill):
    g = G(np.full((4, 4), fill))
    with pytest.raises(TrivialGridError):
        boundary_mask(g)
    with pytest.raises(TrivialGridError):
        distance_transform(g)


# -- distance field ---------------------------------------------------------


@pytest.mark.parametrize("backend", available_backends())
def test_distance_single_cell(backend):
    c = np.zeros((5, 5), bool)
    c[2, 2] = True
    f = distance_transform(G(c), backend=backend)
    assert f.signed_dist[0, 0] == pytest.approx(math.sqrt(8))
    assert f.signed_dist[2, 2] == 0.0


def test_distance_half_plane():
    # occupied for x <= 0; the front cells sit at x = 0
    g = BinaryGrid(np.indices((20, 9))[0] <= 9, (-4.5, 0.0), 0.5)
    f = distance_transform(g)
    x = np.broadcast_to(g.axis_centers(0)[:, None], g.size)
    out = ~g.cells
    assert np.allclose(f.signed_dist[out], x[out])
    # inside, away from the lattice edges, depth equals |x|
    near = (x > -1.6) & g.cells
    near[:, [0, 1, 2, -3, -2, -1]] = False
    assert np.allclose(f.signed_dist[near], x[near], atol=g.spacing)


def test_distance_disk_accuracy():
    g, _, f = disk()
    x, y = np.meshgrid(g.axis_centers(0), g.axis_centers(1), indexing="ij")
    assert np.max(np.abs(f.signed_dist - (np.hypot(x, y) - 1))) <= 2 * g.spacing


def test_distance_field_contracts():
    g, _, f = annulus()
    h = g.spacing
    bm = boundary_mask(g)
    assert np.all(f.signed_dist[bm] == 0)
    assert np.all((f.signed_dist < 0) == (g.cells & ~bm))
    # nearest index points at a boundary cell at the reported distance
    flat = f.nearest_idx.ravel(order="F")
    assert bm.ravel(order="F")[flat].all()
    rng = np.random.default_rng(1)
    for k in rng.choice(g.cells.size, 300, replace=False):
        p = np.array(g.center(int(k)))
        q = np.array(g.center(int(flat[k])))
        d = abs(f.signed_dist.ravel(order="F")[k])
        assert abs(np.linalg.norm(p - q) - d) < 1e-9
    # 1-Lipschitz along axes, with one cell of slack
    for ax in (0, 1):
        assert np.max(np.abs(np.diff(f.signed_dist, axis=ax))) <= 2 * h + 1e-12


def test_threshold_zero_recovers_grid():
    g, _, f = annulus()
    assert np.array_equal((f.signed_dist <= 0), g.cells)
    assert parallel_set(g, 0.0, f) == g


# -- parallel sets ----------------------------------------------------------


def test_square_parallel_volumes(close):
    g, _, f = square()
    close(volume(parallel_set(g, 0.5, f)), 4 + 4 + PI / 4, 0.01)
    close(volume(parallel_set(g, -0.5, f)), 1.0, 0.01)


def test_padding_and_degenerate_errors():
    g, _, f = square(s_max=0.3)
    with pytest.raises(PaddingError):
        parallel_set(g, 0.6, f)
    with pytest.raises(DegenerateSetError) as exc:
        parallel_set(g, -1.2, f)
    assert exc.value.s == -1.2


def test_field_geometry_mismatch():
    g, _, f = square()
    other = BinaryGrid(g.cells[1:], g.origin, g.spacing)
    with pytest.raises(GeometryMismatchError):
        parallel_set(other, 0.1, f)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(-40, 40), min_size=2, max_size=2))
def test_monotone_in_s(ks):
    g, _, f = annulus()
    lo, hi = sorted(k * 0.005 for k in ks)
    if lo <= -0.25:
        lo = -0.24
    a, b = parallel_set(g, lo, f), parallel_set(g, hi, f)
    assert not (a.cells & ~b.cells).any()
    assert volume(a) <= volume(b)


@pytest.mark.parametrize("s,t", [(0.2, 0.3), (0.1, 0.05)])
def test_outer_semigroup(s, t):
    g, _, f = disk()
    two = parallel_set(parallel_set(g, s, f), t)
    one = parallel_set(g, s + t, f)
    assert symmetric_difference_volume(two, one) <= tau_vol(g)
    assert not contains_inner_block(two.cells ^ one.cells)


@pytest.mark.parametrize("s,t", [(-0.2, -0.3), (-0.05, -0.1)])
def test_inner_semigroup(s, t):
    g, _, f = disk()
    two = parallel_set(parallel_set(g, s, f), t)
    one = parallel_set(g, s + t, f)
    assert symmetric_difference_volume(two, one) <= tau_vol(g)


def test_mixed_sign_inclusions():
    g, _, f = annulus()
    # (A_s)_{-s} contains A and (A_{-s})_s is contained in A, up to one cell
    s = 0.1
    closing = parallel_set(parallel_set(g, s, f), -s)
    opening = parallel_set(parallel_set(g, -s, f), s)
    assert not (g.cells & ~closing.cells).any()
    slack = parallel_set(g, g.spacing, f)
    assert not (opening.cells & ~slack.cells).any()


def test_volume_and_symdiff_basics():
    assert volume(BinaryGrid(np.ones((10, 10), bool), (0, 0), 0.5)) == 25.0
    a = np.zeros((3, 3), bool)
    b = a.copy()
    a[0, 0] = b[2, 2] = True
    assert symmetric_difference_volume(G(a), G(b)) == 2.0
    assert symmetric_difference_volume(G(a), G(a)) == 0.0
    with pytest.raises(GeometryMismatchError):
        symmetric_difference_volume(G(a), G(np.zeros((3, 4), bool)))


@pytest.mark.slow
def test_fine_disk_and_annulus_volume(close):
    g, _ = make_grid(ShapeSpec.of("disk", radius=1.0), 0.005, 0.1)
    close(volume(g), PI, 0.01)
    close(volume(annulus()[0]), 3.0, 0.01)


def test_inradius_and_margin():
    g, _, f = disk(s_max=0.5)
    assert inradius(g, f) == pytest.approx(1.0, abs=2 * g.spacing)
    assert outer_margin(g) >= 0.5


def test_tau_vol_definition():
    g, _, _ = disk()
    assert tau_vol(g) == pytest.approx(4 * g.spacing * len(boundary_cells(g)) * g.spacing)
    assert tau_vol(g.scaled(2.0)) == pytest.approx(4 * tau_vol(g))
