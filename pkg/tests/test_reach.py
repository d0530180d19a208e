import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import annulus, curve, disk, rbox, square
from reachlab.grid import BinaryGrid
from reachlab.reach import (
    ReachError,
    ReachEstimate,
    convex_roundtrip,
    hadwiger_membership,
    is_convex,
    reach_normal_pairs,
    reach_semigroup,
    semigroup_violation,
)
from reachlab.shapes import PointedSample

# -- normal pairs -------------------------------------------------------------


@pytest.mark.parametrize("m", [16, 97, 360])
def test_unit_circle_reach_is_one(m):
    e = reach_normal_pairs(curve("disk", m, radius=1.0))
    assert e.value == pytest.approx(1.0, abs=1e-6)
    assert e.method == "normal_pair" and e.bracket[1] == e.value


def test_rounded_box_reach():
    e = reach_normal_pairs(curve("rounded_box", 400, half_width=1.0, rounding=0.5))
    assert e.value == pytest.approx(0.5, rel=0.03)


@pytest.mark.parametrize("lam", [0.5, 3.0])
def test_scaling_exactly_linear(lam):
    ps = curve("rounded_box", 200, half_width=1.0, rounding=0.5)
    a = reach_normal_pairs(ps).value
    b = reach_normal_pairs(ps.transformed(scale=lam)).value
    assert b == pytest.approx(lam * a, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_rigid_motion_invariance(theta, x, y):
    ps = curve("rounded_box", 120, half_width=1.0, rounding=0.5)
    c, s = math.cos(theta), math.sin(theta)
    moved = ps.transformed(np.array([[c, -s], [s, c]]), shift=(x, y))
    assert reach_normal_pairs(moved).value == pytest.approx(reach_normal_pairs(ps).value, rel=1e-9)


def test_flagged_points_rejected_or_dropped():
    ps = curve("box", 64, half_width=1.0)
    with pytest.raises(ReachError, match="flagged"):
        reach_normal_pairs(ps)
    # without the corners the reach still falls toward 0 under refinement
    vals = [reach_normal_pairs(curve("box", m, half_width=1.0), drop_flagged=True).value for m in (64, 256, 1024)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 0.01


def test_two_separated_circles():
    a = curve("disk", 64, radius=1.0)
    b = a.transformed(shift=(4, 0))
    ps = PointedSample(np.r_[a.points, b.points], np.r_[a.normals, b.normals], None, (np.arange(64), np.arange(64, 128)))
    assert reach_normal_pairs(ps).value == pytest.approx(1.0, abs=1e-9)
    c = a.transformed(shift=(2.5, 0))
    ps = PointedSample(np.r_[a.points, c.points], np.r_[a.normals, c.normals], None, (np.arange(64), np.arange(64, 128)))
    # the gap of 0.5 caps the reach at 0.25
    assert reach_normal_pairs(ps).value == pytest.approx(0.25, abs=1e-9)


def test_estimate_validation():
    with pytest.raises(ReachError):
        ReachEstimate(1.0, "x", (0.0, 0.5))
    d = ReachEstimate(math.inf, "x", (1.0, math.inf)).to_dict()
    assert d["value"] == "inf" and d["bracket"] == [1.0, "inf"]


# -- semigroup scans ----------------------------------------------------------


def test_annulus_set_reach_small_with_witness():
    g, _, f = annulus()
    e = reach_semigroup(g, 0.4, "set", f)
    assert e.value <= 0.1
    w = e.witness
    assert w is not None and w["inner_block_cells"] > 0
    # the violation sits at a reentrant corner of the hole
    assert np.allclose(np.abs(w["location"]), 0.5, atol=2 * g.spacing)


def test_disk_boundary_reach_reaches_cap():
    g, _, f = disk()
    e = reach_semigroup(g, 0.5, "boundary", f)
    assert e.value == 0.5 and e.witness is None and e.bracket[1] == math.inf


def test_square_boundary_reach_is_lattice_small():
    g, _, f = square()
    e = reach_semigroup(g, 0.5, "boundary", f)
    assert e.value <= 4 * g.spacing
    # the set itself is convex and passes
    assert reach_semigroup(g, 0.5, "set", f).value == 0.5


def test_semigroup_argument_errors():
    g, _, f = disk(s_max=0.5)
    with pytest.raises(ReachError):
        reach_semigroup(g, 0.3, "volume", f)
    with pytest.raises(ReachError, match="margin"):
        reach_semigroup(g, 0.9, "set", f)
    g, _, f = annulus()
    with pytest.raises(ReachError, match="inradius"):
        reach_semigroup(g, 0.4, "boundary", f)


def test_semigroup_violation_block():
    a = np.zeros((6, 6), bool)
    b = a.copy()
    b[2:4, 2:4] = True
    G = lambda c: BinaryGrid(c, (0, 0), 1.0)
    bad, vol, nblk, where = semigroup_violation(G(a), G(b), tau=100.0)
    assert bad and vol == 4.0 and nblk == 1 and where == [2.5, 2.5]
    b[:] = False
    b[0, 0] = True
    assert semigroup_violation(G(a), G(b), tau=100.0)[0] is False


# -- convex bodies ------------------------------------------------------------


def test_is_convex():
    assert is_convex(disk()[0]) and is_convex(square()[0]) and is_convex(rbox()[0])
    assert not is_convex(annulus()[0])


@pytest.mark.parametrize("fixture,r,ok", [(rbox, 0.4, True), (disk, 0.5, True), (square, 0.2, False)])
def test_convex_roundtrip(fixture, r, ok):
    g, _, f = fixture()
    rt = convex_roundtrip(g, r, f)
    assert bool(rt) is ok
    assert (rt.inner_block_cells > 0) is (not ok)


def test_roundtrip_rejects_bad_input():
    g, _, f = annulus()
    with pytest.raises(ReachError, match="convex"):
        convex_roundtrip(g, 0.1, f)
    g, _, f = disk()
    with pytest.raises(ReachError, match="inradius"):
        convex_roundtrip(g, 1.2, f)


def test_hadwiger_membership():
    g, _, f = rbox()
    v = hadwiger_membership(g, 0.4, field=f)
    assert v.member and max(v.residuals) < 0.02
    g, _, f = square()
    v = hadwiger_membership(g, 0.2, field=f)
    # the square is not an outer parallel body; its W_1 derivative straddles the corner kink
    assert not v.member and v.residuals[1] > 0.05
