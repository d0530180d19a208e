import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import curve
from reachlab.regularity import (
    NonGraphError,
    RegularityError,
    SampledFunction,
    extract_graph_patch,
    nearest_index,
    regularity_reach_crosscheck,
    second_difference_scan,
)

DELTA = 1 / 512


def sample(fn, delta=DELTA):
    return SampledFunction.from_callable(fn, -1.0, 1.0, delta)


def test_parabola_constant_is_two():
    rep = second_difference_scan(sample(lambda x: x * x), 1.0)
    assert rep.C_hat == pytest.approx(2.0, abs=1e-6)
    assert rep.consistent


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_abs_is_never_c1alpha(alpha):
    rep = second_difference_scan(sample(np.abs), alpha)
    assert not rep.consistent
    # the ratio blows up like |h|^(-alpha) at the kink
    assert rep.divergence_trend == pytest.approx(alpha, abs=0.05)
    assert rep.worst_x == pytest.approx((0.0,), abs=DELTA / 2)


@pytest.mark.parametrize("alpha,ok", [(0.5, True), (0.9, False)])
def test_three_halves_power(alpha, ok):
    rep = second_difference_scan(sample(lambda x: np.abs(x) ** 1.5), alpha)
    assert rep.consistent is ok


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_quadratics_consistent_with_exact_constant(a, b, c):
    rep = second_difference_scan(sample(lambda x: a * x * x + b * x + c, 1 / 64), 1.0)
    assert rep.consistent
    assert rep.C_hat == pytest.approx(2 * a, rel=1e-6)


def test_two_variable_lattice():
    x = np.linspace(-1, 1, 65)
    X, Y = np.meshgrid(x, x, indexing="ij")
    d = x[1] - x[0]
    assert second_difference_scan(SampledFunction(X**2 + Y**2, d), 1.0).C_hat == pytest.approx(2.0)
    rep = second_difference_scan(SampledFunction(np.abs(X + Y) + Y**2, d), 0.5)
    assert not rep.consistent and rep.directions == 4


def test_sampled_function_validation():
    with pytest.raises(RegularityError):
        SampledFunction(np.zeros((2, 2, 2)), 0.1)
    with pytest.raises(RegularityError):
        SampledFunction([0.0, np.nan, 1.0], 0.1)
    with pytest.raises(RegularityError):
        SampledFunction([0.0, 1.0], -0.1)
    with pytest.raises(RegularityError):
        second_difference_scan(sample(np.abs), 0.0)
    with pytest.raises(RegularityError):
        second_difference_scan(SampledFunction([0.0, 1.0], 0.1), 1.0)


def test_lipschitz_and_bound():
    f = sample(lambda x: 3 * x)
    assert f.lipschitz() == pytest.approx(3.0)
    assert f.bound == pytest.approx(3.0)


# -- curve patches ------------------------------------------------------------


def test_circle_patch_matches_analytic_graph():
    ps = curve("disk", 720, radius=1.0)
    patch = extract_graph_patch(ps, 0, 0.5)
    u = patch.origin[0] + patch.delta * np.arange(len(patch.values))
    # outer normal maps to -e_2, so the circle bends upward as 1 - sqrt(1 - u^2)
    assert np.allclose(patch.values, 1 - np.sqrt(1 - u * u), atol=1e-4)


def test_patch_errors():
    box = curve("box", 64, half_width=1.0)
    corner = int(np.flatnonzero(box.flagged)[0])
    with pytest.raises(RegularityError, match="flagged"):
        extract_graph_patch(box, corner, 0.2)
    forced = extract_graph_patch(box, corner, 0.5, force=True)
    assert not second_difference_scan(forced, 1.0).consistent
    with pytest.raises(NonGraphError):
        extract_graph_patch(curve("disk", 360, radius=1.0), 0, 1.5)
    assert nearest_index(box, box.points[5] + 1e-3) == 5


@pytest.mark.parametrize("m", [64, 256, 1024])
def test_square_crosscheck_corners_and_vanishing_reach(m):
    rep = regularity_reach_crosscheck(curve("box", m, half_width=1.0))
    assert rep.corner_inconsistent and not rep.regular
    assert rep.consistent
    assert rep.reach.value <= 8.0 / m + 1e-12


def test_square_reach_shrinks_under_refinement():
    vals = [regularity_reach_crosscheck(curve("box", m, half_width=1.0)).reach.value for m in (64, 256, 1024)]
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("kind,params", [("rounded_box", {"half_width": 1.0, "rounding": 0.5}), ("disk", {"radius": 1.0})])
def test_smooth_crosscheck_consistent(kind, params):
    rep = regularity_reach_crosscheck(curve(kind, 400, **params))
    assert rep.regular and rep.consistent
    assert rep.max_C_hat_smooth <= rep.bound
    assert rep.corner_inconsistent is None
