import json

import numpy as np
import pytest

from conftest import PI, annulus, curve, disk, rbox
from reachlab.flow import (
    FlowError,
    FlowTrace,
    classify_terminal,
    hausdorff_distance,
    measure_slope,
    run_flow,
    trace_jsonl,
    verify_ede,
)
from reachlab.grid import BinaryGrid, GridError, parallel_set, volume
from reachlab.reach import ReachError

T_RBOX = 0.5 / PI


@pytest.fixture(scope="module")
def rbox_trace():
    g, _, f = rbox(s_max=0.5)
    car = curve("rounded_box", 400, half_width=1.0, rounding=0.5)
    return run_flow(g, dt=T_RBOX / 3, carrier=car, field=f)


def test_hausdorff_basics():
    a = np.zeros((8, 8), bool)
    a[2:4, 2:4] = True
    b = np.zeros((8, 8), bool)
    b[2:4, 2:7] = True
    A, B = BinaryGrid(a, (0, 0), 0.5), BinaryGrid(b, (0, 0), 0.5)
    assert hausdorff_distance(A, B) == 1.5
    assert hausdorff_distance(A, A) == 0.0
    with pytest.raises(GridError):
        hausdorff_distance(A, BinaryGrid(a, (0, 0), 1.0))
    with pytest.raises(FlowError):
        hausdorff_distance(A, BinaryGrid(np.zeros((8, 8), bool), (0, 0), 0.5))


def test_rbox_flow_trace(rbox_trace):
    tr = rbox_trace
    assert tr.reach_method == "normal_pair" and tr.T == pytest.approx(T_RBOX, rel=1e-9)
    assert tr.W_source == "curvature"
    assert tr.affine_r2() >= 0.999
    assert tr.W_values[0] - tr.terminal_W == pytest.approx(PI / 2, rel=0.03)
    for v in tr.speeds():
        assert v == pytest.approx(PI, rel=0.02)
    assert tr.terminal_class == "zero_reach_boundary"
    assert verify_ede(tr) <= 0.03 * tr.W_values[0]


def test_rbox_terminal_is_square(rbox_trace):
    body = rbox_trace.terminal_body
    assert volume(body) == pytest.approx(4.0, rel=0.02)
    cls, est = classify_terminal(body)
    assert cls == "zero_reach_boundary" and est.value <= 4 * body.spacing


def test_flow_records_and_jsonl(rbox_trace):
    recs = rbox_trace.records()
    assert len(recs) == len(rbox_trace.times) + 1
    assert recs[0]["d_H_step"] is None and recs[-1]["terminal_class"] == "zero_reach_boundary"
    lines = trace_jsonl(rbox_trace).splitlines()
    assert [json.loads(x) for x in lines] == json.loads(json.dumps(recs))


def test_restart_reproduces_suffix(rbox_trace):
    # a flow restarted from a cut body follows the bodies cut from the original field
    tr = rbox_trace
    g, _, f = rbox(s_max=0.5)
    again = parallel_set(g, -tr.depth_step, f)
    assert again == tr.bodies[1]


def test_disk_flow_lower_dimensional():
    g, _, f = disk(s_max=0.5)
    tr = run_flow(g, dt=1 / PI / 4, carrier=curve("disk", 360, radius=1.0), field=f)
    assert tr.terminal_class == "lower_dimensional"
    assert tr.reach_used == pytest.approx(1.0, abs=1e-9)


def test_disk_flow_semigroup_reach_truncates():
    # without a carrier the margin caps the reach estimate below the radius
    g, _, f = disk(s_max=0.5)
    tr = run_flow(g, field=f)
    assert tr.reach_method == "semigroup" and tr.reach_used < 1.0
    assert tr.terminal_class == "truncated" and tr.W_source == "fit"


def test_horizon_cap_truncates(rbox_trace):
    g, _, f = rbox(s_max=0.5)
    tr = run_flow(g, dt=T_RBOX / 3, reach=0.5, horizon_cap=T_RBOX / 2, field=f)
    assert tr.terminal_class == "truncated" and tr.terminal_body is None
    assert tr.reach_method == "given" and max(tr.times) <= T_RBOX / 2


def test_flow_errors():
    g, _, f = annulus()
    with pytest.raises(FlowError, match="convex"):
        run_flow(g, field=f)
    g, _, f = rbox(s_max=0.5)
    with pytest.raises(FlowError, match="resolution"):
        run_flow(g, dt=g.spacing / PI, reach=0.5, field=f)
    with pytest.raises(FlowError):
        run_flow(g, reach=0.0, field=f)


def test_ede_exact_on_synthetic_trace():
    wn = PI
    t = [0.0, 0.1, 0.2, 0.3]
    tr = FlowTrace(t, [None] * 4, [3.0 - wn * wn * x for x in t], "x", [wn * 0.1] * 3, [0] * 4, 0.3, 0.1 * wn, 1, "given", "truncated")
    assert verify_ede(tr) == pytest.approx(0.0, abs=1e-12)
    assert verify_ede(FlowTrace([0.0], [None], [1.0], "x", [], [0], 0, 0, 1, "given", "truncated")) == 0.0


@pytest.mark.parametrize("i", [0, 1])
def test_slope_lemma_on_disk(i):
    g, _, f = disk()
    s = measure_slope(g, i, 0.24, f)
    assert s.formula_value == pytest.approx((2 - i) * PI, rel=0.02)
    assert s.relative_error <= 0.02, s.to_dict()


def test_slope_volume_rbox():
    g, _, f = rbox()
    s = measure_slope(g, 0, 0.2, f)
    assert s.relative_error <= 0.02


def test_slope_argument_errors():
    g, _, f = disk()
    with pytest.raises(FlowError):
        measure_slope(g, 2, 0.2, f)
    with pytest.raises(FlowError):
        measure_slope(g, 0, 0.03, f)
    with pytest.raises(ReachError):
        measure_slope(g, 0, 0.4, f)


def test_classify_terminal_empty_and_thin():
    assert classify_terminal(None) == ("lower_dimensional", None)
    c = np.zeros((20, 20), bool)
    c[5:15, 9:11] = True
    assert classify_terminal(BinaryGrid(c, (0, 0), 0.1))[0] == "lower_dimensional"
