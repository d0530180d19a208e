"""Mean-breadth gradient flow ``x(t) = K_{-omega_n t}`` on the lattice.

Along the flow ``W_{n-1}`` drops at the constant rate ``omega_n^2`` while
bodies move at Hausdorff speed ``omega_n``. Bodies are always cut from the
distance field of the original body, never by composing erosions.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._kernels import squared_edt, thread_count
from .curvature import DiscreteCurvature, quermass_from_curvature
from .grid import (
    DegenerateSetError,
    GridError,
    distance_transform,
    inradius,
    outer_margin,
    parallel_set,
    volume,
)
from .reach import ReachError, is_convex, reach_normal_pairs, reach_semigroup
from .shapes import ball_volume
from .steiner import fit_grid, minkowski_content, snap_offsets

__all__ = [
    "FlowError",
    "FlowTrace",
    "SlopeSample",
    "run_flow",
    "verify_ede",
    "measure_slope",
    "hausdorff_distance",
    "classify_terminal",
    "trace_jsonl",
    "LOWER_DIM_CELLS",
    "ZERO_REACH_CELLS",
]

LOWER_DIM_CELLS = 2.0
ZERO_REACH_CELLS = 4.0


class FlowError(ValueError):
    pass


def hausdorff_distance(g1, g2):
    """Symmetric Hausdorff distance between the occupied cell centers."""
    if not g1.same_geometry(g2):
        raise GridError("grids differ in geometry")
    if g1.count == 0 or g2.count == 0:
        raise FlowError("Hausdorff distance needs two non-empty sets")
    d12, _ = squared_edt(g2.cells)
    d21, _ = squared_edt(g1.cells)
    worst = max(int(d12[g1.cells].max()), int(d21[g2.cells].max()))
    return math.sqrt(worst) * g1.spacing


@dataclass
class FlowTrace:
    times: list
    bodies: list = field(repr=False)
    W_values: list
    W_source: str
    hausdorff_steps: list
    volumes: list
    T: float
    depth_step: float
    reach_used: float
    reach_method: str
    terminal_class: str
    terminal_body: object = field(default=None, repr=False)
    terminal_W: float | None = None
    n: int = 2

    @property
    def dt(self):
        return self.depth_step / ball_volume(self.n)

    def speeds(self):
        """Per-step metric derivative estimates ``d_H / dt``."""
        return [d / (t1 - t0) for d, t0, t1 in zip(self.hausdorff_steps, self.times, self.times[1:])]

    def affine_r2(self):
        """Coefficient of determination of a straight-line fit of W against t."""
        t = np.asarray(self.times)
        w = np.asarray(self.W_values)
        if len(t) < 3:
            return 1.0
        coef = np.polyfit(t, w, 1)
        resid = w - np.polyval(coef, t)
        ss = float(np.sum((w - w.mean()) ** 2))
        return 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0

    def records(self):
        out = []
        for k, t in enumerate(self.times):
            out.append(
                {
                    "t": t,
                    "W": self.W_values[k],
                    "d_H_step": self.hausdorff_steps[k - 1] if k else None,
                    "volume": self.volumes[k],
                }
            )
        out.append(
            {
                "terminal_class": self.terminal_class,
                "T": self.T,
                "terminal_W": self.terminal_W,
                "reach": self.reach_used,
                "reach_method": self.reach_method,
                "depth_step": self.depth_step,
                "W_source": self.W_source,
            }
        )
        return out


def trace_jsonl(trace):
    """One JSON object per line: the time samples, then the terminal record."""
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in trace.records())


def _offset_curve_W(carrier, depth, n):
    """``W_{n-1}`` of the inner parallel body from the offset polyline ``a - d nu(a)``."""
    pts = carrier.points - depth * carrier.normals
    loops = []
    for lp in carrier.loops:
        q = pts[lp]
        step = np.linalg.norm(np.roll(q, -1, axis=0) - q, axis=1)
        keep = step > 1e-12 * max(1.0, float(np.abs(q).max()))
        loops.append(np.asarray(lp)[keep])
    dc = DiscreteCurvature.from_polyline(pts, loops)
    return quermass_from_curvature(dc)[n - 1]


def _fit_W(body, n, hi):
    return fit_grid(body, 0.0, hi).quermass[n - 1]


def classify_terminal(body, field=None, lower_dim_cells=LOWER_DIM_CELLS, zero_reach_cells=ZERO_REACH_CELLS):
    """``lower_dimensional``, ``zero_reach_boundary`` or ``None`` (neither witnessed)."""
    if body is None or body.count == 0:
        return "lower_dimensional", None
    h = body.spacing
    if field is None:
        field = distance_transform(body)
    depth = inradius(body, field)
    if depth <= lower_dim_cells * h:
        return "lower_dimensional", None
    r_max = min(depth, outer_margin(body), 4 * zero_reach_cells * h)
    est = reach_semigroup(body, r_max, "boundary", field)
    if est.value <= zero_reach_cells * h:
        return "zero_reach_boundary", est
    return None, est


def run_flow(K, dt=None, horizon_cap=None, reach=None, carrier=None, field=None, check_convex=True):
    """Trace the flow from the convex body ``K`` up to ``T = reach(boundary) / omega_n``.

    ``reach`` defaults to the normal-pair estimate of ``carrier`` when a
    sampled boundary is supplied, else to the boundary semigroup estimate.
    ``dt`` defaults to ``max(2h / omega_n, T / 64)``; the depth step
    ``omega_n dt`` is snapped to a multiple of ``h``. ``W_{n-1}`` comes from
    the carrier's offset curves when available, else from Steiner fits.
    """
    n, h = K.dim, K.spacing
    wn = ball_volume(n)
    if check_convex and not is_convex(K):
        raise FlowError("flow input must be convex")
    if field is None:
        field = distance_transform(K)
    if reach is not None:
        r, method = float(reach), "given"
    elif carrier is not None:
        r, method = reach_normal_pairs(carrier).value, "normal_pair"
    else:
        r_max = min(inradius(K, field), outer_margin(K))
        r, method = reach_semigroup(K, r_max, "boundary", field).value, "semigroup"
    if not r > 0:
        raise FlowError("boundary reach must be positive")
    T = r / wn
    if dt is None or dt == "auto":
        dt = max(2 * h / wn, T / 64)
    dt = float(dt)
    if dt < 2 * h / wn * (1 - 1e-9):
        raise FlowError(f"dt={dt} is below the lattice resolution 2h/omega_n={2 * h / wn}")
    depth_step = snap_offsets([wn * dt], h)[0]
    horizon = T if horizon_cap is None else min(T, float(horizon_cap))
    steps = int(math.floor(wn * horizon / depth_step + 1e-9))
    fit_hi = outer_margin(K) - 2 * h
    if carrier is not None:
        W_source = "curvature"
        W_of = lambda body, d: _offset_curve_W(carrier, d, n)  # noqa: E731
    else:
        W_source = "fit"
        W_of = lambda body, d: _fit_W(body, n, fit_hi)  # noqa: E731

    def cut(k):
        try:
            return parallel_set(K, -k * depth_step, field)
        except DegenerateSetError:
            return None

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        cut_bodies = list(pool.map(cut, range(steps + 1)))
    times, bodies, Ws, vols = [], [], [], []
    for k, body in enumerate(cut_bodies):
        if body is None:
            break
        d = k * depth_step
        times.append(d / wn)
        bodies.append(body)
        Ws.append(W_of(body, d))
        vols.append(volume(body))
    if len(bodies) < 2:
        raise FlowError("trace has fewer than two bodies; lower dt")
    d_steps = [hausdorff_distance(a, b) for a, b in zip(bodies, bodies[1:])]

    terminal, terminal_W = None, None
    if horizon_cap is not None and horizon_cap < T:
        cls = "truncated"
    else:
        try:
            terminal = parallel_set(K, -r, field)
        except DegenerateSetError:
            terminal = None
        cls, _ = classify_terminal(terminal)
        if cls is None:
            cls = "truncated"
        if terminal is not None and carrier is not None:
            terminal_W = _offset_curve_W(carrier, r, n)
    return FlowTrace(
        times=times,
        bodies=bodies,
        W_values=Ws,
        W_source=W_source,
        hausdorff_steps=d_steps,
        volumes=vols,
        T=T,
        depth_step=depth_step,
        reach_used=r,
        reach_method=method,
        terminal_class=cls,
        terminal_body=terminal,
        terminal_W=terminal_W,
        n=n,
    )


def verify_ede(trace, slope=None):
    """Largest ``|W(t) + 1/2 int |x'|^2 + 1/2 int |grad W|^2 - W(s)|`` over sample pairs.

    The kinetic term uses the measured Hausdorff speeds, constant on each
    step; the slope term uses ``|grad W_{n-1}| = omega_n`` unless given.
    """
    wn = ball_volume(trace.n)
    g = wn if slope is None else float(slope)
    t = trace.times
    W = trace.W_values
    if len(t) < 2:
        return 0.0
    speeds = trace.speeds()
    kin = [0.0]
    for v, t0, t1 in zip(speeds, t, t[1:]):
        kin.append(kin[-1] + 0.5 * v * v * (t1 - t0))
    worst = 0.0
    for i in range(len(t)):
        for j in range(i + 1, len(t)):
            lhs = W[j] + (kin[j] - kin[i]) + 0.5 * g * g * (t[j] - t[i])
            worst = max(worst, abs(lhs - W[i]))
    return worst


@dataclass(frozen=True)
class SlopeSample:
    i: int
    t_probe: float
    slope_value: float
    formula_value: float
    raw: tuple

    @property
    def relative_error(self):
        return abs(self.slope_value - self.formula_value) / max(abs(self.formula_value), 1e-300)

    def to_dict(self):
        return {
            "i": self.i,
            "t_probe": self.t_probe,
            "slope_value": self.slope_value,
            "formula_value": self.formula_value,
            "raw": list(self.raw),
            "relative_error": self.relative_error,
        }


def measure_slope(K, i, t_probe, field=None, fit_hi=None, count=17):
    """Inner-direction slope of ``W_i`` against ``(n - i) W_{i+1}(K)``.

    Differences ``W_i(K) - W_i(K_{-d})`` are sampled at every lattice depth
    ``d`` in ``[2h, t]``. Near K they follow a polynomial of degree ``n - i``
    in ``d``; eroded bodies also sit a roughly constant fraction of a cell
    off their nominal depth, so a constant term joins the least-squares
    model and the slope is its linear coefficient. The plain Richardson
    value over ``{t, t/2}`` is kept in ``raw``. ``W_0`` is the measured
    volume, ``W_1`` the Minkowski content over ``n``, higher ``W_i`` come
    from outer Steiner fits.
    """
    n, h = K.dim, K.spacing
    if not 0 <= i < n:
        raise FlowError(f"i must lie in [0, {n - 1}]")
    if field is None:
        field = distance_transform(K)
    t = snap_offsets([t_probe], h)[0]
    kt = int(round(t / h))
    klo = 2
    if kt - klo + 1 < n - i + 3:
        raise FlowError(f"t_probe must span at least {n - i + 3} lattice depths above 2h")
    depth = inradius(K, field)
    if t > depth / 4 * (1 + 1e-9):
        raise ReachError(f"t_probe={t} exceeds a quarter of the inradius {depth}")
    if fit_hi is None:
        fit_hi = outer_margin(K) - 2 * h
    fit0 = fit_grid(K, 0.0, fit_hi, count, field)

    def W(body, f=None):
        if i == 0:
            return volume(body)
        if i == 1:
            return minkowski_content(body, f, fit_hi=fit_hi).value / n
        return fit_grid(body, 0.0, fit_hi, count, f).quermass[i]

    w0 = W(K, field)
    ks = np.arange(klo, kt + 1)
    depths = ks * h
    diffs = {}
    for k, d in zip(ks.tolist(), depths.tolist()):
        diffs[k] = w0 - W(parallel_set(K, -d, field))
    D = np.array([diffs[k] for k in ks.tolist()])
    X = np.stack([depths**p for p in range(1, n - i + 1)] + [np.ones_like(depths)], axis=1)
    value = float(np.linalg.lstsq(X, D, rcond=None)[0][0])
    s1 = diffs[kt] / (kt * h)
    s2 = diffs[kt // 2] / ((kt // 2) * h)
    ratio = kt / (kt // 2)
    richardson = (ratio * s2 - s1) / (ratio - 1)
    formula = (n - i) * fit0.quermass[i + 1]
    return SlopeSample(i, t, value, float(formula), (s1, s2, richardson))
