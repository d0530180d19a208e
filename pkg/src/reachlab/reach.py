"""Reach estimators: semigroup scans on grids, normal pairs on samples, convex roundtrips.

A set ``A`` has reach at least ``r`` exactly when outer parallel sets compose,
``(A_s)_t = A_{s+t}``, for ``0 < s < r`` and ``-s <= t < 0``. The boundary
``∂A`` has reach at least ``r`` when the same holds for all ``s`` in
``(-r, r)`` with ``t`` of opposite sign; the negative ``s`` tests the closure
of the complement. On a lattice, "equal" means the symmetric difference holds
no full 2x2 (2x2x2) block of cells and its volume stays below ``tau_vol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .grid import (
    DegenerateSetError,
    GridError,
    PaddingError,
    distance_transform,
    inner_block_cells,
    inradius,
    outer_margin,
    parallel_set,
    tau_vol,
)
from .steiner import fit_grid, snap_offsets

__all__ = [
    "ReachError",
    "ReachEstimate",
    "Roundtrip",
    "HadwigerVerdict",
    "reach_semigroup",
    "reach_normal_pairs",
    "convex_roundtrip",
    "hadwiger_membership",
    "is_convex",
    "semigroup_violation",
]

SCAN = 12
EPS_DEN = 1e-12


class ReachError(ValueError):
    pass


def _enc(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


@dataclass(frozen=True)
class ReachEstimate:
    value: float
    method: str
    bracket: tuple
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.bracket
        if not (lo <= self.value <= hi):
            raise ReachError(f"bracket {self.bracket} does not contain {self.value}")
        if self.value < 0:
            raise ReachError("reach is nonnegative")

    def to_dict(self):
        out = {
            "value": _enc(self.value),
            "method": self.method,
            "bracket": [_enc(self.bracket[0]), _enc(self.bracket[1])],
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.details:
            out["details"] = self.details
        return out


# -- semigroup scans ------------------------------------------------------


class _Cache:
    """Parallel sets of ``g`` and their distance fields, keyed by lattice offset."""

    def __init__(self, g, field=None):
        self.g = g
        self.h = g.spacing
        self.base = field if field is not None else distance_transform(g)
        self.sets = {0: g}
        self.fields = {0: self.base}

    def set(self, k):
        if k not in self.sets:
            self.sets[k] = parallel_set(self.g, k * self.h, self.base)
        return self.sets[k]

    def field(self, k):
        if k not in self.fields:
            self.fields[k] = distance_transform(self.set(k))
        return self.fields[k]


def semigroup_violation(A_st, A_sum, tau):
    """``(is_violation, volume, block_count, block_location)`` for two lattice sets."""
    diff = A_st.cells ^ A_sum.cells
    vol = float(np.count_nonzero(diff)) * A_st.spacing**A_st.dim
    blocks = inner_block_cells(diff) if min(diff.shape) >= 2 else np.zeros((0,) * diff.ndim, bool)
    nblk = int(np.count_nonzero(blocks))
    where = None
    if nblk:
        idx = np.argwhere(blocks)[0]
        # the block's shared lattice vertex
        where = [float(o + A_st.spacing * (i + 0.5)) for o, i in zip(A_st.origin, idx)]
    return (nblk > 0 or vol > tau), vol, nblk, where


def _pairs(r_cells, mode):
    """Lattice ``(s, t)`` pairs (in cells) scanned for candidate radius ``r``."""
    top = r_cells - 1
    if top < 1:
        return []
    s_vals = sorted(set(int(round(x)) for x in np.linspace(1, top, SCAN)))
    if mode == "boundary":
        s_vals = sorted(set(s_vals) | {-x for x in s_vals})
    pairs = []
    for s in s_vals:
        sign = 1 if s > 0 else -1
        mags = sorted(set(int(round(x)) for x in np.linspace(1, abs(s), SCAN)))
        # t runs against s; s + t stays between 0 and s, the roundtrip t = -s included
        pairs += [(s, -sign * m) for m in mags]
    return pairs


def _scan(cache, r_cells, mode, tau):
    """All violations for candidate ``r``; sorted sharpest (smallest offsets) first."""
    found = []
    for s, t in _pairs(r_cells, mode):
        try:
            A_s = cache.set(s)
            A_st = parallel_set(A_s, t * cache.h, cache.field(s))
            A_sum = cache.set(s + t)
        except DegenerateSetError:
            continue
        bad, vol, nblk, where = semigroup_violation(A_st, A_sum, tau)
        if bad:
            found.append(
                {
                    "s": s * cache.h,
                    "t": t * cache.h,
                    "sym_diff_volume": vol,
                    "inner_block_cells": nblk,
                    "location": where,
                }
            )
    found.sort(key=lambda w: (max(abs(w["s"]), abs(w["t"])), abs(w["s"]), w["s"], w["t"]))
    return found


def reach_semigroup(g, r_max, target="set", field=None, tau=None):
    """Largest lattice radius ``r <= r_max`` free of semigroup violations.

    Binary search over multiples of ``h`` down to a ``2h`` bracket; for each
    candidate a 12 x 12 lattice of ``(s, t)`` is scanned. The witness is the
    violating pair with the smallest offsets at the failing candidate.
    """
    if target not in ("set", "boundary"):
        raise ReachError("target must be 'set' or 'boundary'")
    h = g.spacing
    r_max = float(r_max)
    if not r_max > 0:
        raise ReachError("r_max must be positive")
    margin = outer_margin(g)
    if r_max > margin:
        raise ReachError(f"r_max={r_max} exceeds the guard margin {margin}")
    cache = _Cache(g, field)
    if target == "boundary":
        depth = inradius(g, cache.base)
        if r_max > depth:
            raise ReachError(f"r_max={r_max} exceeds the inradius {depth}")
    if tau is None:
        tau = tau_vol(g)
    hi_cells = int(math.floor(r_max / h + 1e-9))
    try:
        top = _scan(cache, hi_cells, target, tau)
    except PaddingError as exc:
        raise ReachError(str(exc)) from None
    details = {"target": target, "r_max": r_max, "tau_vol": tau, "h": h}
    if not top:
        return ReachEstimate(r_max, "semigroup", (max(0.0, r_max - 2 * h), math.inf), None, details)
    lo, hi, witness = 0, hi_cells, top[0]
    while hi - lo > 2:
        mid = (lo + hi) // 2
        found = _scan(cache, mid, target, tau)
        if found:
            hi, witness = mid, found[0]
        else:
            lo = mid
    value = lo * h
    witness = dict(witness, failing_r=hi * h)
    return ReachEstimate(value, "semigroup", (max(0.0, value - 2 * h), hi * h), witness, details)


# -- normal pairs ---------------------------------------------------------


def _loop_spacing(ps):
    gaps = []
    for loop in ps.loops:
        p = ps.points[loop]
        gaps.append(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).max())
    return float(max(gaps))


def reach_normal_pairs(ps, drop_flagged=False, chunk=512):
    """``min |b-a|^2 / (2 |<b-a, nu(a)>|)`` over ordered pairs of sample points.

    Pairs whose normal component is below ``1e-12 * diameter`` are skipped.
    Flagged (corner) points are rejected unless ``drop_flagged`` removes them.
    """
    keep = np.arange(len(ps))
    if ps.flagged.any():
        if not drop_flagged:
            raise ReachError("sample has flagged points without a unique normal")
        keep = np.flatnonzero(~ps.flagged)
    P = ps.points[keep]
    N = ps.normals[keep]
    if len(P) < 4:
        raise ReachError("need at least 4 usable points")
    lo_box, hi_box = P.min(axis=0), P.max(axis=0)
    eps = EPS_DEN * float(np.linalg.norm(hi_box - lo_box))
    best, arg = math.inf, None
    for start in range(0, len(P), chunk):
        a = P[start : start + chunk]
        D = P[None, :, :] - a[:, None, :]
        num = np.einsum("ijk,ijk->ij", D, D)
        den = 2.0 * np.abs(np.einsum("ijk,ik->ij", D, N[start : start + chunk]))
        ok = den >= 2.0 * eps
        ok[np.arange(len(a)), np.arange(start, start + len(a))] = False
        if not ok.any():
            continue
        ratio = np.full(num.shape, np.inf)
        np.divide(num, den, out=ratio, where=ok)
        k = int(np.argmin(ratio))
        i, j = divmod(k, ratio.shape[1])
        if ratio[i, j] < best:
            best, arg = float(ratio[i, j]), (start + i, j)
    if arg is None:
        raise ReachError("every pair was skipped: the sample has no curvature information")
    spacing = _loop_spacing(ps)
    ia, ib = int(keep[arg[0]]), int(keep[arg[1]])
    witness = {"a": ia, "b": ib, "point_a": ps.points[ia].tolist(), "point_b": ps.points[ib].tolist()}
    details = {"points_used": int(len(P)), "dropped_flagged": int(len(ps) - len(P)), "spacing": spacing}
    return ReachEstimate(best, "normal_pair", (max(0.0, best - spacing), best), witness, details)


# -- convex bodies --------------------------------------------------------


def is_convex(g, tau=None):
    """Hull test: cells whose centers lie in the hull of the occupied centers.

    The set passes when the unoccupied cells inside the hull hold no full
    block and their volume is within ``tau_vol``.
    """
    idx = np.argwhere(g.cells)
    if len(idx) <= g.dim:
        return False
    hull = ConvexHull(idx.astype(np.float64))
    lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
    box = tuple(slice(a, b) for a, b in zip(lo, hi))
    grid_pts = np.stack(np.meshgrid(*[np.arange(a, b) for a, b in zip(lo, hi)], indexing="ij"), axis=-1)
    pts = grid_pts.reshape(-1, g.dim).astype(np.float64)
    inside = np.all(pts @ hull.equations[:, :-1].T + hull.equations[:, -1] <= 1e-9, axis=1)
    inside = inside.reshape(grid_pts.shape[:-1])
    gap = inside & ~g.cells[box]
    if tau is None:
        tau = tau_vol(g)
    vol = float(np.count_nonzero(gap)) * g.spacing**g.dim
    return vol <= tau and not (min(gap.shape) >= 2 and inner_block_cells(gap).any())


@dataclass(frozen=True)
class Roundtrip:
    ok: bool
    discrepancy: float
    inner_block_cells: int
    tau_vol: float
    r: float

    def __bool__(self):
        return self.ok

    def to_dict(self):
        return {
            "ok": self.ok,
            "discrepancy": self.discrepancy,
            "inner_block_cells": self.inner_block_cells,
            "tau_vol": self.tau_vol,
            "r": self.r,
        }


def _check_convex_input(g, r, field, check_convex):
    if check_convex and not is_convex(g):
        raise ReachError("input set is not convex")
    depth = inradius(g, field)
    if not r < depth:
        raise ReachError(f"r={r} must be below the inradius {depth}")


def convex_roundtrip(g, r, field=None, check_convex=True, tau=None):
    """Is ``(K_{-r})_r = K`` on the lattice? Returns a truthy :class:`Roundtrip`."""
    r = snap_offsets([r], g.spacing)[0]
    if field is None:
        field = distance_transform(g)
    _check_convex_input(g, r, field, check_convex)
    if tau is None:
        tau = tau_vol(g)
    inner = parallel_set(g, -r, field)
    back = parallel_set(inner, r)
    bad, vol, nblk, _ = semigroup_violation(back, g, tau)
    return Roundtrip(not bad, vol, nblk, tau, r)


@dataclass(frozen=True)
class HadwigerVerdict:
    member: bool
    roundtrip: Roundtrip
    s: float
    delta: float
    derivative: tuple
    formula: tuple
    residuals: tuple

    def to_dict(self):
        return {
            "member": self.member,
            "roundtrip": self.roundtrip.to_dict(),
            "s": self.s,
            "delta": self.delta,
            "derivative": list(self.derivative),
            "formula": list(self.formula),
            "relative_residuals": list(self.residuals),
        }


def _quermass_at(g, s, field, fit_hi):
    body = parallel_set(g, s, field) if s else g
    return fit_grid(body, 0.0, fit_hi).quermass


def hadwiger_membership(g, r, s=0.0, delta=None, field=None, fit_hi=None, check_convex=True):
    """Membership in the class of bodies that are outer ``r``-parallel bodies.

    ``member`` follows the roundtrip test. The differentiability relation
    ``dW_i/ds = (n - i) W_{i+1}`` is checked by central differences of
    quermassintegrals fitted on ``K_{s - delta}`` and ``K_{s + delta}``;
    ``residuals`` are relative to the formula value.
    """
    h = g.spacing
    if field is None:
        field = distance_transform(g)
    rt = convex_roundtrip(g, r, field, check_convex)
    if delta is None:
        delta = max(2 * h, r / 2)
    delta = snap_offsets([delta], h)[0]
    if fit_hi is None:
        fit_hi = outer_margin(g) - 2 * h - max(0.0, s + delta)
    if fit_hi <= 0:
        raise ReachError("no guard margin left for the derivative fits")
    try:
        Wm = _quermass_at(g, s - delta, field, fit_hi)
        Wp = _quermass_at(g, s + delta, field, fit_hi)
        W0 = _quermass_at(g, s, field, fit_hi)
    except (DegenerateSetError, GridError) as exc:
        raise ReachError(f"derivative fits failed: {exc}") from None
    n = g.dim
    deriv = tuple((Wp[i] - Wm[i]) / (2 * delta) for i in range(n))
    formula = tuple((n - i) * W0[i + 1] for i in range(n))
    res = tuple(abs(d - f) / max(abs(f), 1e-300) for d, f in zip(deriv, formula))
    return HadwigerVerdict(bool(rt), rt, float(s), float(delta), deriv, formula, res)
