"""Fixture shapes with closed-form ground truth.

Every kind can be rasterized onto a :class:`~reachlab.grid.BinaryGrid`; kinds
in the plane also yield closed polylines with analytic normals, and the
three-dimensional kinds yield closed triangle meshes.

Kinds and parameters (all lengths > 0, optional ``center`` tuple):

==============  =====  ==========================================
kind            dim    params
==============  =====  ==========================================
box             2, 3   ``half_width``
disk            2      ``radius``
ball            3      ``radius``
box_annulus     2      ``a`` < ``b`` (half-widths of hole / outer)
rounded_box     2, 3   ``half_width``, ``rounding``
stadium         2      ``half_length``, ``rounding``
torus           3      ``major``, ``minor`` (mesh only)
==============  =====  ==========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .grid import BinaryGrid

__all__ = [
    "ShapeError",
    "ShapeSpec",
    "GroundTruth",
    "PointedSample",
    "TriangleMesh",
    "ball_volume",
    "make_grid",
    "make_curve",
    "make_mesh",
    "ground_truth",
    "membership",
    "steiner_from_quermass",
]

INF = math.inf
MIN_CELLS = 8

_KINDS = {
    "box": ((2, 3), ("half_width",)),
    "disk": ((2,), ("radius",)),
    "ball": ((3,), ("radius",)),
    "box_annulus": ((2,), ("a", "b")),
    "rounded_box": ((2, 3), ("half_width", "rounding")),
    "stadium": ((2,), ("half_length", "rounding")),
    "torus": ((3,), ("major", "minor")),
}


class ShapeError(ValueError):
    pass


def ball_volume(n):
    """omega_n, the volume of the unit ball."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    dim: int
    params: dict = field(default_factory=dict)
    resolution: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ShapeError(f"unknown kind {self.kind!r}; expected one of {sorted(_KINDS)}")
        dims, names = _KINDS[self.kind]
        if self.dim not in dims:
            raise ShapeError(f"{self.kind} exists in dim {dims}, not {self.dim}")
        params = dict(self.params)
        center = tuple(float(c) for c in params.pop("center", (0.0,) * self.dim))
        if len(center) != self.dim:
            raise ShapeError("center length must equal dim")
        missing = [k for k in names if k not in params]
        extra = [k for k in params if k not in names]
        if missing or extra:
            raise ShapeError(f"{self.kind} takes {names}; missing {missing}, unexpected {extra}")
        clean = {}
        for k in names:
            v = float(params[k])
            if not (math.isfinite(v) and v > 0):
                raise ShapeError(f"{k} must be positive and finite, got {params[k]!r}")
            clean[k] = v
        if self.kind == "box_annulus" and not clean["a"] < clean["b"]:
            raise ShapeError("box_annulus requires 0 < a < b")
        if self.kind == "torus" and not clean["minor"] < clean["major"]:
            raise ShapeError("torus requires minor < major")
        if self.resolution is not None and not float(self.resolution) > 0:
            raise ShapeError("resolution must be positive")
        clean["center"] = center
        object.__setattr__(self, "params", MappingProxyType(clean))

    @classmethod
    def of(cls, kind, dim=None, resolution=None, **params):
        if dim is None:
            dims = _KINDS.get(kind, ((2,), ()))[0]
            dim = dims[0]
        return cls(kind, dim, params, resolution)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self):
        p = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        return {"kind": self.kind, "dim": self.dim, "params": p}


@dataclass(frozen=True)
class GroundTruth:
    """Analytic values attached to a fixture.

    ``steiner_coeffs`` hold c_0..c_n of the outer volume polynomial on
    ``steiner_window``; ``inner_coeffs`` the polynomial valid on
    ``inner_window`` (negative offsets). ``quermass`` W_0..W_n, when present,
    satisfies ``c_k = binom(n, k) W_k`` with the outer coefficients.
    """

    dim: int
    steiner_coeffs: tuple | None = None
    steiner_window: tuple | None = None
    inner_coeffs: tuple | None = None
    inner_window: tuple | None = None
    reach_of_set: float | None = None
    reach_of_boundary: float | None = None
    euler_char: int = 1
    surface_euler_char: int | None = None
    quermass: tuple | None = None

    def __post_init__(self):
        for r in (self.reach_of_set, self.reach_of_boundary):
            if r is not None and not r >= 0:
                raise ShapeError("reach values must be nonnegative")
        if self.quermass is not None and self.steiner_coeffs is not None:
            expect = steiner_from_quermass(self.quermass)
            if not np.allclose(expect, self.steiner_coeffs, rtol=1e-12, atol=0):
                raise ShapeError("coefficients and quermass disagree")

    def volume_at(self, s):
        """Analytic V(A_s) where a polynomial is attached for that offset."""
        for coeffs, win in ((self.steiner_coeffs, self.steiner_window), (self.inner_coeffs, self.inner_window)):
            if coeffs is not None and win[0] <= s <= win[1]:
                return float(sum(c * s**k for k, c in enumerate(coeffs)))
        raise ShapeError(f"no analytic volume for s={s}")

    def to_dict(self):
        def enc(x):
            if x is None:
                return None
            if isinstance(x, tuple):
                return [enc(v) for v in x]
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return x

        return {k: enc(getattr(self, k)) for k in self.__dataclass_fields__}


def steiner_from_quermass(W):
    n = len(W) - 1
    return tuple(math.comb(n, k) * w for k, w in enumerate(W))


def _quermass(coeffs):
    n = len(coeffs) - 1
    return tuple(c / math.comb(n, k) for k, c in enumerate(coeffs))


def _expand_shift(coeffs, r):
    """Coefficients in s of p(r + s), where p has coefficients ``coeffs``."""
    out = [0.0] * len(coeffs)
    for j, c in enumerate(coeffs):
        for k in range(j + 1):
            out[k] += c * math.comb(j, k) * r ** (j - k)
    return tuple(out)


def _cube_poly(n, w):
    """Outer volume polynomial of [-w,w]^n in the offset."""
    a = 2 * w
    if n == 2:
        return (a * a, 4 * a, math.pi)
    return (a**3, 6 * a * a, 3 * math.pi * a, 4 * math.pi / 3)


def ground_truth(spec):
    n, p, k = spec.dim, spec.params, spec.kind
    if k == "box":
        w = p["half_width"]
        c = _cube_poly(n, w)
        inner = tuple(math.comb(n, j) * (2 * w) ** (n - j) * 2**j for j in range(n + 1))
        return GroundTruth(n, c, (0.0, INF), inner, (-w, 0.0), INF, 0.0, 1, 2 if n == 3 else None, _quermass(c))
    if k in ("disk", "ball"):
        R = p["radius"]
        wn = ball_volume(n)
        c = tuple(wn * math.comb(n, j) * R ** (n - j) for j in range(n + 1))
        return GroundTruth(n, c, (-R, INF), c, (-R, INF), INF, R, 1, 2 if n == 3 else None, _quermass(c))
    if k == "box_annulus":
        a, b = p["a"], p["b"]
        outer = (4 * (b * b - a * a), 8 * (b + a), math.pi - 4)
        inner = (4 * (b * b - a * a), 8 * (b + a), 0.0)
        return GroundTruth(n, outer, (0.0, a), inner, (-(b - a) / 2, 0.0), 0.0, 0.0, 0)
    if k == "rounded_box":
        w, r = p["half_width"], p["rounding"]
        c = _expand_shift(_cube_poly(n, w), r)
        return GroundTruth(n, c, (-r, INF), c, (-r, INF), INF, r, 1, 2 if n == 3 else None, _quermass(c))
    if k == "stadium":
        w, r = p["half_length"], p["rounding"]
        c = _expand_shift((0.0, 4 * w, math.pi), r)
        return GroundTruth(n, c, (-r, INF), c, (-r, INF), INF, r, 1, None, _quermass(c))
    if k == "torus":
        R, rho = p["major"], p["minor"]
        # tube formula (Weyl): the torus is a tube of radius rho around a circle
        c = (2 * math.pi**2 * R * rho**2, 4 * math.pi**2 * R * rho, 2 * math.pi**2 * R, 0.0)
        return GroundTruth(n, c, (-rho, R - rho), c, (-rho, R - rho), R - rho, min(rho, R - rho), 0, 0, _quermass(c))
    raise ShapeError(k)


def _extent(spec):
    p = spec.params
    return {
        "box": lambda: p.get("half_width"),
        "disk": lambda: p.get("radius"),
        "ball": lambda: p.get("radius"),
        "box_annulus": lambda: p.get("b"),
        "rounded_box": lambda: p.get("half_width", 0) + p.get("rounding", 0),
        "stadium": lambda: p.get("half_length", 0) + p.get("rounding", 0),
        "torus": lambda: p.get("major", 0) + p.get("minor", 0),
    }[spec.kind]()


def _smallest_feature(spec):
    p = spec.params
    return {
        "box": lambda: 2 * p["half_width"],
        "disk": lambda: 2 * p["radius"],
        "ball": lambda: 2 * p["radius"],
        "box_annulus": lambda: min(p["b"] - p["a"], 2 * p["a"]),
        "rounded_box": lambda: 2 * p["rounding"],
        "stadium": lambda: 2 * p["rounding"],
        "torus": lambda: 2 * p["minor"],
    }[spec.kind]()


def membership(spec, coords):
    """Exact membership of points; ``coords`` has a trailing axis of length dim."""
    x = np.asarray(coords, dtype=np.float64) - np.asarray(spec.params["center"])
    p, k = spec.params, spec.kind
    ax = np.abs(x)
    if k == "box":
        return np.all(ax <= p["half_width"], axis=-1)
    if k in ("disk", "ball"):
        return np.sum(x * x, axis=-1) <= p["radius"] ** 2
    if k == "box_annulus":
        m = ax.max(axis=-1)
        return (m <= p["b"]) & (m > p["a"])
    if k == "rounded_box":
        d = np.clip(ax - p["half_width"], 0.0, None)
        return np.sum(d * d, axis=-1) <= p["rounding"] ** 2
    if k == "stadium":
        dx = np.clip(ax[..., 0] - p["half_length"], 0.0, None)
        return dx * dx + x[..., 1] ** 2 <= p["rounding"] ** 2
    if k == "torus":
        q = np.hypot(x[..., 0], x[..., 1]) - p["major"]
        return q * q + x[..., 2] ** 2 <= p["minor"] ** 2
    raise ShapeError(k)


def _flat_offsets(spec):
    p, k = spec.params, spec.kind
    if k == "box":
        return [p["half_width"]]
    if k == "box_annulus":
        return [p["a"], p["b"]]
    if k == "rounded_box":
        return [p["half_width"] + p["rounding"]]
    if k == "stadium":
        return [p["rounding"]]
    return []


def _phase(spec, h):
    """Cell-center phase (0.5: centers at (j+1/2)h, 0: at jh) keeping flat faces off centers.

    A flat face through a row of centers would be counted whole by the
    closed membership test, biasing the volume by half a cell layer.
    """
    def clearance(phase):
        d = [abs((L / h - phase) - round(L / h - phase)) for L in _flat_offsets(spec)]
        return min(d) if d else 0.5

    return 0.5 if clearance(0.5) >= clearance(0.0) else 0.0


def make_grid(spec, h=None, s_max=1.0):
    """Rasterize ``spec`` by cell-center membership; return ``(grid, truth)``.

    The lattice is symmetric about the shape center; its phase is chosen so
    that flat faces fall between rows of cell centers. It reserves
    ``ceil(s_max / h) + 2`` guard cells around the shape's bounding box.
    """
    if spec.kind == "torus":
        raise ShapeError("torus is available as a mesh only")
    h = float(h if h is not None else (spec.resolution or 0.0))
    if not h > 0:
        raise ShapeError("grid spacing h must be given and positive")
    if s_max < 0:
        raise ShapeError("s_max must be nonnegative")
    feature = _smallest_feature(spec)
    if feature / h < MIN_CELLS:
        raise ShapeError(
            f"resolution too coarse: smallest feature {feature} spans {feature / h:.2f} cells (< {MIN_CELLS})"
        )
    half = math.ceil(_extent(spec) / h - 1e-9) + math.ceil(s_max / h - 1e-9) + 2
    phase = _phase(spec, h)
    N = 2 * half + (1 if phase == 0.0 else 0)
    center = spec.params["center"]
    axes = [c + (np.arange(N) - (N - 1) / 2) * h for c in center]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    cells = membership(spec, mesh)
    origin = tuple(float(a[0]) for a in axes)
    return BinaryGrid(cells, origin, h), ground_truth(spec)


# -- planar curves -------------------------------------------------------


@dataclass(frozen=True)
class PointedSample:
    """Points on a closed hypersurface with unit outer normals.

    ``flagged`` marks points where the normal is not unique (corners);
    ``loops`` lists the closed polylines as index arrays in traversal order.
    """

    points: np.ndarray
    normals: np.ndarray
    flagged: np.ndarray | None = None
    loops: tuple | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        nrm = np.array(self.normals, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ShapeError("points must be an (m, 2) or (m, 3) array")
        if nrm.shape != pts.shape:
            raise ShapeError("one normal per point is required")
        if len(pts) < 4:
            raise ShapeError("a pointed sample needs at least 4 points")
        if not (np.isfinite(pts).all() and np.isfinite(nrm).all()):
            raise ShapeError("non-finite coordinates")
        if np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > 1e-12:
            raise ShapeError("normals must be unit vectors to 1e-12")
        flagged = np.zeros(len(pts), bool) if self.flagged is None else np.array(self.flagged, dtype=bool)
        if flagged.shape != (len(pts),):
            raise ShapeError("flag array length must equal point count")
        loops = self.loops
        if loops is None:
            loops = (np.arange(len(pts)),)
        loops = tuple(np.asarray(lp, dtype=np.int64) for lp in loops)
        for arr in (pts, nrm, flagged):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm)
        object.__setattr__(self, "flagged", flagged)
        object.__setattr__(self, "loops", loops)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def transformed(self, rotation=None, shift=None, scale=1.0):
        """Image under x -> scale * R x + shift (normals rotate, never scale)."""
        Rm = np.eye(self.dim) if rotation is None else np.asarray(rotation, dtype=np.float64)
        b = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=np.float64)
        nrm = self.normals @ Rm.T
        nrm /= np.linalg.norm(nrm, axis=1)[:, None]
        return PointedSample(scale * self.points @ Rm.T + b, nrm, self.flagged, self.loops)

    def smooth_indices(self):
        return np.flatnonzero(~self.flagged)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class _Path:
    """Closed piecewise-smooth planar path made of segments and circular arcs."""

    def __init__(self):
        self.pieces = []  # (length, eval(u) -> point, normal, is_corner_at_start)

    def segment(self, p, q, corner):
        p, q = np.asarray(p, float), np.asarray(q, float)
        d = q - p
        L = float(np.hypot(*d))
        nrm = np.array([d[1], -d[0]]) / L  # right of travel = outside for CCW
        self.pieces.append((L, lambda u: (p + (u / L) * d, nrm), corner))

    def arc(self, c, rad, th0, th1, corner=False, outward=True):
        c = np.asarray(c, float)
        L = abs(th1 - th0) * rad
        sgn = 1.0 if th1 > th0 else -1.0
        o = 1.0 if outward else -1.0

        def ev(u):
            th = th0 + sgn * u / rad
            e = np.array([math.cos(th), math.sin(th)])
            return c + rad * e, o * e

        self.pieces.append((L, ev, corner))

    def sample(self, m, offset_frac=0.0):
        lengths = np.array([p[0] for p in self.pieces])
        total = float(lengths.sum())
        starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
        step = total / m
        pts, nrms, flags = [], [], []
        corner_pos = [starts[i] for i, p in enumerate(self.pieces) if p[2]]
        for j in range(m):
            s = (j + offset_frac) * step
            i = int(np.searchsorted(starts, s, side="right") - 1)
            i = min(max(i, 0), len(self.pieces) - 1)
            L, ev, _ = self.pieces[i]
            pt, nm = ev(min(s - starts[i], L))
            pts.append(pt)
            nrms.append(nm)
            flags.append(False)
        flags = np.array(flags)
        # a corner lying on a sample flags that sample; otherwise flag both neighbours
        for cp in corner_pos:
            x = cp / step - offset_frac
            r = round(x)
            if abs(x - r) < 1e-9:
                flags[int(r) % m] = True
            else:
                flags[int(math.floor(x)) % m] = True
                flags[int(math.ceil(x)) % m] = True
        return np.array(pts), _unit(np.array(nrms)), flags


def _box_path(c, w, ccw=True):
    cx, cy = c
    corners = [(cx - w, cy - w), (cx + w, cy - w), (cx + w, cy + w), (cx - w, cy + w)]
    if not ccw:
        corners = corners[::-1]
    path = _Path()
    for i in range(4):
        path.segment(corners[i], corners[(i + 1) % 4], corner=True)
    return path


def make_curve(spec, m):
    """Arc-length-uniform counter-clockwise sample of the boundary, ``m`` points.

    Corner points get the one-sided normal of the edge leaving them and are
    flagged; normals are never averaged across a corner. For the box annulus
    ``m`` is split between the outer loop and the (clockwise) inner loop in
    proportion to length.
    """
    if spec.dim != 2:
        raise ShapeError("curves exist for planar kinds only")
    m = int(m)
    if m < 16:
        raise ShapeError("curve sampling needs m >= 16")
    p, k = spec.params, spec.kind
    c = np.asarray(p["center"])
    if k == "disk":
        R = p["radius"]
        th = 2 * math.pi * np.arange(m) / m
        e = np.stack([np.cos(th), np.sin(th)], axis=1)
        return PointedSample(c + R * e, _unit(e))
    if k == "box":
        pts, nrm, fl = _box_path(c, p["half_width"]).sample(m)
        return PointedSample(pts, nrm, fl)
    if k == "rounded_box":
        w, r = p["half_width"], p["rounding"]
        path = _Path()
        # start at the bottom-right arc, travel counter-clockwise
        for q, (sx, sy) in enumerate([(1, -1), (1, 1), (-1, 1), (-1, -1)]):
            th0 = -math.pi / 2 + q * math.pi / 2
            path.arc(c + np.array([sx * w, sy * w]), r, th0, th0 + math.pi / 2)
            nx = [(1, 1), (-1, 1), (-1, -1), (1, -1)][q]
            a = c + np.array([sx * w, sy * w]) + r * np.array([math.cos(th0 + math.pi / 2), math.sin(th0 + math.pi / 2)])
            b = c + np.array([nx[0] * w, nx[1] * w]) + r * np.array([math.cos(th0 + math.pi / 2), math.sin(th0 + math.pi / 2)])
            path.segment(a, b, corner=False)
        pts, nrm, fl = path.sample(m)
        return PointedSample(pts, nrm, fl)
    if k == "stadium":
        w, r = p["half_length"], p["rounding"]
        path = _Path()
        path.segment(c + (-w, -r), c + (w, -r), corner=False)
        path.arc(c + (w, 0.0), r, -math.pi / 2, math.pi / 2)
        path.segment(c + (w, r), c + (-w, r), corner=False)
        path.arc(c + (-w, 0.0), r, math.pi / 2, 3 * math.pi / 2)
        pts, nrm, fl = path.sample(m)
        return PointedSample(pts, nrm, fl)
    if k == "box_annulus":
        a, b = p["a"], p["b"]
        # multiples of four put every corner on a sample
        m_in = max(16, 4 * int(round(m * a / (a + b) / 4)))
        m_out = m - m_in
        if m_out < 16:
            raise ShapeError("m too small to sample both loops")
        po, no, fo = _box_path(c, b).sample(m_out)
        # the hole is traversed clockwise; its outer normal points into the hole
        pi_, ni, fi = _box_path(c, a, ccw=False).sample(m_in)
        loops = (np.arange(m_out), m_out + np.arange(m_in))
        return PointedSample(np.vstack([po, pi_]), np.vstack([no, ni]), np.concatenate([fo, fi]), loops)
    raise ShapeError(f"no curve for kind {k!r}")


# -- triangle meshes -----------------------------------------------------


@dataclass(frozen=True)
class TriangleMesh:
    """Closed oriented triangle mesh; faces are counter-clockwise seen from outside."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise ShapeError("mesh needs (V,3) vertices and (F,3) faces")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ShapeError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def edges(self):
        """Unique undirected edges (sorted pairs) as an (E, 2) array."""
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges()) + len(self.faces)

    def signed_volume(self):
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return float(math.fsum(np.einsum("ij,ij->i", a, np.cross(b, c)))) / 6.0

    def check_manifold(self):
        """Raise unless closed, consistently oriented and vertex-manifold."""
        f = self.faces
        if len(f) == 0:
            raise ShapeError("mesh has no faces")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])):
            raise ShapeError("degenerate face")
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        uniq, counts = np.unique(directed, axis=0, return_counts=True)
        if counts.max() > 1:
            raise ShapeError("directed edge used twice: inconsistent orientation or non-manifold edge")
        rev = set(map(tuple, uniq[:, ::-1]))
        if any(tuple(e) not in rev for e in uniq):
            raise ShapeError("boundary edge: mesh is not closed")
        used = np.unique(f)
        if len(used) != len(self.vertices):
            raise ShapeError("unreferenced vertices")
        # the link of each vertex must be one cycle
        nxt = {}
        for a, b, c in f:
            for v, x, y in ((a, b, c), (b, c, a), (c, a, b)):
                nxt.setdefault(v, {})[x] = y
        for v, ring in nxt.items():
            start = next(iter(ring))
            x, steps = start, 0
            while True:
                x = ring.get(x)
                steps += 1
                if x is None or steps > len(ring):
                    raise ShapeError(f"vertex {v} has a non-disk neighbourhood")
                if x == start:
                    break
            if steps != len(ring):
                raise ShapeError(f"vertex {v} has a non-disk neighbourhood")
        return True


def _icosphere(subdivisions):
    t = (1 + 5**0.5) / 2
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces)


def _cube_surface(k):
    """Quad-split triangulation of the surface of [-1,1]^3 with k cells per edge."""
    index = {}
    verts = []

    def vid(ijk):
        if ijk not in index:
            index[ijk] = len(verts)
            verts.append(ijk)
        return index[ijk]

    faces = []
    for d in range(3):
        for side in (0, k):
            e1, e2 = [a for a in range(3) if a != d]
            for u in range(k):
                for w in range(k):
                    quad = []
                    for du, dw in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = [0, 0, 0]
                        p[d], p[e1], p[e2] = side, u + du, w + dw
                        quad.append(vid(tuple(p)))
                    a, b, c, dd = quad
                    faces += [(a, b, c), (a, c, dd)]
    v = 2.0 * np.array(verts, float) / k - 1.0
    f = np.array(faces)
    # orient every face outward: its normal must point away from the center
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), (a + b + c)) < 0
    f[flip] = f[flip][:, ::-1]
    return v, f


def _torus(R, rho, nu, nv):
    u = 2 * math.pi * np.arange(nu) / nu
    v = 2 * math.pi * np.arange(nv) / nv
    U, Vv = np.meshgrid(u, v, indexing="ij")
    x = (R + rho * np.cos(Vv)) * np.cos(U)
    y = (R + rho * np.cos(Vv)) * np.sin(U)
    z = rho * np.sin(Vv)
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return verts, np.array(faces)


def make_mesh(spec, subdivisions=3, segments=None):
    """Closed manifold triangle mesh of a three-dimensional kind with its truth.

    ``subdivisions`` sets the icosphere level for balls; ``segments`` the
    per-edge cell count of the cube grid (rounded box) or the
    ``(major, minor)`` ring counts of the torus.
    """
    if spec.dim != 3:
        raise ShapeError("meshes exist for three-dimensional kinds only")
    p, k = spec.params, spec.kind
    c = np.asarray(p["center"])
    if k == "ball":
        v, f = _icosphere(int(subdivisions))
        v = c + p["radius"] * v
    elif k == "rounded_box":
        w, r = p["half_width"], p["rounding"]
        v, f = _cube_surface(int(segments or 24))
        q = v * (w + r)
        inner = np.clip(q, -w, w)
        v = c + inner + r * _unit(q - inner)
    elif k == "torus":
        nu, nv = segments or (96, 48)
        v, f = _torus(p["major"], p["minor"], int(nu), int(nv))
        v = c + v
    else:
        raise ShapeError(f"no mesh for kind {k!r}")
    mesh = TriangleMesh(v, f)
    mesh.check_manifold()
    truth = ground_truth(spec)
    chi = mesh.euler_characteristic()
    if chi != truth.surface_euler_char:
        raise ShapeError(f"mesh Euler characteristic {chi} != {truth.surface_euler_char}")
    if mesh.signed_volume() <= 0:
        raise ShapeError("mesh is inside-out")
    return mesh, truth
