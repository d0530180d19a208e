"""Quermassintegrals as curvature integrals on polygons and triangle meshes.

For a body with boundary of positive reach, ``W_i = n^-1 * integral of
H_{i-1}`` over the boundary, with ``H_j`` the normalized elementary symmetric
polynomials of the principal curvatures. The polyhedral analogues used here:

* n = 2: ``W_1 = length / 2``, ``W_2 = (sum of turning angles) / 2``;
* n = 3: ``W_1 = area / 3``, ``W_2 = (1/2 sum_e l_e theta_e) / 3``,
  ``W_3 = (sum of angle defects) / 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .shapes import TriangleMesh, ball_volume

__all__ = [
    "CurvatureError",
    "DiscreteCurvature",
    "elementary_symmetric",
    "quermass_from_curvature",
    "gauss_bonnet_check",
    "crosscheck_fit_vs_curvature",
    "CurvatureReport",
    "curvature_report",
]


class CurvatureError(ValueError):
    pass


def elementary_symmetric(kappas, j):
    """Normalized ``H_j = e_j(kappa) / binom(k, j)``; ``H_0 = 1``."""
    k = len(kappas)
    if not 0 <= j <= k:
        raise CurvatureError(f"j must lie in [0, {k}]")
    e = [1.0] + [0.0] * k
    for x in kappas:
        for i in range(k, 0, -1):
            e[i] += e[i - 1] * x
    return e[j] / math.comb(k, j)


def _fsum(a):
    return math.fsum(np.asarray(a, dtype=np.float64).ravel().tolist())


@dataclass(frozen=True)
class DiscreteCurvature:
    """Curvature data of a closed polygonal curve (n = 2) or triangle mesh (n = 3).

    ``turning`` holds per-vertex signed turning angles (polylines) and
    ``edge_lengths`` the polyline edges; for meshes ``defects`` are vertex
    angle defects, ``dihedral`` the signed edge angles (positive convex)
    and ``edge_lengths`` the matching edge lengths.
    """

    n: int
    edge_lengths: np.ndarray
    turning: np.ndarray | None
    defects: np.ndarray | None
    dihedral: np.ndarray | None
    measure: float
    enclosed: float

    @classmethod
    def from_polyline(cls, points, loops=None):
        P = np.asarray(points, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] != 2:
            raise CurvatureError("polyline points must be (m, 2)")
        if loops is None:
            loops = [np.arange(len(P))]
        lengths, turns, areas = [], [], []
        for lp in loops:
            lp = np.asarray(lp, dtype=np.int64)
            if len(lp) < 3:
                raise CurvatureError("a closed loop needs at least 3 vertices")
            q = P[lp]
            e = np.roll(q, -1, axis=0) - q  # edge leaving each vertex
            L = np.hypot(e[:, 0], e[:, 1])
            if np.any(L <= 0):
                raise CurvatureError("zero-length edge")
            prev = np.roll(e, 1, axis=0)
            cross = prev[:, 0] * e[:, 1] - prev[:, 1] * e[:, 0]
            dot = np.einsum("ij,ij->i", prev, e)
            t = np.arctan2(cross, dot)
            if np.any(np.abs(t) >= math.pi):
                raise CurvatureError("polyline folds back on itself")
            lengths.append(L)
            turns.append(t)
            areas.append(_fsum(q[:, 0] * np.roll(q[:, 1], -1) - np.roll(q[:, 0], -1) * q[:, 1]) / 2)
        area = math.fsum(areas)
        if area <= 0:
            raise CurvatureError("orientation mismatch: enclosed signed area is not positive")
        L = np.concatenate(lengths)
        return cls(2, L, np.concatenate(turns), None, None, _fsum(L), area)

    @classmethod
    def from_sample(cls, ps):
        return cls.from_polyline(ps.points, ps.loops)

    @classmethod
    def from_mesh(cls, mesh):
        if not isinstance(mesh, TriangleMesh):
            mesh = TriangleMesh(*mesh)
        mesh.check_manifold()
        V, F = mesh.vertices, mesh.faces
        a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
        cr = np.cross(b - a, c - a)
        dbl = np.linalg.norm(cr, axis=1)
        if np.any(dbl <= 0):
            raise CurvatureError("degenerate triangle")
        normals = cr / dbl[:, None]
        # interior angles per corner
        ang = np.empty(F.shape)
        for k in range(3):
            p = V[F[:, k]]
            u = V[F[:, (k + 1) % 3]] - p
            w = V[F[:, (k + 2) % 3]] - p
            ang[:, k] = np.arctan2(np.linalg.norm(np.cross(u, w), axis=1), np.einsum("ij,ij->i", u, w))
        defects = np.full(len(V), 2 * math.pi)
        np.subtract.at(defects, F.ravel(), ang.ravel())
        # pair each directed edge with its reverse
        nf = len(F)
        src = np.concatenate([F[:, 0], F[:, 1], F[:, 2]])
        dst = np.concatenate([F[:, 1], F[:, 2], F[:, 0]])
        opp = np.concatenate([F[:, 2], F[:, 0], F[:, 1]])
        face = np.tile(np.arange(nf), 3)
        key = src * len(V) + dst
        rkey = dst * len(V) + src
        order = np.argsort(key)
        pos = np.searchsorted(key[order], rkey)
        mate = order[pos]
        if not np.array_equal(key[mate], rkey):
            raise CurvatureError("open mesh: an edge lacks its opposite half")
        first = src < dst
        e_src, e_dst = src[first], dst[first]
        f1, f2 = face[first], face[mate[first]]
        opp2 = opp[mate[first]]
        n1, n2 = normals[f1], normals[f2]
        theta = np.arctan2(np.linalg.norm(np.cross(n1, n2), axis=1), np.einsum("ij,ij->i", n1, n2))
        # convex when the far vertex of the second face lies below the first face's plane
        below = np.einsum("ij,ij->i", n1, V[opp2] - V[e_src]) < 0
        theta = np.where(below, theta, -theta)
        lengths = np.linalg.norm(V[e_dst] - V[e_src], axis=1)
        vol = mesh.signed_volume()
        if vol <= 0:
            raise CurvatureError("orientation mismatch: signed volume is not positive")
        return cls(3, lengths, None, defects, theta, _fsum(dbl) / 2, vol)

    @classmethod
    def from_obj(cls, data):
        if data.faces is not None:
            return cls.from_mesh(TriangleMesh(data.vertices, data.faces))
        if data.lines is None:
            raise CurvatureError("OBJ data has neither polylines nor faces: carrier is open")
        return cls.from_polyline(data.vertices, data.lines)

    def gauss_curvature_integral(self):
        """Discrete integral of the Gauss curvature (total turning when n = 2)."""
        return _fsum(self.turning if self.n == 2 else self.defects)

    def mean_curvature_integral(self):
        """Discrete integral of the summed principal curvatures, ``1/2 sum l theta`` for meshes."""
        if self.n == 2:
            return self.gauss_curvature_integral()
        return 0.5 * _fsum(self.edge_lengths * self.dihedral)


def quermass_from_curvature(dc, n=None):
    """``(W_0, W_1, ..., W_n)``; ``W_0`` is the enclosed volume."""
    n = dc.n if n is None else n
    if n != dc.n:
        raise CurvatureError(f"carrier is {dc.n}-dimensional, not {n}")
    if n == 2:
        return (dc.enclosed, dc.measure / 2, dc.gauss_curvature_integral() / 2)
    return (
        dc.enclosed,
        dc.measure / 3,
        dc.mean_curvature_integral() / 3,
        dc.gauss_curvature_integral() / 3,
    )


def gauss_bonnet_check(dc, chi_expected):
    """``|integral K_G - n omega_n chi|`` with ``chi`` the body's Euler characteristic."""
    return abs(dc.gauss_curvature_integral() - dc.n * ball_volume(dc.n) * chi_expected)


def crosscheck_fit_vs_curvature(fit, dc, eps=1e-12):
    """Relative errors ``|W_i(fit) - W_i(curv)| / max(|W_i(curv)|, eps)`` for i = 1..n."""
    if fit.n != dc.n:
        raise CurvatureError("fit and carrier dimensions differ")
    Wc = quermass_from_curvature(dc)
    return tuple(abs(fit.quermass[i] - Wc[i]) / max(abs(Wc[i]), eps) for i in range(1, dc.n + 1))


@dataclass(frozen=True)
class CurvatureReport:
    W: tuple
    chi_from_Wn: float
    gauss_bonnet_residual: float | None

    def to_dict(self):
        return {"W": list(self.W), "chi_from_Wn": self.chi_from_Wn, "gauss_bonnet_residual": self.gauss_bonnet_residual}


def curvature_report(dc, chi_expected=None):
    W = quermass_from_curvature(dc)
    res = None if chi_expected is None else gauss_bonnet_check(dc, chi_expected)
    return CurvatureReport(W, W[-1] / ball_volume(dc.n), res)
