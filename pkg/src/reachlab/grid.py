"""Binary lattices, exact distance fields and parallel sets.

A :class:`BinaryGrid` stores the occupancy of cell centers of an axis-aligned
lattice. All distances are measured between cell centers, in lattice units
internally (exact integers when squared) and in world units at the API.

Parallel sets follow the two-sided definition: ``s >= 0`` keeps every cell
within ``s`` of an occupied cell, ``s < 0`` keeps the occupied cells whose
distance to the nearest unoccupied cell exceeds ``|s|``. Both thresholds act
on exact squared lattice distances, so ``parallel_set(g, 0)`` is ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._kernels import squared_edt

__all__ = [
    "BinaryGrid",
    "DistanceField",
    "GridError",
    "TrivialGridError",
    "PaddingError",
    "DegenerateSetError",
    "GeometryMismatchError",
    "boundary_cells",
    "boundary_mask",
    "boundary_measure",
    "distance_transform",
    "parallel_set",
    "volume",
    "symmetric_difference_volume",
    "contains_inner_block",
    "inner_block_cells",
    "inradius",
    "outer_margin",
    "tau_vol",
]

# slack for s/h landing a hair off an integer after float division
_SNAP = 1e-9


class GridError(ValueError):
    pass


class TrivialGridError(GridError):
    """Occupancy is all-true or all-false, so the set has no boundary."""


class PaddingError(GridError):
    """An outer parallel set reached the lattice edge."""


class DegenerateSetError(GridError):
    """An inner parallel set came out empty."""

    def __init__(self, s, message=None):
        self.s = float(s)
        super().__init__(message or f"parallel set at s={s!r} is empty")


class GeometryMismatchError(GridError):
    pass


@dataclass(frozen=True, eq=False)
class BinaryGrid:
    """Occupancy of an axis-aligned lattice.

    ``cells[i0, i1, ...]`` is true iff the center
    ``origin + spacing * (i0, i1, ...)`` belongs to the set.
    """

    cells: np.ndarray
    origin: tuple[float, ...]
    spacing: float

    def __post_init__(self):
        cells = np.array(self.cells, dtype=bool, copy=True, order="C")
        if cells.ndim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {cells.ndim}")
        if min(cells.shape) < 1:
            raise GridError(f"all extents must be >= 1, got {cells.shape}")
        h = float(self.spacing)
        if not (math.isfinite(h) and h > 0):
            raise GridError(f"spacing must be positive and finite, got {self.spacing!r}")
        origin = tuple(float(x) for x in self.origin)
        if len(origin) != cells.ndim:
            raise GridError("origin length must equal dim")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", h)

    @property
    def dim(self):
        return self.cells.ndim

    @property
    def size(self):
        return self.cells.shape

    @property
    def count(self):
        return int(np.count_nonzero(self.cells))

    def same_geometry(self, other):
        return (
            self.size == other.size
            and self.origin == other.origin
            and self.spacing == other.spacing
        )

    def with_cells(self, cells):
        return BinaryGrid(cells, self.origin, self.spacing)

    def axis_centers(self, axis):
        return self.origin[axis] + self.spacing * np.arange(self.size[axis])

    def center(self, index):
        """World coordinates of a cell given by multi-index or axis-0-fastest flat index."""
        if np.isscalar(index):
            index = np.unravel_index(int(index), self.size, order="F")
        return tuple(o + self.spacing * int(i) for o, i in zip(self.origin, index))

    def is_trivial(self):
        n = self.count
        return n == 0 or n == self.cells.size

    def scaled(self, factor):
        """Same occupancy with all geometry (origin and spacing) scaled."""
        return BinaryGrid(self.cells, tuple(factor * o for o in self.origin), factor * self.spacing)

    def __eq__(self, other):
        if not isinstance(other, BinaryGrid):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.cells, other.cells)

    __hash__ = None


def _require_nontrivial(g):
    if g.is_trivial():
        state = "empty" if g.count == 0 else "full"
        raise TrivialGridError(f"grid occupancy is {state}; the set needs a boundary")


def boundary_mask(g):
    """Occupied cells with a face neighbour that is unoccupied or off-lattice."""
    _require_nontrivial(g)
    padded = np.pad(g.cells, 1, constant_values=False)
    interior = padded.copy()
    for axis in range(g.dim):
        interior &= np.roll(padded, 1, axis) & np.roll(padded, -1, axis)
    core = tuple(slice(1, -1) for _ in range(g.dim))
    return g.cells & ~interior[core]


def boundary_cells(g):
    """Sorted axis-0-fastest flat indices of the boundary cells."""
    mask = boundary_mask(g)
    return np.flatnonzero(mask.ravel(order="F"))


def boundary_measure(g):
    """Crude H^{n-1}(boundary) estimate: boundary cell count times h^(n-1)."""
    return float(np.count_nonzero(boundary_mask(g))) * g.spacing ** (g.dim - 1)


def tau_vol(g, scale=4.0):
    """Volume tolerance ``scale * h * H^{n-1}`` used for lattice set equalities."""
    return scale * g.spacing * boundary_measure(g)


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Signed distance to the discrete boundary plus nearest-boundary indices.

    ``signed_dist`` is positive outside, negative strictly inside, zero on
    boundary cells; its magnitude is the center distance to the nearest
    boundary cell. ``nearest_idx`` is an axis-0-fastest flat index of one such
    cell. ``d2_boundary`` (squared, lattice units) backs the outer thresholds;
    ``d2_exterior`` holds the squared distance from each occupied cell to the
    nearest unoccupied or off-lattice cell and backs the inner thresholds.
    """

    grid: BinaryGrid
    signed_dist: np.ndarray
    nearest_idx: np.ndarray
    d2_boundary: np.ndarray = field(repr=False)
    d2_exterior: np.ndarray = field(repr=False)

    @property
    def spacing(self):
        return self.grid.spacing

    @cached_property
    def boundary(self):
        return self.d2_exterior == 1


def distance_transform(g, *, backend=None):
    """Exact Euclidean distance field of ``g`` (separable lower envelopes)."""
    bmask = boundary_mask(g)
    d2, src = squared_edt(bmask, with_index=True, backend=backend)
    # distance to the complement, with the lattice edge counted as unoccupied
    padded = np.pad(~g.cells, 1, constant_values=True)
    d2e, _ = squared_edt(padded, backend=backend)
    core = tuple(slice(1, -1) for _ in range(g.dim))
    d2e = np.ascontiguousarray(d2e[core])

    dist = np.sqrt(d2.astype(np.float64)) * g.spacing
    signed = np.where(g.cells & ~bmask, -dist, dist)
    signed[bmask] = 0.0
    # src is a C-order index; publish the axis-0-fastest convention
    nearest = np.ravel_multi_index(np.unravel_index(src, g.size), g.size, order="F")
    for a in (signed, nearest, d2, d2e):
        a.setflags(write=False)
    return DistanceField(g, signed, nearest, d2, d2e)


def _lattice_sq(s, h):
    q = (s / h) ** 2
    r = round(q)
    return float(r) if abs(q - r) <= _SNAP * max(1.0, q) else q


def parallel_set(g, s, field=None):
    """Outer (``s >= 0``) or inner (``s < 0``) parallel set of ``g``."""
    s = float(s)
    if field is None:
        field = distance_transform(g)
    elif not field.grid.same_geometry(g):
        raise GeometryMismatchError("distance field belongs to a different lattice")
    if s == 0.0:
        return g
    q = _lattice_sq(s, g.spacing)
    if s > 0:
        cells = g.cells | (field.d2_boundary <= q)
        if _touches_edge(cells):
            raise PaddingError(f"outer parallel set at s={s!r} touches the lattice edge")
    else:
        cells = g.cells & (field.d2_exterior > q)
        if not cells.any():
            raise DegenerateSetError(s)
    return g.with_cells(cells)


def _touches_edge(cells):
    for axis in range(cells.ndim):
        if cells.take(0, axis).any() or cells.take(-1, axis).any():
            return True
    return False


def volume(g):
    return g.count * g.spacing ** g.dim


def symmetric_difference_volume(g1, g2):
    if not g1.same_geometry(g2):
        raise GeometryMismatchError("grids differ in dim/size/origin/spacing")
    return float(np.count_nonzero(g1.cells ^ g2.cells)) * g1.spacing ** g1.dim


def inner_block_cells(mask):
    """Anchor cells of every full 2x2 (2x2x2) block of true cells in ``mask``.

    A block means a lattice vertex whose incident cells all lie in the mask,
    i.e. the set has an inner point at lattice resolution. One-cell-thick
    slivers, the signature of rasterisation noise, never contain one.
    """
    m = np.asarray(mask, dtype=bool)
    block = np.ones(tuple(n - 1 for n in m.shape), dtype=bool)
    for offset in np.ndindex(*(2,) * m.ndim):
        block &= m[tuple(slice(o, n - 1 + o) for o, n in zip(offset, m.shape))]
    return block


def contains_inner_block(mask):
    m = np.asarray(mask, dtype=bool)
    if min(m.shape) < 2:
        return False
    return bool(inner_block_cells(m).any())


def inradius(g, field=None):
    """Radius of the largest inscribed lattice ball, ``(max depth - 1/2) h``."""
    if field is None:
        field = distance_transform(g)
    deepest = int(field.d2_exterior.max())
    return max(0.0, (math.sqrt(deepest) - 0.5) * g.spacing)


def outer_margin(g):
    """Distance from the occupied cells to the lattice edge, minus one cell."""
    idx = np.nonzero(g.cells)
    gaps = []
    for axis, n in enumerate(g.size):
        gaps.append(int(idx[axis].min()))
        gaps.append(n - 1 - int(idx[axis].max()))
    return max(0, min(gaps) - 1) * g.spacing

