import functools
import math

import numpy as np
import pytest

from reachlab.grid import distance_transform
from reachlab.shapes import ShapeSpec, make_curve, make_grid

H2 = 0.01
H3 = 0.04


@functools.lru_cache(maxsize=None)
def grid(kind, h=H2, s_max=1.0, **params):
    spec = ShapeSpec.of(kind, **params)
    g, truth = make_grid(spec, h, s_max)
    return g, truth, distance_transform(g)


def disk(s_max=1.0):
    return grid("disk", radius=1.0, s_max=s_max)


def square(s_max=1.0):
    return grid("box", half_width=1.0, s_max=s_max)


def annulus(s_max=0.6):
    return grid("box_annulus", a=0.5, b=1.0, s_max=s_max)


def rbox(s_max=1.0):
    return grid("rounded_box", half_width=1.0, rounding=0.5, s_max=s_max)


def ball():
    return grid("ball", h=H3, s_max=2.0, radius=1.0)


@functools.lru_cache(maxsize=None)
def curve(kind, m, **params):
    return make_curve(ShapeSpec.of(kind, **params), m)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture
def close():
    def check(a, b, rtol):
        a, b = np.atleast_1d(a).astype(float), np.atleast_1d(b).astype(float)
        err = np.abs(a - b) / np.abs(b)
        assert np.all(err <= rtol), f"{a} vs {b}: rel err {err} > {rtol}"

    return check


PI = math.pi
