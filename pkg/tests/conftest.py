"""Shared scene builders and independent oracles for the test suite."""

import numpy as np
import pytest

from lusim.geometry import Aabb, Scene, box_surfaces, build_scene


def make_box_scene(lo=(0, 0, 0), hi=(10, 10, 10), active=((-50, -50, -50), (50, 50, 50)),
                   traversable=None) -> Scene:
    """One closed box solid inside a large active area."""
    surfaces = box_surfaces(lo, hi, solid_id=0)
    active_area = Aabb(*active)
    traversable_area = Aabb(*traversable) if traversable else active_area
    return build_scene(surfaces, [list(range(12))], active_area, traversable_area)


def make_empty_scene(active=((-50, -50, -50), (50, 50, 50))) -> Scene:
    box = Aabb(*active)
    return build_scene([], [], box, box)


def brute_force_ray_cast(scene: Scene, origin, direction, max_distance, eps=1e-6):
    """All-triangle nearest-hit scan, written independently of the library
    kernel (scalar Moller-Trumbore per triangle, lowest index on ties)."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    best = (np.inf, -1)
    for i in range(len(scene)):
        v0 = scene.tri_v0[i]
        e1 = scene.tri_e1[i]
        e2 = scene.tri_e2[i]
        pvec = np.cross(direction, e2)
        det = float(e1 @ pvec)
        if abs(det) < 1e-14:
            continue
        tvec = origin - v0
        u = float(tvec @ pvec) / det
        qvec = np.cross(tvec, e1)
        v = float(direction @ qvec) / det
        t = float(e2 @ qvec) / det
        if u < 0 or v < 0 or u + v > 1:
            continue
        if t <= eps or t > max_distance:
            continue
        if t < best[0]:
            best = (t, i)
    return best


def segment_box_blocked(p, q, lo, hi) -> bool:
    """Analytic segment vs axis-aligned box test (slab method)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = q - p
    tmin, tmax = 0.0, 1.0
    for k in range(3):
        if d[k] == 0.0:
            if p[k] < lo[k] or p[k] > hi[k]:
                return False
        else:
            t1 = (lo[k] - p[k]) / d[k]
            t2 = (hi[k] - p[k]) / d[k]
            tmin = max(tmin, min(t1, t2))
            tmax = min(tmax, max(t1, t2))
    return tmin <= tmax


@pytest.fixture
def box_scene():
    return make_box_scene()


@pytest.fixture
def empty_scene():
    return make_empty_scene()
