"""Triangle-soup scenes and deterministic, batch-parallel ray casting.

All visibility, occlusion and line-of-sight queries in the simulator reduce
to the operations in this module.  Geometry is triangles only; boxes and
quads are triangulated at load time.  A built :class:`Scene` is immutable,
so every query is safe to issue concurrently, and results are bit-identical
for identical inputs regardless of batching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DegenerateTriangle, NonClosedSolid

# Ray-origin bias against self-intersection acne (meters).
RAY_EPS = 1e-6
# Barycentric margin below which a hit counts as edge/vertex grazing.
GRAZE_TOL = 1e-9
# Distance below which a point counts as lying on a surface (meters).
BOUNDARY_TOL = 1e-9
# Offset applied to the ray origin when re-resolving a grazing hit (meters).
NUDGE = 1e-7

# Element budget per (rays x triangles) broadcast block.
_BLOCK_BUDGET = 1 << 19

# Fixed, non-axis-aligned direction for inside/outside parity casts.
_PARITY_DIR = np.array([0.28108510, 0.53842339, 0.79446463])
_PARITY_DIR = _PARITY_DIR / np.linalg.norm(_PARITY_DIR)


def as_vec3(v) -> np.ndarray:
    """Coerce to a finite float64 3-vector."""
    a = np.asarray(v, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector: {v!r}")
    return a


def unit(v) -> np.ndarray:
    a = as_vec3(v)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return a / n


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by its lower and upper corners (meters)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_vec3(self.lo))
        object.__setattr__(self, "hi", as_vec3(self.hi))
        if np.any(self.lo > self.hi):
            raise ValueError(f"box lower corner exceeds upper: {self.lo} > {self.hi}")

    def contains_point(self, p, tol: float = 0.0) -> bool:
        p = as_vec3(p)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def contains_box(self, other: "Aabb") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo


@dataclass(frozen=True)
class Surface:
    """One reflecting triangle with its outward unit normal."""

    vertices: np.ndarray          # (3, 3) corner positions
    normal: np.ndarray            # unit normal
    solid_id: int = -1            # -1 for free-standing surfaces
    material_tag: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normal", as_vec3(self.normal))

    @property
    def area(self) -> float:
        e1 = self.vertices[1] - self.vertices[0]
        e2 = self.vertices[2] - self.vertices[0]
        return 0.5 * float(np.linalg.norm(np.cross(e1, e2)))


@dataclass(frozen=True)
class RayHit:
    distance: float
    surface_index: int
    point: np.ndarray


class Scene:
    """Immutable triangle scene with precomputed intersection arrays.

    Construct via :func:`build_scene`.  The packed per-triangle arrays
    (origin vertex, edge vectors, normals) are the query acceleration
    structure: intersection kernels stream over them in fixed index order,
    which keeps every query deterministic and exactly equivalent to a
    brute-force scan.
    """

    def __init__(self, surfaces, solids, active_area: Aabb, traversable_area: Aabb):
        self.surfaces: tuple[Surface, ...] = tuple(surfaces)
        self.solids: tuple[np.ndarray, ...] = tuple(
            np.asarray(s, dtype=np.int64) for s in solids
        )
        self.active_area = active_area
        self.traversable_area = traversable_area

        n = len(self.surfaces)
        self.tri_v0 = np.empty((n, 3))
        self.tri_e1 = np.empty((n, 3))
        self.tri_e2 = np.empty((n, 3))
        self.normals = np.empty((n, 3))
        self.solid_ids = np.empty(n, dtype=np.int64)
        for i, s in enumerate(self.surfaces):
            self.tri_v0[i] = s.vertices[0]
            self.tri_e1[i] = s.vertices[1] - s.vertices[0]
            self.tri_e2[i] = s.vertices[2] - s.vertices[0]
            self.normals[i] = s.normal
            self.solid_ids[i] = s.solid_id

        # intersection tables: plane (geometric normal, offset) + barycentric
        # gradients, so ray queries reduce to matrix products
        cross = np.cross(self.tri_e1, self.tri_e2) if n else np.zeros((0, 3))
        self._geo_n = cross
        self._plane_d = np.einsum("nk,nk->n", cross, self.tri_v0) if n else np.zeros(0)
        e11 = np.einsum("nk,nk->n", self.tri_e1, self.tri_e1) if n else np.zeros(0)
        e22 = np.einsum("nk,nk->n", self.tri_e2, self.tri_e2) if n else np.zeros(0)
        e12 = np.einsum("nk,nk->n", self.tri_e1, self.tri_e2) if n else np.zeros(0)
        det = e11 * e22 - e12 * e12
        safe = np.where(det == 0.0, 1.0, det)
        self._bary_g1 = (e22[:, None] * self.tri_e1 - e12[:, None] * self.tri_e2) / safe[:, None]
        self._bary_g2 = (e11[:, None] * self.tri_e2 - e12[:, None] * self.tri_e1) / safe[:, None]
        self._bary_c1 = np.einsum("nk,nk->n", self._bary_g1, self.tri_v0) if n else np.zeros(0)
        self._bary_c2 = np.einsum("nk,nk->n", self._bary_g2, self.tri_v0) if n else np.zeros(0)

        for a in (self.tri_v0, self.tri_e1, self.tri_e2, self.normals, self.solid_ids,
                  self._geo_n, self._plane_d, self._bary_g1, self._bary_g2,
                  self._bary_c1, self._bary_c2):
            a.setflags(write=False)

        self.content_hash = self._hash_content()

    def __len__(self) -> int:
        return len(self.surfaces)

    def _hash_content(self) -> int:
        parts = [b"scene/v1"]
        verts = np.stack([s.vertices for s in self.surfaces]) if self.surfaces else np.zeros((0, 3, 3))
        parts.append(verts.astype("<f8").tobytes())
        parts.append(self.solid_ids.astype("<i8").tobytes())
        for group in self.solids:
            parts.append(b"solid")
            parts.append(group.astype("<i8").tobytes())
        for box in (self.active_area, self.traversable_area):
            parts.append(box.lo.astype("<f8").tobytes())
            parts.append(box.hi.astype("<f8").tobytes())
        return rng.hash_bytes(b"".join(parts))


def _check_watertight(surfaces, group, solid_idx: int):
    edge_count: dict[tuple, int] = {}
    for tri_idx in group:
        verts = surfaces[tri_idx].vertices
        keys = [verts[k].tobytes() for k in range(3)]
        for a, b in ((0, 1), (1, 2), (2, 0)):
            edge = (min(keys[a], keys[b]), max(keys[a], keys[b]))
            edge_count[edge] = edge_count.get(edge, 0) + 1
    bad = [e for e, c in edge_count.items() if c != 2]
    if bad:
        raise NonClosedSolid(
            f"solid {solid_idx}: {len(bad)} of {len(edge_count)} edges not shared by exactly 2 triangles"
        )


def build_scene(surfaces, solids, active_area: Aabb, traversable_area: Aabb) -> Scene:
    """Validate inputs and build an immutable, query-ready scene.

    ``solids`` is a list of surface-index groups; each group must form a
    watertight (closed) triangle mesh.  Raises :class:`DegenerateTriangle`
    or :class:`NonClosedSolid` on invalid input.
    """
    surfaces = list(surfaces)
    for i, s in enumerate(surfaces):
        if s.area <= 1e-9:
            raise DegenerateTriangle(f"surface {i}: area {s.area:.3e} m^2 below minimum")
        if abs(np.linalg.norm(s.normal) - 1.0) > 1e-9:
            raise ValueError(f"surface {i}: normal not unit length")
    if not active_area.contains_box(traversable_area):
        raise ValueError("traversable_area must be contained in active_area")
    for k, group in enumerate(solids):
        _check_watertight(surfaces, np.asarray(group, dtype=np.int64), k)
    return Scene(surfaces, solids, active_area, traversable_area)


# -- mesh construction helpers ------------------------------------------------

def mesh_surfaces(vertices, triangles, solid_id: int = -1, material_tag: str = "") -> list[Surface]:
    """Surfaces from an indexed triangle mesh; normals follow CCW winding."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    out = []
    for tri in np.asarray(triangles, dtype=np.int64).reshape(-1, 3):
        v = vertices[tri]
        n = np.cross(v[1] - v[0], v[2] - v[0])
        norm = np.linalg.norm(n)
        if norm <= 2e-9:
            raise DegenerateTriangle(f"triangle {tri.tolist()} is (nearly) collinear")
        out.append(Surface(vertices=v, normal=n / norm, solid_id=solid_id,
                           material_tag=material_tag))
    return out


_BOX_QUADS = (
    # (axis, side): vertex order chosen so normals point outward
    ((0, 2, 6, 4), (-1, 0, 0)),   # x = lo
    ((1, 5, 7, 3), (+1, 0, 0)),   # x = hi
    ((0, 4, 5, 1), (0, -1, 0)),   # y = lo
    ((2, 3, 7, 6), (0, +1, 0)),   # y = hi
    ((0, 1, 3, 2), (0, 0, -1)),   # z = lo
    ((4, 6, 7, 5), (0, 0, +1)),   # z = hi
)


def triangulate_box(lo, hi):
    """Vertices and triangle indices of an axis-aligned box (12 triangles,
    outward winding)."""
    lo, hi = as_vec3(lo), as_vec3(hi)
    corners = np.array([
        [lo[0], lo[1], lo[2]],
        [hi[0], lo[1], lo[2]],
        [lo[0], hi[1], lo[2]],
        [hi[0], hi[1], lo[2]],
        [lo[0], lo[1], hi[2]],
        [hi[0], lo[1], hi[2]],
        [lo[0], hi[1], hi[2]],
        [hi[0], hi[1], hi[2]],
    ])
    tris = []
    for (a, b, c, d), _ in _BOX_QUADS:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return corners, np.asarray(tris, dtype=np.int64)


def box_surfaces(lo, hi, solid_id: int = 0, material_tag: str = "") -> list[Surface]:
    verts, tris = triangulate_box(lo, hi)
    return mesh_surfaces(verts, tris, solid_id=solid_id, material_tag=material_tag)


# -- intersection kernels -----------------------------------------------------

def _ray_table(scene: Scene, origins, dirs, tri_sel, limit, eps=RAY_EPS):
    """(t, margin, in_range) matrices for a block of rays x triangles.

    ``t`` is the plane-hit parameter, ``margin`` the smallest barycentric
    coordinate (negative outside the triangle), ``in_range`` whether the
    hit parameter falls in (eps, limit].
    """
    if tri_sel is None:
        geo_n, plane_d = scene._geo_n, scene._plane_d
        g1, g2, c1, c2 = scene._bary_g1, scene._bary_g2, scene._bary_c1, scene._bary_c2
    else:
        geo_n, plane_d = scene._geo_n[tri_sel], scene._plane_d[tri_sel]
        g1, g2 = scene._bary_g1[tri_sel], scene._bary_g2[tri_sel]
        c1, c2 = scene._bary_c1[tri_sel], scene._bary_c2[tri_sel]

    denom = dirs @ geo_n.T
    scale = np.linalg.norm(geo_n, axis=1)
    near_parallel = np.abs(denom) < 1e-12 * scale
    t = (plane_d[None, :] - origins @ geo_n.T) / np.where(near_parallel, 1.0, denom)
    u = (origins @ g1.T - c1) + t * (dirs @ g1.T)
    v = (origins @ g2.T - c2) + t * (dirs @ g2.T)
    margin = np.minimum(np.minimum(u, v), 1.0 - u - v)
    in_range = (~near_parallel) & (t > eps) & (t <= limit)
    return t, margin, in_range


def _cast_block(scene: Scene, origins, dirs, max_dist, tri_sel=None):
    """Nearest-hit scan over a block of rays.

    Returns (t, tri_index, grazing): ``t`` is inf where nothing was hit,
    ``tri_index`` the winning triangle (lowest index on exact distance
    ties), and ``grazing`` flags rays with any near-edge intersection that
    needs deterministic re-resolution.
    """
    m = origins.shape[0]
    best_t = np.full(m, np.inf)
    best_idx = np.full(m, -1, dtype=np.int64)
    grazing = np.zeros(m, dtype=bool)

    index_map = None if tri_sel is None else np.asarray(tri_sel, dtype=np.int64)
    n = len(scene) if tri_sel is None else len(index_map)
    if n == 0 or m == 0:
        return best_t, best_idx, grazing

    mb = max(1, _BLOCK_BUDGET // n)
    for r0 in range(0, m, mb):
        r1 = min(m, r0 + mb)
        t, margin, in_range = _ray_table(scene, origins[r0:r1], dirs[r0:r1],
                                         tri_sel, max_dist[r0:r1, None])
        inside = in_range & (margin >= 0.0)
        grazing[r0:r1] = (in_range & (np.abs(margin) < GRAZE_TOL)).any(axis=1)

        t_masked = np.where(inside, t, np.inf)
        blk_arg = np.argmin(t_masked, axis=1)
        best_t[r0:r1] = t_masked[np.arange(r1 - r0), blk_arg]
        best_idx[r0:r1] = np.where(np.isfinite(best_t[r0:r1]), blk_arg, -1)

    if index_map is not None:
        hit = best_idx >= 0
        best_idx[hit] = index_map[best_idx[hit]]
    return best_t, best_idx, grazing


_NUDGE_SEED = 0x8E3C_5F29_AB17_D04B


def _nudged_origins(origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Deterministic pseudorandom origin offsets keyed by the ray bits."""
    cols = np.concatenate([
        np.ascontiguousarray(origins, dtype="<f8").view(np.uint64),
        np.ascontiguousarray(dirs, dtype="<f8").view(np.uint64),
    ], axis=1)
    keys = rng.fold_keys(np.uint64(_NUDGE_SEED), cols)
    m = len(keys)
    z = rng.normals_for(np.repeat(keys, 3),
                        np.tile(np.arange(3, dtype=np.uint64), m)).reshape(m, 3)
    return origins + NUDGE * z / np.linalg.norm(z, axis=1, keepdims=True)


def _cast_one(scene: Scene, origin, direction, max_distance: float):
    """Single-ray cast with the deterministic grazing-nudge rule applied."""
    o = origin[None, :]
    d = direction[None, :]
    md = np.array([max_distance])
    t, idx, graz = _cast_block(scene, o, d, md)
    if graz[0]:
        t, idx, _ = _cast_block(scene, _nudged_origins(o, d), d, md)
    return float(t[0]), int(idx[0])


def ray_cast(scene: Scene, origin, direction, max_distance: float) -> RayHit | None:
    """Nearest surface intersection in (RAY_EPS, max_distance], or None."""
    origin = as_vec3(origin)
    direction = as_vec3(direction)
    if max_distance <= 0:
        raise ValueError("max_distance must be > 0")
    t, idx = _cast_one(scene, origin, direction, max_distance)
    if not np.isfinite(t):
        return None
    return RayHit(distance=t, surface_index=idx, point=origin + t * direction)


def _segments_blocked(scene: Scene, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """True where the open segment p[i] -> q[i] is occluded."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(q, dtype=np.float64).reshape(-1, 3)
    delta = q - p
    length = np.linalg.norm(delta, axis=1)
    if np.any(length == 0.0):
        raise ValueError("segment endpoints coincide")
    dirs = delta / length[:, None]
    limit = length - RAY_EPS

    t, _, graz = _cast_block(scene, p, dirs, limit)
    if graz.any():
        rows = np.flatnonzero(graz)
        t2, _, _ = _cast_block(scene, _nudged_origins(p[rows], dirs[rows]),
                               dirs[rows], limit[rows])
        t[rows] = t2
    return np.isfinite(t) & (t < limit)


def segment_visible(scene: Scene, p, q) -> bool:
    """True iff nothing blocks the open segment between p and q."""
    return not bool(_segments_blocked(scene, as_vec3(p)[None], as_vec3(q)[None])[0])


def batch_visibility(scene: Scene, pairs) -> list[bool]:
    """Element-wise :func:`segment_visible` over (p, q) pairs.

    Pairs are evaluated as one vectorized batch; the result order equals
    the input order and matches sequential scalar calls exactly.
    """
    pairs = list(pairs)
    if not pairs:
        return []
    p = np.stack([as_vec3(a) for a, _ in pairs])
    q = np.stack([as_vec3(b) for _, b in pairs])
    return [not b for b in _segments_blocked(scene, p, q)]


def segments_visible(scene: Scene, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Array form of :func:`batch_visibility` for (m,3) endpoint arrays."""
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    return ~_segments_blocked(scene, p, q)


# -- point queries ------------------------------------------------------------

def _dist2_point_triangle(p: np.ndarray, a, b, c) -> np.ndarray:
    """Squared distance from points (m,3) to one triangle (Ericson 5.1.5)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ap @ ab
    d2 = ap @ ac
    bp = p - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = p - c
    d5 = cp @ ab
    d6 = cp @ ac
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def safe_div(num, den):
        return num / np.where(den == 0.0, 1.0, den)

    w_ab = safe_div(d1, d1 - d3)
    w_ac = safe_div(d2, d2 - d6)
    w_bc = safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    denom = va + vb + vc
    v_in = safe_div(vb, denom)
    w_in = safe_div(vc, denom)

    cond = [
        (d1 <= 0) & (d2 <= 0),                     # vertex a
        (d3 >= 0) & (d4 <= d3),                    # vertex b
        (vc <= 0) & (d1 >= 0) & (d3 <= 0),         # edge ab
        (d6 >= 0) & (d5 <= d6),                    # vertex c
        (vb <= 0) & (d2 >= 0) & (d6 <= 0),         # edge ac
        (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),  # edge bc
    ]
    closest = [
        np.broadcast_to(a, p.shape),
        np.broadcast_to(b, p.shape),
        a + w_ab[:, None] * ab,
        np.broadcast_to(c, p.shape),
        a + w_ac[:, None] * ac,
        b + w_bc[:, None] * (c - b),
    ]
    pt = a + v_in[:, None] * ab + w_in[:, None] * ac
    for m, cand in zip(reversed(cond), reversed(closest)):
        pt = np.where(m[:, None], cand, pt)
    diff = p - pt
    return np.einsum("mk,mk->m", diff, diff)


def point_triangle_distances(scene: Scene, points: np.ndarray, tri_sel=None) -> np.ndarray:
    """Distance matrix (points x selected triangles)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    indices = np.arange(len(scene)) if tri_sel is None else np.asarray(tri_sel)
    out = np.empty((points.shape[0], indices.size))
    for col, ti in enumerate(indices):
        a = scene.tri_v0[ti]
        out[:, col] = _dist2_point_triangle(points, a, a + scene.tri_e1[ti], a + scene.tri_e2[ti])
    return np.sqrt(out)


def _count_crossings(scene: Scene, tri_sel: np.ndarray, points: np.ndarray,
                     directions: np.ndarray):
    """Crossing counts for (m,) rays against selected triangles."""
    _, margin, in_range = _ray_table(scene, points, directions, tri_sel, np.inf,
                                     eps=BOUNDARY_TOL)
    crossings = np.count_nonzero(in_range & (margin >= 0.0), axis=1)
    grazing = np.any(in_range & (np.abs(margin) < GRAZE_TOL), axis=1)
    return crossings, grazing


def points_inside_solids(scene: Scene, points: np.ndarray) -> np.ndarray:
    """True where a point lies strictly inside any closed solid.

    Points on a solid's surface (within BOUNDARY_TOL) count as outside.
    Uses crossing parity along a fixed direction, with a deterministic
    per-point direction jitter retried on edge-grazing casts.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    m = points.shape[0]
    inside = np.zeros(m, dtype=bool)
    for group in scene.solids:
        if group.size == 0:
            continue
        off_boundary = np.ones(m, dtype=bool)
        for ti in group:
            a = scene.tri_v0[ti]
            d2 = _dist2_point_triangle(points, a, a + scene.tri_e1[ti], a + scene.tri_e2[ti])
            off_boundary &= d2 > BOUNDARY_TOL * BOUNDARY_TOL
        todo = np.flatnonzero(off_boundary & ~inside)
        if todo.size == 0:
            continue
        dirs = np.broadcast_to(_PARITY_DIR, (todo.size, 3)).copy()
        counts = np.zeros(todo.size, dtype=np.int64)
        pending = np.ones(todo.size, dtype=bool)
        for attempt in range(8):
            sel = np.flatnonzero(pending)
            if sel.size == 0:
                break
            c, grazing = _count_crossings(scene, group, points[todo[sel]], dirs[sel])
            counts[sel] = c
            pending[sel] = grazing
            still = sel[grazing]
            for row in still:
                key = rng.hash_bytes(points[todo[row]].astype("<f8").tobytes())
                jitter = rng.normals_at(key, np.arange(3 * (attempt + 1), 3 * (attempt + 2)))
                dirs[row] = unit(_PARITY_DIR + 1e-4 * (attempt + 1) * jitter)
        inside[todo[counts % 2 == 1]] = True
    return inside


def point_inside_solid(scene: Scene, p) -> bool:
    """Scalar form of :func:`points_inside_solids`."""
    return bool(points_inside_solids(scene, as_vec3(p)[None])[0])
