"""Scatterer population setup for the stochastic-geometry channel model.

Multipath components (MPCs) are spawned on the scene's surfaces in three
reflection-order populations, filtered down to the ones that can matter
(outside solids, visible from the traversable region), associated with
their nearest surface, and linked into a pairwise-visibility distance
look-up table that drives multi-bounce path search.

All sampling is keyed per (seed, surface, order), so a spawn is
reproducible bit-for-bit regardless of iteration or thread order, and the
result can be saved to a compact binary container for reuse.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import BadMagic, DegenerateFit, SceneMismatch, Truncated, VersionUnsupported
from .geometry import Scene, point_triangle_distances, points_inside_solids, segments_visible

SPAWN_MAGIC = b"LUMP"
SPAWN_VERSION = 1

_HEADER = struct.Struct("<4sHQQI")
_RECORD_DTYPE = np.dtype([
    ("id", "<u4"),
    ("order", "u1"),
    ("position", "<f8", (3,)),
    ("normal", "<f8", (3,)),
    ("g0", "<f8"),
    ("xi", "<f8"),
    ("surface_index", "<u4"),
])


@dataclass(frozen=True)
class GscmParams:
    """Scatterer population and fading parameters.

    ``density_per_order`` is MPCs per square meter of surface for reflection
    orders 1..3.  ``g0_log_mean``/``g0_log_sigma`` are in dB (per-MPC power
    gain is log-normal), ``xi_mean`` is the mean of the exponential angular
    decay prior, ``gamma_shape_chi`` the shadow-fading shape, and
    ``observation_distance`` the maximum range of the spawn-time visibility
    filter.
    """

    density_per_order: tuple[float, float, float]
    g0_log_mean: float
    g0_log_sigma: float
    xi_mean: float
    gamma_shape_chi: float
    fading_coherence_tau: float
    observation_distance: float
    spawn_seed: int
    normal_jitter_sigma: float = 0.0
    mpc_radius: float = 0.1
    max_link_length: float | None = None
    spawn_distribution: str = "uniform"

    def __post_init__(self):
        d = tuple(float(x) for x in self.density_per_order)
        if len(d) != 3 or any(x < 0 for x in d):
            raise ValueError("density_per_order must be 3 non-negative values")
        object.__setattr__(self, "density_per_order", d)
        if self.gamma_shape_chi <= 0:
            raise ValueError("gamma_shape_chi must be > 0")
        if self.observation_distance <= 0:
            raise ValueError("observation_distance must be > 0")
        if self.mpc_radius < 0:
            raise ValueError("mpc_radius must be >= 0")
        if self.spawn_distribution != "uniform":
            raise ValueError(f"unsupported spawn distribution: {self.spawn_distribution!r}")


@dataclass(frozen=True)
class Mpc:
    """One stochastic scatterer."""

    id: int
    order_population: int
    position: np.ndarray
    normal: np.ndarray
    g0: float
    xi: float
    surface_index: int


class MpcSet:
    """Column-oriented, immutable collection of MPCs."""

    def __init__(self, orders, positions, normals, g0, xi, surface_index,
                 spawn_seed: int, scene_hash: int):
        self.orders = np.asarray(orders, dtype=np.uint8)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        self.g0 = np.asarray(g0, dtype=np.float64)
        self.xi = np.asarray(xi, dtype=np.float64)
        self.surface_index = np.asarray(surface_index, dtype=np.int64)
        self.spawn_seed = int(spawn_seed)
        self.scene_hash = int(scene_hash)
        n = len(self.orders)
        if not all(len(a) == n for a in (self.positions, self.normals, self.g0, self.xi, self.surface_index)):
            raise ValueError("MpcSet column lengths disagree")
        for a in (self.orders, self.positions, self.normals, self.g0, self.xi, self.surface_index):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.orders)

    def __getitem__(self, i: int) -> Mpc:
        return Mpc(
            id=i,
            order_population=int(self.orders[i]),
            position=self.positions[i],
            normal=self.normals[i],
            g0=float(self.g0[i]),
            xi=float(self.xi[i]),
            surface_index=int(self.surface_index[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    def counts_by_order(self) -> dict[int, int]:
        return {k: int(np.count_nonzero(self.orders == k)) for k in (1, 2, 3)}

    def select(self, keep: np.ndarray, scene_hash: int | None = None) -> "MpcSet":
        """New set with rows where ``keep`` is true; ids re-densified."""
        return MpcSet(
            self.orders[keep], self.positions[keep], self.normals[keep],
            self.g0[keep], self.xi[keep], self.surface_index[keep],
            self.spawn_seed, self.scene_hash if scene_hash is None else scene_hash,
        )


def _rotate_about_axes(vectors: np.ndarray, axes: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of each vector about its own unit axis."""
    cos = np.cos(angles)[:, None]
    sin = np.sin(angles)[:, None]
    dot = np.einsum("nk,nk->n", axes, vectors)[:, None]
    return vectors * cos + np.cross(axes, vectors) * sin + axes * dot * (1.0 - cos)


def spawn_mpcs(scene: Scene, params: GscmParams) -> MpcSet:
    """Draw the three order populations on every surface.

    Per (surface, order) the count is Poisson(density x area) from a
    counter-based stream keyed by (spawn_seed, surface, order); positions
    are uniform over the triangle, normals are the surface normal with an
    optional random axis-angle jitter, gains are log-normal (dB domain)
    and angular decays exponential.  MPCs landing outside the active area
    are dropped.
    """
    orders, positions, normals, g0s, xis, surf_idx = [], [], [], [], [], []
    areas = 0.5 * np.linalg.norm(np.cross(scene.tri_e1, scene.tri_e2), axis=1)

    for i in range(len(scene)):
        for k in (1, 2, 3):
            gen = rng.stream(params.spawn_seed, "spawn", i, k)
            count = int(gen.poisson(params.density_per_order[k - 1] * areas[i]))
            if count == 0:
                continue
            u = gen.random(count)
            v = gen.random(count)
            flip = u + v > 1.0
            u[flip] = 1.0 - u[flip]
            v[flip] = 1.0 - v[flip]
            pos = scene.tri_v0[i] + u[:, None] * scene.tri_e1[i] + v[:, None] * scene.tri_e2[i]

            base_normal = np.broadcast_to(scene.normals[i], (count, 3))
            if params.normal_jitter_sigma > 0:
                axes = gen.normal(size=(count, 3))
                axes /= np.linalg.norm(axes, axis=1, keepdims=True)
                angles = np.abs(gen.normal(0.0, params.normal_jitter_sigma, count))
                normal = _rotate_about_axes(base_normal.copy(), axes, angles)
                normal /= np.linalg.norm(normal, axis=1, keepdims=True)
            else:
                normal = base_normal.copy()

            g0_db = gen.normal(params.g0_log_mean, params.g0_log_sigma, count)
            xi = gen.exponential(params.xi_mean, count) if params.xi_mean > 0 else np.zeros(count)

            inside = np.array([scene.active_area.contains_point(p, tol=1e-9) for p in pos])
            orders.append(np.full(count, k, dtype=np.uint8)[inside])
            positions.append(pos[inside])
            normals.append(normal[inside])
            g0s.append((10.0 ** (g0_db / 10.0))[inside])
            xis.append(xi[inside])
            surf_idx.append(np.full(count, i, dtype=np.int64)[inside])

    if orders:
        cols = [np.concatenate(c) for c in (orders, positions, normals, g0s, xis, surf_idx)]
    else:
        cols = [np.zeros(0, dtype=np.uint8), np.zeros((0, 3)), np.zeros((0, 3)),
                np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)]
    return MpcSet(*cols, spawn_seed=params.spawn_seed, scene_hash=scene.content_hash)


def observation_grid(scene: Scene) -> np.ndarray:
    """Regular sample nodes over the traversable area.

    Pitch is max(1 m, bbox_diagonal / 50) per axis, which bounds the node
    count while scaling with the scene.  Nodes falling inside a solid are
    dropped: they are not reachable observation points, and keeping them
    would validate scatterers buried underneath or inside buildings.
    """
    box = scene.traversable_area
    pitch = max(1.0, box.diagonal / 50.0)
    axes = []
    for k in range(3):
        n = int(np.floor(box.extent[k] / pitch)) + 1
        axes.append(box.lo[k] + pitch * np.arange(n))
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    if len(scene.solids) and len(nodes):
        nodes = nodes[~points_inside_solids(scene, nodes)]
    return nodes


def filter_mpcs(scene: Scene, mpc_set: MpcSet, params: GscmParams) -> MpcSet:
    """Drop MPCs inside solids or invisible from every observation node.

    An MPC survives iff it is outside every closed solid and at least one
    traversable-grid node within ``observation_distance`` has line of
    sight to it.  Surviving ids are re-densified.
    """
    if mpc_set.scene_hash != scene.content_hash:
        raise SceneMismatch("MPC set was spawned against a different scene")
    n = len(mpc_set)
    if n == 0:
        return mpc_set

    outside = ~points_inside_solids(scene, mpc_set.positions)

    seen = np.zeros(n, dtype=bool)
    nodes = observation_grid(scene)
    for node in nodes:
        todo = np.flatnonzero(outside & ~seen)
        if todo.size == 0:
            break
        d = np.linalg.norm(mpc_set.positions[todo] - node, axis=1)
        cand = todo[(d <= params.observation_distance) & (d > 0)]
        if cand.size == 0:
            continue
        vis = segments_visible(scene, mpc_set.positions[cand],
                               np.broadcast_to(node, (cand.size, 3)))
        seen[cand[vis]] = True

    return mpc_set.select(outside & seen)


def associate_surfaces(scene: Scene, mpc_set: MpcSet, params: GscmParams | None = None) -> MpcSet:
    """Point each MPC at its nearest surface (ties to the lowest index).

    Normals are refreshed from the associated surface; when a jitter sigma
    is configured the refresh re-applies a per-MPC keyed jitter so results
    do not depend on processing order.
    """
    if len(mpc_set) == 0:
        return mpc_set
    dist = point_triangle_distances(scene, mpc_set.positions)
    nearest = np.argmin(dist, axis=1).astype(np.int64)
    normals = scene.normals[nearest].copy()

    sigma = params.normal_jitter_sigma if params is not None else 0.0
    if sigma > 0:
        for i in range(len(mpc_set)):
            gen = rng.stream(mpc_set.spawn_seed, "assoc", i)
            axis = gen.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = abs(gen.normal(0.0, sigma))
            normals[i] = _rotate_about_axes(normals[i][None], axis[None], np.array([angle]))[0]
            normals[i] /= np.linalg.norm(normals[i])

    return MpcSet(mpc_set.orders, mpc_set.positions, normals, mpc_set.g0, mpc_set.xi,
                  nearest, mpc_set.spawn_seed, mpc_set.scene_hash)


class VisibilityLut:
    """Sparse symmetric map of mutually visible MPC pairs and distances."""

    def __init__(self, i: np.ndarray, j: np.ndarray, dist: np.ndarray, n_mpcs: int):
        order = np.lexsort((j, i))
        self.i = np.asarray(i, dtype=np.int64)[order]
        self.j = np.asarray(j, dtype=np.int64)[order]
        self.dist = np.asarray(dist, dtype=np.float64)[order]
        self.n_mpcs = int(n_mpcs)
        for a in (self.i, self.j, self.dist):
            a.setflags(write=False)

        # directed adjacency (both orientations) in CSR form for path search
        src = np.concatenate([self.i, self.j])
        dst = np.concatenate([self.j, self.i])
        d2 = np.concatenate([self.dist, self.dist])
        order = np.lexsort((dst, src))
        self._src, self._nbr, self._nbr_dist = src[order], dst[order], d2[order]
        self._indptr = np.searchsorted(self._src, np.arange(self.n_mpcs + 1))
        for a in (self._src, self._nbr, self._nbr_dist, self._indptr):
            a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.dist)

    def __contains__(self, pair) -> bool:
        a, b = min(pair), max(pair)
        lo = np.searchsorted(self.i, a)
        hi = np.searchsorted(self.i, a, side="right")
        return b in self.j[lo:hi]

    def distance(self, a: int, b: int) -> float | None:
        a, b = (a, b) if a < b else (b, a)
        lo = np.searchsorted(self.i, a)
        hi = np.searchsorted(self.i, a, side="right")
        k = np.searchsorted(self.j[lo:hi], b)
        if k < hi - lo and self.j[lo + k] == b:
            return float(self.dist[lo + k])
        return None

    def neighbors(self, a: int):
        """(neighbor ids, distances) for MPC a, ascending by id."""
        lo, hi = self._indptr[a], self._indptr[a + 1]
        return self._nbr[lo:hi], self._nbr_dist[lo:hi]

    def directed_edges(self):
        """(src, dst, dist) arrays holding both orientations of every pair."""
        return self._src, self._nbr, self._nbr_dist

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.i, self.j])


def build_lut(scene: Scene, mpc_set: MpcSet, max_link_length: float) -> VisibilityLut:
    """Pairwise visibility table for all MPC pairs within range."""
    n = len(mpc_set)
    if n < 2:
        return VisibilityLut(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                             np.zeros(0), n)
    pos = mpc_set.positions
    ii, jj = np.triu_indices(n, k=1)
    d = np.linalg.norm(pos[ii] - pos[jj], axis=1)
    in_range = d <= max_link_length
    ii, jj, d = ii[in_range], jj[in_range], d[in_range]
    if ii.size:
        vis = segments_visible(scene, pos[ii], pos[jj])
        ii, jj, d = ii[vis], jj[vis], d[vis]
    return VisibilityLut(ii, jj, d, n)


def fit_mpc_parameters(samples) -> tuple[float, float]:
    """Least-squares fit of gain = g0 * exp(-xi * angle) in the log domain.

    Maximum likelihood under log-normal gain errors.  Returns (g0, xi)
    with xi clamped at zero (constant refit) when the slope comes out
    negative.  Raises :class:`DegenerateFit` if all angles coincide.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    angles = np.array([a for a, _ in samples], dtype=np.float64)
    gains = np.array([g for _, g in samples], dtype=np.float64)
    if np.any(angles < 0):
        raise ValueError("angles must be >= 0")
    if np.any(gains <= 0):
        raise ValueError("gains must be > 0")
    if np.all(angles == angles[0]):
        raise DegenerateFit("all sample angles identical")

    log_g = np.log(gains)
    a_mean = angles.mean()
    y_mean = log_g.mean()
    d_a = angles - a_mean
    slope = float((d_a @ (log_g - y_mean)) / (d_a @ d_a))
    if slope >= 0:
        return float(np.exp(y_mean)), 0.0
    return float(np.exp(y_mean - slope * a_mean)), -slope


def save_spawn(mpc_set: MpcSet) -> bytes:
    """Serialize to the little-endian spawn container (magic ``LUMP``)."""
    header = _HEADER.pack(SPAWN_MAGIC, SPAWN_VERSION, mpc_set.scene_hash,
                          mpc_set.spawn_seed, len(mpc_set))
    records = np.zeros(len(mpc_set), dtype=_RECORD_DTYPE)
    records["id"] = np.arange(len(mpc_set))
    records["order"] = mpc_set.orders
    records["position"] = mpc_set.positions
    records["normal"] = mpc_set.normals
    records["g0"] = mpc_set.g0
    records["xi"] = mpc_set.xi
    records["surface_index"] = mpc_set.surface_index
    return header + records.tobytes()


def load_spawn(data: bytes, scene: Scene) -> MpcSet:
    """Parse a spawn container, verifying magic, version and scene hash."""
    if len(data) < _HEADER.size or data[:4] != SPAWN_MAGIC:
        raise BadMagic("not a spawn container")
    magic, version, scene_hash, spawn_seed, count = _HEADER.unpack_from(data)
    if version != SPAWN_VERSION:
        raise VersionUnsupported(f"spawn container version {version}")
    if scene_hash != scene.content_hash:
        raise SceneMismatch("spawn container built against a different scene")
    body = data[_HEADER.size:]
    expected = count * _RECORD_DTYPE.itemsize
    if len(body) != expected:
        raise Truncated(f"expected {expected} record bytes, found {len(body)}")
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    if not np.array_equal(records["id"], np.arange(count)):
        raise Truncated("record ids are not dense 0..n-1")
    return MpcSet(records["order"], records["position"], records["normal"],
                  records["g0"], records["xi"], records["surface_index"],
                  spawn_seed=spawn_seed, scene_hash=scene_hash)
