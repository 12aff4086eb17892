"""The channel engine: scene + scatterers + entities stepped in lockstep.

The engine owns no clock of its own; time advances only when ``step_to``
is called (by the wire-protocol server, the batch runner or a test).  At
each step queued position updates are applied, waypoint mobility advances,
and per-path fading states are brought forward lazily when a channel is
next requested.  Channel realizations are cached per (tx, rx) pair until
the next step, so repeated queries at one time are cheap and identical.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import rng
from .channel import (
    ChannelRealization,
    Entity,
    FadingState,
    RadioParams,
    _unit_mean_latent,
    chains_from_groups,
    enumerate_path_groups,
    fading_keys_for_group,
    gamma_multiplier,
    synthesize_from_groups,
)
from .config import MobilityConfig, ScenarioConfig, materialize_entities
from .errors import PlacementExhausted, TimeRegression
from .geometry import Scene, point_inside_solid, segments_visible
from .gscm import (
    GscmParams,
    MpcSet,
    VisibilityLut,
    associate_surfaces,
    build_lut,
    filter_mpcs,
    load_spawn,
    spawn_mpcs,
)

_MAX_WAYPOINT_TRIES = 10_000

# engine parameters adjustable at run time over the wire
RUNTIME_PARAMS = ("max_path_length", "tx_power", "fading_coherence_tau")


class _Waypointer:
    """Random-waypoint walker for one entity, deterministic per seed."""

    def __init__(self, entity: Entity, scene: Scene, cfg: MobilityConfig, seed: int):
        self.gen = rng.stream(seed, "waypoint", entity.id)
        self.scene = scene
        self.cfg = cfg
        self.pos = entity.position.copy()
        self.vel = np.zeros(3)
        self.cursor = 0.0
        self.phase = "pause"
        self.phase_end = cfg.pause
        self.target = None
        self.speed = 0.0

    def _draw_leg(self):
        box = self.scene.traversable_area
        for _ in range(_MAX_WAYPOINT_TRIES):
            p = box.lo + self.gen.random(3) * box.extent
            if np.linalg.norm(p - self.pos) < 1e-9:
                continue
            if not point_inside_solid(self.scene, p):
                self.target = p
                self.speed = float(self.gen.uniform(self.cfg.speed_min, self.cfg.speed_max))
                if self.speed <= 0:
                    self.speed = max(self.cfg.speed_max, 1e-6)
                return
        raise PlacementExhausted("no reachable waypoint found")

    def advance(self, t: float):
        while self.cursor < t:
            if self.phase == "pause":
                if self.phase_end >= t:
                    self.cursor = t
                    self.vel = np.zeros(3)
                    break
                self.cursor = self.phase_end
                self._draw_leg()
                self.vel = (self.target - self.pos)
                dist = float(np.linalg.norm(self.vel))
                self.vel = self.vel / dist * self.speed
                self.phase = "move"
                self.phase_end = self.cursor + dist / self.speed
            else:
                if self.phase_end >= t:
                    self.pos = self.pos + self.vel * (t - self.cursor)
                    self.cursor = t
                    break
                self.pos = self.target.copy()
                self.cursor = self.phase_end
                self.phase = "pause"
                self.phase_end = self.cursor + self.cfg.pause
                self.vel = np.zeros(3)
        return self.pos, self.vel


class Engine:
    """Simulation state advanced exclusively through :meth:`step_to`."""

    def __init__(self, scene: Scene, mpcs: MpcSet, lut: VisibilityLut | None,
                 entities: list[Entity], radio: RadioParams, gscm: GscmParams,
                 mobility: MobilityConfig | None = None, scenario_seed: int = 0,
                 lut_cap: float | None = None):
        self.scene = scene
        self.mpcs = mpcs
        self.lut = lut
        self.radio = radio
        self.gscm = gscm
        # the link length the visibility table was built for; raising
        # max_path_length beyond it would silently miss bounce paths
        if lut_cap is None:
            lut_cap = gscm.max_link_length if gscm.max_link_length is not None \
                else radio.max_path_length
        self.lut_cap = float(lut_cap)
        self.entities: dict[int, Entity] = {e.id: e for e in entities}
        if len(self.entities) != len(entities):
            raise ValueError("duplicate entity ids")
        self.time = 0.0
        self.steps_taken = 0
        self._pending: list[tuple[int, np.ndarray, np.ndarray]] = []
        self._external: set[int] = set()
        # per (tx, rx): {sorted hop bytes: [latent, last_update, counter, key]}
        self._fading: dict[tuple[int, int], dict] = {}
        self._cache: dict[tuple[int, int], ChannelRealization] = {}
        self._vis_cache: dict[int, tuple] = {}
        self._los_cache: dict[tuple[int, int], tuple] = {}

        self._walkers: dict[int, _Waypointer] = {}
        if mobility is not None and mobility.kind == "random_waypoint":
            for e in entities:
                if e.kind == "ue":
                    self._walkers[e.id] = _Waypointer(e, scene, mobility, scenario_seed)

    # -- queries ---------------------------------------------------------

    @property
    def bs_ids(self) -> list[int]:
        return sorted(i for i, e in self.entities.items() if e.kind == "bs")

    @property
    def ue_ids(self) -> list[int]:
        return sorted(i for i, e in self.entities.items() if e.kind == "ue")

    def positions(self) -> list[Entity]:
        return [self.entities[i] for i in sorted(self.entities)]

    # -- time and state --------------------------------------------------

    def queue_position(self, entity_id: int, position, velocity):
        if entity_id not in self.entities:
            raise KeyError(f"unknown entity {entity_id}")
        self._pending.append((entity_id, np.asarray(position, dtype=float),
                              np.asarray(velocity, dtype=float)))

    def set_param(self, key: str, value: float):
        if key == "max_path_length":
            if value <= 0:
                raise ValueError("max_path_length must be > 0")
            if self.lut is not None and self.radio.max_bounce_order >= 2 \
                    and value > self.lut_cap:
                raise ValueError(
                    f"max_path_length {value} exceeds the visibility table cap {self.lut_cap}")
            self.radio = replace(self.radio, max_path_length=float(value))
        elif key == "tx_power":
            if value <= 0:
                raise ValueError("tx_power must be > 0")
            self.radio = replace(self.radio, tx_power=float(value))
        elif key == "fading_coherence_tau":
            if value <= 0:
                raise ValueError("fading_coherence_tau must be > 0")
            self.gscm = replace(self.gscm, fading_coherence_tau=float(value))
        else:
            raise KeyError(f"unknown run-time parameter {key!r}")
        self._cache.clear()
        self._vis_cache.clear()
        self._los_cache.clear()

    def step_to(self, t: float):
        """Advance to time t: apply queued positions, move entities.

        Visibility caches are dropped only for entities that actually
        moved, so static base stations keep their ray-cast results.
        """
        if t < self.time:
            raise TimeRegression(f"step to {t} behind current time {self.time}")
        moved: set[int] = set()
        for entity_id, pos, vel in self._pending:
            e = self.entities[entity_id]
            e.position = pos
            e.velocity = vel
            self._external.add(entity_id)
            moved.add(entity_id)
        self._pending.clear()
        for entity_id, walker in self._walkers.items():
            if entity_id in self._external:
                continue
            pos, vel = walker.advance(t)
            e = self.entities[entity_id]
            if not np.array_equal(pos, e.position):
                moved.add(entity_id)
            e.position = pos.copy()
            e.velocity = vel.copy()
        self.time = t
        self.steps_taken += 1
        self._cache.clear()
        for eid in moved:
            self._vis_cache.pop(eid, None)
        if moved:
            self._los_cache = {pair: value for pair, value in self._los_cache.items()
                               if pair[0] not in moved and pair[1] not in moved}

    # -- channels ---------------------------------------------------------

    def refresh_visibility(self):
        """Batched casts for every entity and LOS pair missing from cache.

        Entity-to-MPC segments are cast only for MPCs within
        ``max_path_length``; farther MPCs cannot appear on any chain, so
        their visibility is recorded as false without a cast.
        """
        ids = sorted(self.entities)
        missing = [eid for eid in ids if eid not in self._vis_cache]
        n = len(self.mpcs)
        if missing and n:
            positions = np.array([self.entities[i].position for i in missing])
            p = np.repeat(positions, n, axis=0)
            q = np.tile(self.mpcs.positions, (len(missing), 1))
            d = np.linalg.norm(q - p, axis=1)
            cast = (d > 0) & (d <= self.radio.max_path_length)
            vis = np.zeros(len(missing) * n, dtype=bool)
            if cast.any():
                vis[cast] = segments_visible(self.scene, p[cast], q[cast])
            for row, eid in enumerate(missing):
                sl = slice(row * n, (row + 1) * n)
                self._vis_cache[eid] = (vis[sl], d[sl])
        else:
            empty = (np.zeros(0, dtype=bool), np.zeros(0))
            for eid in missing:
                self._vis_cache[eid] = empty

        pairs = [(a, b) for a in ids for b in ids if a < b and (a, b) not in self._los_cache]
        if pairs:
            pa = np.array([self.entities[a].position for a, _ in pairs])
            pb = np.array([self.entities[b].position for _, b in pairs])
            dd = np.linalg.norm(pb - pa, axis=1)
            ok = dd > 0
            vis = np.zeros(len(pairs), dtype=bool)
            if ok.any():
                vis[ok] = segments_visible(self.scene, pa[ok], pb[ok])
            for (a, b), v, dist in zip(pairs, vis, dd):
                self._los_cache[(a, b)] = (bool(v), float(dist))
                self._los_cache[(b, a)] = (bool(v), float(dist))

    def _entity_visibility(self, entity_id: int):
        if entity_id not in self._vis_cache:
            self.refresh_visibility()
        return self._vis_cache[entity_id]

    @staticmethod
    def _hop_keys(group) -> list[bytes]:
        srt = np.sort(group.hop_ids, axis=1).astype("<u4")
        blob = srt.tobytes()
        width = 4 * srt.shape[1]
        if width == 0:
            return [b""] * len(group)
        return [blob[i:i + width] for i in range(0, len(blob), width)]

    def _advance_fading(self, tx_id: int, rx_id: int, groups) -> list[np.ndarray]:
        """Bring per-path fading forward to the current time, vectorized.

        Innovations are counter-addressed per path key, so values do not
        depend on which pairs were queried first or on thread scheduling.
        """
        bank = self._fading.setdefault((tx_id, rx_id), {})
        chi = self.gscm.gamma_shape_chi
        tau = self.gscm.fading_coherence_tau
        lat0 = _unit_mean_latent(chi)
        t = self.time
        xs = []
        for group in groups:
            # paths with the same sorted hop set share one fading state;
            # process unique states once and scatter to the rows
            hop_keys = self._hop_keys(group)
            slot_of: dict[bytes, int] = {}
            rows = []
            row_slot = np.empty(len(hop_keys), dtype=np.int64)
            fresh_keys = None
            for i, hkey in enumerate(hop_keys):
                slot = slot_of.get(hkey)
                if slot is None:
                    row = bank.get(hkey)
                    if row is None:
                        if fresh_keys is None:
                            fresh_keys = fading_keys_for_group(
                                self.mpcs.spawn_seed, tx_id, rx_id, group.hop_ids)
                        row = [lat0, t, 0, int(fresh_keys[i])]
                        bank[hkey] = row
                    slot = len(rows)
                    slot_of[hkey] = slot
                    rows.append(row)
                row_slot[i] = slot
            latent = np.array([r[0] for r in rows])
            last = np.array([r[1] for r in rows])
            dt = t - last
            upd = dt > 0
            if upd.any():
                keys = np.array([r[3] for r in rows], dtype=np.uint64)
                counter = np.array([r[2] for r in rows], dtype=np.uint64)
                rho = np.exp(-dt[upd] / tau)
                z = rng.normals_for(keys[upd], counter[upd])
                latent[upd] = rho * latent[upd] + np.sqrt(1.0 - rho * rho) * z
                new_counter = counter + upd
                for i, row in enumerate(rows):
                    row[0] = latent[i]
                    row[1] = t
                    row[2] = int(new_counter[i])
            xs.append(gamma_multiplier(latent, chi)[row_slot])
        return xs

    def get_channel(self, tx_id: int, rx_id: int) -> ChannelRealization:
        """Realization for the state at the last completed step (cached)."""
        cache_key = (tx_id, rx_id)
        hit = self._cache.get(cache_key)
        if hit is not None:
            return hit
        tx = self.entities[tx_id]
        rx = self.entities[rx_id]
        tx_vis = self._entity_visibility(tx_id)
        rx_vis = self._entity_visibility(rx_id)
        if (tx_id, rx_id) not in self._los_cache:
            self.refresh_visibility()
        los = self._los_cache[(tx_id, rx_id)][0]
        groups = enumerate_path_groups(
            self.scene, self.mpcs, self.lut, tx, rx, self.radio,
            tx_vis=tx_vis, rx_vis=rx_vis, los=los)
        xs = self._advance_fading(tx_id, rx_id, groups)
        h = synthesize_from_groups(groups, xs, tx, rx, self.mpcs, self.radio,
                                   self.time, trusted_geometry=True)

        bank = self._fading[(tx_id, rx_id)]
        chi = self.gscm.gamma_shape_chi
        tau = self.gscm.fading_coherence_tau

        def materialize_paths():
            state_groups = []
            for group in groups:
                states = []
                for hkey in self._hop_keys(group):
                    latent, last, counter, key = bank[hkey]
                    states.append(FadingState(latent=latent, last_update=last,
                                              shape=chi, coherence_tau=tau,
                                              key=key, counter=counter))
                state_groups.append(states)
            return chains_from_groups(groups, state_groups)

        real = ChannelRealization(tx_id=tx_id, rx_id=rx_id, timestamp=self.time, h=h,
                                  path_factory=materialize_paths)
        self._cache[cache_key] = real
        return real


# -- assembly from configuration -------------------------------------------------

def prepare_mpcs(scene: Scene, gscm: GscmParams) -> tuple[MpcSet, MpcSet]:
    """Spawn, filter and surface-associate; returns (raw, ready) sets."""
    raw = spawn_mpcs(scene, gscm)
    ready = associate_surfaces(scene, filter_mpcs(scene, raw, gscm), gscm)
    return raw, ready


def assemble_engine(gscm: GscmParams, radio: RadioParams, scenario: ScenarioConfig,
                    scene: Scene, spawn_blob: bytes | None = None) -> Engine:
    """Build a ready-to-serve engine from parsed configuration."""
    if spawn_blob is not None:
        mpcs = load_spawn(spawn_blob, scene)
    else:
        _, mpcs = prepare_mpcs(scene, gscm)
    lut = None
    cap = gscm.max_link_length if gscm.max_link_length is not None else radio.max_path_length
    if radio.max_bounce_order >= 2:
        if cap < radio.max_path_length:
            raise ValueError("visibility table cap below max_path_length")
        lut = build_lut(scene, mpcs, cap)
    entities = materialize_entities(scenario, scene)
    return Engine(scene, mpcs, lut, entities, radio, gscm,
                  mobility=scenario.mobility, scenario_seed=scenario.scenario_seed,
                  lut_cap=cap)
