"""Configuration documents: parsing, validation and entity materialization.

Three UTF-8 JSON documents configure a run: scatterer/GSCM parameters,
radio parameters, and the scenario (scene file, entities, mobility,
logging, timing).  Parsing is strict: unknown keys are rejected and every
error carries the file name and the exact key path, so that a typo in a
large study fails loudly instead of silently skewing results.

The scene file schema also lives here: solids as boxes or vertex/index
meshes plus the active and traversable areas.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rng_mod
from .channel import Entity, RadioParams
from .errors import ConfigError, PlacementExhausted
from .geometry import Aabb, Scene, build_scene, mesh_surfaces, point_inside_solid, triangulate_box
from .gscm import GscmParams


# -- low-level document walking ----------------------------------------------

def _load_json(text: str, file: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(file, "$", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(file, "$", "document root must be an object")
    return doc


def _reject_unknown(obj: dict, allowed, path: str, file: str):
    for key in obj:
        if key not in allowed:
            raise ConfigError(file, f"{path}.{key}", "unknown key")


def _get(obj: dict, key: str, path: str, file: str, required=True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(file, f"{path}.{key}", "missing required key")
        return default
    return obj[key]


def _number(value, path: str, file: str, *, gt=None, ge=None, lt=None, le=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(file, path, "must be a number")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(file, path, "must be finite")
    if gt is not None and not v > gt:
        raise ConfigError(file, path, f"must be > {gt}")
    if ge is not None and not v >= ge:
        raise ConfigError(file, path, f"must be >= {ge}")
    if lt is not None and not v < lt:
        raise ConfigError(file, path, f"must be < {lt}")
    if le is not None and not v <= le:
        raise ConfigError(file, path, f"must be <= {le}")
    return v


def _integer(value, path: str, file: str, **bounds) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(file, path, "must be an integer")
    _number(value, path, file, **bounds)
    return int(value)


def _string(value, path: str, file: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(file, path, "must be a string")
    return value


def _vec3(value, path: str, file: str) -> tuple[float, float, float]:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(file, path, "must be a list of 3 numbers")
    return tuple(_number(v, f"{path}[{i}]", file) for i, v in enumerate(value))


def _box(value, path: str, file: str) -> Aabb:
    if not isinstance(value, dict):
        raise ConfigError(file, path, "must be an object with 'min' and 'max'")
    _reject_unknown(value, {"min", "max"}, path, file)
    lo = _vec3(_get(value, "min", path, file), f"{path}.min", file)
    hi = _vec3(_get(value, "max", path, file), f"{path}.max", file)
    if any(a > b for a, b in zip(lo, hi)):
        raise ConfigError(file, path, "min must not exceed max")
    return Aabb(lo, hi)


# -- GSCM parameters -----------------------------------------------------------

_GSCM_KEYS = {
    "density_per_order", "g0_log_mean", "g0_log_sigma", "xi_mean",
    "gamma_shape_chi", "fading_coherence_tau", "observation_distance",
    "spawn_seed", "normal_jitter_sigma", "mpc_radius", "max_link_length",
    "spawn_distribution",
}


def parse_gscm_config(text: str, file: str = "gscm") -> GscmParams:
    doc = _load_json(text, file)
    _reject_unknown(doc, _GSCM_KEYS, "$", file)

    dens = _get(doc, "density_per_order", "$", file)
    if not isinstance(dens, list) or len(dens) != 3:
        raise ConfigError(file, "$.density_per_order", "must be a list of 3 densities")
    densities = tuple(_number(d, f"$.density_per_order[{i}]", file, ge=0.0)
                      for i, d in enumerate(dens))

    max_link = _get(doc, "max_link_length", "$", file, required=False)
    if max_link is not None:
        max_link = _number(max_link, "$.max_link_length", file, gt=0.0)
    dist = _get(doc, "spawn_distribution", "$", file, required=False, default="uniform")
    if _string(dist, "$.spawn_distribution", file) != "uniform":
        raise ConfigError(file, "$.spawn_distribution", f"unsupported distribution {dist!r}")

    return GscmParams(
        density_per_order=densities,
        g0_log_mean=_number(_get(doc, "g0_log_mean", "$", file), "$.g0_log_mean", file),
        g0_log_sigma=_number(_get(doc, "g0_log_sigma", "$", file), "$.g0_log_sigma", file, ge=0.0),
        xi_mean=_number(_get(doc, "xi_mean", "$", file), "$.xi_mean", file, ge=0.0),
        gamma_shape_chi=_number(_get(doc, "gamma_shape_chi", "$", file), "$.gamma_shape_chi", file, gt=0.0),
        fading_coherence_tau=_number(_get(doc, "fading_coherence_tau", "$", file),
                                     "$.fading_coherence_tau", file, gt=0.0),
        observation_distance=_number(_get(doc, "observation_distance", "$", file),
                                     "$.observation_distance", file, gt=0.0),
        spawn_seed=_integer(_get(doc, "spawn_seed", "$", file), "$.spawn_seed", file, ge=0),
        normal_jitter_sigma=_number(_get(doc, "normal_jitter_sigma", "$", file, required=False, default=0.0),
                                    "$.normal_jitter_sigma", file, ge=0.0),
        mpc_radius=_number(_get(doc, "mpc_radius", "$", file, required=False, default=0.1),
                           "$.mpc_radius", file, ge=0.0),
        max_link_length=max_link,
        spawn_distribution=dist,
    )


def gscm_to_doc(p: GscmParams) -> dict:
    doc = {
        "density_per_order": list(p.density_per_order),
        "g0_log_mean": p.g0_log_mean,
        "g0_log_sigma": p.g0_log_sigma,
        "xi_mean": p.xi_mean,
        "gamma_shape_chi": p.gamma_shape_chi,
        "fading_coherence_tau": p.fading_coherence_tau,
        "observation_distance": p.observation_distance,
        "spawn_seed": p.spawn_seed,
        "normal_jitter_sigma": p.normal_jitter_sigma,
        "mpc_radius": p.mpc_radius,
        "spawn_distribution": p.spawn_distribution,
    }
    if p.max_link_length is not None:
        doc["max_link_length"] = p.max_link_length
    return doc


# -- radio parameters ----------------------------------------------------------

_RADIO_KEYS = {
    "carrier_frequency", "bandwidth", "fft_bins", "tx_power", "noise_power",
    "max_path_length", "pathloss_exponent", "reference_distance", "max_bounce_order",
}


def parse_radio_config(text: str, file: str = "radio") -> RadioParams:
    doc = _load_json(text, file)
    _reject_unknown(doc, _RADIO_KEYS, "$", file)

    fft_bins = _integer(_get(doc, "fft_bins", "$", file), "$.fft_bins", file, ge=2)
    if fft_bins & (fft_bins - 1):
        raise ConfigError(file, "$.fft_bins", "must be a power of two")
    carrier = _number(_get(doc, "carrier_frequency", "$", file), "$.carrier_frequency", file, gt=0.0)
    bandwidth = _number(_get(doc, "bandwidth", "$", file), "$.bandwidth", file, gt=0.0)
    if bandwidth >= carrier:
        raise ConfigError(file, "$.bandwidth", "must be below carrier_frequency")

    return RadioParams(
        carrier_frequency=carrier,
        bandwidth=bandwidth,
        fft_bins=fft_bins,
        tx_power=_number(_get(doc, "tx_power", "$", file), "$.tx_power", file, gt=0.0),
        noise_power=_number(_get(doc, "noise_power", "$", file), "$.noise_power", file, gt=0.0),
        max_path_length=_number(_get(doc, "max_path_length", "$", file), "$.max_path_length", file, gt=0.0),
        pathloss_exponent=_number(_get(doc, "pathloss_exponent", "$", file), "$.pathloss_exponent", file, gt=0.0),
        reference_distance=_number(_get(doc, "reference_distance", "$", file, required=False, default=1.0),
                                   "$.reference_distance", file, gt=0.0),
        max_bounce_order=_integer(_get(doc, "max_bounce_order", "$", file, required=False, default=3),
                                  "$.max_bounce_order", file, ge=1, le=3),
    )


def radio_to_doc(p: RadioParams) -> dict:
    return {
        "carrier_frequency": p.carrier_frequency,
        "bandwidth": p.bandwidth,
        "fft_bins": p.fft_bins,
        "tx_power": p.tx_power,
        "noise_power": p.noise_power,
        "max_path_length": p.max_path_length,
        "pathloss_exponent": p.pathloss_exponent,
        "reference_distance": p.reference_distance,
        "max_bounce_order": p.max_bounce_order,
    }


# -- scenario ------------------------------------------------------------------

@dataclass(frozen=True)
class MobilityConfig:
    kind: str  # "none" | "random_waypoint" | "external"
    speed_min: float = 0.0
    speed_max: float = 0.0
    pause: float = 0.0


@dataclass(frozen=True)
class EntitySpec:
    position: tuple[float, float, float]
    id: int | None = None
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    antenna_offsets: tuple[tuple[float, float, float], ...] = ((0.0, 0.0, 0.0),)


@dataclass(frozen=True)
class ScenarioConfig:
    scene_path: str
    duration: float
    step: float
    scenario_seed: int
    bs_list: tuple[EntitySpec, ...] = ()
    bs_density: float = 0.0
    ue_list: tuple[EntitySpec, ...] = ()
    ue_density: float = 0.0
    mobility: MobilityConfig = MobilityConfig(kind="none")
    channel_log: bool = False
    channel_log_path: str | None = None
    results_path: str | None = None


_SCENARIO_KEYS = {
    "scene_path", "bs_list", "bs_density", "ue_list", "ue_density", "mobility",
    "channel_log", "channel_log_path", "results_path", "duration", "step",
    "scenario_seed",
}
_ENTITY_KEYS = {"id", "position", "velocity", "antenna_offsets"}
_MOBILITY_KEYS = {"kind", "speed_min", "speed_max", "pause"}


def _parse_entity(obj, path: str, file: str) -> EntitySpec:
    if not isinstance(obj, dict):
        raise ConfigError(file, path, "must be an object")
    _reject_unknown(obj, _ENTITY_KEYS, path, file)
    ident = _get(obj, "id", path, file, required=False)
    if ident is not None:
        ident = _integer(ident, f"{path}.id", file, ge=0)
    offsets_doc = _get(obj, "antenna_offsets", path, file, required=False)
    if offsets_doc is None:
        offsets = ((0.0, 0.0, 0.0),)
    else:
        if not isinstance(offsets_doc, list) or not offsets_doc:
            raise ConfigError(file, f"{path}.antenna_offsets", "must be a non-empty list")
        offsets = tuple(_vec3(o, f"{path}.antenna_offsets[{i}]", file)
                        for i, o in enumerate(offsets_doc))
    return EntitySpec(
        position=_vec3(_get(obj, "position", path, file), f"{path}.position", file),
        id=ident,
        velocity=_vec3(_get(obj, "velocity", path, file, required=False, default=[0, 0, 0]),
                       f"{path}.velocity", file),
        antenna_offsets=offsets,
    )


def _parse_mobility(obj, path: str, file: str) -> MobilityConfig:
    if obj is None:
        return MobilityConfig(kind="none")
    if not isinstance(obj, dict):
        raise ConfigError(file, path, "must be null or an object")
    _reject_unknown(obj, _MOBILITY_KEYS, path, file)
    kind = _string(_get(obj, "kind", path, file), f"{path}.kind", file)
    if kind == "external":
        return MobilityConfig(kind="external")
    if kind != "random_waypoint":
        raise ConfigError(file, f"{path}.kind", f"unknown mobility kind {kind!r}")
    speed_min = _number(_get(obj, "speed_min", path, file), f"{path}.speed_min", file, ge=0.0)
    speed_max = _number(_get(obj, "speed_max", path, file), f"{path}.speed_max", file, gt=0.0)
    if speed_max < speed_min:
        raise ConfigError(file, f"{path}.speed_max", "must be >= speed_min")
    pause = _number(_get(obj, "pause", path, file, required=False, default=0.0),
                    f"{path}.pause", file, ge=0.0)
    return MobilityConfig(kind="random_waypoint", speed_min=speed_min,
                          speed_max=speed_max, pause=pause)


def parse_scenario_config(text: str, file: str = "scenario") -> ScenarioConfig:
    doc = _load_json(text, file)
    _reject_unknown(doc, _SCENARIO_KEYS, "$", file)

    def entity_list(key):
        lst = _get(doc, key, "$", file, required=False, default=[])
        if not isinstance(lst, list):
            raise ConfigError(file, f"$.{key}", "must be a list")
        return tuple(_parse_entity(e, f"$.{key}[{i}]", file) for i, e in enumerate(lst))

    bs_list = entity_list("bs_list")
    ue_list = entity_list("ue_list")
    bs_density = _number(_get(doc, "bs_density", "$", file, required=False, default=0.0),
                         "$.bs_density", file, ge=0.0)
    ue_density = _number(_get(doc, "ue_density", "$", file, required=False, default=0.0),
                         "$.ue_density", file, ge=0.0)
    if not bs_list and bs_density == 0.0:
        raise ConfigError(file, "$.bs_list", "scenario needs at least one base station source")
    if not ue_list and ue_density == 0.0:
        raise ConfigError(file, "$.ue_list", "scenario needs at least one user terminal source")

    duration = _number(_get(doc, "duration", "$", file), "$.duration", file, gt=0.0)
    step = _number(_get(doc, "step", "$", file), "$.step", file, gt=0.0)
    if duration < step:
        raise ConfigError(file, "$.duration", "must be >= step")

    log_path = _get(doc, "channel_log_path", "$", file, required=False)
    if log_path is not None:
        log_path = _string(log_path, "$.channel_log_path", file)
    channel_log = _get(doc, "channel_log", "$", file, required=False,
                       default=log_path is not None)
    if not isinstance(channel_log, bool):
        raise ConfigError(file, "$.channel_log", "must be a boolean")
    if channel_log and log_path is None:
        raise ConfigError(file, "$.channel_log_path", "required when channel_log is enabled")

    results_path = _get(doc, "results_path", "$", file, required=False)
    if results_path is not None:
        results_path = _string(results_path, "$.results_path", file)

    ids = [e.id for e in bs_list + ue_list if e.id is not None]
    if len(ids) != len(set(ids)):
        raise ConfigError(file, "$", "explicit entity ids must be unique")

    return ScenarioConfig(
        scene_path=_string(_get(doc, "scene_path", "$", file), "$.scene_path", file),
        bs_list=bs_list,
        bs_density=bs_density,
        ue_list=ue_list,
        ue_density=ue_density,
        mobility=_parse_mobility(_get(doc, "mobility", "$", file, required=False), "$.mobility", file),
        channel_log=channel_log,
        channel_log_path=log_path,
        results_path=results_path,
        duration=duration,
        step=step,
        scenario_seed=_integer(_get(doc, "scenario_seed", "$", file), "$.scenario_seed", file, ge=0),
    )


def scenario_to_doc(c: ScenarioConfig) -> dict:
    def entity_doc(e: EntitySpec) -> dict:
        d = {"position": list(e.position), "velocity": list(e.velocity),
             "antenna_offsets": [list(o) for o in e.antenna_offsets]}
        if e.id is not None:
            d["id"] = e.id
        return d

    doc = {
        "scene_path": c.scene_path,
        "bs_list": [entity_doc(e) for e in c.bs_list],
        "bs_density": c.bs_density,
        "ue_list": [entity_doc(e) for e in c.ue_list],
        "ue_density": c.ue_density,
        "channel_log": c.channel_log,
        "duration": c.duration,
        "step": c.step,
        "scenario_seed": c.scenario_seed,
    }
    if c.mobility.kind == "none":
        doc["mobility"] = None
    elif c.mobility.kind == "external":
        doc["mobility"] = {"kind": "external"}
    else:
        doc["mobility"] = {"kind": "random_waypoint", "speed_min": c.mobility.speed_min,
                           "speed_max": c.mobility.speed_max, "pause": c.mobility.pause}
    if c.channel_log_path is not None:
        doc["channel_log_path"] = c.channel_log_path
    if c.results_path is not None:
        doc["results_path"] = c.results_path
    return doc


# -- scene file ----------------------------------------------------------------

_SCENE_KEYS = {"solids", "surfaces", "active_area", "traversable_area"}
_SOLID_KEYS = {"name", "material", "box", "vertices", "triangles", "quads"}


def _mesh_from_doc(obj: dict, path: str, file: str):
    vertices = _get(obj, "vertices", path, file)
    if not isinstance(vertices, list) or len(vertices) < 3:
        raise ConfigError(file, f"{path}.vertices", "must be a list of at least 3 vertices")
    verts = [_vec3(v, f"{path}.vertices[{i}]", file) for i, v in enumerate(vertices)]

    tris = []
    tri_doc = _get(obj, "triangles", path, file, required=False, default=[])
    quad_doc = _get(obj, "quads", path, file, required=False, default=[])
    for i, t in enumerate(tri_doc):
        if not isinstance(t, list) or len(t) != 3:
            raise ConfigError(file, f"{path}.triangles[{i}]", "must be 3 vertex indices")
        tris.append(tuple(_integer(k, f"{path}.triangles[{i}][{j}]", file, ge=0, lt=len(verts))
                          for j, k in enumerate(t)))
    for i, quad in enumerate(quad_doc):
        if not isinstance(quad, list) or len(quad) != 4:
            raise ConfigError(file, f"{path}.quads[{i}]", "must be 4 vertex indices")
        a, b, c, d = (_integer(k, f"{path}.quads[{i}][{j}]", file, ge=0, lt=len(verts))
                      for j, k in enumerate(quad))
        tris.extend([(a, b, c), (a, c, d)])
    if not tris:
        raise ConfigError(file, path, "mesh has no triangles or quads")
    return np.asarray(verts), np.asarray(tris, dtype=np.int64)


def load_scene(text: str, file: str = "scene") -> Scene:
    """Parse a scene document and build the query-ready Scene."""
    doc = _load_json(text, file)
    _reject_unknown(doc, _SCENE_KEYS, "$", file)

    surfaces = []
    solid_groups = []
    solids_doc = _get(doc, "solids", "$", file, required=False, default=[])
    if not isinstance(solids_doc, list):
        raise ConfigError(file, "$.solids", "must be a list")
    for i, solid in enumerate(solids_doc):
        path = f"$.solids[{i}]"
        if not isinstance(solid, dict):
            raise ConfigError(file, path, "must be an object")
        _reject_unknown(solid, _SOLID_KEYS, path, file)
        material = _get(solid, "material", path, file, required=False, default="")
        if "box" in solid:
            box = _box(solid["box"], f"{path}.box", file)
            verts, tris = triangulate_box(box.lo, box.hi)
        else:
            verts, tris = _mesh_from_doc(solid, path, file)
        group = mesh_surfaces(verts, tris, solid_id=i, material_tag=material)
        solid_groups.append(list(range(len(surfaces), len(surfaces) + len(group))))
        surfaces.extend(group)

    free_doc = _get(doc, "surfaces", "$", file, required=False, default=[])
    if not isinstance(free_doc, list):
        raise ConfigError(file, "$.surfaces", "must be a list")
    for i, mesh in enumerate(free_doc):
        path = f"$.surfaces[{i}]"
        if not isinstance(mesh, dict):
            raise ConfigError(file, path, "must be an object")
        _reject_unknown(mesh, {"vertices", "triangles", "quads", "material"}, path, file)
        material = _get(mesh, "material", path, file, required=False, default="")
        verts, tris = _mesh_from_doc(mesh, path, file)
        surfaces.extend(mesh_surfaces(verts, tris, solid_id=-1, material_tag=material))

    active = _box(_get(doc, "active_area", "$", file), "$.active_area", file)
    traversable = _box(_get(doc, "traversable_area", "$", file), "$.traversable_area", file)
    if not active.contains_box(traversable):
        raise ConfigError(file, "$.traversable_area", "must be contained in active_area")
    return build_scene(surfaces, solid_groups, active, traversable)


# -- materialization -----------------------------------------------------------

_MAX_PLACEMENT_TRIES = 10_000


def materialize_entities(cfg: ScenarioConfig, scene: Scene) -> list[Entity]:
    """Explicit entities plus density-driven random placements.

    Density counts are round(density x traversable footprint area); points
    are drawn uniformly in the traversable box, rejecting positions inside
    solids, from a stream keyed by the scenario seed.  Raises
    :class:`PlacementExhausted` after 10^4 consecutive rejections.
    """
    entities: list[Entity] = []
    used_ids = {e.id for e in cfg.bs_list + cfg.ue_list if e.id is not None}
    next_id = max(used_ids, default=-1) + 1

    def take_id(spec_id):
        nonlocal next_id
        if spec_id is not None:
            return spec_id
        while next_id in used_ids:
            next_id += 1
        used_ids.add(next_id)
        return next_id

    box = scene.traversable_area
    footprint = max(box.extent[0] * box.extent[1], 0.0)

    def place_random(kind: str, count: int):
        gen = rng_mod.stream(cfg.scenario_seed, "place", kind)
        for _ in range(count):
            for attempt in range(_MAX_PLACEMENT_TRIES):
                p = box.lo + gen.random(3) * box.extent
                if not point_inside_solid(scene, p):
                    entities.append(Entity(id=take_id(None), kind=kind, position=p))
                    break
            else:
                raise PlacementExhausted(
                    f"no valid {kind} placement after {_MAX_PLACEMENT_TRIES} tries")

    for spec in cfg.bs_list:
        pos = np.asarray(spec.position)
        if not scene.active_area.contains_point(pos, tol=1e-9):
            raise ConfigError("scenario", "$.bs_list", f"base station at {spec.position} outside active area")
        entities.append(Entity(id=take_id(spec.id), kind="bs", position=pos,
                               velocity=np.asarray(spec.velocity),
                               antenna_offsets=np.asarray(spec.antenna_offsets)))
    place_random("bs", int(round(cfg.bs_density * footprint)))

    for spec in cfg.ue_list:
        pos = np.asarray(spec.position)
        if not np.all((pos > scene.active_area.lo) & (pos < scene.active_area.hi)):
            raise ConfigError("scenario", "$.ue_list", f"user terminal at {spec.position} not inside active area")
        entities.append(Entity(id=take_id(spec.id), kind="ue", position=pos,
                               velocity=np.asarray(spec.velocity),
                               antenna_offsets=np.asarray(spec.antenna_offsets)))
    place_random("ue", int(round(cfg.ue_density * footprint)))

    if not any(e.kind == "bs" for e in entities):
        raise ConfigError("scenario", "$.bs_list", "no base station after materialization")
    if not any(e.kind == "ue" for e in entities):
        raise ConfigError("scenario", "$.ue_list", "no user terminal after materialization")
    return entities


# -- cross-document validation ---------------------------------------------------

@dataclass(frozen=True)
class CrossIssue:
    severity: str   # "error" | "warning"
    message: str
    keys: tuple[str, ...]


def validate_cross(gscm: GscmParams, radio: RadioParams,
                   scenario: ScenarioConfig) -> list[CrossIssue]:
    """Inter-document consistency checks (errors) and smell tests (warnings)."""
    issues: list[CrossIssue] = []
    if gscm.max_link_length is not None and radio.max_path_length > gscm.max_link_length:
        issues.append(CrossIssue(
            "error",
            f"radio.max_path_length ({radio.max_path_length} m) exceeds the "
            f"visibility table cap gscm.max_link_length ({gscm.max_link_length} m); "
            "multi-bounce paths would be silently missing",
            ("radio:$.max_path_length", "gscm:$.max_link_length"),
        ))
    if scenario.step > gscm.fading_coherence_tau:
        issues.append(CrossIssue(
            "warning",
            f"scenario.step ({scenario.step} s) exceeds the fading coherence time "
            f"({gscm.fading_coherence_tau} s); successive fading samples will be "
            "nearly independent",
            ("scenario:$.step", "gscm:$.fading_coherence_tau"),
        ))
    if gscm.observation_distance < radio.max_path_length / 2:
        issues.append(CrossIssue(
            "warning",
            f"gscm.observation_distance ({gscm.observation_distance} m) is short "
            f"relative to radio.max_path_length ({radio.max_path_length} m); the "
            "spawn filter may remove scatterers that path search could still use",
            ("gscm:$.observation_distance", "radio:$.max_path_length"),
        ))
    return issues
