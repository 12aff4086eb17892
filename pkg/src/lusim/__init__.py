"""lusim: an end-to-end cell-free radio network simulator.

Layers, bottom up:

* :mod:`lusim.geometry` -- triangle scenes and deterministic ray casting
* :mod:`lusim.gscm` -- scatterer spawning, filtering and visibility tables
* :mod:`lusim.channel` -- path enumeration, fading and H synthesis
* :mod:`lusim.config` -- the three JSON documents and the scene file
* :mod:`lusim.engine` -- lockstep simulation state
* :mod:`lusim.link` -- wire protocol, relay proxy and channel log
* :mod:`lusim.syssim` -- discrete events, federations, energy, power transfer
* :mod:`lusim.cli` -- validate / spawn / run / serve / export
"""

__version__ = "0.1.0"

from .channel import (
    C_LIGHT,
    ChannelRealization,
    Entity,
    FadingState,
    PathChain,
    RadioParams,
    doppler_shift,
    enumerate_paths,
    path_average_gain,
    synthesize_channel,
    update_fading,
)
from .engine import Engine, assemble_engine
from .geometry import (
    Aabb,
    RayHit,
    Scene,
    Surface,
    batch_visibility,
    build_scene,
    point_inside_solid,
    ray_cast,
    segment_visible,
)
from .gscm import (
    GscmParams,
    Mpc,
    MpcSet,
    VisibilityLut,
    associate_surfaces,
    build_lut,
    filter_mpcs,
    fit_mpc_parameters,
    load_spawn,
    save_spawn,
    spawn_mpcs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
