"""Run-time channel computation.

For a transmitter/receiver pair this module enumerates every propagation
path (line of sight plus 1..3 scatterer bounces), evaluates average path
gains from a log-distance law with exponential angular scattering decay,
evolves per-path Gamma shadow fading through a Gaussian copula, and
synthesizes the complex frequency response tensor over the configured FFT
grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammainc, gammaincinv, ndtr, ndtri

from . import rng
from .geometry import Scene, as_vec3, segment_visible, segments_visible
from .gscm import MpcSet, VisibilityLut

C_LIGHT = 299_792_458.0  # m/s, exact


@dataclass(frozen=True)
class RadioParams:
    """Radio and synthesis parameters.

    ``fft_bins`` must be a power of two; the frequency grid is baseband,
    centered on the carrier.  ``max_path_length`` bounds path search,
    ``pathloss_exponent`` and ``reference_distance`` parameterize the
    log-distance law for scattered paths.
    """

    carrier_frequency: float
    bandwidth: float
    fft_bins: int
    tx_power: float
    noise_power: float
    max_path_length: float
    pathloss_exponent: float
    reference_distance: float = 1.0
    max_bounce_order: int = 3

    def __post_init__(self):
        n = self.fft_bins
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError("fft_bins must be a power of two >= 2")
        if not (0 < self.bandwidth < self.carrier_frequency):
            raise ValueError("bandwidth must be positive and below the carrier frequency")
        if self.max_path_length <= 0:
            raise ValueError("max_path_length must be > 0")
        if self.max_bounce_order not in (1, 2, 3):
            raise ValueError("max_bounce_order must be 1, 2 or 3")

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.carrier_frequency

    @property
    def bin_frequencies(self) -> np.ndarray:
        """Baseband offsets f_n = (n - N/2) * B / N for n = 0..N-1."""
        n = self.fft_bins
        return (np.arange(n) - n / 2) * (self.bandwidth / n)


@dataclass
class Entity:
    """A base station or user terminal with one or more antenna elements."""

    id: int
    kind: str  # "bs" | "ue"
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    antenna_offsets: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))

    def __post_init__(self):
        if self.kind not in ("bs", "ue"):
            raise ValueError(f"entity kind must be 'bs' or 'ue', got {self.kind!r}")
        self.position = as_vec3(self.position)
        self.velocity = as_vec3(self.velocity)
        self.antenna_offsets = np.asarray(self.antenna_offsets, dtype=np.float64).reshape(-1, 3)
        if len(self.antenna_offsets) == 0:
            raise ValueError("entity needs at least one antenna")

    @property
    def antenna_positions(self) -> np.ndarray:
        return self.position + self.antenna_offsets

    @property
    def n_antennas(self) -> int:
        return len(self.antenna_offsets)


# -- shadow fading -------------------------------------------------------------


def gamma_multiplier(latent, shape: float):
    """Map a standard-normal latent to a Gamma(shape, 1/shape) multiplier.

    The copula transform keeps the marginal exactly Gamma with unit mean
    and variance 1/shape.
    """
    return gammaincinv(shape, ndtr(latent)) / shape


def _unit_mean_latent(shape: float) -> float:
    # latent value whose Gamma image is exactly 1 (the nominal mean)
    return float(ndtri(gammainc(shape, shape)))


@dataclass
class FadingState:
    """AR(1) latent state of one path's Gamma shadow-fading process."""

    latent: float
    last_update: float
    shape: float
    coherence_tau: float
    key: int = 0        # stream key for counter-addressed innovations
    counter: int = 0    # innovations consumed so far

    @classmethod
    def fresh(cls, shape: float, coherence_tau: float, key: int = 0,
              time: float = 0.0) -> "FadingState":
        """State whose multiplier starts at the nominal mean (X = 1)."""
        return cls(latent=_unit_mean_latent(shape), last_update=time,
                   shape=shape, coherence_tau=coherence_tau, key=key)

    @property
    def multiplier(self) -> float:
        return float(gamma_multiplier(self.latent, self.shape))


def fading_key(spawn_seed: int, tx_id: int, rx_id: int, hops) -> int:
    """Per-path innovation stream key; hop order does not matter."""
    return rng.key_of(spawn_seed, "fade", tx_id, rx_id, *sorted(hops))


def fading_keys_for_group(spawn_seed: int, tx_id: int, rx_id: int,
                          hop_ids: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fading_key` over the rows of a hop-id array."""
    base = rng.key_of(spawn_seed, "fade", tx_id, rx_id)
    return rng.fold_keys(base, np.sort(hop_ids, axis=1))


def update_fading(state: FadingState, dt: float, rng_stream=None) -> tuple[FadingState, float]:
    """Advance the latent by dt and return (new state, multiplier X).

    latent' = rho * latent + sqrt(1 - rho^2) * z with rho = exp(-dt/tau);
    dt = 0 leaves the state untouched and consumes no innovation.  ``z``
    comes from ``rng_stream`` when given, else from the state's keyed
    counter stream.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0:
        return state, state.multiplier
    rho = float(np.exp(-dt / state.coherence_tau))
    if rng_stream is not None:
        z = float(rng_stream.standard_normal())
        counter = state.counter
    else:
        z = float(rng.normals_at(state.key, np.array([state.counter]))[0])
        counter = state.counter + 1
    latent = rho * state.latent + np.sqrt(1.0 - rho * rho) * z
    new = replace(state, latent=float(latent), last_update=state.last_update + dt,
                  counter=counter)
    return new, new.multiplier


# -- path chains ---------------------------------------------------------------


@dataclass(frozen=True)
class PathChain:
    """One enumerated propagation path; hops is empty for line of sight."""

    hops: tuple[int, ...]
    total_length: float
    delay: float
    hop_angles: tuple[float, ...]
    avg_gain: float
    doppler: float
    fading_state: FadingState | None = None

    @property
    def n_bounces(self) -> int:
        return len(self.hops)


@dataclass(frozen=True)
class PathGroup:
    """Paths of one bounce count in column form (engine hot path)."""

    hop_ids: np.ndarray   # (m, k) int64
    total: np.ndarray     # (m,) meters, at entity reference positions
    angles: np.ndarray    # (m, k) radians
    gains: np.ndarray     # (m,) linear average gains
    doppler: np.ndarray   # (m,) Hz

    def __len__(self) -> int:
        return len(self.total)

    @property
    def bounces(self) -> int:
        return self.hop_ids.shape[1]


class ChannelRealization:
    """H tensor plus its contributing paths.

    The per-path summary list can be supplied directly or built lazily
    from a factory, so bulk consumers that only need H skip the cost of
    materializing path objects.
    """

    def __init__(self, tx_id: int, rx_id: int, timestamp: float, h: np.ndarray,
                 paths: list[PathChain] | None = None, path_factory=None):
        self.tx_id = tx_id
        self.rx_id = rx_id
        self.timestamp = timestamp
        self.h = h
        self._paths = paths
        self._path_factory = path_factory

    @property
    def paths(self) -> list[PathChain]:
        if self._paths is None:
            self._paths = self._path_factory() if self._path_factory else []
        return self._paths


def _chain_geometry(tx_pos: np.ndarray, rx_pos: np.ndarray, hop_ids: np.ndarray,
                    mpcs: MpcSet):
    """Segment lengths, total length and specular-deviation angles.

    ``hop_ids`` is (m, k); returns (total (m,), seg_len (m, k+1),
    angles (m, k), first_dir (m, 3), last_dir (m, 3)).
    """
    m, k = hop_ids.shape
    nodes = np.empty((m, k + 2, 3))
    nodes[:, 0] = tx_pos
    nodes[:, 1:-1] = mpcs.positions[hop_ids]
    nodes[:, -1] = rx_pos
    seg = np.diff(nodes, axis=1)
    seg_len = np.linalg.norm(seg, axis=2)
    dirs = seg / seg_len[..., None]
    total = seg_len.sum(axis=1)

    if k:
        normals = mpcs.normals[hop_ids]
        d_in = dirs[:, :-1]
        d_out = dirs[:, 1:]
        dot = np.einsum("mkj,mkj->mk", d_in, normals)
        refl = d_in - 2.0 * dot[..., None] * normals
        cosang = np.clip(np.einsum("mkj,mkj->mk", refl, d_out), -1.0, 1.0)
        angles = np.arccos(cosang)
    else:
        angles = np.zeros((m, 0))
    return total, seg_len, angles, dirs[:, 0], dirs[:, -1]


def _average_gains(total: np.ndarray, angles: np.ndarray, hop_ids: np.ndarray,
                   mpcs: MpcSet, radio: RadioParams) -> np.ndarray:
    if hop_ids.shape[1] == 0:
        return (radio.wavelength / (4.0 * np.pi * total)) ** 2
    dist = (radio.reference_distance / total) ** radio.pathloss_exponent
    scatter = np.prod(mpcs.g0[hop_ids] * np.exp(-mpcs.xi[hop_ids] * angles), axis=1)
    return dist * scatter


def path_average_gain(chain: PathChain, mpcs: MpcSet, radio: RadioParams) -> float:
    """Friis gain for LOS; log-distance law times per-hop angular decay
    otherwise."""
    if not chain.hops:
        return float((radio.wavelength / (4.0 * np.pi * chain.total_length)) ** 2)
    dist = (radio.reference_distance / chain.total_length) ** radio.pathloss_exponent
    scatter = 1.0
    for hop, theta in zip(chain.hops, chain.hop_angles):
        scatter *= mpcs.g0[hop] * np.exp(-mpcs.xi[hop] * theta)
    return float(dist * scatter)


def doppler_shift(chain: PathChain, tx: Entity, rx: Entity, radio: RadioParams,
                  mpcs: MpcSet | None = None) -> float:
    """Doppler from endpoint motion; scatterers are static.

    f_D = (v_tx . e_first - v_rx . e_last) / wavelength, where e_first is
    the unit direction of the segment leaving tx and e_last the unit
    direction of the segment arriving at rx.
    """
    if chain.hops:
        if mpcs is None:
            raise ValueError("bounce chains need the MPC set for hop positions")
        first = mpcs.positions[chain.hops[0]]
        last = mpcs.positions[chain.hops[-1]]
    else:
        first = rx.position
        last = tx.position
    e_first = first - tx.position
    e_first = e_first / np.linalg.norm(e_first)
    e_last = rx.position - last
    e_last = e_last / np.linalg.norm(e_last)
    return float((tx.velocity @ e_first - rx.velocity @ e_last) / radio.wavelength)


def entity_mpc_visibility(scene: Scene, mpcs: MpcSet, entity: Entity):
    """(visible, distance) of every MPC from an entity's reference position."""
    n = len(mpcs)
    pos = mpcs.positions
    d = np.linalg.norm(pos - entity.position, axis=1)
    ok = d > 0
    vis = np.zeros(n, dtype=bool)
    if ok.any():
        vis[ok] = segments_visible(scene, np.broadcast_to(entity.position, (int(ok.sum()), 3)),
                                   pos[ok])
    return vis, d


def _bounce_groups(scene: Scene, mpcs: MpcSet, lut: VisibilityLut | None,
                   tx: Entity, rx: Entity, radio: RadioParams,
                   tx_vis=None, rx_vis=None) -> dict[int, np.ndarray]:
    """Hop-id arrays per bounce count, visibility- and length-pruned."""
    n = len(mpcs)
    groups: dict[int, np.ndarray] = {}
    if n == 0 or radio.max_bounce_order < 1:
        return groups
    l_max = radio.max_path_length

    vis_tx, d_tx = tx_vis if tx_vis is not None else entity_mpc_visibility(scene, mpcs, tx)
    vis_rx, d_rx = rx_vis if rx_vis is not None else entity_mpc_visibility(scene, mpcs, rx)

    one = np.flatnonzero(vis_tx & vis_rx & (d_tx + d_rx <= l_max))
    if one.size:
        groups[1] = one[:, None]

    if radio.max_bounce_order >= 2 and lut is not None and len(lut):
        src, dst, d_link = lut.directed_edges()
        keep = (vis_tx[src] & vis_rx[dst]
                & (d_tx[src] + d_link + d_rx[dst] <= l_max))
        if keep.any():
            groups[2] = np.column_stack([src[keep], dst[keep]])

        if radio.max_bounce_order >= 3:
            triples = []
            for j in range(n):
                nbrs, nd = lut.neighbors(j)
                if nbrs.size == 0:
                    continue
                in_ok = vis_tx[nbrs]
                out_ok = vis_rx[nbrs]
                if not in_ok.any() or not out_ok.any():
                    continue
                head = d_tx[nbrs[in_ok]] + nd[in_ok]
                tail = nd[out_ok] + d_rx[nbrs[out_ok]]
                fits = head[:, None] + tail[None, :] <= l_max
                ii, kk = np.nonzero(fits)
                if ii.size:
                    triples.append(np.column_stack([
                        nbrs[in_ok][ii], np.full(ii.size, j, dtype=np.int64), nbrs[out_ok][kk]
                    ]))
            if triples:
                groups[3] = np.concatenate(triples)
    return groups


def enumerate_path_groups(scene: Scene, mpcs: MpcSet, lut: VisibilityLut | None,
                          tx: Entity, rx: Entity, radio: RadioParams,
                          tx_vis=None, rx_vis=None, los=None) -> list[PathGroup]:
    """Column-form path enumeration, one group per bounce count.

    Groups come out in ascending bounce count, rows sorted by
    (total length, hop ids); the flattened sequence is exactly the
    ordering contract of :func:`enumerate_paths`.  ``tx_vis``/``rx_vis``
    and ``los`` accept precomputed visibility results so a caller stepping
    many pairs can batch the ray casts.
    """
    groups: list[PathGroup] = []
    d_los = float(np.linalg.norm(rx.position - tx.position))
    los_clear = los if los is not None else (
        d_los > 0 and segment_visible(scene, tx.position, rx.position))
    if 0 < d_los <= radio.max_path_length and los_clear:
        e = (rx.position - tx.position) / d_los
        doppler = float((tx.velocity @ e - rx.velocity @ e) / radio.wavelength)
        groups.append(PathGroup(
            hop_ids=np.zeros((1, 0), dtype=np.int64),
            total=np.array([d_los]),
            angles=np.zeros((1, 0)),
            gains=np.array([(radio.wavelength / (4.0 * np.pi * d_los)) ** 2]),
            doppler=np.array([doppler]),
        ))

    bounce = _bounce_groups(scene, mpcs, lut, tx, rx, radio, tx_vis=tx_vis, rx_vis=rx_vis)
    for k, hop_ids in sorted(bounce.items()):
        total, _, angles, first_dir, last_dir = _chain_geometry(
            tx.position, rx.position, hop_ids, mpcs)
        gains = _average_gains(total, angles, hop_ids, mpcs, radio)
        doppler = (first_dir @ tx.velocity - last_dir @ rx.velocity) / radio.wavelength
        order = np.lexsort(tuple(hop_ids[:, c] for c in reversed(range(k))) + (total,))
        groups.append(PathGroup(hop_ids=hop_ids[order], total=total[order],
                                angles=angles[order], gains=gains[order],
                                doppler=doppler[order]))
    return groups


def chains_from_groups(groups: list[PathGroup],
                       fading_states: list | None = None) -> list[PathChain]:
    """Materialize PathChain objects from column groups."""
    chains: list[PathChain] = []
    state_groups = fading_states if fading_states is not None else [None] * len(groups)
    for group, states in zip(groups, state_groups):
        for i in range(len(group)):
            chains.append(PathChain(
                hops=tuple(int(hid) for hid in group.hop_ids[i]),
                total_length=float(group.total[i]),
                delay=float(group.total[i]) / C_LIGHT,
                hop_angles=tuple(float(a) for a in group.angles[i]),
                avg_gain=float(group.gains[i]),
                doppler=float(group.doppler[i]),
                fading_state=None if states is None else states[i],
            ))
    return chains


def enumerate_paths(scene: Scene, mpcs: MpcSet, lut: VisibilityLut | None,
                    tx: Entity, rx: Entity, radio: RadioParams) -> list[PathChain]:
    """All propagation chains between two entities, shortest first.

    Output contains the LOS chain when the direct segment is clear, plus
    every 1..max_bounce_order chain whose hops are mutually linked in the
    LUT, endpoint-visible (checked by live ray casts) and within
    ``max_path_length``.  Ordering is by (bounce count, total length,
    hop ids).
    """
    return chains_from_groups(enumerate_path_groups(scene, mpcs, lut, tx, rx, radio))


def _groups_from_chains(paths: list[PathChain]):
    by_bounce: dict[int, list[PathChain]] = {}
    for p in paths:
        by_bounce.setdefault(len(p.hops), []).append(p)
    groups, xs = [], []
    for k in sorted(by_bounce):
        chains = by_bounce[k]
        groups.append(PathGroup(
            hop_ids=np.array([c.hops for c in chains], dtype=np.int64).reshape(len(chains), k),
            total=np.array([c.total_length for c in chains]),
            angles=np.array([c.hop_angles for c in chains]).reshape(len(chains), k),
            gains=np.array([c.avg_gain for c in chains]),
            doppler=np.array([c.doppler for c in chains]),
        ))
        xs.append(np.array([c.fading_state.multiplier if c.fading_state is not None else 1.0
                            for c in chains]))
    return groups, xs


def synthesize_from_groups(groups: list[PathGroup], x_groups: list[np.ndarray],
                           tx: Entity, rx: Entity, mpcs: MpcSet, radio: RadioParams,
                           time: float, trusted_geometry: bool = False) -> np.ndarray:
    """H tensor from column-form paths and their fading multipliers.

    Per antenna pair the first and last segment of every chain are
    recomputed from the element positions (interior hops shared).  With
    ``trusted_geometry`` and single centered antennas the recompute is
    skipped: the stored columns are bit-identical to it by construction.

    The bin sweep exp(-2j pi tau f_n) is evaluated as a geometric
    progression per path (two exps plus a cumulative product), which cuts
    the transcendental count by the bin count.
    """
    n_rx, n_tx = rx.n_antennas, tx.n_antennas
    nbins = radio.fft_bins
    h = np.zeros((n_rx, n_tx, nbins), dtype=np.complex128)
    f0 = float(radio.bin_frequencies[0])
    df = radio.bandwidth / nbins
    lam = radio.wavelength
    tx_el = tx.antenna_positions
    rx_el = rx.antenna_positions
    centered = (n_rx == 1 and n_tx == 1
                and not tx.antenna_offsets.any() and not rx.antenna_offsets.any())

    for group, x in zip(groups, x_groups):
        if len(group) == 0:
            continue
        for q in range(n_rx):
            for p in range(n_tx):
                if trusted_geometry and centered:
                    total, gains = group.total, group.gains
                else:
                    total, _, angles, _, _ = _chain_geometry(
                        tx_el[p], rx_el[q], group.hop_ids, mpcs)
                    gains = _average_gains(total, angles, group.hop_ids, mpcs, radio)
                amp = np.sqrt(gains * x)
                tau = total / C_LIGHT
                phase0 = (-2.0 * np.pi) * (total / lam + tau * f0) \
                    + (2.0 * np.pi * time) * group.doppler
                base = amp * np.exp(1j * phase0)
                ratio = np.exp((-2j * np.pi * df) * tau)
                m = len(total)
                e = np.empty((m, nbins), dtype=np.complex128)
                e[:, 0] = base
                if nbins > 1:
                    np.cumprod(np.broadcast_to(ratio[:, None], (m, nbins - 1)),
                               axis=1, out=e[:, 1:])
                    e[:, 1:] *= base[:, None]
                h[q, p] += e.sum(axis=0)
    return h


def synthesize_channel(paths: list[PathChain], tx: Entity, rx: Entity, mpcs: MpcSet,
                       radio: RadioParams, time: float) -> ChannelRealization:
    """Complex frequency response over all antenna pairs.

    Per antenna pair the first and last segment of every chain are
    recomputed from the element positions (interior hops shared); each
    path contributes amplitude sqrt(avg_gain * X) with carrier-distance
    phase and a Doppler phase advance, mapped onto the baseband bin grid
    through its delay.
    """
    paths = list(paths)
    if paths:
        groups, xs = _groups_from_chains(paths)
        h = synthesize_from_groups(groups, xs, tx, rx, mpcs, radio, time)
    else:
        h = np.zeros((rx.n_antennas, tx.n_antennas, radio.fft_bins), dtype=np.complex128)
    return ChannelRealization(tx_id=tx.id, rx_id=rx.id, timestamp=time, h=h, paths=paths)
