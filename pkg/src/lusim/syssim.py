"""Discrete-event system simulator on top of the channel engine.

The kernel owns simulation time: events pop in (time, insertion order)
and, before the first event at a new timestamp is dispatched, the engine
is stepped to that time and the confirmation awaited.  On this substrate
sit the resource models: federation formation via a utility function,
energy-aware antenna subset selection, energy accounting, and wireless
power transfer planning.

The SNR abstraction is a coherent-combining upper bound: per (antenna,
user) the bin- and element-averaged |H|^2 scaled by transmit and noise
power; link-level precoding is out of scope.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from .channel import RadioParams
from .errors import MissingChannel, TimeRegression, Unchargeable


# -- channel statistics ---------------------------------------------------------


def mean_gain(channels, antenna_id: int, ue_id: int) -> float:
    """Bin- and element-averaged |H|^2 for one (antenna, user) link."""
    real = channels.get((antenna_id, ue_id))
    if real is None:
        raise MissingChannel(f"no channel for antenna {antenna_id}, user {ue_id}")
    h = real.h if hasattr(real, "h") else real
    return float(np.mean(np.abs(h) ** 2))


def compute_snr(ue_id: int, federation: "Federation", channels,
                radio: RadioParams) -> float:
    """Coherent-combining upper-bound SNR of one user in a federation."""
    total = sum(mean_gain(channels, a, ue_id) for a in sorted(federation.antenna_ids))
    return radio.tx_power * total / radio.noise_power


# -- events --------------------------------------------------------------------


@dataclass(frozen=True)
class Processed:
    time: float
    seq: int
    event: object


class Simulator:
    """Event kernel in lockstep with an engine stepper.

    ``stepper`` needs a single method ``step_to(t) -> confirmed time``
    (the UDP client and the in-process engine both qualify).  Events are
    any payload; callables are invoked with the simulator instance.
    """

    def __init__(self, stepper=None, results_path=None):
        self.now = 0.0
        self.stepper = stepper
        self._heap: list[tuple[float, int, object]] = []
        self._seq = 0
        self._stepped_to = None
        self.trace: list[tuple] = []
        self._results = open(results_path, "w", encoding="utf-8") if results_path else None

    def close(self):
        if self._results:
            self._results.close()
            self._results = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def emit(self, kind: str, **payload):
        """One JSON-lines result record stamped with simulation time."""
        if self._results:
            record = {"time": self.now, "kind": kind, **payload}
            self._results.write(json.dumps(record, sort_keys=True) + "\n")
            self._results.flush()

    def schedule(self, time: float, event) -> int:
        if time < self.now:
            raise TimeRegression(f"cannot schedule at {time} before current time {self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, event))
        return self._seq

    def run_until(self, t_end: float) -> list[Processed]:
        """Process events up to and including t_end, in lockstep."""
        processed = []
        while self._heap and self._heap[0][0] <= t_end:
            time, seq, event = heapq.heappop(self._heap)
            if time > self.now or self._stepped_to is None:
                self._step_engine(time)
            self.now = time
            self.trace.append(("dispatch", time, seq))
            if callable(event):
                event(self)
            processed.append(Processed(time, seq, event))
        self.now = t_end
        return processed

    def _step_engine(self, t: float):
        self.trace.append(("step_to", t))
        if self.stepper is not None:
            confirmed = self.stepper.step_to(t)
            self.trace.append(("step_done", confirmed))
        else:
            self.trace.append(("step_done", t))
        self._stepped_to = t


# -- federations -----------------------------------------------------------------


@dataclass
class Federation:
    antenna_ids: set[int]
    ue_ids: set[int]
    utility: float = 0.0


@dataclass(frozen=True)
class UtilityConfig:
    """Configuration of the federation utility U(f) = scale * sum log(1+SNR)."""

    radio: RadioParams
    demands: dict[int, float] = field(default_factory=dict)
    utility_scale: float = 1.0

    def demand(self, ue_id: int) -> float:
        return self.demands.get(ue_id, 1.0)


def federation_utility(fed: Federation, channels, cfg: UtilityConfig) -> float:
    u = 0.0
    for ue in sorted(fed.ue_ids):
        u += np.log1p(compute_snr(ue, fed, channels, cfg.radio))
    return cfg.utility_scale * float(u)


def allocate_federations(ues, antennas, channels, cfg: UtilityConfig) -> list[Federation]:
    """Greedy federation formation.

    Users are seeded in descending demand order, each with its best
    remaining antenna; the remaining antennas then go one at a time to
    the federation with the largest marginal utility gain, or stay idle
    when every marginal gain is non-positive.  Deterministic: ties break
    to the lowest antenna id, then the lowest federation index.
    """
    ues = sorted(ues)
    antennas = sorted(antennas)
    if not ues or not antennas:
        raise ValueError("need at least one user and one antenna")

    remaining = list(antennas)
    feds: list[Federation] = []
    for ue in sorted(ues, key=lambda u: (-cfg.demand(u), u)):
        if not remaining:
            break
        best = max(remaining, key=lambda a: (mean_gain(channels, a, ue), -a))
        remaining.remove(best)
        feds.append(Federation(antenna_ids={best}, ue_ids={ue}))

    while remaining:
        best_gain = -np.inf
        best_pick = None
        # scan order (antenna asc, federation asc) + strict > keeps the
        # lowest-id winner on exact ties
        for a in remaining:
            for fi, fed in enumerate(feds):
                with_a = Federation(fed.antenna_ids | {a}, fed.ue_ids)
                gain = (federation_utility(with_a, channels, cfg)
                        - federation_utility(fed, channels, cfg))
                if gain > best_gain:
                    best_gain = gain
                    best_pick = (a, fi)
        if best_pick is None or best_gain <= 0:
            break
        a, fi = best_pick
        feds[fi].antenna_ids.add(a)
        remaining.remove(a)

    for fed in feds:
        fed.utility = federation_utility(fed, channels, cfg)
    return feds


# -- antenna subset selection --------------------------------------------------------


@dataclass(frozen=True)
class AntennaSelection:
    active: tuple[int, ...]
    infeasible: bool


def select_active_antennas(federation: Federation, snr_targets: dict[int, float],
                           channels, radio: RadioParams) -> AntennaSelection:
    """Shortest gain-sorted antenna prefix meeting every user's SNR target.

    Antennas are ordered by total contributed mean gain (descending, ties
    to the lowest id); at least one antenna always stays active.  If even
    the full set misses a target the whole set is returned with the
    infeasible flag raised.
    """
    order = sorted(
        federation.antenna_ids,
        key=lambda a: (-sum(mean_gain(channels, a, u) for u in sorted(federation.ue_ids)), a),
    )

    def feasible(prefix) -> bool:
        fed = Federation(set(prefix), federation.ue_ids)
        return all(compute_snr(u, fed, channels, radio) >= snr_targets.get(u, 0.0)
                   for u in sorted(federation.ue_ids))

    for size in range(1, len(order) + 1):
        if feasible(order[:size]):
            return AntennaSelection(tuple(order[:size]), infeasible=False)
    return AntennaSelection(tuple(order), infeasible=True)


# -- energy ---------------------------------------------------------------------------


@dataclass
class EnergyModel:
    p_fixed_per_antenna: float
    p_tx_per_antenna: float
    energy_accumulator: float = 0.0

    def __post_init__(self):
        if self.p_fixed_per_antenna < 0 or self.p_tx_per_antenna < 0:
            raise ValueError("powers must be >= 0")


@dataclass(frozen=True)
class Activation:
    antenna_id: int
    start: float
    end: float
    tx_fraction: float = 1.0


def energy_report(model: EnergyModel, activations, t0: float, t1: float) -> float:
    """Total energy over the window; adds into the model's accumulator."""
    total = 0.0
    for act in activations:
        if act.start < t0 - 1e-12 or act.end > t1 + 1e-12:
            raise ValueError(f"activation [{act.start}, {act.end}] outside [{t0}, {t1}]")
        if act.end < act.start:
            raise ValueError("activation interval reversed")
        power = model.p_fixed_per_antenna + model.p_tx_per_antenna * act.tx_fraction
        total += power * (act.end - act.start)
    model.energy_accumulator += total
    return total


# -- wireless power transfer ------------------------------------------------------------


@dataclass(frozen=True)
class WptConfig:
    rectifier_efficiency: float
    wpt_power: dict[int, float]   # antenna id -> radiated power (W)

    def __post_init__(self):
        if not (0 < self.rectifier_efficiency <= 1):
            raise ValueError("rectifier efficiency must be in (0, 1]")


@dataclass(frozen=True)
class WptPlan:
    federation_index: int
    federation: Federation
    duration: float
    harvested_power: dict[int, float]
    consumed_power: float
    efficiency: float


def wpt_schedule(device_targets: dict[int, float], candidate_federations,
                 channels, wpt_cfg: WptConfig, energy_model: EnergyModel) -> WptPlan:
    """Pick the candidate federation that charges the devices most efficiently.

    Harvested power per device u is eta * sum over federation antennas of
    p_wpt * mean gain; the chosen candidate maximizes total harvested over
    consumed power (ties to the lowest candidate index).  The plan runs
    until the slowest device reaches its target.
    """
    if not candidate_federations:
        raise ValueError("need at least one candidate federation")
    best = None
    for index, fed in enumerate(candidate_federations):
        harvested = {}
        for u, target in sorted(device_targets.items()):
            p = wpt_cfg.rectifier_efficiency * sum(
                wpt_cfg.wpt_power.get(a, 0.0) * mean_gain(channels, a, u)
                for a in sorted(fed.antenna_ids))
            harvested[u] = p
        if any(p == 0.0 and device_targets[u] > 0 for u, p in harvested.items()):
            continue
        consumed = sum(energy_model.p_fixed_per_antenna + wpt_cfg.wpt_power.get(a, 0.0)
                       for a in fed.antenna_ids)
        efficiency = sum(harvested.values()) / consumed
        if best is None or efficiency > best.efficiency:
            duration = max((device_targets[u] / p for u, p in harvested.items()
                            if device_targets[u] > 0), default=0.0)
            best = WptPlan(index, fed, duration, harvested, consumed, efficiency)
    if best is None:
        raise Unchargeable("every candidate leaves some device with zero harvested power")
    return best
