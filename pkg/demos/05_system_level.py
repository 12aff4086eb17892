"""System-level resource models on the discrete-event kernel.

Runs a short scenario entirely in-process: the event kernel steps the
engine in lockstep, collects channel realizations, forms antenna/user
federations with a log-rate utility, trims each federation to the
cheapest antenna subset that still meets SNR targets, accounts for the
energy saved, and plans a wireless-power-transfer burst.
"""

import pathlib

import numpy as np

from lusim.cli import _load_bundle
from lusim.engine import assemble_engine
from lusim.syssim import (
    Activation,
    EnergyModel,
    Simulator,
    UtilityConfig,
    WptConfig,
    allocate_federations,
    compute_snr,
    energy_report,
    select_active_antennas,
    wpt_schedule,
)


class Args:
    data = pathlib.Path(__file__).parent / "data"
    gscm = str(data / "gscm.json")
    radio = str(data / "radio.json")
    scenario = str(data / "scenario.json")


bundle = _load_bundle(Args)
engine = assemble_engine(bundle.gscm, bundle.radio, bundle.scenario, bundle.scene)
radio = bundle.radio
bs_ids = engine.bs_ids
ue_ids = engine.ue_ids[:2]  # focus on the two explicit users
print(f"{len(bs_ids)} antennas serve {len(ue_ids)} users")

sim = Simulator(stepper=engine)
snapshots = []


def collect(sim):
    channels = {(a, u): engine.get_channel(a, u) for a in bs_ids for u in ue_ids}
    snapshots.append((sim.now, channels))


for k in range(1, 6):
    sim.schedule(k * bundle.scenario.step, collect)
sim.run_until(0.5)
print(f"kernel processed {len(snapshots)} collection events in lockstep "
      f"({sum(1 for e in sim.trace if e[0] == 'step_to')} engine steps)")

t, channels = snapshots[-1]
feds = allocate_federations(ue_ids, bs_ids, channels, UtilityConfig(radio=radio))
for fed in feds:
    ue = next(iter(fed.ue_ids))
    snr_db = 10 * np.log10(compute_snr(ue, fed, channels, radio))
    print(f"  federation for UE {ue}: antennas {sorted(fed.antenna_ids)}, "
          f"SNR {snr_db:.1f} dB, utility {fed.utility:.2f}")

# energy management: drop antennas that aren't needed for the SNR targets
model = EnergyModel(p_fixed_per_antenna=10.0, p_tx_per_antenna=5.0)
window = 1.0
for fed in feds:
    ue = next(iter(fed.ue_ids))
    target = 0.25 * compute_snr(ue, fed, channels, radio)
    sel = select_active_antennas(fed, {ue: target}, channels, radio)
    full = energy_report(model, [Activation(a, 0.0, window) for a in fed.antenna_ids], 0.0, window)
    trimmed = energy_report(model, [Activation(a, 0.0, window) for a in sel.active], 0.0, window)
    print(f"  UE {ue}: {len(sel.active)}/{len(fed.antenna_ids)} antennas active, "
          f"{full - trimmed:.0f} J/s saved{' (infeasible)' if sel.infeasible else ''}")

# wireless power transfer: pick the most efficient charging federation
wpt = WptConfig(rectifier_efficiency=0.5, wpt_power={a: 2.0 for a in bs_ids})
targets = {u: 1e-9 for u in ue_ids[:2]}  # joules to harvest
candidates = [type(feds[0])(set(bs_ids), set(targets)),
              type(feds[0])({bs_ids[0]}, set(targets)),
              type(feds[0])(set(bs_ids[:2]), set(targets))]
plan = wpt_schedule(targets, candidates, channels, wpt, model)
print(f"WPT: candidate {plan.federation_index} chosen "
      f"(antennas {sorted(plan.federation.antenna_ids)}), "
      f"burst {plan.duration * 1e3:.2f} ms, end-to-end efficiency {plan.efficiency:.2e}")
