"""Channel computation: path enumeration, gains, fading and H synthesis.

Enumerates LOS and bounce paths for one link, shows the gain law at work,
evolves the Gamma shadow fading of a path, and synthesizes the complex
frequency response whose inverse FFT exposes the path delays as taps.
"""

import pathlib

import numpy as np

from lusim.channel import (
    C_LIGHT,
    Entity,
    FadingState,
    enumerate_paths,
    synthesize_channel,
    update_fading,
)
from lusim.config import load_scene, parse_gscm_config, parse_radio_config
from lusim.engine import prepare_mpcs
from lusim.gscm import build_lut

data = pathlib.Path(__file__).parent / "data"
scene = load_scene((data / "scene.json").read_text())
gscm = parse_gscm_config((data / "gscm.json").read_text())
radio = parse_radio_config((data / "radio.json").read_text())

_, mpcs = prepare_mpcs(scene, gscm)
lut = build_lut(scene, mpcs, radio.max_path_length)
tx = Entity(id=0, kind="bs", position=np.array([18.5, 42.1, 24.0]))
rx = Entity(id=10, kind="ue", position=np.array([40.0, 90.0, 1.5]),
            velocity=np.array([1.0, 0.0, 0.0]))

paths = enumerate_paths(scene, mpcs, lut, tx, rx, radio)
by_order = {k: sum(1 for p in paths if len(p.hops) == k) for k in (0, 1, 2)}
print(f"link 0 -> 10: {len(paths)} paths "
      f"(LOS: {by_order[0]}, 1-bounce: {by_order[1]}, 2-bounce: {by_order[2]})")
strongest = max(paths, key=lambda p: p.avg_gain)
print(f"strongest path: hops {strongest.hops}, {strongest.total_length:.1f} m, "
      f"{10 * np.log10(strongest.avg_gain):.1f} dB, doppler {strongest.doppler:+.1f} Hz")

# Gamma shadow fading: unit mean, variance 1/chi, exponential correlation
state = FadingState.fresh(shape=gscm.gamma_shape_chi, coherence_tau=gscm.fading_coherence_tau, key=123)
xs = []
for _ in range(5000):
    state, x = update_fading(state, gscm.fading_coherence_tau)
    xs.append(x)
print(f"fading multiplier over 5000 coherence steps: mean {np.mean(xs):.3f}, "
      f"var {np.var(xs):.3f} (expect 1.000 / {1 / gscm.gamma_shape_chi:.3f})")

real = synthesize_channel(paths, tx, rx, mpcs, radio, time=0.0)
h = real.h[0, 0]
print(f"H: {real.h.shape} complex bins, mean power {np.mean(np.abs(h) ** 2):.3e}")

taps = np.abs(np.fft.ifft(h)) ** 2
peak = int(np.argmax(taps))
first = paths[0]
print(f"strongest tap at bin {peak}; shortest path delay {first.delay * 1e9:.1f} ns "
      f"maps to bin {round(first.delay * radio.bandwidth)}")

parseval_lhs = np.sum(np.abs(h) ** 2) / radio.fft_bins
parseval_rhs = np.sum(taps)
print(f"Parseval check: {parseval_lhs:.6e} vs {parseval_rhs:.6e}")
