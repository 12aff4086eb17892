import itertools

import numpy as np
import pytest
from scipy import stats

from lusim.channel import (
    C_LIGHT,
    ChannelRealization,
    Entity,
    FadingState,
    PathChain,
    RadioParams,
    doppler_shift,
    enumerate_paths,
    fading_key,
    gamma_multiplier,
    path_average_gain,
    synthesize_channel,
    update_fading,
)
from lusim.geometry import Aabb, build_scene, mesh_surfaces, segment_visible
from lusim.gscm import build_lut

from conftest import make_box_scene, make_empty_scene
from test_gscm import synthetic_set


def radio(**overrides) -> RadioParams:
    base = dict(
        carrier_frequency=3e9,
        bandwidth=100e6,
        fft_bins=1024,
        tx_power=1.0,
        noise_power=1e-13,
        max_path_length=200.0,
        pathloss_exponent=2.0,
    )
    base.update(overrides)
    return RadioParams(**base)


def entity(eid, pos, vel=(0, 0, 0), kind="bs", offsets=None):
    return Entity(id=eid, kind=kind, position=np.asarray(pos, float),
                  velocity=np.asarray(vel, float),
                  antenna_offsets=offsets if offsets is not None else np.zeros((1, 3)))


def brute_force_chain_set(scene, mset, tx, rx, rp):
    """Exhaustive tuple scan with raw visibility ray casts (oracle)."""
    pos = mset.positions
    n = len(mset)
    l_max = rp.max_path_length
    chains = {}

    d_er = np.linalg.norm(tx.position - rx.position)
    if d_er <= l_max and segment_visible(scene, tx.position, rx.position):
        chains[()] = d_er

    vis_t = [segment_visible(scene, tx.position, pos[i]) for i in range(n)]
    vis_r = [segment_visible(scene, rx.position, pos[i]) for i in range(n)]
    vis_m = {}
    for i in range(n):
        for j in range(i + 1, n):
            vis_m[(i, j)] = vis_m[(j, i)] = segment_visible(scene, pos[i], pos[j])
    d_t = np.linalg.norm(pos - tx.position, axis=1)
    d_r = np.linalg.norm(pos - rx.position, axis=1)
    d_m = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)

    for i in range(n):
        if vis_t[i] and vis_r[i] and d_t[i] + d_r[i] <= l_max:
            chains[(i,)] = d_t[i] + d_r[i]
    if rp.max_bounce_order >= 2:
        for i, j in itertools.permutations(range(n), 2):
            if vis_t[i] and vis_m[(i, j)] and vis_r[j]:
                total = d_t[i] + d_m[i, j] + d_r[j]
                if total <= l_max:
                    chains[(i, j)] = total
    if rp.max_bounce_order >= 3:
        for i in range(n):
            if not vis_t[i]:
                continue
            for j in range(n):
                if j == i or not vis_m[(i, j)]:
                    continue
                for k in range(n):
                    if k == j or not (vis_m[(j, k)] and vis_r[k]):
                        continue
                    total = d_t[i] + d_m[i, j] + d_m[j, k] + d_r[k]
                    if total <= l_max:
                        chains[(i, j, k)] = total
    return chains


class TestRadioParams:
    def test_valid(self):
        rp = radio()
        assert rp.wavelength == pytest.approx(C_LIGHT / 3e9)

    @pytest.mark.parametrize("bad", [dict(fft_bins=1000), dict(fft_bins=1),
                                     dict(bandwidth=4e9), dict(max_path_length=0.0),
                                     dict(max_bounce_order=4)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            radio(**bad)

    def test_bin_grid_centered(self):
        rp = radio(fft_bins=8, bandwidth=8e6)
        assert np.allclose(rp.bin_frequencies, (np.arange(8) - 4) * 1e6)


class TestFading:
    def test_fresh_state_is_unit_mean(self):
        st = FadingState.fresh(shape=4.0, coherence_tau=0.1)
        assert st.multiplier == pytest.approx(1.0, rel=1e-12)

    def test_dt_zero_is_identity(self):
        st = FadingState.fresh(4.0, 0.1, key=7)
        st2, x = update_fading(st, 0.0)
        assert st2.latent == st.latent
        assert st2.counter == st.counter
        assert x == pytest.approx(1.0, rel=1e-12)

    def test_moments_and_marginal(self):
        # DERIVED: Monte Carlo vs Gamma(chi, 1/chi) moments, 1e5 steps
        chi, tau = 4.0, 0.1
        st = FadingState.fresh(chi, tau, key=fading_key(1, 2, 3, ()))
        xs = np.empty(100_000)
        for i in range(xs.size):
            st, xs[i] = update_fading(st, tau)
        assert 0.99 <= xs.mean() <= 1.01
        assert abs(xs.var() - 1.0 / chi) <= 0.05 / chi
        ks = stats.kstest(xs, stats.gamma(a=chi, scale=1 / chi).cdf).statistic
        assert ks < 0.01

    def test_latent_autocorrelation_at_tau(self):
        chi, tau = 4.0, 0.05
        st = FadingState.fresh(chi, tau, key=fading_key(9, 0, 1, (4, 2)))
        lat = np.empty(100_000)
        for i in range(lat.size):
            st, _ = update_fading(st, tau)
            lat[i] = st.latent
        lat = lat[100:]  # discard deterministic-start transient
        r = np.corrcoef(lat[:-1], lat[1:])[0, 1]
        assert abs(r - np.exp(-1)) <= 0.02

    def test_composition_consistency(self):
        # one update of 2*tau has the same correlation budget as two of tau
        chi, tau = 2.0, 0.1
        rho2 = np.exp(-2 * tau / tau)
        assert rho2 == pytest.approx(np.exp(-1) ** 2)

    def test_explicit_stream_supported(self):
        st = FadingState.fresh(4.0, 0.1)
        gen = np.random.default_rng(0)
        st2, x = update_fading(st, 0.05, rng_stream=gen)
        assert x > 0
        assert st2.last_update == pytest.approx(0.05)


class TestDoppler:
    def test_static_zero(self):
        tx, rx = entity(0, (0, 0, 0)), entity(1, (100, 0, 0), kind="ue")
        chain = PathChain((), 100.0, 100.0 / C_LIGHT, (), 1e-9, 0.0)
        assert doppler_shift(chain, tx, rx, radio()) == 0.0

    def test_head_on_approach(self):
        tx = entity(0, (0, 0, 0))
        rx = entity(1, (100, 0, 0), vel=(-10, 0, 0), kind="ue")
        chain = PathChain((), 100.0, 100.0 / C_LIGHT, (), 1e-9, 0.0)
        f = doppler_shift(chain, tx, rx, radio())
        assert f == pytest.approx(10.0 / radio().wavelength, rel=1e-12)
        assert f == pytest.approx(100.069, abs=0.01)

    def test_perpendicular_motion_zero(self):
        tx = entity(0, (0, 0, 0))
        rx = entity(1, (100, 0, 0), vel=(0, 7, 0), kind="ue")
        chain = PathChain((), 100.0, 100.0 / C_LIGHT, (), 1e-9, 0.0)
        assert doppler_shift(chain, tx, rx, radio()) == 0.0


class TestPathGain:
    def test_friis_analytic(self):
        # DERIVED: Friis formula evaluated analytically
        rp = radio()
        lam = C_LIGHT / 3e9
        for d in (10.0, 100.0, 1000.0):
            chain = PathChain((), d, d / C_LIGHT, (), 1.0, 0.0)
            mset = synthetic_set(make_empty_scene(), np.zeros((0, 3)))
            g = path_average_gain(chain, mset, rp)
            assert g == pytest.approx((lam / (4 * np.pi * d)) ** 2, rel=1e-12)
        chain = PathChain((), 100.0, 100.0 / C_LIGHT, (), 1.0, 0.0)
        assert path_average_gain(chain, mset, rp) == pytest.approx(6.3238e-9, rel=1e-4)

    def test_specular_bounce_identity(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, [[0.0, 5.0, 0.0]])
        chain = PathChain((0,), 10.0, 10.0 / C_LIGHT, (0.0,), 1.0, 0.0)
        g = path_average_gain(chain, mset, radio())
        assert g == pytest.approx((1.0 / 10.0) ** 2 * 1e-3, rel=1e-12)

    def test_power_law_scaling(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, [[0.0, 5.0, 0.0]])
        rp = radio(pathloss_exponent=2.0)
        g1 = path_average_gain(PathChain((0,), 50.0, 0.0, (0.3,), 1.0, 0.0), mset, rp)
        g2 = path_average_gain(PathChain((0,), 100.0, 0.0, (0.3,), 1.0, 0.0), mset, rp)
        assert g1 / g2 == pytest.approx(4.0, rel=1e-12)


class TestEnumeration:
    def test_empty_scene_los_only(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, np.zeros((0, 3)))
        tx, rx = entity(0, (0, 0, 0)), entity(1, (100, 0, 0), kind="ue")
        chains = enumerate_paths(scene, mset, None, tx, rx, radio(max_path_length=200.0))
        assert len(chains) == 1
        assert chains[0].hops == ()
        assert chains[0].total_length == pytest.approx(100.0)
        # delay law: identical to the defining floating-point expression
        assert chains[0].delay == chains[0].total_length / C_LIGHT

    def test_wall_mpc_two_segment_sum(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, [[5.0, 5.0, 0.0]])
        tx, rx = entity(0, (0, 0, 0)), entity(1, (10, 0, 0), kind="ue")
        lut = build_lut(scene, mset, 200.0)
        chains = enumerate_paths(scene, mset, lut, tx, rx, radio())
        hops = [c.hops for c in chains]
        assert () in hops and (0,) in hops
        bounce = next(c for c in chains if c.hops == (0,))
        d1 = np.linalg.norm([5, 5, 0])
        d2 = np.linalg.norm([5, -5, 0])
        assert bounce.total_length == pytest.approx(d1 + d2, rel=1e-12)

    def test_matches_brute_force(self):
        rs = np.random.default_rng(21)
        scene = make_box_scene()
        pts = rs.uniform(-25, 35, (30, 3))
        pts = pts[[not (np.all(p > 0) and np.all(p < 10)) for p in pts]]
        mset = synthetic_set(scene, pts)
        rp = radio(max_path_length=120.0, max_bounce_order=3)
        lut = build_lut(scene, mset, rp.max_path_length)
        tx = entity(0, (-15, 5, 5))
        rx = entity(1, (20, 5, 5), kind="ue")

        chains = enumerate_paths(scene, mset, lut, tx, rx, rp)
        assert all(c.delay == c.total_length / C_LIGHT for c in chains)
        got = {c.hops: c.total_length for c in chains}
        expected = brute_force_chain_set(scene, mset, tx, rx, rp)
        assert set(got) == set(expected)
        for hops, total in expected.items():
            assert got[hops] == pytest.approx(total, rel=1e-12)

    def test_ordering(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, [[0, 5, 0], [0, -7, 0], [3, 6, 0]])
        lut = build_lut(scene, mset, 500.0)
        rp = radio(max_path_length=500.0, max_bounce_order=3)
        chains = enumerate_paths(scene, mset, lut, entity(0, (0, 0, 0)),
                                 entity(1, (10, 0, 0), kind="ue"), rp)
        keys = [(len(c.hops), c.total_length, c.hops) for c in chains]
        assert keys == sorted(keys)

    def test_monotone_pruning(self):
        rs = np.random.default_rng(3)
        scene = make_box_scene()
        pts = rs.uniform(-25, 35, (15, 3))
        pts = pts[[not (np.all(p > 0) and np.all(p < 10)) for p in pts]]
        mset = synthetic_set(scene, pts)
        tx = entity(0, (-15, 5, 5))
        rx = entity(1, (20, 5, 5), kind="ue")
        lut = build_lut(scene, mset, 500.0)
        previous: set = set()
        for l_max in (60.0, 90.0, 140.0, 300.0):
            rp = radio(max_path_length=l_max, max_bounce_order=3)
            hops = {c.hops for c in enumerate_paths(scene, mset, lut, tx, rx, rp)}
            assert previous <= hops
            previous = hops

    def test_los_toggling(self):
        # inserting an occluder between tx and rx removes exactly the LOS chain
        tx = entity(0, (-15, 5, 5))
        rx = entity(1, (25, 5, 5), kind="ue")
        mpc_pos = [[-5.0, 30.0, 5.0], [15.0, 30.0, 5.0]]

        open_scene = make_empty_scene()
        mset_open = synthetic_set(open_scene, mpc_pos)
        rp = radio(max_path_length=400.0, max_bounce_order=2)
        lut_open = build_lut(open_scene, mset_open, rp.max_path_length)
        with_los = {c.hops for c in enumerate_paths(open_scene, mset_open, lut_open, tx, rx, rp)}

        blocked = make_box_scene(lo=(4, 4, 4), hi=(6, 6, 6))
        mset_blk = synthetic_set(blocked, mpc_pos)
        lut_blk = build_lut(blocked, mset_blk, rp.max_path_length)
        without_los = {c.hops for c in enumerate_paths(blocked, mset_blk, lut_blk, tx, rx, rp)}

        assert () in with_los and () not in without_los
        assert with_los - {()} == without_los


class TestSynthesis:
    def test_flat_los_channel(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, np.zeros((0, 3)))
        tx, rx = entity(0, (0, 0, 0)), entity(1, (100, 0, 0), kind="ue")
        rp = radio()
        chains = enumerate_paths(scene, mset, None, tx, rx, rp)
        real = synthesize_channel(chains, tx, rx, mset, rp, time=0.0)
        assert real.h.shape == (1, 1, 1024)
        expected = np.sqrt(chains[0].avg_gain)
        assert np.allclose(np.abs(real.h[0, 0]), expected, rtol=1e-12)

    def test_two_path_tap_positions(self):
        # DERIVED: IFFT power profile peaks at bins round(tau * bandwidth).
        # Geometry: LOS of 60 m plus a single bounce totalling 150 m, so the
        # taps sit near bins 20 and 50 at B = 100 MHz.
        rp = radio(fft_bins=1024, bandwidth=100e6, max_path_length=400.0)
        scene = make_empty_scene()
        y = np.sqrt(75.0**2 - 30.0**2)
        mset = synthetic_set(scene, [[30.0, y, 0.0]])
        mset.g0.setflags(write=True)
        mset.xi.setflags(write=True)
        mset.g0[0] = 22500 * 1.758e-8   # bounce power comparable to LOS
        mset.xi[0] = 0.0
        tx, rx = entity(0, (0, 0, 0)), entity(1, (60, 0, 0), kind="ue")
        lut = build_lut(scene, mset, rp.max_path_length)
        chains = enumerate_paths(scene, mset, lut, tx, rx, rp)
        assert [c.hops for c in chains] == [(), (0,)]
        assert chains[1].total_length == pytest.approx(150.0, rel=1e-12)

        real = synthesize_channel(chains, tx, rx, mset, rp, time=0.0)
        taps = np.abs(np.fft.ifft(real.h[0, 0])) ** 2
        top2 = sorted(np.argsort(taps)[-2:])
        for peak, tau in zip(top2, (chains[0].delay, chains[1].delay)):
            assert abs(peak - round(tau * rp.bandwidth)) <= 1

    def test_zero_paths_zero_channel(self):
        tx, rx = entity(0, (0, 0, 0)), entity(1, (10, 0, 0), kind="ue")
        mset = synthetic_set(make_empty_scene(), np.zeros((0, 3)))
        real = synthesize_channel([], tx, rx, mset, radio(), time=0.0)
        assert np.all(real.h == 0)

    def test_parseval(self):
        scene = make_box_scene()
        rs = np.random.default_rng(4)
        pts = rs.uniform(-20, 30, (10, 3))
        pts = pts[[not (np.all(p > 0) and np.all(p < 10)) for p in pts]]
        mset = synthetic_set(scene, pts)
        rp = radio(max_path_length=150.0, fft_bins=256)
        lut = build_lut(scene, mset, rp.max_path_length)
        tx = entity(0, (-15, 5, 5))
        rx = entity(1, (20, 5, 5), kind="ue")
        chains = enumerate_paths(scene, mset, lut, tx, rx, rp)
        real = synthesize_channel(chains, tx, rx, mset, rp, time=0.0)
        h = real.h[0, 0]
        lhs = np.sum(np.abs(h) ** 2) / rp.fft_bins
        rhs = np.sum(np.abs(np.fft.ifft(h)) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_multi_antenna_dimensions_and_offsets(self):
        scene = make_empty_scene()
        mset = synthetic_set(scene, np.zeros((0, 3)))
        tx = entity(0, (0, 0, 0), offsets=np.array([[0, 0, 0], [0, 0.5, 0]]))
        rx = entity(1, (100, 0, 0), kind="ue", offsets=np.array([[0, 0, 0], [0, 0.05, 0], [0, 0.1, 0]]))
        rp = radio(fft_bins=64)
        chains = enumerate_paths(scene, mset, None, tx, rx, rp)
        real = synthesize_channel(chains, tx, rx, mset, rp, time=0.0)
        assert real.h.shape == (3, 2, 64)
        # distinct element geometry must give distinct phases
        assert not np.allclose(real.h[0, 0], real.h[2, 1])
