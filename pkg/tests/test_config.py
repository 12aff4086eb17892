import json

import numpy as np
import pytest

from lusim.config import (
    gscm_to_doc,
    load_scene,
    materialize_entities,
    parse_gscm_config,
    parse_radio_config,
    parse_scenario_config,
    radio_to_doc,
    scenario_to_doc,
    validate_cross,
)
from lusim.errors import ConfigError, PlacementExhausted

GSCM_DOC = {
    "density_per_order": [0.5, 0.2, 0.1],
    "g0_log_mean": -30.0,
    "g0_log_sigma": 3.0,
    "xi_mean": 2.0,
    "gamma_shape_chi": 4.0,
    "fading_coherence_tau": 0.1,
    "observation_distance": 100.0,
    "spawn_seed": 42,
}

RADIO_DOC = {
    "carrier_frequency": 6e9,
    "bandwidth": 100e6,
    "fft_bins": 1024,
    "tx_power": 1.0,
    "noise_power": 1e-13,
    "max_path_length": 200.0,
    "pathloss_exponent": 2.0,
}

SCENARIO_DOC = {
    "scene_path": "scene.json",
    "bs_list": [{"position": [0.0, 0.0, 5.0]}],
    "ue_list": [{"position": [10.0, 0.0, 1.5]}],
    "duration": 1.0,
    "step": 0.1,
    "scenario_seed": 7,
}

SCENE_DOC = {
    "solids": [{"name": "b0", "box": {"min": [0, 0, 0], "max": [10, 10, 10]}}],
    "active_area": {"min": [-50, -50, -50], "max": [50, 50, 50]},
    "traversable_area": {"min": [-40, -40, 0], "max": [40, 40, 3]},
}


def err_path(excinfo) -> str:
    return excinfo.value.path


class TestGscmConfig:
    def test_minimal_valid(self):
        p = parse_gscm_config(json.dumps(GSCM_DOC))
        assert p.density_per_order == (0.5, 0.2, 0.1)
        assert p.mpc_radius == 0.1
        assert p.normal_jitter_sigma == 0.0
        assert p.spawn_seed == 42

    def test_two_densities_rejected(self):
        doc = dict(GSCM_DOC, density_per_order=[0.5, 0.2])
        with pytest.raises(ConfigError) as e:
            parse_gscm_config(json.dumps(doc))
        assert err_path(e) == "$.density_per_order"

    def test_chi_zero_rejected(self):
        doc = dict(GSCM_DOC, gamma_shape_chi=0.0)
        with pytest.raises(ConfigError) as e:
            parse_gscm_config(json.dumps(doc))
        assert err_path(e) == "$.gamma_shape_chi"
        assert "> 0" in e.value.message

    def test_unknown_key_rejected(self):
        doc = dict(GSCM_DOC, densty="typo")
        with pytest.raises(ConfigError) as e:
            parse_gscm_config(json.dumps(doc))
        assert err_path(e) == "$.densty"

    def test_parse_print_parse_fixpoint(self):
        p1 = parse_gscm_config(json.dumps(GSCM_DOC))
        p2 = parse_gscm_config(json.dumps(gscm_to_doc(p1)))
        assert p1 == p2


class TestRadioConfig:
    def test_valid(self):
        p = parse_radio_config(json.dumps(RADIO_DOC))
        assert p.fft_bins == 1024
        assert p.reference_distance == 1.0

    def test_non_power_of_two_bins(self):
        with pytest.raises(ConfigError) as e:
            parse_radio_config(json.dumps(dict(RADIO_DOC, fft_bins=1000)))
        assert err_path(e) == "$.fft_bins"

    def test_bandwidth_at_least_carrier(self):
        with pytest.raises(ConfigError) as e:
            parse_radio_config(json.dumps(dict(RADIO_DOC, bandwidth=6e9)))
        assert err_path(e) == "$.bandwidth"

    def test_fixpoint(self):
        p1 = parse_radio_config(json.dumps(RADIO_DOC))
        p2 = parse_radio_config(json.dumps(radio_to_doc(p1)))
        assert p1 == p2


class TestScenarioConfig:
    def test_lists_and_density_union(self):
        doc = dict(SCENARIO_DOC, bs_list=[{"position": [0, 0, 5]}, {"position": [5, 5, 5]}],
                   ue_density=0.01)
        cfg = parse_scenario_config(json.dumps(doc))
        assert len(cfg.bs_list) == 2
        assert cfg.ue_density == 0.01

    def test_channel_log_requires_path(self):
        doc = dict(SCENARIO_DOC, channel_log=True)
        with pytest.raises(ConfigError) as e:
            parse_scenario_config(json.dumps(doc))
        assert err_path(e) == "$.channel_log_path"

    def test_negative_duration(self):
        with pytest.raises(ConfigError) as e:
            parse_scenario_config(json.dumps(dict(SCENARIO_DOC, duration=-1.0)))
        assert err_path(e) == "$.duration"

    def test_duration_below_step(self):
        with pytest.raises(ConfigError):
            parse_scenario_config(json.dumps(dict(SCENARIO_DOC, duration=0.05)))

    def test_needs_some_entity_source(self):
        doc = dict(SCENARIO_DOC)
        doc.pop("ue_list")
        with pytest.raises(ConfigError) as e:
            parse_scenario_config(json.dumps(doc))
        assert err_path(e) == "$.ue_list"

    def test_mobility_parsing(self):
        doc = dict(SCENARIO_DOC,
                   mobility={"kind": "random_waypoint", "speed_min": 0.5, "speed_max": 1.5, "pause": 2.0})
        cfg = parse_scenario_config(json.dumps(doc))
        assert cfg.mobility.kind == "random_waypoint"
        assert cfg.mobility.speed_max == 1.5

    def test_fixpoint(self):
        doc = dict(SCENARIO_DOC, mobility={"kind": "external"}, channel_log_path="log.lusc")
        c1 = parse_scenario_config(json.dumps(doc))
        c2 = parse_scenario_config(json.dumps(scenario_to_doc(c1)))
        assert c1 == c2

    def test_duplicate_ids_rejected(self):
        doc = dict(SCENARIO_DOC, bs_list=[{"id": 3, "position": [0, 0, 5]}],
                   ue_list=[{"id": 3, "position": [1, 1, 1]}])
        with pytest.raises(ConfigError):
            parse_scenario_config(json.dumps(doc))


class TestSceneFile:
    def test_box_solid(self):
        scene = load_scene(json.dumps(SCENE_DOC))
        assert len(scene) == 12
        assert len(scene.solids) == 1

    def test_mesh_solid_with_quads(self):
        doc = dict(SCENE_DOC)
        doc["solids"] = [{
            "vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                         [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]],
            "quads": [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4],
                      [1, 3, 7, 5], [3, 2, 6, 7], [2, 0, 4, 6]],
        }]
        scene = load_scene(json.dumps(doc))
        assert len(scene) == 12

    def test_bad_index_path(self):
        doc = dict(SCENE_DOC)
        doc["solids"] = [{"vertices": [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
                          "triangles": [[0, 1, 9]]}]
        with pytest.raises(ConfigError) as e:
            load_scene(json.dumps(doc))
        assert "triangles[0][2]" in e.value.path

    def test_traversable_containment(self):
        doc = dict(SCENE_DOC, traversable_area={"min": [-60, 0, 0], "max": [0, 1, 1]})
        with pytest.raises(ConfigError) as e:
            load_scene(json.dumps(doc))
        assert err_path(e) == "$.traversable_area"


class TestMaterialize:
    def scene(self):
        return load_scene(json.dumps(SCENE_DOC))

    def test_explicit_only(self):
        cfg = parse_scenario_config(json.dumps(SCENARIO_DOC))
        ents = materialize_entities(cfg, self.scene())
        assert [e.kind for e in ents] == ["bs", "ue"]
        assert np.allclose(ents[0].position, [0, 0, 5])

    def test_density_reproducible(self):
        doc = dict(SCENARIO_DOC, ue_density=0.002)  # 80x80 footprint -> ~13 UEs
        cfg = parse_scenario_config(json.dumps(doc))
        a = materialize_entities(cfg, self.scene())
        b = materialize_entities(cfg, self.scene())
        assert len(a) == len(b) > 2
        for ea, eb in zip(a, b):
            assert np.array_equal(ea.position, eb.position)
            assert ea.id == eb.id

    def test_density_avoids_solids(self):
        doc = dict(SCENARIO_DOC, ue_density=0.005)
        cfg = parse_scenario_config(json.dumps(doc))
        for e in materialize_entities(cfg, self.scene()):
            if e.kind == "ue" and e.id > 1:
                inside = np.all(e.position > 0) and np.all(e.position < 10)
                assert not inside

    def test_placement_exhausted(self):
        # traversable area buried inside a solid
        doc = dict(SCENE_DOC)
        doc["traversable_area"] = {"min": [2, 2, 2], "max": [8, 8, 8]}
        scene = load_scene(json.dumps(doc))
        cfg = parse_scenario_config(json.dumps(dict(SCENARIO_DOC, ue_density=0.1)))
        with pytest.raises(PlacementExhausted):
            materialize_entities(cfg, scene)


class TestRejectionCompleteness:
    """Fuzz mutated valid documents: parse either fails with a ConfigError
    or yields an object whose declared invariants hold."""

    MUTATIONS = [None, "x", -1.0, 0.0, [], {}, True, 1.5]

    def fuzz(self, doc, parse, check):
        rs = np.random.default_rng(31)
        keys = list(doc)
        for _ in range(300):
            mutated = dict(doc)
            key = keys[int(rs.integers(0, len(keys)))]
            action = int(rs.integers(0, 3))
            if action == 0:
                mutated.pop(key)
            elif action == 1:
                mutated[key] = self.MUTATIONS[int(rs.integers(0, len(self.MUTATIONS)))]
            else:
                mutated[f"{key}_typo"] = mutated.get(key)
            try:
                parsed = parse(json.dumps(mutated))
            except ConfigError:
                continue
            check(parsed)

    def test_gscm_never_escapes_invalid(self):
        def check(p):
            assert len(p.density_per_order) == 3
            assert all(d >= 0 for d in p.density_per_order)
            assert p.gamma_shape_chi > 0
            assert p.observation_distance > 0
            assert p.mpc_radius >= 0

        self.fuzz(GSCM_DOC, parse_gscm_config, check)

    def test_radio_never_escapes_invalid(self):
        def check(p):
            assert p.fft_bins >= 2 and (p.fft_bins & (p.fft_bins - 1)) == 0
            assert 0 < p.bandwidth < p.carrier_frequency
            assert p.max_path_length > 0
            assert 1 <= p.max_bounce_order <= 3

        self.fuzz(RADIO_DOC, parse_radio_config, check)

    def test_scenario_never_escapes_invalid(self):
        def check(c):
            assert c.step > 0
            assert c.duration >= c.step
            assert c.bs_density >= 0 and c.ue_density >= 0
            assert c.bs_list or c.bs_density > 0
            assert c.ue_list or c.ue_density > 0
            if c.channel_log:
                assert c.channel_log_path is not None

        self.fuzz(SCENARIO_DOC, parse_scenario_config, check)


class TestValidateCross:
    def parse_all(self, gscm=GSCM_DOC, radio=RADIO_DOC, scenario=SCENARIO_DOC):
        return (parse_gscm_config(json.dumps(gscm)),
                parse_radio_config(json.dumps(radio)),
                parse_scenario_config(json.dumps(scenario)))

    def test_consistent_trio_clean(self):
        issues = validate_cross(*self.parse_all())
        assert [i for i in issues if i.severity == "error"] == []

    def test_link_cap_error_names_both_keys(self):
        g, r, s = self.parse_all(gscm=dict(GSCM_DOC, max_link_length=50.0))
        issues = validate_cross(g, r, s)
        errors = [i for i in issues if i.severity == "error"]
        assert len(errors) == 1
        assert "radio:$.max_path_length" in errors[0].keys
        assert "gscm:$.max_link_length" in errors[0].keys

    def test_step_beyond_coherence_warns(self):
        g, r, s = self.parse_all(scenario=dict(SCENARIO_DOC, step=0.5, duration=1.0))
        issues = validate_cross(g, r, s)
        assert any(i.severity == "warning" and "coherence" in i.message for i in issues)
