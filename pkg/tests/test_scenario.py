import pytest

from porodelay.scenario import (ScenarioError, apply_overrides, default_document, default_scenario,
                                load_scenario, parse_override_args, parse_profile)


class TestScenario:
    def test_default_uses_window_midpoint(self):
        sc = default_scenario()
        assert sc.params.eta == pytest.approx(0.5)
        assert (sc.grid.N, sc.grid.M) == (100, 41)
        assert sc.seed == 0xC0FFEE

    def test_auto_eta_follows_overrides(self):
        sc = default_scenario(params__mu1=1.0, params__mu2=0.5)
        assert sc.params.eta == pytest.approx(1.0)

    def test_explicit_eta_is_kept(self):
        assert default_scenario(**{"params.eta": 0.3}).params.eta == 0.3

    def test_hash_tracks_content(self):
        a, b = default_scenario(), default_scenario()
        assert a.content_hash == b.content_hash
        assert default_scenario(**{"grid.N": 50}).content_hash != a.content_hash

    def test_overrides_coerce_values(self):
        doc = apply_overrides(default_document(), parse_override_args(["params.b=0.25", "grid.N=20"]))
        assert doc["params"]["b"] == 0.25
        assert doc["grid"]["N"] == 20

    def test_bad_override_syntax(self):
        with pytest.raises(ScenarioError):
            parse_override_args(["params.b"])

    def test_unknown_param(self):
        with pytest.raises(ScenarioError):
            default_scenario(**{"params.gamma": 1.0})

    def test_load_file(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text('[params]\nmu2 = 0.1\n[initial]\nphi0 = "gaussian_bump:0.5,0.1,0.2"\n[grid]\nN = 20\nM = 5\n')
        sc = load_scenario(path, {"time.t_end": "2.0"})
        assert sc.params.mu2 == 0.1
        assert sc.time.t_end == 2.0
        assert sc.initial.phi0(0.5) == pytest.approx(0.2)

    def test_profiles(self):
        assert parse_profile("sine_mode:2,0.5")(0.25) == pytest.approx(0.5)
        assert parse_profile([0.0, 1.0, -1.0])(0.5) == pytest.approx(0.25)
        with pytest.raises(ScenarioError):
            parse_profile("triangle")
