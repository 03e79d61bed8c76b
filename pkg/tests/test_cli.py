import json

import pytest

from porodelay import cli, solver

SMALL = ["--override", "grid.N=16", "--override", "grid.M=6", "--override", "time.t_end=2.0"]


def run_cli(*argv):
    return cli.main(list(argv))


class TestRun:
    def test_ok_writes_summary(self, tmp_path):
        assert run_cli("run", "--out", str(tmp_path), *SMALL) == 0
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert doc["E0"] > doc["Efinal"] > 0
        assert len(doc["scenario_hash"]) == 64
        assert (tmp_path / "diagnostics.csv").read_text().startswith("# scenario_hash: " + doc["scenario_hash"])

    def test_validation_names_hypothesis(self, tmp_path, capsys):
        assert run_cli("run", "--out", str(tmp_path), "--override", "params.b=1.5", *SMALL) == 2
        assert "b² ≤ μξ" in capsys.readouterr().err

    def test_blow_up(self, tmp_path):
        assert run_cli("run", "--out", str(tmp_path), "--override", "time.cfl=5", *SMALL) == 3
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert doc["incomplete"] is True

    def test_bad_scenario_file(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[params\n")
        assert run_cli("run", "--scenario", str(bad), "--out", str(tmp_path)) == 2

    def test_scenario_file(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text('seed = 7\n[grid]\nN = 12\nM = 4\n[time]\nt_end = 1.0\n[output]\nsnapshots = true\n')
        assert run_cli("run", "--scenario", str(path), "--out", str(tmp_path / "o")) == 0
        assert sorted((tmp_path / "o" / "snapshots").glob("*.bin"))

    def test_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert run_cli("run", "--out", str(tmp_path / d), "--seed", "0xC0FFEE", *SMALL) == 0
        assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()

    def test_interrupt_writes_partial(self, tmp_path, monkeypatch):
        calls = {"n": 0}
        real = solver._rk4

        def flaky(fun, y, dt):
            calls["n"] += 1
            if calls["n"] > 20:
                raise KeyboardInterrupt
            return real(fun, y, dt)

        monkeypatch.setattr(solver, "_rk4", flaky)
        assert run_cli("run", "--out", str(tmp_path), *SMALL) == cli.EXIT_INTERRUPTED
        assert json.loads((tmp_path / "summary.json").read_text())["incomplete"] is True

    def test_internal_error(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("unexpected")

        monkeypatch.setattr(solver, "run", boom)
        assert run_cli("run", "--out", str(tmp_path), *SMALL) == 5


class TestSpectrum:
    def test_ok(self, tmp_path):
        assert run_cli("spectrum", "--out", str(tmp_path), "--override", "grid.N=8", "--override", "grid.M=4") == 0
        doc = json.loads((tmp_path / "spectrum.json").read_text())
        assert doc["n"] == 8 and doc["abscissa"] < 0
        assert len((tmp_path / "eigenvalues.csv").read_text().splitlines()) == 2 + 4 * 8 + 8 * 3

    def test_validation(self, tmp_path):
        assert run_cli("spectrum", "--out", str(tmp_path), "--override", "params.b=1.5") == 2

    def test_resource_cap(self, tmp_path):
        assert run_cli("spectrum", "--out", str(tmp_path), "--override", "grid.N=1000") == 4


class TestVerify:
    def test_hypothesis_gate(self, tmp_path, capsys):
        assert run_cli("verify", "--override", "params.mu2=0.6") == 2
        assert "η" in capsys.readouterr().err

    @pytest.mark.slow
    def test_coarse_grid_names_failures(self, tmp_path, capsys):
        code = run_cli("verify", "--out", str(tmp_path), "--override", "grid.N=10", "--override", "grid.M=11")
        out = capsys.readouterr().out
        assert code != 0
        assert "failing:" in out
        assert (tmp_path / "verdict_A1.json").exists()
