import math

import numpy as np
import pytest

from porodelay import analysis as an
from porodelay import diagnostics as dg
from porodelay import solver
from porodelay.scenario import default_scenario

T = np.round(np.arange(0.0, 10.0 + 1e-9, 0.1), 12)


class TestFit:
    def test_exact_exponential(self):
        fit = an.fit_decay_rate(T, 2.0 * np.exp(-0.3 * T), (0.0, 10.0))
        assert fit.gamma == pytest.approx(0.3, abs=1e-10)
        assert fit.C == pytest.approx(2.0, abs=1e-10)
        assert fit.r2 == pytest.approx(1.0, abs=1e-10)

    def test_modulated_exponential(self):
        E = 2.0 * np.exp(-0.3 * T) * (1 + 0.01 * np.sin(5 * T))
        fit = an.fit_decay_rate(T, E, (0.0, 10.0))
        assert abs(fit.gamma - 0.3) <= 0.01
        assert fit.r2 >= 0.999

    def test_constant(self):
        fit = an.fit_decay_rate(T, np.full_like(T, 3.0), (0.0, 10.0))
        assert fit.gamma == 0.0 and fit.r2 == 0.0

    def test_window_shift_invariance(self):
        E = 5.0 * np.exp(-0.7 * T)
        a = an.fit_decay_rate(T, E, (1.0, 5.0))
        b = an.fit_decay_rate(T, E, (4.0, 8.0))
        assert abs(a.gamma - b.gamma) <= 1e-12

    def test_default_window(self):
        fit = an.fit_decay_rate(T, np.exp(-T))
        assert fit.window == (2.5, 7.5)

    def test_floor(self):
        E = np.exp(-0.3 * T)
        E[20:] = 0.0
        with pytest.raises(an.AnalysisError, match="floor"):
            an.fit_decay_rate(T, E, (3.0, 8.0))

    def test_too_few_samples(self):
        with pytest.raises(an.AnalysisError, match="at least"):
            an.fit_decay_rate(T, np.exp(-T), (0.0, 0.5))

    def test_bad_window(self):
        with pytest.raises(an.AnalysisError):
            an.fit_decay_rate(T, np.exp(-T), (5.0, 5.0))

    def test_energy_and_h_norm_share_rate(self):
        sc = default_scenario(**{"forcing.kind": "zero", "time.t_end": 8.0, "grid.N": 30, "grid.M": 11})
        traj = solver.run(sc, lyapunov=None)
        a = an.fit_decay_rate(traj.times, traj.series["E"])
        b = an.fit_decay_rate(traj.times, traj.series["Hnormsq"])
        assert abs(a.gamma - b.gamma) <= 1e-10


class TestConvergence:
    def test_orders_bookkeeping(self):
        orders, status = an._orders([4.0, 1.0, 0.25])
        assert orders == [2.0, 2.0] and status == "ok"
        assert an._orders([1.0, 2.0, 0.5])[1] == "pre-asymptotic"
        assert an._orders([0.0, 0.0]) == ([], "exact")

    def test_zero_data_is_exact(self):
        sc = default_scenario(**{"initial.phi0": "zero", "time.t_end": 0.5})
        res = an.convergence_study(sc, [(9, 5, 0.01), (19, 5, 0.01), (39, 5, 0.01)])
        assert res.status == "exact"
        assert all(e == 0.0 for e in res.errors)

    def test_levels_must_halve(self):
        with pytest.raises(an.AnalysisError):
            an.convergence_study(default_scenario(), [(10, 5, None), (20, 5, None), (40, 5, None)])

    def test_spatial_order_short_run(self):
        sc = default_scenario(**{"forcing.kind": "zero", "time.t_end": 0.5})
        res = an.convergence_study(sc, [(19, 5, 2e-3), (39, 5, 2e-3), (79, 5, 2e-3)])
        assert 1.8 <= res.order <= 2.2


class TestSpectralConsistency:
    def test_modal_energy_matches_time_stepping(self):
        sc = default_scenario(**{"forcing.kind": "zero", "time.t_end": 6.0, "grid.N": 20, "grid.M": 6})
        # independent of the time stepper: energy of e^{At}U0 from the eigen-decomposition
        traj = solver.run(sc, dt=0.005, lyapunov=None)
        idx = np.linspace(0, len(traj) - 1, 7).astype(int)
        modal = an.modal_energy_series(sc, traj.times[idx], N=20, M=6)
        np.testing.assert_allclose(modal, traj.series["E"][idx], rtol=1e-6)

    def test_excited_abscissa_is_within_spectrum(self):
        sc = default_scenario(**{"forcing.kind": "zero"})
        sigma, lam, weight = an.modal_energy_rates(sc, 20, 6)
        assert sigma <= np.max(lam.real) + 1e-15
        assert weight.shape == lam.shape


class TestSweep:
    base = {"time.t_end": 4.0, "grid.N": 20, "grid.M": 6}

    def test_defect_sweep_rows(self):
        vals = an.designed_sweep_values("speed_defect", 5)
        rows = an.sweep(default_scenario(**self.base), "speed_defect", vals, spectral_grid=(10, 4))
        assert [r.value for r in rows] == list(vals)
        assert np.all(np.diff([r.speed_defect for r in rows]) > 0)
        eq = [r for r in rows if r.value == 0.0]
        assert len(eq) == 1 and eq[0].equal_speed
        assert all(r.abscissa < 0 for r in rows)

    def test_full_delay_ratio_is_degenerate(self):
        rows = an.sweep(default_scenario(**self.base), "mu2_ratio", [0.5, 1.0], spectral_grid=None)
        assert rows[1].CE == 0.0 and rows[1].degenerate
        assert not rows[0].degenerate

    def test_inadmissible_rows_are_skipped(self):
        rows = an.sweep(default_scenario(**self.base), "params.b", [0.5, 2.0], spectral_grid=None)
        assert not rows[0].skipped
        assert "b²" in rows[1].skipped

    def test_workers_preserve_order(self):
        sc = default_scenario(**{**self.base, "time.t_end": 2.0})
        serial = an.sweep(sc, "tau", [0.5, 1.0, 2.0], spectral_grid=(10, 4))
        pooled = an.sweep(sc, "tau", [0.5, 1.0, 2.0], workers=2, spectral_grid=(10, 4))
        assert [r.as_dict() for r in serial] == [r.as_dict() for r in pooled]

    def test_designed_ranges(self):
        assert an.designed_sweep_values("mu2_ratio")[-1] == 1.0
        assert an.designed_sweep_values("mu2_ratio")[0] > 0
        tau = an.designed_sweep_values("tau")
        assert (tau[0], tau[-1]) == (0.1, 5.0)


class TestSummary:
    def test_keys(self):
        sc = default_scenario(**{"time.t_end": 4.0, "grid.N": 20, "grid.M": 6})
        s = an.run_summary(solver.run(sc), sc)
        for key in ("E0", "Efinal", "gamma_fit", "r2", "CE", "worst_dissipation_margin",
                    "gamma1_emp", "gamma2_emp", "w_boundary_residual_max"):
            assert key in s
        assert 0 < s["gamma1_emp"] <= s["gamma2_emp"]
        assert s["CE"] == pytest.approx(dg.energy_decay_constant(sc.params))
