"""Acceptance gate A1-A9 on the reference scenario.

Each test prints one PASS/FAIL line with the measured values and then
asserts the criterion at its stated tolerance. The lines are repeated in the
terminal summary. Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import math

import numpy as np
import pytest

from porodelay import verify
from porodelay.scenario import default_scenario

RESULTS: dict[str, str] = {}


@pytest.fixture(scope="module")
def pipeline():
    return verify.Pipeline(default_scenario())


def report(v, capsys):
    RESULTS[v.name] = v.line()
    with capsys.disabled():
        print("\n" + v.line())


def test_A1_energy_monotone(pipeline, capsys):
    v = verify.check_a1(pipeline)
    report(v, capsys)
    assert v.measured["max_rise_over_E0"] <= 1e-8
    assert v.measured["runtime_s"] < 30.0


def test_A2_quantitative_dissipation(pipeline, capsys):
    v = verify.check_a2(pipeline)
    report(v, capsys)
    # η = 0.5 is the window midpoint; C_E = min{0.5 - 0.125 - 0.25, 0.25 - 0.125}
    assert v.measured["eta"] == pytest.approx(0.5)
    assert v.measured["CE"] == pytest.approx(0.125, abs=1e-15)
    assert v.measured["violations"] == 0


def test_A3_exponential_decay(pipeline, capsys):
    v = verify.check_a3(pipeline)
    report(v, capsys)
    assert v.measured["window"] == (7.5, 22.5)
    assert v.measured["r2"] >= 0.98
    assert v.measured["gamma_fit"] > 0
    assert v.measured["runtime_s"] < 30.0


def test_A4_delay_oracle(pipeline, capsys):
    v = verify.check_a4(pipeline)
    report(v, capsys)
    sc = pipeline.sc
    assert v.measured["bound"] == pytest.approx(10 * (sc.grid.h**2 + sc.grid.dy))
    assert math.isclose(sc.params.tau / v.measured["dt"], round(sc.params.tau / v.measured["dt"]), abs_tol=1e-9)
    assert v.measured["max_phi_diff"] <= v.measured["bound"]


def test_A5_spectral_consistency(pipeline, capsys):
    v = verify.check_a5(pipeline)
    report(v, capsys)
    assert pipeline.generator.dim == 560
    sigma, gamma = v.measured["abscissa"], v.measured["gamma_fit"]
    assert sigma < 0
    assert abs(gamma - 2 * abs(sigma)) <= 0.25 * 2 * abs(sigma)
    assert v.measured["runtime_s"] < 60.0


def test_A6_discrete_dissipativity(pipeline, capsys):
    v = verify.check_a6(pipeline)
    report(v, capsys)
    assert v.measured["max_quotient"] <= 1e-6
    assert abs(v.measured["v_only_quotient"]) <= 1e-12


def test_A7_lyapunov(pipeline, capsys):
    v = verify.check_a7(pipeline)
    report(v, capsys)
    assert v.measured["gamma1"] > 0
    assert v.measured["gamma1"] <= v.measured["gamma2"] < np.inf
    assert v.measured["max_dL_dt"] <= v.measured["tol_diss"]


def test_A8_convergence_orders(pipeline, capsys):
    v = verify.check_a8(pipeline)
    report(v, capsys)
    assert 1.8 <= v.measured["space"] <= 2.2
    assert v.measured["time"] >= 3.8
    assert 0.85 <= v.measured["transport"] <= 1.15
    assert v.measured["runtime_s"] < 180.0


def test_A9_equal_speed_sweep(pipeline, capsys):
    v, rows = verify.check_a9(pipeline)
    report(v, capsys)
    with capsys.disabled():
        for r in rows:
            print(f"    defect={r.value:+.2f} gamma_fit={r.gamma_fit:.4f} r2={r.r2:.4f} "
                  f"abscissa={r.abscissa:.3e} equal_speed={r.equal_speed}")
    assert len(rows) == 11
    assert np.all(np.diff([r.value for r in rows]) > 0)
    assert sum(r.equal_speed for r in rows) == 1
    for r in rows:
        if not r.skipped:
            assert r.r2 >= 0.9, f"defect {r.value:+.2f}: r2 = {r.r2:.4f}"
