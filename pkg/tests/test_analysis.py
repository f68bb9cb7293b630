import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bblowup.analysis import (
    LEDGER_COLUMNS,
    CannotFit,
    EnergyLedger,
    fit_log_slope,
    fit_rate,
    physical_rate_verdict,
)
from bblowup.dynamics import SimState
from bblowup.helmholtz import Grid, HelmholtzOps
from bblowup.model import load_preset

from conftest import gaussian

TAU = np.linspace(0.0, 4.0, 401)


def test_exact_exponential_rate(ch):
    led = EnergyLedger.from_arrays(ch, 3.0, TAU, np.exp(-TAU))
    v = fit_rate(led)
    assert v.fitted_rate == pytest.approx(-1.0, abs=1e-12)
    assert v.theoretical_rate == -1.0
    assert v.passed and v.regime == "Stable"


def test_slow_decay_fails_stable_rule(ch):
    led = EnergyLedger.from_arrays(ch, 3.0, TAU, np.exp(-0.5 * TAU))
    assert not fit_rate(led).passed


def test_unstable_rule():
    fw = load_preset("fw")
    assert fit_rate(EnergyLedger.from_arrays(fw, 3.0, TAU, np.exp(0.1 * TAU))).passed
    assert not fit_rate(EnergyLedger.from_arrays(fw, 3.0, TAU, np.exp(-0.1 * TAU))).passed


def test_no_rule_for_unclassified():
    kdv = load_preset("kdv")
    v = fit_rate(EnergyLedger.from_arrays(kdv, 3.0, TAU, np.exp(-TAU)))
    assert not v.passed and math.isnan(v.theoretical_rate)


def test_zero_norm_cannot_fit(ch):
    hs = np.exp(-TAU)
    hs[200:] = 0.0
    with pytest.raises(CannotFit, match="rounding"):
        fit_rate(EnergyLedger.from_arrays(ch, 3.0, TAU, hs))


def test_too_few_rows(ch):
    with pytest.raises(CannotFit):
        fit_rate(EnergyLedger.from_arrays(ch, 3.0, TAU[:5], np.ones(5)), (0.0, 4.0))


def test_physical_power_fit(ch):
    led = EnergyLedger.from_arrays(ch, 3.0, TAU, np.exp(-TAU), phys=np.exp(-2.0 * TAU))
    v = physical_rate_verdict(ch, led)
    assert v.fitted_rate == pytest.approx(2.0, abs=1e-12)
    assert v.theoretical_rate == 2.0 and v.passed


def test_physical_power_relation_to_w_rate(ch):
    # phys = e^tau |p * w|_s; with |p * w|_s proportional to |w|_s the power is -rate - 1
    k = 1.7
    hs = np.exp(-k * TAU)
    led = EnergyLedger.from_arrays(ch, 3.0, TAU, hs, phys=0.3 * np.exp(TAU) * hs)
    assert physical_rate_verdict(ch, led).fitted_rate == pytest.approx(-fit_rate(led).fitted_rate - 1.0, abs=1e-10)


def test_physical_not_applicable_when_unstable():
    fw = load_preset("fw")
    v = physical_rate_verdict(fw, EnergyLedger.from_arrays(fw, 3.0, TAU, np.exp(TAU)))
    assert not v.applicable and not v.passed


def test_defect_of_exact_inequality(ch):
    # y = |w|^2 solving y' = -ratio_a y exactly, ratio_b term switched off
    hs = np.exp(-0.5 * ch_ratio_a(ch) * TAU)
    led = EnergyLedger.from_arrays(ch, 3.0, TAU, hs)
    assert np.max(np.abs(led.inequality_defect)) < 1e-4
    assert led.cubic_constant() < 1e-3


def ch_ratio_a(params):
    from bblowup.model import classify

    return classify(params).ratio_a


def test_monotonicity_check(ch):
    hs = np.exp(-TAU)
    assert EnergyLedger.from_arrays(ch, 3.0, TAU, hs).is_nonincreasing(0.5)[0]
    hs[300] *= 1.05
    ok, worst = EnergyLedger.from_arrays(ch, 3.0, TAU, hs).is_nonincreasing(0.5)
    assert not ok and worst == pytest.approx(1.05 * np.exp(-0.01) - 1.0, rel=1e-6)
    # a bump before the cutoff is ignored
    hs = np.exp(-TAU)
    hs[10] *= 1.5
    assert EnergyLedger.from_arrays(ch, 3.0, TAU, hs).is_nonincreasing(0.5)[0]


def test_times_must_increase(ch):
    led = EnergyLedger(ch, 3.0)
    led.append(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        led.append(0.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        led.append(1.0, 1.0, -1.0, 1.0)


def test_record_and_csv(ch):
    grid = Grid(25.0, 257)
    ops = HelmholtzOps(1.0, grid)
    led = EnergyLedger(ch, 3.0, ops)
    w = 1e-3 * gaussian(grid.nodes)
    led.record(SimState(w, 0.0, ch))
    led.record(SimState(0.5 * w, 0.1, ch, 1, 0.1))
    assert led.hs_norm[0] == pytest.approx(ops.sobolev_norm(w, 3.0))
    assert led.hs1_norm[0] == pytest.approx(ops.sobolev_norm(w, 2.0))
    assert led.phys_norm[1] == pytest.approx(math.exp(0.1) * ops.sobolev_norm(ops.apply_inverse(0.5 * w), 3.0))
    lines = led.to_csv().splitlines()
    assert lines[0].split(",") == list(LEDGER_COLUMNS)
    assert len(lines) == 3
    assert float(lines[1].split(",")[2]) == led.hs_norm[0]


def test_record_rejects_foreign_state(ch):
    grid = Grid(25.0, 257)
    led = EnergyLedger(ch, 3.0, HelmholtzOps(1.0, grid))
    with pytest.raises(ValueError):
        led.record(SimState(np.zeros(129), 0.0, ch))
    with pytest.raises(ValueError):
        led.record(SimState(np.zeros(257), 0.0, load_preset("dp")))
    with pytest.raises(ValueError):
        EnergyLedger(ch, 3.0).record(SimState(np.zeros(257), 0.0, ch))


@settings(max_examples=30, deadline=None)
@given(rate=st.floats(-5, 5), amp=st.floats(1e-8, 1e3))
def test_fit_recovers_any_exponential(rate, amp):
    assert fit_log_slope(TAU, amp * np.exp(rate * TAU)) == pytest.approx(rate, rel=1e-10, abs=1e-10)
