import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ho_levels
from tunnelsplit.errors import DivergentSum, NoBoundState, ResonanceSingularity, UnsupportedModel
from tunnelsplit.homology import evaluate_catalog
from tunnelsplit.models import NF_ENERGY, double_well, harmonic_oscillator, normal_form, triple_well
from tunnelsplit.semicl import (
    euler_sum,
    fitted_slope,
    flag_resonance_crossings,
    nf_phase,
    nf_series_check,
    normal_form_constants,
    pairwise_cancellation,
    quantize_well,
    resonance_measure,
    split_double_well,
    split_normal_form,
    split_triple_well,
    sweep,
    triple_well_sum,
)

# ---------------------------------------------------------------------------
# quantisation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("N", [0, 1, 5])
@pytest.mark.parametrize("hbar", [0.1, 0.03])
def test_harmonic_levels(N, hbar):
    s = quantize_well(harmonic_oscillator(), None, N, hbar)
    assert abs(s.energy - ho_levels(hbar, N + 1)[N]) < 1e-10


def test_quantized_action_hits_target():
    s = quantize_well(double_well(), "L", 2, 0.05)
    assert abs(s.action - 2.5 * 2 * math.pi * 0.05) < 1e-10


def test_no_bound_state_in_shallow_well():
    with pytest.raises(NoBoundState):
        quantize_well(double_well(), "L", 0, 10.0)


# ---------------------------------------------------------------------------
# winding sums
# ---------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.floats(0.6, 2 * math.pi - 0.6), st.integers(1, 3))
def test_euler_sum_matches_closed_form(theta, power):
    # the transformed terms decay like cos(theta/2)^n
    w = cmath.exp(1j * theta)
    r = euler_sum(w, power, cutoff=2000)
    assert abs(r.value - (1 - w) ** (-power)) < 1e-9 * abs(r.value)


def test_euler_sum_refuses_near_w_equal_one():
    with pytest.raises(DivergentSum):
        euler_sum(cmath.exp(1e-4j), 1, cutoff=50)


def test_pairwise_cancellation_under_quantisation():
    r = pairwise_cancellation(-1 + 0j, 5)
    assert r["residual"] < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.floats(0.4, 2.7))
def test_normal_form_double_sum_is_inverse_fourth_power(theta):
    r = nf_series_check(theta)
    # 4 sum (n+1) w^n = 4 / (1-w)^2 and |1 - e^{2 i theta}| = 2 |sin theta|
    assert abs(r["single"] / r["single_closed"] - 1) < 1e-9
    assert abs(r["double"] / r["double_closed"] - 1) < 1e-9


def test_triple_well_sum_modulus():
    S_C, hbar = 25.4, 0.37
    r = triple_well_sum(S_C, hbar)
    assert abs(abs(r.value) - 1 / (2 * abs(math.cos(0.5 * S_C / hbar)))) < 1e-9


# ---------------------------------------------------------------------------
# splitting formulas
# ---------------------------------------------------------------------------


def test_double_well_formula():
    m = double_well()
    p = split_double_well(m, 0.05)
    cat = evaluate_catalog(m, p.mean_energy, checks=False)
    T = abs(cat.periods["T_L"].real) / 4
    Sb = abs(cat.actions["S_beta"].imag)
    assert abs(p.delta_E - 0.05 / (2 * T) * math.exp(-Sb / 0.1)) < 1e-14 * (1 + p.delta_E)
    assert p.extra["winding_residual"] < 1e-12


def test_double_well_slope_identity():
    # at fixed E and T, log(delta) changes by -S_beta/2 per unit 1/hbar plus the log prefactor
    m = double_well()
    E, T = -0.1, 0.3
    a, b = split_double_well(m, 1 / 20, E=E, T=T), split_double_well(m, 1 / 40, E=E, T=T)
    slope = (math.log(b.delta_E) - math.log(a.delta_E) + math.log(2)) / 20
    assert abs(slope - a.extra["slope"]) < 1e-12


def test_wrong_model_kinds():
    with pytest.raises(UnsupportedModel):
        split_double_well(triple_well(), 0.1)
    with pytest.raises(UnsupportedModel):
        split_triple_well(double_well(), 0.1)
    with pytest.raises(UnsupportedModel):
        split_normal_form(double_well(), 0.1)


def test_triple_well_series_equals_closed_form():
    p = split_triple_well(triple_well(), 0.2, E=0.0)
    assert abs(p.extra["series_minus_closed"]) < 1e-9 * p.delta_E


def test_triple_well_resonance_is_singular():
    m = triple_well()
    S_C = evaluate_catalog(m, 0.0, checks=False).actions["S_C"].real
    hbar = S_C / (3 * math.pi)  # S_C / hbar - pi = 2 pi
    assert resonance_measure(S_C, hbar) < 1e-12
    with pytest.raises(DivergentSum):
        split_triple_well(m, hbar, E=0.0)


def test_flag_marks_nearest_point_to_each_sign_change():
    m = triple_well()
    S_C = evaluate_catalog(m, 0.0, checks=False).actions["S_C"].real
    x0 = math.pi / S_C  # first zero of cos(S_C x / 2)
    pts = [split_triple_well(m, 1 / x, E=0.0) for x in (x0 - 0.03, x0 + 0.01, x0 + 0.05)]
    out = flag_resonance_crossings(pts)
    assert [p.error_code for p in out] == ["", "resonance_flag", ""]


@pytest.fixture(scope="module")
def nf_constants():
    return normal_form_constants(normal_form(), NF_ENERGY)


def test_normal_form_variants(nf_constants):
    m = normal_form()
    c = nf_constants
    x = 30.0
    blue = split_normal_form(m, 1 / x, "blue")
    red = split_normal_form(m, 1 / x, "red")
    assert abs(red.delta_E / blue.delta_E - math.exp(-c.S_oo * x)) < 1e-12
    s = math.sin(nf_phase(c) * x)
    expect = 2 / (x * c.T_in) * math.exp(-c.S_io * x - 0.5 * c.S_oo * x) / s**2
    assert abs(blue.delta_E / expect - 1) < 1e-12
    assert red.extra["slope"] < blue.extra["slope"]


def test_normal_form_resonance(nf_constants):
    a = nf_phase(nf_constants)
    with pytest.raises(ResonanceSingularity):
        split_normal_form(normal_form(), abs(a) / (10 * math.pi), "blue")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_sweep_order_and_csv():
    s = sweep(double_well(), [10.0, 12.0, 15.0])
    assert [p.inv_hbar for p in s.points] == [10.0, 12.0, 15.0]
    csv = s.to_csv().splitlines()
    assert csv[0] == "inv_hbar,source,variant,delta_E,sign_flag,error_code"
    assert csv[1].startswith("10,semiclassical,,")
    assert len(csv) == 4


def test_sweep_rejects_decreasing_grid():
    with pytest.raises(ValueError):
        sweep(double_well(), [3.0, 2.0])


def test_sweep_threads_are_deterministic():
    a = sweep(double_well(), np.linspace(5, 12, 6), threads=1).to_csv()
    b = sweep(double_well(), np.linspace(5, 12, 6), threads=3).to_csv()
    assert a == b


def test_normal_form_sweep_records_errors_in_rows(nf_constants):
    a = abs(nf_phase(nf_constants))
    x_res = 10 * math.pi / a
    s = sweep(normal_form(), [x_res - 1, x_res])
    codes = [(p.variant, p.error_code) for p in s.points]
    assert ("blue", "ResonanceSingularity") in codes and ("red", "ResonanceSingularity") in codes


def test_fitted_slope_of_exponential():
    from tunnelsplit.qref import SplittingPoint

    pts = [SplittingPoint(x, 3 * math.exp(-2.5 * x), "exact") for x in (1, 2, 3, 4)]
    assert abs(fitted_slope(pts) + 2.5) < 1e-12
