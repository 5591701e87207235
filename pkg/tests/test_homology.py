import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import barrier_action, infinity_loop, nf_branch_areas, well_action
from tunnelsplit.errors import UnknownLoop, UnsupportedModel
from tunnelsplit.homology import (
    build_basis,
    c3_printed,
    compose,
    evaluate_catalog,
    integrate_composed_path,
    maslov_index,
    simultaneous_quantization_check,
    verify_relations,
)
from tunnelsplit.models import NF_ENERGY, double_well, harmonic_oscillator, normal_form, triple_well

ASYM = (-2, -1, 1, 3)


@pytest.fixture(scope="module")
def asym_cat():
    return evaluate_catalog(double_well(ASYM), 0.5, loops=True)


@pytest.fixture(scope="module")
def tw_cat():
    return evaluate_catalog(triple_well(), 0.0, loops=True)


@pytest.fixture(scope="module")
def nf_cat():
    return evaluate_catalog(normal_form(), NF_ENERGY)


# ---------------------------------------------------------------------------
# catalog values against quadrature oracles
# ---------------------------------------------------------------------------


def test_double_well_actions_match_quadrature(asym_cat):
    A = asym_cat.actions
    E = 0.5
    from oracles import real_turning_points

    t = real_turning_points(ASYM, E)
    assert abs(A["S_L"].real - well_action(ASYM, t[0], t[1], E)) < 1e-9
    assert abs(A["S_R"].real - well_action(ASYM, t[2], t[3], E)) < 1e-9
    assert abs(abs(A["S_beta"].imag) - barrier_action(ASYM, t[1], t[2], E)) < 1e-9


def test_infinity_action_matches_contour_oracle(asym_cat):
    from tunnelsplit.homology import _roots_at_energy

    roots = [z.real for z in _roots_at_energy(double_well(ASYM), 0.5)]
    assert abs(abs(asym_cat.actions["S_inf"]) - abs(infinity_loop(roots))) < 1e-9


def test_printed_c3_differs_from_the_series_coefficient(asym_cat):
    # the printed closed form lacks the sqrt(2) from p^2/2; the corrected one matches
    A = asym_cat.actions
    assert abs(A["S_inf"] - A["S_inf_closed"]) < 1e-10
    assert abs(A["S_inf_printed"] * math.sqrt(2) - A["S_inf_closed"]) < 1e-10
    assert abs(A["S_inf_printed"] - A["S_inf"]) > 1


def test_c3_printed_vanishes_for_symmetric_roots():
    assert abs(c3_printed((-2, -1, 1, 2))) < 1e-15


def test_period_is_derivative_of_action():
    m = double_well(ASYM)
    h = 1e-5
    dS = (evaluate_catalog(m, 0.5 + h).actions["S_L"] - evaluate_catalog(m, 0.5 - h).actions["S_L"]) / (2 * h)
    T = evaluate_catalog(m, 0.5).periods["T_L"]
    assert abs(dS.real - abs(T)) < 1e-6


def test_normal_form_contours_match_p2_branch_areas(nf_cat):
    areas = nf_branch_areas(float(NF_ENERGY))
    inner = [a for k, lo, hi, a in areas if k == 0]
    outer = [a for k, lo, hi, a in areas if k == 1]
    S_in = nf_cat.actions["S_in"].real
    S_out = nf_cat.actions["S_out"].real
    assert any(abs(abs(S_in) - a) < 1e-9 for a in inner)
    assert any(abs(abs(S_out) - a) < 1e-9 for a in outer)


def test_normal_form_tunnelling_actions_are_imaginary(nf_cat):
    A = nf_cat.actions
    assert abs(A["S_out-out"].real) < 1e-8
    assert abs(A["S_out-out"] - A["S_out-out_segment"]) < 1e-8
    assert abs(A["S_in-out"].imag) > 0


def test_catalog_rejects_harmonic_oscillator():
    with pytest.raises(UnsupportedModel):
        evaluate_catalog(harmonic_oscillator(), 1.0)


# ---------------------------------------------------------------------------
# relations
# ---------------------------------------------------------------------------


def test_double_well_relations_all_pass(asym_cat):
    rels = verify_relations(asym_cat)
    assert rels and all(r.passed for r in rels), [r for r in rels if not r.passed]


def test_triple_well_relations_all_pass(tw_cat):
    rels = verify_relations(tw_cat)
    assert all(r.passed for r in rels), [r for r in rels if not r.passed]
    names = {r.name for r in rels}
    assert "S_C = 2 S_L + S^(+inf)" in names


def test_gamma_loops_vanish(asym_cat, tw_cat):
    for cat in (asym_cat, tw_cat):
        assert cat.diagnostics["gamma_branch_max"] < 1e-9


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "model, counts",
    [(double_well(), (1, 1, 4, 2)), (triple_well(), (2, 2, 6, 2))],
)
def test_multiwell_basis_counts(model, counts):
    b = build_basis(model)
    got = tuple(b.count(k) for k in ("alpha", "beta", "gamma_branch", "gamma_puncture"))
    assert got == counts
    assert sum(lp.dependent for lp in b) == 1


def test_unknown_loop_lookup():
    with pytest.raises(UnknownLoop):
        build_basis(double_well()).get("delta")


@pytest.mark.slow
def test_normal_form_basis_counts():
    b = build_basis(normal_form())
    assert (b.count("alpha"), b.count("beta")) == (9, 9)
    assert b.count("gamma_branch") + b.count("gamma_puncture") == 28
    assert b.extra["rank"] == b.extra["rank_target"] == 21


# ---------------------------------------------------------------------------
# composition and Maslov counting
# ---------------------------------------------------------------------------


def test_base_path_is_half_the_barrier(asym_cat):
    c = compose(asym_cat, {})
    assert c.maslov == 1
    assert abs(c.action - asym_cat.actions["S_beta"] / 2) < 1e-14


def test_two_alpha_windings(asym_cat):
    c = compose(asym_cat, {"alpha": 2})
    assert c.maslov == 5
    assert abs(c.action - (asym_cat.actions["S_beta"] / 2 + 2 * asym_cat.actions["S_L"])) < 1e-12


def test_triple_well_maslov_counts():
    assert maslov_index("triple_well", {}) == 3
    # n_C = 1 and n_L = -2 n_C
    assert maslov_index("triple_well", {"gamma+inf": 1}) == 1
    assert maslov_index("triple_well", {"alpha1": 1}) == 5


def test_dependent_loop_is_rejected(asym_cat, tw_cat):
    with pytest.raises(UnknownLoop):
        compose(asym_cat, {"gamma4": 1})
    with pytest.raises(UnknownLoop):
        compose(tw_cat, {"gamma6": 1})
    with pytest.raises(UnknownLoop):
        compose(asym_cat, {"delta": 1})


@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(-3, 3))
def test_maslov_parity_is_odd(na, nb, ng):
    assert maslov_index("double_well", {"alpha": na, "beta": nb, "gamma+inf": ng}) % 2 == 1
    assert maslov_index("triple_well", {"alpha1": na, "beta2": nb, "gamma+inf": ng}) % 2 == 1


@pytest.mark.parametrize("w", [{}, {"alpha": 1}, {"beta": -1}, {"alpha": 1, "gamma2": 2}])
def test_direct_path_matches_composition(w):
    m = double_well(ASYM)
    cat = evaluate_catalog(m, 0.5)
    assert abs(integrate_composed_path(m, 0.5, w) - compose(cat, w).action) < 1e-7


# ---------------------------------------------------------------------------
# simultaneous quantisation
# ---------------------------------------------------------------------------


def test_simultaneous_quantization_flags():
    cat = evaluate_catalog(double_well(), 0.0)
    SL = cat.actions["S_L"].real
    hbar = SL / (2 * math.pi * 2.5)  # m_L = 2
    rep = simultaneous_quantization_check(cat, hbar)
    assert rep.left_quantized and rep.infinity_integer
    assert rep.status == "simultaneously quantized"
    rep = simultaneous_quantization_check(cat, hbar * 1.01)
    assert not rep.left_quantized


def test_symmetric_triple_well_forces_equal_outer_actions(tw_cat):
    SL = tw_cat.actions["S_L"].real
    rep = simultaneous_quantization_check(tw_cat, SL / (2 * math.pi * 1.5))
    assert rep.left_quantized and rep.right_quantized and rep.symmetric_forces_equal
