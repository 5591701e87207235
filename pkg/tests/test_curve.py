import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tunnelsplit.curve import (
    branch_points,
    compose,
    cycles,
    identity,
    inverse,
    is_transitive,
    monodromy_at,
    topology,
    topology_report,
)
from tunnelsplit.errors import IntransitiveMonodromy
from tunnelsplit.models import NF_ENERGY, P, Q, custom, double_well, normal_form, potential_model, triple_well


@pytest.fixture(scope="module")
def nf_top():
    return topology(normal_form().curve(NF_ENERGY))


# ---------------------------------------------------------------------------
# permutations
# ---------------------------------------------------------------------------


@given(st.permutations(range(5)), st.permutations(range(5)))
def test_permutation_group_laws(a, b):
    a, b = tuple(a), tuple(b)
    assert compose(a, inverse(a)) == identity(5)
    assert inverse(compose(a, b)) == compose(inverse(b), inverse(a))
    assert sum(len(c) for c in cycles(a)) == 5


def test_transitivity():
    assert is_transitive([(1, 0, 2), (0, 2, 1)], 3)
    assert not is_transitive([(1, 0, 2, 3), (0, 1, 3, 2)], 4)


# ---------------------------------------------------------------------------
# local monodromy
# ---------------------------------------------------------------------------


def test_monodromy_of_sqrt_is_transposition():
    F = P * P - Q
    assert monodromy_at(F, 0.0, 0.5) == (1, 0)


def test_monodromy_at_regular_point_is_identity():
    F = P * P - Q
    assert monodromy_at(F, 5.0, 0.5) == (0, 1)


def test_normal_form_branch_monodromies_are_transpositions(nf_top):
    for bp in nf_top.branch_points:
        moved = [i for i, j in enumerate(bp.monodromy) if i != j]
        assert len(moved) == 2
        assert bp.ramification == 2


# ---------------------------------------------------------------------------
# topology of the three model families
# ---------------------------------------------------------------------------


def test_double_well_topology():
    top = topology(double_well().curve(0))
    assert (top.sheet_count, top.ramification_index, top.genus) == (2, 4, 1)
    assert np.allclose(sorted(b.location.real for b in top.branch_points), [-2, -1, 1, 2], atol=1e-10)


def test_triple_well_topology():
    top = topology(triple_well().curve(0))
    assert (top.sheet_count, top.ramification_index, top.genus) == (2, 6, 2)
    assert all(abs(b.location.imag) < 1e-10 for b in top.branch_points)


def test_normal_form_topology(nf_top):
    assert (nf_top.sheet_count, nf_top.ramification_index, nf_top.genus) == (4, 24, 9)
    assert len(nf_top.punctures) == 4
    assert nf_top.holes == 28
    assert nf_top.genus == nf_top.genus_riemann_hurwitz
    assert nf_top.product_is_identity()


def test_normal_form_branch_points_come_in_pairs(nf_top):
    # H(p, q) = H(p, -q) = H(-p, q): the branch points are symmetric under q -> -q and conjugation
    locs = np.array([b.location for b in nf_top.branch_points])
    for z in locs:
        assert np.min(np.abs(locs + z)) < 1e-10
        assert np.min(np.abs(locs - np.conj(z))) < 1e-10


def test_symmetric_double_well_branch_points_pair_up():
    locs = np.array([b.location for b in branch_points(double_well((-2.5, -0.5, 0.5, 2.5)).curve(0.1))])
    for z in locs:
        assert np.min(np.abs(locs + z)) < 1e-10


def test_report_contains_counts(nf_top):
    text = topology_report(nf_top)
    assert "genus: 9" in text and "holes: 28" in text
    assert "monodromy_product_identity: true" in text


def test_reducible_curve_warns():
    F = custom({(2, 0): 1, (0, 2): -1}).curve(0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        top = topology(F)
    assert not top.transitive
    assert any(issubclass(x.category, IntransitiveMonodromy) for x in w)


# ---------------------------------------------------------------------------
# properties over random curves
# ---------------------------------------------------------------------------


_coef = st.floats(-2, 2, allow_nan=False).filter(lambda x: abs(x) > 1e-3)


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.sampled_from([4, 6]), st.lists(_coef, min_size=6, max_size=6), st.floats(-1, 1))
def test_monodromy_product_and_genus_on_random_potentials(deg, c, E):
    m = potential_model(c[:deg] + [1])
    top = topology(m.curve(E), warn=False)
    assert top.product_is_identity()
    assert top.genus == deg // 2 - 1
    assert top.genus == top.genus_riemann_hurwitz


@settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(_coef, min_size=4, max_size=4))
def test_monodromy_product_on_random_cubic_in_p(c):
    # p^3 + a p q + b q^3 + c q + d: three sheets, generic branching
    F = custom({(3, 0): 1, (1, 1): c[0], (0, 3): c[1], (0, 1): c[2], (0, 0): c[3]}).curve(0)
    top = topology(F, warn=False)
    assert top.sheet_count == 3
    assert top.product_is_identity()
    assert top.genus == top.genus_riemann_hurwitz
