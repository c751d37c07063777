from fractions import Fraction as F

import pytest

from kgrep import load_fixture
from kgrep.errors import DepthBudgetExceeded
from kgrep.measures import CylinderFunction, bernoulli_measure, load_measure, markov_measure
from kgrep.numeric import sqrt
from kgrep.pathspace import atoms
from kgrep.projsys import (edge_character, interval_sbfs_load_verify, replace_function,
                           rescale_system, standard_system)
from kgrep.repn import (build_truncation, commutant_invariants, discretize_interval,
                        equivalence_check, intertwiner_check, measure_from_state, monic_span_check,
                        pvm_checks, verify_ck)


@pytest.fixture(scope="module")
def rep13(mu13):
    return build_truncation(standard_system(mu13, degree_cap=2), 5)


def markov(g2, x):
    x = F(x)
    return markov_measure(g2, 1, [1, 1], [[x, 1 - x], [1 - x, x]])


def test_matrix_shapes(g2, rep13):
    m = rep13.matrix(g2.path("f1"), 3)
    assert any(m.values())
    assert all(len(col) <= 1 for col in m.values())
    diag = rep13.matrix(g2.vertex("v"), 3)
    assert all(col == {label: 1} for label, col in diag.items())


def test_null_atoms_dropped(g1):
    mu = bernoulli_measure(g1, {"v1": 1, "v2": 0}, {"f1": "1/2", "f2": "1/2", "f3": 1})
    s = standard_system(mu, degree_cap=1)
    rep = build_truncation(s, 3)
    labels = [label for label, _ in rep.basis(2)]
    assert "f1.f1" in labels and "f3.f3" not in labels
    assert s.null_atoms


def test_budget_too_small(mu13):
    with pytest.raises(DepthBudgetExceeded):
        build_truncation(standard_system(mu13, degree_cap=2), 2)


def test_ck_exact(rep13):
    report = verify_ck(rep13)
    assert [c.relation for c in report.checks] == ["CK1", "CK2", "CK3", "CK4", "lambda-min"]
    assert report.passed and report.max_deviation == 0.0
    assert all(c.subspace_depth is not None for c in report.checks)


def test_ck_in_doubles(mu13):
    rep = build_truncation(standard_system(mu13.as_float(), degree_cap=2), 5)
    report = verify_ck(rep, 1e-12)
    assert report.passed and report.max_deviation <= 1e-12


def test_corrupted_modulus_shows_in_ck3(g2, mu13):
    s = standard_system(mu13, degree_cap=2)
    f1 = g2.path("f1")
    bad = replace_function(s, f1, s.f(f1) * sqrt(F(101, 100)))
    report = verify_ck(build_truncation(bad, 5), 1e-9)
    ck3 = report.check("CK3")
    assert not ck3.passed
    assert abs(ck3.max_deviation - 0.01) < 1e-12
    assert ck3.witnesses[0]["where"] == {"lam": "f1"}


def test_partial_isometry(g2, rep13):
    for lam in (g2.path("f1"), g2.path("f2.e"), g2.path("f1.f2.e")):
        for _, x in rep13.basis(2):
            lhs = rep13.t(lam, rep13.t_adj(lam, rep13.t(lam, x)))
            assert lhs.max_abs_diff(rep13.t(lam, x), rep13.measure) == 0.0


def test_pvm_exact(rep13):
    report = pvm_checks(rep13)
    assert report.passed and report.max_deviation == 0.0
    assert report.check("totality").subspace_depth == 5


def test_pvm_d_single_pair(g2, rep13):
    lam, eta = g2.path("e"), g2.path("f1")
    pulled = [g2.path("f1.e")]
    for _, x in rep13.basis(3):
        lhs = rep13.t(lam, rep13.p(eta, x))
        rhs = sum((rep13.p(c, rep13.t(lam, x)) for c in pulled[1:]), rep13.p(pulled[0], rep13.t(lam, x)))
        assert lhs.max_abs_diff(rhs, rep13.measure) == 0.0


def test_pvm_c_different_ranges(g1):
    mu = load_measure(g1, load_fixture("g1_bernoulli"))
    rep = build_truncation(standard_system(mu, degree_cap=1), 4)
    lam, eta = g1.path("f2"), g1.path("f3")
    for _, x in rep.basis(2):
        assert rep.p(eta, rep.t(lam, x)).values == {}
    assert pvm_checks(rep).passed


def test_state_measure(g2, mu13, rep13):
    state = measure_from_state(rep13)
    assert state.max_depth == 5
    for d in range(6):
        for a in atoms(g2, d):
            assert state(a) == mu13(a)
    xi = CylinderFunction.indicator(g2.path("f1"), 1)
    assert measure_from_state(rep13, xi)(g2.path("f2")) == 0
    tripled = measure_from_state(rep13, xi * 3)
    assert tripled(g2.path("f1.f2")) == 9 * measure_from_state(rep13, xi)(g2.path("f1.f2"))


def test_monic_span(g2, g3, rep13):
    full = monic_span_check(rep13)
    assert full["pass"] and full["rank"] == full["dimension"] == 32
    xi = CylinderFunction.indicator(g2.path("f1"), 1)
    part = monic_span_check(rep13, xi)
    assert not part["pass"] and part["rank"] == 16
    mu = load_measure(g3, load_fixture("g3_pf"))
    one = monic_span_check(build_truncation(standard_system(mu, degree_cap=1), 2))
    assert one["dimension"] == 1 and one["pass"]


@pytest.mark.parametrize("x", ["1/4", "1/3", "1/2"])
@pytest.mark.parametrize("depth", [2, 3, 4])
def test_commutant_g2(g2, x, depth):
    assert commutant_invariants(markov(g2, x), depth).dimension == 1


def test_commutant_g4(g4):
    mu = load_measure(g4, load_fixture("g4_uniform"))
    res = commutant_invariants(mu, 3)
    assert res.dimension == 2
    assert [[str(a) for a in c] for c in res.classes] == [["p.p.p"], ["q.q.q"]]
    assert commutant_invariants(mu, 0).dimension == 2
    dims = [commutant_invariants(mu, d).dimension for d in range(4)]
    assert dims == sorted(dims, reverse=True)


def test_equivalence_identity(mu13):
    s = standard_system(mu13, degree_cap=2)
    res = equivalence_check(s, s, 2)
    assert res.verdict == "equivalent"
    assert set(res.h.values.values()) == {1}


def test_equivalence_rescale(g2, mu13):
    t = standard_system(mu13, degree_cap=2)
    g1 = CylinderFunction(g2, 1, {g2.path("f1.e"): F(3, 2), g2.path("f2.e"): F(1, 2)})
    s = rescale_system(t, g1)
    res = equivalence_check(s, t, 2)
    assert res.verdict == "equivalent"
    assert (res.h * res.h).max_abs_diff(g1) == 0.0
    assert res.report.check("cocycle").max_deviation == 0.0
    w = intertwiner_check(build_truncation(s, 5), build_truncation(t, 5), res.h, 1e-12)
    assert w.passed and w.check("W T^S = T^T W").subspace_depth is not None


def test_equivalence_singular(g2, mu14, mu34):
    res = equivalence_check(standard_system(mu14, degree_cap=2), standard_system(mu34, degree_cap=2), 3)
    assert res.verdict == "measure-obstructed"
    assert res.hellinger["verdict"] == "singular-likely"


def test_equivalence_sign_obstruction(mu13):
    s = standard_system(mu13, degree_cap=2)
    res = equivalence_check(edge_character(s, {"e": -1}), s, 2)
    assert res.verdict == "cocycle-obstructed" and res.h is None


def test_interval_ck_level_8(g1):
    sbfs = interval_sbfs_load_verify(g1, load_fixture("g1_sbfs"))
    report = verify_ck(discretize_interval(sbfs, 8, cap=2))
    assert report.passed and report.max_deviation == 0.0
