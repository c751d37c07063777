import math
import random
from fractions import Fraction as F

import pytest

from kgrep.errors import DepthBudgetExceeded, NonNegativeRequired
from kgrep import load_fixture
from kgrep.kgraph import lambda_min
from kgrep.measures import (CylinderFunction, hellinger_affinity, load_measure, pushforward_prefix,
                            table_measure)
from kgrep.pathspace import atoms
from kgrep.projsys import edge_character, standard_system
from kgrep.universal import (UniversalVector, apply_s_univ, difference, embed, embed_and_intertwine,
                             inner_product, nu_measure, nu_single_term_check)


def trials(g, depth, count, seed=0):
    rng = random.Random(seed)
    return [CylinderFunction(g, depth, {a: F(rng.randint(-9, 9), rng.randint(1, 9))
                                        for a in atoms(g, depth)}) for _ in range(count)]


def one(g):
    return CylinderFunction.constant(g, F(1))


def test_unit_norm(g2, mu13):
    assert inner_product(embed(one(g2), mu13), embed(one(g2), mu13)) == mu13.total() == 2


@pytest.mark.parametrize("n", range(1, 9))
def test_unit_inner_product_matches_affinity(g2, mu14, mu34, n):
    value = inner_product(embed(one(g2), mu14, n), embed(one(g2), mu34, n))
    assert value == hellinger_affinity(mu14, mu34, n).values[-1]
    assert abs(float(value) - 2 * (math.sqrt(3) / 2) ** (n - 1)) < 1e-12


def test_disjoint_supports(g2, mu13):
    x = embed(CylinderFunction.indicator(g2.path("f1"), 1), mu13)
    y = embed(CylinderFunction.indicator(g2.path("f2"), 1), mu13)
    assert inner_product(x, y) == 0


def test_equivalence_classes(g2, mu13):
    # 2 sqrt(d mu) and 1 sqrt(d(4 mu)) are the same vector
    x = embed(one(g2) * 2, mu13, 2)
    y = embed(one(g2), mu13.scaled(4), 2)
    assert difference(x, y) == 0.0
    assert inner_product(x, x) == inner_product(y, y) == 8


def test_vertex_restricts(g1):
    mu = load_measure(g1, load_fixture("g1_bernoulli"))
    x = embed(one(g1), mu, 1)
    y = apply_s_univ(g1.vertex("v1"), x)
    assert inner_product(y, y) == mu(g1.vertex("v1"))


def test_s_star_s_on_unit(g2, mu13):
    lam = g2.path("f1.e")
    x = embed(one(g2), mu13, 2)
    back = apply_s_univ(lam, apply_s_univ(lam, x), adjoint=True)
    target = embed(CylinderFunction.indicator(g2.vertex("v"), 0), mu13, 2)
    assert difference(back, target) == 0.0


def test_s_on_unit_has_pushforward_measure(g2, mu13):
    lam = g2.path("f1")
    y = apply_s_univ(lam, embed(one(g2), mu13))
    assert len(y.terms) == 1
    pushed = pushforward_prefix(mu13, lam, "preimage")
    for a in atoms(g2, 2):
        assert y.terms[0][1](a) == pushed(a)


def test_budget(g2, mu13):
    f = CylinderFunction.indicator(g2.path("f1"), 1)
    x = UniversalVector.of(f, mu13, 1, budget=2)
    with pytest.raises(DepthBudgetExceeded):
        apply_s_univ(g2.path("f1.f1.f1"), x)
    # a constant needs no extra resolution after shifting
    assert apply_s_univ(g2.path("f1.f1.f1"), UniversalVector.of(one(g2), mu13, 1, budget=2)).depth == 1


def test_embed_and_intertwine(g2, mu13):
    s = standard_system(mu13, degree_cap=2)
    report = embed_and_intertwine(s, trials(g2, 3, 20))
    assert report.passed and report.max_deviation == 0.0
    assert report.check("intertwining").count == 20 * len(s.paths())


def test_unit_intertwining(g2, mu13):
    s = standard_system(mu13, degree_cap=2)
    assert embed_and_intertwine(s, [one(g2)]).passed


def test_signed_system_rejected(mu13):
    s = edge_character(standard_system(mu13, degree_cap=2), {"f1": -1})
    with pytest.raises(NonNegativeRequired):
        embed_and_intertwine(s, [])


def test_nu_of_unit(g2, mu13):
    nu = nu_measure(embed(one(g2), mu13, 3))
    for d in range(4):
        for a in atoms(g2, d):
            assert nu(a) == mu13(a)


def test_nu_scaled_indicator(g2, mu13):
    f = CylinderFunction.indicator(g2.path("f1"), 1) * 2
    nu = nu_measure(embed(f, mu13, 3))
    for a in atoms(g2, 3):
        expected = 4 * mu13(a) if a.edges[0] == "f1" else 0
        assert nu(a) == expected


def test_nu_random_functions(g2, mu13):
    for f in trials(g2, 3, 5, seed=3):
        assert nu_single_term_check(embed(f, mu13, 3)).passed


def test_nu_of_singular_sum(g2):
    on_f1 = table_measure(g2, 2, {"f1.f1.e.e": 1, "f1.f2.e.e": 1})
    on_f2 = table_measure(g2, 2, {"f2.f1.e.e": F(1, 2), "f2.f2.e.e": F(3, 2)})
    x, y = embed(one(g2), on_f1, 2), embed(one(g2) * 3, on_f2, 2)
    total = nu_measure(x + y)
    for a in atoms(g2, 2):
        assert total(a) == nu_measure(x)(a) + nu_measure(y)(a)


def test_nu_transport(g2, mu13):
    lam = g2.path("f2")
    y = embed(trials(g2, 2, 1, seed=5)[0], mu13, 3)
    moved = nu_measure(apply_s_univ(lam, y), 3)
    base = nu_measure(y, 3)
    for eta in atoms(g2, 1):
        assert moved(eta) == sum((base(a) for a, _ in lambda_min(lam, eta)), F(0))
