import itertools
import math
from fractions import Fraction as F

import pytest

from kgrep import load_fixture, load_validate
from kgrep.errors import (DepthTooSmallForClosure, NotSequentializable, NotStochastic,
                          NotStronglyConnected, WeightRowNotStochastic)
from kgrep.kgraph import compose
from kgrep.measures import (CylinderFunction, bernoulli_measure, check_consistency,
                            hellinger_affinity, lebesgue_decompose, load_measure, markov_measure,
                            perron_frobenius_measure, pushforward_prefix, radon_nikodym,
                            table_measure)
from kgrep.pathspace import atoms


def markov(g2, x):
    x = F(x)
    return markov_measure(g2, 1, [1, 1], [[x, 1 - x], [1 - x, x]])


def hellinger_oracle(x, y, n):
    """Sum over blue words of sqrt(mu_x(word) mu_y(word)) computed from the chain directly.

    Both start weights are 1, so every word contributes its transition product.
    """
    def prob(t, word):
        p = 1.0
        for a, b in zip(word, word[1:]):
            p *= t if a == b else 1 - t
        return p
    return sum(math.sqrt(prob(x, w) * prob(y, w)) for w in itertools.product((0, 1), repeat=n))


def test_bernoulli(g2):
    mu = load_measure(g2, load_fixture("g2_bernoulli_half"))
    assert mu(g2.path("f1")) == F(1, 2)
    zero = bernoulli_measure(g2, {"v": 0}, {"f1": "1/2", "f2": "1/2", "e": 1})
    assert zero.degenerate and zero(g2.path("f1.e")) == 0
    with pytest.raises(WeightRowNotStochastic):
        bernoulli_measure(g2, {"v": 1}, {"f1": 0.3, "f2": 0.6, "e": 1})


def test_markov(g2, mu13):
    assert mu13(g2.path("f1.f2")) == F(2, 3)
    for x in ("1/4", "1/3", "3/4"):
        mu = markov(g2, x)
        assert mu(g2.path("e")) == mu(g2.vertex("v")) == 2


def test_markov_preconditions(g1, g2, g3):
    with pytest.raises(NotStochastic):
        markov_measure(g1, 1, [1, 1, 1], [["1/3"] * 3] * 3)
    # driving G2 by its single red edge leaves two blue edges into v
    with pytest.raises(NotSequentializable):
        markov_measure(g2, 2, [1], [[1]])
    # one edge of every color into each vertex: sequentializable
    assert markov_measure(g3, 1, [1], [[1]])(g3.path("c.b.a")) == 1


def test_perron_frobenius(g1, g2, g3):
    assert perron_frobenius_measure(g2)(g2.path("f1")) == F(1, 2)
    mu = perron_frobenius_measure(g3)
    assert all(mu(p) == 1 for d in range(3) for p in atoms(g3, d))
    with pytest.raises(NotStronglyConnected):
        perron_frobenius_measure(g1)


@pytest.mark.parametrize("name", ["g2_markov_1_3", "g2_markov_1_4", "g2_bernoulli_half",
                                  "g1_bernoulli", "g3_pf", "g4_uniform"])
def test_constructors_are_consistent(name):
    gname = name.split("_")[0]
    g = load_validate(load_fixture(gname))
    mu = load_measure(g, load_fixture(name))
    report = check_consistency(mu, 3)
    assert report["pass"] and report["max_deviation"] == 0.0


def test_pushforward(g2, mu13):
    f1 = g2.path("f1")
    assert pushforward_prefix(mu13, f1, "preimage")(g2.path("f1.f2")) == 1
    assert pushforward_prefix(mu13, f1, "image")(g2.path("f2")) == F(2, 3)
    v = g2.vertex("v")
    assert pushforward_prefix(mu13, v, "preimage")(f1) == mu13(f1)


def test_pushforward_pair(g2, mu13):
    lam = g2.path("f2.e")
    image = pushforward_prefix(mu13, lam, "image")
    pre = pushforward_prefix(mu13, lam, "preimage")
    for d in range(3):
        for eta in atoms(g2, d):
            assert image(eta) == mu13(compose(lam, eta))
            assert pre(compose(lam, eta)) == mu13(eta)
    # the two differ in general: mass of Z(f2.e) against mass of Z(v)
    assert image(g2.vertex("v")) == 1 and pre(lam) == 2


def test_radon_nikodym(g2, mu13):
    pushed = pushforward_prefix(mu13, g2.path("f1"), "preimage")
    h, singular = radon_nikodym(pushed, mu13, 2)
    assert singular == []
    assert {str(k): v for k, v in h.values.items()} == {"f1.f1.e.e": 3, "f1.f2.e.e": F(3, 2)}
    same, _ = radon_nikodym(mu13, mu13, 2)
    assert set(same.values.values()) == {1}


def test_radon_nikodym_chain_rule(g2, mu13, mu14, mu34):
    a, _ = radon_nikodym(mu34, mu14, 3)
    b, _ = radon_nikodym(mu14, mu13, 3)
    c, _ = radon_nikodym(mu34, mu13, 3)
    assert (a * b).max_abs_diff(c) == 0.0


def test_radon_nikodym_disjoint_supports(g2, mu13):
    on_f1 = table_measure(g2, 1, {"f1.e": 1})
    on_f2 = table_measure(g2, 1, {"f2.e": 1})
    _, singular = radon_nikodym(on_f1, on_f2, 1)
    assert [str(a) for a in singular] == ["f1.e"]
    dec = lebesgue_decompose(on_f1, on_f2, 1)
    assert dec.density.values == {}


def test_lebesgue_against_degenerate(g2, mu13):
    only_f2 = bernoulli_measure(g2, {"v": 1}, {"f1": 0, "f2": 1, "e": 1})
    dec = lebesgue_decompose(mu13, only_f2, 4)
    assert len(dec.singular_atoms) == 15
    assert [str(a) for a in dec.regular_atoms] == ["f2.f2.f2.f2.e.e.e.e"]
    assert all("f1" in str(a) for a in dec.singular_atoms)
    assert dec.residual == 0


def test_lebesgue_equivalent(g2, mu13, mu14):
    dec = lebesgue_decompose(mu14, mu13, 3)
    assert dec.singular_atoms == []


def test_lebesgue_closure_needs_depth(g1):
    mu = bernoulli_measure(g1, {"v1": 1, "v2": 0}, {"f1": "1/2", "f2": "1/2", "f3": 1})
    ref = bernoulli_measure(g1, {"v1": 1, "v2": 1}, {"f1": "1/2", "f2": "1/2", "f3": 1})
    with pytest.raises(DepthTooSmallForClosure):
        lebesgue_decompose(ref, mu, 3)


@pytest.mark.parametrize("n", range(1, 13))
def test_hellinger_closed_form_and_oracle(mu14, mu34, n):
    rep = hellinger_affinity(mu14, mu34, n)
    value = float(rep.values[-1])
    assert abs(value - 2 * (math.sqrt(3) / 2) ** (n - 1)) <= 1e-9
    assert abs(value - hellinger_oracle(0.25, 0.75, n)) <= 1e-9


def test_hellinger_verdicts(g2, mu13, mu14, mu34):
    rep = hellinger_affinity(mu14, mu34, 8)
    assert rep.verdict == "singular-likely"
    assert rep.values[1] == rep.values[1] and str(rep.values[1]) == "sqrt(3)"
    assert rep.values[2] == F(3, 2)
    half = hellinger_affinity(mu13, mu13.scaled(F(1, 2)), 6)
    assert half.verdict == "equivalent-likely"
    assert all(v == half.values[0] for v in half.values)
    assert abs(float(half.values[0]) - math.sqrt(2)) < 1e-12
    same = hellinger_affinity(mu13, mu13, 4)
    assert all(v == 2 for v in same.values)


def test_hellinger_monotone(mu13, mu14, mu34):
    for a, b in [(mu13, mu14), (mu14, mu34), (mu13, mu34)]:
        vals = [float(v) for v in hellinger_affinity(a, b, 7).values]
        assert all(y <= x + 1e-12 for x, y in zip(vals, vals[1:]))


def test_cylinder_function_arithmetic(g2, mu13):
    f = CylinderFunction.indicator(g2.path("f1"), 1)
    assert f.lift(2).coarsen(mu13).depth == 1
    assert (f * 2 - f - f).values == {}
    shifted = f.compose_shift((1, 0))
    assert shifted.at(g2.path("f2.f1.e.e")) == 1 and shifted.at(g2.path("f1.f2.e.e")) == 0
