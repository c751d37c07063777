"""Half-densities ``f sqrt(d mu)`` over finitely many registered measures.

A vector is a finite formal sum of terms ``(f, mu)``.  Two vectors are compared
at a working depth ``D`` by rewriting every term against the reference measure
``m`` (the sum of all term measures): ``F = sum f_i sqrt(d mu_i / dm)``.  The
inner product of two terms is the atom sum
``sum_zeta f(zeta) g(zeta) sqrt(mu(zeta) nu(zeta))`` over depth-``D`` atoms.
All square roots take the nonnegative branch; signs live in the functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import DepthBudgetExceeded, NonNegativeRequired
from .kgraph import Path, compose
from .measures import CylinderFunction, CylinderMeasure, pushforward_prefix, table_measure
from .numeric import magnitude, sqrt
from .pathspace import atoms
from .projsys import LambdaProjectiveSystem
from .report import CheckRecord, Report


@dataclass(frozen=True)
class UniversalVector:
    terms: tuple
    depth: int
    budget: Optional[int] = None

    @classmethod
    def of(cls, f: CylinderFunction, mu: CylinderMeasure, depth: Optional[int] = None,
           budget: Optional[int] = None) -> "UniversalVector":
        return cls(((f, mu),), max(f.depth, depth or 0), budget)

    @property
    def graph(self):
        return self.terms[0][0].graph if self.terms else None

    def __add__(self, other: "UniversalVector") -> "UniversalVector":
        budget = self.budget if other.budget is None else \
            other.budget if self.budget is None else min(self.budget, other.budget)
        return UniversalVector(self.terms + other.terms, max(self.depth, other.depth), budget)

    def scaled(self, c) -> "UniversalVector":
        return UniversalVector(tuple((f * c, mu) for f, mu in self.terms), self.depth, self.budget)

    def at_depth(self, depth: int) -> "UniversalVector":
        return UniversalVector(self.terms, max(depth, self.depth), self.budget)

    def reference(self) -> CylinderMeasure:
        ref = self.terms[0][1]
        for _, mu in self.terms[1:]:
            ref = ref + mu
        return ref

    def canonical(self, reference: Optional[CylinderMeasure] = None,
                  depth: Optional[int] = None) -> CylinderFunction:
        """``F`` with ``self == F sqrt(dm)`` at the working depth."""
        m = reference or self.reference()
        D = max(self.depth, depth or 0)
        g = self.graph
        vals = {}
        for a in atoms(g, D):
            ma = m(a)
            if ma == 0:
                continue
            total = 0
            for f, mu in self.terms:
                fv = f.at(a)
                if fv == 0:
                    continue
                w = mu(a)
                if w != 0:
                    total = total + fv * sqrt(w / ma)
            if total != 0:
                vals[a] = total
        return CylinderFunction(g, D, vals)


def inner_product(x: UniversalVector, y: UniversalVector):
    """Real inner product evaluated at the larger of the two working depths."""
    D = max(x.depth, y.depth)
    g = x.graph or y.graph
    total = Fraction(0)
    for f, mu in x.terms:
        for h, nu in y.terms:
            for a in atoms(g, D):
                fv = f.at(a)
                if fv == 0:
                    continue
                hv = h.at(a)
                if hv == 0:
                    continue
                w = mu(a) * nu(a)
                if w != 0:
                    total = total + fv * hv * sqrt(w)
    return total


def norm_squared(x: UniversalVector):
    return inner_product(x, x)


def difference(x: UniversalVector, y: UniversalVector) -> float:
    """Largest atomwise gap between the canonical forms against a common reference."""
    D = max(x.depth, y.depth)
    joint = x + y
    ref = joint.reference()
    return x.canonical(ref, D).max_abs_diff(y.canonical(ref, D))


def apply_s_univ(lam: Path, x: UniversalVector, adjoint: bool = False) -> UniversalVector:
    """``S_lam (f sqrt(d mu)) = (f o sigma^n) sqrt(d(mu o sigma_lam^{-1}))`` or its adjoint
    ``(f o sigma_lam) sqrt(d(mu o sigma_lam))``."""
    n = lam.degree
    terms = []
    depth = x.depth
    for f, mu in x.terms:
        if adjoint:
            moved = f.compose_prefix(lam)
            terms.append((moved, pushforward_prefix(mu, lam, "image")))
        else:
            moved = f.compose_shift(n).coarsen()
            terms.append((moved, pushforward_prefix(mu, lam, "preimage")))
        depth = max(depth, moved.depth)
    if x.budget is not None and depth > x.budget:
        raise DepthBudgetExceeded(f"S_{lam}{'*' if adjoint else ''} needs depth {depth} "
                                  f"beyond the budget {x.budget}")
    return UniversalVector(tuple(terms), depth, x.budget)


def embed(f: CylinderFunction, mu: CylinderMeasure, depth: Optional[int] = None) -> UniversalVector:
    """``W_mu f = f sqrt(d mu)``."""
    return UniversalVector.of(f, mu, depth)


def _t_apply(s: LambdaProjectiveSystem, lam: Path, f: CylinderFunction) -> CylinderFunction:
    return s.f(lam) * f.compose_shift(lam.degree)


def embed_and_intertwine(s: LambdaProjectiveSystem, trials: list, tol: float = 0.0) -> Report:
    """Check that ``W_mu`` is isometric and carries ``T_lam`` to ``S^univ_lam`` on the trials."""
    if not s.is_nonnegative():
        raise NonNegativeRequired(f"{s.label} has a negative cocycle value; the universal "
                                  "embedding is only defined for nonnegative systems")
    mu = s.measure
    report = Report("universal-embedding")
    iso = report.add(CheckRecord("isometry"))
    inter = report.add(CheckRecord("intertwining"))
    for i, f in enumerate(trials):
        for j, h in enumerate(trials[i:], start=i):
            D = max(f.depth, h.depth)
            plain = sum((f.at(a) * h.at(a) * mu(a) for a in atoms(mu.graph, D)), Fraction(0))
            embedded = inner_product(embed(f, mu), embed(h, mu))
            iso.observe(magnitude(plain - embedded), tol, {"trials": [i, j]})
            iso.subspace_depth = max(iso.subspace_depth or 0, D)
        wf = embed(f, mu)
        for lam in s.paths():
            left = embed(_t_apply(s, lam, f), mu)
            right = apply_s_univ(lam, wf)
            D = max(left.depth, right.depth, s.f(lam).depth)
            inter.observe(difference(left.at_depth(D), right.at_depth(D)), tol,
                          {"trial": i, "lam": str(lam)})
            inter.subspace_depth = max(inter.subspace_depth or 0, D)
    return report


def nu_measure(y: UniversalVector, depth: Optional[int] = None) -> CylinderMeasure:
    """Table measure ``Z(lam) -> <S_lam S_lam^* y, y>`` on the atoms of the working depth."""
    D = max(y.depth, depth or 0)
    g = y.graph
    values = {}
    for a in atoms(g, D):
        z = apply_s_univ(a, apply_s_univ(a, y, adjoint=True))
        values[a] = inner_product(z.at_depth(D), y.at_depth(D))
    return table_measure(g, D, values, label="nu_y")


def nu_single_term_check(y: UniversalVector, depth: Optional[int] = None, tol: float = 0.0) -> Report:
    """For ``y = f sqrt(d mu)`` compare ``nu_y`` with ``|f|^2 mu`` on every cylinder up to depth."""
    if len(y.terms) != 1:
        raise ValueError("the comparison with |f|^2 mu needs a single-term vector")
    f, mu = y.terms[0]
    D = max(y.depth, depth or 0)
    nu = nu_measure(y, D)
    report = Report("nu-measure")
    rec = report.add(CheckRecord("nu = |f|^2 mu", subspace_depth=D))
    g = y.graph
    sq = f * f
    for d in range(D + 1):
        for a in atoms(g, d):
            expected = sum((sq.at(b) * mu(b) for b in _below(a, D)), Fraction(0))
            rec.observe(magnitude(nu(a) - expected), tol, str(a))
    return report


def _below(a: Path, D: int) -> list:
    g = a.graph
    need = tuple(D - x for x in a.degree)
    return [compose(a, eta) for eta in g.paths_from(a.s, need)]


__all__ = ["UniversalVector", "inner_product", "norm_squared", "difference", "apply_s_univ",
           "embed", "embed_and_intertwine", "nu_measure", "nu_single_term_check"]
