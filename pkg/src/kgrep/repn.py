"""Finite-depth realizations of Cuntz-Krieger families and their checks.

Vectors of ``L^2(mu)`` are functions constant on the atoms of some depth
``D <= M``.  ``T_lam`` raises the depth by ``max(d(lam))`` (and to the
resolution of ``f_lam``); an operator identity is therefore checked on the
largest subspace ``H_D`` on which every intermediate vector still fits in the
depth budget ``M``.  Adjoints are computed against the measure-weighted inner
product directly from the measure, so a system whose ``f_lam`` has the wrong
modulus shows up as a failed relation rather than being hidden by a formula.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import DepthBudgetExceeded
from .kgraph import Path, compose, degree_max, factorize, lambda_min
from .measures import CylinderFunction, CylinderMeasure, hellinger_affinity, radon_nikodym, table_measure
from .numeric import magnitude, sign, sqrt
from .pathspace import atoms
from .projsys import IntervalSBFS, LambdaProjectiveSystem, paths_within, _as_cap
from .report import CheckRecord, Report


# ---------------------------------------------------------------------------
# Hilbert space and representation on the path space
# ---------------------------------------------------------------------------

class TruncatedHilbert:
    """``L^2(mu)`` restricted to functions constant on depth-``M`` atoms."""

    def __init__(self, measure: CylinderMeasure, M: int):
        self.measure = measure
        self.graph = measure.graph
        self.M = M
        self._basis: dict = {}

    def weight(self, a: Path):
        return self.measure(a)

    def basis(self, D: int) -> list:
        """Indicators of the positive-measure atoms of depth ``D``."""
        hit = self._basis.get(D)
        if hit is None:
            hit = [(str(a), CylinderFunction(self.graph, D, {a: Fraction(1)}))
                   for a in atoms(self.graph, D) if self.measure(a) != 0]
            self._basis[D] = hit
        return list(hit)

    @property
    def dim(self) -> int:
        return sum(1 for a in atoms(self.graph, self.M) if self.measure(a) != 0)

    def inner(self, u: CylinderFunction, v: CylinderFunction):
        depth = max(u.depth, v.depth)
        a, b = u.lift(depth), v.lift(depth)
        total = Fraction(0)
        for k, x in a.values.items():
            y = b.values.get(k, 0)
            if y != 0:
                total = total + x * y * self.measure(k)
        return total

    def one(self) -> CylinderFunction:
        return CylinderFunction.constant(self.graph, Fraction(1), 0)


class TruncatedRepresentation:
    """Operators ``T_lam f = f_lam * (f o sigma^{d(lam)})`` on a truncated space."""

    def __init__(self, system: LambdaProjectiveSystem, M: int, cap=None):
        self.system = system
        self.space = TruncatedHilbert(system.measure, M)
        self.graph = system.graph
        self.measure = system.measure
        self.M = M
        self.cap = system.cap if cap is None else _as_cap(self.graph, cap)
        look = system.measure.lookahead
        self.lookahead = look if look is not None else system.resolution
        self._phi: dict = {}
        # results keyed by operator and input identity; the input is kept alive
        # alongside so its id cannot be reused while the entry exists
        self._memo: dict = {}

    # bookkeeping --------------------------------------------------------------
    def paths(self) -> list:
        return paths_within(self.graph, self.cap)

    def basis(self, D: int) -> list:
        return self.space.basis(D)

    def _fit(self, x: CylinderFunction) -> CylinderFunction:
        if x.depth <= self.M:
            return x
        y = x.coarsen(self.measure)
        if y.depth > self.M:
            raise DepthBudgetExceeded(
                f"result needs depth {x.depth} (at least {y.depth}) beyond the budget {self.M}")
        return y

    def diff(self, x: CylinderFunction, y: CylinderFunction) -> float:
        return x.max_abs_diff(y, self.measure)

    def zero(self) -> CylinderFunction:
        return CylinderFunction(self.graph, 0, {})

    # operators ------------------------------------------------------------------
    def _memoized(self, kind: str, lam: Path, x: CylinderFunction, compute) -> CylinderFunction:
        key = (kind, lam.r, lam.edges, id(x))
        hit = self._memo.get(key)
        if hit is None:
            hit = (x, compute(lam, x))
            self._memo[key] = hit
        return hit[1]

    def t(self, lam: Path, x: CylinderFunction) -> CylinderFunction:
        return self._memoized("t", lam, x, self._t)

    def t_adj(self, lam: Path, x: CylinderFunction) -> CylinderFunction:
        return self._memoized("t*", lam, x, self._t_adj)

    def _t(self, lam: Path, x: CylinderFunction) -> CylinderFunction:
        f = self.system.f(lam)
        n = lam.degree
        depth = max(x.depth + degree_max(n), f.depth)
        fl = f.lift(depth)
        vals = {}
        for a, fv in fl.values.items():
            v = x.at(factorize(a, n)[1])
            if v != 0:
                vals[a] = fv * v
        return self._fit(CylinderFunction(self.graph, depth, vals))

    def _phi_at(self, lam: Path, b: Path):
        """``d(mu o sigma_lam)/d mu`` on the atom ``b`` of ``Z(s(lam))``."""
        key = (lam.r, lam.edges, b.r, b.edges)
        hit = self._phi.get(key)
        if hit is None:
            m = self.measure(b)
            hit = self.measure(compose(lam, b)) / m if m != 0 else Fraction(0)
            self._phi[key] = hit
        return hit

    def _t_adj(self, lam: Path, x: CylinderFunction) -> CylinderFunction:
        f = self.system.f(lam)
        n = lam.degree
        depth = max([0, self.lookahead] + [x.depth - c for c in n] + [f.depth - c for c in n])
        if depth > self.M:
            raise DepthBudgetExceeded(f"adjoint of T_{lam} needs depth {depth}")
        vals = {}
        for b in atoms(self.graph, depth):
            if b.r != lam.s or self.measure(b) == 0:
                continue
            lb = compose(lam, b)
            fv = f.at(lb)
            if fv == 0:
                continue
            v = x.at(lb)
            if v == 0:
                continue
            vals[b] = self._phi_at(lam, b) * fv * v
        return CylinderFunction(self.graph, depth, vals)

    def vertex_projection(self, v: str, x: CylinderFunction) -> CylinderFunction:
        return self.t(self.graph.vertex(v), x)

    def p(self, lam: Path, x: CylinderFunction) -> CylinderFunction:
        """``P(Z(lam)) x = T_lam T_lam^* x``."""
        return self.t(lam, self.t_adj(lam, x))

    def matrix(self, lam: Path, D: int) -> dict:
        """Sparse matrix of ``T_lam`` from ``H_D`` into the output atoms."""
        out = {}
        for label, e in self.basis(D):
            col = self.t(lam, e)
            out[label] = {str(k): v for k, v in col.values.items() if v != 0}
        return out


def build_truncation(system: LambdaProjectiveSystem, M: int, cap=None) -> TruncatedRepresentation:
    """Assemble the truncated family; every ``T_lam`` within the cap must fit in depth ``M``."""
    rep = TruncatedRepresentation(system, M, cap)
    for lam in rep.paths():
        need = system.f(lam).depth
        if need > M:
            raise DepthBudgetExceeded(
                f"f_{lam} needs depth {need} but the budget is {M}", str(lam), need)
    return rep


# ---------------------------------------------------------------------------
# interval representation on dyadic step functions
# ---------------------------------------------------------------------------

class DyadicFunction:
    """Step function on ``[0, 1)`` constant on the dyadic cells of one level."""

    __slots__ = ("depth", "values")

    def __init__(self, depth: int, values: dict):
        self.depth = depth
        self.values = values

    def lift(self, depth: int) -> "DyadicFunction":
        if depth == self.depth:
            return self
        if depth < self.depth:
            raise DepthBudgetExceeded(f"cannot lower level {self.depth} to {depth}")
        k = 1 << (depth - self.depth)
        return DyadicFunction(depth, {j * k + i: v for j, v in self.values.items() for i in range(k)})

    def at_point(self, x: Fraction):
        return self.values.get(math.floor(x * (1 << self.depth)), 0)

    def _binary(self, other, op):
        depth = max(self.depth, other.depth)
        a, b = self.lift(depth), other.lift(depth)
        vals = {}
        for k in set(a.values) | set(b.values):
            v = op(a.values.get(k, 0), b.values.get(k, 0))
            if v != 0:
                vals[k] = v
        return DyadicFunction(depth, vals)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __mul__(self, c):
        if isinstance(c, DyadicFunction):
            return self._binary(c, lambda x, y: x * y)
        return DyadicFunction(self.depth, {k: v * c for k, v in self.values.items() if v * c != 0})

    __rmul__ = __mul__

    def max_abs_diff(self, other: "DyadicFunction", weights=None) -> float:
        depth = max(self.depth, other.depth)
        a, b = self.lift(depth), other.lift(depth)
        return max((magnitude(a.values.get(k, 0) - b.values.get(k, 0))
                    for k in set(a.values) | set(b.values)), default=0.0)


class IntervalRepresentation:
    """Operators of an affine interval system on dyadic step functions (Lebesgue measure).

    ``T_lam g = |slope_lam|^{-1/2} chi_{R_lam} (g o tau_lam^{-1})`` and the adjoint
    ``T_lam^* h = |slope_lam| * f_lam(tau_lam y) h(tau_lam y)`` on ``D_{s(lam)}``.
    Each operator is compiled once per input level into a cell-to-cell plan.
    """

    def __init__(self, sbfs: IntervalSBFS, M: int, cap=None):
        self.sbfs = sbfs
        self.graph = sbfs.graph
        self.M = M
        self.cap = _as_cap(self.graph, 2 if cap is None else cap)
        self._plans: dict = {}
        self._basis: dict = {}

    def paths(self) -> list:
        return paths_within(self.graph, self.cap)

    @staticmethod
    def _inside(lo: Fraction, hi: Fraction, pieces) -> bool:
        mid = (lo + hi) / 2
        return any(iv.contains(mid) for iv in pieces)

    def basis(self, D: int) -> list:
        hit = self._basis.get(D)
        if hit is None:
            n = 1 << D
            space = self.sbfs.space()
            hit = [(f"[{j}/{n},{j + 1}/{n})", DyadicFunction(D, {j: Fraction(1)}))
                   for j in range(n) if self._inside(Fraction(j, n), Fraction(j + 1, n), space)]
            self._basis[D] = hit
        return hit

    def diff(self, x, y) -> float:
        return x.max_abs_diff(y)

    def zero(self):
        return DyadicFunction(0, {})

    def _plan(self, level: int, cells, mapping, in_level: int):
        """Map every cell inside ``cells`` into one input cell, or return None."""
        n = 1 << level
        m = 1 << in_level
        if not all((x * n).denominator == 1 for iv in cells for x in (iv.lo, iv.hi)):
            return None
        out = []
        for j in range(n):
            lo, hi = Fraction(j, n), Fraction(j + 1, n)
            if not self._inside(lo, hi, cells):
                continue
            a, b = mapping(lo), mapping(hi)
            lo2, hi2 = min(a, b), max(a, b)
            idx = math.floor(lo2 * m)
            if hi2 > Fraction(idx + 1, m):
                return None
            out.append((j, idx))
        return out

    def _compiled(self, kind: str, lam: Path, in_level: int):
        key = (kind, lam.r, lam.edges, in_level)
        hit = self._plans.get(key)
        if hit is not None:
            return hit
        tau = self.sbfs.tau(lam)
        if kind == "t":
            cells, mapping, level = self.sbfs.range(lam), tau.inverse(), in_level
            factor = sqrt(1 / abs(tau.slope))
        else:
            cells, mapping, level = self.sbfs.domains[lam.s], tau, 0
            factor = abs(tau.slope) * sqrt(1 / abs(tau.slope))
        while True:
            if level > self.M:
                raise DepthBudgetExceeded(f"{'T' if kind == 't' else 'adjoint of T'}_{lam} "
                                          f"needs a dyadic level beyond {self.M}")
            plan = self._plan(level, cells, mapping, in_level)
            if plan is not None:
                break
            level += 1
        hit = (level, factor, plan)
        self._plans[key] = hit
        return hit

    def _apply(self, kind: str, lam: Path, x: DyadicFunction) -> DyadicFunction:
        level, factor, plan = self._compiled(kind, lam, x.depth)
        vals = {}
        xv = x.values
        for j, idx in plan:
            v = xv.get(idx, 0)
            if v != 0:
                vals[j] = factor * v
        return DyadicFunction(level, vals)

    def t(self, lam: Path, x: DyadicFunction) -> DyadicFunction:
        return self._apply("t", lam, x)

    def t_adj(self, lam: Path, x: DyadicFunction) -> DyadicFunction:
        return self._apply("adj", lam, x)

    def vertex_projection(self, v: str, x):
        return self.t(self.graph.vertex(v), x)

    def p(self, lam: Path, x):
        return self.t(lam, self.t_adj(lam, x))


def discretize_interval(sbfs: IntervalSBFS, level: int, cap=None) -> IntervalRepresentation:
    return IntervalRepresentation(sbfs, level, cap)


# ---------------------------------------------------------------------------
# relation checks
# ---------------------------------------------------------------------------

def _sum(rep, terms: list):
    out = rep.zero()
    for t in terms:
        out = out + t
    return out


def _check_on_subspace(rep, record: CheckRecord, start: int, lhs: Callable, rhs: Callable,
                       tol: float, where) -> None:
    """Compare ``lhs(x)`` and ``rhs(x)`` for the basis of the largest fitting ``H_D``."""
    for D in range(min(start, rep.M), -1, -1):
        try:
            worst = 0.0
            for _, x in rep.basis(D):
                worst = max(worst, rep.diff(lhs(x), rhs(x)))
        except DepthBudgetExceeded:
            continue
        record.observe(worst, tol, where)
        if record.subspace_depth is None or D < record.subspace_depth:
            record.subspace_depth = D
        return
    record.count += 1
    record.passed = False
    if len(record.witnesses) < 20:
        record.witnesses.append({"where": where, "deviation": None,
                                 "note": "no subspace fits the depth budget"})


def verify_ck(rep, tol: float = 0.0) -> Report:
    """Check the Cuntz-Krieger relations and the minimal-extension relation."""
    g = rep.graph
    M = rep.M
    report = Report("cuntz-krieger")
    paths = rep.paths()
    verts = [g.vertex(v) for v in g.vertices]

    ck1 = report.add(CheckRecord("CK1"))
    for v, w in itertools.product(verts, verts):
        _check_on_subspace(
            rep, ck1, M,
            lambda x, v=v, w=w: rep.t(v, rep.t(w, x)),
            lambda x, v=v, w=w: rep.t(v, x) if v == w else rep.zero(),
            tol, {"v": str(v), "w": str(w)})
    for v in verts:
        _check_on_subspace(rep, ck1, M, lambda x, v=v: rep.t_adj(v, x),
                           lambda x, v=v: rep.t(v, x), tol, {"self-adjoint": str(v)})

    ck2 = report.add(CheckRecord("CK2"))
    for lam in paths:
        for nu in paths:
            if lam.s != nu.r:
                continue
            ln = compose(lam, nu)
            _check_on_subspace(
                rep, ck2, M - degree_max(lam.degree) - degree_max(nu.degree),
                lambda x, lam=lam, nu=nu: rep.t(lam, rep.t(nu, x)),
                lambda x, ln=ln: rep.t(ln, x),
                tol, {"lam": str(lam), "nu": str(nu)})

    ck3 = report.add(CheckRecord("CK3"))
    for lam in paths:
        sv = g.vertex(lam.s)
        _check_on_subspace(
            rep, ck3, M - degree_max(lam.degree),
            lambda x, lam=lam: rep.t_adj(lam, rep.t(lam, x)),
            lambda x, sv=sv: rep.t(sv, x),
            tol, {"lam": str(lam)})

    ck4 = report.add(CheckRecord("CK4"))
    for n in itertools.product(*(range(c + 1) for c in rep.cap)):
        for v in verts:
            fam = g.paths_from(v.r, n)
            _check_on_subspace(
                rep, ck4, M - max(n, default=0),
                lambda x, v=v: rep.t(v, x),
                lambda x, fam=fam: _sum(rep, [rep.p(lam, x) for lam in fam]),
                tol, {"v": str(v), "n": list(n)})

    lmin = report.add(CheckRecord("lambda-min"))
    for lam in paths:
        for eta in paths:
            pairs = lambda_min(lam, eta)
            join = max(max(a, b) for a, b in zip(lam.degree, eta.degree)) if g.k else 0
            _check_on_subspace(
                rep, lmin, M - join,
                lambda x, lam=lam, eta=eta: rep.t_adj(lam, rep.t(eta, x)),
                lambda x, pairs=pairs: _sum(rep, [rep.t(a, rep.t_adj(b, x)) for a, b in pairs]),
                tol, {"lam": str(lam), "eta": str(eta)})
    return report


def _p_union(rep, cylinders: list, x):
    return _sum(rep, [rep.p(c, x) for c in cylinders])


def pvm_checks(rep: TruncatedRepresentation, tol: float = 0.0) -> Report:
    """Additivity of ``P(Z(lam)) = T_lam T_lam^*`` and the identities (a)-(d).

    (a) ``T_lam P(Z(eta)) T_lam^* = P(Z(lam eta))`` when ``s(lam) = r(eta)``;
    (b) ``sum over lam in r(eta) Lambda^n of T_lam P(sigma_lam^{-1} Z(eta)) T_lam^* = P(Z(eta))``;
    (c) ``T_lam P(sigma_lam^{-1} Z(eta)) = P(Z(eta)) T_lam`` for all pairs (both sides
        vanish when the ranges differ);
    (d) ``T_lam P(Z(eta)) = P((sigma^n)^{-1} Z(eta)) T_lam`` for ``lam`` of degree ``n``.
    """
    g = rep.graph
    M = rep.M
    paths = rep.paths()
    ones = (1,) * g.k
    report = Report("projection-valued-measure")

    add = report.add(CheckRecord("additivity"))
    for lam in paths:
        kids = [compose(lam, eta) for eta in g.paths_from(lam.s, ones)]
        _check_on_subspace(
            rep, add, M - degree_max(lam.degree) - 1,
            lambda x, lam=lam: rep.p(lam, x),
            lambda x, kids=kids: _p_union(rep, kids, x),
            tol, {"lam": str(lam)})

    total = report.add(CheckRecord("totality"))
    verts = [g.vertex(v) for v in g.vertices]
    _check_on_subspace(rep, total, M, lambda x: _p_union(rep, verts, x), lambda x: x, tol,
                       {"sum over vertices": True})

    a_rec = report.add(CheckRecord("pvm-a"))
    for lam in paths:
        for eta in paths:
            if lam.s != eta.r:
                continue
            le = compose(lam, eta)
            _check_on_subspace(
                rep, a_rec, M - degree_max(lam.degree) - degree_max(eta.degree),
                lambda x, lam=lam, eta=eta: rep.t(lam, rep.p(eta, rep.t_adj(lam, x))),
                lambda x, le=le: rep.p(le, x),
                tol, {"lam": str(lam), "eta": str(eta)})

    b_rec = report.add(CheckRecord("pvm-b (sum over r(eta) Lambda^n)"))
    for eta in paths:
        for n in itertools.product(*(range(c + 1) for c in rep.cap)):
            fam = g.paths_from(eta.r, n)
            pre = {str(l): [a for a, _ in lambda_min(l, eta)] for l in fam}
            _check_on_subspace(
                rep, b_rec, M - max(n, default=0) - degree_max(eta.degree),
                lambda x, fam=fam, pre=pre: _sum(rep, [
                    rep.t(l, _p_union(rep, pre[str(l)], rep.t_adj(l, x))) for l in fam]),
                lambda x, eta=eta: rep.p(eta, x),
                tol, {"eta": str(eta), "n": list(n)})

    c_rec = report.add(CheckRecord("pvm-c"))
    for lam in paths:
        for eta in paths:
            pre = [a for a, _ in lambda_min(lam, eta)]
            _check_on_subspace(
                rep, c_rec, M - degree_max(lam.degree) - degree_max(eta.degree),
                lambda x, lam=lam, pre=pre: rep.t(lam, _p_union(rep, pre, x)),
                lambda x, lam=lam, eta=eta: rep.p(eta, rep.t(lam, x)),
                tol, {"lam": str(lam), "eta": str(eta), "same_range": lam.r == eta.r})

    d_rec = report.add(CheckRecord("pvm-d"))
    for lam in paths:
        n = lam.degree
        for eta in paths:
            pulled = [compose(m, eta) for m in g.paths_into(n, eta.r)]
            _check_on_subspace(
                rep, d_rec, M - degree_max(n) - degree_max(eta.degree),
                lambda x, lam=lam, eta=eta: rep.t(lam, rep.p(eta, x)),
                lambda x, lam=lam, pulled=pulled: _p_union(rep, pulled, rep.t(lam, x)),
                tol, {"lam": str(lam), "eta": str(eta)})
    return report


# ---------------------------------------------------------------------------
# states, monicity, commutant
# ---------------------------------------------------------------------------

def measure_from_state(rep: TruncatedRepresentation, xi: Optional[CylinderFunction] = None) -> CylinderMeasure:
    """Table measure ``Z(lam) -> <xi, T_lam T_lam^* xi>`` at the deepest level that fits."""
    if xi is None:
        xi = rep.space.one()
    g = rep.graph
    for D in range(rep.M, -1, -1):
        try:
            values = {a: rep.space.inner(xi, rep.p(a, xi)) for a in atoms(g, D)}
        except DepthBudgetExceeded:
            continue
        return table_measure(g, D, values, label="state measure")
    raise DepthBudgetExceeded("no depth fits the budget for the state measure")


def _rank_exact(rows: list) -> int:
    rows = [list(r) for r in rows if any(x != 0 for x in r)]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank][c]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                factor = rows[i][c] / p
                rows[i] = [x - factor * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def matrix_rank(rows: list) -> int:
    """Exact rank for rational entries, double-precision SVD rank otherwise."""
    if not rows:
        return 0
    if all(isinstance(x, (int, Fraction)) for r in rows for x in r):
        return _rank_exact(rows)
    return int(np.linalg.matrix_rank(np.array([[float(x) for x in r] for r in rows])))


def monic_span_check(rep: TruncatedRepresentation, xi: Optional[CylinderFunction] = None) -> dict:
    """Rank of ``{T_lam T_lam^* xi}`` over all cylinders that fit, against ``dim H_M``."""
    if xi is None:
        xi = rep.space.one()
    g = rep.graph
    M = rep.M
    basis = [a for a in atoms(g, M) if rep.measure(a) != 0]
    rows = []
    used = 0
    for d in itertools.product(range(M + 1), repeat=g.k):
        for lam in g.paths_of_degree(d):
            try:
                v = rep.p(lam, xi).lift(M)
            except DepthBudgetExceeded:
                continue
            used += 1
            rows.append([v.values.get(a, 0) for a in basis])
    rank = matrix_rank(rows)
    return {"relation": "monic-span", "subspace_depth": M, "dimension": len(basis),
            "rank": rank, "vectors": used, "pass": rank == len(basis),
            "verdict": "monic-at-depth" if rank == len(basis) else "rank-deficient"}


@dataclass
class CommutantResult:
    depth: int
    dimension: int
    basis: list
    classes: list

    def to_json(self) -> dict:
        return {"depth": self.depth, "dimension": self.dimension,
                "classes": [[str(a) for a in c] for c in self.classes]}


def commutant_invariants(mu: CylinderMeasure, D: int) -> CommutantResult:
    """Functions constant at depth ``D`` with ``h o sigma^{e_i} = h`` almost everywhere.

    The constraints only equate values on pairs of atoms, so the solution space is
    spanned by the indicators of the classes of the generated equivalence relation
    (restricted to positive atoms).
    """
    g = mu.graph
    cube = g.cube(D)
    parent: dict = {a: a for a in atoms(g, D)}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            if rb.sort_key() < ra.sort_key():
                ra, rb = rb, ra
            parent[rb] = ra

    for z in atoms(g, D + 1):
        if mu(z) == 0:
            continue
        here = factorize(z, cube)[0]
        for i in range(1, g.k + 1):
            shifted = factorize(factorize(z, g.unit(i))[1], cube)[0]
            union(here, shifted)
    groups: dict = {}
    for a in atoms(g, D):
        if mu(a) == 0:
            continue
        groups.setdefault(find(a), []).append(a)
    classes = sorted((sorted(c, key=Path.sort_key) for c in groups.values()),
                     key=lambda c: c[0].sort_key())
    basis = [CylinderFunction(g, D, {a: Fraction(1) for a in c}) for c in classes]
    return CommutantResult(D, len(classes), basis, classes)


# ---------------------------------------------------------------------------
# unitary equivalence of two systems
# ---------------------------------------------------------------------------

@dataclass
class EquivalenceResult:
    verdict: str
    h: Optional[CylinderFunction]
    h_squared: CylinderFunction
    report: Report
    singular_atoms: list = field(default_factory=list)
    hellinger: Optional[dict] = None
    note: str = ""

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "note": self.note,
               "h_squared": self.h_squared.to_json(),
               "h": self.h.to_json() if self.h is not None else None,
               "singular_atoms": [str(a) for a in self.singular_atoms],
               "hellinger": self.hellinger}
        out.update(self.report.to_json())
        return out


def equivalence_check(sysS: LambdaProjectiveSystem, sysT: LambdaProjectiveSystem, D: int,
                      tol: float = 0.0) -> EquivalenceResult:
    """Search for ``h`` with ``h^2 = d mu_S / d mu_T`` and
    ``f^S_lam = (h o sigma^n / h) f^T_lam`` for every ``lam`` within the cap.

    The modulus of ``h`` is forced; signs are solved by propagating the parity
    constraints between the atoms of ``h`` and of ``h o sigma^n``.
    """
    muS, muT = sysS.measure, sysT.measure
    g = sysS.graph
    report = Report("equivalence")
    h2, singular = radon_nikodym(muS, muT, D)
    _, singular_rev = radon_nikodym(muT, muS, D)
    stable = report.add(CheckRecord("density-stable", subspace_depth=D + 1))
    h2_next, _ = radon_nikodym(muS, muT, D + 1)
    stable.observe(h2.max_abs_diff(h2_next, muT), tol, "density at depth D vs D+1")
    hell = hellinger_affinity(muS, muT, max(D, 2))
    if singular or singular_rev or hell.verdict == "singular-likely" or \
            (not stable.passed and hell.verdict != "equivalent-likely"):
        return EquivalenceResult("measure-obstructed", None, h2, report,
                                 [*singular, *singular_rev], hell.to_json(),
                                 "the measures are singular or not yet equivalent at this depth")

    modulus = {a: sqrt(v) for a, v in h2.values.items()}
    # parity union-find over depth-D atoms: sign(a) * sign(b) == parity
    parent: dict = {a: (a, 1) for a in atoms(g, D)}

    def find(a):
        p, par = parent[a]
        if p == a:
            return a, 1
        root, rp = find(p)
        parent[a] = (root, par * rp)
        return root, par * rp

    conflict = None
    cocycle = report.add(CheckRecord("cocycle-modulus"))
    for lam in sysT.paths():
        n = lam.degree
        fS, fT = sysS.f(lam), sysT.f(lam)
        depth = max(fS.depth, fT.depth, D + degree_max(n))
        fSl, fTl = fS.lift(depth), fT.lift(depth)
        cube = g.cube(D)
        cocycle.subspace_depth = max(cocycle.subspace_depth or 0, depth)
        for z in atoms(g, depth):
            if muT(z) == 0:
                continue
            a = factorize(z, cube)[0]
            b = factorize(factorize(z, n)[1], cube)[0]
            s_val, t_val = fSl.values.get(z, 0), fTl.values.get(z, 0)
            ha, hb = modulus.get(a, 0), modulus.get(b, 0)
            lhs = ha * abs(s_val) if s_val != 0 else 0
            rhs = hb * abs(t_val) if t_val != 0 else 0
            cocycle.observe(magnitude(lhs - rhs), tol, {"lam": str(lam), "atom": str(z)})
            if s_val == 0 or t_val == 0 or ha == 0 or hb == 0:
                continue
            parity = sign(s_val) * sign(t_val)
            ra, pa = find(a)
            rb, pb = find(b)
            if ra == rb:
                if pa * pb != parity and conflict is None:
                    conflict = {"lam": str(lam), "atom": str(z)}
            else:
                parent[rb] = (ra, pa * pb * parity)
    if not cocycle.passed or conflict is not None:
        if conflict is not None:
            rec = report.add(CheckRecord("cocycle-sign"))
            rec.observe(2.0, tol, conflict)
        return EquivalenceResult("cocycle-obstructed", None, h2, report, [], hell.to_json(),
                                 "no real h satisfies the cocycle relation")
    h = CylinderFunction(g, D, {a: m * find(a)[1] for a, m in modulus.items()})
    final = report.add(CheckRecord("cocycle"))
    for lam in sysT.paths():
        lhs = h * sysS.f(lam)
        rhs = h.compose_shift(lam.degree) * sysT.f(lam)
        final.observe(lhs.max_abs_diff(rhs, muT), tol, {"lam": str(lam)})
        final.subspace_depth = max(final.subspace_depth or 0, lhs.depth, rhs.depth)
    square = report.add(CheckRecord("h-squared", subspace_depth=D))
    square.observe((h * h).max_abs_diff(h2, muT), tol, "h*h vs d mu_S / d mu_T")
    verdict = "equivalent" if report.passed else "cocycle-obstructed"
    return EquivalenceResult(verdict, h if verdict == "equivalent" else None, h2, report, [],
                             hell.to_json())


def intertwiner_check(repS: TruncatedRepresentation, repT: TruncatedRepresentation,
                      h: CylinderFunction, tol: float = 0.0) -> Report:
    """Check ``W T^S_lam = T^T_lam W`` for ``W f = h f`` on the fitting subspaces."""
    report = Report("intertwiner")
    rec = report.add(CheckRecord("W T^S = T^T W"))

    class _Both:
        graph = repS.graph
        M = repS.M

        @staticmethod
        def basis(D):
            return repS.basis(D)

        @staticmethod
        def diff(x, y):
            return x.max_abs_diff(y, repT.measure)

    for lam in repS.paths():
        _check_on_subspace(
            _Both, rec, repS.M - degree_max(lam.degree) - h.depth,
            lambda x, lam=lam: repT._fit(h * repS.t(lam, x)),
            lambda x, lam=lam: repT.t(lam, repT._fit(h * x)),
            tol, {"lam": str(lam)})
    iso = report.add(CheckRecord("W isometric"))
    for label, x in repS.basis(repS.M):
        a = repS.space.inner(x, x)
        b = repT.space.inner(h * x, h * x)
        iso.observe(magnitude(a - b), tol, label)
    iso.subspace_depth = repS.M
    return report
