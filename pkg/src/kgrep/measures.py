"""Cylinder measures on the infinite path space and functions constant on cylinders.

A :class:`CylinderMeasure` is an evaluator ``lam -> mu(Z(lam))``.  Values are
exact (``Fraction``) when the construction data are rational, and floats
otherwise.  :class:`CylinderFunction` is a function that is constant on the
cylinders of one depth, stored as a value table over those atoms.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Callable, Optional

import numpy as np

from .errors import (
    DepthBudgetExceeded,
    DepthTooSmallForClosure,
    MalformedSpec,
    NotSequentializable,
    NotStationary,
    NotStochastic,
    NotStronglyConnected,
    SquareIncompatibleWeights,
    WeightRowNotStochastic,
)
from .kgraph import (KGraph, Path, compose, degree_max, factorize, lambda_min, read_spec,
                     vertex_matrix)
from .numeric import is_exact, magnitude, parse_rational, sqrt
from .pathspace import atoms


def _family(g: KGraph, depth: int, weights: Optional[Callable]) -> tuple:
    """``(head_of, counted)`` for the depth-``depth`` atoms of nonzero weight.

    ``head_of`` maps each such atom to its depth-``depth-1`` prefix and
    ``counted`` gives the number of such atoms below every prefix.
    """
    cache = g._family_cache if weights is None else getattr(weights, "_family", None)
    if cache is not None and depth in cache:
        return cache[depth]
    head_of: dict = {}
    counted: dict = {}
    for a, head in g.parents(depth):
        if weights is not None and weights(a) == 0:
            continue
        head_of[a] = head
        counted[head] = counted.get(head, 0) + 1
    if cache is not None:
        cache[depth] = (head_of, counted)
    return head_of, counted


# ---------------------------------------------------------------------------
# functions constant on cylinders
# ---------------------------------------------------------------------------

class CylinderFunction:
    """A function on the path space that is constant on depth-``depth`` cylinders.

    ``values`` maps atoms (paths of degree ``(depth, ..., depth)``) to scalars;
    missing atoms carry the value 0.
    """

    __slots__ = ("graph", "depth", "values")

    def __init__(self, graph: KGraph, depth: int, values: dict):
        self.graph = graph
        self.depth = depth
        self.values = values

    # constructors ---------------------------------------------------------------
    @classmethod
    def constant(cls, graph: KGraph, c, depth: int = 0) -> "CylinderFunction":
        return cls(graph, depth, {a: c for a in atoms(graph, depth)})

    @classmethod
    def indicator(cls, lam: Path, depth: Optional[int] = None) -> "CylinderFunction":
        """Characteristic function of ``Z(lam)`` at the smallest usable depth."""
        g = lam.graph
        if depth is None:
            depth = degree_max(lam.degree)
        if depth < degree_max(lam.degree):
            raise DepthBudgetExceeded(f"Z({lam}) is not a union of depth-{depth} atoms", str(lam))
        vals = {}
        for a in atoms(g, depth):
            if a.r == lam.r and factorize(a, lam.degree)[0] == lam:
                vals[a] = Fraction(1)
        return cls(g, depth, vals)

    @classmethod
    def from_callable(cls, graph: KGraph, depth: int, fn: Callable) -> "CylinderFunction":
        return cls(graph, depth, {a: fn(a) for a in atoms(graph, depth)})

    # evaluation -------------------------------------------------------------------
    def at(self, path: Path):
        """Value on the atom containing the cylinder ``Z(path)``."""
        d = path.degree
        cube = self.graph.cube(self.depth)
        if d == cube:
            return self.values.get(path, 0)
        if min(d) < self.depth:
            raise DepthBudgetExceeded(
                f"Z({path}) is coarser than the depth-{self.depth} resolution", str(path))
        return self.values.get(factorize(path, cube)[0], 0)

    def lift(self, depth: int) -> "CylinderFunction":
        if depth == self.depth:
            return self
        if depth < self.depth:
            raise DepthBudgetExceeded(f"cannot lower resolution from {self.depth} to {depth}")
        g = self.graph
        step = g.cube(depth - self.depth)
        vals = {}
        for a, v in self.values.items():
            if v != 0:
                for eta in g.paths_from(a.s, step):
                    vals[compose(a, eta)] = v
        return CylinderFunction(g, depth, vals)

    def coarsen(self, weights: Optional[Callable] = None) -> "CylinderFunction":
        """Lower the depth while the function stays constant on the coarser atoms.

        With ``weights`` given, atoms of zero weight are ignored (almost-everywhere
        equality).  Only the nonzero entries are visited: a parent atom takes the
        common value of its children when every counted child carries that value.
        """
        f = self
        while f.depth > 0:
            head_of, counted = _family(f.graph, f.depth, weights)
            groups: dict = {}
            seen: dict = {}
            for a, v in f.values.items():
                if v == 0:
                    continue
                head = head_of.get(a)
                if head is None:
                    continue
                if head in groups:
                    if groups[head] != v:
                        return f
                    seen[head] += 1
                else:
                    groups[head] = v
                    seen[head] = 1
            if any(seen[h] != counted[h] for h in groups):
                return f
            f = CylinderFunction(f.graph, f.depth - 1, groups)
        return f

    def compose_shift(self, n) -> "CylinderFunction":
        """``f o sigma^n``, constant at depth ``depth + max(n)``."""
        g = self.graph
        n = g.as_degree(n)
        out_depth = self.depth + degree_max(n)
        vals = {}
        for a in atoms(g, out_depth):
            tail = factorize(a, n)[1]
            v = self.at(tail)
            if v != 0:
                vals[a] = v
        return CylinderFunction(g, out_depth, vals)

    def compose_prefix(self, lam: Path) -> "CylinderFunction":
        """``f o sigma_lam`` on ``Z(s(lam))``, zero elsewhere."""
        g = self.graph
        d = lam.degree
        out_depth = max(0, max(self.depth - x for x in d)) if d else self.depth
        vals = {}
        for a in atoms(g, out_depth):
            if a.r != lam.s:
                continue
            v = self.at(compose(lam, a))
            if v != 0:
                vals[a] = v
        return CylinderFunction(g, out_depth, vals)

    # arithmetic ---------------------------------------------------------------------
    def _binary(self, other, op) -> "CylinderFunction":
        if isinstance(other, CylinderFunction):
            depth = max(self.depth, other.depth)
            a, b = self.lift(depth), other.lift(depth)
            keys = set(a.values) | set(b.values)
            vals = {}
            for k in keys:
                v = op(a.values.get(k, 0), b.values.get(k, 0))
                if v != 0:
                    vals[k] = v
            return CylinderFunction(self.graph, depth, vals)
        vals = {}
        for k in atoms(self.graph, self.depth):
            v = op(self.values.get(k, 0), other)
            if v != 0:
                vals[k] = v
        return CylinderFunction(self.graph, self.depth, vals)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __mul__(self, other):
        if isinstance(other, CylinderFunction):
            depth = max(self.depth, other.depth)
            a, b = self.lift(depth), other.lift(depth)
            vals = {}
            for k, v in a.values.items():
                w = b.values.get(k, 0)
                if w != 0 and v != 0:
                    vals[k] = v * w
            return CylinderFunction(self.graph, depth, vals)
        if other == 0:
            return CylinderFunction(self.graph, self.depth, {})
        return CylinderFunction(self.graph, self.depth,
                                {k: v * other for k, v in self.values.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def map(self, fn: Callable) -> "CylinderFunction":
        vals = {}
        for k in atoms(self.graph, self.depth):
            v = fn(self.values.get(k, 0))
            if v != 0:
                vals[k] = v
        return CylinderFunction(self.graph, self.depth, vals)

    def restrict(self, keep: Callable) -> "CylinderFunction":
        return CylinderFunction(self.graph, self.depth,
                                {k: v for k, v in self.values.items() if keep(k)})

    def max_abs_diff(self, other: "CylinderFunction", weights: Optional[Callable] = None) -> float:
        """Largest atomwise difference, over atoms of positive weight if given."""
        depth = max(self.depth, other.depth)
        a, b = self.lift(depth), other.lift(depth)
        worst = 0.0
        for k in set(a.values) | set(b.values):
            if weights is not None and weights(k) == 0:
                continue
            worst = max(worst, magnitude(a.values.get(k, 0) - b.values.get(k, 0)))
        return worst

    def items(self):
        return sorted(self.values.items(), key=lambda kv: kv[0].sort_key())

    def to_json(self) -> dict:
        from .numeric import format_scalar
        return {"depth": self.depth,
                "values": {str(k): format_scalar(v) for k, v in self.items()}}

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self.items())
        return f"CylinderFunction(depth={self.depth}, {{{body}}})"


# the name used in the documentation of the data model
PiecewiseCylinderFunction = CylinderFunction


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

class CylinderMeasure:
    """Finitely additive, Kolmogorov-consistent assignment ``lam -> mu(Z(lam))``.

    ``max_depth`` bounds the cylinders the evaluator can answer (``None`` means
    unbounded).  ``lookahead`` is the extra depth beyond ``d(lam)`` at which the
    Radon-Nikodym derivative of ``mu o sigma_lam^{-1}`` stabilizes, when known.
    """

    def __init__(self, graph: KGraph, mass: Callable, kind: str, *,
                 max_depth: Optional[int] = None, lookahead: Optional[int] = None,
                 label: str = "", degenerate: bool = False):
        self.graph = graph
        self._mass = mass
        self.kind = kind
        self.max_depth = max_depth
        self.lookahead = lookahead
        self.label = label or kind
        self.degenerate = degenerate
        self._cache: dict = {}
        self._family: dict = {}

    def __call__(self, lam: Path):
        key = (lam.r, lam.edges)
        hit = self._cache.get(key)
        if hit is None:
            if self.max_depth is not None and degree_max(lam.degree) > self.max_depth:
                raise DepthBudgetExceeded(
                    f"{self.label} is only defined to depth {self.max_depth}; asked for Z({lam})",
                    str(lam))
            hit = self._mass(lam)
            self._cache[key] = hit
        return hit

    mass = __call__

    def total(self):
        return sum((self(self.graph.vertex(v)) for v in self.graph.vertices), Fraction(0))

    def atom_masses(self, depth: int) -> dict:
        return {a: self(a) for a in atoms(self.graph, depth)}

    def positive(self, lam: Path) -> bool:
        return self(lam) != 0

    def is_exact(self) -> bool:
        return all(is_exact(self(self.graph.vertex(v))) for v in self.graph.vertices)

    def as_float(self) -> "CylinderMeasure":
        return CylinderMeasure(self.graph, lambda lam: float(self(lam)), self.kind,
                               max_depth=self.max_depth, lookahead=self.lookahead,
                               label=self.label + " (double)", degenerate=self.degenerate)

    def scaled(self, c) -> "CylinderMeasure":
        return CylinderMeasure(self.graph, lambda lam: c * self(lam), self.kind,
                               max_depth=self.max_depth, lookahead=self.lookahead,
                               label=f"{c}*{self.label}", degenerate=self.degenerate)

    def __add__(self, other: "CylinderMeasure") -> "CylinderMeasure":
        depth = _min_depth(self.max_depth, other.max_depth)
        look = None if self.lookahead is None or other.lookahead is None else \
            max(self.lookahead, other.lookahead)
        return CylinderMeasure(self.graph, lambda lam: self(lam) + other(lam), "sum",
                               max_depth=depth, lookahead=look,
                               label=f"({self.label} + {other.label})")

    def __repr__(self):
        return f"CylinderMeasure({self.label})"


def _min_depth(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _scalar(x):
    return parse_rational(x) if not isinstance(x, float) else x


def _verify_or_raise(mu: CylinderMeasure, depth: int = 3) -> CylinderMeasure:
    report = check_consistency(mu, depth)
    if not report["pass"]:
        raise MalformedSpec(f"{mu.label} fails the consistency identity at {report['witnesses'][:1]}")
    return mu


def check_consistency(mu: CylinderMeasure, depth: int = 3, tol: float = 1e-12) -> dict:
    """Check ``mu(Z(lam)) == sum_f mu(Z(lam f))`` for every color and every
    ``lam`` with all degree coordinates at most ``depth``."""
    g = mu.graph
    limit = depth if mu.max_depth is None else min(depth, mu.max_depth - 1)
    worst = 0.0
    witnesses = []
    if limit < 0:
        return {"relation": "kolmogorov-consistency", "subspace_depth": limit,
                "max_deviation": 0.0, "pass": True, "witnesses": []}
    import itertools
    for d in itertools.product(range(limit + 1), repeat=g.k):
        for lam in g.paths_of_degree(d):
            base = mu(lam)
            for i in range(1, g.k + 1):
                total = sum((mu(compose(lam, f)) for f in g.paths_from(lam.s, g.unit(i))),
                            Fraction(0))
                dev = magnitude(total - base)
                if dev > worst:
                    worst = dev
                if dev > tol:
                    witnesses.append({"path": str(lam), "color": i, "deviation": dev})
    return {"relation": "kolmogorov-consistency", "subspace_depth": limit,
            "max_deviation": worst, "pass": not witnesses, "witnesses": witnesses[:20]}


def bernoulli_measure(g: KGraph, vertex_mass: dict, edge_weight: dict) -> CylinderMeasure:
    """Product measure: vertex mass at the range times the product of edge weights."""
    mass = {v: _scalar(vertex_mass.get(v, 0)) for v in g.vertices}
    unknown = set(vertex_mass) - set(g.vertices)
    if unknown:
        raise MalformedSpec(f"vertex_mass names unknown vertices {sorted(unknown)}")
    unknown = set(edge_weight) - set(g.edges)
    if unknown:
        raise MalformedSpec(f"edge_weight names unknown edges {sorted(unknown)}")
    w = {}
    for name in g.edge_order:
        if name not in edge_weight:
            raise MalformedSpec(f"edge_weight lacks edge {name}", name)
        w[name] = _scalar(edge_weight[name])
        if w[name] < 0:
            raise MalformedSpec(f"negative weight on {name}", name)
    if any(m < 0 for m in mass.values()):
        raise MalformedSpec("negative vertex mass")
    for v in g.vertices:
        for i in range(1, g.k + 1):
            row = [e for e in g.edge_order if g.edges[e].range == v and g.edges[e].color == i]
            s = sum((w[e] for e in row), Fraction(0))
            if magnitude(s - 1) > 1e-12:
                raise WeightRowNotStochastic(
                    f"weights of color-{i} edges into {v} sum to {s}", v, i, str(s))
    for (f, gg), (g2, f2) in g.squares.items():
        if magnitude(w[f] * w[gg] - w[g2] * w[f2]) > 1e-12:
            raise SquareIncompatibleWeights(
                f"w({f})w({gg}) != w({g2})w({f2})", f, gg, g2, f2)
    degenerate = any(x == 0 for x in w.values()) or all(m == 0 for m in mass.values())

    def evaluate(lam: Path):
        out = mass[lam.r]
        for e in lam.edges:
            out = out * w[e]
        return out

    mu = CylinderMeasure(g, evaluate, "bernoulli", lookahead=0, label="bernoulli",
                         degenerate=degenerate)
    return _verify_or_raise(mu)


def markov_measure(g: KGraph, alphabet_color: int, lambda_vec, T) -> CylinderMeasure:
    """Markov measure driven by the edges of one color.

    Every other color must offer exactly one edge into each vertex, so a path is
    determined by its string of ``alphabet_color`` edges.
    """
    i = int(alphabet_color)
    if not 1 <= i <= g.k:
        raise MalformedSpec(f"alphabet color {i} outside 1..{g.k}")
    for v in g.vertices:
        for j in range(1, g.k + 1):
            if j == i:
                continue
            n = sum(1 for e in g.edges.values() if e.range == v and e.color == j)
            if n != 1:
                raise NotSequentializable(
                    f"vertex {v} receives {n} edges of color {j}; exactly one is required", v, j)
    alphabet = [e for e in g.edge_order if g.edges[e].color == i]
    lam = [_scalar(x) for x in lambda_vec]
    mat = [[_scalar(x) for x in row] for row in T]
    n = len(alphabet)
    if len(lam) != n or len(mat) != n or any(len(row) != n for row in mat):
        raise MalformedSpec(f"lambda and T must be indexed by the {n} color-{i} edges {alphabet}")
    if any(x <= 0 for x in lam):
        raise MalformedSpec("lambda must be strictly positive")
    for a, row in enumerate(mat):
        for b, x in enumerate(row):
            if x <= 0:
                raise NotStochastic(f"T[{alphabet[a]}][{alphabet[b]}] = {x} is not positive",
                                    alphabet[a], alphabet[b])
            if g.edges[alphabet[a]].source != g.edges[alphabet[b]].range:
                raise NotStochastic(
                    f"{alphabet[a]}.{alphabet[b]} is not composable, so T must vanish there "
                    "but T has to be positive", alphabet[a], alphabet[b])
        if magnitude(sum(row, Fraction(0)) - 1) > 1e-12:
            raise NotStochastic(f"row {alphabet[a]} of T sums to {sum(row)}", alphabet[a])
    for b in range(n):
        s = sum((lam[a] * mat[a][b] for a in range(n)), Fraction(0))
        if magnitude(s - lam[b]) > 1e-12:
            raise NotStationary(f"(lambda T)[{alphabet[b]}] = {s} differs from {lam[b]}", alphabet[b])
    pos = {e: a for a, e in enumerate(alphabet)}
    vmass = {v: sum((lam[pos[e]] for e in alphabet if g.edges[e].range == v), Fraction(0))
             for v in g.vertices}

    def evaluate(p: Path):
        word = [e for e in p.edges if g.edges[e].color == i]
        if not word:
            return vmass[p.r]
        out = lam[pos[word[0]]]
        for x, y in zip(word, word[1:]):
            out = out * mat[pos[x]][pos[y]]
        return out

    mu = CylinderMeasure(g, evaluate, "markov", lookahead=1, label="markov")
    return _verify_or_raise(mu)


def _strongly_connected(g: KGraph) -> tuple:
    adj = {v: set() for v in g.vertices}
    for e in g.edges.values():
        adj[e.range].add(e.source)
    for v in g.vertices:
        seen = {v}
        stack = [v]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        for w in g.vertices:
            if w not in seen:
                return v, w
    return None


def perron_frobenius_measure(g: KGraph) -> CylinderMeasure:
    """``mu(Z(lam)) = prod_i rho_i^{-d_i} * kappa[s(lam)]`` with the common Perron vector."""
    bad = _strongly_connected(g)
    if bad is not None:
        raise NotStronglyConnected(f"no path with range {bad[0]} and source {bad[1]}", *bad)
    mats = [np.array(vertex_matrix(g, i), dtype=float) for i in range(1, g.k + 1)]
    total = sum(mats)
    vals, vecs = np.linalg.eig(total)
    idx = int(np.argmax(vals.real))
    kappa = np.abs(vecs[:, idx].real)
    kappa = kappa / kappa.sum()
    rho = [float((m @ kappa)[0] / kappa[0]) for m in mats]
    # try to certify rational eigen-data exactly
    kq = [Fraction(x).limit_denominator(10 ** 6) for x in kappa]
    s = sum(kq)
    kq = [x / s for x in kq]
    rq = [Fraction(x).limit_denominator(10 ** 6) for x in rho]
    exact = all(x > 0 for x in kq) and all(r > 0 for r in rq) and all(
        [sum(int(A[a][b]) * kq[b] for b in range(len(kq))) for a in range(len(kq))]
        == [r * kq[a] for a in range(len(kq))]
        for A, r in zip([vertex_matrix(g, i) for i in range(1, g.k + 1)], rq))
    if exact:
        kap = dict(zip(g.vertices, kq))
        rh = rq
    else:
        kap = dict(zip(g.vertices, (float(x) for x in kappa)))
        rh = rho

    def evaluate(lam: Path):
        out = kap[lam.s]
        for r, d in zip(rh, lam.degree):
            out = out / (r ** d)
        return out

    mu = CylinderMeasure(g, evaluate, "perron-frobenius", lookahead=0, label="perron-frobenius")
    return _verify_or_raise(mu)


def table_measure(g: KGraph, depth: int, values: dict, label: str = "table") -> CylinderMeasure:
    """Measure given by its masses on the depth-``depth`` atoms (missing atoms are 0)."""
    cube = g.cube(depth)
    table = {}
    for key, val in values.items():
        p = g.path(key) if isinstance(key, str) else key
        if p.degree != cube:
            raise MalformedSpec(f"table entry {p} does not have degree {cube}", str(p))
        v = _scalar(val) if not isinstance(val, (Fraction, float, int)) else val
        if v < 0:
            raise MalformedSpec(f"negative mass on {p}", str(p))
        table[p] = v

    def evaluate(lam: Path):
        d = lam.degree
        if d == cube:
            return table.get(lam, Fraction(0))
        need = tuple(depth - x for x in d)
        return sum((table.get(compose(lam, eta), Fraction(0))
                    for eta in g.paths_from(lam.s, need)), Fraction(0))

    return CylinderMeasure(g, evaluate, "table", max_depth=depth, label=label)


def density_measure(mu: CylinderMeasure, density: CylinderFunction,
                    label: str = "") -> CylinderMeasure:
    """``d(mu') = density * d(mu)``."""
    g = mu.graph
    D = density.depth

    def evaluate(lam: Path):
        d = lam.degree
        if all(x >= D for x in d):
            return density.at(lam) * mu(lam)
        need = tuple(max(D, x) - x for x in d)
        total = Fraction(0)
        for eta in g.paths_from(lam.s, need):
            p = compose(lam, eta)
            total = total + density.at(p) * mu(p)
        return total

    look = None if mu.lookahead is None else max(mu.lookahead, D)
    return CylinderMeasure(g, evaluate, "density", max_depth=mu.max_depth, lookahead=look,
                           label=label or f"g*{mu.label}")


def pushforward_prefix(mu: CylinderMeasure, lam: Path, direction: str = "preimage") -> CylinderMeasure:
    """``mu o sigma_lam^{-1}`` (``preimage``) or ``mu o sigma_lam`` (``image``)."""
    g = mu.graph
    if direction == "preimage":
        def evaluate(eta: Path):
            return sum((mu(alpha) for alpha, _ in lambda_min(lam, eta)), Fraction(0))
        depth = None if mu.max_depth is None else mu.max_depth + degree_max(lam.degree)
        return CylinderMeasure(g, evaluate, "pushforward", max_depth=depth,
                               lookahead=mu.lookahead, label=f"{mu.label} o sigma_{lam}^-1")
    if direction == "image":
        def evaluate(eta: Path):
            if eta.r != lam.s:
                return Fraction(0)
            return mu(compose(lam, eta))
        depth = None if mu.max_depth is None else mu.max_depth - degree_max(lam.degree)
        return CylinderMeasure(g, evaluate, "pullback", max_depth=depth,
                               lookahead=mu.lookahead, label=f"{mu.label} o sigma_{lam}")
    raise ValueError("direction must be 'preimage' or 'image'")


# ---------------------------------------------------------------------------
# Radon-Nikodym data
# ---------------------------------------------------------------------------

def radon_nikodym(mu_prime: CylinderMeasure, mu: CylinderMeasure, depth: int) -> tuple:
    """Atomwise ratio ``mu'(Z)/mu(Z)`` at ``depth`` plus the atoms where only ``mu'`` lives."""
    vals = {}
    singular = []
    for a in atoms(mu.graph, depth):
        m = mu(a)
        mp = mu_prime(a)
        if m != 0:
            r = mp / m
            if r != 0:
                vals[a] = r
        elif mp != 0:
            singular.append(a)
    return CylinderFunction(mu.graph, depth, vals), singular


@dataclass
class LebesgueDecomposition:
    density: CylinderFunction           # h^2 on the absolutely continuous part
    singular: CylinderMeasure           # nu, carried by the atoms in ``singular_atoms``
    regular_atoms: list
    singular_atoms: list
    residual: float = 0.0               # max atomwise |mu' - (h^2 mu + nu)|


def lebesgue_decompose(mu_prime: CylinderMeasure, mu: CylinderMeasure, depth: int) -> LebesgueDecomposition:
    """Split ``mu'`` into a part with density against ``mu`` and a part singular to it.

    The singular atoms are closed under the coding maps: an atom is forced into
    the singular set when, for some color, deleting its first edge of that color
    lands in a cylinder made entirely of singular atoms.  A forced atom of
    positive ``mu``-mass means depth ``depth`` cannot separate the two parts.
    """
    g = mu.graph
    all_atoms = atoms(g, depth)
    bad = {a for a in all_atoms if mu(a) == 0 and mu_prime(a) != 0}
    cube = g.cube(depth)
    changed = True
    while changed and bad:
        changed = False
        for a in all_atoms:
            if a in bad:
                continue
            for i in range(1, g.k + 1):
                tail = factorize(a, g.unit(i))[1]
                need = tuple(c - x for c, x in zip(cube, tail.degree))
                ext = [compose(tail, eta) for eta in g.paths_from(tail.s, need)]
                if ext and all(x in bad for x in ext):
                    if mu(a) != 0:
                        raise DepthTooSmallForClosure(
                            f"atom {a} is forced into the singular part but has positive mass "
                            f"at depth {depth}", str(a))
                    bad.add(a)
                    changed = True
                    break
    singular_atoms = sorted(bad, key=Path.sort_key)
    regular = [a for a in all_atoms if a not in bad]
    h2, _ = radon_nikodym(mu_prime, mu, depth)
    h2 = h2.restrict(lambda a: a not in bad)
    nu = table_measure(g, depth, {a: mu_prime(a) for a in singular_atoms},
                       label=f"singular part of {mu_prime.label}")
    residual = 0.0
    for a in all_atoms:
        rhs = h2.values.get(a, 0) * mu(a) + nu(a)
        residual = max(residual, magnitude(mu_prime(a) - rhs))
    return LebesgueDecomposition(h2, nu, regular, singular_atoms, residual)


# ---------------------------------------------------------------------------
# Hellinger affinity
# ---------------------------------------------------------------------------

@dataclass
class HellingerReport:
    values: list                 # exact or double H_1..H_N
    ratios: list                 # H_N / H_{N-1} as floats
    verdict: str
    normalized_last: float
    theta: float = 0.02
    theta_prime: float = 0.5

    @property
    def floats(self) -> list:
        return [float(x) for x in self.values]

    def to_json(self) -> dict:
        return {"affinity": self.floats, "ratios": self.ratios, "verdict": self.verdict,
                "normalized_last": self.normalized_last, "theta": self.theta,
                "theta_prime": self.theta_prime}


def affinity_at(mu: CylinderMeasure, nu: CylinderMeasure, depth: int):
    total = Fraction(0)
    for a in atoms(mu.graph, depth):
        p = mu(a) * nu(a)
        if p != 0:
            total = total + sqrt(p)
    return total


def hellinger_affinity(mu: CylinderMeasure, nu: CylinderMeasure, n_max: int,
                       theta: float = 0.02, theta_prime: float = 0.5) -> HellingerReport:
    """Affinities ``H_N = sum over depth-N atoms of sqrt(mu nu)`` for N = 1..n_max.

    Verdict ``singular-likely`` when the last ratios ``H_N / H_{N-1}`` all sit at
    or below ``1 - theta``; ``equivalent-likely`` when the last ratio is above
    ``1 - theta`` and ``H_N / sqrt(mu(X) nu(X))`` stays above ``theta_prime``.
    """
    values = [affinity_at(mu, nu, n) for n in range(1, n_max + 1)]
    fl = [float(v) for v in values]
    ratios = [fl[i] / fl[i - 1] if fl[i - 1] > 0 else 0.0 for i in range(1, len(fl))]
    scale = float(mu.total()) * float(nu.total())
    normalized = fl[-1] / scale ** 0.5 if scale > 0 and fl else 0.0
    verdict = "inconclusive"
    if fl and fl[-1] == 0:
        verdict = "singular-likely"
    elif ratios:
        tail = ratios[-min(3, len(ratios)):]
        if all(r <= 1 - theta for r in tail):
            verdict = "singular-likely"
        elif ratios[-1] > 1 - theta and normalized > theta_prime:
            verdict = "equivalent-likely"
    return HellingerReport(values, ratios, verdict, normalized, theta, theta_prime)


# ---------------------------------------------------------------------------
# file loading
# ---------------------------------------------------------------------------

def load_measure(g: KGraph, spec) -> CylinderMeasure:
    """Build a measure from a dict, JSON text or file path."""
    label = ""
    if isinstance(spec, (str, FsPath)) and not str(spec).lstrip().startswith("{"):
        label = FsPath(spec).stem
    spec = read_spec(spec, "measure description")
    if not isinstance(spec, dict) or "type" not in spec:
        raise MalformedSpec("measure description needs a 'type' field")
    kind = spec["type"]
    try:
        if kind == "bernoulli":
            mu = bernoulli_measure(g, spec["vertex_mass"], spec["edge_weight"])
        elif kind == "markov":
            mu = markov_measure(g, spec["alphabet_color"], spec["lambda"], spec["T"])
        elif kind == "perron-frobenius":
            mu = perron_frobenius_measure(g)
        elif kind == "table":
            mu = table_measure(g, int(spec["depth"]), spec["values"])
        else:
            raise MalformedSpec(f"unknown measure type {kind!r}")
    except KeyError as exc:
        raise MalformedSpec(f"measure of type {kind} lacks field {exc}") from None
    except (ValueError, ZeroDivisionError) as exc:
        raise MalformedSpec(f"bad number in measure description: {exc}") from None
    if label:
        mu.label = label
    return mu
