"""Finite k-graphs: colored edges, factorization squares, and path arithmetic.

A path is stored in color-sorted normal form: all color-1 edges first, then
all color-2 edges, and so on, each block a composable chain.  Any other
ordering of the colors is reached by rewriting adjacent pairs of different
colors through the square table; unique factorization makes the result
independent of the rewrite order.

Composition convention: ``compose(a, b)`` is defined iff ``s(a) == r(b)``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Iterable, Sequence

from .errors import (
    DegreeOutOfRange,
    HasSource,
    HexagonFailure,
    MalformedSpec,
    MissingSquare,
    NonBijectiveSquares,
    NotComposable,
    NotCubicDegree,
)

Degree = tuple  # tuple[int, ...] of length k


@dataclass(frozen=True)
class Edge:
    name: str
    color: int
    source: str
    range: str


@dataclass(frozen=True)
class Path:
    """A morphism of the path category in color-sorted normal form."""

    graph: "KGraph" = field(compare=False, hash=False, repr=False)
    r: str
    s: str
    edges: tuple

    @cached_property
    def degree(self) -> Degree:
        return self.graph.degree_of(self.edges)

    @property
    def blocks(self) -> tuple:
        out = []
        pos = 0
        for n in self.degree:
            out.append(self.edges[pos:pos + n])
            pos += n
        return tuple(out)

    @property
    def is_vertex(self) -> bool:
        return not self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def __str__(self) -> str:
        return ".".join(self.edges) if self.edges else self.r

    def __repr__(self) -> str:
        return f"Path({self})"

    def sort_key(self):
        return (self.r, self.edges)


class KGraph:
    """A finite k-graph.  Build instances with :func:`load_validate`."""

    def __init__(self, k: int, vertices: Sequence[str], edges: Sequence[Edge],
                 squares: dict):
        self.k = k
        self.vertices = tuple(vertices)
        self.edges = {e.name: e for e in edges}
        self.edge_order = tuple(e.name for e in edges)
        # squares[(f, g)] = (g2, f2) with f.g == g2.f2 and color(f) < color(g)
        self.squares = dict(squares)
        self._swap = {}
        for (f, g), (g2, f2) in self.squares.items():
            self._swap[(f, g)] = (g2, f2)
            self._swap[(g2, f2)] = (f, g)
        self._reorder_cache: dict = {}
        self._enum_cache: dict = {}
        self._factor_cache: dict = {}
        self._from_cache: dict = {}
        self._compose_cache: dict = {}
        self._parent_cache: dict = {}
        self._family_cache: dict = {}

    # basic data -----------------------------------------------------------
    def color(self, name: str) -> int:
        return self.edges[name].color

    def degree_of(self, edges: Iterable[str]) -> Degree:
        d = [0] * self.k
        for name in edges:
            d[self.edges[name].color - 1] += 1
        return tuple(d)

    def as_degree(self, n) -> Degree:
        if isinstance(n, int):
            n = (n,) * self.k if self.k == 1 else None
            if n is None:
                raise MalformedSpec("an integer degree is only accepted for 1-graphs")
        n = tuple(int(x) for x in n)
        if len(n) != self.k or any(x < 0 for x in n):
            raise MalformedSpec(f"degree {n} is not in N^{self.k}", n)
        return n

    def cube(self, depth: int) -> Degree:
        return (depth,) * self.k

    def parents(self, depth: int) -> list:
        """Pairs ``(atom, head)`` with ``atom`` of depth ``depth`` and ``head`` its depth-``depth-1`` prefix."""
        hit = self._parent_cache.get(depth)
        if hit is None:
            cube = self.cube(depth - 1)
            hit = [(a, factorize(a, cube)[0]) for a in self.paths_of_degree(self.cube(depth))]
            self._parent_cache[depth] = hit
        return hit

    def unit(self, i: int) -> Degree:
        return tuple(1 if c == i else 0 for c in range(1, self.k + 1))

    def vertex(self, v: str) -> Path:
        if v not in self.vertices:
            raise MalformedSpec(f"unknown vertex {v}", v)
        return Path(self, v, v, ())

    def edge(self, name: str) -> Path:
        e = self.edges.get(name)
        if e is None:
            raise MalformedSpec(f"unknown edge {name}", name)
        return Path(self, e.range, e.source, (name,))

    def path(self, text: str) -> Path:
        """Parse ``"f1.f2.e"`` (any color order) or a vertex name."""
        text = text.strip()
        if text in self.vertices:
            return self.vertex(text)
        names = [p for p in text.split(".") if p]
        if not names:
            raise MalformedSpec(f"empty path string {text!r}")
        out = self.edge(names[0])
        for name in names[1:]:
            out = compose(out, self.edge(name))
        return out

    def _is_chain(self, edges: Sequence[str]) -> bool:
        return all(self.edges[a].source == self.edges[b].range
                   for a, b in zip(edges, edges[1:]))

    def _make(self, edges: tuple) -> Path:
        return Path(self, self.edges[edges[0]].range, self.edges[edges[-1]].source, edges)

    # rewriting -------------------------------------------------------------
    def swap(self, a: str, b: str) -> tuple:
        """Rewrite the composable pair ``a.b`` of distinct colors as ``b'.a'``."""
        try:
            return self._swap[(a, b)]
        except KeyError:
            raise MissingSquare(f"no square for {a}.{b}", a, b) from None

    def reorder(self, edges: tuple, target: tuple) -> tuple:
        """Rewrite a composable edge sequence so its color word is ``target``."""
        key = (edges, target)
        hit = self._reorder_cache.get(key)
        if hit is not None:
            return hit
        seq = list(edges)
        for p, want in enumerate(target):
            q = p
            while self.edges[seq[q]].color != want:
                q += 1
            while q > p:
                seq[q - 1], seq[q] = self.swap(seq[q - 1], seq[q])
                q -= 1
        out = tuple(seq)
        self._reorder_cache[key] = out
        return out

    def normal_form(self, edges: Sequence[str]) -> tuple:
        edges = tuple(edges)
        target = tuple(sorted(self.edges[e].color for e in edges))
        return self.reorder(edges, target)

    # matrices and enumeration ---------------------------------------------------
    def vertex_index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    def paths_of_degree(self, n: Degree) -> tuple:
        n = self.as_degree(n)
        hit = self._enum_cache.get(n)
        if hit is not None:
            return hit
        word = [c for c in range(1, self.k + 1) for _ in range(n[c - 1])]
        by_color = {c: [self.edges[x] for x in self.edge_order if self.edges[x].color == c]
                    for c in range(1, self.k + 1)}
        out: list = []
        if not word:
            out = [self.vertex(v) for v in self.vertices]
        else:
            def extend(prefix, last_source, pos):
                if pos == len(word):
                    out.append(self._make(tuple(prefix)))
                    return
                for e in by_color[word[pos]]:
                    if last_source is None or e.range == last_source:
                        prefix.append(e.name)
                        extend(prefix, e.source, pos + 1)
                        prefix.pop()
            extend([], None, 0)
        result = tuple(out)
        self._enum_cache[n] = result
        return result

    def paths_from(self, v: str, n) -> list:
        """The set v Λ^n (paths of degree n with range v)."""
        key = (v, n if type(n) is tuple else self.as_degree(n))
        hit = self._from_cache.get(key)
        if hit is None:
            hit = [p for p in self.paths_of_degree(key[1]) if p.r == v]
            self._from_cache[key] = hit
        return hit

    def paths_into(self, n, w: str) -> list:
        """The set Λ^n w (paths of degree n with source w)."""
        return [p for p in self.paths_of_degree(n) if p.s == w]


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

def read_spec(spec, what: str = "description"):
    """Accept a dict, JSON text or a file path; malformed JSON becomes MalformedSpec."""
    try:
        if isinstance(spec, (str, FsPath)) and not str(spec).lstrip().startswith("{"):
            with open(spec, encoding="utf-8") as fh:
                return json.load(fh)
        if isinstance(spec, str):
            return json.loads(spec)
    except json.JSONDecodeError as exc:
        raise MalformedSpec(f"{what} is not valid JSON: {exc}") from None
    return spec


def load_validate(spec) -> KGraph:
    """Build a :class:`KGraph` from a dict, JSON text or file path and validate it."""
    spec = read_spec(spec, "graph description")
    if not isinstance(spec, dict):
        raise MalformedSpec("graph description must be a JSON object")
    try:
        k = int(spec["k"])
        vertices = [str(v) for v in spec["vertices"]]
        raw_edges = spec["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSpec(f"graph description lacks a field: {exc}") from None
    if k < 1:
        raise MalformedSpec("k must be positive", k)
    if len(set(vertices)) != len(vertices):
        raise MalformedSpec("duplicate vertex names")
    edges = []
    for raw in raw_edges:
        try:
            e = Edge(str(raw["name"]), int(raw["color"]), str(raw["source"]), str(raw["range"]))
        except (KeyError, TypeError, ValueError):
            raise MalformedSpec(f"malformed edge record {raw!r}") from None
        if not 1 <= e.color <= k:
            raise MalformedSpec(f"edge {e.name} has color {e.color} outside 1..{k}", e.name)
        if e.source not in vertices or e.range not in vertices:
            raise MalformedSpec(f"edge {e.name} uses an unknown vertex", e.name)
        if e.name in vertices:
            raise MalformedSpec(f"edge name {e.name} clashes with a vertex", e.name)
        edges.append(e)
    names = [e.name for e in edges]
    if len(set(names)) != len(names):
        raise MalformedSpec("duplicate edge names")
    if any("." in n for n in names + vertices):
        raise MalformedSpec("names may not contain '.'")
    by_name = {e.name: e for e in edges}

    squares: dict = {}
    for raw in spec.get("squares", []) or []:
        try:
            f, g = (str(x) for x in raw["left"])
            g2, f2 = (str(x) for x in raw["right"])
        except (KeyError, TypeError, ValueError):
            raise MalformedSpec(f"malformed square record {raw!r}") from None
        for x in (f, g, g2, f2):
            if x not in by_name:
                raise MalformedSpec(f"square mentions unknown edge {x}", x)
        cf, cg = by_name[f].color, by_name[g].color
        if not cf < cg:
            raise MalformedSpec(f"square left side {f}.{g} must have increasing colors", f, g)
        if by_name[g2].color != cg or by_name[f2].color != cf:
            raise MalformedSpec(f"square {f}.{g} = {g2}.{f2} has mismatched colors", f, g, g2, f2)
        if by_name[f].source != by_name[g].range:
            raise MalformedSpec(f"square left side {f}.{g} is not composable", f, g)
        if not (by_name[g2].range == by_name[f].range
                and by_name[g2].source == by_name[f2].range
                and by_name[f2].source == by_name[g].source):
            raise MalformedSpec(f"square {f}.{g} = {g2}.{f2} violates range/source compatibility",
                                f, g, g2, f2)
        if (f, g) in squares:
            raise MalformedSpec(f"duplicate square for {f}.{g}", f, g)
        squares[(f, g)] = (g2, f2)
    if k == 1 and squares:
        raise MalformedSpec("1-graphs take no squares")

    g = KGraph(k, vertices, edges, squares)
    _check_squares(g)
    _check_sources(g)
    if k >= 3:
        _check_hexagon(g)
    _check_commuting(g)
    return g


def _check_squares(g: KGraph) -> None:
    for i, j in itertools.combinations(range(1, g.k + 1), 2):
        left = [(a, b) for a in g.edge_order for b in g.edge_order
                if g.color(a) == i and g.color(b) == j
                and g.edges[a].source == g.edges[b].range]
        right = {(b, a) for a in g.edge_order for b in g.edge_order
                 if g.color(b) == j and g.color(a) == i
                 and g.edges[b].source == g.edges[a].range}
        for pair in left:
            if pair not in g.squares:
                raise MissingSquare(f"missing square for {pair[0]}.{pair[1]}", *pair)
        images = [g.squares[p] for p in left]
        if len(set(images)) != len(images):
            seen: dict = {}
            for p, im in zip(left, images):
                if im in seen:
                    raise NonBijectiveSquares(
                        f"squares {seen[im]} and {p} share the right side {im}", seen[im], p, im)
                seen[im] = p
        if set(images) != right:
            missed = sorted(right - set(images))
            raise NonBijectiveSquares(f"right sides {missed} are not hit", *missed)


def _check_sources(g: KGraph) -> None:
    for v in g.vertices:
        for i in range(1, g.k + 1):
            if not any(e.range == v and e.color == i for e in g.edges.values()):
                raise HasSource(f"vertex {v} receives no edge of color {i}", v, i)


def _check_hexagon(g: KGraph) -> None:
    names = g.edge_order
    for x, y, z in itertools.product(names, repeat=3):
        cols = {g.color(x), g.color(y), g.color(z)}
        if len(cols) != 3:
            continue
        if not (g.edges[x].source == g.edges[y].range and g.edges[y].source == g.edges[z].range):
            continue
        a = _bubble(g, [x, y, z], leftmost=True)
        b = _bubble(g, [x, y, z], leftmost=False)
        if a != b:
            raise HexagonFailure(f"rewrite orders disagree on {x}.{y}.{z}: {a} vs {b}", x, y, z)


def _bubble(g: KGraph, seq: list, leftmost: bool) -> tuple:
    seq = list(seq)
    while True:
        idx = [p for p in range(len(seq) - 1) if g.color(seq[p]) > g.color(seq[p + 1])]
        if not idx:
            return tuple(seq)
        p = idx[0] if leftmost else idx[-1]
        seq[p], seq[p + 1] = g.swap(seq[p], seq[p + 1])


def _matmul(a, b):
    n = len(a)
    return [[sum(a[i][t] * b[t][j] for t in range(n)) for j in range(n)] for i in range(n)]


def _check_commuting(g: KGraph) -> None:
    mats = [vertex_matrix(g, i) for i in range(1, g.k + 1)]
    for i, j in itertools.combinations(range(g.k), 2):
        if _matmul(mats[i], mats[j]) != _matmul(mats[j], mats[i]):
            raise NonBijectiveSquares(f"vertex matrices of colors {i + 1} and {j + 1} do not commute",
                                      i + 1, j + 1)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def vertex_matrix(g: KGraph, i: int) -> list:
    """Edge-count matrix ``A_i[v][w] = #{color-i edges with range v, source w}``."""
    idx = g.vertex_index()
    n = len(g.vertices)
    out = [[0] * n for _ in range(n)]
    for e in g.edges.values():
        if e.color == i:
            out[idx[e.range]][idx[e.source]] += 1
    return out


def enumerate_paths(g: KGraph, n) -> list:
    """All paths of degree ``n`` in normal form, sorted deterministically."""
    return list(g.paths_of_degree(g.as_degree(n)))


def compose(a: Path, b: Path) -> Path:
    if a.s != b.r:
        raise NotComposable(f"cannot compose {a} (source {a.s}) with {b} (range {b.r})", str(a), str(b))
    if not a.edges:
        return b
    if not b.edges:
        return a
    g = a.graph
    key = (a.r, a.edges, b.edges)
    hit = g._compose_cache.get(key)
    if hit is None:
        hit = g._make(g.normal_form(a.edges + b.edges))
        g._compose_cache[key] = hit
    return hit


def factorize(lam: Path, m) -> tuple:
    """Unique ``(head, tail)`` with ``lam == head.tail`` and ``d(head) == m``."""
    g = lam.graph
    if type(m) is not tuple:
        m = g.as_degree(m)
    key = (lam.r, lam.edges, m)
    hit = g._factor_cache.get(key)
    if hit is not None:
        return hit
    m = g.as_degree(m)
    d = lam.degree
    if any(a > b for a, b in zip(m, d)):
        raise DegreeOutOfRange(f"degree {m} is not below d({lam}) = {d}", str(lam), m)
    rest = tuple(x - y for x, y in zip(d, m))
    target = tuple(c for c in range(1, g.k + 1) for _ in range(m[c - 1])) + \
        tuple(c for c in range(1, g.k + 1) for _ in range(rest[c - 1]))
    seq = g.reorder(lam.edges, target)
    cut = sum(m)
    head_edges, tail_edges = seq[:cut], seq[cut:]
    if head_edges:
        head = g._make(head_edges)
    else:
        head = g.vertex(lam.r)
    tail = g._make(tail_edges) if tail_edges else g.vertex(lam.s)
    out = (head, tail)
    g._factor_cache[key] = out
    return out


def prefix(lam: Path, m) -> Path:
    return factorize(lam, m)[0]


def lambda_min(lam: Path, eta: Path) -> list:
    """Minimal common extensions: pairs (a, b) with lam.a == eta.b of degree d(lam) v d(eta)."""
    if lam.r != eta.r:
        return []
    g = lam.graph
    d1, d2 = lam.degree, eta.degree
    join = tuple(max(a, b) for a, b in zip(d1, d2))
    need = tuple(j - a for j, a in zip(join, d1))
    out = []
    for alpha in g.paths_from(lam.s, need):
        whole = compose(lam, alpha)
        head, beta = factorize(whole, d2)
        if head == eta:
            out.append((alpha, beta))
    return out


def rainbow_form(lam: Path) -> list:
    """Edges of ``lam`` in the alternating order of colors 1..k repeated n times."""
    d = lam.degree
    if len(set(d)) > 1:
        raise NotCubicDegree(f"degree {d} of {lam} is not of the form (n,...,n)", str(lam), d)
    g = lam.graph
    n = d[0] if d else 0
    target = tuple(c for _ in range(n) for c in range(1, g.k + 1))
    return list(g.reorder(lam.edges, target))


def degree_max(d: Sequence[int]) -> int:
    return max(d) if d else 0
