"""Projective systems on the path space and affine branching systems on [0, 1].

A :class:`LambdaProjectiveSystem` pairs a measure with the cocycle family
``f_lam``: square roots of the Radon-Nikodym derivatives of the prefix
pushforwards, optionally twisted by signs.  An :class:`IntervalSBFS` realizes
prefixing maps as affine maps of subintervals of the unit interval.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .errors import (
    CompositionMismatch,
    CoverFailure,
    InconsistentDensity,
    MalformedSpec,
    NullAtomUnderCap,
    RangesOverlap,
)
from .kgraph import KGraph, Path, compose, degree_max, factorize, read_spec
from .measures import (
    CylinderFunction,
    CylinderMeasure,
    check_consistency,
    density_measure,
    pushforward_prefix,
)
from .numeric import magnitude, parse_rational, sqrt
from .pathspace import atoms
from .report import CheckRecord, Report


def _as_cap(g: KGraph, cap) -> tuple:
    if cap is None:
        return g.cube(2)
    if isinstance(cap, int):
        return g.cube(cap)
    return g.as_degree(cap)


def paths_within(g: KGraph, cap) -> list:
    """All paths whose degree is at most ``cap`` coordinatewise."""
    cap = _as_cap(g, cap)
    out = []
    for d in itertools.product(*(range(c + 1) for c in cap)):
        out.extend(g.paths_of_degree(d))
    return out


class LambdaProjectiveSystem:
    """A measure together with a cocycle family ``lam -> f_lam``.

    ``factory(lam)`` returns ``f_lam`` as a :class:`CylinderFunction`; results
    are cached.  ``cap`` bounds the degrees enumerated by the checks, while
    ``f`` itself accepts any path.
    """

    def __init__(self, measure: CylinderMeasure, factory: Callable, cap, resolution: int,
                 label: str = "system"):
        self.measure = measure
        self.graph = measure.graph
        self._factory = factory
        self.cap = _as_cap(self.graph, cap)
        self.resolution = resolution
        self.label = label
        self.null_atoms: list = []
        self._cache: dict = {}

    def f(self, lam: Path) -> CylinderFunction:
        key = (lam.r, lam.edges)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._factory(lam)
            self._cache[key] = hit
        return hit

    def paths(self) -> list:
        return paths_within(self.graph, self.cap)

    def weight(self, a: Path):
        return self.measure(a)

    def is_nonnegative(self) -> bool:
        return all(float(v) >= 0 for lam in self.paths() for v in self.f(lam).values.values())

    def __repr__(self):
        return f"LambdaProjectiveSystem({self.label}, cap={self.cap})"


def _root_ratio(num, den):
    return sqrt(num / den)


def standard_system(mu: CylinderMeasure, D: Optional[int] = None, degree_cap=None) -> LambdaProjectiveSystem:
    """``f_lam = +sqrt(d(mu o sigma_lam^{-1}) / d mu)``, resolved ``D`` levels past ``d(lam)``.

    ``D`` defaults to the measure's declared lookahead (1 when unknown).
    """
    g = mu.graph
    if D is None:
        D = mu.lookahead if mu.lookahead is not None else 1
    system: LambdaProjectiveSystem

    def factory(lam: Path) -> CylinderFunction:
        depth = degree_max(lam.degree) + D
        if mu.max_depth is not None and depth > mu.max_depth:
            depth = max(mu.max_depth, degree_max(lam.degree))
        vals = {}
        d = lam.degree
        for a in atoms(g, depth):
            if a.r != lam.r:
                continue
            head, tail = factorize(a, d)
            if head != lam:
                continue
            num = mu(tail)
            den = mu(a)
            if den == 0:
                if num != 0:
                    raise NullAtomUnderCap(
                        f"mu(Z({a})) = 0 but mu(Z({tail})) > 0, so f_{lam} is unbounded there",
                        str(lam), str(a))
                system.null_atoms.append((str(lam), str(a)))
                continue
            if num == 0:
                system.null_atoms.append((str(lam), str(a)))
                continue
            vals[a] = _root_ratio(num, den)
        return CylinderFunction(g, depth, vals)

    system = LambdaProjectiveSystem(mu, factory, degree_cap, D, label=f"standard({mu.label})")
    for lam in system.paths():
        system.f(lam)
    return system


def with_signs(s: LambdaProjectiveSystem, sign_of: Callable, label: str = "") -> LambdaProjectiveSystem:
    """Multiply each ``f_lam`` by ``sign_of(lam)``: a scalar +-1 or a +-1 function."""
    def factory(lam: Path) -> CylinderFunction:
        sg = sign_of(lam)
        return s.f(lam) * sg

    out = LambdaProjectiveSystem(s.measure, factory, s.cap, s.resolution,
                                 label=label or f"signed({s.label})")
    return out


def edge_character(s: LambdaProjectiveSystem, edge_signs: dict) -> LambdaProjectiveSystem:
    """Twist by the multiplicative character ``lam -> prod of edge signs``."""
    def sign_of(lam: Path):
        out = 1
        for e in lam.edges:
            out *= edge_signs.get(e, 1)
        return out

    return with_signs(s, sign_of, label=f"character({s.label})")


def replace_function(s: LambdaProjectiveSystem, lam: Path, f: CylinderFunction) -> LambdaProjectiveSystem:
    """Same system with ``f_lam`` replaced by ``f`` (used to inject faults)."""
    key = (lam.r, lam.edges)

    def factory(p: Path) -> CylinderFunction:
        if (p.r, p.edges) == key:
            return f
        return s.f(p)

    return LambdaProjectiveSystem(s.measure, factory, s.cap, s.resolution,
                                  label=f"patched({s.label})")


def verify_projective(s: LambdaProjectiveSystem, tol: float = 0.0) -> Report:
    """Support, modulus and cocycle identities for every path (pair) within the cap."""
    mu = s.measure
    g = s.graph
    weight = mu
    report = Report("projective-system")
    support = report.add(CheckRecord("support"))
    modulus = report.add(CheckRecord("modulus"))
    cocycle = report.add(CheckRecord("cocycle"))
    paths = s.paths()
    for lam in paths:
        f = s.f(lam)
        for a, v in f.values.items():
            inside = a.r == lam.r and factorize(a, lam.degree)[0] == lam
            support.observe(0.0 if inside else magnitude(v), tol, str(lam))
        depth = f.depth + 1
        if mu.max_depth is not None:
            depth = min(depth, mu.max_depth)
        depth = max(depth, f.depth)
        push = pushforward_prefix(mu, lam, "preimage")
        fl = f.lift(depth)
        for a in atoms(g, depth):
            m = mu(a)
            if m == 0:
                continue
            rn = push(a) / m
            v = fl.values.get(a, 0)
            modulus.observe(magnitude(v * v - rn), tol, {"path": str(lam), "atom": str(a)})
    support.subspace_depth = modulus.subspace_depth = "resolution+1"
    for lam in paths:
        fl = s.f(lam)
        n = lam.degree
        for nu in paths:
            if nu.r != lam.s:
                continue
            lhs = fl * s.f(nu).compose_shift(n)
            rhs = s.f(compose(lam, nu))
            dev = lhs.max_abs_diff(rhs, weight)
            cocycle.observe(dev, tol, {"lam": str(lam), "nu": str(nu)})
    cocycle.subspace_depth = "resolution"
    return report


def rescale_system(s: LambdaProjectiveSystem, g1: CylinderFunction) -> LambdaProjectiveSystem:
    """System on ``d(mu') = g1 d(mu)`` with ``f'_lam = sqrt(g1 o sigma^n / g1) f_lam``."""
    mu = s.measure
    g = s.graph
    for a in atoms(g, g1.depth):
        if mu(a) != 0 and not g1.values.get(a, 0) > 0:
            raise InconsistentDensity(f"density is not positive on the supported atom {a}", str(a))
    mu_new = density_measure(mu, g1, label=f"g1*{mu.label}")
    report = check_consistency(mu_new, 2)
    if not report["pass"]:
        raise InconsistentDensity("rescaled measure fails the consistency identity",
                                  report["witnesses"][:1])

    def factory(lam: Path) -> CylinderFunction:
        f = s.f(lam)
        n = lam.degree
        depth = max(f.depth, g1.depth + degree_max(n))
        fl = f.lift(depth)
        shifted = g1.compose_shift(n).lift(depth)
        base = g1.lift(depth)
        vals = {}
        for a, v in fl.values.items():
            den = base.values.get(a, 0)
            if den == 0:
                continue
            num = shifted.values.get(a, 0)
            out = sqrt(num / den) * v
            if out != 0:
                vals[a] = out
        return CylinderFunction(g, depth, vals)

    look = s.resolution if mu_new.lookahead is None else max(s.resolution, g1.depth)
    return LambdaProjectiveSystem(mu_new, factory, s.cap, look, label=f"rescaled({s.label})")


# ---------------------------------------------------------------------------
# interval systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    @property
    def length(self) -> Fraction:
        return max(Fraction(0), self.hi - self.lo)

    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return not (self.lo_closed and self.hi_closed)
        return False

    def contains(self, x: Fraction) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def overlap(self, other: "Interval") -> Fraction:
        return max(Fraction(0), min(self.hi, other.hi) - max(self.lo, other.lo))

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo}, {self.hi}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class AffineMap:
    slope: Fraction
    offset: Fraction

    def __call__(self, x):
        return self.slope * x + self.offset

    def then(self, inner: "AffineMap") -> "AffineMap":
        """``self o inner``."""
        return AffineMap(self.slope * inner.slope, self.slope * inner.offset + self.offset)

    def inverse(self) -> "AffineMap":
        return AffineMap(1 / self.slope, -self.offset / self.slope)

    def image(self, iv: Interval) -> Interval:
        a, b = self(iv.lo), self(iv.hi)
        if self.slope > 0:
            return Interval(a, b, iv.lo_closed, iv.hi_closed)
        return Interval(b, a, iv.hi_closed, iv.lo_closed)


IDENTITY = AffineMap(Fraction(1), Fraction(0))


def total_length(pieces) -> Fraction:
    return sum((p.length for p in pieces), Fraction(0))


def overlap_length(a: list, b: list) -> Fraction:
    return sum((x.overlap(y) for x in a for y in b), Fraction(0))


class IntervalSBFS:
    """Affine prefixing maps on vertex domains inside the unit interval."""

    def __init__(self, graph: KGraph, domains: dict, maps: dict):
        self.graph = graph
        self.domains = domains
        self.maps = maps
        self._tau: dict = {}

    def tau(self, lam: Path) -> AffineMap:
        key = (lam.r, lam.edges)
        hit = self._tau.get(key)
        if hit is None:
            hit = IDENTITY
            for e in reversed(lam.edges):
                hit = self.maps[e].then(hit)
            self._tau[key] = hit
        return hit

    def range(self, lam: Path) -> list:
        t = self.tau(lam)
        return [t.image(iv) for iv in self.domains[lam.s]]

    def phi(self, lam: Path) -> Fraction:
        """Radon-Nikodym constant of ``tau_lam`` for Lebesgue measure."""
        return abs(self.tau(lam).slope)

    def space(self) -> list:
        return [iv for v in self.graph.vertices for iv in self.domains[v]]

    def vertex_of(self, x) -> Optional[str]:
        for v in self.graph.vertices:
            if any(iv.contains(x) for iv in self.domains[v]):
                return v
        return None


def _parse_interval(raw) -> Interval:
    if not isinstance(raw, (list, tuple)) or len(raw) not in (2, 3):
        raise MalformedSpec(f"interval must be [a, b] or [a, b, brackets]; got {raw!r}")
    lo, hi = parse_rational(raw[0]), parse_rational(raw[1])
    brackets = raw[2] if len(raw) == 3 else "[]"
    if brackets not in ("[]", "[)", "(]", "()"):
        raise MalformedSpec(f"unknown bracket style {brackets!r}")
    if not (0 <= lo < hi <= 1):
        raise MalformedSpec(f"interval {raw!r} is not a nondegenerate subinterval of [0, 1]")
    return Interval(lo, hi, brackets[0] == "[", brackets[1] == "]")


def interval_sbfs_load_verify(g: KGraph, spec, levels: int = 2) -> IntervalSBFS:
    """Load an affine interval system and verify the branching-system conditions exactly.

    Ranges of equal-degree paths may meet only in null sets, the ranges of
    ``v Lambda^m`` must fill ``D_v`` up to a null set, and the maps must respect
    every factorization square.  Degrees up to ``(levels, ..., levels)`` are checked.
    """
    spec = read_spec(spec, "interval system")
    if not isinstance(spec, dict) or spec.get("space") != "unit-interval":
        raise MalformedSpec("interval system must declare space 'unit-interval'")
    try:
        raw_domains = spec["domains"]
        raw_maps = spec["maps"]
    except KeyError as exc:
        raise MalformedSpec(f"interval system lacks {exc}") from None
    domains = {}
    for v in g.vertices:
        if v not in raw_domains:
            raise MalformedSpec(f"no domain for vertex {v}", v)
        domains[v] = [_parse_interval(x) for x in raw_domains[v]]
    maps = {}
    for e in g.edge_order:
        if e not in raw_maps:
            raise MalformedSpec(f"no map for edge {e}", e)
        m = AffineMap(parse_rational(raw_maps[e]["slope"]), parse_rational(raw_maps[e]["offset"]))
        if m.slope == 0:
            raise MalformedSpec(f"map of {e} is constant", e)
        maps[e] = m
    sbfs = IntervalSBFS(g, domains, maps)

    verts = list(g.vertices)
    for v, w in itertools.combinations(verts, 2):
        if overlap_length(domains[v], domains[w]) > 0:
            raise RangesOverlap(f"domains of {v} and {w} overlap", v, w)
    for v in verts:
        for a, b in itertools.combinations(domains[v], 2):
            if a.overlap(b) > 0:
                raise MalformedSpec(f"domain pieces of {v} overlap", v)

    for (f, gg), (g2, f2) in g.squares.items():
        left = maps[f].then(maps[gg])
        right = maps[g2].then(maps[f2])
        if left != right:
            raise CompositionMismatch(
                f"tau_{f} o tau_{gg} = {left} but tau_{g2} o tau_{f2} = {right}", f, gg, g2, f2)

    for d in itertools.product(range(levels + 1), repeat=g.k):
        if not any(d):
            continue
        paths = g.paths_of_degree(d)
        ranges = {p: sbfs.range(p) for p in paths}
        for p, q in itertools.combinations(paths, 2):
            if overlap_length(ranges[p], ranges[q]) > 0:
                raise RangesOverlap(f"ranges of {p} and {q} overlap in positive length",
                                    str(p), str(q))
        for v in verts:
            dom = domains[v]
            covered = Fraction(0)
            for p in paths:
                if p.r != v:
                    continue
                inside = overlap_length(ranges[p], dom)
                if inside != total_length(ranges[p]):
                    raise CoverFailure(f"range of {p} leaves the domain of {v}", str(p), v)
                covered += inside
            if covered != total_length(dom):
                raise CoverFailure(
                    f"ranges of degree {d} into {v} cover {covered} of the length {total_length(dom)}",
                    v, d)
    return sbfs


# ---------------------------------------------------------------------------
# sigma-algebra generated by the ranges
# ---------------------------------------------------------------------------

def _cells(breaks: list, space: list) -> list:
    """Open cells between consecutive breakpoints and the breakpoints themselves."""
    pts = sorted(set(breaks))
    cells = []
    for a, b in zip(pts, pts[1:]):
        mid = (a + b) / 2
        if any(iv.contains(mid) for iv in space):
            cells.append(Interval(a, b, False, False))
    for p in pts:
        if any(iv.contains(p) for iv in space):
            cells.append(Interval(p, p, True, True))
    return cells


def _merge(cells: list) -> list:
    """Merge touching cells into maximal intervals."""
    cells = sorted(cells, key=lambda c: (c.lo, c.hi, not c.lo_closed))
    out: list = []
    for c in cells:
        if out:
            last = out[-1]
            touching = last.hi == c.lo and (last.hi_closed or c.lo_closed)
            if touching or (last.hi == c.hi and last.lo <= c.lo):
                hi_closed = c.hi_closed if c.hi > last.hi else (last.hi_closed or c.hi_closed)
                hi = max(last.hi, c.hi)
                out[-1] = Interval(last.lo, hi, last.lo_closed, hi_closed)
                continue
        out.append(c)
    return out


def _interval_partition(sbfs: IntervalSBFS, level: int) -> list:
    g = sbfs.graph
    sets = []
    for v in g.vertices:
        sets.append(sbfs.domains[v])
    for d in itertools.product(range(level + 1), repeat=g.k):
        if any(d):
            for p in g.paths_of_degree(d):
                sets.append(sbfs.range(p))
    breaks = [x for s in sets for iv in s for x in (iv.lo, iv.hi)]
    space = sbfs.space()
    groups: dict = {}
    for c in _cells(breaks, space):
        probe = c.lo if c.lo == c.hi else (c.lo + c.hi) / 2
        sig = tuple(any(iv.contains(probe) for iv in s) for s in sets)
        groups.setdefault(sig, []).append(c)
    atoms_out = []
    for cells in groups.values():
        atoms_out.append(_merge(cells))
    atoms_out.sort(key=lambda a: (a[0].lo, a[0].hi))
    return atoms_out


def _as_open(pieces: list) -> tuple:
    """Canonical null-set-insensitive form: the open pieces, merged."""
    opens = sorted((p.lo, p.hi) for p in pieces if p.hi > p.lo)
    out: list = []
    for lo, hi in opens:
        if out and out[-1][1] >= lo:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


def _contains_or_misses(container: list, target: list) -> Optional[bool]:
    """True if ``target`` lies in ``container`` up to null sets, False if they
    meet only in a null set, None otherwise."""
    inter = overlap_length(container, target)
    if inter == 0:
        return False
    if inter == total_length(target):
        return True
    return None


def certify_unsplit(sbfs: IntervalSBFS, atom: list, budget: int = 64) -> bool:
    """Certify that no range set ever splits ``atom`` (up to null sets).

    Works through the sets ``tau_f^{-1}(B)``: if every domain and every edge
    range either contains or misses each of them, then by induction on path
    length every range ``R_lam`` contains or misses ``atom``.
    """
    g = sbfs.graph
    todo = [[Interval(lo, hi, False, False) for lo, hi in _as_open(atom)]]
    seen = {_as_open(atom)}
    while todo:
        b = todo.pop()
        for v in g.vertices:
            if _contains_or_misses(sbfs.domains[v], b) is None:
                return False
        for e in g.edge_order:
            rng = sbfs.range(g.edge(e))
            rel = _contains_or_misses(rng, b)
            if rel is None:
                return False
            if rel:
                inv = sbfs.maps[e].inverse()
                pre = [inv.image(iv) for iv in b]
                key = _as_open(pre)
                if key not in seen:
                    if len(seen) >= budget:
                        return False
                    seen.add(key)
                    todo.append([Interval(lo, hi, False, False) for lo, hi in key])
    return True


def monic_sigma_check(system, n_max: int) -> dict:
    """Trace the partition generated by the range sets for levels 1..n_max.

    For interval systems the partition is computed exactly; atoms of positive
    length that survive every level unsplit are tested with
    :func:`certify_unsplit`, and a certified atom proves the ranges do not
    generate the Borel sets.  For path-space systems the range of ``f_lam`` is
    compared with the cylinder ``Z(lam)``.
    """
    if isinstance(system, IntervalSBFS):
        return _monic_interval(system, n_max)
    return _monic_pathspace(system, n_max)


def _monic_interval(sbfs: IntervalSBFS, n_max: int) -> dict:
    levels = []
    persistent = None
    for n in range(1, n_max + 1):
        parts = _interval_partition(sbfs, n)
        positive = [a for a in parts if total_length(a) > 0]
        mesh = max((total_length(a) for a in positive), default=Fraction(0))
        keys = {_as_open(a): a for a in positive}
        persistent = dict(keys) if persistent is None else \
            {k: v for k, v in persistent.items() if k in keys}
        levels.append({"level": n, "atoms": len(positive), "mesh": str(mesh),
                       "mesh_float": float(mesh)})
    obstructions = []
    for key, atom in sorted((persistent or {}).items()):
        certified = certify_unsplit(sbfs, atom)
        obstructions.append({"atom": " u ".join(str(iv) for iv in atom),
                             "measure": str(total_length(atom)),
                             "certified": certified,
                             "unsplit_at_levels": list(range(1, n_max + 1))})
    if any(o["certified"] for o in obstructions):
        verdict = "not-monic"
    elif obstructions:
        verdict = "not-monic-at-depth"
    else:
        verdict = "monic-likely"
    return {"kind": "interval", "levels": levels, "obstructions": obstructions,
            "verdict": verdict, "monic": verdict == "monic-likely"}


def _monic_pathspace(s: LambdaProjectiveSystem, n_max: int) -> dict:
    mu = s.measure
    g = s.graph
    levels = []
    mismatches = []
    for n in range(1, n_max + 1):
        masses = [mu(a) for a in atoms(g, n)]
        mesh = max(masses, default=Fraction(0))
        levels.append({"level": n, "atoms": sum(1 for m in masses if m != 0),
                       "mesh": str(mesh), "mesh_float": float(mesh)})
    for lam in s.paths():
        f = s.f(lam)
        ind = CylinderFunction.indicator(lam, max(f.depth, degree_max(lam.degree)))
        for a in atoms(g, ind.depth):
            if mu(a) == 0:
                continue
            in_range = f.at(a) != 0 if f.depth <= ind.depth else None
            if in_range is None:
                continue
            if in_range != (a in ind.values):
                mismatches.append({"path": str(lam), "atom": str(a)})
    verdict = "monic-likely" if not mismatches else "not-monic-at-depth"
    return {"kind": "path-space", "levels": levels, "range_mismatches": mismatches[:20],
            "verdict": verdict, "monic": not mismatches}


__all__ = [
    "AffineMap", "Interval", "IntervalSBFS", "LambdaProjectiveSystem", "edge_character",
    "interval_sbfs_load_verify", "monic_sigma_check", "paths_within", "replace_function",
    "rescale_system", "standard_system", "verify_projective", "with_signs",
]
