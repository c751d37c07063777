"""Cylinder sets of the infinite path space at finite depth.

Infinite paths are never materialized.  A set is a finite disjoint union of
cylinders ``Z(lam)``, and depth ``D`` always means the degree ``(D, ..., D)``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .kgraph import KGraph, Path, compose, enumerate_paths, lambda_min


@dataclass(frozen=True)
class Cylinder:
    """``Z(path)``: the infinite paths whose initial segment is ``path``."""

    path: Path

    @property
    def graph(self) -> KGraph:
        return self.path.graph

    def __str__(self) -> str:
        return f"Z({self.path})"


@dataclass(frozen=True)
class DepthPartition:
    """The partition of the path space by cylinders of degree ``(D, ..., D)``."""

    graph: KGraph
    depth: int

    @property
    def atoms(self) -> list:
        return enumerate_paths(self.graph, self.graph.cube(self.depth))

    def cylinders(self) -> list:
        return [Cylinder(p) for p in self.atoms]

    def refines(self, other: "DepthPartition") -> bool:
        return self.depth >= other.depth


def atoms(g: KGraph, depth: int) -> list:
    return enumerate_paths(g, g.cube(depth))


def refine(c: Cylinder, m) -> list:
    """Split ``Z(lam)`` into the cylinders ``Z(lam.eta)`` with ``d(eta) == m``."""
    lam = c.path
    g = lam.graph
    return [Cylinder(compose(lam, eta)) for eta in g.paths_from(lam.s, g.as_degree(m))]


def shift_preimage(n, c: Cylinder) -> list:
    """Preimage of ``Z(eta)`` under the coding map that deletes a degree-n prefix."""
    eta = c.path
    g = eta.graph
    return [Cylinder(compose(lam, eta)) for lam in g.paths_into(g.as_degree(n), eta.r)]


def prefix_preimage(lam: Path, c: Cylinder) -> list:
    """Preimage of ``Z(eta)`` under prepending ``lam``; lies inside ``Z(s(lam))``."""
    return [Cylinder(alpha) for alpha, _ in lambda_min(lam, c.path)]
