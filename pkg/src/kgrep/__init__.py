"""Finite-depth computations for representations of higher-rank graph algebras on path-space measures."""
from __future__ import annotations

import json
from importlib import resources

from .errors import KGraphError
from .kgraph import KGraph, Path, load_validate

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a bundled JSON fixture (``name`` with or without ``.json``)."""
    if not name.endswith(".json"):
        name += ".json"
    return resources.files(__package__).joinpath("fixtures", name)


def load_fixture(name: str):
    return json.loads(fixture_path(name).read_text())


__all__ = ["KGraph", "Path", "KGraphError", "load_validate", "fixture_path", "load_fixture"]
