"""Check records shared by the verification routines and the command line."""
from __future__ import annotations

from dataclasses import dataclass, field

SCHEMA_VERSION = "kgrep-report/1"


@dataclass
class CheckRecord:
    relation: str
    subspace_depth: object = None
    max_deviation: float = 0.0
    passed: bool = True
    witnesses: list = field(default_factory=list)
    count: int = 0

    def observe(self, deviation: float, tol: float, witness) -> None:
        self.count += 1
        if deviation > self.max_deviation:
            self.max_deviation = deviation
        if deviation > tol:
            self.passed = False
            if len(self.witnesses) < 20:
                self.witnesses.append({"where": witness, "deviation": deviation})

    def to_json(self) -> dict:
        return {"relation": self.relation, "subspace_depth": self.subspace_depth,
                "max_deviation": self.max_deviation, "pass": self.passed,
                "instances": self.count, "witnesses": self.witnesses}


@dataclass
class Report:
    name: str
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max((c.max_deviation for c in self.checks), default=0.0)

    def check(self, relation: str) -> CheckRecord:
        for c in self.checks:
            if c.relation == relation:
                return c
        raise KeyError(relation)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.checks.append(record)
        return record

    def to_json(self) -> dict:
        out = {"name": self.name, "pass": self.passed, "max_deviation": self.max_deviation,
               "checks": [c.to_json() for c in self.checks]}
        out.update(self.extra)
        return out
