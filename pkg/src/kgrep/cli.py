"""Command-line front end: ``kgrep <subcommand> ...`` prints one JSON report.

Exit status: 0 when every check passes, 1 when a check fails (or the verdict is
negative), 2 for unreadable or malformed input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path as FsPath

from . import fixture_path
from .errors import KGraphError, MalformedSpec
from .kgraph import KGraph, load_validate, rainbow_form, vertex_matrix
from .measures import (CylinderFunction, check_consistency, hellinger_affinity, lebesgue_decompose,
                       load_measure)
from .numeric import default_tol, format_scalar, parse_rational
from .pathspace import atoms
from .projsys import (LambdaProjectiveSystem, edge_character, interval_sbfs_load_verify,
                      monic_sigma_check, rescale_system, standard_system, verify_projective)
from .report import SCHEMA_VERSION
from .repn import (build_truncation, commutant_invariants, equivalence_check, intertwiner_check,
                   measure_from_state, monic_span_check, pvm_checks, verify_ck)
from .universal import embed, embed_and_intertwine, inner_product, nu_single_term_check

ALIASES = {
    "markov13": "g2_markov_1_3",
    "markov14": "g2_markov_1_4",
    "markov34": "g2_markov_3_4",
}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# input resolution
# ---------------------------------------------------------------------------

def resolve(name: str) -> FsPath:
    """A file on disk, or else a bundled fixture (``g1-sbfs.json`` finds ``g1_sbfs.json``)."""
    p = FsPath(name)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    stem = ALIASES.get(stem, stem).replace("-", "_")
    candidate = FsPath(str(fixture_path(stem)))
    if candidate.exists():
        return candidate
    raise InputError(f"no such file or bundled fixture: {name}")


def read_json(path: FsPath):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedSpec(f"{path.name} is not valid JSON: {exc}") from None


def digest(path: FsPath) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_graph(name: str, inputs: dict) -> KGraph:
    path = resolve(name)
    inputs[path.name] = digest(path)
    return load_validate(read_json(path))


def load_measure_file(g: KGraph, name: str, inputs: dict):
    path = resolve(name)
    inputs[path.name] = digest(path)
    mu = load_measure(g, read_json(path))
    mu.label = path.stem
    return mu


def function_from_cylinders(g: KGraph, values: dict) -> CylinderFunction:
    """Sum of ``c * chi_{Z(lam)}`` over the given cylinders (they may not overlap)."""
    paths = {g.path(k): parse_rational(v) for k, v in values.items()}
    depth = max((max(p.degree, default=0) for p in paths), default=0)
    out = CylinderFunction(g, depth, {})
    for p, c in paths.items():
        out = out + CylinderFunction.indicator(p, depth) * c
    return out


def load_system(g: KGraph, name: str, inputs: dict, base: FsPath) -> LambdaProjectiveSystem:
    """System file: ``{"measure": FILE|{...}, "cap": c, "signs": {...}, "rescale": {...}}``."""
    path = resolve(name)
    inputs[path.name] = digest(path)
    spec = read_json(path)
    if not isinstance(spec, dict) or "measure" not in spec:
        raise MalformedSpec(f"{path.name}: a system description needs a 'measure' field")
    raw = spec["measure"]
    if isinstance(raw, str):
        local = path.parent / raw
        mu = load_measure_file(g, str(local if local.exists() else raw), inputs)
    else:
        mu = load_measure(g, raw)
    s = standard_system(mu, spec.get("resolution"), spec.get("cap", 2))
    if "signs" in spec:
        s = edge_character(s, {k: int(v) for k, v in spec["signs"].items()})
    if "rescale" in spec:
        s = rescale_system(s, function_from_cylinders(g, spec["rescale"]))
    s.label = path.stem
    return s


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _records(*reports) -> list:
    out = []
    for r in reports:
        for c in r.checks:
            item = c.to_json()
            item["report"] = r.name
            out.append(item)
    return out


def cmd_validate(args, inputs):
    try:
        g = load_graph(args.graph, inputs)
    except KGraphError as exc:
        if exc.name in ("MalformedSpec",):
            raise
        return {"valid": False, "error": {"name": exc.name, "message": str(exc),
                                          "detail": [str(d) for d in exc.detail]}}, False
    return {"valid": True, "k": g.k, "vertices": list(g.vertices),
            "edges": {n: {"color": e.color, "range": e.range, "source": e.source} for n, e in g.edges.items()},
            "vertex_matrices": [[[int(x) for x in row] for row in vertex_matrix(g, i)]
                                for i in range(1, g.k + 1)]}, True


def cmd_paths(args, inputs):
    g = load_graph(args.graph, inputs)
    try:
        degree = tuple(int(x) for x in args.degree.split(","))
    except ValueError:
        raise InputError(f"--degree must be comma-separated integers, got {args.degree!r}") from None
    paths = g.paths_of_degree(g.as_degree(degree))
    out = {"degree": list(degree), "count": len(paths), "paths": [str(p) for p in paths]}
    if args.rainbow:
        out["rainbow"] = [".".join(rainbow_form(p)) for p in paths]
    return out, True


def cmd_measure_check(args, inputs):
    g = load_graph(args.graph, inputs)
    mu = load_measure_file(g, args.measure, inputs)
    rep = check_consistency(mu, args.depth, args.tol)
    rep["vertex_masses"] = {v: format_scalar(mu(g.vertex(v))) for v in g.vertices}
    return rep, bool(rep["pass"])


def _system_from_measure(args, inputs):
    g = load_graph(args.graph, inputs)
    mu = load_measure_file(g, args.measure, inputs)
    if args.exact and not mu.is_exact():
        raise InputError("--exact was given but the measure has inexact values")
    if args.double:
        mu = mu.as_float()
    return g, mu


def cmd_ck_verify(args, inputs):
    g, mu = _system_from_measure(args, inputs)
    s = standard_system(mu, degree_cap=args.cap)
    rep = build_truncation(s, args.depth)
    jobs = [lambda: verify_projective(s, args.tol), lambda: verify_ck(rep, args.tol),
            lambda: pvm_checks(rep, args.tol)]
    reports = _run(jobs, args.jobs)
    ok = all(r.passed for r in reports)
    return {"system": s.label, "depth": args.depth, "cap": list(rep.cap),
            "arithmetic": "double" if args.double else "exact",
            "checks": _records(*reports), "pass": ok}, ok


def cmd_monic_check(args, inputs):
    if args.interval:
        sbfs_path = resolve(args.interval)
        inputs[sbfs_path.name] = digest(sbfs_path)
        spec = read_json(sbfs_path)
        graph_name = args.graph or spec.get("graph")
        if graph_name is None:
            raise InputError("the interval system names no graph; pass GRAPH")
        if not args.graph:
            local = sbfs_path.parent / graph_name
            graph_name = str(local) if local.exists() else graph_name
        g = load_graph(graph_name, inputs)
        sbfs = interval_sbfs_load_verify(g, spec)
        result = monic_sigma_check(sbfs, args.max_depth)
        return result, result["monic"]
    if not (args.graph and args.measure):
        raise InputError("monic-check needs GRAPH MEASURE or --interval SBFS")
    g, mu = _system_from_measure(args, inputs)
    s = standard_system(mu, degree_cap=args.cap)
    sigma = monic_sigma_check(s, args.max_depth)
    span = monic_span_check(build_truncation(s, args.max_depth))
    ok = sigma["monic"] and span["pass"]
    return {"sigma_algebra": sigma, "span": span, "verdict": "monic" if ok else "not-monic",
            "monic": ok}, ok


def cmd_disjointness(args, inputs):
    g = load_graph(args.graph, inputs)
    m1 = load_measure_file(g, args.m1, inputs)
    m2 = load_measure_file(g, args.m2, inputs)
    hell = hellinger_affinity(m1, m2, args.max_depth)
    depth = min(args.max_depth, args.lebesgue_depth)
    leb = lebesgue_decompose(m2, m1, depth)
    return {"hellinger": hell.to_json(),
            "lebesgue": {"depth": depth, "singular_atoms": [str(a) for a in leb.singular_atoms],
                         "regular_atoms": len(leb.regular_atoms),
                         "residual": format_scalar(leb.residual)},
            "verdict": hell.verdict}, True


def cmd_commutant(args, inputs):
    g = load_graph(args.graph, inputs)
    mu = load_measure_file(g, args.measure, inputs)
    res = commutant_invariants(mu, args.depth)
    out = res.to_json()
    out["no_invariant_obstruction"] = res.dimension == 1
    return out, True


def cmd_equiv(args, inputs):
    g = load_graph(args.graph, inputs)
    sysS = load_system(g, args.sys1, inputs, FsPath("."))
    sysT = load_system(g, args.sys2, inputs, FsPath("."))
    res = equivalence_check(sysS, sysT, args.depth, args.tol)
    out = res.to_json()
    ok = res.verdict == "equivalent"
    if ok and args.budget:
        w = intertwiner_check(build_truncation(sysS, args.budget), build_truncation(sysT, args.budget),
                              res.h, args.tol)
        out["intertwiner"] = w.to_json()
        ok = w.passed
    return out, ok


def _random_trials(g: KGraph, depth: int, count: int, seed: int) -> list:
    rng = random.Random(seed)
    return [CylinderFunction(g, depth, {a: Fraction(rng.randint(-9, 9), rng.randint(1, 9))
                                        for a in atoms(g, depth)})
            for _ in range(count)]


def cmd_universal_check(args, inputs):
    g = load_graph(args.graph, inputs)
    measures = [load_measure_file(g, m, inputs) for m in args.measures]
    trials = _random_trials(g, args.depth, args.trials, args.seed)
    one = CylinderFunction.constant(g, Fraction(1))
    reports = []
    for mu in measures:
        s = standard_system(mu, degree_cap=args.cap)
        r = embed_and_intertwine(s, trials, args.tol)
        r.name = f"universal-embedding {mu.label}"
        reports.append(r)
        n = nu_single_term_check(embed(trials[0], mu, args.depth), args.depth, args.tol)
        n.name = f"nu-measure {mu.label}"
        reports.append(n)
    pairs = []
    for i, a in enumerate(measures):
        for b in measures[i + 1:]:
            pairs.append({"left": a.label, "right": b.label, "depth": args.depth,
                          "inner_product": format_scalar(
                              inner_product(embed(one, a, args.depth), embed(one, b, args.depth)))})
    ok = all(r.passed for r in reports)
    return {"checks": _records(*reports), "unit_inner_products": pairs, "pass": ok}, ok


def cmd_state(args, inputs):
    g, mu = _system_from_measure(args, inputs)
    rep = build_truncation(standard_system(mu, degree_cap=args.cap), args.depth)
    st = measure_from_state(rep)
    worst = 0.0
    for d in range(st.max_depth + 1):
        for a in atoms(g, d):
            worst = max(worst, abs(float(st(a) - mu(a))))
    ok = worst <= args.tol
    return {"depth": st.max_depth, "max_deviation": worst, "pass": ok}, ok


def _run(jobs: list, workers: int) -> list:
    if workers <= 1:
        return [j() for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: j(), jobs))


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _tolerance(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_tolerance, default=None,
                        help="deviation tolerance (default: KGR_TOL or 1e-9)")
    common.add_argument("--exact", action="store_true",
                        help="refuse inputs that are not exact rationals")
    common.add_argument("--double", action="store_true",
                        help="run the operator checks in double precision")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for independent checks")
    common.add_argument("--timing", action="store_true",
                        help="add wall time to the report (makes output run-dependent)")

    parser = argparse.ArgumentParser(prog="kgrep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="load a k-graph and check its squares")
    p.add_argument("graph")
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("paths", parents=[common], help="list the paths of one degree")
    p.add_argument("graph")
    p.add_argument("--degree", required=True, help="comma-separated degree, e.g. 1,1")
    p.add_argument("--rainbow", action="store_true", help="also print interleaved color forms")
    p.set_defaults(run=cmd_paths)

    p = sub.add_parser("measure-check", parents=[common], help="check Kolmogorov consistency")
    p.add_argument("graph")
    p.add_argument("measure")
    p.add_argument("--depth", type=int, default=3)
    p.set_defaults(run=cmd_measure_check)

    p = sub.add_parser("ck-verify", parents=[common], help="Cuntz-Krieger and projection checks")
    p.add_argument("graph")
    p.add_argument("measure")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--cap", type=int, default=2)
    p.set_defaults(run=cmd_ck_verify)

    p = sub.add_parser("monic-check", parents=[common], help="monicity of a standard or interval system")
    p.add_argument("graph", nargs="?")
    p.add_argument("measure", nargs="?")
    p.add_argument("--interval", metavar="SBFS")
    p.add_argument("--max-depth", type=int, default=5)
    p.add_argument("--cap", type=int, default=2)
    p.set_defaults(run=cmd_monic_check)

    p = sub.add_parser("disjointness", parents=[common], help="Hellinger trend and Lebesgue split")
    p.add_argument("graph")
    p.add_argument("m1")
    p.add_argument("m2")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--lebesgue-depth", type=int, default=4)
    p.set_defaults(run=cmd_disjointness)

    p = sub.add_parser("commutant", parents=[common], help="shift-invariant functions at a depth")
    p.add_argument("graph")
    p.add_argument("measure")
    p.add_argument("--depth", type=int, default=3)
    p.set_defaults(run=cmd_commutant)

    p = sub.add_parser("equiv", parents=[common], help="unitary equivalence of two systems")
    p.add_argument("graph")
    p.add_argument("sys1")
    p.add_argument("sys2")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--budget", type=int, default=5,
                   help="truncation depth for the intertwiner check (0 skips it)")
    p.set_defaults(run=cmd_equiv)

    p = sub.add_parser("universal-check", parents=[common], help="universal half-density checks")
    p.add_argument("graph")
    p.add_argument("measures", nargs="+")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--cap", type=int, default=2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=cmd_universal_check)

    p = sub.add_parser("state-measure", parents=[common], help="recover the measure from the vector 1")
    p.add_argument("graph")
    p.add_argument("measure")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--cap", type=int, default=2)
    p.set_defaults(run=cmd_state)
    return parser


def run_command(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.tol is None:
        args.tol = default_tol()
    inputs: dict = {}
    started = time.perf_counter()
    report = {"schema": SCHEMA_VERSION, "command": args.command}
    try:
        body, ok = args.run(args, inputs)
        code = 0 if ok else 1
    except (InputError, KGraphError, OSError) as exc:
        name = exc.name if isinstance(exc, KGraphError) else type(exc).__name__
        print(f"kgrep {args.command}: {name}: {exc}", file=sys.stderr)
        body, code = {"error": {"name": name, "message": str(exc)}}, 2
    report["inputs"] = dict(sorted(inputs.items()))
    report["tolerance"] = args.tol
    report.update(body)
    report["exit_code"] = code
    if args.timing:
        report["wall_time_s"] = round(time.perf_counter() - started, 6)
    json.dump(report, out, indent=2, default=format_scalar)
    out.write("\n")
    return code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
