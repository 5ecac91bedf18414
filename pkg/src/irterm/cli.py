"""Command-line driver: parse, build graphs, check completeness, prove termination.

The pipeline is parse -> symbolic execution graph per root -> completeness
and memory-safety check -> integer transition system per cyclic component
-> ranking-function search.  Memory safety is claimed only for a complete
graph, and termination only on top of memory safety, because ranking
arguments are read off transitions of a complete graph.

Verdicts are {proved, unknown} only.  The analysis over-approximates, so it
can never conclude that a program misbehaves, merely that it failed to
prove otherwise.

Reports are deterministic: for a fixed input, configuration, and seed the
JSON report and the DOT output are byte-identical across runs.  Wall-clock
timings are kept on the in-memory verdict and the console summary but out
of the serialized report for that reason.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import ir
from .logic import Oracle
from .oracle import initial_concrete, simulate
from .seg import HeuristicsConfig, Seg, SegBuilder, is_complete, to_dot
from .smtlib import SmtSolverClient
from .termination import (
    Terminating,
    certificate_json,
    check_certificate,
    extract_its,
    its_text,
    prove_termination,
    sccs,
)

PROVED = "proved"
UNKNOWN = "unknown"


@dataclass
class AnalysisConfig:
    """Everything that shapes one analysis run.

    aggressive_merge and unique_entry are thresholds (conditional-branch
    count and instruction count) past which the corresponding heuristic
    turns on; None keeps the built-in defaults.
    """

    solver: Optional[str] = None
    solver_timeout_ms: int = 2000
    aggressive_merge: Optional[int] = None
    unique_entry: Optional[int] = None
    prune: str = "off"
    node_cap: int = 10_000
    emit: tuple = ()
    jobs: int = 1
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        for name in ("aggressive_merge", "unique_entry"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} threshold must be positive")
        if self.node_cap <= 0:
            raise ValueError("node_cap must be positive")
        if self.solver_timeout_ms <= 0:
            raise ValueError("solver_timeout_ms must be positive")


@dataclass
class Verdict:
    memory_safety: str
    termination: str
    functions: dict = field(default_factory=dict)  # name -> detail dict
    timings: dict = field(default_factory=dict)  # phase -> seconds
    roots: dict = field(default_factory=dict)  # root -> graph summary
    artifacts: list = field(default_factory=list)  # paths written

    @property
    def exit_code(self) -> int:
        return 0 if self.memory_safety == PROVED and self.termination == PROVED else 1


def _heuristics(cfg: AnalysisConfig) -> HeuristicsConfig:
    h = HeuristicsConfig(prune_mode=cfg.prune, node_cap=cfg.node_cap)
    if cfg.aggressive_merge is not None:
        h.aggressive_branch_threshold = cfg.aggressive_merge
    if cfg.unique_entry is not None:
        h.unique_entry_threshold = cfg.unique_entry
    return h


def _oracle(cfg: AnalysisConfig) -> Oracle:
    if cfg.solver:
        return Oracle(external=SmtSolverClient(cfg.solver, timeout_ms=cfg.solver_timeout_ms))
    return Oracle()


# ---------------------------------------------------------------------------
# per-root analysis


def _build_seg(program: ir.Program, root: str, cfg: AnalysisConfig, oracle: Oracle) -> Seg:
    b = SegBuilder(program, _heuristics(cfg), oracle=oracle)
    b.add_root(root)
    g = b.run()
    g.capped = b.capped
    return g


def _analyze_root(program: ir.Program, root: str, cfg: AnalysisConfig) -> dict:
    """Full pipeline for one root; returns only plain data so the caller
    may run it in a worker process."""
    oracle = _oracle(cfg)
    timings: dict = {}

    t = time.perf_counter()
    g = _build_seg(program, root, cfg, oracle)
    timings["seg"] = time.perf_counter() - t

    t = time.perf_counter()
    report = is_complete(g, oracle)
    timings["completeness"] = time.perf_counter() - t
    safe = report.is_complete and not getattr(g, "capped", False)

    # per-function node ownership
    func_nodes: dict = {}
    for nid, s in g.nodes.items():
        fn = g.function_of(nid)
        if fn is not None:
            func_nodes.setdefault(fn, []).append(nid)
    err_srcs = set()
    if g.err_id is not None:
        err_srcs = {g.function_of(e.src) for e in g.in_edges(g.err_id)}

    components = sorted(sccs(g), key=min)
    its_lines: list = []
    certs: dict = {}
    functions: dict = {
        fn: {
            "nodes": len(nids),
            "components": 0,
            "err": fn in err_srcs,
            "termination": PROVED,
        }
        for fn, nids in sorted(func_nodes.items())
    }
    t = time.perf_counter()
    per_fn_index: dict = {}
    its_detail: list = []
    for comp in components:
        fn = g.function_of(min(comp)) or "?"
        k = per_fn_index.get(fn, 0)
        per_fn_index[fn] = k + 1
        label = f"{fn}#{k}"
        its = extract_its(g, comp, oracle)
        res = prove_termination(its, oracle=oracle)
        proved = isinstance(res, Terminating) and check_certificate(its, res.certificate, oracle)
        detail = {
            "component": label,
            "locations": len(its.locations),
            "transitions": len(its.transitions),
            "result": "terminating" if proved else "unknown",
        }
        its_detail.append(detail)
        its_lines.append(f"# root {root} :: component {label}")
        its_lines.append(its_text(its).rstrip("\n"))
        if proved:
            certs[f"{root}/{label}"] = certificate_json(res.certificate)
        entry = functions.setdefault(
            fn, {"nodes": 0, "components": 0, "err": False, "termination": PROVED}
        )
        entry["components"] += 1
        if not proved:
            entry["termination"] = UNKNOWN
    timings["termination"] = time.perf_counter() - t

    all_proved = all(d["result"] == "terminating" for d in its_detail)
    if not safe:
        for entry in functions.values():
            entry["termination"] = UNKNOWN

    dot = to_dot(g) if "dot" in cfg.emit else None
    return {
        "root": root,
        "status": report.status,
        "obligations": sorted(report.obligations),
        "capped": bool(getattr(g, "capped", False)),
        "err": g.err_id is not None,
        "err_reasons": sorted(g.err_reasons),
        "nodes": len(g.nodes),
        "edges": len(g.edges()),
        "memory_safety": PROVED if safe else UNKNOWN,
        "termination": PROVED if safe and all_proved else UNKNOWN,
        "functions": functions,
        "its": its_detail,
        "its_text": "\n".join(its_lines) + ("\n" if its_lines else ""),
        "certificates": certs,
        "dot": dot,
        "timings": timings,
    }


def _analyze_root_task(payload) -> dict:
    text, root, cfg = payload
    return _analyze_root(ir.parse(text), root, cfg)


# ---------------------------------------------------------------------------
# whole-program analysis


def analyze(path, cfg: Optional[AnalysisConfig] = None) -> Verdict:
    """Analyze one IR file and optionally write the selected artifacts.

    Roots are `main` when present, otherwise every function.  Exit-code
    mapping belongs to the caller; see Verdict.exit_code.
    """
    cfg = cfg or AnalysisConfig()
    path = Path(path)
    timings: dict = {}

    t = time.perf_counter()
    text = path.read_text()
    program = ir.parse(text)
    timings["parse"] = time.perf_counter() - t

    roots = ["main"] if "main" in program.functions else list(program.functions)
    if cfg.jobs > 1 and len(roots) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(roots))) as pool:
            results = list(pool.map(_analyze_root_task, [(text, r, cfg) for r in roots]))
    else:
        results = [_analyze_root(program, r, cfg) for r in roots]

    verdict = _assemble(results, timings)
    if cfg.emit:
        verdict.artifacts = _write_artifacts(path, cfg, results, verdict)
    return verdict


def _assemble(results: list, timings: dict) -> Verdict:
    functions: dict = {}
    roots: dict = {}
    for r in results:
        roots[r["root"]] = {
            "status": r["status"],
            "obligations": r["obligations"],
            "capped": r["capped"],
            "err": r["err"],
            "err_reasons": r["err_reasons"],
            "nodes": r["nodes"],
            "edges": r["edges"],
            "components": r["its"],
        }
        for fn, d in r["functions"].items():
            prev = functions.get(fn)
            if prev is None:
                functions[fn] = dict(d)
            else:
                prev["nodes"] += d["nodes"]
                prev["components"] += d["components"]
                prev["err"] = prev["err"] or d["err"]
                if d["termination"] == UNKNOWN:
                    prev["termination"] = UNKNOWN
        for phase, secs in r["timings"].items():
            timings[phase] = timings.get(phase, 0.0) + secs

    safe = all(r["memory_safety"] == PROVED for r in results)
    term = safe and all(r["termination"] == PROVED for r in results)
    return Verdict(
        memory_safety=PROVED if safe else UNKNOWN,
        termination=PROVED if term else UNKNOWN,
        functions=functions,
        timings=timings,
        roots=roots,
    )


def report_json(path: Path, cfg: AnalysisConfig, verdict: Verdict) -> dict:
    """JSON-ready report; deterministic for a fixed input, cfg, and seed."""
    return {
        "file": path.name,
        "config": {
            "solver": cfg.solver,
            "solver_timeout_ms": cfg.solver_timeout_ms,
            "aggressive_merge": cfg.aggressive_merge,
            "unique_entry": cfg.unique_entry,
            "prune": cfg.prune,
            "node_cap": cfg.node_cap,
            "seed": cfg.seed,
        },
        "memory_safety": verdict.memory_safety,
        "termination": verdict.termination,
        "functions": verdict.functions,
        "roots": verdict.roots,
    }


def _write_artifacts(path: Path, cfg: AnalysisConfig, results: list, verdict: Verdict) -> list:
    outdir = Path(cfg.out) if cfg.out else path.parent
    outdir.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    written: list = []

    def emit(name: str, content: str):
        p = outdir / name
        p.write_text(content)
        written.append(str(p))

    if "json" in cfg.emit:
        data = report_json(path, cfg, verdict)
        emit(f"{stem}.report.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
    if "dot" in cfg.emit:
        for r in results:
            if r["dot"] is not None:
                emit(f"{stem}.{r['root']}.dot", r["dot"])
    if "its" in cfg.emit:
        body = "".join(r["its_text"] for r in results)
        emit(f"{stem}.its.txt", body)
    if "cert" in cfg.emit:
        certs: dict = {}
        for r in results:
            certs.update(r["certificates"])
        emit(f"{stem}.cert.json", json.dumps(certs, indent=2, sort_keys=True) + "\n")
    return written


# ---------------------------------------------------------------------------
# simulation harness


def _sim_seeds(text: str, fname: str, fargs: list, seeds: list, max_steps: int, cfg: AnalysisConfig) -> list:
    """Run the lockstep harness for a batch of seeds; plain-data results."""
    program = ir.parse(text)
    oracle = _oracle(cfg)
    g = _build_seg(program, fname, cfg, oracle)
    rid = g.entry_index[fname][0]
    s0 = g.nodes[rid]
    lv = s0.top.lv_map()
    out = []
    for seed in seeds:
        c0 = initial_concrete(program, fname, fargs)
        sigma0 = {lv[p]: v for (p, _), v in zip(program.function(fname).params, fargs)}
        rep = simulate(g, c0, rid, sigma0, max_steps=max_steps, seed=seed, oracle=oracle)
        out.append((seed, rep.ok, rep.outcome, rep.reason, rep.steps, rep.value))
    return out


def _sim_task(payload) -> list:
    return _sim_seeds(*payload)


def run_harness(
    text: str,
    fname: str,
    fargs: list,
    seeds: list,
    max_steps: int,
    cfg: AnalysisConfig,
) -> list:
    """Simulate across seeds, parallelizing when cfg.jobs > 1.

    Each run is pure given its seed, so chunking cannot change results;
    the output is sorted by seed either way.
    """
    if cfg.jobs > 1 and len(seeds) > 1:
        jobs = min(cfg.jobs, len(seeds))
        chunks = [seeds[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_sim_task, [(text, fname, fargs, ch, max_steps, cfg) for ch in chunks])
            rows = [row for part in parts for row in part]
    else:
        rows = _sim_seeds(text, fname, fargs, seeds, max_steps, cfg)
    return sorted(rows)


# ---------------------------------------------------------------------------
# command-line front end


def _shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", metavar="PATH", help="external SMT-LIB v2 solver executable")
    p.add_argument("--solver-timeout", metavar="MS", type=int, default=2000,
                   help="per-query solver timeout in milliseconds (default 2000)")
    p.add_argument("--aggressive-merge", metavar="N", type=int,
                   help="merge at equal positions once a function has more than N conditional branches")
    p.add_argument("--unique-entry", metavar="N", type=int,
                   help="widen to one entry state per function for programs over N instructions")
    p.add_argument("--prune", choices=("off", "callabs", "all"), default="off",
                   help="drop knowledge-base atoms unreachable from live variables (default off)")
    p.add_argument("--node-cap", metavar="N", type=int, default=10_000,
                   help="abort graph construction past N nodes (default 10000)")
    p.add_argument("--jobs", metavar="N", type=int, default=1,
                   help="worker processes for independent roots or seeds (default 1)")
    p.add_argument("--seed", metavar="N", type=int, default=0,
                   help="base random seed (default 0)")


def _config_from(args: argparse.Namespace) -> AnalysisConfig:
    return AnalysisConfig(
        solver=args.solver,
        solver_timeout_ms=args.solver_timeout,
        aggressive_merge=args.aggressive_merge,
        unique_entry=args.unique_entry,
        prune=args.prune,
        node_cap=args.node_cap,
        emit=tuple(getattr(args, "emit", None) or ()),
        jobs=args.jobs,
        seed=args.seed,
        out=getattr(args, "out", None),
    )


def _cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    verdict = analyze(args.path, cfg)
    name = Path(args.path).name
    print(f"{name}: memory_safety={verdict.memory_safety} termination={verdict.termination}")
    for root, d in verdict.roots.items():
        line = f"  root {root}: {d['nodes']} nodes, {d['edges']} edges, {d['status']}"
        if d["capped"]:
            line += " (node cap hit)"
        print(line)
        for reason in d["err_reasons"]:
            print(f"    err: {reason}")
    for fn, d in verdict.functions.items():
        print(f"  {fn}: nodes={d['nodes']} cyclic_components={d['components']} "
              f"termination={d['termination']}")
    if verdict.timings:
        parts = " ".join(f"{k}={v:.2f}s" for k, v in verdict.timings.items())
        print(f"  timings: {parts}")
    for p in verdict.artifacts:
        print(f"  wrote {p}")
    return verdict.exit_code


def _load_sim_target(path: Path):
    """A target is IR text directly, or a JSON triple naming a program file,
    an initial concrete state, and an expected verdict."""
    if path.suffix != ".json":
        return path.read_text(), "main", [], None
    fixture = json.loads(path.read_text())
    prog = path.parent / fixture["program"]
    state = fixture.get("state", {})
    return (
        prog.read_text(),
        state.get("function", "main"),
        [int(a) for a in state.get("args", [])],
        fixture.get("verdict"),
    )


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    path = Path(args.path)
    text, fname, fargs, expect = _load_sim_target(path)
    if args.function is not None:
        fname = args.function
    if args.args:
        fargs = [int(a) for a in args.args.split(",")]

    if args.seeds <= 0:
        raise ValueError("--seeds must be positive")
    seeds = [cfg.seed + i for i in range(args.seeds)]
    rows = run_harness(text, fname, fargs, seeds, args.max_steps, cfg)

    mismatches = [r for r in rows if not r[1]]
    outcomes: dict = {}
    for _, _, outcome, _, _, _ in rows:
        outcomes[outcome] = outcomes.get(outcome, 0) + 1
    summary = " ".join(f"{k}={v}" for k, v in sorted(outcomes.items()))
    print(f"{path.name}: {fname}({', '.join(map(str, fargs))}) "
          f"seeds {seeds[0]}..{seeds[-1]} mismatches={len(mismatches)} ({summary})")
    for seed, _, outcome, reason, steps, _ in mismatches:
        print(f"  seed {seed}: {outcome} after {steps} steps: {reason}")

    ok = not mismatches
    if expect:
        verdict = analyze_text(text, cfg)
        for key in ("memory_safety", "termination"):
            if key in expect:
                got = getattr(verdict, key)
                mark = "ok" if got == expect[key] else "MISMATCH"
                if got != expect[key]:
                    ok = False
                print(f"  verdict {key}={got} expected {expect[key]} {mark}")
    return 0 if ok else 1


def analyze_text(text: str, cfg: Optional[AnalysisConfig] = None) -> Verdict:
    """analyze() for callers that already hold IR text (no artifact output)."""
    cfg = cfg or AnalysisConfig()
    program = ir.parse(text)
    roots = ["main"] if "main" in program.functions else list(program.functions)
    results = [_analyze_root(program, r, cfg) for r in roots]
    return _assemble(results, {})


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="irterm",
        description="Termination and memory-safety analysis for a small LLVM-like IR.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="prove memory safety and termination of an IR file")
    pa.add_argument("path", help="IR source file")
    pa.add_argument("--emit", action="append", choices=("dot", "json", "its", "cert"),
                    metavar="{dot,json,its,cert}",
                    help="write an artifact next to the input (repeatable)")
    pa.add_argument("--out", metavar="DIR", help="directory for artifacts instead of the input's")
    _shared_flags(pa)
    pa.set_defaults(func=_cmd_analyze)

    ps = sub.add_parser("simulate",
                        help="run seeded concrete executions in lockstep with the graph")
    ps.add_argument("path", help="IR source file, or a JSON fixture naming program/state/verdict")
    ps.add_argument("--seeds", metavar="N", type=int, default=10,
                    help="number of seeded runs (default 10)")
    ps.add_argument("--max-steps", metavar="N", type=int, default=200,
                    help="concrete step budget per run (default 200)")
    ps.add_argument("--function", metavar="NAME", default=None,
                    help="entry function (default main, or the fixture's)")
    ps.add_argument("--args", metavar="INTS", default="",
                    help="comma-separated integer arguments for the entry function")
    _shared_flags(ps)
    ps.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ir.ParseError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"irterm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
