"""Command-line interface: ``topofix {generate,inject,detect,bench,oracle}``.

Exit codes: 0 success, 2 when the only result is a bound-exceeded report
from the fast algorithm, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .algo1 import check_size, run_algo1
from .algo2 import plan_step_limit, run_algo2
from .blueprint import FatTreeParams, generate_blueprint
from .errors import TopofixError, UsageError
from .fixation import apply_fixation, autoconfigure, write_address_table
from .graph import DeviceGraph, read_graph, write_graph
from .injector import MalfunctionSpec, Scope, inject
from .oracle import fattree_minfix_solution, mgdp_bruteforce

EXIT_OK, EXIT_ERROR, EXIT_BOUND = 0, 1, 2
BENCH_COLUMNS = ["k", "algo", "x", "seed", "trial", "seconds", "steps", "outcome", "accurate"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _threads() -> int:
    raw = os.environ.get("A3_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"A3_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- generate --------------------------------------------------------------

def cmd_generate(args) -> int:
    g, assignment = generate_blueprint(args.k)
    out = _out_dir(args.out)
    write_graph(g, out / "graph.json")
    assignment.write_role_table(out / "roles.json", g.device_ids)
    write_address_table(autoconfigure(assignment, g.device_ids), out / "addresses.json")
    print(f"FatTree({args.k}): {g.n} devices, {g.num_edges} connections -> {out}")
    return EXIT_OK


# -- inject ----------------------------------------------------------------

def cmd_inject(args) -> int:
    g = read_graph(args.graph)
    spec = MalfunctionSpec(args.seed, args.removals, args.additions, args.swaps, Scope(args.scope))
    physical, diff = inject(g, spec)
    out = _out_dir(args.out)
    write_graph(physical, out / "graph.json")
    (out / "diff.json").write_text(diff.to_json() + "\n")
    print(f"injected x={diff.x} malfunctions (seed {args.seed}) -> {out}")
    return EXIT_OK


# -- detect ----------------------------------------------------------------

@dataclass
class Detection:
    algo: str
    assignment: object
    plan: object
    seconds: float
    notes: list


def _timed(fn, *a):
    t0 = time.perf_counter()
    result = fn(*a)
    return result, time.perf_counter() - t0


def detect(g: DeviceGraph, algo: str, k=None) -> Detection:
    """Run the requested detector; ``plan`` is None only for a bound-exceeded algo 2 run."""
    p = check_size(g, k)
    notes = []
    if algo == "1":
        res, dt = _timed(run_algo1, g, p)
        if res.beyond_bound:
            notes.append(f"plan of {res.plan.steps} steps reaches the exactness bound k/2; feasible, may not be minimal")
        return Detection("1", res.assignment, res.plan, dt, notes)
    if algo in ("2", "auto"):
        out2, dt2 = _timed(run_algo2, g, p)
        if out2.ok:
            return Detection("2", out2.assignment, out2.plan, dt2, notes)
        notes.append(f"algo2 bound exceeded ({out2.bound_exceeded})")
        if algo == "2":
            return Detection("2", None, None, dt2, notes)
        d1 = detect(g, "1", p)
        d1.notes[:0] = notes + ["fell back to algo1"]
        d1.seconds += dt2
        return d1
    if algo == "race":
        with ThreadPoolExecutor(max_workers=2) as pool:
            f1 = pool.submit(_timed, run_algo1, g, p)
            f2 = pool.submit(_timed, run_algo2, g, p)
            (res1, dt1), (out2, dt2) = f1.result(), f2.result()
        if out2.ok:
            return Detection("2", out2.assignment, out2.plan, dt2, notes)
        notes.append(f"algo2 bound exceeded ({out2.bound_exceeded}); using algo1")
        return Detection("1", res1.assignment, res1.plan, dt1, notes)
    raise UsageError(f"unknown algorithm {algo!r}")


def cmd_detect(args) -> int:
    g = read_graph(args.graph)
    det = detect(g, args.algo, args.k)
    for note in det.notes:
        print(f"note: {note}")
    if det.plan is None:
        print(f"algo {det.algo}: no plan ({det.seconds:.3f}s)")
        return EXIT_BOUND
    faults = det.plan.server_faults
    print(f"algo {det.algo}: {det.plan.steps} malfunctions, {len(faults)} server faults ({det.seconds:.3f}s)")
    if args.out:
        out = _out_dir(args.out)
        (out / "plan.jsonl").write_text(det.plan.to_jsonl(g.device_ids))
        det.assignment.write_role_table(out / "roles.json", g.device_ids)
        write_address_table(autoconfigure(det.assignment, g.device_ids), out / "addresses.json")
        report = {"algo": det.algo, "steps": det.plan.steps, "server_faults": len(faults),
                  "seconds": det.seconds, "notes": det.notes}
        (out / "report.json").write_text(json.dumps(report, indent=1) + "\n")
    else:
        sys.stdout.write(det.plan.to_jsonl(g.device_ids))
    return EXIT_OK


# -- bench -----------------------------------------------------------------

@dataclass(frozen=True)
class BenchRecord:
    k: int
    algo: str
    x: int
    seed: int
    trial: int
    seconds: float
    steps: int | None
    outcome: str
    accurate: bool | None

    def row(self) -> list:
        acc = "" if self.accurate is None else str(self.accurate).lower()
        steps = "" if self.steps is None else self.steps
        return [self.k, self.algo, self.x, self.seed, self.trial, f"{self.seconds:.6f}", steps, self.outcome, acc]


def default_x_grid(k: int, algo: str) -> list[int]:
    grid = [0, k // 4 - 1] if algo == "2" else [0, k // 4 - 1, k // 2 - 1, k // 2]
    return sorted(set(x for x in grid if x >= 0))


def bench_cells(ks, algos, xs=None) -> list[tuple[int, str, int]]:
    cells = []
    for k in ks:
        FatTreeParams(k)
        for algo in algos:
            for x in xs if xs is not None else default_x_grid(k, algo):
                cells.append((k, algo, x))
    return sorted(set(cells))


def run_trial(k: int, algo: str, x: int, seed: int, trial: int, repeat: int = 1) -> BenchRecord:
    blueprint, _ = generate_blueprint(k)
    physical, _ = inject(blueprint, MalfunctionSpec.mixed(x, seed))
    runner = run_algo1 if algo == "1" else run_algo2
    times = []
    for _ in range(max(1, repeat)):
        result, dt = _timed(runner, physical, k)
        times.append(dt)
    seconds = statistics.median(times)
    if algo == "2" and not result.ok:
        return BenchRecord(k, algo, x, seed, trial, seconds, None, "bound-exceeded", None)
    repaired = apply_fixation(physical, result.plan)
    return BenchRecord(k, algo, x, seed, trial, seconds, result.plan.steps, "ok", repaired == blueprint)


def run_bench(ks, algos=("1", "2"), xs=None, trials=5, seed=0, repeat=1, threads=None) -> list[BenchRecord]:
    jobs = [(k, a, x, seed + t, t, repeat) for k, a, x in bench_cells(ks, algos, xs) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads or _threads()) as pool:
        records = list(pool.map(lambda job: run_trial(*job), jobs))
    return sorted(records, key=lambda r: (r.k, r.algo, r.x, r.trial))


def write_bench_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in records:
            w.writerow(r.row())


def cmd_bench(args) -> int:
    records = run_bench(args.k, args.algo, args.x, args.trials, args.seed, args.repeat)
    if args.out:
        write_bench_csv(records, args.out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(BENCH_COLUMNS)
        w.writerows(r.row() for r in records)
    return EXIT_OK


# -- oracle ----------------------------------------------------------------

def cmd_oracle(args) -> int:
    g = read_graph(args.graph)
    if args.mode == "mgdp":
        if not args.other:
            raise UsageError("--mode mgdp needs --other GRAPH")
        d, pi = mgdp_bruteforce(g, read_graph(args.other))
        print(json.dumps({"difference": d, "steps": d // 2, "bijection": list(pi)}))
    else:
        res = fattree_minfix_solution(g, args.k or 4, node_budget=args.budget)
        print(json.dumps({"steps": res.steps, "nodes_expanded": res.nodes_expanded}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topofix", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a blueprint graph with role and address tables")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inject", help="inject seeded link malfunctions")
    p.add_argument("--graph", required=True)
    p.add_argument("--removals", type=int, default=0)
    p.add_argument("--additions", type=int, default=0)
    p.add_argument("--swaps", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scope", choices=[s.value for s in Scope], default=Scope.SWITCH_LINKS_ONLY.value)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("detect", help="locate malfunctions and print a fixation plan")
    p.add_argument("--graph", required=True)
    p.add_argument("--algo", choices=["1", "2", "auto", "race"], default="auto")
    p.add_argument("--k", type=int, default=None, help="override k (normally inferred from the device count)")
    p.add_argument("--out", default=None, help="directory for plan, roles, addresses and report")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="time both algorithms on seeded injections (CSV)")
    p.add_argument("--k", type=_int_list, required=True)
    p.add_argument("--x", type=_int_list, default=None, help="malfunction counts (default: per-algorithm grid)")
    p.add_argument("--algo", type=lambda s: s.split(","), default=["1", "2"])
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1, help="timed runs per trial; the median is reported")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="exhaustive minimum for tiny instances")
    p.add_argument("--mode", choices=["mgdp", "fattree"], required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--other", default=None, help="second graph for --mode mgdp")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--budget", type=int, default=2_000_000)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (TopofixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
