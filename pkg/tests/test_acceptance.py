"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` to see the
report lines next to the pytest verdicts.
"""

import math
import statistics
import time

import numpy as np
import pytest

from topofix.algo1 import run_algo1
from topofix.algo2 import run_algo2
from topofix.blueprint import generate_blueprint
from topofix.cli import main
from topofix.fixation import apply_fixation, verify_repaired
from topofix.graph import DeviceGraph, read_graph
from topofix.injector import MalfunctionSpec, inject
from topofix.oracle import fattree_minfix_search, mces_identity_check

from .conftest import blueprint

# Devices / connections per k, as published for the FatTree scales.
TABLE_SIZES = {20: (2500, 6000), 30: (7875, 20250), 40: (18000, 48000), 50: (34375, 93750), 60: (58500, 162000)}


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number} ({title}): {'PASS' if ok else 'FAIL'}; {detail}")
    assert ok, detail


def test_criterion_1_sizes(tmp_path, capsys):
    problems, slowest = [], 0.0
    for k, (n, m) in TABLE_SIZES.items():
        t0 = time.perf_counter()
        code = main(["generate", "--k", str(k), "--out", str(tmp_path / str(k))])
        dt = time.perf_counter() - t0
        slowest = max(slowest, dt)
        g = read_graph(tmp_path / str(k) / "graph.json")
        if code != 0 or (g.n, g.num_edges) != (n, m) or dt >= 5.0:
            problems.append(f"k={k}: {g.n}/{g.num_edges} in {dt:.2f}s")
    ok = not problems
    detail = "all five sizes exact" if ok else ", ".join(problems)
    report(capsys, 1, "size reproduction", ok, f"{detail}; slowest generate {slowest:.2f}s")


def test_criterion_2_in_bound_exactness(capsys):
    t0 = time.perf_counter()
    trials = failures = 0
    notes = []
    for k in (8, 12, 20, 40):
        g, _ = blueprint(k)
        for x in sorted({0, k // 4 - 1, k // 2 - 1}):
            for seed in range(5):
                trials += 1
                out, _ = inject(g, MalfunctionSpec.mixed(x, seed))
                plan = run_algo1(out, k).plan
                repaired = apply_fixation(out, plan)
                good = plan.steps <= x and verify_repaired(repaired, k) and repaired == g
                if 4 * x < k:
                    res2 = run_algo2(out, k)
                    good = good and res2.ok and res2.plan.steps == plan.steps
                if not good:
                    failures += 1
                    notes.append(f"k={k} x={x} seed={seed}")
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 600
    detail = f"{trials - failures}/{trials} trials accurate in {elapsed:.1f}s"
    report(capsys, 2, "in-bound exactness", ok, detail + (f"; failing: {notes}" if notes else ""))


def test_criterion_3_oracle_minimality(capsys):
    g, _ = blueprint(4)
    mismatches, cases = [], 0
    for x in (0, 1):
        for seed in range(20):
            out, _ = inject(g, MalfunctionSpec.mixed(x, seed))
            cases += 1
            mine, best = run_algo1(out, 4).plan.steps, fattree_minfix_search(out, 4)
            if mine != best:
                mismatches.append((x, seed, mine, best))
    report(capsys, 3, "oracle minimality", not mismatches,
           f"{cases - len(mismatches)}/{cases} k=4 cases equal the exhaustive minimum")


def _direct_counts(a1, a2, perm):
    d = c = 0
    n = len(perm)
    for u in range(n):
        for v in range(n):
            x, y = a1[u][v], a2[perm[u]][perm[v]]
            d += x != y
            c += x and y
    return d, c


def test_criterion_4_mgdp_mces_identity(capsys):
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(200):
        n = int(rng.integers(1, 9))
        graphs = []
        for _ in range(2):
            upper = np.triu(rng.random((n, n)) < rng.random(), 1)
            graphs.append(DeviceGraph.from_adjacency(upper | upper.T))
        perm = rng.permutation(n)
        a1, a2 = (g.adjacency_matrix().tolist() for g in graphs)
        d, c = _direct_counts(a1, a2, perm)
        e1, e2 = (int(np.sum(g.adjacency_matrix())) for g in graphs)
        if d + 2 * c != e1 + e2 or not mces_identity_check(graphs[0], graphs[1], perm):
            failures += 1
    report(capsys, 4, "MGDP/MCESP identity", failures == 0, f"{200 - failures}/200 random pairs satisfy d + 2c = |E1| + |E2|")


def _collapse_pod(g, k, pod):
    h = k // 2
    cuts = [
        (g.index_of(f"edge-{(pod - 1) * h + i}"), g.index_of(f"agg-{(pod - 1) * h + i}"))
        for i in range(1, h + 1)
    ]
    return g.with_edits(remove=cuts)


def test_criterion_5_bound_exceeded_soundness(capsys):
    spurious, unsound, checked = [], [], 0
    for k in (12, 16):
        g, _ = blueprint(k)
        below = math.ceil(k / 4) - 1
        for seed in range(50):
            out, _ = inject(g, MalfunctionSpec.mixed(below, seed))
            checked += 1
            if not run_algo2(out, k).ok:
                spurious.append((k, seed))
        beyond = [inject(g, MalfunctionSpec.mixed(k // 2, seed))[0] for seed in range(50)]
        beyond += [_collapse_pod(g, k, pod) for pod in range(1, k + 1)]
        for i, out in enumerate(beyond):
            checked += 1
            res = run_algo2(out, k)
            if res.ok and not verify_repaired(apply_fixation(out, res.plan), k):
                unsound.append((k, i))
    ok = not spurious and not unsound
    report(capsys, 5, "bound-exceeded soundness", ok,
           f"{checked} runs; {len(spurious)} spurious bound reports below k/4, {len(unsound)} unrepaired plans at x = k/2")


def _median_time(fn, g, k, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(g, k)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _slope(ks, times):
    return float(np.polyfit(np.log(ks), np.log(times), 1)[0])


def test_criterion_6_complexity_trend(capsys):
    ks = [12, 16, 20, 24, 28]
    t1, t2, spread = [], [], {}
    for k in ks:
        g, _ = generate_blueprint(k)
        run_algo1(g, k), run_algo2(g, k)  # warm-up
        t1.append(_median_time(run_algo1, g, k, 9))
        t2.append(_median_time(run_algo2, g, k, 9))
        dirty, _ = inject(g, MalfunctionSpec.mixed(k // 4 - 1, 0))
        t_dirty = _median_time(run_algo2, dirty, k, 9)
        spread[k] = abs(t_dirty - t2[-1]) / min(t_dirty, t2[-1])
    s1, s2 = _slope(ks, t1), _slope(ks, t2)
    worst = max(spread.values())
    ok = s2 <= 3.8 and s1 >= s2 + 1.5 and worst < 0.25

    # context only: the same fit over a wider range, not part of the verdict
    wide = [28, 40, 60]
    w1, w2 = [], []
    for k in wide:
        g, _ = generate_blueprint(k)
        w1.append(_median_time(run_algo1, g, k, 3))
        w2.append(_median_time(run_algo2, g, k, 3))
    detail = (
        f"k=12..28 slopes algo1 {s1:.2f}, algo2 {s2:.2f} (need algo2 <= 3.8 and algo1 >= algo2 + 1.5); "
        f"worst algo2 spread across x {worst:.0%} (need < 25%); "
        f"for reference k=28..60 slopes algo1 {_slope(wide, w1):.2f}, algo2 {_slope(wide, w2):.2f}"
    )
    report(capsys, 6, "complexity trend", ok, detail)


def test_criterion_7_beyond_bound_feasibility(capsys):
    infeasible, long_plans, trials = 0, 0, 0
    for k in (12, 20):
        g, _ = blueprint(k)
        x = k // 2
        for seed in range(10):
            out, _ = inject(g, MalfunctionSpec.mixed(x, seed))
            plan = run_algo1(out, k).plan
            trials += 1
            infeasible += not verify_repaired(apply_fixation(out, plan), k)
            long_plans += plan.steps > 2 * x
    near = (trials - long_plans) / trials
    ok = infeasible == 0 and near >= 0.9
    report(capsys, 7, "beyond-bound feasibility", ok,
           f"{trials - infeasible}/{trials} plans repair the graph; {near:.0%} within 2x steps (need >= 90%)")


def test_criterion_8_baseline_comparison(capsys):
    with capsys.disabled():
        print("\ncriterion 8 (baseline accuracy comparison): NOT RUN; the comparison baseline is out of scope, "
              "criterion 2 covers the accuracy claim")
    pytest.skip("baseline system not implemented; not reproducible by design")
