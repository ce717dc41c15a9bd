import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topofix.algo1 import run_algo1
from topofix.algo2 import (
    BoundExceededError,
    GroupKind,
    GroupStatus,
    derive_aggregates,
    group_rows,
    label_groups,
    plan_step_limit,
    resolve_malfunction_nodes,
    run_algo2,
    strip_low_degree,
)
from topofix.blueprint import RoleKind, expected_adjacency
from topofix.fixation import ServerFault, apply_fixation, verify_repaired
from topofix.graph import BitRows, DeviceGraph

from .conftest import blueprint
from .helpers import injected, nodes, same_up_to_automorphism


def _switch_graph(g, k):
    sw, servers, ids = strip_low_degree(g, k)
    return sw, ids


def _labeled(g, k):
    sw, ids = _switch_graph(g, k)
    return sw, ids, label_groups(group_rows(sw, k), sw, k)


def test_step_limit():
    assert [plan_step_limit(k) for k in (4, 8, 12, 60, 10)] == [0, 1, 2, 14, 2]


def test_strip_clean_k8(fat8):
    g, a = fat8
    _, servers, _ = strip_low_degree(g, 8)
    assert servers.size == 128 and set(servers.tolist()) == nodes(a, RoleKind.SERVER)


def test_strip_after_one_switch_link_removal():
    g, a, out, _ = injected(8, 1, 4, removals=1)
    _, servers, _ = strip_low_degree(out, 8)
    assert set(servers.tolist()) == nodes(a, RoleKind.SERVER)


def test_strip_detects_server_with_extra_links(fat8):
    # a server gaining two links climbs above k/4 and is no longer stripped (127 removed)
    g, _ = fat8
    s = g.index_of("server-1")
    out = g.with_edits(add=[(s, g.index_of("core-1")), (s, g.index_of("core-2"))])
    with pytest.raises(BoundExceededError, match="127"):
        strip_low_degree(out, 8)
    assert run_algo2(out).bound_exceeded.stage == "strip"


def test_strip_detects_gutted_edge_switch(fat8):
    # six cut links leave an edge switch at degree 2 <= k/4 (129 removed)
    g, _ = fat8
    e = g.index_of("edge-1")
    out = g.with_edits(remove=[(e, int(v)) for v in g.neighbors(e)[:6]])
    with pytest.raises(BoundExceededError, match="129"):
        strip_low_degree(out, 8)


def test_groups_clean_k4(fat4):
    g, a = fat4
    sw, ids, groups = _labeled(g, 4)
    sizes = sorted(grp.size for grp in groups)
    assert sizes == [1] * 8 + [2] * 6
    kinds = [grp.kind for grp in groups if grp.size == 2]
    assert kinds.count(GroupKind.CORE) == 2 and kinds.count(GroupKind.EDGE) == 4
    assert all(grp.status is GroupStatus.CORRECT for grp in groups if grp.size == 2)
    singles = {int(ids[grp.members[0]]) for grp in groups if grp.size == 1}
    assert singles == nodes(a, RoleKind.AGGREGATE)


def test_removed_core_link_breaks_group(fat4):
    g, _ = fat4
    c = g.index_of("core-1")
    out = g.with_edits(remove=[(c, int(g.neighbors(c)[0]))])
    sw, ids, groups = _labeled(out, 4)
    mine = next(grp for grp in groups if ids[grp.members[0]] == c)
    partner = next(grp for grp in groups if ids[grp.members[0]] == g.index_of("core-2"))
    assert mine.size == 1 and mine.kind is GroupKind.MALFUNCTION
    assert partner.size == 1 and partner.status is GroupStatus.INCOMPLETE and partner.kind is GroupKind.CORE


def test_empty_graph_has_no_groups():
    assert group_rows(DeviceGraph(0), 4) == []


def test_fingerprint_collisions_are_checked(monkeypatch):
    import topofix.algo2 as mod

    g, _ = blueprint(4)
    sw, _ = _switch_graph(g, 4)
    monkeypatch.setattr(mod, "row_fingerprint", lambda graph, v: 0)
    rows = {grp.row for grp in mod.group_rows(sw, 4)}
    assert len(rows) == 14


def test_aggregates_labeled_clean(fat4):
    g, a = fat4
    sw, ids, groups = _labeled(g, 4)
    roles = derive_aggregates(groups, sw, 4)
    assert roles.agg_table.shape == (4, 2)
    assert set(ids[roles.agg_table].ravel().tolist()) == nodes(a, RoleKind.AGGREGATE)


@pytest.mark.parametrize("seed", range(5))
def test_aggregates_labeled_k8_x1(seed):
    g, a, out, _ = injected(8, 1, seed)
    sw, ids, groups = _labeled(out, 8)
    roles = derive_aggregates(groups, sw, 8)
    assert set(ids[roles.agg_table].ravel().tolist()) == nodes(a, RoleKind.AGGREGATE)


def _collapse_pod(g, k, pod=1):
    h = k // 2
    cuts = []
    for i in range(h):
        e = g.index_of(f"edge-{(pod - 1) * h + i + 1}")
        cuts.append((e, g.index_of(f"agg-{(pod - 1) * h + i + 1}")))
    return g.with_edits(remove=cuts)


@pytest.mark.parametrize("k", [8, 12, 16])
def test_collapsed_edge_group_is_bound_exceeded(k):
    g, _ = blueprint(k)
    out = _collapse_pod(g, k)
    sw, _, groups = _labeled(out, k)
    with pytest.raises(BoundExceededError):
        derive_aggregates(groups, sw, k)
    res = run_algo2(out)
    assert not res.ok and res.plan is None
    assert verify_repaired(apply_fixation(out, run_algo1(out).plan))


def test_core_missing_link_rejoins_its_group():
    g, _ = blueprint(8)
    c = g.index_of("core-1")
    out = g.with_edits(remove=[(c, int(g.neighbors(c)[0]))])
    sw, ids, groups = _labeled(out, 8)
    partial = derive_aggregates(groups, sw, 8)
    v = int(np.flatnonzero(ids == c)[0])
    bits = BitRows(sw)
    mates = [int(np.flatnonzero(ids == g.index_of(f"core-{i}"))[0]) for i in (2, 3, 4)]
    assert all(bits.similarity(v, m) == 7 for m in mates)
    others = [grp for grp in partial.core_groups if not set(grp.tolist()) & set(mates)]
    assert all(bits.similarity(v, int(grp[0])) <= 2 for grp in others)
    roles = resolve_malfunction_nodes(partial, sw, 8, bits)
    assert any(set(grp.tolist()) == {v, *mates} for grp in roles.core_groups)


def test_resolve_without_leftovers_is_identity(fat8):
    g, _ = fat8
    sw, _, groups = _labeled(g, 8)
    partial = derive_aggregates(groups, sw, 8)
    roles = resolve_malfunction_nodes(partial, sw, 8)
    for before, after in zip(partial.edge_groups + partial.core_groups, roles.edge_groups + roles.core_groups):
        assert np.array_equal(np.sort(before), after)


@pytest.mark.parametrize("seed", range(8))
def test_k8_x1_matches_truth(seed):
    g, _, out, _ = injected(8, 1, seed)
    res = run_algo2(out)
    assert res.ok and res.plan.steps == 1
    assert same_up_to_automorphism(res.assignment, g)


def test_clean_input_agrees_with_algo1(fat8):
    g, _ = fat8
    res = run_algo2(g)
    assert res.ok and res.plan.steps == 0
    assert expected_adjacency(res.assignment) == expected_adjacency(run_algo1(g).assignment) == g


@pytest.mark.parametrize("x", [0, 14])
def test_k60_within_bound(x):
    g, _, out, _ = injected(60, x, 2)
    res = run_algo2(out, 60)
    assert res.ok and res.plan.steps == x
    assert apply_fixation(out, res.plan) == g


def test_k60_x29_is_bound_exceeded():
    _, _, out, _ = injected(60, 29, 2)
    res = run_algo2(out, 60)
    assert not res.ok
    assert run_algo1(out, 60).plan.steps == 29


@given(st.sampled_from([8, 12, 16]), st.integers(0, 10**6), st.data())
def test_within_bound_agrees_with_algo1(k, seed, data):
    x = data.draw(st.integers(0, -(-k // 4) - 1))
    _, _, out, _ = injected(k, x, seed)
    res = run_algo2(out)
    assert res.ok
    assert res.plan.steps == run_algo1(out).plan.steps
    repaired = apply_fixation(out, res.plan)
    assert repaired == expected_adjacency(res.assignment)
    assert run_algo2(repaired).plan.steps == 0


def test_server_faults_reported():
    g, _ = blueprint(12)
    s = g.index_of("server-1")
    out = g.with_edits(remove=[(s, g.index_of("edge-1"))], add=[(s, g.index_of("edge-2"))])
    res = run_algo2(out)
    assert res.ok and res.plan.steps == 2
    faults = {(f.switch, f.expected, f.actual) for f in res.plan.server_faults}
    assert faults == {(g.index_of("edge-1"), 6, 5), (g.index_of("edge-2"), 6, 7)}
    assert all(isinstance(f, ServerFault) for f in res.plan.server_faults)
