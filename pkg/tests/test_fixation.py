import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from topofix.algo1 import run_algo1
from topofix.blueprint import RoleKind, expected_adjacency
from topofix.errors import PlanStaleError, UsageError
from topofix.fixation import (
    Connect,
    Disconnect,
    FixationPlan,
    ServerFault,
    apply_fixation,
    autoconfigure,
    compute_fixation,
    read_plan_jsonl,
    verify_repaired,
)
from topofix.graph import DeviceGraph, hamming_distance

from .conftest import blueprint, swapped_pair_instance
from .helpers import injected


def test_nothing_to_fix(fat4):
    g, a = fat4
    assert compute_fixation(g, a).steps == 0


def test_swapped_pair_plan():
    correct, miswired, _ = swapped_pair_instance()
    assignment = run_algo1(correct).assignment
    plan = compute_fixation(miswired, assignment)
    assert plan.actions == (Disconnect(1, 6), Disconnect(4, 5), Connect(1, 5), Connect(4, 6))


@given(st.sampled_from([8, 12]), st.integers(0, 10**6), st.data())
def test_plan_size_equals_injected_edits(k, seed, data):
    x = data.draw(st.integers(0, k // 2 - 1))
    g, a, out, diff = injected(k, x, seed)
    plan = compute_fixation(out, a)
    assert plan.steps == diff.x == hamming_distance(out, expected_adjacency(a)) // 2
    assert {(p.u, p.v) for p in plan.link_actions if isinstance(p, Disconnect)} == diff.added
    assert {(p.u, p.v) for p in plan.link_actions if isinstance(p, Connect)} == diff.removed


def test_disconnects_before_connects_and_sorted():
    _, a, out, _ = injected(8, 6, 3)
    acts = compute_fixation(out, a).actions
    kinds = [isinstance(x, Connect) for x in acts]
    assert kinds == sorted(kinds)
    dis = [(x.u, x.v) for x in acts if isinstance(x, Disconnect)]
    con = [(x.u, x.v) for x in acts if isinstance(x, Connect)]
    assert dis == sorted(dis) and con == sorted(con)
    assert all(u < v for u, v in dis + con)


def test_size_mismatch(fat4):
    _, a = fat4
    with pytest.raises(UsageError):
        compute_fixation(DeviceGraph(3), a)


def test_apply_round_trip():
    g, a, out, _ = injected(8, 3, 0)
    assert apply_fixation(out, FixationPlan()) == out
    plan = compute_fixation(out, a)
    fixed = apply_fixation(out, plan)
    assert fixed == g and hamming_distance(fixed, expected_adjacency(a)) == 0
    with pytest.raises(PlanStaleError):
        apply_fixation(fixed, plan)


def test_stale_plan_errors(fat4):
    g, _ = fat4
    u, v = (int(t) for t in g.edges[0])
    with pytest.raises(PlanStaleError):
        apply_fixation(g, FixationPlan((Connect(u, v),)))
    with pytest.raises(PlanStaleError):
        apply_fixation(g, FixationPlan((Disconnect(u, v), Disconnect(v, u))))


def test_server_faults_are_advisory(fat4):
    g, _ = fat4
    plan = FixationPlan((ServerFault(g.index_of("edge-1"), 2, 1),))
    assert plan.steps == 0 and apply_fixation(g, plan) == g


def test_plan_jsonl_round_trip():
    g, a, out, _ = injected(8, 3, 1)
    plan = compute_fixation(out, a).with_extra([ServerFault(g.index_of("edge-1"), 4, 3)])
    text = plan.to_jsonl(out.device_ids)
    first = json.loads(text.splitlines()[0])
    assert set(first) == {"op", "u", "v"}
    assert read_plan_jsonl(text, out.device_ids) == plan
    with pytest.raises(UsageError):
        read_plan_jsonl('{"op": "rewire"}\n')


def test_addresses_of_canonical_k4(fat4):
    g, a = fat4
    table = autoconfigure(a, g.device_ids)
    assert len(table) == 36 and len(set(table.values())) == 36
    assert table["server-1"] == "10.1.1.2"
    c1, c2 = table["core-1"].split("."), table["core-2"].split(".")
    assert c1[:3] == c2[:3] and c1[3] != c2[3]
    assert list(table) == sorted(table)


def test_addresses_from_detected_roles_match_up_to_automorphism(fat8):
    # same multiset of addresses, and every device keeps its layer
    g, a = fat8
    found = run_algo1(g).assignment
    canon, detected = autoconfigure(a, g.device_ids), autoconfigure(found, g.device_ids)
    assert sorted(canon.values()) == sorted(detected.values())
    assert all(found.role(v).kind == a.role(v).kind for v in range(g.n))


def test_verify_repaired(fat4):
    g, _ = fat4
    assert verify_repaired(g)
    u, v = (int(t) for t in g.edges[0])
    assert not verify_repaired(g.with_edits(remove=[(u, v)]))
    assert not verify_repaired(DeviceGraph(5))
    _, _, out, _ = injected(12, 5, 8)
    assert verify_repaired(apply_fixation(out, run_algo1(out).plan))


def test_only_switch_kinds_in_faults():
    _, a = blueprint(4)
    assert RoleKind.EDGE in set(RoleKind(int(k)) for k in a.kinds)
