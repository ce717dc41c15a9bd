"""Repair plans, plan application and address autoconfiguration."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blueprint import RoleAssignment, expected_adjacency, logical_id
from .errors import PlanStaleError, UsageError
from .graph import DeviceGraph

__all__ = [
    "Connect",
    "Disconnect",
    "FixationPlan",
    "ServerFault",
    "apply_fixation",
    "autoconfigure",
    "compute_fixation",
    "read_plan_jsonl",
    "verify_repaired",
]


@dataclass(frozen=True, order=True)
class Disconnect:
    u: int
    v: int


@dataclass(frozen=True, order=True)
class Connect:
    u: int
    v: int


@dataclass(frozen=True)
class ServerFault:
    """Advisory: an edge switch whose server count differs from k/2."""

    switch: int
    expected: int
    actual: int


@dataclass(frozen=True)
class FixationPlan:
    actions: tuple = field(default_factory=tuple)

    @property
    def link_actions(self) -> list:
        return [a for a in self.actions if isinstance(a, (Disconnect, Connect))]

    @property
    def server_faults(self) -> list[ServerFault]:
        return [a for a in self.actions if isinstance(a, ServerFault)]

    @property
    def steps(self) -> int:
        return len(self.link_actions)

    def __len__(self) -> int:
        return self.steps

    def with_extra(self, extra: Sequence) -> FixationPlan:
        return FixationPlan(tuple(self.actions) + tuple(extra))

    def to_jsonl(self, device_ids: Sequence[str] | None = None) -> str:
        name = (lambda v: device_ids[v]) if device_ids is not None else str
        lines = []
        for a in self.actions:
            if isinstance(a, ServerFault):
                rec = {"op": "server_fault", "switch": name(a.switch), "expected": a.expected, "actual": a.actual}
            else:
                op = "disconnect" if isinstance(a, Disconnect) else "connect"
                rec = {"op": op, "u": name(a.u), "v": name(a.v)}
            lines.append(json.dumps(rec))
        return "".join(line + "\n" for line in lines)


def read_plan_jsonl(text: str, device_ids: Sequence[str] | None = None) -> FixationPlan:
    lookup = {d: i for i, d in enumerate(device_ids)} if device_ids is not None else None

    def node(x):
        if lookup is None:
            return int(x)
        try:
            return lookup[x]
        except KeyError:
            raise UsageError(f"plan names unknown device {x!r}") from None

    actions = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        rec = json.loads(raw)
        op = rec.get("op")
        if op == "disconnect":
            actions.append(Disconnect(node(rec["u"]), node(rec["v"])))
        elif op == "connect":
            actions.append(Connect(node(rec["u"]), node(rec["v"])))
        elif op == "server_fault":
            actions.append(ServerFault(node(rec["switch"]), int(rec["expected"]), int(rec["actual"])))
        else:
            raise UsageError(f"unknown plan op {op!r}")
    return FixationPlan(tuple(actions))


def compute_fixation(physical: DeviceGraph, assignment: RoleAssignment, k=None) -> FixationPlan:
    """Link edits turning ``physical`` into the graph ``assignment`` implies.

    Disconnects come first, then connects; each block sorted by ``(u, v)``.
    """
    if len(assignment) != physical.n:
        raise UsageError(f"assignment covers {len(assignment)} devices, graph has {physical.n}")
    expected = expected_adjacency(assignment, k)
    n = physical.n
    have, want = physical.edge_keys(), expected.edge_keys()
    extra = np.setdiff1d(have, want, assume_unique=True)
    missing = np.setdiff1d(want, have, assume_unique=True)
    actions = [Disconnect(int(c // n), int(c % n)) for c in extra]
    actions += [Connect(int(c // n), int(c % n)) for c in missing]
    return FixationPlan(tuple(actions))


def apply_fixation(g: DeviceGraph, plan: FixationPlan) -> DeviceGraph:
    """Apply the link actions of ``plan``; server-fault entries are advisory."""
    present: set[tuple[int, int]] = set()
    remove, add = [], []
    for a in plan.link_actions:
        u, v = min(a.u, a.v), max(a.u, a.v)
        if (u, v) in present:
            raise PlanStaleError(f"pair ({u},{v}) appears twice in plan")
        present.add((u, v))
        exists = g.has_edge(u, v)
        if isinstance(a, Disconnect):
            if not exists:
                raise PlanStaleError(f"disconnect ({u},{v}): no such link")
            remove.append((u, v))
        else:
            if exists:
                raise PlanStaleError(f"connect ({u},{v}): link already present")
            add.append((u, v))
    if not remove and not add:
        return g
    return g.with_edits(remove=remove, add=add)


def autoconfigure(assignment: RoleAssignment, device_ids: Sequence[str] | None = None) -> dict[str, str]:
    """Device -> logical address, derived from the device's role."""
    if device_ids is None:
        device_ids = [str(i) for i in range(len(assignment))]
    slots = assignment.slots()
    table = {}
    for v in range(len(assignment)):
        table[device_ids[v]] = logical_id(assignment.role(v), assignment.k, int(slots[v]))
    return dict(sorted(table.items()))


def write_address_table(table: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(json.dumps(dict(sorted(table.items())), indent=1) + "\n")


def verify_repaired(g: DeviceGraph, k=None) -> bool:
    """True when the detector finds nothing to fix in ``g``."""
    from .algo1 import run_algo1
    from .errors import InputError

    try:
        return run_algo1(g, k).plan.steps == 0
    except InputError:
        return False
