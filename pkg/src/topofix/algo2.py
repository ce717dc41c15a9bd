"""Row-hash role construction (the O(k^3) exact algorithm).

Exact for fewer than k/4 undirected link malfunctions. Beyond that the
structure it relies on breaks down and :class:`BoundExceeded` is reported so
the caller can fall back to :mod:`topofix.algo1`.

Pipeline: strip low-degree nodes; group switches by identical rows; label
groups core/edge/malfunction by degree; read the aggregates off the rows of
the intact edge and core groups; give each leftover switch to the
incomplete group whose representative it resembles most; diff against the
implied graph; finally count servers per edge switch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .algo1 import assemble_assignment, check_size
from .blueprint import FatTreeParams, RoleAssignment, RoleKind
from .errors import TopofixError
from .fixation import FixationPlan, ServerFault, compute_fixation
from .graph import BitRows, DeviceGraph, row_fingerprint

__all__ = [
    "Algo2Outcome",
    "BoundExceeded",
    "BoundExceededError",
    "GroupKind",
    "GroupStatus",
    "RowGroup",
    "SwitchRoles",
    "derive_aggregates",
    "group_rows",
    "label_groups",
    "plan_step_limit",
    "resolve_malfunction_nodes",
    "run_algo2",
    "strip_low_degree",
]


class GroupStatus(enum.Enum):
    CORRECT = "correct"
    INCOMPLETE = "incomplete"


class GroupKind(enum.Enum):
    CORE = "core"
    EDGE = "edge"
    MALFUNCTION = "malfunction"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class RowGroup:
    members: tuple[int, ...]
    fingerprint: int
    row: frozenset[int]
    status: GroupStatus
    kind: GroupKind = GroupKind.UNLABELED

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class BoundExceeded:
    stage: str
    reason: str

    def __str__(self) -> str:
        return f"{self.stage}: {self.reason}"


class BoundExceededError(TopofixError):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.info = BoundExceeded(stage, reason)


@dataclass(frozen=True)
class Algo2Outcome:
    assignment: RoleAssignment | None = None
    plan: FixationPlan | None = None
    bound_exceeded: BoundExceeded | None = None

    @property
    def ok(self) -> bool:
        return self.bound_exceeded is None


@dataclass(frozen=True)
class SwitchRoles:
    """Switch-graph ids by role: pods and core groups (lists of members,
    position = id - 1) plus the ``(k, k/2)`` aggregate table."""

    edge_groups: list[np.ndarray]
    core_groups: list[np.ndarray]
    agg_table: np.ndarray


def plan_step_limit(k: int) -> int:
    """Largest fix-step count compatible with fewer than k/4 malfunctions."""
    return math.ceil(k / 4) - 1


def strip_low_degree(g: DeviceGraph, k=None) -> tuple[DeviceGraph, np.ndarray, np.ndarray]:
    """Drop every node of degree <= k/4; there must be exactly k^3/4 of them."""
    p = check_size(g, k)
    servers = np.flatnonzero(4 * g.degrees() <= p.k)
    if servers.size != p.n_servers:
        raise BoundExceededError(
            "strip", f"{servers.size} nodes of degree <= k/4, expected {p.n_servers} servers"
        )
    keep = np.setdiff1d(np.arange(g.n), servers, assume_unique=True)
    sw, switch_ids = g.induced_subgraph(keep)
    return sw, servers, switch_ids


def group_rows(sw: DeviceGraph, k) -> list[RowGroup]:
    """Group switches with identical rows (fingerprint first, then exact check)."""
    h = int(k) // 2
    buckets: dict[int, list[tuple[frozenset[int], list[int]]]] = {}
    for v in range(sw.n):
        fp = row_fingerprint(sw, v)
        row = frozenset(sw.neighbors(v).tolist())
        chains = buckets.setdefault(fp, [])
        for existing, members in chains:
            if existing == row:
                members.append(v)
                break
        else:
            chains.append((row, [v]))
    groups = [
        RowGroup(
            tuple(members),
            fp,
            row,
            GroupStatus.CORRECT if len(members) == h else GroupStatus.INCOMPLETE,
        )
        for fp, chains in buckets.items()
        for row, members in chains
    ]
    groups.sort(key=lambda grp: grp.members[0])
    return groups


def label_groups(groups: list[RowGroup], sw: DeviceGraph, k) -> list[RowGroup]:
    k = int(k)
    out = []
    for grp in groups:
        d = len(grp.row)
        kind = GroupKind.CORE if d == k else GroupKind.EDGE if 2 * d == k else GroupKind.MALFUNCTION
        out.append(RowGroup(grp.members, grp.fingerprint, grp.row, grp.status, kind))
    return out


def _accept_disjoint(candidates: list[RowGroup]) -> list[RowGroup]:
    # Largest first: within the bound an intact group always outnumbers any
    # same-degree group of miswired look-alikes overlapping its row.
    taken: set[int] = set()
    accepted = []
    for grp in sorted(candidates, key=lambda c: (-c.size, c.members[0])):
        if taken.isdisjoint(grp.row):
            accepted.append(grp)
            taken |= grp.row
    return sorted(accepted, key=lambda c: c.members[0])


def derive_aggregates(groups: list[RowGroup], sw: DeviceGraph, k) -> SwitchRoles:
    """Read aggregate roles off the rows of the intact edge and core groups.

    Returned edge/core groups hold only the intact members; pods and core
    groups are numbered by their smallest member id.
    """
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    edges = _accept_disjoint([grp for grp in groups if grp.kind is GroupKind.EDGE])
    if len(edges) != p.k:
        raise BoundExceededError("aggregates", f"{len(edges)} edge groups, expected {p.k}")
    aggs = frozenset().union(*(grp.row for grp in edges))

    cores = _accept_disjoint(
        [grp for grp in groups if grp.kind is GroupKind.CORE and grp.row <= aggs]
    )
    if len(cores) != p.half:
        raise BoundExceededError("aggregates", f"{len(cores)} core groups, expected {p.half}")

    members = {v for grp in edges + cores for v in grp.members}
    if members & aggs:
        raise BoundExceededError("aggregates", "a grouped switch is also adjacent as an aggregate")

    table = np.full((p.k, p.half), -1, dtype=np.int64)
    pod_of = {a: pod for pod, grp in enumerate(edges) for a in grp.row}
    for gid, grp in enumerate(cores):
        for a in grp.row:
            pod = pod_of[a]
            if table[pod, gid] >= 0:
                raise BoundExceededError("aggregates", f"two aggregates claim pod {pod + 1} index {gid + 1}")
            table[pod, gid] = a
    if np.any(table < 0):
        raise BoundExceededError("aggregates", "some aggregate role has no switch")
    return SwitchRoles(
        [np.array(grp.members, dtype=np.int64) for grp in edges],
        [np.array(grp.members, dtype=np.int64) for grp in cores],
        table,
    )


def resolve_malfunction_nodes(
    partial: SwitchRoles, sw: DeviceGraph, k, bits: BitRows | None = None
) -> SwitchRoles:
    """Place every switch not yet placed into an incomplete edge or core group.

    Nodes go in id order; each joins the group with spare room whose
    representative (smallest member) shares most neighbors with it. Pods
    come before core groups when breaking ties.
    """
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    h = p.half
    placed = np.zeros(sw.n, dtype=bool)
    placed[partial.agg_table.reshape(-1)] = True
    groups = [list(map(int, m)) for m in partial.edge_groups + partial.core_groups]
    for m in groups:
        placed[m] = True
    pending = np.flatnonzero(~placed)
    room = np.array([h - len(m) for m in groups])
    if np.any(room < 0) or room.sum() != pending.size:
        raise BoundExceededError(
            "resolve", f"{pending.size} unplaced switches for {int(room.clip(0).sum())} open slots"
        )
    if pending.size:
        bits = bits or BitRows(sw)
        reps = np.array([min(m) for m in groups])
        for v in pending:
            sims = bits.overlap(reps, bits.words[v])
            sims[room == 0] = -1
            best = int(np.argmax(sims))
            groups[best].append(int(v))
            room[best] -= 1
    edge_groups = [np.sort(np.array(m, dtype=np.int64)) for m in groups[: p.k]]
    core_groups = [np.sort(np.array(m, dtype=np.int64)) for m in groups[p.k :]]
    return SwitchRoles(edge_groups, core_groups, partial.agg_table)


def server_faults(g: DeviceGraph, assignment: RoleAssignment, servers: np.ndarray) -> list[ServerFault]:
    """Edge switches whose count of server neighbors differs from k/2."""
    h = assignment.k // 2
    is_server = np.zeros(g.n, dtype=bool)
    is_server[servers] = True
    indptr, indices = g.csr
    owner = np.repeat(np.arange(g.n), g.degrees())
    counts = np.bincount(owner[is_server[indices]], minlength=g.n)
    edges = assignment.nodes_of_kind(RoleKind.EDGE)
    return [ServerFault(int(e), h, int(counts[e])) for e in edges if counts[e] != h]


def run_algo2(g: DeviceGraph, k=None) -> Algo2Outcome:
    p = check_size(g, k)
    try:
        sw, servers, switch_ids = strip_low_degree(g, p)
        groups = label_groups(group_rows(sw, p.k), sw, p.k)
        partial = derive_aggregates(groups, sw, p)
        roles = resolve_malfunction_nodes(partial, sw, p)
        assignment = assemble_assignment(
            g,
            p,
            servers,
            [switch_ids[m] for m in roles.edge_groups],
            switch_ids[roles.agg_table],
            [switch_ids[m] for m in roles.core_groups],
        )
        plan = compute_fixation(g, assignment)
        limit = plan_step_limit(p.k)
        if plan.steps > limit:
            raise BoundExceededError(
                "fixation", f"{plan.steps} fix steps ({2 * plan.steps} matrix entries) exceed {limit}"
            )
    except BoundExceededError as exc:
        return Algo2Outcome(bound_exceeded=exc.info)
    return Algo2Outcome(assignment, plan.with_extra(server_faults(g, assignment, servers)))
