"""Degree/similarity role assignment (the O(k^6) exact algorithm).

Five steps on the physical graph:

1. strip the k^3/4 lowest-degree nodes as servers;
2. the k^2/2 lowest-degree switches are edge switches;
3. the k^2/2 switches with most edge neighbors are aggregates, the rest cores;
4. group edge switches into pods and cores into core groups by similarity;
5. greedily give each aggregate role (pod, index) the unassigned aggregate
   sharing most neighbors with the role's expected neighbor set.

With fewer than k/2 undirected link malfunctions the resulting assignment
yields a minimum fixation; beyond that it still yields a feasible one.
Every tie is broken towards the smallest node id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .blueprint import FatTreeParams, RoleAssignment, RoleKind, infer_k
from .errors import InputError
from .fixation import FixationPlan, compute_fixation
from .graph import BitRows, DeviceGraph

log = logging.getLogger(__name__)

__all__ = [
    "Algo1Result",
    "LevelPartition",
    "assemble_assignment",
    "assign_aggregates",
    "check_size",
    "classify_levels",
    "group_by_similarity",
    "run_algo1",
    "strip_servers",
]


@dataclass(frozen=True)
class LevelPartition:
    servers: np.ndarray
    edges: np.ndarray
    aggregates: np.ndarray
    cores: np.ndarray


@dataclass(frozen=True)
class Algo1Result:
    assignment: RoleAssignment
    plan: FixationPlan
    levels: LevelPartition
    beyond_bound: bool


def check_size(g: DeviceGraph, k=None) -> FatTreeParams:
    """Resolve k (inferring it from the node count if omitted)."""
    if k is None:
        k = infer_k(g.n)
        if k is None:
            raise InputError(f"{g.n} devices match no FatTree(k)")
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    if g.n != p.n_nodes:
        raise InputError(f"FatTree({p.k}) has {p.n_nodes} devices, graph has {g.n}")
    return p


def _lowest(values: np.ndarray, nodes: np.ndarray, count: int) -> np.ndarray:
    order = np.lexsort((nodes, values))
    return np.sort(nodes[order[:count]])


def strip_servers(g: DeviceGraph, k) -> tuple[DeviceGraph, np.ndarray, np.ndarray]:
    """Remove the k^3/4 lowest-degree nodes.

    Returns ``(switch_graph, servers, switch_ids)`` where ``switch_ids[i]`` is
    the original id of switch-graph node ``i``.
    """
    p = check_size(g, k)
    servers = _lowest(g.degrees(), np.arange(g.n), p.n_servers)
    keep = np.setdiff1d(np.arange(g.n), servers, assume_unique=True)
    sw, switch_ids = g.induced_subgraph(keep)
    return sw, servers, switch_ids


def classify_levels(sw: DeviceGraph, k) -> LevelPartition:
    """Split a switch graph into edge, aggregate and core switches (switch-graph ids)."""
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    if sw.n != p.n_switches:
        raise InputError(f"switch graph has {sw.n} nodes, expected {p.n_switches}")
    nodes = np.arange(sw.n)
    edges = _lowest(sw.degrees(), nodes, p.n_edge)
    rest = np.setdiff1d(nodes, edges, assume_unique=True)
    is_edge = np.zeros(sw.n, dtype=bool)
    is_edge[edges] = True
    e = sw.edges
    touches = np.bincount(e[:, 0], weights=is_edge[e[:, 1]], minlength=sw.n)
    touches += np.bincount(e[:, 1], weights=is_edge[e[:, 0]], minlength=sw.n)
    aggs = _lowest(-touches[rest], rest, p.n_aggregate)
    cores = np.setdiff1d(rest, aggs, assume_unique=True)
    return LevelPartition(np.zeros(0, dtype=np.int64), edges, aggs, cores)


def group_by_similarity(sw: DeviceGraph, nodes, k, bits: BitRows | None = None) -> list[np.ndarray]:
    """Partition ``nodes`` into groups of k/2 by shared neighbors.

    The lowest-id ungrouped node anchors each group and pulls in its k/2 - 1
    most similar ungrouped peers. Group ``i`` of the result has id ``i + 1``.
    """
    h = int(k) // 2
    bits = bits or BitRows(sw)
    left = np.sort(np.asarray(nodes, dtype=np.int64))
    if left.size % h:
        raise InputError(f"{left.size} nodes cannot form groups of {h}")
    groups = []
    while left.size:
        anchor, rest = left[0], left[1:]
        sims = bits.overlap(rest, bits.words[anchor])
        pick = np.lexsort((rest, -sims))[: h - 1]
        groups.append(np.sort(np.r_[anchor, rest[pick]]))
        left = np.delete(rest, pick)
    return groups


def assign_aggregates(
    sw: DeviceGraph,
    edge_groups: list[np.ndarray],
    core_groups: list[np.ndarray],
    aggregates,
    k,
    bits: BitRows | None = None,
) -> np.ndarray:
    """Greedy aggregate placement; returns a (k, k/2) table of switch-graph ids.

    Roles are visited in (pod, index) order. Each takes the unassigned
    aggregate whose row shares most bits with the role's expected row
    (its pod's edge group plus its index's core group).
    """
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    bits = bits or BitRows(sw)
    cands = np.sort(np.asarray(aggregates, dtype=np.int64))
    rows = bits.words[cands]
    edge_masks = [bits.mask(m) for m in edge_groups]
    core_masks = [bits.mask(m) for m in core_groups]
    taken = np.zeros(cands.size, dtype=bool)
    table = np.empty((p.k, p.half), dtype=np.int64)
    for pod in range(p.k):
        for idx in range(p.half):
            common = np.bitwise_count(rows & (edge_masks[pod] | core_masks[idx])).sum(axis=1, dtype=np.int64)
            common[taken] = -1
            best = int(np.argmax(common))
            taken[best] = True
            table[pod, idx] = cands[best]
    return table


def assemble_assignment(
    g: DeviceGraph,
    k,
    servers: np.ndarray,
    edge_groups: list[np.ndarray],
    agg_table: np.ndarray,
    core_groups: list[np.ndarray],
) -> RoleAssignment:
    """Build the full assignment from switch roles (all ids original).

    Edge switches are indexed by id within their pod. A server with exactly
    one edge-switch neighbor joins that switch's server group while it has
    room; every other server fills the first unfilled group slot in id order.
    """
    p = k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))
    h = p.half
    kinds = np.full(g.n, -1, dtype=np.int8)
    groups = np.zeros(g.n, dtype=np.int64)
    indices = np.zeros(g.n, dtype=np.int64)

    edge_group_of = np.zeros(g.n, dtype=np.int64)  # server-group id per edge switch
    for pod, members in enumerate(edge_groups, 1):
        members = np.sort(members)
        kinds[members] = RoleKind.EDGE
        groups[members] = pod
        indices[members] = np.arange(1, h + 1)
        edge_group_of[members] = (pod - 1) * h + np.arange(1, h + 1)
    kinds[agg_table] = RoleKind.AGGREGATE
    groups[agg_table] = np.arange(1, p.k + 1)[:, None]
    indices[agg_table] = np.arange(1, h + 1)[None, :]
    for gid, members in enumerate(core_groups, 1):
        kinds[members] = RoleKind.CORE
        groups[members] = gid

    servers = np.sort(np.asarray(servers, dtype=np.int64))
    kinds[servers] = RoleKind.SERVER
    is_edge = kinds == RoleKind.EDGE
    deg = g.degrees()
    owner = np.repeat(np.arange(g.n), deg)
    nbr = g.csr[1]
    hit = is_edge[nbr]
    edge_count = np.bincount(owner[hit], minlength=g.n)
    target = np.zeros(g.n, dtype=np.int64)
    target[owner[hit]] = edge_group_of[nbr[hit]]

    srv_target = np.where(edge_count[servers] == 1, target[servers], 0)
    order = np.lexsort((servers, srv_target))
    st = srv_target[order]
    starts = np.r_[0, np.flatnonzero(st[1:] != st[:-1]) + 1] if st.size else np.zeros(0, dtype=np.int64)
    rank = np.arange(st.size) - np.repeat(starts, np.diff(np.r_[starts, st.size]))
    accept = (st > 0) & (rank < h)
    srv_group = np.zeros(servers.size, dtype=np.int64)
    srv_group[order[accept]] = st[accept]

    fill = np.bincount(srv_group[srv_group > 0], minlength=p.n_edge + 1)[1:]
    free_slots = np.repeat(np.arange(1, p.n_edge + 1), h - fill)
    leftovers = np.flatnonzero(srv_group == 0)  # already in id order
    srv_group[leftovers] = free_slots[: leftovers.size]
    groups[servers] = srv_group
    return RoleAssignment(p, kinds, groups, indices)


def run_algo1(g: DeviceGraph, k=None) -> Algo1Result:
    p = check_size(g, k)
    sw, servers, switch_ids = strip_servers(g, p)
    levels = classify_levels(sw, p)
    bits = BitRows(sw)
    edge_groups = group_by_similarity(sw, levels.edges, p.k, bits)
    core_groups = group_by_similarity(sw, levels.cores, p.k, bits)
    agg_table = assign_aggregates(sw, edge_groups, core_groups, levels.aggregates, p, bits)

    assignment = assemble_assignment(
        g,
        p,
        servers,
        [switch_ids[grp] for grp in edge_groups],
        switch_ids[agg_table],
        [switch_ids[grp] for grp in core_groups],
    )
    plan = compute_fixation(g, assignment)
    beyond = plan.steps >= p.half
    if beyond:
        log.info("FatTree(%d): %d fix steps, at or beyond the exactness bound k/2", p.k, plan.steps)
    full_levels = LevelPartition(
        servers, switch_ids[levels.edges], switch_ids[levels.aggregates], switch_ids[levels.cores]
    )
    return Algo1Result(assignment, plan, full_levels, beyond)
