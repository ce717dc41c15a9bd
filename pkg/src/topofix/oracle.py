"""Brute-force solvers for certifying results on tiny instances.

``mgdp_bruteforce`` tries every bijection between two small graphs.
``fattree_minfix_search`` finds the true minimum number of fix steps for a
small FatTree by exhaustive branch-and-bound over role assignments. Neither
shares code with the detection algorithms beyond the blueprint rules.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .blueprint import FatTreeParams, Role, RoleAssignment, RoleKind, canonical_roles, connected
from .errors import BudgetError, UsageError
from .graph import DeviceGraph

__all__ = [
    "MAX_BRUTEFORCE_NODES",
    "MinFixResult",
    "common_edge_count",
    "fattree_minfix_search",
    "fattree_minfix_solution",
    "mapping_difference",
    "mces_identity_check",
    "mgdp_bruteforce",
    "minfix_lower_bound",
]

MAX_BRUTEFORCE_NODES = 9
_CHUNK = 40_320  # 8!


def _padded(g: DeviceGraph, n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=bool)
    a[: g.n, : g.n] = g.adjacency_matrix()
    return a


def _as_perm(pi, n: int) -> np.ndarray:
    perm = np.asarray(pi, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise UsageError(f"not a bijection on {n} nodes: {pi!r}")
    return perm


def mapping_difference(g1: DeviceGraph, g2: DeviceGraph, pi) -> int:
    """Ordered pairs (u, v) with a1(u, v) != a2(pi(u), pi(v))."""
    if g1.n != g2.n:
        raise UsageError(f"graph sizes differ: {g1.n} vs {g2.n}")
    perm = _as_perm(pi, g1.n)
    a1, a2 = g1.adjacency_matrix(), g2.adjacency_matrix()
    return int(np.count_nonzero(a1 != a2[np.ix_(perm, perm)]))


def common_edge_count(g1: DeviceGraph, g2: DeviceGraph, pi) -> int:
    """Ordered pairs that are edges in g1 and map onto edges of g2."""
    if g1.n != g2.n:
        raise UsageError(f"graph sizes differ: {g1.n} vs {g2.n}")
    perm = _as_perm(pi, g1.n)
    a1, a2 = g1.adjacency_matrix(), g2.adjacency_matrix()
    return int(np.count_nonzero(a1 & a2[np.ix_(perm, perm)]))


def mces_identity_check(g1: DeviceGraph, g2: DeviceGraph, pi) -> bool:
    """Check d + 2c = |E1| + |E2|, every term counted over ordered pairs."""
    d = mapping_difference(g1, g2, pi)
    c = common_edge_count(g1, g2, pi)
    return d + 2 * c == 2 * g1.num_edges + 2 * g2.num_edges


def mgdp_bruteforce(g1: DeviceGraph, g2: DeviceGraph) -> tuple[int, tuple[int, ...]]:
    """Minimum difference over all bijections, and the first bijection reaching it.

    The smaller graph is padded with isolated nodes. Bijections are scanned
    in lexicographic order, so the returned one is the lexicographically
    smallest optimum.
    """
    n = max(g1.n, g2.n)
    if n > MAX_BRUTEFORCE_NODES:
        raise BudgetError(f"{n} nodes exceeds the brute-force cap of {MAX_BRUTEFORCE_NODES}")
    if n == 0:
        return 0, ()
    a1, a2 = _padded(g1, n), _padded(g2, n)
    best_d, best_pi = None, tuple(range(n))
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, _CHUNK)), dtype=np.int64).reshape(-1, n)
        if not len(chunk):
            break
        mapped = a2[chunk[:, :, None], chunk[:, None, :]]
        d = np.count_nonzero(mapped != a1, axis=(1, 2))
        i = int(np.argmin(d))
        if best_d is None or d[i] < best_d:
            best_d, best_pi = int(d[i]), tuple(int(t) for t in chunk[i])
    return best_d, best_pi


@dataclass(frozen=True)
class MinFixResult:
    steps: int
    assignment: RoleAssignment
    nodes_expanded: int


def _slot_roles(p: FatTreeParams) -> list[Role]:
    by_kind = {kind: [] for kind in RoleKind}
    for r in canonical_roles(p):
        by_kind[r.kind].append(r)
    return [r for kind in (RoleKind.CORE, RoleKind.EDGE, RoleKind.AGGREGATE) for r in sorted(by_kind[kind])]


def _expected_degree(role: Role, p: FatTreeParams) -> int:
    return 1 if role.kind is RoleKind.SERVER else p.k


def _max_server_matching(servers: list[int], adj: list[int], edge_nodes: list[int], cap: int) -> dict[int, int]:
    """Server -> edge slot position, maximizing servers attached to their own edge."""
    slot_of = {v: i for i, v in enumerate(edge_nodes)}
    load: list[list[int]] = [[] for _ in edge_nodes]
    match: dict[int, int] = {}

    def options(s):
        m = adj[s]
        return [slot_of[v] for v in edge_nodes if m >> v & 1]

    def augment(s, seen):
        for e in options(s):
            if e in seen:
                continue
            seen.add(e)
            if len(load[e]) < cap:
                load[e].append(s)
                match[s] = e
                return True
            for other in list(load[e]):
                if augment(other, seen):
                    load[e].remove(other)
                    load[e].append(s)
                    match[s] = e
                    return True
        return False

    for s in servers:
        augment(s, set())
    return match


class _Search:
    def __init__(self, g: DeviceGraph, p: FatTreeParams, node_budget: int, prune: bool):
        self.p = p
        self.n = g.n
        self.adj = [0] * g.n
        for u, v in g.edges.tolist():
            self.adj[u] |= 1 << v
            self.adj[v] |= 1 << u
        self.all_mask = (1 << g.n) - 1
        self.slots = _slot_roles(p)
        self.edge_slot_pos = [i for i, r in enumerate(self.slots) if r.kind is RoleKind.EDGE]
        self.exp_deg = [_expected_degree(r, p) for r in self.slots]
        # expected links from each slot to earlier slots
        self.links_back = [
            [t for t in range(s) if connected(self.slots[s], self.slots[t], p.k)] for s in range(len(self.slots))
        ]
        # expected links among the roles still free once slots < s are filled
        tail_switch = [0] * (len(self.slots) + 1)
        for s in range(len(self.slots) - 1, -1, -1):
            tail_switch[s] = tail_switch[s + 1] + sum(
                1 for t in range(s + 1, len(self.slots)) if connected(self.slots[s], self.slots[t], p.k)
            )
        # servers attach only to edges; edge slots come before aggregates
        edges_free = [sum(1 for t in self.edge_slot_pos if t >= s) for s in range(len(self.slots) + 1)]
        self.free_expected = [tail_switch[s] + edges_free[s] * p.half for s in range(len(self.slots) + 1)]
        self.node_budget = node_budget
        self.prune = prune
        self.expanded = 0
        self.placed: list[int] = []
        self.best = None

    def _lower_bound(self, settled: int, used: int) -> int:
        if not self.prune:
            return settled
        free = self.all_mask & ~used
        s = len(self.placed)
        # pairs (placed, free), bounded from the placed side
        placed_side = 0
        for t, u in enumerate(self.placed):
            exp_rest = self.exp_deg[t] - len(self.links_back[t]) - sum(
                1 for q in range(t + 1, s) if t in self.links_back[q]
            )
            placed_side += abs(exp_rest - (self.adj[u] & free).bit_count())
        # the same pairs bounded from the free side: each free node takes some remaining role
        masks = set()
        for r in range(s, len(self.slots)):
            m = 0
            for t in self.links_back[r]:
                if t < s:
                    m |= 1 << self.placed[t]
            masks.add(m)
        for e in self.edge_slot_pos:
            masks.add(1 << self.placed[e] if e < s else 0)
        free_side = 0
        free_nodes = [v for v in range(self.n) if free >> v & 1]
        for v in free_nodes:
            seen = self.adj[v] & used
            free_side += min((seen ^ m).bit_count() for m in masks)
        phys_free = sum((self.adj[v] & free).bit_count() for v in free_nodes) // 2
        return settled + max(placed_side, free_side) + abs(self.free_expected[s] - phys_free)

    def _candidates(self, s: int, used: int):
        role = self.slots[s]
        lo = -1
        if s > 0:
            prev = self.slots[s - 1]
            if role.kind is RoleKind.CORE and prev.kind is RoleKind.CORE:
                if prev.group == role.group:
                    lo = self.placed[s - 1]
                else:
                    # first member of the next core group exceeds first member of this one
                    lo = self.placed[s - self.p.half]
            elif role.kind is RoleKind.EDGE and prev.kind is RoleKind.EDGE:
                lo = self.placed[s - 1] if prev.group == role.group else self.placed[s - self.p.half]
        for u in range(lo + 1, self.n):
            if not used >> u & 1:
                yield u

    def _finish(self, settled: int, used: int, limit: int) -> bool:
        servers = [v for v in range(self.n) if not used >> v & 1]
        srv_mask = self.all_mask & ~used
        vv = sum((self.adj[v] & srv_mask).bit_count() for v in servers) // 2
        sv = sum((self.adj[v] & used).bit_count() for v in servers)
        edge_nodes = [self.placed[t] for t in self.edge_slot_pos]
        match = _max_server_matching(servers, self.adj, edge_nodes, self.p.half)
        total = settled + vv + sv + len(servers) - 2 * len(match)
        if total > limit:
            return False
        self.best = (total, list(self.placed), servers, match)
        return True

    def dfs(self, settled: int, used: int, limit: int) -> bool:
        self.expanded += 1
        if self.expanded > self.node_budget:
            raise BudgetError(f"search exceeded {self.node_budget} nodes")
        s = len(self.placed)
        if s == len(self.slots):
            return self._finish(settled, used, limit)
        back = self.links_back[s]
        exp_nodes = 0
        for t in back:
            exp_nodes |= 1 << self.placed[t]
        for u in self._candidates(s, used):
            cost = settled + ((self.adj[u] & used) ^ exp_nodes).bit_count()
            if cost > limit:
                continue
            self.placed.append(u)
            nused = used | 1 << u
            if self._lower_bound(cost, nused) <= limit and self.dfs(cost, nused, limit):
                return True
            self.placed.pop()
        return False

    def assignment(self) -> RoleAssignment:
        _, placed, servers, match = self.best
        p = self.p
        roles: list[Role | None] = [None] * self.n
        for role, u in zip(self.slots, placed):
            roles[u] = role
        fill = [0] * p.n_edge
        groups = {}
        for s, e in match.items():
            groups[s] = e
            fill[e] += 1
        free = [e for e in range(p.n_edge) for _ in range(p.half - fill[e])]
        for s in servers:
            if s not in groups:
                groups[s] = free.pop(0)
        for s, e in groups.items():
            edge = self.slots[self.edge_slot_pos[e]]
            roles[s] = Role.server((edge.group - 1) * p.half + edge.index)
        return RoleAssignment.from_roles(roles, p)


def fattree_minfix_solution(
    g: DeviceGraph, k: int = 4, node_budget: int = 2_000_000, prune: bool = True
) -> MinFixResult:
    """Exact minimum fix steps for ``g`` with an optimal role assignment.

    Switch roles are placed one slot at a time (cores, then edges, then
    aggregates) with automorphism-breaking order constraints; the server
    slots are then filled optimally by a bipartite matching. The step budget
    is raised one at a time, so the first feasible budget is the minimum.
    With ``prune`` off, only the cost of already-fixed pairs bounds the
    search.
    """
    p = FatTreeParams(int(k))
    if g.n != p.n_nodes:
        raise UsageError(f"FatTree({p.k}) has {p.n_nodes} devices, graph has {g.n}")
    search = _Search(g, p, node_budget, prune)
    for limit in range(g.num_edges + p.n_links + 1):
        search.placed = []
        if search.dfs(0, 0, limit):
            return MinFixResult(search.best[0], search.assignment(), search.expanded)
    raise AssertionError("unreachable: deleting every link and rebuilding is always feasible")


def minfix_lower_bound(g: DeviceGraph, placed, k: int = 4) -> int:
    """Look-ahead bound used by the search for a partial placement.

    ``placed`` lists the nodes given the first switch slots, in slot order
    (cores by group, then edges by pod and index, then aggregates). Any
    completion of that placement needs at least this many fix steps.
    """
    search = _Search(g, FatTreeParams(int(k)), node_budget=0, prune=True)
    used, settled = 0, 0
    for s, u in enumerate(placed):
        exp_nodes = 0
        for t in search.links_back[s]:
            exp_nodes |= 1 << search.placed[t]
        settled += ((search.adj[u] & used) ^ exp_nodes).bit_count()
        search.placed.append(int(u))
        used |= 1 << int(u)
    return search._lower_bound(settled, used)


def fattree_minfix_search(g: DeviceGraph, k: int = 4, node_budget: int = 2_000_000, prune: bool = True) -> int:
    return fattree_minfix_solution(g, k, node_budget, prune).steps
