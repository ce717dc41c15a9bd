"""FatTree blueprint: roles, connection rules and role-to-location generation.

Every device of a FatTree(k) plays one of four roles::

    CoreNode(group)              group in 1..k/2
    AggregateNode(group, index)  group = pod in 1..k, index in 1..k/2
    EdgeNode(group, index)       group = pod in 1..k, index in 1..k/2
    ServerNode(group)            group = global edge number in 1..k^2/2

Once every device has a role the wiring is fully determined:
core(g) -- agg(*, g), agg(p, *) -- edge(p, *), and
edge(p, i) -- server((p - 1) * k/2 + i).
"""

from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AssignmentError, ParameterError
from .graph import DeviceGraph

__all__ = [
    "FatTreeParams",
    "Role",
    "RoleAssignment",
    "RoleKind",
    "canonical_roles",
    "connected",
    "expected_adjacency",
    "generate_blueprint",
    "infer_k",
    "logical_id",
]


class RoleKind(enum.IntEnum):
    SERVER = 0
    EDGE = 1
    AGGREGATE = 2
    CORE = 3


_KIND_NAMES = {
    RoleKind.SERVER: "ServerNode",
    RoleKind.EDGE: "EdgeNode",
    RoleKind.AGGREGATE: "AggregateNode",
    RoleKind.CORE: "CoreNode",
}


@dataclass(frozen=True)
class FatTreeParams:
    k: int

    def __post_init__(self) -> None:
        if not isinstance(self.k, (int, np.integer)) or self.k < 4 or self.k % 2:
            raise ParameterError(f"k must be an even integer >= 4, got {self.k!r}")

    @property
    def half(self) -> int:
        return self.k // 2

    @property
    def n_servers(self) -> int:
        return self.k**3 // 4

    @property
    def n_edge(self) -> int:
        return self.k**2 // 2

    @property
    def n_aggregate(self) -> int:
        return self.k**2 // 2

    @property
    def n_core(self) -> int:
        return self.k**2 // 4

    @property
    def n_switches(self) -> int:
        return 5 * self.k**2 // 4

    @property
    def n_nodes(self) -> int:
        return self.n_servers + self.n_switches

    @property
    def n_links(self) -> int:
        return 3 * self.k**3 // 4


def _params(k) -> FatTreeParams:
    return k if isinstance(k, FatTreeParams) else FatTreeParams(int(k))


def infer_k(n_nodes: int) -> int | None:
    """Invert ``n = k^3/4 + 5k^2/4``; None when no even k >= 4 fits."""
    k = 4
    while k**3 // 4 + 5 * k**2 // 4 < n_nodes:
        k += 2
    return k if k**3 // 4 + 5 * k**2 // 4 == n_nodes else None


@dataclass(frozen=True, order=True)
class Role:
    kind: RoleKind
    group: int
    index: int = 0

    @classmethod
    def core(cls, group: int) -> Role:
        return cls(RoleKind.CORE, group)

    @classmethod
    def aggregate(cls, group: int, index: int) -> Role:
        return cls(RoleKind.AGGREGATE, group, index)

    @classmethod
    def edge(cls, group: int, index: int) -> Role:
        return cls(RoleKind.EDGE, group, index)

    @classmethod
    def server(cls, group: int) -> Role:
        return cls(RoleKind.SERVER, group)

    def is_valid(self, k) -> bool:
        p = _params(k)
        if self.kind is RoleKind.CORE:
            return 1 <= self.group <= p.half and self.index == 0
        if self.kind in (RoleKind.AGGREGATE, RoleKind.EDGE):
            return 1 <= self.group <= p.k and 1 <= self.index <= p.half
        return 1 <= self.group <= p.n_edge and self.index == 0

    def __str__(self) -> str:
        name = _KIND_NAMES[self.kind]
        if self.kind in (RoleKind.AGGREGATE, RoleKind.EDGE):
            return f"{name}(group={self.group},index={self.index})"
        return f"{name}(group={self.group})"


def canonical_roles(k) -> list[Role]:
    """The role multiset of FatTree(k) in canonical location order.

    Order is servers, edge, aggregate, core, matching :func:`generate_blueprint`.
    """
    p = _params(k)
    h = p.half
    roles = [Role.server((i - 1) // h + 1) for i in range(1, p.n_servers + 1)]
    roles += [Role.edge((i - 1) // h + 1, (i - 1) % h + 1) for i in range(1, p.n_edge + 1)]
    roles += [Role.aggregate((i - 1) // h + 1, (i - 1) % h + 1) for i in range(1, p.n_aggregate + 1)]
    roles += [Role.core((i - 1) // h + 1) for i in range(1, p.n_core + 1)]
    return roles


def connected(a: Role, b: Role, k) -> bool:
    """Connection rule between two roles (symmetric)."""
    h = _params(k).half
    if a.kind > b.kind:
        a, b = b, a
    if a.kind is RoleKind.SERVER and b.kind is RoleKind.EDGE:
        return a.group == (b.group - 1) * h + b.index
    if a.kind is RoleKind.EDGE and b.kind is RoleKind.AGGREGATE:
        return a.group == b.group
    if a.kind is RoleKind.AGGREGATE and b.kind is RoleKind.CORE:
        return a.index == b.group
    return False


def logical_id(role: Role, k, slot: int = 1) -> str:
    """Dotted logical address of a role; ``slot`` is the 1-based position
    among devices sharing the same role (core group members, servers of one
    edge switch)."""
    p = _params(k)
    h = p.half
    if role.kind is RoleKind.CORE:
        return f"10.{p.k + 1}.{role.group}.{slot}"
    if role.kind is RoleKind.EDGE:
        return f"10.{role.group}.{role.index}.1"
    if role.kind is RoleKind.AGGREGATE:
        return f"10.{role.group}.{h + role.index}.1"
    pod, edge_index = (role.group - 1) // h + 1, (role.group - 1) % h + 1
    return f"10.{pod}.{edge_index}.{slot + 1}"


class RoleAssignment:
    """Total mapping node id -> :class:`Role`, stored column-wise.

    The constructor enforces that the roles form exactly the canonical
    multiset of FatTree(k).
    """

    __slots__ = ("k", "kinds", "groups", "indices")

    def __init__(self, k, kinds, groups, indices):
        self.k = _params(k).k
        self.kinds = np.asarray(kinds, dtype=np.int8)
        self.groups = np.asarray(groups, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        for a in (self.kinds, self.groups, self.indices):
            a.setflags(write=False)
        self._validate()

    @classmethod
    def from_roles(cls, roles: Iterable[Role], k) -> RoleAssignment:
        roles = list(roles)
        return cls(
            k,
            [r.kind for r in roles],
            [r.group for r in roles],
            [r.index for r in roles],
        )

    def _validate(self) -> None:
        p = _params(self.k)
        h = p.half
        kinds, groups, idx = self.kinds, self.groups, self.indices
        if not (kinds.shape == groups.shape == idx.shape) or kinds.ndim != 1:
            raise AssignmentError("role columns must be equal-length vectors")
        if kinds.size != p.n_nodes:
            raise AssignmentError(f"{kinds.size} roles for FatTree({p.k}) with {p.n_nodes} devices")

        def exact(mask, codes, size, each):
            counts = np.bincount(codes[mask], minlength=size)
            return counts.size == size and np.all(counts == each)

        core = kinds == RoleKind.CORE
        srv = kinds == RoleKind.SERVER
        two = (kinds == RoleKind.EDGE) | (kinds == RoleKind.AGGREGATE)
        if not np.all(core | srv | two):
            raise AssignmentError("unknown role kind")
        if np.any(idx[core | srv] != 0):
            raise AssignmentError("core and server roles carry no index")
        if np.any((groups < 1) | (idx < 0)) or np.any(idx[two] < 1) or np.any(idx[two] > h):
            raise AssignmentError("role ids out of range")
        if np.any(groups[core] > h) or np.any(groups[two] > p.k) or np.any(groups[srv] > p.n_edge):
            raise AssignmentError("role group out of range")
        ok = (
            exact(core, groups - 1, h, h)
            and exact(srv, groups - 1, p.n_edge, h)
            and exact(kinds == RoleKind.EDGE, (groups - 1) * h + idx - 1, p.n_edge, 1)
            and exact(kinds == RoleKind.AGGREGATE, (groups - 1) * h + idx - 1, p.n_aggregate, 1)
        )
        if not ok:
            raise AssignmentError("role multiset differs from the canonical FatTree roles")

    def __len__(self) -> int:
        return int(self.kinds.size)

    def role(self, v: int) -> Role:
        return Role(RoleKind(int(self.kinds[v])), int(self.groups[v]), int(self.indices[v]))

    def roles(self) -> list[Role]:
        return [self.role(v) for v in range(len(self))]

    def nodes_of_kind(self, kind: RoleKind) -> np.ndarray:
        return np.flatnonzero(self.kinds == kind)

    def slots(self) -> np.ndarray:
        """1-based position of each node among the nodes sharing its role
        (ordered by node id); 1 for unique roles."""
        key = (self.kinds.astype(np.int64) * (self.k**3 + 1) + self.groups) * (self.k + 1) + self.indices
        order = np.lexsort((np.arange(key.size), key))
        sk = key[order]
        starts = np.r_[0, np.flatnonzero(sk[1:] != sk[:-1]) + 1]
        run_start = np.repeat(starts, np.diff(np.r_[starts, sk.size]))
        out = np.empty(key.size, dtype=np.int64)
        out[order] = np.arange(key.size) - run_start + 1
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RoleAssignment):
            return NotImplemented
        return (
            self.k == other.k
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.groups, other.groups)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None  # type: ignore[assignment]

    def role_table(self, device_ids: Sequence[str] | None = None) -> list[dict]:
        if device_ids is None:
            device_ids = [str(i) for i in range(len(self))]
        slots = self.slots()
        rows = []
        for v in range(len(self)):
            r = self.role(v)
            rows.append(
                {
                    "device_id": device_ids[v],
                    "role_kind": _KIND_NAMES[r.kind],
                    "group": r.group,
                    "index": r.index if r.kind in (RoleKind.EDGE, RoleKind.AGGREGATE) else None,
                    "logical_id": logical_id(r, self.k, int(slots[v])),
                }
            )
        return rows

    def write_role_table(self, path: str | Path, device_ids: Sequence[str] | None = None) -> None:
        Path(path).write_text(json.dumps(self.role_table(device_ids), indent=1) + "\n")

    def layout(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Node ids arranged by role.

        Returns ``(servers, edges, aggs, cores)`` with shapes ``(k^2/2, h)``,
        ``(k, h)``, ``(k, h)`` and ``(h, h)``; rows are server groups, pods,
        pods and core groups, members within a row sorted by node id.
        """
        p = _params(self.k)
        h = p.half
        kinds, groups, idx = self.kinds, self.groups, self.indices

        def grouped(kind, key):
            nodes = np.flatnonzero(kinds == kind)
            order = np.lexsort((nodes, key[nodes]))
            return nodes[order]

        servers = grouped(RoleKind.SERVER, groups).reshape(p.n_edge, h)
        slot = (groups - 1) * h + idx
        edges = grouped(RoleKind.EDGE, slot).reshape(p.k, h)
        aggs = grouped(RoleKind.AGGREGATE, slot).reshape(p.k, h)
        cores = grouped(RoleKind.CORE, groups).reshape(h, h)
        return servers, edges, aggs, cores


def expected_adjacency(assignment: RoleAssignment, k=None, device_ids: Sequence[str] | None = None) -> DeviceGraph:
    """The unique graph implied by a role assignment."""
    if k is not None and _params(k).k != assignment.k:
        raise AssignmentError(f"assignment is for k={assignment.k}, not k={k}")
    p = _params(assignment.k)
    h = p.half
    servers, edges, aggs, cores = assignment.layout()
    parts = [
        # edge (p, i) -- its k/2 servers
        np.stack([np.repeat(edges.reshape(-1), h), servers.reshape(-1)], axis=1),
        # edge (p, *) -- agg (p, *)
        np.stack(
            [np.repeat(edges, h, axis=1).reshape(-1), np.tile(aggs, (1, h)).reshape(-1)], axis=1
        ),
        # core group g -- agg (*, g)
        np.stack(
            [
                np.repeat(cores, p.k, axis=1).reshape(-1),
                np.tile(aggs.T, (1, h)).reshape(-1),
            ],
            axis=1,
        ),
    ]
    return DeviceGraph(len(assignment), np.concatenate(parts), device_ids)


def canonical_device_ids(k) -> list[str]:
    p = _params(k)
    return (
        [f"server-{i}" for i in range(1, p.n_servers + 1)]
        + [f"edge-{i}" for i in range(1, p.n_edge + 1)]
        + [f"agg-{i}" for i in range(1, p.n_aggregate + 1)]
        + [f"core-{i}" for i in range(1, p.n_core + 1)]
    )


def generate_blueprint(k) -> tuple[DeviceGraph, RoleAssignment]:
    """Canonical FatTree(k) built straight from the location-level rules.

    Locations are numbered 1-based per layer (servers, edge, aggregate, core
    occupy consecutive node-id ranges). Server ``i`` attaches to edge
    ``ceil(i/h)``; edge ``i`` and aggregate ``j`` connect when
    ``ceil(i/h) == ceil(j/h)``; aggregate ``i`` and core ``j`` connect when
    ``((i-1) mod h) + 1 == ceil(j/h)``, with ``h = k/2``.
    """
    p = _params(k)
    h = p.half
    s0, e0, a0, c0 = 0, p.n_servers, p.n_servers + p.n_edge, p.n_servers + p.n_edge + p.n_aggregate

    i = np.arange(1, p.n_servers + 1)
    srv_edge = np.stack([s0 + i - 1, e0 + (i + h - 1) // h - 1], axis=1)

    w = np.arange(1, p.n_edge + 1)
    pod = (w + h - 1) // h
    agg_j = (pod[:, None] - 1) * h + np.arange(1, h + 1)[None, :]
    edge_agg = np.stack([np.repeat(e0 + w - 1, h), (a0 + agg_j - 1).reshape(-1)], axis=1)

    x = np.arange(1, p.n_aggregate + 1)
    index = (x - 1) % h + 1
    core_j = (index[:, None] - 1) * h + np.arange(1, h + 1)[None, :]
    agg_core = np.stack([np.repeat(a0 + x - 1, h), (c0 + core_j - 1).reshape(-1)], axis=1)

    g = DeviceGraph(p.n_nodes, np.concatenate([srv_edge, edge_agg, agg_core]), canonical_device_ids(p))
    kinds = np.repeat(
        [RoleKind.SERVER, RoleKind.EDGE, RoleKind.AGGREGATE, RoleKind.CORE],
        [p.n_servers, p.n_edge, p.n_aggregate, p.n_core],
    )
    groups = np.concatenate([(i + h - 1) // h, pod, (x + h - 1) // h, (np.arange(1, p.n_core + 1) + h - 1) // h])
    indices = np.concatenate([np.zeros_like(i), (w - 1) % h + 1, index, np.zeros(p.n_core, dtype=np.int64)])
    return g, RoleAssignment(p, kinds, groups, indices)
