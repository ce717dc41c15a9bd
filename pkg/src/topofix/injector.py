"""Seeded link-malfunction injection with ground truth."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InjectionError
from .graph import DeviceGraph

__all__ = [
    "GroundTruthDiff",
    "MalfunctionSpec",
    "Scope",
    "apply_diff",
    "degree_preserving_miswire",
    "inject",
    "swap_links",
]

_MAX_TRIES = 10_000


class Scope(str, enum.Enum):
    SWITCH_LINKS_ONLY = "switch-links-only"
    INCLUDE_SERVER_LINKS = "include-server-links"


@dataclass(frozen=True)
class MalfunctionSpec:
    seed: int = 0
    removals: int = 0
    additions: int = 0
    swaps: int = 0
    scope: Scope = Scope.SWITCH_LINKS_ONLY

    @property
    def x(self) -> int:
        """Undirected link malfunctions; a swap is two removals plus two additions."""
        return self.removals + self.additions + 4 * self.swaps

    @classmethod
    def mixed(cls, x: int, seed: int = 0, scope: Scope = Scope.SWITCH_LINKS_ONLY) -> MalfunctionSpec:
        """Half removals, half additions, odd remainder to removals."""
        return cls(seed=seed, removals=x - x // 2, additions=x // 2, scope=Scope(scope))


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class GroundTruthDiff:
    removed: frozenset = field(default_factory=frozenset)
    added: frozenset = field(default_factory=frozenset)

    @property
    def x(self) -> int:
        return len(self.removed) + len(self.added)

    def inverted(self) -> GroundTruthDiff:
        return GroundTruthDiff(self.added, self.removed)

    def to_json(self) -> str:
        return json.dumps(
            {"removed": sorted(map(list, self.removed)), "added": sorted(map(list, self.added))}
        )

    @classmethod
    def from_json(cls, text: str) -> GroundTruthDiff:
        doc = json.loads(text)
        return cls(
            frozenset(_pair(int(u), int(v)) for u, v in doc["removed"]),
            frozenset(_pair(int(u), int(v)) for u, v in doc["added"]),
        )


def apply_diff(g: DeviceGraph, diff: GroundTruthDiff) -> DeviceGraph:
    return g.with_edits(remove=sorted(diff.removed), add=sorted(diff.added))


def _eligible_nodes(g: DeviceGraph, scope: Scope) -> np.ndarray:
    if Scope(scope) is Scope.INCLUDE_SERVER_LINKS:
        return np.arange(g.n)
    return np.flatnonzero(g.degrees() > 1)


def inject(g: DeviceGraph, spec: MalfunctionSpec) -> tuple[DeviceGraph, GroundTruthDiff]:
    """Delete, add and swap random links of ``g`` according to ``spec``.

    With the default scope only switch-to-switch links are touched; servers
    are taken to be the nodes of degree <= 1. Removed links are drawn from
    existing in-scope links, added links from in-scope non-links; a removed
    link is never re-added.
    """
    if min(spec.removals, spec.additions, spec.swaps) < 0:
        raise InjectionError("malfunction counts must be non-negative")
    if spec.x >= g.num_edges:
        raise InjectionError(f"x={spec.x} malfunctions on a graph with {g.num_edges} links")
    rng = np.random.default_rng(spec.seed)
    nodes = _eligible_nodes(g, spec.scope)
    in_scope = np.zeros(g.n, dtype=bool)
    in_scope[nodes] = True
    e = g.edges
    pool = e[in_scope[e[:, 0]] & in_scope[e[:, 1]]]
    edge_set = {(int(u), int(v)) for u, v in e.tolist()}

    if spec.removals + 2 * spec.swaps > len(pool):
        raise InjectionError(f"only {len(pool)} in-scope links available")
    picked = rng.choice(len(pool), size=spec.removals, replace=False) if spec.removals else []
    removed = {(int(pool[i, 0]), int(pool[i, 1])) for i in picked}
    added: set[tuple[int, int]] = set()

    for _ in range(spec.swaps):
        for _try in range(_MAX_TRIES):
            i, j = rng.choice(len(pool), size=2, replace=False)
            a, b = (int(t) for t in pool[i][rng.permutation(2)])
            c, d = (int(t) for t in pool[j][rng.permutation(2)])
            old = {_pair(a, b), _pair(c, d)}
            new = {_pair(a, d), _pair(c, b)}
            if len({a, b, c, d}) < 4 or old & removed or new & (edge_set | added):
                continue
            removed |= old
            added |= new
            break
        else:
            raise InjectionError("no eligible link pair left for a degree-preserving swap")

    if spec.additions:
        non_links = len(nodes) * (len(nodes) - 1) // 2 - len(pool)
        if spec.additions > non_links - len(added):
            raise InjectionError(f"cannot add {spec.additions} links: too few in-scope non-links")
    tries = 0
    target = len(added) + spec.additions
    while len(added) < target:
        tries += 1
        if tries > _MAX_TRIES * max(1, spec.additions):
            raise InjectionError("could not sample enough distinct non-links")
        u, v = (int(t) for t in rng.choice(nodes, size=2, replace=False))
        p = _pair(u, v)
        if p in edge_set or p in added:
            continue
        added.add(p)

    diff = GroundTruthDiff(frozenset(removed), frozenset(added))
    return apply_diff(g, diff), diff


def swap_links(g: DeviceGraph, ab: tuple[int, int], cd: tuple[int, int]) -> tuple[DeviceGraph, GroundTruthDiff]:
    """Replace links (a,b),(c,d) with (a,d),(c,b); every degree is kept."""
    (a, b), (c, d) = ab, cd
    if len({a, b, c, d}) < 4:
        raise InjectionError("swap needs four distinct endpoints")
    if not (g.has_edge(a, b) and g.has_edge(c, d)):
        raise InjectionError("swap source links must exist")
    if g.has_edge(a, d) or g.has_edge(c, b):
        raise InjectionError("swap target links must be absent")
    diff = GroundTruthDiff(frozenset({_pair(a, b), _pair(c, d)}), frozenset({_pair(a, d), _pair(c, b)}))
    return apply_diff(g, diff), diff


def degree_preserving_miswire(
    g: DeviceGraph, seed: int = 0, scope: Scope = Scope.SWITCH_LINKS_ONLY
) -> tuple[DeviceGraph, GroundTruthDiff]:
    """One random miswiring that leaves every node degree unchanged (x = 4)."""
    return inject(g, MalfunctionSpec(seed=seed, swaps=1, scope=Scope(scope)))
