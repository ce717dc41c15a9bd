"""Immutable undirected device graphs and the primitive measures on them.

Node ids are dense integers ``0..n-1``; the external device labels live in a
side table (``device_ids``). Adjacency is held in CSR form (sorted neighbor
lists) so graphs with hundreds of thousands of devices stay small, and
:class:`BitRows` packs the rows of a (sub)graph into 64-bit words when many
similarity queries are needed.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .errors import UsageError

__all__ = [
    "BitRows",
    "DeviceGraph",
    "NodeRow",
    "common_edges",
    "degree",
    "hamming_distance",
    "read_graph",
    "row_fingerprint",
    "similarity",
    "write_graph",
]


def _normalize_edges(n: int, edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise UsageError(f"edge endpoint out of range for n={n}")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise UsageError("self-loops are not allowed")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keys = lo * n + hi
    uniq = np.unique(keys)
    if uniq.size != keys.size:
        raise UsageError("parallel edges are not allowed")
    return np.stack([uniq // n, uniq % n], axis=1)


class DeviceGraph:
    """Symmetric, loop-free adjacency over ``n`` devices.

    Equality compares adjacency only; ``device_ids`` is a labelling side table.
    """

    __slots__ = ("_n", "_edges", "_indptr", "_indices", "_device_ids", "_degrees")

    def __init__(self, n: int, edges=(), device_ids: Sequence[str] | None = None):
        n = int(n)
        if n < 0:
            raise UsageError("node count must be non-negative")
        self._n = n
        self._edges = _normalize_edges(n, edges)
        self._edges.setflags(write=False)
        if device_ids is None:
            device_ids = [str(i) for i in range(n)]
        device_ids = tuple(str(d) for d in device_ids)
        if len(device_ids) != n:
            raise UsageError(f"{len(device_ids)} device ids for {n} nodes")
        self._device_ids = device_ids

        src = np.concatenate([self._edges[:, 0], self._edges[:, 1]])
        dst = np.concatenate([self._edges[:, 1], self._edges[:, 0]])
        order = np.lexsort((dst, src))
        self._indices = dst[order]
        self._degrees = np.bincount(src, minlength=n).astype(np.int64)
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self._degrees, out=self._indptr[1:])
        for a in (self._indices, self._degrees, self._indptr):
            a.setflags(write=False)

    # -- basic accessors -------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def device_ids(self) -> tuple[str, ...]:
        return self._device_ids

    @property
    def edges(self) -> np.ndarray:
        """(m, 2) array of undirected edges, ``u < v``, lexically sorted."""
        return self._edges

    @property
    def num_edges(self) -> int:
        return int(self._edges.shape[0])

    def _check(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self._n:
            raise UsageError(f"node id {v} out of range 0..{self._n - 1}")
        return v

    @property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` of the symmetric adjacency."""
        return self._indptr, self._indices

    def degrees(self) -> np.ndarray:
        return self._degrees

    def degree(self, v: int) -> int:
        return int(self._degrees[self._check(v)])

    def neighbors(self, v: int) -> np.ndarray:
        v = self._check(v)
        return self._indices[self._indptr[v] : self._indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        v = self._check(v)
        i = np.searchsorted(row, v)
        return bool(i < row.size and row[i] == v)

    def row(self, v: int) -> NodeRow:
        return NodeRow(self._check(v), frozenset(int(x) for x in self.neighbors(v)))

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n + v`` codes of the edges (``u < v``)."""
        return self._edges[:, 0] * self._n + self._edges[:, 1]

    def index_of(self, device_id: str) -> int:
        try:
            return self._device_ids.index(device_id)
        except ValueError:
            raise UsageError(f"unknown device {device_id!r}") from None

    # -- derived graphs --------------------------------------------------
    def induced_subgraph(self, nodes: Iterable[int]) -> tuple[DeviceGraph, np.ndarray]:
        """Subgraph on ``nodes``; returns it with the new-id -> old-id table."""
        keep = np.unique(np.asarray(list(nodes), dtype=np.int64))
        if keep.size and (keep[0] < 0 or keep[-1] >= self._n):
            raise UsageError("induced_subgraph: node id out of range")
        remap = np.full(self._n, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        e = remap[self._edges]
        e = e[(e[:, 0] >= 0) & (e[:, 1] >= 0)]
        ids = [self._device_ids[i] for i in keep]
        return DeviceGraph(keep.size, e, ids), keep

    def with_edits(self, remove=(), add=()) -> DeviceGraph:
        """Copy with undirected edges removed and added.

        Removing a non-edge or adding an existing edge is a :class:`UsageError`.
        """
        n = self._n
        keys = self.edge_keys()
        rem = _normalize_edges(n, remove)
        ad = _normalize_edges(n, add)
        rk = rem[:, 0] * n + rem[:, 1]
        ak = ad[:, 0] * n + ad[:, 1]
        if rk.size and not np.all(np.isin(rk, keys, assume_unique=True)):
            raise UsageError("cannot remove a non-edge")
        if ak.size and np.any(np.isin(ak, keys, assume_unique=True)):
            raise UsageError("cannot add an existing edge")
        kept = keys[~np.isin(keys, rk, assume_unique=True)]
        allk = np.concatenate([kept, ak])
        return DeviceGraph(n, np.stack([allk // n, allk % n], axis=1), self._device_ids)

    def relabeled(self, device_ids: Sequence[str]) -> DeviceGraph:
        return DeviceGraph(self._n, self._edges, device_ids)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense boolean matrix; only sensible for small graphs."""
        a = np.zeros((self._n, self._n), dtype=bool)
        a[self._edges[:, 0], self._edges[:, 1]] = True
        a[self._edges[:, 1], self._edges[:, 0]] = True
        return a

    @classmethod
    def from_adjacency(cls, matrix, device_ids: Sequence[str] | None = None) -> DeviceGraph:
        a = np.asarray(matrix, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise UsageError("adjacency matrix must be square")
        if np.any(a != a.T) or np.any(np.diag(a)):
            raise UsageError("adjacency matrix must be symmetric with zero diagonal")
        u, v = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], np.stack([u, v], axis=1), device_ids)

    # -- dunder ----------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeviceGraph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._edges, other._edges)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"DeviceGraph(n={self._n}, edges={self.num_edges})"


class NodeRow:
    """Row ``A(u)`` of the adjacency relation, as a set of neighbor ids."""

    __slots__ = ("owner", "bits")

    def __init__(self, owner: int, bits: frozenset[int]):
        self.owner = owner
        self.bits = bits

    def __contains__(self, v: int) -> bool:
        return v in self.bits

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeRow):
            return NotImplemented
        return self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)


def degree(g: DeviceGraph, v: int) -> int:
    return g.degree(v)


def similarity(g: DeviceGraph, u: int, v: int) -> int:
    """Number of common direct neighbors of ``u`` and ``v`` (row inner product)."""
    return int(np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True).size)


def hamming_distance(a: DeviceGraph, b: DeviceGraph) -> int:
    """Ordered-pair count of disagreeing adjacency entries (twice the edge edits)."""
    if a.n != b.n:
        raise UsageError(f"size mismatch: {a.n} vs {b.n}")
    diff = np.setxor1d(a.edge_keys(), b.edge_keys(), assume_unique=True)
    return 2 * int(diff.size)


def common_edges(a: DeviceGraph, b: DeviceGraph) -> int:
    """Undirected edges present in both graphs under the identity alignment."""
    if a.n != b.n:
        raise UsageError(f"size mismatch: {a.n} vs {b.n}")
    return int(np.intersect1d(a.edge_keys(), b.edge_keys(), assume_unique=True).size)


def row_fingerprint(g: DeviceGraph, v: int) -> int:
    """Stable 64-bit digest of the sorted neighbor list of ``v``.

    Equal rows always collide; callers must confirm unequal-looking matches
    by comparing the rows themselves.
    """
    row = np.ascontiguousarray(g.neighbors(v), dtype="<i8")
    return int.from_bytes(hashlib.blake2b(row.tobytes(), digest_size=8).digest(), "little")


class BitRows:
    """Rows of a graph packed into ``uint64`` words for popcount similarity."""

    __slots__ = ("n", "words")

    def __init__(self, g: DeviceGraph):
        self.n = g.n
        width = max(1, (g.n + 63) // 64)
        words = np.zeros((g.n, width), dtype=np.uint64)
        e = g.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        bits = np.left_shift(np.uint64(1), (dst & 63).astype(np.uint64))
        np.bitwise_or.at(words, (src, dst >> 6), bits)
        words.setflags(write=False)
        self.words = words

    def mask(self, nodes: Iterable[int]) -> np.ndarray:
        """Packed indicator row of an arbitrary node set."""
        m = np.zeros(self.words.shape[1], dtype=np.uint64)
        idx = np.asarray(list(nodes), dtype=np.int64)
        if idx.size:
            np.bitwise_or.at(m, idx >> 6, np.left_shift(np.uint64(1), (idx & 63).astype(np.uint64)))
        return m

    def overlap(self, rows: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Popcount of ``row & mask`` for each selected row."""
        return np.bitwise_count(self.words[rows] & mask).sum(axis=1, dtype=np.int64)

    def similarity(self, u: int, v: int) -> int:
        return int(np.bitwise_count(self.words[u] & self.words[v]).sum())


# -- file formats ---------------------------------------------------------

def write_graph_text(g: DeviceGraph, path: str | Path) -> None:
    lines = [f"n {g.n}"]
    lines.extend(f"e {u} {v}" for u, v in g.edges.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_text(path: str | Path) -> DeviceGraph:
    n = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "n" and len(parts) == 2 and n is None:
            n = int(parts[1])
        elif parts[0] == "e" and len(parts) == 3 and n is not None:
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise UsageError(f"{path}:{lineno}: cannot parse {raw!r}")
    if n is None:
        raise UsageError(f"{path}: missing 'n <count>' header")
    return DeviceGraph(n, edges)


def write_graph_json(g: DeviceGraph, path: str | Path) -> None:
    doc = {"n": g.n, "device_ids": list(g.device_ids), "edges": g.edges.tolist()}
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")


def read_graph_json(path: str | Path) -> DeviceGraph:
    try:
        doc = json.loads(Path(path).read_text())
        return DeviceGraph(doc["n"], doc["edges"], doc.get("device_ids"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: malformed graph JSON ({exc})") from exc


def read_graph(path: str | Path) -> DeviceGraph:
    """Read either format; ``.json`` selects the labelled variant."""
    if str(path).endswith(".json"):
        return read_graph_json(path)
    return read_graph_text(path)


def write_graph(g: DeviceGraph, path: str | Path) -> None:
    if str(path).endswith(".json"):
        write_graph_json(g, path)
    else:
        write_graph_text(g, path)
