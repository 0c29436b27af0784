"""Feature co-occurrence graphs with bounded-memory parallel construction.

Every pair of features active in the same training example is an edge; the
graph at threshold k keeps the edges observed in at least k examples.  The
builder shards the edge hash space into W = shard_factor * workers global
count tables; workers buffer edges locally per shard and merge a full buffer
under that shard's lock only, so no worker ever blocks on more than one
shard at a time and local memory stays O(W * buffer_capacity).
"""

from __future__ import annotations

import json
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import SparseDataset
from .hashing import hash_pair, mix64

_GRAPH_MAGIC = b"CFGR0001"
DEFAULT_BUFFER_CAPACITY = 4096


class GraphError(ValueError):
    pass


class GraphBuildError(GraphError):
    """Build aborted; carries the number of distinct edges reached."""

    def __init__(self, message: str, edges_reached: int):
        super().__init__(f"{message} (distinct edges reached: {edges_reached})")
        self.edges_reached = edges_reached


@dataclass
class EdgeHistogram:
    """counts[j] = number of distinct edges occurring in exactly j examples."""

    counts: dict[int, int]

    @property
    def distinct_edges(self) -> int:
        return sum(self.counts.values())

    @property
    def total_occurrences(self) -> int:
        return sum(j * c for j, c in self.counts.items())

    def edges_at_least(self, k: int) -> int:
        return sum(c for j, c in self.counts.items() if j >= k)


class CooccurrenceGraph:
    """Immutable undirected graph in CSR form over sorted 64-bit feature ids."""

    __slots__ = ("ids", "indptr", "nbr", "k")

    def __init__(self, ids: np.ndarray, indptr: np.ndarray, nbr: np.ndarray, k: int = 1):
        self.ids = ids          # sorted unique vertex ids, uint64
        self.indptr = indptr    # int64, len |V|+1
        self.nbr = nbr          # int64 vertex *indices*, sorted within each slice
        self.k = k

    @property
    def vertex_count(self) -> int:
        return int(self.ids.size)

    @property
    def edge_count(self) -> int:
        return int(self.nbr.size // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.vertex_count else 0

    def index_of(self, fid: int) -> int:
        i = int(np.searchsorted(self.ids, fid))
        if i >= self.ids.size or int(self.ids[i]) != fid:
            raise GraphError(f"unknown vertex {fid}")
        return i

    def contains_vertex(self, fid: int) -> bool:
        i = np.searchsorted(self.ids, fid)
        return i < self.ids.size and int(self.ids[i]) == fid

    def neighbor_indices(self, i: int) -> np.ndarray:
        return self.nbr[self.indptr[i] : self.indptr[i + 1]]

    def adj_ids(self, fid: int) -> np.ndarray:
        """Sorted neighbor feature ids of ``fid``."""
        return self.ids[self.neighbor_indices(self.index_of(fid))]

    def has_edge_indices(self, i: int, j: int) -> bool:
        sl = self.neighbor_indices(i)
        p = np.searchsorted(sl, j)
        return p < sl.size and int(sl[p]) == j

    def has_edge(self, u: int, v: int) -> bool:
        if not (self.contains_vertex(u) and self.contains_vertex(v)):
            return False
        return self.has_edge_indices(self.index_of(u), self.index_of(v))

    def edge_id_pairs(self) -> Iterable[tuple[int, int]]:
        """Yield canonical (u < v) edges as feature-id pairs."""
        for i in range(self.vertex_count):
            u = int(self.ids[i])
            for j in self.neighbor_indices(i):
                if j > i:
                    yield (u, int(self.ids[j]))


# ---------------------------------------------------------------------------
# sharded multiplicity counting

@dataclass
class EdgeCounts:
    """Exact edge multiplicities over the training multiset of pair sets."""

    u: np.ndarray        # uint64, canonical u < v
    v: np.ndarray
    counts: np.ndarray   # int64

    def histogram(self) -> EdgeHistogram:
        if self.counts.size == 0:
            return EdgeHistogram({})
        js, cs = np.unique(self.counts, return_counts=True)
        return EdgeHistogram({int(j): int(c) for j, c in zip(js, cs)})

    def thresholded(self, k: int, vertices: Iterable[int]) -> CooccurrenceGraph:
        keep = self.counts >= k
        return to_adjacency(
            (self.u[keep], self.v[keep]), vertices, k=k
        )


def _count_edges_sharded(
    train: SparseDataset,
    workers: int,
    shard_factor: int,
    buffer_capacity: int,
    restrict: Sequence[set] | None = None,
) -> list[dict[tuple[int, int], int]]:
    """The shard-and-merge counting pass shared by all build modes.

    ``restrict``: optional per-shard candidate sets; pairs not present are
    skipped (used by the bloom second pass, where candidates are exact-checked).
    """
    if workers < 1:
        raise GraphError(f"workers must be >= 1, got {workers}")
    if shard_factor < 1:
        raise GraphError(f"shard_factor must be >= 1, got {shard_factor}")
    n_shards = workers * shard_factor
    shards: list[dict[tuple[int, int], int]] = [{} for _ in range(n_shards)]
    locks = [threading.Lock() for _ in range(n_shards)]
    failure: list[BaseException] = []

    def flush(shard: int, buf: list) -> None:
        with locks[shard]:
            table = shards[shard]
            get = table.get
            for key in buf:
                table[key] = get(key, 0) + 1
        buf.clear()

    def run(chunk: list) -> None:
        buffers: list[list] = [[] for _ in range(n_shards)]
        try:
            for ex in chunk:
                act = ex.active
                la = len(act)
                for i in range(la - 1):
                    u = act[i]
                    for j in range(i + 1, la):
                        key = (u, act[j])
                        s = hash_pair(u, act[j]) % n_shards
                        if restrict is not None and key not in restrict[s]:
                            continue
                        buf = buffers[s]
                        buf.append(key)
                        if len(buf) >= buffer_capacity:
                            flush(s, buf)
            for s, buf in enumerate(buffers):
                if buf:
                    flush(s, buf)
        except MemoryError as exc:
            failure.append(exc)

    if workers == 1:
        run(train.examples)
    else:
        step = (train.n + workers - 1) // workers
        chunks = [train.examples[i : i + step] for i in range(0, train.n, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, chunks))
    if failure:
        raise GraphBuildError("out of memory while counting edges", sum(len(s) for s in shards))
    return shards


def _shards_to_arrays(shards: list[dict]) -> EdgeCounts:
    total = sum(len(s) for s in shards)
    u = np.empty(total, dtype=np.uint64)
    v = np.empty(total, dtype=np.uint64)
    c = np.empty(total, dtype=np.int64)
    pos = 0
    for s in shards:
        for (a, b), cnt in s.items():
            u[pos] = a
            v[pos] = b
            c[pos] = cnt
            pos += 1
    order = np.lexsort((v, u))
    return EdgeCounts(u[order], v[order], c[order])


def count_edges(
    train: SparseDataset,
    workers: int = 1,
    shard_factor: int = 1,
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY,
) -> EdgeCounts:
    """Exact multiplicity of every co-occurrence edge, in canonical order."""
    shards = _count_edges_sharded(train, workers, shard_factor, buffer_capacity)
    return _shards_to_arrays(shards)


def build_cooccurrence(
    train: SparseDataset,
    workers: int = 1,
    shard_factor: int = 1,
    buffer_capacity: int = DEFAULT_BUFFER_CAPACITY,
) -> tuple[CooccurrenceGraph, EdgeHistogram]:
    """Build the k=1 graph and the exact edge-multiplicity histogram.

    The result is independent of ``workers`` and scheduling: shard merges
    only add, and the final adjacency is canonically sorted.
    """
    ec = count_edges(train, workers, shard_factor, buffer_capacity)
    graph = to_adjacency((ec.u, ec.v), train.feature_freq.keys(), k=1, workers=workers)
    return graph, ec.histogram()


# ---------------------------------------------------------------------------
# bloom-filtered threshold build

class BloomFilter:
    """Plain bloom filter over 64-bit keys (double hashing, bit array)."""

    def __init__(self, expected: int, fp_rate: float):
        if not (0.0 < fp_rate < 1.0):
            raise GraphError(f"bloom fp_rate must be in (0,1), got {fp_rate}")
        expected = max(1, expected)
        bits = int(np.ceil(-expected * np.log(fp_rate) / (np.log(2) ** 2)))
        self.n_bits = max(64, bits)
        self.n_hashes = max(1, round(self.n_bits / expected * np.log(2)))
        self._arr = np.zeros((self.n_bits + 63) // 64, dtype=np.uint64)

    def _positions(self, key: int):
        h1 = mix64(key)
        h2 = mix64(h1 ^ 0xA5A5A5A5A5A5A5A5) | 1
        for i in range(self.n_hashes):
            yield ((h1 + i * h2) & 0xFFFFFFFFFFFFFFFF) % self.n_bits

    def add(self, key: int) -> None:
        arr = self._arr
        for p in self._positions(key):
            arr[p >> 6] |= np.uint64(1 << (p & 63))

    def __contains__(self, key: int) -> bool:
        arr = self._arr
        for p in self._positions(key):
            if not (int(arr[p >> 6]) >> (p & 63)) & 1:
                return False
        return True


def build_thresholded(
    train: SparseDataset,
    k: int,
    mode: str = "exact",
    fp_rate: float = 0.01,
    expected_edges: int | None = None,
    workers: int = 1,
    shard_factor: int = 1,
) -> CooccurrenceGraph:
    """Build G at threshold k >= 2: edges seen in at least k examples.

    ``exact`` counts multiplicities directly.  ``bloom`` runs a preliminary
    pass through k rolling bloom filters (an edge present in filter j rolls
    into filter j+1), then an exact counting pass restricted to survivors of
    filter k, so the final edge set is exact regardless of false positives.
    """
    if k < 2:
        raise GraphError(f"threshold k must be >= 2, got {k} (use build_cooccurrence for k=1)")
    if mode == "exact":
        ec = count_edges(train, workers, shard_factor)
        return ec.thresholded(k, train.feature_freq.keys())
    if mode != "bloom":
        raise GraphError(f"unknown mode {mode!r}")

    if expected_edges is None:
        expected_edges = sum(
            len(ex.active) * (len(ex.active) - 1) // 2 for ex in train.examples
        )
    filters = [BloomFilter(expected_edges, fp_rate) for _ in range(k)]
    for ex in train.examples:
        act = ex.active
        la = len(act)
        for i in range(la - 1):
            for j in range(i + 1, la):
                key = hash_pair(act[i], act[j])
                for f in filters:
                    if key in f:
                        continue
                    f.add(key)
                    break

    survivor = filters[-1]
    n_shards = workers * shard_factor
    restrict: list[set] = [set() for _ in range(n_shards)]
    seen: set[tuple[int, int]] = set()
    for ex in train.examples:
        act = ex.active
        la = len(act)
        for i in range(la - 1):
            for j in range(i + 1, la):
                pair = (act[i], act[j])
                if pair in seen:
                    continue
                seen.add(pair)
                if hash_pair(*pair) in survivor:
                    restrict[hash_pair(*pair) % n_shards].add(pair)
    del seen
    shards = _count_edges_sharded(train, workers, shard_factor, DEFAULT_BUFFER_CAPACITY, restrict)
    ec = _shards_to_arrays(shards)
    return ec.thresholded(k, train.feature_freq.keys())


# ---------------------------------------------------------------------------
# adjacency conversion (two sweeps: degree count, prefix sum, fill)

def to_adjacency(
    edges,
    vertices: Iterable[int],
    k: int = 1,
    workers: int = 1,
) -> CooccurrenceGraph:
    """Convert a canonical edge set plus a vertex set into CSR adjacency.

    ``edges`` is either an iterable of (u, v) pairs or a pair of uint64
    arrays.  Vertices absent from every edge are kept as isolated vertices.
    The two sweeps (degree counting, then offset fill) are chunked across
    ``workers`` threads; per-chunk partials are combined in chunk order, so
    the result is identical to a serial build.
    """
    ids = np.fromiter(vertices, dtype=np.uint64)
    ids = np.unique(ids)
    if isinstance(edges, tuple):
        eu, ev = np.asarray(edges[0], dtype=np.uint64), np.asarray(edges[1], dtype=np.uint64)
    else:
        pairs = list(edges)
        eu = np.fromiter((p[0] for p in pairs), dtype=np.uint64, count=len(pairs))
        ev = np.fromiter((p[1] for p in pairs), dtype=np.uint64, count=len(pairs))
    if eu.size and (eu == ev).any():
        raise GraphError("self-loop in edge set")

    nv = ids.size
    ui = np.searchsorted(ids, eu)
    vi = np.searchsorted(ids, ev)
    if nv == 0:
        if eu.size:
            raise GraphError("edge referencing unknown vertex (empty vertex set)")
        return CooccurrenceGraph(ids, np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int64), k)
    bad = (ui >= nv) | (ids[np.minimum(ui, nv - 1)] != eu) | (vi >= nv) | (ids[np.minimum(vi, nv - 1)] != ev)
    if bad.any():
        culprit = int(eu[bad][0]) if ids[np.minimum(ui, nv - 1)][bad][0] != eu[bad][0] else int(ev[bad][0])
        raise GraphError(f"edge referencing unknown vertex {culprit}")

    src = np.concatenate([ui, vi]).astype(np.int64)
    dst = np.concatenate([vi, ui]).astype(np.int64)

    n_chunks = max(1, min(workers, max(1, src.size)))
    bounds = np.linspace(0, src.size, n_chunks + 1).astype(np.int64)

    def degree_chunk(c: int) -> np.ndarray:
        return np.bincount(src[bounds[c] : bounds[c + 1]], minlength=nv)

    if n_chunks == 1:
        partials = [degree_chunk(0)]
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            partials = list(pool.map(degree_chunk, range(n_chunks)))
    degrees = np.sum(partials, axis=0).astype(np.int64)
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])

    nbr = np.empty(src.size, dtype=np.int64)
    # per-chunk base offsets: exclusive prefix of earlier chunks' counts
    bases = [indptr[:-1].copy()]
    for c in range(1, n_chunks):
        bases.append(bases[-1] + partials[c - 1])

    def fill_chunk(c: int) -> None:
        lo, hi = bounds[c], bounds[c + 1]
        s = src[lo:hi]
        order = np.argsort(s, kind="stable")
        ss = s[order]
        first = np.searchsorted(ss, ss)
        pos = bases[c][ss] + (np.arange(ss.size) - first)
        nbr[pos] = dst[lo:hi][order]

    if n_chunks == 1:
        fill_chunk(0)
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            list(pool.map(fill_chunk, range(n_chunks)))

    # canonical form: sort neighbors within each vertex slice, reject duplicates
    if nbr.size:
        slice_owner = np.repeat(np.arange(nv, dtype=np.int64), degrees)
        order = np.lexsort((nbr, slice_owner))
        nbr = nbr[order]
        dup = (slice_owner[1:] == slice_owner[:-1]) & (nbr[1:] == nbr[:-1])
        if dup.any():
            raise GraphError("duplicate edge in input")
    return CooccurrenceGraph(ids, indptr, nbr, k)


def degree_stats(
    g: CooccurrenceGraph,
    histogram: EdgeHistogram | None = None,
    n_examples: int | None = None,
) -> dict:
    """Degree summary; average degree uses vertices appearing in the data."""
    nv = g.vertex_count
    out = {
        "vertices": nv,
        "edges": g.edge_count,
        "max_degree": g.max_degree,
        "avg_degree": (2.0 * g.edge_count / nv) if nv else 0.0,
        "k": g.k,
    }
    if histogram is not None and n_examples:
        # both conventions: multiset pair occurrences vs distinct new edges
        out["avg_edge_occurrences_per_example"] = histogram.total_occurrences / n_examples
        out["avg_distinct_edges_per_example"] = histogram.distinct_edges / n_examples
    return out


# ---------------------------------------------------------------------------
# binary export/import + JSON stats sidecar

def save_graph(g: CooccurrenceGraph, path) -> None:
    """magic | k u32 | V u64 | directed entry count u64 | ids | degrees | neighbor ids."""
    with open(path, "wb") as f:
        f.write(_GRAPH_MAGIC)
        f.write(struct.pack("<IQQ", g.k, g.vertex_count, g.nbr.size))
        f.write(g.ids.astype("<u8").tobytes())
        f.write(g.degrees.astype("<u8").tobytes())
        f.write(g.ids[g.nbr].astype("<u8").tobytes())


def save_graph_stats(g: CooccurrenceGraph, path, **extra) -> None:
    stats = degree_stats(g)
    stats.update(extra)
    Path(path).write_text(json.dumps(stats, indent=2, sort_keys=True))


def load_graph(path) -> CooccurrenceGraph:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _GRAPH_MAGIC:
            raise GraphError(f"bad graph magic {magic!r}")
        k, nv, ne2 = struct.unpack("<IQQ", f.read(20))
        ids = np.frombuffer(f.read(8 * nv), dtype="<u8").astype(np.uint64)
        degrees = np.frombuffer(f.read(8 * nv), dtype="<u8").astype(np.int64)
        nbr_ids = np.frombuffer(f.read(8 * ne2), dtype="<u8").astype(np.uint64)
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    nbr = np.searchsorted(ids, nbr_ids).astype(np.int64)
    return CooccurrenceGraph(ids, indptr, nbr, k)
