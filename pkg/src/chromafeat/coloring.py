"""Proper colorings of co-occurrence graphs.

Three routes: first-fit greedy (cheap, few colors), and for distribution-free
collision guarantees the peel-and-sample pipeline: largest-first ordering,
high-degree vertex filtering, uniform sampling via single-site Glauber
dynamics, and recombination with fresh colors for the held-out vertices.
"""

from __future__ import annotations

import heapq
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import CooccurrenceGraph, GraphError, to_adjacency

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_COLORING_MAGIC = b"CFCL0001"


class ColoringError(ValueError):
    pass


@dataclass
class Coloring:
    """A proper vertex coloring plus per-feature training popularity."""

    color_of: dict[int, int]
    m: int
    popularity: dict[int, int] = field(default_factory=dict)

    def colors_of(self, fids: Iterable[int]) -> list[int]:
        return [self.color_of[f] for f in fids]


def check_proper(coloring: Coloring, g: CooccurrenceGraph) -> bool:
    """Edge-by-edge properness check against ``g``."""
    cmap = coloring.color_of
    for i in range(g.vertex_count):
        u = int(g.ids[i])
        cu = cmap[u]
        for j in g.neighbor_indices(i):
            if j > i and cmap[int(g.ids[j])] == cu:
                return False
    return True


def _resolve_order(g: CooccurrenceGraph, order) -> np.ndarray:
    """Vertex visit order as indices.  Accepts 'id', 'degree', or an id sequence."""
    if isinstance(order, str):
        if order == "id":
            return np.arange(g.vertex_count, dtype=np.int64)
        if order == "degree":
            deg = g.degrees
            return np.lexsort((g.ids, -deg)).astype(np.int64)
        raise ColoringError(f"unknown order {order!r}")
    seq = np.fromiter((f for f in order), dtype=np.uint64)
    idx = np.searchsorted(g.ids, seq)
    ok = (idx < g.vertex_count) & (g.ids[np.minimum(idx, g.vertex_count - 1)] == seq)
    idx = idx[ok]
    # keep first occurrence only, then append any vertices the order missed
    seen = np.zeros(g.vertex_count, dtype=bool)
    out = []
    for i in idx:
        if not seen[i]:
            seen[i] = True
            out.append(i)
    for i in range(g.vertex_count):
        if not seen[i]:
            out.append(i)
    return np.asarray(out, dtype=np.int64)


def greedy_color(
    g: CooccurrenceGraph,
    order="id",
    popularity: dict[int, int] | None = None,
) -> Coloring:
    """First-fit greedy coloring in the given vertex order.

    Each vertex takes the smallest color absent from its already-colored
    neighbors, so at most max_degree + 1 colors are used.  Deterministic
    given the order.  ``order`` is ``'id'`` (ascending feature id),
    ``'degree'`` (degree descending, ties by id), or an explicit id sequence
    such as a dataset's first-seen feature order.
    """
    nv = g.vertex_count
    visit = _resolve_order(g, order)
    colors = np.full(nv, -1, dtype=np.int64)
    used = np.full(max(nv, 1), -1, dtype=np.int64)  # stamped by visit step
    indptr, nbr = g.indptr, g.nbr
    for step in range(nv):
        i = visit[step]
        for j in nbr[indptr[i] : indptr[i + 1]]:
            cj = colors[j]
            if cj >= 0:
                used[cj] = step
        c = 0
        while used[c] == step:
            c += 1
        colors[i] = c
    m = int(colors.max()) + 1 if nv else 0
    cmap = {int(f): int(c) for f, c in zip(g.ids, colors)}
    return Coloring(cmap, m, dict(popularity) if popularity else {})


# ---------------------------------------------------------------------------
# largest-first ordering and high-degree filtering

def _peel_largest_first(g: CooccurrenceGraph) -> tuple[list[int], list[int]]:
    """Peel vertices by current max degree (ties: smallest id).

    Returns (order as vertex indices, degree of each pick at selection time).
    The pick degree at step t equals the max degree of the graph induced by
    the not-yet-peeled suffix.
    """
    nv = g.vertex_count
    deg = g.degrees.astype(np.int64).copy()
    removed = np.zeros(nv, dtype=bool)
    heap = [(-int(deg[i]), int(g.ids[i]), i) for i in range(nv)]
    heapq.heapify(heap)
    order: list[int] = []
    pick_deg: list[int] = []
    indptr, nbr = g.indptr, g.nbr
    while heap:
        negd, _, i = heapq.heappop(heap)
        if removed[i] or deg[i] != -negd:
            continue  # stale entry
        removed[i] = True
        order.append(i)
        pick_deg.append(-negd)
        for j in nbr[indptr[i] : indptr[i + 1]]:
            if not removed[j]:
                deg[j] -= 1
                heapq.heappush(heap, (-int(deg[j]), int(g.ids[j]), int(j)))
    return order, pick_deg


def largest_first_order(g: CooccurrenceGraph) -> list[int]:
    """Vertex ids ordered so each has max degree in the suffix it starts."""
    order, _ = _peel_largest_first(g)
    return [int(g.ids[i]) for i in order]


@dataclass
class FilterResult:
    """Held-out high-degree prefix W and the induced remainder graph."""

    held_out: list[int]
    filtered_graph: CooccurrenceGraph
    delta_f: int


def induced_subgraph(g: CooccurrenceGraph, drop: Iterable[int]) -> CooccurrenceGraph:
    """Induced subgraph after removing the ``drop`` feature ids."""
    drop_idx = {g.index_of(f) for f in drop}
    keep = np.ones(g.vertex_count, dtype=bool)
    for i in drop_idx:
        keep[i] = False
    src = np.repeat(np.arange(g.vertex_count, dtype=np.int64), g.degrees)
    mask = keep[src] & keep[g.nbr] & (g.nbr > src)
    return to_adjacency(
        (g.ids[src[mask]], g.ids[g.nbr[mask]]),
        g.ids[keep],
        k=g.k,
    )


def filter_high_degree(g: CooccurrenceGraph) -> FilterResult:
    """Smallest largest-first prefix W with |W| >= 2 * max degree of the rest."""
    order, pick_deg = _peel_largest_first(g)
    nv = g.vertex_count
    w = nv  # whole graph held out always qualifies (remainder empty)
    for t in range(nv):
        if t >= 2 * pick_deg[t]:  # pick_deg[t] = Delta of graph minus first t picks
            w = t
            break
    held = [int(g.ids[i]) for i in order[:w]]
    sub = induced_subgraph(g, held)
    delta_f = sub.max_degree
    assert w >= 2 * delta_f
    return FilterResult(held, sub, delta_f)


# ---------------------------------------------------------------------------
# Glauber dynamics

def _glauber_steps_py(indptr, nbr, colors, m, nv, u_vert, u_color, used, stamp):
    """One batch of single-site updates; u_vert/u_color are uniform [0,1) draws."""
    for t in range(u_vert.size):
        v = int(u_vert[t] * nv)
        stamp += 1
        blocked = 0
        for p in range(indptr[v], indptr[v + 1]):
            c = colors[nbr[p]]
            if used[c] != stamp:
                used[c] = stamp
                blocked += 1
        r = int(u_color[t] * (m - blocked))
        for c in range(m):
            if used[c] != stamp:
                if r == 0:
                    colors[v] = c
                    break
                r -= 1
    return stamp


if _HAVE_NUMBA:
    _glauber_steps = numba.njit(cache=True)(_glauber_steps_py)
else:  # pragma: no cover - numba is a declared dependency
    _glauber_steps = _glauber_steps_py


_GLAUBER_CHUNK = 1 << 20


def glauber_sample(
    g: CooccurrenceGraph,
    m: int,
    steps: int,
    seed: int,
    check_every: int = 0,
) -> Coloring:
    """Sample a proper m-coloring by single-site Glauber dynamics.

    Starts from a first-fit greedy coloring; each step picks a uniform vertex
    and resamples its color uniformly among colors unused by its neighbors.
    Every intermediate state is proper.  Deterministic given ``seed`` (the
    random stream is drawn from numpy's PCG64, independent of the compiled
    backend).  ``check_every`` > 0 re-validates properness periodically.
    """
    delta = g.max_degree
    if m < delta + 1:
        raise ColoringError(f"m={m} < max_degree+1={delta + 1}: proper colorings unreachable")
    if m <= 2 * delta:
        warnings.warn(
            f"m={m} <= 2*max_degree={2 * delta}: uniform mixing is not guaranteed",
            RuntimeWarning,
            stacklevel=2,
        )
    init = greedy_color(g)
    nv = g.vertex_count
    if nv == 0 or steps == 0:
        return init
    colors = np.fromiter((init.color_of[int(f)] for f in g.ids), dtype=np.int64, count=nv)
    used = np.zeros(m, dtype=np.int64)
    stamp = 0
    rng = np.random.default_rng(seed)
    done = 0
    next_check = check_every if check_every > 0 else steps + 1
    while done < steps:
        chunk = min(_GLAUBER_CHUNK, steps - done, next_check - done)
        u = rng.random(2 * chunk)
        stamp = _glauber_steps(g.indptr, g.nbr, colors, m, nv, u[:chunk], u[chunk:], used, stamp)
        done += chunk
        if done >= next_check:
            snapshot = Coloring({int(f): int(c) for f, c in zip(g.ids, colors)}, m)
            if not check_proper(snapshot, g):
                raise ColoringError(f"improper state after {done} steps")
            next_check += check_every
    cmap = {int(f): int(c) for f, c in zip(g.ids, colors)}
    m_used = int(colors.max()) + 1
    return Coloring(cmap, m_used)


def combine_filtered_coloring(fr: FilterResult, inner: Coloring) -> Coloring:
    """Give every held-out vertex a fresh color above the inner coloring's range."""
    for i in range(fr.filtered_graph.vertex_count):
        if int(fr.filtered_graph.ids[i]) not in inner.color_of:
            raise ColoringError(
                f"inner coloring does not cover vertex {int(fr.filtered_graph.ids[i])}"
            )
    cmap = dict(inner.color_of)
    for pos, fid in enumerate(fr.held_out):
        cmap[fid] = inner.m + pos
    return Coloring(cmap, inner.m + len(fr.held_out), dict(inner.popularity))


# ---------------------------------------------------------------------------
# export/import

def save_coloring(c: Coloring, path) -> None:
    """magic | n u64 | (vertex id u64, color u32) pairs, little-endian."""
    items = sorted(c.color_of.items())
    with open(path, "wb") as f:
        f.write(_COLORING_MAGIC)
        f.write(struct.pack("<Q", len(items)))
        for fid, col in items:
            f.write(struct.pack("<QI", fid, col))


def save_coloring_summary(c: Coloring, path, **extra) -> None:
    payload = {"m": c.m, "vertices": len(c.color_of)}
    payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_coloring(path, popularity: dict[int, int] | None = None) -> Coloring:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _COLORING_MAGIC:
            raise ColoringError(f"bad coloring magic {magic!r}")
        (n,) = struct.unpack("<Q", f.read(8))
        cmap = {}
        for _ in range(n):
            fid, col = struct.unpack("<QI", f.read(12))
            cmap[fid] = col
    m = max(cmap.values()) + 1 if cmap else 0
    return Coloring(cmap, m, dict(popularity) if popularity else {})
