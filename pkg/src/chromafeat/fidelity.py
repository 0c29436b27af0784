"""Diagnostics for how faithfully a colored graph represents unseen data.

The edge-multiplicity histogram yields a Good-Turing style estimate of how
many never-seen co-occurrences an unseen example introduces; together with
degree statistics of the filtered graph it prices the number of colors a
uniform coloring needs for a target fidelity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

from .coloring import Coloring, filter_high_degree, greedy_color
from .dataset import Example, SparseDataset
from .graph import CooccurrenceGraph, EdgeHistogram, count_edges


def good_turing(hist: EdgeHistogram, k: int) -> int:
    """N_k = sum_{j<=k} j * f(j): total occurrences of edges seen at most k times.

    Equals the leave-one-out count sum_i |K(T_i) \\ E_i^(k)| exactly; divide
    by the number of training examples for the per-example estimate.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return sum(j * c for j, c in hist.counts.items() if j <= k)


def collision_count(c: Coloring, ex: Example) -> int:
    """|T ∩ dom(c)| - |c(T ∩ dom(c))|: colored active features minus distinct colors."""
    cmap = c.color_of
    seen = set()
    colored = 0
    for f in ex.active:
        col = cmap.get(f)
        if col is not None:
            colored += 1
            seen.add(col)
    return colored - len(seen)


def unseen_feature_count(c: Coloring, ex: Example) -> int:
    """Active features absent from the coloring's domain (tallied separately)."""
    cmap = c.color_of
    return sum(1 for f in ex.active if f not in cmap)


def new_edge_count(g: CooccurrenceGraph, ex: Example) -> int:
    """|K(T) \\ E|: active-feature pairs that are not edges of ``g``."""
    act = ex.active
    idx = []
    for f in act:
        try:
            idx.append(g.index_of(f))
        except Exception:
            idx.append(-1)  # unseen vertex: none of its pairs are edges
    count = 0
    la = len(act)
    for i in range(la - 1):
        for j in range(i + 1, la):
            if idx[i] < 0 or idx[j] < 0 or not g.has_edge_indices(idx[i], idx[j]):
                count += 1
    return count


def required_colors(
    w_size: int,
    delta_f: int,
    n_f: float,
    n: int,
    k: int,
    eta: int,
    delta: float = 0.01,
    ceil: bool = True,
):
    """Color budget for target fidelity at confidence 1 - delta.

    m_f = |W| + 2*delta_f + n_f/n + k * eta^2 * ln(1/delta) / sqrt(n).
    The Lipschitz scale of the approximated function cancels; natural logs.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must be in (0,1), got {delta}")
    raw = w_size + 2.0 * delta_f + n_f / n + k * (eta**2) * math.log(1.0 / delta) / math.sqrt(n)
    return math.ceil(raw) if ceil else raw


@dataclass
class FidelityRow:
    k: int
    edge_count: int
    max_degree: int
    n_k: int
    n_k_per_example: float
    new_edge_mean: float
    avg_collisions: float
    unseen_feature_rate: float
    w_size: int
    delta_f: int
    n_f_per_example: float
    m_f_raw: float
    m_f: int


@dataclass
class FidelityReport:
    n_train: int
    n_test: int
    eta: int
    delta: float
    rows: list[FidelityRow]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_train": self.n_train,
                "n_test": self.n_test,
                "eta": self.eta,
                "delta": self.delta,
                "rows": [asdict(r) for r in self.rows],
            },
            indent=2,
            sort_keys=True,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def build_fidelity_report(
    train: SparseDataset,
    test: SparseDataset,
    ks=(1, 2, 3),
    delta: float = 0.01,
    coloring_order="id",
    workers: int = 1,
) -> FidelityReport:
    """Per-threshold fidelity diagnostics of the training co-occurrence graph.

    For each k: the thresholded graph's size and max degree, the estimated
    (N_k / n) and empirical held-out new-edge rates, average test collision
    count under a greedy training coloring, and the filtered color budget.
    """
    ec = count_edges(train, workers=workers)
    hist = ec.histogram()
    vertices = list(train.feature_freq.keys())
    rows = []
    for k in sorted(ks):
        if k < 1:
            raise ValueError(f"threshold k must be >= 1, got {k}")
        gk = ec.thresholded(k, vertices)
        coloring = greedy_color(gk, order=coloring_order, popularity=train.feature_freq)
        n_k = good_turing(hist, k)
        new_edges = 0
        collisions = 0
        unseen = 0
        for ex in test.examples:
            new_edges += new_edge_count(gk, ex)
            collisions += collision_count(coloring, ex)
            unseen += unseen_feature_count(coloring, ex)
        fr = filter_high_degree(gk)
        in_w = set(fr.held_out)
        n_f = 0
        for u, v, c in zip(ec.u, ec.v, ec.counts):
            if c <= k and int(u) not in in_w and int(v) not in in_w:
                n_f += int(c)
        m_f_raw = required_colors(
            len(fr.held_out), fr.delta_f, n_f, train.n, k, train.eta, delta, ceil=False
        )
        n_test = max(test.n, 1)
        rows.append(
            FidelityRow(
                k=k,
                edge_count=gk.edge_count,
                max_degree=gk.max_degree,
                n_k=n_k,
                n_k_per_example=n_k / train.n,
                new_edge_mean=new_edges / n_test,
                avg_collisions=collisions / n_test,
                unseen_feature_rate=unseen / n_test,
                w_size=len(fr.held_out),
                delta_f=fr.delta_f,
                n_f_per_example=n_f / train.n,
                m_f_raw=m_f_raw,
                m_f=math.ceil(m_f_raw),
            )
        )
    return FidelityReport(train.n, test.n, train.eta, delta, rows)
