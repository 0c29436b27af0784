"""Planted-structure synthetic data for reproducible pipeline checks.

Features are partitioned into mutually exclusive groups (true latent colors):
an example activates at most one feature per chosen group, so the group
partition is a proper coloring of the resulting co-occurrence graph.  Labels
follow a logistic model over group presences plus per-feature effects, with
optional flip noise; within a group, features are drawn zipf-like so value
frequencies have a heavy head and a long tail.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .dataset import Example, SparseDataset


@dataclass(frozen=True)
class SyntheticConfig:
    groups: int = 64
    features_per_group: int = 1563
    n: int = 200_000
    nnz_max: int = 10
    zipf_exponent: float = 1.3
    group_effect_scale: float = 1.2
    value_effect_scale: float = 0.6
    intercept: float = -0.3
    flip_prob: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def generate(cfg: SyntheticConfig) -> SparseDataset:
    """Draw a dataset from the planted model; deterministic given the config."""
    if cfg.groups < 1 or cfg.features_per_group < 1 or cfg.n < 1:
        raise ValueError("groups, features_per_group and n must be positive")
    if not (1 <= cfg.nnz_max <= cfg.groups):
        raise ValueError(f"nnz_max must be in [1, groups], got {cfg.nnz_max}")
    rng = np.random.default_rng(cfg.seed)
    g, fpg, n = cfg.groups, cfg.features_per_group, cfg.n

    group_effect = rng.normal(0.0, cfg.group_effect_scale, size=g)
    value_effect = rng.normal(0.0, cfg.value_effect_scale, size=g * fpg)

    # zipf-like inverse CDF over within-group value indices
    pmf = 1.0 / np.arange(1, fpg + 1, dtype=np.float64) ** cfg.zipf_exponent
    cdf = np.cumsum(pmf / pmf.sum())

    t = rng.integers(1, cfg.nnz_max + 1, size=n)
    scores = rng.random((n, g))
    top = np.argsort(scores, axis=1)[:, : cfg.nnz_max]
    picks = np.searchsorted(cdf, rng.random((n, cfg.nnz_max)))

    z = np.full(n, cfg.intercept, dtype=np.float64)
    examples = []
    base = np.int64(fpg)
    for i in range(n):
        ti = t[i]
        gs = top[i, :ti]
        fids = gs * base + picks[i, :ti] + 1  # ids are 1-based
        z[i] += group_effect[gs].sum() + value_effect[fids - 1].sum()
        fids.sort()
        examples.append((int(t[i]), fids))

    p = 1.0 / (1.0 + np.exp(-z))
    y = (rng.random(n) < p).astype(np.int8)
    if cfg.flip_prob > 0:
        flip = rng.random(n) < cfg.flip_prob
        y[flip] = 1 - y[flip]

    rows = [Example(int(y[i]), tuple(int(f) for f in fids)) for i, (_, fids) in enumerate(examples)]
    return SparseDataset.from_examples(rows)
