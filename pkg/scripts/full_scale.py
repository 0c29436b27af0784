#!/usr/bin/env python3
"""Full-scale benchmark runs: graph stats, greedy colors, and test collisions.

Non-gating companion to the acceptance suite.  Downloads the public sparse
benchmarks, builds the co-occurrence graph of the chronological training
split, colors it greedily in data order, and compares against the reference
figures below: color count within 2x (the published greedy's visit order is
not specified, so counts are not bit-reproducible) and average test collision
count within +-0.1.

These datasets are large (kdd12 is ~23 GB of text with 50M features); expect
tens to hundreds of GB of RAM and hours of runtime.  Run on a single big
machine, one dataset at a time:

    python scripts/full_scale.py --dataset url --work-dir /data/bench
"""

import argparse
import sys
import time
import urllib.request
from pathlib import Path

from chromafeat.dataset import parse_libsvm, split_at
from chromafeat.fidelity import collision_count, unseen_feature_count
from chromafeat.graph import build_cooccurrence, degree_stats
from chromafeat.coloring import greedy_color

BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary"

DATASETS = {
    # name: (files, train_count, expected_colors, expected_cc)
    "url": ((f"{BASE}/url_combined.bz2",), 1_677_291, 395, 0.40),
    "kdda": ((f"{BASE}/kdda.bz2", f"{BASE}/kdda.t.bz2"), None, 103, 0.30),
    "kddb": ((f"{BASE}/kddb.bz2", f"{BASE}/kddb.t.bz2"), None, 79, 0.21),
    "kdd12": ((f"{BASE}/kdd12.bz2",), 119_705_032, 22, 0.09),
}


def fetch(url: str, work_dir: Path) -> Path:
    dest = work_dir / url.rsplit("/", 1)[1]
    if dest.exists():
        print(f"have {dest}")
        return dest
    print(f"downloading {url} ...")
    urllib.request.urlretrieve(url, dest)
    return dest


def run(name: str, work_dir: Path, workers: int) -> bool:
    files, train_count, want_colors, want_cc = DATASETS[name]
    work_dir.mkdir(parents=True, exist_ok=True)
    paths = [fetch(u, work_dir) for u in files]

    t0 = time.time()
    if len(paths) == 2:
        train = parse_libsvm(paths[0])
        test = parse_libsvm(paths[1])
    else:
        full = parse_libsvm(paths[0])
        train, test = split_at(full, train_count)
        del full
    print(f"parsed: train n={train.n} test n={test.n} ({time.time() - t0:.0f}s)")

    t0 = time.time()
    graph, hist = build_cooccurrence(train, workers=workers)
    stats = degree_stats(graph, hist, train.n)
    print(f"graph: {stats} ({time.time() - t0:.0f}s)")

    t0 = time.time()
    coloring = greedy_color(graph, order=list(train.feature_freq.keys()),
                            popularity=train.feature_freq)
    print(f"colors: {coloring.m} ({time.time() - t0:.0f}s)")

    t0 = time.time()
    total_cc = sum(collision_count(coloring, ex) for ex in test.examples)
    total_unseen = sum(unseen_feature_count(coloring, ex) for ex in test.examples)
    cc = total_cc / test.n
    print(f"avg test CC: {cc:.3f} (unseen feature rate {total_unseen / test.n:.3f}) "
          f"({time.time() - t0:.0f}s)")

    ok_colors = want_colors / 2 <= coloring.m <= want_colors * 2
    ok_cc = abs(cc - want_cc) <= 0.1
    print(f"{name}: colors {coloring.m} vs reference {want_colors} "
          f"(within 2x: {ok_colors}); CC {cc:.3f} vs {want_cc} (within 0.1: {ok_cc})")
    return ok_colors and ok_cc


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", choices=sorted(DATASETS), required=True)
    ap.add_argument("--work-dir", type=Path, default=Path("full_scale_data"))
    ap.add_argument("--workers", type=int, default=8)
    args = ap.parse_args()
    return 0 if run(args.dataset, args.work_dir, args.workers) else 1


if __name__ == "__main__":
    sys.exit(main())
