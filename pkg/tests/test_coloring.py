import itertools
import random
import warnings

import numpy as np
import pytest

from chromafeat.coloring import (
    Coloring,
    ColoringError,
    check_proper,
    combine_filtered_coloring,
    filter_high_degree,
    glauber_sample,
    greedy_color,
    induced_subgraph,
    largest_first_order,
    load_coloring,
    save_coloring,
    save_coloring_summary,
)
from chromafeat.graph import build_cooccurrence, to_adjacency
from conftest import random_dataset


def triangle():
    return to_adjacency([(1, 2), (1, 3), (2, 3)], [1, 2, 3])


def star(leaves=5):
    return to_adjacency([(0, i) for i in range(1, leaves + 1)], range(leaves + 1))


def random_graph(rng, nv, ne):
    vertices = list(range(1, nv + 1))
    edges = set()
    ne = min(ne, nv * (nv - 1) // 2)
    while len(edges) < ne:
        u, v = rng.sample(vertices, 2)
        edges.add((min(u, v), max(u, v)))
    return to_adjacency(sorted(edges), vertices)


class TestGreedy:
    def test_triangle_needs_three(self):
        c = greedy_color(triangle())
        assert c.m == 3
        assert check_proper(c, triangle())

    def test_path_first_fit_trace(self):
        g = to_adjacency([(1, 2), (2, 3)], [1, 2, 3])
        c = greedy_color(g, order="id")
        assert (c.color_of[1], c.color_of[2], c.color_of[3]) == (0, 1, 0)
        assert c.m == 2

    def test_at_most_delta_plus_one(self, rng):
        for _ in range(20):
            g = random_graph(rng, rng.randint(2, 40), rng.randint(1, 80))
            for order in ("id", "degree"):
                c = greedy_color(g, order=order)
                assert c.m <= g.max_degree + 1
                assert check_proper(c, g)

    def test_every_vertex_colored(self, rng):
        g = random_graph(rng, 30, 50)
        c = greedy_color(g)
        assert set(c.color_of) == {int(f) for f in g.ids}
        assert c.m == 1 + max(c.color_of.values())

    def test_deterministic_given_order(self, rng):
        g = random_graph(rng, 25, 60)
        assert greedy_color(g, "degree").color_of == greedy_color(g, "degree").color_of

    def test_explicit_data_order(self):
        g = to_adjacency([(1, 2), (2, 3)], [1, 2, 3])
        c = greedy_color(g, order=[3, 2, 1])
        assert (c.color_of[3], c.color_of[2], c.color_of[1]) == (0, 1, 0)

    def test_partial_order_extended(self):
        g = to_adjacency([(1, 2), (2, 3)], [1, 2, 3])
        c = greedy_color(g, order=[2])  # missing vertices appended in id order
        assert check_proper(c, g)

    def test_popularity_carried(self):
        g = to_adjacency([(1, 2)], [1, 2])
        c = greedy_color(g, popularity={1: 10, 2: 3})
        assert c.popularity == {1: 10, 2: 3}


class TestLargestFirst:
    def test_star_center_first(self):
        order = largest_first_order(star())
        assert order[0] == 0

    def test_triangle_tiebreak_by_id(self):
        assert largest_first_order(triangle()) == [1, 2, 3]

    def test_suffix_max_degree_property(self, rng):
        # oracle: recompute degrees in the suffix-induced subgraph directly
        for _ in range(10):
            g = random_graph(rng, rng.randint(2, 25), rng.randint(1, 50))
            order = largest_first_order(g)
            idx = {f: i for i, f in enumerate(order)}
            n = len(order)
            adj = {int(g.ids[i]): set(int(g.ids[j]) for j in g.neighbor_indices(i)) for i in range(n)}
            for t, f in enumerate(order):
                suffix = set(order[t:])
                deg_f = len(adj[f] & suffix)
                assert all(len(adj[u] & suffix) <= deg_f for u in suffix)


class TestFilterHighDegree:
    def test_star_removes_center(self):
        fr = filter_high_degree(star())
        assert fr.held_out == [0]
        assert fr.delta_f == 0
        assert len(fr.held_out) >= 2 * fr.delta_f

    def test_edgeless_keeps_everything(self):
        g = to_adjacency([], [1, 2, 3])
        fr = filter_high_degree(g)
        assert fr.held_out == []
        assert fr.delta_f == 0

    def test_triangle_needs_two(self):
        fr = filter_high_degree(triangle())
        assert len(fr.held_out) == 2
        assert fr.delta_f == 0

    def test_minimal_prefix_exhaustive(self, rng):
        # oracle: recompute Delta(G minus every largest-first prefix) from scratch
        for _ in range(10):
            g = random_graph(rng, rng.randint(2, 20), rng.randint(1, 40))
            order = largest_first_order(g)
            fr = filter_high_degree(g)
            n = len(order)
            adj = {int(g.ids[i]): set(int(g.ids[j]) for j in g.neighbor_indices(i)) for i in range(n)}

            def delta_after(t):
                suffix = set(order[t:])
                return max((len(adj[u] & suffix) for u in suffix), default=0)

            best = next(t for t in range(n + 1) if t >= 2 * delta_after(t))
            assert len(fr.held_out) == best
            assert fr.held_out == order[:best]
            assert fr.delta_f == delta_after(best)

    def test_induced_subgraph_edges(self):
        g = to_adjacency([(1, 2), (2, 3), (3, 4)], [1, 2, 3, 4])
        sub = induced_subgraph(g, [2])
        assert set(sub.edge_id_pairs()) == {(3, 4)}
        assert sub.vertex_count == 3


class TestGlauber:
    def test_single_edge_always_proper(self):
        g = to_adjacency([(1, 2)], [1, 2])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # m = 2*Delta on purpose
            for seed in range(20):
                c = glauber_sample(g, 2, 500, seed)
                assert {c.color_of[1], c.color_of[2]} == {0, 1}

    def test_backend_independent_stream(self, rng):
        # the compiled kernel and the pure-python fallback must sample the
        # same coloring for the same seed
        import chromafeat.coloring as cmod

        g = random_graph(rng, 15, 30)
        m = 2 * g.max_degree + 1
        jitted = glauber_sample(g, m, 3000, seed=5)
        kernel = cmod._glauber_steps
        cmod._glauber_steps = cmod._glauber_steps_py
        try:
            plain = glauber_sample(g, m, 3000, seed=5)
        finally:
            cmod._glauber_steps = kernel
        assert plain.color_of == jitted.color_of

    def test_zero_steps_returns_greedy_init(self, rng):
        g = random_graph(rng, 15, 30)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            c = glauber_sample(g, g.max_degree + 2, 0, seed=7)
        assert c.color_of == greedy_color(g).color_of

    def test_m_too_small_rejected(self):
        with pytest.raises(ColoringError):
            glauber_sample(triangle(), 2, 10, seed=0)

    def test_warn_when_mixing_not_guaranteed(self):
        with pytest.warns(RuntimeWarning):
            glauber_sample(triangle(), 3, 10, seed=0)

    def test_proper_after_many_steps(self, rng):
        for seed in range(5):
            g = random_graph(rng, 20, 40)
            m = 2 * g.max_degree + 1
            c = glauber_sample(g, m, 5000, seed)
            assert check_proper(c, g)
            assert c.m <= m

    def test_deterministic_given_seed(self, rng):
        g = random_graph(rng, 12, 25)
        m = 2 * g.max_degree + 1
        a = glauber_sample(g, m, 2000, seed=42)
        b = glauber_sample(g, m, 2000, seed=42)
        assert a.color_of == b.color_of

    def test_check_every_accepts_valid_chain(self):
        g = triangle()
        c = glauber_sample(g, 4, 20000, seed=1, check_every=5000)
        assert check_proper(c, g)

    def test_triangle_uniformity_coarse(self):
        # small-sample chi-square sanity run; the acceptance suite runs the full one
        g = triangle()
        counts = {}
        runs = 600
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for seed in range(runs):
                c = glauber_sample(g, 4, 2000, seed)
                key = (c.color_of[1], c.color_of[2], c.color_of[3])
                counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 24
        expected = runs / 24
        chi2 = sum((o - expected) ** 2 / expected for o in counts.values())
        assert chi2 < 2 * 41.64  # loose gate at this sample size


class TestCombine:
    def test_star_combination(self):
        fr = filter_high_degree(star())
        inner = greedy_color(fr.filtered_graph)
        assert inner.m == 1  # isolated leaves share one color
        combined = combine_filtered_coloring(fr, inner)
        assert combined.m == 2
        assert combined.color_of[0] == 1
        assert check_proper(combined, star())

    def test_empty_holdout_is_identity(self):
        g = to_adjacency([], [1, 2])
        fr = filter_high_degree(g)
        inner = greedy_color(fr.filtered_graph)
        combined = combine_filtered_coloring(fr, inner)
        assert combined.color_of == inner.color_of
        assert combined.m == inner.m

    def test_random_graphs_proper_on_original(self, rng):
        for _ in range(10):
            g = random_graph(rng, rng.randint(3, 30), rng.randint(2, 60))
            fr = filter_high_degree(g)
            inner = greedy_color(fr.filtered_graph)
            combined = combine_filtered_coloring(fr, inner)
            assert check_proper(combined, g)
            assert combined.m == inner.m + len(fr.held_out)

    def test_inner_must_cover_filtered_graph(self):
        fr = filter_high_degree(star())
        with pytest.raises(ColoringError):
            combine_filtered_coloring(fr, Coloring({1: 0}, 1))


class TestColoringIO:
    def test_roundtrip(self, tmp_path, rng):
        g = random_graph(rng, 20, 35)
        c = greedy_color(g, popularity={int(f): 3 for f in g.ids})
        p = tmp_path / "coloring.bin"
        save_coloring(c, p)
        back = load_coloring(p, popularity=c.popularity)
        assert back.color_of == c.color_of
        assert back.m == c.m
        assert back.popularity == c.popularity

    def test_summary(self, tmp_path):
        import json

        c = Coloring({1: 0, 2: 1}, 2)
        p = tmp_path / "coloring.json"
        save_coloring_summary(c, p, mode="greedy", order="id", seed=0, steps=0)
        info = json.loads(p.read_text())
        assert info["m"] == 2
        assert info["mode"] == "greedy"

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"YYYYYYYY" + b"\0" * 8)
        with pytest.raises(ColoringError):
            load_coloring(p)
