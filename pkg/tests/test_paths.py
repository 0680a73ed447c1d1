import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcf.graph import ITEM, USER, AttributeRow, Interaction, build_graph
from pathcf.paths import (PathSet, explore_paths, load_path_sets, load_walks, paths_for_pair,
                          save_path_sets, save_walks, temporal_walks)


def toy_graph():
    # u1 - i1, u1 - i2, u2 - i2, i1 - a1, i2 - a1
    return build_graph([Interaction("u1", "i1", 1), Interaction("u1", "i2", 2), Interaction("u2", "i2", 3)],
                       [AttributeRow("i1", "brand", "a1"), AttributeRow("i2", "brand", "a1")])


def dfs_oracle(g, min_len, max_len, terminal):
    """Every simple walk of min_len..max_len nodes from a user/item start ending at an item, by owner."""
    out = {}

    def owners(s):
        return [s] if g.kinds[s] == USER else [int(u) for u in g.neighbors(s) if g.kinds[u] == USER]

    def rec(walk):
        if len(walk) >= min_len and g.kinds[walk[-1]] == ITEM:
            for u in owners(walk[0]):
                if terminal == "any" or g.has_edge(u, walk[-1]):
                    out.setdefault((u, walk[-1]), set()).add(tuple(walk))
        if len(walk) == max_len:
            return
        for nb in g.neighbors(walk[-1]):
            if int(nb) not in walk:
                rec(walk + [int(nb)])

    for s in range(g.num_nodes):
        if g.kinds[s] in (USER, ITEM):
            rec([s])
    return out


def test_chain_path_is_emitted():
    g = build_graph([Interaction("u1", "i1", 1), Interaction("u1", "i2", 2)],
                    [AttributeRow("i1", "brand", "a1"), AttributeRow("i2", "brand", "a1")])
    sets = explore_paths(g, 4, 6, 20, seed=0)
    u1, i1, i2 = g.user_id("u1"), g.item_id("i1"), g.item_id("i2")
    a1 = g.node_id(2, "brand:a1")
    assert (u1, i1, a1, i2) in sets[(u1, i2)].paths


@pytest.mark.parametrize("terminal", ["interacted", "any"])
def test_explore_matches_exhaustive_enumeration(terminal):
    g = toy_graph()
    sets = explore_paths(g, 4, 6, 50, seed=3, terminal=terminal)
    oracle = dfs_oracle(g, 4, 6, terminal)
    assert {k: set(v.paths) for k, v in sets.items()} == oracle
    for key, expect in oracle.items():
        assert len(paths_for_pair(sets, *key)) == len(expect)


def test_no_three_node_paths():
    sets = explore_paths(toy_graph(), 4, 6, 50, seed=0)
    assert all(len(p) >= 4 for ps in sets.values() for p in ps.paths)


def test_paths_for_pair_lookup():
    ps = PathSet(0, 3, [(0, 1, 2, 3), (0, 4, 5, 3)])
    assert paths_for_pair({(0, 3): ps}, 0, 3).paths == ps.paths
    assert len(paths_for_pair({(0, 3): ps}, 1, 3)) == 0


def test_max_paths_per_pair_caps():
    sets = explore_paths(toy_graph(), 4, 6, 50, seed=0, terminal="any", max_paths_per_pair=1)
    assert all(len(ps) == 1 for ps in sets.values())


def test_bad_arguments():
    g = toy_graph()
    with pytest.raises(ValueError):
        explore_paths(g, 4, 4)
    with pytest.raises(ValueError):
        explore_paths(g, terminal="nearby")
    with pytest.raises(ValueError):
        temporal_walks(g, walk_len=1)


def test_temporal_walk_never_climbs_in_time():
    g = build_graph([Interaction("u", "i1", 10), Interaction("u", "i2", 20)], [])
    tw = temporal_walks(g, walk_len=4, walks_per_vertex=200, seed=0)
    u, i1, i2 = g.user_id("u"), g.item_id("i1"), g.item_id("i2")
    walks = {tuple(w.tolist()) for w in tw}
    assert (u, i1, u, i2) not in walks
    assert any(w[:3] == (i2, u, i1) for w in walks)


def test_three_node_temporal_walks_match_hand_enumeration():
    g = build_graph([Interaction("u", "i1", 10), Interaction("u", "i2", 20), Interaction("v", "i2", 5)], [])
    u, v, i1, i2 = g.user_id("u"), g.user_id("v"), g.item_id("i1"), g.item_id("i2")
    hand = {(u, i1, u), (u, i2, u), (u, i2, v), (v, i2, v),
            (i1, u, i1), (i2, u, i1), (i2, u, i2), (i2, v, i2)}
    tw = temporal_walks(g, walk_len=3, walks_per_vertex=100, seed=1)
    assert {tuple(w.tolist()) for w in tw} == hand


def test_untimed_graph_walks_freely():
    g = build_graph([Interaction("u", "x", 1)], [AttributeRow("x", "brand", "b"), AttributeRow("x", "category", "c")])
    b = g.node_id(2, "brand:b")
    g.edge_time[:] = np.nan
    tw = temporal_walks(g, walk_len=6, walks_per_vertex=20, seed=0)
    assert all(len(w) == 6 for w in tw)
    assert any(b in w.tolist() for w in tw)


def test_serialisation_roundtrip(tmp_path):
    g = toy_graph()
    sets = explore_paths(g, 4, 6, 10, seed=0)
    save_path_sets(tmp_path / "p.jsonl", sets)
    back = load_path_sets(tmp_path / "p.jsonl")
    assert {k: v.paths for k, v in back.items()} == {k: v.paths for k, v in sets.items()}
    tw = temporal_walks(g, 5, 3, seed=0)
    save_walks(tmp_path / "w.bin", tw)
    tw2 = load_walks(tmp_path / "w.bin")
    np.testing.assert_array_equal(tw.walks, tw2.walks)
    np.testing.assert_array_equal(tw.edge_times, tw2.edge_times)


def test_same_seed_same_bytes(tmp_path):
    g = toy_graph()
    save_path_sets(tmp_path / "a.jsonl", explore_paths(g, 4, 6, 10, seed=7))
    save_path_sets(tmp_path / "b.jsonl", explore_paths(g, 4, 6, 10, seed=7))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


random_graphs = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 7), st.integers(0, 9)), min_size=2, max_size=25)
random_attrs = st.lists(st.tuples(st.integers(0, 7), st.integers(0, 3)), max_size=12)


def build(inter, attrs):
    return build_graph([Interaction(f"u{u}", f"i{i}", t) for u, i, t in inter],
                       [AttributeRow(f"i{i}", "brand", f"b{b}") for i, b in attrs])


@settings(max_examples=50, deadline=None)
@given(random_graphs, random_attrs, st.integers(0, 1000), st.sampled_from(["interacted", "any"]))
def test_explored_paths_satisfy_definition(inter, attrs, seed, terminal):
    g = build(inter, attrs)
    for (owner, item), ps in explore_paths(g, 4, 6, 5, seed=seed, terminal=terminal).items():
        assert g.kinds[owner] == USER
        for p in ps.paths:
            assert 4 <= len(p) <= 6
            assert len(set(p)) == len(p)
            assert g.kinds[p[0]] in (USER, ITEM) and g.kinds[p[-1]] == ITEM and p[-1] == item
            assert all(g.has_edge(a, b) for a, b in zip(p, p[1:]))
            if terminal == "interacted":
                assert g.has_edge(owner, item)


@settings(max_examples=50, deadline=None)
@given(random_graphs, random_attrs, st.integers(0, 1000))
def test_temporal_walks_monotone(inter, attrs, seed):
    g = build(inter, attrs)
    tw = temporal_walks(g, 8, 3, seed=seed)
    for row, times in zip(tw.walks, tw.edge_times):
        w = row[row >= 0]
        assert all(g.has_edge(int(a), int(b)) for a, b in zip(w, w[1:]))
        stamped = [t for t in times[: len(w) - 1] if not math.isnan(t)]
        assert all(b <= a for a, b in zip(stamped, stamped[1:]))
