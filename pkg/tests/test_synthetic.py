import json

import pytest

from pathcf.graph import ATTR, ITEM, USER, build_graph, load_interactions, load_metadata
from pathcf.paths import explore_paths
from pathcf.synthetic import SyntheticSpec, generate, planted_paths, write_synthetic


def test_default_spec_sizes():
    s = SyntheticSpec()
    assert (s.n_users, s.n_items, s.n_categories, s.n_brands) == (50, 200, 20, 40)


@pytest.mark.parametrize("bad", [dict(n_users=1), dict(n_items=3), dict(n_brands=0),
                                 dict(min_history=5, max_history=4), dict(planted_per_user=0),
                                 dict(n_brands=60), dict(categories_per_item=30)])
def test_degenerate_specs_rejected(bad):
    with pytest.raises(ValueError):
        generate(SyntheticSpec(**bad))


def test_fixed_seed_gives_identical_files(tmp_path):
    a = write_synthetic(tmp_path / "a", SyntheticSpec(seed=3))
    b = write_synthetic(tmp_path / "b", SyntheticSpec(seed=3))
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    c = write_synthetic(tmp_path / "c", SyntheticSpec(seed=4))
    assert a["interactions"].read_bytes() != c["interactions"].read_bytes()


def test_planted_signal_is_present():
    inter, meta, truth = generate(SyntheticSpec(seed=1))
    brand = {i: v for i, c, v in meta if c == "brand"}
    last = {}
    for u, i, t in inter:
        if u not in last or t > last[u][1]:
            last[u] = (i, t)
    for u, rec in truth.items():
        assert last[u][0] == rec["heldout_item"]
        assert brand[rec["heldout_item"]] == rec["brand"]
        assert all(brand[i] == rec["brand"] for i in rec["planted_history"])
        assert len(rec["planted_paths"]) == len(rec["planted_history"])


def test_planted_paths_are_explainable(tmp_path):
    files = write_synthetic(tmp_path, SyntheticSpec(seed=2))
    g = build_graph(load_interactions(files["interactions"]), load_metadata(files["metadata"]))
    truth = json.loads(files["truth"].read_text())
    for user, rec in truth["users"].items():
        for u, i, b, t in rec["planted_paths"]:
            path = (g.user_id(u), g.item_id(i), g.node_id(ATTR, b), g.item_id(t))
            assert [g.kinds[v] for v in path] == [USER, ITEM, ATTR, ITEM]
            assert all(g.has_edge(a, c) for a, c in zip(path, path[1:]))


def test_planted_path_indices(tmp_path):
    files = write_synthetic(tmp_path, SyntheticSpec(seed=0))
    g = build_graph(load_interactions(files["interactions"]), load_metadata(files["metadata"]))
    truth = json.loads(files["truth"].read_text())
    sets = explore_paths(g, 4, 6, 50, seed=0, terminal="any")
    bridge = planted_paths(g, sets, truth, "bridge")
    loose = planted_paths(g, sets, truth, "loose")
    assert bridge and sum(map(len, bridge.values())) > 0
    for key, idx in bridge.items():
        assert set(idx) <= set(loose[key])
        for z in idx:
            p = sets[key].paths[z]
            assert len(p) == 4 and g.kinds[p[2]] == ATTR
    with pytest.raises(ValueError):
        planted_paths(g, sets, truth, "tight")
