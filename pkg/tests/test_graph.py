import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcf.graph import (ATTR, ITEM, USER, AttributeRow, EmptyDataError, Interaction, ParseError,
                          build_graph, load_graph, load_interactions, load_metadata, save_graph,
                          two_hop_same_type)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_min_item_count_keeps_frequent_item(tmp_path):
    rows = "".join(f"u{k}\tpopular\t{k}\n" for k in range(6)) + "u0\trare\t9\n"
    kept = load_interactions(write(tmp_path / "i.tsv", rows), min_item_count=5)
    assert {r.item for r in kept} == {"popular"}
    assert len(load_interactions(tmp_path / "i.tsv", min_item_count=0)) == 7


def test_filter_to_empty_raises(tmp_path):
    p = write(tmp_path / "i.tsv", "u1\tx\t1\nu2\tx\t2\nu3\tx\t3\n")
    with pytest.raises(EmptyDataError, match="empty after filtering"):
        load_interactions(p, min_item_count=5)


def test_parse_errors_name_the_line(tmp_path):
    with pytest.raises(ParseError, match=":2:"):
        load_interactions(write(tmp_path / "a.tsv", "u\ti\t1\nu\ti\n"))
    with pytest.raises(ParseError, match="not an integer"):
        load_interactions(write(tmp_path / "b.tsv", "u\ti\tyesterday\n"))
    with pytest.raises(ParseError):
        load_metadata(write(tmp_path / "m.tsv", "i\tbrand\n"))


def test_header_rows_are_skipped(tmp_path):
    rows = load_interactions(write(tmp_path / "i.tsv", "user_id\titem_id\ttimestamp\nu\ti\t4\n"))
    assert rows == [Interaction("u", "i", 4)]


def test_shared_brand_is_one_node():
    g = build_graph([Interaction("u", "x", 1), Interaction("u", "y", 2)],
                    [AttributeRow("x", "brand", "Boss"), AttributeRow("y", "brand", "Boss")])
    boss = g.node_id(ATTR, "brand:Boss")
    assert len(g.attributes) == 1
    assert sorted(g.neighbors(boss).tolist()) == [g.item_id("x"), g.item_id("y")]


def test_item_with_three_attributes_has_three_attribute_edges():
    attrs = [AttributeRow("x", "category", "c1"), AttributeRow("x", "category", "c2"),
             AttributeRow("x", "brand", "b")]
    g = build_graph([Interaction("u", "x", 1)], attrs)
    x = g.item_id("x")
    assert int(np.sum(g.kinds[g.neighbors(x)] == ATTR)) == 3


def test_empty_metadata_gives_no_attributes(tmp_path):
    meta = load_metadata(write(tmp_path / "m.tsv", ""))
    g = build_graph([Interaction("u", "x", 1)], meta)
    assert len(g.attributes) == 0


def test_minimal_graph():
    g = build_graph([Interaction("u", "i", 1)], [])
    assert g.num_nodes == 2 and g.num_edges == 1


def test_node_count_sums_kinds():
    rng = np.random.default_rng(0)
    inter = [Interaction(f"u{u}", f"i{i}", t) for t, (u, i) in
             enumerate([(u, i) for i in range(20) for u in [i % 5]])]
    attrs = [AttributeRow(f"i{i}", "category", f"c{rng.integers(3)}") for i in range(20)]
    attrs += [AttributeRow("i0", "category", "c0"), AttributeRow("i1", "category", "c1"),
              AttributeRow("i2", "category", "c2")]
    g = build_graph(inter, attrs)
    assert g.num_nodes == 5 + 20 + 3


def test_unknown_metadata_items_are_skipped():
    g = build_graph([Interaction("u", "x", 1)], [AttributeRow("ghost", "brand", "b")])
    assert g.skipped_attribute_rows == 1
    assert len(g.attributes) == 0


def test_node_ids_users_then_items_then_attributes():
    g = build_graph([Interaction("b", "y", 1), Interaction("a", "x", 2)], [AttributeRow("x", "brand", "k")])
    assert g.labels == ["b", "a", "y", "x", "brand:k"]
    assert g.kinds.tolist() == [USER, USER, ITEM, ITEM, ATTR]


def test_two_hop_examples():
    g = build_graph([Interaction("u1", "i1", 1), Interaction("u2", "i1", 2)], [])
    assert g.user_id("u2") in two_hop_same_type(g, g.user_id("u1"))
    star = build_graph([Interaction(f"u{k}", "hub", k) for k in range(4)], [])
    for k in range(4):
        others = sorted(star.user_id(f"u{j}") for j in range(4) if j != k)
        assert two_hop_same_type(star, star.user_id(f"u{k}")) == others


def test_two_hop_isolated_attribute_is_empty():
    g = build_graph([Interaction("u", "x", 1)], [AttributeRow("x", "brand", "only")])
    assert two_hop_same_type(g, g.node_id(ATTR, "brand:only")) == []


def test_two_hop_respects_attribute_class():
    g = build_graph([Interaction("u", "x", 1)],
                    [AttributeRow("x", "brand", "b1"), AttributeRow("x", "category", "c1")])
    assert two_hop_same_type(g, g.node_id(ATTR, "brand:b1")) == []


def test_snapshot_roundtrip(tmp_path):
    g = build_graph([Interaction("u", "x", 5), Interaction("v", "x", 3), Interaction("u", "y", 7)],
                    [AttributeRow("x", "brand", "b")])
    save_graph(g, tmp_path / "g")
    h = load_graph(tmp_path / "g")
    assert h.labels == g.labels
    np.testing.assert_array_equal(h.indptr, g.indptr)
    np.testing.assert_array_equal(h.indices, g.indices)
    np.testing.assert_array_equal(h.edge_time, g.edge_time)
    assert h.interaction_log == g.interaction_log


interactions = st.lists(
    st.tuples(st.integers(0, 5), st.integers(0, 8), st.integers(0, 50)), min_size=1, max_size=30)
attributes = st.lists(st.tuples(st.integers(0, 8), st.sampled_from(["brand", "category"]), st.integers(0, 3)),
                      max_size=20)


def make(inter, attrs):
    return build_graph([Interaction(f"u{u}", f"i{i}", t) for u, i, t in inter],
                       [AttributeRow(f"i{i}", c, f"v{v}") for i, c, v in attrs])


@settings(max_examples=60, deadline=None)
@given(interactions, attributes)
def test_adjacency_symmetric_and_typed(inter, attrs):
    g = make(inter, attrs)
    for a in range(g.num_nodes):
        for b in g.neighbors(a):
            assert a in g.neighbors(int(b))
            assert not (g.kinds[a] == g.kinds[b] and g.kinds[a] in (USER, ATTR))


@settings(max_examples=60, deadline=None)
@given(interactions, attributes)
def test_two_hop_matches_brute_force(inter, attrs):
    g = make(inter, attrs)
    for v in range(g.num_nodes):
        got = two_hop_same_type(g, v)
        assert v not in got
        expect = sorted({int(u) for x in g.neighbors(v) for u in g.neighbors(int(x))
                         if u != v and g.node_type(int(u)) == g.node_type(v)})
        assert got == expect


@settings(max_examples=30, deadline=None)
@given(interactions, attributes)
def test_rebuild_is_deterministic(inter, attrs):
    g, h = make(inter, attrs), make(inter, attrs)
    assert g.labels == h.labels
    np.testing.assert_array_equal(g.indices, h.indices)
