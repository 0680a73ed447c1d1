import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathcf.embedding import (EmbeddingTable, SkipGramConfig, embed_path, embed_paths, load_table, save_table,
                              train_skipgram)


def community_corpus(seed=0, n_walks=200, length=12):
    rng = np.random.default_rng(seed)
    walks = []
    for k in range(n_walks):
        nodes = np.arange(0, 5) if k % 2 == 0 else np.arange(5, 10)
        walks.append(rng.choice(nodes, size=length).tolist())
    return walks


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_vectors_have_requested_dim():
    t = train_skipgram(community_corpus(), SkipGramConfig(dim=100, epochs=1))
    assert t.vectors.shape == (10, 100)


def test_zero_epochs_keeps_initialisation():
    cfg = SkipGramConfig(dim=16, epochs=0, seed=4)
    t = train_skipgram(community_corpus(), cfg)
    rng = np.random.default_rng(4)
    np.testing.assert_array_equal(t.vectors, (rng.random((10, 16)) - 0.5) / 16)


def test_communities_separate():
    t = train_skipgram(community_corpus(), SkipGramConfig(dim=16, epochs=5, seed=0))
    intra, inter = [], []
    for a in range(10):
        for b in range(a + 1, 10):
            (intra if (a < 5) == (b < 5) else inter).append(cosine(t[a], t[b]))
    assert np.mean(intra) > np.mean(inter)


def test_loss_decreases():
    t = train_skipgram(community_corpus(), SkipGramConfig(dim=16, epochs=5, seed=0))
    assert t.losses[-1] < t.losses[0]


def test_training_is_deterministic():
    cfg = SkipGramConfig(dim=8, epochs=2, seed=9)
    np.testing.assert_array_equal(train_skipgram(community_corpus(), cfg).vectors,
                                  train_skipgram(community_corpus(), cfg).vectors)


def test_uncovered_nodes_reported():
    t = train_skipgram([[0, 1, 2]], SkipGramConfig(dim=4, epochs=1), num_nodes=5)
    assert t.uncovered == [3, 4]
    assert t.coverage_report()["uncovered"] == 2


def test_missing_node_raises():
    t = EmbeddingTable(np.zeros((3, 2)))
    with pytest.raises(LookupError):
        embed_path(t, (0, 5))


def test_embed_path_examples():
    v = np.array([1.0, -2.0, 3.0])
    t = EmbeddingTable(np.array([v, -v, [1, 2, 3], [3, 2, 1], [0, 0, 4], [4, 0, 0]], dtype=float))
    np.testing.assert_array_equal(embed_path(t, (0, 0, 0, 0)), v)
    np.testing.assert_array_equal(embed_path(t, (0, 1, 0, 1)), np.zeros(3))
    np.testing.assert_array_equal(embed_path(t, (2, 3, 4, 5)), [2.0, 1.0, 2.0])
    assert embed_paths(t, []).shape == (0, 3)


def test_table_roundtrip(tmp_path):
    t = EmbeddingTable(np.random.default_rng(0).normal(size=(4, 3)).astype(np.float32).astype(np.float64))
    _, manifest = save_table(t, tmp_path / "e.bin", labels=["a", "b", "c", "d"])
    back = load_table(tmp_path / "e.bin")
    np.testing.assert_array_equal(back.vectors, t.vectors)
    assert '"c": 2' in manifest.read_text()


vectors = st.lists(st.lists(st.floats(-10, 10), min_size=3, max_size=3), min_size=2, max_size=6)


@settings(max_examples=60, deadline=None)
@given(vectors, st.randoms(use_true_random=False))
def test_embed_path_order_free_and_bounded(rows, rnd):
    t = EmbeddingTable(np.array(rows, dtype=np.float64))
    path = list(range(len(rows)))
    shuffled = path[:]
    rnd.shuffle(shuffled)
    a, b = embed_path(t, path), embed_path(t, shuffled)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    assert np.max(np.abs(a)) <= np.max(np.abs(t.vectors)) + 1e-12
