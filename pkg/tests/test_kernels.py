import numpy as np
import pytest

from pathcf import _pykernels, kernels
from pathcf.graph import AttributeRow, Interaction, build_graph

ck = pytest.importorskip("pathcf._ckernels", reason="compiled kernels not built")


def random_graph(seed):
    rng = np.random.default_rng(seed)
    inter = [Interaction(f"u{rng.integers(8)}", f"i{rng.integers(15)}", int(rng.integers(100))) for _ in range(40)]
    attrs = [AttributeRow(f"i{k}", "brand", f"b{rng.integers(4)}") for k in range(15)]
    return build_graph(inter, attrs)


@pytest.mark.parametrize("seed", range(3))
def test_simple_walks_agree(seed):
    g = random_graph(seed)
    starts = np.repeat(np.arange(g.num_nodes, dtype=np.int64), 5)
    u = np.random.default_rng(seed).random((len(starts), 5))
    np.testing.assert_array_equal(ck.simple_walks(g.indptr, g.indices, starts, 6, u),
                                  _pykernels.simple_walks(g.indptr, g.indices, starts, 6, u))


@pytest.mark.parametrize("seed", range(3))
def test_temporal_walks_agree(seed):
    g = random_graph(seed)
    starts = np.repeat(np.arange(g.num_nodes, dtype=np.int64), 5)
    u = np.random.default_rng(seed).random((len(starts), 9))
    wc, tc = ck.temporal_walks(g.indptr, g.indices, g.edge_time, starts, 10, u)
    wp, tp = _pykernels.temporal_walks(g.indptr, g.indices, g.edge_time, starts, 10, u)
    np.testing.assert_array_equal(wc, wp)
    np.testing.assert_array_equal(tc, tp)


def test_sgns_epoch_agrees():
    rng = np.random.default_rng(0)
    n, d, m = 30, 6, 200
    w_in = rng.normal(0, 0.1, (n, d))
    w_out = rng.normal(0, 0.1, (n, d))
    centers = rng.integers(n, size=m).astype(np.int64)
    contexts = rng.integers(n, size=m).astype(np.int64)
    negatives = rng.integers(n, size=(m, 3)).astype(np.int64)
    lrs = np.linspace(0.05, 0.01, m)
    a_in, a_out, b_in, b_out = w_in.copy(), w_out.copy(), w_in.copy(), w_out.copy()
    la = ck.sgns_epoch(a_in, a_out, centers, contexts, negatives, lrs)
    lb = _pykernels.sgns_epoch(b_in, b_out, centers, contexts, negatives, lrs)
    np.testing.assert_allclose(a_in, b_in, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a_out, b_out, rtol=1e-10, atol=1e-12)
    assert la == pytest.approx(lb, rel=1e-10)


def test_dispatch_prefers_compiled():
    assert kernels.BACKEND in ("cython", "python")
    if kernels.BACKEND == "cython":
        assert kernels.simple_walks is ck.simple_walks
