import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pathcf.backend import BackendConfig, BackendParams, Recommender  # noqa: E402
from pathcf.embedding import EmbeddingTable  # noqa: E402
from pathcf.graph import AttributeRow, Interaction, build_graph  # noqa: E402
from pathcf.paths import PathSet  # noqa: E402


def small_recommender(dim=8, seed=0, enhance="attention", encoder="transformer", noise=0.3):
    """u0 bought i0, i1, i2 in that order; (u0, i2) has exactly three paths."""
    inter = [Interaction("u0", "i0", 1), Interaction("u0", "i1", 2), Interaction("u0", "i2", 3),
             Interaction("u1", "i1", 1), Interaction("u1", "i3", 2)]
    attrs = [AttributeRow("i0", "brand", "a"), AttributeRow("i1", "brand", "a"),
             AttributeRow("i2", "brand", "b"), AttributeRow("i3", "brand", "b"),
             AttributeRow("i1", "category", "c"), AttributeRow("i2", "category", "c")]
    g = build_graph(inter, attrs)
    u0, u1 = g.user_id("u0"), g.user_id("u1")
    i0, i1, i2, i3 = (g.item_id(f"i{k}") for k in range(4))
    a = g.node_id(2, "brand:a")
    b = g.node_id(2, "brand:b")
    c = g.node_id(2, "category:c")
    sets = {
        (u0, i2): PathSet(u0, i2, [(u0, i1, c, i2), (u0, i1, u1, i3, b, i2), (u0, i0, a, i1, c, i2)]),
        (u0, i1): PathSet(u0, i1, [(u0, i0, a, i1), (u0, i2, c, i1)]),
        (u0, i0): PathSet(u0, i0, [(u0, i1, a, i0)]),
    }
    rng = np.random.default_rng(seed)
    table = EmbeddingTable(rng.normal(0, 0.5, (g.num_nodes, dim)))
    cfg = BackendConfig(dim=dim, max_history=3, enhance=enhance, encoder=encoder)
    params = BackendParams.init(cfg, seed=seed)
    for k in params.arrays:
        params.arrays[k] = params.arrays[k] + rng.normal(0, noise, params.arrays[k].shape)
    return Recommender(params, table, g, sets), u0, i2


@pytest.fixture
def small_rec():
    return small_recommender()


def tiny_pipeline_config(root, seed=0):
    """A seconds-scale pipeline config over a small synthetic dataset under ``root``."""
    from pathcf.pipeline import PipelineConfig
    from pathcf.synthetic import SyntheticSpec, write_synthetic
    spec = SyntheticSpec(n_users=12, n_items=48, n_categories=48, n_brands=12, min_history=4, max_history=6, seed=seed)
    files = write_synthetic(Path(root) / "data", spec)
    cfg = PipelineConfig()
    cfg.data.interactions = str(files["interactions"])
    cfg.data.metadata = str(files["metadata"])
    cfg.data.truth = str(files["truth"])
    overrides = {
        "paths.walks_per_vertex": "20", "walks.walks_per_vertex": "4", "walks.walk_len": "10",
        "embedding.dim": "8", "embedding.epochs": "1", "backend.epochs": "2", "backend.learning_rate": "0.05",
        "cf_repr.steps": "5", "cf_struct.epochs": "3", "cf_struct.episodes_per_epoch": "2",
        "eval.max_pairs": "8", "eval.runs": "2", "eval.study_pairs": "2", "eval.negatives": "20",
    }
    for k, v in overrides.items():
        cfg.set(k, v)
    return cfg


ACCEPTANCE = {}


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
