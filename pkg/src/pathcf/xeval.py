"""Explanation quality metrics shared by attention and counterfactual explainers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import Recommender, forward

METHODS = ("attention", "cf_repr", "cf_struct", "cf_intersection", "random")


@dataclass
class WeightedExplanation:
    user: int
    item: int
    method: str
    weights: dict                 # path_index -> weight, sums to 1
    seed: int = 0
    run: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        w = np.array(list(self.weights.values()), dtype=np.float64)
        if len(w) and (np.any(w < 0) or abs(w.sum() - 1.0) > 1e-6):
            raise ValueError("weights must be a probability vector")

    @property
    def pair(self):
        return (self.user, self.item)

    def ranking(self) -> list:
        """Path indices by descending weight (index breaks ties)."""
        return [k for k, _ in sorted(self.weights.items(), key=lambda kv: (-kv[1], kv[0]))]


def confidence_entropy(weights) -> float:
    w = np.asarray(list(weights.values()) if isinstance(weights, dict) else weights, dtype=np.float64)
    w = w[w > 0]
    return 0.0 - float((w * np.log(w)).sum())


def _subset_scores(rec: Recommender, user, item, subsets) -> np.ndarray:
    """Pair score with only the listed path indices present, one batch row per subset."""
    vecs = rec.path_vectors(user, item)
    samples = [rec.sample(user, item, vecs[list(s)] if len(s) else np.zeros((0, rec.cfg.dim)))
               for s in subsets]
    return rec.score_samples(samples)


def keep_subset_score(rec: Recommender, user, item, keep) -> float:
    return float(_subset_scores(rec, user, item, [sorted(keep)])[0])


def informativeness_mse(rec: Recommender, selections: dict) -> tuple[float, int]:
    """Mean squared gap between the full-input score and the score from selected paths only.

    ``selections`` maps (user, item) to a collection of path indices. Pairs
    with no selected path are skipped; returns (mse, skipped).
    """
    errs, skipped = [], 0
    for (u, i), keep in selections.items():
        if not len(keep):
            skipped += 1
            continue
        n = len(rec.path_vectors(u, i))
        full, part = _subset_scores(rec, u, i, [range(n), sorted(keep)])
        errs.append((full - part) ** 2)
    return (float(np.mean(errs)) if errs else float("nan")), skipped


def random_selection(rec: Recommender, counts: dict, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for (u, i), k in counts.items():
        n = len(rec.path_vectors(u, i))
        out[(u, i)] = sorted(rng.choice(n, size=min(k, n), replace=False).tolist()) if k else []
    return out


def attention_topk_selection(rec: Recommender, counts: dict) -> dict:
    out = {}
    for (u, i), k in counts.items():
        a = rec.attention_weights(u, i)
        out[(u, i)] = sorted(np.argsort(-a, kind="stable")[:k].tolist())
    return out


def n_removed(ratio: float, n: int) -> int:
    """Paths removed at ``ratio`` of an ``n``-path explanation (half rounds up)."""
    return min(n, int(math.floor(ratio * n + 0.5)))


def fidelity_curve(rec: Recommender, rankings: dict, ratios=(0.25, 0.5, 0.75, 1.0)) -> list:
    """Mean score drop after removing the top fraction of each explanation.

    ``rankings`` maps (user, item) to explanation path indices in descending
    weight order; that list is the explanation's full set. Removed paths
    leave the pair's path set entirely.
    """
    curve = []
    per_ratio = {r: [] for r in ratios}
    for (u, i), ranked in rankings.items():
        if not len(ranked):
            continue
        n = len(rec.path_vectors(u, i))
        subsets = [range(n)]
        for r in ratios:
            gone = set(ranked[:n_removed(r, len(ranked))])
            subsets.append([z for z in range(n) if z not in gone])
        s = _subset_scores(rec, u, i, subsets)
        for r, sr in zip(ratios, s[1:]):
            per_ratio[r].append(s[0] - sr)
    for r in ratios:
        curve.append((r, float(np.mean(per_ratio[r])) if per_ratio[r] else 0.0))
    return curve


# --- repeated-run studies -------------------------------------------------------------------

@dataclass
class StabilityReport:
    variances: np.ndarray          # per path
    means: np.ndarray
    small_fraction: float
    threshold: float
    samples: np.ndarray = field(repr=False, default=None)   # (runs, paths)


def stability_report(samples, threshold: float = 0.1) -> StabilityReport:
    """Per-path weight variance across runs.

    ``samples`` is (runs, paths) of weights; a path is stable when its
    variance is at most ``threshold`` times its squared mean weight.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need a (runs >= 2, paths) weight matrix")
    var = x.var(axis=0)
    mean = x.mean(axis=0)
    small = var <= threshold * mean ** 2
    return StabilityReport(var, mean, float(small.mean()) if small.size else 0.0, threshold, x)


def weight_vector(expl: WeightedExplanation, n: int) -> np.ndarray:
    w = np.zeros(n)
    for k, v in expl.weights.items():
        w[k] = v
    return w


def average_rank(weights, index: int) -> float:
    """1-based rank of ``weights[index]`` in descending order; ties share their mean rank."""
    w = np.asarray(weights, dtype=np.float64)
    higher = int(np.sum(w > w[index]))
    ties = int(np.sum(w == w[index]))
    return higher + (ties + 1) / 2.0


def in_bottom_quartile(weights, index: int) -> bool:
    w = np.asarray(weights, dtype=np.float64)
    return bool(w[index] <= np.percentile(w, 25))


class NoDonorError(LookupError):
    pass


def distant_users(g, user: int) -> list:
    """Users sharing no item and no item attribute with ``user``."""
    from .graph import ATTR

    def footprint(u):
        items = set(g.user_items(u))
        attrs = {int(a) for i in items for a in g.neighbors(i) if g.kinds[a] == ATTR}
        return items, attrs

    mine_i, mine_a = footprint(user)
    out = []
    for v in g.users:
        if v == user:
            continue
        it, at = footprint(int(v))
        if not (it & mine_i) and not (at & mine_a):
            out.append(int(v))
    return out


def pick_pranking_path(rec: Recommender, user: int, item: int, seed: int) -> tuple:
    """A path from a distant user to ``item``, not already among the pair's paths."""
    own = set(rec.pair_paths(user, item))
    pool = sorted(p for v in distant_users(rec.graph, user) for p in rec.pair_paths(v, item) if p not in own)
    if not pool:
        raise NoDonorError(f"no irrelevant donor path for pair ({user}, {item})")
    rng = np.random.default_rng(seed)
    return pool[int(rng.integers(len(pool)))]


def inject_path(rec: Recommender, user: int, item: int, path: tuple):
    """Path list and pooled vectors with ``path`` appended; rejects duplicates."""
    from .embedding import embed_path
    paths = rec.pair_paths(user, item)
    if tuple(path) in set(paths):
        raise ValueError("injected path already belongs to the pair")
    vecs = np.vstack([rec.path_vectors(user, item), embed_path(rec.table, path)[None]])
    return paths + [tuple(path)], vecs


def attention_for_vectors(rec: Recommender, user, item, vecs) -> np.ndarray:
    return rec.attention_weights(user, item, path_override=vecs)
