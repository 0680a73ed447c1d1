"""Explainable-path exploration and temporally constrained random walks."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import ITEM, USER, RecGraph


@dataclass
class PathSet:
    user: int
    item: int
    paths: list = field(default_factory=list)   # tuples of node ids, each ending at ``item``

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass
class TemporalWalks:
    walks: np.ndarray        # (n, walk_len) int64, -1 padded
    edge_times: np.ndarray   # (n, walk_len - 1) float64, nan for untimed / absent edges

    def __len__(self):
        return len(self.walks)

    def __iter__(self):
        for row in self.walks:
            yield row[row >= 0]

    def sequences(self) -> list:
        return [row[row >= 0].tolist() for row in self.walks]


def _owners(g: RecGraph, start: int) -> list:
    if g.kinds[start] == USER:
        return [start]
    return [int(u) for u in g.neighbors(start) if g.kinds[u] == USER]


def qualifying_prefixes(g: RecGraph, walk, min_len: int, max_len: int, terminal: str = "interacted"):
    """Yield ``(owner, prefix)`` for every prefix of ``walk`` that is an explainable path."""
    walk = [int(v) for v in walk if v >= 0]
    if not walk:
        return
    owners = _owners(g, walk[0])
    for n in range(min_len, min(max_len, len(walk)) + 1):
        end = walk[n - 1]
        if g.kinds[end] != ITEM:
            continue
        prefix = tuple(walk[:n])
        for u in owners:
            if terminal == "interacted" and not g.has_edge(u, end):
                continue
            yield u, prefix


def explore_paths(g: RecGraph, min_len: int = 4, max_len: int = 6, walks_per_vertex: int = 10,
                  seed: int = 0, *, item_starts: bool = True, terminal: str = "interacted",
                  max_paths_per_pair: int | None = None) -> dict:
    """Random-walk path exploration from every user (and item) vertex.

    Walks never revisit a vertex. Every prefix of node count in
    ``[min_len, max_len]`` that ends at an item is grouped under
    ``(owner, item)``, where the owner is the start user or, for an item
    start, each user who interacted with it. With ``terminal="interacted"``
    the end item must be a neighbour of the owner; ``"any"`` accepts every
    reachable item.
    """
    if not 2 <= min_len < max_len:
        raise ValueError(f"need 2 <= min_len < max_len, got {min_len}, {max_len}")
    if walks_per_vertex < 1:
        raise ValueError("walks_per_vertex must be >= 1")
    if terminal not in ("interacted", "any"):
        raise ValueError(f"unknown terminal rule {terminal!r}")

    kinds = (USER, ITEM) if item_starts else (USER,)
    starts = np.repeat(np.flatnonzero(np.isin(g.kinds, kinds)), walks_per_vertex).astype(np.int64)
    rng = np.random.default_rng(seed)
    uniforms = rng.random((len(starts), max_len - 1))
    walks = kernels.simple_walks(g.indptr, g.indices, starts, max_len, uniforms)

    sets: dict = {}
    seen: dict = {}
    for walk in walks:
        for owner, prefix in qualifying_prefixes(g, walk, min_len, max_len, terminal):
            key = (owner, prefix[-1])
            if key not in sets:
                sets[key] = PathSet(owner, prefix[-1])
                seen[key] = set()
            if prefix in seen[key]:
                continue
            if max_paths_per_pair is not None and len(sets[key]) >= max_paths_per_pair:
                continue
            seen[key].add(prefix)
            sets[key].paths.append(prefix)
    return sets


def temporal_walks(g: RecGraph, walk_len: int = 20, walks_per_vertex: int = 10, seed: int = 0) -> TemporalWalks:
    """Random walks whose successive interaction-edge timestamps never increase.

    Attribute edges carry no timestamp and neither constrain nor reset the walk.
    """
    if walk_len < 2:
        raise ValueError("walk_len must be >= 2")
    starts = np.repeat(np.arange(g.num_nodes, dtype=np.int64), walks_per_vertex)
    rng = np.random.default_rng(seed)
    uniforms = rng.random((len(starts), walk_len - 1))
    walks, times = kernels.temporal_walks(g.indptr, g.indices, g.edge_time, starts, walk_len, uniforms)
    return TemporalWalks(walks, times)


def paths_for_pair(sets: dict, user: int, item: int) -> PathSet:
    return sets.get((user, item), PathSet(user, item))


def save_path_sets(path, sets: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (u, i), ps in sets.items():
            fh.write(json.dumps({"user": u, "item": i, "paths": [list(p) for p in ps.paths]}) + "\n")


def load_path_sets(path) -> dict:
    sets = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            sets[(rec["user"], rec["item"])] = PathSet(rec["user"], rec["item"],
                                                       [tuple(p) for p in rec["paths"]])
    return sets


def save_walks(path, tw: TemporalWalks) -> None:
    from .blob import write_arrays
    write_arrays(path, {"walks": tw.walks, "edge_times": tw.edge_times})


def load_walks(path) -> TemporalWalks:
    from .blob import read_arrays
    arrays, _ = read_arrays(path)
    return TemporalWalks(arrays["walks"], arrays["edge_times"])
