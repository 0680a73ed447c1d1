"""Heterogeneous user/item/attribute graph built from two TSV files.

Interactions: ``user_id<TAB>item_id<TAB>timestamp``
Metadata:     ``item_id<TAB>attr_class<TAB>attr_value``

Node ids are dense integers assigned users first, then items, then
attributes, each in first-seen file order.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blob import read_arrays, write_arrays

log = logging.getLogger(__name__)

USER, ITEM, ATTR = 0, 1, 2
KIND_NAMES = {USER: "User", ITEM: "Item", ATTR: "Attribute"}
SNAPSHOT_VERSION = 1


class ParseError(ValueError):
    pass


class EmptyDataError(ValueError):
    pass


@dataclass(frozen=True)
class Interaction:
    user: str
    item: str
    timestamp: int


@dataclass(frozen=True)
class AttributeRow:
    item: str
    attr_class: str
    attr_value: str


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_interactions(path, min_item_count: int = 0) -> list[Interaction]:
    """Read interaction rows, keeping items seen more than ``min_item_count`` times."""
    records = []
    for lineno, cols in _rows(path):
        if lineno == 1 and cols == ["user_id", "item_id", "timestamp"]:
            continue
        if len(cols) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(cols)}")
        user, item, ts = (c.strip() for c in cols)
        if not user or not item:
            raise ParseError(f"{path}:{lineno}: empty user or item id")
        try:
            stamp = int(ts)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: timestamp {ts!r} is not an integer") from None
        records.append(Interaction(user, item, stamp))

    counts = Counter(r.item for r in records)
    kept = [r for r in records if counts[r.item] > min_item_count]
    if not kept:
        raise EmptyDataError(f"{path}: empty after filtering (min_item_count={min_item_count})")
    return kept


def load_metadata(path) -> list[AttributeRow]:
    rows = []
    for lineno, cols in _rows(path):
        if lineno == 1 and cols == ["item_id", "attr_class", "attr_value"]:
            continue
        if len(cols) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(cols)}")
        item, cls, value = (c.strip() for c in cols)
        if not item or not cls or not value:
            raise ParseError(f"{path}:{lineno}: empty field")
        rows.append(AttributeRow(item, cls, value))
    return rows


@dataclass
class RecGraph:
    kinds: np.ndarray                  # int8 per node
    attr_class: list                   # str for attributes, None otherwise
    labels: list                       # external label per node
    indptr: np.ndarray                 # CSR over sorted neighbours
    indices: np.ndarray
    edge_time: np.ndarray              # float64, nan for untimed edges
    interaction_log: dict = field(default_factory=dict)   # user -> [(item, ts)] ascending
    skipped_attribute_rows: int = 0

    def __post_init__(self):
        self._index = {}
        for nid, (kind, label) in enumerate(zip(self.kinds.tolist(), self.labels)):
            self._index[(kind, label)] = nid

    @property
    def num_nodes(self) -> int:
        return len(self.kinds)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def nodes_of(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kinds == kind)

    @property
    def users(self) -> np.ndarray:
        return self.nodes_of(USER)

    @property
    def items(self) -> np.ndarray:
        return self.nodes_of(ITEM)

    @property
    def attributes(self) -> np.ndarray:
        return self.nodes_of(ATTR)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def neighbor_times(self, v: int) -> np.ndarray:
        return self.edge_time[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, a: int, b: int) -> bool:
        nbrs = self.neighbors(a)
        k = np.searchsorted(nbrs, b)
        return bool(k < len(nbrs) and nbrs[k] == b)

    def node_type(self, v: int):
        return int(self.kinds[v]), self.attr_class[v]

    def node_id(self, kind: int, label: str) -> int:
        return self._index[(kind, label)]

    def user_id(self, label: str) -> int:
        return self._index[(USER, label)]

    def item_id(self, label: str) -> int:
        return self._index[(ITEM, label)]

    def user_items(self, u: int) -> list:
        return [i for i, _ in self.interaction_log.get(u, [])]

    def summary(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "users": int(np.sum(self.kinds == USER)),
            "items": int(np.sum(self.kinds == ITEM)),
            "attributes": int(np.sum(self.kinds == ATTR)),
            "attribute_classes": dict(sorted(Counter(c for c in self.attr_class if c is not None).items())),
            "nodes": self.num_nodes,
            "edges": self.num_edges,
            "interactions": sum(len(v) for v in self.interaction_log.values()),
            "skipped_attribute_rows": self.skipped_attribute_rows,
        }


def build_graph(interactions, attributes) -> RecGraph:
    users, items, attrs = {}, {}, {}
    for r in interactions:
        users.setdefault(r.user, len(users))
        items.setdefault(r.item, len(items))

    n_u, n_i = len(users), len(items)
    attr_edges = []
    skipped = 0
    for row in attributes:
        if row.item not in items:
            skipped += 1
            continue
        key = (row.attr_class, row.attr_value)
        attrs.setdefault(key, len(attrs))
        attr_edges.append((n_u + items[row.item], n_u + n_i + attrs[key]))
    if skipped:
        log.warning("skipped %d metadata rows referencing unknown items", skipped)

    n = n_u + n_i + len(attrs)
    kinds = np.empty(n, dtype=np.int8)
    kinds[:n_u], kinds[n_u:n_u + n_i], kinds[n_u + n_i:] = USER, ITEM, ATTR
    labels = list(users) + list(items) + [f"{c}:{v}" for c, v in attrs]
    attr_class = [None] * (n_u + n_i) + [c for c, _ in attrs]

    # one edge per (user, item); timestamp of the first interaction
    first_seen = {}
    log_ = {}
    for r in interactions:
        u, i = users[r.user], n_u + items[r.item]
        log_.setdefault(u, []).append((i, r.timestamp))
        key = (u, i)
        if key not in first_seen or r.timestamp < first_seen[key]:
            first_seen[key] = r.timestamp
    for u in log_:
        log_[u].sort(key=lambda it: it[1])   # stable: file order breaks ties

    edges = {}
    for (u, i), t in first_seen.items():
        edges[(u, i)] = float(t)
    for a, b in attr_edges:
        edges.setdefault((a, b), np.nan)

    src, dst, tim = [], [], []
    for (a, b), t in edges.items():
        src += [a, b]
        dst += [b, a]
        tim += [t, t]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    tim = np.asarray(tim, dtype=np.float64)
    order = np.lexsort((dst, src))
    src, dst, tim = src[order], dst[order], tim[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)

    return RecGraph(kinds, attr_class, labels, indptr, dst, tim, log_, skipped)


def two_hop_same_type(g: RecGraph, v: int) -> list:
    """Nodes reachable by a 2-edge walk from ``v`` with the same kind and attribute class."""
    kind, cls = g.node_type(v)
    out = set()
    for x in g.neighbors(v):
        for u in g.neighbors(x):
            if u != v and g.kinds[u] == kind and g.attr_class[u] == cls:
                out.add(int(u))
    return sorted(out)


def save_graph(g: RecGraph, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>.bin`` (arrays) and ``<prefix>.json`` (node-count summary)."""
    prefix = Path(prefix)
    log_users, log_items, log_times = [], [], []
    for u in sorted(g.interaction_log):
        for i, t in g.interaction_log[u]:
            log_users.append(u)
            log_items.append(i)
            log_times.append(t)
    snap = prefix.with_suffix(".bin")
    write_arrays(
        snap,
        {
            "kinds": g.kinds,
            "indptr": g.indptr,
            "indices": g.indices,
            "edge_time": g.edge_time,
            "log_users": np.asarray(log_users, dtype=np.int64),
            "log_items": np.asarray(log_items, dtype=np.int64),
            "log_times": np.asarray(log_times, dtype=np.int64),
        },
        meta={
            "version": SNAPSHOT_VERSION,
            "labels": g.labels,
            "attr_class": g.attr_class,
            "skipped_attribute_rows": g.skipped_attribute_rows,
        },
    )
    side = prefix.with_suffix(".json")
    side.write_text(json.dumps(g.summary(), indent=2, sort_keys=True) + "\n")
    return snap, side


def load_graph(prefix) -> RecGraph:
    arrays, meta = read_arrays(Path(prefix).with_suffix(".bin"))
    if meta.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported graph snapshot version {meta.get('version')}")
    log_ = {}
    for u, i, t in zip(arrays["log_users"].tolist(), arrays["log_items"].tolist(),
                       arrays["log_times"].tolist()):
        log_.setdefault(u, []).append((i, t))
    return RecGraph(arrays["kinds"], meta["attr_class"], meta["labels"], arrays["indptr"],
                    arrays["indices"], arrays["edge_time"], log_, meta["skipped_attribute_rows"])
