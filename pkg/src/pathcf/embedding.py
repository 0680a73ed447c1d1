"""Skip-gram node embeddings trained on temporal walks, and path pooling."""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

TABLE_MAGIC = b"PCFEMB01"


@dataclass
class SkipGramConfig:
    dim: int = 100
    window: int = 3
    negatives_per_pair: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0 or self.window < 1 or self.negatives_per_pair < 1 or self.epochs < 0:
            raise ValueError(f"invalid skip-gram config {self}")


@dataclass
class EmbeddingTable:
    vectors: np.ndarray                                  # (num_nodes, dim)
    losses: list = field(default_factory=list)           # mean loss per pair, per epoch
    uncovered: list = field(default_factory=list)        # nodes absent from the corpus

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vectors)

    def __getitem__(self, v):
        v = int(v)
        if not 0 <= v < len(self.vectors):
            raise LookupError(f"no embedding for node {v}")
        return self.vectors[v]

    def coverage_report(self) -> dict:
        return {"nodes": len(self), "uncovered": len(self.uncovered), "uncovered_nodes": list(self.uncovered)}


def _context_pairs(sequences, window):
    centers, contexts = [], []
    for seq in sequences:
        n = len(seq)
        for i in range(n):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    centers.append(seq[i])
                    contexts.append(seq[j])
    return np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


def train_skipgram(walks, cfg: SkipGramConfig, num_nodes: int | None = None) -> EmbeddingTable:
    sequences = [list(map(int, s)) for s in walks]
    sequences = [s for s in sequences if s]
    if not sequences:
        raise ValueError("empty walk corpus")
    top = max(max(s) for s in sequences) + 1
    n = max(top, num_nodes or 0)

    rng = np.random.default_rng(cfg.seed)
    w_in = (rng.random((n, cfg.dim)) - 0.5) / cfg.dim
    w_out = np.zeros((n, cfg.dim))

    counts = np.bincount(np.concatenate([np.asarray(s) for s in sequences]), minlength=n).astype(np.float64)
    uncovered = np.flatnonzero(counts == 0).tolist()
    if uncovered:
        log.warning("%d nodes never occur in the walk corpus; left at random init", len(uncovered))
    noise = counts ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    cdf[-1] = 1.0

    centers, contexts = _context_pairs(sequences, cfg.window)
    n_pairs = len(centers)
    total = max(1, n_pairs * cfg.epochs)
    losses = []
    for epoch in range(cfg.epochs):
        negatives = np.searchsorted(cdf, rng.random((n_pairs, cfg.negatives_per_pair)), side="right")
        negatives = np.minimum(negatives, n - 1).astype(np.int64)
        progress = (epoch * n_pairs + np.arange(n_pairs)) / total
        lrs = cfg.learning_rate * np.maximum(1.0 - progress, 1e-4)
        loss = kernels.sgns_epoch(w_in, w_out, centers, contexts, negatives, lrs)
        losses.append(loss / max(1, n_pairs))
        log.debug("skip-gram epoch %d: loss %.4f", epoch, losses[-1])
    return EmbeddingTable(w_in, losses, uncovered)


def embed_path(table: EmbeddingTable, path) -> np.ndarray:
    """Average pooling of the node vectors on ``path``."""
    rows = [table[v] for v in path]
    return np.mean(rows, axis=0)


def embed_paths(table: EmbeddingTable, paths) -> np.ndarray:
    if not len(paths):
        return np.zeros((0, table.dim))
    return np.stack([embed_path(table, p) for p in paths])


def save_table(table: EmbeddingTable, path, labels=None) -> tuple[Path, Path]:
    """Binary table (header + little-endian float32 rows) plus a JSON manifest."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<II", table.dim, len(table)))
        fh.write(table.vectors.astype("<f4").tobytes())
    manifest = path.with_suffix(".json")
    body = {
        "dim": table.dim,
        "count": len(table),
        "losses": [round(float(x), 10) for x in table.losses],
        "uncovered": list(table.uncovered),
        "labels": {str(lbl): i for i, lbl in enumerate(labels)} if labels is not None else None,
    }
    manifest.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    return path, manifest


def load_table(path) -> EmbeddingTable:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != TABLE_MAGIC:
        raise ValueError(f"{path}: not an embedding table")
    dim, count = struct.unpack("<II", raw[8:16])
    vecs = np.frombuffer(raw[16:16 + 4 * dim * count], dtype="<f4").reshape(count, dim).astype(np.float64)
    losses, uncovered = [], []
    manifest = path.with_suffix(".json")
    if manifest.exists():
        meta = json.loads(manifest.read_text())
        losses, uncovered = meta.get("losses", []), meta.get("uncovered", [])
    return EmbeddingTable(vecs, losses, uncovered)
