"""Counterfactual perturbations of path embeddings.

For each path of a (user, item) pair a vector gamma is learned that, added to
that path's embedding, lowers the score as much as possible while staying
small. Paths whose optimised perturbation lowers the score are selected, and
their score drops become explanation weights.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .backend import Recommender, enhance_backward, enhance_forward, head_backward, head_forward

log = logging.getLogger(__name__)


@dataclass
class CfReprConfig:
    alpha: float = 0.1
    beta: float = 0.5
    lam: float = 5.0
    learning_rate: float = 0.05
    steps: int = 50
    max_halvings: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.lam) < 0:
            raise ValueError("alpha, beta and lambda must be non-negative")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class Perturbation:
    user: int
    item: int
    path_index: int
    gamma: np.ndarray


@dataclass
class PathRecord:
    path_index: int
    path: tuple
    delta_s: float
    selected: bool
    normalized_weight: float


@dataclass
class ReprExplanation:
    user: int
    item: int
    score: float
    records: list = field(default_factory=list)

    def selected(self) -> list:
        return [r for r in self.records if r.selected]

    def weights(self) -> dict:
        """Normalised weight per selected path index."""
        return {r.path_index: r.normalized_weight for r in self.records if r.selected}


def loss_l1(gamma, alpha) -> float:
    gamma = np.asarray(gamma, dtype=np.float64)
    return float(gamma @ gamma + alpha * np.abs(gamma).sum())


def loss_l2(s_orig, s_pert) -> float:
    return float(-s_orig + s_pert)


def total_loss(gamma, s_orig, s_pert, cfg: CfReprConfig) -> float:
    return loss_l1(gamma, cfg.alpha) + cfg.lam * max(0.0, cfg.beta + loss_l2(s_orig, s_pert))


class _PairProblem:
    """One row per path; row z perturbs path z at the candidate position.

    History positions do not depend on gamma, so their enhanced vectors are
    computed once and only the candidate position is re-enhanced.
    """

    def __init__(self, rec: Recommender, user: int, item: int, path_vecs=None):
        self.rec = rec
        p = rec.params
        base = rec.make_batch([rec.sample(user, item, path_vecs)])
        self.n = int(base.path_mask[0, -1].sum())
        n = max(self.n, 1)
        H1, _ = enhance_forward(p, base.items, base.paths, base.path_mask)
        self.hist = np.repeat(H1[:, :-1], n, axis=0)
        self.mask = np.repeat(base.pos_mask, n, axis=0)
        self.h = np.repeat(base.items[:, -1:], n, axis=0)
        self.X = np.repeat(base.paths[:, -1:, :self.n], n, axis=0)
        self.Q = np.repeat(base.path_mask[:, -1:, :self.n], n, axis=0)
        self.rows = np.arange(self.n)
        _, s, _ = head_forward(p, H1, base.pos_mask)
        self.s_orig = float(s[0])

    def _run(self, gammas):
        X = self.X.copy()
        X[self.rows, 0, self.rows] += gammas
        Hc, ecache = enhance_forward(self.rec.params, self.h, X, self.Q)
        _, s, hcache = head_forward(self.rec.params, np.concatenate([self.hist, Hc], axis=1), self.mask)
        return s, ecache, hcache

    def scores(self, gammas) -> np.ndarray:
        return self._run(gammas)[0]

    def losses_and_grads(self, gammas, cfg: CfReprConfig):
        s, ecache, hcache = self._run(gammas)
        hinge = cfg.beta - self.s_orig + s
        active = hinge > 0
        l1 = np.sum(gammas ** 2, axis=1) + cfg.alpha * np.abs(gammas).sum(axis=1)
        losses = l1 + cfg.lam * np.maximum(hinge, 0.0)
        dlogit = cfg.lam * active * s * (1.0 - s)
        dH1 = head_backward(self.rec.params, hcache, dlogit)
        dX, _ = enhance_backward(self.rec.params, ecache, dH1[:, -1:])
        grads = 2.0 * gammas + cfg.alpha * np.sign(gammas) + dX[self.rows, 0, self.rows]
        return losses, grads, s


def perturbation_gradient(rec: Recommender, user: int, item: int, path_index: int, gamma,
                          cfg: CfReprConfig) -> np.ndarray:
    """Exact gradient of the total loss with respect to one path's gamma."""
    prob = _PairProblem(rec, user, item)
    if not 0 <= path_index < prob.n:
        raise IndexError(f"path index {path_index} out of range for {prob.n} paths")
    gammas = np.zeros((prob.n, rec.cfg.dim))
    gammas[path_index] = gamma
    _, grads, _ = prob.losses_and_grads(gammas, cfg)
    return grads[path_index]


def optimize_pair(rec: Recommender, user: int, item: int, cfg: CfReprConfig, path_vecs=None,
                  paths=None, trace: list | None = None):
    """Optimise every path's gamma for one pair. Returns (perturbations, explanation)."""
    prob = _PairProblem(rec, user, item, path_vecs)
    if paths is None:
        paths = rec.pair_paths(user, item)
    if prob.n == 0:
        return [], ReprExplanation(user, item, prob.s_orig, [])

    gammas = np.zeros((prob.n, rec.cfg.dim))
    losses, grads, _ = prob.losses_and_grads(gammas, cfg)
    if trace is not None:
        trace.append(losses.copy())
    for _ in range(cfg.steps):
        lr = np.full(prob.n, cfg.learning_rate)
        pending = np.ones(prob.n, bool)
        new_g = gammas.copy()
        for _ in range(cfg.max_halvings + 1):
            trial = np.where(pending[:, None], gammas - lr[:, None] * grads, new_g)
            t_losses, _, _ = prob.losses_and_grads(trial, cfg)
            ok = pending & (t_losses <= losses)
            new_g[ok] = trial[ok]
            pending &= ~ok
            if not pending.any():
                break
            lr[pending] *= 0.5
        # rows still pending keep their previous gamma
        gammas = new_g
        losses, grads, _ = prob.losses_and_grads(gammas, cfg)
        if trace is not None:
            trace.append(losses.copy())

    delta = prob.s_orig - prob.scores(gammas)
    selected = delta > 0
    total = float(delta[selected].sum())
    records = []
    for z in range(prob.n):
        w = float(delta[z] / total) if selected[z] and total > 0 else 0.0
        records.append(PathRecord(z, tuple(paths[z]) if z < len(paths) else (), float(delta[z]),
                                  bool(selected[z]), w))
    perts = [Perturbation(user, item, z, gammas[z].copy()) for z in range(prob.n)]
    return perts, ReprExplanation(user, item, prob.s_orig, records)


def optimize_perturbations(rec: Recommender, pairs, cfg: CfReprConfig):
    perts, expls = [], []
    for u, i in pairs:
        if not rec.pair_paths(u, i):
            log.warning("pair (%d, %d) has no paths; skipped", u, i)
            continue
        p, e = optimize_pair(rec, u, i, cfg)
        perts.extend(p)
        expls.append(e)
    return perts, expls


def save_explanations(path, expls, seed: int, method: str = "repr") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in expls:
            for r in e.records:
                fh.write(json.dumps({
                    "user": e.user, "item": e.item, "path_index": r.path_index, "path": list(r.path),
                    "delta_s": round(r.delta_s, 12), "selected": r.selected,
                    "normalized_weight": round(r.normalized_weight, 12), "method": method, "seed": seed,
                }, sort_keys=True) + "\n")


def load_explanations(path) -> list:
    by_pair: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            key = (rec["user"], rec["item"])
            e = by_pair.setdefault(key, ReprExplanation(rec["user"], rec["item"], float("nan")))
            e.records.append(PathRecord(rec["path_index"], tuple(rec["path"]), rec["delta_s"],
                                        rec["selected"], rec["normalized_weight"]))
    return list(by_pair.values())
