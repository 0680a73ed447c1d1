"""Counterfactual edits of path structure learned with a policy gradient.

An episode selects a set of (path, position) slots with independent
Bernoulli draws from a small policy network, swaps each selected vertex for a
random two-hop neighbour of the same type, re-scores the pair and receives a
terminal reward that trades the score drop against the number of edits.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingTable, embed_paths
from .graph import two_hop_same_type

log = logging.getLogger(__name__)

NO_EDIT_PENALTY = -200.0


class PolicyDivergedError(RuntimeError):
    pass


@dataclass
class RewardConfig:
    zeta: float = 10.0
    epsilon: float = 10.0
    eta: float = 100.0
    no_edit_penalty: float = NO_EDIT_PENALTY

    def __post_init__(self):
        if min(self.zeta, self.epsilon, self.eta) <= 0:
            raise ValueError("zeta, epsilon and eta must be positive")


@dataclass
class PolicyConfig:
    hidden: int = 16
    init_prob: float = 0.5
    learning_rate: float = 0.003
    epochs: int = 50
    episodes_per_epoch: int = 8
    seed: int = 0


def reward(cfg: RewardConfig, num_paths_edited: int, num_nodes_replaced: int, delta_s: float) -> float:
    if num_nodes_replaced == 0:
        return cfg.no_edit_penalty
    if delta_s <= 0:
        return 0.0
    return -cfg.zeta * num_paths_edited - cfg.epsilon * num_nodes_replaced + cfg.eta * delta_s


@dataclass
class Action:
    selections: list                                   # [(path_index, position)]
    replacements: dict = field(default_factory=dict)   # (path_index, position) -> node

    @property
    def num_nodes(self) -> int:
        return len(self.replacements)

    @property
    def edited_paths(self) -> list:
        return sorted({pi for pi, _ in self.replacements})


@dataclass
class Episode:
    epoch: int
    episode: int
    action: Action
    delta_s: float
    reward: float

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch,
            "episode": self.episode,
            "selections": [list(s) for s in self.action.selections],
            "replacements": [[pi, pos, int(v)] for (pi, pos), v in sorted(self.action.replacements.items())],
            "delta_s": round(self.delta_s, 12),
            "reward": round(self.reward, 9),
        }


class StructEnv:
    """Single-step environment for one (user, item) pair.

    ``score_fn(paths) -> float`` scores the pair given an edited path list.
    """

    def __init__(self, g, table: EmbeddingTable, user: int, item: int, paths, score_fn,
                 reward_cfg: RewardConfig | None = None):
        self.g = g
        self.table = table
        self.user, self.item = user, item
        self.paths = [tuple(int(v) for v in p) for p in paths]
        if not self.paths:
            raise ValueError(f"pair ({user}, {item}) has no paths")
        self.score_fn = score_fn
        self.reward_cfg = reward_cfg or RewardConfig()
        self.score = float(score_fn(self.paths))
        self.slots, self.candidates = candidate_actions(g, self.paths)
        self.features = self._features()

    def _features(self) -> np.ndarray:
        d = self.table.dim
        feats = np.zeros((len(self.slots), 2 * d + 1))
        means = embed_paths(self.table, self.paths)
        for k, (pi, pos) in enumerate(self.slots):
            feats[k, :d] = self.table[self.paths[pi][pos]]
            feats[k, d:2 * d] = means[pi]
            feats[k, -1] = self.score
        return feats

    def apply(self, action: Action) -> list:
        edited = [list(p) for p in self.paths]
        for (pi, pos), v in action.replacements.items():
            edited[pi][pos] = v
        return [tuple(p) for p in edited]

    def evaluate(self, action: Action) -> tuple[float, float]:
        """(delta_s, reward) for ``action``."""
        if action.num_nodes == 0:
            return 0.0, reward(self.reward_cfg, 0, 0, 0.0)
        delta = self.score - float(self.score_fn(self.apply(action)))
        return delta, reward(self.reward_cfg, len(action.edited_paths), action.num_nodes, delta)


def candidate_actions(g, paths) -> tuple[list, list]:
    """Editable (path_index, position) slots and their replacement candidates.

    Endpoints are never editable; positions without candidates are dropped.
    """
    cache: dict = {}
    slots, cands = [], []
    for pi, path in enumerate(paths):
        for pos in range(1, len(path) - 1):
            v = int(path[pos])
            if v not in cache:
                cache[v] = two_hop_same_type(g, v)
            if cache[v]:
                slots.append((pi, pos))
                cands.append(cache[v])
    return slots, cands


@dataclass
class Policy:
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    @classmethod
    def init(cls, n_in: int, hidden: int, seed: int, init_prob: float = 0.5) -> "Policy":
        if not 0.0 < init_prob < 1.0:
            raise ValueError("init_prob must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, 1.0 / np.sqrt(n_in), (hidden, n_in)), np.zeros(hidden),
                   rng.normal(0.0, 0.1 / np.sqrt(hidden), hidden), float(np.log(init_prob / (1 - init_prob))))

    def copy(self) -> "Policy":
        return Policy(self.W1.copy(), self.b1.copy(), self.w2.copy(), self.b2)

    def _hidden(self, feats):
        return np.tanh(feats @ self.W1.T + self.b1)

    def probs(self, feats) -> np.ndarray:
        logit = np.clip(self._hidden(feats) @ self.w2 + self.b2, -30.0, 30.0)
        return 1.0 / (1.0 + np.exp(-logit))

    def grad_log_prob(self, feats, sel: np.ndarray) -> tuple:
        """Gradient of log pi(sel) for independent Bernoulli slots."""
        hid = self._hidden(feats)
        p = self.probs(feats)
        dlogit = sel - p
        dhid = np.outer(dlogit, self.w2) * (1.0 - hid ** 2)
        return dhid.T @ feats, dhid.sum(axis=0), hid.T @ dlogit, float(dlogit.sum())


def run_episode(env: StructEnv, policy: Policy, rng: np.random.Generator, epoch: int = 0,
                index: int = 0) -> tuple[Episode, np.ndarray]:
    """Sample one joint selection and replacement. Returns the episode and the selection mask."""
    if not env.slots:
        return Episode(epoch, index, Action([]), 0.0, env.reward_cfg.no_edit_penalty), np.zeros(0)
    p = policy.probs(env.features)
    if not np.all(np.isfinite(p)):
        raise PolicyDivergedError(f"policy produced non-finite output at epoch {epoch}")
    sel = rng.random(len(p)) < p
    picks = rng.random(len(p))
    action = Action([])
    for k in np.flatnonzero(sel):
        slot = env.slots[k]
        cands = env.candidates[k]
        action.selections.append(slot)
        action.replacements[slot] = cands[min(int(picks[k] * len(cands)), len(cands) - 1)]
    delta, r = env.evaluate(action)
    return Episode(epoch, index, action, delta, r), sel.astype(np.float64)


@dataclass
class TrainingCurves:
    mean_reward: list = field(default_factory=list)
    mean_F: list = field(default_factory=list)

    def to_csv(self) -> str:
        rows = ["epoch,mean_reward,mean_F"]
        rows += [f"{e},{r:.6f},{f:.6f}" for e, (r, f) in enumerate(zip(self.mean_reward, self.mean_F))]
        return "\n".join(rows) + "\n"


def train_policy(env: StructEnv, cfg: PolicyConfig) -> tuple[Policy, TrainingCurves, list]:
    """REINFORCE with a running-mean reward baseline. Returns (policy, curves, episodes)."""
    policy = Policy.init(env.features.shape[1], cfg.hidden, cfg.seed, cfg.init_prob)
    curves = TrainingCurves()
    episodes = []
    seen_rewards = []
    for epoch in range(cfg.epochs):
        batch = []
        for e in range(cfg.episodes_per_epoch):
            rng = np.random.default_rng([cfg.seed, epoch, e])
            ep, sel = run_episode(env, policy, rng, epoch, e)
            batch.append((ep, sel))
            episodes.append(ep)
        rewards = np.array([ep.reward for ep, _ in batch])
        baseline = np.mean(seen_rewards) if seen_rewards else rewards.mean()
        if env.slots:
            gW1, gb1, gw2, gb2 = (np.zeros_like(policy.W1), np.zeros_like(policy.b1),
                                  np.zeros_like(policy.w2), 0.0)
            for (ep, sel), r in zip(batch, rewards):
                dW1, db1, dw2, db2 = policy.grad_log_prob(env.features, sel)
                adv = (r - baseline) / len(batch)
                gW1 += adv * dW1
                gb1 += adv * db1
                gw2 += adv * dw2
                gb2 += adv * db2
            policy.W1 += cfg.learning_rate * gW1
            policy.b1 += cfg.learning_rate * gb1
            policy.w2 += cfg.learning_rate * gw2
            policy.b2 += cfg.learning_rate * gb2
        seen_rewards.extend(rewards.tolist())
        curves.mean_reward.append(float(rewards.mean()))
        curves.mean_F.append(float(np.mean([ep.action.num_nodes for ep, _ in batch])))
        if not (np.all(np.isfinite(policy.W1)) and np.isfinite(policy.b2)):
            raise PolicyDivergedError(f"policy parameters diverged at epoch {epoch}")
    return policy, curves, episodes


@dataclass
class StructExplanation:
    user: int
    item: int
    paths: list                      # original paths
    edited_paths: list               # winning edited path list
    credits: dict                    # path_index -> credited delta_s
    reward: float
    delta_s: float
    empty: bool = False

    def weights(self) -> dict:
        total = sum(self.credits.values())
        if total <= 0:
            return {}
        return {k: v / total for k, v in self.credits.items()}


def best_explanation(env: StructEnv, episodes) -> StructExplanation:
    """Highest-reward episode among those that lowered the score.

    Episodes with no edit or no score drop cannot explain anything, so they
    never win even when their reward (0) beats every costly counterfactual.
    """
    if not episodes:
        raise ValueError("no episodes to choose from")
    cf = [ep for ep in episodes if ep.delta_s > 0 and ep.action.num_nodes > 0]
    if not cf:
        top = max(ep.reward for ep in episodes)
        log.warning("pair (%d, %d): no counterfactual episode (best reward %.3f)", env.user, env.item, top)
        return StructExplanation(env.user, env.item, env.paths, env.paths, {}, top, 0.0, True)
    best = max(cf, key=lambda ep: ep.reward)     # first maximum wins ties
    edited = best.action.edited_paths
    credit = best.delta_s / len(edited)
    return StructExplanation(env.user, env.item, env.paths, env.apply(best.action),
                             {pi: credit for pi in edited}, best.reward, best.delta_s, False)


def exhaustive_single_edit(env: StructEnv) -> tuple[float, Action | None]:
    """Best reward over every single-vertex replacement (brute-force reference)."""
    best_r, best_a = -np.inf, None
    for slot, cands in zip(env.slots, env.candidates):
        for v in cands:
            a = Action([slot], {slot: v})
            _, r = env.evaluate(a)
            if r > best_r:
                best_r, best_a = r, a
    return best_r, best_a


def intersect_explanations(repr_expl, struct_expl: StructExplanation) -> list:
    """Paths selected by both explainers, as ``[(path_index, path, weight)]``.

    Paths are matched by their original vertex sequence; weights are the
    representation weights renormalised over the intersection.
    """
    if (repr_expl.user, repr_expl.item) != (struct_expl.user, struct_expl.item):
        raise ValueError("explanations refer to different pairs")
    credited = {tuple(struct_expl.paths[pi]) for pi in struct_expl.credits}
    common = [r for r in repr_expl.records if r.selected and tuple(r.path) in credited]
    total = sum(r.normalized_weight for r in common)
    if not common or total <= 0:
        warnings.warn(f"empty explanation intersection for pair ({repr_expl.user}, {repr_expl.item})",
                      stacklevel=2)
        return []
    return [(r.path_index, tuple(r.path), r.normalized_weight / total) for r in common]


def recommender_score_fn(rec, user: int, item: int):
    """Scorer that re-pools edited paths and scores them through the backend."""
    table = rec.table

    def fn(paths):
        return rec.score_pair(user, item, path_override=embed_paths(table, paths))
    return fn


def explain_pair(rec, user: int, item: int, cfg: PolicyConfig, reward_cfg: RewardConfig | None = None):
    paths = rec.pair_paths(user, item)
    env = StructEnv(rec.graph, rec.table, user, item, paths, recommender_score_fn(rec, user, item), reward_cfg)
    policy, curves, episodes = train_policy(env, cfg)
    return best_explanation(env, episodes), curves, episodes


def save_traces(path, episodes) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps(ep.to_json(), sort_keys=True) + "\n")
