"""Path-based sequential recommender with hand-written reverse-mode gradients.

Per (user, candidate) sample the model sees the user's recent items plus the
candidate as the final position. Every position's item vector is enhanced
by the embeddings of the paths leading from the user to that item:

    a_z  = softmax_z( u2 . tanh(Wh h + Wx x_z + b1) )
    h'   = relu(W_item h + Z * W_path sum_z a_z x_z + b) * h

(with a_z = 1/Z this is the plain path sum). A single self-attention block
with learned position embeddings and a feed-forward layer reads out the last
position, and a two-layer MLP maps it to a sigmoid score.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingTable, embed_paths

log = logging.getLogger(__name__)

ENHANCE_MODES = ("attention", "uniform", "none")
ENCODERS = ("transformer", "mean")


class ColdUserError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class BackendConfig:
    dim: int = 100
    att_hidden: int | None = None
    max_history: int = 5
    max_paths: int = 40
    enhance: str = "attention"
    encoder: str = "transformer"

    def __post_init__(self):
        if self.enhance not in ENHANCE_MODES:
            raise ValueError(f"enhance must be one of {ENHANCE_MODES}")
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}")
        if self.att_hidden is None:
            self.att_hidden = self.dim

    @property
    def seq_len(self) -> int:
        return self.max_history + 1


def param_shapes(cfg: BackendConfig) -> dict:
    d, k, m, t = cfg.dim, cfg.att_hidden, max(1, cfg.dim // 2), cfg.seq_len
    return {
        "W_item": (d, d), "W_path": (d, d), "b": (d,),
        "att_Wh": (k, d), "att_Wx": (k, d), "att_b1": (k,), "att_u2": (k,),
        "pos": (t, d),
        "Wq": (d, d), "Wk": (d, d), "Wv": (d, d),
        "ff_W1": (d, d), "ff_b1": (d,), "ff_W2": (d, d), "ff_b2": (d,),
        "mlp_W1": (m, d), "mlp_b1": (m,), "mlp_w2": (m,), "mlp_b2": (1,),
    }


@dataclass
class BackendParams:
    arrays: dict
    cfg: BackendConfig
    seed: int = 0
    epoch: int = 0

    def __getattr__(self, name):
        try:
            return self.__dict__["arrays"][name]
        except KeyError:
            raise AttributeError(name) from None

    @classmethod
    def init(cls, cfg: BackendConfig, seed: int = 0) -> "BackendParams":
        rng = np.random.default_rng(seed)
        arrays = {}
        for name, shape in param_shapes(cfg).items():
            if len(shape) == 2:
                arrays[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[1]), size=shape)
            else:
                arrays[name] = np.zeros(shape)
        # output vectors start random; zero would freeze the layers beneath them
        arrays["att_u2"] = rng.normal(0.0, 1.0, size=arrays["att_u2"].shape)
        arrays["mlp_w2"] = rng.normal(0.0, 1.0 / np.sqrt(len(arrays["mlp_w2"])), size=arrays["mlp_w2"].shape)
        arrays["pos"] *= 0.1
        return cls(arrays, cfg, seed, 0)

    def copy(self) -> "BackendParams":
        return BackendParams({k: v.copy() for k, v in self.arrays.items()}, self.cfg, self.seed, self.epoch)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[k].ravel() for k in param_shapes(self.cfg)])

    def with_flat(self, theta: np.ndarray) -> "BackendParams":
        out, pos = {}, 0
        for name, shape in param_shapes(self.cfg).items():
            n = int(np.prod(shape))
            out[name] = theta[pos:pos + n].reshape(shape).copy()
            pos += n
        return BackendParams(out, self.cfg, self.seed, self.epoch)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.arrays.values())


@dataclass
class Batch:
    items: np.ndarray        # (B, T, d)
    pos_mask: np.ndarray     # (B, T) bool, right-aligned; last position always valid
    paths: np.ndarray        # (B, T, P, d)
    path_mask: np.ndarray    # (B, T, P) bool

    def __len__(self):
        return len(self.items)


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def masked_softmax(e, mask):
    e = np.where(mask, e, -np.inf)
    top = np.max(e, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    ex = np.where(mask, np.exp(e - top), 0.0)
    den = ex.sum(axis=-1, keepdims=True)
    return np.divide(ex, den, out=np.zeros_like(ex), where=den > 0)


def enhance_forward(p: BackendParams, h, X, Q):
    """Path-enhanced item vectors for (B, T) positions. Returns (H1, cache)."""
    cfg, A = p.cfg, p.arrays
    cache = {"h": h, "X": X, "Q": Q}
    if cfg.enhance == "none":
        return h, cache
    zc = Q.sum(axis=-1).astype(np.float64)                      # (B,T)
    if cfg.enhance == "attention":
        U = np.tanh(X @ A["att_Wx"].T + (h @ A["att_Wh"].T)[:, :, None, :] + A["att_b1"])
        a = masked_softmax(U @ A["att_u2"], Q)                  # (B,T,P)
        cache["U"] = U
    else:
        a = np.divide(Q, zc[..., None], out=np.zeros(Q.shape), where=zc[..., None] > 0)
    xbar = np.einsum("btp,btpd->btd", a, X)
    pre = h @ A["W_item"].T + zc[..., None] * (xbar @ A["W_path"].T) + A["b"]
    gate = _relu(pre)
    cache.update(zc=zc, a=a, xbar=xbar, pre=pre, gate=gate)
    return gate * h, cache


def enhance_backward(p: BackendParams, cache: dict, dH1, G=None):
    """Returns (d_paths, d_items); accumulates parameter gradients into ``G`` when given."""
    cfg, A = p.cfg, p.arrays
    h, X, Q = cache["h"], cache["X"], cache["Q"]
    dX = np.zeros_like(X)
    if cfg.enhance == "none":
        return dX, dH1
    zc, a, xbar, pre, gate = (cache[k] for k in ("zc", "a", "xbar", "pre", "gate"))
    dh = dH1 * gate
    dpre = dH1 * h * (pre > 0)
    dh += dpre @ A["W_item"]
    dpath = zc[..., None] * dpre                       # gradient wrt W_path xbar
    dxbar = dpath @ A["W_path"]
    dX += a[..., None] * dxbar[:, :, None, :]
    if G is not None:
        G["W_item"] += np.einsum("btd,bte->de", dpre, h)
        G["b"] += dpre.sum(axis=(0, 1))
        G["W_path"] += np.einsum("btd,bte->de", dpath, xbar)

    if cfg.enhance == "attention":
        U = cache["U"]
        da = np.einsum("btd,btpd->btp", dxbar, X)
        de = a * (da - np.sum(a * da, axis=-1, keepdims=True))
        dpa = (de[..., None] * A["att_u2"]) * (1.0 - U ** 2)     # (B,T,P,k)
        dpa = dpa * Q[..., None]
        dX += dpa @ A["att_Wx"]
        dh += dpa.sum(axis=2) @ A["att_Wh"]
        if G is not None:
            G["att_u2"] += np.einsum("btp,btpk->k", de, U)
            G["att_Wx"] += np.einsum("btpk,btpd->kd", dpa, X)
            G["att_Wh"] += np.einsum("btk,btd->kd", dpa.sum(axis=2), h)
            G["att_b1"] += dpa.sum(axis=(0, 1, 2))
    return dX, dh


def head_forward(p: BackendParams, H1, M):
    """Sequence encoder plus MLP scorer. Returns (logits, scores, cache)."""
    cfg, A = p.cfg, p.arrays
    cache = {"H1": H1, "M": M}
    if cfg.encoder == "transformer":
        d = cfg.dim
        Xs = H1 + A["pos"][None, -H1.shape[1]:, :]
        xl = Xs[:, -1]
        q = xl @ A["Wq"].T
        K = Xs @ A["Wk"].T
        V = Xs @ A["Wv"].T
        att = masked_softmax(np.einsum("btd,bd->bt", K, q) / np.sqrt(d), M)
        c = np.einsum("bt,btd->bd", att, V)
        r1 = xl + c
        f1 = _relu(r1 @ A["ff_W1"].T + A["ff_b1"])
        out = r1 + f1 @ A["ff_W2"].T + A["ff_b2"]
        cache.update(Xs=Xs, q=q, K=K, V=V, att=att, r1=r1, f1=f1)
    else:
        cnt = M.sum(axis=1, keepdims=True).astype(np.float64)
        out = (H1 * M[..., None]).sum(axis=1) / cnt
        cache["cnt"] = cnt
    cache["out"] = out

    m1 = _relu(out @ A["mlp_W1"].T + A["mlp_b1"])
    logit = m1 @ A["mlp_w2"] + A["mlp_b2"][0]
    cache["m1"] = m1
    return logit, _sigmoid(logit), cache


def head_backward(p: BackendParams, cache: dict, dlogit, G=None):
    """Gradient with respect to the enhanced sequence H1."""
    cfg, A = p.cfg, p.arrays
    H1, M = cache["H1"], cache["M"]
    m1, out = cache["m1"], cache["out"]
    dm1 = dlogit[:, None] * A["mlp_w2"] * (m1 > 0)
    dout = dm1 @ A["mlp_W1"]
    if G is not None:
        G["mlp_w2"] += m1.T @ dlogit
        G["mlp_b2"] += dlogit.sum()
        G["mlp_W1"] += dm1.T @ out
        G["mlp_b1"] += dm1.sum(axis=0)

    if cfg.encoder == "mean":
        return np.repeat((dout / cache["cnt"])[:, None, :], H1.shape[1], axis=1) * M[..., None]

    d = cfg.dim
    Xs, q, K, V, att, r1, f1 = (cache[k] for k in ("Xs", "q", "K", "V", "att", "r1", "f1"))
    df1 = (dout @ A["ff_W2"]) * (f1 > 0)
    dr1 = dout + df1 @ A["ff_W1"]
    datt = np.einsum("bd,btd->bt", dr1, V)
    dV = att[..., None] * dr1[:, None, :]
    dlog = att * (datt - np.sum(att * datt, axis=1, keepdims=True)) / np.sqrt(d)
    dK = dlog[..., None] * q[:, None, :]
    dq = np.einsum("bt,btd->bd", dlog, K)
    dXs = dK @ A["Wk"] + dV @ A["Wv"]
    dXs[:, -1] += dr1 + dq @ A["Wq"]
    if G is not None:
        G["ff_W2"] += dout.T @ f1
        G["ff_b2"] += dout.sum(axis=0)
        G["ff_W1"] += df1.T @ r1
        G["ff_b1"] += df1.sum(axis=0)
        G["Wq"] += dq.T @ Xs[:, -1]
        G["Wk"] += np.einsum("btd,bte->de", dK, Xs)
        G["Wv"] += np.einsum("btd,bte->de", dV, Xs)
        G["pos"][-Xs.shape[1]:] += dXs.sum(axis=0)
    return dXs


def forward(p: BackendParams, batch: Batch):
    """Return (logits, scores, cache)."""
    H1, ecache = enhance_forward(p, batch.items, batch.paths, batch.path_mask)
    logit, s, hcache = head_forward(p, H1, batch.pos_mask)
    return logit, s, {**ecache, **hcache, "batch": batch}


def backward(p: BackendParams, cache: dict, dlogit: np.ndarray, want_params: bool = True):
    """Reverse pass. Returns (param grads or None, d_paths (B,T,P,d), d_items (B,T,d))."""
    G = {k: np.zeros_like(v) for k, v in p.arrays.items()} if want_params else None
    dH1 = head_backward(p, cache, dlogit, G)
    dX, dh = enhance_backward(p, cache, dH1, G)
    return G, dX, dh


def bce_loss_and_grads(p: BackendParams, batch: Batch, labels: np.ndarray):
    """Mean implicit-feedback loss  -y log s - (1-y) log(1-s)  and its gradients."""
    logit, s, cache = forward(p, batch)
    # log s = -softplus(-logit); log(1-s) = -softplus(logit)
    sp_neg = np.logaddexp(0.0, -logit)
    sp_pos = np.logaddexp(0.0, logit)
    loss = float(np.mean(labels * sp_neg + (1 - labels) * sp_pos))
    dlogit = (s - labels) / len(labels)
    G, _, _ = backward(p, cache, dlogit)
    return loss, G


# --- single-sample operations ---------------------------------------------------------------

def enhance_item(p: BackendParams, item_vec, path_vecs):
    """Enhanced item vector and the per-path attention weights."""
    item_vec = np.asarray(item_vec, dtype=np.float64)
    path_vecs = np.asarray(path_vecs, dtype=np.float64).reshape(-1, p.cfg.dim)
    n = len(path_vecs)
    batch = Batch(item_vec[None, None, :], np.ones((1, 1), bool),
                  (path_vecs if n else np.zeros((1, p.cfg.dim)))[None, None],
                  np.full((1, 1, max(n, 1)), n > 0))
    cfg = p.cfg
    if cfg.enhance == "none":
        return item_vec.copy(), np.zeros(0)
    probe = BackendParams(p.arrays, BackendConfig(**{**asdict(cfg), "encoder": "mean"}))
    _, _, cache = forward(probe, batch)
    return cache["H1"][0, 0], cache["a"][0, 0, :n]


def user_preference(p: BackendParams, enhanced_items) -> np.ndarray:
    """Sequence-encoder output at the last position; oldest item first."""
    seq = np.asarray(enhanced_items, dtype=np.float64).reshape(-1, p.cfg.dim)
    if len(seq) == 0:
        raise ColdUserError("cold user: empty interaction history")
    if len(seq) > p.cfg.seq_len:
        seq = seq[-p.cfg.seq_len:]
    out, _ = _encode(p, seq)
    return out


def sequence_attention(p: BackendParams, enhanced_items) -> np.ndarray:
    seq = np.asarray(enhanced_items, dtype=np.float64).reshape(-1, p.cfg.dim)
    _, att = _encode(p, seq)
    return att


def _encode(p, seq):
    T = p.cfg.seq_len
    n = len(seq)
    H1 = np.zeros((1, T, p.cfg.dim))
    H1[0, T - n:] = seq
    M = np.zeros((1, T), bool)
    M[0, T - n:] = True
    cfg = BackendConfig(**{**asdict(p.cfg), "enhance": "none"})
    batch = Batch(H1, M, np.zeros((1, T, 1, p.cfg.dim)), np.zeros((1, T, 1), bool))
    _, _, cache = forward(BackendParams(p.arrays, cfg), batch)
    att = cache.get("att")
    return cache["out"][0], (att[0, T - n:] if att is not None else None)


def score(p: BackendParams, user_pref) -> float:
    A = p.arrays
    m1 = _relu(A["mlp_W1"] @ np.asarray(user_pref, dtype=np.float64) + A["mlp_b1"])
    return float(_sigmoid(np.array(m1 @ A["mlp_w2"] + A["mlp_b2"][0])))


# --- graph-aware wrapper --------------------------------------------------------------------

@dataclass
class Sample:
    user: int
    item: int
    history: list
    override: np.ndarray | None = None


class Recommender:
    """Binds trained parameters to an embedding table, graph and path sets."""

    def __init__(self, params: BackendParams, table: EmbeddingTable, graph, path_sets: dict):
        self.params = params
        self.table = table
        self.graph = graph
        self.path_sets = path_sets
        self._pvec_cache: dict = {}
        self._times = {u: dict(reversed(log_)) for u, log_ in graph.interaction_log.items()}

    @property
    def cfg(self) -> BackendConfig:
        return self.params.cfg

    def with_params(self, params: BackendParams) -> "Recommender":
        other = Recommender.__new__(Recommender)
        other.__dict__.update(self.__dict__)
        other.params = params
        return other

    def pair_paths(self, user, item) -> list:
        ps = self.path_sets.get((user, item))
        return list(ps.paths[: self.cfg.max_paths]) if ps is not None else []

    def path_vectors(self, user, item) -> np.ndarray:
        key = (user, item)
        if key not in self._pvec_cache:
            self._pvec_cache[key] = embed_paths(self.table, self.pair_paths(user, item))
        return self._pvec_cache[key]

    def history(self, user, item) -> list:
        log_ = self.graph.interaction_log.get(user)
        if not log_:
            raise ColdUserError(f"cold user: node {user} has no interactions")
        t = self._times[user].get(item)
        items = [i for i, ts in log_ if t is None or ts < t]
        if t is not None:
            # items bought at the same time as the candidate precede it in file order
            items = []
            for i, ts in log_:
                if i == item:
                    break
                items.append(i)
        return items[-self.cfg.max_history:] if self.cfg.max_history else []

    def sample(self, user, item, path_override=None) -> Sample:
        ov = None if path_override is None else np.asarray(path_override, dtype=np.float64).reshape(-1, self.cfg.dim)
        return Sample(user, item, self.history(user, item), ov)

    def make_batch(self, samples) -> Batch:
        cfg = self.cfg
        T, d = cfg.seq_len, cfg.dim
        P = 1
        for s in samples:
            P = max(P, len(self.path_vectors(s.user, s.item)) if s.override is None else len(s.override))
            for i in s.history:
                P = max(P, len(self.path_vectors(s.user, i)))
        B = len(samples)
        items = np.zeros((B, T, d))
        mask = np.zeros((B, T), bool)
        paths = np.zeros((B, T, P, d))
        pmask = np.zeros((B, T, P), bool)
        for b, s in enumerate(samples):
            seq = list(s.history) + [s.item]
            off = T - len(seq)
            for j, it in enumerate(seq):
                t = off + j
                items[b, t] = self.table[it]
                mask[b, t] = True
                pv = s.override if (j == len(seq) - 1 and s.override is not None) else self.path_vectors(s.user, it)
                pv = pv[:cfg.max_paths] if j < len(seq) - 1 else pv
                if len(pv):
                    paths[b, t, :len(pv)] = pv
                    pmask[b, t, :len(pv)] = True
        return Batch(items, mask, paths, pmask)

    def score_samples(self, samples, chunk: int = 256) -> np.ndarray:
        out = []
        for k in range(0, len(samples), chunk):
            _, s, _ = forward(self.params, self.make_batch(samples[k:k + chunk]))
            out.append(s)
        return np.concatenate(out) if out else np.zeros(0)

    def score_pair(self, user, item, path_override=None) -> float:
        return float(self.score_samples([self.sample(user, item, path_override)])[0])

    def score_items(self, user, items) -> np.ndarray:
        return self.score_samples([self.sample(user, i) for i in items])

    def attention_weights(self, user, item, path_override=None) -> np.ndarray:
        """Candidate-position attention over the pair's paths (the attention explanation)."""
        smp = self.sample(user, item, path_override)
        n = len(smp.override) if smp.override is not None else len(self.path_vectors(user, item))
        if n == 0:
            return np.zeros(0)
        if self.cfg.enhance != "attention":
            return np.full(n, 1.0 / n)
        _, _, cache = forward(self.params, self.make_batch([smp]))
        return cache["a"][0, -1, :n].copy()


# --- training -------------------------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 64
    seed: int = 0


@dataclass
class TrainResult:
    params: BackendParams
    losses: list = field(default_factory=list)


def training_pairs(graph) -> list:
    """Positive (user, item) pairs that have at least one earlier interaction."""
    pairs = []
    for u in sorted(graph.interaction_log):
        log_ = graph.interaction_log[u]
        for i, _ in log_[1:]:
            pairs.append((u, i))
    return pairs


def train_backend(graph, path_sets: dict, table: EmbeddingTable, bcfg: BackendConfig,
                  tcfg: TrainConfig) -> TrainResult:
    """Plain SGD on the implicit-feedback loss with one uniform negative per positive."""
    positives = training_pairs(graph)
    if not positives:
        raise ValueError("no positive interactions with history to train on")
    if bcfg.dim != table.dim:
        raise ValueError(f"backend dim {bcfg.dim} != embedding dim {table.dim}")
    rng = np.random.default_rng(tcfg.seed)
    params = BackendParams.init(bcfg, seed=tcfg.seed)
    rec = Recommender(params, table, graph, path_sets)
    items = graph.items
    owned = {u: set(graph.user_items(u)) for u in graph.interaction_log}

    losses = []
    for epoch in range(tcfg.epochs):
        negs = []
        for u, _ in positives:
            if len(owned[u]) >= len(items):
                continue
            while True:
                j = int(items[rng.integers(len(items))])
                if j not in owned[u]:
                    break
            negs.append((u, j))
        data = [(u, i, 1.0) for u, i in positives] + [(u, j, 0.0) for u, j in negs]
        order = rng.permutation(len(data))
        total = 0.0
        for k in range(0, len(order), tcfg.batch_size):
            chunk = [data[o] for o in order[k:k + tcfg.batch_size]]
            samples = [Sample(u, i, rec.history(u, i)) for u, i, _ in chunk]
            labels = np.array([y for _, _, y in chunk])
            loss, G = bce_loss_and_grads(rec.params, rec.make_batch(samples), labels)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss diverged at epoch {epoch}")
            for name, g in G.items():
                rec.params.arrays[name] -= tcfg.learning_rate * g
            total += loss * len(chunk)
        losses.append(total / len(data))
        rec.params.epoch = epoch + 1
        if not rec.params.is_finite():
            raise TrainingDivergedError(f"parameters diverged at epoch {epoch}")
        log.debug("backend epoch %d: loss %.4f", epoch, losses[-1])
    return TrainResult(rec.params, losses)


# --- checkpoint -----------------------------------------------------------------------------

def save_checkpoint(params: BackendParams, path) -> tuple[Path, Path]:
    path = Path(path)
    blob = path.with_suffix(".bin")
    blob.write_bytes(params.flat().astype("<f4").tobytes())
    manifest = {
        "config": asdict(params.cfg),
        "shapes": {k: list(v) for k, v in param_shapes(params.cfg).items()},
        "seed": params.seed,
        "epoch": params.epoch,
        "dtype": "float32-le",
    }
    meta = path.with_suffix(".json")
    meta.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return meta, blob


def load_checkpoint(path) -> BackendParams:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    cfg = BackendConfig(**manifest["config"])
    theta = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f4").astype(np.float64)
    expected = sum(int(np.prod(s)) for s in param_shapes(cfg).values())
    if len(theta) != expected:
        raise ValueError(f"checkpoint has {len(theta)} values, expected {expected}")
    p = BackendParams({}, cfg, manifest["seed"], manifest["epoch"]).with_flat(theta)
    p.seed, p.epoch = manifest["seed"], manifest["epoch"]
    return p


# --- ranking evaluation ---------------------------------------------------------------------

def evaluate_topk(score_fn, heldout, item_pool, ks=(5, 10, 20, 30), negatives_per_positive: int = 500,
                  seed: int = 0, exclude: dict | None = None) -> dict:
    """HR@k and NDCG@k of each held-out positive against sampled negatives.

    ``score_fn(user, items)`` returns scores for an item array. Negatives are
    drawn uniformly from ``item_pool`` minus ``exclude[user]`` (with
    replacement when the pool is smaller than the request). The positive's
    rank is one plus the number of negatives scoring strictly higher.
    """
    rng = np.random.default_rng(seed)
    pool = np.asarray(sorted(item_pool), dtype=np.int64)
    ranks = []
    for user, item in heldout:
        banned = set(exclude.get(user, ())) if exclude else set()
        banned.add(item)
        cand = pool[~np.isin(pool, list(banned))]
        if len(cand) == 0:
            continue
        replace = len(cand) < negatives_per_positive
        negs = rng.choice(cand, size=negatives_per_positive, replace=replace)
        scores = np.asarray(score_fn(user, np.concatenate([[item], negs])), dtype=np.float64)
        ranks.append(1 + int(np.sum(scores[1:] > scores[0])))
    ranks = np.asarray(ranks)
    out = {"n": int(len(ranks))}
    for k in ks:
        hit = ranks <= k
        out[f"HR@{k}"] = float(hit.mean()) if len(ranks) else 0.0
        out[f"NDCG@{k}"] = float(np.where(hit, 1.0 / np.log2(ranks + 1), 0.0).mean()) if len(ranks) else 0.0
    return out
