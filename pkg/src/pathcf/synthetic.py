"""Synthetic purchase logs with a planted explanatory attribute.

Every user has a favourite brand. A few of their earlier purchases and their
final (held-out) purchase come from that brand; the rest are uniform noise.
Paths from the user to the final item through the favourite brand are the
planted explanations, recorded in a JSON sidecar.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


@dataclass
class SyntheticSpec:
    n_users: int = 50
    n_items: int = 200
    n_categories: int = 20
    n_brands: int = 40
    categories_per_item: int = 1
    min_history: int = 6
    max_history: int = 10
    planted_per_user: int = 3
    seed: int = 0

    def validate(self):
        if self.n_users < 2 or self.n_items < 4 or self.n_categories < 1 or self.n_brands < 1:
            raise ValueError(f"degenerate synthetic spec {self}")
        if not 1 <= self.categories_per_item <= self.n_categories:
            raise ValueError("categories_per_item must lie in [1, n_categories]")
        if not 1 <= self.min_history <= self.max_history:
            raise ValueError("need 1 <= min_history <= max_history")
        if not 1 <= self.planted_per_user <= self.min_history:
            raise ValueError("planted_per_user must lie in [1, min_history]")
        per_brand = self.n_items // self.n_brands
        if per_brand < self.planted_per_user + 1:
            raise ValueError(f"{per_brand} items per brand cannot hold {self.planted_per_user + 1} planted purchases")
        if self.n_items < self.max_history + 1:
            raise ValueError("too few items for the requested history length")


def generate(spec: SyntheticSpec):
    """Return (interactions, metadata, truth) as plain Python rows."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    items = [f"i{k}" for k in range(spec.n_items)]
    brand_of = rng.permutation(np.arange(spec.n_items) % spec.n_brands)
    cats_of = [rng.choice(spec.n_categories, size=spec.categories_per_item, replace=False)
               for _ in range(spec.n_items)]
    by_brand = {b: np.flatnonzero(brand_of == b) for b in range(spec.n_brands)}

    metadata = []
    for k, it in enumerate(items):
        for c in sorted(cats_of[k]):
            metadata.append((it, "category", f"c{c}"))
        metadata.append((it, "brand", f"b{brand_of[k]}"))

    users = []
    for u in range(spec.n_users):
        brand = int(rng.integers(spec.n_brands))
        own = rng.permutation(by_brand[brand])[: spec.planted_per_user + 1]
        n_hist = int(rng.integers(spec.min_history, spec.max_history + 1))
        others = np.setdiff1d(np.arange(spec.n_items), by_brand[brand])
        noise = rng.choice(others, size=n_hist - spec.planted_per_user, replace=False)
        users.append([brand, own[:-1], int(own[-1]), list(noise)])

    # every held-out item must also be bought by someone else, or it is unknown at training time
    seen = {int(k) for _, planted, _, noise in users for k in np.concatenate([planted, noise])}
    for u, (brand, _, target, _) in enumerate(users):
        if target in seen:
            continue
        hosts = [v for v in range(spec.n_users) if v != u and brand_of[target] != users[v][0]
                 and target not in users[v][3]]
        v = hosts[int(rng.integers(len(hosts)))]
        users[v][3][int(rng.integers(len(users[v][3])))] = target
        seen.add(target)

    interactions, truth = [], {}
    for u, (brand, planted_hist, target, noise) in enumerate(users):
        user = f"u{u}"
        hist = rng.permutation(np.concatenate([planted_hist, noise]).astype(np.int64))
        t = 1_000_000 + u * 1000
        for step, k in enumerate(hist):
            interactions.append((user, items[k], t + step))
        interactions.append((user, items[target], t + len(hist)))
        truth[user] = {"brand": f"b{brand}", "heldout_item": items[target],
                       "planted_history": [items[k] for k in planted_hist],
                       "planted_paths": [[user, items[k], f"brand:b{brand}", items[target]] for k in planted_hist]}
    return interactions, metadata, truth


def write_synthetic(out_dir, spec: SyntheticSpec | None = None) -> dict:
    """Write interactions.tsv, metadata.tsv and truth.json under ``out_dir``."""
    spec = spec or SyntheticSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    interactions, metadata, truth = generate(spec)
    with open(out / "interactions.tsv", "w", encoding="utf-8") as fh:
        fh.write("user_id\titem_id\ttimestamp\n")
        fh.writelines(f"{u}\t{i}\t{t}\n" for u, i, t in interactions)
    with open(out / "metadata.tsv", "w", encoding="utf-8") as fh:
        fh.write("item_id\tattr_class\tattr_value\n")
        fh.writelines(f"{i}\t{c}\t{v}\n" for i, c, v in metadata)
    body = {"spec": asdict(spec), "users": truth}
    (out / "truth.json").write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    return {"interactions": out / "interactions.tsv", "metadata": out / "metadata.tsv",
            "truth": out / "truth.json"}


def planted_paths(g, path_sets: dict, truth: dict, mode: str = "bridge") -> dict:
    """Per (user, held-out item) pair, indices of planted paths.

    ``"bridge"`` keeps the direct paths user -> planted purchase -> planted
    brand -> held-out item; ``"loose"`` keeps any path visiting the planted brand.
    """
    from .graph import ATTR
    if mode not in ("bridge", "loose"):
        raise ValueError(f"unknown planted-path mode {mode!r}")
    out = {}
    for user, rec in truth["users"].items():
        try:
            u = g.user_id(user)
            i = g.item_id(rec["heldout_item"])
            b = g.node_id(ATTR, f"brand:{rec['brand']}")
        except KeyError:
            continue
        ps = path_sets.get((u, i))
        if ps is None:
            continue
        if mode == "loose":
            out[(u, i)] = [z for z, p in enumerate(ps.paths) if b in p]
            continue
        hist = set()
        for x in rec["planted_history"]:
            try:
                hist.add(g.item_id(x))
            except KeyError:
                pass
        out[(u, i)] = [z for z, p in enumerate(ps.paths) if len(p) == 4 and p[2] == b and p[1] in hist]
    return out
