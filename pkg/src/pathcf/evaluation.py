"""The evaluate and report stages: every explanation metric over a workspace."""
from __future__ import annotations

import json
import logging
import warnings

import numpy as np

from . import backend as bk
from . import cf_repr, cf_struct, xeval
from .synthetic import planted_paths

log = logging.getLogger(__name__)

RANDOM_DRAWS = 5
FIDELITY_SEEDS = 5


def _r(x, nd=10):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else round(x, nd)


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else float("nan")


def struct_weights(rec, u, i, cfg, seed):
    from .pipeline import struct_configs
    pcfg, rcfg = struct_configs(cfg, seed)
    expl, _, _ = cf_struct.explain_pair(rec, u, i, pcfg, rcfg)
    return expl


def intersection_ranking(rexp, sexp):
    """Intersection path indices by descending weight; falls back to cf_repr when empty."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        common = cf_struct.intersect_explanations(rexp, sexp)
    if common:
        w = {k: v for k, _, v in common}
        return w, False
    return rexp.weights(), True


def _ranking(weights: dict) -> list:
    return [k for k, _ in sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))]


def explanation_metrics(rec, pairs, repr_by, struct_by, cfg, seed):
    """Confidence, informativeness and fidelity for one set of explanations."""
    from .pipeline import sub_seed
    ev = cfg.eval
    ent = {m: [] for m in ("attention", "cf_repr", "cf_struct", "cf_intersection")}
    sel = {"cf_repr": {}, "cf_struct": {}, "cf_intersection": {}}
    counts, fallbacks = {}, 0
    cf_rank, att_rank = {}, {}
    for p in pairs:
        u, i = p
        a = rec.attention_weights(u, i)
        ent["attention"].append(xeval.confidence_entropy(a))
        rw = repr_by[p].weights()
        sw = struct_by[p].weights()
        iw, fb = intersection_ranking(repr_by[p], struct_by[p])
        fallbacks += fb
        for m, w in (("cf_repr", rw), ("cf_struct", sw), ("cf_intersection", iw)):
            if w:
                ent[m].append(xeval.confidence_entropy(w))
            sel[m][p] = sorted(w)
        counts[p] = int(np.floor((len(rw) + len(sw)) / 2 + 0.5))
        cf_rank[p] = _ranking(iw)
        att_rank[p] = np.argsort(-a, kind="stable")[:len(cf_rank[p])].tolist()

    info = {}
    for m in sel:
        info[m] = xeval.informativeness_mse(rec, sel[m])
    info["attention_topk"] = xeval.informativeness_mse(rec, xeval.attention_topk_selection(rec, counts))
    draws = [xeval.informativeness_mse(rec, xeval.random_selection(rec, counts, sub_seed(seed, f"random:{k}")))
             for k in range(RANDOM_DRAWS)]
    info["random_k"] = (_mean([d[0] for d in draws]), draws[0][1])

    ratios = ev.ratio_list
    fid = {"cf_intersection": xeval.fidelity_curve(rec, cf_rank, ratios),
           "attention": xeval.fidelity_curve(rec, att_rank, ratios)}
    return {
        "confidence": {m: _r(_mean(v)) for m, v in ent.items()},
        "informativeness": {m: {"mse": _r(v[0]), "skipped": v[1]} for m, v in info.items()},
        "fidelity": {m: [[r, _r(f)] for r, f in c] for m, c in fid.items()},
        "intersection_fallbacks": fallbacks,
    }


def planted_recovery(g, path_sets, truth, pairs, repr_by, rec, seed):
    """Top-1 hit rates on planted paths for cf_repr, attention and random choice."""
    out = {}
    for mode in ("bridge", "loose"):
        planted = planted_paths(g, path_sets, truth, mode=mode)
        rng = np.random.default_rng(seed)
        hits = {"cf_repr": [], "attention": [], "random": []}
        floor = []
        for p in pairs:
            if p not in planted or not planted[p]:
                continue
            n = len(rec.pair_paths(*p))
            S = {z for z in planted[p] if z < n}
            if not S:
                continue
            ds = np.array([r.delta_s for r in repr_by[p].records])
            hits["cf_repr"].append(int(np.argmax(ds)) in S)
            hits["attention"].append(int(np.argmax(rec.attention_weights(*p))) in S)
            hits["random"].append(int(rng.integers(n)) in S)
            floor.append(len(S) / n)
        out[mode] = {"pairs": len(floor), "floor": _r(_mean(floor)),
                     **{f"top1_{m}": _r(_mean(v)) for m, v in hits.items()}}
    return out


def study_donors(cfg, rec, pairs) -> dict:
    """Up to ``eval.study_pairs`` pairs that admit a pranking path, with that path."""
    from .pipeline import sub_seed
    donors = {}
    for p in pairs:
        if len(donors) == cfg.eval.study_pairs:
            break
        try:
            donors[p] = xeval.pick_pranking_path(rec, *p, seed=sub_seed(cfg.seed, f"prank:{p[0]}:{p[1]}"))
        except xeval.NoDonorError as exc:
            log.info("%s", exc)
    if len(donors) < cfg.eval.study_pairs:
        log.warning("only %d of %d study pairs admit a pranking path", len(donors), cfg.eval.study_pairs)
    return donors


def study(cfg, L, donors: dict):
    """Retrain the backend ``runs`` times; collect weights for stability and pranking."""
    from .pipeline import repr_config, sub_seed, train_run
    ev = cfg.eval
    pairs = list(donors)
    stab = {"attention": [], "cf_repr": []}
    rows = []
    prank = {p: [] for p in donors}
    for run in range(ev.runs):
        seed = sub_seed(cfg.seed, f"study:{run}")
        rec = L.recommender(train_run(cfg, L, seed).params)
        rcfg = repr_config(cfg, seed)
        a_row, c_row = [], []
        for p in pairs:
            u, i = p
            a = rec.attention_weights(u, i)
            _, e = cf_repr.optimize_pair(rec, u, i, rcfg)
            c = np.zeros(len(a))
            for k, w in e.weights().items():
                c[k] = w
            a_row.extend(a)
            c_row.extend(c)
            for z in range(len(a)):
                rows.append(["attention", u, i, z, run, f"{a[z]:.10f}"])
                rows.append(["cf_repr", u, i, z, run, f"{c[z]:.10f}"])
            paths2, vecs2 = xeval.inject_path(rec, u, i, donors[p])
            idx = len(paths2) - 1
            a2 = xeval.attention_for_vectors(rec, u, i, vecs2)
            _, e2 = cf_repr.optimize_pair(rec, u, i, rcfg, path_vecs=vecs2, paths=paths2)
            c2 = np.zeros(len(paths2))
            for k, w in e2.weights().items():
                c2[k] = w
            prank[p].append({
                "run": run,
                "cf_repr_bottom_quartile": xeval.in_bottom_quartile(c2, idx),
                "cf_repr_rank": xeval.average_rank(c2, idx),
                "attention_rank": xeval.average_rank(a2, idx),
                "attention_bottom_quartile": xeval.in_bottom_quartile(a2, idx),
                "n_paths": len(paths2),
            })
        stab["attention"].append(a_row)
        stab["cf_repr"].append(c_row)

    stability = {}
    for m, s in stab.items():
        rep = xeval.stability_report(np.array(s), ev.stability_threshold)
        ever = rep.means > 0
        stability[m] = {"small_fraction": _r(rep.small_fraction), "paths": int(len(rep.means)),
                        "small_fraction_selected": _r(_mean((rep.variances <= rep.threshold * rep.means ** 2)[ever])),
                        "selected_paths": int(ever.sum())}
    per_pair = []
    for p, trials in prank.items():
        per_pair.append({
            "user": p[0], "item": p[1], "runs": len(trials),
            "cf_repr_bottom_quartile_runs": sum(t["cf_repr_bottom_quartile"] for t in trials),
            "cf_worse_than_attention_runs": sum(t["cf_repr_rank"] > t["attention_rank"] for t in trials),
            "attention_bottom_quartile_runs": sum(t["attention_bottom_quartile"] for t in trials),
            "mean_cf_repr_rank": _r(_mean([t["cf_repr_rank"] for t in trials])),
            "mean_attention_rank": _r(_mean([t["attention_rank"] for t in trials])),
            "n_paths": trials[0]["n_paths"] if trials else 0,
        })
    tot = max(1, sum(x["runs"] for x in per_pair))
    effectiveness = {
        "pairs": per_pair,
        "cf_repr_bottom_quartile_rate": _r(sum(x["cf_repr_bottom_quartile_runs"] for x in per_pair) / tot),
        "cf_worse_than_attention_rate": _r(sum(x["cf_worse_than_attention_runs"] for x in per_pair) / tot),
        "attention_bottom_quartile_rate": _r(sum(x["attention_bottom_quartile_runs"] for x in per_pair) / tot),
    }
    return stability, effectiveness, rows


def evaluate_workspace(ws, L):
    from .pipeline import SECTIONS, STAGES, repr_config, sub_seed
    cfg = ws.cfg
    ev = cfg.eval
    seed = sub_seed(cfg.seed, "evaluate")
    rec = L.recommender()
    g = L.graph
    pairs = L.eval_pairs()
    repr_by = {(e.user, e.item): e for e in cf_repr.load_explanations(ws.path("repr.jsonl"))}
    from .pipeline import load_struct
    struct_by = {(e.user, e.item): e for e in load_struct(ws.path("struct.jsonl"))}
    pairs = [p for p in pairs if p in repr_by and p in struct_by]

    heldout = [p for p in L.heldout if g.interaction_log.get(p[0])]
    exclude = {u: set(g.user_items(u)) for u, _ in heldout}
    topk = bk.evaluate_topk(rec.score_items, heldout, g.items, ks=ev.k_list,
                            negatives_per_positive=ev.negatives, seed=sub_seed(seed, "topk"), exclude=exclude)

    main = explanation_metrics(rec, pairs, repr_by, struct_by, cfg, seed)

    # fidelity across explainer seeds: the stored cf_struct run is seed 0
    fid_seeds = []
    for k in range(FIDELITY_SEEDS):
        if k == 0:
            sb = struct_by
        else:
            s_seed = sub_seed(sub_seed(cfg.seed, "explain-struct"), f"fidelity:{k}")
            sb = {p: struct_weights(rec, *p, cfg, sub_seed(s_seed, f"{p[0]}:{p[1]}")) for p in pairs}
        ranks_cf, ranks_att = {}, {}
        for p in pairs:
            w, _ = intersection_ranking(repr_by[p], sb[p])
            ranks_cf[p] = _ranking(w)
            ranks_att[p] = np.argsort(-rec.attention_weights(*p), kind="stable")[:len(ranks_cf[p])].tolist()
        cf_c = xeval.fidelity_curve(rec, ranks_cf, ev.ratio_list)
        att_c = xeval.fidelity_curve(rec, ranks_att, ev.ratio_list)
        fid_seeds.append({"seed_index": k,
                          "cf_intersection": [[r, _r(f)] for r, f in cf_c],
                          "attention": [[r, _r(f)] for r, f in att_c],
                          "cf_geq_attention_all_ratios": all(c[1] >= a[1] for c, a in zip(cf_c, att_c))})

    truth = None
    if cfg.data.truth:
        truth = json.loads(open(cfg.data.truth, encoding="utf-8").read())
    planted = planted_recovery(g, L.path_sets, truth, pairs, repr_by, rec, sub_seed(seed, "planted")) if truth else None

    donors = study_donors(cfg, rec, pairs) if ev.runs >= 2 and ev.study_pairs > 0 else {}
    stability, effectiveness, stab_rows = study(cfg, L, donors) if donors else ({}, {}, [])

    manifests = {s: ws.read_manifest(s)["config_hash"] for s in STAGES[:6]}
    report = {
        "provenance": {
            "master_seed": cfg.seed,
            "config_hash": cfg.section_hash([s for s in cfg.section_names()]),
            "stage_config_hashes": manifests,
            "stage_seeds": {s: sub_seed(cfg.seed, s) for s in STAGES},
        },
        "pairs": len(pairs),
        "ranking": {k: (_r(v) if isinstance(v, float) else v) for k, v in topk.items()},
        **main,
        "fidelity_seeds": fid_seeds,
        "planted": planted,
        "stability": stability,
        "effectiveness": effectiveness,
    }
    fid_rows = [[m, r, f] for m, c in main["fidelity"].items() for r, f in c]
    return report, fid_rows, stab_rows


def render_report(report: dict) -> str:
    lines = []

    def row(name, value):
        lines.append(f"  {name:<40s} {value}")

    def fmt(x):
        return "n/a" if x is None else (f"{x:.4f}" if isinstance(x, float) else str(x))

    lines.append(f"pairs evaluated: {report['pairs']}  master seed: {report['provenance']['master_seed']}")
    lines.append("ranking")
    for k, v in report["ranking"].items():
        row(k, fmt(v))
    lines.append("confidence (mean entropy, lower is more confident)")
    for k, v in report["confidence"].items():
        row(k, fmt(v))
    lines.append("informativeness (MSE, lower is better)")
    for k, v in report["informativeness"].items():
        row(k, f"{fmt(v['mse'])}  (skipped {v['skipped']})")
    lines.append("fidelity (score drop)")
    for k, c in report["fidelity"].items():
        row(k, "  ".join(f"{r:.2f}:{fmt(f)}" for r, f in c))
    fs = report.get("fidelity_seeds") or []
    if fs:
        row("seeds with cf >= attention at all ratios", f"{sum(s['cf_geq_attention_all_ratios'] for s in fs)}/{len(fs)}")
    if report.get("planted"):
        lines.append("planted-path recovery (top-1 hit rate)")
        for mode, d in report["planted"].items():
            row(f"{mode}: cf_repr / attention / random / floor",
                " / ".join(fmt(d[k]) for k in ("top1_cf_repr", "top1_attention", "top1_random", "floor")))
    if report.get("stability"):
        lines.append("stability (fraction of small-variance path weights)")
        for k, v in report["stability"].items():
            row(k, f"{fmt(v['small_fraction'])}  over {v['paths']} paths")
    if report.get("effectiveness"):
        e = report["effectiveness"]
        lines.append("effectiveness (injected irrelevant path)")
        row("cf_repr bottom-quartile rate", fmt(e["cf_repr_bottom_quartile_rate"]))
        row("attention bottom-quartile rate", fmt(e["attention_bottom_quartile_rate"]))
        row("cf rank worse than attention rate", fmt(e["cf_worse_than_attention_rate"]))
    return "\n".join(lines) + "\n"
