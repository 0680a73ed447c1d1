"""Stage-by-stage pipeline: ingest, walk, embed, train, explain, evaluate, report.

Every stage writes its artifacts plus ``<stage>.manifest.json`` recording the
hash of the config sections it read, the hashes of its input files and of its
outputs. Downstream stages refuse to run on missing or stale upstream
artifacts.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import backend as bk
from . import cf_repr, cf_struct, xeval
from .embedding import SkipGramConfig, load_table, save_table, train_skipgram
from .graph import (Interaction, build_graph, load_graph, load_interactions, load_metadata,
                    save_graph)
from .paths import explore_paths, load_path_sets, save_path_sets, save_walks, temporal_walks

log = logging.getLogger(__name__)

STAGES = ("ingest", "walk", "embed", "train", "explain-repr", "explain-struct", "evaluate", "report")
UPSTREAM = {
    "ingest": (),
    "walk": ("ingest",),
    "embed": ("walk",),
    "train": ("embed",),
    "explain-repr": ("train",),
    "explain-struct": ("train",),
    "evaluate": ("explain-repr", "explain-struct"),
    "report": ("evaluate",),
}
SECTIONS = {
    "ingest": ("data",),
    "walk": ("paths", "walks"),
    "embed": ("embedding",),
    "train": ("backend",),
    "explain-repr": ("cf_repr", "eval"),
    "explain-struct": ("cf_struct", "eval"),
    "evaluate": ("data", "eval", "cf_repr", "cf_struct", "backend"),
    "report": (),
}


class PipelineError(Exception):
    exit_code = 2


class MissingStageError(PipelineError):
    exit_code = 3


class StaleArtifactError(PipelineError):
    exit_code = 2


# --- configuration --------------------------------------------------------------------------

@dataclass
class DataSection:
    interactions: str = ""
    metadata: str = ""
    truth: str = ""
    min_item_count: int = 0


@dataclass
class PathsSection:
    min_len: int = 4
    max_len: int = 6
    walks_per_vertex: int = 10
    terminal: str = "any"
    max_paths_per_pair: int = 40


@dataclass
class WalksSection:
    walk_len: int = 20
    walks_per_vertex: int = 10


@dataclass
class EmbeddingSection:
    dim: int = 100
    window: int = 3
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025


@dataclass
class BackendSection:
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 64
    max_history: int = 5
    enhance: str = "attention"
    encoder: str = "transformer"


@dataclass
class ReprSection:
    alpha: float = 0.1
    beta: float = 0.5
    lam: float = 5.0
    learning_rate: float = 0.05
    steps: int = 50


@dataclass
class StructSection:
    zeta: float = 10.0
    epsilon: float = 10.0
    eta: float = 100.0
    epochs: int = 50
    episodes_per_epoch: int = 8
    learning_rate: float = 0.003
    hidden: int = 16
    init_prob: float = 0.5


@dataclass
class EvalSection:
    max_pairs: int = 0
    runs: int = 10
    study_pairs: int = 10
    ratios: str = "0.25,0.5,0.75,1.0"
    ks: str = "5,10,20,30"
    negatives: int = 500
    stability_threshold: float = 0.1

    @property
    def ratio_list(self) -> list:
        return [float(x) for x in self.ratios.split(",") if x.strip()]

    @property
    def k_list(self) -> list:
        return [int(x) for x in self.ks.split(",") if x.strip()]


@dataclass
class PipelineConfig:
    data: DataSection = field(default_factory=DataSection)
    paths: PathsSection = field(default_factory=PathsSection)
    walks: WalksSection = field(default_factory=WalksSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    backend: BackendSection = field(default_factory=BackendSection)
    cf_repr: ReprSection = field(default_factory=ReprSection)
    cf_struct: StructSection = field(default_factory=StructSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0

    def section_names(self) -> list:
        return [f.name for f in fields(self) if f.name != "seed"]

    def set(self, dotted: str, raw: str) -> None:
        """Override ``section.key`` from its string form."""
        if dotted == "seed":
            self.seed = int(raw)
            return
        sec, _, key = dotted.partition(".")
        if sec not in self.section_names():
            raise ValueError(f"unknown config section {sec!r}")
        obj = getattr(self, sec)
        types = {f.name: f.type for f in fields(obj)}
        if key not in types:
            raise ValueError(f"unknown config key {dotted!r}")
        setattr(obj, key, _convert(types[key], raw, dotted))

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"seed": str(self.seed)}
        for name in self.section_names():
            cp[name] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(getattr(self, name)).items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "PipelineConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        cfg = cls()
        for sec in cp.sections():
            for key, raw in cp[sec].items():
                cfg.set("seed" if (sec, key) == ("run", "seed") else f"{sec}.{key}", raw)
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_ini(Path(path).read_text(encoding="utf-8"))

    def section_hash(self, sections) -> str:
        body = {s: asdict(getattr(self, s)) for s in sections}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _convert(typ, raw: str, where: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return str(raw)
    except ValueError:
        raise ValueError(f"{where}: cannot parse {raw!r} as {typ}") from None


def sub_seed(master: int, name: str) -> int:
    """Deterministic per-stage seed derived from the master seed."""
    return int.from_bytes(hashlib.sha256(f"{master}:{name}".encode()).digest()[:4], "little")


# --- manifests ------------------------------------------------------------------------------

def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


STAGE_OUTPUTS = {
    "ingest": ("graph.bin", "graph.json", "heldout.tsv"),
    "walk": ("paths.jsonl", "walks.bin"),
    "embed": ("embedding.bin", "embedding.json"),
    "train": ("backend.bin", "backend.json", "train_losses.csv"),
    "explain-repr": ("repr.jsonl",),
    "explain-struct": ("struct.jsonl", "struct_traces.jsonl", "struct_curves.csv"),
    "evaluate": ("eval_report.json", "fidelity.csv", "stability_samples.csv"),
    "report": ("report.txt",),
}


class Workspace:
    def __init__(self, out_dir, cfg: PipelineConfig):
        self.out = Path(out_dir)
        self.cfg = cfg

    def path(self, name) -> Path:
        return self.out / name

    def manifest_path(self, stage) -> Path:
        return self.out / f"{stage}.manifest.json"

    def read_manifest(self, stage) -> dict:
        p = self.manifest_path(stage)
        if not p.exists():
            raise MissingStageError(f"missing stage: {stage}")
        return json.loads(p.read_text())

    def check_upstream(self, stage) -> dict:
        """Validate the manifest chain feeding ``stage``; returns upstream output hashes."""
        inputs = {}
        for up in UPSTREAM[stage]:
            m = self.read_manifest(up)
            if m["config_hash"] != self.cfg.section_hash(SECTIONS[up]) or m["seed"] != self.cfg.seed:
                raise StaleArtifactError(f"stale artifact: stage {up} was built with a different config; rerun {up}")
            for name, digest in m["outputs"].items():
                p = self.path(name)
                if not p.exists():
                    raise MissingStageError(f"missing stage: {up} (artifact {name} not found)")
                if file_hash(p) != digest:
                    raise StaleArtifactError(f"stale artifact: {name} changed since stage {up} wrote it")
                inputs[name] = digest
            inputs.update(self.check_upstream(up))
        return inputs

    def write_manifest(self, stage, inputs: dict) -> None:
        outputs = {name: file_hash(self.path(name)) for name in STAGE_OUTPUTS[stage]}
        body = {
            "stage": stage,
            "seed": self.cfg.seed,
            "config_hash": self.cfg.section_hash(SECTIONS[stage]),
            "inputs": dict(sorted(inputs.items())),
            "outputs": outputs,
        }
        self.manifest_path(stage).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")


# --- shared loaders -------------------------------------------------------------------------

def read_heldout(path, g) -> list:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("user_id") or not line.strip():
                continue
            u, i, _ = line.rstrip("\n").split("\t")
            pairs.append((g.user_id(u), g.item_id(i)))
    return pairs


class Loaded:
    """Lazy access to upstream artifacts of a workspace."""

    def __init__(self, ws: Workspace):
        self.ws = ws
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def graph(self):
        return self._get("graph", lambda: load_graph(self.ws.path("graph")))

    @property
    def heldout(self):
        return self._get("heldout", lambda: read_heldout(self.ws.path("heldout.tsv"), self.graph))

    @property
    def path_sets(self):
        return self._get("paths", lambda: load_path_sets(self.ws.path("paths.jsonl")))

    @property
    def table(self):
        return self._get("table", lambda: load_table(self.ws.path("embedding.bin")))

    @property
    def params(self):
        return self._get("params", lambda: bk.load_checkpoint(self.ws.path("backend")))

    def recommender(self, params=None) -> bk.Recommender:
        return bk.Recommender(params or self.params, self.table, self.graph, self.path_sets)

    def eval_pairs(self) -> list:
        sets = self.path_sets
        pairs = sorted(p for p in self.heldout if p in sets and len(sets[p]) > 0)
        k = self.ws.cfg.eval.max_pairs
        return pairs[:k] if k > 0 else pairs


# --- stages ---------------------------------------------------------------------------------

def stage_ingest(ws: Workspace, L: Loaded) -> None:
    d = ws.cfg.data
    if not d.interactions or not d.metadata:
        raise PipelineError("config data.interactions and data.metadata are required")
    rows = load_interactions(d.interactions, d.min_item_count)
    attrs = load_metadata(d.metadata)
    by_user: dict = {}
    for r in rows:
        by_user.setdefault(r.user, []).append(r)
    train, held = [], []
    for user, rs in by_user.items():
        rs = sorted(rs, key=lambda r: r.timestamp)   # stable: file order breaks ties
        train.extend(rs[:-1] if len(rs) >= 3 else rs)
        if len(rs) >= 3:
            held.append(rs[-1])
    known = {r.item for r in train}
    dropped = [r for r in held if r.item not in known]
    held = [r for r in held if r.item in known]
    if dropped:
        log.warning("%d held-out interactions reference items unseen in training; dropped", len(dropped))
    order = {r: k for k, r in enumerate(rows)}
    train.sort(key=lambda r: order[r])
    g = build_graph(train, attrs)
    save_graph(g, ws.path("graph"))
    with open(ws.path("heldout.tsv"), "w", encoding="utf-8") as fh:
        fh.write("user_id\titem_id\ttimestamp\n")
        fh.writelines(f"{r.user}\t{r.item}\t{r.timestamp}\n" for r in held)


def stage_walk(ws: Workspace, L: Loaded) -> None:
    pc, wc = ws.cfg.paths, ws.cfg.walks
    seed = sub_seed(ws.cfg.seed, "walk")
    sets = explore_paths(L.graph, pc.min_len, pc.max_len, pc.walks_per_vertex, seed=seed,
                         terminal=pc.terminal, max_paths_per_pair=pc.max_paths_per_pair or None)
    save_path_sets(ws.path("paths.jsonl"), sets)
    tw = temporal_walks(L.graph, wc.walk_len, wc.walks_per_vertex, seed=seed + 1)
    save_walks(ws.path("walks.bin"), tw)


def stage_embed(ws: Workspace, L: Loaded) -> None:
    from .paths import load_walks
    ec = ws.cfg.embedding
    tw = load_walks(ws.path("walks.bin"))
    cfg = SkipGramConfig(ec.dim, ec.window, ec.negatives, ec.epochs, ec.learning_rate,
                         sub_seed(ws.cfg.seed, "embed"))
    table = train_skipgram(tw.sequences(), cfg, num_nodes=L.graph.num_nodes)
    save_table(table, ws.path("embedding.bin"), labels=None)


def backend_config(cfg: PipelineConfig) -> bk.BackendConfig:
    b = cfg.backend
    return bk.BackendConfig(dim=cfg.embedding.dim, max_history=b.max_history,
                            max_paths=cfg.paths.max_paths_per_pair or 40,
                            enhance=b.enhance, encoder=b.encoder)


def train_run(cfg: PipelineConfig, L: Loaded, seed: int) -> bk.TrainResult:
    b = cfg.backend
    tc = bk.TrainConfig(b.learning_rate, b.epochs, b.batch_size, seed)
    return bk.train_backend(L.graph, L.path_sets, L.table, backend_config(cfg), tc)


def stage_train(ws: Workspace, L: Loaded) -> None:
    res = train_run(ws.cfg, L, sub_seed(ws.cfg.seed, "train"))
    bk.save_checkpoint(res.params, ws.path("backend"))
    with open(ws.path("train_losses.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        fh.writelines(f"{e},{loss:.10f}\n" for e, loss in enumerate(res.losses))


def repr_config(cfg: PipelineConfig, seed: int) -> cf_repr.CfReprConfig:
    r = cfg.cf_repr
    return cf_repr.CfReprConfig(r.alpha, r.beta, r.lam, r.learning_rate, r.steps, seed=seed)


def struct_configs(cfg: PipelineConfig, seed: int):
    s = cfg.cf_struct
    return (cf_struct.PolicyConfig(s.hidden, s.init_prob, s.learning_rate, s.epochs, s.episodes_per_epoch, seed),
            cf_struct.RewardConfig(s.zeta, s.epsilon, s.eta))


def stage_explain_repr(ws: Workspace, L: Loaded) -> None:
    seed = sub_seed(ws.cfg.seed, "explain-repr")
    _, expls = cf_repr.optimize_perturbations(L.recommender(), L.eval_pairs(), repr_config(ws.cfg, seed))
    cf_repr.save_explanations(ws.path("repr.jsonl"), expls, seed)


def stage_explain_struct(ws: Workspace, L: Loaded) -> None:
    seed = sub_seed(ws.cfg.seed, "explain-struct")
    rec = L.recommender()
    curves_rows = ["user,item,epoch,mean_reward,mean_F"]
    with open(ws.path("struct.jsonl"), "w", encoding="utf-8") as out, \
            open(ws.path("struct_traces.jsonl"), "w", encoding="utf-8") as tr:
        for u, i in L.eval_pairs():
            pcfg, rcfg = struct_configs(ws.cfg, sub_seed(seed, f"{u}:{i}"))
            expl, curves, episodes = cf_struct.explain_pair(rec, u, i, pcfg, rcfg)
            out.write(json.dumps(struct_to_json(expl), sort_keys=True) + "\n")
            for ep in episodes:
                tr.write(json.dumps({"user": u, "item": i, **ep.to_json()}, sort_keys=True) + "\n")
            for e, (r, f) in enumerate(zip(curves.mean_reward, curves.mean_F)):
                curves_rows.append(f"{u},{i},{e},{r:.6f},{f:.6f}")
    ws.path("struct_curves.csv").write_text("\n".join(curves_rows) + "\n")


def struct_to_json(e: cf_struct.StructExplanation) -> dict:
    return {"user": e.user, "item": e.item, "paths": [list(p) for p in e.paths],
            "edited_paths": [list(p) for p in e.edited_paths],
            "credits": {str(k): round(v, 12) for k, v in sorted(e.credits.items())},
            "reward": round(e.reward, 9), "delta_s": round(e.delta_s, 12), "empty": e.empty,
            "method": "struct"}


def struct_from_json(d: dict) -> cf_struct.StructExplanation:
    return cf_struct.StructExplanation(d["user"], d["item"], [tuple(p) for p in d["paths"]],
                                       [tuple(p) for p in d["edited_paths"]],
                                       {int(k): v for k, v in d["credits"].items()},
                                       d["reward"], d["delta_s"], d["empty"])


def load_struct(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [struct_from_json(json.loads(line)) for line in fh if line.strip()]


def _r(x, nd=10):
    return None if x is None or (isinstance(x, float) and np.isnan(x)) else round(float(x), nd)


def stage_evaluate(ws: Workspace, L: Loaded) -> None:
    from .evaluation import evaluate_workspace
    report, fidelity_rows, stability_rows = evaluate_workspace(ws, L)
    ws.path("eval_report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    with open(ws.path("fidelity.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "ratio", "fidelity"])
        w.writerows(fidelity_rows)
    with open(ws.path("stability_samples.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "user", "item", "path_index", "run", "weight"])
        w.writerows(stability_rows)


def stage_report(ws: Workspace, L: Loaded) -> None:
    from .evaluation import render_report
    report = json.loads(ws.path("eval_report.json").read_text())
    ws.path("report.txt").write_text(render_report(report))


RUNNERS = {
    "ingest": stage_ingest,
    "walk": stage_walk,
    "embed": stage_embed,
    "train": stage_train,
    "explain-repr": stage_explain_repr,
    "explain-struct": stage_explain_struct,
    "evaluate": stage_evaluate,
    "report": stage_report,
}


def run_stage(stage: str, cfg: PipelineConfig, out_dir) -> Path:
    if stage not in RUNNERS:
        raise PipelineError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    ws = Workspace(out_dir, cfg)
    ws.out.mkdir(parents=True, exist_ok=True)
    inputs = ws.check_upstream(stage)
    if stage == "ingest":
        inputs = {Path(p).name: file_hash(p) for p in (cfg.data.interactions, cfg.data.metadata) if Path(p).exists()}
    log.info("running stage %s", stage)
    RUNNERS[stage](ws, Loaded(ws))
    ws.write_manifest(stage, inputs)
    return ws.manifest_path(stage)


def run_all(cfg: PipelineConfig, out_dir) -> None:
    for stage in STAGES:
        run_stage(stage, cfg, out_dir)
