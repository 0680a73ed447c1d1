"""Command-line entry point: ``pathcf <stage> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import STAGES, PipelineConfig, PipelineError, run_stage
from .synthetic import SyntheticSpec, write_synthetic

log = logging.getLogger("pathcf")

# desk-scale settings for the bundled synthetic benchmark
SYNTHETIC_OVERRIDES = {
    "paths.walks_per_vertex": "200",
    "embedding.dim": "32",
    "backend.learning_rate": "0.05",
    "backend.epochs": "30",
    "eval.max_pairs": "25",
    "eval.study_pairs": "5",
}


def synthetic_config(data_dir) -> PipelineConfig:
    data_dir = Path(data_dir).resolve()
    cfg = PipelineConfig()
    cfg.data.interactions = str(data_dir / "interactions.tsv")
    cfg.data.metadata = str(data_dir / "metadata.tsv")
    cfg.data.truth = str(data_dir / "truth.json")
    for k, v in SYNTHETIC_OVERRIDES.items():
        cfg.set(k, v)
    return cfg


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathcf", description="Counterfactual path explanations for recommendation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("--out", required=True, help="artifact directory")

    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    sub.add_parser("run", parents=[common], help="run every stage in order")

    syn = sub.add_parser("synth", help="write the synthetic benchmark and a matching config")
    syn.add_argument("--out", required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--users", type=int, default=SyntheticSpec.n_users)
    syn.add_argument("--items", type=int, default=SyntheticSpec.n_items)

    cfg = sub.add_parser("config", help="print the effective config")
    cfg.add_argument("--config")
    cfg.add_argument("--seed", type=int)
    cfg.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            spec = SyntheticSpec(n_users=args.users, n_items=args.items, seed=args.seed)
            files = write_synthetic(args.out, spec)
            cfg_path = Path(args.out) / "pipeline.ini"
            cfg_path.write_text(synthetic_config(args.out).to_ini())
            for f in (*files.values(), cfg_path):
                print(f)
            return 0
        cfg = load_config(args)
        if args.command == "config":
            sys.stdout.write(cfg.to_ini())
            return 0
        stages = STAGES if args.command == "run" else (args.command,)
        for stage in stages:
            run_stage(stage, cfg, args.out)
            print(f"{stage}: ok")
        if "report" in stages:
            sys.stdout.write((Path(args.out) / "report.txt").read_text())
        return 0
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
