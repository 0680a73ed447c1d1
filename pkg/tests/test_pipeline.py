import json

import pytest
from conftest import tiny_pipeline_config

from pathcf import cli
from pathcf.pipeline import (STAGES, MissingStageError, PipelineConfig, StaleArtifactError, run_all, run_stage,
                             sub_seed)


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    cfg = tiny_pipeline_config(root)
    run_all(cfg, root / "out")
    return cfg, root / "out"


def test_defaults_follow_reference_values():
    cfg = PipelineConfig()
    assert cfg.embedding.dim == 100
    assert (cfg.paths.min_len, cfg.paths.max_len) == (4, 6)
    assert (cfg.cf_repr.alpha, cfg.cf_repr.beta, cfg.cf_repr.lam, cfg.cf_repr.steps) == (0.1, 0.5, 5.0, 50)
    assert (cfg.cf_struct.zeta, cfg.cf_struct.epsilon, cfg.cf_struct.eta, cfg.cf_struct.epochs) == (10, 10, 100, 50)
    assert cfg.eval.runs == 10 and cfg.eval.ratio_list == [0.25, 0.5, 0.75, 1.0]
    assert cfg.backend.learning_rate == 1e-3 and cfg.backend.epochs == 300


def test_config_roundtrip(tmp_path):
    cfg = tiny_pipeline_config(tmp_path, seed=1)
    cfg.seed = 17
    cfg.cf_repr.alpha = 0.1 + 1e-17 * 3
    back = PipelineConfig.from_ini(cfg.to_ini())
    assert back == cfg
    assert back.to_ini() == cfg.to_ini()


def test_unknown_keys_rejected():
    cfg = PipelineConfig()
    with pytest.raises(ValueError):
        cfg.set("backend.momentum", "0.9")
    with pytest.raises(ValueError):
        cfg.set("optimizer.lr", "1")
    with pytest.raises(ValueError):
        cfg.set("backend.epochs", "many")


def test_sub_seeds_are_stable_and_distinct():
    assert sub_seed(0, "train") == sub_seed(0, "train")
    assert len({sub_seed(0, s) for s in STAGES}) == len(STAGES)
    assert sub_seed(0, "train") != sub_seed(1, "train")


def test_all_artifacts_written(finished):
    cfg, out = finished
    for name in ("eval_report.json", "report.txt", "struct_curves.csv", "fidelity.csv", "stability_samples.csv"):
        assert (out / name).exists()
    report = json.loads((out / "eval_report.json").read_text())
    assert report["provenance"]["master_seed"] == cfg.seed
    assert set(report["provenance"]["stage_seeds"]) == set(STAGES)
    assert "confidence" in (out / "report.txt").read_text()


def test_missing_stage(tmp_path):
    cfg = tiny_pipeline_config(tmp_path)
    with pytest.raises(MissingStageError, match="missing stage: train"):
        run_stage("explain-repr", cfg, tmp_path / "out")


def test_stale_config_detected(finished, tmp_path):
    cfg, out = finished
    changed = PipelineConfig.from_ini(cfg.to_ini())
    changed.embedding.window = 5
    with pytest.raises(StaleArtifactError):
        run_stage("train", changed, out)


def test_tampered_artifact_detected(finished):
    cfg, out = finished
    target = out / "repr.jsonl"
    original = target.read_bytes()
    try:
        target.write_bytes(original + b"\n")
        with pytest.raises(StaleArtifactError, match="repr.jsonl"):
            run_stage("evaluate", cfg, out)
    finally:
        target.write_bytes(original)


def test_embed_rerun_is_byte_identical(finished):
    cfg, out = finished
    before = (out / "embedding.bin").read_bytes()
    run_stage("embed", cfg, out)
    assert (out / "embedding.bin").read_bytes() == before


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tiny_pipeline_config(tmp_path)
    ini = tmp_path / "p.ini"
    ini.write_text(cfg.to_ini())
    assert cli.main(["evaluate", "--config", str(ini), "--out", str(tmp_path / "o")]) == 3
    assert "missing stage: explain-repr" in capsys.readouterr().err
    assert cli.main(["ingest", "--config", str(ini), "--set", "backend.bogus=1", "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["ingest", "--config", str(ini), "--out", str(tmp_path / "o")]) == 0
    assert cli.main(["walk", "--config", str(ini), "--seed", "5", "--out", str(tmp_path / "o")]) == 2


def test_cli_config_precedence(tmp_path, capsys):
    ini = tmp_path / "p.ini"
    cfg = PipelineConfig()
    cfg.backend.epochs = 7
    cfg.seed = 3
    ini.write_text(cfg.to_ini())
    assert cli.main(["config", "--config", str(ini), "--set", "backend.epochs=9", "--seed", "4"]) == 0
    shown = PipelineConfig.from_ini(capsys.readouterr().out)
    assert shown.backend.epochs == 9 and shown.seed == 4


def test_cli_synth(tmp_path, capsys):
    assert cli.main(["synth", "--out", str(tmp_path), "--seed", "2"]) == 0
    cfg = PipelineConfig.load(tmp_path / "pipeline.ini")
    assert cfg.embedding.dim == 32 and cfg.data.truth.endswith("truth.json")


def test_two_runs_give_identical_reports(finished, tmp_path):
    cfg, out = finished
    run_all(cfg, tmp_path / "again")
    for name in ("eval_report.json", "report.txt", "repr.jsonl", "struct.jsonl", "stability_samples.csv"):
        assert (tmp_path / "again" / name).read_bytes() == (out / name).read_bytes()


def test_study_runs_on_tiny_data(finished):
    _, out = finished
    report = json.loads((out / "eval_report.json").read_text())
    assert report["stability"]["attention"]["paths"] > 0
    assert report["effectiveness"]["pairs"]
