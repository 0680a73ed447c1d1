import importlib.util
from pathlib import Path


def test_benchmark_script_runs(capsys):
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--repeat", "1", "--walks-per-vertex", "2"])
    out = capsys.readouterr().out
    for name in ("simple_walks", "temporal_walks", "sgns_epoch"):
        assert name in out
