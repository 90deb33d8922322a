import subprocess
import sys
from pathlib import Path

SCRIPT = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_backends.py"


def test_benchmark_smoke():
    out = subprocess.run([sys.executable, str(SCRIPT), "--moments", "500", "--features", "6", "--frames", "10",
                          "--sweeps", "3", "--repeat", "1"], capture_output=True, text=True, check=True)
    assert "gig_moments" in out.stdout and "max difference" in out.stdout
