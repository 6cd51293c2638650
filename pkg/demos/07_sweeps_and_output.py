"""Run a seeded sweep, write CSV and JSON, and read the result back.

Trial seeds derive from (base_seed, grid index, trial index), so the
numbers do not depend on the thread count.
"""

import tempfile
from pathlib import Path

from jointdr import default_config, emit, load_result, run_experiment

config = default_config("sweep_m", n=40, trials=20, grid=(1000, 2000, 5000, 10000), base_seed=7)
result = run_experiment(config, threads=2)
print("log mean NSEE:", result.mean_log_error["svd"].round(3))
print(f"slope {result.slope.slope:.3f} (r^2 {result.slope.r2:.3f})")

with tempfile.TemporaryDirectory() as tmp:
    emit(result, Path(tmp) / "sweep.csv")
    emit(result, Path(tmp) / "sweep.json", format="json")
    print((Path(tmp) / "sweep.csv").read_text().splitlines()[:3])
    again = load_result(Path(tmp) / "sweep.json")
    print("round trip slope:", round(again.slope.slope, 3))
