"""
A small experiment from config to report
========================================

Two presets are run 10 times each on four generated instances. The results
file feeds the comparison report and the solution-quality summary.
"""

import tempfile
from pathlib import Path

from nurseroster.harness import ExperimentConfig, compare_results, emit_summary, load_presets, run_experiment

presets = load_presets()
print("V4:", presets["V4"].to_dict()["ga"], "\n  decided here:", presets["V4"].decided)

cfg = ExperimentConfig.from_dict(
    {
        "instances": [{"generator": {"preset": "tiny", "seed": s}, "id": f"week{s:02d}"} for s in range(4)],
        "algorithms": ["V4", "V6", {"name": "V6-short", "preset": "V6", "ga": {"generations": 5}}],
        "trials": 10,
        "seed": 2024,
    }
)

out = Path(tempfile.mkdtemp())
results = run_experiment(cfg, jobs=2, out=out)
print(results.read_text().splitlines()[:4])

reports = compare_results(results, [0.5, 1.0], out=out)
print(reports[1.0].to_text())
print((out / "stability.txt").read_text())

instances = cfg.load_instances()
summary = emit_summary(results, "exact", instances, out=out)
print(summary.to_csv())
