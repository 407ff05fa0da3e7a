"""Loss against communicated bits for the three methods on a synthetic problem.

Writes one CSV trace per (method, compressor) into ``demo_out/`` and prints
the bits each needed to reach a few loss levels.
Run with ``python demos/03_compare_methods.py`` (about a minute).
"""
from dataclasses import replace

from canita import bench
from canita.config import RunConfig

config = RunConfig(dataset="synthetic:d=100,rows=1000,margin=10", n=20, T=3000, seeds=(1, 2),
                   thresholds=(0.2, 0.1, 0.07), ref_steps=100_000)

paths, summary = bench.sweep(config, ["canita", "diana", "qsgd"], ["natural", "randk:d/4"], "demo_out")
print(f"wrote {len(paths)} traces and demo_out/summary.csv\n")
print(summary.to_csv())

# %% the same problem with CANITA charged for a single message per round
one = bench.run_cell(replace(config, algo="canita", compressor="randk:d/4", charge_both=False, seeds=(1,)))[0]
print("canita (one message/round) bits to 0.1:", bench.bits_to_threshold(one, 0.1))
