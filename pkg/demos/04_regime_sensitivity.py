"""How much the bit ordering depends on the problem.

CANITA pays two messages per round. On easy problems plain compressed
gradient descent reaches a moderate loss in few rounds and the extra
message dominates; as the problem gets harder (larger label margin, so the
optimum moves further from the origin) acceleration pays off.
Run with ``python demos/04_regime_sensitivity.py`` (a few minutes).
"""
import math
from dataclasses import replace

from canita import bench
from canita.config import RunConfig

threshold = 0.05
for margin in (4, 6, 10):
    base = RunConfig(dataset=f"synthetic:d=100,rows=1000,margin={margin}", n=20, T=7000, compressor="randk:d/4")
    cells = {
        "canita x2": replace(base, algo="canita"),
        "canita x1": replace(base, algo="canita", charge_both=False),
        "qsgd": replace(base, algo="qsgd"),
    }
    row = []
    for name, cfg in cells.items():
        (trace,) = bench.run_cell(cfg)
        bits = bench.bits_to_threshold(trace, threshold)
        row.append(f"{name}: {'never' if math.isinf(bits) else f'{bits:.3g}'}")
    print(f"margin {margin:>2} | " + " | ".join(row))
