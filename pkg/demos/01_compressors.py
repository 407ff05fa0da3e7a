"""Compression operators: variance constants, bit costs and a quick Monte-Carlo look.

Run with ``python demos/01_compressors.py``.
"""
import numpy as np

from canita.compressors import RngStream, check_laws, compress, parse_compressor

d = 100
x = np.random.default_rng(0).standard_normal(d)

# %% the three operators used in the benchmarks, plus no compression
print(f"{'operator':<16}{'omega':>8}{'bits/msg':>10}{'rel. var (MC)':>16}")
for text in ("identity", "randk:d/4", "natural", "quant:sqrt"):
    spec = parse_compressor(text, d)
    res = check_laws(spec, x, 20_000, RngStream(1))
    print(f"{spec.label():<16}{spec.omega:>8.3f}{spec.bits:>10.0f}{res['rel_var']:>16.4f}")

# %% one draw of each, first eight coordinates
print("\nx        ", np.round(x[:8], 3))
for text in ("randk:d/4", "natural", "quant:sqrt"):
    spec = parse_compressor(text, d)
    print(f"{text:<9}", np.round(compress(spec, x, RngStream(7, (0,)))[:8], 3))

# %% streams are keyed by (seed, ids): the same key always gives the same draw
spec = parse_compressor("randk:d/4", d)
a = compress(spec, x, RngStream(3, (5, 0)))
b = compress(spec, x, RngStream(3, (5, 0)))
print("\nsame stream, same output:", np.array_equal(a, b))
