import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from canita.compressors import (CompressorSpec, RngStream, StreamBatch, check_laws, compress, message_bits, omega,
                                parse_compressor, randk_exact_moments)
from canita.errors import ConfigurationError, DimensionError


def test_omega_examples():
    assert omega(CompressorSpec.randk(8, 2)) == 3
    assert omega(CompressorSpec.identity(17)) == 0
    assert omega(CompressorSpec.quantization(4, s=2, p=2)) == 4
    assert omega(CompressorSpec.randk(9, 9)) == 0
    assert omega(CompressorSpec.natural(5)) == 1 / 8


def test_message_bits_examples():
    assert message_bits(CompressorSpec.randk(100, 25)) == 800
    assert message_bits(CompressorSpec.natural(100)) == 900
    assert message_bits(CompressorSpec.quantization(100, s=10)) == 312
    assert message_bits(CompressorSpec.identity(10)) == 320


@pytest.mark.parametrize("kwargs", [
    dict(kind="randk", d=5, k=0), dict(kind="randk", d=5, k=6), dict(kind="quant", d=5, s=0),
    dict(kind="quant", d=5, s=2, p=0), dict(kind="topk", d=5), dict(kind="identity", d=0),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigurationError):
        CompressorSpec(**kwargs)


def test_error_names_bound():
    with pytest.raises(ConfigurationError, match="k <= d"):
        CompressorSpec.randk(4, 9)


def test_parse_shorthand():
    assert parse_compressor("randk:d/4", 100) == CompressorSpec.randk(100, 25)
    assert parse_compressor("randk:7", 100).k == 7
    assert parse_compressor("quant:sqrt", 100) == CompressorSpec.quantization(100, s=10)
    assert parse_compressor("quant:s=3,p=1", 10) == CompressorSpec.quantization(10, s=3, p=1)
    assert parse_compressor("natural", 3).kind == "natural"
    assert parse_compressor("identity", 3).omega == 0
    with pytest.raises(ConfigurationError):
        parse_compressor("topk:3", 10)
    with pytest.raises(ConfigurationError):
        parse_compressor("randk:x", 10)


def test_sqrt_levels_are_ceiling():
    assert CompressorSpec.quantization(101).s == 11
    assert CompressorSpec.quantization(100).s == 10
    assert CompressorSpec.quantization(1).s == 1


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        compress(CompressorSpec.randk(4, 2), np.ones(5), RngStream(0))


def test_identity_and_full_randk_are_exact():
    x = np.random.default_rng(0).standard_normal(7)
    assert np.array_equal(compress(CompressorSpec.identity(7), x, RngStream(1)), x)
    assert np.array_equal(compress(CompressorSpec.randk(7, 7), x, RngStream(1)), x)


def test_quantization_zero_vector():
    for p in (1, 2, 3):
        out = compress(CompressorSpec.quantization(6, s=3, p=p), np.zeros(6), RngStream(2))
        assert np.array_equal(out, np.zeros(6))


def test_quantization_levels_and_ties():
    spec = CompressorSpec.quantization(4, s=2, p=2)
    x = np.array([1.0, 1.0, 1.0, 1.0])  # |x_i| s / ||x|| = 1 exactly: deterministic
    for seed in range(20):
        assert np.array_equal(compress(spec, x, RngStream(seed)), x)
    x = np.array([0.0, 0.0, 0.0, -3.0])  # top level equals s after clamping to s-1 then rounding up
    for seed in range(20):
        assert np.array_equal(compress(spec, x, RngStream(seed)), x)


def test_natural_outputs_powers_of_two():
    x = np.array([0.0, 3.0, -0.3, 1.0, 2.0 ** -40, -5e5])
    out = compress(CompressorSpec.natural(6), np.broadcast_to(x, (200, 6)), np.random.default_rng(0))
    nz = out[:, 1:]
    m, _ = np.frexp(np.abs(nz))
    assert np.all(m == 0.5)
    assert np.all(np.sign(nz) == np.sign(x[1:]))
    assert np.all(out[:, 0] == 0)
    assert np.all(out[:, 3] == 1.0) and np.all(out[:, 4] == 2.0 ** -40)
    assert set(np.unique(out[:, 1])) <= {2.0, 4.0}


def test_randk_support_size():
    spec = CompressorSpec.randk(10, 3)
    x = np.arange(1.0, 11.0)
    out = compress(spec, np.broadcast_to(x, (500, 10)), np.random.default_rng(1))
    assert np.all((out != 0).sum(axis=1) == 3)
    kept = out != 0
    assert np.allclose(out[kept], (np.broadcast_to(x, out.shape) * 10 / 3)[kept])


def test_randk_small_mean():
    # d=4, k=1 on (1,2,3,4): mean within 3 standard errors per coordinate
    x = np.array([1.0, 2.0, 3.0, 4.0])
    res = check_laws(CompressorSpec.randk(4, 1), x, 100_000, RngStream(3), z=3.0)
    assert res["unbiased"] and res["max_z"] <= 3.0


def test_randk_d10_k2_variance_matches_enumeration():
    x = np.random.default_rng(4).standard_normal(10)
    mean, second = randk_exact_moments(x, 2)
    assert np.allclose(mean, x, rtol=1e-12, atol=0)
    assert math.isclose(second, 4 * x @ x, rel_tol=1e-12)
    res = check_laws(CompressorSpec.randk(10, 2), x, 100_000, RngStream(5))
    assert res["variance_ok"]


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_exact_randk_oracle(d):
    x = np.random.default_rng(d).standard_normal(d)
    for k in range(1, d + 1):
        mean, second = randk_exact_moments(x, k)
        assert np.max(np.abs(mean - x)) <= 1e-12 * np.max(np.abs(x))
        assert abs(second - (d / k - 1) * (x @ x)) <= 1e-12 * (x @ x)


def test_rng_stream_determinism_and_independence():
    a = RngStream(7, (1, 2)).random((1000,))
    assert np.array_equal(a, RngStream(7, (1, 2)).random((1000,)))
    b = RngStream(7, (2, 1)).random((1000,))
    c = RngStream(8, (1, 2)).random((1000,))
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
    assert np.all((a >= 0) & (a < 1))
    assert RngStream(1).child(3).child(4) == RngStream(1, (3, 4))
    assert isinstance(RngStream(1, (0,)).random(), float)


def test_stream_uniformity():
    u = RngStream(11, (5,)).random((200_000,))
    hist, _ = np.histogram(u, bins=20, range=(0, 1))
    expected = u.size / 20
    chi2 = np.sum((hist - expected) ** 2 / expected)
    assert chi2 < 50  # 19 degrees of freedom; p ~ 1e-4
    assert abs(u.mean() - 0.5) < 5 * math.sqrt(1 / 12 / u.size)


def test_stream_batch_rows_match_single_streams():
    ids = [(0, 3, 9, 0), (0, 4, 9, 0), (0, 5, 9, 1)]
    batch = StreamBatch(42, ids).random((3, 17))
    for r, sid in enumerate(ids):
        assert np.array_equal(batch[r], RngStream(42, sid).random((17,)))


def test_compress_deterministic_per_stream():
    spec = CompressorSpec.quantization(30, s=4)
    x = np.random.default_rng(0).standard_normal(30)
    one = compress(spec, x, RngStream(9, (1, 2)))
    assert np.array_equal(one, compress(spec, x, RngStream(9, (1, 2))))
    assert not np.array_equal(one, compress(spec, x, RngStream(9, (1, 3))))


SPECS = st.one_of(
    st.integers(1, 12).flatmap(lambda d: st.integers(1, d).map(lambda k: CompressorSpec.randk(d, k))),
    st.tuples(st.integers(1, 12), st.integers(1, 6), st.integers(1, 3)).map(
        lambda t: CompressorSpec.quantization(t[0], s=t[1], p=t[2])),
    st.integers(1, 12).map(CompressorSpec.natural),
)


@settings(max_examples=60, deadline=None)
@given(spec=SPECS, seed=st.integers(0, 2 ** 32), scale=st.floats(1e-6, 1e6))
def test_variance_bound_per_draw_shape(spec, seed, scale):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(spec.d) * scale
    out = compress(spec, x, RngStream(seed))
    assert out.shape == x.shape and np.all(np.isfinite(out))
    # every single draw lies on the operator's support
    if spec.kind == "randk":
        assert np.count_nonzero(out) <= spec.k
    if spec.kind == "quant":
        norm = np.linalg.norm(x, ord=spec.p)
        levels = np.abs(out) * spec.s / norm
        assert np.allclose(levels, np.round(levels), atol=1e-9)
        assert np.all(np.round(levels) <= spec.s)
    assert spec.omega >= 0


@settings(max_examples=15, deadline=None)
@given(spec=SPECS, seed=st.integers(0, 2 ** 32))
def test_laws_hold_for_random_specs(spec, seed):
    x = np.random.default_rng(seed).standard_normal(spec.d)
    res = check_laws(spec, x, 20_000, RngStream(seed), z=5.0)
    assert res["unbiased"], res
    assert res["variance_ok"], res
