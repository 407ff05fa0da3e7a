"""Unbiased randomized compression operators.

Every operator C here satisfies E[C(x)] = x and E||C(x) - x||^2 <= omega ||x||^2.
Operators accept a single vector of shape (d,) or a batch of shape (m, d);
rows of a batch are compressed independently.
"""
from dataclasses import dataclass, replace
from itertools import combinations
import math

import numpy as np

from .errors import ConfigurationError, DimensionError

IDENTITY = "identity"
RANDK = "randk"
QUANT = "quant"
NATURAL = "natural"
KINDS = (IDENTITY, RANDK, QUANT, NATURAL)

# variance constant of stochastic power-of-two rounding (Horvath et al., Cnat)
NATURAL_OMEGA = 1.0 / 8.0


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    # SplitMix64 finalizer, a bijection on uint64; array arithmetic wraps silently
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_keys(seed, ids):
    """64-bit keys for streams ``(seed, *row)``, one per row of ``ids``."""
    ids = np.atleast_2d(np.asarray(ids, dtype=np.uint64))
    key = _mix64(np.full(ids.shape[0], np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
    return extend_keys(key, ids)


def extend_keys(keys, ids):
    """Keys of streams whose ids are the parents' ids followed by the columns of ``ids``.

    ``ids`` is broadcast against ``keys``: pass shape (len(keys), j) or (j,).
    """
    ids = np.asarray(ids, dtype=np.uint64)
    cols = ids.T if ids.ndim == 2 else ids[:, None]
    for col in cols:
        keys = _mix64(keys + _GOLDEN * (col + np.uint64(1)))
    return keys


def _uniforms(keys, m):
    # counter mode: the j-th draw of a stream is mix(key + (j + 1) * golden)
    z = keys[:, None] + _GOLDEN * (np.arange(1, m + 1, dtype=np.uint64))[None, :]
    return (_mix64(z) >> np.uint64(11)) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by ``(seed, stream_id)``.

    Draws are a pure function of the seed, the id tuple and the draw index,
    so identical streams repeat exactly and the order in which machines are
    visited never matters. Distinct ids give statistically independent
    streams.
    """

    seed: int
    stream_id: tuple = ()

    def child(self, *ids):
        return RngStream(self.seed, tuple(self.stream_id) + tuple(ids))

    def random(self, shape=()):
        m = int(np.prod(shape, dtype=np.int64))
        u = _uniforms(stream_keys(self.seed, [tuple(self.stream_id)] if self.stream_id else np.zeros((1, 0))), m)
        return u.reshape(shape) if shape != () else float(u[0, 0])


class StreamBatch:
    """Several streams evaluated together; row r of ``random((m, d))`` is stream ``ids[r]``.

    Row r equals ``RngStream(seed, ids[r]).random((d,))``.
    """

    def __init__(self, seed, ids=None, keys=None):
        self._keys = stream_keys(seed, ids) if keys is None else keys

    def random(self, shape):
        if len(shape) != 2 or shape[0] != len(self._keys):
            raise DimensionError(f"batch of {len(self._keys)} streams cannot fill shape {shape}")
        return _uniforms(self._keys, shape[1])


def as_generator(rng):
    """Anything with a numpy-style ``random(shape)`` method."""
    if isinstance(rng, (RngStream, StreamBatch, np.random.Generator)):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot draw random numbers from {type(rng).__name__}")


@dataclass(frozen=True)
class CompressorSpec:
    kind: str
    d: int
    k: int = None
    p: int = 2
    s: int = None
    natural_omega: float = NATURAL_OMEGA

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown compressor kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ConfigurationError(f"dimension d must be a positive integer, got {self.d!r}")
        if self.kind == RANDK:
            if self.k is None or not 1 <= self.k <= self.d:
                raise ConfigurationError(f"randk requires 1 <= k <= d (d={self.d}), got k={self.k!r}")
        if self.kind == QUANT:
            if self.p is None or self.p < 1:
                raise ConfigurationError(f"quantization requires p >= 1, got p={self.p!r}")
            if self.s is None or self.s < 1:
                raise ConfigurationError(f"quantization requires s >= 1, got s={self.s!r}")
        if self.kind == NATURAL and not self.natural_omega >= 0:
            raise ConfigurationError("natural_omega must be nonnegative")

    @classmethod
    def identity(cls, d):
        return cls(IDENTITY, d)

    @classmethod
    def randk(cls, d, k):
        return cls(RANDK, d, k=k)

    @classmethod
    def quantization(cls, d, s=None, p=2):
        if s is None:
            s = math.isqrt(d - 1) + 1 if d > 1 else 1  # ceil(sqrt(d))
        return cls(QUANT, d, p=p, s=s)

    @classmethod
    def natural(cls, d, omega=NATURAL_OMEGA):
        return cls(NATURAL, d, natural_omega=omega)

    @property
    def omega(self):
        return omega(self)

    @property
    def bits(self):
        return message_bits(self)

    def with_dim(self, d):
        return replace(self, d=d)

    def label(self):
        if self.kind == RANDK:
            return f"randk:{self.k}"
        if self.kind == QUANT:
            return f"quant:s={self.s},p={self.p}"
        return self.kind


def omega(spec):
    """Variance constant of the operator."""
    if spec.kind == IDENTITY:
        return 0.0
    if spec.kind == RANDK:
        return spec.d / spec.k - 1.0
    if spec.kind == QUANT:
        return 2.0 + (spec.d ** (1.0 / spec.p) + spec.d ** 0.5) / spec.s
    return float(spec.natural_omega)


def message_bits(spec):
    """Bits one machine sends for one compressed vector (accounting model)."""
    if spec.kind == RANDK:
        return 32.0 * spec.k
    if spec.kind == NATURAL:
        return 9.0 * spec.d
    if spec.kind == QUANT:
        return 2.8 * spec.d + 32.0
    return 32.0 * spec.d


def parse_compressor(text, d):
    """Build a spec from shorthand such as ``randk:d/4``, ``natural``, ``quant:sqrt``.

    Accepted forms: ``identity``, ``natural``, ``randk:<k>``, ``randk:d/<m>``,
    ``quant:sqrt``, ``quant:<s>``, ``quant:s=<s>,p=<p>``.
    """
    text = text.strip().lower()
    kind, _, arg = text.partition(":")
    try:
        if kind in ("identity", "none"):
            return CompressorSpec.identity(d)
        if kind == NATURAL:
            return CompressorSpec.natural(d, float(arg) if arg else NATURAL_OMEGA)
        if kind in ("randk", "rand-k", "randr"):
            if arg.startswith("d/"):
                k = max(1, d // int(arg[2:]))
            else:
                k = int(arg)
            return CompressorSpec.randk(d, k)
        if kind in (QUANT, "qsgd"):
            if arg in ("", "sqrt"):
                return CompressorSpec.quantization(d)
            if "=" in arg:
                kw = dict(part.split("=") for part in arg.split(","))
                s = kw.get("s", "sqrt")
                s = None if s == "sqrt" else int(s)
                return CompressorSpec.quantization(d, s=s, p=int(kw.get("p", 2)))
            return CompressorSpec.quantization(d, s=int(arg))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"bad compressor shorthand {text!r}: {exc}") from exc
    raise ConfigurationError(f"unknown compressor shorthand {text!r}")


def compress(spec, x, rng):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.d or x.ndim not in (1, 2):
        raise DimensionError(f"expected vectors of length {spec.d}, got shape {x.shape}")
    if spec.kind == IDENTITY:
        return x.copy()
    gen = as_generator(rng)
    if spec.kind == RANDK:
        return _randk(x, spec.k, gen)
    if spec.kind == QUANT:
        return _quantize(x, spec.p, spec.s, gen)
    return _natural(x, gen)


def _randk(x, k, gen):
    d = x.shape[-1]
    if k == d:
        return x.copy()
    # ranks of iid uniform keys form a uniform permutation; the k smallest
    # keys give a uniform k-subset
    keys = gen.random(x.shape)
    idx = np.argpartition(keys, k - 1, axis=-1)[..., :k]
    out = np.zeros_like(x)
    np.put_along_axis(out, idx, np.take_along_axis(x, idx, axis=-1) * (d / k), axis=-1)
    return out


def _quantize(x, p, s, gen):
    norm = np.linalg.norm(x, ord=p, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    r = np.abs(x) * s / safe
    level = np.clip(np.floor(r), 0, s - 1)
    up = gen.random(x.shape) < (r - level)
    xi = level + up
    out = np.sign(x) * norm * xi / s
    return np.where(norm > 0, out, 0.0)


def _natural(x, gen):
    mag = np.abs(x)
    _, e = np.frexp(mag)
    low = np.ldexp(1.0, e - 1)  # largest power of two <= |x|
    prob = np.where(mag > 0, mag / low - 1.0, 0.0)
    up = gen.random(x.shape) < prob
    out = np.where(up, 2.0 * low, low)
    return np.where(mag > 0, np.sign(x) * out, 0.0)


def randk_exact_moments(x, k):
    """Exact E[C(x)] and E||C(x)-x||^2 for rand-k by enumerating all supports."""
    x = np.asarray(x, dtype=float)
    d = x.size
    mean = np.zeros(d)
    second = 0.0
    supports = list(combinations(range(d), k))
    for support in supports:
        c = np.zeros(d)
        idx = list(support)
        c[idx] = x[idx] * (d / k)
        mean += c
        second += float(np.sum((c - x) ** 2))
    return mean / len(supports), second / len(supports)


def check_laws(spec, x, n_draws, rng, z=4.0):
    """Monte-Carlo check of unbiasedness and the variance bound for one vector.

    Returns a dict with the worst standardized mean deviation, the empirical
    relative variance and whether both laws hold (mean within ``z`` standard
    errors per coordinate, relative variance <= omega * (1 + 5/sqrt(N))).
    """
    x = np.asarray(x, dtype=float)
    draws = compress(spec, np.broadcast_to(x, (n_draws, x.size)), rng)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(n_draws)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(x))))
    dev = np.abs(mean - x)
    with np.errstate(divide="ignore", invalid="ignore"):
        zscores = np.where(se > 0, dev / np.where(se > 0, se, 1.0), np.where(dev <= slack, 0.0, np.inf))
    sq = float(np.dot(x, x))
    rel_var = float(np.mean(np.sum((draws - x) ** 2, axis=1)) / sq) if sq > 0 else 0.0
    bound = spec.omega * (1.0 + 5.0 / math.sqrt(n_draws))
    return {
        "compressor": spec.label(),
        "max_z": float(np.max(zscores)),
        "rel_var": rel_var,
        "omega": spec.omega,
        "var_bound": bound,
        "unbiased": bool(np.all(dev <= z * se + slack)),
        "variance_ok": bool(rel_var <= bound + 1e-12),
    }
