"""Run configuration: a flat ``key = value`` text format plus builders.

Datasets are named by descriptor strings:

    synthetic:d=100,rows=1000,noise=0.1,seed=0
    libsvm:/path/to/a9a
"""
from dataclasses import dataclass, field, fields, replace
import hashlib
import math

import numpy as np

from . import __version__
from .compressors import parse_compressor
from .datasets import PartitionPlan, parse_libsvm, partition, synthesize
from .errors import ConfigurationError
from .objectives import LogisticObjective

SYNTHETIC_DEFAULTS = {"d": 50, "rows": 200, "margin": math.inf, "noise": 0.0, "seed": 0, "cond": 1.0}


@dataclass(frozen=True)
class RunConfig:
    dataset: str = "synthetic:d=50,rows=200"
    n: int = 20
    algo: str = "canita"
    compressor: str = "randk:d/4"
    T: int = 1000
    seeds: tuple = (1,)
    stepsize: float = None
    alpha: float = None
    log_interval: int = 1
    h0: str = "zero"
    charge_both: bool = True
    normalize: bool = False
    partition: str = "roundrobin"
    partition_seed: int = 0
    ref_steps: int = 100_000
    output: str = None
    format: str = "csv"
    thresholds: tuple = ()
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.T < 0:
            raise ConfigurationError("T must be >= 0")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.format not in ("csv", "jsonl"):
            raise ConfigurationError(f"unknown output format {self.format!r}")
        if self.h0 not in ("zero", "grad"):
            raise ConfigurationError(f"h0 must be 'zero' or 'grad', got {self.h0!r}")

    def to_text(self):
        lines = []
        for f in fields(self):
            if f.name == "extra":
                continue
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ConfigurationError(f"config line {lineno}: expected key = value")
            values[key.strip()] = val.strip()
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values, base=None):
        known = {f.name: f for f in fields(cls) if f.name != "extra"}
        kwargs = {}
        for key, val in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[key] = _parse_value(key, val)
        base = base or cls()
        return replace(base, **kwargs)

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


_INT = {"n", "T", "log_interval", "partition_seed", "ref_steps"}
_FLOAT_OPT = {"stepsize", "alpha"}
_BOOL = {"charge_both", "normalize"}


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(key, val):
    if isinstance(val, str):
        low = val.lower()
    else:
        return val
    try:
        if key in _INT:
            return int(val)
        if key in _FLOAT_OPT:
            return None if low in ("none", "") else float(val)
        if key in _BOOL:
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        if key == "seeds":
            return tuple(int(s) for s in val.split(",") if s.strip())
        if key == "thresholds":
            return tuple(float(s) for s in val.split(",") if s.strip())
        if key == "output":
            return None if low in ("none", "") else val
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {val!r}") from exc
    return val


def parse_synthetic(desc):
    out = dict(SYNTHETIC_DEFAULTS)
    for part in filter(None, (p.strip() for p in desc.split(","))):
        key, sep, val = part.partition("=")
        if not sep or key not in SYNTHETIC_DEFAULTS:
            raise ConfigurationError(f"bad synthetic descriptor field {part!r}")
        out[key] = type(SYNTHETIC_DEFAULTS[key])(float(val)) if key in ("d", "rows", "seed") else float(val)
    return out


def load_dataset(config):
    kind, _, arg = config.dataset.partition(":")
    if kind == "synthetic":
        p = parse_synthetic(arg)
        scale = None
        if p["cond"] != 1.0:
            scale = p["cond"] ** (-np.arange(p["d"]) / max(1, p["d"] - 1))
        ds = synthesize(p["d"], p["rows"], margin=p["margin"], seed=p["seed"], noise=p["noise"], column_scale=scale)
    elif kind == "libsvm":
        ds = parse_libsvm(arg)
    else:
        raise ConfigurationError(f"dataset must be 'synthetic:...' or 'libsvm:PATH', got {config.dataset!r}")
    if len(ds) == 0:
        raise ConfigurationError(f"dataset {config.dataset!r} has no rows")
    return ds.normalized() if config.normalize else ds


def build_objective(config):
    ds = load_dataset(config)
    plan = PartitionPlan(config.n, config.partition, config.partition_seed)
    return LogisticObjective(partition(ds, plan))


def resolve_compressor(config, d):
    return parse_compressor(config.compressor, d)


def provenance(config, trace_meta):
    """Metadata embedded at the top of every trace file."""
    meta = {"code_version": __version__, "config_hash": config.digest()}
    meta.update(trace_meta)
    return meta
