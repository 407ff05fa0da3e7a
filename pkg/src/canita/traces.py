"""Trace files: CSV and JSON-lines with an embedded provenance header.

CSV layout::

    # meta: {"algo": "canita", "config_hash": "...", ...}
    algo,compressor,seed,t,loss_w,loss_x,bits_cum,H,potential,eta,theta,D
    canita,randk:25,1,0,0.69...,...

JSON-lines layout: the first line is ``{"meta": {...}}``, then one object per
record with the same keys as the CSV columns. Floats are written with
``repr`` so files are byte-identical across identical runs; NaN is written as
``nan`` in CSV and ``null`` in JSON.
"""
import csv
import io
import json
import math
import os

from .errors import ParseError
from .optim import Trace, TraceRecord

COLUMNS = ("algo", "compressor", "seed", "t", "loss_w", "loss_x", "bits_cum", "H", "potential", "eta", "theta", "D")
RECORD_FIELDS = ("t", "loss_w", "loss_x", "bits_cum", "H", "potential", "eta", "theta", "D")


def _num(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _meta_json(meta):
    return json.dumps({k: _jsonable(v) for k, v in meta.items()}, sort_keys=True)


def format_of(path):
    return "jsonl" if str(path).endswith((".jsonl", ".json")) else "csv"


def dumps(trace, fmt="csv"):
    meta = trace.meta
    algo, comp, seed = meta.get("algo", ""), meta.get("compressor", ""), meta.get("seed", "")
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(f"# meta: {_meta_json(meta)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in trace.records:
            vals = [algo, comp, seed] + [getattr(r, f) for f in RECORD_FIELDS]
            writer.writerow([_num(v) for v in vals])
    elif fmt == "jsonl":
        buf.write(json.dumps({"meta": json.loads(_meta_json(meta))}, sort_keys=True) + "\n")
        for r in trace.records:
            row = {"algo": algo, "compressor": comp, "seed": seed}
            row.update({f: _jsonable(getattr(r, f)) for f in RECORD_FIELDS})
            buf.write(json.dumps(row) + "\n")
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return buf.getvalue()


def write_trace(trace, path, fmt=None):
    fmt = fmt or format_of(path)
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(dumps(trace, fmt))
    return path


def _float(v):
    if v is None or v == "":
        return math.nan
    return float(v)


def _record(row):
    return TraceRecord(t=int(row["t"]), **{f: _float(row[f]) for f in RECORD_FIELDS if f != "t"})


def read_trace(path):
    with open(path) as fh:
        text = fh.read()
    return loads(text, source=str(path))


def loads(text, source="<trace>"):
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty trace file", source=source)
    if lines[0].startswith("{"):
        head = json.loads(lines[0])
        meta = head.get("meta", {})
        records = [_record(json.loads(line)) for line in lines[1:] if line.strip()]
        return Trace(records, meta)
    meta = {}
    body = []
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("# meta:"):
            try:
                meta = json.loads(line[len("# meta:"):])
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad metadata header: {exc}", lineno, source) from None
        elif not line.startswith("#"):
            body.append(line)
    reader = csv.DictReader(body)
    missing = set(COLUMNS) - set(reader.fieldnames or ())
    if missing - {"D"}:
        raise ParseError(f"trace is missing columns {sorted(missing)}", source=source)
    records = []
    for row in reader:
        row.setdefault("D", "nan")
        records.append(_record(row))
    return Trace(records, meta)
