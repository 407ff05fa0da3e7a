"""LIBSVM parsing, synthetic data, and row partitioning across machines."""
from dataclasses import dataclass
import io
import math
import os
import warnings

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, ParseError
from .objectives import Shard

CONTIGUOUS = "contiguous"
ROUND_ROBIN = "roundrobin"
SHUFFLED = "shuffled"


@dataclass(eq=False)
class RawDataset:
    """Rows as a CSR matrix (0-based columns) with labels in {-1, +1}."""

    X: sparse.csr_matrix
    y: np.ndarray
    source: str = "memory"

    @property
    def d(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    @property
    def rows(self):
        out = []
        for j in range(len(self)):
            lo, hi = self.X.indptr[j], self.X.indptr[j + 1]
            feats = {int(i): float(v) for i, v in zip(self.X.indices[lo:hi], self.X.data[lo:hi])}
            out.append((feats, int(self.y[j])))
        return out

    def same_as(self, other):
        if self.X.shape != other.X.shape or not np.array_equal(self.y, other.y):
            return False
        return (self.X != other.X).nnz == 0

    def normalized(self):
        """Copy with every nonzero row scaled to unit Euclidean norm."""
        norms = np.sqrt(np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        X = sparse.diags(scale) @ self.X
        return RawDataset(X.tocsr(), self.y.copy(), self.source + "+normalized")


def _normalize_labels(raw, source):
    values = sorted(set(raw))
    if not values or set(values) <= {-1.0, 1.0}:
        return np.asarray(raw, dtype=float)
    if len(values) == 1:
        return np.where(np.asarray(raw) > 0, 1.0, -1.0)
    if len(values) > 2:
        raise ParseError(f"expected binary labels, found {len(values)} classes {values[:5]}", source=source)
    lo, _ = values
    return np.where(np.asarray(raw) == lo, -1.0, 1.0)


def parse_libsvm(stream, source=None):
    """Parse LIBSVM text (``label idx:val ...``, 1-based indices).

    ``stream`` may be a path or an iterable of lines. Blank lines and ``#``
    comments are skipped; any other malformed line raises ``ParseError``
    naming its line number. Duplicate indices keep the last value.
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream) as fh:
            return parse_libsvm(fh, source=str(stream))
    source = source or getattr(stream, "name", "<stream>")
    labels, indptr, indices, data = [], [0], [], []
    d = 0
    for lineno, line in enumerate(stream, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise ParseError(f"non-numeric label {parts[0]!r}", lineno, source) from None
        feats = {}
        for tok in parts[1:]:
            idx, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno, source)
            try:
                i = int(idx)
            except ValueError:
                raise ParseError(f"non-integer index {idx!r}", lineno, source) from None
            try:
                v = float(val)
            except ValueError:
                raise ParseError(f"non-numeric value {val!r}", lineno, source) from None
            if i <= 0:
                raise ParseError(f"feature index must be >= 1, got {i}", lineno, source)
            if i - 1 in feats:
                warnings.warn(f"{source}:{lineno}: duplicate index {i}, keeping last value", stacklevel=2)
            feats[i - 1] = v
            d = max(d, i)
        for i in sorted(feats):
            indices.append(i)
            data.append(feats[i])
        indptr.append(len(indices))
    X = sparse.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
                          shape=(len(labels), d))
    return RawDataset(X, _normalize_labels(labels, source), source)


def write_libsvm(dataset, stream):
    X = dataset.X
    for j in range(len(dataset)):
        lo, hi = X.indptr[j], X.indptr[j + 1]
        feats = " ".join(f"{i + 1}:{float(v)!r}" for i, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        label = "+1" if dataset.y[j] > 0 else "-1"
        stream.write(f"{label} {feats}".rstrip() + "\n")


def to_libsvm_text(dataset):
    buf = io.StringIO()
    write_libsvm(dataset, buf)
    return buf.getvalue()


def synthesize(d, rows, margin=math.inf, seed=0, noise=0.0, column_scale=None):
    """Gaussian features labelled by a random hyperplane ``w_star``.

    Labels are +1 with probability sigmoid(margin * <a, w_star>), so an
    infinite margin gives the noiseless sign; afterwards each label is flipped
    with probability ``noise``. ``column_scale`` multiplies feature columns
    (use it to control conditioning). The generating direction is kept in
    ``dataset.w_star``.
    """
    if d < 1 or rows < 1:
        raise ConfigurationError("synthetic data needs d >= 1 and rows >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rows, d))
    if column_scale is not None:
        A = A * np.asarray(column_scale, dtype=float)
    w_star = rng.standard_normal(d)
    w_star /= np.linalg.norm(w_star)
    score = A @ w_star
    if math.isinf(margin):
        y = np.where(score >= 0, 1.0, -1.0)
        y[score == 0] = 1.0
    else:
        prob = 1.0 / (1.0 + np.exp(-margin * score))
        y = np.where(rng.random(rows) < prob, 1.0, -1.0)
    flips = rng.random(rows) < noise
    y = np.where(flips, -y, y)
    desc = f"synthetic(d={d},rows={rows},margin={margin},noise={noise},seed={seed})"
    ds = RawDataset(sparse.csr_matrix(A), y, desc)
    ds.w_star = w_star
    ds.flipped = flips
    return ds


@dataclass(frozen=True)
class PartitionPlan:
    n: int
    strategy: str = ROUND_ROBIN
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigurationError(f"machine count must be >= 1, got {self.n!r}")
        if self.strategy not in (CONTIGUOUS, ROUND_ROBIN, SHUFFLED):
            raise ConfigurationError(f"unknown partition strategy {self.strategy!r}")

    def assignment(self, rows):
        """Row indices for each machine."""
        order = np.arange(rows)
        if self.strategy == CONTIGUOUS:
            return np.array_split(order, self.n)
        if self.strategy == SHUFFLED:
            order = np.random.default_rng(self.seed).permutation(rows)
        return [order[i::self.n] for i in range(self.n)]


def partition(dataset, plan, dense=None):
    """Split rows into ``plan.n`` shards. Dense storage is chosen automatically unless forced."""
    if dense is None:
        cells = max(1, len(dataset) * dataset.d)
        dense = cells <= 2_000_000 or dataset.X.nnz / cells > 0.25
    shards = []
    for idx in plan.assignment(len(dataset)):
        X = dataset.X[idx]
        A = X.toarray() if dense else X.tocsr()
        shards.append(Shard(A, dataset.y[idx].astype(float), dataset.d))
    return shards
