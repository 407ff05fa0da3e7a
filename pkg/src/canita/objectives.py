"""Distributed objectives f(x) = (1/n) sum_i f_i(x).

The logistic objective is the benchmark problem; the separable quadratic is a
small analytic objective used for hand-checked rounds and rate tests.
"""
from dataclasses import dataclass
import hashlib

import numpy as np
from scipy import sparse
from scipy.special import expit

from .errors import ConfigurationError, DimensionError


@dataclass(frozen=True)
class Shard:
    """Rows held by one machine: features ``A`` (dense or CSR) and labels in {-1, +1}."""

    A: object
    b: np.ndarray
    d: int

    def __post_init__(self):
        if self.A.shape != (len(self.b), self.d):
            raise DimensionError(f"shard features have shape {self.A.shape}, expected ({len(self.b)}, {self.d})")
        if len(self.b) and not np.all(np.abs(self.b) == 1):
            raise ConfigurationError("labels must be exactly -1 or +1")

    @classmethod
    def from_rows(cls, rows, d):
        """Build from ``[(features, label), ...]`` with dense or ``{index: value}`` features."""
        A = np.zeros((len(rows), d))
        b = np.empty(len(rows))
        for j, (a, label) in enumerate(rows):
            if isinstance(a, dict):
                for idx, val in a.items():
                    A[j, idx] = val
            else:
                A[j] = a
            b[j] = label
        return cls(A, b, d)

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((0, d)), np.zeros(0), d)

    def __len__(self):
        return len(self.b)

    def row_sq_norms(self):
        if sparse.issparse(self.A):
            return np.asarray(self.A.multiply(self.A).sum(axis=1)).ravel()
        return np.einsum("ij,ij->i", self.A, self.A)


def _check_x(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionError(f"expected a point of shape ({d},), got {x.shape}")
    return x


def _logistic_terms(z):
    # log(1 + exp(-z)) without overflow
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(0.0, -z)


def local_loss(shard, x):
    x = _check_x(x, shard.d)
    if len(shard) == 0:
        return 0.0
    z = shard.b * (shard.A @ x)
    return float(np.mean(_logistic_terms(z)))


def local_gradient(shard, x):
    x = _check_x(x, shard.d)
    if len(shard) == 0:
        return np.zeros(shard.d)
    z = shard.b * (shard.A @ x)
    coef = -shard.b * expit(-z) / len(shard)
    return np.asarray(shard.A.T @ coef).ravel()


class LogisticObjective:
    """Logistic regression split over ``n`` machines, one shard each.

    All rows are stacked once so that per-machine losses and gradients come
    out of a single matrix product against a sparse averaging matrix.
    """

    def __init__(self, shards):
        if not shards:
            raise ConfigurationError("need at least one shard")
        d = shards[0].d
        if any(s.d != d for s in shards):
            raise DimensionError("all shards must share the same dimension")
        self.shards = list(shards)
        self.n = len(shards)
        self.d = d
        self._sparse = any(sparse.issparse(s.A) for s in shards)
        if self._sparse:
            self._A = sparse.vstack([sparse.csr_matrix(s.A) for s in shards]).tocsr()
        else:
            self._A = np.vstack([np.asarray(s.A, dtype=float) for s in shards])
        self._b = np.concatenate([s.b for s in shards]).astype(float)
        sizes = np.array([len(s) for s in shards])
        owner = np.repeat(np.arange(self.n), sizes)
        weights = 1.0 / sizes[owner] if owner.size else np.zeros(0)
        self._avg = sparse.csr_matrix((weights, (owner, np.arange(owner.size))), shape=(self.n, owner.size))
        self._row_w = np.asarray(self._avg.sum(axis=0)).ravel() / self.n
        self._owner = owner
        self._inv_size = weights
        self._cache = []
        if not self._sparse:
            # rows padded per machine: (n, m_max, d); padding rows are zero
            # and point at a zero coefficient slot
            m_max = int(sizes.max()) if sizes.size else 0
            starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            slot = np.arange(m_max)
            self._pad_idx = np.where(slot[None, :] < sizes[:, None], starts[:, None] + slot[None, :], owner.size)
            self._A3 = np.vstack([self._A, np.zeros((1, d))])[self._pad_idx]
            self._pad_w = np.append(weights, 0.0)[self._pad_idx]
        self.L = smoothness_constant(self)

    @property
    def rows(self):
        return len(self._b)

    def _margins(self, x):
        # engines ask for the loss and the gradients at the same point in turn;
        # remember the last two points by value
        x = _check_x(x, self.d)
        for xc, zc in self._cache:
            if np.array_equal(xc, x):
                return zc
        z = self._b * np.asarray(self._A @ x).ravel()
        self._cache = [(x.copy(), z)] + self._cache[:1]
        return z

    def local_losses(self, x):
        return self._avg @ _logistic_terms(self._margins(x))

    def loss(self, x):
        return float(self._row_w @ _logistic_terms(self._margins(x)))

    def local_gradients(self, x):
        coef = -self._b * expit(-self._margins(x))
        if self._sparse:
            G = self._avg.multiply(coef[None, :]).tocsr() @ self._A
            return G.toarray() if sparse.issparse(G) else np.asarray(G)
        c = np.append(coef, 0.0)[self._pad_idx] * self._pad_w
        return np.matmul(c[:, None, :], self._A3)[:, 0, :]

    def gradient(self, x):
        coef = -self._b * expit(-self._margins(x)) * self._row_w
        return np.asarray(self._A.T @ coef).ravel()

    def hessian(self, x):
        """Dense Hessian of the global loss f."""
        s = expit(self._margins(x))
        row_w = self._row_w * s * (1.0 - s)
        A = self._A.toarray() if self._sparse else self._A
        return (A * row_w[:, None]).T @ A

    def fingerprint(self):
        h = hashlib.sha256()
        A = self._A.toarray() if self._sparse else self._A
        for arr in (A, self._b, np.array([len(s) for s in self.shards])):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return h.hexdigest()[:16]


def smoothness_constant(handle):
    """Common smoothness bound: max over machines of mean ||a_j||^2 / 4."""
    per_machine = [float(np.mean(s.row_sq_norms())) / 4.0 for s in handle.shards if len(s)]
    if not per_machine:
        raise ConfigurationError("every shard is empty; the objective has no data")
    L = max(per_machine)
    if L <= 0:
        raise ConfigurationError("all features are zero; the objective has no curvature")
    return L


class QuadraticObjective:
    """Separable quadratics f_i(x) = 0.5 * sum_k a_ik (x_k - c_ik)^2.

    ``a`` and ``c`` have shape (n, d); entries of ``a`` must be nonnegative.
    """

    def __init__(self, a, c):
        self.a = np.atleast_2d(np.asarray(a, dtype=float))
        self.c = np.atleast_2d(np.asarray(c, dtype=float))
        if self.a.shape != self.c.shape:
            raise DimensionError("curvatures and centers must have the same shape")
        if np.any(self.a < 0):
            raise ConfigurationError("curvatures must be nonnegative")
        self.n, self.d = self.a.shape
        self.L = float(self.a.max())
        if self.L <= 0:
            raise ConfigurationError("all curvatures are zero")

    def local_losses(self, x):
        x = _check_x(x, self.d)
        return 0.5 * np.sum(self.a * (x - self.c) ** 2, axis=1)

    def loss(self, x):
        return float(np.mean(self.local_losses(x)))

    def local_gradients(self, x):
        x = _check_x(x, self.d)
        return self.a * (x - self.c)

    def gradient(self, x):
        return self.local_gradients(x).mean(axis=0)

    def minimizer(self):
        total = self.a.sum(axis=0)
        weighted = (self.a * self.c).sum(axis=0)
        return np.divide(weighted, total, out=np.zeros(self.d), where=total > 0)

    def fingerprint(self):
        h = hashlib.sha256(self.a.tobytes() + self.c.tobytes())
        return h.hexdigest()[:16]
