"""Parameter schedules for the accelerated compressed method and a checker
for the generic sufficient conditions any schedule must satisfy.
"""
from dataclasses import dataclass, asdict
import json
import math

import numpy as np

from .errors import ConfigurationError, UsageError


@dataclass(frozen=True)
class ScheduleParams:
    omega: float
    n: int
    L: float
    b: float
    beta0: float
    beta: float
    gamma: float
    p: float
    alpha: float

    @property
    def offset(self):
        """9(1 + b + omega), the shift in the theta and eta recursions."""
        return 9.0 * (1.0 + self.b + self.omega)

    @property
    def eta_cap(self):
        return 1.0 / (self.L * (self.beta + 1.5))

    def theta(self, t):
        return 3.0 * (1.0 + self.b) / (t + self.offset)


@dataclass(frozen=True)
class RoundParams:
    t: int
    p: float
    alpha: float
    theta: float
    eta: float
    beta: float
    gamma: float


def theorem2_params(omega, n, L):
    if not omega >= 0:
        raise ConfigurationError(f"omega must be >= 0, got {omega!r}")
    if n < 1:
        raise ConfigurationError(f"machine count must be >= 1, got {n!r}")
    if not L > 0:
        raise ConfigurationError(f"smoothness constant must be > 0, got {L!r}")
    omega = float(omega)
    b = min(omega, math.sqrt(omega * (1.0 + omega) ** 2 / n))
    c = 1.0 + b + 2.0 * (1.0 + omega)
    return ScheduleParams(
        omega=omega,
        n=int(n),
        L=float(L),
        b=b,
        beta0=9.0 * (1.0 + b + omega) ** 2 / ((1.0 + b) * L),
        beta=48.0 * omega * (1.0 + omega) * c / (n * (1.0 + b) ** 2),
        gamma=(1.0 + b) ** 2 / (8.0 * c),
        p=1.0 / (1.0 + b),
        alpha=1.0 / (1.0 + omega),
    )


def round_params(sp, t, eta_prev=None):
    if t < 0:
        raise UsageError("round index must be >= 0")
    if t == 0:
        eta = 1.0 / (sp.L * (sp.beta0 + 1.5))
        beta = sp.beta0
    else:
        if eta_prev is None:
            raise UsageError(f"eta_prev is required for round {t}")
        eta = min((1.0 + 1.0 / (t + sp.offset)) * eta_prev, sp.eta_cap)
        beta = sp.beta
    return RoundParams(t=t, p=sp.p, alpha=sp.alpha, theta=sp.theta(t), eta=eta, beta=beta, gamma=sp.gamma)


def generate(sp, T):
    """Round parameters for t = 0..T."""
    out = [round_params(sp, 0)]
    for t in range(1, T + 1):
        out.append(round_params(sp, t, out[-1].eta))
    return out


class ScheduleIterator:
    """Lazily yields round parameters, one per call to ``next``."""

    def __init__(self, sp):
        self.sp = sp
        self._prev = None

    def __iter__(self):
        return self

    def __next__(self):
        t = 0 if self._prev is None else self._prev.t + 1
        self._prev = round_params(self.sp, t, None if self._prev is None else self._prev.eta)
        return self._prev


CONDITIONS = ("alpha_bound", "eta_bound", "variance_budget", "eta_theta_ratio", "shift_potential")


@dataclass
class ConditionResult:
    name: str
    passed: bool
    first_violation: int = None
    lhs: float = None
    rhs: float = None
    worst_round: int = None
    worst_margin: float = None


@dataclass
class ValidationReport:
    conditions: list
    horizon: int
    tol: float

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self, **kw):
        return json.dumps({"horizon": self.horizon, "tol": self.tol, "passed": self.passed,
                           "conditions": [asdict(c) for c in self.conditions]}, **kw)

    def summary(self):
        if self.passed:
            return f"all conditions satisfied for t = 0..{self.horizon}"
        bad = [f"{c.name} fails at t={c.first_violation} (lhs={c.lhs!r}, rhs={c.rhs!r})"
               for c in self.conditions if not c.passed]
        return "; ".join(bad)


def _check(name, ts, lhs, rhs, tol):
    margin = rhs - lhs
    bad = np.flatnonzero(lhs > rhs + tol)
    worst = int(np.argmin(margin)) if margin.size else None
    res = ConditionResult(name, passed=bad.size == 0)
    if worst is not None:
        res.worst_round = int(ts[worst])
        res.worst_margin = float(margin[worst])
    if bad.size:
        i = bad[0]
        res.first_violation, res.lhs, res.rhs = int(ts[i]), float(lhs[i]), float(rhs[i])
    return res


def validate_theorem1(rounds, omega, n, L, T=None, tol=1e-12):
    """Check the five sufficient parameter conditions over rounds 0..T.

    The alpha and eta bounds are checked for every t >= 0; the three coupled
    conditions relate consecutive rounds and are checked for t >= 1. Terms
    omega / (beta_t n) read as zero when omega == 0.
    """
    rounds = sorted(rounds, key=lambda r: r.t)
    if T is not None:
        rounds = [r for r in rounds if r.t <= T]
    T = rounds[-1].t if T is None else T
    if [r.t for r in rounds] != list(range(T + 1)):
        raise UsageError(f"rounds must cover t = 0..{T} without gaps")
    col = {k: np.array([getattr(r, k) for r in rounds], dtype=float)
           for k in ("t", "p", "alpha", "theta", "eta", "beta", "gamma")}
    t, p, a, th, eta, beta, g = (col[k] for k in ("t", "p", "alpha", "theta", "eta", "beta", "gamma"))
    if omega == 0:
        comp = np.zeros_like(beta)
    else:
        with np.errstate(divide="ignore"):
            comp = omega / (beta * n)
    shift = 4.0 * p * g * (1.0 + 2.0 * p / a)
    results = [
        _check("alpha_bound", t, a, np.full_like(a, 1.0 / (1.0 + omega)), tol),
        _check("eta_bound", t, eta, 1.0 / (L * (1.0 + beta + shift)), tol),
    ]
    cur, prev = slice(1, None), slice(None, -1)
    results.append(_check("variance_budget", t[cur], 2.0 * comp[cur] + shift[cur], 1.0 - th[cur], tol))
    results.append(_check("eta_theta_ratio", t[cur],
                          (1.0 - p[cur] * th[cur]) * eta[cur] / (p[cur] * th[cur] ** 2),
                          eta[prev] / (p[prev] * th[prev] ** 2), tol))
    results.append(_check("shift_potential", t[cur],
                          (comp[cur] + (1.0 - a[cur] / 2.0) * g[cur]) * eta[cur] / th[cur] ** 2,
                          g[prev] * eta[prev] / th[prev] ** 2, tol))
    return ValidationReport(results, T, tol)
