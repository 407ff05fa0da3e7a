"""Optimization engines over a simulated n-machine network.

Three methods share the same worker/server state layout:

* ``canita_round``: accelerated method with shifted compression and a
  randomly refreshed anchor point,
* ``diana_round``: shifted compression without momentum,
* ``qsgd_round``: plain compressed gradient descent (DC-GD).

Each worker owns per-(machine, round, slot) random streams, so results do
not depend on the order machines are processed. The server draws its coin
from its own stream.
"""
from dataclasses import dataclass, field, asdict
import logging
import math

import numpy as np
from scipy import optimize

from .compressors import RngStream, StreamBatch, compress, extend_keys, message_bits, stream_keys
from .errors import ConfigurationError, DimensionError, DivergenceError, InsufficientDataError
from . import schedule as sched

log = logging.getLogger(__name__)

WORKER, SERVER = 0, 1
ALGOS = ("canita", "diana", "qsgd")


@dataclass
class ServerState:
    x: np.ndarray
    w: np.ndarray
    y: np.ndarray
    z: np.ndarray
    h: np.ndarray
    t: int = 0
    # local gradients at the current anchor (w for canita, x otherwise)
    grad_anchor: np.ndarray = field(default=None, repr=False)


@dataclass
class WorkerState:
    index: int
    h: np.ndarray


@dataclass
class TraceRecord:
    t: int
    loss_w: float
    loss_x: float
    bits_cum: float
    H: float
    potential: float
    eta: float
    theta: float
    D: float = math.nan


class Meter:
    """Per-run bookkeeping: reference value, optimum proxy, uplink bits per machine."""

    def __init__(self, f_ref=0.0, x_ref=None, potential_weight=0.0):
        self.f_ref = f_ref
        self.x_ref = x_ref
        self.potential_weight = potential_weight
        self.bits_cum = 0.0
        self._anchor = (None, None)

    def record(self, objective, server, workers, eta, theta):
        G = server.grad_anchor
        H = float(np.mean(np.sum((G - _shifts(workers)) ** 2, axis=1)))
        # the anchor is replaced, never mutated, so its loss can be reused until it moves
        if self._anchor[0] is not server.w:
            self._anchor = (server.w, objective.loss(server.w))
        loss_w = self._anchor[1] - self.f_ref
        loss_x = loss_w if server.x is server.w else objective.loss(server.x) - self.f_ref
        D = math.nan if self.x_ref is None else 0.5 * float(np.sum((server.x - self.x_ref) ** 2))
        return TraceRecord(t=server.t, loss_w=loss_w, loss_x=loss_x, bits_cum=self.bits_cum, H=H,
                           potential=loss_w + self.potential_weight * H, eta=eta, theta=theta, D=D)


def _shifts(workers):
    return np.stack([wk.h for wk in workers])


def init_states(objective, x0=None, h0="zero", coupled=True):
    """Initial server and worker states.

    ``h0`` is ``"zero"``, ``"grad"`` (h_i = grad f_i(x0)) or an (n, d) array.
    With ``coupled=False`` the anchor is the iterate itself (baselines).
    """
    d, n = objective.d, objective.n
    x0 = np.zeros(d) if x0 is None else np.array(x0, dtype=float)
    if x0.shape != (d,):
        raise DimensionError(f"x0 must have shape ({d},), got {x0.shape}")
    G0 = objective.local_gradients(x0)
    if isinstance(h0, str):
        if h0 == "zero":
            H0 = np.zeros((n, d))
        elif h0 == "grad":
            H0 = G0.copy()
        else:
            raise ConfigurationError(f"unknown initial shift mode {h0!r}")
    else:
        H0 = np.array(h0, dtype=float)
        if H0.shape != (n, d):
            raise DimensionError(f"initial shifts must have shape ({n}, {d})")
    workers = [WorkerState(i, H0[i].copy()) for i in range(n)]
    w = x0.copy() if coupled else x0
    server = ServerState(x=x0, w=w, y=x0.copy(), z=x0.copy(), h=H0.mean(axis=0), grad_anchor=G0)
    return server, workers


def _check_finite(t, **arrays):
    for name, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(f"non-finite value in {name}", t)


_prefix_cache = {}


def _worker_streams(rng, workers, t, slot):
    # row r is the stream (WORKER, machine, round, slot) of workers[r]
    key = (rng.seed, tuple(rng.stream_id), tuple(wk.index for wk in workers))
    prefix = _prefix_cache.get(key)
    if prefix is None:
        if len(_prefix_cache) > 256:
            _prefix_cache.clear()
        prefix = stream_keys(rng.seed, [tuple(rng.stream_id) + (WORKER, wk.index) for wk in workers])
        _prefix_cache[key] = prefix
    return StreamBatch(rng.seed, keys=extend_keys(prefix, (t, slot)))


def canita_round(objective, server, workers, rp, spec, rng, meter=None, charge_both=True):
    """One round of the accelerated compressed method; updates states in place.

    Each machine sends two independently compressed vectors: the shifted
    gradient at the momentum point (slot 0) and the shifted gradient at the
    anchor (slot 1), the latter also moving the local shift. Returns the
    trace record of the new state when a ``meter`` is supplied.
    """
    t, n = server.t, len(workers)
    theta, eta, alpha = rp.theta, rp.eta, rp.alpha
    rows = [wk.index for wk in workers]
    y = theta * server.x + (1.0 - theta) * server.w
    Gy = objective.local_gradients(y)[rows]
    Gw = server.grad_anchor[rows]
    shifts = _shifts(workers)
    M = compress(spec, Gy - shifts, _worker_streams(rng, workers, t, 0))
    Q = compress(spec, Gw - shifts, _worker_streams(rng, workers, t, 1))
    for wk, q in zip(workers, Q):
        wk.h = wk.h + alpha * q
    m_sum, q_sum = M.sum(axis=0), Q.sum(axis=0)
    g = server.h + m_sum / n
    server.h = server.h + alpha * q_sum / n
    x_new = server.x - (eta / theta) * g
    z = theta * x_new + (1.0 - theta) * server.w
    _check_finite(t, x=x_new, z=z, h=server.h)
    refresh = rng.child(SERVER, t).random() < rp.p
    server.y, server.x, server.z = y, x_new, z
    if refresh:
        server.w = z
        server.grad_anchor = objective.local_gradients(z)
    server.t = t + 1
    if meter is not None:
        meter.bits_cum += (2 if charge_both else 1) * message_bits(spec)
        return meter.record(objective, server, workers, eta, theta)
    return None


def diana_round(objective, server, workers, stepsize, alpha, spec, rng, meter=None):
    """One round of shifted compressed gradient descent; one message per machine."""
    t, n = server.t, len(workers)
    G = server.grad_anchor[[wk.index for wk in workers]]
    C = compress(spec, G - _shifts(workers), _worker_streams(rng, workers, t, 0))
    for wk, c in zip(workers, C):
        wk.h = wk.h + alpha * c
    c_sum = C.sum(axis=0)
    g = server.h + c_sum / n
    server.h = server.h + alpha * c_sum / n
    x_new = server.x - stepsize * g
    _check_finite(t, x=x_new, h=server.h)
    server.x = server.w = server.y = server.z = x_new
    server.grad_anchor = objective.local_gradients(x_new)
    server.t = t + 1
    if meter is not None:
        meter.bits_cum += message_bits(spec)
        return meter.record(objective, server, workers, stepsize, 1.0)
    return None


def qsgd_round(objective, server, workers, stepsize, spec, rng, meter=None):
    """One round of compressed gradient descent without shifts."""
    t, n = server.t, len(workers)
    G = server.grad_anchor[[wk.index for wk in workers]]
    c_sum = compress(spec, G, _worker_streams(rng, workers, t, 0)).sum(axis=0)
    x_new = server.x - stepsize * c_sum / n
    _check_finite(t, x=x_new)
    server.x = server.w = server.y = server.z = x_new
    server.grad_anchor = objective.local_gradients(x_new)
    server.t = t + 1
    if meter is not None:
        meter.bits_cum += message_bits(spec)
        return meter.record(objective, server, workers, stepsize, 1.0)
    return None


def default_stepsizes(algo, omega, n, L):
    """Theoretical defaults for the baselines: (stepsize, alpha)."""
    if algo == "qsgd":
        return 1.0 / (L * (1.0 + omega / n)), None
    if algo == "diana":
        return 1.0 / (L * (1.0 + 4.0 * omega / n)), 1.0 / (1.0 + omega)
    raise ConfigurationError(f"no default stepsize for {algo!r}")


_reference_cache = {}


def reference_optimum(objective, steps=100_000, polish=True):
    """High-accuracy proxy (f_ref, x_ref) for the optimal value.

    Runs ``steps`` full-gradient steps with stepsize 1/L keeping the best
    point, then polishes with L-BFGS (and Newton steps when a Hessian is
    available). Results are cached per objective fingerprint.
    """
    if hasattr(objective, "minimizer"):
        x = objective.minimizer()
        return objective.loss(x), x
    key = (objective.fingerprint(), steps, polish)
    if key in _reference_cache:
        f, x = _reference_cache[key]
        return f, x.copy()
    x = np.zeros(objective.d)
    best_f, best_x = objective.loss(x), x.copy()
    step = 1.0 / objective.L
    for _ in range(steps):
        x = x - step * objective.gradient(x)
        f = objective.loss(x)
        if f < best_f:
            best_f, best_x = f, x.copy()
    if polish:
        res = optimize.minimize(objective.loss, best_x, jac=objective.gradient, method="L-BFGS-B",
                                options={"maxiter": 10_000, "gtol": 1e-13, "ftol": 1e-16})
        cand = res.x
        if hasattr(objective, "hessian"):
            for _ in range(20):
                g = objective.gradient(cand)
                if np.linalg.norm(g) < 1e-15:
                    break
                try:
                    cand = cand - np.linalg.solve(objective.hessian(cand), g)
                except np.linalg.LinAlgError:
                    break
        f = objective.loss(cand)
        if np.isfinite(f) and f < best_f:
            best_f, best_x = f, cand
    _reference_cache[key] = (best_f, best_x.copy())
    return best_f, best_x


@dataclass
class Trace:
    records: list
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def __len__(self):
        return len(self.records)


def run_engine(objective, algo, spec, T, seed, x0=None, h0="zero", log_interval=1,
               stepsize=None, alpha=None, charge_both=True, f_ref=None, x_ref=None, ref_steps=100_000):
    """Run ``algo`` for ``T`` rounds; returns a ``Trace`` with records at t = 0, k, 2k, ..., T."""
    if algo not in ALGOS:
        raise ConfigurationError(f"unknown algorithm {algo!r}; expected one of {ALGOS}")
    if spec.d != objective.d:
        raise DimensionError(f"compressor dimension {spec.d} != objective dimension {objective.d}")
    if log_interval < 1:
        raise ConfigurationError("log_interval must be >= 1")
    if f_ref is None:
        f_ref, x_ref = reference_optimum(objective, steps=ref_steps)
    n, L, omega = objective.n, objective.L, spec.omega
    rng = RngStream(int(seed))
    meta = {"algo": algo, "compressor": spec.label(), "seed": int(seed), "n": n, "d": objective.d,
            "L": L, "omega": omega, "T": T, "f_ref": f_ref, "message_bits": message_bits(spec)}
    server, workers = init_states(objective, x0, h0=h0, coupled=algo == "canita")
    if algo == "canita":
        sp = sched.theorem2_params(omega, n, L)
        meta.update({f"schedule_{k}": v for k, v in asdict(sp).items()})
        meta["charge_both"] = bool(charge_both)
        meter = Meter(f_ref, x_ref, potential_weight=sp.gamma * sp.p / L)
        params = sched.ScheduleIterator(sp)
        rp = next(params)
        first = meter.record(objective, server, workers, rp.eta, rp.theta)

        def step(rec):
            nonlocal rp
            out = canita_round(objective, server, workers, rp, spec, rng, meter if rec else None, charge_both)
            if not rec:
                meter.bits_cum += (2 if charge_both else 1) * message_bits(spec)
            rp = next(params)
            return out
    else:
        default_eta, default_alpha = default_stepsizes(algo, omega, n, L)
        eta = default_eta if stepsize is None else float(stepsize)
        meta["stepsize"] = eta
        meter = Meter(f_ref, x_ref)
        first = meter.record(objective, server, workers, eta, 1.0)
        if algo == "diana":
            a = default_alpha if alpha is None else float(alpha)
            if a > 1.0 / (1.0 + omega) + 1e-15:
                raise ConfigurationError(f"diana requires alpha <= 1/(1+omega) = {1 / (1 + omega)}")
            meta["alpha"] = a

            def step(rec):
                out = diana_round(objective, server, workers, eta, a, spec, rng, meter if rec else None)
                if not rec:
                    meter.bits_cum += message_bits(spec)
                return out
        else:
            def step(rec):
                out = qsgd_round(objective, server, workers, eta, spec, rng, meter if rec else None)
                if not rec:
                    meter.bits_cum += message_bits(spec)
                return out

    records = [first]
    for t in range(1, T + 1):
        rec = t % log_interval == 0 or t == T
        try:
            out = step(rec)
        except DivergenceError as exc:
            log.warning("%s diverged at round %d; returning partial trace", algo, exc.round_index)
            meta["diverged_at"] = exc.round_index
            exc.partial_trace = Trace(records, meta)
            raise
        if rec:
            records.append(out)
    return Trace(records, meta)


def fit_decay_exponent(ts, values, tail=0.5):
    """Least-squares slope of log(values) against log(ts) over the last ``tail`` fraction of rounds."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size < 10:
        raise InsufficientDataError(f"need at least 10 trace points, got {ts.size}")
    T = ts.max()
    mask = (ts >= (1.0 - tail) * T) & (ts > 0) & (values > 0)
    if mask.sum() < 2:
        raise InsufficientDataError("too few positive points in the tail to fit a slope")
    slope, _ = np.polyfit(np.log(ts[mask]), np.log(values[mask]), 1)
    return float(slope)


@dataclass
class PotentialReport:
    exponent: float
    max_scaled_potential: float
    bound_constant: float
    passed: bool
    max_exponent: float

    def summary(self):
        verdict = "ok" if self.passed else "FAILED"
        return (f"decay exponent {self.exponent:.3f} (required <= {self.max_exponent}); "
                f"max potential*eta/(theta^2 p) = {self.max_scaled_potential:.4g}; "
                f"initial bound constant = {self.bound_constant:.4g}: {verdict}")


def bound_constant(sp, F0, H0, D0):
    """Right-hand-side constant of the potential contraction for round-0 parameters."""
    rp = sched.round_params(sp, 0)
    comp = 0.0 if sp.omega == 0 else sp.omega / (rp.beta * sp.n)
    return ((1.0 - rp.theta * rp.p) * rp.eta / (rp.theta ** 2 * rp.p) * F0
            + (comp + (1.0 - rp.alpha / 2.0) * rp.gamma) * rp.eta / (rp.theta ** 2 * sp.L) * H0
            + D0)


def potential_monitor(traces, sp, max_exponent=-1.0, tail=0.5):
    """Empirical rate and scaled-potential diagnostics for one or more seeds.

    The decay exponent is fitted to the seed-averaged loss_w over the tail;
    the scaled potential potential(t+1) * eta_t / (theta_t^2 p_t) is
    maximized over records and over seeds and compared with the bound
    constant of the first trace's initial state.
    """
    if isinstance(traces, Trace):
        traces = [traces]
    ts = traces[0].column("t")
    for tr in traces:
        if len(tr) != len(ts):
            raise InsufficientDataError("traces have different lengths")
    F = np.mean([tr.column("loss_w") for tr in traces], axis=0)
    exponent = fit_decay_exponent(ts, F, tail=tail)
    scaled = []
    for tr in traces:
        pot, eta, theta = tr.column("potential"), tr.column("eta"), tr.column("theta")
        scaled.append(np.max(pot[1:] * eta[1:] / (theta[1:] ** 2 * sp.p)))
    first = traces[0].records[0]
    D0 = 0.0 if math.isnan(first.D) else first.D
    const = bound_constant(sp, first.loss_w, first.H, D0)
    return PotentialReport(exponent=exponent, max_scaled_potential=float(np.max(scaled)), bound_constant=const,
                           passed=exponent <= max_exponent, max_exponent=max_exponent)


def run(config):
    """Build the objective described by ``config`` and run every seed.

    Returns the traces, one per seed. A diverging seed contributes its
    partial trace, flagged by ``meta['diverged_at']``.
    """
    from .config import build_objective, provenance, resolve_compressor

    objective = build_objective(config)
    spec = resolve_compressor(config, objective.d)
    f_ref, x_ref = reference_optimum(objective, steps=config.ref_steps)
    traces = []
    for seed in config.seeds:
        try:
            tr = run_engine(objective, config.algo, spec, config.T, seed, h0=config.h0,
                            log_interval=config.log_interval, stepsize=config.stepsize, alpha=config.alpha,
                            charge_both=config.charge_both, f_ref=f_ref, x_ref=x_ref)
        except DivergenceError as exc:
            tr = exc.partial_trace
        tr.meta.update(provenance(config, {"dataset": config.dataset}))
        traces.append(tr)
    return traces
