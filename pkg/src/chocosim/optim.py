"""Decentralized SGD algorithms over compressed gossip, plus baselines.

The compressed family keeps, per node, a private iterate ``x_i`` and a
public copy ``xhat_i`` (replicated at the neighbors). One iteration, all
reading the same post-gossip iterate ``x^(t)``:

1. compress the difference ``x^(t) - xhat^(t)``, advance the public copies;
2. draw the stochastic gradient at ``x^(t)`` (optionally with heavy-ball
   momentum and weight decay);
3. move to ``x^(t+1) = x^(t) - eta*dir + gamma * (W - I) xhat^(t+1)``.

Step 3 is grouped as ``((x - gamma*xhat) + gamma*(W @ xhat)) - eta*dir``:
parts 1 and 2 are independent given ``x^(t)``, and with an identity
compressor and ``gamma = 1`` the update collapses, float for float, to the
uncompressed gossip baseline ``x <- W x - eta*g``.

Baselines: ``decentralized-exact`` (gradient step then exact neighborhood
averaging, full-precision messages) and ``centralized`` (single iterate,
all workers upload full-precision gradients to a coordinator hub).
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .compression import Compressor, bit_cost, compress_blocks, contraction_factor
from .consensus import consensus_distance, consensus_stepsize, mix_with_public, sync_public
from .metrics import RunRecord, TrafficLedger
from .numerics import RandomStream

ALGORITHMS = (
    "choco",
    "choco-momentum",
    "choco-errorfeedback",
    "decentralized-exact",
    "centralized",
)
DIVERGENCE_LIMIT = 1e12


@dataclass
class OptimizerConfig:
    algorithm: str = "choco"
    eta: float = 0.05
    gamma: object = "auto"  # float, or "auto" for the theory stepsize
    momentum_factor: float = 0.0
    weight_decay: float = 0.0
    nesterov: bool = False
    iterations: int = 1000
    delta_override: float = None  # measured compression quality for gamma

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        if not (0.0 <= self.momentum_factor < 1.0):
            raise ValueError("momentum_factor must be in [0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.gamma != "auto":
            if not isinstance(self.gamma, (int, float)) or not 0.0 < float(self.gamma):
                raise ValueError("gamma must be 'auto' or a positive number")
        if self.delta_override is not None and not (0.0 < self.delta_override <= 1.0):
            raise ValueError("delta_override must be in (0, 1]")


@dataclass
class Workers:
    """Per-node state, one row per node."""

    x: np.ndarray
    xhat: np.ndarray = None
    velocity: np.ndarray = None
    memory: np.ndarray = None
    x_prev: np.ndarray = None

    @classmethod
    def start(cls, x0, n, algorithm):
        x0 = np.asarray(x0, dtype=float)
        x = np.tile(x0, (n, 1))
        w = cls(x=x)
        if algorithm.startswith("choco"):
            w.xhat = np.zeros_like(x)
        if algorithm == "choco-momentum":
            w.velocity = np.zeros_like(x)
        if algorithm == "choco-errorfeedback":
            w.memory = np.zeros_like(x)
            w.x_prev = np.zeros_like(x)  # the "previous" iterate starts at 0
        return w


class Streams:
    """All random sources of one run, keyed by (seed, node, purpose, t)."""

    def __init__(self, seed, n):
        self._grad = [RandomStream(seed, i, "grad") for i in range(n)]
        self._comp = [RandomStream(seed, i, "compress") for i in range(n)]
        self.init = RandomStream(seed, 0, "init")

    def grad_at(self, i, t):
        return self._grad[i].at(t)

    def comp_at(self, t):
        return [s.at(t) for s in self._comp]


def _gradients(problem, x_rows, streams, t, record=None):
    n = x_rows.shape[0]
    g = np.empty_like(x_rows)
    for i in range(n):
        g[i] = problem.stochastic_gradient(i, x_rows[i], streams.grad_at(i, t), t)
    if record is not None:
        record.max_grad_norm = max(
            record.max_grad_norm, float(np.sqrt((g * g).sum(axis=1).max()))
        )
    return g


def _direction(workers, g, cfg):
    if cfg.algorithm != "choco-momentum":
        return g
    pull = g + cfg.weight_decay * workers.x
    workers.velocity = pull + cfg.momentum_factor * workers.velocity
    if cfg.nesterov:
        return pull + cfg.momentum_factor * workers.velocity
    return workers.velocity


def choco_step(workers, problem, mixing, comp, gamma, eta, streams, t,
               cfg=None, boundaries=None, record=None):
    """One iteration of the compressed-gossip family; returns per-node bits.

    Handles plain, momentum, and error-feedback variants depending on
    ``cfg.algorithm`` (``cfg=None`` means plain).
    """
    algorithm = cfg.algorithm if cfg is not None else "choco"
    comp_rngs = streams.comp_at(t)
    if algorithm == "choco-errorfeedback":
        v = (workers.x - workers.x_prev) + workers.memory
        q = np.empty_like(v)
        bits = np.zeros(v.shape[0], dtype=np.int64)
        for i in range(v.shape[0]):
            msg = compress_blocks(comp, v[i], comp_rngs[i], boundaries)
            q[i] = msg.payload
            bits[i] = msg.bits
        workers.memory = v - q
        xhat_next = workers.xhat + q  # literal receiver-side reconstruction
    else:
        xhat_next, bits = sync_public(workers.x, workers.xhat, comp, comp_rngs, boundaries)

    g = _gradients(problem, workers.x, streams, t, record)
    direction = _direction(workers, g, cfg) if cfg is not None else g
    if algorithm == "choco-errorfeedback":
        workers.x_prev = workers.x
    workers.x = mix_with_public(workers.x, xhat_next, mixing.w, gamma) - eta * direction
    workers.xhat = xhat_next
    return bits


def choco_sgd_step(workers, problem, mixing, comp, gamma, eta, streams, t,
                   boundaries=None, record=None):
    """Plain compressed-gossip SGD iteration."""
    return choco_step(workers, problem, mixing, comp, gamma, eta, streams, t,
                      cfg=None, boundaries=boundaries, record=record)


def choco_momentum_step(workers, problem, mixing, comp, gamma, eta, streams, t, cfg,
                        boundaries=None, record=None):
    """Compressed-gossip SGD with heavy-ball (optionally Nesterov) momentum."""
    return choco_step(workers, problem, mixing, comp, gamma, eta, streams, t,
                      cfg=cfg, boundaries=boundaries, record=record)


def choco_errorfeedback_step(workers, problem, mixing, comp, gamma, eta, streams, t, cfg,
                             boundaries=None, record=None):
    """Error-feedback formulation: compresses iterate increments plus carried
    memory; keeps explicit ``memory`` and ``x_prev`` buffers."""
    return choco_step(workers, problem, mixing, comp, gamma, eta, streams, t,
                      cfg=cfg, boundaries=boundaries, record=record)


def decentralized_exact_step(workers, problem, mixing, eta, streams, t, record=None):
    """Uncompressed baseline: local gradient step, then exact averaging."""
    g = _gradients(problem, workers.x, streams, t, record)
    workers.x = mixing.w @ (workers.x - eta * g)
    return np.full(workers.x.shape[0], bit_cost(Compressor("identity"), workers.x.shape[1]),
                   dtype=np.int64)


def centralized_step(x, problem, eta, streams, t, record=None):
    """Coordinator baseline: one shared iterate, n full-precision uploads."""
    n = problem.n
    g = np.empty((n, x.shape[0]))
    for i in range(n):
        g[i] = problem.stochastic_gradient(i, x, streams.grad_at(i, t), t)
    if record is not None:
        record.max_grad_norm = max(
            record.max_grad_norm, float(np.sqrt((g * g).sum(axis=1).max()))
        )
    return x - eta * g.mean(axis=0), np.full(n, 32 * x.shape[0], dtype=np.int64)


def effective_contraction(comp, dim, boundaries=None):
    """Worst-case compression quality across blocks (min over block deltas)."""
    if boundaries is None or len(boundaries) <= 2:
        return contraction_factor(comp, dim)
    return min(
        contraction_factor(comp, stop - start)
        for start, stop in zip(boundaries[:-1], boundaries[1:])
    )


def resolve_gamma(cfg, mixing, comp, dim, boundaries=None):
    """Numeric gossip stepsize from the config (theory formula for "auto")."""
    if cfg.algorithm in ("decentralized-exact", "centralized"):
        return 1.0
    if cfg.gamma != "auto":
        return float(cfg.gamma)
    delta = cfg.delta_override
    if delta is None:
        delta = effective_contraction(comp, dim, boundaries)
    return consensus_stepsize(mixing, delta)


def _psi(workers):
    xbar = workers.x.mean(axis=0)
    psi = float(((workers.x - xbar) ** 2).sum())
    if workers.xhat is not None:
        psi += float(((workers.x - workers.xhat) ** 2).sum())
    return psi


def run(problem, cfg, mixing=None, compressor=None, seed=0, log_every=1,
        broadcast=False, x0=None, per_layer=True, record_iterates=False):
    """Run one algorithm on one problem; returns a :class:`RunRecord`.

    ``x0`` is the common starting point (zeros by default). ``per_layer``
    compresses each parameter block separately when the problem defines
    blocks. ``record_iterates`` additionally stores the post-gossip iterate
    matrix after every iteration (tests and demos; memory scales with T).
    """
    if cfg.algorithm != "centralized":
        if mixing is None:
            raise ValueError("decentralized algorithms need a mixing matrix")
        if mixing.w.shape[0] != problem.n:
            raise ValueError("mixing matrix size != problem node count")
    if compressor is None:
        compressor = Compressor("identity")
    if log_every < 1:
        raise ValueError("log_every must be >= 1")

    n, dim = problem.n, problem.dim
    boundaries = problem.layer_boundaries if per_layer else None
    gamma = resolve_gamma(cfg, mixing, compressor, dim, boundaries)
    streams = Streams(seed, n)
    if x0 is None:
        x0 = np.zeros(dim)
    x0 = np.asarray(x0, dtype=float)

    record = RunRecord(seed=seed)
    record.gamma = gamma
    record.eta = cfg.eta
    started = time.perf_counter()

    centralized = cfg.algorithm == "centralized"
    if centralized:
        ledger = TrafficLedger(n + 1)  # extra slot: the coordinator hub
        hub = n
        x = x0.copy()
        workers = None
    else:
        ledger = TrafficLedger(n)
        workers = Workers.start(x0, n, cfg.algorithm)
        edges = None
        if not broadcast:
            # pairwise accounting sends one copy per neighbor (nonzero off-diagonal weight)
            edges = [(i, j) for i in range(n) for j in range(n)
                     if j != i and mixing.w[i, j] != 0.0]

    history = []
    if record_iterates:
        history.append(x.copy() if centralized else workers.x.copy())

    def commit(bits_per_node):
        if centralized:
            for i in range(n):
                ledger.add_upload(i, hub, int(bits_per_node[i]))
        elif broadcast:
            for i in range(n):
                ledger.add_broadcast(i, int(bits_per_node[i]))
        else:
            for i, j in edges:
                ledger.add_message(i, j, int(bits_per_node[i]))

    for t in range(cfg.iterations):
        if centralized:
            x, bits = centralized_step(x, problem, cfg.eta, streams, t, record)
            state_rows = x[None, :]
        elif cfg.algorithm == "decentralized-exact":
            bits = decentralized_exact_step(workers, problem, mixing, cfg.eta, streams, t, record)
            state_rows = workers.x
        else:
            bits = choco_step(workers, problem, mixing, compressor, gamma, cfg.eta,
                              streams, t, cfg=cfg, boundaries=boundaries, record=record)
            state_rows = workers.x

        if not np.all(np.isfinite(state_rows)) or np.max(np.abs(state_rows)) > DIVERGENCE_LIMIT:
            record.diverged = True
            record.diverged_at = t + 1
            break

        commit(bits)
        if record_iterates:
            history.append(state_rows.copy())
        if (t + 1) % log_every == 0 or t + 1 == cfg.iterations:
            xbar = state_rows.mean(axis=0)
            grad = problem.full_gradient(xbar)
            record.add_row(
                t=t + 1,
                f_avg=problem.loss(xbar),
                grad_sq=float(grad @ grad),
                consensus=0.0 if centralized else consensus_distance(state_rows),
                psi=0.0 if centralized else _psi(workers),
                bits_busiest=ledger.busiest(),
            )

    record.elapsed_s = time.perf_counter() - started
    record.final_x_mean = (x if centralized else workers.x.mean(axis=0)).copy()
    record.ledger = ledger
    record.workers = workers
    if record_iterates:
        record.iterates = history
    return record


def tune_stepsize(r0, b, e, d_cap, horizon):
    """Stepsize minimizing the three-term convergence bound.

    ``min( sqrt(r0/(b(T+1))), (r0/(e(T+1)))^(1/3), 1/d_cap )`` with zero or
    infinite terms dropped from the minimum.
    """
    if min(r0, b, e) < 0.0 or d_cap <= 0.0:
        raise ValueError("constants must be nonnegative, d_cap positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    candidates = []
    if b > 0.0:
        candidates.append(math.sqrt(r0 / (b * (horizon + 1))))
    if e > 0.0:
        candidates.append((r0 / (e * (horizon + 1))) ** (1.0 / 3.0))
    if math.isfinite(d_cap):
        candidates.append(1.0 / d_cap)
    if not candidates:
        raise ValueError("all bound terms vanished; nothing to tune")
    return min(candidates)


def theoretical_stepsize(f0, l_smooth, sigma_sq, g_sq, n, rate_c, horizon):
    """Tuned stepsize with the convergence-bound constants plugged in."""
    return tune_stepsize(
        r0=4.0 * f0,
        b=2.0 * sigma_sq * l_smooth / n,
        e=36.0 * g_sq * l_smooth**2 / rate_c**2,
        d_cap=4.0 * l_smooth,
        horizon=horizon,
    )


def consensus_bound(eta, n, g_sq, rate_c):
    """Theory bound on total squared consensus distance, ``eta^2 12 n G^2 / c^2``."""
    return eta**2 * 12.0 * n * g_sq / rate_c**2
