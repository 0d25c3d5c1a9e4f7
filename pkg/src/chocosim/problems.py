"""Synthetic distributed objectives ``f(x) = (1/n) sum_i f_i(x)``.

Three families, in increasing roughness: strongly convex quadratics with
additive Gaussian gradient noise, L2-regularized logistic regression on a
two-blob dataset (minibatch noise), and a one-hidden-layer tanh network
(non-convex, minibatch noise, per-layer parameter blocks). All expose the
same oracle interface, so the optimizers never need to know which one they
are running on.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import RandomStream, require_finite, sym_eigenvalues

PARTITION_MODES = ("iid-reshuffled", "fixed-split")


@dataclass
class Partition:
    """Assignment of sample indices to nodes.

    ``fixed-split`` deals the samples out once (optionally sorted by label,
    which concentrates classes on few nodes and maximizes heterogeneity) and
    never changes. ``iid-reshuffled`` redraws a fresh random split for every
    epoch index, keyed only by ``(seed, epoch)``.
    """

    mode: str
    n_nodes: int
    n_samples: int
    seed: int = 0
    by_label: bool = False
    labels: np.ndarray = None

    def __post_init__(self):
        if self.mode not in PARTITION_MODES:
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if self.n_samples < self.n_nodes:
            raise ValueError("need at least one sample per node")
        if self.by_label and self.mode != "fixed-split":
            raise ValueError("by_label only makes sense for fixed-split")
        if self.by_label and self.labels is None:
            raise ValueError("by_label needs labels")

    def shards(self, epoch=0):
        """List of index arrays, one per node, for the given epoch."""
        if self.mode == "fixed-split":
            if self.by_label:
                order = np.argsort(self.labels, kind="stable")
            else:
                order = np.arange(self.n_samples)
        else:
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(self.seed, spawn_key=(int(epoch),)))
            )
            order = rng.permutation(self.n_samples)
        return [np.sort(chunk) for chunk in np.array_split(order, self.n_nodes)]


def make_blob_dataset(n_samples, dim, seed=0, margin=1.5):
    """Balanced two-Gaussian binary dataset; labels in {-1, +1}."""
    stream = RandomStream(seed, 0, "dataset")
    direction = stream.normal(dim)
    direction /= np.linalg.norm(direction)
    y = np.ones(n_samples)
    y[n_samples // 2 :] = -1.0
    z = stream.normal(n_samples * dim).reshape(n_samples, dim)
    z += np.outer(y, margin * direction)
    return z, y


def load_csv_dataset(path):
    """Load ``(features, labels)`` from a CSV with the label in the last column.

    A single non-numeric header row is skipped. Labels may be 0/1 or -1/+1;
    they are returned as -1/+1.
    """
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column plus a label")
    z, y = raw[:, :-1], raw[:, -1]
    values = set(np.unique(y).tolist())
    if values <= {0.0, 1.0}:
        y = 2.0 * y - 1.0
    elif not values <= {-1.0, 1.0}:
        raise ValueError(f"{path}: labels must be 0/1 or -1/+1, got {sorted(values)}")
    return z, y


class QuadraticProblem:
    """``f_i(x) = 1/2 (x - s_i)^T H (x - s_i)`` with shared curvature ``H``.

    ``H`` has eigenvalues spread evenly over ``[mu, l_smooth]``. The
    per-node optima are ``s_i = xstar + h * u_i`` with zero-sum offsets
    ``u_i``, so ``h = 0`` makes every ``f_i`` identical, ``h > 0`` makes the
    local optima disagree while the global optimum stays in closed form.
    Stochastic gradients add isotropic Gaussian noise with total variance
    ``noise_std^2``.
    """

    kind = "quadratic"

    def __init__(self, n, dim, heterogeneity=1.0, noise_std=1.0, seed=0,
                 mu=0.1, l_smooth=1.0, xstar_scale=1.0):
        if n < 1 or dim < 1:
            raise ValueError("need n >= 1 nodes and dim >= 1")
        if not (0.0 < mu <= l_smooth):
            raise ValueError("need 0 < mu <= l_smooth")
        if heterogeneity < 0.0 or noise_std < 0.0:
            raise ValueError("heterogeneity and noise_std must be >= 0")
        self.n = int(n)
        self.dim = int(dim)
        self.heterogeneity = float(heterogeneity)
        self.noise_std = float(noise_std)
        self.mu = float(mu)
        self.l_smooth = float(l_smooth)
        self.layer_boundaries = None

        stream = RandomStream(seed, 0, "problem")
        basis, _ = np.linalg.qr(stream.normal(dim * dim).reshape(dim, dim))
        spectrum = np.linspace(mu, l_smooth, dim)
        self.hessian = basis @ np.diag(spectrum) @ basis.T
        self.hessian = 0.5 * (self.hessian + self.hessian.T)
        xstar = stream.normal(dim, std=xstar_scale / np.sqrt(dim))
        offsets = stream.normal(n * dim).reshape(n, dim) / np.sqrt(dim)
        offsets -= offsets.mean(axis=0)
        self.node_optima = xstar + heterogeneity * offsets
        self._noise_coord_std = noise_std / np.sqrt(dim)

    def optimum(self):
        """Exact global minimizer (the mean of the per-node optima)."""
        return self.node_optima.mean(axis=0)

    def f_star(self):
        return self.loss(self.optimum())

    def node_loss(self, i, x):
        r = x - self.node_optima[i]
        return 0.5 * float(r @ self.hessian @ r)

    def loss(self, x):
        return sum(self.node_loss(i, x) for i in range(self.n)) / self.n

    def node_gradient(self, i, x):
        return self.hessian @ (x - self.node_optima[i])

    def full_gradient(self, x):
        return self.hessian @ (x - self.optimum())

    def stochastic_gradient(self, i, x, rng, t=0):
        noise = self._noise_coord_std * rng.standard_normal(self.dim)
        return self.node_gradient(i, x) + noise

    def smoothness(self):
        return self.l_smooth


class _DatasetProblem:
    """Shared machinery for problems defined over a partitioned dataset."""

    def __init__(self, n, features, labels, partition, batch):
        self.n = int(n)
        self.features = np.asarray(features, dtype=float)
        self.labels = np.asarray(labels, dtype=float)
        require_finite(self.features, "dataset features")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature/label row counts differ")
        if not set(np.unique(self.labels).tolist()) <= {-1.0, 1.0}:
            raise ValueError("labels must be -1/+1")
        if batch < 1:
            raise ValueError("batch must be >= 1")
        self.partition = partition
        self.batch = int(batch)
        self._shards_cache = {}

    def _shards(self, epoch):
        if self.partition.mode == "fixed-split":
            epoch = 0
        if epoch not in self._shards_cache:
            self._shards_cache = {epoch: self.partition.shards(epoch)}
        return self._shards_cache[epoch]

    def _epoch(self, t):
        per_node = self.features.shape[0] // self.n
        draws_per_epoch = max(1, per_node // self.batch)
        return int(t) // draws_per_epoch

    def _minibatch(self, i, rng, t):
        shard = self._shards(self._epoch(t))[i]
        picks = rng.integers(0, shard.shape[0], size=min(self.batch, shard.shape[0]))
        return shard[picks]

    def loss(self, x):
        return sum(self.node_loss(i, x) for i in range(self.n)) / self.n

    def full_gradient(self, x):
        g = self.node_gradient(0, x)
        for i in range(1, self.n):
            g = g + self.node_gradient(i, x)
        return g / self.n


class LogisticProblem(_DatasetProblem):
    """L2-regularized binary logistic regression.

    ``f_i`` averages the logistic loss over node i's shard plus
    ``reg/2 ||x||^2``. The exact smoothness constant is
    ``lambda_max(Z^T Z) / (4 N) + reg``.
    """

    kind = "logistic"

    def __init__(self, n, features, labels, partition, reg=1e-3, batch=32):
        super().__init__(n, features, labels, partition, batch)
        self.reg = float(reg)
        self.dim = self.features.shape[1]
        self.layer_boundaries = None

    def _sample_loss(self, idx, x):
        margins = self.labels[idx] * (self.features[idx] @ x)
        return float(np.mean(np.logaddexp(0.0, -margins)))

    def _sample_gradient(self, idx, x):
        z = self.features[idx]
        y = self.labels[idx]
        margins = y * (z @ x)
        weights = -y / (1.0 + np.exp(margins))  # -y * sigmoid(-margin)
        return (weights @ z) / idx.shape[0] + self.reg * x

    def node_loss(self, i, x):
        idx = self._shards(0)[i]
        return self._sample_loss(idx, x) + 0.5 * self.reg * float(x @ x)

    def node_gradient(self, i, x):
        return self._sample_gradient(self._shards(0)[i], x)

    def stochastic_gradient(self, i, x, rng, t=0):
        return self._sample_gradient(self._minibatch(i, rng, t), x)

    def smoothness(self):
        gram = self.features.T @ self.features / (4.0 * self.features.shape[0])
        return float(sym_eigenvalues(0.5 * (gram + gram.T))[0]) + self.reg


class MlpProblem(_DatasetProblem):
    """One-hidden-layer tanh classifier with the logistic loss.

    Parameters are packed into a flat vector in blocks
    ``[W1, b1, w2, b2]``; ``layer_boundaries`` exposes the block edges so
    compression can treat each layer separately.
    """

    kind = "mlp"

    def __init__(self, n, features, labels, partition, hidden=16, batch=32):
        super().__init__(n, features, labels, partition, batch)
        if hidden < 1:
            raise ValueError("hidden must be >= 1")
        self.hidden = int(hidden)
        p = self.features.shape[1]
        h = self.hidden
        self.dim = h * p + h + h + 1
        self.layer_boundaries = [0, h * p, h * p + h, h * p + 2 * h, self.dim]

    def _unpack(self, x):
        p, h = self.features.shape[1], self.hidden
        b = self.layer_boundaries
        return (
            x[b[0] : b[1]].reshape(h, p),
            x[b[1] : b[2]],
            x[b[2] : b[3]],
            x[b[3]],
        )

    def _logits(self, idx, x):
        w1, b1, w2, b2 = self._unpack(x)
        hidden = np.tanh(self.features[idx] @ w1.T + b1)
        return hidden @ w2 + b2, hidden

    def _sample_loss(self, idx, x):
        logits, _ = self._logits(idx, x)
        return float(np.mean(np.logaddexp(0.0, -self.labels[idx] * logits)))

    def _sample_gradient(self, idx, x):
        w1, b1, w2, b2 = self._unpack(x)
        logits, hidden = self._logits(idx, x)
        y = self.labels[idx]
        dlogit = -y / (1.0 + np.exp(y * logits)) / idx.shape[0]
        dw2 = hidden.T @ dlogit
        db2 = dlogit.sum()
        dhidden = np.outer(dlogit, w2) * (1.0 - hidden**2)
        dw1 = dhidden.T @ self.features[idx]
        db1 = dhidden.sum(axis=0)
        return np.concatenate([dw1.ravel(), db1, dw2, [db2]])

    def node_loss(self, i, x):
        return self._sample_loss(self._shards(0)[i], x)

    def node_gradient(self, i, x):
        return self._sample_gradient(self._shards(0)[i], x)

    def stochastic_gradient(self, i, x, rng, t=0):
        return self._sample_gradient(self._minibatch(i, rng, t), x)

    def smoothness(self):
        return None  # no closed form; use estimate_constants


def make_quadratic(n, dim, heterogeneity=1.0, noise_std=1.0, seed=0,
                   mu=0.1, l_smooth=1.0, xstar_scale=1.0):
    return QuadraticProblem(n, dim, heterogeneity, noise_std, seed,
                            mu, l_smooth, xstar_scale)


def make_logistic(n, dim=10, samples=2000, mode="iid-reshuffled", by_label=False,
                  reg=1e-3, batch=32, seed=0, margin=1.5, data=None):
    if data is None:
        features, labels = make_blob_dataset(samples, dim, seed=seed, margin=margin)
    else:
        features, labels = data
    part = Partition(mode, n, features.shape[0], seed=seed,
                     by_label=by_label, labels=labels if by_label else None)
    return LogisticProblem(n, features, labels, part, reg=reg, batch=batch)


def make_mlp(n, input_dim=8, hidden=16, samples=1024, mode="iid-reshuffled",
             by_label=False, batch=32, seed=0, margin=1.5, data=None):
    if data is None:
        features, labels = make_blob_dataset(samples, input_dim, seed=seed, margin=margin)
    else:
        features, labels = data
    part = Partition(mode, n, features.shape[0], seed=seed,
                     by_label=by_label, labels=labels if by_label else None)
    return MlpProblem(n, features, labels, part, hidden=hidden, batch=batch)


@dataclass(frozen=True)
class ConstantEstimates:
    """Monte-Carlo estimates of the constants the stepsize theory needs."""

    l_smooth: float   # smoothness L
    sigma_sq: float   # node-averaged gradient noise variance
    g_sq: float       # uniform second-moment bound on stochastic gradients


def estimate_constants(problem, seed=0, trials=8, grad_samples=16,
                       center=None, radius=1.0, power_iters=120):
    """Estimate ``(L, sigma^2, G^2)`` from the problem's oracles alone.

    ``L`` comes from Hessian power iteration at ``center`` using finite
    differences of the exact full gradient; for quadratics this converges to
    the true largest curvature. ``sigma^2`` and ``G^2`` are sampled at
    ``trials`` random points (``center + radius * gaussian``) by comparing
    stochastic gradients against the exact per-node gradients.
    """
    dim = problem.dim
    stream = RandomStream(seed, 0, "estimate")
    if center is None:
        center = np.zeros(dim)
    center = np.asarray(center, dtype=float)

    eps = 1e-5 * max(1.0, float(np.linalg.norm(center)))
    g0 = problem.full_gradient(center)
    v = stream.normal(dim)
    v /= np.linalg.norm(v)
    l_est = 0.0
    for _ in range(power_iters):
        u = (problem.full_gradient(center + eps * v) - g0) / eps
        norm = np.linalg.norm(u)
        if norm == 0.0:
            break
        l_est = float(u @ v)
        v = u / norm
    l_est = abs(l_est)

    sigma_acc = np.zeros(problem.n)
    g_sq = 0.0
    for trial in range(trials):
        point = center + radius * stream.normal(dim)
        for i in range(problem.n):
            exact = problem.node_gradient(i, point)
            rng = stream.at(trial * problem.n + i)
            sq_err = 0.0
            sq_norm = 0.0
            for _ in range(grad_samples):
                g = problem.stochastic_gradient(i, point, rng)
                sq_err += float(np.sum((g - exact) ** 2))
                sq_norm += float(g @ g)
            sigma_acc[i] += sq_err / grad_samples
            g_sq = max(g_sq, sq_norm / grad_samples)
    sigma_sq = float(sigma_acc.mean() / trials)
    return ConstantEstimates(l_smooth=l_est, sigma_sq=sigma_sq, g_sq=g_sq)
