"""Shared numerical kernel: deterministic random streams and a symmetric
eigensolver.

Conventions used across the package: vectors are 1-D ``float64`` arrays,
per-node iterate blocks are ``(n_nodes, dim)`` ``float64`` arrays, square
matrices are ``(n, n)`` ``float64`` arrays. Helpers here raise instead of
letting NaN/Inf propagate silently.
"""

import zlib

import numpy as np

# One substream per (seed, worker, purpose) plus an optional iteration index.
# Philox is counter based, so streams never overlap no matter how many draws
# other streams have consumed.
_MAX_EIG_SIZE = 256
_DEFAULT_SWEEPS = 60


def _purpose_code(purpose):
    # stable across processes and platforms, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


def _draw_count(size):
    # draws are 1-D by convention; (n, dim) blocks are built by stacking
    if not isinstance(size, (int, np.integer)):
        raise TypeError(f"size must be a single integer count, got {size!r}")
    if size < 0:
        raise ValueError("size must be >= 0")
    return int(size)


class RandomStream:
    """Replayable, splittable source of randomness.

    A stream is identified by ``(seed, worker, purpose)``. Two streams with
    the same identity replay the same sequence; streams with different
    identities are statistically independent. :meth:`at` derives the
    substream for one iteration index, so randomness consumed elsewhere can
    never shift what iteration ``t`` sees.

    Parameters
    ----------
    seed : int
        Root seed, any Python int (64-bit range is typical).
    worker : int, optional
        Node index the stream belongs to.
    purpose : str, optional
        Free-form tag, e.g. ``"grad"`` or ``"compress"``.
    """

    def __init__(self, seed, worker=0, purpose="main"):
        if not isinstance(seed, (int, np.integer)):
            raise TypeError("seed must be an integer")
        if worker < 0:
            raise ValueError("worker index must be >= 0")
        self.seed = int(seed)
        self.worker = int(worker)
        self.purpose = str(purpose)
        self.counter = 0
        self._generator = np.random.Generator(np.random.Philox(self._key()))

    def _key(self, iteration=None):
        spawn = (self.worker, _purpose_code(self.purpose))
        if iteration is not None:
            spawn = spawn + (int(iteration) + 1,)
        return np.random.SeedSequence(self.seed, spawn_key=spawn)

    def normal(self, size, std=1.0):
        """Draw ``size`` i.i.d. zero-mean normal entries with deviation ``std``.

        Advances the draw counter by ``size``. ``std = 0`` returns exact
        zeros (and still advances, so replay alignment is preserved).
        """
        size = _draw_count(size)
        if std < 0:
            raise ValueError("std must be >= 0")
        self.counter += size
        return std * self._generator.standard_normal(size)

    def uniform(self, size):
        """Draw ``size`` i.i.d. uniform [0, 1) entries; advances the counter."""
        size = _draw_count(size)
        self.counter += size
        return self._generator.random(size)

    # numpy.random.Generator-compatible aliases, so a RandomStream can be
    # passed anywhere a Generator is expected (e.g. compression).
    def random(self, size):
        return self.uniform(size)

    def choice(self, n, size, replace=False):
        size = _draw_count(size)
        self.counter += size
        return self._generator.choice(int(n), size=size, replace=replace)

    def standard_normal(self, size):
        return self.normal(size)

    def integers(self, low, high, size):
        size = _draw_count(size)
        self.counter += size
        return self._generator.integers(low, high, size=size)

    def at(self, iteration):
        """Return a fresh ``numpy.random.Generator`` for one iteration.

        The substream depends only on ``(seed, worker, purpose, iteration)``,
        never on how many draws were made from this or any other stream.
        """
        if iteration < 0:
            raise ValueError("iteration must be >= 0")
        return np.random.Generator(np.random.Philox(self._key(iteration)))

    def clone(self):
        """Fresh stream with the same identity, rewound to the start."""
        return RandomStream(self.seed, self.worker, self.purpose)

    def __repr__(self):
        return (
            f"RandomStream(seed={self.seed}, worker={self.worker}, "
            f"purpose={self.purpose!r}, counter={self.counter})"
        )


def gaussian(stream, dim, std=1.0):
    """Standard-normal vector of length ``dim`` scaled by ``std``."""
    return stream.normal(dim, std)


def require_finite(arr, context="array"):
    """Raise ``FloatingPointError`` if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {context}")
    return arr


def sym_eigenvalues(a, tol=1e-12, max_sweeps=_DEFAULT_SWEEPS):
    """Eigenvalues of a real symmetric matrix, descending order.

    Classic cyclic Jacobi rotations; chosen for robustness on the small
    (n <= 256) mixing matrices this package works with.

    Parameters
    ----------
    a : (n, n) array_like
        Symmetric matrix. Asymmetry beyond ``1e-12`` (relative to the
        largest entry) is rejected.
    tol : float, optional
        Sweep termination threshold on the largest off-diagonal entry,
        relative to the Frobenius norm.
    max_sweeps : int, optional
        Hard cap on full sweeps before raising ``RuntimeError``.

    Returns
    -------
    (n,) ndarray
        Eigenvalues sorted from largest to smallest.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    if n > _MAX_EIG_SIZE:
        raise ValueError(f"matrix size {n} exceeds supported maximum {_MAX_EIG_SIZE}")
    require_finite(a, "eigensolver input")
    scale = np.max(np.abs(a)) if n else 0.0
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, scale):
        raise ValueError("matrix is not symmetric")
    if n == 1:
        return a.reshape(1).copy()

    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(n)
    stop = tol * fro
    for _ in range(max_sweeps):
        off = np.max(np.abs(np.triu(a, 1)))
        if off <= stop:
            return np.sort(np.diagonal(a))[::-1].copy()
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= stop / n:
                    continue
                # rotation angle that annihilates a[p, q]
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise RuntimeError(f"Jacobi sweep did not converge in {max_sweeps} sweeps")
