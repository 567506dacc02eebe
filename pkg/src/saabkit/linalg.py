"""Symmetric linear algebra and streaming second-moment accumulation.

Everything data-driven in the package (KLT, Saab stages, convergence
monitoring) sits on two pieces:

* :class:`CovarianceAccumulator` -- a mergeable mean/scatter state, updated
  one sample or one batch at a time (Welford / Chan et al. updates).
* :func:`eig_sym` -- a deterministic cyclic Jacobi eigensolver.

Covariances are population-normalized (divided by ``n``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyAccumulatorError, RejectedInputError

MAX_EIG_DIM = 4096
JACOBI_MAX_SWEEPS = 100
JACOBI_REL_TOL = 1e-12


def sym_matrix(entries) -> np.ndarray:
    """Return ``entries`` as a float64 symmetric matrix.

    Symmetry is enforced by averaging with the transpose, so
    ``out[i, j] == out[j, i]`` holds exactly.
    """
    a = np.array(entries, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise RejectedInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise RejectedInputError("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def frobenius_diff(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RejectedInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


class CovarianceAccumulator:
    """Streaming mean and scatter of fixed-length real vectors.

    ``scatter`` is the sum of outer products of mean-centred samples.
    Instances are single-writer; shard the stream over several
    accumulators and combine them with :meth:`merge`.
    """

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise RejectedInputError(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.scatter = np.zeros((self.dim, self.dim))

    @classmethod
    def from_samples(cls, samples) -> "CovarianceAccumulator":
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 2:
            raise RejectedInputError(f"expected a 2-D sample array, got shape {x.shape}")
        acc = cls(x.shape[1])
        acc.update(x)
        return acc

    def copy(self) -> "CovarianceAccumulator":
        out = CovarianceAccumulator(self.dim)
        out.count = self.count
        out.mean = self.mean.copy()
        out.scatter = self.scatter.copy()
        return out

    def _check(self, x: np.ndarray, ndim: int) -> None:
        if x.ndim != ndim or x.shape[-1] != self.dim:
            raise RejectedInputError(
                f"sample dimension mismatch: accumulator dim {self.dim}, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise RejectedInputError("samples must be finite")

    def accumulate(self, sample) -> "CovarianceAccumulator":
        """Add one sample in place (Welford update) and return ``self``."""
        x = np.asarray(sample, dtype=np.float64)
        self._check(x, 1)
        self.count += 1
        d = x - self.mean
        self.mean = self.mean + d / self.count
        # (n-1)/n * d d^T keeps the update exactly symmetric
        self.scatter = self.scatter + ((self.count - 1) / self.count) * np.outer(d, d)
        return self

    def update(self, samples) -> "CovarianceAccumulator":
        """Add a batch of samples (rows) in place and return ``self``."""
        x = np.asarray(samples, dtype=np.float64)
        self._check(x, 2)
        if x.shape[0] == 0:
            return self
        batch = CovarianceAccumulator(self.dim)
        batch.count = x.shape[0]
        batch.mean = x.mean(axis=0)
        xc = x - batch.mean
        s = xc.T @ xc
        batch.scatter = 0.5 * (s + s.T)
        merged = self.merge(batch)
        self.count, self.mean, self.scatter = merged.count, merged.mean, merged.scatter
        return self

    def merge(self, other: "CovarianceAccumulator") -> "CovarianceAccumulator":
        """Combine two accumulators into a new one (pairwise update)."""
        if other.dim != self.dim:
            raise RejectedInputError(f"cannot merge dims {self.dim} and {other.dim}")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        out = CovarianceAccumulator(self.dim)
        n = self.count + other.count
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out.scatter = (
            self.scatter + other.scatter + np.outer(delta, delta) * (self.count * other.count / n)
        )
        return out

    def covariance(self) -> np.ndarray:
        if self.count == 0:
            raise EmptyAccumulatorError("covariance of an empty accumulator")
        return self.scatter / self.count

    def second_moment(self) -> np.ndarray:
        """Mean of ``x x^T`` over the samples seen."""
        return self.covariance() + np.outer(self.mean, self.mean)

    def __repr__(self) -> str:
        return f"CovarianceAccumulator(dim={self.dim}, count={self.count})"


def merge(a: CovarianceAccumulator, b: CovarianceAccumulator) -> CovarianceAccumulator:
    return a.merge(b)


def covariance(acc: CovarianceAccumulator) -> np.ndarray:
    return acc.covariance()


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns pair with eigenvalues


@lru_cache(maxsize=None)
def _round_robin(n: int) -> tuple:
    """Disjoint (p, q) index pairs for each round of one Jacobi sweep.

    Circle-method tournament: every pair appears exactly once per sweep
    and pairs inside a round never share an index, so a round's
    rotations commute and can be applied together.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        pairs.sort()
        rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def eig_sym(m) -> EigDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi.

    Eigenvalues come back in descending order. Each eigenvector is
    signed so that its first nonzero component is positive, which makes
    the output reproducible bit for bit.
    """
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise RejectedInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_EIG_DIM:
        raise RejectedInputError(f"dim {n} exceeds the supported maximum {MAX_EIG_DIM}")
    if not np.all(np.isfinite(a)):
        raise RejectedInputError("matrix has non-finite entries")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > 1e-10 * max(scale, 1e-300):
        raise RejectedInputError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)

    tol = JACOBI_REL_TOL * float(np.linalg.norm(a))
    rounds = _round_robin(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_norm(a) <= tol:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            theta = (a[q, q] - a[p, p]) / (2.0 * safe)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            cc, sc = c[:, None], s[:, None]
            rp, rq = a[p, :], a[q, :]
            a[p, :], a[q, :] = cc * rp - sc * rq, sc * rp + cc * rq
            cp, cq = a[:, p], a[:, q]
            a[:, p], a[:, q] = cp * c - cq * s, cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = vp * c - vq * s, vp * s + vq * c

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(n):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return EigDecomposition(eigenvalues=w, eigenvectors=v)
