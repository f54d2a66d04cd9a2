"""Draw generators for the reduced-form parameter.

All samplers split their output into fixed-size chunks and draw each chunk
from its own stream keyed by ``(seed, label, chunk index)``. Output is thus
bit-identical for any number of worker threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._rng import run_chunks, stream
from .core import DrawSet

DEFAULT_DRAWS = 10_000
JITTER_SCALE = 1e-10


class PosteriorError(ValueError):
    pass


class FactorizationError(PosteriorError):
    pass


class BootstrapError(PosteriorError):
    def __init__(self, message, replication=None):
        super().__init__(message)
        self.replication = replication


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T ~= cov``.

    A failed Cholesky is retried once with ``1e-10 * trace / K`` added to the
    diagonal; the zero matrix factors to zero.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = cov.shape[0]
    if not cov.any():
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    eps = JITTER_SCALE * np.trace(cov) / k
    try:
        return np.linalg.cholesky(cov + eps * np.eye(k))
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh((cov + cov.T) / 2)
        raise FactorizationError(
            f"covariance ({k}x{k}) is not positive semidefinite after jitter {eps:.3g}: "
            f"min eigenvalue {eig.min():.3g}, max eigenvalue {eig.max():.3g}, trace {np.trace(cov):.3g}"
        ) from None


@dataclass(frozen=True)
class GaussianQuasiPosterior:
    """``N(center, covariance)``: the flat-prior posterior for a Gaussian
    limited-information likelihood of an efficient estimator."""

    center: np.ndarray
    covariance: np.ndarray
    draw_count: int = DEFAULT_DRAWS
    seed: int = 0

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (center.size, center.size):
            raise ValueError(f"covariance must be {center.size}x{center.size}")
        if self.draw_count < 1:
            raise ValueError("draw_count must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_information(cls, center, information, n, **kw):
        """Quasi-posterior ``N(center, (n * information)^-1)``."""
        info = np.atleast_2d(np.asarray(information, dtype=float))
        return cls(center, np.linalg.inv(n * info), **kw)


def sample_gaussian(gqp: GaussianQuasiPosterior, workers: int | None = None,
                    source_tag: str = "quasi-posterior") -> DrawSet:
    L = psd_factor(gqp.covariance)
    k = gqp.center.size

    def chunk(i, lo, hi):
        z = stream(gqp.seed, "gaussian", i).standard_normal((hi - lo, k))
        return gqp.center + z @ L.T

    draws = np.vstack(run_chunks(chunk, gqp.draw_count, workers))
    return DrawSet(draws, source_tag, gqp.seed)


@dataclass(frozen=True)
class MultinomialPosterior:
    """Dirichlet posterior for cell probabilities given multinomial counts."""

    counts: np.ndarray
    prior_alpha: np.ndarray | float = 1.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 1 or (counts < 0).any() or (counts != np.round(counts)).any():
            raise ValueError("counts must be a vector of nonnegative integers")
        alpha = np.broadcast_to(np.asarray(self.prior_alpha, dtype=float), counts.shape).copy()
        if (alpha < 0).any():
            raise ValueError("prior_alpha must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "prior_alpha", alpha)

    @property
    def alpha(self):
        return self.prior_alpha + self.counts

    @property
    def mean(self):
        a = self.alpha
        return a / a.sum()


def _dirichlet_chunk(rng, alpha, size):
    x = rng.dirichlet(alpha, size=size)
    return x / x.sum(axis=1, keepdims=True)


def sample_dirichlet(mp: MultinomialPosterior | list, draw_count: int = DEFAULT_DRAWS,
                     seed: int = 0, workers: int | None = None) -> DrawSet:
    """Draws from one Dirichlet posterior, or from several independent ones
    concatenated block by block (one block per multinomial)."""
    blocks = [mp] if isinstance(mp, MultinomialPosterior) else list(mp)
    for b, post in enumerate(blocks):
        bad = np.flatnonzero(post.alpha <= 0)
        if bad.size:
            raise PosteriorError(f"block {b}: cell {int(bad[0])} has zero posterior mass")

    def chunk(i, lo, hi):
        return np.hstack([
            _dirichlet_chunk(stream(seed, "dirichlet", b, i), post.alpha, hi - lo)
            for b, post in enumerate(blocks)
        ])

    draws = np.vstack(run_chunks(chunk, draw_count, workers))
    return DrawSet(draws, "dirichlet", seed)


def sample_mean(rows):
    return np.mean(rows, axis=-2)


@dataclass(frozen=True)
class BootstrapPlan:
    """Nonparametric n-out-of-n bootstrap of ``estimator`` on ``dataset``.

    ``estimator`` maps an ``(n, p)`` array of rows to a length-K vector. If
    ``batched`` is true it must also accept ``(B, n, p)`` stacks and return
    ``(B, K)``, which avoids a Python call per replication.
    """

    dataset: np.ndarray
    estimator: Callable[[np.ndarray], np.ndarray] = sample_mean
    replications: int = 2000
    seed: int = 0
    batched: bool = False

    def __post_init__(self):
        data = np.asarray(self.dataset, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.shape[0] < 1:
            raise ValueError("dataset must be nonempty")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        object.__setattr__(self, "dataset", data)


def check_estimator(estimator, rows, seed=0, trials=3):
    """Reject estimators whose output depends on the order of the rows."""
    rows = np.asarray(rows, dtype=float)
    base = np.atleast_1d(np.asarray(estimator(rows), dtype=float))
    rng = stream(seed, "estimator-contract")
    for _ in range(trials):
        perm = rng.permutation(rows.shape[0])
        other = np.atleast_1d(np.asarray(estimator(rows[perm]), dtype=float))
        if other.shape != base.shape or not np.allclose(other, base, rtol=1e-9, atol=1e-12):
            raise BootstrapError("estimator output depends on the order of the rows")
    return base.size


def bootstrap(plan: BootstrapPlan, workers: int | None = None, check_contract: bool = True,
              chunk_size: int = 256) -> DrawSet:
    data = plan.dataset
    n = data.shape[0]
    if plan.estimator is sample_mean:
        batched = True
    else:
        batched = plan.batched
        if check_contract and n > 1:
            check_estimator(plan.estimator, data, plan.seed)

    def chunk(i, lo, hi):
        idx = stream(plan.seed, "bootstrap", i).integers(0, n, size=(hi - lo, n))
        if batched:
            out = np.asarray(plan.estimator(data[idx]), dtype=float)
            return out.reshape(hi - lo, -1)
        rows = []
        for r in range(hi - lo):
            try:
                est = np.atleast_1d(np.asarray(plan.estimator(data[idx[r]]), dtype=float))
            except Exception as exc:
                raise BootstrapError(
                    f"estimator failed on bootstrap replication {lo + r}: {exc}", lo + r
                ) from exc
            if not np.isfinite(est).all():
                raise BootstrapError(f"estimator returned non-finite values on replication {lo + r}", lo + r)
            rows.append(est)
        return np.vstack(rows)

    draws = np.vstack(run_chunks(chunk, plan.replications, workers, size=chunk_size))
    return DrawSet(draws, "bootstrap", plan.seed)
