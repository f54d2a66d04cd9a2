"""Monte Carlo evaluation of decision rules.

Samples are simulated at ``P = P0 + h / sqrt(n)``. Every rule sees the same
samples at a given parameter value (common random numbers), while distinct
grid points use independent streams so that standard errors can be summed
across the grid.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from ._rng import run_chunks, stream
from .core import RiskProfile, select_rows
from .posterior import psd_factor

REP_CHUNK = 256
INNER_DRAWS = 2000
GRID_HALF_WIDTH = 4.0
GRID_POINTS = 17


class RuleFailure(RuntimeError):
    def __init__(self, message, replication=None):
        super().__init__(message)
        self.replication = replication


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process.

    ``gaussian-mean``: rows are i.i.d. ``N(P, info_matrix^-1)`` and the
    estimate is their mean. ``multinomial``: ``n`` categorical draws with
    cell probabilities ``P``; the estimate is the vector of cell shares.
    """

    family: str
    P0: np.ndarray
    info_matrix: np.ndarray | None = None
    n: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("gaussian-mean", "multinomial"):
            raise ValueError(f"unknown family {self.family!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        P0 = np.atleast_1d(np.asarray(self.P0, dtype=float))
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "n", int(self.n))
        if self.family == "gaussian-mean":
            info = np.eye(P0.size) if self.info_matrix is None else np.atleast_2d(
                np.asarray(self.info_matrix, dtype=float))
            if info.shape != (P0.size, P0.size):
                raise ValueError(f"info_matrix must be {P0.size}x{P0.size}")
            if np.linalg.eigvalsh((info + info.T) / 2).min() <= 0:
                raise ValueError("info_matrix must be positive definite")
            object.__setattr__(self, "info_matrix", info)
        elif abs(P0.sum() - 1.0) > 1e-12 or (P0 < 0).any():
            raise ValueError("multinomial P0 must be a probability vector")

    @property
    def K(self):
        return self.P0.size

    def at(self, h):
        """Parameter value ``P0 + h / sqrt(n)``."""
        return self.P0 + np.asarray(h, dtype=float) / math.sqrt(self.n)

    def with_n(self, n):
        return DgpSpec(self.family, self.P0, self.info_matrix, n, self.seed)

    def estimate_covariance(self, est):
        if self.family == "gaussian-mean":
            return np.linalg.inv(self.n * self.info_matrix)
        return (np.diag(est) - np.outer(est, est)) / self.n

    def simulate(self, P, size, rng, rows=False):
        """``size`` samples at ``P``: estimates, plus raw rows or counts when needed."""
        P = np.asarray(P, dtype=float)
        if self.family == "gaussian-mean":
            L = psd_factor(np.linalg.inv(self.info_matrix))
            if rows:
                X = P + rng.standard_normal((size, self.n, self.K)) @ L.T
                return SampleBatch(X.mean(axis=1), P, self, rows=X)
            est = P + rng.standard_normal((size, self.K)) @ L.T / math.sqrt(self.n)
            return SampleBatch(est, P, self)
        if (P < 0).any() or abs(P.sum() - 1.0) > 1e-9:
            raise ValueError("multinomial parameter left the simplex; shrink the grid")
        counts = rng.multinomial(self.n, P / P.sum(), size=size)
        return SampleBatch(counts / self.n, P, self, counts=counts)


@dataclass
class SampleBatch:
    estimates: np.ndarray
    P_true: np.ndarray
    dgp: DgpSpec
    rows: np.ndarray | None = None
    counts: np.ndarray | None = None
    key: tuple = ()

    def __len__(self):
        return self.estimates.shape[0]


@dataclass(frozen=True)
class RuleUnderTest:
    """A decision rule applied to a batch of samples.

    ``procedure(batch) -> choices`` must be deterministic given the batch
    (including its stream key).
    """

    name: str
    procedure: Callable[[SampleBatch], np.ndarray]
    needs_rows: bool = False

    def __call__(self, batch):
        return np.asarray(self.procedure(batch), dtype=np.int64)


def plugin_rule(profile: RiskProfile, name="plug-in"):
    return RuleUnderTest(name, lambda b: select_rows(profile.risks(b.estimates), profile.tie_order))


def oracle_rule(profile: RiskProfile, name="oracle"):
    def proc(b):
        d = select_rows(profile.risks(b.P_true)[None, :], profile.tie_order)[0]
        return np.full(len(b), d)

    return RuleUnderTest(name, proc)


def constant_rule(choice: int, name=None):
    return RuleUnderTest(name or f"constant-{choice}", lambda b: np.full(len(b), int(choice)))


def _averaged_choice(profile, draws):
    # draws: (B, M, K) -> choice per sample
    R = profile.risks(draws).mean(axis=1)
    return select_rows(R, profile.tie_order)


def bayes_rule(profile: RiskProfile, draws=INNER_DRAWS, seed=0, prior_alpha=1.0, name="bayes"):
    """Flat-prior Bayes rule: Gaussian posterior centred on the estimate for
    the Gaussian family, Dirichlet posterior for the multinomial family.

    Gaussian inner draws reuse one fixed block of standard normals for every
    sample, so the rule is a deterministic function of the estimate.
    """

    def proc(b):
        dgp = b.dgp
        if dgp.family == "gaussian-mean":
            Z = stream(seed, "bayes-inner").standard_normal((draws, dgp.K))
            L = psd_factor(dgp.estimate_covariance(None))
            return _averaged_choice(profile, b.estimates[:, None, :] + (Z @ L.T)[None])
        rng = stream(seed, "bayes-inner", *b.key)
        alpha = (b.counts + prior_alpha)[:, None, :]
        G = rng.standard_gamma(np.broadcast_to(alpha, (len(b), draws, dgp.K)))
        return _averaged_choice(profile, G / G.sum(axis=2, keepdims=True))

    return RuleUnderTest(name, proc)


def bootstrap_rule(profile: RiskProfile, replications=INNER_DRAWS, seed=0, name="bootstrap"):
    """Nonparametric bootstrap of the estimate, averaged maximum risk."""

    def proc(b):
        dgp = b.dgp
        rng = stream(seed, "bootstrap-inner", *b.key)
        out = np.empty(len(b), dtype=np.int64)
        for r in range(len(b)):
            if dgp.family == "gaussian-mean":
                idx = rng.integers(0, dgp.n, size=(replications, dgp.n))
                boot = b.rows[r][idx].mean(axis=1)
            else:
                boot = rng.multinomial(dgp.n, b.estimates[r], size=replications) / dgp.n
            out[r] = _averaged_choice(profile, boot[None])[0]
        return out

    return RuleUnderTest(name, proc, needs_rows=True)


def closed_form_rule(contrast: Callable[[np.ndarray, int], float], name="bayes-closed-form"):
    """Treat iff a closed-form posterior mean contrast is nonnegative."""

    def proc(b):
        return np.array([int(contrast(e, b.dgp.n) >= 0) for e in b.estimates])

    return RuleUnderTest(name, proc)


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    se: float
    reps: int


def _choices(dgp, rules, P, reps, key, workers=None):
    """Choice matrix ``(reps, len(rules))`` on common samples drawn at ``P``."""
    rows = any(r.needs_rows for r in rules)

    def chunk(i, lo, hi):
        rng = stream(dgp.seed, "samples", *key, i)
        batch = dgp.simulate(P, hi - lo, rng, rows=rows)
        batch.key = (*key, i)
        out = np.empty((hi - lo, len(rules)), dtype=np.int64)
        for j, rule in enumerate(rules):
            try:
                out[:, j] = rule(batch)
            except RuleFailure:
                raise
            except Exception as exc:
                raise RuleFailure(f"rule {rule.name!r} failed in replications {lo}..{hi - 1}: {exc}", lo) from exc
        return out

    return np.vstack(run_chunks(chunk, reps, workers, size=REP_CHUNK))


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return math.fsum(x) / x.size, se


def frequentist_risk(dgp: DgpSpec, rule: RuleUnderTest, profile: RiskProfile, reps: int,
                     P=None, key=("frequentist",), workers=None) -> RiskEstimate:
    """Average of ``R(chosen, P)`` over ``reps`` samples drawn at ``P``."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    P = dgp.P0 if P is None else np.asarray(P, dtype=float)
    R = profile.risks(P)
    chosen = _choices(dgp, [rule], P, reps, key, workers)[:, 0]
    v, se = _mean_se(R[chosen])
    return RiskEstimate(v, se, reps)


def agreement_rate(dgp: DgpSpec, rule_a: RuleUnderTest, rule_b: RuleUnderTest, reps: int,
                   P=None, key=("agreement",), workers=None) -> float:
    if reps < 1000:
        raise ValueError("reps must be at least 1000")
    P = dgp.P0 if P is None else np.asarray(P, dtype=float)
    ch = _choices(dgp, [rule_a, rule_b], P, reps, key, workers)
    return float(np.mean(ch[:, 0] == ch[:, 1]))


@dataclass(frozen=True)
class HGrid:
    """Product grid of coefficients mapped into h-space through ``basis``.

    ``basis`` has one row per axis; ``h = coefficients @ basis``.
    """

    axes: tuple
    basis: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.shape[0] != len(axes):
            raise ValueError("basis needs one row per grid axis")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def box(cls, K, half_width=GRID_HALF_WIDTH, points=GRID_POINTS):
        ax = np.linspace(-half_width, half_width, points)
        return cls((ax,) * K, np.eye(K))

    @classmethod
    def subspace(cls, basis, half_width=GRID_HALF_WIDTH, points=GRID_POINTS):
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        ax = np.linspace(-half_width, half_width, points)
        return cls((ax,) * basis.shape[0], basis)

    @property
    def coefficients(self):
        return np.array(list(product(*self.axes)))

    @property
    def points(self):
        return self.coefficients @ self.basis

    def __len__(self):
        return int(np.prod([a.size for a in self.axes]))

    def weights(self):
        """Product trapezoid weights; raises unless every axis is uniform."""
        ws = []
        for a in self.axes:
            if a.size < 2:
                raise ValueError("each grid axis needs at least two points")
            step = np.diff(a)
            if np.abs(step - step[0]).max() > 1e-9 * abs(step[0]) or step[0] <= 0:
                raise ValueError("grid axes must be uniform and increasing")
            w = np.full(a.size, step[0])
            w[[0, -1]] *= 0.5
            ws.append(w)
        out = ws[0]
        for w in ws[1:]:
            out = np.multiply.outer(out, w)
        return out.ravel()


@dataclass
class RiskCurve:
    rule: str
    grid: HGrid
    excess: np.ndarray
    se: np.ndarray
    reps: int
    samples: np.ndarray | None = field(default=None, repr=False)  # (reps, G) scaled excess

    @property
    def h_grid(self):
        return self.grid.points

    def rows(self):
        H = self.h_grid
        for g in range(H.shape[0]):
            yield [*(repr(float(v)) for v in H[g]), self.rule, repr(float(self.excess[g])),
                   repr(float(self.se[g])), self.reps]


def curves_to_csv(curves, fh=None):
    """Write curves as CSV (h components, rule, excess, se, reps)."""
    curves = list(curves)
    K = curves[0].h_grid.shape[1]
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"h{k + 1}" for k in range(K)] + ["rule", "excess", "se", "reps"])
    for c in curves:
        w.writerows(c.rows())
    return buf.getvalue() if fh is None else None


def excess_risk_profile(dgp: DgpSpec, rules, profile: RiskProfile, grid: HGrid, reps: int,
                        keep_samples=False, workers=None) -> dict:
    """``sqrt(n)``-scaled excess risk of each rule at every grid point."""
    if reps < 1000:
        raise ValueError("reps must be at least 1000")
    rules = list(rules)
    H = grid.points
    if H.shape[1] != dgp.K:
        raise ValueError(f"grid points have dimension {H.shape[1]}, parameter has {dgp.K}")
    G = H.shape[0]
    root_n = math.sqrt(dgp.n)
    ex = np.empty((len(rules), G))
    se = np.empty((len(rules), G))
    samples = np.empty((len(rules), reps, G)) if keep_samples else None
    for g in range(G):
        P = dgp.at(H[g])
        R = profile.risks(P)
        chosen = _choices(dgp, rules, P, reps, ("grid", g), workers)
        loss = root_n * (R[chosen] - R.min())
        for j in range(len(rules)):
            ex[j, g], se[j, g] = _mean_se(loss[:, j])
        if keep_samples:
            samples[:, :, g] = loss.T
    return {
        r.name: RiskCurve(r.name, grid, ex[j], se[j], reps, None if samples is None else samples[j])
        for j, r in enumerate(rules)
    }


def average_excess_risk(curve: RiskCurve) -> RiskEstimate:
    """Trapezoid integral of the curve over the grid box, with propagated SE."""
    w = curve.grid.weights()
    v = math.fsum(w * curve.excess)
    se = math.sqrt(math.fsum((w * curve.se) ** 2))
    return RiskEstimate(v, se, curve.reps)


def paired_difference(curve_a: RiskCurve, curve_b: RiskCurve) -> RiskEstimate:
    """Integrated ``a - b`` with SE from per-replication paired differences."""
    if curve_a.samples is None or curve_b.samples is None:
        raise ValueError("paired differences need curves computed with keep_samples=True")
    w = curve_a.grid.weights()
    diff = curve_a.samples - curve_b.samples
    n = diff.shape[0]
    se_g = diff.std(axis=0, ddof=1) / math.sqrt(n)
    v = math.fsum(w * diff.mean(axis=0))
    return RiskEstimate(v, math.sqrt(math.fsum((w * se_g) ** 2)), n)


def n_doubling(dgp: DgpSpec, rules, profile: RiskProfile, grid: HGrid, reps: int, workers=None):
    """Average excess risk per rule at ``n`` and ``2n``; a stability diagnostic."""
    out = {}
    for n in (dgp.n, 2 * dgp.n):
        curves = excess_risk_profile(dgp.with_n(n), rules, profile, grid, reps, workers=workers)
        out[n] = {name: average_excess_risk(c) for name, c in curves.items()}
    return out
