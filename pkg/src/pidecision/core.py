"""Discrete decisions from maximum-risk profiles.

A :class:`RiskProfile` maps a reduced-form parameter ``P`` to the maximum
risk of every choice. Decision rules differ only in what they feed it: the
true ``P`` (oracle), an estimate (plug-in), or a cloud of draws whose risks
are averaged (Bayes, quasi-Bayes, bootstrap).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import stream

TIE_RTOL = 1e-10
SYMMETRY_RTOL = 1e-12

SOURCE_TAGS = ("posterior", "quasi-posterior", "bootstrap", "dirichlet")
_RULE_NAMES = {
    "posterior": "bayes",
    "quasi-posterior": "quasi-bayes",
    "bootstrap": "bootstrap",
    "dirichlet": "bayes-dirichlet",
}


class DecisionError(ValueError):
    """Base class for domain errors raised while deciding."""


class RiskEvaluationError(DecisionError):
    """A maximum-risk evaluation returned a non-finite value."""

    def __init__(self, message, choice=None, draw=None):
        super().__init__(message)
        self.choice = choice
        self.draw = draw


@dataclass(frozen=True)
class ChoiceSet:
    size: int
    labels: tuple = ()

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"a choice set needs at least 2 choices, got {self.size}")
        if self.labels and len(self.labels) != self.size:
            raise ValueError("labels must match the number of choices")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(d) for d in range(self.size)))

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(range(self.size))


@dataclass(frozen=True)
class ReducedForm:
    estimate: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        est = np.atleast_1d(np.asarray(self.estimate, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        k = est.size
        if est.ndim != 1 or cov.shape != (k, k):
            raise ValueError(f"covariance must be {k}x{k}, got {cov.shape}")
        scale = max(np.abs(cov).max(initial=0.0), np.finfo(float).tiny)
        if np.abs(cov - cov.T).max(initial=0.0) > SYMMETRY_RTOL * scale:
            raise ValueError("covariance is not symmetric")
        if (np.diag(cov) < 0).any():
            raise ValueError("covariance has a negative diagonal entry")
        object.__setattr__(self, "estimate", est)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self):
        return self.estimate.size


@dataclass(frozen=True)
class RiskProfile:
    """Maximum risk ``R(d, P)`` for every choice ``d``.

    ``fn`` is vectorized: it maps an array of shape ``(..., K)`` to risks of
    shape ``(..., D+1)``. ``tie_order`` lists choices from most to least
    preferred when averaged risks tie; it defaults to ``0, 1, ..., D``.
    """

    choices: ChoiceSet
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "risk"
    tie_order: tuple | None = None

    def __post_init__(self):
        if isinstance(self.choices, int):
            object.__setattr__(self, "choices", ChoiceSet(self.choices))
        order = tuple(range(self.choices.size)) if self.tie_order is None else tuple(self.tie_order)
        if sorted(order) != list(range(self.choices.size)):
            raise ValueError("tie_order must be a permutation of the choice indices")
        object.__setattr__(self, "tie_order", order)

    @property
    def n_choices(self):
        return self.choices.size

    def risks(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        out = np.asarray(self.fn(P), dtype=float)
        if out.shape != P.shape[:-1] + (self.n_choices,):
            raise ValueError(
                f"risk function returned shape {out.shape}, expected {P.shape[:-1] + (self.n_choices,)}"
            )
        return out

    def risk(self, d: int, P) -> float:
        return float(self.risks(P)[d])


@dataclass(frozen=True)
class DrawSet:
    draws: np.ndarray
    source_tag: str
    seed: int = 0

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        if draws.ndim != 2 or draws.shape[0] < 1:
            raise ValueError("a draw set needs at least one draw of a 1-D parameter")
        if self.source_tag not in SOURCE_TAGS:
            raise ValueError(f"source_tag must be one of {SOURCE_TAGS}, got {self.source_tag!r}")
        object.__setattr__(self, "draws", draws)

    def __len__(self):
        return self.draws.shape[0]

    @property
    def dim(self):
        return self.draws.shape[1]


@dataclass(frozen=True)
class TieRule:
    kind: str = "lowest-index"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("lowest-index", "randomized"):
            raise ValueError(f"unknown tie rule {self.kind!r}")
        if self.kind == "randomized" and self.seed is None:
            raise ValueError("a randomized tie rule needs a seed")

    @classmethod
    def randomized(cls, seed):
        return cls("randomized", int(seed))

    def describe(self):
        return self.kind if self.kind == "lowest-index" else f"randomized({self.seed})"


LOWEST_INDEX = TieRule()


@dataclass(frozen=True)
class DecisionReport:
    chosen: int
    averaged_risks: np.ndarray
    tie_flag: bool
    rule_name: str
    tie_rule: str
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        out = {
            "chosen": int(self.chosen),
            "averaged_risks": [float(r) for r in self.averaged_risks],
            "tie_flag": bool(self.tie_flag),
            "rule_name": self.rule_name,
            "tie_rule": self.tie_rule,
        }
        out.update(self.details)
        return out


def tied_choices(risks: Sequence[float]) -> list[int]:
    """Indices whose risk is within the tie tolerance of the minimum."""
    r = np.asarray(risks, dtype=float)
    lo = r.min()
    tol = TIE_RTOL * np.maximum(1.0, np.maximum(abs(lo), np.abs(r)))
    return [int(d) for d in np.flatnonzero(r - lo <= tol)]


def select(risks, tie_rule: TieRule = LOWEST_INDEX, order=None):
    """Return ``(chosen, tie_flag)`` for a risk vector."""
    tied = tied_choices(risks)
    if len(tied) == 1:
        return tied[0], False
    if tie_rule.kind == "randomized":
        rng = stream(tie_rule.seed, "tie-break")
        return int(rng.choice(tied)), True
    order = range(len(risks)) if order is None else order
    rank = {d: i for i, d in enumerate(order)}
    return min(tied, key=rank.__getitem__), True


def select_rows(R: np.ndarray, order=None) -> np.ndarray:
    """Row-wise :func:`select` with the deterministic tie rule.

    ``R`` has shape ``(B, D+1)``; returns ``B`` choice indices.
    """
    R = np.asarray(R, dtype=float)
    order = np.arange(R.shape[1]) if order is None else np.asarray(order)
    lo = R.min(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(R)))
    tied = (R - lo <= tol)[:, order]
    return order[tied.argmax(axis=1)]


def _check_finite(R, what):
    bad = np.argwhere(~np.isfinite(R))
    if bad.size:
        if R.ndim == 1:
            d = int(bad[0][0])
            raise RiskEvaluationError(f"non-finite maximum risk for choice {d}{what}", choice=d)
        m, d = (int(v) for v in bad[0])
        raise RiskEvaluationError(
            f"non-finite maximum risk for choice {d} at draw {m}{what}", choice=d, draw=m
        )


def oracle_decision(profile: RiskProfile, P, tie_rule: TieRule = LOWEST_INDEX,
                    rule_name: str = "oracle") -> DecisionReport:
    R = profile.risks(np.asarray(P, dtype=float))
    _check_finite(R, "")
    chosen, tie = select(R, tie_rule, profile.tie_order)
    return DecisionReport(chosen, R, tie, rule_name, tie_rule.describe())


def plugin_decision(profile: RiskProfile, rf: ReducedForm,
                    tie_rule: TieRule = LOWEST_INDEX) -> DecisionReport:
    return oracle_decision(profile, rf.estimate, tie_rule, rule_name="plug-in")


def average_risks(R: np.ndarray) -> np.ndarray:
    """Column means of an ``(M, D+1)`` risk matrix.

    Uses exactly rounded summation, so the result does not depend on the
    order of the draws.
    """
    M = R.shape[0]
    return np.array([math.fsum(R[:, d]) / M for d in range(R.shape[1])])


def decide_from_risk_draws(R: np.ndarray, rule_name: str, tie_rule: TieRule = LOWEST_INDEX,
                           order=None) -> DecisionReport:
    """Average a per-draw risk matrix and pick the minimizing choice."""
    R = np.asarray(R, dtype=float)
    _check_finite(R, "")
    avg = average_risks(R)
    chosen, tie = select(avg, tie_rule, order)
    return DecisionReport(chosen, avg, tie, rule_name, tie_rule.describe(), {"draw_count": int(R.shape[0])})


def averaged_decision(profile: RiskProfile, draws: DrawSet,
                      tie_rule: TieRule = LOWEST_INDEX) -> DecisionReport:
    R = profile.risks(draws.draws)
    return decide_from_risk_draws(R, _RULE_NAMES[draws.source_tag], tie_rule, profile.tie_order)


def excess_risk(profile: RiskProfile, chosen: int, P) -> float:
    """``R(chosen, P) - min_d R(d, P)``; zero for the oracle choice."""
    R = profile.risks(np.asarray(P, dtype=float))
    _check_finite(R, "")
    return float(R[chosen] - R.min())
