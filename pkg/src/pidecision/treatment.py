"""Treatment assignment with intersection bounds on the target ATE.

Each study ``k`` bounds the target effect by ``P_k +/- C * ||x0 - x_k||``;
intersecting those intervals gives the identified set. Choice 0 is "do not
treat" and choice 1 is "treat"; ties go to treatment.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .core import (
    LOWEST_INDEX,
    ChoiceSet,
    DecisionError,
    DecisionReport,
    DrawSet,
    RiskProfile,
    TieRule,
    decide_from_risk_draws,
)
from .posterior import GaussianQuasiPosterior

SQRT2 = math.sqrt(2.0)
TREATMENT_CHOICES = ChoiceSet(2, ("no-treat", "treat"))
QUAD_ABS_TOL = 1e-9


class EmptyIdentifiedSetError(DecisionError):
    """The intersected bounds cross: no ATE is consistent with all studies."""

    def __init__(self, message, lower_study=None, upper_study=None, gap=None, draw=None):
        super().__init__(message)
        self.lower_study = lower_study
        self.upper_study = upper_study
        self.gap = gap
        self.draw = draw


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Study:
    estimate: float
    se: float
    covariates: tuple
    id: str = ""


@dataclass(frozen=True)
class StudyPanel:
    studies: tuple
    target_covariates: np.ndarray
    lipschitz_C: float
    norm_weights: np.ndarray | None = None

    def __post_init__(self):
        studies = tuple(self.studies)
        if not studies:
            raise ValueError("a study panel needs at least one study")
        target = np.atleast_1d(np.asarray(self.target_covariates, dtype=float))
        for k, s in enumerate(studies):
            if len(s.covariates) != target.size:
                raise ValueError(
                    f"study {s.id or k} has {len(s.covariates)} covariates, target has {target.size}"
                )
            if not s.se > 0:
                raise ValueError(f"study {s.id or k} needs a positive standard error")
        if self.lipschitz_C < 0:
            raise ValueError("the Lipschitz constant must be nonnegative")
        w = None
        if self.norm_weights is not None:
            w = np.asarray(self.norm_weights, dtype=float)
            if w.shape != target.shape or (w < 0).any():
                raise ValueError("norm_weights must be nonnegative, one per covariate")
        object.__setattr__(self, "studies", studies)
        object.__setattr__(self, "target_covariates", target)
        object.__setattr__(self, "norm_weights", w)

    @property
    def K(self):
        return len(self.studies)

    @property
    def ids(self):
        return [s.id or f"study-{k}" for k, s in enumerate(self.studies)]

    @property
    def estimates(self):
        return np.array([s.estimate for s in self.studies])

    @property
    def standard_errors(self):
        return np.array([s.se for s in self.studies])

    def distances(self):
        """Weighted Euclidean distance from each study to the target."""
        X = np.array([s.covariates for s in self.studies], dtype=float)
        diff = X - self.target_covariates
        if self.norm_weights is not None:
            diff = diff * np.sqrt(self.norm_weights)
        return np.sqrt((diff**2).sum(axis=1))

    def quasi_posterior(self, draw_count=10_000, seed=0):
        """``N(P_hat, diag(se^2))`` quasi-posterior for the study effects."""
        return GaussianQuasiPosterior(self.estimates, np.diag(self.standard_errors**2), draw_count, seed)


_PANEL_KEYS = {"C", "target", "studies", "norm_weights"}
_STUDY_KEYS = {"id", "estimate", "se", "covariates"}


def load_panel(source) -> StudyPanel:
    """Build a panel from a JSON document (path, string, or parsed dict)."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ValueError("panel document must be a JSON object")
    unknown = set(doc) - _PANEL_KEYS
    if unknown:
        raise ValueError(f"unknown panel fields: {sorted(unknown)}")
    missing = {"C", "target", "studies"} - set(doc)
    if missing:
        raise ValueError(f"missing panel fields: {sorted(missing)}")
    studies = []
    for k, rec in enumerate(doc["studies"]):
        if not isinstance(rec, dict):
            raise ValueError(f"study {k} must be an object")
        unknown = set(rec) - _STUDY_KEYS
        if unknown:
            raise ValueError(f"study {k}: unknown fields {sorted(unknown)}")
        missing = {"estimate", "se", "covariates"} - set(rec)
        if missing:
            raise ValueError(f"study {k}: missing fields {sorted(missing)}")
        studies.append(Study(float(rec["estimate"]), float(rec["se"]),
                             tuple(float(v) for v in rec["covariates"]), str(rec.get("id", ""))))
    return StudyPanel(tuple(studies), doc["target"], float(doc["C"]), doc.get("norm_weights"))


@dataclass(frozen=True)
class AteBounds:
    lower: float
    upper: float


def bounds_array(panel: StudyPanel, P):
    """Vectorized intersection bounds for ``P`` of shape ``(..., K)``.

    Returns ``(lower, upper, argmax_study, argmin_study)``; emptiness is not
    checked here.
    """
    P = np.asarray(P, dtype=float)
    if P.shape[-1] != panel.K:
        raise ValueError(f"P must have {panel.K} components, got {P.shape[-1]}")
    spread = panel.lipschitz_C * panel.distances()
    lo = P - spread
    hi = P + spread
    return lo.max(axis=-1), hi.min(axis=-1), lo.argmax(axis=-1), hi.argmin(axis=-1)


def _empty_error(panel, lower, upper, i_lo, i_hi, draw=None):
    ids = panel.ids
    where = "" if draw is None else f" at draw {draw}"
    return EmptyIdentifiedSetError(
        f"empty identified set{where}: lower bound {lower:.6g} from {ids[i_lo]} exceeds "
        f"upper bound {upper:.6g} from {ids[i_hi]} by {lower - upper:.6g}",
        ids[i_lo], ids[i_hi], float(lower - upper), draw,
    )


def intersection_bounds(panel: StudyPanel, P) -> AteBounds:
    lo, hi, i_lo, i_hi = bounds_array(panel, np.asarray(P, dtype=float))
    if lo > hi:
        raise _empty_error(panel, float(lo), float(hi), int(i_lo), int(i_hi))
    return AteBounds(float(lo), float(hi))


def robust_welfare_contrast(bounds: AteBounds) -> float:
    return max(bounds.upper, 0.0) + min(bounds.lower, 0.0)


def treatment_risks(bounds: AteBounds):
    """Maximum regret of (no-treat, treat) over ``[lower, upper]``."""
    return max(bounds.upper, 0.0), -min(bounds.lower, 0.0)


def _risks_from_bounds(lo, hi):
    return np.stack([np.maximum(hi, 0.0), -np.minimum(lo, 0.0)], axis=-1)


def treatment_profile(panel: StudyPanel) -> RiskProfile:
    def fn(P):
        lo, hi, i_lo, i_hi = bounds_array(panel, P)
        bad = np.flatnonzero(np.atleast_1d(lo > hi))
        if bad.size:
            m = int(bad[0])
            raise _empty_error(panel, float(np.atleast_1d(lo)[m]), float(np.atleast_1d(hi)[m]),
                               int(np.atleast_1d(i_lo)[m]), int(np.atleast_1d(i_hi)[m]),
                               draw=m if np.ndim(lo) else None)
        return _risks_from_bounds(lo, hi)

    return RiskProfile(TREATMENT_CHOICES, fn, "intersection-bounds regret", tie_order=(1, 0))


def stylized_profile() -> RiskProfile:
    """Three-parameter example: lower bound ``P1 v P2``, upper bound ``P3``."""

    def fn(P):
        P = np.asarray(P, dtype=float)
        return _risks_from_bounds(np.maximum(P[..., 0], P[..., 1]), P[..., 2])

    return RiskProfile(TREATMENT_CHOICES, fn, "stylized max-bound regret", tie_order=(1, 0))


def treat_rule(panel: StudyPanel, draws: DrawSet, tie_rule: TieRule = LOWEST_INDEX) -> DecisionReport:
    """Treat iff the draw-average of the robust welfare contrast is >= 0."""
    if draws.dim != panel.K:
        raise ValueError(f"draws have dimension {draws.dim}, panel has {panel.K} studies")
    lo, hi, i_lo, i_hi = bounds_array(panel, draws.draws)
    bad = np.flatnonzero(lo > hi)
    if bad.size:
        m = int(bad[0])
        raise _empty_error(panel, lo[m], hi[m], int(i_lo[m]), int(i_hi[m]), draw=m)
    R = _risks_from_bounds(lo, hi)
    rep = decide_from_risk_draws(R, {"bootstrap": "bootstrap"}.get(draws.source_tag, "quasi-bayes"),
                                 tie_rule, order=(1, 0))
    contrast = np.maximum(hi, 0.0) + np.minimum(lo, 0.0)
    M = len(draws)
    ids = panel.ids
    lower_share = np.bincount(i_lo, minlength=panel.K) / M
    upper_share = np.bincount(i_hi, minlength=panel.K) / M
    rep.details.update({
        "mean_contrast": math.fsum(contrast) / M,
        "contrast_se": float(contrast.std(ddof=1) / math.sqrt(M)) if M > 1 else 0.0,
        "lower_bound_share": {ids[k]: float(lower_share[k]) for k in range(panel.K) if lower_share[k]},
        "upper_bound_share": {ids[k]: float(upper_share[k]) for k in range(panel.K) if upper_share[k]},
    })
    return rep


def contrast_draws(panel: StudyPanel, draws: DrawSet) -> np.ndarray:
    lo, hi, _, _ = bounds_array(panel, draws.draws)
    return np.maximum(hi, 0.0) + np.minimum(lo, 0.0)


# closed forms for Gaussian posteriors N(center, 1/n)

def posterior_mean_positive_part(center: float, n: float) -> float:
    """``E[(P)_+]`` for ``P ~ N(center, 1/n)``."""
    if not n > 0:
        raise ValueError("n must be positive")
    rn = math.sqrt(n)
    return center * norm.cdf(rn * center) + norm.pdf(rn * center) / rn


def _t3_integral(a, delta):
    """``Pr(Y - delta <= X <= a)`` for independent standard normals, by quadrature
    of ``Phi(x + delta) * phi(x)`` over ``x <= a``."""
    hi = min(a, 40.0)
    if hi <= -40.0:
        return 0.0
    pts = [p for p in (-delta,) if -40.0 < p < hi]
    val, err = integrate.quad(lambda x: norm.cdf(x + delta) * norm.pdf(x), -40.0, hi,
                              points=pts or None, epsabs=1e-13, epsrel=1e-11, limit=200)
    if err > QUAD_ABS_TOL:
        raise QuadratureError(f"quadrature did not converge: error estimate {err:.3g}")
    return val


def max_negative_part_terms(c1: float, c2: float, n: float):
    """The four terms whose sum is ``E[(P1 v P2)_-]`` under independent
    ``N(c1, 1/n)``, ``N(c2, 1/n)``."""
    if not n > 0:
        raise ValueError("n must be positive")
    rn = math.sqrt(n)

    def t_closed(a, b):
        return (-norm.pdf(rn * a) * norm.cdf(-rn * b) / rn
                + norm.pdf(rn * (a - b) / SQRT2) * norm.cdf(-rn * (a + b) / SQRT2) / (SQRT2 * rn))

    t1 = t_closed(c1, c2)
    t2 = t_closed(c2, c1)
    t3 = c1 * _t3_integral(-rn * c1, rn * (c1 - c2))
    t4 = c2 * _t3_integral(-rn * c2, rn * (c2 - c1))
    return t1, t2, t3, t4


def posterior_mean_max_negative_part(c1: float, c2: float, n: float) -> float:
    return math.fsum(max_negative_part_terms(c1, c2, n))


def stylized_posterior_contrast(phat, n: float) -> float:
    """Posterior mean of the stylized contrast ``(P1 v P2)_- + (P3)_+`` under
    ``N(phat, I/n)``."""
    p1, p2, p3 = (float(v) for v in phat)
    return posterior_mean_max_negative_part(p1, p2, n) + posterior_mean_positive_part(p3, n)


def expected_max_gaussian(z1, z2):
    """``E[(Z1* + z1) v (Z2* + z2)]`` for independent standard normal ``Z*``."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    d = np.abs(z1 - z2) / SQRT2
    # max + sqrt2 * (phi(d) - d * Phi(-d)), the nonnegative Jensen gap
    gap = SQRT2 * np.maximum(norm.pdf(d) - d * norm.sf(d), 0.0)
    out = np.maximum(z1, z2) + gap
    return float(out) if out.ndim == 0 else out


def asymptotic_representations(z):
    """Limit decisions ``(plug, optimal)`` for local statistics ``z = (z1, z2, z3)``."""
    z = np.asarray(z, dtype=float)
    plug = (np.maximum(z[..., 0], z[..., 1]) + z[..., 2] >= 0).astype(int)
    optimal = (expected_max_gaussian(z[..., 0], z[..., 1]) + z[..., 2] >= 0).astype(int)
    if z.ndim == 1:
        return int(plug), int(optimal)
    return plug, optimal
