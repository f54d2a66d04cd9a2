"""Revealed-preference bounds on counterfactual demand and the pricing choice.

Two goods, expenditure normalized to one: budget ``b`` is the line
``q_b . x = 1`` in the positive quadrant. Each line is cut into patches by
its crossings with the other lines; a consumer type picks one patch per
budget, and a type is rational when its choices admit no strict revealed
preference cycle.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    LOWEST_INDEX,
    ChoiceSet,
    DecisionError,
    DecisionReport,
    DrawSet,
    TieRule,
    decide_from_risk_draws,
)
from .lp import LinearProgram, solve

GEOM_TOL = 1e-12
PROB_TOL = 1e-12


class GeometryError(ValueError):
    pass


class NotRationalizableError(DecisionError):
    def __init__(self, message, draw=None, diagnostics=None):
        super().__init__(message)
        self.draw = draw
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class BudgetSet:
    prices: tuple
    label: str = "observed"

    def __post_init__(self):
        q = tuple(float(v) for v in self.prices)
        if len(q) != 2:
            raise ValueError("only two-good budgets are supported")
        if min(q) <= 0:
            raise ValueError(f"prices must be positive, got {q}")
        if self.label not in ("observed", "counterfactual"):
            raise ValueError(f"label must be 'observed' or 'counterfactual', got {self.label!r}")
        object.__setattr__(self, "prices", q)

    @property
    def max_good1(self):
        return 1.0 / self.prices[0]

    def point(self, x1):
        return np.array([x1, (1.0 - self.prices[0] * x1) / self.prices[1]])

    def cost(self, x):
        return self.prices[0] * x[0] + self.prices[1] * x[1]


@dataclass(frozen=True)
class Patch:
    budget: int
    index: int
    lo: float  # good-1 quantity at the patch ends
    hi: float

    @property
    def name(self):
        return f"s{self.index + 1},{self.budget}"


@dataclass(frozen=True)
class PatchModel:
    budgets: tuple
    patches: tuple  # per budget, ordered by good-1 quantity
    inside: dict  # (budget, patch) -> frozenset of budgets whose interior contains the patch
    types: tuple = ()
    type_matrix_A: np.ndarray | None = None
    types_star: dict = field(default_factory=dict)
    type_matrix_Astar: dict = field(default_factory=dict)

    @property
    def observed(self):
        return [b for b, B in enumerate(self.budgets) if B.label == "observed"]

    @property
    def counterfactual(self):
        return [b for b, B in enumerate(self.budgets) if B.label == "counterfactual"]

    def n_patches(self, b):
        return len(self.patches[b])

    def row_labels(self, budgets):
        return [p.name for b in budgets for p in self.patches[b]]

    def observed_slices(self):
        """Slice of each observed budget's block in the stacked probability vector."""
        out, start = {}, 0
        for b in self.observed:
            out[b] = slice(start, start + self.n_patches(b))
            start += self.n_patches(b)
        return out

    def astar(self, d=None):
        if d is None:
            if len(self.type_matrix_Astar) != 1:
                raise ValueError("specify which counterfactual budget")
            d = next(iter(self.type_matrix_Astar))
        return self.type_matrix_Astar[d]

    @classmethod
    def from_budgets(cls, budgets):
        return enumerate_types(build_patches(budgets))


def _crossing(B1: BudgetSet, B2: BudgetSet):
    (a1, b1), (a2, b2) = B1.prices, B2.prices
    det = a1 * b2 - b1 * a2
    scale = max(abs(a1 * b2), abs(b1 * a2))
    if abs(det) <= GEOM_TOL * scale:
        if max(abs(a1 - a2), abs(b1 - b2)) <= GEOM_TOL * max(a1, b1, a2, b2):
            raise GeometryError(f"coincident budgets with prices {B1.prices}")
        return None
    x = (b2 - b1) / det
    y = (a1 - a2) / det
    if x <= GEOM_TOL * B1.max_good1 or y <= GEOM_TOL / b1:
        return None
    return x


def build_patches(budgets) -> PatchModel:
    """Cut every budget line at its interior crossings with the others."""
    budgets = tuple(B if isinstance(B, BudgetSet) else BudgetSet(*B) for B in budgets)
    if len(budgets) < 1:
        raise ValueError("need at least one budget")
    patches, inside = [], {}
    for b, B in enumerate(budgets):
        cuts = []
        for b2, B2 in enumerate(budgets):
            if b2 != b:
                x = _crossing(B, B2)
                if x is not None:
                    cuts.append(x)
        cuts.sort()
        merged = []
        for x in cuts:
            if not merged or x - merged[-1] > GEOM_TOL * B.max_good1:
                merged.append(x)
        ends = [0.0, *merged, B.max_good1]
        row = tuple(Patch(b, j, ends[j], ends[j + 1]) for j in range(len(ends) - 1))
        patches.append(row)
        for p in row:
            mid = B.point(0.5 * (p.lo + p.hi))
            inside[(b, p.index)] = frozenset(
                b2 for b2, B2 in enumerate(budgets) if b2 != b and B2.cost(mid) < 1.0
            )
    return PatchModel(budgets, tuple(patches), inside)


def _has_cycle(edges, nodes):
    state = {}

    def visit(u):
        state[u] = 1
        for v in edges.get(u, ()):
            s = state.get(v, 0)
            if s == 1 or (s == 0 and visit(v)):
                return True
        state[u] = 2
        return False

    return any(state.get(u, 0) == 0 and visit(u) for u in nodes)


def rational_types(pm: PatchModel, budgets):
    """All acyclic patch selections over ``budgets``, in lexicographic order."""
    budgets = list(budgets)
    out = []

    def extend(prefix):
        k = len(prefix)
        if k == len(budgets):
            out.append(tuple(prefix))
            return
        b = budgets[k]
        for s in range(pm.n_patches(b)):
            chosen = prefix + [s]
            # x_u is strictly revealed preferred to x_v when x_v lies inside budget u
            edges = {}
            for i, u in enumerate(budgets[: k + 1]):
                for j, v in enumerate(budgets[: k + 1]):
                    if i != j and u in pm.inside[(v, chosen[j])]:
                        edges.setdefault(u, []).append(v)
            if not _has_cycle(edges, budgets[: k + 1]):
                extend(chosen)

    extend([])
    return out


def type_matrix(pm: PatchModel, budgets, types):
    offsets, start = {}, 0
    for b in budgets:
        offsets[b] = start
        start += pm.n_patches(b)
    M = np.zeros((start, len(types)))
    for t, typ in enumerate(types):
        for b, s in zip(budgets, typ):
            M[offsets[b] + s, t] = 1.0
    return M


def enumerate_types(pm: PatchModel) -> PatchModel:
    """Fill in the rational types and the matrices ``A`` and ``A*``.

    ``A`` covers the observed budgets; ``A*[d]`` appends the patches of
    counterfactual budget ``d`` as its last rows.
    """
    obs = pm.observed
    types = rational_types(pm, obs)
    A = type_matrix(pm, obs, types)
    types_star, astar = {}, {}
    for d in pm.counterfactual:
        ts = rational_types(pm, obs + [d])
        types_star[d] = tuple(ts)
        astar[d] = type_matrix(pm, obs + [d], ts)
    return replace(pm, types=tuple(types), type_matrix_A=A, types_star=types_star, type_matrix_Astar=astar)


@dataclass(frozen=True)
class DemandData:
    """Patch choice probabilities on each observed budget, stacked in budget order."""

    probabilities: tuple  # one array per observed budget

    def __post_init__(self):
        blocks = tuple(np.asarray(p, dtype=float) for p in self.probabilities)
        for b, p in enumerate(blocks):
            if (p < -PROB_TOL).any() or abs(p.sum() - 1.0) > PROB_TOL * max(1, p.size):
                raise ValueError(f"budget block {b} is not a probability vector (sum {p.sum():.15g})")
        object.__setattr__(self, "probabilities", blocks)

    @classmethod
    def from_counts(cls, counts):
        blocks = []
        for c in counts:
            c = np.asarray(c, dtype=float)
            if (c < 0).any() or c.sum() <= 0:
                raise ValueError("patch counts must be nonnegative with a positive total")
            blocks.append(c / c.sum())
        return cls(tuple(blocks))

    @property
    def p(self):
        return np.concatenate(self.probabilities)


@dataclass(frozen=True)
class Functional:
    """Smallest and largest value of the demand functional on each
    counterfactual patch."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper envelopes must be vectors of equal length")
        if (lo > hi).any():
            raise ValueError("lower envelope exceeds upper envelope")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class Rationalizability:
    feasible: bool
    witness: np.ndarray | None
    residual: float


def _as_p(pm: PatchModel, data):
    p = data.p if isinstance(data, DemandData) else np.asarray(data, dtype=float)
    expected = pm.type_matrix_A.shape[0]
    if p.shape != (expected,):
        raise ValueError(f"probability vector has length {p.size}, the patch model has {expected} observed patches")
    return p


def _block_sums(pm, p):
    return {str(b): float(p[sl].sum()) for b, sl in pm.observed_slices().items()}


def rationalizability_test(pm: PatchModel, data) -> Rationalizability:
    """Is ``p = A pi`` for some mixture ``pi`` over rational types?"""
    if pm.type_matrix_A is None:
        pm = enumerate_types(pm)
    p = _as_p(pm, data)
    A = pm.type_matrix_A
    T = A.shape[1]
    lp = LinearProgram(np.zeros(T), np.vstack([A, np.ones((1, T))]), np.append(p, 1.0))
    sol = solve(lp)
    if not sol.optimal:
        return Rationalizability(False, None, float("nan"))
    return Rationalizability(True, sol.point, float(np.abs(A @ sol.point - p).max()))


def _bound_lps(pm: PatchModel, f: Functional, d: int):
    if d not in pm.type_matrix_Astar:
        raise ValueError(f"budget {d} is not a counterfactual budget")
    Astar = pm.type_matrix_Astar[d]
    nobs = pm.type_matrix_A.shape[0]
    obs, unobs = Astar[:nobs], Astar[nobs:]
    if f.lower.size != unobs.shape[0]:
        raise ValueError(f"functional has {f.lower.size} values, budget {d} has {unobs.shape[0]} patches")
    T = Astar.shape[1]
    eq = np.vstack([obs, np.ones((1, T))])
    return eq, f.lower @ unobs, f.upper @ unobs


def demand_bounds(pm: PatchModel, data, f: Functional, d: int, backend=None):
    """Sharp bounds ``(hL, hU)`` on the mean functional under budget ``d``."""
    p = _as_p(pm, data)
    eq, c_lo, c_hi = _bound_lps(pm, f, d)
    rhs = np.append(p, 1.0)
    lo = solve(LinearProgram(c_lo, eq, rhs, "min"), backend=backend)
    if not lo.optimal:
        raise NotRationalizableError(
            f"patch probabilities are not rationalizable ({lo.status})",
            diagnostics={"block_sums": _block_sums(pm, p)},
        )
    hi = solve(LinearProgram(c_hi, eq, rhs, "max"), backend=backend)
    return lo.value, hi.value


@dataclass(frozen=True)
class PricingProblem:
    """Everything needed to price: geometry, per-budget counts, functionals
    for counterfactual budgets and per-patch values for observed ones."""

    model: PatchModel
    counts: dict  # observed budget -> patch counts
    functionals: dict  # counterfactual budget -> Functional
    observed_values: dict  # observed budget -> per-patch values
    prior_alpha: float = 1.0

    def choice_budgets(self):
        return sorted(self.observed_values) + sorted(self.functionals)

    def mle(self):
        return DemandData.from_counts([self.counts[b] for b in self.model.observed])


def pricing_risk_draws(problem: PricingProblem, draws: np.ndarray, with_upper=False, backend=None):
    """Per-draw maximum risks, shape ``(M, D+1)``, plus LP bound traces."""
    pm = problem.model
    slices = pm.observed_slices()
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    nobs = pm.type_matrix_A.shape[0]
    if draws.shape[1] != nobs:
        raise ValueError(f"draws have {draws.shape[1]} components, expected {nobs}")
    lps = {d: _bound_lps(pm, f, d) for d, f in problem.functionals.items()}
    obs_choices = sorted(problem.observed_values)
    cf_choices = sorted(problem.functionals)
    R = np.empty((draws.shape[0], len(obs_choices) + len(cf_choices)))
    traces = []
    for m, p in enumerate(draws):
        for j, b in enumerate(obs_choices):
            R[m, j] = -float(np.dot(problem.observed_values[b], p[slices[b]]))
        rhs = np.append(p, 1.0)
        for j, d in enumerate(cf_choices):
            eq, c_lo, c_hi = lps[d]
            sol = solve(LinearProgram(c_lo, eq, rhs, "min"), backend=backend)
            if not sol.optimal:
                raise NotRationalizableError(
                    f"draw {m} is not rationalizable: {_block_sums(pm, p)}",
                    draw=m,
                    diagnostics={"block_sums": _block_sums(pm, p),
                                 "blocks": {str(b): p[sl].tolist() for b, sl in slices.items()}},
                )
            R[m, len(obs_choices) + j] = -sol.value
            hU = float("nan")
            if with_upper:
                hU = solve(LinearProgram(c_hi, eq, rhs, "max"), backend=backend).value
            traces.append((m, d, sol.value, hU))
    return R, traces


def pricing_rule(problem: PricingProblem, draws: DrawSet, tie_rule: TieRule = LOWEST_INDEX,
                 rule_name=None, with_upper=False) -> DecisionReport:
    """Pick the price (budget) with the smallest draw-averaged maximum risk."""
    R, traces = pricing_risk_draws(problem, draws.draws, with_upper)
    name = rule_name or {"dirichlet": "bayes-dirichlet", "bootstrap": "bootstrap"}.get(
        draws.source_tag, "quasi-bayes")
    rep = decide_from_risk_draws(R, name, tie_rule)
    budgets = problem.choice_budgets()
    rep.details.update({
        "choice_budgets": budgets,
        "chosen_budget": budgets[rep.chosen],
        "chosen_prices": list(problem.model.budgets[budgets[rep.chosen]].prices),
        "traces": traces,
    })
    return rep


def pricing_plugin(problem: PricingProblem, p, tie_rule: TieRule = LOWEST_INDEX) -> DecisionReport:
    return pricing_rule(problem, DrawSet(np.atleast_2d(p), "posterior"), tie_rule, rule_name="plug-in")


_DEMAND_KEYS = {"budgets", "choices", "functional", "observed_values", "prior_alpha"}


def load_demand(source) -> PricingProblem:
    """Parse the demand-data JSON document into a :class:`PricingProblem`."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ValueError("demand document must be a JSON object")
    unknown = set(doc) - _DEMAND_KEYS
    if unknown:
        raise ValueError(f"unknown demand fields: {sorted(unknown)}")
    for key in ("budgets", "choices"):
        if key not in doc:
            raise ValueError(f"missing demand field {key!r}")
    budgets = [BudgetSet(tuple(b["prices"]), b.get("label", "observed")) for b in doc["budgets"]]
    pm = PatchModel.from_budgets(budgets)
    counts = {}
    for rec in doc["choices"]:
        b = int(rec["budget"])
        if b not in pm.observed:
            raise ValueError(f"choices refer to budget {b}, which is not observed")
        c = np.asarray(rec["patch_counts"], dtype=float)
        if c.size != pm.n_patches(b):
            raise ValueError(f"budget {b} has {pm.n_patches(b)} patches, got {c.size} counts")
        counts[b] = c
    if set(counts) != set(pm.observed):
        raise ValueError(f"patch counts needed for every observed budget {pm.observed}")
    fdocs = doc.get("functional", [])
    fdocs = [fdocs] if isinstance(fdocs, dict) else fdocs
    functionals = {int(f["d"]): Functional(f["lower"], f["upper"]) for f in fdocs}
    for d in functionals:
        if d not in pm.counterfactual:
            raise ValueError(f"functional refers to budget {d}, which is not counterfactual")
    observed_values = {}
    for rec in doc.get("observed_values", []):
        b = int(rec["budget"])
        if b not in pm.observed:
            raise ValueError(f"observed value for budget {b}, which is not observed")
        v = np.broadcast_to(np.asarray(rec["patch_values"], dtype=float), (pm.n_patches(b),)).copy()
        observed_values[b] = v
    if len(observed_values) + len(functionals) < 2:
        raise ValueError("need at least two candidate prices (observed values or functionals)")
    return PricingProblem(pm, counts, functionals, observed_values, float(doc.get("prior_alpha", 1.0)))


def choice_set(problem: PricingProblem) -> ChoiceSet:
    return ChoiceSet(len(problem.choice_budgets()), tuple(f"budget-{b}" for b in problem.choice_budgets()))


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("annotations", "math")]
