"""``pidecision`` command line: treat, price, evaluate, reproduce.

Exit codes: 0 success, 1 input error, 2 domain error (empty identified set,
non-rationalizable data), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mclab
from .core import DecisionError, RiskProfile
from .lp import LpError
from .posterior import (
    FactorizationError, MultinomialPosterior, PosteriorError, sample_dirichlet, sample_gaussian,
)
from .pricing import (
    NotRationalizableError, load_demand, pricing_plugin, pricing_rule, rationalizability_test,
)
from .treatment import (
    QuadratureError, bounds_array, contrast_draws, intersection_bounds, load_panel, robust_welfare_contrast,
    stylized_profile, treat_rule, treatment_profile,
)

log = logging.getLogger("pidecision")

OUT_ENV = "PIDECISION_OUT"
EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3
HIST_BINS = 50


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    input_path: Path | None
    output_dir: Path
    seed: int | None
    draw_count: int | None
    overrides: dict = field(default_factory=dict)
    workers: int | None = None


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x):
    return float(x)


def _read_json(path):
    if path is None:
        raise InputError("--input is required")
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"input file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def cmd_treat(cfg: RunConfig) -> int:
    doc = _read_json(cfg.input_path)
    if "C" in cfg.overrides:
        if isinstance(doc, dict):
            doc["C"] = cfg.overrides["C"]
    try:
        panel = load_panel(doc)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"invalid study panel: {exc}") from None
    est = panel.estimates
    bounds = intersection_bounds(panel, est)
    b_hat = robust_welfare_contrast(bounds)
    draws = sample_gaussian(panel.quasi_posterior(cfg.draw_count or 10_000, cfg.seed), cfg.workers)
    rep = treat_rule(panel, draws)
    _, _, i_lo, i_hi = bounds_array(panel, est)
    plug_choice = int(b_hat >= 0)
    names = ("no-treat", "treat")
    lower_share = rep.details["lower_bound_share"]
    upper_share = rep.details["upper_bound_share"]
    report = {
        "panel": {"K": panel.K, "C": panel.lipschitz_C, "ids": list(panel.ids)},
        "seed": cfg.seed,
        "draw_count": len(draws),
        "plug_in": {"contrast": _f(b_hat), "chosen": plug_choice, "decision": names[plug_choice]},
        "optimal": {
            "mean_contrast": _f(rep.details["mean_contrast"]),
            "mean_contrast_se": _f(rep.details["contrast_se"]),
            "chosen": rep.chosen,
            "decision": names[rep.chosen],
            "averaged_risks": [_f(r) for r in rep.averaged_risks],
            "tie_flag": rep.tie_flag,
            "tie_rule": rep.tie_rule,
        },
        "disagree": plug_choice != rep.chosen,
        "bounds_at_estimate": {
            "lower": _f(bounds.lower), "upper": _f(bounds.upper),
            "lower_study": panel.ids[int(i_lo)], "upper_study": panel.ids[int(i_hi)],
        },
        "attribution": [
            {"id": sid, "lower_share": lower_share.get(sid, 0.0), "upper_share": upper_share.get(sid, 0.0)}
            for sid in panel.ids
        ],
    }
    b = contrast_draws(panel, draws)
    counts, edges = np.histogram(b, bins=HIST_BINS)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.output_dir / "treat_report.json", report)
    _write_csv(cfg.output_dir / "contrast_histogram.csv", ["bin_left", "bin_right", "count", "density"],
               [[repr(_f(edges[i])), repr(_f(edges[i + 1])), int(counts[i]),
                 repr(_f(counts[i] / (b.size * (edges[i + 1] - edges[i]))))] for i in range(counts.size)])
    log.info("plug-in %s, optimal %s", names[plug_choice], names[rep.chosen])
    return EXIT_OK


def cmd_price(cfg: RunConfig) -> int:
    doc = _read_json(cfg.input_path)
    try:
        problem = load_demand(doc)
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, DecisionError):
            raise
        raise InputError(f"invalid demand data: {exc}") from None
    pm = problem.model
    mle = problem.mle()
    rat = rationalizability_test(pm, mle)
    if not rat.feasible:
        raise NotRationalizableError(
            "observed patch shares are not rationalizable at the MLE: "
            + json.dumps({str(b): [float(v) for v in blk] for b, blk in zip(pm.observed, mle.probabilities)})
        )
    post = [MultinomialPosterior(problem.counts[b], problem.prior_alpha) for b in pm.observed]
    draws = sample_dirichlet(post, cfg.draw_count or 10_000, cfg.seed, cfg.workers)
    rep = pricing_rule(problem, draws, with_upper=True)
    plug = pricing_plugin(problem, mle.p)
    budgets = problem.choice_budgets()
    report = {
        "seed": cfg.seed,
        "draw_count": len(draws),
        "choice_budgets": budgets,
        "prices": [list(pm.budgets[b].prices) for b in budgets],
        "averaged_risks": [_f(r) for r in rep.averaged_risks],
        "chosen": rep.chosen,
        "chosen_budget": rep.details["chosen_budget"],
        "chosen_prices": rep.details["chosen_prices"],
        "tie_flag": rep.tie_flag,
        "plug_in": {"risks": [_f(r) for r in plug.averaged_risks], "chosen": plug.chosen,
                    "chosen_budget": plug.details["chosen_budget"]},
        "mle_witness": [_f(v) for v in rat.witness],
        "types": {"observed": len(pm.types), **{str(d): len(t) for d, t in pm.types_star.items()}},
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.output_dir / "price_report.json", report)
    _write_csv(cfg.output_dir / "lp_traces.csv", ["draw", "budget", "h_lower", "h_upper"],
               [[m, d, repr(_f(lo)), repr(_f(hi))] for m, d, lo, hi in rep.details["traces"]])
    return EXIT_OK


_CONFIG_KEYS = {"family", "P0", "info_matrix", "n", "seed", "profile", "panel", "rules", "reps",
                "inner_draws", "grid", "n_doubling"}


def _experiment_profile(doc) -> RiskProfile:
    kind = doc.get("profile", "stylized")
    if kind == "stylized":
        return stylized_profile()
    if kind == "treatment":
        return treatment_profile(load_panel(doc["panel"]))
    raise InputError(f"unknown profile {kind!r}")


def _experiment_rules(doc, profile, seed, inner):
    factories = {
        "plug-in": lambda: mclab.plugin_rule(profile),
        "bayes": lambda: mclab.bayes_rule(profile, inner, seed),
        "bootstrap": lambda: mclab.bootstrap_rule(profile, inner, seed),
        "oracle": lambda: mclab.oracle_rule(profile),
    }
    rules = []
    for name in doc.get("rules", ["plug-in", "bayes"]):
        if name not in factories:
            raise InputError(f"unknown rule {name!r}; choose from {sorted(factories)}")
        rules.append(factories[name]())
    return rules


def cmd_evaluate(cfg: RunConfig) -> int:
    doc = _read_json(cfg.input_path)
    if not isinstance(doc, dict):
        raise InputError("experiment config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise InputError(f"unknown experiment fields: {sorted(unknown)}")
    ov = cfg.overrides
    seed = cfg.seed if cfg.seed is not None else int(doc.get("seed", 0))
    try:
        dgp = mclab.DgpSpec(doc.get("family", "gaussian-mean"), doc["P0"], doc.get("info_matrix"),
                            ov.get("n", doc.get("n", 400)), seed)
        profile = _experiment_profile(doc)
        gdoc = doc.get("grid", {})
        half = ov.get("grid_half_width", gdoc.get("half_width", mclab.GRID_HALF_WIDTH))
        points = ov.get("grid_points", gdoc.get("points", mclab.GRID_POINTS))
        basis = gdoc.get("basis", np.eye(dgp.K).tolist())
        grid = mclab.HGrid.subspace(basis, half, points)
        grid.weights()
        inner = cfg.draw_count or doc.get("inner_draws", mclab.INNER_DRAWS)
        rules = _experiment_rules(doc, profile, seed, inner)
        reps = int(doc.get("reps", 4000))
    except KeyError as exc:
        raise InputError(f"missing experiment field {exc}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    curves = mclab.excess_risk_profile(dgp, rules, profile, grid, reps, keep_samples=len(rules) > 1,
                                       workers=cfg.workers)
    summary = {"n": dgp.n, "seed": seed, "reps": reps, "grid_points": len(grid), "rules": {}}
    for name, c in curves.items():
        a = mclab.average_excess_risk(c)
        summary["rules"][name] = {"average_excess": a.value, "se": a.se}
    if len(rules) > 1:
        base = rules[0].name
        summary["paired_vs_" + base] = {
            r.name: vars(mclab.paired_difference(curves[base], curves[r.name])) for r in rules[1:]
        }
    if doc.get("n_doubling"):
        nd = mclab.n_doubling(dgp, rules, profile, grid, reps, cfg.workers)
        summary["n_doubling"] = {str(n): {k: vars(v) for k, v in res.items()} for n, res in nd.items()}
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.output_dir / "risk_curves.csv", "w", newline="") as fh:
        mclab.curves_to_csv(curves.values(), fh)
    _write_json(cfg.output_dir / "summary.json", summary)
    _write_csv(cfg.output_dir / "summary.csv", ["rule", "average_excess", "se"],
               [[k, repr(v["average_excess"]), repr(v["se"])] for k, v in summary["rules"].items()])
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig) -> int:
    from .checks import run_checks

    results = run_checks(cfg.overrides.get("only"))
    for r in results:
        print(r.line())
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    manifest = {r.key: {k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results}
    _write_json(cfg.output_dir / "manifest.json", manifest)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"treat": cmd_treat, "price": cmd_price, "evaluate": cmd_evaluate, "reproduce": cmd_reproduce}


def build_parser():
    p = argparse.ArgumentParser(prog="pidecision", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, help_ in [("treat", "treatment decision from a study panel"),
                        ("price", "pricing decision from demand data"),
                        ("evaluate", "Monte Carlo risk curves for decision rules"),
                        ("reproduce", "run the acceptance checks")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--input", type=Path, required=name != "reproduce")
        s.add_argument("--out", type=Path, default=None,
                       help=f"output directory (default ${OUT_ENV} or ./pidecision-out)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--draws", type=int, default=None)
        s.add_argument("--workers", type=int, default=None)
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "treat":
            s.add_argument("--C", type=float, default=None, dest="C")
        if name == "evaluate":
            s.add_argument("--n", type=int, default=None)
            s.add_argument("--grid-half-width", type=float, default=None)
            s.add_argument("--grid-points", type=int, default=None)
        if name == "reproduce":
            s.add_argument("--only", nargs="*", default=None, help="subset of check keys, e.g. C1 C5")
    return p


def _config(args) -> RunConfig:
    out = args.out or Path(os.environ.get(OUT_ENV, "pidecision-out"))
    overrides = {}
    for key in ("C", "n", "grid_half_width", "grid_points", "only"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if args.draws is not None and args.draws < 1:
        raise InputError("--draws must be positive")
    seed = args.seed
    if seed is None and args.subcommand != "evaluate":
        seed = 0
    return RunConfig(args.subcommand, args.input, out, seed, args.draws, overrides, args.workers)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DecisionError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (LpError, QuadratureError, FactorizationError, mclab.RuleFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PosteriorError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
