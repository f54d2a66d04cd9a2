"""Regenerate ``frozen.json``: reference values computed by routes that share
no code with the package (mpmath quadrature of distribution functions).

    python tests/oracles/build_oracles.py
"""
import json
import math
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30
HERE = Path(__file__).parent


def ncdf(x):
    return mp.ncdf(x)


def positive_part_mean(c, n):
    # E[X_+] = int_0^inf P(X > t) dt,  X ~ N(c, 1/n)
    s = mp.sqrt(n)
    return mp.quad(lambda t: 1 - ncdf(s * (t - c)), [0, c if c > 0 else 0, mp.inf])


def max_negative_part_mean(c1, c2, n):
    # E[min(max(X1, X2), 0)] = -int_{-inf}^0 P(X1 <= t) P(X2 <= t) dt
    s = mp.sqrt(n)
    pts = sorted({min(c1, 0), min(c2, 0), 0})
    return -mp.quad(lambda t: ncdf(s * (t - c1)) * ncdf(s * (t - c2)), [-mp.inf, *pts])


def expected_max(z1, z2):
    F = lambda t: ncdf(t - z1) * ncdf(t - z2)
    lo, hi = min(z1, z2, 0), max(z1, z2, 0)
    return mp.quad(lambda t: 1 - F(t), [0, hi, mp.inf]) - mp.quad(F, [-mp.inf, lo, 0])


def panel_mean_contrast(panel):
    """E[(min_k U_k)_+] + E[(max_k L_k)_-] for independent Gaussian study estimates."""
    C = panel["C"]
    x0 = panel["target"]
    lo, hi, se = [], [], []
    for s in panel["studies"]:
        d = math.sqrt(sum((a - b) ** 2 for a, b in zip(s["covariates"], x0)))
        lo.append(s["estimate"] - C * d)
        hi.append(s["estimate"] + C * d)
        se.append(s["se"])
    up = mp.quad(lambda t: mp.fprod(1 - ncdf((t - h) / v) for h, v in zip(hi, se)), [0, min(hi), mp.inf])
    down = -mp.quad(lambda t: mp.fprod(ncdf((t - l) / v) for l, v in zip(lo, se)), [-mp.inf, max(lo), 0])
    plug = max(min(hi), 0) + min(max(lo), 0)
    return float(up + down), plug


def main():
    pos_cases = [(0, 1), (5, 1), (-5, 1), (0.3, 4), (-0.05, 400), (0.02, 900), (-1.2, 2.5)]
    neg_cases = [(-10, -10, 1), (10, 10, 1), (0, -100, 1), (-0.5, -0.5, 400), (-0.05, 0.02, 100),
                 (0.1, -0.3, 9), (-1.0, 0.4, 1), (-0.2, -0.25, 25)]
    max_cases = [(0, 0), (10, 0), (-3, -3), (1.5, -0.5), (-0.3, -0.3), (4.9, -4.9)]
    out = {
        "positive_part": [[c, n, float(positive_part_mean(c, n))] for c, n in pos_cases],
        "max_negative_part": [[a, b, n, float(max_negative_part_mean(a, b, n))] for a, b, n in neg_cases],
        "expected_max": [[a, b, float(expected_max(a, b))] for a, b in max_cases],
    }
    data = HERE.parents[1] / "src" / "pidecision" / "data"
    for name in ("male_youths", "female_youths"):
        panel = json.loads((data / f"{name}.json").read_text())
        mean, plug = panel_mean_contrast(panel)
        out[name] = {"mean_contrast": mean, "plug_in_contrast": plug}
    (HERE / "frozen.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
