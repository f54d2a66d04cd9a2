import json

import numpy as np
import pytest

from pidecision.cli import main


def read(path):
    return json.loads(path.read_text())


def single_study(tmp_path):
    f = tmp_path / "one.json"
    f.write_text(json.dumps({"C": 1.0, "target": [0.0], "studies": [
        {"id": "only", "estimate": 0.1, "se": 0.05, "covariates": [0.0]}]}))
    return f


def test_treat_single_study(tmp_path):
    out = tmp_path / "out"
    assert main(["treat", "--input", str(single_study(tmp_path)), "--out", str(out), "--seed", "1"]) == 0
    rep = read(out / "treat_report.json")
    assert rep["optimal"]["decision"] == "treat" and rep["plug_in"]["decision"] == "treat"
    # one study at the target: bounds [P, P], so the contrast P_+ + P_- is P itself
    assert rep["optimal"]["mean_contrast"] == pytest.approx(0.1, abs=4 * rep["optimal"]["mean_contrast_se"])
    hist = (out / "contrast_histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_left,bin_right,count,density" and len(hist) == 51
    assert sum(int(r.split(",")[2]) for r in hist[1:]) == rep["draw_count"]


def test_treat_near_tie_disagreement(tmp_path, data_dir):
    out = tmp_path / "out"
    assert main(["treat", "--input", str(data_dir / "male_youths.json"), "--out", str(out)]) == 0
    rep = read(out / "treat_report.json")
    assert rep["disagree"]
    assert rep["plug_in"]["contrast"] < 0 < rep["optimal"]["mean_contrast"]
    shares = {a["id"]: a for a in rep["attribution"]}
    assert sum(a["lower_share"] for a in rep["attribution"]) == pytest.approx(1.0)
    assert shares["US"]["lower_share"] + shares["Brazil"]["lower_share"] > 0.99


def test_treat_is_byte_identical_on_rerun(tmp_path, data_dir):
    outs = []
    for k, workers in enumerate([1, 3]):
        out = tmp_path / f"o{k}"
        main(["treat", "--input", str(data_dir / "male_youths.json"), "--out", str(out), "--seed", "4",
              "--workers", str(workers)])
        outs.append(out)
    for name in ("treat_report.json", "contrast_histogram.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_malformed_json_exit_1_and_no_output(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "out"
    assert main(["treat", "--input", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert main(["treat", "--input", str(tmp_path / "missing.json"), "--out", str(out)]) == 1
    bad.write_text(json.dumps({"C": 1, "target": [0], "studies": [], "mystery": 2}))
    assert main(["treat", "--input", str(bad), "--out", str(out)]) == 1
    assert not out.exists()


def test_empty_identified_set_exit_2(tmp_path):
    f = tmp_path / "crossing.json"
    f.write_text(json.dumps({"C": 1.0, "target": [0.0], "studies": [
        {"estimate": 0.5, "se": 0.01, "covariates": [0.1]},
        {"estimate": -0.5, "se": 0.01, "covariates": [0.1]}]}))
    assert main(["treat", "--input", str(f), "--out", str(tmp_path / "o")]) == 2
    assert main(["treat", "--input", str(f), "--out", str(tmp_path / "o"), "--C", "20"]) == 0


def test_price(tmp_path, data_dir):
    out = tmp_path / "out"
    assert main(["price", "--input", str(data_dir / "three_budget_demand.json"), "--out", str(out),
                 "--draws", "300"]) == 0
    rep = read(out / "price_report.json")
    assert rep["types"] == {"observed": 7, "2": 14}
    assert len(rep["averaged_risks"]) == 3 and rep["chosen_budget"] in (0, 1, 2)
    traces = (out / "lp_traces.csv").read_text().splitlines()
    assert traces[0] == "draw,budget,h_lower,h_upper" and len(traces) == 301
    lo, hi = np.array([[float(v) for v in r.split(",")[2:]] for r in traces[1:]]).T
    assert (lo <= hi + 1e-12).all()


def test_price_not_rationalizable_exit_2(tmp_path, data_dir):
    doc = read(data_dir / "three_budget_demand.json")
    doc["choices"] = [{"budget": 0, "patch_counts": [0, 10, 0]}, {"budget": 1, "patch_counts": [10, 0, 0]}]
    f = tmp_path / "d.json"
    f.write_text(json.dumps(doc))
    assert main(["price", "--input", str(f), "--out", str(tmp_path / "o")]) == 2


def test_evaluate_small(tmp_path, data_dir):
    cfg = read(data_dir / "dominance_experiment.json")
    cfg.update(reps=1000, inner_draws=200)
    f = tmp_path / "exp.json"
    f.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["evaluate", "--input", str(f), "--out", str(out), "--grid-points", "3", "--n", "100"]) == 0
    summary = read(out / "summary.json")
    assert summary["n"] == 100 and summary["grid_points"] == 9
    assert set(summary["rules"]) == {"plug-in", "bayes"}
    lines = (out / "risk_curves.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 9
    cfg["rules"] = ["magic"]
    f.write_text(json.dumps(cfg))
    assert main(["evaluate", "--input", str(f), "--out", str(out)]) == 1


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PIDECISION_OUT", str(tmp_path / "envout"))
    assert main(["treat", "--input", str(single_study(tmp_path))]) == 0
    assert (tmp_path / "envout" / "treat_report.json").exists()


def test_reproduce_manifest(tmp_path):
    out = tmp_path / "out"
    assert main(["reproduce", "--out", str(out), "--only", "C3"]) == 0
    manifest = read(out / "manifest.json")
    assert manifest["C3"]["passed"] is True
    assert main(["reproduce", "--out", str(out), "--only", "C9"]) == 1
