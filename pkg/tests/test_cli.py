"""End-to-end command-line workflows: exit codes, manifests, reproducibility."""

import json

from loanlab.cli import dispatch


def run(argv, capsys=None):
    code = dispatch(argv)
    return code


def test_no_arguments_prints_usage_and_exits_one(capsys):
    assert dispatch([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_exits_one():
    assert dispatch(["price", "--no-such-flag"]) == 1


def test_unknown_subcommand_exits_one():
    assert dispatch(["frobnicate"]) == 1


def test_price_writes_report_and_manifest(tmp_path, capsys):
    out = tmp_path / "price.json"
    assert dispatch(["price", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert 0.002 < payload["report"]["r_star_loan"] < 0.054
    assert payload["report"]["foc_residual"] <= 1e-10
    assert payload["parameters"]["bank"]["gamma_u"] == 5.0
    manifest = json.loads((tmp_path / "price.manifest.json").read_text())
    assert manifest["subcommand"] == "price"
    assert str(out) in manifest["outputs"]
    assert "optimal loan rate" in capsys.readouterr().out


def test_price_emits_plot_data(tmp_path):
    out = tmp_path / "p.json"
    assert dispatch(["price", "--out", str(out), "--emit-plot-data",
                     "--plot-points", "11"]) == 0
    plot = (tmp_path / "p.objective.csv").read_text().splitlines()
    assert plot[0] == "r_l,objective"
    assert len(plot) == 12


def test_price_flag_overrides_reach_the_solver(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    assert dispatch(["price", "--out", str(out1)]) == 0
    assert dispatch(["price", "--out", str(out2), "--gamma-u", "8.0"]) == 0
    r1 = json.loads(out1.read_text())["report"]["r_star_loan"]
    r2 = json.loads(out2.read_text())["report"]["r_star_loan"]
    assert r1 != r2


def test_price_bad_bracket_config_is_numerical_failure(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[solver]\nr_lo = 0.002\nr_hi = 0.004\n")
    assert dispatch(["price", "--config", str(cfg), "--out",
                     str(tmp_path / "x.json")]) == 2


def test_statics_neutrality_prints_pass(tmp_path, capsys):
    out = tmp_path / "neutrality.json"
    assert dispatch(["statics", "--proposition", "neutrality", "--out", str(out)]) == 0
    assert "neutrality: pass" in capsys.readouterr().out
    payload = json.loads(out.read_text())
    assert payload["report"]["verdict"] == "pass"


def test_statics_mps_grid_flag(tmp_path, capsys):
    out = tmp_path / "mps.json"
    assert dispatch(["statics", "--proposition", "mps", "--grid", "1:1.5:0.25",
                     "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["report"]["grid"] == [1.0, 1.25, 1.5]
    assert payload["report"]["verdict"] == "pass"


def test_statics_remaining_propositions_pass(tmp_path, capsys):
    for proposition in ("skew", "rationing", "ambiguity"):
        out = tmp_path / f"{proposition}.json"
        assert dispatch(["statics", "--proposition", proposition,
                         "--out", str(out)]) == 0
        assert json.loads(out.read_text())["report"]["verdict"] == "pass"
        assert f"{proposition}: pass" in capsys.readouterr().out


def test_price_under_adverse_macro_state(tmp_path):
    out = tmp_path / "adverse.json"
    assert dispatch(["price", "--adverse-macro", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["macro_state"] == 1
    # adverse conditions push default risk up and the optimum down
    base = tmp_path / "base.json"
    assert dispatch(["price", "--out", str(base)]) == 0
    assert payload["report"]["r_star_loan"] < json.loads(base.read_text())["report"]["r_star_loan"]


def test_simulate_then_fit_end_to_end(tmp_path, capsys):
    data = tmp_path / "loans.csv"
    assert dispatch(["simulate", "--n", "6000", "--seed", "7", "--out", str(data)]) == 0
    assert (tmp_path / "loans.truth.json").exists()
    model_out = tmp_path / "model.json"
    assert dispatch([
        "fit", "--data", str(data), "--components", "3",
        "--indicator", "niu", "--seed", "1", "--out", str(model_out),
    ]) == 0
    payload = json.loads(model_out.read_text())
    assert payload["model"]["n_components"] == 3
    assert payload["fit"]["converged"]
    quantiles = (tmp_path / "model.quantiles.csv").read_text().splitlines()
    assert quantiles[0] == "scenario,q25,q50,q75"
    assert len(quantiles) == 3


def test_fit_component_sweep(tmp_path):
    data = tmp_path / "loans.csv"
    assert dispatch(["simulate", "--n", "5000", "--seed", "3", "--out", str(data)]) == 0
    out = tmp_path / "sweep.json"
    assert dispatch(["fit", "--data", str(data), "--components", "1..3",
                     "--seed", "0", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert len(payload["selection_table"]) == 3


def test_simulate_reproducibility_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert dispatch(["simulate", "--n", "2000", "--seed", "11", "--out", str(a)]) == 0
    assert dispatch(["simulate", "--n", "2000", "--seed", "11", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.manifest.json").read_text())
    assert ma["input_digests"] == mb["input_digests"]
    assert ma["config"] == mb["config"]


def test_spread_ladder_end_to_end(tmp_path, capsys):
    data = tmp_path / "od.csv"
    assert dispatch(["simulate", "--overdrafts", "--n", "4000", "--seed", "2",
                     "--out", str(data)]) == 0
    out = tmp_path / "est.csv"
    assert dispatch(["spread", "--data", str(data), "--indicator", "niu",
                     "--cluster", "bank", "--ladder", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("label,term,estimate,std_error")
    labels = {line.split(",")[0] for line in lines[1:]}
    assert labels == {"bivariate", "+macro", "+bank_fe", "+borrower_controls"}


def test_fit_missing_data_file_exits_one(tmp_path):
    assert dispatch(["fit", "--data", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "m.json")]) == 1


def test_placebo_smoke(tmp_path, capsys):
    data = tmp_path / "loans.csv"
    assert dispatch(["simulate", "--n", "4000", "--seed", "19", "--out", str(data)]) == 0
    out = tmp_path / "placebo.json"
    assert dispatch(["placebo", "--data", str(data), "--trials", "4",
                     "--components", "2", "--seed", "5", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["trials"] == 4
    assert len(payload["zscores"]) == 4


def test_price_report_embeds_resolved_solver(tmp_path):
    out = tmp_path / "p.json"
    assert dispatch(["price", "--out", str(out)]) == 0
    params = json.loads(out.read_text())["parameters"]
    assert params["solver"]["quad_nodes"] == 64
    assert 0 < params["solver"]["r_lo"] < params["solver"]["r_hi"]
