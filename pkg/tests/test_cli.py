import json

import pandas as pd
import pytest

from main import EXIT_ASSERTION, EXIT_FAILURE, EXIT_OK, build_parser, main


def _write_sweep(directory, psi):
    epsilons = [0.2, 0.1, 0.05]
    pd.DataFrame({"epsilon": epsilons, "nu": [0.0] * 3, "psi_final": psi, "status": ["ok"] * 3}) \
        .to_csv(directory / "sweep.csv", index=False)


def test_fit_passes_on_fourth_order_sweep(tmp_path):
    _write_sweep(tmp_path, [0.2**4, 0.1**4, 0.05**4])
    assert main(["fit", "--input", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "rate_fit.json").exists()


def test_fit_reports_assertion_failure(tmp_path):
    _write_sweep(tmp_path, [0.2**2, 0.1**2, 0.05**2])
    assert main(["fit", "--input", str(tmp_path)]) == EXIT_ASSERTION


def test_fit_without_sweep_is_failure(tmp_path):
    assert main(["fit", "--input", str(tmp_path)]) == EXIT_FAILURE


def test_bad_config_is_failure(tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"params": {"gamma": 0.5}}), encoding="utf-8")
    assert main(["check", "--config", str(config), "--output-dir", str(tmp_path / "out")]) == EXIT_FAILURE


def test_unknown_flag_exits():
    with pytest.raises(SystemExit):
        main(["relax", "--no-such-flag"])


def test_epsilon_list_parsing():
    args = build_parser().parse_args(["relax", "--epsilon", "0.2,0.1,0.05", "--nu", "0"])
    assert args.epsilon == [0.2, 0.1, 0.05]
    with pytest.raises(SystemExit):
        build_parser().parse_args(["relax", "--epsilon", "a,b"])


def test_gradient_flow_run(tmp_path):
    out = tmp_path / "gf"
    code = main(["run", "--kind", "gradient_flow", "--n", "64", "--t-end", "0.01", "--output-dir", str(out)])
    assert code == EXIT_OK
    checks = json.loads((out / "checks.json").read_text(encoding="utf-8"))
    assert checks["passed"] is True
    assert {r["name"] for r in checks["reports"]} == {"gf_mass_conservation", "gf_energy_decay"}
    assert (out / "diagnostics.csv").exists()


def test_check_suite(tmp_path):
    config = tmp_path / "checks.json"
    config.write_text(json.dumps({
        "check_cases": [[2.0, -1.0], [2.0, 0.0]],
        "n_samples": 10000,
        "inequality_resolution": 200,
        "grid": {"n_points": 32},
    }), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["check", "--config", str(config), "--output-dir", str(out)]) == EXIT_OK
    checks = json.loads((out / "checks.json").read_text(encoding="utf-8"))
    assert all(r["passed"] for r in checks["reports"])
    assert json.loads((out / "manifest.json").read_text(encoding="utf-8"))["status"] == "completed"


@pytest.mark.slow
def test_relaxation_sweep_writes_outputs(tmp_path):
    out = tmp_path / "relax"
    code = main(["relax", "--n", "64", "--t-end", "0.02", "--epsilon", "0.4,0.2", "--output-dir", str(out),
                 "--emit-plot-data"])
    assert code in (EXIT_OK, EXIT_ASSERTION)
    sweep = pd.read_csv(out / "sweep.csv")
    assert sweep["status"].tolist() == ["ok", "ok"]
    assert (out / "rate_fit.json").exists()
    assert (out / "plot_data.csv").exists()
    assert (out / "runs" / "eps_0.4" / "manifest.json").exists()
    assert {"psi_sup", "ledger_residual", "ledger_passed"} <= set(sweep.columns)


@pytest.mark.slow
def test_viscous_relaxation_sweep_reports_uniform_bound(tmp_path):
    out = tmp_path / "relax_nu"
    code = main(["relax", "--n", "64", "--t-end", "0.02", "--epsilon", "0.4,0.2", "--nu", "0.01",
                 "--output-dir", str(out)])
    assert code in (EXIT_OK, EXIT_ASSERTION)
    sweep = pd.read_csv(out / "sweep.csv")
    assert sweep["nu"].tolist() == [0.01, 0.01]
    assert sweep["ledger_passed"].dtype == bool
    payload = json.loads((out / "rate_fit.json").read_text(encoding="utf-8"))
    assert payload["ys"] == pytest.approx(sweep["psi_sup"].tolist())
    assert payload["psi_final"] == pytest.approx(sweep["psi_final"].tolist())
    assert payload["bound_ok"] == (payload["ratio_growth"] < payload["ratio_spread_threshold"])
    assert payload["slope_ok"] is True
