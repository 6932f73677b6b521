"""Command-line behavior: exit codes, outputs, config merging, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from kronrisk import load_model, save_model, KroneckerCovarianceModel
from kronrisk.cli import main

HEADER = "date,country,maturity_years,rate"

SMALL_PANEL = "\n".join([
    HEADER,
    "2020-01-01,DE,1,1.5",
    "2020-01-01,DE,2,1.7",
    "2020-01-01,US,1,2.5",
    "2020-01-01,US,2,2.7",
    "2020-01-08,DE,1,1.6",
    "2020-01-08,DE,2,1.8",
    "2020-01-08,US,1,2.4",
    "2020-01-08,US,2,2.6",
    "2020-01-15,DE,1,1.7",
    "2020-01-15,DE,2,1.95",
    "2020-01-15,US,1,2.3",
    "2020-01-15,US,2,2.55",
    "2020-01-22,DE,1,1.65",
    "2020-01-22,DE,2,1.85",
    "2020-01-22,US,1,2.35",
    "2020-01-22,US,2,2.6",
]) + "\n"


def _simulate(out, extra=()):
    return main(["simulate", "--output-dir", str(out),
                 "--maturities", "4", "--countries", "3",
                 "--samples", "60", "--seed", "7", *extra])


def test_simulate_writes_panel(tmp_path, capsys):
    assert _simulate(tmp_path) == 0
    out = capsys.readouterr().out
    assert "seed: 7" in out
    text = (tmp_path / "synthetic_panel.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == HEADER
    assert lines[1].startswith("2015-01-02,C01,1,2.0")
    assert len(lines) == 1 + 61 * 4 * 3  # header + (T+1) dates x grid


def test_simulate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _simulate(a) == 0
    assert _simulate(b) == 0
    assert (a / "synthetic_panel.csv").read_bytes() == \
        (b / "synthetic_panel.csv").read_bytes()


def test_full_pipeline(tmp_path, capsys):
    assert _simulate(tmp_path) == 0
    panel_file = str(tmp_path / "synthetic_panel.csv")
    out_dir = str(tmp_path)

    assert main(["estimate", "--input", panel_file,
                 "--output-dir", out_dir]) == 0
    text = capsys.readouterr().out
    assert "estimated model: dims 4x3, T=60" in text
    assert "separable vs" in text and "full parameters" in text
    model = load_model(tmp_path / "model.json")
    assert model.dims == (4, 3)
    assert model.sample_count == 60
    sep = json.loads((tmp_path / "separability.json").read_text())
    assert sep["separable_params"] == 1 + 10 + 6
    assert sep["full_params"] == 12 * 13 // 2
    assert sep["relative_error"] < 1.0
    assert (tmp_path / "separability.csv").exists()

    model_file = str(tmp_path / "model.json")
    assert main(["factors", "--input", model_file,
                 "--output-dir", out_dir]) == 0
    for stem in ("factors_maturity", "factors_country",
                 "loadings_maturity", "loadings_country"):
        assert (tmp_path / f"{stem}.csv").exists()
        assert (tmp_path / f"{stem}.json").exists()
    rows = (tmp_path / "factors_maturity.csv").read_text().splitlines()
    assert rows[0] == "factor,label,variance_explained_pct,cumulative_pct"
    first = rows[1].split(",")
    assert first[0] == "1"
    assert first[1] == "Global level"
    assert len(first[2].split(".")[-1]) == 2  # two-decimal percentage
    fractions = [float(r.split(",")[2]) for r in rows[1:]]
    assert sum(fractions) == pytest.approx(100.0, abs=0.05)

    assert main(["minvar", "--input", model_file,
                 "--output-dir", out_dir]) == 0
    doc = json.loads((tmp_path / "minvar.json").read_text())
    assert sum(doc["w_full"]) == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(np.kron(doc["w_country"], doc["w_maturity"]),
                       doc["w_full"], atol=1e-12)
    assert doc["variance"] > 0
    full_rows = (tmp_path / "minvar_full.csv").read_text().splitlines()
    assert full_rows[0] == "asset,weight"
    assert full_rows[1].startswith("c1/m1,")
    assert len(full_rows) == 13

    assert main(["hedge", "--input", model_file, "--output-dir", out_dir,
                 "--domain", "maturity", "--index", "2", "--r", "2"]) == 0
    hdoc = json.loads((tmp_path / "hedge.json").read_text())
    assert hdoc["weights"][1] == pytest.approx(1.0, abs=1e-9)
    assert sum(hdoc["weights"]) == pytest.approx(0.0, abs=1e-9)
    assert hdoc["residual"] <= 1e-10
    assert hdoc["consistent"] is True
    assert len(hdoc["factor_exposures"]) == 2
    assert (tmp_path / "hedge.csv").read_text().splitlines()[0] == "asset,weight"


def test_estimate_uses_panel_labels_in_factor_tables(tmp_path):
    panel_file = tmp_path / "panel.csv"
    panel_file.write_text(SMALL_PANEL)
    assert main(["factors", "--input", str(panel_file),
                 "--output-dir", str(tmp_path)]) == 0
    loadings = (tmp_path / "loadings_maturity.csv").read_text().splitlines()
    assert loadings[0] == "asset,factor_1,factor_2"
    assert loadings[1].startswith("1y,")
    countries = (tmp_path / "loadings_country.csv").read_text().splitlines()
    assert countries[1].startswith("DE,")
    assert countries[2].startswith("US,")


def test_json_format_drops_csv_outputs(tmp_path):
    assert _simulate(tmp_path) == 0
    panel_file = str(tmp_path / "synthetic_panel.csv")
    sub = tmp_path / "json_only"
    assert main(["estimate", "--input", panel_file, "--output-dir", str(sub),
                 "--format", "json"]) == 0
    assert (sub / "separability.json").exists()
    assert not (sub / "separability.csv").exists()
    assert main(["minvar", "--input", str(sub / "model.json"),
                 "--output-dir", str(sub), "--format", "json"]) == 0
    assert (sub / "minvar.json").exists()
    assert not (sub / "minvar_full.csv").exists()
    assert main(["hedge", "--input", str(sub / "model.json"),
                 "--output-dir", str(sub), "--format", "json",
                 "--index", "1", "--r", "1"]) == 0
    assert (sub / "hedge.json").exists()
    assert not (sub / "hedge.csv").exists()


def test_estimate_rejects_model_input(tmp_path, capsys):
    model_file = tmp_path / "model.json"
    save_model(KroneckerCovarianceModel(1.0, (np.eye(2) / 2, np.eye(2) / 2)),
               model_file)
    assert main(["estimate", "--input", str(model_file),
                 "--output-dir", str(tmp_path)]) == 2
    assert "panel CSV" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "nope.csv"),
                 "--output-dir", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_malformed_panel_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,notright,maturity_years,rate\n")
    assert main(["estimate", "--input", str(bad),
                 "--output-dir", str(tmp_path)]) == 3
    assert "header" in capsys.readouterr().err


def test_malformed_model_exits_4(tmp_path, capsys):
    bad = tmp_path / "model.json"
    bad.write_text('{"sigma2": 1.0}')
    assert main(["factors", "--input", str(bad),
                 "--output-dir", str(tmp_path)]) == 4
    assert capsys.readouterr().err.startswith("error:")


def test_strict_missing_cells_exit_3(tmp_path, capsys):
    gappy = tmp_path / "gappy.csv"
    gappy.write_text(SMALL_PANEL.replace("2020-01-08,US,1,2.4",
                                         "2020-01-08,US,1,"))
    assert main(["estimate", "--input", str(gappy),
                 "--output-dir", str(tmp_path), "--strict"]) == 3
    err = capsys.readouterr().err
    assert "missing" in err
    assert "2020-01-08" in err and "US" in err and "1y" in err


def test_default_policy_forward_fills(tmp_path, capsys):
    gappy = tmp_path / "gappy.csv"
    gappy.write_text(SMALL_PANEL.replace("2020-01-08,US,1,2.4",
                                         "2020-01-08,US,1,"))
    assert main(["estimate", "--input", str(gappy),
                 "--output-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    sep = json.loads((tmp_path / "separability.json").read_text())
    assert sep["filled_cells"] == 1


def test_hedge_index_out_of_range(tmp_path, capsys):
    model_file = tmp_path / "model.json"
    save_model(KroneckerCovarianceModel(1.0, (np.eye(3) / 3, np.eye(2) / 2)),
               model_file)
    assert main(["hedge", "--input", str(model_file),
                 "--output-dir", str(tmp_path), "--index", "99"]) == 2
    assert "1..3" in capsys.readouterr().err
    assert main(["hedge", "--input", str(model_file),
                 "--output-dir", str(tmp_path), "--index", "0"]) == 2
    assert main(["hedge", "--input", str(model_file),
                 "--output-dir", str(tmp_path), "--index", "1",
                 "--r", "5"]) == 2


def test_hedge_strict_inconsistent_exits_5(tmp_path, capsys):
    # isotropic maturity mode, hedge all but one factor: the remaining
    # direction is a coordinate axis, so unit-target + zero-sum conflict
    model_file = tmp_path / "model.json"
    save_model(KroneckerCovarianceModel(1.0, (np.eye(3) / 3, np.eye(2) / 2)),
               model_file)
    args = ["hedge", "--input", str(model_file), "--output-dir", str(tmp_path),
            "--domain", "maturity", "--index", "1", "--r", "2"]
    assert main(args) == 0
    assert "INCONSISTENT" in capsys.readouterr().out
    assert main(args + ["--strict"]) == 5
    assert capsys.readouterr().err.startswith("error:")


def test_domestic_requires_panel(tmp_path, capsys):
    model_file = tmp_path / "model.json"
    save_model(KroneckerCovarianceModel(1.0, (np.eye(2) / 2, np.eye(2) / 2)),
               model_file)
    assert main(["factors", "--input", str(model_file),
                 "--output-dir", str(tmp_path), "--domestic"]) == 2
    assert "panel" in capsys.readouterr().err


def test_domestic_outputs_from_panel(tmp_path, capsys):
    assert _simulate(tmp_path) == 0
    assert main(["factors", "--input", str(tmp_path / "synthetic_panel.csv"),
                 "--output-dir", str(tmp_path), "--domestic"]) == 0
    capsys.readouterr()
    rows = (tmp_path / "domestic.csv").read_text().splitlines()
    assert rows[0] == "factor,label,C01,C02,C03"
    assert rows[1].startswith("1,Level,")
    assert rows[2].startswith("2,Slope,")
    assert rows[3].startswith("3,Curvature,")
    doc = json.loads((tmp_path / "domestic.json").read_text())
    for country in ("C01", "C02", "C03"):
        assert sum(doc["spectra"][country]) == pytest.approx(1.0, abs=1e-8)


def test_validate_clean_and_gappy(tmp_path, capsys):
    clean = tmp_path / "clean.csv"
    clean.write_text(SMALL_PANEL)
    assert main(["validate", "--input", str(clean)]) == 0
    out = capsys.readouterr().out
    assert "no issues found" in out
    assert "4 dates x 2 maturities x 2 countries" in out
    assert "7 days" in out

    gappy = tmp_path / "gappy.csv"
    gappy.write_text(SMALL_PANEL.replace("2020-01-08,US,1,2.4",
                                         "2020-01-08,US,1,"))
    assert main(["validate", "--input", str(gappy)]) == 0
    out = capsys.readouterr().out
    assert "missing cell at (2020-01-08, US, 1y)" in out
    assert main(["validate", "--input", str(gappy), "--strict"]) == 3


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'output_dir = "{tmp_path}"\nseed = 11\n'
                   'maturities = 3\ncountries = 2\nsamples = 12\n')
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert "seed: 11" in capsys.readouterr().out
    lines = (tmp_path / "synthetic_panel.csv").read_text().splitlines()
    assert len(lines) == 1 + 13 * 3 * 2

    # a flag wins over the config file
    assert main(["simulate", "--config", str(cfg), "--seed", "99"]) == 0
    assert "seed: 99" in capsys.readouterr().out


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('sede = 11\n')
    assert main(["simulate", "--config", str(cfg),
                 "--output-dir", str(tmp_path)]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_config_rejects_bad_values(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('format = "xml"\n')
    assert main(["estimate", "--config", str(cfg),
                 "--output-dir", str(tmp_path)]) == 2
    capsys.readouterr()
    missing = tmp_path / "none.toml"
    assert main(["simulate", "--config", str(missing),
                 "--output-dir", str(tmp_path)]) == 2
    assert "config not found" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["estimate"]) == 2  # no --input
    capsys.readouterr()


def test_simulate_from_model_json(tmp_path, capsys):
    model_file = tmp_path / "model.json"
    save_model(KroneckerCovarianceModel(0.5, (np.eye(2) / 2, np.eye(2) / 2)),
               model_file)
    assert main(["simulate", "--input", str(model_file),
                 "--output-dir", str(tmp_path), "--samples", "5",
                 "--seed", "3"]) == 0
    capsys.readouterr()
    lines = (tmp_path / "synthetic_panel.csv").read_text().splitlines()
    assert len(lines) == 1 + 6 * 2 * 2
    assert main(["simulate", "--input", str(tmp_path / "synthetic_panel.csv"),
                 "--output-dir", str(tmp_path)]) == 2
    assert "model JSON" in capsys.readouterr().err


def test_module_entrypoint_subprocess(tmp_path):
    cmd = [sys.executable, "-m", "kronrisk.cli", "simulate",
           "--output-dir", str(tmp_path), "--maturities", "3",
           "--countries", "2", "--samples", "8", "--seed", "41"]
    first = subprocess.run(cmd, capture_output=True, text=True)
    assert first.returncode == 0
    assert "seed: 41" in first.stdout
    blob = (tmp_path / "synthetic_panel.csv").read_bytes()
    second = subprocess.run(cmd, capture_output=True, text=True)
    assert second.returncode == 0
    assert (tmp_path / "synthetic_panel.csv").read_bytes() == blob


def test_log_env_var_enables_info_logging(tmp_path):
    gappy = tmp_path / "gappy.csv"
    gappy.write_text(SMALL_PANEL.replace("2020-01-08,US,1,2.4",
                                         "2020-01-08,US,1,"))
    cmd = [sys.executable, "-m", "kronrisk.cli", "estimate",
           "--input", str(gappy), "--output-dir", str(tmp_path)]
    quiet = subprocess.run(cmd, capture_output=True, text=True)
    assert quiet.returncode == 0
    assert "forward-filled" not in quiet.stderr
    chatty = subprocess.run(cmd, capture_output=True, text=True,
                            env={"KRONRISK_LOG": "info", "PATH": "/usr/bin:/bin"})
    assert chatty.returncode == 0
    assert "forward-filled 1 missing cells" in chatty.stderr
