"""Config validation, file emission, and reproducibility of the command line."""

import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.constants import c

from sfwm.cli import ConfigError, load_config, run

TWO_PI_C = 2 * math.pi * c

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


def small_config(tmp_path, **extra):
    cfg = {
        "pump": {"center_wavelength_nm": 1070.0, "fwhm_nm": 2.0},
        "segments": [
            {"label": "S2", "core_radius_nm": 947.5, "air_fill": 0.296, "length_m": 0.3,
             "phase_match": {"lambda_s0_nm": 1413.6, "tau_s_ps_per_m": 3.2,
                             "theta_rad": 0.002}},
        ],
        "grid": {"ns": 160, "ni": 160, "lobes": 6.0},
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_rejects_unknown_key(tmp_path, capsys):
    path = small_config(tmp_path, nonsense=1)
    assert run("g2", path) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["stage"] == "config"
    assert "nonsense" in record["message"]
    assert not (tmp_path / "out").exists()


def test_rejects_invalid_air_fill(tmp_path, capsys):
    cfg = json.loads(small_config(tmp_path).read_text())
    cfg["segments"][0]["air_fill"] = 1.2
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert run("g2", path) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["stage"] == "config"
    assert "air_fill" in record["message"]
    assert not (tmp_path / "out").exists()


def test_rejects_inconsistent_idler_override(tmp_path, capsys):
    cfg = json.loads(small_config(tmp_path).read_text())
    cfg["segments"][0]["phase_match"]["lambda_i0_nm"] = 858.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert run("g2", path) == 1
    record = json.loads(capsys.readouterr().err)
    assert "energy conservation" in record["message"]


def test_g2_outputs_and_manifest(tmp_path):
    path = small_config(tmp_path)
    assert run("g2", path) == 0
    out = tmp_path / "out"
    header, rows = read_csv(out / "g2.csv")
    assert header == ["configuration", "total_length_m", "pump_fwhm_nm", "g2",
                      "schmidt_number", "purity"]
    g2 = float(rows[0][3])
    assert 1.0 < g2 <= 2.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config_sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
    assert manifest["subcommand"] == "g2"
    assert "g2.csv" in manifest["outputs"]
    assert manifest["grid"]["ns"] >= 160


def test_jsa_then_marginal_fubini(tmp_path):
    path = small_config(tmp_path)
    assert run("jsa", path) == 0
    assert run("marginal", path) == 0
    out = tmp_path / "out"

    header, rows = read_csv(out / "jsi.csv")
    idler_nm = np.array([float(v) for v in header[1:]])
    signal_nm = np.array([float(r[0]) for r in rows])
    jsi = np.array([[float(v) for v in r[1:]] for r in rows])

    def omega_weights(nm_axis):
        omega = np.sort(TWO_PI_C / (nm_axis * 1e-9))
        w = np.empty_like(omega)
        d = np.diff(omega)
        w[0], w[-1] = d[0] / 2, d[-1] / 2
        w[1:-1] = (d[:-1] + d[1:]) / 2
        return omega, w

    _, w_i = omega_weights(idler_nm)
    _, w_s = omega_weights(signal_nm)
    # Rows/cols ascend in wavelength = descend in omega; weights are symmetric.
    total_2d = float(w_s @ jsi[::-1, ::-1] @ w_i)

    _, mrows = read_csv(out / "marginal_signal.csv")
    m_nm = np.array([float(r[0]) for r in mrows])
    m_val = np.array([float(r[1]) for r in mrows])
    _, w_m = omega_weights(m_nm)
    total_1d = float(w_m @ m_val[::-1])

    assert total_1d == pytest.approx(total_2d, rel=1e-10)


def test_reruns_are_byte_identical(tmp_path):
    path = small_config(tmp_path)
    run("g2", path, out_dir=tmp_path / "a")
    run("g2", path, out_dir=tmp_path / "b", threads=3)
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_filter_scan_csv(tmp_path):
    path = small_config(
        tmp_path,
        filter={"fwhm_nm": 0.8, "scan_range_nm": [1406.0, 1420.0], "n_centers": 29},
    )
    assert run("filter-scan", path) == 0
    header, rows = read_csv(tmp_path / "out" / "filter_scan.csv")
    assert header == ["x_nm", "intensity"]
    assert len(rows) == 29
    vals = [float(r[1]) for r in rows]
    assert max(vals) > 0 and min(vals) >= 0


def test_plan_output(tmp_path):
    cfg_extra = {
        "segments": [
            {"label": "S2", "core_radius_nm": 947.5, "air_fill": 0.296, "length_m": 0.3,
             "phase_match": {"lambda_s0_nm": 1413.6, "tau_s_ps_per_m": 3.2,
                             "theta_rad": 0.002}},
            {"label": "S3", "core_radius_nm": 948.0, "air_fill": 0.296, "length_m": 0.3,
             "phase_match": {"lambda_s0_nm": 1417.3, "tau_s_ps_per_m": 3.3,
                             "theta_rad": 0.001}},
        ],
        "planner": {"target_total_length_m": 0.6, "tolerance_m": 0.0},
        "grid": {"ns": 160, "ni": 160, "lobes": 6.0},
    }
    path = small_config(tmp_path, **cfg_extra)
    assert run("plan", path) == 0
    text = (tmp_path / "out" / "plan.txt").read_text()
    fields = dict(line.split(": ", 1) for line in text.strip().splitlines())
    assert set(fields["order"].split()) == {"S2", "S3"}
    assert float(fields["total_length_m"]) == 0.6
    assert 1.0 < float(fields["predicted_g2"]) <= 2.0
    assert (tmp_path / "out" / "plan_spectrum.csv").exists()


def test_dispersion_subcommand(tmp_path):
    cfg = {
        "segments": [
            {"label": "R948", "core_radius_nm": 948.0, "air_fill": 0.296, "length_m": 1.9},
        ],
        "dispersion": {"wavelength_range_nm": [900.0, 1250.0], "n_points": 15,
                       "zdw_search_nm": [900.0, 1250.0]},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    assert run("dispersion", path) == 0
    header, rows = read_csv(tmp_path / "out" / "dispersion_R948.csv")
    assert header == ["wavelength_nm", "n_eff", "k_rad_per_m", "k1_ps_per_m",
                      "beta2_ps2_per_m"]
    assert len(rows) == 15
    _, zdw_rows = read_csv(tmp_path / "out" / "zdw.csv")
    zdws = [float(r[1]) for r in zdw_rows]
    assert len(zdws) == 2
    assert zdws[0] == pytest.approx(942.0, abs=10.0)
    assert zdws[1] == pytest.approx(1175.0, abs=10.0)


def test_fit_subcommand_uses_bundled_samples(tmp_path):
    cfg = {
        "fit": {"gvd_csv": str(CONFIGS / "gvd_samples.csv"),
                "initial_core_radius_nm": 940.0, "initial_air_fill": 0.28},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    assert run("fit", path) == 0
    _, rows = read_csv(tmp_path / "out" / "fit.csv")
    assert float(rows[0][0]) == pytest.approx(948.0, abs=1.0)
    assert float(rows[0][1]) == pytest.approx(0.296, abs=0.002)


def test_missing_required_block(tmp_path, capsys):
    path = small_config(tmp_path)
    assert run("plan", path) == 1
    record = json.loads(capsys.readouterr().err)
    assert record["stage"] == "plan"
    assert "planner" in record["message"]


def test_bundled_configs_validate():
    for cfg_path in sorted(CONFIGS.glob("*.json")):
        load_config(cfg_path)


def test_load_config_rejects_non_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(path)


def test_full_model_subcommand(tmp_path):
    path = small_config(tmp_path, model="full")
    assert run("jsa", path) == 0
    meta = json.loads((tmp_path / "out" / "jsi_meta.json").read_text())
    assert meta["assembly"]["model_mode"] == "full"
    assert meta["assembly"]["segments"][0]["fiber"]["core_radius_nm"] == 947.5


def test_bundled_g2_table_matches_reference(tmp_path):
    import sys
    sys.path.insert(0, str(REPO / "tests"))
    from conftest import G2_REFERENCE

    name_map = {
        "S1+S3_1.5m_each": "S1+S3_1.5m",
        "homogeneous_0.3m": "hom_0.3", "homogeneous_0.6m": "hom_0.6",
        "homogeneous_0.9m": "hom_0.9", "homogeneous_1.5m": "hom_1.5",
    }
    assert run("g2-table", CONFIGS / "g2_table.json", out_dir=tmp_path) == 0
    _, rows = read_csv(tmp_path / "g2_table.csv")
    assert len(rows) == 20
    for row in rows:
        key = (name_map.get(row[0], row[0]), float(row[2]))
        assert abs(float(row[3]) - G2_REFERENCE[key]) <= 0.05, row
