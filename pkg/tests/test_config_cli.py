import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mollow_cavity import cli, output
from mollow_cavity.analytic import MollowParams, mollow_triplet
from mollow_cavity.config import parse_config, parse_frequency, read_config_text
from mollow_cavity.errors import ConfigError
from mollow_cavity.fitting import triplet_metrics
from mollow_cavity.quantum_core import MHZ
from mollow_cavity.spectrum import SpectrumTrace


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_unit_conversion():
    assert parse_frequency("12 MHz") == pytest.approx(2 * math.pi * 1.2e7)
    assert parse_frequency("8.778GHz") == pytest.approx(2 * math.pi * 8.778e9)
    assert parse_frequency("500 kHz") == pytest.approx(2 * math.pi * 5e5)
    assert parse_frequency("3e2 Hz") == pytest.approx(2 * math.pi * 300)


@pytest.mark.parametrize("text", ["12", "12 THz", "MHz", "twelve MHz"])
def test_bad_units(text):
    with pytest.raises(ConfigError):
        parse_frequency(text)


def test_config_file(tmp_path):
    path = write(tmp_path, "mode = spectrum\n[system]\ng = 12 MHz  # coupling\nn_max = 16\n[drive]\nrabi = 5 MHz\n")
    cfg = parse_config(path)
    assert cfg.mode == "spectrum" and cfg.n_max == 16
    assert cfg.g == pytest.approx(2 * math.pi * 12e6)
    assert cfg.rabi_omega == pytest.approx(5 * MHZ)
    assert cfg.omega_a == cfg.omega_r == cfg.omega_drive


def test_missing_mode_named(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, "[system]\ng = 12 MHz\n"))
    assert err.value.key == "mode"


def test_unknown_key_reports_line(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, "mode = mollow\n\n[system]\ncoupling = 12 MHz\n"))
    assert err.value.key == "system.coupling" and err.value.line == 4
    assert "line 4" in str(err.value)


def test_bad_unit_reports_key_and_line(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, "mode = mollow\n[system]\nkappa = 5.2 furlongs\n"))
    assert err.value.key == "system.kappa" and err.value.line == 3


def test_mode_requirements(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(write(tmp_path, "mode = sweep\n"))
    assert err.value.key == "drive.power_dbm"
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "mode = fit\n"))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "mode = sweep\n[drive]\npower_dbm = -110, -120\n"))


def test_flag_overrides_file(tmp_path):
    path = write(tmp_path, "mode = sweep\n[drive]\npower_dbm = -120, -118, -116\n")
    cfg = parse_config(path, {"drive.power_dbm": [-113.5]})
    assert cfg.powers_dbm == [-113.5]
    assert cfg.snapshot()["drive.power_dbm"] == "-113.5"


def test_duplicate_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        read_config_text("mode = a\nmode = b\n")
    with pytest.raises(ConfigError):
        read_config_text("mode spectrum\n")


def test_csv_round_trip_is_bit_identical(tmp_path, rng):
    omega = np.sort(rng.uniform(5e10, 6e10, 50))
    t = SpectrumTrace(omega, rng.uniform(0, 1e-3, 50), coherent_weight=1.234e5, meta={"omega_drive": 5.5e10})
    path = output.write_spectrum_csv(tmp_path / "s.csv", t)
    f, psd, header = output.read_spectrum_csv(path)
    assert np.array_equal(f, omega / (2 * np.pi))
    assert np.array_equal(psd, t.psd * 2 * np.pi)
    assert float(header["coherent_weight"]) == 1.234e5
    # a second write of the reread trace gives the same bytes
    again = output.write_spectrum_csv(tmp_path / "t.csv", output.load_spectrum(path))
    assert again.read_bytes() == path.read_bytes()


def test_mollow_mode_matches_closed_form(tmp_path):
    out = tmp_path / "m"
    assert cli.main(["--preset", "mollow", "--out", str(out)]) == 0
    f, psd, _ = output.read_spectrum_csv(out / "spectrum.csv")
    mp = MollowParams(2 * np.pi * 8.778e9, 4.8 * MHZ, 25 * MHZ)
    ref = mollow_triplet(mp, f * 2 * np.pi) * 2 * np.pi
    assert np.allclose(psd, ref, rtol=1e-12)
    checks = output.verify_manifest(out / "manifest.json")
    assert checks and all(checks.values())
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["files"]["spectrum.csv"]["columns"]) == {"frequency_hz", "psd_per_hz"}


def test_rerun_from_manifest_reproduces_files(tmp_path):
    out = tmp_path / "a"
    assert cli.main(["--mode", "analytic", "--config", str(write(tmp_path, "[drive]\nmean_n = 25.4\n")),
                     "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    redo = tmp_path / "b"
    assert cli.main(["--config", str(out / "manifest.json"), "--out", str(redo)]) == 0
    again = json.loads((redo / "manifest.json").read_text())
    for name, entry in manifest["files"].items():
        assert again["files"][name]["sha256"] == entry["sha256"], name


def test_fit_mode_matches_in_process_metrics(tmp_path):
    cfg = write(tmp_path, "mode = spectrum\n[system]\nn_max = 12\n[drive]\nrabi = 8 MHz\n[grid]\npoints = 401\nspan = 120 MHz\n")
    first = tmp_path / "spec"
    assert cli.main(["--config", str(cfg), "--out", str(first)]) == 0
    inproc = json.loads((first / "manifest.json").read_text())["results"]
    fitted = tmp_path / "fit"
    assert cli.main(["--mode", "fit", "--input", str(first / "spectrum.csv"), "--out", str(fitted)]) == 0
    res = json.loads((fitted / "manifest.json").read_text())["results"]
    for key in ("central_width_mhz", "sideband_width_mhz", "sideband_offset_mhz", "height_ratio", "integrated_ratio"):
        assert res[key] == inproc[key], key
    assert (first / "comparison.md").read_text().startswith("| quantity")


def test_failure_exit_code_and_json(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mollow_cavity", "--mode", "sweep", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    err = json.loads(proc.stderr.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and err["key"] == "drive.power_dbm"


def test_runtime_failure_is_reported(tmp_path):
    rc = cli.main(["--mode", "fit", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)])
    assert rc == 2


def test_svg_is_deterministic(tmp_path):
    x = np.linspace(0, 1, 50)
    t = SpectrumTrace(x, np.exp(-((x - 0.5) ** 2) / 0.01), meta={"omega_drive": 0.5})
    output.plot_spectrum(tmp_path / "a.svg", t)
    output.plot_spectrum(tmp_path / "b.svg", t)
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_workers_from_environment(monkeypatch):
    from mollow_cavity.harness import resolve_workers

    monkeypatch.setenv("MOLLOW_CAVITY_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(1) == 1


def test_comparison_table_rows():
    table = output.comparison_table({"height_ratio": 11.0, "sideband_width_mhz": 41.0, "central_width_mhz": 3.6,
                                     "integrated_ratio": 1.1})
    assert "41 +- 7 MHz" in table and table.count("1.000") == 4
