"""Serialization: spectrum CSV files, JSON manifests, SVG plots, Markdown tables.

Output files use ordinary frequency: ``frequency_hz`` and ``psd_per_hz`` with
S(f) = 2 pi S(omega). The coherent delta weight lives in the ``# key=value``
header so that the numeric columns stay a plain density.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .quantum_core import TWO_PI
from .spectrum import SpectrumTrace

SPECTRUM_COLUMNS = {
    "frequency_hz": "ordinary frequency f = omega / 2 pi (Hz, lab frame)",
    "psd_per_hz": "incoherent power spectral density S(f) = 2 pi S(omega), in hbar*omega_a units",
}
SWEEP_COLUMNS = {
    "power_dbm": "drive power referred to the cavity input (dBm)",
    "mean_n_calibrated": "P / (hbar omega_r kappa')",
    "rabi_hz": "calibrated drive amplitude Omega / 2 pi (Hz)",
    "mean_n_simulated": "steady-state <a'a> of the simulation",
    "sideband_offset_hz": "half the distance between fitted sideband centres (Hz)",
    "sideband_width_hz": "mean fitted Gaussian width D / 2 pi of exp[-2 (x/D)^2] (Hz)",
    "central_width_hz": "fitted Lorentzian FWHM of the central line / 2 pi (Hz)",
    "height_ratio": "fitted central height / mean sideband height",
    "integrated_ratio": "central power / summed sideband power",
    "status": "ok, or the error that stopped this point",
}
WIDTH_COLUMNS = {
    "power_dbm": "drive power (dBm)",
    "mean_n_sidebands": "(offset / 2g)^2",
    "sideband_width_hz": "fitted sideband width D / 2 pi (Hz)",
    "reference_2g_hz": "2g / 2 pi (Hz)",
    "ratio": "width / 2g",
}
FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_spectrum_csv(path, trace: SpectrumTrace, header: dict | None = None) -> Path:
    """Write a trace as frequency_hz, psd_per_hz with a ``# key=value`` header."""
    path = Path(path)
    head = {
        "coherent_weight": float(trace.coherent_weight),
        "drive_frequency_hz": float(trace.omega_drive / TWO_PI),
        "method": trace.method,
    }
    head.update(header or {})
    psd = np.where(trace.failed, np.nan, trace.psd * TWO_PI)
    buf = io.StringIO()
    for k, v in head.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    buf.write("frequency_hz,psd_per_hz\n")
    np.savetxt(buf, np.column_stack([trace.omega / TWO_PI, psd]), delimiter=",", fmt=FLOAT_FMT)
    path.write_text(buf.getvalue())
    return path


def read_spectrum_csv(path):
    """Read a spectrum CSV back as ``(freq_hz, psd_per_hz, header)``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file {str(path)!r} not found", "io.input")
    header = {}
    with path.open() as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
    # skip the comment block plus the column-name row
    data = np.loadtxt(path, delimiter=",", skiprows=len(header) + 1, ndmin=2)
    if data.shape[1] != 2:
        raise ConfigError(f"{str(path)!r} must have two columns", "io.input")
    return data[:, 0], data[:, 1], header


def trace_from_frequency(freq_hz, psd_per_hz, header: dict) -> SpectrumTrace:
    """Angular-frequency SpectrumTrace from CSV-form columns and header."""
    psd = np.asarray(psd_per_hz, dtype=float)
    failed = ~np.isfinite(psd)
    meta = {"omega_drive": float(header.get("drive_frequency_hz", "nan")) * TWO_PI}
    if not math.isfinite(meta["omega_drive"]):
        meta.pop("omega_drive")
    return SpectrumTrace(
        omega=np.asarray(freq_hz, dtype=float) * TWO_PI,
        psd=np.where(failed, 0.0, psd) / TWO_PI,
        coherent_weight=float(header.get("coherent_weight", 0.0)),
        method=str(header.get("method", "external")),
        failed=failed,
        meta=meta,
    )


def load_spectrum(path) -> SpectrumTrace:
    return trace_from_frequency(*read_spectrum_csv(path))


def write_table_csv(path, columns: dict, rows: list) -> Path:
    """Plain CSV with the given column order; floats at full precision."""
    path = Path(path)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import matplotlib
    import scipy

    from . import _kernels

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "kernel_backend": _kernels.BACKEND,
    }


def write_manifest(out_dir, config_snapshot: dict, files: dict, results: dict) -> Path:
    """JSON manifest with config snapshot, versions, checksums and column docs.

    Args:
        files: ``{filename: column-description dict or None}`` for files in out_dir.
    """
    out_dir = Path(out_dir)
    entries = {}
    for name, columns in sorted(files.items()):
        entry = {"sha256": sha256(out_dir / name)}
        if columns:
            entry["columns"] = columns
        entries[name] = entry
    manifest = {
        "config": config_snapshot,
        "conventions": {
            "angular_frequency": "omega = 2 pi f; config frequencies are ordinary frequencies with units",
            "spectral_density": "S(f) = 2 pi S(omega), power in units of hbar*omega_a",
        },
        "versions": versions(),
        "files": entries,
        "results": results,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def verify_manifest(path) -> dict:
    """``{filename: checksum matches}`` for every file listed in a manifest."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    return {
        name: sha256(path.parent / name) == entry["sha256"] for name, entry in manifest["files"].items()
    }


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mollow-cavity"
    return plt


def _save_svg(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def plot_spectrum(path, trace: SpectrumTrace, fits=(), title=""):
    """SVG of a spectrum in MHz detuning with optional fit overlays."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    det = (trace.omega - trace.omega_drive) / TWO_PI / 1e6
    ok = ~trace.failed
    ax.plot(det[ok], trace.psd[ok] * TWO_PI, color="k", lw=1.0, label="spectrum")
    for fit in fits:
        if fit is None:
            continue
        lo, hi = fit.window
        x = np.linspace(lo, hi, 400)
        ax.plot((x - trace.omega_drive) / TWO_PI / 1e6, fit.evaluate(x) * TWO_PI, lw=1.0, ls="--",
                label=f"{fit.model} fit")
    ax.set_xlabel("detuning from drive (MHz)")
    ax.set_ylabel("S(f) (hbar omega_a)")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def plot_sweep(path, traces, labels):
    """Stacked spectra of a power sweep, each normalized to its own maximum."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 6))
    for k, (trace, label) in enumerate(zip(traces, labels)):
        det = (trace.omega - trace.omega_drive) / TWO_PI / 1e6
        y = trace.psd / max(trace.psd.max(), np.finfo(float).tiny)
        ax.plot(det, y + k, lw=0.8, color="k")
        ax.text(det[-1], k + 0.1, label, fontsize=6, ha="right")
    ax.set_xlabel("detuning from drive (MHz)")
    ax.set_ylabel("normalized spectrum, offset by sweep index")
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def plot_widths(path, rows):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    n = [r.mean_n for r in rows]
    ax.plot(n, [r.width / TWO_PI / 1e6 for r in rows], "o", color="k", label="simulated width")
    ax.axhline(rows[0].reference / TWO_PI / 1e6, color="r", ls="--", label="2g")
    ax.set_xlabel("<n> from sideband offset")
    ax.set_ylabel("sideband width (MHz)")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


# values reported for the measured device: (label, key, value, uncertainty, unit)
REFERENCE_VALUES = [
    ("central / side height ratio", "height_ratio", 11.0, None, ""),
    ("sideband width", "sideband_width_mhz", 41.0, 7.0, "MHz"),
    ("central width", "central_width_mhz", 3.6, None, "MHz"),
    ("integrated central / sidebands", "integrated_ratio", 1.1, None, ""),
]


def comparison_table(computed: dict) -> str:
    """Markdown table of measured values next to computed ones."""
    lines = [
        "| quantity | measured | computed | computed / measured |",
        "|---|---|---|---|",
    ]
    for label, key, ref, err, unit in REFERENCE_VALUES:
        value = computed.get(key, math.nan)
        ref_text = f"{ref:g} +- {err:g}" if err else f"{ref:g}"
        if unit:
            ref_text += f" {unit}"
        val_text = f"{value:.4g}" + (f" {unit}" if unit else "")
        lines.append(f"| {label} | {ref_text} | {val_text} | {value / ref:.3f} |")
    return "\n".join(lines) + "\n"
