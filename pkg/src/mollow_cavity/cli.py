"""Command-line entry point: ``mollow-cavity --preset fig3c --out results``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import output
from .analytic import AnalyticTripletParams, MollowParams, analytic_trace
from .config import METHODS, MODES, PRESETS, RunConfig, parse_config
from .errors import ConfigError, MollowCavityError
from .fitting import TripletMetrics, triplet_metrics
from .harness import calibrate, run_sweep, width_vs_n_report
from .quantum_core import TWO_PI
from .spectrum import compute_spectrum, default_grid

log = logging.getLogger("mollow_cavity")


@dataclass
class OutputBundle:
    out_dir: Path
    manifest: Path
    files: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)


def metrics_summary(m: TripletMetrics) -> dict:
    """Scalar view of triplet metrics in MHz (ordinary frequency)."""
    mhz = TWO_PI * 1e6

    def val(x):
        return float(x) if x is not None and math.isfinite(x) else None

    return {
        "central_width_mhz": val(m.central.width / mhz) if m.central else None,
        "sideband_width_mhz": val(m.sideband_width / mhz),
        "sideband_offset_mhz": val(m.sideband_offset / mhz),
        "height_ratio": val(m.height_ratio),
        "integrated_ratio": val(m.integrated_ratio),
        "degraded": m.degraded,
        "notes": list(m.notes),
    }


def _spectrum_outputs(cfg, out, trace, files, results, fits_model="gaussian", joint=False, stem="spectrum"):
    name = f"{stem}.csv"
    output.write_spectrum_csv(out / name, trace)
    files[name] = output.SPECTRUM_COLUMNS
    # metrics come from the file as written so that a later fit run on it agrees exactly
    reread = output.load_spectrum(out / name)
    metrics = triplet_metrics(reread, rbw=cfg.rbw, side_model=fits_model, joint=joint)
    results.update(metrics_summary(metrics))
    output.plot_spectrum(out / f"{stem}.svg", reread, [metrics.central, metrics.left, metrics.right])
    files[f"{stem}.svg"] = None
    return metrics


def _comparison(out, files, results):
    scalars = {k: math.nan if v is None else v for k, v in results.items() if not isinstance(v, (list, bool, str))}
    (out / "comparison.md").write_text(output.comparison_table(scalars))
    files["comparison.md"] = None


def run(cfg: RunConfig) -> OutputBundle:
    """Execute one configuration and write its output bundle."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict = {}
    results: dict = {"mode": cfg.mode}

    if cfg.mode == "spectrum":
        p = cfg.system_params()
        if cfg.powers_dbm:
            cal = calibrate(cfg.powers_dbm[0], p)
            p = p.replace(rabi_omega=cal.rabi_omega)
            results["mean_n_calibrated"] = cal.mean_n
        trace = compute_spectrum(p, default_grid(p, cfg.span, cfg.points), method=cfg.method)
        results["rabi_mhz"] = p.rabi_omega / TWO_PI / 1e6
        results.update({k: float(v) for k, v in trace.meta.items()})
        _spectrum_outputs(cfg, out, trace, files, results)
        _comparison(out, files, results)

    elif cfg.mode == "sweep":
        p = cfg.system_params()
        sweep = run_sweep(p, cfg.powers_dbm, method=cfg.method, rbw=cfg.rbw, span=cfg.span,
                          points=cfg.points, workers=cfg.workers, max_dim=cfg.max_dim)
        rows = []
        traces, labels = [], []
        for k, pt in enumerate(sweep.points):
            cal = pt.calibration
            row = {
                "power_dbm": cal.power_dbm,
                "mean_n_calibrated": cal.mean_n,
                "rabi_hz": cal.rabi_omega / TWO_PI,
                "mean_n_simulated": math.nan,
                "sideband_offset_hz": math.nan,
                "sideband_width_hz": math.nan,
                "central_width_hz": math.nan,
                "height_ratio": math.nan,
                "integrated_ratio": math.nan,
                "status": "ok" if pt.ok else pt.error.replace(",", ";"),
            }
            if pt.ok:
                m = pt.metrics
                row["mean_n_simulated"] = float(pt.trace.meta["mean_n"])
                row["sideband_offset_hz"] = m.sideband_offset / TWO_PI
                row["sideband_width_hz"] = m.sideband_width / TWO_PI
                row["central_width_hz"] = m.central.width / TWO_PI if m.central else math.nan
                row["height_ratio"] = m.height_ratio
                row["integrated_ratio"] = m.integrated_ratio
                name = f"spectrum_{k:02d}.csv"
                output.write_spectrum_csv(out / name, pt.trace, {"power_dbm": cal.power_dbm})
                files[name] = output.SPECTRUM_COLUMNS
                traces.append(pt.trace)
                labels.append(f"{cal.power_dbm:g} dBm")
            rows.append(row)
        output.write_table_csv(out / "sweep.csv", output.SWEEP_COLUMNS, rows)
        files["sweep.csv"] = output.SWEEP_COLUMNS
        output.plot_sweep(out / "sweep.svg", traces, labels)
        files["sweep.svg"] = None
        results["points"] = len(rows)
        results["failed_points"] = sum(r["status"] != "ok" for r in rows)
        try:
            widths = width_vs_n_report(sweep, p.g)
        except MollowCavityError as exc:
            results["width_report"] = str(exc)
        else:
            wrows = [
                {
                    "power_dbm": w.power_dbm,
                    "mean_n_sidebands": w.mean_n,
                    "sideband_width_hz": w.width / TWO_PI,
                    "reference_2g_hz": w.reference / TWO_PI,
                    "ratio": w.ratio,
                }
                for w in widths
            ]
            output.write_table_csv(out / "widths.csv", output.WIDTH_COLUMNS, wrows)
            files["widths.csv"] = output.WIDTH_COLUMNS
            output.plot_widths(out / "widths.svg", widths)
            files["widths.svg"] = None

    elif cfg.mode in ("analytic", "mollow"):
        grid = default_grid(cfg.system_params(), cfg.span, cfg.points)
        if cfg.mode == "analytic":
            ap = AnalyticTripletParams(cfg.omega_a, cfg.gamma1, cfg.g, cfg.mean_n)
            trace = analytic_trace(ap, grid, "triplet")
            side = "gaussian"
        else:
            mp = MollowParams(cfg.omega_a, cfg.gamma1, cfg.rabi_omega)
            trace = analytic_trace(mp, grid, "mollow")
            side = "lorentzian"
        _spectrum_outputs(cfg, out, trace, files, results, fits_model=side, joint=True)

    elif cfg.mode in ("fit", "report"):
        trace = output.load_spectrum(cfg.input)
        metrics = triplet_metrics(trace, rbw=cfg.rbw)
        results.update(metrics_summary(metrics))
        output.plot_spectrum(out / "fit.svg", trace, [metrics.central, metrics.left, metrics.right])
        files["fit.svg"] = None
        if cfg.mode == "report":
            _comparison(out, files, results)

    manifest = output.write_manifest(out, cfg.snapshot(), files, results)
    return OutputBundle(out, manifest, files, results)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mollow-cavity",
        description="Emission spectra of a driven atom strongly coupled to a cavity.",
    )
    ap.add_argument("--config", help="config file (key = value with sections) or a previous manifest.json")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--power-dbm", type=float, nargs="+", help="drive power(s) in dBm; overrides the file")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--method", choices=METHODS, help="spectrum method (default fft)")
    ap.add_argument("--rbw", help="resolution bandwidth for the coherent line, e.g. '1 MHz'")
    ap.add_argument("--workers", type=int, help="parallel sweep workers (default $MOLLOW_CAVITY_WORKERS or 1)")
    ap.add_argument("--input", help="spectrum CSV for fit and report modes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {
        "mode": args.mode,
        "io.out": args.out,
        "drive.power_dbm": args.power_dbm,
        "run.method": args.method,
        "run.rbw": args.rbw,
        "run.workers": args.workers,
        "io.input": args.input,
    }
    try:
        cfg = parse_config(args.config, overrides, args.preset)
        bundle = run(cfg)
    except Exception as exc:  # every failure leaves a machine-readable record
        err = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            err.update(key=exc.key, line=exc.line)
        print(json.dumps(err), file=sys.stderr)
        log.debug("run failed", exc_info=True)
        return 2 if isinstance(exc, ConfigError) else 1
    print(json.dumps({"manifest": str(bundle.manifest), "results": bundle.results}, default=output._json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
