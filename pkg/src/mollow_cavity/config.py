"""Run configuration: a flat ``key = value`` file with ``[section]`` headers.

Frequencies carry a unit suffix (Hz, kHz, MHz, GHz) and are converted to
angular frequency, ``omega = 2 pi f``, when parsed. Example::

    mode = spectrum

    [system]
    g = 12 MHz
    kappa = 5.2 MHz

    [drive]
    rabi = 25.2 MHz

Command-line flags override file values; both are addressed by dotted keys
such as ``system.g`` or ``drive.power_dbm``. In spectrum mode a drive power,
when present, is calibrated and takes precedence over ``drive.rabi``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, MollowCavityError
from .quantum_core import TWO_PI, SystemParams, device_params

MODES = ("spectrum", "sweep", "analytic", "mollow", "fit", "report")
METHODS = ("fft", "resolvent")
UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}

_FREQ = "frequency"
_FLOAT = "float"
_INT = "int"
_STR = "string"
_LIST = "float list"

# dotted key -> (kind, RunConfig attribute)
KEYS = {
    "mode": (_STR, "mode"),
    "preset": (_STR, "preset"),
    "system.omega_r": (_FREQ, "omega_r"),
    "system.omega_a": (_FREQ, "omega_a"),
    "system.g": (_FREQ, "g"),
    "system.kappa": (_FREQ, "kappa"),
    "system.gamma1": (_FREQ, "gamma1"),
    "system.omega_drive": (_FREQ, "omega_drive"),
    "system.n_max": (_INT, "n_max"),
    "drive.rabi": (_FREQ, "rabi_omega"),
    "drive.power_dbm": (_LIST, "powers_dbm"),
    "drive.mean_n": (_FLOAT, "mean_n"),
    "grid.span": (_FREQ, "span"),
    "grid.points": (_INT, "points"),
    "run.method": (_STR, "method"),
    "run.rbw": (_FREQ, "rbw"),
    "run.workers": (_INT, "workers"),
    "run.max_dim": (_INT, "max_dim"),
    "io.out": (_STR, "out_dir"),
    "io.input": (_STR, "input"),
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_FREQ_RE = re.compile(rf"^({_NUMBER})\s*([A-Za-z]+)$")


@dataclass
class RunConfig:
    """Validated run settings; every frequency is angular (rad/s)."""

    mode: str
    omega_r: float
    omega_a: float
    g: float
    kappa: float
    gamma1: float
    omega_drive: float
    n_max: int = 64
    rabi_omega: float | None = None
    powers_dbm: list | None = None
    mean_n: float | None = None
    span: float = 250e6 * TWO_PI
    points: int = 801
    method: str = "fft"
    rbw: float = 1e6 * TWO_PI
    workers: int | None = None
    max_dim: int = 256
    out_dir: str = "out"
    input: str | None = None
    preset: str | None = None
    raw: dict = field(default_factory=dict)

    def system_params(self, **changes) -> SystemParams:
        values = dict(
            omega_r=self.omega_r,
            omega_a=self.omega_a,
            g=self.g,
            kappa=self.kappa,
            gamma1=self.gamma1,
            omega_drive=self.omega_drive,
            rabi_omega=self.rabi_omega or 0.0,
            n_max=self.n_max,
        )
        values.update(changes)
        try:
            return SystemParams(**values)
        except MollowCavityError as exc:
            raise ConfigError(str(exc)) from exc

    def snapshot(self) -> dict:
        """Text-form settings that reproduce this configuration."""
        return dict(self.raw)

    def as_dict(self) -> dict:
        out = asdict(self)
        out.pop("raw")
        return out


def parse_frequency(text: str, key=None, line=None) -> float:
    """'12 MHz' -> 2 pi * 1.2e7 rad/s."""
    m = _FREQ_RE.match(text.strip())
    if not m:
        raise ConfigError(f"expected '<number> <unit>' with unit in Hz/kHz/MHz/GHz, got {text!r}", key, line)
    unit = m.group(2).lower()
    if unit not in UNITS:
        raise ConfigError(f"unknown unit {m.group(2)!r}; use Hz, kHz, MHz or GHz", key, line)
    return TWO_PI * float(m.group(1)) * UNITS[unit]


def _convert(kind, text, key, line):
    text = text.strip()
    try:
        if kind == _FREQ:
            return parse_frequency(text, key, line)
        if kind == _FLOAT:
            return float(text)
        if kind == _INT:
            value = int(text)
            return value
        if kind == _LIST:
            items = [s for s in re.split(r"[,\s]+", text.strip("[]")) if s]
            if not items:
                raise ConfigError("empty list", key, line)
            return [float(s) for s in items]
    except ValueError as exc:
        raise ConfigError(f"cannot read {text!r} as {kind}", key, line) from exc
    return text.strip("\"'")


def read_config_text(text: str) -> dict:
    """Parse config text into ``{dotted_key: (value_text, line)}``."""
    entries = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError("empty section name", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        dotted = f"{section}.{key}" if section else key
        if dotted not in KEYS:
            raise ConfigError("unknown key", dotted, lineno)
        if dotted in entries:
            raise ConfigError("duplicate key", dotted, lineno)
        entries[dotted] = (value, lineno)
    return entries


PRESETS = {
    "fig3a": {"mode": "sweep", "drive.power_dbm": ", ".join(f"{-123.5 + k:g}" for k in range(21))},
    "fig3c": {"mode": "spectrum", "drive.rabi": "25.2 MHz"},
    "fig4b": {"mode": "sweep", "drive.power_dbm": ", ".join(f"{-118.5 + 0.5 * k:g}" for k in range(13))},
    "mollow": {"mode": "mollow", "drive.rabi": "25 MHz"},
}


def parse_config(path=None, overrides: dict | None = None, preset: str | None = None) -> RunConfig:
    """Build a RunConfig from a file, a preset and flag overrides.

    Flag overrides win over everything. A preset sets the mode and fills in
    the drive settings the file leaves out.

    ``path`` may also point to a JSON manifest written by a previous run, in
    which case its config snapshot is used.

    Raises:
        ConfigError: unknown key, missing required field or bad value.
    """
    entries: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} not found")
        if path.suffix == ".json":
            snap = json.loads(path.read_text()).get("config")
            if not isinstance(snap, dict):
                raise ConfigError(f"{str(path)!r} has no config snapshot")
            for k, v in snap.items():
                if k not in KEYS:
                    raise ConfigError("unknown key in manifest snapshot", k)
                entries[k] = (str(v), None)
        else:
            entries = read_config_text(path.read_text())
    preset = preset or (entries["preset"][0].strip() if "preset" in entries else None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}", "preset")
        for k, v in PRESETS[preset].items():
            if k not in entries or k == "mode":
                entries[k] = (v, None)
        entries["preset"] = (preset, None)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in KEYS:
            raise ConfigError("unknown key", k)
        text = ", ".join(f"{x:g}" for x in v) if isinstance(v, (list, tuple)) else str(v)
        entries[k] = (text, None)
    return _build(entries)


def _build(entries: dict) -> RunConfig:
    base = device_params()
    values = {
        "omega_r": base.omega_r,
        "g": base.g,
        "kappa": base.kappa,
        "gamma1": base.gamma1,
        "n_max": base.n_max,
    }
    for dotted, (text, line) in entries.items():
        kind, attr = KEYS[dotted]
        values[attr] = _convert(kind, text, dotted, line)
    values.setdefault("omega_a", values["omega_r"])
    values.setdefault("omega_drive", values["omega_r"])
    if "mode" not in values:
        raise ConfigError("missing required field", "mode")
    mode = values["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}", "mode", entries["mode"][1])
    if values.get("method", "fft") not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}", "run.method", entries["run.method"][1])
    powers = values.get("powers_dbm")
    if powers is not None:
        if any(math.isnan(x) for x in powers):
            raise ConfigError("power list contains NaN", "drive.power_dbm")
        if mode == "sweep" and any(b <= a for a, b in zip(powers, powers[1:])):
            raise ConfigError("sweep powers must be strictly increasing", "drive.power_dbm")
    if values.get("points", 801) < 5:
        raise ConfigError("need at least 5 grid points", "grid.points")
    if values.get("workers") is not None and values["workers"] < 1:
        raise ConfigError("workers must be >= 1", "run.workers")

    required = {
        "sweep": ["powers_dbm"],
        "analytic": ["mean_n"],
        "mollow": ["rabi_omega"],
        "fit": ["input"],
        "report": ["input"],
    }.get(mode, [])
    attr_to_key = {attr: k for k, (_, attr) in KEYS.items()}
    for attr in required:
        if values.get(attr) is None:
            raise ConfigError(f"missing required field for mode '{mode}'", attr_to_key[attr])
    if mode == "spectrum" and values.get("rabi_omega") is None and not powers:
        raise ConfigError("spectrum mode needs drive.rabi or drive.power_dbm", "drive.rabi")
    if mode == "spectrum" and powers and len(powers) != 1:
        raise ConfigError("spectrum mode takes a single power", "drive.power_dbm")

    raw = {k: text for k, (text, _) in sorted(entries.items())}
    return RunConfig(raw=raw, **values)
