"""Run configuration: a strict line-oriented ``key = value`` format.

Keys carry their unit as a suffix (``fwhm_ps``, ``V_m3``); every key has
exactly one accepted spelling, so a wrong or missing suffix is an error
rather than a silent rescaling. Laser values are SI; the other sections use
the units their suffix names.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

from .errors import ParseError, ValidationError
from .params import LaserParams

# config key -> LaserParams field
LASER_KEYS = {
    "eta_i": "eta_i",
    "V_m3": "V",
    "Gamma": "Gamma",
    "v_g_m_per_s": "v_g",
    "tau_p_s": "tau_p",
    "g0_per_m": "g0",
    "N_tr_per_m3": "N_tr",
    "eps_m3": "eps",
    "A_per_s": "A",
    "B_m3_per_s": "B",
    "C_m6_per_s": "C",
    "beta_sp": "beta_sp",
    "lambda_m": "wavelength",
    "kappa": "kappa",
}


@dataclass(frozen=True)
class DriveConfig:
    dc_frac: float = 0.0
    ac_frac: float = 4.0
    fwhm_ps: float = 500.0
    rise_fall_ps: float = 150.0
    window_ps: float = 1500.0
    output_dt_ps: float = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    # double-pulse sweep
    intervals_ns: tuple = (2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    dc_fracs: tuple = (0.0, 0.6, 0.9)
    block_ns: float = 1000.0
    # transmitter
    clock_mhz: float = 200.0
    slots: int = 100_000
    laser_count: int = 4
    attenuation_db: float = 0.0
    # leakage
    delay_bin_ps: float = 10.0
    energy_bin_pct: float = 1.0
    gap_cap: int = 8
    permutations: int = 100
    # count budget and bias selection
    delay_tol_ps: float = 10.0
    energy_tol_pct: float = 2.5
    qber_budget: float = 0.03
    loss_db: float = 18.5
    mu: float = 0.6
    e_intrinsic: float = 0.01
    det_efficiency: float = 0.6
    dark_rate_hz: float = 45.0
    n_detectors: int = 4
    # single trajectory and L-I curve
    sim_ns: float = 10.0
    pulse_starts_ns: tuple = (1.0, 3.0)
    f3db_ghz: float = 0.0
    li_max_frac: float = 4.0
    li_points: int = 81


@dataclass(frozen=True)
class RunConfig:
    laser: LaserParams = field(default_factory=LaserParams)
    drive: DriveConfig = field(default_factory=DriveConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output_dir: str = "out"
    seed: int = 0

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


SECTIONS = ("run", "laser", "drive", "experiment")
_RUN_KEYS = {"seed": int, "output_dir": str}
_NONNEG = {"dc_frac", "attenuation_db", "loss_db", "e_intrinsic", "dark_rate_hz", "f3db_ghz",
           "permutations"}
_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_KEY_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _types(cls):
    return {f.name: type(f.default) for f in fields(cls)}


_KEY_TYPES = {
    "run": _RUN_KEYS,
    "laser": {k: float for k in LASER_KEYS},
    "drive": _types(DriveConfig),
    "experiment": _types(ExperimentConfig),
}


def _stem(key):
    """Key with any trailing unit-looking suffix removed, for suffix hints."""
    return re.sub(r"(_(per_)?[a-zA-Z]*\d*)+$", "", key) or key


def _unknown_key(section, key):
    known = _KEY_TYPES[section]
    stem = _stem(key)
    close = [k for k in known if _stem(k) == stem or k == stem]
    if close:
        return ValidationError(key, f"wrong or missing unit suffix in [{section}]; expected {close[0]}")
    return ValidationError(key, f"unknown key in [{section}]")


def _convert(key, kind, raw, line):
    try:
        if kind is int:
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            return int(raw)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind is tuple:
            parts = [p.strip() for p in raw.split(",")]
            vals = tuple(float(p) for p in parts)
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ValueError
            return vals
        if not raw:
            raise ValueError
        return raw
    except ValueError:
        raise ParseError(f"bad value for {key}: {raw!r}", line) from None


def parse_config_text(text: str) -> RunConfig:
    values = {s: {} for s in SECTIONS}
    seen_sections = set()
    section = "run"
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno)
            if section in seen_sections:
                raise ParseError(f"duplicate section [{section}]", lineno)
            seen_sections.add(section)
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ParseError(f"expected 'key = value' or '[section]', got {stripped!r}", lineno)
        key, raw = m.group(1), m.group(2).strip()
        if key not in _KEY_TYPES[section]:
            raise _unknown_key(section, key)
        if key in values[section]:
            raise ParseError(f"duplicate key {key}", lineno)
        values[section][key] = _convert(key, _KEY_TYPES[section][key], raw, lineno)
    if "laser" not in seen_sections:
        raise ValidationError("laser", "missing required [laser] section")
    return build_config(values)


def build_config(values: dict) -> RunConfig:
    inv = {v: k for k, v in LASER_KEYS.items()}
    try:
        laser = LaserParams(**{LASER_KEYS[k]: v for k, v in values.get("laser", {}).items()})
    except ValidationError as exc:
        raise ValidationError(inv.get(exc.field, exc.field), str(exc).split(": ", 1)[-1]) from None
    drive = DriveConfig(**values.get("drive", {}))
    exp = ExperimentConfig(**values.get("experiment", {}))
    run = values.get("run", {})
    cfg = RunConfig(laser, drive, exp, run.get("output_dir", "out"), run.get("seed", 0))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed", "must be an unsigned 64-bit integer")
    for sect in (cfg.drive, cfg.experiment):
        for f in fields(sect):
            v = getattr(sect, f.name)
            if isinstance(v, tuple):
                if any(x < 0 for x in v):
                    raise ValidationError(f.name, "entries must be >= 0")
            elif v < 0 or (v == 0 and f.name not in _NONNEG):
                raise ValidationError(f.name, f"must be {'>= 0' if f.name in _NONNEG else '> 0'}, got {v!r}")
    d, e = cfg.drive, cfg.experiment
    if d.rise_fall_ps > d.fwhm_ps:
        raise ValidationError("rise_fall_ps", "must not exceed fwhm_ps")
    if d.window_ps < d.fwhm_ps:
        raise ValidationError("window_ps", "must be at least fwhm_ps")
    if not 0 < e.det_efficiency <= 1:
        raise ValidationError("det_efficiency", "must lie in (0, 1]")
    if e.e_intrinsic > 0.5:
        raise ValidationError("e_intrinsic", "must lie in [0, 0.5]")
    if e.gap_cap < 2:
        raise ValidationError("gap_cap", "must be >= 2")
    if 10.0 not in e.intervals_ns:
        raise ValidationError("intervals_ns", "must include the 10 ns normalization point")
    if max(e.intervals_ns) * 1e3 + d.window_ps > e.block_ns * 1e3:
        raise ValidationError("block_ns", "must exceed every interval plus the pulse window")


def parse_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config_text(serialize_config(c)) == c``."""
    out = ["[run]", f"seed = {cfg.seed}", f"output_dir = {cfg.output_dir}", "", "[laser]"]
    for key, name in LASER_KEYS.items():
        out.append(f"{key} = {_fmt(getattr(cfg.laser, name))}")
    for title, sect in (("drive", cfg.drive), ("experiment", cfg.experiment)):
        out += ["", f"[{title}]"]
        out += [f"{f.name} = {_fmt(getattr(sect, f.name))}" for f in fields(sect)]
    return "\n".join(out) + "\n"


def default_config_path():
    from importlib.resources import files

    return files("laserleak") / "data" / "vcsel787.cfg"
