"""Scenario files, measured gain tables, orchestration and CSV/JSON output.

A scenario is a JSON document with ``schema_version`` and four blocks:

``fiber``
    Datasheet parameters in engineering units (dB/km, ps/nm/km, um^2, ...).
``raman``
    ``mode`` ``"analytic"`` (fit parameters) or ``"measured"`` (gain CSV).
``plan``
    Either an explicit ``channels`` list or a slot ``grid`` with an optional
    random ``occupancy``.
``run``
    Model selection, polarization, DBP channels, SSFM settings and ASE power.

Every omitted field is filled with its default and listed in
:attr:`ScenarioConfig.defaults`; :meth:`ScenarioConfig.echo` returns the
fully resolved document, which loads back to an identical configuration.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, InvalidGridError, RamanNliError
from .fiber import ChannelPlan, FiberSpec, build_psd, dbm_to_w, plan_from_arrays, sample_network_occupancy, w_to_dbm
from .gn import NliConfig, closed_form_report, nli_report, scaling_factors, scaling_spm, worker_count
from .profile import PowerProfile, raman_ode_profile, triangular_profile, uniform_loss_profile
from .raman import (
    NonlinearTransfer,
    RamanFitParams,
    RamanSpectrum,
    nonlinear_transfer,
    raman_time_constant,
)
from .ssfm import SsfmConfig, check_convergence, measure_delta_eta, resource_estimate

SCHEMA_VERSION = 1
MODELS = ("gn-integral", "closed-form", "ssfm", "compare")
SOURCES = ("gn", "cf", "ssfm")
MAX_TABLE_FREQUENCY = 40e12

_FIT = RamanFitParams()

FIBER_DEFAULTS: dict[str, Any] = {
    "alpha_db_km": 0.16,
    "dispersion_ps_nm_km": 16.4,
    "slope_ps_nm2_km": 0.067,
    "gamma_per_w_km": None,
    "a_eff_um2": 81.8,
    "lambda0_nm": 1550.0,
    "n2_m2_per_w": 2.1e-20,
    "c_r_per_w_km_thz": 0.0236,
    "length_km": 100.0,
}

RAMAN_DEFAULTS: dict[str, Any] = {
    "mode": "analytic",
    "slope_m_per_w_hz": _FIT.slope,
    "support_thz": _FIT.support / 1e12,
    "ripple_amplitude_m_per_w": _FIT.ripple_amplitude,
    "ripple_rate_rad_per_thz": _FIT.ripple_rate * 1e12,
    "offset_m_per_w": _FIT.offset,
    "csv": None,
    "polarization_averaged": False,
    "real_offset_m_per_w": 0.0,
    "n2": None,
    "lambda0_nm": None,
    "f_r": None,
}

PLAN_DEFAULTS: dict[str, Any] = {
    "symbol_rate_gbd": 5.0,
    "roll_off": 1e-4,
    "power_dbm": -8.0,
    "channels": None,
    "grid": None,
    "occupancy": None,
}

GRID_DEFAULTS: dict[str, Any] = {"slots": 15, "spacing_ghz": 5.005, "center_ghz": 0.0}
OCCUPANCY_DEFAULTS: dict[str, Any] = {"fraction": 1.0, "seed": 0, "low_to_high_ratio": 0.1}

SSFM_DEFAULTS: dict[str, Any] = {
    "steps": 10000,
    "n_symbols": 2**13,
    "realizations": 2,
    "seed": 0,
    "precision": "double",
    "distribution": "log",
    "oversampling": 2.0,
    "check_convergence": False,
}

RUN_DEFAULTS: dict[str, Any] = {
    "model": "gn-integral",
    "polarization": "dual",
    "channels": None,
    "dbp": [],
    "profile": "triangular",
    "band_points": None,
    "resolution_ghz": None,
    "rel_tol": 1e-3,
    "p_ase_w": 0.0,
    "scaling_dfmax_thz": 15.0,
    "ssfm": SSFM_DEFAULTS,
}

# (low, high) plausibility ranges; values outside only raise a warning
_SANITY = {
    "fiber.alpha_db_km": (0.1, 0.5),
    "fiber.dispersion_ps_nm_km": (-30.0, 30.0),
    "fiber.slope_ps_nm2_km": (-0.2, 0.2),
    "fiber.a_eff_um2": (10.0, 200.0),
    "fiber.lambda0_nm": (1260.0, 1675.0),
    "fiber.n2_m2_per_w": (1e-20, 5e-20),
    "fiber.c_r_per_w_km_thz": (0.0, 0.1),
    "fiber.length_km": (1.0, 300.0),
    "plan.power_dbm": (-30.0, 20.0),
    "plan.symbol_rate_gbd": (0.1, 200.0),
}

_BLOCKS = {"fiber": FIBER_DEFAULTS, "raman": RAMAN_DEFAULTS, "plan": PLAN_DEFAULTS, "run": RUN_DEFAULTS}


# --------------------------------------------------------------------------
# measured gain table


@dataclass(frozen=True, eq=False)
class RamanGainTable:
    """One-sided co-polarized Raman gain table.

    Attributes
    ----------
    freq : ndarray
        Frequency offsets (Hz), strictly increasing from 0.
    gain : ndarray
        Co-polarized gain (m/W); zero at 0 Hz.
    """

    freq: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        if self.freq.size < 3:
            raise InvalidGridError(f"gain table has {self.freq.size} rows; interpolation needs at least 3")

    @property
    def max_frequency(self) -> float:
        return float(self.freq[-1])

    def spectrum(self, lambda0: float = 1550e-9, n2: float = 2.1e-20, real_offset: float = 0.0) -> RamanSpectrum:
        return RamanSpectrum.measured(self.freq, self.gain, lambda0, n2, real_offset)


def load_raman_gain_csv(path, polarization_averaged: bool = False) -> RamanGainTable:
    """Read a ``freq_hz,gain_m_per_w`` table.

    Parameters
    ----------
    path : path-like
    polarization_averaged : bool
        Input holds polarization-averaged gain; values are doubled to obtain
        the co-polarized gain.

    Raises
    ------
    ConfigError
        Bad header, unparsable value, negative, repeated or decreasing
        frequency, missing zero row, or frequency beyond 40 THz. Messages
        carry the 1-based line number.
    InvalidGridError
        Fewer than three rows.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read gain table {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigError(f"{path}: empty file") from None
    if header != ["freq_hz", "gain_m_per_w"]:
        raise ConfigError(f"{path}: line 1: header must be 'freq_hz,gain_m_per_w', got {','.join(header)!r}")
    freq, gain = [], []
    for line, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise ConfigError(f"{path}: line {line}: expected 2 columns, got {len(row)}")
        try:
            f, g = float(row[0]), float(row[1])
        except ValueError:
            raise ConfigError(f"{path}: line {line}: non-numeric value in {row!r}") from None
        if not (math.isfinite(f) and math.isfinite(g)):
            raise ConfigError(f"{path}: line {line}: non-finite value")
        if f < 0:
            raise ConfigError(f"{path}: line {line}: negative frequency {f:g}")
        if f > MAX_TABLE_FREQUENCY:
            raise ConfigError(f"{path}: line {line}: frequency {f:g} Hz beyond 40 THz")
        if freq and f <= freq[-1]:
            raise ConfigError(f"{path}: line {line}: frequency {f:g} not above previous {freq[-1]:g}")
        if not freq and (f != 0 or g != 0):
            raise ConfigError(f"{path}: line {line}: table must start with a zero row (0 Hz, zero gain)")
        freq.append(f)
        gain.append(g)
    table = RamanGainTable(np.array(freq), np.array(gain) * (2.0 if polarization_averaged else 1.0))
    if table.max_frequency < 30e12:
        warnings.warn(
            f"{path}: gain table stops at {table.max_frequency / 1e12:.3g} THz; "
            "Kramers-Kronig accuracy is degraded",
            stacklevel=2,
        )
    return table


def write_gain_csv(path, freq, gain) -> None:
    """Write a ``freq_hz,gain_m_per_w`` table."""
    _write_rows(path, ["freq_hz", "gain_m_per_w"], zip(freq, gain))


# --------------------------------------------------------------------------
# scenario config


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Validated scenario with unit conversions applied.

    Attributes
    ----------
    raw : dict
        Fully resolved document in engineering units.
    defaults : tuple of str
        Dotted keys that were filled with defaults.
    warnings : tuple of str
        Plausibility warnings.
    fiber : FiberSpec
    plan : ChannelPlan
        Occupied channels only.
    base_dir : Path
        Directory against which relative file paths were resolved.
    """

    raw: dict
    defaults: tuple[str, ...]
    warnings: tuple[str, ...]
    fiber: FiberSpec
    plan: ChannelPlan
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def model(self) -> str:
        return self.raw["run"]["model"]

    @property
    def polarization(self) -> str:
        return self.raw["run"]["polarization"]

    def echo(self) -> dict:
        """Resolved document; loading it reproduces this configuration."""
        return copy.deepcopy(self.raw)

    def spectrum(self) -> RamanSpectrum:
        r = self.raw["raman"]
        n2 = r["n2"]
        lambda0 = r["lambda0_nm"] * 1e-9
        if r["mode"] == "analytic":
            params = RamanFitParams(
                slope=r["slope_m_per_w_hz"],
                support=r["support_thz"] * 1e12,
                ripple_amplitude=r["ripple_amplitude_m_per_w"],
                ripple_rate=r["ripple_rate_rad_per_thz"] * 1e-12,
                offset=r["offset_m_per_w"],
            )
            spec = RamanSpectrum.analytic(params, lambda0, n2)
        else:
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message=".*gain table")
                table = load_raman_gain_csv(r["csv"], r["polarization_averaged"])
                spec = table.spectrum(lambda0, n2, r["real_offset_m_per_w"])
        if r["f_r"] is not None:
            spec = replace(spec, fraction=float(r["f_r"]))
        return spec

    def transfer(self, polarization: str | None = None) -> NonlinearTransfer:
        return nonlinear_transfer(self.spectrum(), polarization or self.polarization)

    def time_constant(self) -> float | None:
        """Raman time constant (s) of an analytic fit; None for measured spectra."""
        spec = self.spectrum()
        if spec.params is None:
            return None
        return raman_time_constant(spec.params, spec.lambda0, spec.n2)

    def ssfm_config(self) -> SsfmConfig:
        s = self.raw["run"]["ssfm"]
        return SsfmConfig(
            steps=s["steps"], distribution=s["distribution"], seed=s["seed"], realizations=s["realizations"],
            n_symbols=s["n_symbols"], oversampling=s["oversampling"], precision=s["precision"],
        )

    def nli_config(self, dbp: bool = False, channels: Sequence[int] | None = None) -> NliConfig:
        run = self.raw["run"]
        res = run["resolution_ghz"]
        return NliConfig(
            polarization=self.polarization, profile=run["profile"],
            resolution=None if res is None else res * 1e9,
            channels=None if channels is None else tuple(channels), dbp=dbp,
            rel_tol=run["rel_tol"], band_points=self.band_points,
        )

    def psd(self):
        """Signal PSD sampled at the finer of the integration resolution and an eighth of the narrowest channel."""
        res = self.nli_config().checked_resolution(self.plan)
        return build_psd(self.plan, min(res, self.plan.symbol_rates.min() / 8))

    @property
    def band_points(self) -> int:
        bp = self.raw["run"]["band_points"]
        if bp is not None:
            return int(bp)
        return 9 if self.model == "compare" else 1

    @property
    def channels(self) -> tuple[int, ...]:
        sel = self.raw["run"]["channels"]
        return tuple(range(len(self.plan))) if sel is None else tuple(sel)

    @property
    def dbp_channels(self) -> tuple[int, ...]:
        dbp = self.raw["run"]["dbp"]
        if dbp == "all":
            return self.channels
        return tuple(i for i in self.channels if i in set(dbp))


def apply_overrides(doc: dict, overrides: Iterable[str]) -> dict:
    """Set dotted keys from ``KEY=VALUE`` strings; values are parsed as JSON when possible."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario: top level must be an object")
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form KEY=VALUE")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError(f"override key {key!r} is malformed")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = doc
        for p in parts[:-1]:
            child = node.setdefault(p, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override {key!r}: {p!r} is not a block")
            node = child
        node[parts[-1]] = value
    return doc


def load_scenario(path, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Read, override and validate a scenario file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(apply_overrides(doc, overrides), base_dir=path.parent)


def scenario_from_dict(doc: dict, base_dir=None) -> ScenarioConfig:
    """Validate a scenario document.

    Raises
    ------
    ConfigError
        The message starts with the dotted name of the offending field.
    """
    if not isinstance(doc, dict):
        raise ConfigError("scenario: top level must be an object")
    base_dir = Path.cwd() if base_dir is None else Path(base_dir)
    defaults: list[str] = []
    notes: list[str] = []
    version = doc.get("schema_version", SCHEMA_VERSION)
    if "schema_version" not in doc:
        defaults.append("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - set(_BLOCKS) - {"schema_version"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level key")
    if "raman" not in doc:
        notes.append("raman: block missing; using the analytic fit defaults")
    raw: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    for name, spec in _BLOCKS.items():
        raw[name] = _fill(doc.get(name, {}), spec, name, defaults)

    fiber = _resolve_fiber(raw["fiber"])
    _resolve_raman(raw["raman"], raw["fiber"], base_dir, defaults)
    plan = _resolve_plan(raw["plan"], defaults)
    _resolve_run(raw["run"], len(plan), defaults)

    for key, (lo, hi) in _SANITY.items():
        block, name = key.split(".")
        value = raw[block][name]
        if value is not None and not lo <= value <= hi:
            notes.append(f"{key}: {value!r} outside the usual range [{lo:g}, {hi:g}]")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return ScenarioConfig(raw, tuple(defaults), tuple(notes), fiber, plan, base_dir)


def _fill(given: Any, spec: dict, prefix: str, defaults: list[str]) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"{prefix}: must be an object")
    unknown = set(given) - set(spec)
    if unknown:
        raise ConfigError(f"{prefix}.{sorted(unknown)[0]}: unknown field")
    out = {}
    for key, default in spec.items():
        if key in given:
            out[key] = given[key]
        else:
            out[key] = copy.deepcopy(default)
            defaults.append(f"{prefix}.{key}")
    return out


def _number(block: dict, key: str, prefix: str, positive: bool = False, nonneg: bool = False,
            optional: bool = False, integer: bool = False):
    value = block[key]
    name = f"{prefix}.{key}"
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{name}: must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(f"{name}: must be non-negative, got {value!r}")
    block[key] = int(value) if integer else value
    return block[key]


def _choice(block: dict, key: str, prefix: str, options: Sequence[str]) -> str:
    value = block[key]
    if value not in options:
        raise ConfigError(f"{prefix}.{key}: must be one of {', '.join(options)}, got {value!r}")
    return value


def _resolve_fiber(f: dict) -> FiberSpec:
    _number(f, "alpha_db_km", "fiber", nonneg=True)
    _number(f, "dispersion_ps_nm_km", "fiber")
    _number(f, "slope_ps_nm2_km", "fiber")
    _number(f, "gamma_per_w_km", "fiber", nonneg=True, optional=True)
    _number(f, "a_eff_um2", "fiber", positive=True)
    _number(f, "lambda0_nm", "fiber", positive=True)
    _number(f, "n2_m2_per_w", "fiber", positive=True)
    _number(f, "c_r_per_w_km_thz", "fiber", nonneg=True)
    _number(f, "length_km", "fiber", positive=True)
    try:
        return FiberSpec.from_engineering(
            alpha_db_km=f["alpha_db_km"], D_ps_nm_km=f["dispersion_ps_nm_km"], S_ps_nm2_km=f["slope_ps_nm2_km"],
            gamma_per_w_km=f["gamma_per_w_km"], a_eff_um2=f["a_eff_um2"], lambda0_nm=f["lambda0_nm"],
            n2=f["n2_m2_per_w"], c_r_per_w_km_thz=f["c_r_per_w_km_thz"], length_km=f["length_km"],
        )
    except RamanNliError as exc:
        raise ConfigError(f"fiber: {exc}") from exc


def _resolve_raman(r: dict, fiber_block: dict, base_dir: Path, defaults: list[str]) -> None:
    mode = _choice(r, "mode", "raman", ("analytic", "measured"))
    if r["n2"] is None:
        r["n2"] = fiber_block["n2_m2_per_w"]
    if r["lambda0_nm"] is None:
        r["lambda0_nm"] = fiber_block["lambda0_nm"]
    _number(r, "n2", "raman", positive=True)
    _number(r, "lambda0_nm", "raman", positive=True)
    _number(r, "f_r", "raman", nonneg=True, optional=True)
    if r["f_r"] is not None and r["f_r"] >= 1:
        raise ConfigError(f"raman.f_r: must be below 1, got {r['f_r']!r}")
    for key in ("slope_m_per_w_hz", "support_thz"):
        _number(r, key, "raman", positive=True)
    for key in ("ripple_amplitude_m_per_w", "ripple_rate_rad_per_thz", "offset_m_per_w", "real_offset_m_per_w"):
        _number(r, key, "raman")
    if not isinstance(r["polarization_averaged"], bool):
        raise ConfigError("raman.polarization_averaged: expected true or false")
    if mode == "measured":
        if not isinstance(r["csv"], str):
            raise ConfigError("raman.csv: measured mode needs a gain table path")
        path = Path(r["csv"])
        path = path if path.is_absolute() else (base_dir / path)
        if not path.is_file():
            raise ConfigError(f"raman.csv: file {str(path)!r} does not exist")
        r["csv"] = str(path.resolve())
        for key in ("slope_m_per_w_hz", "support_thz", "ripple_amplitude_m_per_w", "ripple_rate_rad_per_thz",
                    "offset_m_per_w"):
            if f"raman.{key}" in defaults:
                defaults.remove(f"raman.{key}")


def _resolve_plan(p: dict, defaults: list[str]) -> ChannelPlan:
    rate = _number(p, "symbol_rate_gbd", "plan", positive=True)
    roll = _number(p, "roll_off", "plan", nonneg=True)
    power = _number(p, "power_dbm", "plan")
    if (p["channels"] is None) == (p["grid"] is None):
        raise ConfigError("plan: give exactly one of 'channels' or 'grid'")
    if p["channels"] is not None:
        if p["occupancy"] is not None:
            raise ConfigError("plan.occupancy: only valid with a slot grid")
        if not isinstance(p["channels"], list) or not p["channels"]:
            raise ConfigError("plan.channels: must be a non-empty list")
        spec = {"frequency_ghz": None, "symbol_rate_gbd": rate, "power_dbm": power}
        resolved = []
        for i, ch in enumerate(p["channels"]):
            name = f"plan.channels[{i}]"
            entry = _fill(ch, spec, name, defaults)
            _number(entry, "frequency_ghz", name)
            _number(entry, "symbol_rate_gbd", name, positive=True)
            _number(entry, "power_dbm", name)
            resolved.append(entry)
        p["channels"] = resolved
        build = lambda: plan_from_arrays(
            [c["frequency_ghz"] * 1e9 for c in resolved], [c["symbol_rate_gbd"] * 1e9 for c in resolved],
            [float(dbm_to_w(c["power_dbm"])) for c in resolved], roll,
        )
    else:
        grid = p["grid"] = _fill(p["grid"], GRID_DEFAULTS, "plan.grid", defaults)
        _number(grid, "slots", "plan.grid", positive=True, integer=True)
        _number(grid, "spacing_ghz", "plan.grid", positive=True)
        _number(grid, "center_ghz", "plan.grid")
        occ = None
        if p["occupancy"] is not None:
            occ = p["occupancy"] = _fill(p["occupancy"], OCCUPANCY_DEFAULTS, "plan.occupancy", defaults)
            _number(occ, "fraction", "plan.occupancy", positive=True)
            if occ["fraction"] > 1:
                raise ConfigError(f"plan.occupancy.fraction: must be at most 1, got {occ['fraction']!r}")
            _number(occ, "seed", "plan.occupancy", nonneg=True, integer=True)
            _number(occ, "low_to_high_ratio", "plan.occupancy", positive=True)

        def build():
            pw = float(dbm_to_w(power))
            if occ is None:
                return ChannelPlan.uniform_grid(grid["slots"], grid["spacing_ghz"] * 1e9, rate * 1e9, pw, roll,
                                                grid["center_ghz"] * 1e9)
            plan = sample_network_occupancy(grid["slots"], occ["fraction"], occ["seed"], grid["spacing_ghz"] * 1e9,
                                            rate * 1e9, pw, roll, occ["low_to_high_ratio"])
            shift = grid["center_ghz"] * 1e9
            return ChannelPlan(tuple(replace(c, frequency=c.frequency + shift) for c in plan.channels))

    try:
        return build().only_occupied()
    except RamanNliError as exc:
        raise ConfigError(f"plan: {exc}") from exc


def _resolve_run(r: dict, n_channels: int, defaults: list[str]) -> None:
    _choice(r, "model", "run", MODELS)
    _choice(r, "polarization", "run", ("dual", "single"))
    _choice(r, "profile", "run", ("triangular", "ode", "none"))
    _number(r, "band_points", "run", positive=True, optional=True, integer=True)
    _number(r, "resolution_ghz", "run", positive=True, optional=True)
    _number(r, "rel_tol", "run", positive=True)
    _number(r, "p_ase_w", "run", nonneg=True)
    _number(r, "scaling_dfmax_thz", "run", positive=True)
    for key in ("channels", "dbp"):
        value = r[key]
        if value is None and key == "channels":
            continue
        if key == "dbp" and value == "all":
            continue
        if not isinstance(value, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in value):
            raise ConfigError(f"run.{key}: expected a list of channel indices")
        bad = [i for i in value if not 0 <= i < n_channels]
        if bad:
            raise ConfigError(f"run.{key}: index {bad[0]} outside 0..{n_channels - 1}")
        if len(set(value)) != len(value):
            raise ConfigError(f"run.{key}: repeated channel index")
    if "run.ssfm" not in defaults:
        r["ssfm"] = _fill(r["ssfm"], SSFM_DEFAULTS, "run.ssfm", defaults)
    s = r["ssfm"]
    for key in ("steps", "n_symbols", "realizations"):
        _number(s, key, "run.ssfm", positive=True, integer=True)
    _number(s, "seed", "run.ssfm", nonneg=True, integer=True)
    _number(s, "oversampling", "run.ssfm", positive=True)
    _choice(s, "precision", "run.ssfm", ("double", "single"))
    _choice(s, "distribution", "run.ssfm", ("log", "uniform"))
    if not isinstance(s["check_convergence"], bool):
        raise ConfigError("run.ssfm.check_convergence: expected true or false")
    n = s["n_symbols"]
    if n & (n - 1):
        raise ConfigError(f"run.ssfm.n_symbols: must be a power of two, got {n}")


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class ResultRow:
    """One channel outcome of one model.

    ``r_xpm_db`` is the overall scaling of the channel's NLI by the real
    Raman response, ``10 log10(eta / eta_flat)`` with ``eta_flat`` computed
    with a frequency-flat real part. ``delta_model_sim_db`` is only set in
    compare mode (model minus simulation ``delta_eta_db``).
    """

    index: int
    frequency: float
    power_dbm: float
    eta: float
    snr_db: float
    r_spm_db: float
    r_xpm_db: float
    delta_eta_db: float
    source: str
    dbp: bool = False
    delta_model_sim_db: float | None = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source tag must be one of {SOURCES}, got {self.source!r}")


REPORT_COLUMNS = ("channel_index", "f_center_hz", "power_dbm", "eta_1_per_w2", "snr_db", "r_spm_db", "r_xpm_db",
                  "delta_eta_db", "source", "dbp")


@dataclass
class ScenarioReport:
    """Rows plus a run log (timings, convergence flags, config echo)."""

    rows: list[ResultRow]
    log: dict

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, i) -> ResultRow:
        return self.rows[i]

    @property
    def converged(self) -> bool:
        return all(v is not False for v in self.log.get("converged", {}).values())

    def select(self, source: str, dbp: bool = False) -> list[ResultRow]:
        return [r for r in self.rows if r.source == source and r.dbp == dbp]


def _profile_for(config: ScenarioConfig, psd, H: NonlinearTransfer) -> PowerProfile:
    kind = config.raw["run"]["profile"]
    if kind == "triangular":
        return triangular_profile(psd, config.fiber)
    if kind == "ode":
        return raman_ode_profile(psd, H.spectrum, config.fiber, channelization=psd.resolution)
    return uniform_loss_profile(config.fiber, f_grid=psd.freq)


def _model_rows(config: ScenarioConfig, H: NonlinearTransfer, source: str, log: dict,
                emit: Callable[[ResultRow], None] | None = None) -> list[ResultRow]:
    plan = config.plan
    p_ase = config.raw["run"]["p_ase_w"]
    psd = config.psd()
    profile = _profile_for(config, psd, H)
    rows = []
    for dbp, chans in ((False, config.channels), (True, config.dbp_channels)):
        if not chans:
            continue
        start = time.perf_counter()
        cfg = config.nli_config(dbp, chans)
        if source == "gn":
            report = nli_report(plan, psd, config.fiber, H, profile, cfg, p_ase)
        else:
            report = closed_form_report(plan, psd, config.fiber, H, profile, cfg, p_ase)
        log["timings"][f"{source}{'-dbp' if dbp else ''}"] = time.perf_counter() - start
        for ch in report.channels:
            rows.append(ResultRow(
                index=ch.index, frequency=ch.frequency, power_dbm=float(w_to_dbm(ch.power)), eta=ch.eta,
                snr_db=ch.snr_db, r_spm_db=float(10 * np.log10(ch.r_spm)),
                r_xpm_db=float(10 * np.log10(ch.eta / ch.eta_without_real)) if ch.eta_without_real else 0.0,
                delta_eta_db=float(ch.delta_eta_db), source=source, dbp=dbp,
            ))
            if emit is not None:
                emit(rows[-1])
    return rows


def _ssfm_rows(config: ScenarioConfig, H: NonlinearTransfer, log: dict,
               emit: Callable[[ResultRow], None] | None = None) -> list[ResultRow]:
    plan = config.plan
    cfg = config.ssfm_config()
    p_ase = config.raw["run"]["p_ase_w"]
    chans = config.channels
    modes = (False, True) if config.dbp_channels else (False,)
    log["resource_estimate"] = resource_estimate(plan, cfg, 2)
    if config.raw["run"]["ssfm"]["check_convergence"]:
        start = time.perf_counter()
        ok, change = check_convergence(plan, config.fiber, H, cfg, chans)
        log["timings"]["ssfm-convergence"] = time.perf_counter() - start
        log["converged"]["ssfm"] = ok
        log["convergence_change_db"] = [float(c) for c in change]
    start = time.perf_counter()
    m = measure_delta_eta(plan, config.fiber, H, cfg, chans, modes)
    log["timings"]["ssfm"] = time.perf_counter() - start
    r_spm_db = float(10 * np.log10(scaling_spm(H)))
    rows = []
    for dbp in modes:
        run_h, run_ref = m.runs[dbp]
        keep = config.dbp_channels if dbp else chans
        for k, i in enumerate(m.channels):
            if i not in keep:
                continue
            ch = plan[i]
            snr_nli = float(run_h.snr[k])
            eta = 1.0 / (snr_nli * ch.power**2)
            noise = 1.0 / snr_nli + p_ase / ch.power
            rows.append(ResultRow(
                index=i, frequency=ch.frequency, power_dbm=float(w_to_dbm(ch.power)), eta=eta,
                snr_db=float(-10 * np.log10(noise)), r_spm_db=r_spm_db,
                r_xpm_db=float(10 * np.log10(run_ref.snr[k] / run_h.snr[k])),
                delta_eta_db=float(m.delta_eta_db[dbp][k]), source="ssfm", dbp=dbp,
            ))
            if emit is not None:
                emit(rows[-1])
        log["ssfm_snr_db"][str(dbp).lower()] = [float(v) for v in run_h.snr_db]
    return rows


def run_scenario(config: ScenarioConfig, on_row: Callable[[ResultRow], None] | None = None) -> ScenarioReport:
    """Run the model(s) requested by ``config.run.model``.

    ``compare`` runs the GN integral and the split-step simulation on the
    same plan and returns (gn, ssfm) pairs carrying the model-minus-
    simulation difference of ``delta_eta_db``. ``on_row`` is called for
    every finished row in output order.
    """
    log: dict[str, Any] = {"model": config.model, "timings": {}, "converged": {}, "ssfm_snr_db": {},
                           "defaults_applied": list(config.defaults), "warnings": list(config.warnings),
                           "config": config.echo()}
    H = config.transfer()
    start = time.perf_counter()
    try:
        if config.model == "gn-integral":
            rows = _model_rows(config, H, "gn", log, on_row)
        elif config.model == "closed-form":
            rows = _model_rows(config, H, "cf", log, on_row)
        elif config.model == "ssfm":
            rows = _ssfm_rows(config, H, log, on_row)
        else:
            model = _model_rows(config, H, "gn", log)
            sim = {(r.index, r.dbp): r for r in _ssfm_rows(config, H, log)}
            rows = []
            for r in model:
                s = sim[(r.index, r.dbp)]
                diff = r.delta_eta_db - s.delta_eta_db
                pair = [replace(r, delta_model_sim_db=diff), replace(s, delta_model_sim_db=diff)]
                rows += pair
                if on_row is not None:
                    for row in pair:
                        on_row(row)
    except RamanNliError as exc:
        exc.args = (f"scenario model {config.model!r}: {exc}",)
        raise
    log["timings"]["total"] = time.perf_counter() - start
    return ScenarioReport(rows, log)


def run_scenarios(configs: Sequence[ScenarioConfig]) -> list[ScenarioReport]:
    """Run several scenarios on ``RAMAN_NLI_THREADS`` workers; results keep input order."""
    workers = min(worker_count(), len(configs))
    if workers <= 1:
        return [run_scenario(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, configs))


# --------------------------------------------------------------------------
# writers

_path_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    key = str(Path(path).resolve())
    with _locks_guard:
        return _path_locks.setdefault(key, threading.Lock())


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return repr(float(v))


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _lock_for(path), path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def report_header(compare: bool = False) -> tuple[str, ...]:
    return REPORT_COLUMNS + (("delta_model_sim_db",) if compare else ())


def report_values(row: ResultRow, compare: bool = False) -> list:
    vals = [row.index, row.frequency, row.power_dbm, row.eta, row.snr_db, row.r_spm_db, row.r_xpm_db,
            row.delta_eta_db, row.source, row.dbp]
    if compare:
        vals.append(row.delta_model_sim_db)
    return vals


def write_report_csv(path, rows: Sequence[ResultRow], compare: bool | None = None) -> Path:
    """Per-channel report; the ``delta_model_sim_db`` column is added for compare results."""
    if compare is None:
        compare = any(r.delta_model_sim_db is not None for r in rows)
    return _write_rows(path, report_header(compare), (report_values(r, compare) for r in rows))


def write_spectrum_csv(path, H: NonlinearTransfer, f_max: float = 30e12, resolution: float = 10e9) -> Path:
    """Normalized real and gain parts and the transfer function on ``[-f_max, f_max]``."""
    n = int(round(f_max / resolution))
    f = np.arange(-n, n + 1) * resolution
    spec = H.spectrum
    re_h, im_h = H.real_part(f), H.imag_part(f)
    return _write_rows(path, ["freq_hz", "n_r", "g_r", "re_H", "im_H"],
                       zip(f, spec.normalized_real(f), spec.normalized_gain(f), re_h, im_h))


def write_scaling_csv(path, transfers: Sequence[NonlinearTransfer], df_max: float, points: int = 301) -> Path:
    """``R_XPM`` in dB on ``[0, df_max]`` for every transfer function, one polarization label per row."""
    grid = np.linspace(0.0, df_max, points)
    rows = []
    for H in transfers:
        s = scaling_factors(H, grid)
        rows += [(d, r, H.polarization) for d, r in zip(grid, s.r_xpm_db)]
    return _write_rows(path, ["delta_f_hz", "r_xpm_db", "polarization"], rows)


def write_profile_csv(path, profile: PowerProfile) -> Path:
    """Power profile in long format ``z_m, freq_hz, rho_db``."""
    rho_db = profile.rho_db
    rows = ((z, f, rho_db[i, j]) for i, z in enumerate(profile.z) for j, f in enumerate(profile.freq))
    return _write_rows(path, ["z_m", "freq_hz", "rho_db"], rows)


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _lock_for(path), path.open("w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
