"""Scenario sweeps: simulate, attack, measure, filter, quantise and report.

A sweep is a grid of cells ``(scenario, r, seed)``.  Each cell runs the
whole pipeline independently, so cells can be evaluated in any order or in
parallel; reports are always written in grid order.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .attack import AveragingDomain, average_power, collude_estimate
from .channel import (
    Geometry,
    LargeScaleParams,
    ProbeTrace,
    RadioParams,
    ScenarioKind,
    ScenarioSpec,
    carrier_wavelength,
    simulate_trace,
)
from .dsp import FilterChoice, mwa, negotiate_filter, suppress_low
from .errors import ConfigurationError
from .keygen import generate_key, kdr, reconcilable
from .metrics import MetricsReport, capacity_report, secret_key_capacity
from .randomness import RandomnessReport, run_suite

log = logging.getLogger(__name__)

CONFIG_SECTION = "experiment"


@dataclass(frozen=True)
class Environment:
    """Propagation preset; indoor and outdoor differ only in small-scale spread."""

    name: str
    small_scale_sigma_db: float
    path_loss_exponent: float = 3.0
    shadow_sigma_db: float = 4.0
    shadow_decorr_dist: float = 75.0
    noise_sigma_db: float = 0.5


ENVIRONMENTS = {
    "indoor": Environment("indoor", small_scale_sigma_db=4.5),
    "outdoor": Environment("outdoor", small_scale_sigma_db=5.0),
}

SCENARIOS: dict[str, tuple[ScenarioKind, str]] = {
    "Ia": (ScenarioKind.STATIC, "indoor"),
    "Ib": (ScenarioKind.MOVING_SCATTERERS, "indoor"),
    "Ic": (ScenarioKind.MOVING_BOB, "indoor"),
    "Id": (ScenarioKind.MOVING_BOB_AND_SCATTERERS, "indoor"),
    "Ob": (ScenarioKind.MOVING_SCATTERERS, "outdoor"),
    "Od": (ScenarioKind.MOVING_BOB_AND_SCATTERERS, "outdoor"),
}


def _tuple(value, cast) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple[str, ...] = tuple(SCENARIOS)
    r_lambdas: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0)
    mwa_windows: tuple[int, ...] = (0, 5, 15, 25, 35, 45)
    key_length: int = 256
    z_max: int = 100
    bin_db: float = 1.0
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "results"
    distance: float = 150.0
    n_eves: int = 4
    n_rounds: int = 10_000
    probe_interval: float = 0.02
    coherence_time: float = 0.14
    bob_speed: float = 1.0
    arena_radius: float = 120.0
    heading_sigma: float = 0.05
    bob_only_fading_scale: float = 0.4
    domain: str = "linear"
    feasibility_floor_bits: float = 0.1
    curve_z_max: int = 30

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenarios", _tuple(self.scenarios, str))
        object.__setattr__(self, "r_lambdas", _tuple(self.r_lambdas, float))
        object.__setattr__(self, "mwa_windows", _tuple(self.mwa_windows, int))
        object.__setattr__(self, "seeds", _tuple(self.seeds, int))
        if not self.scenarios:
            raise ConfigurationError("scenarios", "at least one scenario is required")
        unknown = [s for s in self.scenarios if s not in SCENARIOS]
        if unknown:
            raise ConfigurationError("scenarios", f"unknown {unknown}; choose from {list(SCENARIOS)}")
        if not self.seeds:
            raise ConfigurationError("seeds", "at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds", "duplicate seeds")
        if not self.r_lambdas or min(self.r_lambdas) < 0.5:
            raise ConfigurationError("r_lambdas", "every ring radius must be at least half a wavelength")
        for w in self.mwa_windows:
            if w < 0 or (w > 1 and w % 2 == 0):
                raise ConfigurationError("mwa_windows", f"window {w} must be 0, 1 or odd")
        if not 1 <= self.key_length <= self.n_rounds:
            raise ConfigurationError("key_length", "must lie in 1..n_rounds")
        if not 2 <= self.z_max <= self.n_rounds - 1:
            raise ConfigurationError("z_max", "must lie in 2..n_rounds-1")
        if not 0 <= self.curve_z_max <= self.n_rounds - 1:
            raise ConfigurationError("curve_z_max", "must lie in 0..n_rounds-1")
        if not self.bin_db > 0:
            raise ConfigurationError("bin_db", "must be positive")
        if self.n_eves < 1:
            raise ConfigurationError("n_eves", "at least one eavesdropper is required")
        try:
            AveragingDomain(self.domain)
        except ValueError:
            raise ConfigurationError("domain", "must be 'linear' or 'db'") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def config_hash(self) -> str:
        """SHA-256 of every field except the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def setup(self, scenario: str, r_lambda: float, seed: int):
        """Simulation inputs ``(spec, geometry, large_scale, radio)`` for one cell."""
        kind, env_name = SCENARIOS[scenario]
        env = ENVIRONMENTS[env_name]
        lam = carrier_wavelength()
        spec = ScenarioSpec(
            kind=kind,
            bob_speed=self.bob_speed,
            probe_interval=self.probe_interval,
            n_rounds=self.n_rounds,
            coherence_time=self.coherence_time,
            small_scale_sigma_db=env.small_scale_sigma_db,
            seed=seed,
            arena_radius=self.arena_radius,
            heading_sigma=self.heading_sigma,
            bob_only_fading_scale=self.bob_only_fading_scale,
        )
        geom = Geometry(distance=self.distance, ring_radius=r_lambda * lam, n_eves=self.n_eves)
        ls = LargeScaleParams(
            path_loss_exponent=env.path_loss_exponent,
            shadow_sigma_db=env.shadow_sigma_db,
            shadow_decorr_dist=env.shadow_decorr_dist,
        )
        radio = RadioParams(noise_sigma_db=env.noise_sigma_db)
        return spec, geom, ls, radio


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply string or typed overrides to ``base`` (defaults when None)."""
    base = base or ExperimentConfig()
    updates = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigurationError(key, "unknown configuration key")
        default = getattr(base, key)
        if isinstance(default, tuple) or not isinstance(raw, str):
            updates[key] = raw
            continue
        try:
            updates[key] = type(default)(raw)
        except ValueError:
            raise ConfigurationError(key, f"cannot parse {raw!r}") from None
    try:
        return replace(base, **updates)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError("config", str(exc)) from None


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read ``key = value`` pairs from the ``[experiment]`` section of an INI file."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigurationError("config", f"{path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigurationError("config", f"{path}: {exc}") from None
    if not parser.has_section(CONFIG_SECTION):
        raise ConfigurationError("config", f"{path}: missing [{CONFIG_SECTION}] section")
    return config_from_mapping(dict(parser.items(CONFIG_SECTION)), base)


@dataclass
class CellResult:
    scenario: str
    r_lambda: float
    seed: int
    raw: MetricsReport | None = None
    mwa: dict[int, MetricsReport] = field(default_factory=dict)
    filter_choice: FilterChoice | None = None
    general: MetricsReport | None = None
    worst: MetricsReport | None = None
    kdr: dict[str, float] = field(default_factory=dict)
    randomness: RandomnessReport | None = None
    curve: list[tuple[int, float, float, float | None, float | None]] = field(default_factory=list)
    unsuitable: bool = False
    error: str | None = None

    @property
    def key(self) -> tuple[str, float, int]:
        return self.scenario, self.r_lambda, self.seed

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list[CellResult] = field(default_factory=list)

    @property
    def failed(self) -> list[CellResult]:
        return [c for c in self.cells if not c.ok]

    def cell(self, scenario: str, r_lambda: float, seed: int) -> CellResult:
        for c in self.cells:
            if c.key == (scenario, float(r_lambda), seed):
                return c
        raise KeyError((scenario, r_lambda, seed))


def _reports_for_rows(rows: np.ndarray, x_ec: np.ndarray, config: ExperimentConfig) -> MetricsReport:
    return capacity_report(
        rows[0], rows[1], rows[2:], x_ec, bin_db=config.bin_db, domain=config.domain
    )


def analyze_trace(trace: ProbeTrace, config: ExperimentConfig, cell: CellResult) -> CellResult:
    """Run every post-simulation stage on ``trace`` and fill ``cell``."""
    domain = AveragingDomain(config.domain)
    collusion = collude_estimate(trace, domain)
    cell.raw = secret_key_capacity(trace, collusion, bin_db=config.bin_db)
    cell.unsuitable = bool(cell.raw.mi_ab < config.feasibility_floor_bits)

    for w in config.mwa_windows:
        smooth = np.stack([mwa(row, w) for row in trace.rssi])
        cell.mwa[w] = _reports_for_rows(smooth, average_power(smooth[2:], domain), config)

    fa, fb, choice = negotiate_filter(trace.alice, trace.bob, config.z_max, config.bin_db)
    z0 = choice.z0
    cell.filter_choice = choice
    f_eves = np.stack([suppress_low(e, z0) for e in trace.eves])
    f_ec = suppress_low(collusion.x_ec, z0)
    kw = dict(bin_db=config.bin_db, domain=config.domain)
    cell.general = capacity_report(fa, fb, trace.eves, collusion.x_ec, **kw)
    cell.worst = capacity_report(fa, fb, f_eves, f_ec, **kw)

    lk = config.key_length
    ka, kb, kec = (generate_key(s, lk, p) for s, p in
                   ((trace.alice, "alice"), (trace.bob, "bob"), (collusion.x_ec, "eve_c")))
    fka, fkb, fkec = (generate_key(s, lk, p) for s, p in ((fa, "alice"), (fb, "bob"), (f_ec, "eve_c")))
    cell.kdr = {
        "kdr_ab_before": kdr(ka, kb),
        "kdr_ab_after": kdr(fka, fkb),
        "kdr_aec_before": kdr(ka, kec),
        "kdr_aec_after": kdr(fka, fkec),
    }
    cell.randomness = run_suite(fkb)

    for z in range(1, config.curve_z_max + 1):
        ga, gb = suppress_low(trace.alice, z), suppress_low(trace.bob, z)
        ge = np.stack([suppress_low(e, z) for e in trace.eves])
        general = capacity_report(ga, gb, trace.eves, collusion.x_ec, **kw)
        worst = capacity_report(ga, gb, ge, suppress_low(collusion.x_ec, z), **kw)
        cell.curve.append((z, general.c_k, worst.c_k, general.r_ck, worst.r_ck))
    return cell


def run_cell(config: ExperimentConfig, scenario: str, r_lambda: float, seed: int) -> CellResult:
    """One grid cell; any failure is captured in ``error`` instead of raised."""
    cell = CellResult(scenario, float(r_lambda), seed)
    try:
        trace = simulate_trace(*config.setup(scenario, r_lambda, seed))
        analyze_trace(trace, config, cell)
    except Exception as exc:  # noqa: BLE001 - recorded per cell, sweep continues
        log.warning("cell %s r=%s seed=%s failed: %s", scenario, r_lambda, seed, exc)
        fresh = CellResult(scenario, float(r_lambda), seed)
        fresh.error = f"{type(exc).__name__}: {exc}"
        return fresh
    return cell


def grid(config: ExperimentConfig) -> list[tuple[str, float, int]]:
    return [(s, r, seed) for s in config.scenarios for r in config.r_lambdas for seed in config.seeds]


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    cells = grid(config)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, [(config, *c) for c in cells]))
    else:
        results = [run_cell(config, *c) for c in cells]
    return SweepResult(config, results)


# -- reports --------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows: Iterable[list]) -> Path:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def cell_tag(cell: CellResult) -> str:
    return f"{cell.scenario}_r{cell.r_lambda:g}_s{cell.seed}"


def emit_reports(result: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write CSV tables, per-cell randomness JSON, curve data and the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc
    config = result.config
    order = {c: i for i, c in enumerate(grid(config))}
    cells = sorted(result.cells, key=lambda c: order.get(c.key, len(order)))
    good = [c for c in cells if c.ok]
    written: list[Path] = []

    if good:
        m = config.n_eves
        keys = ["scenario", "r_lambda", "seed"]
        written.append(_write_csv(
            out / "capacity.csv",
            keys + ["mi_ab"] + [f"cmi_e{i}" for i in range(1, m + 1)]
            + ["cmi_ec", "c_k", "r_ck", "unsuitable"],
            ([c.scenario, c.r_lambda, c.seed, c.raw.mi_ab, *c.raw.cmi_em, c.raw.cmi_ec,
              c.raw.c_k, c.raw.r_ck, c.unsuitable] for c in good),
        ))
        written.append(_write_csv(
            out / "correlation.csv",
            keys + ["rho_ab", "max_rho_a_em", "rho_a_ec"] + [f"rho_a_e{i}" for i in range(1, m + 1)],
            ([c.scenario, c.r_lambda, c.seed, c.raw.rho_ab, c.raw.max_rho_a_em, c.raw.rho_a_ec,
              *c.raw.rho_a_em] for c in good),
        ))
        windows = list(config.mwa_windows)
        delta_col = f"delta_w{windows[-1]}_w{windows[0]}"
        written.append(_write_csv(
            out / "mwa_intact_ratio.csv",
            keys + [f"w{w}" for w in windows] + [delta_col],
            ([c.scenario, c.r_lambda, c.seed, *(c.mwa[w].r_ck for w in windows),
              _delta(c.mwa[windows[-1]].r_ck, c.mwa[windows[0]].r_ck)] for c in good),
        ))
        written.append(_write_csv(
            out / "kdr.csv",
            keys + ["kdr_ab_before", "kdr_ab_after", "kdr_aec_before", "kdr_aec_after",
                    "reconcilable_ab", "reconcilable_aec"],
            ([c.scenario, c.r_lambda, c.seed, c.kdr["kdr_ab_before"], c.kdr["kdr_ab_after"],
              c.kdr["kdr_aec_before"], c.kdr["kdr_aec_after"],
              reconcilable(c.kdr["kdr_ab_after"]), reconcilable(c.kdr["kdr_aec_after"])]
             for c in good),
        ))
        written.append(_write_csv(
            out / "filtering.csv",
            keys + ["z0", "c_k_raw", "c_k_general", "c_k_worst", "r_ck_general", "r_ck_worst"],
            ([c.scenario, c.r_lambda, c.seed, c.filter_choice.z0, c.raw.c_k, c.general.c_k,
              c.worst.c_k, c.general.r_ck, c.worst.r_ck] for c in good),
        ))
        written.append(_write_csv(
            out / "filter_curve.csv",
            keys + ["z", "c_k_general", "c_k_worst", "r_ck_general", "r_ck_worst"],
            ([c.scenario, c.r_lambda, c.seed, *pt] for c in good for pt in c.curve),
        ))
        rdir = out / "randomness"
        rdir.mkdir(exist_ok=True)
        for c in good:
            written.append(c.randomness.write_json(rdir / f"{cell_tag(c)}.json"))

    manifest = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seeds": list(config.seeds),
        "cells": len(cells),
        "failed": [{"cell": cell_tag(c), "reason": c.error} for c in cells if not c.ok],
        "unsuitable": [cell_tag(c) for c in good if c.unsuitable],
        "files": sorted(p.relative_to(out).as_posix() for p in written),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    return written


def _delta(a: float | None, b: float | None) -> float | None:
    return None if a is None or b is None else a - b
