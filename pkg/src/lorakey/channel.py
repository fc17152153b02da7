"""Probing geometry, large/small-scale fading and RSSI trace simulation.

Alice sits at the origin, Bob starts at ``(distance, 0)`` and the
eavesdroppers sit on a ring of radius ``ring_radius`` around Alice.  Every
probing round yields one RSSI sample per party: Alice and Bob measure the
reciprocal A<->B channel, each Eve measures the Bob->Eve channel of the same
packet Alice received.

Traces are also read from and written to a small CSV format::

    round,timestamp_s,alice_dbm,bob_dbm,eve1_dbm,...,eveM_dbm
"""

from __future__ import annotations

import csv
import enum
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigurationError, DomainError, TraceParseError, TraceSchemaError

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 915e6

# Moments of 20*log10(R) for a unit-power Rayleigh envelope R.
RAYLEIGH_DB_MEAN = -10.0 * np.euler_gamma / math.log(10.0)
RAYLEIGH_DB_STD = 10.0 / math.log(10.0) * math.pi / math.sqrt(6.0)

# Clarke's rule of thumb: coherence time ~ 9 / (16 pi f_d).
_CLARKE_COHERENCE = 9.0 / (16.0 * math.pi)
_N_SINUSOIDS = 32
_SHADOW_CLIP = 4.0


def carrier_wavelength(carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class Geometry:
    """Placement of Alice, Bob and the Eve ring.

    ``first_eve_angle`` is measured at Alice between the A->B direction and
    the direction of the first eavesdropper; the others follow at equal
    angular spacing.
    """

    distance: float
    ring_radius: float
    first_eve_angle: float = 0.0
    n_eves: int = 4
    wavelength: float = carrier_wavelength()

    def __post_init__(self) -> None:
        if not self.distance > 0:
            raise ConfigurationError("distance", "must be positive")
        if not self.ring_radius > 0:
            raise ConfigurationError("ring_radius", "must be positive")
        if self.n_eves < 1:
            raise ConfigurationError("n_eves", "need at least one eavesdropper")
        if not 0.0 <= self.first_eve_angle < 2.0 * math.pi:
            raise ConfigurationError("first_eve_angle", "must lie in [0, 2*pi)")
        if not self.wavelength > 0:
            raise ConfigurationError("wavelength", "must be positive")
        if self.ring_radius < self.wavelength / 2.0:
            raise ConfigurationError(
                "ring_radius", "eavesdroppers must be at least half a wavelength from Alice"
            )
        if self.distance <= self.ring_radius:
            raise ConfigurationError("distance", "must exceed ring_radius")
        if self.distance < 10.0 * self.ring_radius:
            warnings.warn(
                f"distance {self.distance} m is less than 10x ring radius {self.ring_radius} m; "
                "the far-field collusion premise is weak",
                stacklevel=3,
            )

    def eve_angles(self) -> np.ndarray:
        m = np.arange(self.n_eves)
        return self.first_eve_angle + 2.0 * np.pi * m / self.n_eves

    def eve_positions(self) -> np.ndarray:
        """(n_eves, 2) planar coordinates with Alice at the origin."""
        ang = self.eve_angles()
        return self.ring_radius * np.column_stack([np.cos(ang), np.sin(ang)])


@dataclass(frozen=True)
class LargeScaleParams:
    path_loss_exponent: float = 3.0
    ref_distance: float = 1.0
    shadow_sigma_db: float = 4.0
    shadow_decorr_dist: float = 10.0

    def __post_init__(self) -> None:
        if not self.path_loss_exponent > 0:
            raise ConfigurationError("path_loss_exponent", "must be positive")
        if not self.ref_distance > 0:
            raise ConfigurationError("ref_distance", "must be positive")
        if not self.shadow_sigma_db >= 0:
            raise ConfigurationError("shadow_sigma_db", "must be non-negative")
        if not self.shadow_decorr_dist > 0:
            raise ConfigurationError("shadow_decorr_dist", "must be positive")


@dataclass(frozen=True)
class RadioParams:
    """Transmitter and RSSI-reporting characteristics (defaults: 17 dBm, 1 dB RSSI)."""

    tx_power_dbm: float = 17.0
    gain_db: float = 0.0
    noise_sigma_db: float = 1.0
    rssi_step_db: float = 1.0

    def __post_init__(self) -> None:
        if not self.noise_sigma_db >= 0:
            raise ConfigurationError("noise_sigma_db", "must be non-negative")
        if not self.rssi_step_db > 0:
            raise ConfigurationError("rssi_step_db", "must be positive")


class ScenarioKind(str, enum.Enum):
    STATIC = "static"
    MOVING_SCATTERERS = "moving_scatterers"
    MOVING_BOB = "moving_bob"
    MOVING_BOB_AND_SCATTERERS = "moving_bob_and_scatterers"

    @property
    def bob_moves(self) -> bool:
        return self in (ScenarioKind.MOVING_BOB, ScenarioKind.MOVING_BOB_AND_SCATTERERS)

    @property
    def scatterers_move(self) -> bool:
        return self in (ScenarioKind.MOVING_SCATTERERS, ScenarioKind.MOVING_BOB_AND_SCATTERERS)


@dataclass(frozen=True)
class ScenarioSpec:
    """One probing experiment.

    ``bob_only_fading_scale`` scales the small-scale fading amplitude when
    Bob moves through otherwise still surroundings.  ``arena_radius`` bounds
    Bob's random walk (a disc centred on his start point) and
    ``heading_sigma`` is the heading diffusion in rad/sqrt(s).
    """

    kind: ScenarioKind
    bob_speed: float = 1.0
    probe_interval: float = 0.02
    n_rounds: int = 10_000
    coherence_time: float = 0.14
    small_scale_sigma_db: float = 3.0
    seed: int = 0
    arena_radius: float = 20.0
    heading_sigma: float = 0.5
    bob_only_fading_scale: float = 0.5

    def __post_init__(self) -> None:
        if not isinstance(self.kind, ScenarioKind):
            object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.n_rounds < 2:
            raise ConfigurationError("n_rounds", "need at least two probing rounds")
        if not self.probe_interval > 0:
            raise ConfigurationError("probe_interval", "must be positive")
        if not self.coherence_time > 0:
            raise ConfigurationError("coherence_time", "must be positive")
        if not self.probe_interval < self.coherence_time:
            raise ConfigurationError(
                "probe_interval", "must be shorter than coherence_time for reciprocity"
            )
        if not self.small_scale_sigma_db >= 0:
            raise ConfigurationError("small_scale_sigma_db", "must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed", "must be a 64-bit unsigned integer")
        if self.kind.bob_moves and not self.bob_speed > 0:
            raise ConfigurationError("bob_speed", "must be positive when Bob moves")
        if self.bob_speed < 0:
            raise ConfigurationError("bob_speed", "must be non-negative")
        if not self.arena_radius > 0:
            raise ConfigurationError("arena_radius", "must be positive")
        if not self.heading_sigma >= 0:
            raise ConfigurationError("heading_sigma", "must be non-negative")
        if not self.bob_only_fading_scale >= 0:
            raise ConfigurationError("bob_only_fading_scale", "must be non-negative")

    @property
    def doppler_hz(self) -> float:
        return _CLARKE_COHERENCE / self.coherence_time

    @property
    def fading_sigma_db(self) -> float:
        if self.kind is ScenarioKind.STATIC:
            return 0.0
        if self.kind.scatterers_move:
            return self.small_scale_sigma_db
        return self.small_scale_sigma_db * self.bob_only_fading_scale


def eve_label(m: int) -> str:
    return f"eve{m}"


@dataclass(frozen=True, eq=False)
class ProbeTrace:
    """Aligned per-round RSSI rows: Alice, Bob, then Eve 1..M.

    ``rounds`` keeps the original probe indices so that traces with dropped
    rounds export faithfully.
    """

    parties: tuple[str, ...]
    rssi: np.ndarray
    timestamps: np.ndarray
    rounds: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    dropped_rounds: int = 0

    def __post_init__(self) -> None:
        rssi = np.array(self.rssi, dtype=float)
        if rssi.ndim != 2:
            raise TraceSchemaError("rssi must be a 2-D array (party x round)")
        parties = tuple(self.parties)
        if len(parties) != rssi.shape[0]:
            raise TraceSchemaError("one RSSI row per party required")
        if len(parties) < 2 or parties[:2] != ("alice", "bob"):
            raise TraceSchemaError("a trace needs Alice and Bob rows first")
        if not np.all(np.isfinite(rssi)):
            raise TraceSchemaError("RSSI values must be finite")
        n = rssi.shape[1]
        ts = np.array(self.timestamps, dtype=float)
        if ts.shape != (n,):
            raise TraceSchemaError("timestamps must have one entry per round")
        rounds = np.arange(n) if self.rounds is None else np.array(self.rounds, dtype=np.int64)
        if rounds.shape != (n,):
            raise TraceSchemaError("rounds must have one entry per round")
        for arr in (rssi, ts, rounds):
            arr.setflags(write=False)
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "rssi", rssi)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "rounds", rounds)

    @property
    def alice(self) -> np.ndarray:
        return self.rssi[0]

    @property
    def bob(self) -> np.ndarray:
        return self.rssi[1]

    @property
    def eves(self) -> np.ndarray:
        return self.rssi[2:]

    @property
    def n_eves(self) -> int:
        return self.rssi.shape[0] - 2

    @property
    def n_rounds(self) -> int:
        return self.rssi.shape[1]

    def with_rssi(self, rssi: np.ndarray, **meta) -> ProbeTrace:
        """Copy of this trace with replaced RSSI values (e.g. after smoothing)."""
        return replace(self, rssi=rssi, meta={**self.meta, **meta})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbeTrace):
            return NotImplemented
        return (
            self.parties == other.parties
            and np.array_equal(self.rssi, other.rssi)
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.rounds, other.rounds)
        )

    __hash__ = None


def eve_distance(geometry: Geometry, m: int) -> float:
    """Distance from Bob (at his initial position) to the m-th Eve, m = 1..M."""
    if not 1 <= m <= geometry.n_eves:
        raise IndexError(f"eve index {m} outside 1..{geometry.n_eves}")
    d, r = geometry.distance, geometry.ring_radius
    angle = geometry.first_eve_angle + 2.0 * math.pi * (m - 1) / geometry.n_eves
    sq = d * d + r * r - 2.0 * d * r * math.cos(angle)
    return math.sqrt(max(sq, 0.0))


def path_loss_db(ls: LargeScaleParams, distance):
    """Log-distance path loss ``10 * gamma * log10(distance / d0)`` in dB."""
    dist = np.asarray(distance, dtype=float)
    if np.any(~(dist > 0)):
        raise DomainError("distance must be positive")
    out = 10.0 * ls.path_loss_exponent * np.log10(dist / ls.ref_distance)
    return float(out) if out.ndim == 0 else out


def received_power_dbm(radio: RadioParams, ls: LargeScaleParams, distance, chi_db=0.0):
    """Mean received power after path loss and shadowing attenuation ``chi_db``."""
    return radio.tx_power_dbm + radio.gain_db - path_loss_db(ls, distance) - chi_db


def _bob_walk(rng: np.random.Generator, spec: ScenarioSpec, start: np.ndarray) -> np.ndarray:
    n = spec.n_rounds
    step = spec.bob_speed * spec.probe_interval
    turns = rng.normal(0.0, spec.heading_sigma * math.sqrt(spec.probe_interval), n)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    r2 = spec.arena_radius**2
    x, y = float(start[0]), float(start[1])
    cx, cy = x, y
    out = np.empty((n, 2))
    for i in range(n):
        out[i] = x, y
        heading += turns[i]
        nx, ny = x + step * math.cos(heading), y + step * math.sin(heading)
        if (nx - cx) ** 2 + (ny - cy) ** 2 > r2:
            normal = math.atan2(ny - cy, nx - cx)
            heading = 2.0 * normal + math.pi - heading
            nx, ny = x + step * math.cos(heading), y + step * math.sin(heading)
            if (nx - cx) ** 2 + (ny - cy) ** 2 > r2:
                nx, ny = x, y
        x, y = nx, ny
    return out


def _shadowing(rng: np.random.Generator, spec: ScenarioSpec, ls: LargeScaleParams) -> np.ndarray:
    n = spec.n_rounds
    sigma = ls.shadow_sigma_db
    eps = rng.standard_normal(n)
    if spec.kind.bob_moves:
        rho = math.exp(-spec.bob_speed * spec.probe_interval / ls.shadow_decorr_dist)
        innov = sigma * math.sqrt(1.0 - rho * rho) * eps
        innov[0] = sigma * eps[0]
        chi = lfilter([1.0], [1.0, -rho], innov)
    else:
        chi = np.full(n, sigma * eps[0])
    lim = _SHADOW_CLIP * sigma
    return np.clip(chi, -lim, lim)


def _clarke_fading_db(rng: np.random.Generator, t: np.ndarray, doppler_hz: float) -> np.ndarray:
    """Standardised log-envelope of a sum-of-sinusoids Rayleigh process."""
    theta = rng.uniform(0.0, 2.0 * math.pi, _N_SINUSOIDS)
    phi = rng.uniform(0.0, 2.0 * math.pi, _N_SINUSOIDS)
    phase = 2.0 * math.pi * doppler_hz * np.outer(t, np.cos(theta)) + phi
    gain = np.exp(1j * phase).sum(axis=1) / math.sqrt(_N_SINUSOIDS)
    env_db = 20.0 * np.log10(np.maximum(np.abs(gain), 1e-12))
    return (env_db - RAYLEIGH_DB_MEAN) / RAYLEIGH_DB_STD


def simulate_trace(
    spec: ScenarioSpec, geom: Geometry, ls: LargeScaleParams, radio: RadioParams
) -> ProbeTrace:
    """Simulate ``spec.n_rounds`` probing rounds; bit-identical for a fixed seed."""
    if spec.kind.bob_moves:
        clearance = geom.distance - geom.ring_radius - ls.ref_distance
        if spec.arena_radius >= clearance:
            raise ConfigurationError(
                "arena_radius",
                f"Bob's arena must stay beyond ref_distance of every node (< {clearance:.3f} m)",
            )
    elif geom.distance - geom.ring_radius < ls.ref_distance:
        raise ConfigurationError("distance", "Bob closer to an Eve than ref_distance")

    rng = np.random.default_rng(spec.seed)
    n = spec.n_rounds
    t = np.arange(n) * spec.probe_interval
    start = np.array([geom.distance, 0.0])
    if spec.kind.bob_moves:
        bob_xy = _bob_walk(rng, spec, start)
    else:
        bob_xy = np.tile(start, (n, 1))
    chi = _shadowing(rng, spec, ls)

    eves = geom.eve_positions()
    d_ab = np.hypot(bob_xy[:, 0], bob_xy[:, 1])
    d_be = np.linalg.norm(bob_xy[None, :, :] - eves[:, None, :], axis=-1)
    h_ab = received_power_dbm(radio, ls, d_ab, chi)
    h_be = received_power_dbm(radio, ls, d_be, chi)

    sigma = spec.fading_sigma_db
    if sigma > 0:
        # one shared reciprocal A<->B process, independent Bob->Eve processes
        h_ab = h_ab + sigma * _clarke_fading_db(rng, t, spec.doppler_hz)
        h_be = h_be + np.stack(
            [sigma * _clarke_fading_db(rng, t, spec.doppler_hz) for _ in range(geom.n_eves)]
        )

    clean = np.vstack([h_ab, h_ab, h_be])
    noise = rng.normal(0.0, 1.0, clean.shape) * radio.noise_sigma_db
    step = radio.rssi_step_db
    rssi = step * np.round((clean + noise) / step)
    rssi = np.minimum(rssi, radio.tx_power_dbm + radio.gain_db)

    parties = ("alice", "bob") + tuple(eve_label(m) for m in range(1, geom.n_eves + 1))
    meta = {
        "source": "simulation",
        "scenario": spec,
        "geometry": geom,
        "large_scale": ls,
        "radio": radio,
    }
    return ProbeTrace(parties=parties, rssi=rssi, timestamps=t, meta=meta)


# -- CSV ------------------------------------------------------------------

_EVE_COL = re.compile(r"^eve(\d+)_dbm$")
_MISSING = {"", "na", "nan", "null"}


def _column_name(label: str) -> str:
    return f"{label}_dbm"


def export_trace(trace: ProbeTrace, path: str | Path) -> Path:
    """Write ``trace`` as CSV; output is byte-identical for a fixed trace."""
    path = Path(path)
    header = ["round", "timestamp_s"] + [_column_name(p) for p in trace.parties]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for j in range(trace.n_rounds):
            row = [str(int(trace.rounds[j])), repr(float(trace.timestamps[j]))]
            row.extend(repr(float(v)) for v in trace.rssi[:, j])
            writer.writerow(row)
    return path


def ingest_trace(path: str | Path, mapping: Mapping[str, str] | None = None) -> ProbeTrace:
    """Read a trace CSV.

    ``mapping`` maps canonical column names (``alice_dbm``, ``eve2_dbm``,
    ``timestamp_s`` ...) to the names used in the file.  Rounds with a
    missing party value are dropped and counted in ``dropped_rounds``.
    """
    path = Path(path)
    mapping = dict(mapping or {})
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TraceSchemaError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}

        def col(canonical: str) -> int | None:
            return index.get(mapping.get(canonical, canonical))

        party_cols: list[tuple[str, int]] = []
        for label in ("alice", "bob"):
            i = col(_column_name(label))
            if i is not None:
                party_cols.append((label, i))
        if len(party_cols) < 2:
            raise TraceSchemaError(
                f"{path}: need alice_dbm and bob_dbm columns, found {len(party_cols)} party column(s)"
            )
        file_to_canonical = {v: k for k, v in mapping.items()}
        eve_cols = {}
        for name, i in index.items():
            m = _EVE_COL.match(file_to_canonical.get(name, name))
            if m:
                eve_cols[int(m.group(1))] = i
        if sorted(eve_cols) != list(range(1, len(eve_cols) + 1)):
            raise TraceSchemaError(f"{path}: eve columns must be numbered 1..M")
        party_cols += [(eve_label(k), eve_cols[k]) for k in sorted(eve_cols)]
        round_col, ts_col = col("round"), col("timestamp_s")

        rounds, stamps, rows = [], [], []
        dropped = 0
        for lineno, fields in enumerate(reader, start=2):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise TraceParseError(lineno, f"expected {len(header)} fields, got {len(fields)}")
            values = []
            missing = False
            for label, i in party_cols:
                cell = fields[i].strip()
                if cell.lower() in _MISSING:
                    missing = True
                    continue
                values.append(_parse_float(cell, lineno, label))
            if missing:
                dropped += 1
                continue
            rnd = len(rows) + dropped if round_col is None else _parse_int(fields[round_col], lineno)
            ts = float(rnd) if ts_col is None else _parse_float(fields[ts_col], lineno, "timestamp_s")
            rounds.append(rnd)
            stamps.append(ts)
            rows.append(values)

    labels = tuple(label for label, _ in party_cols)
    rssi = np.array(rows, dtype=float).reshape(len(rows), len(labels)).T
    return ProbeTrace(
        parties=labels,
        rssi=rssi,
        timestamps=np.array(stamps, dtype=float),
        rounds=np.array(rounds, dtype=np.int64),
        meta={"source": str(path)},
        dropped_rounds=dropped,
    )


def _parse_float(cell: str, lineno: int, what: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise TraceParseError(lineno, f"{what}: not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise TraceParseError(lineno, f"{what}: non-finite value {cell!r}")
    return value


def _parse_int(cell: str, lineno: int) -> int:
    try:
        return int(cell.strip())
    except ValueError:
        raise TraceParseError(lineno, f"round: not an integer: {cell!r}") from None
