"""Colluding-eavesdropper estimate of Alice's RSSI and the best single Eve."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import ProbeTrace
from .errors import AttackUndefinedError, UndefinedCorrelationError
from .metrics import pearson

_DB_TO_NEPER = math.log(10.0) / 10.0


class AveragingDomain(str, enum.Enum):
    LINEAR = "linear"
    DB = "db"


@dataclass(frozen=True, eq=False)
class CollusionEstimate:
    x_ec: np.ndarray
    m_used: int
    domain: AveragingDomain

    def __post_init__(self) -> None:
        x = np.array(self.x_ec, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("collusion estimate must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "x_ec", x)

    def __len__(self) -> int:
        return self.x_ec.size


def average_power(rows: np.ndarray, domain: AveragingDomain = AveragingDomain.LINEAR) -> np.ndarray:
    """Per-column mean of dBm rows, either of linear powers or of the dB values."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[0] == 0:
        raise AttackUndefinedError("no eavesdropper rows to average")
    domain = AveragingDomain(domain)
    if rows.shape[0] == 1:
        return rows[0].copy()
    if domain is AveragingDomain.DB:
        return rows.mean(axis=0)
    m = rows.shape[0]
    return (logsumexp(rows * _DB_TO_NEPER, axis=0) - math.log(m)) / _DB_TO_NEPER


def collude_estimate(
    trace: ProbeTrace, domain: AveragingDomain = AveragingDomain.LINEAR
) -> CollusionEstimate:
    if trace.n_eves < 1:
        raise AttackUndefinedError("collusion needs at least one eavesdropper row")
    domain = AveragingDomain(domain)
    return CollusionEstimate(average_power(trace.eves, domain), trace.n_eves, domain)


def best_single_eve(trace: ProbeTrace) -> tuple[int, float]:
    """Return ``(m, |rho|)`` for the Eve most correlated with Alice (1-based, first on ties)."""
    if trace.n_eves < 1:
        raise AttackUndefinedError("no eavesdropper rows")
    if np.ptp(trace.alice) == 0:
        raise UndefinedCorrelationError("Alice's row is constant")
    best_m, best = 0, -1.0
    for m, row in enumerate(trace.eves, start=1):
        try:
            rho = abs(pearson(trace.alice, row))
        except UndefinedCorrelationError:
            rho = 0.0
        if rho > best:
            best_m, best = m, rho
    return best_m, best
