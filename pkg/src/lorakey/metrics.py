"""Correlation and histogram-based information measures on RSSI sequences.

All entropies are plug-in estimates on a grid of ``bin_db``-wide bins
(values are rounded to the nearest grid point), in bits.  The optional
Miller-Madow correction adds ``(K - 1) / (2 N ln 2)`` per entropy term,
where K is the number of occupied bins.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import AlignmentError, ParameterError, UndefinedCorrelationError

if TYPE_CHECKING:
    from .attack import CollusionEstimate
    from .channel import ProbeTrace

log = logging.getLogger(__name__)

SPARSE_SAMPLES_PER_CELL = 5.0


class SparseHistogramWarning(UserWarning):
    """Too few samples per occupied cell of a joint histogram."""


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise AlignmentError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ParameterError("pearson needs at least two samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant sequence")
    rho = float(np.dot(xc, yc)) / (math.sqrt(sxx) * math.sqrt(syy))
    return min(1.0, max(-1.0, rho))


def discretize(x, bin_db: float = 1.0) -> np.ndarray:
    """Integer bin index of each sample (nearest multiple of ``bin_db``)."""
    if not bin_db > 0:
        raise ParameterError("bin_db must be positive")
    return np.floor(np.asarray(x, dtype=float) / bin_db + 0.5).astype(np.int64)


def combine_codes(codes: Sequence[np.ndarray]) -> np.ndarray:
    """Map tuples of per-variable bin indices to a single joint index."""
    n = len(codes[0])
    for c in codes[1:]:
        if len(c) != n:
            raise AlignmentError(f"length mismatch: {n} vs {len(c)}")
    joint = np.zeros(n, dtype=np.int64)
    for c in codes:
        levels, inv = np.unique(c, return_inverse=True)
        joint = joint * levels.size + inv.reshape(-1)
    return joint


def _joint_codes(seqs: Sequence, bin_db: float) -> np.ndarray:
    return combine_codes([discretize(s, bin_db) for s in seqs])


def entropy_from_codes(code: np.ndarray, miller_madow: bool = False) -> tuple[float, int]:
    """Plug-in entropy (bits) of integer labels and the number of distinct labels."""
    _, counts = np.unique(code, return_counts=True)
    if counts.size == 1:
        return 0.0, 1
    counts = np.sort(counts).astype(float)
    n = counts.sum()
    h = math.log2(n) - float(np.dot(counts, np.log2(counts))) / n
    h = max(h, 0.0)
    if miller_madow:
        h += (counts.size - 1) / (2.0 * n * math.log(2.0))
    return h, counts.size


def joint_entropy(*seqs, bin_db: float = 1.0, miller_madow: bool = False) -> float:
    if not seqs or len(seqs[0]) == 0:
        raise ParameterError("entropy of an empty sequence")
    return entropy_from_codes(_joint_codes(seqs, bin_db), miller_madow)[0]


def entropy(x, bin_db: float = 1.0, miller_madow: bool = False) -> float:
    return joint_entropy(x, bin_db=bin_db, miller_madow=miller_madow)


def conditional_entropy(x, given, bin_db: float = 1.0) -> float:
    """H(x | given) = H(x, given) - H(given)."""
    return max(joint_entropy(x, given, bin_db=bin_db) - entropy(given, bin_db=bin_db), 0.0)


def _clamp(value: float, what: str) -> float:
    if value < 0.0:
        log.debug("%s estimate %.3e < 0 clamped to 0", what, value)
        return 0.0
    return value


def mutual_info(x, y, bin_db: float = 1.0, miller_madow: bool = False) -> float:
    if len(x) != len(y):
        raise AlignmentError(f"length mismatch: {len(x)} vs {len(y)}")
    kw = dict(bin_db=bin_db, miller_madow=miller_madow)
    raw = entropy(x, **kw) + entropy(y, **kw) - joint_entropy(x, y, **kw)
    return _clamp(raw, "mutual information")


def cond_mutual_info(x, y, z, bin_db: float = 1.0, miller_madow: bool = False) -> float:
    """I(x; y | z) from the three-way joint histogram."""
    if not len(x) == len(y) == len(z):
        raise AlignmentError(f"length mismatch: {len(x)}, {len(y)}, {len(z)}")
    code_xyz = _joint_codes([x, y, z], bin_db)
    h_xyz, cells = entropy_from_codes(code_xyz, miller_madow)
    if len(x) / cells < SPARSE_SAMPLES_PER_CELL:
        warnings.warn(
            f"sparse 3-D histogram: {len(x)} samples over {cells} occupied cells",
            SparseHistogramWarning,
            stacklevel=2,
        )
    kw = dict(bin_db=bin_db, miller_madow=miller_madow)
    raw = joint_entropy(x, z, **kw) + joint_entropy(y, z, **kw) - entropy(z, **kw) - h_xyz
    return _clamp(raw, "conditional mutual information")


@dataclass(frozen=True)
class MetricsReport:
    """Correlations and key-capacity figures for one experiment.

    Correlations against constant rows are undefined and stored as None;
    so is ``r_ck`` when Alice and Bob share no information.
    """

    rho_ab: float | None
    rho_a_ec: float | None
    rho_a_em: tuple[float | None, ...]
    mi_ab: float
    cmi_em: tuple[float, ...]
    cmi_ec: float
    c_k: float
    r_ck: float | None
    bin_db: float
    domain: str = "linear"

    @property
    def n_eves(self) -> int:
        return len(self.cmi_em)

    @property
    def max_rho_a_em(self) -> float | None:
        vals = [abs(r) for r in self.rho_a_em if r is not None]
        return max(vals) if vals else None

    @property
    def ec_is_strict_min(self) -> bool:
        """True when the collusion-conditioned MI is strictly the smallest candidate."""
        others = (self.mi_ab,) + tuple(self.cmi_em)
        return all(self.cmi_ec < v for v in others)

    def to_dict(self) -> dict:
        """Flat mapping; per-Eve fields become ``rho_a_e1``, ``cmi_e1`` ..."""
        d = asdict(self)
        rho_em = d.pop("rho_a_em")
        cmi_em = d.pop("cmi_em")
        out = {}
        for k in ("rho_ab", "rho_a_ec"):
            out[k] = d.pop(k)
        for m, v in enumerate(rho_em, start=1):
            out[f"rho_a_e{m}"] = v
        out["mi_ab"] = d.pop("mi_ab")
        for m, v in enumerate(cmi_em, start=1):
            out[f"cmi_e{m}"] = v
        out.update(d)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        m = 1
        rho_em, cmi_em = [], []
        while f"cmi_e{m}" in d:
            rho_em.append(d.get(f"rho_a_e{m}"))
            cmi_em.append(d[f"cmi_e{m}"])
            m += 1
        return cls(
            rho_ab=d["rho_ab"],
            rho_a_ec=d["rho_a_ec"],
            rho_a_em=tuple(rho_em),
            mi_ab=d["mi_ab"],
            cmi_em=tuple(cmi_em),
            cmi_ec=d["cmi_ec"],
            c_k=d["c_k"],
            r_ck=d["r_ck"],
            bin_db=d["bin_db"],
            domain=d.get("domain", "linear"),
        )


def _safe_pearson(x, y) -> float | None:
    try:
        return pearson(x, y)
    except UndefinedCorrelationError:
        return None


def capacity_report(
    alice,
    bob,
    eves,
    x_ec,
    bin_db: float = 1.0,
    miller_madow: bool = False,
    domain: str = "linear",
) -> MetricsReport:
    """Metrics from raw arrays (used for smoothed and filtered variants too)."""
    alice = np.asarray(alice, dtype=float)
    bob = np.asarray(bob, dtype=float)
    eves = np.atleast_2d(np.asarray(eves, dtype=float))
    x_ec = np.asarray(x_ec, dtype=float)
    n = alice.size
    if bob.size != n or x_ec.size != n or eves.shape[1] != n:
        raise AlignmentError("trace rows and collusion estimate must be aligned")
    kw = dict(bin_db=bin_db, miller_madow=miller_madow)
    mi_ab = mutual_info(alice, bob, **kw)
    cmi_em = tuple(cond_mutual_info(alice, bob, e, **kw) for e in eves)
    cmi_ec = cond_mutual_info(alice, bob, x_ec, **kw)
    c_k = min((mi_ab,) + cmi_em + (cmi_ec,))
    r_ck = c_k / mi_ab if mi_ab > 0 else None
    return MetricsReport(
        rho_ab=_safe_pearson(alice, bob),
        rho_a_ec=_safe_pearson(alice, x_ec),
        rho_a_em=tuple(_safe_pearson(alice, e) for e in eves),
        mi_ab=mi_ab,
        cmi_em=cmi_em,
        cmi_ec=cmi_ec,
        c_k=c_k,
        r_ck=r_ck,
        bin_db=bin_db,
        domain=domain,
    )


def secret_key_capacity(
    trace: ProbeTrace,
    collusion: CollusionEstimate,
    bin_db: float = 1.0,
    miller_madow: bool = False,
) -> MetricsReport:
    """Capacity is the minimum over I(A;B), every I(A;B|E_m) and I(A;B|E_c)."""
    if len(collusion.x_ec) != trace.n_rounds:
        raise AlignmentError(
            f"collusion estimate has {len(collusion.x_ec)} rounds, trace has {trace.n_rounds}"
        )
    return capacity_report(
        trace.alice,
        trace.bob,
        trace.eves,
        collusion.x_ec,
        bin_db=bin_db,
        miller_madow=miller_madow,
        domain=collusion.domain.value,
    )
