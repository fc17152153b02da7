"""Nine SP 800-22 statistical tests for short key bit strings.

Individual test functions accept any length their statistic is defined
for, so the standard's short worked examples can be checked directly;
:func:`run_suite` additionally enforces the minimum lengths for a key.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfc, gammaincc, ndtr

from .errors import ParameterError, SequenceLengthError

ALPHA = 0.01
MIN_SUITE_LENGTH = 100
MIN_LONGEST_RUN_LENGTH = 128

# (block size, class boundaries low..high, class probabilities) by minimum n
_LONGEST_RUN_TABLES = (
    (750_000, 10_000, 10, 16, (0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727)),
    (6_272, 128, 4, 9, (0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124)),
    (128, 8, 1, 4, (0.2148, 0.3672, 0.2305, 0.1875)),
)

LABELS = {
    "frequency": "Frequency",
    "block_frequency": "Block Frequency",
    "runs": "Runs",
    "longest_run": "Longest Run of 1s",
    "fft": "FFT",
    "serial": "Serial",
    "approximate_entropy": "Appro. Entropy",
    "cusum_reverse": "Cum. Sums (rev)",
    "cusum_forward": "Cum. Sums (fwd)",
}


def as_bits(bits) -> np.ndarray:
    """Coerce a '0'/'1' string, KeyBits-like object or array to a uint8 vector."""
    if isinstance(bits, str):
        text = bits.strip()
        if set(text) - {"0", "1"}:
            raise ParameterError("bit string may contain only '0' and '1'")
        return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")
    bits = getattr(bits, "bits", bits)
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ParameterError("bits must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ParameterError("bits must be 0 or 1")
    return arr.astype(np.uint8)


def _need(n: int, minimum: int, test: str) -> None:
    if n < minimum:
        raise SequenceLengthError(test, n, minimum)


def _igamc(a: float, x: float) -> float:
    return float(gammaincc(a, x))


def frequency(bits) -> float:
    b = as_bits(bits)
    n = b.size
    _need(n, 1, "frequency")
    s = 2 * int(b.sum()) - n
    return float(erfc(abs(s) / math.sqrt(n) / math.sqrt(2.0)))


def block_frequency(bits, block_size: int = 16) -> float:
    b = as_bits(bits)
    n = b.size
    if not 1 <= block_size <= max(n, 1):
        raise ParameterError(f"block size must lie in 1..{n}, got {block_size}")
    _need(n, block_size, "block_frequency")
    blocks = n // block_size
    props = b[: blocks * block_size].reshape(blocks, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((props - 0.5) ** 2))
    return _igamc(blocks / 2.0, chi2 / 2.0)


def runs(bits) -> float:
    """Runs test; 0.0 when the frequency prerequisite already fails."""
    b = as_bits(bits)
    n = b.size
    _need(n, 2, "runs")
    pi = float(b.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    v_obs = 1 + int(np.count_nonzero(b[1:] != b[:-1]))
    num = abs(v_obs - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(erfc(num / den))


def _longest_run_of_ones(block: np.ndarray) -> int:
    best = cur = 0
    for v in block:
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best


def longest_run_statistic(bits) -> tuple[float, float]:
    """Return ``(chi_square, p_value)`` of the longest-run-of-ones test."""
    b = as_bits(bits)
    n = b.size
    _need(n, MIN_LONGEST_RUN_LENGTH, "longest_run")
    for min_n, m, lo, hi, probs in _LONGEST_RUN_TABLES:
        if n >= min_n:
            break
    blocks = n // m
    counts = np.zeros(len(probs))
    for block in b[: blocks * m].reshape(blocks, m):
        run = _longest_run_of_ones(block)
        counts[min(max(run, lo), hi) - lo] += 1
    expected = blocks * np.asarray(probs)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    return chi2, _igamc((len(probs) - 1) / 2.0, chi2 / 2.0)


def longest_run(bits) -> float:
    return longest_run_statistic(bits)[1]


def fft(bits) -> float:
    """Spectral test: counts DFT moduli of the first n/2 bins (DC included) below the 95% bound."""
    b = as_bits(bits)
    n = b.size
    _need(n, 2, "fft")
    x = 2.0 * b - 1.0
    moduli = np.abs(np.fft.fft(x))[: n // 2]
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    n0 = 0.95 * n / 2.0
    n1 = float(np.count_nonzero(moduli < threshold))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return float(erfc(abs(d) / math.sqrt(2.0)))


def _pattern_counts(b: np.ndarray, m: int) -> np.ndarray:
    """Counts of all overlapping m-bit patterns with wrap-around."""
    n = b.size
    if m == 0:
        return np.array([n])
    ext = np.concatenate([b, b[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for k in range(m):
        codes = (codes << 1) | ext[k : k + n]
    return np.bincount(codes, minlength=1 << m)


def _psi_sq(b: np.ndarray, m: int) -> float:
    if m <= 0:
        return 0.0
    counts = _pattern_counts(b, m).astype(float)
    n = b.size
    return float((1 << m) / n * np.dot(counts, counts) - n)


def serial(bits, m: int = 3) -> tuple[float, float]:
    b = as_bits(bits)
    n = b.size
    if m < 2:
        raise ParameterError(f"serial block length must be at least 2, got {m}")
    _need(n, m, "serial")
    psi_m, psi_m1, psi_m2 = (_psi_sq(b, k) for k in (m, m - 1, m - 2))
    del1 = psi_m - psi_m1
    del2 = psi_m - 2.0 * psi_m1 + psi_m2
    return _igamc(2 ** (m - 2), del1 / 2.0), _igamc(2 ** (m - 3), del2 / 2.0)


def _phi(b: np.ndarray, m: int) -> float:
    counts = _pattern_counts(b, m)
    counts = counts[counts > 0].astype(float) / b.size
    return float(np.dot(counts, np.log(counts)))


def approximate_entropy(bits, m: int = 2) -> float:
    b = as_bits(bits)
    n = b.size
    if m < 1:
        raise ParameterError(f"approximate entropy block length must be at least 1, got {m}")
    _need(n, m + 1, "approximate_entropy")
    apen = _phi(b, m) - _phi(b, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return _igamc(2 ** (m - 1), chi2 / 2.0)


def _trunc_div(a: int, b: int) -> int:
    """Integer division rounding toward zero."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


def cusum(bits, reverse: bool = False) -> float:
    b = as_bits(bits)
    n = b.size
    _need(n, 1, "cusum_reverse" if reverse else "cusum_forward")
    x = 2 * b.astype(np.int64) - 1
    if reverse:
        x = x[::-1]
    z = int(np.max(np.abs(np.cumsum(x))))
    if z == 0:
        return 1.0
    root_n = math.sqrt(n)
    ratio = n // z
    k1 = np.arange(_trunc_div(-ratio + 1, 4), _trunc_div(ratio - 1, 4) + 1)
    k2 = np.arange(_trunc_div(-ratio - 3, 4), _trunc_div(ratio - 1, 4) + 1)
    sum1 = np.sum(ndtr((4 * k1 + 1) * z / root_n) - ndtr((4 * k1 - 1) * z / root_n))
    sum2 = np.sum(ndtr((4 * k2 + 3) * z / root_n) - ndtr((4 * k2 + 1) * z / root_n))
    return float(min(1.0, max(0.0, 1.0 - sum1 + sum2)))


@dataclass(frozen=True)
class SuiteParams:
    block_size: int = 16
    serial_m: int = 3
    apen_m: int = 2

    def check(self, n: int) -> None:
        """Reject parameter choices the standard deems invalid for length ``n``."""
        if not 2 <= self.block_size <= n:
            raise ParameterError(f"block_size must lie in 2..{n}, got {self.block_size}")
        log2n = int(math.floor(math.log2(n)))
        if not 2 <= self.serial_m < log2n - 2:
            raise ParameterError(f"serial m must lie in 2..{log2n - 3} for n={n}, got {self.serial_m}")
        if not 1 <= self.apen_m < log2n - 5:
            raise ParameterError(
                f"approximate entropy m must lie in 1..{log2n - 6} for n={n}, got {self.apen_m}"
            )


@dataclass(frozen=True)
class RandomnessReport:
    """P-values keyed by test id; Serial carries two values."""

    p_values: dict[str, float | tuple[float, float]]
    sequence_length: int
    alpha: float = ALPHA
    passes: dict[str, bool] = field(init=False)

    def __post_init__(self) -> None:
        flags = {}
        for name, p in self.p_values.items():
            ps = p if isinstance(p, tuple) else (p,)
            if not all(0.0 <= v <= 1.0 for v in ps):
                raise ValueError(f"{name}: p-value outside [0, 1]")
            flags[name] = all(v > self.alpha for v in ps)
        object.__setattr__(self, "passes", flags)

    @property
    def all_passed(self) -> bool:
        return all(self.passes.values())

    def to_table(self) -> dict:
        """Table-style mapping: display name to p-value (Serial as a list)."""
        out: dict = {"Sequence Length": self.sequence_length}
        for name, p in self.p_values.items():
            out[LABELS[name]] = list(p) if isinstance(p, tuple) else p
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_table(), indent=2) + "\n"

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def run_suite(bits, params: SuiteParams | None = None) -> RandomnessReport:
    params = params or SuiteParams()
    b = as_bits(bits)
    n = b.size
    for test in LABELS:
        minimum = MIN_LONGEST_RUN_LENGTH if test == "longest_run" else MIN_SUITE_LENGTH
        _need(n, minimum, test)
    params.check(n)
    p_values = {
        "frequency": frequency(b),
        "block_frequency": block_frequency(b, params.block_size),
        "runs": runs(b),
        "longest_run": longest_run(b),
        "fft": fft(b),
        "serial": serial(b, params.serial_m),
        "approximate_entropy": approximate_entropy(b, params.apen_m),
        "cusum_reverse": cusum(b, reverse=True),
        "cusum_forward": cusum(b),
    }
    return RandomnessReport(p_values=p_values, sequence_length=n)
