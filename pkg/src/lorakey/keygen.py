"""Downsampling, mean-threshold quantisation and key disagreement rate."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import AlignmentError, ParameterError

CORRECTION_CAPACITY = 0.2


def downsample(seq, target_len: int) -> np.ndarray:
    """Keep samples at ``floor(j * N / target_len)`` for j = 0..target_len-1."""
    x = np.asarray(seq)
    n = x.size
    if not 1 <= target_len <= n:
        raise ParameterError(f"target_len must lie in 1..{n}, got {target_len}")
    idx = (np.arange(target_len, dtype=np.int64) * n) // target_len
    return x[idx]


@dataclass(frozen=True, eq=False)
class KeyBits:
    bits: np.ndarray
    source_party: str = ""
    downsample_step: float = 1.0
    mu: float = 0.0
    degenerate: bool = False

    def __post_init__(self) -> None:
        b = np.array(self.bits, dtype=np.uint8)
        if b.ndim != 1 or b.size < 1:
            raise ParameterError("a key needs at least one bit")
        if np.any(b > 1):
            raise ParameterError("key bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return self.bits.size

    def to_ascii(self) -> str:
        return "".join("1" if v else "0" for v in self.bits)

    def to_hex(self) -> str:
        """MSB-first hex; the tail is zero-padded to a whole nibble."""
        pad = (-self.bits.size) % 4
        bits = np.concatenate([self.bits, np.zeros(pad, dtype=np.uint8)])
        nibbles = bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])
        return "".join(f"{v:x}" for v in nibbles)

    @classmethod
    def from_ascii(cls, text: str, source_party: str = "") -> KeyBits:
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ParameterError("expected a non-empty string of '0'/'1'")
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"), source_party)


def quantize_mean(seq, source_party: str = "", downsample_step: float = 1.0) -> KeyBits:
    """Bit 1 where a sample is strictly above the sequence mean, else 0."""
    x = np.asarray(seq, dtype=float)
    if x.size == 0:
        raise ParameterError("cannot quantise an empty sequence")
    mu = float(x.mean())
    bits = (x > mu).astype(np.uint8)
    return KeyBits(bits, source_party, downsample_step, mu, degenerate=bool(np.ptp(x) == 0))


def generate_key(seq, key_len: int, source_party: str = "") -> KeyBits:
    """Downsample to ``key_len`` samples and quantise around their mean."""
    n = np.asarray(seq).size
    return quantize_mean(downsample(seq, key_len), source_party, n / key_len)


def kdr(a: KeyBits, b: KeyBits) -> float:
    """Fraction of positions where the two keys differ."""
    if len(a) != len(b):
        raise AlignmentError(f"key length mismatch: {len(a)} vs {len(b)}")
    return float(np.count_nonzero(a.bits != b.bits)) / len(a)


def reconcilable(rate: float, capacity: float = CORRECTION_CAPACITY) -> bool:
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"KDR must lie in [0, 1], got {rate}")
    return rate <= capacity


def write_keys(keys: Iterable[KeyBits], path: str | Path, fmt: str = "ascii") -> Path:
    """One key per line, either '0'/'1' characters or hex."""
    if fmt not in ("ascii", "hex"):
        raise ParameterError(f"unknown key format {fmt!r}")
    path = Path(path)
    lines = [k.to_ascii() if fmt == "ascii" else k.to_hex() for k in keys]
    path.write_text("".join(line + "\n" for line in lines), encoding="ascii")
    return path


def read_keys(path: str | Path) -> list[KeyBits]:
    """Read the ASCII '0'/'1' format, skipping blank lines."""
    text = Path(path).read_text(encoding="ascii")
    return [KeyBits.from_ascii(line) for line in text.splitlines() if line.strip()]
