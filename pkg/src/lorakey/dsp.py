"""Sequence preprocessing: moving-window average and DCT high-pass filtering.

The forward transform is the unnormalised DCT-II::

    Y(z) = sum_{n=0}^{N-1} x(n) cos(pi/N (n + 1/2) z),   z = 0..N-1

and :func:`idct` is its exact inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import AlignmentError, DegenerateEntropyError, DomainError, ParameterError
from .metrics import combine_codes, discretize, entropy_from_codes

DEFAULT_Z_MAX = 100


def mwa(seq, window: int) -> np.ndarray:
    """Centred moving mean; edge samples average only the neighbours that exist.

    ``window`` 0 or 1 returns the input unchanged.
    """
    x = np.asarray(seq, dtype=float)
    n = x.size
    if window < 0 or window > max(n, 1):
        raise ParameterError(f"window must lie in 0..{n}, got {window}")
    if window in (0, 1):
        return x.copy()
    if window % 2 == 0:
        raise ParameterError(f"window must be odd to be centred, got {window}")
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass(frozen=True, eq=False)
class SpectralSeq:
    coeffs: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.n_samples,):
            raise DomainError("coefficient count must equal n_samples")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)


def dct2(seq) -> SpectralSeq:
    x = np.asarray(seq, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("DCT of an empty sequence")
    # scipy's unnormalised type-II DCT carries an extra factor of 2
    return SpectralSeq(scipy.fft.dct(x, type=2) / 2.0, x.size)


def idct(spec: SpectralSeq) -> np.ndarray:
    if spec.n_samples == 0:
        raise DomainError("inverse DCT of an empty spectrum")
    return scipy.fft.idct(2.0 * spec.coeffs, type=2)


def _check_cut(n: int, z_cut: int) -> None:
    if not 0 <= z_cut <= n - 1:
        raise ParameterError(f"z_cut must lie in 0..{n - 1}, got {z_cut}")


def suppress_low(seq, z_cut: int) -> np.ndarray:
    """Zero DCT coefficients 1..z_cut (the DC term is kept) and transform back."""
    spec = dct2(seq)
    _check_cut(spec.n_samples, z_cut)
    coeffs = spec.coeffs.copy()
    coeffs[1 : z_cut + 1] = 0.0
    return idct(SpectralSeq(coeffs, spec.n_samples))


@dataclass(frozen=True, eq=False)
class FilterChoice:
    """Result of the filter-size search.

    ``entropy_curve[i]`` is H(X_B | X_B filtered through z = i + 1) and
    ``gradient_curve[i]`` the forward difference between z = i + 2 and i + 1.
    """

    z0: int
    entropy_curve: np.ndarray
    gradient_curve: np.ndarray

    @property
    def z_max(self) -> int:
        return self.entropy_curve.size


def estimate_filter_size(seq_bob, z_max: int = DEFAULT_Z_MAX, bin_db: float = 1.0) -> FilterChoice:
    """Pick the number of low-frequency DCT components to suppress.

    For z = 1..z_max the conditional entropy of the raw sequence given its
    filtered version is evaluated on the ``bin_db`` grid; z0 is one past the
    position of the steepest increase (first one on ties).
    """
    x = np.asarray(seq_bob, dtype=float)
    n = x.size
    if z_max < 2:
        raise ParameterError(f"z_max must be at least 2, got {z_max}")
    if z_max > n - 1:
        raise ParameterError(f"z_max must not exceed N - 1 = {n - 1}")
    if np.ptp(x) == 0:
        raise DegenerateEntropyError("constant sequence has no entropy to filter")
    coeffs = dct2(x).coeffs.copy()
    raw_codes = discretize(x, bin_db)
    curve = np.empty(z_max)
    for z in range(1, z_max + 1):
        coeffs[z] = 0.0
        filtered = idct(SpectralSeq(coeffs, n))
        filt_codes = discretize(filtered, bin_db)
        h_joint, _ = entropy_from_codes(combine_codes([raw_codes, filt_codes]))
        h_filt, _ = entropy_from_codes(filt_codes)
        curve[z - 1] = max(h_joint - h_filt, 0.0)
    gradient = np.diff(curve)
    # gradient[i] sits at midpoint z = i + 1.5; z0 is that position rounded up
    z0 = int(np.argmax(gradient)) + 2
    return FilterChoice(z0=z0, entropy_curve=curve, gradient_curve=gradient)


def negotiate_filter(seq_alice, seq_bob, z_max: int = DEFAULT_Z_MAX, bin_db: float = 1.0):
    """Bob chooses z0 from his own sequence; both sides then filter with it.

    Returns ``(filtered_alice, filtered_bob, choice)``.
    """
    a = np.asarray(seq_alice, dtype=float)
    b = np.asarray(seq_bob, dtype=float)
    if a.shape != b.shape:
        raise AlignmentError(f"length mismatch: {a.size} vs {b.size}")
    choice = estimate_filter_size(b, z_max=z_max, bin_db=bin_db)
    return suppress_low(a, choice.z0), suppress_low(b, choice.z0), choice
