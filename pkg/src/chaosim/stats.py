"""Statistical analyses backing the scenario checks.

Sample moments use math.fsum, which is exactly rounded and therefore
permutation invariant: the same numbers give the same moments no matter
how the ensemble was sharded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .histogram import Histogram, histogram_from_samples

# Asymptotic one-sample Kolmogorov-Smirnov critical coefficient at the
# 0.01 significance level: reject when D >= c / sqrt(n).
KS_COEFF_01 = 1.63

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Moments:
    n: int
    mean: float
    std: float
    skewness: Optional[float]
    excess_kurtosis: Optional[float]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "std": self.std,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
        }


@dataclass(frozen=True)
class PeakReport:
    smoothing_window: int
    n_peaks: int
    peak_positions: tuple
    n_troughs: int


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def moments(samples: Sequence[float]) -> Moments:
    """Sample mean, std (n-1), skewness and excess kurtosis.

    Skewness/kurtosis are reported as None when n < 3 (or when the
    sample is degenerate with zero spread).
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    n = arr.size
    if n == 0:
        raise ValueError("moments requires at least one sample")
    mean = _fsum(arr) / n
    if n == 1:
        return Moments(n=1, mean=mean, std=0.0, skewness=None, excess_kurtosis=None)
    d = arr - mean
    d2 = d * d
    s2_sum = _fsum(d2)
    std = math.sqrt(s2_sum / (n - 1))
    m2 = s2_sum / n
    # m2**1.5 can underflow to zero for subnormal spreads; treat the
    # standardized moments as undefined there, like the degenerate case
    if n < 3 or m2**1.5 == 0.0:
        return Moments(n=n, mean=mean, std=std, skewness=None, excess_kurtosis=None)
    m3 = _fsum(d2 * d) / n
    m4 = _fsum(d2 * d2) / n
    skew = m3 / m2**1.5
    exkurt = m4 / (m2 * m2) - 3.0
    return Moments(n=n, mean=mean, std=std, skewness=skew, excess_kurtosis=exkurt)


def ks_uniform(samples: Sequence[float]) -> "tuple[float, bool]":
    """One-sample KS statistic against Uniform[0, 1).

    Returns (D, pass_at_01) with the asymptotic 1% criterion
    D < 1.63 / sqrt(n).
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    n = arr.size
    if n < 10:
        raise ValueError(f"ks_uniform requires n >= 10, got {n}")
    if (arr < 0.0).any() or (arr >= 1.0).any():
        raise ValueError("ks_uniform samples must lie in [0, 1)")
    u = np.sort(arr)
    grid = np.arange(1, n + 1, dtype=np.float64) / n
    d_plus = float((grid - u).max())
    d_minus = float((u - (grid - 1.0 / n)).max())
    d = max(d_plus, d_minus)
    return d, d < KS_COEFF_01 / math.sqrt(n)


def _normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def gaussian_fit_check(h: Histogram) -> "tuple[float, float, float]":
    """Moment-matched Gaussian fit quality of a histogram.

    Returns (mu, sigma, chi2_reduced).  mu and sigma come from the
    binned sample (bin centers weighted by counts, under/overflow
    excluded); the reduced chi-square runs over bins whose expected
    count is at least 5, with three constraints (total, mu, sigma)
    subtracted from the degrees of freedom.
    """
    n_binned = int(h.counts.sum())
    if h.n_total < 1000:
        raise ValueError(
            f"gaussian_fit_check requires >= 1000 samples, got {h.n_total}"
        )
    centers = h.centers()
    w = h.counts.astype(np.float64)
    mu = _fsum(w * centers) / n_binned
    var = _fsum(w * (centers - mu) ** 2) / (n_binned - 1)
    sigma = math.sqrt(var)
    if sigma == 0.0:
        raise ValueError("degenerate histogram: zero spread")
    edges = h.edges()
    zs = (edges - mu) / sigma
    cdf = np.array([_normal_cdf(z) for z in zs])
    expected = h.n_total * np.diff(cdf)
    mask = expected >= 5.0
    n_used = int(mask.sum())
    if n_used < 5:
        raise ValueError("too few populated bins for a chi-square test")
    chi2 = float(((h.counts[mask] - expected[mask]) ** 2 / expected[mask]).sum())
    dof = n_used - 3
    return mu, sigma, chi2 / dof


def forcing_histogram(
    trajectory: "tuple[np.ndarray, np.ndarray]",
    omega: float,
    n_bins: int = 201,
) -> Histogram:
    """Histogram of the kick-phase product cos(2 pi t_{n+1}) sin(w x_n).

    `trajectory` is the pair (t, x) of aligned per-iteration series;
    the product pairs each t with the previous iteration's x, exactly
    as the velocity map consumes them.  Samples lie in [-1, 1].
    """
    t, x = trajectory
    t = np.asarray(t, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if t.size != x.size:
        raise ValueError("t and x series must have equal length")
    if t.size < 1000:
        raise ValueError("forcing_histogram requires >= 1000 iterations")
    samples = forcing_samples((t, x), omega)
    # a sample of exactly 1.0 tallies as overflow (half-open bins);
    # totals stay conserved either way
    h = Histogram(lo=-1.0, hi=1.0, n_bins=n_bins)
    h.add(samples)
    return h


def forcing_samples(
    trajectory: "tuple[np.ndarray, np.ndarray]", omega: float
) -> np.ndarray:
    """The raw cos(2 pi t_{n+1}) sin(w x_n) series (length n-1)."""
    t, x = trajectory
    t = np.asarray(t, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    return np.cos(2.0 * math.pi * t[1:]) * np.sin(omega * x[:-1])


def smooth_counts(counts: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; window must be odd."""
    if window % 2 != 1 or window < 1:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if window == 1:
        return counts.astype(np.float64)
    kernel = np.ones(window) / window
    return np.convolve(counts.astype(np.float64), kernel, mode="same")


def count_peaks(
    h: Histogram, window: int = 9, prominence: float = 0.2
) -> PeakReport:
    """Peaks of the smoothed histogram with a relative prominence gate.

    A bin is a peak when it is a local maximum of the moving-average
    smoothed counts and its prominence (height above the higher of the
    two flanking saddles) is at least `prominence` times the smoothed
    maximum.  Troughs are the interior minima between accepted peaks.
    """
    if window >= h.n_bins:
        raise ValueError(f"window {window} must be < n_bins {h.n_bins}")
    from scipy.signal import find_peaks

    s = smooth_counts(h.counts, window)
    threshold = prominence * float(s.max())
    idx, _ = find_peaks(s, prominence=threshold if threshold > 0 else None)
    centers = h.centers()
    positions = tuple(float(centers[i]) for i in idx)
    n_peaks = len(idx)
    n_troughs = max(n_peaks - 1, 0)
    return PeakReport(
        smoothing_window=window,
        n_peaks=n_peaks,
        peak_positions=positions,
        n_troughs=n_troughs,
    )


def chi_square_uniform(h: Histogram, significance: float = 0.01) -> "tuple[float, bool]":
    """Pearson chi-square of bin counts against a flat distribution.

    Only the binned counts enter (a wrapped coordinate has no
    under/overflow).  Returns (chi2, pass) where pass compares against
    the chi-square quantile at the given significance.
    """
    from scipy.stats import chi2 as chi2_dist

    n = int(h.counts.sum())
    if n < 10 * h.n_bins:
        raise ValueError("need at least 10 samples per bin on average")
    expected = n / h.n_bins
    chi2 = float(((h.counts - expected) ** 2 / expected).sum())
    crit = float(chi2_dist.isf(significance, h.n_bins - 1))
    return chi2, chi2 < crit


def build_frame_histogram(
    samples: np.ndarray,
    n_bins: int = 201,
    span_sigmas: float = 5.0,
    fixed_range: "tuple[float, float] | None" = None,
) -> Histogram:
    """Histogram a frame sample: fixed range if given, else mean +/- 5 sigma.

    A degenerate sample (zero spread) falls back to a unit-wide window
    centered on the mean so every sample still lands in a bin.
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if fixed_range is not None:
        lo, hi = fixed_range
    else:
        if arr.size == 0:
            lo, hi = -0.5, 0.5
        else:
            m = moments(arr)
            if m.std > 0.0 and math.isfinite(m.std):
                lo = m.mean - span_sigmas * m.std
                hi = m.mean + span_sigmas * m.std
            else:
                lo, hi = m.mean - 0.5, m.mean + 0.5
    return histogram_from_samples(arr, lo, hi, n_bins)
