"""Uniform-bin integer histograms with exact, order-independent merging.

Counts are plain int64; merging histograms with identical binning is
elementwise integer addition, so sharded aggregation reproduces the
single-shard result bit for bit.  Values land in bin
floor((value - lo) / width); everything below lo or at/above hi is
tallied in the under/overflow counters, never dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Histogram:
    lo: float
    hi: float
    n_bins: int
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]
    n_underflow: int = 0
    n_overflow: int = 0

    def __post_init__(self) -> None:
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.counts is None:
            self.counts = np.zeros(self.n_bins, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (self.n_bins,):
                raise ValueError("counts length does not match n_bins")

    @property
    def n_total(self) -> int:
        """Every sample ever added, including under/overflow."""
        return int(self.counts.sum()) + self.n_underflow + self.n_overflow

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def edges(self) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * np.arange(self.n_bins + 1) / self.n_bins

    def centers(self) -> np.ndarray:
        e = self.edges()
        return 0.5 * (e[:-1] + e[1:])

    def add(self, samples: np.ndarray) -> None:
        """Bin a batch of samples (non-finite values count as overflow)."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size == 0:
            return
        scaled = (samples - self.lo) * (self.n_bins / (self.hi - self.lo))
        with np.errstate(invalid="ignore"):
            idx = np.floor(scaled)
            under = idx < 0
            over = ~(idx < self.n_bins)  # catches NaN as overflow
        self.n_underflow += int(under.sum())
        self.n_overflow += int(over.sum())
        ok = ~(under | over)
        if ok.any():
            self.counts += np.bincount(
                idx[ok].astype(np.int64), minlength=self.n_bins
            )

    def same_binning(self, other: "Histogram") -> bool:
        return (
            self.lo == other.lo
            and self.hi == other.hi
            and self.n_bins == other.n_bins
        )

    def copy(self) -> "Histogram":
        return Histogram(
            lo=self.lo,
            hi=self.hi,
            n_bins=self.n_bins,
            counts=self.counts.copy(),
            n_underflow=self.n_underflow,
            n_overflow=self.n_overflow,
        )

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "n_bins": self.n_bins,
            "counts": [int(c) for c in self.counts],
            "n_underflow": self.n_underflow,
            "n_overflow": self.n_overflow,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Histogram":
        return cls(
            lo=d["lo"],
            hi=d["hi"],
            n_bins=d["n_bins"],
            counts=np.asarray(d["counts"], dtype=np.int64),
            n_underflow=d["n_underflow"],
            n_overflow=d["n_overflow"],
        )


def histogram_from_samples(
    samples: np.ndarray, lo: float, hi: float, n_bins: int
) -> Histogram:
    h = Histogram(lo=lo, hi=hi, n_bins=n_bins)
    h.add(samples)
    return h


def merge_histograms(a: Histogram, b: Histogram) -> Histogram:
    """Exact integer merge; requires identical (lo, hi, n_bins)."""
    if not a.same_binning(b):
        raise ValueError(
            f"histogram binning mismatch: [{a.lo}, {a.hi}]x{a.n_bins} vs "
            f"[{b.lo}, {b.hi}]x{b.n_bins}"
        )
    return Histogram(
        lo=a.lo,
        hi=a.hi,
        n_bins=a.n_bins,
        counts=a.counts + b.counts,
        n_underflow=a.n_underflow + b.n_underflow,
        n_overflow=a.n_overflow + b.n_overflow,
    )
