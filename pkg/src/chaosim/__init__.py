"""Deterministic chaotic-map particle ensembles.

A logistic-driven kicked map generates single-particle trajectories
whose ensembles reproduce diffusion, free-space dispersion, double-slit
fringes, barrier traversal and particle-in-a-box wave regimes.
"""

from .ensemble import (
    EnsembleResult,
    EnsembleSpec,
    FixedPoint,
    GaussianPosition,
    RandomTimePhase,
    init_particles,
    run_ensemble,
)
from .histogram import Histogram, histogram_from_samples, merge_histograms
from .maps import (
    MapParams,
    StepMode,
    TrajectoryState,
    kick_step,
    logistic_step,
    position_step,
    step,
    time_step,
)
from .scenarios import (
    Annulus,
    BarrierScenario,
    Box,
    DoubleSlit,
    FreeSpace,
    SlitParticle3D,
    advance_annulus,
    advance_barrier,
    advance_box,
    advance_free,
    advance_slit,
)
from .stats import (
    Moments,
    PeakReport,
    chi_square_uniform,
    count_peaks,
    forcing_histogram,
    gaussian_fit_check,
    ks_uniform,
    moments,
)

__version__ = "0.1.0"

__all__ = [
    "Annulus",
    "BarrierScenario",
    "Box",
    "DoubleSlit",
    "EnsembleResult",
    "EnsembleSpec",
    "FixedPoint",
    "FreeSpace",
    "GaussianPosition",
    "Histogram",
    "MapParams",
    "Moments",
    "PeakReport",
    "RandomTimePhase",
    "SlitParticle3D",
    "StepMode",
    "TrajectoryState",
    "advance_annulus",
    "advance_barrier",
    "advance_box",
    "advance_free",
    "advance_slit",
    "chi_square_uniform",
    "count_peaks",
    "forcing_histogram",
    "gaussian_fit_check",
    "histogram_from_samples",
    "init_particles",
    "ks_uniform",
    "kick_step",
    "logistic_step",
    "merge_histograms",
    "moments",
    "position_step",
    "run_ensemble",
    "step",
    "time_step",
]
