"""Simulator for an 18-qubit GHZ state carried by six photons in three degrees of freedom."""
from .analysis import (
    FitResult,
    FringeSeries,
    GhzReport,
    attribute_noise,
    coherence18,
    expectation_from_histogram,
    fringe_fit,
    ghz_fidelity,
    population,
    rate_gain,
    snr,
    witness_sigma,
)
from .calibration import calibrate_noise
from .optics import AnalyzerBasis, BasisKind
from .pipeline import (
    MeasurementSetting,
    OutcomeDistribution,
    OutcomeHistogram,
    build_hyper_ghz18,
    build_subexperiment,
    fringe_scan,
    outcome_distribution,
    outcome_parity,
    sample_histogram,
)
from .source import NoiseParams, ghz6
from .state import DoF, Ensemble, QubitAddress, SparseState

__version__ = "0.1.0"

__all__ = [
    "AnalyzerBasis",
    "BasisKind",
    "DoF",
    "Ensemble",
    "FitResult",
    "FringeSeries",
    "GhzReport",
    "MeasurementSetting",
    "NoiseParams",
    "OutcomeDistribution",
    "OutcomeHistogram",
    "QubitAddress",
    "SparseState",
    "attribute_noise",
    "build_hyper_ghz18",
    "build_subexperiment",
    "calibrate_noise",
    "coherence18",
    "expectation_from_histogram",
    "fringe_fit",
    "fringe_scan",
    "ghz6",
    "ghz_fidelity",
    "outcome_distribution",
    "outcome_parity",
    "population",
    "rate_gain",
    "sample_histogram",
    "snr",
    "witness_sigma",
]
