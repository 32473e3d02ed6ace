"""Fit noise parameters so the exact 18-qubit model reproduces a measured population and coherence."""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .analysis import coherence_from_series, coherence_thetas
from .errors import CalibrationError, ConfigurationError
from .pipeline import build_hyper_ghz18, exact_population, fringe_scan
from .source import NoiseParams

log = logging.getLogger(__name__)

DEFAULT_FREE = ("bitflip_prob", "fusion_visibility")
# search boxes; bit flips beyond 1/2 and Werner fidelities below 1/4 are unphysical here
BOUNDS = {
    "pair_fidelity": (0.25, 1.0),
    "double_pair_fraction": (0.0, 1.0),
    "bitflip_prob": (0.0, 0.5),
    "spatial_visibility": (0.0, 1.0),
    "oam_visibility": (0.0, 1.0),
    "fusion_visibility": (0.0, 1.0),
}


def simulate_targets(noise: NoiseParams) -> tuple[float, float]:
    """Exact (population, coherence) of the 18-qubit model."""
    ens = build_hyper_ghz18(noise)
    series = fringe_scan(ens, 18, coherence_thetas(18))
    return exact_population(ens), coherence_from_series(series)[0]


def calibrate_noise(target_population: float, target_coherence: float, initial: NoiseParams | None = None, *,
                    free: Sequence[str] = DEFAULT_FREE, tol: float = 0.005, max_iter: int = 200) -> NoiseParams:
    """Adjust two noise parameters until the model hits both targets within ``tol``.

    Bounded least squares (trust region) on the residuals of exact-mode
    population and coherence.  Parameters not listed in ``free`` keep their
    values from ``initial``.  Raises :class:`CalibrationError` carrying the
    best point found when the targets are out of reach.
    """
    for t in (target_population, target_coherence):
        if not 0 < t <= 1:
            raise ConfigurationError(f"calibration targets must lie in (0, 1], got {t}")
    initial = NoiseParams() if initial is None else initial
    free = tuple(free)
    if len(free) != 2 or len(set(free)) != 2:
        raise ConfigurationError("exactly two distinct free parameters are needed")
    unknown = [f for f in free if f not in BOUNDS]
    if unknown:
        raise ConfigurationError(f"cannot calibrate {unknown}; choose from {sorted(BOUNDS)}")

    lo = np.array([BOUNDS[f][0] for f in free])
    hi = np.array([BOUNDS[f][1] for f in free])
    x0 = np.clip([getattr(initial, f) for f in free], lo, hi)
    target = np.array([target_population, target_coherence])
    cache: dict[tuple, np.ndarray] = {}

    def params(x) -> NoiseParams:
        x = np.clip(x, lo, hi)
        return initial.replace(**{f: float(v) for f, v in zip(free, x)})

    def residual(x):
        key = tuple(np.round(x, 15))
        if key not in cache:
            cache[key] = np.array(simulate_targets(params(x))) - target
        return cache[key]

    if np.max(np.abs(residual(x0))) <= tol / 10:
        return params(x0)
    least_squares(residual, x0, bounds=(lo, hi), method="trf", max_nfev=max_iter,
                  xtol=1e-10, ftol=1e-12, gtol=1e-12)
    best_x = min(cache, key=lambda k: float(np.max(np.abs(cache[k]))))
    best = cache[best_x]
    log.info("calibration: %d evaluations, residuals %s", len(cache), best)
    if np.max(np.abs(best)) > tol:
        raise CalibrationError(
            f"targets ({target_population}, {target_coherence}) not reachable by varying {free}",
            best_params=params(np.array(best_x)), residuals=tuple(float(r) for r in best),
        )
    return params(np.array(best_x))
