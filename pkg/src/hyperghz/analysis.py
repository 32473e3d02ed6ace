"""Estimators for GHZ verification data: parity, coherence, population, fidelity, witness, SNR, fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import ContractViolation, FitError, InsufficientData

WITNESS_THRESHOLD = 0.5


def outcome_parity(outcome: int) -> int:
    """Eigenvalue of the product observable for a superposition-basis outcome: (-1)**popcount."""
    return -1 if int(outcome).bit_count() & 1 else 1


@dataclass
class FringeSeries:
    n_qubits: int
    thetas: np.ndarray
    expectations: np.ndarray
    stderrs: np.ndarray

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.expectations = np.asarray(self.expectations, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        if not (len(self.thetas) == len(self.expectations) == len(self.stderrs)):
            raise ContractViolation("fringe columns must have equal length")
        if np.any(np.diff(self.thetas) <= 0):
            raise ContractViolation("fringe phases must be strictly increasing")
        if len(self.thetas) and (self.thetas[0] < -1e-12 or self.thetas[-1] > math.pi + 1e-12):
            raise ContractViolation("fringe phases must lie in [0, pi]")
        if np.any(self.stderrs < 0):
            raise ContractViolation("standard errors must be non-negative")

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thetas.tolist(), self.expectations.tolist(), self.stderrs.tolist()))

    def __len__(self) -> int:
        return len(self.thetas)


def expectation_from_histogram(histogram) -> tuple[float, float]:
    """Parity expectation and its Poisson-propagated standard error sqrt((1 - <M>^2) / N)."""
    n = histogram.total_events
    if n <= 0:
        raise InsufficientData("histogram has no events")
    signed = sum(c * outcome_parity(k) for k, c in histogram.counts.items())
    value = signed / n
    return value, math.sqrt(max(0.0, 1.0 - value * value) / n)


def coherence_thetas(n_qubits: int) -> np.ndarray:
    return np.arange(n_qubits) * math.pi / n_qubits


def coherence(expectations: Sequence[float], stderrs: Sequence[float] | None = None,
              thetas: Sequence[float] | None = None) -> tuple[float, float]:
    """(1/N) sum_k (-1)**(k+1) <M_{k pi/N}> over k = 0..N-1, N = len(expectations).

    The alternating sum keeps only the N-th harmonic of the fringe, i.e. the
    |0..0><1..1| element.  Settings are independent acquisitions, so their
    errors add in quadrature.
    """
    e = np.asarray(expectations, dtype=float)
    n = len(e)
    if n == 0:
        raise ContractViolation("coherence needs at least one expectation value")
    if thetas is not None:
        thetas = np.asarray(thetas, dtype=float)
        if thetas.shape != e.shape or not np.allclose(thetas, coherence_thetas(n), atol=1e-9):
            raise ContractViolation(f"coherence needs the {n} settings k*pi/{n}, k = 0..{n - 1}")
    signs = np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    value = float(np.dot(signs, e) / n)
    if stderrs is None:
        return value, 0.0
    s = np.asarray(stderrs, dtype=float)
    return value, float(math.sqrt(np.sum(s * s)) / n)


def coherence18(expectations: Sequence[float], stderrs: Sequence[float] | None = None,
                thetas: Sequence[float] | None = None) -> tuple[float, float]:
    if len(expectations) != 18:
        raise ContractViolation(f"coherence18 needs exactly 18 expectations, got {len(expectations)}")
    return coherence(expectations, stderrs, thetas)


def coherence_from_series(series: FringeSeries) -> tuple[float, float]:
    """Pick the k*pi/N points out of a fringe scan (e.g. the default 19-point grid)."""
    n = series.n_qubits
    want = coherence_thetas(n)
    idx = []
    for t in want:
        hits = np.flatnonzero(np.abs(series.thetas - t) < 1e-9)
        if not len(hits):
            raise ContractViolation(f"fringe scan lacks the setting theta = {t:.6f}")
        idx.append(hits[0])
    return coherence(series.expectations[idx], series.stderrs[idx], series.thetas[idx])


def _require_computational(histogram) -> None:
    setting = getattr(histogram, "setting", None)
    if setting is not None and not setting.is_computational:
        raise ContractViolation("population needs a computational-basis histogram")


def population(histogram) -> tuple[float, float]:
    """Fraction of events in |0..0> or |1..1>, with binomial standard error."""
    _require_computational(histogram)
    n = histogram.total_events
    if n <= 0:
        raise InsufficientData("histogram has no events")
    all_ones = (1 << histogram.n_qubits) - 1
    good = histogram.counts.get(0, 0) + histogram.counts.get(all_ones, 0)
    value = good / n
    return value, math.sqrt(value * (1 - value) / n)


def ghz_fidelity(population_pair: tuple[float, float], coherence_pair: tuple[float, float]) -> tuple[float, float]:
    (p, sp), (c, sc) = population_pair, coherence_pair
    return (p + c) / 2, math.sqrt(sp * sp + sc * sc) / 2


def witness_sigma(fidelity: float, stderr: float) -> float:
    """Distance of the fidelity above 1/2 in standard errors.

    With exact (zero-error) data this is +inf above the threshold, -inf below
    it and 0 on it.
    """
    if stderr < 0:
        raise ContractViolation("standard error must be non-negative")
    excess = fidelity - WITNESS_THRESHOLD
    if stderr == 0:
        return 0.0 if excess == 0 else math.copysign(math.inf, excess)
    return excess / stderr


def snr_from_counts(desired: float, total: float, n_qubits: int) -> float:
    if total <= 0:
        raise InsufficientData("no events")
    undesired = total - desired
    if undesired <= 0:
        return math.inf
    return (desired / 2) / (undesired / ((1 << n_qubits) - 2))


def snr(histogram) -> float:
    """Mean count of the two GHZ terms over the mean count of the other 2**N - 2 outcomes."""
    _require_computational(histogram)
    all_ones = (1 << histogram.n_qubits) - 1
    desired = histogram.counts.get(0, 0) + histogram.counts.get(all_ones, 0)
    return snr_from_counts(desired, histogram.total_events, histogram.n_qubits)


def rate_gain(rate_hyper_hz: float, rate_single_dof_hz: float) -> float:
    """Orders of magnitude between two event rates."""
    if rate_hyper_hz <= 0 or rate_single_dof_hz <= 0:
        raise ValueError("rates must be positive")
    return math.log10(rate_hyper_hz / rate_single_dof_hz)


def photon_blocks(register) -> list[list[int]]:
    """Bit positions (MSB = register[0]) grouped by photon."""
    n = len(register)
    blocks: dict[int, list[int]] = {}
    for i, addr in enumerate(register):
        blocks.setdefault(addr.photon, []).append(n - 1 - i)
    return [blocks[p] for p in sorted(blocks)]


def attribute_noise(histogram) -> tuple[float, float]:
    """Split undesired computational-basis events into double-pair-like and bit-flip-like.

    An undesired outcome whose bits agree within every photon (whole photons
    substituted) counts as double-pair noise; one with disagreement inside a
    photon counts as a bit flip.  Both are returned as fractions of all events.
    """
    _require_computational(histogram)
    n = histogram.total_events
    if n <= 0:
        raise InsufficientData("histogram has no events")
    blocks = photon_blocks(histogram.setting.register)
    all_ones = (1 << histogram.n_qubits) - 1
    dp = bf = 0
    for k, c in histogram.counts.items():
        if k in (0, all_ones):
            continue
        consistent = all(len({(k >> p) & 1 for p in b}) == 1 for b in blocks)
        if consistent:
            dp += c
        else:
            bf += c
    return dp / n, bf / n


@dataclass
class FitResult:
    amplitude: float
    frequency: float
    phase: float
    offset: float
    rms_residual: float
    n_qubits: int
    degenerate: bool = False
    # grid too coarse to resolve the nominal frequency; frequency and phase were held fixed
    nyquist_limited: bool = False

    @property
    def visibility(self) -> float:
        return abs(self.amplitude)

    @property
    def frequency_ok(self) -> bool:
        """Frequency was fitted and landed within 2% of the qubit number."""
        if self.degenerate or self.nyquist_limited:
            return False
        return abs(self.frequency - self.n_qubits) <= 0.02 * self.n_qubits

    def to_dict(self) -> dict:
        d = asdict(self)
        d["visibility"] = self.visibility
        d["frequency_ok"] = self.frequency_ok
        return d


def _sinusoid(params, theta):
    a, f, phi, c = params
    return a * np.cos(f * theta + phi) + c


def fringe_fit(series: FringeSeries, *, max_nfev: int = 2000, degenerate_amplitude: float = 1e-6) -> FitResult:
    """Least-squares fit of A cos(f theta + phi) + c, starting from f = n_qubits.

    Amplitude and phase are seeded by the linear fit at the nominal frequency;
    the frequency is then left free.  The amplitude is reported non-negative.

    When the largest phase step reaches pi / n_qubits (e.g. 19 points k*pi/18
    for N = 18), cos and sin at the nominal frequency are no longer separable
    and only A cos(phi) is identifiable.  The fit then keeps f = n_qubits and
    phi in {0, pi} and sets ``nyquist_limited``.
    """
    theta, y = series.thetas, series.expectations
    if len(theta) < 5:
        raise ContractViolation("a fringe fit needs at least 5 points")
    f0 = float(series.n_qubits)
    if f0 * float(np.max(np.diff(theta))) >= math.pi * (1 - 1e-9):
        return _fixed_frequency_fit(series, f0, degenerate_amplitude)
    design = np.column_stack([np.cos(f0 * theta), np.sin(f0 * theta), np.ones_like(theta)])
    (a, b, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp0 = math.hypot(a, b)
    if amp0 < degenerate_amplitude:
        resid = y - c
        return FitResult(0.0, f0, 0.0, float(c), float(np.sqrt(np.mean(resid ** 2))), series.n_qubits, True)
    phi0 = math.atan2(-b, a)
    sigma = series.stderrs if np.all(series.stderrs > 0) else np.ones_like(y)

    def residual(p):
        return (_sinusoid(p, theta) - y) / sigma

    res = least_squares(residual, [amp0, f0, phi0, c], method="lm", max_nfev=max_nfev,
                        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if res.status <= 0:
        raise FitError("sinusoid fit did not converge", {"status": res.status, "message": res.message,
                                                         "nfev": res.nfev, "x": res.x.tolist()})
    amp, freq, phi, off = res.x
    if amp < 0:
        amp, phi = -amp, phi + math.pi
    phi = (phi + math.pi) % (2 * math.pi) - math.pi
    rms = float(np.sqrt(np.mean((_sinusoid((amp, freq, phi, off), theta) - y) ** 2)))
    return FitResult(float(amp), float(freq), float(phi), float(off), rms, series.n_qubits)


def _fixed_frequency_fit(series: FringeSeries, f0: float, degenerate_amplitude: float) -> FitResult:
    theta, y = series.thetas, series.expectations
    design = np.column_stack([np.cos(f0 * theta), np.ones_like(theta)])
    (a, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((design @ np.array([a, c]) - y) ** 2)))
    degenerate = bool(abs(a) < degenerate_amplitude)
    phase = math.pi if a < 0 else 0.0
    return FitResult(float(abs(a)), f0, phase, float(c), rms, series.n_qubits, degenerate, nyquist_limited=True)


@dataclass
class GhzReport:
    population: float
    population_err: float
    coherence: float
    coherence_err: float
    fidelity: float
    fidelity_err: float
    witness_sigma: float
    snr: float
    noise_params: dict = field(default_factory=dict)
    schema_version: int = 1

    @classmethod
    def from_estimates(cls, population_pair, coherence_pair, snr_value: float, noise_params: dict | None = None):
        fid, fid_err = ghz_fidelity(population_pair, coherence_pair)
        return cls(population_pair[0], population_pair[1], coherence_pair[0], coherence_pair[1],
                   fid, fid_err, witness_sigma(fid, fid_err), snr_value, dict(noise_params or {}))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GhzReport":
        return cls(**data)
