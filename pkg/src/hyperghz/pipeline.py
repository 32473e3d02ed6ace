"""End-to-end experiment: state preparation, product-basis readout, exact distributions and event sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .analysis import FringeSeries, expectation_from_histogram, outcome_parity  # noqa: F401  (re-export)
from .errors import ConfigurationError, ContractViolation, NumericError
from .optics import AnalyzerBasis, BasisKind, Z_BASIS, pbs_split, readout_matrix, spp_encode
from .source import (
    NoiseParams,
    apply_bitflip,
    apply_double_pair_noise,
    apply_visibility_dephasing,
    ghz_polarization,
)
from .state import (
    DoF,
    Ensemble,
    QubitAddress,
    SparseState,
    path,
    oam,
    photon_register,
    pol,
    product_distribution,
    product_expectation,
)

SUPPORTED_SIZES = (1, 3, 12, 18)
_Z = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class MeasurementSetting:
    register: tuple
    bases: tuple

    def __post_init__(self):
        object.__setattr__(self, "register", tuple(self.register))
        object.__setattr__(self, "bases", tuple(self.bases))
        if len(self.register) != len(self.bases):
            raise ConfigurationError("every register qubit needs exactly one analyzer basis")

    @classmethod
    def uniform(cls, register: Sequence[QubitAddress], basis: AnalyzerBasis) -> "MeasurementSetting":
        return cls(tuple(register), (basis,) * len(register))

    @classmethod
    def computational(cls, register) -> "MeasurementSetting":
        return cls.uniform(register, Z_BASIS)

    @classmethod
    def superposition(cls, register, theta: float) -> "MeasurementSetting":
        return cls.uniform(register, AnalyzerBasis.superposition(theta))

    @property
    def n_qubits(self) -> int:
        return len(self.register)

    @property
    def is_computational(self) -> bool:
        return all(b.is_computational for b in self.bases)

    def readouts(self, *, interferometric: bool = True) -> np.ndarray:
        return np.stack([_readout(a.dof, b.kind, b.theta, interferometric)
                         for a, b in zip(self.register, self.bases)])

    def to_dict(self) -> dict:
        return {
            "register": [[a.photon, a.dof.name] for a in self.register],
            "bases": [[b.kind.value, b.theta] for b in self.bases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementSetting":
        register = tuple(QubitAddress(p, DoF[d]) for p, d in data["register"])
        bases = tuple(AnalyzerBasis(BasisKind(k), t) for k, t in data["bases"])
        return cls(register, bases)


@lru_cache(maxsize=4096)
def _readout(dof: DoF, kind: BasisKind, theta: float, interferometric: bool) -> np.ndarray:
    m = readout_matrix(dof, AnalyzerBasis(kind, theta), interferometric=interferometric)
    m.setflags(write=False)
    return m


@dataclass
class OutcomeDistribution:
    """Sparse probability vector over the 2**N detector outcomes of one setting."""

    setting: MeasurementSetting
    outcomes: np.ndarray
    probs: np.ndarray

    @property
    def n_qubits(self) -> int:
        return self.setting.n_qubits

    def dense(self) -> np.ndarray:
        out = np.zeros(1 << self.n_qubits)
        out[self.outcomes] = self.probs
        return out

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.outcomes.tolist(), self.probs.tolist()))

    def prob(self, outcome: int) -> float:
        hit = np.flatnonzero(self.outcomes == outcome)
        return float(self.probs[hit[0]]) if len(hit) else 0.0

    def expectation(self) -> float:
        """Parity expectation sum_s p_s v_s."""
        signs = np.array([outcome_parity(o) for o in self.outcomes.tolist()], dtype=float)
        return float(np.dot(signs, self.probs))


@dataclass
class OutcomeHistogram:
    counts: dict[int, int]
    total_events: int
    duration_s: float
    setting: MeasurementSetting

    def __post_init__(self):
        self.counts = {int(k): int(v) for k, v in self.counts.items() if v}
        if any(v < 0 for v in self.counts.values()):
            raise ConfigurationError("counts must be non-negative")
        if sum(self.counts.values()) != self.total_events:
            raise ConfigurationError("counts do not sum to total_events")
        limit = 1 << self.setting.n_qubits
        if any(not 0 <= k < limit for k in self.counts):
            raise ConfigurationError("outcome key outside the register width")

    @property
    def n_qubits(self) -> int:
        return self.setting.n_qubits


# ---------------------------------------------------------------------------
# state preparation
# ---------------------------------------------------------------------------

def _encode_all(ens: Ensemble, photons: Iterable[int]) -> Ensemble:
    photons = list(photons)

    def encode(s: SparseState) -> SparseState:
        for p in photons:
            s = spp_encode(pbs_split(s, p), p)
        return s

    # only phase-flip channels can be pending here, and Z on a CNOT control commutes
    if any(px for px, _ in ens.channels.values()):
        raise ContractViolation("bit-flip channels must be added after encoding")
    return ens.map(encode, defer_channels=True)


def _local_noise(ens: Ensemble, noise: NoiseParams, photons: Sequence[int], *, encoded: bool) -> Ensemble:
    if encoded:
        ens = apply_bitflip(ens, photon_register(photons), noise.bitflip_prob)
        ens = apply_visibility_dephasing(ens, [path(p) for p in photons], noise.spatial_visibility)
        ens = apply_visibility_dephasing(ens, [oam(p) for p in photons], noise.oam_visibility)
    else:
        ens = apply_bitflip(ens, [pol(p) for p in photons], noise.bitflip_prob)
    return ens


def _plus_photon() -> SparseState:
    return SparseState((pol(1),), {0: 1 / math.sqrt(2), 1: 1 / math.sqrt(2)})


def build_subexperiment(n_qubits: int, noise: NoiseParams) -> Ensemble:
    """State for one of the four fringe panels.

    1: a single polarization qubit (|H>+|V>)/sqrt2; 3: one photon with all
    three DoFs; 12: four photons (two pairs, one fusion) x 3 DoFs; 18: six
    photons x 3 DoFs.
    """
    if n_qubits == 1:
        return _local_noise(Ensemble.pure(_plus_photon()), noise, [1], encoded=False)
    if n_qubits == 3:
        ens = _encode_all(Ensemble.pure(_plus_photon()), [1])
        return _local_noise(ens, noise, [1], encoded=True)
    if n_qubits in (12, 18):
        n_pairs = n_qubits // 6
        photons = list(range(1, 2 * n_pairs + 1))
        ens, _ = ghz_polarization(noise, n_pairs)
        ens = _encode_all(ens, photons)
        ens = apply_double_pair_noise(ens, noise.double_pair_fraction)
        return _local_noise(ens, noise, photons, encoded=True)
    raise ConfigurationError(f"no sub-experiment with {n_qubits} qubits; choose from {SUPPORTED_SIZES}")


def build_hyper_ghz18(noise: NoiseParams) -> Ensemble:
    """Six-photon polarization GHZ, path split and OAM encoding on every photon, then noise."""
    return build_subexperiment(18, noise)


def photons_with_oam(register) -> int:
    return len({a.photon for a in register if a.dof is DoF.OAM})


def effective_rate(rate_hz: float, noise: NoiseParams, register) -> float:
    """Coincidence rate after the OAM-to-polarization converters' per-photon loss."""
    return rate_hz * noise.converter_efficiency ** photons_with_oam(register)


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------

def _check_setting(ens: Ensemble, setting: MeasurementSetting) -> None:
    if tuple(setting.register) != tuple(ens.register):
        raise ContractViolation("measurement setting does not cover the ensemble register")


def outcome_distribution(ens: Ensemble, setting: MeasurementSetting, *, interferometric: bool = True,
                         drop_below: float = 1e-15) -> OutcomeDistribution:
    """Exact detector-outcome probabilities for a product setting.

    Each qubit's readout is the matrix obtained by pushing its logic states
    through the analyzer chain (Mach-Zehnder for path; QWP/HWP/PBS for
    polarization; OAM-polarization CNOT, q-plate and the polarization
    analyzer for OAM).
    """
    _check_setting(ens, setting)
    probs = product_distribution(ens, setting.readouts(interferometric=interferometric))
    total = probs.sum()
    if abs(total - 1) > 1e-9:
        raise NumericError(f"outcome probabilities sum to {total!r}")
    nz = np.flatnonzero(probs > drop_below)
    return OutcomeDistribution(setting, nz.astype(np.int64), probs[nz])


def exact_expectation(ens: Ensemble, setting: MeasurementSetting) -> float:
    """Exact parity expectation <prod_q M_q> without enumerating outcomes."""
    _check_setting(ens, setting)
    readouts = setting.readouts()
    # O_q = R_q^dagger Z R_q
    ops = np.einsum("qoa,ob,qbc->qac", readouts.conj(), _Z, readouts)
    return float(product_expectation(ens, ops).real)


def exact_outcome_probability(ens: Ensemble, setting: MeasurementSetting, outcome: int) -> float:
    _check_setting(ens, setting)
    readouts = setting.readouts()
    n = setting.n_qubits
    ops = []
    for q in range(n):
        o = (outcome >> (n - 1 - q)) & 1
        row = readouts[q, o]
        ops.append(np.outer(row.conj(), row))
    return float(product_expectation(ens, np.array(ops)).real)


def exact_population(ens: Ensemble) -> float:
    setting = MeasurementSetting.computational(ens.register)
    n = ens.n_qubits
    return (exact_outcome_probability(ens, setting, 0)
            + exact_outcome_probability(ens, setting, (1 << n) - 1))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def derive_seed(seed: int, *tags: int) -> np.random.SeedSequence:
    """Independent, schedule-free stream for one (seed, tag...) combination."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tags))


def sample_histogram(distribution: OutcomeDistribution, rate_hz: float, duration_s: float, seed) -> OutcomeHistogram:
    """Poisson number of events (mean rate * duration), multinomially spread over outcomes."""
    if rate_hz < 0 or duration_s < 0:
        raise ConfigurationError("rate and duration must be non-negative")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(rate_hz * duration_s))
    if n == 0:
        return OutcomeHistogram({}, 0, duration_s, distribution.setting)
    p = distribution.probs / distribution.probs.sum()
    draws = rng.multinomial(n, p)
    nz = np.flatnonzero(draws)
    counts = dict(zip(distribution.outcomes[nz].tolist(), draws[nz].tolist()))
    return OutcomeHistogram(counts, n, duration_s, distribution.setting)


def default_theta_grid(n_steps: int = 18) -> np.ndarray:
    """k*pi/n_steps for k = 0..n_steps (19 points by default)."""
    return np.arange(n_steps + 1) * math.pi / n_steps


def fringe_scan(ens: Ensemble, n_qubits: int, theta_grid: Sequence[float], rate_hz: float | None = None,
                duration_s: float | None = None, seed: int = 0) -> FringeSeries:
    """<M_theta^(x)N> over a phase grid with every qubit in the same superposition basis.

    Exact (stderr 0) when ``rate_hz`` is None; otherwise each phase gets its
    own Poisson acquisition with a seed derived from ``seed`` and the grid index.
    """
    if ens.n_qubits != n_qubits:
        raise ContractViolation(f"ensemble has {ens.n_qubits} qubits, scan asked for {n_qubits}")
    grid = np.asarray(theta_grid, dtype=float)
    values, errors = [], []
    for k, theta in enumerate(grid):
        setting = MeasurementSetting.superposition(ens.register, float(theta))
        if rate_hz is None:
            values.append(exact_expectation(ens, setting))
            errors.append(0.0)
        else:
            if duration_s is None:
                raise ConfigurationError("sampled scans need a duration")
            dist = outcome_distribution(ens, setting)
            hist = sample_histogram(dist, rate_hz, duration_s, derive_seed(seed, 1, k))
            v, e = expectation_from_histogram(hist)
            values.append(v)
            errors.append(e)
    return FringeSeries(n_qubits, grid, np.array(values), np.array(errors))
