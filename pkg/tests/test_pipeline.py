import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperghz.analysis import expectation_from_histogram
from hyperghz.errors import ConfigurationError, ContractViolation
from hyperghz.optics import AnalyzerBasis, pbs_split, spp_encode
from hyperghz.pipeline import (
    MeasurementSetting,
    OutcomeDistribution,
    OutcomeHistogram,
    build_hyper_ghz18,
    build_subexperiment,
    default_theta_grid,
    derive_seed,
    effective_rate,
    exact_expectation,
    fringe_scan,
    outcome_distribution,
    outcome_parity,
    sample_histogram,
)
from hyperghz.source import (
    NoiseParams,
    apply_bitflip,
    apply_double_pair_noise,
    apply_visibility_dephasing,
    ghz_polarization,
    ideal_ghz,
)
from hyperghz.state import Ensemble, SparseState, oam, path, photon_register, pol, same_ray

import oracles

S2 = 1 / math.sqrt(2)
IDEAL = NoiseParams.ideal()


def tv(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def random_setting(rng, register):
    bases = []
    for _ in register:
        if rng.random() < 0.3:
            bases.append(AnalyzerBasis.computational())
        else:
            bases.append(AnalyzerBasis.superposition(float(rng.uniform(0, math.pi))))
    return MeasurementSetting(register, bases)


def oracle_readouts(setting):
    return [oracles.target_readout(None if b.is_computational else b.theta) for b in setting.bases]


class TestBuild:
    def test_noiseless_18_qubits_has_two_amplitudes(self):
        ens = build_hyper_ghz18(IDEAL)
        assert len(ens) == 1 and not ens.channels
        s = ens.members[0][1]
        assert s.n_qubits == 18 and len(s.amplitudes) == 2
        assert sorted(abs(a) for a in s.amplitudes.values()) == pytest.approx([S2, S2])
        assert same_ray(s, ideal_ghz(photon_register(range(1, 7))))
        assert s.register == photon_register(range(1, 7))

    @pytest.mark.parametrize("n", [1, 3, 12, 18])
    def test_subexperiment_sizes(self, n):
        assert build_subexperiment(n, NoiseParams()).n_qubits == n

    def test_invalid_size(self):
        with pytest.raises(ConfigurationError):
            build_subexperiment(6, IDEAL)

    def test_default_noise_keeps_exact_mode_small(self):
        ens = build_hyper_ghz18(NoiseParams())
        assert len(ens) <= 10_000
        assert ens.total_weight() == pytest.approx(1.0, abs=1e-9)

    def test_effective_rate(self):
        reg = photon_register(range(1, 7))
        assert effective_rate(0.2, NoiseParams(), reg) == pytest.approx(0.2 * 0.92 ** 6)
        assert effective_rate(0.2, NoiseParams(), [pol(1)]) == 0.2


class TestOutcomeDistribution:
    def test_ideal_computational(self):
        ens = build_hyper_ghz18(IDEAL)
        d = outcome_distribution(ens, MeasurementSetting.computational(ens.register))
        assert d.as_dict() == pytest.approx({0: 0.5, (1 << 18) - 1: 0.5}, abs=1e-12)

    def test_ideal_x_basis_odd_parity_uniform(self):
        ens = build_hyper_ghz18(IDEAL)
        d = outcome_distribution(ens, MeasurementSetting.superposition(ens.register, 0.0))
        assert len(d.outcomes) == 1 << 17
        # the minus-sign state sits at <M> = -1 for theta = 0
        assert all(outcome_parity(o) == -1 for o in d.outcomes.tolist())
        np.testing.assert_allclose(d.probs, 2.0 ** -17, rtol=1e-9)

    @pytest.mark.parametrize("theta", [0.0, 0.9, math.pi])
    def test_single_qubit_basis_state(self, theta):
        ens = Ensemble.pure(SparseState([pol(1)], {0: 1.0}))
        d = outcome_distribution(ens, MeasurementSetting.superposition(ens.register, theta))
        assert d.dense() == pytest.approx([0.5, 0.5])

    def test_register_mismatch(self):
        ens = build_hyper_ghz18(IDEAL)
        with pytest.raises(ContractViolation):
            outcome_distribution(ens, MeasurementSetting.computational([pol(1)]))

    def test_normalized_under_noise(self):
        ens = build_hyper_ghz18(NoiseParams())
        d = outcome_distribution(ens, MeasurementSetting.superposition(ens.register, 0.4))
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_expectation_agrees_with_distribution(self):
        ens = build_hyper_ghz18(NoiseParams())
        s = MeasurementSetting.superposition(ens.register, 0.3)
        assert outcome_distribution(ens, s).expectation() == pytest.approx(exact_expectation(ens, s), abs=1e-12)

    def test_z_marginal_independent_of_other_phases(self):
        ens = build_subexperiment(12, NoiseParams())
        reg = ens.register
        z_mask = [i % 2 == 0 for i in range(12)]

        def marginal(theta):
            bases = [AnalyzerBasis.computational() if z else AnalyzerBasis.superposition(theta) for z in z_mask]
            p = outcome_distribution(ens, MeasurementSetting(reg, bases)).dense().reshape([2] * 12)
            return p.sum(axis=tuple(i for i in range(12) if not z_mask[i]))

        ref = marginal(0.0)
        for theta in (0.5, 1.7, math.pi):
            np.testing.assert_allclose(marginal(theta), ref, atol=1e-14)


class TestBruteForceOracle:
    """Dense density matrices built with Kronecker products, measured in the target bases."""

    @pytest.mark.parametrize("seed", range(4))
    def test_single_photon_three_dofs(self, seed):
        noise = NoiseParams(bitflip_prob=0.03, spatial_visibility=0.9, oam_visibility=0.8)
        ens = build_subexperiment(3, noise)
        rho = np.outer([S2, S2], [S2, S2]).astype(complex)
        v = oracles.encode_photons(1)
        rho = v @ rho @ v.conj().T
        for q in range(3):
            rho = oracles.pauli_channel(rho, 3, q, 0.03, 0.0)
        rho = oracles.pauli_channel(rho, 3, 1, 0.0, 0.05)
        rho = oracles.pauli_channel(rho, 3, 2, 0.0, 0.1)
        setting = random_setting(np.random.default_rng(seed), ens.register)
        ref = oracles.dense_distribution(rho, oracle_readouts(setting))
        assert tv(outcome_distribution(ens, setting).dense(), ref) < 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_werner_pair_encoded_on_six_qubits(self, seed):
        noise = NoiseParams(pair_fidelity=0.9, bitflip_prob=0.02, spatial_visibility=0.95, oam_visibility=0.97)
        pol_ens, _ = ghz_polarization(noise, 1)

        def encode(s):
            for p in (1, 2):
                s = spp_encode(pbs_split(s, p), p)
            return s

        ens = pol_ens.map(encode)
        ens = apply_bitflip(ens, ens.register, 0.02)
        ens = apply_visibility_dephasing(ens, [path(1), path(2)], 0.95)
        ens = apply_visibility_dephasing(ens, [oam(1), oam(2)], 0.97)

        flip = oracles.op_on(2, {0: oracles.X})
        rho = flip @ oracles.werner(0.9) @ flip
        v = oracles.encode_photons(2)
        rho = v @ rho @ v.conj().T
        for q in range(6):
            rho = oracles.pauli_channel(rho, 6, q, 0.02, 0.0)
        for q, vis in ((1, 0.95), (4, 0.95), (2, 0.97), (5, 0.97)):
            rho = oracles.pauli_channel(rho, 6, q, 0.0, (1 - vis) / 2)
        setting = random_setting(np.random.default_rng(100 + seed), ens.register)
        ref = oracles.dense_distribution(rho, oracle_readouts(setting))
        assert tv(outcome_distribution(ens, setting).dense(), ref) < 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_double_pair_on_nine_qubits(self, seed):
        reg = photon_register([1, 2, 3])
        rng = np.random.default_rng(seed)
        amp = rng.normal(size=8) + 1j * rng.normal(size=8)
        amp /= np.linalg.norm(amp)
        v = oracles.encode_photons(3)
        psi = v @ amp
        state = SparseState(reg, {i: a for i, a in enumerate(psi) if abs(a) > 0})
        ens = apply_double_pair_noise(Ensemble.pure(state), 0.3, sources=[(1, 2)])

        rho = np.outer(psi, psi.conj())
        rest = np.trace(rho.reshape(64, 8, 64, 8), axis1=0, axis2=2)
        block = np.zeros((64, 64), dtype=complex)
        for a in (0, 1):
            for b in (0, 1):
                k = (0b111 * a << 3) | (0b111 * b)
                block[k, k] = 0.25
        rho = 0.7 * rho + 0.3 * np.kron(block, rest)
        setting = random_setting(rng, reg)
        ref = oracles.dense_distribution(rho, oracle_readouts(setting))
        assert tv(outcome_distribution(ens, setting).dense(), ref) < 1e-10


class TestParity:
    def test_examples(self):
        assert outcome_parity(0) == 1
        assert outcome_parity(0b1000) == -1
        assert outcome_parity(0b101) == 1
        assert outcome_parity(0b111) == -1


class TestSampling:
    def _uniform2(self):
        s = MeasurementSetting.computational([pol(1)])
        return OutcomeDistribution(s, np.array([0, 1]), np.array([0.5, 0.5]))

    def test_deterministic(self):
        d = self._uniform2()
        a = sample_histogram(d, 0.2, 7200, derive_seed(5, 0))
        b = sample_histogram(d, 0.2, 7200, derive_seed(5, 0))
        assert a.counts == b.counts and a.total_events == b.total_events

    def test_mean_events(self):
        d = self._uniform2()
        totals = [sample_histogram(d, 0.2, 7200, derive_seed(s, 0)).total_events for s in range(400)]
        # Poisson(1440): sd of the mean over 400 runs is 1.9
        assert abs(np.mean(totals) - 1440) < 8

    def test_zero_expected_events(self):
        h = sample_histogram(self._uniform2(), 0.2, 0.0, 1)
        assert h.total_events == 0 and h.counts == {}

    def test_binomial_concentration(self):
        h = sample_histogram(self._uniform2(), 1e6, 1.0, 3)
        assert abs(h.counts[0] / h.total_events - 0.5) < 0.002

    def test_histogram_invariants(self):
        s = MeasurementSetting.computational([pol(1)])
        with pytest.raises(ConfigurationError):
            OutcomeHistogram({0: 3}, 4, 1.0, s)
        with pytest.raises(ConfigurationError):
            OutcomeHistogram({2: 1}, 1, 1.0, s)

    def test_sampled_expectation_consistent_with_exact(self):
        ens = build_subexperiment(3, NoiseParams())
        s = MeasurementSetting.superposition(ens.register, 0.35)
        exact = exact_expectation(ens, s)
        d = outcome_distribution(ens, s)
        inside = 0
        for seed in range(100):
            h = sample_histogram(d, 1e4, 1.0, derive_seed(seed, 9))
            v, e = expectation_from_histogram(h)
            inside += abs(v - exact) <= 5 * e
        assert inside >= 99


class TestFringeScan:
    def test_ideal_18(self):
        ens = build_hyper_ghz18(IDEAL)
        grid = default_theta_grid()
        fs = fringe_scan(ens, 18, grid)
        assert len(grid) == 19
        np.testing.assert_allclose(fs.expectations, -np.cos(18 * grid), atol=1e-9)
        assert np.all(fs.stderrs == 0)

    def test_ideal_single_qubit(self):
        ens = build_subexperiment(1, IDEAL)
        grid = np.linspace(0, math.pi, 13)
        np.testing.assert_allclose(fringe_scan(ens, 1, grid).expectations, np.cos(grid), atol=1e-12)

    def test_ideal_three_qubits(self):
        ens = build_subexperiment(3, IDEAL)
        grid = np.linspace(0, math.pi, 13)
        e = fringe_scan(ens, 3, grid).expectations
        assert np.allclose(e, np.cos(3 * grid), atol=1e-12) or np.allclose(e, -np.cos(3 * grid), atol=1e-12)

    def test_ideal_twelve(self):
        ens = build_subexperiment(12, IDEAL)
        grid = np.linspace(0, math.pi, 25)
        e = fringe_scan(ens, 12, grid).expectations
        assert np.allclose(e, np.cos(12 * grid), atol=1e-9) or np.allclose(e, -np.cos(12 * grid), atol=1e-9)

    def test_sampled_is_schedule_independent(self):
        ens = build_subexperiment(3, NoiseParams())
        grid = default_theta_grid()
        full = fringe_scan(ens, 3, grid, rate_hz=0.2, duration_s=7200, seed=4)
        tail = fringe_scan(ens, 3, grid[5:], rate_hz=0.2, duration_s=7200, seed=4)
        # per-point seeds depend on the grid index, so compare against a rescan of the same grid
        again = fringe_scan(ens, 3, grid, rate_hz=0.2, duration_s=7200, seed=4)
        np.testing.assert_array_equal(full.expectations, again.expectations)
        assert len(tail) == 14
        assert np.all(full.stderrs > 0)

    def test_wrong_size(self):
        with pytest.raises(ContractViolation):
            fringe_scan(build_subexperiment(3, IDEAL), 18, [0.0])

    @settings(max_examples=25, deadline=None)
    @given(theta=st.floats(0, math.pi))
    def test_ideal_18_property(self, theta):
        ens = build_hyper_ghz18(IDEAL)
        s = MeasurementSetting.superposition(ens.register, theta)
        assert exact_expectation(ens, s) == pytest.approx(-math.cos(18 * theta), abs=1e-9)


class TestMeasurementSetting:
    def test_round_trip(self):
        s = random_setting(np.random.default_rng(2), photon_register([1, 2]))
        assert MeasurementSetting.from_dict(s.to_dict()) == s

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            MeasurementSetting((pol(1),), ())
