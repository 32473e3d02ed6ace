import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperghz.errors import AddressError, ConfigurationError, ContractViolation, ImpossibleOutcome
from hyperghz.optics import (
    CNOT,
    AnalyzerBasis,
    dove_matrix,
    hwp_matrix,
    oam_cnot_interferometric,
    oam_readout,
    oam_swap_ideal,
    pbs_fuse,
    pbs_split,
    pol_analyzer,
    pol_analyzer_angles,
    pol_unitary,
    qplate_convert,
    qwp_matrix,
    readout_matrix,
    spatial_analyzer,
    spp_encode,
)
from hyperghz.state import (
    DoF,
    SparseState,
    apply_unitary,
    from_dense,
    init_basis_state,
    oam,
    path,
    pol,
    same_ray,
    to_dense,
)

import oracles

S2 = 1 / math.sqrt(2)


def ray_close(u, v, atol=1e-12):
    """Equality of two vectors up to a global phase."""
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    ph = np.vdot(v, u)
    ph = ph / abs(ph) if abs(ph) > 1e-15 else 1
    return np.max(np.abs(u - ph * v)) < atol


class TestWavePlates:
    def test_hwp_22_5_makes_diagonal(self):
        assert ray_close(hwp_matrix(22.5) @ [1, 0], [S2, S2])

    def test_hwp_45_swaps(self):
        assert ray_close(hwp_matrix(45) @ [1, 0], [0, 1])

    def test_hwp_0_keeps_h(self):
        np.testing.assert_allclose(hwp_matrix(0) @ [1, 0], [1, 0])

    def test_qwp_minus_45_maps_circular_to_linear(self):
        assert ray_close(qwp_matrix(-45) @ np.array([S2, -1j * S2]), [1, 0])
        assert ray_close(qwp_matrix(-45) @ np.array([S2, 1j * S2]), [0, 1])

    def test_qwp_0_keeps_h(self):
        assert ray_close(qwp_matrix(0) @ [1, 0], [1, 0])

    @settings(max_examples=50, deadline=None)
    @given(angle=st.floats(-720, 720, allow_nan=False))
    def test_unitary_and_half_wave_property(self, angle):
        h, q = hwp_matrix(angle), qwp_matrix(angle)
        for m in (h, q):
            np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)
        hh = h @ h
        assert ray_close(hh.ravel(), np.eye(2).ravel())
        # two quarter-wave plates make a half-wave plate
        assert ray_close((q @ q).ravel(), h.ravel())

    def test_angles_reduce_mod_360(self):
        np.testing.assert_allclose(hwp_matrix(22.5 + 360), hwp_matrix(22.5), atol=1e-12)

    def test_infinite_angle(self):
        with pytest.raises(ConfigurationError):
            hwp_matrix(math.inf)


class TestDove:
    def test_22_5(self):
        np.testing.assert_allclose(dove_matrix(22.5), np.diag([np.exp(-1j * math.pi / 4), np.exp(1j * math.pi / 4)]))

    def test_zero_is_identity(self):
        np.testing.assert_allclose(dove_matrix(0), np.eye(2))

    def test_90_is_minus_identity(self):
        np.testing.assert_allclose(dove_matrix(90), -np.eye(2), atol=1e-15)


class TestEncoding:
    def test_pbs_split_and_spp(self):
        a, b = 0.6, 0.8j
        s = SparseState([pol(1)], {0: a, 1: b})
        s = pbs_split(s, 1)
        assert s.amplitudes == {0b00: a, 0b11: b}
        s = spp_encode(s, 1)
        assert s.register == (pol(1), path(1), oam(1))
        assert s.amplitudes == {0b000: a, 0b111: b}

    @pytest.mark.parametrize("bit", [0, 1])
    def test_basis_inputs(self, bit):
        s = spp_encode(pbs_split(init_basis_state([pol(1)], bit), 1), 1)
        assert s.amplitudes == {0b111 * bit: 1}

    def test_split_twice(self):
        s = pbs_split(init_basis_state([pol(1)]), 1)
        with pytest.raises(AddressError):
            pbs_split(s, 1)

    def test_spp_needs_path(self):
        with pytest.raises(AddressError):
            spp_encode(init_basis_state([pol(1)]), 1)


class TestFusion:
    def test_two_singlets_fuse_with_half_probability(self):
        reg = [pol(1), pol(2), pol(3), pol(4)]
        singlet = np.array([0, S2, -S2, 0])
        s = from_dense(reg, np.kron(singlet, singlet))
        out, p = pbs_fuse(s, 2, 4)
        assert p == pytest.approx(0.5, abs=1e-15)
        # survivors |H V H V> and |V H V H> with the product of singlet signs
        ref = np.zeros(16, dtype=complex)
        ref[0b0101] = S2
        ref[0b1010] = S2
        assert ray_close(to_dense(out), ref)
        assert out.weight == pytest.approx(0.5)

    def test_hh_unchanged(self):
        s = init_basis_state([pol(2), pol(4)], 0b00)
        out, p = pbs_fuse(s, 2, 4)
        assert p == 1 and out.amplitudes == {0: 1}

    def test_hv_impossible(self):
        with pytest.raises(ImpossibleOutcome):
            pbs_fuse(init_basis_state([pol(2), pol(4)], 0b01), 2, 4)

    def test_relative_phases_preserved(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        s = from_dense([pol(1), pol(2), pol(4)], v)
        out, p = pbs_fuse(s, 2, 4)
        keep = [i for i in range(8) if ((i >> 1) & 1) == (i & 1)]
        ref = np.zeros(8, dtype=complex)
        ref[keep] = v[keep] / math.sqrt(p)
        np.testing.assert_allclose(to_dense(out), ref, atol=1e-14)


class TestSpatialAnalyzer:
    def _state(self, sign):
        return SparseState([path(1)], {0: S2, 1: sign * S2})

    def test_constructive_port(self):
        out = spatial_analyzer(self._state(1), 1, AnalyzerBasis.superposition(0))
        assert set(out) == {0}
        assert out[0][1] == pytest.approx(1.0)

    def test_destructive_port(self):
        out = spatial_analyzer(self._state(-1), 1, AnalyzerBasis.superposition(0))
        assert set(out) == {1}

    def test_quarter_phase_is_balanced(self):
        out = spatial_analyzer(self._state(1), 1, AnalyzerBasis.superposition(math.pi / 2))
        assert out[0][1] == pytest.approx(0.5) and out[1][1] == pytest.approx(0.5)

    def test_open_interferometer_measures_path(self):
        out = spatial_analyzer(SparseState([path(1)], {1: 1.0}), 1, AnalyzerBasis.computational())
        assert set(out) == {1}

    def test_needs_path(self):
        with pytest.raises(AddressError):
            spatial_analyzer(init_basis_state([pol(1)]), 1, AnalyzerBasis.superposition(0))

    @settings(max_examples=40, deadline=None)
    @given(theta=st.floats(0, math.pi), a=st.complex_numbers(max_magnitude=1), b=st.complex_numbers(max_magnitude=1))
    def test_probabilities_sum_and_basis(self, theta, a, b):
        norm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
        if norm < 1e-3:
            return
        s = SparseState([path(1)], {0: a / norm, 1: b / norm})
        out = spatial_analyzer(s, 1, AnalyzerBasis.superposition(theta))
        assert abs(sum(p for _, p in out.values()) - 1) < 1e-12
        vec = np.array([a, b]) / norm
        for o, (_, p) in out.items():
            bra = oracles.target_readout(theta)[o]
            assert p == pytest.approx(abs(bra @ vec) ** 2, abs=1e-12)


class TestPolAnalyzer:
    def test_angles(self):
        assert pol_analyzer_angles(AnalyzerBasis.computational()) == (0.0, 0.0)
        assert pol_analyzer_angles(AnalyzerBasis.superposition(0)) == (45.0, 22.5)
        assert pol_analyzer_angles(AnalyzerBasis.superposition(math.pi)) == pytest.approx((45.0, -22.5))

    def test_theta_range(self):
        with pytest.raises(ConfigurationError):
            AnalyzerBasis.superposition(4.0)

    @settings(max_examples=50, deadline=None)
    @given(theta=st.floats(0, math.pi))
    def test_projects_onto_target_basis(self, theta):
        u = pol_unitary(AnalyzerBasis.superposition(theta))
        for o in (0, 1):
            target = np.array([1, (-1) ** o * np.exp(1j * theta)]) * S2
            # the detector bra is row o of the analyzer unitary
            assert abs(abs(np.vdot(target, u[o].conj())) - 1) < 1e-10

    def test_branches(self):
        s = SparseState([pol(1)], {0: S2, 1: S2})
        out = pol_analyzer(s, 1, AnalyzerBasis.superposition(0))
        assert set(out) == {0}


class TestOamReadout:
    def test_swap_transfers_oam_to_pol(self):
        a, b = 0.6, 0.8j
        s = SparseState([pol(1), oam(1)], {0b00: a, 0b01: b})  # (a|R> + b|L>)|H>
        out = oam_swap_ideal(s, 1)
        assert same_ray(out, SparseState([pol(1), oam(1)], {0b00: a, 0b10: b}))

    def test_swap_truth_table(self):
        assert oam_swap_ideal(init_basis_state([pol(1), oam(1)], 0b00), 1).amplitudes == {0b00: 1}
        assert oam_swap_ideal(init_basis_state([pol(1), oam(1)], 0b01), 1).amplitudes == {0b10: 1}

    def test_interferometric_cnot_methods_state(self):
        a, b = 0.6, 0.8
        s = SparseState([pol(1), oam(1)], {0b00: a, 0b01: b})
        out = oam_cnot_interferometric(s, 1)
        assert same_ray(out, SparseState([pol(1), oam(1)], {0b00: a, 0b11: b}))

    def test_interferometric_cnot_basis_input(self):
        out = oam_cnot_interferometric(init_basis_state([pol(1), oam(1)], 0b00), 1)
        assert same_ray(out, init_basis_state([pol(1), oam(1)], 0b00))

    def test_interferometric_cnot_aux_removed(self):
        out = oam_cnot_interferometric(init_basis_state([pol(1), oam(1)], 0b00), 1)
        assert all(a.dof is not DoF.AUX for a in out.register)

    @pytest.mark.parametrize("seed", range(20))
    def test_interferometric_cnot_equals_ideal_cnot(self, seed):
        rng = np.random.default_rng(seed)
        # random state of (pol1, oam1, pol2) with photon 1 horizontally polarized
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        v /= np.linalg.norm(v)
        reg = [pol(1), oam(1), pol(2)]
        dense = np.zeros(8, dtype=complex)
        dense[:4] = v
        s = from_dense(reg, dense)
        out = oam_cnot_interferometric(s, 1)
        ref = apply_unitary(s, (oam(1), pol(1)), CNOT)
        assert same_ray(out, ref, atol=1e-9)

    def test_qplate_rules(self):
        assert qplate_convert(init_basis_state([pol(1), oam(1)], 0b00), 1).amplitudes == {0: 1}
        out = qplate_convert(init_basis_state([pol(1), oam(1)], 0b11), 1)
        assert out.register == (pol(1),) and out.amplitudes == {1: 1}
        s = SparseState([pol(1), oam(1)], {0b00: 0.6, 0b11: 0.8})
        assert qplate_convert(s, 1).amplitudes == pytest.approx({0: 0.6, 1: 0.8})

    def test_qplate_outside_domain(self):
        with pytest.raises(ContractViolation):
            qplate_convert(init_basis_state([pol(1), oam(1)], 0b01), 1)

    def test_qplate_linearity_of_the_two_rules(self):
        # the rule chain ends in exactly |G>|H> and |G>|V>, so superpositions keep their coefficients
        s = SparseState([pol(1), oam(1)], {0b00: S2, 0b11: S2})
        out = qplate_convert(s, 1)
        assert same_ray(out, SparseState([pol(1)], {0: S2, 1: S2}))

    @pytest.mark.parametrize("interferometric", [True, False])
    def test_full_readout_lands_on_polarization(self, interferometric):
        a, b = 0.6, -0.8j
        s = SparseState([pol(1), oam(1)], {0b00: a, 0b01: b})
        out = oam_readout(s, 1, interferometric=interferometric)
        assert out.register == (pol(1),)
        assert same_ray(out, SparseState([pol(1)], {0: a, 1: b}))


class TestReadoutMatrices:
    @pytest.mark.parametrize("dof", [DoF.POL, DoF.PATH, DoF.OAM])
    @pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 2, 2.9, math.pi])
    def test_every_dof_measures_the_same_basis(self, dof, theta):
        m = readout_matrix(dof, AnalyzerBasis.superposition(theta))
        target = oracles.target_readout(theta)
        for o in (0, 1):
            assert ray_close(m[o], target[o], atol=1e-10)

    @pytest.mark.parametrize("dof", [DoF.POL, DoF.PATH, DoF.OAM])
    def test_computational(self, dof):
        m = readout_matrix(dof, AnalyzerBasis.computational())
        assert np.allclose(np.abs(m), np.eye(2))
