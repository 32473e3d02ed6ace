"""Jones matrices and the per-photon optical elements of the setup.

Conventions (fixed so that the documented element behaviours hold exactly):

* Polarization basis (|H>, |V>) = (logic 0, logic 1).  Wave-plate angles are in
  degrees and enter the standard fast-axis rotation; with this choice a HWP at
  22.5 deg sends |H> to (|H>+|V>)/sqrt2, a HWP at 45 deg swaps H and V, and a
  QWP at -45 deg sends (|H> -/+ i|V>)/sqrt2 to |H> / |V> up to global phase.
* OAM basis (|R>, |L>) = (logic 0, logic 1).  A Dove prism at angle a imprints
  exp(-2ia) on |R> and exp(+2ia) on |L>; handedness reversal is not modelled.
* Spatial analyzer: the prism sets a relative phase exp(-i theta) on the D arm
  before a real Hadamard-form recombiner, so port o projects onto
  (|U> + (-1)**o exp(i theta)|D>)/sqrt2, the same basis as the polarization
  analyzer.  Port 0 is the constructive output.
* Basis phases theta are in radians.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation, ImpossibleOutcome
from .state import (
    QubitAddress,
    SparseState,
    add_qubit,
    apply_unitary,
    aux,
    init_basis_state,
    oam,
    path,
    pol,
    project_qubit,
    remove_qubit,
    to_dense,
)

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
RECOMBINER = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class BasisKind(enum.Enum):
    COMPUTATIONAL = "computational"
    SUPERPOSITION = "superposition"


@dataclass(frozen=True)
class AnalyzerBasis:
    kind: BasisKind
    theta: float = 0.0

    def __post_init__(self):
        kind = BasisKind(self.kind)
        object.__setattr__(self, "kind", kind)
        theta = float(self.theta)
        if kind is BasisKind.COMPUTATIONAL:
            theta = 0.0
        elif not (-1e-12 <= theta <= math.pi + 1e-12) or not math.isfinite(theta):
            raise ConfigurationError(f"superposition phase must lie in [0, pi], got {theta}")
        object.__setattr__(self, "theta", min(max(theta, 0.0), math.pi))

    @classmethod
    def computational(cls) -> "AnalyzerBasis":
        return cls(BasisKind.COMPUTATIONAL)

    @classmethod
    def superposition(cls, theta: float) -> "AnalyzerBasis":
        return cls(BasisKind.SUPERPOSITION, theta)

    @property
    def is_computational(self) -> bool:
        return self.kind is BasisKind.COMPUTATIONAL


Z_BASIS = AnalyzerBasis.computational()


def _angle(degrees: float) -> float:
    if not math.isfinite(degrees):
        raise ConfigurationError(f"element angle must be finite, got {degrees}")
    return math.radians(math.fmod(degrees, 360.0))


def hwp_matrix(angle: float) -> np.ndarray:
    """Half-wave plate with fast axis at ``angle`` degrees."""
    a = 2 * _angle(angle)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_matrix(angle: float) -> np.ndarray:
    """Quarter-wave plate with fast axis at ``angle`` degrees (global phase dropped)."""
    a = _angle(angle)
    c, s = math.cos(a), math.sin(a)
    return np.array(
        [[c * c + 1j * s * s, (1 - 1j) * s * c],
         [(1 - 1j) * s * c, s * s + 1j * c * c]],
        dtype=complex,
    )


def dove_matrix(angle: float) -> np.ndarray:
    """Phase a Dove prism at ``angle`` degrees imprints on (|R>, |L>)."""
    a = _angle(angle)
    return np.diag([np.exp(-2j * a), np.exp(2j * a)])


def phase_matrix(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


def _controlled(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = u0
    out[2:, 2:] = u1
    return out


# ---------------------------------------------------------------------------
# state preparation
# ---------------------------------------------------------------------------

def pbs_split(state: SparseState, photon: int) -> SparseState:
    """PBS as polarization-controlled path CNOT: H -> up (U), V -> down (D)."""
    return add_qubit(state, path(photon), pol(photon))


def spp_encode(state: SparseState, photon: int) -> SparseState:
    """Spiral phase plates in both arms: U -> R, D -> L."""
    state.bit_position(path(photon))
    return add_qubit(state, oam(photon), path(photon))


def pbs_fuse(state: SparseState, photon_a: int, photon_b: int) -> tuple[SparseState, float]:
    """Two photons on one PBS, keeping one-photon-per-output events (HH or VV)."""
    pa = state.bit_position(pol(photon_a))
    pb = state.bit_position(pol(photon_b))
    total = state.norm2()
    kept = {k: a for k, a in state.amplitudes.items() if ((k >> pa) & 1) == ((k >> pb) & 1)}
    kept_norm = sum(abs(a) ** 2 for a in kept.values())
    prob = kept_norm / total if total > 0 else 0.0
    if prob < 1e-15:
        raise ImpossibleOutcome(f"photons {photon_a} and {photon_b} cannot leave the PBS in different ports", prob)
    scale = 1.0 / math.sqrt(kept_norm)
    return SparseState(state.register, {k: a * scale for k, a in kept.items()}, state.weight * prob), prob


# ---------------------------------------------------------------------------
# measurement stages
# ---------------------------------------------------------------------------

def spatial_unitary(basis: AnalyzerBasis) -> np.ndarray:
    if basis.is_computational:
        return np.eye(2, dtype=complex)
    return RECOMBINER @ phase_matrix(-basis.theta)


def spatial_analyzer(state: SparseState, photon: int, basis: AnalyzerBasis) -> dict[int, tuple[SparseState, float]]:
    """Open (computational) or closed (superposition) Mach-Zehnder readout of the path qubit.

    Returns ``{outcome: (post-measurement state, probability)}`` for the
    outcomes with nonzero probability.
    """
    addr = path(photon)
    state.bit_position(addr)
    rotated = apply_unitary(state, addr, spatial_unitary(basis))
    return _branches(rotated, addr)


def pol_analyzer_angles(basis: AnalyzerBasis) -> tuple[float, float]:
    """(QWP, HWP) angles in degrees for the polarization analyzer."""
    if basis.is_computational:
        return 0.0, 0.0
    return 45.0, 22.5 - math.degrees(basis.theta) / 4.0


def pol_unitary(basis: AnalyzerBasis) -> np.ndarray:
    q, h = pol_analyzer_angles(basis)
    return hwp_matrix(h) @ qwp_matrix(q)


def pol_analyzer(state: SparseState, photon: int, basis: AnalyzerBasis) -> dict[int, tuple[SparseState, float]]:
    """QWP, HWP, then PBS: transmitted (H) is outcome 0, reflected (V) outcome 1."""
    addr = pol(photon)
    rotated = apply_unitary(state, addr, pol_unitary(basis))
    return _branches(rotated, addr)


def _branches(state: SparseState, addr: QubitAddress) -> dict[int, tuple[SparseState, float]]:
    out = {}
    for o in (0, 1):
        try:
            out[o] = project_qubit(state, addr, o)
        except ImpossibleOutcome:
            pass
    return out


def oam_swap_ideal(state: SparseState, photon: int) -> SparseState:
    """CNOT(OAM -> POL) followed by CNOT(POL -> OAM)."""
    p, o = pol(photon), oam(photon)
    state = apply_unitary(state, (o, p), CNOT, check=False)
    return apply_unitary(state, (p, o), CNOT, check=False)


def oam_cnot_interferometric(state: SparseState, photon: int) -> SparseState:
    """OAM-controlled polarization flip built from the interferometer's elements.

    HWP(22.5), PBS into an internal path, Dove prisms at +/-22.5 deg in the two
    arms, HWP(45), recombining PBS, QWP(-45).  Defined for the photon entering
    with horizontal polarization; the result equals the ideal CNOT times a
    global phase.
    """
    p, o, a = pol(photon), oam(photon), aux(photon)
    state.bit_position(o)
    state = apply_unitary(state, p, hwp_matrix(22.5))
    state = add_qubit(state, a, p)  # H -> upper arm (aux 0), V -> lower arm (aux 1)
    state = apply_unitary(state, (a, o), _controlled(dove_matrix(22.5), dove_matrix(-22.5)))
    state = apply_unitary(state, p, hwp_matrix(45.0))
    # recombination: after the half-wave plate the upper arm carries V and the
    # lower arm H, so both leave the second PBS through one port
    state = apply_unitary(state, (p, a), CNOT, check=False)
    state = apply_unitary(state, a, np.array([[0, 1], [1, 0]]), check=False)
    state = remove_qubit(state, a)
    return apply_unitary(state, p, qwp_matrix(-45.0))


def qplate_convert(state: SparseState, photon: int) -> SparseState:
    """QWP, q-plate, QWP: a|R>|H> + b|L>|V> -> (a|H> + b|V>)|G>, with the OAM qubit dropped.

    Only defined on span{|R>|H>, |L>|V>} of this photon.
    """
    p, o = pol(photon), oam(photon)
    pp, po = state.bit_position(p), state.bit_position(o)
    if any(((k >> pp) & 1) != ((k >> po) & 1) for k in state.amplitudes):
        raise ContractViolation(f"photon {photon} is not in span{{|R>|H>, |L>|V>}}; q-plate rule undefined")
    state = apply_unitary(state, (p, o), CNOT, check=False)
    return remove_qubit(state, o)


def oam_readout(state: SparseState, photon: int, *, interferometric: bool = True) -> SparseState:
    """Transfer the OAM qubit onto polarization (which must be |H>) and discard the OAM mode."""
    if interferometric:
        state = oam_cnot_interferometric(state, photon)
    else:
        state = apply_unitary(state, (oam(photon), pol(photon)), CNOT, check=False)
    return qplate_convert(state, photon)


def readout_matrix(dof, basis: AnalyzerBasis, *, interferometric: bool = True) -> np.ndarray:
    """Effective single-qubit measurement of one degree of freedom, derived by running its element chain.

    Row ``o`` is the bra of detector outcome ``o`` in the logic basis (up to a
    phase per row).
    """
    from .state import DoF

    dof = DoF(dof)
    cols = []
    for value in (0, 1):
        if dof is DoF.POL:
            st = init_basis_state([pol(1)], value)
            st = apply_unitary(st, pol(1), pol_unitary(basis))
        elif dof is DoF.PATH:
            st = init_basis_state([path(1)], value)
            st = apply_unitary(st, path(1), spatial_unitary(basis))
        elif dof is DoF.OAM:
            st = init_basis_state([pol(1), oam(1)], value)  # |H>|value>
            st = oam_readout(st, 1, interferometric=interferometric)
            st = apply_unitary(st, pol(1), pol_unitary(basis))
        else:
            raise ConfigurationError(f"no readout chain for {dof!r}")
        cols.append(to_dense(st))
    return np.column_stack(cols)
