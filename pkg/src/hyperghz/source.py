"""Entangled-pair source, PBS fusion into polarization GHZ states, and noise channels."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .optics import pbs_fuse
from .state import (
    MAX_EXACT_BRANCHES,
    Ensemble,
    QubitAddress,
    SparseState,
    apply_unitary,
    init_basis_state,
    pol,
    reorder,
    split_on,
    tensor,
)

SQRT_HALF = 1 / math.sqrt(2)

# per-qubit flip probability that leaves 7.3% of 18-qubit events with at least one flip
DEFAULT_BITFLIP = 1 - (1 - 0.073) ** (1 / 18)


@dataclass(frozen=True)
class NoiseParams:
    pair_fidelity: float = 0.98
    double_pair_fraction: float = 0.113
    bitflip_prob: float = DEFAULT_BITFLIP
    spatial_visibility: float = 0.994
    oam_visibility: float = 0.996
    converter_efficiency: float = 0.92
    # two-photon interference visibility at each fusion PBS; 1.0 = indistinguishable
    fusion_visibility: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name == "seed":
                continue
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                raise ConfigurationError(f"{f.name} must lie in [0, 1], got {v!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}")

    @classmethod
    def ideal(cls, **overrides) -> "NoiseParams":
        base = dict(pair_fidelity=1.0, double_pair_fraction=0.0, bitflip_prob=0.0,
                    spatial_visibility=1.0, oam_visibility=1.0, converter_efficiency=1.0,
                    fusion_visibility=1.0)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes) -> "NoiseParams":
        return NoiseParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown noise parameter(s): {sorted(unknown)}")
        return cls(**data)


def singlet(photon_a: int, photon_b: int) -> SparseState:
    """(|HV> - |VH>)/sqrt2"""
    return SparseState((pol(photon_a), pol(photon_b)), {0b01: SQRT_HALF, 0b10: -SQRT_HALF})


def _bell_states(a: int, b: int) -> dict[str, SparseState]:
    reg = (pol(a), pol(b))
    return {
        "psi-": SparseState(reg, {0b01: SQRT_HALF, 0b10: -SQRT_HALF}),
        "psi+": SparseState(reg, {0b01: SQRT_HALF, 0b10: SQRT_HALF}),
        "phi+": SparseState(reg, {0b00: SQRT_HALF, 0b11: SQRT_HALF}),
        "phi-": SparseState(reg, {0b00: SQRT_HALF, 0b11: -SQRT_HALF}),
    }


def bell_pair(pair_fidelity: float, photons: tuple[int, int] = (1, 2)) -> Ensemble:
    """Werner pair v|psi-><psi-| + (1-v) I/4 with singlet fidelity ``pair_fidelity``.

    Decomposed into the four Bell states: the singlet carries weight F and each
    of the other three (1 - F)/3, i.e. v = (4F - 1)/3.
    """
    if not 0.25 <= pair_fidelity <= 1.0:
        raise ConfigurationError(f"a Werner pair cannot have singlet fidelity {pair_fidelity} (< 0.25)")
    bell = _bell_states(*photons)
    other = (1 - pair_fidelity) / 3
    members = [(pair_fidelity, bell["psi-"])]
    if other > 0:
        members += [(other, bell[k]) for k in ("psi+", "phi+", "phi-")]
    return Ensemble(members)


def werner_visibility(pair_fidelity: float) -> float:
    return (4 * pair_fidelity - 1) / 3


def _flip_pol(state: SparseState, photons: Iterable[int]) -> SparseState:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    for p in photons:
        state = apply_unitary(state, pol(p), x, check=False)
    return state


def ghz_polarization(noise: NoiseParams, n_pairs: int) -> tuple[Ensemble, float]:
    """Polarization GHZ state of 2*n_pairs photons from chained PBS fusions.

    Pairs (1,2), (3,4), ... are fused 2&4, then 4&6.  Local flips on the odd
    photons turn the singlet chain into (|H..H> - |V..V>)/sqrt2 (ray).  Returns
    the post-selected ensemble and its success probability (1/4 for three
    ideal pairs).  Imperfect two-photon interference at each fusion PBS is a
    phase-flip channel on the second fused photon; it commutes with the
    later path/OAM encoding and is left pending.
    """
    if n_pairs not in (1, 2, 3):
        raise ConfigurationError("between one and three pair sources are supported")
    pairs = [bell_pair(noise.pair_fidelity, (2 * i + 1, 2 * i + 2)) for i in range(n_pairs)]
    members = []
    for combo in itertools.product(*(p.members for p in pairs)):
        w = float(np.prod([c[0] for c in combo]))
        st = combo[0][1]
        for _, other in combo[1:]:
            st = tensor(st, other)
        members.append((w, st))
    ens = Ensemble(members)
    fusions = [(2 * i, 2 * i + 2) for i in range(1, n_pairs)]
    for a, b in fusions:
        ens = ens.map(lambda s, a=a, b=b: pbs_fuse(s, a, b)[0])
    ens, success = ens.postselect()
    odd = [2 * i + 1 for i in range(n_pairs)]
    ens = ens.map(lambda s: _flip_pol(s, odd))
    if noise.fusion_visibility < 1.0 and fusions:
        pz = (1 - noise.fusion_visibility) / 2
        ens = ens.with_channel([pol(b) for _, b in fusions], pz=pz)
    return ens, success


def ghz6(noise: NoiseParams) -> tuple[Ensemble, float]:
    return ghz_polarization(noise, 3)


def ideal_ghz(register: Sequence[QubitAddress], sign: int = -1) -> SparseState:
    """(|0...0> + sign |1...1>)/sqrt2 on ``register``."""
    n = len(register)
    return SparseState(tuple(register), {0: SQRT_HALF, (1 << n) - 1: sign * SQRT_HALF})


# ---------------------------------------------------------------------------
# noise channels
# ---------------------------------------------------------------------------

def _pauli_channel(ensemble: Ensemble, addresses, px: float, pz: float, lazy: bool,
                   max_branches: int, seed) -> Ensemble:
    if not (0 <= px <= 1 and 0 <= pz <= 1):
        raise ConfigurationError("flip probability must lie in [0, 1]")
    addresses = list(addresses)
    if (px == 0 and pz == 0) or not addresses:
        return ensemble
    noisy = ensemble.with_channel(addresses, px=px, pz=pz)
    if lazy:
        return noisy
    return noisy.expand(max_branches=max_branches, seed=seed)


def apply_bitflip(ensemble: Ensemble, addresses, p: float, *, lazy: bool = True,
                  max_branches: int = MAX_EXACT_BRANCHES, seed=None) -> Ensemble:
    """Independent X on each listed qubit with probability ``p``.

    By default the channel is kept pending on the ensemble and evaluated
    exactly downstream; ``lazy=False`` expands it into explicit members
    (Monte Carlo beyond ``max_branches``).
    """
    return _pauli_channel(ensemble, addresses, p, 0.0, lazy, max_branches, seed)


def apply_visibility_dephasing(ensemble: Ensemble, addresses, visibility: float, *, lazy: bool = True,
                               max_branches: int = MAX_EXACT_BRANCHES, seed=None) -> Ensemble:
    """Z with probability (1 - V)/2 per listed qubit: interference contrast scales by V."""
    if not 0 <= visibility <= 1:
        raise ConfigurationError(f"visibility must lie in [0, 1], got {visibility}")
    return _pauli_channel(ensemble, addresses, 0.0, (1 - visibility) / 2, lazy, max_branches, seed)


def source_pairs(register: Sequence[QubitAddress]) -> list[tuple[int, int]]:
    photons = sorted({a.photon for a in register})
    return [(p, p + 1) for p in photons if p % 2 == 1 and p + 1 in photons]


def apply_double_pair_noise(ensemble: Ensemble, fraction: float, sources=None) -> Ensemble:
    """Replace one source by a classically correlated white-noise branch with probability ``fraction``.

    In a replaced branch the source (chosen uniformly) loses all coherence with
    the rest: the remaining photons keep their reduced state, and each photon
    of the source gets a uniformly random logic value copied into every one of
    its qubits.  Pending channels are kept and act afterwards.
    """
    if not 0 <= fraction <= 1:
        raise ConfigurationError(f"double-pair fraction must lie in [0, 1], got {fraction}")
    if fraction == 0:
        return ensemble
    sources = list(sources) if sources is not None else source_pairs(ensemble.register)
    if not sources:
        raise ConfigurationError("no complete photon pair in the register")
    register = ensemble.register
    members = [((1 - fraction) * w, s) for w, s in ensemble.members] if fraction < 1 else []
    share = fraction / len(sources)
    for a, b in sources:
        block_a = [q for q in register if q.photon == a]
        block_b = [q for q in register if q.photon == b]
        block = block_a + block_b
        rest = tuple(q for q in register if q not in block)
        if not rest:
            raise ConfigurationError("double-pair noise needs photons outside the replaced source")
        for w, s in ensemble.members:
            for _, (p_rest, rest_state) in split_on(s, block).items():
                for va, vb in itertools.product((0, 1), repeat=2):
                    bits = {q: va for q in block_a} | {q: vb for q in block_b}
                    members.append((w * share * p_rest / 4, _with_block(rest_state, bits, register)))
    return Ensemble(members, ensemble.channels)


def _with_block(rest_state: SparseState, bits: dict[QubitAddress, int], register) -> SparseState:
    block_reg = tuple(sorted(bits))
    idx = 0
    for q in block_reg:
        idx = (idx << 1) | bits[q]
    return reorder(tensor(rest_state, init_basis_state(block_reg, idx)), register)
