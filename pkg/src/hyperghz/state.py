"""Sparse pure states over (photon, degree-of-freedom) qubits, and ensembles of them.

Logic convention: |H>, |U>, |R> are bit 0 and |V>, |D>, |L> are bit 1.  A basis
index stores one bit per register entry, with ``register[0]`` as the most
significant bit, so a register in canonical order (photon, then POL/PATH/OAM)
gives the flat qubit index ``3*(photon-1) + dof`` counted from the left.
"""
from __future__ import annotations

import bisect
import enum
import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    AddressError,
    ConfigurationError,
    ContractViolation,
    ImpossibleOutcome,
    NumericError,
)

PRUNE_TOL = 1e-12
IMPOSSIBLE_TOL = 1e-15
UNITARY_TOL = 1e-9
MAX_EXACT_BRANCHES = 10_000

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DoF(enum.IntEnum):
    POL = 0
    PATH = 1
    OAM = 2
    # transient internal path of the OAM-polarization interferometer
    AUX = 3


@dataclass(frozen=True, order=True)
class QubitAddress:
    photon: int
    dof: DoF

    def __post_init__(self):
        if not isinstance(self.photon, (int, np.integer)) or not 1 <= self.photon <= 6:
            raise ConfigurationError(f"photon must be in 1..6, got {self.photon!r}")
        object.__setattr__(self, "photon", int(self.photon))
        object.__setattr__(self, "dof", DoF(self.dof))

    @property
    def flat_index(self) -> int:
        if self.dof is DoF.AUX:
            return 18 + self.photon - 1
        return 3 * (self.photon - 1) + int(self.dof)

    def __str__(self) -> str:
        return f"{self.dof.name.lower()}{self.photon}"


def pol(photon: int) -> QubitAddress:
    return QubitAddress(photon, DoF.POL)


def path(photon: int) -> QubitAddress:
    return QubitAddress(photon, DoF.PATH)


def oam(photon: int) -> QubitAddress:
    return QubitAddress(photon, DoF.OAM)


def aux(photon: int) -> QubitAddress:
    return QubitAddress(photon, DoF.AUX)


def photon_register(photons: Iterable[int]) -> tuple[QubitAddress, ...]:
    """All three encoded qubits of each photon, in canonical order."""
    return tuple(QubitAddress(p, d) for p in sorted(photons) for d in (DoF.POL, DoF.PATH, DoF.OAM))


class SparseState:
    """Sub-normalized pure state stored as ``{basis index: amplitude}``.

    ``weight`` accumulates post-selection success probabilities, so
    ``weight * norm2()`` is the probability of having reached this branch.
    Instances are treated as immutable; every operation returns a new state.
    """

    __slots__ = ("register", "amplitudes", "weight")

    def __init__(self, register: Sequence[QubitAddress], amplitudes: dict[int, complex], weight: float = 1.0):
        register = tuple(register)
        if len(set(register)) != len(register):
            raise ConfigurationError(f"duplicate qubit address in register {[str(a) for a in register]}")
        self.register = register
        self.amplitudes = {int(k): complex(v) for k, v in amplitudes.items() if abs(v) >= PRUNE_TOL}
        self.weight = float(weight)

    @property
    def n_qubits(self) -> int:
        return len(self.register)

    def bit_position(self, addr: QubitAddress) -> int:
        try:
            i = self.register.index(addr)
        except ValueError:
            raise AddressError(f"qubit {addr} is not active in this register") from None
        return self.n_qubits - 1 - i

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __repr__(self) -> str:
        n = self.n_qubits
        terms = " + ".join(
            f"({a.real:+.4g}{a.imag:+.4g}j)|{k:0{n}b}>" for k, a in sorted(self.amplitudes.items())
        )
        return f"SparseState([{', '.join(map(str, self.register))}], {terms or '0'}, weight={self.weight:.4g})"


def init_basis_state(register: Sequence[QubitAddress], bits: int = 0) -> SparseState:
    register = tuple(register)
    if not register:
        raise ConfigurationError("register must not be empty")
    if not 0 <= bits < (1 << len(register)):
        raise ConfigurationError(f"basis index {bits} does not fit a {len(register)}-qubit register")
    return SparseState(register, {bits: 1.0})


def from_dense(register: Sequence[QubitAddress], vector) -> SparseState:
    vector = np.asarray(vector, dtype=complex).ravel()
    if vector.size != 1 << len(register):
        raise ConfigurationError("dense vector length does not match register width")
    return SparseState(register, {i: a for i, a in enumerate(vector) if abs(a) >= PRUNE_TOL})


def to_dense(state: SparseState) -> np.ndarray:
    vec = np.zeros(1 << state.n_qubits, dtype=complex)
    for k, a in state.amplitudes.items():
        vec[k] = a
    return vec


def _check_unitary(U: np.ndarray) -> None:
    dim = U.shape[0]
    if not np.allclose(U @ U.conj().T, np.eye(dim), atol=UNITARY_TOL, rtol=0):
        raise NumericError("matrix is not unitary within tolerance")


def apply_unitary(state: SparseState, targets, U, *, check: bool = True) -> SparseState:
    """Apply a 2**k x 2**k matrix to the listed target qubits.

    The first target is the most significant bit of the matrix index.
    """
    if isinstance(targets, QubitAddress):
        targets = (targets,)
    targets = tuple(targets)
    U = np.asarray(U, dtype=complex)
    k = len(targets)
    if k == 0 or U.shape != (1 << k, 1 << k):
        raise ConfigurationError(f"matrix shape {U.shape} does not match {k} target qubit(s)")
    if len(set(targets)) != k:
        raise ConfigurationError("target qubits must be distinct")
    if check:
        _check_unitary(U)
    positions = [state.bit_position(t) for t in targets]
    mask = 0
    for p in positions:
        mask |= 1 << p
    scatter = []
    for out in range(1 << k):
        idx = 0
        for j, p in enumerate(positions):
            if (out >> (k - 1 - j)) & 1:
                idx |= 1 << p
        scatter.append(idx)
    columns = [[(scatter[o], complex(U[o, c])) for o in range(1 << k) if U[o, c] != 0] for c in range(1 << k)]

    new: dict[int, complex] = defaultdict(complex)
    for idx, a in state.amplitudes.items():
        local = 0
        for p in positions:
            local = (local << 1) | ((idx >> p) & 1)
        base = idx & ~mask
        for out_idx, u in columns[local]:
            new[base | out_idx] += u * a
    return SparseState(state.register, new, state.weight)


def _insert_bit(idx: int, pos: int, bit: int) -> int:
    high = (idx >> pos) << (pos + 1)
    low = idx & ((1 << pos) - 1)
    return high | (bit << pos) | low


def _delete_bit(idx: int, pos: int) -> int:
    high = (idx >> (pos + 1)) << pos
    low = idx & ((1 << pos) - 1)
    return high | low


def add_qubit(state: SparseState, addr: QubitAddress, value: int | QubitAddress = 0) -> SparseState:
    """Activate a new qubit, either in a fixed bit value or as a copy of an active qubit.

    Copying is a CNOT onto a fresh |0> target.  The new address is inserted at its
    sorted position, so canonical registers stay canonical.
    """
    if addr in state.register:
        raise AddressError(f"qubit {addr} is already active")
    src_pos = None
    if isinstance(value, QubitAddress):
        src = value
        src_pos = state.bit_position(src)
    elif value not in (0, 1):
        raise ConfigurationError(f"new qubit value must be 0, 1 or a source address, got {value!r}")
    n = state.n_qubits
    k = bisect.bisect_left(state.register, addr) if _is_sorted(state.register) else n
    new_register = state.register[:k] + (addr,) + state.register[k:]
    pos = n - k
    new = {}
    for idx, a in state.amplitudes.items():
        bit = ((idx >> src_pos) & 1) if src_pos is not None else int(value)
        new[_insert_bit(idx, pos, bit)] = a
    return SparseState(new_register, new, state.weight)


def _is_sorted(register) -> bool:
    return all(register[i] < register[i + 1] for i in range(len(register) - 1))


def project_qubit(state: SparseState, addr: QubitAddress, outcome: int) -> tuple[SparseState, float]:
    """Keep the terms where ``addr`` reads ``outcome``; renormalize and fold the probability into ``weight``."""
    pos = state.bit_position(addr)
    total = state.norm2()
    kept = {k: a for k, a in state.amplitudes.items() if ((k >> pos) & 1) == outcome}
    kept_norm = sum(abs(a) ** 2 for a in kept.values())
    prob = kept_norm / total if total > 0 else 0.0
    if prob < IMPOSSIBLE_TOL:
        raise ImpossibleOutcome(f"outcome {outcome} on {addr} has probability {prob:.3g}", prob)
    scale = 1.0 / np.sqrt(kept_norm)
    return SparseState(state.register, {k: a * scale for k, a in kept.items()}, state.weight * prob), prob


def remove_qubit(state: SparseState, addr: QubitAddress) -> SparseState:
    pos = state.bit_position(addr)
    bits = {(k >> pos) & 1 for k in state.amplitudes}
    if len(bits) > 1:
        raise ContractViolation(f"qubit {addr} is entangled with the rest of the register; cannot remove it")
    new_register = tuple(a for a in state.register if a != addr)
    return SparseState(new_register, {_delete_bit(k, pos): a for k, a in state.amplitudes.items()}, state.weight)


def overlap(state: SparseState, reference: SparseState) -> complex:
    """<reference|state>"""
    if state.register != reference.register:
        raise AddressError("overlap requires identical registers")
    return complex(sum(reference.amplitudes[k].conjugate() * a
                       for k, a in state.amplitudes.items() if k in reference.amplitudes))


def reorder(state: SparseState, register: Sequence[QubitAddress]) -> SparseState:
    register = tuple(register)
    if sorted(register) != sorted(state.register) or len(register) != state.n_qubits:
        raise AddressError("reorder needs a permutation of the current register")
    n = state.n_qubits
    moves = [(state.bit_position(a), n - 1 - i) for i, a in enumerate(register)]
    new = {}
    for idx, a in state.amplitudes.items():
        out = 0
        for src, dst in moves:
            out |= ((idx >> src) & 1) << dst
        new[out] = a
    return SparseState(register, new, state.weight)


def tensor(a: SparseState, b: SparseState) -> SparseState:
    """Product state on the merged register, re-sorted into canonical order."""
    if set(a.register) & set(b.register):
        raise AddressError("tensor factors share a qubit")
    nb = b.n_qubits
    amps = {(ka << nb) | kb: va * vb for ka, va in a.amplitudes.items() for kb, vb in b.amplitudes.items()}
    joined = SparseState(a.register + b.register, amps, a.weight * b.weight)
    return reorder(joined, sorted(joined.register))


def split_on(state: SparseState, addrs: Sequence[QubitAddress]) -> dict[tuple[int, ...], tuple[float, SparseState]]:
    """Slice a state by the basis values of ``addrs``.

    Returns ``{bits: (probability, normalized conditional state of the rest)}``;
    the conditional states form a pure-state decomposition of the reduced
    density matrix of the remaining qubits.
    """
    positions = [state.bit_position(a) for a in addrs]
    rest = tuple(a for a in state.register if a not in addrs)
    rest_pos = [state.bit_position(a) for a in rest]
    m = len(rest)
    groups: dict[tuple[int, ...], dict[int, complex]] = defaultdict(dict)
    for idx, a in state.amplitudes.items():
        key = tuple((idx >> p) & 1 for p in positions)
        sub = 0
        for j, p in enumerate(rest_pos):
            sub |= ((idx >> p) & 1) << (m - 1 - j)
        groups[key][sub] = a
    total = state.norm2()
    out = {}
    for key, amps in groups.items():
        n2 = sum(abs(a) ** 2 for a in amps.values())
        if n2 / total < IMPOSSIBLE_TOL:
            continue
        scale = 1.0 / np.sqrt(n2)
        out[key] = (n2 / total, SparseState(rest, {k: a * scale for k, a in amps.items()}))
    return out


def phase_aligned(state: SparseState) -> SparseState:
    """Remove the global phase so the largest-magnitude amplitude is real positive."""
    if not state.amplitudes:
        return state
    k0 = max(state.amplitudes, key=lambda k: (abs(state.amplitudes[k]), -k))
    ph = abs(state.amplitudes[k0]) / state.amplitudes[k0]
    return SparseState(state.register, {k: a * ph for k, a in state.amplitudes.items()}, state.weight)


def ray_distance(a: SparseState, b: SparseState) -> float:
    """Largest per-amplitude deviation after aligning global phases."""
    if a.register != b.register:
        raise AddressError("ray comparison requires identical registers")
    ov = overlap(a, b)
    ph = ov / abs(ov) if abs(ov) > PRUNE_TOL else 1.0
    keys = set(a.amplitudes) | set(b.amplitudes)
    return max((abs(a.amplitudes.get(k, 0) - ph * b.amplitudes.get(k, 0)) for k in keys), default=0.0)


def same_ray(a: SparseState, b: SparseState, atol: float = 1e-9) -> bool:
    return ray_distance(a, b) < atol


# ---------------------------------------------------------------------------
# mixed states
# ---------------------------------------------------------------------------

def _compose_flip(p: float, q: float) -> float:
    return p * (1 - q) + q * (1 - p)


class Ensemble:
    """Mixed state as a weighted list of pure members plus deferred Pauli noise.

    ``channels`` maps a qubit to ``(p_x, p_z)``: independent bit- and phase-flip
    probabilities that act after every member has been prepared.  They are
    evaluated exactly by :func:`product_expectation` and
    :func:`product_distribution`, or turned into explicit members by
    :meth:`expand`.
    """

    def __init__(self, members, channels: dict | None = None, *, normalize: bool = True):
        members = [(float(w), s) for w, s in members]
        if not members:
            raise ImpossibleOutcome("ensemble has no surviving members")
        if any(w < 0 for w, _ in members):
            raise ConfigurationError("ensemble weights must be non-negative")
        reg = members[0][1].register
        if any(s.register != reg for _, s in members):
            raise AddressError("all ensemble members must share one register")
        if normalize:
            total = sum(w for w, _ in members)
            members = [(w / total, s) for w, s in members]
        self.members = tuple(members)
        self.channels = dict(channels or {})
        for addr, (px, pz) in self.channels.items():
            if addr not in reg:
                raise AddressError(f"noise channel on inactive qubit {addr}")
            if not (0 <= px <= 1 and 0 <= pz <= 1):
                raise ConfigurationError("channel probabilities must lie in [0, 1]")
        self._density = None

    @classmethod
    def pure(cls, state: SparseState) -> "Ensemble":
        return cls([(1.0, state)])

    @property
    def register(self) -> tuple[QubitAddress, ...]:
        return self.members[0][1].register

    @property
    def n_qubits(self) -> int:
        return len(self.register)

    def __len__(self) -> int:
        return len(self.members)

    def total_weight(self) -> float:
        return sum(w for w, _ in self.members)

    def with_channel(self, addrs: Iterable[QubitAddress], *, px: float = 0.0, pz: float = 0.0) -> "Ensemble":
        channels = dict(self.channels)
        for a in addrs:
            if a not in self.register:
                raise AddressError(f"qubit {a} is not active")
            ox, oz = channels.get(a, (0.0, 0.0))
            channels[a] = (_compose_flip(ox, px), _compose_flip(oz, pz))
        return Ensemble(self.members, channels, normalize=False)

    def map(self, fn: Callable[[SparseState], SparseState], *, defer_channels: bool = False) -> "Ensemble":
        """Apply ``fn`` to every member; members for which it raises ImpossibleOutcome are dropped.

        Member state weights pick up post-selection probabilities; call
        :meth:`postselect` to condition on success.  Pending channels must be
        known to commute with ``fn`` (``defer_channels=True``).
        """
        if self.channels and not defer_channels:
            raise ContractViolation("expand pending noise channels before structural operations")
        out = []
        for w, s in self.members:
            try:
                out.append((w, fn(s)))
            except ImpossibleOutcome:
                continue
        return Ensemble(out, self.channels, normalize=False)

    def postselect(self) -> tuple["Ensemble", float]:
        """Condition on success: fold member state weights into the mixture weights."""
        joint = [(w * s.weight * s.norm2(), s) for w, s in self.members]
        success = sum(j for j, _ in joint)
        if success < IMPOSSIBLE_TOL:
            raise ImpossibleOutcome("post-selection has zero success probability", success)
        members = [(j / success, SparseState(s.register, s.amplitudes, 1.0)) for j, s in joint if j > 0]
        return Ensemble(members, self.channels, normalize=False), success

    def expand(self, max_branches: int = MAX_EXACT_BRANCHES, seed=None) -> "Ensemble":
        """Materialize pending channels as explicit members.

        Exact enumeration while the branch count stays within ``max_branches``;
        beyond that each member is replaced by Monte Carlo samples of error
        patterns, drawn from a per-member sub-seed of ``seed``.
        """
        if not self.channels:
            return self
        addrs = list(self.channels)
        options = []
        for a in addrs:
            px, pz = self.channels[a]
            opts = [((ex, ez), (px if ex else 1 - px) * (pz if ez else 1 - pz))
                    for ex in (0, 1) for ez in (0, 1)]
            options.append([o for o in opts if o[1] > 0])
        n_cfg = 1
        for o in options:
            n_cfg *= len(o)
        out = []
        if n_cfg * len(self.members) <= max_branches:
            for cfg in itertools.product(*options):
                prob = float(np.prod([c[1] for c in cfg]))
                paulis = [c[0] for c in cfg]
                for w, s in self.members:
                    out.append((w * prob, _apply_paulis(s, addrs, paulis)))
        else:
            per_member = max(1, max_branches // len(self.members))
            children = np.random.SeedSequence(seed).spawn(len(self.members))
            px = np.array([self.channels[a][0] for a in addrs])
            pz = np.array([self.channels[a][1] for a in addrs])
            for (w, s), child in zip(self.members, children):
                rng = np.random.default_rng(child)
                ex = rng.random((per_member, len(addrs))) < px
                ez = rng.random((per_member, len(addrs))) < pz
                for i in range(per_member):
                    paulis = list(zip(ex[i].astype(int), ez[i].astype(int)))
                    out.append((w / per_member, _apply_paulis(s, addrs, paulis)))
        return Ensemble(out, normalize=False)

    def density(self) -> "DensityTerms":
        if self._density is None:
            self._density = DensityTerms.from_ensemble(self)
        return self._density


def _apply_paulis(state: SparseState, addrs, paulis) -> SparseState:
    xmask = 0
    zmask = 0
    for a, (ex, ez) in zip(addrs, paulis):
        p = state.bit_position(a)
        if ex:
            xmask |= 1 << p
        if ez:
            zmask |= 1 << p
    if not xmask and not zmask:
        return state
    # Z then X; the overall sign convention of XZ is a global phase
    new = {}
    for k, a in state.amplitudes.items():
        sign = -1 if bin(k & zmask).count("1") & 1 else 1
        new[k ^ xmask] = sign * a
    return SparseState(state.register, new, state.weight)


@dataclass
class DensityTerms:
    """Nonzero entries rho[t, t'] of an ensemble's density matrix, aggregated over members."""

    register: tuple
    rows: np.ndarray      # basis index t
    cols: np.ndarray      # basis index t'
    values: np.ndarray    # complex rho[t, t']
    channels: dict

    @classmethod
    def from_ensemble(cls, ens: Ensemble) -> "DensityTerms":
        acc: dict[tuple[int, int], complex] = defaultdict(complex)
        trace = 0.0
        for w, s in ens.members:
            ws = w * s.weight
            items = list(s.amplitudes.items())
            for t, a in items:
                for t2, b in items:
                    acc[(t, t2)] += ws * a * b.conjugate()
            trace += ws * s.norm2()
        keys = [k for k, v in acc.items() if abs(v) > PRUNE_TOL * 1e-3]
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([acc[k] for k in keys], dtype=complex) / trace
        return cls(ens.register, rows, cols, vals, dict(ens.channels))

    def bits(self) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.register)
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
        t = (self.rows[:, None] >> shifts) & 1
        t2 = (self.cols[:, None] >> shifts) & 1
        return t, t2


def heisenberg(op: np.ndarray, px: float, pz: float) -> np.ndarray:
    """Pull a single-qubit operator back through an independent X/Z flip channel."""
    op = np.asarray(op, dtype=complex)
    x_op = _PAULI_X @ op @ _PAULI_X
    z_op = _PAULI_Z @ op @ _PAULI_Z
    xz_op = _PAULI_Z @ x_op @ _PAULI_Z
    return ((1 - px) * (1 - pz) * op + px * (1 - pz) * x_op
            + (1 - px) * pz * z_op + px * pz * xz_op)


def _effective_ops(dens: DensityTerms, ops) -> np.ndarray:
    ops = np.asarray(ops, dtype=complex)
    out = ops.copy()
    for q, addr in enumerate(dens.register):
        if addr in dens.channels:
            px, pz = dens.channels[addr]
            out[q] = heisenberg(ops[q], px, pz)
    return out


def product_expectation(ens: Ensemble, ops) -> complex:
    """Exact Tr(rho . op_0 (x) op_1 (x) ...), with ``ops[q]`` acting on ``register[q]``.

    Pending channels are folded into the operators, so no branch expansion is needed.
    """
    dens = ens.density()
    ops = _effective_ops(dens, ops)
    if ops.shape != (len(dens.register), 2, 2):
        raise ConfigurationError("need one 2x2 operator per register qubit")
    t, t2 = dens.bits()
    q = np.arange(len(dens.register))
    factors = ops[q[None, :], t2, t]
    return complex(np.sum(dens.values * np.prod(factors, axis=1)))


def product_distribution(ens: Ensemble, readouts, *, chunk: int = 512) -> np.ndarray:
    """Exact outcome probabilities of a product measurement, as a dense 2**N vector.

    ``readouts[q]`` is a 2x2 matrix whose row ``o`` is the bra of outcome ``o``
    on ``register[q]`` expressed in the logic basis.  The sum over density
    entries is split into two half-register Kronecker factors and contracted
    with one matrix product, keeping the cost near O(P * 2**(N/2) + 2**N * P).
    """
    dens = ens.density()
    readouts = np.asarray(readouts, dtype=complex)
    n = len(dens.register)
    if readouts.shape != (n, 2, 2):
        raise ConfigurationError("need one 2x2 readout matrix per register qubit")
    # per-qubit outcome projectors Pi[o][a, b] = conj(r[a]) r[b]
    proj = np.einsum("qoa,qob->qoab", readouts.conj(), readouts)
    for q, addr in enumerate(dens.register):
        if addr in dens.channels:
            px, pz = dens.channels[addr]
            for o in (0, 1):
                proj[q, o] = heisenberg(proj[q, o], px, pz)
    t, t2 = dens.bits()
    qi = np.arange(n)
    # factors[p, q, o] = Pi_q,o[t'_pq, t_pq]
    factors = proj[qi[None, :], :, t2, t]
    keep = np.all(np.any(np.abs(factors) > 1e-300, axis=2), axis=1)
    factors = factors[keep]
    values = dens.values[keep]
    h = n // 2
    result = np.zeros((1 << h, 1 << (n - h)), dtype=complex)
    for start in range(0, len(values), chunk):
        f = factors[start:start + chunk]
        left = _kron_rows(f[:, :h]) * values[start:start + chunk, None]
        right = _kron_rows(f[:, h:])
        result += left.T @ right
    probs = result.real.ravel()
    probs[probs < 0] = 0.0
    return probs


def _kron_rows(f: np.ndarray) -> np.ndarray:
    """Row-wise Kronecker product of per-qubit length-2 vectors, shape (P, q, 2) -> (P, 2**q)."""
    out = np.ones((f.shape[0], 1), dtype=complex)
    for q in range(f.shape[1]):
        out = (out[:, :, None] * f[:, q, None, :]).reshape(f.shape[0], -1)
    return out
