"""
Exact qudit state-vector simulator

Register i is axis i of the amplitude tensor (register 0 is the most
significant digit of a basis index). Gates mutate the state in place and
return it so calls can be chained.
"""

import copy
import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from models.errors import EntanglementError, ImpossibleOutcomeError, RegisterBudgetError
from models.field import is_prime

logger = logging.getLogger(__name__)

SNAPSHOT_CUTOFF = 1e-12


class Basis(str, Enum):
    COMPUTATIONAL = "computational"
    FOURIER = "fourier"


@dataclass(frozen=True)
class RegisterLabel:
    owner: str
    role: str


@dataclass(frozen=True)
class MeasurementOutcome:
    register: int
    role: str
    basis: Basis
    value: int
    probability: float


def _tolerance() -> float:
    return float(os.getenv("QNC_TOLERANCE", "1e-9"))


def _max_amplitudes() -> int:
    return int(os.getenv("QNC_MAX_AMPLITUDES", str(1 << 22)))


class StateVector:
    """Dense amplitudes over n registers of prime dimension p, with ownership labels"""

    def __init__(self, p: int, amplitudes: np.ndarray, labels: Sequence[RegisterLabel],
                 max_amplitudes: Optional[int] = None, tolerance: Optional[float] = None):
        self.p = p
        self.amplitudes = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        self.labels: List[RegisterLabel] = list(labels)
        self.max_amplitudes = max_amplitudes if max_amplitudes is not None else _max_amplitudes()
        self.tolerance = tolerance if tolerance is not None else _tolerance()
        if self.amplitudes.size != p ** len(self.labels):
            raise ValueError(f"{self.amplitudes.size} amplitudes do not fit {len(self.labels)} registers of dimension {p}")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def omega(self) -> complex:
        return np.exp(2j * np.pi / self.p)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape([self.p] * self.n)

    def _store(self, tensor: np.ndarray) -> None:
        self.amplitudes = np.ascontiguousarray(tensor).reshape(-1)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def check(self, r: int) -> None:
        if not 0 <= r < self.n:
            raise IndexError(f"register {r} out of range for {self.n} registers")

    def index_of(self, role: str) -> int:
        for i, label in enumerate(self.labels):
            if label.role == role:
                return i
        raise KeyError(f"no register with role {role!r}")

    def roles(self) -> List[str]:
        return [label.role for label in self.labels]

    def _grow_check(self, extra: int) -> None:
        size = self.p ** (self.n + extra)
        if size > self.max_amplitudes:
            raise RegisterBudgetError(
                f"{self.n + extra} registers of dimension {self.p} need {size} amplitudes, budget is {self.max_amplitudes}"
            )

    def __repr__(self) -> str:
        return f"StateVector(p={self.p}, n={self.n}, roles={self.roles()})"


def allocate(p: int, n: int, labels: Optional[Sequence[RegisterLabel]] = None,
             max_amplitudes: Optional[int] = None) -> StateVector:
    """
    Allocate |0...0> on n registers of dimension p

    Args:
        p: Prime register dimension
        n: Number of registers (>= 1)
        labels: Optional (owner, role) per register
        max_amplitudes: Override of QNC_MAX_AMPLITUDES

    Returns:
        New StateVector
    """
    if not is_prime(p):
        raise ValueError(f"register dimension {p} is not prime")
    if n < 1:
        raise ValueError("need at least one register")
    budget = max_amplitudes if max_amplitudes is not None else _max_amplitudes()
    if p ** n > budget:
        raise RegisterBudgetError(f"{n} registers of dimension {p} exceed the budget of {budget} amplitudes")
    if labels is None:
        labels = [RegisterLabel("", f"q{i}") for i in range(n)]
    if len(labels) != n:
        raise ValueError("one label per register is required")
    amplitudes = np.zeros(p ** n, dtype=np.complex128)
    amplitudes[0] = 1.0
    return StateVector(p, amplitudes, labels, max_amplitudes=budget)


def empty_state(p: int, max_amplitudes: Optional[int] = None) -> StateVector:
    """Zero-register state (scalar 1) that registers can be added to"""
    if not is_prime(p):
        raise ValueError(f"register dimension {p} is not prime")
    return StateVector(p, np.ones(1, dtype=np.complex128), [], max_amplitudes=max_amplitudes)


def register_index(state: StateVector, role: str) -> int:
    return state.index_of(role)


def add_register(state: StateVector, owner: str, role: str) -> int:
    """Tensor-extend by |0> and return the new register index"""
    state._grow_check(1)
    grown = np.zeros((state.amplitudes.size, state.p), dtype=np.complex128)
    grown[:, 0] = state.amplitudes
    state.amplitudes = grown.reshape(-1)
    state.labels.append(RegisterLabel(owner, role))
    logger.debug(f"Added register {role} at {owner} (n={state.n})")
    return state.n - 1


def attach(state: StateVector, vector: Sequence[complex], owner: Union[str, Sequence[str]],
           roles: Sequence[str]) -> List[int]:
    """Tensor-append an arbitrary normalized pure state on len(roles) new registers"""
    k = len(roles)
    vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
    if vector.size != state.p ** k:
        raise ValueError(f"vector of length {vector.size} does not fit {k} registers of dimension {state.p}")
    if abs(np.vdot(vector, vector).real - 1.0) > state.tolerance:
        raise ValueError("attached vector is not normalized")
    state._grow_check(k)
    owners = [owner] * k if isinstance(owner, str) else list(owner)
    state.amplitudes = np.kron(state.amplitudes, vector)
    start = state.n
    state.labels.extend(RegisterLabel(o, role) for o, role in zip(owners, roles))
    return list(range(start, start + k))


def fourier_matrix(p: int, inverse: bool = False) -> np.ndarray:
    """F[y, x] = omega^(x*y) / sqrt(p); the inverse is its conjugate transpose"""
    x = np.arange(p)
    matrix = np.exp(2j * np.pi * np.outer(x, x) / p) / np.sqrt(p)
    return matrix.conj().T if inverse else matrix


def _apply_matrix(state: StateVector, matrix: np.ndarray, r: int) -> None:
    psi = state.tensor()
    psi = np.tensordot(matrix, psi, axes=([1], [r]))
    state._store(np.moveaxis(psi, 0, r))


def apply_fourier(state: StateVector, r: int, inverse: bool = False) -> StateVector:
    """Apply F (or F^dagger) to register r; for p = 2 this is the Hadamard gate"""
    state.check(r)
    _apply_matrix(state, fourier_matrix(state.p, inverse), r)
    return state


def _axis_shape(state: StateVector, r: int) -> List[int]:
    shape = [1] * state.n
    shape[r] = state.p
    return shape


def apply_phase(state: StateVector, r: int, b: int) -> StateVector:
    """Z(b): |x> -> omega^(b*x) |x> on register r"""
    state.check(r)
    b = int(b) % state.p
    if b == 0:
        return state
    x = np.arange(state.p)
    phases = np.exp(2j * np.pi * ((b * x) % state.p) / state.p)
    state._store(state.tensor() * phases.reshape(_axis_shape(state, r)))
    return state


def apply_shift(state: StateVector, r: int, c: int) -> StateVector:
    """X(c): |x> -> |x + c> on register r"""
    state.check(r)
    c = int(c) % state.p
    if c:
        state._store(np.roll(state.tensor(), c, axis=r))
    return state


def apply_controlled_add(state: StateVector, control: int, target: int, gamma: int) -> StateVector:
    """|x>|y> -> |x>|y + gamma*x>; gamma = 1 on qubits is CNOT"""
    state.check(control)
    state.check(target)
    if control == target:
        raise ValueError("control and target registers must differ")
    gamma = int(gamma) % state.p
    if gamma == 0:
        return state
    psi = state.tensor()
    out = psi.copy()
    target_axis = target if target < control else target - 1
    for x in range(1, state.p):
        index = [slice(None)] * state.n
        index[control] = x
        index = tuple(index)
        out[index] = np.roll(psi[index], (gamma * x) % state.p, axis=target_axis)
    state._store(out)
    return state


def outcome_probabilities(state: StateVector, r: int, basis: Basis = Basis.COMPUTATIONAL) -> np.ndarray:
    """Born distribution of measuring register r in the given basis"""
    state.check(r)
    psi = state.tensor()
    if Basis(basis) is Basis.FOURIER:
        psi = np.moveaxis(np.tensordot(fourier_matrix(state.p, inverse=True), psi, axes=([1], [r])), 0, r)
    weights = np.abs(psi) ** 2
    axes = tuple(i for i in range(state.n) if i != r)
    probabilities = weights.sum(axis=axes) if axes else weights
    return probabilities / probabilities.sum()


def measure(state: StateVector, r: int, basis: Basis = Basis.COMPUTATIONAL,
            rng: Optional[np.random.Generator] = None,
            forced: Optional[int] = None) -> Tuple[MeasurementOutcome, StateVector]:
    """
    Projective measurement of register r

    The Fourier readout rotates r with F^dagger, reads the computational basis
    and rotates back, so outcome y projects onto F|y>. A residual state
    sum_x a_x |u(x)>|g(x)>_r then becomes sum_x omega^(-y*g(x)) a_x |u(x)>.

    Args:
        state: State to measure (mutated)
        r: Register index
        basis: computational or fourier
        rng: Seeded generator; required unless `forced` is given
        forced: Outcome to post-select instead of sampling

    Returns:
        (MeasurementOutcome, collapsed state)
    """
    state.check(r)
    basis = Basis(basis)
    if basis is Basis.FOURIER:
        apply_fourier(state, r, inverse=True)
    psi = state.tensor()
    weights = np.abs(psi) ** 2
    axes = tuple(i for i in range(state.n) if i != r)
    probabilities = weights.sum(axis=axes) if axes else weights
    probabilities = probabilities / probabilities.sum()

    role = state.labels[r].role
    if forced is not None:
        outcome = int(forced) % state.p
        if probabilities[outcome] < state.tolerance:
            if basis is Basis.FOURIER:
                apply_fourier(state, r)
            raise ImpossibleOutcomeError(role, outcome, float(probabilities[outcome]))
    else:
        if rng is None:
            raise ValueError("a seeded rng is required to sample a measurement")
        cumulative = np.cumsum(probabilities)
        outcome = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
        outcome = min(outcome, state.p - 1)
        while probabilities[outcome] == 0 and outcome > 0:
            outcome -= 1

    mask = np.zeros(state.p)
    mask[outcome] = 1.0
    collapsed = psi * mask.reshape(_axis_shape(state, r)) / np.sqrt(probabilities[outcome])
    state._store(collapsed)
    if basis is Basis.FOURIER:
        apply_fourier(state, r)
    result = MeasurementOutcome(r, role, basis, outcome, float(probabilities[outcome]))
    logger.debug(f"Measured {role} in {basis.value} basis: {outcome} (p={probabilities[outcome]:.6f})")
    return result, state


def _split_rows(matrix: np.ndarray, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Factor matrix ~ outer(c, v) with v a unit vector

    v is the first row of significant norm, normalized, so c has a real
    positive entry there; fixes the global phase deterministically.
    """
    norms = np.sqrt((np.abs(matrix) ** 2).sum(axis=1))
    significant = np.flatnonzero(norms > 1e-6)
    if significant.size == 0:
        raise EntanglementError("state has no weight on the register")
    pivot = significant[0]
    v = matrix[pivot] / norms[pivot]
    c = matrix @ v.conj()
    residual = np.linalg.norm(matrix - np.outer(c, v))
    if residual > tolerance:
        raise EntanglementError(f"registers are entangled with the rest (residual {residual:.3e})")
    return c, v


def discard(state: StateVector, r: int) -> StateVector:
    """Remove register r, which must be in a product state with the remainder"""
    state.check(r)
    psi = np.moveaxis(state.tensor(), r, 0).reshape(state.p, -1)
    try:
        _, rest = _split_rows(psi, state.tolerance)
    except EntanglementError as e:
        raise EntanglementError(f"cannot discard {state.labels[r].role}: {e}") from e
    role = state.labels[r].role
    del state.labels[r]
    state.amplitudes = np.ascontiguousarray(rest).reshape(-1)
    logger.debug(f"Discarded register {role} (n={state.n})")
    return state


def reduced_state(state: StateVector, registers: Sequence[int]) -> np.ndarray:
    """
    Pure state of an ordered register subset

    Raises EntanglementError if the subset is entangled with its complement.
    """
    registers = list(registers)
    for r in registers:
        state.check(r)
    if len(set(registers)) != len(registers):
        raise ValueError("registers must be distinct")
    rest = [i for i in range(state.n) if i not in registers]
    psi = np.transpose(state.tensor(), registers + rest).reshape(state.p ** len(registers), -1)
    if psi.shape[1] == 1:
        return psi[:, 0].copy()
    _, sub = _split_rows(psi.T, state.tolerance)
    return sub


def fidelity(state: StateVector, reference, registers: Sequence[int]) -> float:
    """
    |<reference|psi_subset>|^2 for an ordered, pure register subset

    Args:
        state: Simulated state
        reference: StateVector or amplitude vector over the subset
        registers: Ordered register indices

    Returns:
        Fidelity in [0, 1]
    """
    ref = reference.amplitudes if isinstance(reference, StateVector) else np.asarray(reference, dtype=np.complex128)
    sub = reduced_state(state, registers)
    if ref.size != sub.size:
        raise ValueError(f"reference has {ref.size} amplitudes, subset has {sub.size}")
    value = abs(np.vdot(ref, sub)) ** 2 / (np.vdot(ref, ref).real * np.vdot(sub, sub).real)
    return float(min(1.0, max(0.0, value)))


def clone(state: StateVector) -> StateVector:
    return copy.deepcopy(state)


def snapshot(state: StateVector, registers: Optional[Sequence[int]] = None) -> List[Tuple[int, complex]]:
    """Nonzero (basis index, amplitude) pairs of the whole state or a pure subset"""
    vector = state.amplitudes if registers is None else reduced_state(state, registers)
    return [(int(i), complex(vector[i])) for i in np.flatnonzero(np.abs(vector) > SNAPSHOT_CUTOFF)]


def snapshot_to_json(entries: Sequence[Tuple[int, complex]]) -> List[List[float]]:
    return [[index, amplitude.real, amplitude.imag] for index, amplitude in entries]


def snapshot_matches(entries: Sequence[Tuple[int, complex]], golden: Sequence[Sequence[float]],
                     tolerance: float = 1e-9) -> bool:
    """Compare a snapshot with a golden [[index, re, im], ...] list amplitude by amplitude"""
    expected = {int(row[0]): complex(row[1], row[2]) for row in golden}
    actual = dict(entries)
    for index in set(expected) | set(actual):
        if abs(expected.get(index, 0j) - actual.get(index, 0j)) > tolerance:
            return False
    return True
