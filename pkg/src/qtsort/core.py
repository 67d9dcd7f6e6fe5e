"""Dense statevector and density-matrix numerics.

Qubit 0 is the most significant bit of a basis index, so ``|10>`` on two
qubits is basis index 2. Gate functions update the state in place and
return it, which keeps call chains short in the search loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import config


class CapacityError(ValueError):
    """Requested register does not fit the configured memory cap."""


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class StateVector:
    """Unit-norm amplitude vector over ``2**num_qubits`` basis states."""

    def __init__(self, num_qubits: int, amplitudes: np.ndarray):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (1 << num_qubits,):
            raise ValueError(
                f"expected {1 << num_qubits} amplitudes, got shape {amplitudes.shape}"
            )
        self.num_qubits = num_qubits
        self.amplitudes = amplitudes

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex]) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex)
        q = int(round(math.log2(len(amps))))
        if 1 << q != len(amps):
            raise ValueError("amplitude count must be a power of two")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > config.TOLERANCE:
            raise ValueError(f"amplitudes not normalised (norm={norm})")
        return cls(q, amps)

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> "StateVector":
        state = new_state(num_qubits)
        state.amplitudes[0] = 0
        state.amplitudes[index] = 1
        return state

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"


@dataclass
class RegisterSpec:
    """Named contiguous qubit ranges over a ``num_qubits`` register file."""

    num_qubits: int
    ranges: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        used: set[int] = set()
        for name, (start, width) in self.ranges.items():
            if width < 1 or start < 0 or start + width > self.num_qubits:
                raise ValueError(f"register {name!r} out of range")
            span = set(range(start, start + width))
            if used & span:
                raise ValueError(f"register {name!r} overlaps another register")
            used |= span

    @classmethod
    def packed(cls, **widths: int) -> "RegisterSpec":
        """Lay registers out back to back in keyword order."""
        ranges, start = {}, 0
        for name, width in widths.items():
            ranges[name] = (start, width)
            start += width
        return cls(start, ranges)

    def __getitem__(self, name: str) -> tuple[int, int]:
        return self.ranges[name]

    def width(self, name: str) -> int:
        return self.ranges[name][1]

    def qubits(self, name: str) -> list[int]:
        start, width = self.ranges[name]
        return list(range(start, start + width))

    def values(self, name: str) -> np.ndarray:
        """Value of register ``name`` in every basis index."""
        return register_values(self.num_qubits, self.ranges[name])

    def shift(self, name: str) -> int:
        start, width = self.ranges[name]
        return self.num_qubits - start - width

    def compose(self, **values: int) -> int:
        """Basis index with the given register values (others zero)."""
        index = 0
        for name, value in values.items():
            start, width = self.ranges[name]
            if not 0 <= value < (1 << width):
                raise ValueError(f"value {value} does not fit register {name!r}")
            index |= value << self.shift(name)
        return index


def register_values(num_qubits: int, rng_range: tuple[int, int]) -> np.ndarray:
    start, width = rng_range
    idx = np.arange(1 << num_qubits)
    return (idx >> (num_qubits - start - width)) & ((1 << width) - 1)


Register = Union[tuple[int, int], None]


def new_state(q: int) -> StateVector:
    """Blank register ``|0...0>`` on ``q`` qubits."""
    if q < 1:
        raise CapacityError(f"need at least one qubit, got {q}")
    if q > config.max_qubits():
        raise CapacityError(
            f"{q} qubits exceeds cap of {config.max_qubits()} (QTSORT_MAX_QUBITS)"
        )
    amps = np.zeros(1 << q, dtype=complex)
    amps[0] = 1
    return StateVector(q, amps)


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.num_qubits} qubits")


def apply_single(state: StateVector, matrix: np.ndarray, qubit: int) -> StateVector:
    """Apply a 2x2 unitary to one tensor factor."""
    _check_qubit(state, qubit)
    psi = state.amplitudes.reshape(1 << qubit, 2, -1)
    state.amplitudes = np.einsum("ab,ibj->iaj", matrix, psi).reshape(-1)
    return state


def apply_hadamard(state: StateVector, qubit: int) -> StateVector:
    _check_qubit(state, qubit)
    psi = state.amplitudes.reshape(1 << qubit, 2, -1)
    lo, hi = psi[:, 0, :], psi[:, 1, :]
    out = np.empty_like(psi)
    out[:, 0, :] = (lo + hi) / math.sqrt(2)
    out[:, 1, :] = (lo - hi) / math.sqrt(2)
    state.amplitudes = out.reshape(-1)
    return state


def apply_x(state: StateVector, qubit: int) -> StateVector:
    _check_qubit(state, qubit)
    psi = state.amplitudes.reshape(1 << qubit, 2, -1)
    state.amplitudes = psi[:, ::-1, :].reshape(-1).copy()
    return state


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("control and target must differ")
    q = state.num_qubits
    cmask = 1 << (q - 1 - control)
    tmask = 1 << (q - 1 - target)
    idx = np.arange(1 << q)
    src = np.where(idx & cmask, idx ^ tmask, idx)
    state.amplitudes = state.amplitudes[src]
    return state


def apply_phase_flip(
    state: StateVector,
    predicate: Union[Callable[[int], bool], np.ndarray],
    register: Register = None,
) -> StateVector:
    """Negate amplitudes whose (register) value satisfies ``predicate``.

    ``predicate`` is either a callable on register values or a boolean
    table indexed by register value.
    """
    if register is None:
        register = (0, state.num_qubits)
    vals = register_values(state.num_qubits, register)
    if callable(predicate):
        table = np.array([bool(predicate(v)) for v in range(1 << register[1])])
    else:
        table = np.asarray(predicate, dtype=bool)
        if table.shape != (1 << register[1],):
            raise ValueError("predicate table must cover every register value")
    signs = np.where(table[vals], -1.0, 1.0)
    state.amplitudes = state.amplitudes * signs
    return state


def apply_diffusion(state: StateVector, register: Register = None) -> StateVector:
    """Inversion about the mean, ``2|u><u| - I``, on a contiguous register."""
    if register is None:
        register = (0, state.num_qubits)
    start, width = register
    if start < 0 or width < 1 or start + width > state.num_qubits:
        raise IndexError("diffusion register out of range")
    psi = state.amplitudes.reshape(1 << start, 1 << width, -1)
    mean = psi.mean(axis=1, keepdims=True)
    state.amplitudes = (2 * mean - psi).reshape(-1)
    return state


def marginal(state: StateVector, register: Register = None) -> np.ndarray:
    """Squared-magnitude distribution of the register's value."""
    if register is None:
        register = (0, state.num_qubits)
    start, width = register
    probs = state.probabilities().reshape(1 << start, 1 << width, -1)
    return probs.sum(axis=(0, 2))


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def measure(
    state: StateVector, register: Register, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Projective computational-basis measurement of ``register``.

    Returns the outcome and a new, renormalised post-measurement state; the
    input state is left untouched.
    """
    if register is None:
        register = (0, state.num_qubits)
    outcome = sample_index(marginal(state, register), rng)
    vals = register_values(state.num_qubits, register)
    amps = np.where(vals == outcome, state.amplitudes, 0)
    amps = amps / np.linalg.norm(amps)
    return outcome, StateVector(state.num_qubits, amps)


# -- density matrices ------------------------------------------------------


class DensityMatrix:
    """Hermitian, positive semidefinite, trace-one matrix."""

    def __init__(self, entries: np.ndarray, validate: bool = True):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("density matrix must be square")
        self.entries = entries
        if validate:
            problems = self.violations()
            if problems:
                raise ValueError("not a density matrix: " + "; ".join(problems))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def pure(cls, state: Union[StateVector, np.ndarray]) -> "DensityMatrix":
        v = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, m: int) -> "DensityMatrix":
        return cls(np.eye(1 << m, dtype=complex) / (1 << m))

    def violations(self, tol: float | None = None) -> list[str]:
        tol = config.TOLERANCE if tol is None else tol
        out = []
        a = self.entries
        if np.max(np.abs(a - a.conj().T), initial=0.0) > tol:
            out.append("not Hermitian")
        tr = np.trace(a)
        if abs(tr - 1) > tol:
            out.append(f"trace {tr.real:.12g}")
        lam = np.linalg.eigvalsh((a + a.conj().T) / 2)
        if lam.min() < -tol:
            out.append(f"min eigenvalue {lam.min():.3g}")
        return out

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.entries + self.entries.conj().T) / 2).min())


def density_from_ensemble(pairs: Sequence[tuple[float, StateVector]]) -> DensityMatrix:
    if not pairs:
        raise ValueError("empty ensemble")
    probs = np.array([p for p, _ in pairs], dtype=float)
    if (probs < 0).any() or abs(probs.sum() - 1) > config.TOLERANCE:
        raise ValueError("ensemble probabilities must be a distribution")
    dims = {len(s.amplitudes) for _, s in pairs}
    if len(dims) != 1:
        raise ValueError("ensemble states have mismatched dimensions")
    rho = sum(p * np.outer(s.amplitudes, s.amplitudes.conj()) for p, s in pairs)
    return DensityMatrix(rho)


def _as_array(m) -> np.ndarray:
    return m.entries if isinstance(m, DensityMatrix) else np.asarray(m, dtype=complex)


def trace_norm(matrix) -> float:
    """Sum of singular values; eigenvalue magnitudes for Hermitian input."""
    a = _as_array(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    if np.allclose(a, a.conj().T, atol=config.TOLERANCE, rtol=0):
        return float(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2)).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def outcome_distribution(rho, projectors: Sequence[np.ndarray]) -> np.ndarray:
    a = _as_array(rho)
    return np.array([np.trace(p @ a).real for p in projectors])


@dataclass
class Measurement:
    """Projective measurement given by orthogonal projectors summing to I."""

    projectors: list[np.ndarray]

    def distribution(self, rho) -> np.ndarray:
        return outcome_distribution(rho, self.projectors)


def helstrom_measurement(rho1, rho2) -> tuple[Measurement, float]:
    """Projectors onto the non-negative / negative eigenspaces of ``rho1 - rho2``.

    Returns the measurement and the l1 distance between its outcome
    distributions on the two states.
    """
    a, b = _as_array(rho1), _as_array(rho2)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    lam, vecs = np.linalg.eigh(a - b)
    pos = vecs[:, lam >= 0]
    neg = vecs[:, lam < 0]
    meas = Measurement([pos @ pos.conj().T, neg @ neg.conj().T])
    dist = float(np.abs(meas.distribution(a) - meas.distribution(b)).sum())
    return meas, dist


def mix_decompose(rho, m: int) -> DensityMatrix:
    """The state ``sigma`` with ``I/2^m = rho/2^m + (1 - 1/2^m) sigma``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    a = _as_array(rho)
    d = 1 << m
    if a.shape != (d, d):
        raise ValueError(f"rho must be {d}x{d} for m={m}")
    mixed = np.eye(d, dtype=complex) / d
    return DensityMatrix((mixed - a / d) / (1 - 1 / d))


def reduced_density(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace of a pure state onto the qubits in ``keep`` (in order)."""
    q = state.num_qubits
    keep = list(keep)
    rest = [k for k in range(q) if k not in keep]
    psi = state.amplitudes.reshape((2,) * q).transpose(keep + rest)
    psi = psi.reshape(1 << len(keep), -1)
    return DensityMatrix(psi @ psi.conj().T)


# -- random objects for property tests and lab fixtures ----------------------


def random_state(q: int, rng: np.random.Generator) -> StateVector:
    v = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
    return StateVector(q, v / np.linalg.norm(v))


def random_density(m: int, rng: np.random.Generator, terms: int | None = None) -> DensityMatrix:
    """Mixture of random pure states with Dirichlet weights."""
    terms = terms or int(rng.integers(1, (1 << m) + 2))
    weights = rng.dirichlet(np.ones(terms))
    weights /= weights.sum()
    return density_from_ensemble([(w, random_state(m, rng)) for w in weights])


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_projective_measurement(d: int, rng: np.random.Generator) -> Measurement:
    """Random basis grouped into a random number of outcomes."""
    u = random_unitary(d, rng)
    k = int(rng.integers(2, d + 1))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=d - k)])
    rng.shuffle(labels)
    projectors = []
    for outcome in range(k):
        cols = u[:, labels == outcome]
        projectors.append(cols @ cols.conj().T)
    return Measurement(projectors)


def pure_trace_distance(a: StateVector, b: StateVector) -> float:
    """``|| |a><a| - |b><b| ||_1`` for pure states, ``2 sqrt(1 - |<a|b>|^2)``.

    Computed as twice the norm of ``b``'s component orthogonal to ``a``,
    which avoids the cancellation in ``1 - |<a|b>|^2``.
    """
    u, v = a.amplitudes, b.amplitudes
    return float(2 * np.linalg.norm(v - np.vdot(u, v) * u))
