"""Sorting instances and oracle gates with exact query counting.

Positions are 0-based throughout. Register values that do not name a
position (padding beyond ``n``) read as value 0 and never satisfy a
comparison, so padded index registers behave like never-marked dummies.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import StateVector, register_values


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class SortInstance:
    """``n`` distinct integers from ``{1..range_bound}`` (default ``n**2``)."""

    values: tuple[int, ...]
    range_bound: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        n = len(values)
        if n < 2:
            raise OracleError("an instance needs at least two values")
        if self.range_bound == 0:
            object.__setattr__(self, "range_bound", n * n)
        if min(values) < 1 or max(values) > self.range_bound:
            raise OracleError(f"values must lie in 1..{self.range_bound}")
        if len(set(values)) != n:
            raise OracleError("values must be pairwise distinct")
        object.__setattr__(self, "_array", np.array(values, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def value_bits(self) -> int:
        """Width of a register that can hold any value up to ``range_bound``."""
        return math.ceil(math.log2(self.range_bound + 1))

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.n)))

    def replaced(self, position: int, value: int) -> "SortInstance":
        vals = list(self.values)
        vals[position] = value
        return SortInstance(tuple(vals), self.range_bound)

    # Classical (basis-state) oracle calls. Each one is a single query.
    def read(self, i: int, counter: "QueryCounter") -> int:
        counter.tick()
        return self.values[i]

    def less(self, i: int, j: int, counter: "QueryCounter") -> bool:
        counter.tick()
        return self.values[i] < self.values[j]

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "seed": self.seed, "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "SortInstance":
        data = json.loads(text)
        values = tuple(data["values"])
        if data["n"] != len(values):
            raise OracleError("n does not match the number of values")
        return cls(values, seed=data.get("seed"))


def random_instance(n: int, rng: np.random.Generator, seed: Optional[int] = None) -> SortInstance:
    """``n`` values drawn uniformly without replacement from ``1..n**2``."""
    if n < 2:
        raise OracleError("n must be at least 2")
    values = rng.choice(n * n, size=n, replace=False) + 1
    return SortInstance(tuple(int(v) for v in values), seed=seed)


@dataclass
class QueryCounter:
    """Running count of oracle-gate applications.

    ``magnitudes``, when enabled with :meth:`track_magnitudes`, accumulates
    the squared amplitude each position receives across all coherent queries.
    """

    total: int = 0
    slice_marks: list[tuple[int, str]] = field(default_factory=list)
    magnitudes: Optional[np.ndarray] = None

    def tick(self, k: int = 1) -> None:
        self.total += k

    def read(self) -> int:
        return self.total

    def mark_slice(self, label: str) -> None:
        self.slice_marks.append((self.total, label))

    def reset(self) -> None:
        self.total = 0
        self.slice_marks.clear()
        if self.magnitudes is not None:
            self.magnitudes[:] = 0

    def slice_deltas(self) -> list[int]:
        prev, out = 0, []
        for total, _ in self.slice_marks:
            out.append(total - prev)
            prev = total
        return out

    def track_magnitudes(self, n: int) -> None:
        self.magnitudes = np.zeros(n)

    def _record(self, state: StateVector, register: tuple[int, int], domain=None) -> None:
        if self.magnitudes is None:
            return
        start, width = register
        probs = state.probabilities().reshape(1 << start, 1 << width, -1).sum(axis=(0, 2))
        positions = np.arange(1 << width) if domain is None else _domain_table(domain, width)
        n = len(self.magnitudes)
        ok = (positions >= 0) & (positions < n)
        np.add.at(self.magnitudes, positions[ok], probs[ok])


def _domain_table(domain: Optional[Sequence[int]], width: int) -> np.ndarray:
    """Instance position for every register value; ``-1`` marks padding."""
    table = np.full(1 << width, -1, dtype=np.int64)
    if domain is None:
        table[:] = np.arange(1 << width)
    else:
        d = np.asarray(domain, dtype=np.int64)
        if len(d) > len(table):
            raise OracleError("domain larger than the index register")
        table[: len(d)] = d
    return table


def _values_for(instance: SortInstance, positions: np.ndarray) -> np.ndarray:
    ok = (positions >= 0) & (positions < instance.n)
    out = np.zeros(len(positions), dtype=np.int64)
    out[ok] = instance.array[positions[ok]]
    return out


_SPEC_RE = re.compile(
    r"^\s*x_i\s*(<|>)\s*x_(\d+)\s*(?:AND\s+i\s+in\s+\[(\d+)\s*,\s*(\d+)\))?\s*$"
)


@dataclass(frozen=True)
class Predicate:
    """Threshold comparison on the searched position ``i``.

    ``kind`` is ``"lt"`` (x_i < x_t), ``"gt"`` (x_i > x_t) or ``"between"``
    (x_lower < x_i < x_t). ``block`` optionally restricts ``i`` to a
    half-open position range; the restriction is index arithmetic and costs
    nothing. ``cost`` is the number of comparison atoms, i.e. oracle gates.
    """

    kind: str
    threshold: int
    lower: Optional[int] = None
    block: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.kind not in ("lt", "gt", "between"):
            raise OracleError(f"malformed predicate kind {self.kind!r}")
        if (self.kind == "between") != (self.lower is not None):
            raise OracleError("only 'between' predicates take a lower threshold")
        if self.block is not None and self.block[0] >= self.block[1]:
            raise OracleError("empty block restriction")

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        """Parse ``"x_i < x_3"``, ``"x_i > x_3"`` or ``"x_i > x_3 AND i in [0, 8)"``."""
        m = _SPEC_RE.match(text)
        if not m:
            raise OracleError(f"malformed predicate spec {text!r}")
        op, t, lo, hi = m.groups()
        block = (int(lo), int(hi)) if lo is not None else None
        return cls("lt" if op == "<" else "gt", int(t), block=block)

    @property
    def cost(self) -> int:
        return 2 if self.kind == "between" else 1

    def table(
        self, instance: SortInstance, positions: np.ndarray, vals: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Truth value for each entry of ``positions`` (``-1`` is padding).

        ``vals`` may carry the precomputed values at ``positions``.
        """
        positions = np.asarray(positions, dtype=np.int64)
        if vals is None:
            vals = _values_for(instance, positions)
        t = instance.values[self.threshold]
        if self.kind == "lt":
            hit = vals < t
        elif self.kind == "gt":
            hit = vals > t
        else:
            hit = (vals > instance.values[self.lower]) & (vals < t)
        hit &= (positions >= 0) & (positions < instance.n)
        if self.block is not None:
            hit &= (positions >= self.block[0]) & (positions < self.block[1])
        return hit

    def holds(self, instance: SortInstance, i: int) -> bool:
        return bool(self.table(instance, np.array([i]))[0])


def _permute(state: StateVector, new_index: np.ndarray) -> StateVector:
    out = np.empty_like(state.amplitudes)
    out[new_index] = state.amplitudes
    state.amplitudes = out
    return state


def _bit_qubit_check(state: StateVector, *regs: tuple[int, int]) -> None:
    used: set[int] = set()
    for start, width in regs:
        if start < 0 or start + width > state.num_qubits:
            raise OracleError("register out of range")
        span = set(range(start, start + width))
        if used & span:
            raise OracleError("registers overlap")
        used |= span


def access_query(
    state: StateVector,
    index_register: tuple[int, int],
    value_register: tuple[int, int],
    instance: SortInstance,
    counter: QueryCounter,
    domain: Optional[Sequence[int]] = None,
) -> StateVector:
    """``|i>|a> -> |i>|a XOR x_i>`` over the whole superposition."""
    _bit_qubit_check(state, index_register, value_register)
    if value_register[1] < instance.value_bits:
        raise OracleError(
            f"value register needs {instance.value_bits} qubits, has {value_register[1]}"
        )
    q = state.num_qubits
    positions = _domain_table(domain, index_register[1])
    x = _values_for(instance, positions[register_values(q, index_register)])
    shift = q - value_register[0] - value_register[1]
    counter._record(state, index_register, domain)
    counter.tick()
    return _permute(state, np.arange(1 << q) ^ (x << shift))


def comparison_query(
    state: StateVector,
    i_register: tuple[int, int],
    j_register: tuple[int, int],
    result_qubit: int,
    instance: SortInstance,
    counter: QueryCounter,
) -> StateVector:
    """XOR ``[x_i < x_j]`` into ``result_qubit``."""
    _bit_qubit_check(state, i_register, j_register, (result_qubit, 1))
    q = state.num_qubits
    xi = _values_for(instance, register_values(q, i_register))
    xj = _values_for(instance, register_values(q, j_register))
    iv = register_values(q, i_register)
    jv = register_values(q, j_register)
    flip = (xi < xj) & (iv < instance.n) & (jv < instance.n)
    counter._record(state, i_register)
    counter.tick()
    return _permute(state, np.arange(1 << q) ^ (flip.astype(np.int64) << (q - 1 - result_qubit)))


def phase_mark(
    state: StateVector,
    index_register: tuple[int, int],
    predicate: Predicate,
    instance: SortInstance,
    counter: QueryCounter,
    domain: Optional[Sequence[int]] = None,
) -> StateVector:
    """Negate amplitudes of positions satisfying ``predicate``.

    Equivalent to comparison query, Z on the result bit, and uncompute; it
    is charged ``predicate.cost`` queries (one per comparison atom).
    """
    _bit_qubit_check(state, index_register)
    positions = _domain_table(domain, index_register[1])
    table = predicate.table(instance, positions)
    vals = register_values(state.num_qubits, index_register)
    counter._record(state, index_register, domain)
    counter.tick(predicate.cost)
    state.amplitudes = np.where(table[vals], -state.amplitudes, state.amplitudes)
    return state


def compare_registers(
    state: StateVector,
    a_register: tuple[int, int],
    b_register: tuple[int, int],
    result_qubit: int,
) -> StateVector:
    """Reversible classical gate: XOR ``[a < b]`` into ``result_qubit``. No query."""
    q = state.num_qubits
    a = register_values(q, a_register)
    b = register_values(q, b_register)
    flip = (a < b).astype(np.int64)
    return _permute(state, np.arange(1 << q) ^ (flip << (q - 1 - result_qubit)))


def comparison_via_access(
    state: StateVector,
    i_register: tuple[int, int],
    j_register: tuple[int, int],
    result_qubit: int,
    xi_register: tuple[int, int],
    xj_register: tuple[int, int],
    instance: SortInstance,
    counter: QueryCounter,
) -> StateVector:
    """Comparison gate built from four access queries and a reversible compare.

    The scratch value registers must start (and end) blank. Padding
    positions load 0, so they would compare as smaller; callers keep
    ``i``/``j`` within ``n``.
    """
    access_query(state, i_register, xi_register, instance, counter)
    access_query(state, j_register, xj_register, instance, counter)
    compare_registers(state, xi_register, xj_register, result_qubit)
    access_query(state, j_register, xj_register, instance, counter)
    access_query(state, i_register, xi_register, instance, counter)
    return state


class RankOracle:
    """Ground truth for tests: the sorted order of an instance."""

    def __init__(self, instance: SortInstance):
        self.instance = instance
        self.order = sorted(range(instance.n), key=lambda i: instance.values[i])

    def min_value(self, rank: int) -> int:
        """The ``rank``-th smallest value, ranks starting at 1."""
        return self.instance.values[self.order[rank - 1]]

    def position(self, rank: int) -> int:
        return self.order[rank - 1]

    def successor_in(self, block: Sequence[int], position: Optional[int]) -> Optional[int]:
        """Position of the smallest block value above ``x[position]`` (or overall min)."""
        vals = self.instance.values
        floor = -1 if position is None else vals[position]
        above = [i for i in block if vals[i] > floor]
        return min(above, key=lambda i: vals[i]) if above else None
