"""Grover search, exponential search for unknown marked counts, and
Dürr–Høyer minimum finding.

Two engines run a Grover search from the uniform superposition:

``"statevector"``
    allocates the index register, applies Hadamards, ``phase_mark`` oracle
    gates and diffusions gate by gate, then measures.
``"subspace"``
    evolves the two amplitudes of the marked/unmarked uniform states, which
    span an invariant plane of the Grover iterate, and samples from the
    resulting distribution. Exact, and much faster for long experiments.

Both charge the counter identically, so query accounting does not depend
on the engine.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import config
from .core import apply_diffusion, apply_hadamard, measure, new_state
from .oracle import (
    Predicate,
    QueryCounter,
    SortInstance,
    _domain_table,
    _values_for,
    phase_mark,
)

ENGINES = ("statevector", "subspace")


@dataclass(frozen=True)
class SearchDomain:
    """The positions a search ranges over (the whole input or one block)."""

    positions: tuple[int, ...]

    def __post_init__(self):
        if not self.positions:
            raise ValueError("search domain must be nonempty")

    @classmethod
    def whole(cls, n: int) -> "SearchDomain":
        return cls(tuple(range(n)))

    @classmethod
    def block(cls, lo: int, hi: int) -> "SearchDomain":
        return cls(tuple(range(lo, hi)))

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(self.size)))

    @property
    def padded_size(self) -> int:
        return 1 << self.index_bits

    @property
    def span(self) -> tuple[int, int]:
        return self.positions[0], self.positions[-1] + 1

    def check(self, instance: SortInstance) -> None:
        if min(self.positions) < 0 or max(self.positions) >= instance.n:
            raise ValueError("search domain exceeds instance bounds")


@dataclass
class MinFindResult:
    index: Optional[int]
    queries_used: int
    workspace_qubits: int
    exhausted: bool = False


def workspace_qubits(domain: SearchDomain) -> int:
    """Live qubits of one search: the index register plus the kickback ancilla."""
    return domain.index_bits + 1


def grover_success_probability(N: int, k: int, t: int) -> float:
    if k == 0:
        return 0.0
    theta = math.asin(math.sqrt(k / N))
    return math.sin((2 * t + 1) * theta) ** 2


def grover_amplitudes(table: np.ndarray, t: int) -> np.ndarray:
    """Closed-form amplitudes after ``t`` Grover iterations from uniform."""
    table = np.asarray(table, dtype=bool)
    N, k = len(table), int(table.sum())
    if k in (0, N):
        sign = (-1) ** t if k == N else 1
        return np.full(N, sign / math.sqrt(N), dtype=complex)
    angle = (2 * t + 1) * math.asin(math.sqrt(k / N))
    return np.where(
        table, math.sin(angle) / math.sqrt(k), math.cos(angle) / math.sqrt(N - k)
    ).astype(complex)


class _Space:
    """Padded position/value tables of one domain, shared by many searches."""

    def __init__(self, instance: SortInstance, domain: SearchDomain):
        self.instance = instance
        self.domain = domain
        self.width = domain.index_bits
        self.positions = _domain_table(domain.positions, self.width)
        self.values = _values_for(instance, self.positions)
        self.valid = self.positions >= 0
        lo, hi = domain.span
        self._contiguous = hi - lo == domain.size

    def table(self, predicate: Predicate) -> np.ndarray:
        block = predicate.block
        if block is not None and not (
            self._contiguous and block[0] <= self.domain.span[0] and block[1] >= self.domain.span[1]
        ):
            return predicate.table(self.instance, self.positions, self.values)
        v = self.values
        t = self.instance.values[predicate.threshold]
        if predicate.kind == "lt":
            hit = v < t
        elif predicate.kind == "gt":
            hit = v > t
        else:
            hit = (v < t) & (v > self.instance.values[predicate.lower])
        return hit & self.valid


class _Search:
    """One marked set over a padded domain, reusable across Grover runs."""

    def __init__(self, space: _Space, predicate: Predicate, engine: str):
        if engine not in ENGINES:
            raise ValueError(f"unknown engine {engine!r}")
        self.space = space
        self.predicate = predicate
        self.engine = engine
        self.width = space.width
        self.table = space.table(predicate)
        self.N = len(self.table)
        self.k = int(np.count_nonzero(self.table))
        self._theta = math.asin(math.sqrt(self.k / self.N))

    def success_probability(self, t: int) -> float:
        return math.sin((2 * t + 1) * self._theta) ** 2

    def run(self, t: int, rng: np.random.Generator, counter: QueryCounter) -> int:
        """Return the measured register value after ``t`` iterations."""
        if self.engine == "statevector":
            return self._run_statevector(t, rng, counter)
        counter.tick(self.predicate.cost * t)
        if self.k and rng.random() < self.success_probability(t):
            pool = np.flatnonzero(self.table)
        else:
            pool = np.flatnonzero(~self.table)
        return int(pool[int(rng.random() * len(pool))])

    def _run_statevector(self, t, rng, counter):
        state = new_state(self.width)
        for q in range(self.width):
            apply_hadamard(state, q)
        reg = (0, self.width)
        for _ in range(t):
            phase_mark(
                state, reg, self.predicate, self.space.instance, counter,
                self.space.domain.positions,
            )
            apply_diffusion(state, reg)
        outcome, _ = measure(state, reg, rng)
        return outcome

    def position(self, value: int) -> Optional[int]:
        p = int(self.space.positions[value])
        return p if p >= 0 else None


def grover_fixed(
    instance: SortInstance,
    domain: SearchDomain,
    predicate: Predicate,
    t: int,
    rng: np.random.Generator,
    counter: QueryCounter,
    engine: str = "statevector",
) -> Optional[int]:
    """Run ``t`` Grover iterations and measure.

    Returns the measured instance position, or ``None`` when a padding
    index is measured.
    """
    if t < 0:
        raise ValueError("iteration count must be non-negative")
    search = _Search(_Space(instance, domain), predicate, engine)
    return search.position(search.run(t, rng, counter))


def grover_unknown(
    instance: SortInstance,
    domain: SearchDomain,
    predicate: Predicate,
    rng: np.random.Generator,
    counter: QueryCounter,
    budget: int,
    engine: str = "subspace",
    _space: Optional[_Space] = None,
) -> Optional[int]:
    """Exponential search for a marked position when the count is unknown.

    Each round draws an iteration count uniformly below ``m``, measures, and
    spends one verification query on the candidate; ``m`` grows by 6/5 up
    to sqrt(N). Never spends more than ``budget`` queries.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    search = _Search(_space or _Space(instance, domain), predicate, engine)
    if engine == "subspace":
        return _bbht_subspace(search, rng, counter, budget)
    cost = predicate.cost
    cap = math.sqrt(search.N)
    start = counter.total
    m = 1.0
    while True:
        remaining = budget - (counter.total - start)
        if remaining < cost:
            return None
        j = min(int(rng.random() * m), remaining // cost - 1)
        value = search.run(j, rng, counter)
        counter.tick(cost)
        if search.table[value]:
            return search.position(value)
        m = min(config.BBHT_LAMBDA * m, cap)


def _bbht_subspace(search: _Search, rng, counter, budget) -> Optional[int]:
    # Same loop as the generic path with the Grover run inlined. A failed
    # round's measured value is never used, so it is not drawn. With nothing
    # marked every round fails and the loop just exhausts the budget.
    cost = search.predicate.cost
    k = search.k
    if k == 0:
        counter.tick(budget - budget % cost)
        return None
    cap = math.sqrt(search.N)
    lam = config.BBHT_LAMBDA
    theta = search._theta
    draws = rng.random(24).tolist()
    d = 0
    spent, m = 0, 1.0
    while budget - spent >= cost:
        if d + 3 > len(draws):
            draws = rng.random(24).tolist()
            d = 0
        j = int(draws[d] * m)
        limit = (budget - spent) // cost - 1
        if j > limit:
            j = limit
        spent += cost * (j + 1)
        if draws[d + 1] < math.sin((2 * j + 1) * theta) ** 2:
            counter.tick(spent)
            marked = np.flatnonzero(search.table)
            return search.position(int(marked[int(draws[d + 2] * k)]))
        d += 2
        m = lam * m
        if m > cap:
            m = cap
    counter.tick(spent)
    return None


def dh_budget(domain_size: int, c_dh: float) -> int:
    return int(math.floor(c_dh * math.sqrt(domain_size) + 1e-9))


def durr_hoyer_min(
    instance: SortInstance,
    domain: SearchDomain,
    rng: np.random.Generator,
    counter: QueryCounter,
    c_dh: float = config.DEFAULT_C_DH,
    above: Optional[int] = None,
    engine: str = "subspace",
    _space: Optional[_Space] = None,
) -> MinFindResult:
    """Threshold-descent minimum finding within a query budget of c_dh*sqrt(N).

    With ``above`` set, the search is over domain positions whose value
    exceeds ``x[above]``; a starting point is first found by exponential
    search, and the result is ``None`` if none turns up.
    """
    start = counter.total
    ws = workspace_qubits(domain)
    if domain.size == 1 and above is None:
        return MinFindResult(domain.positions[0], 0, ws)
    budget = dh_budget(domain.size, c_dh)
    span = domain.span
    space = _space or _Space(instance, domain)

    if above is None:
        t = domain.positions[int(rng.random() * domain.size)]
    else:
        base = Predicate("gt", above, block=span)
        t = grover_unknown(instance, domain, base, rng, counter, budget, engine, space)
        if t is None:
            return MinFindResult(None, counter.total - start, ws)

    while True:
        if above is None:
            pred = Predicate("lt", t, block=span)
        else:
            pred = Predicate("between", t, lower=above, block=span)
        remaining = budget - (counter.total - start)
        if remaining < pred.cost:
            break
        found = grover_unknown(instance, domain, pred, rng, counter, remaining, engine, space)
        if found is not None:
            t = found
    return MinFindResult(t, counter.total - start, ws)


def repetitions(eps: float) -> int:
    if not 0 < eps <= 0.5:
        raise ValueError("error bound must lie in (0, 1/2]")
    return max(1, math.ceil(math.log2(1 / eps) - 1e-12))


def min_find(
    instance: SortInstance,
    domain: SearchDomain,
    eps: float,
    rng: np.random.Generator,
    counter: QueryCounter,
    c_dh: float = config.DEFAULT_C_DH,
    above: Optional[int] = None,
    engine: str = "subspace",
) -> MinFindResult:
    """Repeat Dürr–Høyer ceil(log2(1/eps)) times and keep the smallest result.

    The candidates are compared with counted comparison queries.
    """
    start = counter.total
    candidates = []
    space = _Space(instance, domain)
    for _ in range(repetitions(eps)):
        res = durr_hoyer_min(instance, domain, rng, counter, c_dh, above, engine, space)
        if res.index is not None:
            candidates.append(res.index)
    best = candidates[0] if candidates else None
    for c in candidates[1:]:
        if instance.less(c, best, counter):
            best = c
    return MinFindResult(best, counter.total - start, workspace_qubits(domain))


def min_above(
    instance: SortInstance,
    block: SearchDomain,
    threshold: int,
    eps: float,
    rng: np.random.Generator,
    counter: QueryCounter,
    c_dh: float = config.DEFAULT_C_DH,
    engine: str = "subspace",
) -> MinFindResult:
    """Position of the smallest block value above ``x[threshold]``.

    Returns a result with ``exhausted=True`` when no such value is found;
    a found candidate is confirmed with one final comparison query.
    """
    start = counter.total
    res = min_find(instance, block, eps, rng, counter, c_dh, above=threshold, engine=engine)
    if res.index is None or not instance.less(threshold, res.index, counter):
        return MinFindResult(None, counter.total - start, res.workspace_qubits, exhausted=True)
    return MinFindResult(res.index, counter.total - start, res.workspace_qubits)


def _tie_key(x: Any):
    return (0, x) if isinstance(x, (int, float, tuple, str)) else (1, repr(x))


def boost_majority(
    subroutine: Callable[[np.random.Generator, QueryCounter], Any],
    l: int,
    rng: np.random.Generator,
    counter: QueryCounter,
) -> Any:
    """Run ``subroutine`` ``l`` times and return its most frequent output.

    Ties go to the smallest output.
    """
    if l < 1 or l % 2 == 0:
        raise ValueError("l must be a positive odd integer")
    votes = Counter(subroutine(rng, counter) for _ in range(l))
    top = max(votes.values())
    return min((o for o, c in votes.items() if c == top), key=_tie_key)


def brute_force_argmin(instance: SortInstance, positions: Sequence[int]) -> int:
    return min(positions, key=lambda i: instance.values[i])
