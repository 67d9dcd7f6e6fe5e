"""Space-bounded quantum sorting: block minima kept in a heap, successors
found by quantum minimum finding.

The input is split into ``b = floor(S / (c log2 n))`` blocks. Each block's
minimum position goes into a binary heap keyed by value. Ranks are emitted
in increasing order: pop the smallest block minimum, output it, then search
its block for the smallest value above it and push that back. A block whose
successor search comes back empty is retired.

Every heap key comparison is one counted comparison query. Reading the
value of an emitted position is one counted access query.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import config
from .oracle import QueryCounter, RankOracle, SortInstance
from .search import SearchDomain, min_above, min_find, workspace_qubits


class PlanError(ValueError):
    pass


class SpaceRangeWarning(UserWarning):
    """Space bound outside the range where the time bound is claimed."""


@dataclass(frozen=True)
class BlockPlan:
    n: int
    S: int
    c: float
    b: int
    block_size: int
    blocks: tuple[tuple[int, int], ...]

    def domain(self, k: int) -> SearchDomain:
        return SearchDomain.block(*self.blocks[k])

    @property
    def heap_bits(self) -> int:
        return self.b * (ceil_log2(self.n) + ceil_log2(self.b))


def ceil_log2(x: int) -> int:
    return math.ceil(math.log2(x)) if x > 1 else 0


def plan_blocks(n: int, S: int, c: float = config.DEFAULT_PLAN_C) -> BlockPlan:
    """Split ``0..n-1`` into ``floor(S / (c log2 n))`` near-equal blocks.

    Block sizes differ by at most one; ``block_size`` is the largest.
    """
    if n < 2:
        raise PlanError("need n >= 2")
    if c <= 0 or S <= 0:
        raise PlanError("S and c must be positive")
    b = int(math.floor(S / (c * math.log2(n)) + 1e-9))
    if b < 1:
        raise PlanError(f"S={S} is too small for one block (need S >= {c * math.log2(n):.3g})")
    if S > n / math.log2(n):
        warnings.warn(
            f"S={S} exceeds n/log2(n)={n / math.log2(n):.3g}", SpaceRangeWarning, stacklevel=2
        )
    b = min(b, n)
    base, extra = divmod(n, b)
    blocks, lo = [], 0
    for k in range(b):
        hi = lo + base + (1 if k < extra else 0)
        blocks.append((lo, hi))
        lo = hi
    return BlockPlan(n, S, c, b, math.ceil(n / b), tuple(blocks))


# -- heap with counted comparisons ---------------------------------------------


@dataclass
class HeapState:
    """Binary min-heap of ``(position, block)`` entries keyed by ``x[position]``."""

    entries: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def peek(self) -> tuple[int, int]:
        return self.entries[0]


def _less(heap: HeapState, a: int, b: int, instance: SortInstance, counter) -> bool:
    return instance.less(heap.entries[a][0], heap.entries[b][0], counter)


def _sift_down(heap: HeapState, i: int, instance, counter) -> None:
    e = heap.entries
    size = len(e)
    while True:
        left, right = 2 * i + 1, 2 * i + 2
        if left >= size:
            return
        child = left
        if right < size and _less(heap, right, left, instance, counter):
            child = right
        if not _less(heap, child, i, instance, counter):
            return
        e[i], e[child] = e[child], e[i]
        i = child


def _sift_up(heap: HeapState, i: int, instance, counter) -> None:
    e = heap.entries
    while i > 0:
        parent = (i - 1) // 2
        if not _less(heap, i, parent, instance, counter):
            return
        e[i], e[parent] = e[parent], e[i]
        i = parent


def heap_build(minima, instance: SortInstance, counter: QueryCounter) -> HeapState:
    """Bottom-up heapify; at most ``2 * len(minima)`` comparisons."""
    heap = HeapState(list(minima))
    for i in range(len(heap) // 2 - 1, -1, -1):
        _sift_down(heap, i, instance, counter)
    return heap


def heap_extract_min(heap: HeapState, instance: SortInstance, counter: QueryCounter):
    if not heap.entries:
        raise IndexError("extract from empty heap")
    e = heap.entries
    top = e[0]
    last = e.pop()
    if e:
        e[0] = last
        _sift_down(heap, 0, instance, counter)
    return top


def heap_insert(heap: HeapState, entry, instance: SortInstance, counter: QueryCounter) -> None:
    heap.entries.append(entry)
    _sift_up(heap, len(heap) - 1, instance, counter)


# -- space ledger ---------------------------------------------------------------


class SpaceLedger:
    """Tracks live (qu)bits by name and remembers the itemisation at the peak."""

    def __init__(self):
        self.live: dict[str, int] = {}
        self.peak = 0
        self.peak_items: dict[str, int] = {}

    def allocate(self, name: str, bits: int) -> None:
        if name in self.live:
            raise ValueError(f"{name!r} already allocated")
        self.live[name] = bits
        current = sum(self.live.values())
        if current > self.peak:
            self.peak = current
            self.peak_items = dict(self.live)

    def free(self, name: str) -> None:
        del self.live[name]

    @property
    def current(self) -> int:
        return sum(self.live.values())


def _allocate_search(ledger: SpaceLedger, domain: SearchDomain) -> None:
    ledger.allocate("minfind_workspace", workspace_qubits(domain))
    # DH threshold and best-so-far candidate, both block-local positions.
    ledger.allocate("minfind_control", 2 * domain.index_bits)


def _free_search(ledger: SpaceLedger) -> None:
    ledger.free("minfind_workspace")
    ledger.free("minfind_control")


# -- the sort ---------------------------------------------------------------------


@dataclass(frozen=True)
class OutputRecord:
    rank: int
    value: Optional[int]
    index: Optional[int]


@dataclass
class SortOutput:
    records: list[OutputRecord]

    def pairs(self) -> list[tuple[Optional[int], Optional[int]]]:
        return [(r.value, r.index) for r in self.records]


@dataclass
class ResourceReport:
    T_queries: int
    S_space: int
    space_itemization: dict[str, int]
    phase_breakdown: dict[str, int]
    slice_marks: list[tuple[int, str]]
    wall_time: float
    retired_blocks: int = 0


@dataclass(frozen=True)
class SortConfig:
    c: float = config.DEFAULT_PLAN_C
    c_dh: float = config.DEFAULT_C_DH
    engine: str = "subspace"
    eps_initial: Optional[float] = None
    eps_successor: Optional[float] = None


def _eps(value: Optional[float], default: float) -> float:
    return min(0.5, default if value is None else value)


def quantum_sort(
    instance: SortInstance,
    S: int,
    rng: np.random.Generator,
    cfg: Optional[SortConfig] = None,
    plan: Optional[BlockPlan] = None,
) -> tuple[SortOutput, ResourceReport]:
    cfg = cfg or SortConfig()
    n = instance.n
    plan = plan or plan_blocks(n, S, cfg.c)
    eps1 = _eps(cfg.eps_initial, 1 / S**2)
    eps3 = _eps(cfg.eps_successor, 1 / n**2)

    counter = QueryCounter()
    ledger = SpaceLedger()
    phases = {"step1_minima": 0, "heap": 0, "output_read": 0, "step3c_successor": 0}
    t0 = time.perf_counter()
    ledger.allocate("heap", plan.heap_bits)

    minima = []
    mark = counter.total
    for k in range(plan.b):
        domain = plan.domain(k)
        _allocate_search(ledger, domain)
        res = min_find(instance, domain, eps1, rng, counter, cfg.c_dh, engine=cfg.engine)
        _free_search(ledger)
        minima.append((res.index, k))
    phases["step1_minima"] += counter.total - mark

    mark = counter.total
    heap = heap_build(minima, instance, counter)
    phases["heap"] += counter.total - mark

    records, retired = [], 0
    for rank in range(1, n + 1):
        if not heap:
            records.append(OutputRecord(rank, None, None))
            counter.mark_slice(f"output:{rank}")
            continue
        mark = counter.total
        j, k = heap.peek()
        value = instance.read(j, counter)
        phases["output_read"] += counter.total - mark
        records.append(OutputRecord(rank, value, j))
        counter.mark_slice(f"output:{rank}")

        mark = counter.total
        heap_extract_min(heap, instance, counter)
        phases["heap"] += counter.total - mark

        mark = counter.total
        domain = plan.domain(k)
        _allocate_search(ledger, domain)
        res = min_above(instance, domain, j, eps3, rng, counter, cfg.c_dh, engine=cfg.engine)
        _free_search(ledger)
        phases["step3c_successor"] += counter.total - mark

        if res.exhausted:
            retired += 1
            continue
        mark = counter.total
        heap_insert(heap, (res.index, k), instance, counter)
        phases["heap"] += counter.total - mark

    ledger.free("heap")
    report = ResourceReport(
        T_queries=counter.total,
        S_space=ledger.peak,
        space_itemization=dict(ledger.peak_items),
        phase_breakdown=phases,
        slice_marks=list(counter.slice_marks),
        wall_time=time.perf_counter() - t0,
        retired_blocks=retired,
    )
    return SortOutput(records), report


def verify_output(
    instance: SortInstance, output: SortOutput, rank_oracle: Optional[RankOracle] = None
) -> tuple[bool, list[bool]]:
    """Record-level comparison against the true sorted order."""
    oracle = rank_oracle or RankOracle(instance)
    flags = [
        rec.value == oracle.min_value(rec.rank) and rec.index == oracle.position(rec.rank)
        for rec in output.records
    ]
    return all(flags) and len(flags) == instance.n, flags
