"""Classical contrast: the same block/heap control with linear scans."""

from __future__ import annotations

import time
from typing import Optional

from . import config
from .oracle import QueryCounter, SortInstance
from .qsort import (
    BlockPlan,
    OutputRecord,
    ResourceReport,
    SortOutput,
    SpaceLedger,
    ceil_log2,
    heap_build,
    heap_extract_min,
    heap_insert,
    plan_blocks,
)


def _scan_min(instance, lo, hi, counter) -> int:
    """Tournament over the block: ``hi - lo - 1`` comparisons."""
    best = lo
    for i in range(lo + 1, hi):
        if instance.less(i, best, counter):
            best = i
    return best


def _scan_successor(instance, lo, hi, emitted, floor_value, counter) -> Optional[int]:
    """Read every other block value once; smallest above ``floor_value``."""
    best, best_value = None, None
    for i in range(lo, hi):
        if i == emitted:
            continue
        v = instance.read(i, counter)
        if v > floor_value and (best is None or v < best_value):
            best, best_value = i, v
    return best


def classical_baseline_sort(
    instance: SortInstance,
    S: int,
    counter: Optional[QueryCounter] = None,
    c: float = config.DEFAULT_PLAN_C,
    plan: Optional[BlockPlan] = None,
) -> tuple[SortOutput, ResourceReport]:
    """Exact sort; each block minimum or successor costs ``block_size - 1`` queries."""
    counter = counter or QueryCounter()
    start = counter.total
    n = instance.n
    plan = plan or plan_blocks(n, S, c)
    ledger = SpaceLedger()
    phases = {"step1_minima": 0, "heap": 0, "output_read": 0, "step3c_successor": 0}
    t0 = time.perf_counter()
    ledger.allocate("heap", plan.heap_bits)
    # Scan pointer, best position, best value and the previous output value.
    ledger.allocate(
        "scan_control", 2 * ceil_log2(plan.block_size) + 2 * instance.value_bits
    )

    mark = counter.total
    minima = [(_scan_min(instance, lo, hi, counter), k) for k, (lo, hi) in enumerate(plan.blocks)]
    phases["step1_minima"] += counter.total - mark

    mark = counter.total
    heap = heap_build(minima, instance, counter)
    phases["heap"] += counter.total - mark

    records = []
    for rank in range(1, n + 1):
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
        nxt = _scan_successor(instance, *plan.blocks[k], j, value, counter)
        phases["step3c_successor"] += counter.total - mark
        if nxt is not None:
            mark = counter.total
            heap_insert(heap, (nxt, k), instance, counter)
            phases["heap"] += counter.total - mark

    report = ResourceReport(
        T_queries=counter.total - start,
        S_space=ledger.peak,
        space_itemization=dict(ledger.peak_items),
        phase_breakdown=phases,
        slice_marks=list(counter.slice_marks),
        wall_time=time.perf_counter() - t0,
    )
    return SortOutput(records), report
