"""Desk-scale numerical checks of the lower-bound toolkit.

* replacing S qubits of input-dependent advice by the maximally mixed
  state keeps at least a ``2**-S`` fraction of the success probability;
* query magnitude: all but ``T**2 / alpha**2`` positions can be changed
  without moving the final state more than ``2 alpha`` in trace norm;
* the same with the final measurement conditioned on an outcome ``F``;
* cutting a sort run's query timeline into slices of ``delta sqrt(n)``
  queries and counting the outputs in each.

Every experiment returns a plain dict with the measured quantities, the
bound it was compared against, and a ``passed`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import config, core
from .core import (
    StateVector,
    apply_cnot,
    apply_hadamard,
    apply_single,
    new_state,
    pure_trace_distance,
    random_unitary,
    reduced_density,
    register_values,
)
from .oracle import QueryCounter, SortInstance, access_query

Body = Callable[[StateVector, int, SortInstance, QueryCounter], StateVector]


@dataclass
class AdvicedAlgorithm:
    """Advice preparation followed by an input-independent gate sequence.

    The register file is ``[advice (S)][work]``. ``body`` receives the state,
    the offset of the advice register (always 0 here), the input and a
    counter, and may touch the input only through oracle gates. ``output``
    is the measured ``(start, width)`` range within that file.
    """

    advice_qubits: int
    work_qubits: int
    prepare_advice: Callable[[SortInstance], np.ndarray]
    body: Body
    output: tuple[int, int]
    success: Callable[[SortInstance, int], bool]
    name: str = ""

    @property
    def qubits(self) -> int:
        return self.advice_qubits + self.work_qubits


def mixed_advice_state(S: int, extra: int) -> StateVector:
    """``[advice S][work extra][purifier S]`` with the advice maximally mixed.

    Hadamards on the advice qubits, then CNOTs onto the purifier; tracing
    out the purifier leaves ``I / 2**S`` on the advice.
    """
    state = new_state(2 * S + extra)
    for i in range(S):
        apply_hadamard(state, i)
    for i in range(S):
        apply_cnot(state, i, S + extra + i)
    return state


def _success_probability(alg: AdvicedAlgorithm, x: SortInstance, state: StateVector) -> float:
    start, width = alg.output
    probs = state.probabilities().reshape(1 << start, 1 << width, -1).sum(axis=(0, 2))
    return float(sum(p for o, p in enumerate(probs) if alg.success(x, o)))


def run_adviced(alg: AdvicedAlgorithm, x: SortInstance, mixed: bool) -> float:
    """Exact success probability with true or maximally mixed advice."""
    S, W = alg.advice_qubits, alg.work_qubits
    counter = QueryCounter()
    if mixed:
        state = mixed_advice_state(S, W)
    else:
        advice = np.asarray(alg.prepare_advice(x), dtype=complex)
        advice = advice / np.linalg.norm(advice)
        work = np.zeros(1 << W, dtype=complex)
        work[0] = 1
        state = StateVector(S + W, np.kron(advice, work))
    alg.body(state, 0, x, counter)
    return _success_probability(alg, x, state)


def union_bound_experiment(
    alg: AdvicedAlgorithm,
    inputs: Sequence[SortInstance],
    trials: int,
    rng: np.random.Generator,
) -> dict:
    """Compare success with true advice against success with mixed advice.

    Success rates are estimated from ``trials`` Born-rule samples per input
    and per mode; the exact probabilities are reported alongside.
    """
    S = alg.advice_qubits
    rows = []
    for x in inputs:
        exact_adv = run_adviced(alg, x, mixed=False)
        exact_mix = run_adviced(alg, x, mixed=True)
        emp_adv = rng.binomial(trials, min(1.0, exact_adv)) / trials
        emp_mix = rng.binomial(trials, min(1.0, exact_mix)) / trials
        sigma = math.sqrt(
            emp_mix * (1 - emp_mix) / trials + emp_adv * (1 - emp_adv) / trials / 4**S
        )
        bound = emp_adv / 2**S
        rows.append(
            {
                "input": list(x.values),
                "p_advice": emp_adv,
                "p_mixed": emp_mix,
                "p_advice_exact": exact_adv,
                "p_mixed_exact": exact_mix,
                "bound": bound,
                "sigma": sigma,
                "passed": emp_mix >= bound - 3 * sigma
                and exact_mix >= exact_adv / 2**S - config.TOLERANCE,
            }
        )
    return {
        "experiment": "union_bound",
        "name": alg.name,
        "S": S,
        "trials": trials,
        "p_advice": float(np.mean([r["p_advice"] for r in rows])),
        "p_mixed": float(np.mean([r["p_mixed"] for r in rows])),
        "rows": rows,
        "passed": all(r["passed"] for r in rows),
    }


def mixed_state_check(S: int) -> dict:
    state = mixed_advice_state(S, 0)
    rho = reduced_density(state, range(S)).entries
    err = float(np.abs(rho - np.eye(1 << S) / (1 << S)).max())
    return {
        "experiment": "mixed_state_preparation",
        "S": S,
        "max_error": err,
        "bound": config.TOLERANCE,
        "passed": err <= config.TOLERANCE,
    }


def decomposition_check(m: int, count: int, rng: np.random.Generator) -> dict:
    """Split ``I/2^m`` into ``rho/2^m`` plus a state, for random ``rho``."""
    tol = config.TOLERANCE
    d = 1 << m
    worst = {"hermitian": 0.0, "trace": 0.0, "reconstruction": 0.0}
    min_eig = math.inf
    for _ in range(count):
        rho = core.random_density(m, rng).entries
        sigma = core.mix_decompose(rho, m).entries
        worst["hermitian"] = max(worst["hermitian"], float(np.abs(sigma - sigma.conj().T).max()))
        worst["trace"] = max(worst["trace"], abs(complex(np.trace(sigma)) - 1))
        rebuilt = rho / d + (1 - 1 / d) * sigma
        worst["reconstruction"] = max(
            worst["reconstruction"], float(np.abs(rebuilt - np.eye(d) / d).max())
        )
        min_eig = min(min_eig, core.DensityMatrix(sigma, validate=False).min_eigenvalue())
    return {
        "experiment": "mixed_decomposition",
        "m": m,
        "count": count,
        "max_errors": worst,
        "min_eigenvalue": min_eig,
        "bound": tol,
        "passed": max(worst.values()) <= tol and min_eig >= -tol,
    }


def helstrom_check(m: int, pairs: int, measurements: int, rng: np.random.Generator) -> dict:
    """Helstrom l1 equals the trace distance; random measurements stay below it."""
    tol = config.TOLERANCE
    gap, overshoot = 0.0, -math.inf
    for _ in range(pairs):
        a, b = core.random_density(m, rng), core.random_density(m, rng)
        norm = core.trace_norm(a.entries - b.entries)
        _, l1 = core.helstrom_measurement(a, b)
        gap = max(gap, abs(l1 - norm))
        for _ in range(measurements):
            meas = core.random_projective_measurement(1 << m, rng)
            got = float(np.abs(meas.distribution(a) - meas.distribution(b)).sum())
            overshoot = max(overshoot, got - norm)
    return {
        "experiment": "helstrom",
        "m": m,
        "pairs": pairs,
        "measurements_per_pair": measurements,
        "max_gap": gap,
        "max_overshoot": overshoot,
        "bound": tol,
        "passed": gap <= tol and overshoot <= tol,
    }


# -- worked union-bound fixtures -------------------------------------------------


def _answer_bit(x: SortInstance) -> int:
    return int(x.values[0] < x.values[1])


def answer_bit_algorithm() -> AdvicedAlgorithm:
    """Advice is the answer bit; the body never queries and outputs the advice."""
    return AdvicedAlgorithm(
        advice_qubits=1,
        work_qubits=1,
        prepare_advice=lambda x: np.eye(2)[_answer_bit(x)],
        body=lambda state, off, x, counter: apply_cnot(state, off, off + 1),
        output=(1, 1),
        success=lambda x, o: o == _answer_bit(x),
        name="answer_bit",
    )


def unused_advice_algorithm(value_bits: int = 5) -> AdvicedAlgorithm:
    """Reads ``x_0`` through the access oracle and outputs it; advice is ignored."""
    index_bits = 2

    def body(state, off, x, counter):
        return access_query(state, (off + 1, index_bits), (off + 1 + index_bits, value_bits), x, counter)

    return AdvicedAlgorithm(
        advice_qubits=1,
        work_qubits=index_bits + value_bits,
        prepare_advice=lambda x: np.array([1, 1j]) / math.sqrt(2),
        body=body,
        output=(1 + index_bits, value_bits),
        success=lambda x, o: o == x.values[0],
        name="unused_advice",
    )


def argmin_advice_algorithm() -> AdvicedAlgorithm:
    """Advice is the position of the minimum of four values; the body outputs it."""

    def argmin(x):
        return int(np.argmin(x.values))

    def body(state, off, x, counter):
        apply_cnot(state, off, off + 2)
        return apply_cnot(state, off + 1, off + 3)

    return AdvicedAlgorithm(
        advice_qubits=2,
        work_qubits=2,
        prepare_advice=lambda x: np.eye(4)[argmin(x)],
        body=body,
        output=(2, 2),
        success=lambda x, o: o == argmin(x),
        name="argmin_advice",
    )


def random_adviced_algorithm(seed: int, n: int = 4, range_bound: int = 16) -> AdvicedAlgorithm:
    """A seeded fixture: noisy advice about a target, copied then scrambled by queries."""
    gen = np.random.default_rng(seed)
    S = int(gen.integers(1, 4))
    index_bits = max(1, math.ceil(math.log2(n)))
    value_bits = math.ceil(math.log2(range_bound + 1))
    W = index_bits + value_bits + S
    idx = (S, index_bits)
    val = (S + index_bits, value_bits)
    out = (S + index_bits + value_bits, S)
    noise = float(gen.uniform(0, 1.5))
    gates = [
        (int(gen.integers(0, S + index_bits)), random_unitary(2, gen))
        for _ in range(int(gen.integers(1, 4)))
    ]
    queries = int(gen.integers(1, 3))
    twist = [random_unitary(2, gen) for _ in range(S)]
    twist_angle = float(gen.uniform(0, 0.6))

    def target(x):
        return int(sum(x.values)) % (1 << S)

    def advice(x):
        local = np.random.default_rng([seed, *x.values])
        v = np.eye(1 << S)[target(x)].astype(complex)
        v += noise * (local.normal(size=1 << S) + 1j * local.normal(size=1 << S))
        return v / np.linalg.norm(v)

    def body(state, off, x, counter):
        for i in range(index_bits):
            apply_hadamard(state, off + idx[0] + i)
        for q, u in gates:
            apply_single(state, u, off + q)
        for i in range(S):
            apply_cnot(state, off + i, off + out[0] + i)
        for _ in range(queries):
            access_query(state, (off + idx[0], idx[1]), (off + val[0], val[1]), x, counter)
            apply_cnot(state, off + val[0] + val[1] - 1, off + out[0])
        for i, u in enumerate(twist):
            # Blend each output qubit slightly toward a random unitary.
            blend = np.linalg.qr((1 - twist_angle) * np.eye(2) + twist_angle * u)[0]
            apply_single(state, blend, off + out[0] + i)
        return state

    return AdvicedAlgorithm(
        advice_qubits=S,
        work_qubits=W,
        prepare_advice=advice,
        body=body,
        output=out,
        success=lambda x, o: o == target(x),
        name=f"random_{seed}",
    )


# -- query magnitude / adversary scans -----------------------------------------

QueryBody = Callable[[SortInstance, QueryCounter], StateVector]


def random_query_body(n: int, T: int, seed: int, range_bound: int = 16) -> QueryBody:
    """Fixed random circuit with ``T`` access queries on ``[index][value][aux]``."""
    gen = np.random.default_rng(seed)
    index_bits = max(1, math.ceil(math.log2(n)))
    value_bits = math.ceil(math.log2(range_bound + 1))
    q = index_bits + value_bits + 1
    layers = []
    for _ in range(T + 1):
        singles = [(int(k), random_unitary(2, gen)) for k in gen.choice(q, size=min(q, 4), replace=False)]
        pairs = [tuple(int(v) for v in gen.choice(q, size=2, replace=False)) for _ in range(2)]
        layers.append((singles, pairs))

    def body(x: SortInstance, counter: QueryCounter) -> StateVector:
        state = new_state(q)
        for i in range(index_bits):
            apply_hadamard(state, i)
        for t, (singles, pairs) in enumerate(layers):
            for k, u in singles:
                apply_single(state, u, k)
            for c, tq in pairs:
                apply_cnot(state, c, tq)
            if t < T:
                access_query(state, (0, index_bits), (index_bits, value_bits), x, counter)
        return state

    body.queries = T
    body.num_qubits = q
    return body


def uniform_single_query_body(n: int = 4, range_bound: int = 16) -> QueryBody:
    index_bits = max(1, math.ceil(math.log2(n)))
    value_bits = math.ceil(math.log2(range_bound + 1))

    def body(x, counter):
        state = new_state(index_bits + value_bits)
        for i in range(index_bits):
            apply_hadamard(state, i)
        return access_query(state, (0, index_bits), (index_bits, value_bits), x, counter)

    return body


def replacements(x: SortInstance, position: int) -> list[int]:
    """Values that may replace ``x[position]`` while keeping the input distinct."""
    taken = set(x.values)
    return [v for v in range(1, x.range_bound + 1) if v not in taken]


def hybrid_bound(n: int, T: int, alpha: float) -> float:
    """Good-position count guaranteed by the hybrid argument for an XOR oracle.

    A changed value moves the queried branch by at most 2 in norm, so
    ``||psi - psi'|| <= 2 sqrt(T m_i)`` and the trace distance is at most
    twice that. Positions with ``m_i > alpha^2 / (4T)`` number fewer than
    ``4 T^2 / alpha^2``.
    """
    return n - 4 * T**2 / alpha**2


def query_magnitude_scan(body: QueryBody, x: SortInstance, alpha: float | Sequence[float]) -> dict:
    """Trace distance between final states on ``x`` and every ``x'(i)``.

    ``alpha`` may be a list, in which case one verdict per value is given.
    """
    counter = QueryCounter()
    counter.track_magnitudes(x.n)
    base = body(x, counter)
    T = counter.total
    per_position = []
    symmetric = True
    for i in range(x.n):
        worst = 0.0
        for v in replacements(x, i):
            other = body(x.replaced(i, v), QueryCounter())
            d = pure_trace_distance(base, other)
            symmetric &= abs(d - pure_trace_distance(other, base)) <= config.TOLERANCE
            worst = max(worst, d)
        per_position.append(worst)
    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    verdicts = []
    for a in alphas:
        good = [i for i, d in enumerate(per_position) if d <= 2 * a + config.TOLERANCE]
        bound = x.n - T**2 / a**2
        verdicts.append(
            {"alpha": a, "good_positions": good, "size": len(good), "bound": bound,
             "passed": len(good) >= bound,
             "hybrid_bound": hybrid_bound(x.n, T, a),
             "hybrid_passed": len(good) >= hybrid_bound(x.n, T, a)}
        )
    return {
        "experiment": "query_magnitude_scan",
        "input": list(x.values),
        "T": T,
        "query_magnitudes": counter.magnitudes.tolist(),
        "max_distance": per_position,
        "symmetric": symmetric,
        "verdicts": verdicts,
        "passed": symmetric and all(v["passed"] for v in verdicts),
    }


def conditioned_adversary_check(
    body: QueryBody,
    x: SortInstance,
    measured: Optional[tuple[int, int]],
    outcome: int,
    event: Callable[[np.ndarray], np.ndarray],
    alpha: float | Sequence[float],
) -> dict:
    """Joint probability of outcome ``F`` and event ``E`` under single-position changes.

    ``measured``/``outcome`` fix ``F`` (``measured=None`` means ``F`` is
    certain). ``event`` maps the array of basis indices to a boolean mask.
    """
    counter = QueryCounter()
    base = body(x, counter)
    T = counter.total
    q = base.num_qubits
    idx = np.arange(1 << q)
    in_f = np.ones(1 << q, bool) if measured is None else register_values(q, measured) == outcome
    joint_mask = in_f & np.asarray(event(idx), bool)

    probs = base.probabilities()
    q_x = float(probs[in_f].sum())
    p_x = float(probs[joint_mask].sum() / q_x) if q_x > 0 else 0.0

    worst_joint = []
    for i in range(x.n):
        worst = 1.0
        for v in replacements(x, i):
            other = body(x.replaced(i, v), QueryCounter())
            worst = min(worst, float(other.probabilities()[joint_mask].sum()))
        worst_joint.append(worst)

    alphas = [alpha] if np.isscalar(alpha) else list(alpha)
    verdicts = []
    for a in alphas:
        threshold = q_x * (p_x - a)
        good = [i for i, j in enumerate(worst_joint) if j >= threshold - config.TOLERANCE]
        bound = x.n - T**2 / a**2
        verdicts.append(
            {"alpha": a, "threshold": threshold, "good_positions": good, "size": len(good),
             "bound": bound, "passed": len(good) >= bound,
             # The joint probability drops by at most half the trace distance.
             "hybrid_bound": hybrid_bound(x.n, T, a * q_x) if q_x > 0 else -math.inf,
             "hybrid_passed": q_x == 0 or len(good) >= hybrid_bound(x.n, T, a * q_x)}
        )
    return {
        "experiment": "conditioned_adversary",
        "input": list(x.values),
        "T": T,
        "q_x": q_x,
        "p_x": p_x,
        "min_joint": worst_joint,
        "verdicts": verdicts,
        "passed": all(v["passed"] for v in verdicts),
    }


# -- slicing --------------------------------------------------------------------


def slice_report(
    slice_marks: Sequence[tuple[int, str]], T: int, n: int, delta: float = 1.0
) -> dict:
    """Cut the query timeline into slices of ``delta * sqrt(n)`` queries.

    A slice ends with its last query gate, so an output emitted after ``q``
    queries belongs to the slice holding query ``q + 1`` (the last slice if
    there is none).
    """
    length = delta * math.sqrt(n)
    if length < 1:
        raise ValueError("delta * sqrt(n) must be at least 1")
    M = max(1, math.ceil(T / length - 1e-12))
    outputs = [0] * M
    for q, label in slice_marks:
        if not label.startswith("output"):
            continue
        s = min(M, max(1, math.ceil((q + 1) / length - 1e-12)))
        outputs[s - 1] += 1
    queries = [
        min(T, math.floor(s * length + 1e-12)) - min(T, math.floor((s - 1) * length + 1e-12))
        for s in range(1, M + 1)
    ]
    total_outputs = sum(outputs)
    return {
        "experiment": "slice_report",
        "n": n,
        "T": T,
        "delta": delta,
        "slice_length": length,
        "slices": M,
        "queries_per_slice": queries,
        "outputs_per_slice": outputs,
        "max_outputs_per_slice": max(outputs),
        "mean_outputs_per_slice": total_outputs / M,
        "passed": sum(queries) == T,
    }


# -- Grover calibration (sanity for the gate layer) --------------------------------


def grover_statevector_probability(N: int, k: int, t: int) -> float:
    """Marked-set probability after ``t`` gate-level Grover iterations."""
    width = max(1, math.ceil(math.log2(N)))
    state = new_state(width)
    for q in range(width):
        apply_hadamard(state, q)
    table = np.zeros(1 << width, bool)
    table[:k] = True
    for _ in range(t):
        core.apply_phase_flip(state, table)
        core.apply_diffusion(state)
    return float(state.probabilities()[table].sum())


def grover_calibration() -> dict:
    from .search import grover_success_probability

    rows, ok = [], True
    for N in (4, 8, 16):
        for k in (1, 2, 3):
            for t in range(5):
                got = grover_statevector_probability(N, k, t)
                want = grover_success_probability(N, k, t)
                passed = abs(got - want) <= 1e-9
                ok &= passed
                rows.append({"N": N, "k": k, "t": t, "measured": got, "analytic": want,
                             "passed": passed})
    return {"experiment": "grover_calibration", "rows": rows, "passed": ok}
