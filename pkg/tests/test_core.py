import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtsort import config
from qtsort.core import (
    CapacityError,
    DensityMatrix,
    RegisterSpec,
    StateVector,
    apply_cnot,
    apply_diffusion,
    apply_hadamard,
    apply_phase_flip,
    apply_single,
    apply_x,
    density_from_ensemble,
    helstrom_measurement,
    marginal,
    measure,
    mix_decompose,
    new_state,
    pure_trace_distance,
    random_density,
    random_projective_measurement,
    random_state,
    random_unitary,
    reduced_density,
    trace_norm,
)

TOL = 1e-12
S2 = 1 / math.sqrt(2)


def vec(*amps):
    return StateVector.from_amplitudes(amps)


# Independent reference: build the full 2^q x 2^q operator with Kronecker products.
def kron_single(u, qubit, q):
    ops = [np.eye(2)] * q
    ops[qubit] = u
    out = np.array([[1.0]])
    for op in ops:
        out = np.kron(out, op)
    return out


H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


class TestNewState:
    def test_blank_one_qubit(self):
        assert np.allclose(new_state(1).amplitudes, [1, 0])

    def test_blank_two_qubits(self):
        assert np.allclose(new_state(2).amplitudes, [1, 0, 0, 0])

    def test_zero_qubits_rejected(self):
        with pytest.raises(CapacityError):
            new_state(0)

    def test_cap_from_environment(self, monkeypatch):
        monkeypatch.setenv("QTSORT_MAX_QUBITS", "3")
        new_state(3)
        with pytest.raises(CapacityError):
            new_state(4)


class TestHadamard:
    def test_basis_zero(self):
        assert np.allclose(apply_hadamard(new_state(1), 0).amplitudes, [S2, S2])

    def test_self_inverse(self):
        assert np.allclose(apply_hadamard(vec(S2, S2), 0).amplitudes, [1, 0])

    def test_uniform_three_qubits(self):
        s = new_state(3)
        for q in range(3):
            apply_hadamard(s, q)
        assert np.allclose(s.amplitudes, np.full(8, 1 / math.sqrt(8)))

    def test_bad_qubit(self):
        with pytest.raises(IndexError):
            apply_hadamard(new_state(2), 2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.data())
    def test_matches_kronecker(self, q, data):
        qubit = data.draw(st.integers(0, q - 1))
        psi = random_state(q, np.random.default_rng(data.draw(st.integers(0, 10**6))))
        want = kron_single(H, qubit, q) @ psi.amplitudes
        assert np.allclose(apply_hadamard(psi.copy(), qubit).amplitudes, want, atol=TOL)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6), st.data())
def test_single_gate_matches_kronecker(q, seed, data):
    rng = np.random.default_rng(seed)
    qubit = data.draw(st.integers(0, q - 1))
    u = random_unitary(2, rng)
    psi = random_state(q, rng)
    out = apply_single(psi.copy(), u, qubit)
    assert np.allclose(out.amplitudes, kron_single(u, qubit, q) @ psi.amplitudes, atol=1e-10)
    assert abs(out.norm() - 1) < 1e-10


class TestCnot:
    def test_control_on(self):
        assert np.allclose(apply_cnot(vec(0, 0, 1, 0), 0, 1).amplitudes, [0, 0, 0, 1])

    def test_control_off(self):
        assert np.allclose(apply_cnot(vec(1, 0, 0, 0), 0, 1).amplitudes, [1, 0, 0, 0])

    def test_linearity(self):
        out = apply_cnot(vec(S2, 0, S2, 0), 0, 1)
        assert np.allclose(out.amplitudes, [S2, 0, 0, S2])

    def test_same_qubit_rejected(self):
        with pytest.raises(ValueError):
            apply_cnot(new_state(2), 1, 1)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            apply_cnot(new_state(2), 0, 5)

    def test_involution(self):
        psi = random_state(3, np.random.default_rng(1))
        out = apply_cnot(apply_cnot(psi.copy(), 2, 0), 2, 0)
        assert np.allclose(out.amplitudes, psi.amplitudes)


def test_x_gate_flips_msb_first():
    assert np.allclose(apply_x(new_state(2), 0).amplitudes, [0, 0, 1, 0])


class TestPhaseFlipAndDiffusion:
    def test_marks_index_two(self):
        out = apply_phase_flip(vec(0.5, 0.5, 0.5, 0.5), lambda v: v == 2)
        assert np.allclose(out.amplitudes, [0.5, 0.5, -0.5, 0.5])

    def test_constant_false(self):
        psi = random_state(2, np.random.default_rng(0))
        out = apply_phase_flip(psi.copy(), lambda v: False)
        assert np.allclose(out.amplitudes, psi.amplitudes)

    def test_constant_true_is_global_phase(self):
        psi = random_state(2, np.random.default_rng(0))
        out = apply_phase_flip(psi.copy(), np.ones(4, bool))
        assert np.allclose(out.amplitudes, -psi.amplitudes)
        assert np.allclose(out.probabilities(), psi.probabilities())

    def test_table_shape_checked(self):
        with pytest.raises(ValueError):
            apply_phase_flip(new_state(2), np.ones(3, bool))

    def test_uniform_fixed_point(self):
        out = apply_diffusion(vec(0.5, 0.5, 0.5, 0.5))
        assert np.allclose(out.amplitudes, [0.5] * 4)

    def test_basis_vector(self):
        out = apply_diffusion(vec(1, 0, 0, 0))
        assert np.allclose(out.amplitudes, [-0.5, 0.5, 0.5, 0.5])

    def test_one_grover_iteration_n4(self):
        s = apply_phase_flip(vec(0.5, 0.5, 0.5, 0.5), lambda v: v == 3)
        apply_diffusion(s)
        assert np.allclose(s.probabilities(), [0, 0, 0, 1], atol=TOL)

    def test_matches_reflection_matrix_on_subregister(self):
        rng = np.random.default_rng(3)
        psi = random_state(4, rng)
        u = np.full((4, 4), 0.5) - np.eye(4)
        want = np.kron(np.kron(np.eye(2), u), np.eye(2)) @ psi.amplitudes
        out = apply_diffusion(psi.copy(), (1, 2))
        assert np.allclose(out.amplitudes, want)

    def test_register_range_checked(self):
        with pytest.raises(IndexError):
            apply_diffusion(new_state(2), (1, 2))


class TestMeasure:
    def test_deterministic(self):
        outcome, post = measure(new_state(1), None, np.random.default_rng(0))
        assert outcome == 0 and np.allclose(post.amplitudes, [1, 0])

    def test_born_rule_frequency(self):
        rng = np.random.default_rng(11)
        psi = vec(S2, S2)
        zeros = sum(measure(psi, None, rng)[0] == 0 for _ in range(10**5))
        assert 0.49 <= zeros / 10**5 <= 0.51

    def test_entangled_collapse(self):
        bell = vec(S2, 0, 0, S2)
        rng = np.random.default_rng(0)
        for _ in range(20):
            outcome, post = measure(bell, (0, 1), rng)
            want = [0, 0, 0, 1] if outcome == 1 else [1, 0, 0, 0]
            assert np.allclose(post.amplitudes, want)

    def test_input_not_mutated(self):
        bell = vec(S2, 0, 0, S2)
        measure(bell, (0, 1), np.random.default_rng(0))
        assert np.allclose(bell.amplitudes, [S2, 0, 0, S2])

    def test_marginal(self):
        assert np.allclose(marginal(vec(S2, 0, 0, S2), (1, 1)), [0.5, 0.5])


class TestDensity:
    def test_pure(self):
        rho = density_from_ensemble([(1, vec(1, 0))])
        assert np.allclose(rho.entries, np.diag([1, 0]))

    def test_classical_mixture(self):
        rho = density_from_ensemble([(0.5, vec(1, 0)), (0.5, vec(0, 1))])
        assert np.allclose(rho.entries, np.diag([0.5, 0.5]))

    def test_mixed_with_plus(self):
        rho = density_from_ensemble([(0.5, vec(1, 0)), (0.5, vec(S2, S2))])
        assert np.allclose(rho.entries, [[0.75, 0.25], [0.25, 0.25]])

    def test_bad_weights(self):
        with pytest.raises(ValueError):
            density_from_ensemble([(0.7, vec(1, 0))])

    def test_invalid_matrix_rejected(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 10**6))
    def test_random_density_valid(self, m, seed):
        rho = random_density(m, np.random.default_rng(seed))
        assert rho.violations() == []

    def test_reduced_bell_state(self):
        rho = reduced_density(vec(S2, 0, 0, S2), [0])
        assert np.allclose(rho.entries, np.eye(2) / 2)

    def test_register_spec_roundtrip(self):
        spec = RegisterSpec.packed(i=2, a=3)
        assert spec["a"] == (2, 3)
        idx = spec.compose(i=2, a=5)
        assert spec.values("i")[idx] == 2 and spec.values("a")[idx] == 5


class TestTraceNorm:
    def test_pauli_z(self):
        assert trace_norm(np.diag([1, -1])) == pytest.approx(2)

    def test_zero(self):
        assert trace_norm(np.zeros((3, 3))) == 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 10**6))
    def test_density_has_norm_one(self, m, seed):
        assert abs(trace_norm(random_density(m, np.random.default_rng(seed))) - 1) <= 1e-9

    def test_non_hermitian_uses_singular_values(self):
        a = np.array([[0, 1], [0, 0]])
        assert trace_norm(a) == pytest.approx(1)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_pure_distance_formula(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_state(2, rng), random_state(2, rng)
        full = trace_norm(DensityMatrix.pure(a).entries - DensityMatrix.pure(b).entries)
        assert pure_trace_distance(a, b) == pytest.approx(full, abs=1e-9)


class TestHelstrom:
    def test_orthogonal_basis_states(self):
        _, d = helstrom_measurement(np.diag([1, 0]), np.diag([0, 1]))
        assert d == pytest.approx(2)

    def test_identical(self):
        rho = random_density(2, np.random.default_rng(0))
        _, d = helstrom_measurement(rho, rho)
        assert d == pytest.approx(0, abs=1e-12)

    def test_plus_minus(self):
        plus = DensityMatrix.pure(vec(S2, S2))
        minus = DensityMatrix.pure(vec(S2, -S2))
        _, d = helstrom_measurement(plus, minus)
        assert d == pytest.approx(2)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 10**6))
    def test_optimal_and_dominates(self, m, seed):
        rng = np.random.default_rng(seed)
        a, b = random_density(m, rng), random_density(m, rng)
        meas, d = helstrom_measurement(a, b)
        norm = trace_norm(a.entries - b.entries)
        assert abs(d - norm) <= 1e-9
        assert np.allclose(sum(meas.projectors), np.eye(1 << m))
        for _ in range(5):
            other = random_projective_measurement(1 << m, rng)
            assert np.abs(other.distribution(a) - other.distribution(b)).sum() <= norm + 1e-9


class TestMixDecompose:
    def test_basis_state(self):
        sigma = mix_decompose(np.diag([1, 0]), 1)
        assert np.allclose(sigma.entries, np.diag([0, 1]))

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_fixed_point(self, m):
        mixed = np.eye(1 << m) / (1 << m)
        assert np.allclose(mix_decompose(mixed, m).entries, mixed)

    def test_random_m3_positive(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            rho = random_density(3, rng)
            assert mix_decompose(rho, 3).min_eigenvalue() >= -1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 10**6))
    def test_reconstruction(self, m, seed):
        rho = random_density(m, np.random.default_rng(seed)).entries
        sigma = mix_decompose(rho, m).entries
        d = 1 << m
        assert np.abs(rho / d + (1 - 1 / d) * sigma - np.eye(d) / d).max() <= 1e-9

    def test_bad_m(self):
        with pytest.raises(ValueError):
            mix_decompose(np.eye(1), 0)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            mix_decompose(np.eye(2) / 2, 2)


def test_tolerance_override():
    old = config.TOLERANCE
    try:
        config.set_tolerance(1e-3)
        assert DensityMatrix(np.diag([0.5 + 4e-4, 0.5 - 4e-4 + 1e-4])).violations() == []
    finally:
        config.set_tolerance(old)
    with pytest.raises(ValueError):
        config.set_tolerance(0)
