import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtsort import core, lab
from qtsort.oracle import SortInstance, random_instance
from qtsort.qsort import plan_blocks, quantum_sort

ALPHAS = [0.25, 0.5, 1.0, 2.0]


def instances(n, count, seed=0):
    rng = np.random.default_rng(seed)
    return [random_instance(n, rng) for _ in range(count)]


def scan_instance(n, seed):
    rng = np.random.default_rng([seed, n])
    return SortInstance(tuple(int(v) for v in rng.choice(16, n, replace=False) + 1), range_bound=16)


class TestMixedAdvice:
    @pytest.mark.parametrize("S", [1, 2, 3])
    def test_purified_register_is_maximally_mixed(self, S):
        assert lab.mixed_state_check(S)["passed"]

    def test_answer_bit(self):
        alg = lab.answer_bit_algorithm()
        for x in instances(4, 5):
            assert lab.run_adviced(alg, x, mixed=False) == pytest.approx(1)
            assert lab.run_adviced(alg, x, mixed=True) == pytest.approx(0.5)

    def test_unused_advice(self):
        alg = lab.unused_advice_algorithm()
        for x in instances(4, 5):
            assert lab.run_adviced(alg, x, True) == pytest.approx(lab.run_adviced(alg, x, False))

    def test_argmin_advice(self):
        alg = lab.argmin_advice_algorithm()
        rng = np.random.default_rng(1)
        res = lab.union_bound_experiment(alg, instances(4, 5), 20000, rng)
        assert res["passed"]
        for row in res["rows"]:
            assert row["p_advice_exact"] == pytest.approx(1)
            assert row["p_mixed_exact"] >= 0.25 - 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_random_fixtures(self, seed):
        alg = lab.random_adviced_algorithm(seed)
        res = lab.union_bound_experiment(alg, instances(4, 3, seed), 20000,
                                         np.random.default_rng(seed))
        assert res["passed"]
        for row in res["rows"]:
            assert row["p_mixed_exact"] >= row["p_advice_exact"] / 2 ** alg.advice_qubits - 1e-9

    def test_report_has_bounds(self):
        res = lab.union_bound_experiment(lab.answer_bit_algorithm(), instances(4, 1), 100,
                                         np.random.default_rng(0))
        assert {"bound", "p_mixed", "p_advice", "sigma"} <= set(res["rows"][0])


class TestDensityChecks:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_decomposition(self, m):
        assert lab.decomposition_check(m, 50, np.random.default_rng(m))["passed"]

    def test_helstrom(self):
        assert lab.helstrom_check(2, 30, 10, np.random.default_rng(0))["passed"]


class TestQueryMagnitude:
    def test_no_queries(self):
        x = scan_instance(4, 0)
        res = lab.query_magnitude_scan(lab.random_query_body(4, 0, 0), x, ALPHAS)
        assert res["T"] == 0
        assert max(res["max_distance"]) <= 1e-9
        assert all(v["size"] == 4 for v in res["verdicts"])

    def test_uniform_single_query(self):
        x = scan_instance(4, 1)
        res = lab.query_magnitude_scan(lab.uniform_single_query_body(4), x, ALPHAS)
        assert np.allclose(res["query_magnitudes"], 0.25)
        for v in res["verdicts"]:
            assert v["bound"] == pytest.approx(4 - 1 / v["alpha"] ** 2)
            assert v["passed"]

    def test_vacuous_bound_still_reports(self):
        x = scan_instance(4, 2)
        T = 3
        res = lab.query_magnitude_scan(lab.random_query_body(4, T, 2), x, [0.1])
        assert res["verdicts"][0]["bound"] < 0 and res["verdicts"][0]["passed"]
        assert len(res["max_distance"]) == 4

    def test_magnitudes_sum_to_T(self):
        x = scan_instance(8, 3)
        res = lab.query_magnitude_scan(lab.random_query_body(8, 3, 3), x, ALPHAS)
        assert sum(res["query_magnitudes"]) == pytest.approx(3)
        assert res["symmetric"]

    @settings(max_examples=15, deadline=None)
    @given(st.sampled_from([4, 8]), st.integers(1, 4), st.integers(0, 10**4))
    def test_hybrid_bound_holds(self, n, T, seed):
        res = lab.query_magnitude_scan(lab.random_query_body(n, T, seed), scan_instance(n, seed),
                                       ALPHAS)
        assert all(v["hybrid_passed"] for v in res["verdicts"])


def aux_set(idx):
    return (idx & 1) == 1


class TestConditioned:
    def test_full_outcome_space(self):
        x = scan_instance(4, 0)
        res = lab.conditioned_adversary_check(lab.random_query_body(4, 1, 0), x, None, 0, aux_set,
                                              ALPHAS)
        assert res["q_x"] == pytest.approx(1)

    def test_certain_event(self):
        x = scan_instance(4, 1)
        body = lab.random_query_body(4, 1, 1)
        res = lab.conditioned_adversary_check(body, x, (0, 2), 1, lambda i: np.ones(len(i), bool),
                                              ALPHAS)
        assert res["p_x"] == pytest.approx(1)
        for v in res["verdicts"]:
            assert v["threshold"] == pytest.approx(res["q_x"] * (1 - v["alpha"]))

    def test_random_two_query_circuits(self):
        for seed in range(50):
            res = lab.conditioned_adversary_check(
                lab.random_query_body(4, 2, seed), scan_instance(4, seed), (0, 2), 0, aux_set, ALPHAS
            )
            assert res["passed"], seed


class TestSlices:
    def test_slice_count(self):
        marks = [(q, f"output:{k}") for k, q in enumerate([3, 9, 15, 20], 1)]
        res = lab.slice_report(marks, 40, 16)
        assert res["slices"] == math.ceil(40 / 4)
        assert sum(res["queries_per_slice"]) == 40
        assert sum(res["outputs_per_slice"]) == 4

    def test_output_lands_in_next_slice(self):
        res = lab.slice_report([(4, "output:1")], 12, 16)
        assert res["outputs_per_slice"] == [0, 1, 0]

    def test_short_slices_rejected(self):
        with pytest.raises(ValueError):
            lab.slice_report([], 10, 4, delta=0.1)

    def test_acceptance_run_average(self):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plan = plan_blocks(64, 48)
        rng = np.random.default_rng(0)
        _, rep = quantum_sort(random_instance(64, rng), 48, rng, plan=plan)
        res = lab.slice_report(rep.slice_marks, rep.T_queries, 64)
        assert sum(res["outputs_per_slice"]) == 64
        assert res["mean_outputs_per_slice"] == pytest.approx(64 / res["slices"])
        assert res["passed"]


class TestCalibration:
    def test_passes(self):
        assert lab.grover_calibration()["passed"]

    def test_sign_bug_detected(self, monkeypatch):
        original = core.apply_diffusion

        def buggy(state, register=None):
            original(state, register)
            state.amplitudes[0] *= -1
            return state

        monkeypatch.setattr(core, "apply_diffusion", buggy)
        assert not lab.grover_calibration()["passed"]
