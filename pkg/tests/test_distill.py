import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclocksync import distill, protocols, qcore
from qclocksync.distill import PairEnsemble, recurrence_round_analytic, recurrence_round_circuit

fids = st.floats(0.0, 1.0)
phases = st.floats(-3.1, 3.1)


class TestAnalytic:
    def test_frozen_spot_values(self):
        r = recurrence_round_analytic(0.75)
        assert (r.survival, r.F_out) == (0.3125, 0.9)
        assert distill.accuracy_ratio_after_round(1.0) == pytest.approx(math.sqrt(2), abs=1e-15)
        assert distill.accuracy_ratio_after_round(0.75) == pytest.approx(1.118033988749895, abs=1e-15)
        assert distill.hashing_yield(1000, 0.9) == pytest.approx(531.004406410832, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.5001, 0.9999))
    def test_fidelity_improves_above_half(self, F):
        r = recurrence_round_analytic(F)
        assert r.F_out > F and 0 < r.survival <= 0.5

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.5001, 1.0))
    def test_purification_never_helps_accuracy(self, F):
        assert distill.accuracy_ratio_after_round(F) >= 1.0

    def test_accuracy_ratio_domain(self):
        with pytest.raises(ValueError):
            distill.accuracy_ratio_after_round(0.5)

    @settings(max_examples=60, deadline=None)
    @given(phases)
    def test_tan_squared_contraction(self, d):
        r = distill.systematic_phase_round(d)
        assert abs(math.tan(r.delta_out / 2)) == pytest.approx(math.tan(d / 2) ** 2, rel=1e-9, abs=1e-15)

    def test_pi_is_fixed_point(self):
        assert distill.systematic_phase_round(math.pi).delta_out == math.pi

    def test_binary_entropy_edges(self):
        assert distill.binary_entropy(0.0) == 0.0 and distill.binary_entropy(0.5) == 1.0

    def test_survival_bounds(self):
        with pytest.raises(ValueError):
            distill.RecurrenceResult(0.6, 1.0)


class TestCircuit:
    @settings(max_examples=30, deadline=None)
    @given(fids)
    def test_projective_matches_recursion(self, F):
        r = recurrence_round_circuit(protocols.phase_error_mixture(F))
        ref = recurrence_round_analytic(F)
        assert r.survival == pytest.approx(ref.survival, abs=1e-12)
        assert r.F_out == pytest.approx(ref.F_out, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(fids, st.floats(-2, 2))
    def test_gates_match_projective_on_phase_errors(self, F, lag):
        rho = PairEnsemble(1, F, 0.0, lag).state()
        a = recurrence_round_circuit(rho, lag, method="projective")
        b = recurrence_round_circuit(rho, lag, method="gates")
        assert a.survival == pytest.approx(b.survival, abs=1e-12)
        assert np.allclose(a.kept_state.matrix, b.kept_state.matrix, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_gates_keep_probability_general_input(self, seed):
        rho = qcore.random_density_matrix(2, np.random.default_rng(seed))
        a = recurrence_round_circuit(rho, method="projective")
        b = recurrence_round_circuit(rho, method="gates")
        assert a.survival == pytest.approx(b.survival, abs=1e-12)

    @pytest.mark.parametrize("d", [0.3, 0.92730, 1.5])
    def test_systematic_phase_circuit(self, d):
        r = recurrence_round_circuit(PairEnsemble(1, 1.0, d).state())
        ref = distill.systematic_phase_round(d)
        assert r.survival == pytest.approx(ref.survival, abs=1e-12)
        assert r.delta_out == pytest.approx(abs(ref.delta_out), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_iid_copies_agree_at_least_half_the_time(self, seed):
        # keep = (1 + <XX>^2) / 2 for two identical copies
        rho = qcore.random_density_matrix(2, np.random.default_rng(seed))
        xx = rho.expectation(qcore.pauli_string("XX"))
        assert recurrence_round_circuit(rho).survival == pytest.approx(0.25 * (1 + xx**2), abs=1e-12)

    def test_rejects_wrong_size(self):
        with pytest.raises(ValueError):
            recurrence_round_circuit(qcore.KET_0.dm())


class TestIteration:
    def test_lagged_follows_unlagged(self):
        lagged = distill.iterate_distillation(PairEnsemble(1000, 0.8, 0.0, 0.3), 3, "circuit")
        plain = distill.iterate_distillation(PairEnsemble(1000, 0.8), 3, "analytic")
        for (a, ra), (b, rb) in zip(lagged, plain):
            assert a.F == pytest.approx(b.F, abs=1e-12)
            assert a.n == pytest.approx(b.n, rel=1e-12)
        # frozen: 0.8 -> 0.941176 -> 0.996109 -> 0.999985
        assert [round(e.F, 6) for e, _ in plain] == [0.941176, 0.996109, 0.999985]

    def test_analytic_rejects_mixed_family(self):
        with pytest.raises(ValueError):
            distill.iterate_distillation(PairEnsemble(10, 0.8, 0.2), 1, "analytic")

    def test_phase_iteration_converges(self):
        trace = distill.iterate_distillation(PairEnsemble(1, 1.0, 1.0), 5, "analytic")
        assert abs(trace[-1][1].delta_out) < 1e-3

    def test_trace_csv(self, tmp_path):
        trace = distill.iterate_distillation(PairEnsemble(100, 0.7), 2)
        distill.write_trace_csv(trace, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "round,n,F,delta,survival" and len(lines) == 3


def test_monte_carlo_ratio_small():
    mc = distill.purification_accuracy_monte_carlo(0.75, 10_000, 200, seed=3)
    assert mc["ratio"] == pytest.approx(mc["predicted"], rel=0.15)
    assert mc["mean_kept"] == pytest.approx(5000 * 0.625, rel=0.02)
