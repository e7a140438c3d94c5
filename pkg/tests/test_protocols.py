import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclocksync import protocols, qcore
from qclocksync.protocols import (
    ClockFrame,
    DegenerateLikelihoodError,
    LikelihoodModel,
    SampleSet,
    estimate_offset,
)

seeds = st.integers(0, 2**32 - 1)
thetas = st.floats(-10, 10, allow_nan=False)
unit = st.floats(0, 1)


class TestClosedForms:
    @settings(max_examples=60, deadline=None)
    @given(thetas, unit, unit)
    def test_qcs_probability_matches_density_matrix(self, t, eta, F):
        rho = protocols.phase_error_mixture(F)
        table = protocols.pair_joint_distribution(rho, t, 1.0, eta)
        model = LikelihoodModel.qcs(eta, F)
        assert np.allclose(table, model.joint(t), atol=1e-12)
        assert protocols.qcs_outcome_prob(1, t, 1.0, eta, F) == pytest.approx(2 * table[0, 0], abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(thetas, unit, unit)
    def test_alice_marginal_uniform(self, t, eta, F):
        table = protocols.pair_joint_distribution(protocols.phase_error_mixture(F), t, 1.0, eta)
        assert np.allclose(table.sum(axis=1), 0.5, atol=1e-12)

    def test_accuracy_values(self):
        # frozen from 1/((2F-1) omega sqrt(n))
        assert protocols.qcs_accuracy(40_000, 1.0) == pytest.approx(0.005, rel=1e-14)
        assert protocols.qcs_accuracy(40_000, 1.0, 0.75) == pytest.approx(0.01, rel=1e-14)
        with pytest.raises(ValueError):
            protocols.qcs_accuracy(100, 1.0, 0.5)

    def test_product_joint_matches_closed_form(self):
        for t in np.linspace(0, 2 * math.pi, 9):
            assert np.allclose(protocols.product_joint_distribution(t, 1.0), LikelihoodModel.product().joint(t),
                               atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(-0.99, 0.99))
    def test_fisher_closed_form_vs_numeric(self, theta, c):
        m = LikelihoodModel("x", c)
        assert m.fisher_information(theta) == pytest.approx(
            protocols.fisher_information_numeric(m.joint, theta), rel=1e-6, abs=1e-9)

    def test_information_ratio_frozen(self):
        r = protocols.product_to_qcs_information_ratio(1.0)
        assert r["theta"] == pytest.approx(math.pi / 2, abs=1e-12)
        assert r["ratio"] == pytest.approx(4.0, rel=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(thetas, st.floats(-3, 3))
    def test_flawed_pair_shifts_offset(self, t, lag):
        pair = protocols.make_flawed_pair(lag, 1.0).dm()
        shifted = protocols.pair_joint_distribution(qcore.PSI_MINUS.dm(), t - lag, 1.0)
        assert np.allclose(protocols.pair_joint_distribution(pair, t, 1.0), shifted, atol=1e-12)

    def test_flawed_pair_marginals(self):
        rho = protocols.make_flawed_pair(0.4, 1.3).dm()
        for q in (0, 1):
            assert np.allclose(qcore.partial_trace(rho, [q]).matrix, np.eye(2) / 2, atol=1e-12)


class TestSampleSet:
    def test_rejects_bad_outcomes(self):
        with pytest.raises(ValueError):
            SampleSet([1, 0], [1, 1])

    def test_sequence_and_counts(self):
        s = SampleSet([1, 1, -1], [1, -1, -1])
        assert len(s) == 3 and s[2].pair_index == 2 and s[-1].alice_outcome == -1
        assert s.counts().tolist() == [[1, 1], [0, 1]]
        assert SampleSet.from_records(list(s)) == s

    def test_csv_roundtrip(self, tmp_path):
        s = protocols.run_qcs(50, ClockFrame(0.3), 1.0, seed=3)
        s.to_csv(tmp_path / "s.csv")
        assert SampleSet.from_csv(tmp_path / "s.csv") == s

    def test_read_only(self):
        s = SampleSet([1], [1])
        with pytest.raises(ValueError):
            s.alice[0] = -1


class TestSampling:
    def test_seeded_reproducible(self):
        a = protocols.run_qcs(1000, ClockFrame(0.7), 1.0, seed=11)
        b = protocols.run_qcs(1000, ClockFrame(0.7), 1.0, seed=11)
        c = protocols.run_qcs(1000, ClockFrame(0.7), 1.0, seed=12)
        assert a == b and a != c

    def test_qcs_conditional_frequency(self):
        s = protocols.run_qcs(40_000, ClockFrame(0.7), 1.0, F=0.9, seed=5)
        p = protocols.qcs_outcome_prob(1, 0.7, 1.0, F=0.9)
        freq, m = s.conditional_plus(1)
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / m)

    def test_product_conditional_frequency(self):
        t = 0.7
        s = protocols.run_product_protocol(40_000, ClockFrame(t), 1.0, seed=5)
        p = 0.5 * (1 - 0.5 * math.cos(t))
        freq, m = s.conditional_plus(1)
        assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / m)

    def test_sct_matches_qcs_with_flipped_label(self):
        eta, t = 0.8, 0.9
        s = protocols.run_sct(40_000, ClockFrame(0.5, 0.0, 0.4), 1.0, eta, seed=2)
        p = protocols.qcs_outcome_prob(-1, t, 1.0, eta)
        freq, m = s.conditional_plus(1)
        assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / m)

    def test_frame_validation(self):
        with pytest.raises(ValueError):
            ClockFrame(float("inf"))


class TestEstimator:
    def test_recovers_offset(self):
        s = protocols.run_qcs(40_000, ClockFrame(0.7), 1.0, seed=1)
        est = estimate_offset(s, 1.0, LikelihoodModel.qcs())
        assert abs(est.t_hat - 0.7) < 4 * est.std_error
        assert est.std_error == pytest.approx(0.005, rel=0.05)
        assert est.mirror == pytest.approx(2 * math.pi - est.t_hat)

    def test_folds_into_half_period(self):
        s = protocols.run_qcs(20_000, ClockFrame(2 * math.pi - 0.7), 1.0, seed=1)
        est = estimate_offset(s, 1.0, LikelihoodModel.qcs())
        assert 0 <= est.t_hat <= math.pi and abs(est.t_hat - 0.7) < 0.05

    def test_omega_scaling(self):
        # an offset t at frequency 2 looks like 2t at frequency 1
        s = protocols.run_qcs(20_000, ClockFrame(0.35), 2.0, seed=4)
        a = estimate_offset(s, 2.0, LikelihoodModel.qcs())
        b = estimate_offset(s, 1.0, LikelihoodModel.qcs())
        assert a.t_hat == pytest.approx(b.t_hat / 2, rel=1e-9)

    def test_zero_contrast_is_degenerate(self):
        s = protocols.run_qcs(100, ClockFrame(0.3), 1.0, F=0.5, seed=1)
        with pytest.raises(DegenerateLikelihoodError):
            estimate_offset(s, 1.0, LikelihoodModel.qcs(F=0.5))

    def test_uncorrelated_counts_point_to_quarter_period(self):
        s = SampleSet([1, 1, -1, -1], [1, -1, 1, -1])
        assert estimate_offset(s, 1.0, LikelihoodModel.qcs()).t_hat == pytest.approx(math.pi / 2, abs=1e-6)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            estimate_offset(SampleSet([1], [1]), 1.0, LikelihoodModel.qcs())

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-20, 20))
    def test_fold_range(self, t):
        f = protocols.fold_offset(t, 1.0)
        assert 0 <= f <= math.pi + 1e-12
        assert math.cos(f) == pytest.approx(math.cos(t), abs=1e-9)


class TestTeleport:
    def test_correction_table(self):
        assert protocols._correction_table() == {"psi-": "I", "psi+": "Z", "phi+": "Y", "phi-": "X"}

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.floats(-3, 3))
    def test_compensated_branches_perfect(self, seed, lag):
        psi = qcore.random_state_vector(1, np.random.default_rng(seed))
        branches = protocols.teleport_branches(psi, lag, 1.0)
        assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)
        assert all(b.probability == pytest.approx(0.25, abs=1e-12) for b in branches)
        assert all(b.fidelity > 1 - 1e-12 for b in branches)

    def test_uncompensated_fidelity_frozen(self):
        # |+> sent through a quarter-period lag: fidelity cos^2(pi/4) = 1/2
        out = protocols.teleport_branches(qcore.KET_PLUS, math.pi / 2, 1.0, compensate=False)
        assert all(b.fidelity == pytest.approx(0.5, abs=1e-12) for b in out)

    def test_sampled_run_seeded(self):
        psi = qcore.KET_PLUS
        a = protocols.teleport_with_offset(psi, 0.3, 1.0, seed=9)
        b = protocols.teleport_with_offset(psi, 0.3, 1.0, seed=9)
        assert a.outcome == b.outcome and a.fidelity > 1 - 1e-12
