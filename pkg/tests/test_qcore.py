import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclocksync import qcore
from qclocksync.qcore import (
    PSI_MINUS,
    X,
    Z,
    DensityMatrix,
    FreeEvolutionParams,
    StateVector,
    evolve_free,
    lift,
    partial_trace,
)

seeds = st.integers(0, 2**32 - 1)
angles = st.floats(-20, 20, allow_nan=False)


def rng(seed):
    return np.random.default_rng(seed)


def ptrace_oracle(m, n, keep):
    # independent einsum-based partial trace
    letters = "abcdefgh"
    row = list(letters[:n])
    col = [c.upper() for c in row]
    for q in range(n):
        if q not in keep:
            col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    t = np.einsum("".join(row) + "".join(col) + "->" + out, m.reshape([2] * (2 * n)))
    d = 2 ** len(keep)
    return t.reshape(d, d)


class TestStates:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            StateVector([1, 1])

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            StateVector([1, 0, 0])

    def test_immutable(self):
        s = StateVector([1, 0])
        with pytest.raises((AttributeError, ValueError, TypeError)):
            s.amplitudes[0] = 0

    def test_basis_msb_is_qubit_zero(self):
        assert StateVector.basis("10").amplitudes[2] == 1

    def test_density_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[1, 1], [0, 0]], dtype=complex))
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]).astype(complex))
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([0.5, 0.25]).astype(complex))

    def test_bell_states_orthonormal(self):
        vecs = np.array([s.amplitudes for s in qcore.BELL_STATES.values()])
        assert np.allclose(vecs.conj() @ vecs.T, np.eye(4), atol=1e-15)

    def test_tensor_product_kind_mismatch(self):
        with pytest.raises(TypeError):
            qcore.tensor_product(qcore.KET_0, qcore.KET_0.dm())


class TestLiftAndTrace:
    def test_lift_matches_kron(self):
        assert np.allclose(lift(X, [1], 3), np.kron(np.kron(np.eye(2), X), np.eye(2)))

    def test_lift_ordered_qubits(self):
        cnot = np.eye(4)[[0, 1, 3, 2]].astype(complex)
        # control on qubit 1, target on qubit 0
        swapped = lift(cnot, [1, 0], 2)
        assert np.allclose(swapped @ StateVector.basis("01").amplitudes, StateVector.basis("11").amplitudes)

    def test_bad_qubit_index(self):
        with pytest.raises(ValueError):
            lift(X, [3], 3)
        with pytest.raises(ValueError):
            lift(np.eye(4), [0, 0], 2)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 4), st.data())
    def test_partial_trace_matches_oracle(self, seed, n, data):
        keep = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)))
        rho = qcore.random_density_matrix(n, rng(seed))
        assert np.allclose(partial_trace(rho, keep).matrix, ptrace_oracle(rho.matrix, n, keep), atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_partial_trace_of_product(self, seed):
        g = rng(seed)
        a, b = qcore.random_density_matrix(1, g), qcore.random_density_matrix(2, g)
        ab = qcore.tensor_product(a, b)
        assert partial_trace(ab, [0]).allclose(a)
        assert partial_trace(ab, [1, 2]).allclose(b)


class TestFreeEvolution:
    def test_unitary_convention(self):
        u = FreeEvolutionParams(2.0, 0.3).unitary()
        assert np.allclose(u, np.diag([np.exp(-0.3j), np.exp(0.3j)]))

    @settings(max_examples=50, deadline=None)
    @given(angles, angles)
    def test_singlet_stationary(self, omega, t):
        out = evolve_free(PSI_MINUS, FreeEvolutionParams(omega, t), [0, 1])
        assert out.equiv(PSI_MINUS)

    @settings(max_examples=50, deadline=None)
    @given(seeds, angles, angles)
    def test_backward_evolution_inverts(self, seed, t, omega):
        psi = qcore.random_state_vector(2, rng(seed))
        fw = evolve_free(psi, FreeEvolutionParams(omega, t), [1])
        back = evolve_free(fw, FreeEvolutionParams(omega, -t), [1])
        assert back.equiv(psi, atol=1e-9)

    def test_plus_precesses(self):
        out = evolve_free(qcore.KET_PLUS, FreeEvolutionParams(1.0, math.pi), [0])
        assert out.equiv(qcore.KET_MINUS)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            FreeEvolutionParams(float("nan"), 1.0)


class TestMeasurement:
    def test_superop_validation(self):
        p0 = np.diag([1, 0]).astype(complex)
        with pytest.raises(ValueError):
            qcore.DecoherenceSuperop([p0, p0], (1, 2))
        with pytest.raises(ValueError):
            qcore.DecoherenceSuperop([p0], (1, 2))

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(0, 1))
    def test_pulse_equals_direct_x(self, seed, q):
        rho = qcore.random_density_matrix(2, rng(seed))
        direct = qcore.measure_projective(rho, qcore.x_measurement(2, q))
        pulse = qcore.measure_x_via_pulse(rho, q)
        assert np.allclose(direct.probabilities, pulse.probabilities, atol=1e-12)
        assert direct.decohered.allclose(pulse.decohered, atol=1e-12)
        for a, b in zip(direct.post_states, pulse.post_states):
            assert a.allclose(b, atol=1e-12)

    def test_sampler_path(self):
        k, post = qcore.measure_projective(qcore.KET_0.dm(), qcore.z_measurement(1, 0), rng(1))
        assert k == 0 and post.allclose(qcore.KET_0.dm())

    def test_singlet_x_anticorrelated(self):
        rho = PSI_MINUS.dm()
        first = qcore.measure_projective(rho, qcore.x_measurement(2, 0))
        second = qcore.measure_projective(first.post_states[0], qcore.x_measurement(2, 1))
        assert np.allclose(second.probabilities, [0, 1], atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_superop_trace_preserving(self, seed):
        rho = qcore.random_density_matrix(2, rng(seed))
        s = qcore.z_measurement(2, 1)
        assert abs(np.trace(s.apply(rho.matrix)) - 1) < 1e-12


def test_trace_distance_extremes():
    assert qcore.trace_distance(qcore.KET_0.dm().matrix, qcore.KET_1.dm().matrix) == pytest.approx(1.0)
    assert qcore.trace_distance(Z, Z) == pytest.approx(0.0)
