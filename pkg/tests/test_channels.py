import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qclocksync import channels, qcore
from qclocksync.channels import BlochVector, bloch_evolve

seeds = st.integers(0, 2**32 - 1)
unit = st.floats(0, 1)


def rng(seed):
    return np.random.default_rng(seed)


def random_bloch(g):
    v = g.normal(size=3)
    return BlochVector(*(v / np.linalg.norm(v) * g.uniform(0, 1)))


class TestKraus:
    def test_rejects_non_trace_preserving(self):
        with pytest.raises(ValueError):
            channels.KrausChannel.from_operators([np.eye(2) * 0.9])

    @settings(max_examples=40, deadline=None)
    @given(seeds, unit)
    def test_dephasing_scales_coherences(self, seed, eta):
        rho = qcore.random_density_matrix(1, rng(seed))
        out = channels.apply_channel(rho, channels.dephasing_channel(eta), [0]).matrix
        expected = rho.matrix * np.array([[1, eta], [eta, 1]])
        assert np.allclose(out, expected, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seeds, unit)
    def test_bitflip_keeps_x(self, seed, eta):
        rho = qcore.random_density_matrix(1, rng(seed))
        b0 = BlochVector.from_density(rho)
        b1 = BlochVector.from_density(channels.apply_channel(rho, channels.bitflip_channel(eta), [0]))
        assert np.allclose(b1.as_array(), b0.as_array() * [1, eta, eta], atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(unit, unit)
    def test_compose_multiplies_eta(self, a, b):
        ch = channels.dephasing_channel(a).compose(channels.dephasing_channel(b))
        rho = qcore.KET_PLUS.dm()
        out = channels.apply_channel(rho, ch, [0])
        assert out.expectation(qcore.X) == pytest.approx(a * b, abs=1e-12)

    def test_eta_range(self):
        with pytest.raises(ValueError):
            channels.dephasing_channel(1.2)

    def test_noise_params(self):
        assert channels.NoiseParams(0.5, 2.0).eta == pytest.approx(math.exp(-1))

    def test_arity_mismatch(self):
        with pytest.raises(ValueError):
            channels.apply_channel(qcore.PSI_MINUS.dm(), channels.dephasing_channel(0.5), [0, 1])


class TestCollectiveRotation:
    def test_dfs_states_acquire_no_relative_phase(self):
        out = channels.collective_z_rotation(qcore.PSI_PLUS, 1.3, [0, 1])
        assert out.equiv(qcore.PSI_PLUS)

    def test_phi_states_acquire_relative_phase(self):
        theta = 0.8
        out = channels.collective_z_rotation(qcore.PHI_PLUS, theta, [0, 1])
        a = out.amplitudes
        assert np.angle(a[3] / a[0]) == pytest.approx(2 * theta)


    def test_off_diagonal_rotation_00_01(self):
        # |00> picks up both half-angle phases, |01> none: coherence rotates by e^{-i theta}
        theta = 0.9
        rho = qcore.StateVector.normalized([1, 1, 0, 0]).dm()
        out = channels.collective_z_rotation(rho, theta, [0, 1]).matrix
        assert out[0, 1] / rho.matrix[0, 1] == pytest.approx(np.exp(-1j * theta), abs=1e-12)


class TestBloch:
    def test_norm_guard(self):
        with pytest.raises(ValueError):
            BlochVector(1, 1, 0)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_density_roundtrip(self, seed):
        b = random_bloch(rng(seed))
        assert np.allclose(BlochVector.from_density(b.to_density()).as_array(), b.as_array(), atol=1e-12)

    @pytest.mark.parametrize("kind", ["bitflip", "dephasing"])
    @settings(max_examples=25, deadline=None)
    @given(seed=seeds, omega=st.floats(-3, 3), gamma=st.floats(0.05, 2), t=st.floats(0, 4))
    def test_analytic_matches_matrix_exponential(self, kind, seed, omega, gamma, t):
        b = random_bloch(rng(seed))
        oracle = expm(channels.bloch_generator(omega, kind, gamma) * t) @ b.as_array()
        got = bloch_evolve(b, omega, kind, gamma, t).as_array()
        assert np.allclose(got, oracle, atol=1e-10)

    @pytest.mark.parametrize("kind", ["bitflip", "dephasing"])
    def test_integrator_matches_analytic(self, kind):
        b = BlochVector(0.6, 0.3, 0.5)
        a = bloch_evolve(b, 1.3, kind, 0.4, 3.0).as_array()
        r = bloch_evolve(b, 1.3, kind, 0.4, 3.0, method="integrator").as_array()
        assert np.allclose(a, r, atol=1e-8)

    @pytest.mark.parametrize("kind", ["bitflip", "dephasing"])
    @settings(max_examples=25, deadline=None)
    @given(seed=seeds, omega=st.floats(-3, 3), gamma=st.floats(0, 2), t=st.floats(0, 6))
    def test_length_never_grows(self, kind, seed, omega, gamma, t):
        b = random_bloch(rng(seed))
        assert bloch_evolve(b, omega, kind, gamma, t).norm() <= b.norm() + 1e-12

    def test_dephasing_rate(self):
        out = bloch_evolve(BlochVector(1, 0, 0), 0.0, "dephasing", 0.7, 1.5)
        assert out.x == pytest.approx(math.exp(-2 * 0.7 * 1.5), abs=1e-14)

    def test_critical_bitflip_branch(self):
        # omega == gamma is the degenerate s = 0 case of the closed form
        b = BlochVector(0.2, 0.5, 0.1)
        oracle = expm(channels.bloch_generator(1.0, "bitflip", 1.0) * 2.0) @ b.as_array()
        assert np.allclose(bloch_evolve(b, 1.0, "bitflip", 1.0, 2.0).as_array(), oracle, atol=1e-10)

    def test_trajectory_csv(self, tmp_path):
        rows = channels.bloch_trajectory(BlochVector(1, 0, 0), 0.0, "dephasing", 1.0, np.linspace(0, 1, 5))
        path = tmp_path / "traj.csv"
        channels.write_trajectory_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,y,z" and len(lines) == 6

    def test_trajectory_rejects_unsorted_times(self):
        with pytest.raises(ValueError):
            channels.bloch_trajectory(BlochVector(1, 0, 0), 0.0, "dephasing", 1.0, [1.0, 0.5])
