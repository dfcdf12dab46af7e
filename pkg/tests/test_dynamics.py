import math

import numpy as np
import pytest

from qwork.core import (
    GaussianPacket,
    GridSpec,
    Operator,
    PAULI_X,
    PAULI_Y,
    expectation,
    fidelity,
    gaussian_wavefunction,
    maximally_mixed,
    momentum_moment,
    position_moment,
    pure_state,
    random_density,
    random_hermitian,
    random_unitary,
    von_neumann_entropy,
)
from qwork.dynamics import (
    TwoTimeWindow,
    apply_gravity_propagator,
    classical_leapfrog,
    gravity_propagator_factorized,
    hamiltonian_propagator,
    heisenberg_evolve,
    propagate_gravity_factorized,
    schrodinger_map,
    split_operator_evolve,
    time_average_map,
    time_average_operator,
    trapezoid_weights,
)
from qwork.errors import DegenerateWindowError, GridLeakageError, NormDriftError, NotUnitaryError
from qwork.models import SpinModel, spin_hamiltonian, spin_propagator
from tests.fixtures import KET_PLUS, KET_ZERO, suite_rng


def free(x):
    return np.zeros_like(x)


def harmonic(x):
    return 0.5 * x ** 2


class TestTwoTimeWindow:

    def test_order_enforced(self):
        with pytest.raises(ValueError):
            TwoTimeWindow(2.0, 1.0)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            TwoTimeWindow(0.0, math.inf)

    def test_delta_and_shift(self):
        w = TwoTimeWindow(0.5, 2.0)
        assert w.delta == 1.5
        assert w.shifted(1.0) == TwoTimeWindow(1.5, 3.0)
        assert TwoTimeWindow(1.0, 1.0).is_degenerate


class TestSplitOperator:

    def test_free_drift(self, wide_grid):
        psi = gaussian_wavefunction(GaussianPacket(0.0, 2.0, 1.0), wide_grid)
        out = split_operator_evolve(psi, free, mass=1.0, t=1.0, n_steps=100)
        assert position_moment(out, 1) == pytest.approx(2.0, abs=1e-6)
        width = math.sqrt(position_moment(out, 2) - position_moment(out, 1) ** 2)
        assert width == pytest.approx(math.sqrt(1.25), abs=1e-6)

    def test_gravity_kick(self, wide_grid, unit_packet):
        psi = gaussian_wavefunction(unit_packet, wide_grid)
        out = split_operator_evolve(psi, lambda x: x, mass=1.0, t=1.0, n_steps=100)
        assert momentum_moment(out, 1) == pytest.approx(-1.0, abs=1e-6)
        assert position_moment(out, 1) == pytest.approx(-0.5, abs=1e-6)

    def test_harmonic_period_returns_packet(self):
        grid = GridSpec(1024, -20.0, 20.0)
        psi = gaussian_wavefunction(GaussianPacket(0.0, 0.0, 1.0), grid)
        out = split_operator_evolve(psi, harmonic, mass=1.0, t=2 * math.pi, n_steps=2000)
        assert fidelity(psi, out) >= 1 - 1e-6

    def test_second_order_convergence(self):
        grid = GridSpec(512, -16.0, 16.0)
        psi = gaussian_wavefunction(GaussianPacket(1.0, 0.5, 1.0), grid)
        reference = split_operator_evolve(psi, harmonic, 1.0, 1.0, 3200).amplitudes

        def error(n):
            out = split_operator_evolve(psi, harmonic, 1.0, 1.0, n).amplitudes
            return np.linalg.norm(out - reference) * math.sqrt(grid.dx)

        ratio = error(50) / error(100)
        assert 3.0 < ratio < 5.0

    def test_leaking_packet(self):
        grid = GridSpec(1024, -12.0, 12.0)
        psi = gaussian_wavefunction(GaussianPacket(0.0, 5.0, 1.0), grid)
        with pytest.raises(GridLeakageError):
            split_operator_evolve(psi, free, 1.0, 2.0, 100)

    def test_non_finite_potential_is_caught(self, wide_grid, unit_packet):
        psi = gaussian_wavefunction(unit_packet, wide_grid)

        def broken(x):
            v = np.zeros_like(x)
            v[len(x) // 2] = np.inf
            return v

        with pytest.raises(NormDriftError):
            split_operator_evolve(psi, broken, 1.0, 0.1, 5)

    def test_rejects_bad_arguments(self, wide_grid, unit_packet):
        psi = gaussian_wavefunction(unit_packet, wide_grid)
        with pytest.raises(ValueError):
            split_operator_evolve(psi, free, 1.0, 1.0, 0)
        with pytest.raises(ValueError):
            split_operator_evolve(psi, free, 0.0, 1.0, 10)


class TestGravityPropagator:

    def test_zero_time_is_identity(self):
        grid = GridSpec(64, -16.0, 16.0)
        assert gravity_propagator_factorized(0.0, 1.0, 1.0, grid).close_to(Operator.identity(64), 1e-10)

    @pytest.mark.parametrize("t", [0.3, 1.0, 2.5])
    def test_unitary(self, t):
        grid = GridSpec(64, -16.0, 16.0)
        assert gravity_propagator_factorized(t, 1.5, 0.7, grid).is_unitary(1e-10)

    def test_dense_and_fft_actions_agree(self):
        grid = GridSpec(128, -16.0, 16.0)
        psi = gaussian_wavefunction(GaussianPacket(0.5, -0.5, 1.25), grid)
        u = gravity_propagator_factorized(1.3, 2.0, 0.8, grid)
        fft = apply_gravity_propagator(psi.amplitudes, 1.3, 2.0, 0.8, grid)
        assert np.allclose(u.apply(psi.amplitudes), fft, atol=1e-10)

        back = apply_gravity_propagator(fft, 1.3, 2.0, 0.8, grid, adjoint=True)
        assert np.allclose(back, psi.amplitudes, atol=1e-10)

    def test_free_fall_mean(self, wide_grid, unit_packet):
        psi = gaussian_wavefunction(unit_packet, wide_grid)
        out = propagate_gravity_factorized(psi, 1.0, 1.0, 1.0)
        assert position_moment(out, 1) == pytest.approx(-0.5, abs=1e-6)

    @pytest.mark.parametrize("t", [1.0, 2.5, 5.0])
    @pytest.mark.parametrize("p0", [0.0, 3.0])
    def test_matches_split_operator(self, t, p0):
        grid = GridSpec(4096, -80.0, 80.0)
        psi = gaussian_wavefunction(GaussianPacket(0.0, p0, 1.0), grid)
        exact = propagate_gravity_factorized(psi, t, 1.0, 1.0)
        split = split_operator_evolve(psi, lambda x: x, 1.0, t, 200)
        assert fidelity(exact, split) >= 1 - 1e-8


class TestHeisenberg:

    def test_identity_propagator(self):
        rng = suite_rng(3, 0)
        o = random_hermitian(rng, 4)
        assert heisenberg_evolve(o, Operator.identity(4)).close_to(o, 1e-14)

    def test_spin_quarter_turn(self):
        u = spin_propagator(SpinModel(1.0), math.pi / 2)
        assert heisenberg_evolve(PAULI_Y, u).close_to(PAULI_X, 1e-12)

    def test_spectrum_preserved(self):
        rng = suite_rng(3, 1)
        o, u = random_hermitian(rng, 6), random_unitary(rng, 6)
        before = np.linalg.eigvalsh(o.entries)
        after = np.linalg.eigvalsh(heisenberg_evolve(o, u).entries)
        assert np.allclose(before, after, atol=1e-10)

    def test_linear(self):
        rng = suite_rng(3, 2)
        a, b, u = random_hermitian(rng, 3), random_hermitian(rng, 3), random_unitary(rng, 3)
        lhs = heisenberg_evolve(a * 2.0 + b, u)
        rhs = heisenberg_evolve(a, u) * 2.0 + heisenberg_evolve(b, u)
        assert lhs.close_to(rhs, 1e-12)

    def test_rejects_non_unitary(self):
        with pytest.raises(NotUnitaryError):
            heisenberg_evolve(PAULI_X, Operator.diagonal([1.0, 0.5]))

    def test_schrodinger_and_heisenberg_agree(self):
        rng = suite_rng(3, 3)
        rho, o = random_density(rng, 4), random_hermitian(rng, 4)
        u = hamiltonian_propagator(random_hermitian(rng, 4), 0.7)
        assert expectation(o, schrodinger_map(rho, u)) == pytest.approx(
            expectation(heisenberg_evolve(o, u), rho), abs=1e-12)


def spin_family(omega=1.0):
    model = SpinModel(omega)
    return lambda t: spin_propagator(model, t)


class TestTimeAverageMap:

    def test_weights(self):
        w = trapezoid_weights(5)
        assert w.sum() == pytest.approx(1.0)
        assert w[0] == w[-1] == pytest.approx(w[1] / 2)
        with pytest.raises(ValueError):
            trapezoid_weights(1)

    def test_stationary_state_unchanged(self):
        rho = pure_state(KET_ZERO)
        out = time_average_map(rho, spin_family(), TwoTimeWindow(0.0, 3.0))
        assert out.rho.op.close_to(rho.op, 1e-8)

    def test_full_period_dephases_plus(self):
        out = time_average_map(pure_state(KET_PLUS), spin_family(), TwoTimeWindow(0.0, 2 * math.pi))
        assert abs(out.rho.entries[0, 1]) < 1e-10
        assert von_neumann_entropy(out.rho) == pytest.approx(math.log(2), abs=1e-9)

    def test_quadrature_converged(self):
        window = TwoTimeWindow(0.0, 2 * math.pi)
        s256 = von_neumann_entropy(time_average_map(pure_state(KET_PLUS), spin_family(), window, 256).rho)
        s512 = von_neumann_entropy(time_average_map(pure_state(KET_PLUS), spin_family(), window, 512).rho)
        assert abs(s256 - s512) < 1e-6

    def test_degenerate_window(self):
        with pytest.raises(DegenerateWindowError):
            time_average_map(pure_state(KET_PLUS), spin_family(), TwoTimeWindow(1.0, 1.0))

    def test_short_window_tends_to_single_time_image(self):
        rho = pure_state(KET_PLUS)
        out = time_average_map(rho, spin_family(), TwoTimeWindow(1.0, 1.0 + 1e-6))
        single = schrodinger_map(rho, spin_propagator(SpinModel(1.0), 1.0))
        assert out.rho.op.close_to(single.op, 1e-5)

    def test_entropy_never_decreases(self):
        for i in range(100):
            rng = suite_rng(606, i)
            rho = random_density(rng, 2)
            h = random_hermitian(rng, 2)
            out = time_average_map(rho, lambda t: hamiltonian_propagator(h, t), TwoTimeWindow(0.0, 1.5), 64)
            assert von_neumann_entropy(out.rho) >= von_neumann_entropy(rho) - 1e-9

    def test_dual_map(self):
        rng = suite_rng(607, 0)
        rho, o = random_density(rng, 3), random_hermitian(rng, 3)
        h = random_hermitian(rng, 3)
        family = lambda t: hamiltonian_propagator(h, t)
        window = TwoTimeWindow(0.2, 1.7)
        forward = expectation(o, time_average_map(rho, family, window, 32).rho)
        dual = expectation(time_average_operator(o, family, window, 32), rho)
        assert forward == pytest.approx(dual, abs=1e-12)

    def test_maximally_mixed_is_fixed(self):
        out = time_average_map(maximally_mixed(2), spin_family(2.0), TwoTimeWindow(0.0, 1.0), 16)
        assert out.rho.op.close_to(maximally_mixed(2).op, 1e-12)


class TestClassicalLeapfrog:

    def test_constant_force_is_exact(self):
        x, p = classical_leapfrog(1.0, 2.0, 2.0, lambda x: -3.0, 1.5, 10)
        assert x == pytest.approx(1.0 + 2.0 * 1.5 / 2.0 - 0.5 * 1.5 * 1.5 ** 2, abs=1e-10)
        assert p == pytest.approx(2.0 - 3.0 * 1.5, abs=1e-10)

    def test_spin_hamiltonian_generates_precession(self):
        h = spin_hamiltonian(SpinModel(1.3))
        assert hamiltonian_propagator(h, 0.4).close_to(spin_propagator(SpinModel(1.3), 0.4), 1e-12)
