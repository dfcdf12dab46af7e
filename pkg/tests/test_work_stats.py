import math

import numpy as np
import pytest
from scipy import stats

from qwork.core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    GaussianPacket,
    Operator,
    maximally_mixed,
    pure_state,
    random_density,
    random_hermitian,
    random_unitary,
    tensor_product,
)
from qwork.densities import DiscreteDistribution, PointMass
from qwork.dynamics import TwoTimeWindow, classical_leapfrog, hamiltonian_propagator
from qwork.errors import InvalidStateError, PreconditionError, VanishingWeightError
from qwork.models import (
    ElasticModel,
    GravityModel,
    SpinModel,
    elastic_work_eigenvalue,
    gravity_zero_work_momentum,
    spin_operators,
    spin_propagator,
)
from qwork.tpm import MeasurementResolution, Protocol, tpm_work_distribution
from qwork.work_stats import (
    Branch,
    SteeringEnsemble,
    WorkDistribution,
    conservation_element_of_reality,
    eigenstate_residual,
    gamma_pseudo_state,
    pseudo_joint_probabilities,
    sample_observable_work,
    steering_collapse,
    steering_variance,
    time_averaged_completeness_residual,
    time_mixture_probabilities,
    tpm_joint_probabilities,
    tpm_two_time_mean,
    two_time_mean,
    uncertainty_relation_check,
    work_distribution_cdf,
    work_distribution_observable,
    work_moments,
)
from tests.fixtures import KET_ONE, KET_PLUS, KET_ZERO, projector, suite_rng

FINE = MeasurementResolution(d_x=0.1, d_p=1e-4)
IDENTITY_2 = Operator.identity(2)


class TestObservableWorkDistribution:

    @pytest.mark.parametrize("p0", [-1.0, 0.5, 3.0])
    @pytest.mark.parametrize("sigma_x", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("window", [TwoTimeWindow(0.0, 1.0), TwoTimeWindow(0.25, 2.0), TwoTimeWindow(1.0, 4.0)])
    def test_equals_momentum_protocol(self, p0, sigma_x, window):
        model = GravityModel(m=1.5, g=0.8)
        packet = GaussianPacket(0.0, p0, sigma_x)
        observable = work_distribution_observable(model, packet, window).density
        tpm = tpm_work_distribution(model, packet, window, FINE, Protocol.TPM_P)
        assert observable.center == pytest.approx(tpm.center, abs=1e-12)
        assert observable.width == pytest.approx(tpm.width, abs=1e-12)

    def test_zero_work_momentum_centres_at_zero(self):
        model = GravityModel(m=2.0, g=1.5)
        window = TwoTimeWindow(0.5, 1.5)
        packet = GaussianPacket(0.0, gravity_zero_work_momentum(model, window), 1.0)
        dist = work_distribution_observable(model, packet, window)
        assert abs(dist.mean) < 1e-12
        assert dist.std > 0

    def test_degenerate_window(self, unit_gravity, unit_packet):
        dist = work_distribution_observable(unit_gravity, unit_packet, TwoTimeWindow(2.0, 2.0))
        assert isinstance(dist.density, PointMass)
        assert work_moments(dist, 1) == 0.0
        assert work_moments(dist, 2) == 0.0

    def test_moments(self, unit_gravity):
        packet = GaussianPacket(0.0, 2.0, 1.0)
        dist = work_distribution_observable(unit_gravity, packet, TwoTimeWindow(0.0, 1.0))
        assert work_moments(dist, 1) == pytest.approx(-1.5)
        assert work_moments(dist, 2) == pytest.approx(2.25 + 0.25)
        with pytest.raises(ValueError):
            work_moments(dist, 5)

    def test_cdf_at_centre(self, unit_gravity, unit_packet):
        dist = work_distribution_observable(unit_gravity, unit_packet, TwoTimeWindow(0.0, 1.0))
        assert work_distribution_cdf(dist, dist.mean) == pytest.approx(0.5)

    def test_discrete_tables_must_normalize(self):
        with pytest.raises(InvalidStateError):
            WorkDistribution(DiscreteDistribution([0.0, 1.0], [0.5, 0.4]), TwoTimeWindow(0.0, 1.0))

    def test_push_forward_samples(self, unit_gravity):
        packet = GaussianPacket(0.0, 1.0, 0.7)
        window = TwoTimeWindow(0.5, 1.5)
        n = 20_000
        samples = sample_observable_work(unit_gravity, packet, window, n, seed=3)
        dist = work_distribution_observable(unit_gravity, packet, window)
        assert stats.kstest(samples.values, dist.density.cdf).statistic < 1.63 / math.sqrt(n)

    @pytest.mark.parametrize("x0, p0", [(0.0, 0.0), (2.0, -1.0), (-5.0, 4.0)])
    def test_ehrenfest_correspondence(self, x0, p0):
        model = GravityModel(m=1.3, g=0.9)
        window = TwoTimeWindow(0.4, 2.2)
        force = lambda x: model.force
        x1, _ = classical_leapfrog(x0, p0, model.m, force, window.t1, 50)
        x2, _ = classical_leapfrog(x0, p0, model.m, force, window.t2, 50)
        classical = model.force * (x2 - x1)

        dist = work_distribution_observable(model, GaussianPacket(x0, p0, 1.0), window)
        assert dist.mean == pytest.approx(classical, rel=1e-8)


class TestGammaPseudoState:

    def test_negative_for_qubit_example(self):
        gamma = gamma_pseudo_state(pure_state(KET_ZERO), projector(KET_PLUS), IDENTITY_2)
        assert gamma.weight == pytest.approx(0.5)
        assert gamma.op.close_to(Operator(np.array([[1.0, 0.5], [0.5, 0.0]])), 1e-12)
        assert gamma.min_eigenvalue() < -1e-3
        assert not gamma.is_positive()
        assert gamma.op.is_hermitian(1e-10)
        assert abs(gamma.op.trace() - 1.0) < 1e-10

    def test_theta_profile(self):
        gamma = gamma_pseudo_state(pure_state(KET_ZERO), projector(KET_PLUS), IDENTITY_2)
        for theta in np.linspace(0.0, 2 * math.pi, 50):
            value = gamma.diagonal_element([math.cos(theta), math.sin(theta)])
            expected = math.cos(theta) * (math.cos(theta) + math.sin(theta))
            assert value == pytest.approx(expected, abs=1e-12)

    def test_negative_inside_the_window(self):
        theta = 0.6 * math.pi
        expected = math.cos(theta) * (math.cos(theta) + math.sin(theta))
        assert expected < 0
        gamma = gamma_pseudo_state(pure_state(KET_ZERO), projector(KET_PLUS), IDENTITY_2)
        assert gamma.diagonal_element([math.cos(theta), math.sin(theta)]) == pytest.approx(expected, abs=1e-12)

    def test_compatible_preparation_is_a_state(self):
        rho = pure_state(KET_PLUS)
        gamma = gamma_pseudo_state(rho, projector(KET_PLUS), IDENTITY_2)
        assert gamma.op.close_to(rho.op, 1e-12)
        assert gamma.is_positive()

    def test_evolved_projector_weight(self):
        # half a precession period carries |+> onto |->
        u = spin_propagator(SpinModel(1.0), math.pi)
        with pytest.raises(VanishingWeightError):
            gamma_pseudo_state(pure_state(KET_PLUS), projector(KET_PLUS), u)
        gamma = gamma_pseudo_state(pure_state(KET_PLUS), projector([1.0, -1.0]), u)
        assert gamma.weight == pytest.approx(1.0, abs=1e-12)

    def test_vanishing_weight(self):
        with pytest.raises(VanishingWeightError):
            gamma_pseudo_state(pure_state(KET_ZERO), projector(KET_ONE), IDENTITY_2)

    def test_projector_must_be_idempotent(self):
        with pytest.raises(PreconditionError):
            gamma_pseudo_state(pure_state(KET_ZERO), PAULI_X, IDENTITY_2)


class TestTwoTimeMeans:

    def test_identity_pair(self):
        rng = suite_rng(9, 0)
        u1, u2 = random_unitary(rng, 3), random_unitary(rng, 3)
        assert two_time_mean(Operator.identity(3), Operator.identity(3), u1, u2,
                             random_density(rng, 3)) == pytest.approx(1.0, abs=1e-12)

    def test_observable_mean_differs_from_measured_mean(self):
        rho = pure_state(KET_ZERO)
        a, b = projector(KET_PLUS), PAULI_Z * 0.5 + IDENTITY_2 * 0.5
        assert two_time_mean(a, b, IDENTITY_2, IDENTITY_2, rho) == pytest.approx(0.5, abs=1e-12)
        assert tpm_two_time_mean(a, b, IDENTITY_2, IDENTITY_2, rho) == pytest.approx(0.25, abs=1e-12)

    def test_delta_sy_mean_for_plus(self):
        model = SpinModel(1.0)
        _, sy, _ = spin_operators()
        rho = pure_state(KET_PLUS)
        u0, u1 = IDENTITY_2, spin_propagator(model, math.pi / 2)
        late = two_time_mean(IDENTITY_2, sy, u0, u1, rho)
        early = two_time_mean(sy, IDENTITY_2, u0, u1, rho)
        assert late - early == pytest.approx(0.5, abs=1e-12)

    def test_joint_tables(self):
        rng = suite_rng(9, 1)
        a, b = random_hermitian(rng, 3), random_hermitian(rng, 3)
        u1, u2 = random_unitary(rng, 3), random_unitary(rng, 3)
        rho = random_density(rng, 3)

        pseudo = pseudo_joint_probabilities(a, b, u1, u2, rho)
        measured = tpm_joint_probabilities(a, b, u1, u2, rho)
        assert pseudo.total == pytest.approx(1.0, abs=1e-10)
        assert measured.total == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(pseudo.marginal_first(), measured.marginal_first(), atol=1e-10)
        assert pseudo.mean_product() == pytest.approx(two_time_mean(a, b, u1, u2, rho), abs=1e-10)
        assert np.all(measured.probabilities >= -1e-12)

    def test_pseudo_table_can_go_negative(self):
        theta = 0.6 * math.pi
        pseudo = pseudo_joint_probabilities(projector(KET_PLUS), projector([math.cos(theta), math.sin(theta)]),
                                            IDENTITY_2, IDENTITY_2, pure_state(KET_ZERO))
        expected = 0.5 * math.cos(theta) * (math.cos(theta) + math.sin(theta))
        assert pseudo.total == pytest.approx(1.0, abs=1e-12)
        assert pseudo.probabilities[-1, -1] == pytest.approx(expected, abs=1e-12)
        assert pseudo.probabilities.min() < -1e-3


class TestTimeMixture:

    def family(self):
        model = SpinModel(1.0)
        return lambda t: spin_propagator(model, t)

    def test_probabilities_normalize(self):
        projectors = [projector(KET_PLUS), projector([1.0, -1.0])]
        probs = time_mixture_probabilities(pure_state(KET_PLUS), projectors, self.family(),
                                           TwoTimeWindow(0.0, 2 * math.pi))
        assert probs.sum() == pytest.approx(1.0, abs=1e-10)
        assert probs == pytest.approx([0.5, 0.5], abs=1e-10)

    def test_completeness_survives_averaging(self):
        projectors = [projector(KET_PLUS), projector([1.0, -1.0])]
        residual = time_averaged_completeness_residual(projectors, self.family(), TwoTimeWindow(0.3, 2.0))
        assert residual < 1e-10

    def test_eigenstate_residual(self):
        assert eigenstate_residual(PAULI_Z, pure_state(KET_ZERO)) == pytest.approx(0.0, abs=1e-14)
        assert eigenstate_residual(PAULI_Z, pure_state(KET_PLUS)) > 0.1


class TestUncertaintyRelation:

    def test_random_instances(self):
        for i in range(1000):
            dim = 2 + i % 7
            rng = suite_rng(50, i)
            h1, h2 = random_hermitian(rng, dim), random_hermitian(rng, dim)
            check = uncertainty_relation_check(h2 - h1, h1, h2, random_density(rng, dim))
            assert check.satisfied
            assert check.lhs - check.rhs >= -1e-10

    def test_common_eigenstate_is_tight(self):
        h1, h2 = PAULI_Z, PAULI_Z * 2.0
        check = uncertainty_relation_check(h2 - h1, h1, h2, pure_state(KET_ZERO))
        assert check.lhs == pytest.approx(0.0, abs=1e-12)
        assert check.rhs == pytest.approx(0.0, abs=1e-12)

    def test_maximally_mixed_has_no_commutator_term(self):
        check = uncertainty_relation_check(PAULI_Y - PAULI_X, PAULI_X, PAULI_Y, maximally_mixed(2))
        assert check.rhs == pytest.approx(0.0, abs=1e-12)
        assert check.satisfied

    def test_work_must_be_energy_difference(self):
        with pytest.raises(PreconditionError):
            uncertainty_relation_check(PAULI_Z, PAULI_X, PAULI_Y, maximally_mixed(2))


class TestSteering:

    def branch_values(self):
        model = ElasticModel(1.0, 2.0, 1.0)
        return elastic_work_eigenvalue(model, 1.0, 0.0), elastic_work_eigenvalue(model, 0.0, 0.0)

    def test_certain_branch(self):
        ensemble = SteeringEnsemble((1.0, 0.0), self.branch_values())
        assert steering_collapse(ensemble, Branch.A) == (pytest.approx(-4.0 / 9.0), 1.0)
        assert steering_variance(ensemble) == 0.0

    def test_balanced_branches(self):
        ensemble = SteeringEnsemble((1 / math.sqrt(2), 1j / math.sqrt(2)), self.branch_values())
        w_a, p_a = steering_collapse(ensemble, Branch.A)
        w_bar, p_bar = steering_collapse(ensemble, "a_bar")
        assert p_a + p_bar == 1.0
        assert p_a == pytest.approx(0.5)
        assert (w_a, w_bar) == (pytest.approx(-4.0 / 9.0), 0.0)
        assert steering_variance(ensemble) == pytest.approx(0.25 * (4.0 / 9.0) ** 2)

    @pytest.mark.parametrize("alpha", [0.1, 0.3, 0.77, 0.999])
    def test_probabilities_sum_to_one(self, alpha):
        ensemble = SteeringEnsemble((alpha, math.sqrt(1 - alpha ** 2)), (1.0, -1.0))
        assert sum(ensemble.branch_probabilities()) == 1.0

    def test_unnormalized(self):
        with pytest.raises(InvalidStateError):
            SteeringEnsemble((1.0, 1.0), (0.0, 1.0))


class TestConservation:

    def test_energy_difference_vanishes_identically(self):
        for i in range(5):
            rng = suite_rng(70, i)
            h = random_hermitian(rng, 6)
            rho = random_density(rng, 6)
            report = conservation_element_of_reality(rho, h, hamiltonian_propagator(h, 0.4),
                                                     hamiltonian_propagator(h, 1.9))
            assert abs(report.mean) < 1e-10
            assert report.sigma < 1e-10

    def test_foreign_unitary_rejected(self):
        rng = suite_rng(70, 10)
        h = random_hermitian(rng, 3)
        with pytest.raises(PreconditionError):
            conservation_element_of_reality(maximally_mixed(3), h, Operator.identity(3), random_unitary(rng, 3))

    def test_subsystem_flow(self):
        h_system = tensor_product(PAULI_Z, IDENTITY_2)
        h_ext = tensor_product(IDENTITY_2, PAULI_Z)
        coupling = tensor_product(PAULI_X, PAULI_X) + tensor_product(PAULI_Y, PAULI_Y)
        h_total = h_system + h_ext + coupling * 0.3
        u1, u2 = hamiltonian_propagator(h_total, 0.2), hamiltonian_propagator(h_total, 1.1)

        ground = pure_state([1.0, 0.0, 0.0, 0.0])
        report = conservation_element_of_reality(ground, h_total, u1, u2, h_system)
        assert report.system_sigma == pytest.approx(0.0, abs=1e-10)
        assert report.ext_sigma == pytest.approx(0.0, abs=1e-10)

        flipped = pure_state([0.0, 1.0, 0.0, 0.0])
        report = conservation_element_of_reality(flipped, h_total, u1, u2, h_system)
        assert abs(report.mean) < 1e-10 and report.sigma < 1e-10
        assert report.system_sigma > 1e-3
        assert report.ext_sigma == pytest.approx(report.system_sigma, abs=1e-10)
