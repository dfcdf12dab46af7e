import logging
import math
from contextlib import contextmanager
from typing import Callable

import numpy as np
from scipy.stats import kstest

from qwork.config import ConfigError, ExperimentConfig
from qwork.core import (
    PAULI_X,
    PAULI_Z,
    GaussianPacket,
    GridSpec,
    Operator,
    discrete_momentum_basis,
    expectation,
    fidelity,
    gaussian_wavefunction,
    hermitian_eigensystem,
    kinetic_energy,
    kinetic_operator,
    position_operator,
    potential_energy,
    pure_state,
    random_density,
    random_hermitian,
    uncertainty,
    uniform_momentum_basis,
    von_neumann_entropy,
)
from qwork.densities import GaussianDensity
from qwork.dynamics import (
    TwoTimeWindow,
    hamiltonian_propagator,
    propagate_gravity_factorized,
    split_operator_evolve,
    time_average_map,
)
from qwork.errors import QuantumWorkError
from qwork.models import (
    QUBIT_PREPARATIONS,
    ElasticModel,
    GravityModel,
    SpinModel,
    bohmian_trajectory,
    displacement_observable_distribution,
    displacement_operator,
    elastic_cm_work_operator,
    elastic_relative_coordinates,
    elastic_work_eigenvalue,
    elastic_work_operator,
    elastic_work_operator_special,
    elastic_zero_work_moments,
    elastic_zero_work_window,
    ehrenfest_time,
    gaussian_entanglement_alpha,
    gravity_power_expectation,
    gravity_work_eigenvalue,
    gravity_work_operator,
    gravity_zero_work_momentum,
    spin_delta_sy_operator,
    spin_observable_distribution,
    spin_propagator,
    spin_window,
)
from qwork.records import ResultRecord
from qwork.tpm import (
    MeasurementResolution,
    Protocol,
    tpm_displacement_distribution,
    tpm_displacement_monte_carlo,
    tpm_monte_carlo,
    tpm_power_limit,
    tpm_spin_joint,
    tpm_work_distribution,
)
from qwork.work_stats import (
    conservation_element_of_reality,
    eigenstate_residual,
    gamma_pseudo_state,
    pseudo_joint_probabilities,
    time_averaged_completeness_residual,
    time_mixture_probabilities,
    tpm_two_time_mean,
    two_time_mean,
    uncertainty_relation_check,
    work_distribution_observable,
)

log = logging.getLogger(__name__)

DENSITY_TABLE_POINTS = 65


@contextmanager
def _from_config(section: str = "parameters"):
    """ValueErrors raised while turning parameters into models are configuration errors."""
    try:
        yield
    except QuantumWorkError:
        raise
    except ValueError as e:
        raise ConfigError(section, str(e)) from e


def _grid(d: dict) -> GridSpec:
    return GridSpec(int(d["n_points"]), float(d["x_min"]), float(d["x_max"]))


def _packet(p: dict) -> GaussianPacket:
    return GaussianPacket(p["x0"], p["p0"], p["sigma_x"])


def _density_table(record: ResultRecord, name: str, density):
    if not isinstance(density, GaussianDensity):
        return
    values = np.linspace(density.center - 4 * density.width, density.center + 4 * density.width,
                         DENSITY_TABLE_POINTS)
    record.table(name, ["value", "density"], zip(values, density.pdf(values)))


def _evolve(psi, model: GravityModel, t: float, n_steps: int, hbar: float):
    if t == 0:
        return psi
    return split_operator_evolve(psi, model.potential, model.m, t, n_steps, hbar)


def run_gravity_work(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    hbar = p["hbar"]
    with _from_config():
        model = GravityModel(p["m"], p["g"])
        packet = _packet(p)
        window = TwoTimeWindow(p["t1"], p["t2"])
        grid = _grid(p["grid"])
        probe = _grid(p["probe_grid"])
    n_steps = int(p["n_steps"])

    dist = work_distribution_observable(model, packet, window, hbar)
    record.scalar("observable", "mean_work", dist.mean)
    record.scalar("observable", "sigma_work", dist.std)
    record.scalar("observable", "zero_work_momentum", gravity_zero_work_momentum(model, window))
    record.scalar("observable", "power_t1", gravity_power_expectation(model, packet.p0, window.t1))
    record.used("work_distribution_observable", "gravity_work_eigenvalue", "gravity_zero_work_momentum",
                "gravity_power_expectation")

    psi0 = gaussian_wavefunction(packet, grid, hbar)
    psi1 = _evolve(psi0, model, window.t1, n_steps, hbar)
    psi2 = _evolve(psi1, model, window.delta, n_steps, hbar)
    k1, k2 = kinetic_energy(psi1, model.m, hbar), kinetic_energy(psi2, model.m, hbar)
    e1 = k1 + potential_energy(psi1, model.potential)
    e2 = k2 + potential_energy(psi2, model.potential)
    mean = dist.mean
    record.scalar("split_operator", "delta_kinetic", k2 - k1)
    record.scalar("split_operator", "energy_work_error", abs(k2 - k1 - mean) / abs(mean) if mean else abs(k2 - k1))
    record.scalar("split_operator", "delta_total_energy", e2 - e1)
    record.used("gaussian_wavefunction", "split_operator_evolve")

    factorized = propagate_gravity_factorized(psi0, window.t2, model.m, model.g, hbar)
    record.scalar("split_operator", "factorized_fidelity", fidelity(factorized, psi2))
    record.used("propagate_gravity_factorized")

    w = gravity_work_operator(model, window, probe, hbar)
    basis = discrete_momentum_basis(probe, hbar)
    picks = np.linspace(0, len(basis) - 1, int(p["n_basis"])).round().astype(int)
    rows, worst = [], 0.0
    for j in picks:
        v = basis.vectors[:, j]
        expected = gravity_work_eigenvalue(model, window, basis.values[j])
        worst = max(worst, float(np.max(np.abs(w.apply(v) - expected * v))) / max(1.0, abs(expected)))
        rows.append((basis.values[j], expected))
    record.table("work_spectrum", ["momentum", "work"], rows)
    record.scalar("eigensystem", "max_relative_residual", worst)
    record.used("gravity_work_operator", "discrete_momentum_basis")


def run_gravity_tpm(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    hbar = p["hbar"]
    with _from_config():
        model = GravityModel(p["m"], p["g"])
        packet = _packet(p)
        window = TwoTimeWindow(p["t1"], p["t2"])
        res = MeasurementResolution(p["d_x"], p["d_p"])
    n_trials, seed = int(p["n_trials"]), int(p["seed"])

    observable = work_distribution_observable(model, packet, window, hbar)
    record.scalar("observable", "mean", observable.mean)
    record.scalar("observable", "width", observable.std)
    record.scalar("observable", "power", gravity_power_expectation(model, packet.p0, p["power_t"]))
    record.used("work_distribution_observable", "gravity_power_expectation")

    for protocol in Protocol:
        dist = tpm_work_distribution(model, packet, window, res, protocol, hbar)
        section = protocol.value
        record.scalar(section, "mean", dist.mean)
        record.scalar(section, "width", dist.std)
        record.scalar(section, "power", tpm_power_limit(model, packet.p0, p["power_t"], protocol))
        _density_table(record, f"{section}_density", dist)

        if n_trials > 0:
            samples = tpm_monte_carlo(model, packet, window, res, protocol, n_trials, seed, hbar,
                                      n_workers=n_workers, progress=progress)
            record.scalar(section, "mc_mean", samples.mean())
            record.scalar(section, "mc_std", samples.std())
            if isinstance(dist, GaussianDensity):
                record.scalar(section, "ks_statistic", kstest(samples.values, dist.cdf).statistic)
            record.sample(section, samples.values)
    record.used("tpm_work_distribution", "tpm_power_limit")
    if n_trials > 0:
        record.used("tpm_monte_carlo")


def run_elastic(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    with _from_config():
        model = ElasticModel(p["m1"], p["m2"], p["k"])
        basis = uniform_momentum_basis(int(p["n_basis"]), p["dp"])
    p1, p2 = p["p1"], p["p2"]
    record.scalar("model", "omega", model.omega)
    record.scalar("model", "tau", model.tau)
    record.scalar("model", "alpha", gaussian_entanglement_alpha(model.m1, model.m2))

    w = elastic_work_eigenvalue(model, p1, p2)
    p_cm, p_r = elastic_relative_coordinates(model, p1, p2)
    record.scalar("special_times", "work_eigenvalue", w)
    record.scalar("special_times", "cm_form", 2.0 / model.total_mass * p_cm * p_r)
    record.used("gaussian_entanglement_alpha", "elastic_work_eigenvalue", "elastic_relative_coordinates")

    op = elastic_work_operator_special(model, int(p["u"]), int(p["v"]), basis)
    components = hermitian_eigensystem(op)
    worst = 0.0
    n = len(basis)
    for i, q1 in enumerate(basis.values):
        for j, q2 in enumerate(basis.values):
            label = i * n + j
            value = next(c.eigenvalue for c in components if c.projector.entries[label, label].real > 0.5)
            worst = max(worst, abs(value - elastic_work_eigenvalue(model, q1, q2)))
    record.scalar("special_times", "brute_force_max_error", worst)
    record.scalar("special_times", "distinct_eigenvalues", len(components))
    lab_vs_cm = float(np.max(np.abs(op.entries - elastic_cm_work_operator(model, basis).entries)))
    record.scalar("special_times", "lab_vs_cm_max_error", lab_vs_cm)
    record.used("elastic_work_operator_special", "hermitian_eigensystem", "elastic_cm_work_operator")

    zero = elastic_zero_work_window(model)
    mean, sigma = elastic_zero_work_moments(model, p["cm_width"], p["x_r"], p["x_r_width"])
    record.scalar("zero_work", "t1", zero.window.t1)
    record.scalar("zero_work", "t2", zero.window.t2)
    record.scalar("zero_work", "coefficient", zero.coefficient)
    record.scalar("zero_work", "mean", mean)
    record.scalar("zero_work", "sigma", sigma)

    cm_basis = uniform_momentum_basis(4, p["cm_width"])
    r_grid = GridSpec(32, -8.0, 8.0)
    general = elastic_work_operator(model, zero.window, cm_basis, r_grid)
    residual = float(np.max(np.abs(general.entries - zero.operator(cm_basis, r_grid).entries)))
    record.scalar("zero_work", "general_time_residual", residual)
    record.used("elastic_zero_work_window", "elastic_work_operator", "elastic_p1_coefficients")


def run_displacement(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    hbar = p["hbar"]
    mass, t = p["m"], p["t"]
    with _from_config():
        packet = _packet(p)
        res = MeasurementResolution(p["d_x"], 1.0)
        grid = _grid(p["probe_grid"])

    observable = displacement_observable_distribution(packet, mass, t, hbar)
    tpm = tpm_displacement_distribution(packet, mass, t, res, hbar)
    record.scalar("observable", "center", observable.mean)
    record.scalar("observable", "width", observable.std)
    record.scalar("observable", "width_times_sigma_x", observable.std * packet.sigma_x)
    record.scalar("tpm", "center", tpm.mean)
    record.scalar("tpm", "width", tpm.std)
    _density_table(record, "observable_density", observable)
    _density_table(record, "tpm_density", tpm)
    record.used("displacement_observable_distribution", "tpm_displacement_distribution")

    rho = gaussian_wavefunction(packet, grid, hbar).density()
    op = displacement_operator(mass, TwoTimeWindow(0.0, t), grid, hbar)
    record.scalar("grid", "mean", expectation(op, rho))
    record.scalar("grid", "sigma", uncertainty(op, rho))
    record.used("displacement_operator", "gaussian_wavefunction")

    t_e = ehrenfest_time(packet, mass, hbar)
    record.scalar("bohmian", "ehrenfest_time", t_e)
    record.scalar("bohmian", "position", bohmian_trajectory(packet, mass, p["x_init"], t, hbar))
    record.scalar("bohmian", "asymptotic_slope", packet.p0 / mass + (p["x_init"] - packet.x0) / t_e)
    record.used("bohmian_trajectory", "ehrenfest_time")

    n_trials, seed = int(p["n_trials"]), int(p["seed"])
    if n_trials > 0:
        samples = tpm_displacement_monte_carlo(packet, mass, t, res, n_trials, seed, hbar,
                                               n_workers=n_workers, progress=progress)
        record.scalar("tpm", "mc_mean", samples.mean())
        record.scalar("tpm", "mc_std", samples.std())
        record.scalar("tpm", "ks_statistic", kstest(samples.values, tpm.cdf).statistic)
        record.sample("tpm", samples.values)
        record.used("tpm_displacement_monte_carlo")


def run_spin(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    hbar = p["hbar"]
    with _from_config():
        model = SpinModel(p["omega"])
    prep = QUBIT_PREPARATIONS[p["prep"]]

    dsy = spin_delta_sy_operator(model, hbar)
    eigenvalues = [c.eigenvalue for c in hermitian_eigensystem(dsy)]
    record.scalar("delta_sy", "eigenvalue_low", eigenvalues[0])
    record.scalar("delta_sy", "eigenvalue_high", eigenvalues[-1])

    probabilities = spin_observable_distribution(prep, hbar)
    record.table("observable_distribution", ["eigenvalue", "probability"],
                 [(eps * hbar / math.sqrt(2.0), probabilities[eps]) for eps in (-1, 1)])
    record.scalar("observable", "mean", expectation(dsy, pure_state(prep)))
    record.used("spin_delta_sy_operator", "hermitian_eigensystem", "spin_observable_distribution")

    joint = tpm_spin_joint(model, prep)
    for (eps, eps_next), prob in joint.probabilities.items():
        record.scalar("tpm_joint", f"p({eps:+d},{eps_next:+d})", prob)
    record.scalar("tpm", "mean_difference", joint.mean_difference(hbar))
    record.scalar("tpm", "mean_product", joint.mean_product(hbar))
    record.scalar("window", "t2", spin_window(model).t2)
    record.used("tpm_spin_joint")


def run_two_time(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    zero = pure_state([1.0, 0.0])
    plus_projector = pure_state([1.0, 1.0]).op
    identity = Operator.identity(2)

    gamma = gamma_pseudo_state(zero, plus_projector, identity)
    thetas = np.linspace(0.0, math.pi, int(p["theta_points"]))
    rows, worst = [], 0.0
    for theta in thetas:
        value = gamma.diagonal_element([math.cos(theta), math.sin(theta)])
        worst = max(worst, abs(value - math.cos(theta) * (math.cos(theta) + math.sin(theta))))
        rows.append((theta, value))
    record.table("gamma_diagonal", ["theta", "value"], rows)
    record.scalar("pseudo_state", "weight", gamma.weight)
    record.scalar("pseudo_state", "min_eigenvalue", gamma.min_eigenvalue())
    record.scalar("pseudo_state", "trace", gamma.op.trace().real)
    record.scalar("pseudo_state", "closed_form_max_error", worst)
    record.used("gamma_pseudo_state")

    record.scalar("two_time", "mean", two_time_mean(plus_projector, PAULI_Z, identity, identity, zero))
    record.scalar("two_time", "tpm_mean", tpm_two_time_mean(plus_projector, PAULI_Z, identity, identity, zero))
    pseudo = pseudo_joint_probabilities(plus_projector, PAULI_Z, identity, identity, zero)
    record.scalar("two_time", "pseudo_joint_min", float(np.min(pseudo.probabilities)))
    record.used("two_time_mean", "tpm_two_time_mean", "pseudo_joint_probabilities")

    with _from_config():
        model = SpinModel(p["omega"])
        window = TwoTimeWindow(p["t1"], p["t2"])
    n_slices = int(p["n_slices"])
    rho0 = pure_state(QUBIT_PREPARATIONS[p["prep"]])

    def u_of_t(t):
        return spin_propagator(model, t)

    mixture = time_average_map(rho0, u_of_t, window, n_slices)
    finer = time_average_map(rho0, u_of_t, window, 2 * n_slices)
    s0, s1 = von_neumann_entropy(rho0), von_neumann_entropy(mixture.rho)
    record.scalar("time_mixture", "entropy_initial", s0)
    record.scalar("time_mixture", "entropy_mixture", s1)
    record.scalar("time_mixture", "entropy_slice_doubling_change", abs(von_neumann_entropy(finer.rho) - s1))

    projectors = [c.projector for c in hermitian_eigensystem(PAULI_X)]
    probabilities = time_mixture_probabilities(rho0, projectors, u_of_t, window, n_slices)
    record.scalar("time_mixture", "p_sigma_x_minus", probabilities[0])
    record.scalar("time_mixture", "p_sigma_x_plus", probabilities[1])
    record.scalar("time_mixture", "completeness_residual",
                  time_averaged_completeness_residual(projectors, u_of_t, window, n_slices))
    record.scalar("time_mixture", "delta_sy_eigenstate_residual",
                  eigenstate_residual(spin_delta_sy_operator(model, p["hbar"]), mixture.rho))
    record.used("time_average_map", "von_neumann_entropy", "time_mixture_probabilities",
                "time_averaged_completeness_residual", "eigenstate_residual")


def run_uncertainty(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    seed = int(p["seed"])
    n = int(p["n_instances"])
    satisfied, worst_margin = 0, math.inf
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        dim = int(rng.integers(p["dim_min"], p["dim_max"] + 1))
        h1, h2 = random_hermitian(rng, dim), random_hermitian(rng, dim)
        rho0 = random_density(rng, dim)
        check = uncertainty_relation_check(h2 - h1, h1, h2, rho0)
        satisfied += check.satisfied
        worst_margin = min(worst_margin, check.lhs - check.rhs)
    record.scalar("uncertainty", "instances", n)
    record.scalar("uncertainty", "satisfied", satisfied)
    record.scalar("uncertainty", "min_margin", worst_margin)
    record.used("uncertainty_relation_check", "commutator_expectation")


def run_conservation(p: dict, record: ResultRecord, n_workers: int, progress: bool):
    hbar = p["hbar"]
    with _from_config():
        model = GravityModel(p["m"], p["g"])
        packet = _packet(p)
        window = TwoTimeWindow(p["t1"], p["t2"])
        grid = _grid(p["grid"])
        harmonic_grid = _grid(p["harmonic_grid"])
    n_steps = int(p["n_steps"])

    psi0 = gaussian_wavefunction(packet, grid, hbar)
    psi1 = _evolve(psi0, model, window.t1, n_steps, hbar)
    psi2 = _evolve(psi1, model, window.delta, n_steps, hbar)
    e1 = kinetic_energy(psi1, model.m, hbar) + potential_energy(psi1, model.potential)
    e2 = kinetic_energy(psi2, model.m, hbar) + potential_energy(psi2, model.potential)
    record.scalar("gravity_grid", "delta_total_energy", e2 - e1)
    record.used("split_operator_evolve")

    kinetic = kinetic_operator(harmonic_grid, model.m, hbar)
    x = position_operator(harmonic_grid)
    h = kinetic + (x @ x) * (0.5 * p["k"])
    rho0 = gaussian_wavefunction(packet, harmonic_grid, hbar).density()
    u1 = hamiltonian_propagator(h, window.t1, hbar)
    u2 = hamiltonian_propagator(h, window.t2, hbar)
    report = conservation_element_of_reality(rho0, h, u1, u2, h_system=kinetic)
    record.scalar("harmonic", "mean_delta_h", report.mean)
    record.scalar("harmonic", "sigma_delta_h", report.sigma)
    record.scalar("harmonic", "sigma_delta_h_system", report.system_sigma)
    record.scalar("harmonic", "sigma_delta_h_ext", report.ext_sigma)
    record.used("conservation_element_of_reality", "hamiltonian_propagator")

    p12 = gravity_zero_work_momentum(model, window)
    surrogate = GaussianPacket(packet.x0, p12, hbar / (2.0 * p["d_p"]))
    dist = work_distribution_observable(model, surrogate, window, hbar)
    record.scalar("zero_work", "momentum", p12)
    record.scalar("zero_work", "mean", dist.mean)
    record.scalar("zero_work", "sigma", dist.std)
    record.scalar("zero_work", "surrogate_bound", abs(model.g) * window.delta * p["d_p"])
    record.used("gravity_zero_work_momentum", "work_distribution_observable")


RUNNERS: dict[str, Callable] = {
    "gravity-work": run_gravity_work,
    "gravity-tpm": run_gravity_tpm,
    "elastic": run_elastic,
    "displacement": run_displacement,
    "spin": run_spin,
    "two-time": run_two_time,
    "uncertainty": run_uncertainty,
    "conservation": run_conservation,
}


def run_experiment(config: ExperimentConfig, n_workers: int = 1, progress: bool = False) -> ResultRecord:
    params = config.parameters
    seed = int(params["seed"]) if "seed" in params else None
    record = ResultRecord(experiment=config.experiment, parameters=params, seed=seed)
    log.info(f"Running {config.experiment}")
    try:
        RUNNERS[config.experiment](params, record, n_workers, progress)
    except (ConfigError, QuantumWorkError):
        raise
    except ValueError as e:
        raise QuantumWorkError(f"{config.experiment}: {e}") from e
    log.info(f"Finished {config.experiment}: {len(record.operations)} operations, "
             f"{sum(len(v) for v in record.scalars.values())} scalars")
    return record
