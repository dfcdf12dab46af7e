import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from qwork.core import (
    DEFAULT_TOLERANCES,
    DensityOperator,
    GaussianPacket,
    Operator,
    Tolerances,
    _check_dims,
    anticommutator,
    commutator,
    commutator_expectation,
    expectation,
    hermitian_eigensystem,
    uncertainty,
)
from qwork.densities import Density, DiscreteDistribution, gaussian_or_point
from qwork.dynamics import (
    DEFAULT_SLICES,
    TwoTimeWindow,
    UnitaryFamily,
    heisenberg_evolve,
    time_average_map,
    time_average_operator,
)
from qwork.errors import InvalidStateError, PreconditionError, VanishingWeightError
from qwork.models import GravityModel, gravity_work_eigenvalue
from qwork.sampling import standard_normals
from qwork.tpm import SampleSet

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WorkDistribution:
    density: Density
    window: TwoTimeWindow
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        if isinstance(self.density, DiscreteDistribution):
            if abs(self.density.total - 1.0) > self.tolerances.norm:
                raise InvalidStateError(f"work table sums to {self.density.total!r}, not 1")

    @property
    def mean(self) -> float:
        return self.density.mean

    @property
    def std(self) -> float:
        return self.density.std


def work_distribution_observable(model: GravityModel, packet: GaussianPacket, window: TwoTimeWindow,
                                 hbar: float = 1.0) -> WorkDistribution:
    """
    Push-forward of the momentum density G(p0, hbar/2sigma_x) through the
    work eigenvalues w_p(t2, t1). A zero-length window gives a point mass at 0.
    """
    center = gravity_work_eigenvalue(model, window, packet.p0)
    width = abs(model.g) * window.delta * packet.sigma_p(hbar)
    return WorkDistribution(gaussian_or_point(center, width), window)


def work_moments(dist: WorkDistribution, k: int) -> float:
    return dist.density.moment(k)


def work_distribution_cdf(dist: WorkDistribution, w):
    return dist.density.cdf(w)


def sample_observable_work(model: GravityModel, packet: GaussianPacket, window: TwoTimeWindow,
                           n_trials: int, seed: int, hbar: float = 1.0, n_workers: int = 1) -> SampleSet:
    z = standard_normals(seed, n_trials, 1, n_workers=n_workers)[:, 0]
    momenta = packet.p0 + packet.sigma_p(hbar) * z
    return SampleSet(gravity_work_eigenvalue(model, window, momenta), seed)


# two-time pseudo-probabilities

@dataclass(frozen=True, eq=False)
class PseudoState:
    op: Operator
    weight: float
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        if not self.op.is_hermitian(self.tolerances.herm):
            raise InvalidStateError("pseudo-state must be Hermitian")
        tr = self.op.trace().real
        if abs(tr - 1.0) > self.tolerances.trace:
            raise InvalidStateError(f"pseudo-state trace {tr!r} != 1")
        if not -self.tolerances.psd <= self.weight <= 1.0 + self.tolerances.psd:
            raise InvalidStateError(f"weight {self.weight!r} outside [0, 1]")

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.op.entries)))

    def is_positive(self) -> bool:
        return self.min_eigenvalue() >= -self.tolerances.psd

    def diagonal_element(self, vector) -> float:
        v = np.asarray(vector, dtype=complex)
        return float(np.real(np.vdot(v, self.op.entries @ v)))


def gamma_pseudo_state(rho0: DensityOperator, projector: Operator, t1_unitary: Operator,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> PseudoState:
    """{rho0, Lambda_a(t1)}/2p with p = Tr[Lambda_a(t1) rho0]; not necessarily PSD."""
    _check_dims(rho0.op, projector)
    idempotency = float(np.max(np.abs(projector.entries @ projector.entries - projector.entries)))
    if idempotency > tolerances.recon:
        raise PreconditionError(f"projector is not idempotent (residual {idempotency:.3e})")

    lam = heisenberg_evolve(projector, t1_unitary, tolerances)
    weight = expectation(lam, rho0)
    if weight <= tolerances.psd:
        raise VanishingWeightError(f"outcome weight {weight:.3e} too small to condition on")

    # anticommutator already carries the 1/2
    gamma = anticommutator(rho0.op, lam) / weight
    return PseudoState(gamma, weight, tolerances)


def two_time_mean(a: Operator, b: Operator, u1: Operator, u2: Operator, rho0: DensityOperator,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    a_t1 = heisenberg_evolve(a, u1, tolerances)
    b_t2 = heisenberg_evolve(b, u2, tolerances)
    return expectation(anticommutator(a_t1, b_t2), rho0)


@dataclass(frozen=True, eq=False)
class JointTable:
    """probabilities[i, j] for first outcome a_values[i], second outcome b_values[j]."""
    a_values: np.ndarray
    b_values: np.ndarray
    probabilities: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))

    def mean_product(self) -> float:
        return float(np.sum(self.probabilities * np.outer(self.a_values, self.b_values)))

    def marginal_first(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)


def _evolved_components(o: Operator, u: Operator, tolerances: Tolerances):
    components = hermitian_eigensystem(o, tolerances)
    values = np.array([c.eigenvalue for c in components])
    projectors = [heisenberg_evolve(c.projector, u, tolerances).entries for c in components]
    return values, projectors


def pseudo_joint_probabilities(a: Operator, b: Operator, u1: Operator, u2: Operator, rho0: DensityOperator,
                               tolerances: Tolerances = DEFAULT_TOLERANCES) -> JointTable:
    """Tr[Lambda_b(t2) {rho0, Lambda_a(t1)}/2]; entries may be negative."""
    a_vals, a_proj = _evolved_components(a, u1, tolerances)
    b_vals, b_proj = _evolved_components(b, u2, tolerances)
    rho = rho0.entries
    table = np.array([[np.real(np.trace(lb @ (0.5 * (rho @ la + la @ rho)))) for lb in b_proj] for la in a_proj])
    return JointTable(a_vals, b_vals, table)


def tpm_joint_probabilities(a: Operator, b: Operator, u1: Operator, u2: Operator, rho0: DensityOperator,
                            tolerances: Tolerances = DEFAULT_TOLERANCES) -> JointTable:
    """p(b, t2 | a, t1) p(a, t1) with Lueders collapse after the first measurement."""
    a_vals, a_proj = _evolved_components(a, u1, tolerances)
    b_vals, b_proj = _evolved_components(b, u2, tolerances)
    rho = rho0.entries
    table = np.array([[np.real(np.trace(lb @ la @ rho @ la)) for lb in b_proj] for la in a_proj])
    return JointTable(a_vals, b_vals, table)


def tpm_two_time_mean(a: Operator, b: Operator, u1: Operator, u2: Operator, rho0: DensityOperator,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    return tpm_joint_probabilities(a, b, u1, u2, rho0, tolerances).mean_product()


# time-mixture statistics

def time_mixture_probabilities(rho0: DensityOperator, projectors: Sequence[Operator], u_of_t: UnitaryFamily,
                               window: TwoTimeWindow, n_slices: int = DEFAULT_SLICES) -> np.ndarray:
    mixture = time_average_map(rho0, u_of_t, window, n_slices)
    return np.array([expectation(p, mixture.rho) for p in projectors])


def time_averaged_completeness_residual(projectors: Sequence[Operator], u_of_t: UnitaryFamily,
                                        window: TwoTimeWindow, n_slices: int = DEFAULT_SLICES) -> float:
    total = np.zeros_like(projectors[0].entries)
    for p in projectors:
        total = total + time_average_operator(p, u_of_t, window, n_slices).entries
    return float(np.max(np.abs(total - np.eye(total.shape[0]))))


def eigenstate_residual(w: Operator, rho: DensityOperator) -> float:
    """||W rho - <W> rho||_F; zero iff rho lies in one eigenspace of W."""
    mean = expectation(w, rho)
    return float(np.linalg.norm(w.entries @ rho.entries - mean * rho.entries))


# uncertainty relation

class UncertaintyCheck(NamedTuple):
    lhs: float
    rhs: float
    satisfied: bool


def uncertainty_relation_check(w: Operator, h1: Operator, h2: Operator, rho0: DensityOperator,
                               tolerances: Tolerances = DEFAULT_TOLERANCES) -> UncertaintyCheck:
    """sigma_W (sigma_H1 + sigma_H2) >= |<[H1, H2]>| for W = H2 - H1."""
    if not w.close_to(h2 - h1, tolerances.recon):
        raise PreconditionError("uncertainty relation requires w = h2 - h1")

    lhs = uncertainty(w, rho0) * (uncertainty(h1, rho0) + uncertainty(h2, rho0))
    rhs = abs(commutator_expectation(h1, h2, rho0))
    return UncertaintyCheck(lhs, rhs, bool(lhs >= rhs - tolerances.recon))


# steering

class Branch(str, Enum):
    A = "a"
    A_BAR = "a_bar"


@dataclass(frozen=True)
class SteeringEnsemble:
    """alpha|a>|w> + beta|a_bar>|w_bar> with orthogonal ancilla labels."""
    amplitudes: tuple
    branch_work_values: tuple
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        alpha, beta = (complex(a) for a in self.amplitudes)
        norm_sq = abs(alpha) ** 2 + abs(beta) ** 2
        if abs(norm_sq - 1.0) > self.tolerances.norm:
            raise InvalidStateError(f"steering amplitudes not normalized (|alpha|^2+|beta|^2 = {norm_sq!r})")
        if len(self.branch_work_values) != 2:
            raise ValueError("need exactly two branch work values")
        object.__setattr__(self, "amplitudes", (alpha, beta))
        object.__setattr__(self, "branch_work_values", tuple(float(w) for w in self.branch_work_values))

    def branch_probabilities(self) -> tuple[float, float]:
        alpha, beta = self.amplitudes
        p_a = abs(alpha) ** 2 / (abs(alpha) ** 2 + abs(beta) ** 2)
        return p_a, 1.0 - p_a


def steering_collapse(ensemble: SteeringEnsemble, alice_outcome: Branch) -> tuple[float, float]:
    p_a, p_bar = ensemble.branch_probabilities()
    w, w_bar = ensemble.branch_work_values
    if Branch(alice_outcome) is Branch.A:
        return w, p_a
    return w_bar, p_bar


def steering_variance(ensemble: SteeringEnsemble) -> float:
    """Work variance over the branch mixture before Alice measures."""
    p_a, p_bar = ensemble.branch_probabilities()
    w, w_bar = ensemble.branch_work_values
    return p_a * p_bar * (w - w_bar) ** 2


# conservation

class ConservationReport(NamedTuple):
    mean: float
    sigma: float
    system_sigma: Optional[float] = None
    ext_sigma: Optional[float] = None


def _check_generated_by(u: Operator, h: Operator, tolerances: Tolerances, label: str):
    scale = max(1.0, float(np.max(np.abs(h.entries))))
    residual = float(np.max(np.abs(commutator(u, h).entries)))
    if residual > tolerances.recon * scale:
        raise PreconditionError(f"{label} does not commute with h_total (residual {residual:.3e})")


def conservation_element_of_reality(rho0: DensityOperator, h_total: Operator, u_t1: Operator, u_t2: Operator,
                                    h_system: Optional[Operator] = None,
                                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> ConservationReport:
    _check_generated_by(u_t1, h_total, tolerances, "u_t1")
    _check_generated_by(u_t2, h_total, tolerances, "u_t2")

    delta_h = heisenberg_evolve(h_total, u_t2, tolerances) - heisenberg_evolve(h_total, u_t1, tolerances)
    report = ConservationReport(expectation(delta_h, rho0), uncertainty(delta_h, rho0))
    if h_system is None:
        return report

    delta_s = heisenberg_evolve(h_system, u_t2, tolerances) - heisenberg_evolve(h_system, u_t1, tolerances)
    delta_ext = delta_h - delta_s
    return report._replace(system_sigma=uncertainty(delta_s, rho0), ext_sigma=uncertainty(delta_ext, rho0))
