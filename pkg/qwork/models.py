import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from qwork.core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DEFAULT_TOLERANCES,
    GaussianPacket,
    GridSpec,
    MomentumBasis,
    Operator,
    Tolerances,
    WaveFunction1D,
    check_edges,
    kinetic_operator,
    momentum_diagonal_operator,
    momentum_operator,
    position_operator,
    spread_width,
    tensor_product,
)
from qwork.densities import gaussian_or_point
from qwork.dynamics import (
    TwoTimeWindow,
    apply_gravity_propagator,
    gravity_propagator_factorized,
    heisenberg_evolve,
)
from qwork.errors import InvalidStateError, ParityError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GravityModel:
    m: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not math.isfinite(self.g):
            raise ValueError(f"g must be finite, got {self.g}")

    @property
    def force(self) -> float:
        return -self.m * self.g

    def potential(self, x):
        return self.m * self.g * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ElasticModel:
    m1: float = 1.0
    m2: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        for name in ("m1", "m2", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def total_mass(self) -> float:
        return self.m1 + self.m2

    @property
    def reduced_mass(self) -> float:
        return self.m1 * self.m2 / self.total_mass

    @property
    def omega(self) -> float:
        return math.sqrt(self.k / self.reduced_mass)

    @property
    def tau(self) -> float:
        return math.pi / self.omega


@dataclass(frozen=True)
class SpinModel:
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


class WorkSpectrumEntry(NamedTuple):
    eigenvalue: float
    label: tuple
    window: TwoTimeWindow


# gravity

def gravity_work_eigenvalue(model: GravityModel, window: TwoTimeWindow, p: float) -> float:
    return -model.g * window.delta * p + 0.5 * model.m * model.g ** 2 * (window.t2 ** 2 - window.t1 ** 2)


def gravity_work_spectrum(model: GravityModel, window: TwoTimeWindow, momenta) -> list[WorkSpectrumEntry]:
    return [WorkSpectrumEntry(gravity_work_eigenvalue(model, window, float(p)), (float(p),), window)
            for p in np.asarray(momenta, dtype=float)]


def gravity_work_operator(model: GravityModel, window: TwoTimeWindow, grid: GridSpec,
                          hbar: float = 1.0) -> Operator:
    """W(t2, t1) as a grid operator, diagonal in the DFT momentum basis."""
    values = gravity_work_eigenvalue(model, window, grid.momenta(hbar))
    return momentum_diagonal_operator(grid, values)


def gravity_power_expectation(model: GravityModel, p0: float, t: float) -> float:
    return model.force * (p0 / model.m - model.g * t)


def gravity_zero_work_momentum(model: GravityModel, window: TwoTimeWindow) -> float:
    return model.m * model.g * (window.t1 + window.t2) / 2.0


def gravity_hamiltonian(model: GravityModel, grid: GridSpec, hbar: float = 1.0) -> Operator:
    return kinetic_operator(grid, model.m, hbar) + position_operator(grid) * (model.m * model.g)


def gravity_kinetic_at(model: GravityModel, t: float, grid: GridSpec, hbar: float = 1.0) -> Operator:
    u = gravity_propagator_factorized(t, model.m, model.g, grid, hbar)
    return heisenberg_evolve(kinetic_operator(grid, model.m, hbar), u)


def gravity_potential_change(model: GravityModel, window: TwoTimeWindow, grid: GridSpec,
                             hbar: float = 1.0) -> Operator:
    """-Delta V = mg[X(t1) - X(t2)] from Heisenberg positions."""
    x = position_operator(grid)
    x1 = heisenberg_evolve(x, gravity_propagator_factorized(window.t1, model.m, model.g, grid, hbar))
    x2 = heisenberg_evolve(x, gravity_propagator_factorized(window.t2, model.m, model.g, grid, hbar))
    return (x1 - x2) * (model.m * model.g)


def _heisenberg_position_action(model: GravityModel, t: float, psi: WaveFunction1D, hbar: float) -> np.ndarray:
    grid = psi.grid
    moved = apply_gravity_propagator(psi.amplitudes, t, model.m, model.g, grid, hbar)
    return apply_gravity_propagator(grid.x * moved, t, model.m, model.g, grid, hbar, adjoint=True)


def measured_potential_commutator(model: GravityModel, window: TwoTimeWindow, psi: WaveFunction1D,
                                  hbar: float = 1.0) -> complex:
    """<psi|[V(t1), V(t2)]|psi> with V = mgX in the Heisenberg picture, measured on the grid."""
    check_edges(psi, "probe state")
    v1 = model.m * model.g * _heisenberg_position_action(model, window.t1, psi, hbar)
    v2 = model.m * model.g * _heisenberg_position_action(model, window.t2, psi, hbar)
    overlap = np.vdot(v1, v2) * psi.grid.dx
    value = complex(2j * overlap.imag)
    log.debug("measured <[V1,V2]> = %s over window (%g, %g)", value, window.t1, window.t2)
    return value


# elastic

def elastic_p1_coefficients(model: ElasticModel, t: float) -> tuple[float, float, float]:
    wt = model.omega * t
    m1, m2, big_m = model.m1, model.m2, model.total_mass
    a = (m1 + m2 * math.cos(wt)) / big_m
    b = (1.0 - math.cos(wt)) * m1 / big_m
    c = model.reduced_mass * model.omega * math.sin(wt)
    return a, b, c


def elastic_relative_coordinates(model: ElasticModel, p1, p2):
    """(p_cm, p_r) with p_r = mu (p2/m2 - p1/m1)."""
    p_cm = p1 + p2
    p_r = model.reduced_mass * (p2 / model.m2 - p1 / model.m1)
    return p_cm, p_r


def elastic_work_eigenvalue(model: ElasticModel, p1: float, p2: float) -> float:
    m1, m2, m_sq = model.m1, model.m2, model.total_mass ** 2
    return 2.0 * ((m1 - m2) / m_sq * p1 * p2 + m1 / m_sq * p2 ** 2 - m2 / m_sq * p1 ** 2)


def _check_special_times(u: int, v: int):
    if int(u) != u or int(v) != v:
        raise ParityError(f"u and v must be integers, got ({u}, {v})")
    if u < 0 or u % 2 != 0:
        raise ParityError(f"u must be an even non-negative integer, got {u}")
    if v % 2 != 1:
        raise ParityError(f"v must be odd, got {v}")
    if v <= u:
        raise ParityError(f"v must exceed u, got u={u}, v={v}")


def _two_particle_momenta(basis1: MomentumBasis, basis2: Optional[MomentumBasis]):
    basis2 = basis2 if basis2 is not None else basis1
    p1 = tensor_product(basis1.operator(), Operator.identity(len(basis2)))
    p2 = tensor_product(Operator.identity(len(basis1)), basis2.operator())
    return p1, p2


def elastic_work_operator_special(model: ElasticModel, u: int, v: int, basis1: MomentumBasis,
                                  basis2: Optional[MomentumBasis] = None) -> Operator:
    """W(v tau, u tau) on |p1>|p2>, subsystem 1 major."""
    _check_special_times(u, v)
    p1, p2 = _two_particle_momenta(basis1, basis2)
    m1, m2, m_sq = model.m1, model.m2, model.total_mass ** 2
    w = (p1 @ p2) * ((m1 - m2) / m_sq) + (p2 @ p2) * (m1 / m_sq) - (p1 @ p1) * (m2 / m_sq)
    return w * 2.0


def elastic_cm_work_operator(model: ElasticModel, basis1: MomentumBasis,
                             basis2: Optional[MomentumBasis] = None) -> Operator:
    """(2/M) P_cm P_r built from the laboratory momenta."""
    p1, p2 = _two_particle_momenta(basis1, basis2)
    p_cm, p_r = elastic_relative_coordinates(model, p1, p2)
    return (p_cm @ p_r) * (2.0 / model.total_mass)


def elastic_p1_operator(model: ElasticModel, t: float, cm_momenta: MomentumBasis, r_grid: GridSpec,
                        hbar: float = 1.0) -> Operator:
    """P1(t) on (discrete P_cm) x (relative-coordinate grid), X_r = x2 - x1."""
    a, b, c = elastic_p1_coefficients(model, t)
    n_cm, n_r = len(cm_momenta), r_grid.n_points
    p_cm = tensor_product(cm_momenta.operator(), Operator.identity(n_r))
    p_r = tensor_product(Operator.identity(n_cm), momentum_operator(r_grid, hbar))
    x_r = tensor_product(Operator.identity(n_cm), position_operator(r_grid))
    big_m = model.total_mass
    return p_cm * ((a * model.m1 + b * model.m2) / big_m) + p_r * (b - a) + x_r * c


def elastic_work_operator(model: ElasticModel, window: TwoTimeWindow, cm_momenta: MomentumBasis,
                          r_grid: GridSpec, hbar: float = 1.0) -> Operator:
    """K1(t2) - K1(t1) at general times; no eigensystem is claimed for it."""
    p_late = elastic_p1_operator(model, window.t2, cm_momenta, r_grid, hbar)
    p_early = elastic_p1_operator(model, window.t1, cm_momenta, r_grid, hbar)
    return (p_late @ p_late - p_early @ p_early) / (2.0 * model.m1)


def elastic_hamiltonian(model: ElasticModel, cm_momenta: MomentumBasis, r_grid: GridSpec,
                        hbar: float = 1.0) -> Operator:
    n_cm, n_r = len(cm_momenta), r_grid.n_points
    p_cm = cm_momenta.operator()
    h_cm = tensor_product(p_cm @ p_cm / (2.0 * model.total_mass), Operator.identity(n_r))
    x = position_operator(r_grid)
    h_r = kinetic_operator(r_grid, model.reduced_mass, hbar) + (x @ x) * (0.5 * model.k)
    return h_cm + tensor_product(Operator.identity(n_cm), h_r)


@dataclass(frozen=True)
class ZeroWorkWindow:
    window: TwoTimeWindow
    coefficient: float
    description: str = "-(2 mu omega / M) P_cm X_r"

    def operator(self, cm_momenta: MomentumBasis, r_grid: GridSpec) -> Operator:
        p_cm = cm_momenta.operator()
        return tensor_product(p_cm, position_operator(r_grid)) * self.coefficient


def elastic_zero_work_window(model: ElasticModel) -> ZeroWorkWindow:
    window = TwoTimeWindow(math.pi / (2.0 * model.omega), 3.0 * math.pi / (2.0 * model.omega))
    coefficient = -2.0 * model.reduced_mass * model.omega / model.total_mass
    return ZeroWorkWindow(window, coefficient)


def elastic_zero_work_moments(model: ElasticModel, cm_width: float, x_r: float,
                              x_r_width: float) -> tuple[float, float]:
    """Mean and sigma of the zero-work operator for a P_cm surrogate centered at 0."""
    kappa = elastic_zero_work_window(model).coefficient
    return 0.0, abs(kappa) * cm_width * math.sqrt(x_r ** 2 + x_r_width ** 2)


def gaussian_entanglement_alpha(m1: float, m2: float) -> float:
    if not m1 > 0 or not m2 > 0:
        raise ValueError(f"masses must be positive, got ({m1}, {m2})")
    return 0.5 * (m2 - m1) / (m1 + m2)


# free-particle displacement

def displacement_operator(mass: float, window: TwoTimeWindow, grid: GridSpec, hbar: float = 1.0) -> Operator:
    return momentum_operator(grid, hbar) * (window.delta / mass)


def displacement_observable_distribution(packet: GaussianPacket, mass: float, t: float, hbar: float = 1.0):
    return gaussian_or_point(packet.p0 * t / mass, packet.sigma_p(hbar) * abs(t) / mass)


def ehrenfest_time(packet: GaussianPacket, mass: float, hbar: float = 1.0) -> float:
    return 2.0 * mass * packet.sigma_x ** 2 / hbar


def bohmian_trajectory(packet: GaussianPacket, mass: float, x_init: float, t: float,
                       hbar: float = 1.0) -> float:
    if t < 0:
        raise ValueError(f"Bohmian trajectories run forward in time, got t={t}")
    stretch = spread_width(packet.sigma_x, t, mass, hbar) / packet.sigma_x
    return packet.x0 + packet.p0 * t / mass + (x_init - packet.x0) * stretch


# spin precession

def spin_operators(hbar: float = 1.0) -> tuple[Operator, Operator, Operator]:
    return PAULI_X * (hbar / 2), PAULI_Y * (hbar / 2), PAULI_Z * (hbar / 2)


def spin_hamiltonian(model: SpinModel, hbar: float = 1.0) -> Operator:
    return spin_operators(hbar)[2] * model.omega


def spin_propagator(model: SpinModel, t: float) -> Operator:
    phase = model.omega * t / 2.0
    return Operator.diagonal([np.exp(-1j * phase), np.exp(1j * phase)])


def spin_window(model: SpinModel) -> TwoTimeWindow:
    return TwoTimeWindow(0.0, math.pi / (2.0 * model.omega))


def spin_delta_sy_operator(model: SpinModel, hbar: float = 1.0) -> Operator:
    """S_y(pi/2 omega) - S_y(0) = S_x - S_y."""
    sx, sy, _ = spin_operators(hbar)
    return sx - sy


def spin_delta_sy_eigenvectors() -> dict[int, np.ndarray]:
    phase = np.exp(-1j * math.pi / 4)
    return {eps: np.array([1.0, eps * phase]) / math.sqrt(2.0) for eps in (1, -1)}


def normalized_qubit(prep, tolerances: Tolerances) -> np.ndarray:
    psi = np.asarray(prep, dtype=complex).ravel()
    if psi.shape != (2,):
        raise InvalidStateError(f"qubit preparation needs 2 amplitudes, got {psi.shape}")
    norm_sq = float(np.vdot(psi, psi).real)
    if abs(norm_sq - 1.0) > tolerances.norm:
        raise InvalidStateError(f"qubit preparation not normalized (|psi|^2 = {norm_sq!r})")
    return psi


def spin_observable_distribution(prep, hbar: float = 1.0,
                                 tolerances: Tolerances = DEFAULT_TOLERANCES) -> dict[int, float]:
    """Born probabilities of the delta S_y eigenvalues eps * hbar / sqrt(2)."""
    psi = normalized_qubit(prep, tolerances)
    return {eps: float(abs(np.vdot(u, psi)) ** 2) for eps, u in spin_delta_sy_eigenvectors().items()}


QUBIT_PREPARATIONS = {
    "zero": np.array([1.0, 0.0], dtype=complex),
    "one": np.array([0.0, 1.0], dtype=complex),
    "plus": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "minus": np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0),
    "y_plus": np.array([1.0, 1j], dtype=complex) / math.sqrt(2.0),
    "y_minus": np.array([1.0, -1j], dtype=complex) / math.sqrt(2.0),
}
