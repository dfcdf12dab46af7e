import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from qwork.core import DEFAULT_TOLERANCES, GaussianPacket, Tolerances, spread_width
from qwork.densities import GaussianDensity, PointMass, gaussian_or_point
from qwork.dynamics import TwoTimeWindow
from qwork.errors import ResolutionError
from qwork.models import (
    GravityModel,
    SpinModel,
    normalized_qubit,
    gravity_power_expectation,
    spin_propagator,
    spin_window,
)
from qwork.sampling import check_seed, standard_normals

log = logging.getLogger(__name__)

# TPM_p is only trusted for d_p at most this fraction of the packet's hbar/(2 sigma_x)
MOMENTUM_RESOLUTION_LIMIT = 1e-3


class MeasuredVariable(str, Enum):
    X = "x"
    P = "p"


class Protocol(str, Enum):
    TPM_X = "TPM_x"
    TPM_P = "TPM_p"

    @property
    def variable(self) -> MeasuredVariable:
        return MeasuredVariable.X if self is Protocol.TPM_X else MeasuredVariable.P


@dataclass(frozen=True)
class MeasurementResolution:
    d_x: float
    d_p: float

    def __post_init__(self):
        if not self.d_x > 0 or not self.d_p > 0:
            raise ValueError(f"resolutions must be positive, got d_x={self.d_x}, d_p={self.d_p}")


@dataclass(frozen=True, eq=False)
class SampleSet:
    values: np.ndarray
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return len(self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def std(self) -> float:
        return float(np.std(self.values))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.values, other.values)


def tpm_first_outcome_density(model: GravityModel, packet: GaussianPacket, t1: float,
                              variable: MeasuredVariable, hbar: float = 1.0) -> GaussianDensity:
    variable = MeasuredVariable(variable)
    if variable is MeasuredVariable.X:
        center = packet.x0 + packet.p0 * t1 / model.m - model.g * t1 ** 2 / 2.0
        return GaussianDensity(center, spread_width(packet.sigma_x, t1, model.m, hbar))
    return GaussianDensity(packet.p0 - model.m * model.g * t1, packet.sigma_p(hbar))


def tpm_conditional_density(model: GravityModel, outcome: float, window: TwoTimeWindow,
                            res: MeasurementResolution, variable: MeasuredVariable,
                            hbar: float = 1.0) -> GaussianDensity:
    """Second-outcome density after collapse onto a width-d Gaussian at the first outcome."""
    variable = MeasuredVariable(variable)
    dt = window.delta
    if variable is MeasuredVariable.X:
        return GaussianDensity(outcome - model.g * dt ** 2 / 2.0, spread_width(res.d_x, dt, model.m, hbar))
    return GaussianDensity(outcome - model.m * model.g * dt, res.d_p)


def _check_momentum_resolution(packet: GaussianPacket, res: MeasurementResolution, hbar: float):
    limit = MOMENTUM_RESOLUTION_LIMIT * packet.sigma_p(hbar)
    if res.d_p > limit:
        raise ResolutionError(
            f"TPM_p distribution holds only for d_p -> 0: d_p={res.d_p:.3e} exceeds {limit:.3e}")


def tpm_work_distribution(model: GravityModel, packet: GaussianPacket, window: TwoTimeWindow,
                          res: MeasurementResolution, protocol: Protocol,
                          hbar: float = 1.0) -> Union[GaussianDensity, PointMass]:
    protocol = Protocol(protocol)
    dt = window.delta
    f_g = model.force

    if protocol is Protocol.TPM_X:
        displacement = -model.g * dt ** 2 / 2.0
        return gaussian_or_point(f_g * displacement, abs(f_g) * spread_width(res.d_x, dt, model.m, hbar))

    _check_momentum_resolution(packet, res, hbar)
    displacement = packet.p0 * dt / model.m - model.g * (window.t2 ** 2 - window.t1 ** 2) / 2.0
    return gaussian_or_point(f_g * displacement, packet.sigma_p(hbar) * abs(model.g) * dt)


def _energy(model: GravityModel, variable: MeasuredVariable, outcome: np.ndarray) -> np.ndarray:
    if variable is MeasuredVariable.X:
        return model.m * model.g * outcome
    return outcome ** 2 / (2.0 * model.m)


def tpm_monte_carlo(model: GravityModel, packet: GaussianPacket, window: TwoTimeWindow,
                    res: MeasurementResolution, protocol: Protocol, n_trials: int, seed: int,
                    hbar: float = 1.0, n_workers: int = 1, progress: bool = False) -> SampleSet:
    """
    Runs the two-measurement chain once per trial. For TPM_x the recorded work
    is the potential energy released, e(x_i) - e(x_f); for TPM_p it is the
    kinetic energy gained, e(p_f) - e(p_i).
    """
    protocol = Protocol(protocol)
    variable = protocol.variable
    check_seed(seed)
    if variable is MeasuredVariable.P:
        _check_momentum_resolution(packet, res, hbar)
    z = standard_normals(seed, n_trials, 2, n_workers=n_workers, progress=progress)

    first = tpm_first_outcome_density(model, packet, window.t1, variable, hbar)
    first_outcomes = first.center + first.width * z[:, 0]

    # the conditional width does not depend on the first outcome
    reference = tpm_conditional_density(model, 0.0, window, res, variable, hbar)
    second_outcomes = first_outcomes + reference.center + reference.width * z[:, 1]

    e_i = _energy(model, variable, first_outcomes)
    e_f = _energy(model, variable, second_outcomes)
    work = e_i - e_f if variable is MeasuredVariable.X else e_f - e_i

    log.debug("%s Monte Carlo: %d trials, seed %d", protocol.value, n_trials, seed)
    return SampleSet(work, seed)


def tpm_power_limit(model: GravityModel, p0: float, t: float, protocol: Protocol) -> float:
    if Protocol(protocol) is Protocol.TPM_X:
        return 0.0
    return gravity_power_expectation(model, p0, t)


def tpm_displacement_distribution(packet: GaussianPacket, mass: float, t: float, res: MeasurementResolution,
                                  hbar: float = 1.0) -> GaussianDensity:
    return GaussianDensity(0.0, spread_width(res.d_x, t, mass, hbar))


def tpm_displacement_monte_carlo(packet: GaussianPacket, mass: float, t: float, res: MeasurementResolution,
                                 n_trials: int, seed: int, hbar: float = 1.0, n_workers: int = 1,
                                 progress: bool = False) -> SampleSet:
    z = standard_normals(seed, n_trials, 2, n_workers=n_workers, progress=progress)
    x_i = packet.x0 + packet.sigma_x * z[:, 0]
    x_f = x_i + spread_width(res.d_x, t, mass, hbar) * z[:, 1]
    return SampleSet(x_f - x_i, seed)


@dataclass(frozen=True)
class SpinJoint:
    """TPM joint probabilities keyed by (eps, eps') for S_y outcomes eps*hbar/2."""
    probabilities: dict

    def marginal_first(self) -> dict[int, float]:
        return {eps: sum(p for (a, _), p in self.probabilities.items() if a == eps) for eps in (1, -1)}

    def conditional(self, eps_first: int, eps_second: int) -> float:
        weight = self.marginal_first()[eps_first]
        if weight == 0:
            return 0.0
        return self.probabilities[(eps_first, eps_second)] / weight

    def mean_difference(self, hbar: float = 1.0) -> float:
        return sum(p * (b - a) * hbar / 2.0 for (a, b), p in self.probabilities.items())

    def mean_product(self, hbar: float = 1.0) -> float:
        return sum(p * a * b * hbar ** 2 / 4.0 for (a, b), p in self.probabilities.items())


def _sy_eigenvectors() -> dict[int, np.ndarray]:
    return {eps: np.array([1.0, eps * 1j]) / math.sqrt(2.0) for eps in (1, -1)}


def tpm_spin_joint(model: SpinModel, prep, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SpinJoint:
    """S_y measured at t=0 and again at t=pi/(2 omega)."""
    psi = normalized_qubit(prep, tolerances)
    u = spin_propagator(model, spin_window(model).t2).entries
    basis = _sy_eigenvectors()

    probabilities = {}
    for eps, y_first in basis.items():
        p_first = abs(np.vdot(y_first, psi)) ** 2
        evolved = u @ y_first
        for eps_next, y_second in basis.items():
            probabilities[(eps, eps_next)] = float(p_first * abs(np.vdot(y_second, evolved)) ** 2)
    return SpinJoint(probabilities)
