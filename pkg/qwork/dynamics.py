import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from qwork.core import (
    DEFAULT_TOLERANCES,
    DensityOperator,
    GridSpec,
    Operator,
    Tolerances,
    WaveFunction1D,
    _check_dims,
    as_density,
    check_edges,
    dft_matrix,
)
from qwork.errors import DegenerateWindowError, NormDriftError, NotUnitaryError

log = logging.getLogger(__name__)

NORM_DRIFT_LIMIT = 1e-6
DEFAULT_SLICES = 256

UnitaryFamily = Callable[[float], Operator]


@dataclass(frozen=True)
class TwoTimeWindow:
    t1: float
    t2: float

    def __post_init__(self):
        if not np.isfinite(self.t1) or not np.isfinite(self.t2):
            raise ValueError(f"window times must be finite, got ({self.t1}, {self.t2})")
        if self.t2 < self.t1:
            raise ValueError(f"t2 ({self.t2}) must not precede t1 ({self.t1})")

    @property
    def delta(self) -> float:
        return self.t2 - self.t1

    @property
    def is_degenerate(self) -> bool:
        return self.t2 == self.t1

    def shifted(self, s: float) -> "TwoTimeWindow":
        return TwoTimeWindow(self.t1 + s, self.t2 + s)


@dataclass(frozen=True, eq=False)
class TimeMixtureState:
    rho: DensityOperator
    window: TwoTimeWindow
    n_slices: int


def split_operator_evolve(psi: WaveFunction1D, potential: Callable[[np.ndarray], np.ndarray],
                          mass: float, t: float, n_steps: int, hbar: float = 1.0) -> WaveFunction1D:
    """
    Strang-split propagation: half potential kick, full kinetic drift in
    momentum space, half potential kick. Norm is checked after every step.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    if mass <= 0:
        raise ValueError(f"mass must be positive, got {mass}")

    grid = psi.grid
    dt = t / n_steps
    v = np.asarray(potential(grid.x), dtype=float)
    if v.shape != grid.x.shape:
        v = np.broadcast_to(v, grid.x.shape)

    half_kick = np.exp(-0.5j * v * dt / hbar)
    drift = np.exp(-0.5j * grid.momenta(hbar) ** 2 * dt / (mass * hbar))

    amplitudes = np.array(psi.amplitudes)
    worst = 0.0
    for step in range(n_steps):
        amplitudes = half_kick * np.fft.ifft(drift * np.fft.fft(half_kick * amplitudes))
        drift_now = abs(float(np.sum(np.abs(amplitudes) ** 2) * grid.dx) - 1.0)
        worst = max(worst, drift_now)
        if not drift_now <= NORM_DRIFT_LIMIT:
            raise NormDriftError(f"norm drifted by {drift_now:.3e} at step {step + 1}/{n_steps} (dt={dt:.3e})")

    log.debug("split-operator: %d steps, dt=%.3e, worst norm drift %.2e", n_steps, dt, worst)
    out = WaveFunction1D.normalized(grid, amplitudes)
    out = WaveFunction1D(grid, out.amplitudes, psi.tolerances)
    check_edges(out, "evolved wavefunction")
    return out


def _gravity_phases(t: float, m: float, g: float, grid: GridSpec, hbar: float):
    theta = m * g ** 2 * t ** 3 / (6.0 * hbar)
    p = grid.momenta(hbar)
    momentum_phase = np.exp(-1j * p ** 2 * t / (2.0 * m * hbar) + 1j * g * t ** 2 * p / (2.0 * hbar))
    position_phase = np.exp(-1j * theta) * np.exp(-1j * m * g * t * grid.x / hbar)
    return position_phase, momentum_phase


def gravity_propagator_factorized(t: float, m: float, g: float, grid: GridSpec, hbar: float = 1.0) -> Operator:
    """Dense e^{-iTheta} e^{-imgtX} e^{-iP^2 t/2m} e^{igt^2 P/2} on the grid."""
    position_phase, momentum_phase = _gravity_phases(t, m, g, grid, hbar)
    f = dft_matrix(grid)
    u = position_phase[:, None] * (f.conj().T @ (momentum_phase[:, None] * f))
    return Operator(u)


def apply_gravity_propagator(amplitudes: np.ndarray, t: float, m: float, g: float, grid: GridSpec,
                             hbar: float = 1.0, adjoint: bool = False) -> np.ndarray:
    """FFT action of the factorized propagator (or its adjoint) on raw grid amplitudes."""
    position_phase, momentum_phase = _gravity_phases(t, m, g, grid, hbar)
    if adjoint:
        return np.fft.ifft(momentum_phase.conj() * np.fft.fft(position_phase.conj() * amplitudes))
    return position_phase * np.fft.ifft(momentum_phase * np.fft.fft(amplitudes))


def propagate_gravity_factorized(psi: WaveFunction1D, t: float, m: float, g: float,
                                 hbar: float = 1.0) -> WaveFunction1D:
    amplitudes = apply_gravity_propagator(psi.amplitudes, t, m, g, psi.grid, hbar)
    out = WaveFunction1D.normalized(psi.grid, amplitudes)
    out = WaveFunction1D(psi.grid, out.amplitudes, psi.tolerances)
    check_edges(out, "free-fall wavefunction")
    return out


def heisenberg_evolve(o: Operator, u: Operator, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Operator:
    _check_dims(o, u)
    if not u.is_unitary(tolerances.unit):
        raise NotUnitaryError("Heisenberg evolution needs a unitary propagator")
    return Operator(u.entries.conj().T @ o.entries @ u.entries)


def hamiltonian_propagator(h: Operator, t: float, hbar: float = 1.0) -> Operator:
    return Operator(scipy.linalg.expm(-1j * h.entries * t / hbar))


def schrodinger_map(rho0: DensityOperator, u: Operator,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    _check_dims(rho0.op, u)
    if not u.is_unitary(tolerances.unit):
        raise NotUnitaryError("Schrodinger map needs a unitary propagator")
    return as_density(u.entries @ rho0.entries @ u.entries.conj().T, rho0.tolerances)


def trapezoid_weights(n_slices: int) -> np.ndarray:
    if n_slices < 2:
        raise ValueError(f"n_slices must be >= 2, got {n_slices}")
    w = np.ones(n_slices)
    w[0] = w[-1] = 0.5
    return w / w.sum()


def _window_samples(window: TwoTimeWindow, n_slices: int):
    if window.is_degenerate:
        raise DegenerateWindowError(
            f"time average over a zero-length window at t={window.t1}; use the single-time image instead")
    return np.linspace(window.t1, window.t2, n_slices), trapezoid_weights(n_slices)


def time_average_map(rho0: DensityOperator, u_of_t: UnitaryFamily, window: TwoTimeWindow,
                     n_slices: int = DEFAULT_SLICES) -> TimeMixtureState:
    times, weights = _window_samples(window, n_slices)

    acc = np.zeros((rho0.dim, rho0.dim), dtype=complex)
    # fixed summation order keeps repeated runs bit-identical
    for t, w in zip(times, weights):
        u = u_of_t(float(t)).entries
        acc += w * (u @ rho0.entries @ u.conj().T)

    log.debug("time-average map over [%g, %g] with %d slices", window.t1, window.t2, n_slices)
    return TimeMixtureState(as_density(acc, rho0.tolerances), window, n_slices)


def time_average_operator(o: Operator, u_of_t: UnitaryFamily, window: TwoTimeWindow,
                          n_slices: int = DEFAULT_SLICES) -> Operator:
    """Heisenberg dual of time_average_map with the same quadrature."""
    times, weights = _window_samples(window, n_slices)

    acc = np.zeros((o.dim, o.dim), dtype=complex)
    for t, w in zip(times, weights):
        u = u_of_t(float(t)).entries
        acc += w * (u.conj().T @ o.entries @ u)
    return Operator(acc)


def classical_leapfrog(x0: float, p0: float, mass: float, force: Callable[[float], float],
                       t: float, n_steps: int) -> tuple[float, float]:
    """Velocity-Verlet point-mass trajectory; returns (x(t), p(t))."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    dt = t / n_steps
    x, p = float(x0), float(p0)
    f = force(x)
    for _ in range(n_steps):
        p += 0.5 * dt * f
        x += dt * p / mass
        f = force(x)
        p += 0.5 * dt * f
    return x, p
