"""
Operator algebra, states and information-theoretic primitives.

Every operator is a dense complex matrix. Grid operators use the DFT layout
of numpy.fft: momentum p = hbar * k with k = 2*pi*fftfreq(n, dx).
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from qwork.errors import (
    DimensionMismatchError,
    GridLeakageError,
    InvalidStateError,
    NotHermitianError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    unit: float = 1e-10
    recon: float = 1e-10
    trace: float = 1e-10
    norm: float = 1e-10
    psd: float = 1e-10
    deg: float = 1e-8  # relative to the spectral range
    ent: float = 1e-9
    edge: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray

    # numpy scalars on the left defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionMismatchError(f"Operator needs a square matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Operator":
        return cls(np.eye(dim, dtype=complex))

    @classmethod
    def zeros(cls, dim: int) -> "Operator":
        return cls(np.zeros((dim, dim), dtype=complex))

    @classmethod
    def diagonal(cls, values) -> "Operator":
        return cls(np.diag(np.asarray(values, dtype=complex)))

    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def is_hermitian(self, tol: float = DEFAULT_TOLERANCES.herm) -> bool:
        return self.hermiticity_residual() <= tol

    def is_unitary(self, tol: float = DEFAULT_TOLERANCES.unit) -> bool:
        residual = self.entries @ self.entries.conj().T - np.eye(self.dim)
        return float(np.max(np.abs(residual))) <= tol

    def close_to(self, other: "Operator", tol: float = DEFAULT_TOLERANCES.recon) -> bool:
        _check_dims(self, other)
        return float(np.max(np.abs(self.entries - other.entries))) <= tol

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(vector, dtype=complex)

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries - other.entries)

    def __neg__(self) -> "Operator":
        return Operator(-self.entries)

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.entries @ other.entries)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.entries * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Operator":
        return Operator(self.entries / scalar)


def _check_dims(a: Operator, b: Operator):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


PAULI_X = Operator(np.array([[0, 1], [1, 0]]))
PAULI_Y = Operator(np.array([[0, -1j], [1j, 0]]))
PAULI_Z = Operator(np.array([[1, 0], [0, -1]]))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    op: Operator
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        tol = self.tolerances
        if not self.op.is_hermitian(tol.herm):
            raise InvalidStateError(
                f"density operator not Hermitian (residual {self.op.hermiticity_residual():.3e})")
        tr = self.op.trace().real
        if abs(tr - 1.0) > tol.trace:
            raise InvalidStateError(f"density operator trace {tr!r} != 1")
        lowest = float(np.min(np.linalg.eigvalsh(self.op.entries)))
        if lowest < -tol.psd:
            raise InvalidStateError(f"density operator has negative eigenvalue {lowest:.3e}")

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def entries(self) -> np.ndarray:
        return self.op.entries

    def purity(self) -> float:
        return float(np.real(np.trace(self.op.entries @ self.op.entries)))


def pure_state(vector) -> DensityOperator:
    v = np.asarray(vector, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise InvalidStateError("cannot build a state from the zero vector")
    v = v / n
    return DensityOperator(Operator(np.outer(v, v.conj())))


def maximally_mixed(dim: int) -> DensityOperator:
    return DensityOperator(Operator.identity(dim) / dim)


def as_density(matrix, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityOperator:
    """Hermitize and renormalize a nearly valid state, then validate it."""
    m = np.asarray(matrix, dtype=complex)
    m = 0.5 * (m + m.conj().T)
    m = m / np.trace(m).real
    return DensityOperator(Operator(m), tolerances)


def anticommutator(a: Operator, b: Operator) -> Operator:
    _check_dims(a, b)
    return Operator(0.5 * (a.entries @ b.entries + b.entries @ a.entries))


def commutator(a: Operator, b: Operator) -> Operator:
    _check_dims(a, b)
    return Operator(a.entries @ b.entries - b.entries @ a.entries)


def commutator_expectation(a: Operator, b: Operator, rho: DensityOperator) -> complex:
    _check_dims(a, rho.op)
    return complex(np.trace(commutator(a, b).entries @ rho.entries))


def expectation(o: Operator, rho: DensityOperator) -> float:
    _check_dims(o, rho.op)
    return float(np.real(np.trace(o.entries @ rho.entries)))


def variance(o: Operator, rho: DensityOperator) -> float:
    mean = expectation(o, rho)
    second = float(np.real(np.trace(o.entries @ o.entries @ rho.entries)))
    return max(second - mean * mean, 0.0)


def uncertainty(o: Operator, rho: DensityOperator) -> float:
    return float(np.sqrt(variance(o, rho)))


class SpectralComponent(NamedTuple):
    eigenvalue: float
    projector: Operator

    @property
    def rank(self) -> int:
        return int(round(self.projector.trace().real))


def hermitian_eigensystem(a: Operator, tolerances: Tolerances = DEFAULT_TOLERANCES) -> list[SpectralComponent]:
    if not a.is_hermitian(tolerances.herm):
        raise NotHermitianError(
            f"eigensystem needs a Hermitian operator (residual {a.hermiticity_residual():.3e})")

    values, vectors = scipy.linalg.eigh(0.5 * (a.entries + a.entries.conj().T))
    spread = float(values[-1] - values[0])
    # absolute floor keeps roundoff-split copies of one eigenvalue together
    gap_tol = max(tolerances.deg * spread, tolerances.herm * max(1.0, float(np.max(np.abs(values)))))

    groups: list[list[int]] = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= gap_tol:
            groups[-1].append(i)
        else:
            groups.append([i])

    components = []
    for idx in groups:
        v = vectors[:, idx]
        components.append(SpectralComponent(float(np.mean(values[idx])), Operator(v @ v.conj().T)))

    log.debug("eigensystem: dim=%d, %d distinct eigenvalues", a.dim, len(components))
    return components


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> Operator:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return Operator(0.5 * scale * (g + g.conj().T))


def random_unitary(rng: np.random.Generator, dim: int) -> Operator:
    return Operator(unitary_group.rvs(dim, random_state=rng))


def random_density(rng: np.random.Generator, dim: int) -> DensityOperator:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return as_density(g @ g.conj().T)


def tensor_product(a: Operator, b: Operator) -> Operator:
    return Operator(np.kron(a.entries, b.entries))


def von_neumann_entropy(rho: DensityOperator) -> float:
    values = np.linalg.eigvalsh(rho.entries)
    values = values[values > rho.tolerances.psd]
    return float(max(-np.sum(values * np.log(values)), 0.0))


@dataclass(frozen=True)
class GridSpec:
    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    def momenta(self, hbar: float = 1.0) -> np.ndarray:
        return 2.0 * np.pi * hbar * np.fft.fftfreq(self.n_points, d=self.dx)


@dataclass(frozen=True)
class GaussianPacket:
    x0: float
    p0: float
    sigma_x: float

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ValueError(f"sigma_x must be positive, got {self.sigma_x}")

    def sigma_p(self, hbar: float = 1.0) -> float:
        return hbar / (2.0 * self.sigma_x)

    def sigma_x_at(self, t: float, mass: float, hbar: float = 1.0) -> float:
        return spread_width(self.sigma_x, t, mass, hbar)


def spread_width(width: float, t: float, mass: float, hbar: float = 1.0) -> float:
    """Free-spreading width s(t) = s * sqrt(1 + (hbar t / 2 m s^2)^2)."""
    return float(width * np.sqrt(1.0 + (hbar * t / (2.0 * mass * width ** 2)) ** 2))


@dataclass(frozen=True, eq=False)
class WaveFunction1D:
    grid: GridSpec
    amplitudes: np.ndarray
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=complex)
        if psi.shape != (self.grid.n_points,):
            raise DimensionMismatchError(
                f"expected {self.grid.n_points} amplitudes, got shape {psi.shape}")
        norm = float(np.sum(np.abs(psi) ** 2) * self.grid.dx)
        if abs(norm - 1.0) > self.tolerances.norm:
            raise InvalidStateError(f"wavefunction norm {norm!r} != 1")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    @classmethod
    def normalized(cls, grid: GridSpec, amplitudes: np.ndarray) -> "WaveFunction1D":
        psi = np.asarray(amplitudes, dtype=complex)
        return cls(grid, psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def edge_amplitude(self) -> float:
        return float(max(abs(self.amplitudes[0]), abs(self.amplitudes[-1])))

    def as_vector(self) -> np.ndarray:
        """Unit-norm coefficient vector in the position basis (sum |c|^2 = 1)."""
        return self.amplitudes * np.sqrt(self.grid.dx)

    def density(self) -> DensityOperator:
        return pure_state(self.as_vector())

    def momentum_probabilities(self) -> np.ndarray:
        phi = np.fft.fft(self.amplitudes)
        weights = np.abs(phi) ** 2
        return weights / np.sum(weights)


def check_edges(psi: WaveFunction1D, what: str = "wavefunction"):
    edge = psi.edge_amplitude()
    if edge > psi.tolerances.edge:
        raise GridLeakageError(
            f"{what} leaks past the grid boundary (edge amplitude {edge:.3e} > {psi.tolerances.edge:.0e})")


def position_moment(psi: WaveFunction1D, k: int = 1) -> float:
    return float(np.sum(psi.grid.x ** k * np.abs(psi.amplitudes) ** 2) * psi.grid.dx)


def momentum_moment(psi: WaveFunction1D, k: int = 1, hbar: float = 1.0) -> float:
    return float(np.sum(psi.grid.momenta(hbar) ** k * psi.momentum_probabilities()))


def kinetic_energy(psi: WaveFunction1D, mass: float, hbar: float = 1.0) -> float:
    return momentum_moment(psi, 2, hbar) / (2.0 * mass)


def potential_energy(psi: WaveFunction1D, potential) -> float:
    v = np.broadcast_to(np.asarray(potential(psi.grid.x), dtype=float), psi.grid.x.shape)
    return float(np.sum(v * np.abs(psi.amplitudes) ** 2) * psi.grid.dx)


def fidelity(psi: WaveFunction1D, phi: WaveFunction1D) -> float:
    overlap = np.vdot(psi.amplitudes, phi.amplitudes) * psi.grid.dx
    return float(abs(overlap) ** 2)


def gaussian_wavefunction(packet: GaussianPacket, grid: GridSpec, hbar: float = 1.0,
                          tolerances: Tolerances = DEFAULT_TOLERANCES) -> WaveFunction1D:
    if packet.sigma_x < 4.0 * grid.dx:
        raise InvalidStateError(
            f"packet width {packet.sigma_x} under-resolved by grid spacing {grid.dx:.3e}")

    x = grid.x
    psi = (2.0 * np.pi * packet.sigma_x ** 2) ** -0.25 * np.exp(
        -((x - packet.x0) ** 2) / (4.0 * packet.sigma_x ** 2) + 1j * packet.p0 * x / hbar)

    wf = WaveFunction1D.normalized(grid, psi)
    wf = WaveFunction1D(grid, wf.amplitudes, tolerances)
    check_edges(wf, "Gaussian packet")
    return wf


def dft_matrix(grid: GridSpec) -> np.ndarray:
    return scipy.linalg.dft(grid.n_points, scale="sqrtn")


def momentum_diagonal_operator(grid: GridSpec, values: np.ndarray) -> Operator:
    """F^dag diag(values) F, with values listed in DFT momentum order."""
    f = dft_matrix(grid)
    return Operator(f.conj().T @ (np.asarray(values)[:, None] * f))


def position_operator(grid: GridSpec) -> Operator:
    return Operator.diagonal(grid.x)


def momentum_operator(grid: GridSpec, hbar: float = 1.0) -> Operator:
    return momentum_diagonal_operator(grid, grid.momenta(hbar))


def kinetic_operator(grid: GridSpec, mass: float, hbar: float = 1.0) -> Operator:
    return momentum_diagonal_operator(grid, grid.momenta(hbar) ** 2 / (2.0 * mass))


@dataclass(frozen=True, eq=False)
class MomentumBasis:
    """A finite set of momentum eigenvectors, the discrete reading of |p>."""
    values: np.ndarray
    vectors: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def operator(self) -> Operator:
        return Operator.diagonal(self.values)

    def projector(self, index: int) -> Operator:
        e = np.zeros(len(self), dtype=complex)
        e[index] = 1.0
        return Operator(np.outer(e, e))


def uniform_momentum_basis(n_points: int, spacing: float) -> MomentumBasis:
    """n_points momenta spacing*(-n/2 .. n/2-1), the sorted DFT layout."""
    if n_points < 1 or not spacing > 0:
        raise ValueError(f"need n_points >= 1 and spacing > 0, got ({n_points}, {spacing})")
    return MomentumBasis(spacing * (np.arange(n_points) - n_points // 2))


def discrete_momentum_basis(grid: GridSpec, hbar: float = 1.0) -> MomentumBasis:
    """Sorted DFT momenta with their position-space basis vectors as columns."""
    momenta = grid.momenta(hbar)
    order = np.argsort(momenta, kind="stable")
    f = dft_matrix(grid)
    return MomentumBasis(momenta[order], f.conj().T[:, order])
