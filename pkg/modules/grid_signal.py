"""
Uniform periodic grids and the sampled signals living on them.

Samples sit at x_j = -L/2 + j*dx (j = 0..N-1) and the dual frequency grid at
xi_k = (k - N/2)/L. Fourier transforms follow the convention
f^(xi) = int f(x) exp(-2 pi i x xi) dx, realized by centered FFTs.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import special

import config
from modules.errors import ConfigurationError, GridMismatchError, WrapAroundWarning


@dataclass(frozen=True)
class Grid1D:
    """
    Centered periodic grid [-L/2, L/2) with N samples.

    Parameters
    ----------
    length: float
        Physical span L.
    count: int
        Number of samples N, even and at least 8.
    """
    length: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 8 or self.count % 2:
            raise ConfigurationError(f"grid needs an even sample count >= 8, got {self.count}")
        if not math.isfinite(self.length) or self.length <= 0:
            raise ConfigurationError(f"grid length must be positive, got {self.length}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def default(cls) -> Grid1D:
        return cls(config.grid_length, config.grid_count)

    @classmethod
    def self_dual(cls, count: int) -> Grid1D:
        """Grid with L**2 == N, so that dx == dxi."""
        return cls(math.sqrt(count), count)

    @property
    def spacing(self) -> float:
        return self.length / self.count

    @property
    def dual_spacing(self) -> float:
        return 1.0 / self.length

    @property
    def points(self) -> np.ndarray:
        return (np.arange(self.count) - self.count // 2) * self.spacing

    @property
    def frequencies(self) -> np.ndarray:
        return (np.arange(self.count) - self.count // 2) * self.dual_spacing

    @property
    def is_self_dual(self) -> bool:
        return math.isclose(self.spacing, self.dual_spacing, rel_tol=1e-12)

    def dual(self) -> Grid1D:
        """Frequency grid; a self-dual grid is its own dual."""
        if self.is_self_dual:
            return self
        return Grid1D(self.count / self.length, self.count)

    def refined(self) -> Grid1D:
        """Same span, twice the samples: holds every midpoint (x_j + x_l)/2."""
        return Grid1D(self.length, 2 * self.count)

    def margin_radius(self, margin: float = None) -> float:
        margin = config.margin if margin is None else margin
        return self.length / 2 * (1 - margin)

    def margin_mask(self, margin: float = None) -> np.ndarray:
        return np.abs(self.points) <= self.margin_radius(margin)

    def snap(self, x: float) -> int:
        """Index offset of the grid point nearest to x."""
        return int(np.rint(x / self.spacing))

    def compatible(self, other: Grid1D) -> bool:
        return self.count == other.count and math.isclose(self.length, other.length, rel_tol=1e-12)

    def to_dict(self) -> dict:
        return {"length": self.length, "count": self.count, "spacing": self.spacing,
                "dual_spacing": self.dual_spacing}


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """
    Complex samples of a function on a Grid1D.

    Parameters
    ----------
    grid: Grid1D
    values: array of N complex samples, frozen on construction
    flags: tuple of str
        Diagnostics attached by operations, e.g. "margin" when a dilation
        pushed mass outside the margin window.
    """
    grid: Grid1D
    values: np.ndarray
    flags: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.count,):
            raise GridMismatchError(f"expected {self.grid.count} samples, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flags", tuple(sorted(set(self.flags))))

    def norm(self) -> float:
        return math.sqrt(self.grid.spacing * float(np.vdot(self.values, self.values).real))

    def inner(self, other: SampledSignal) -> complex:
        """<self, other> = dx * sum(self * conj(other))."""
        self.check_grid(other)
        return complex(self.grid.spacing * np.vdot(other.values, self.values))

    def check_grid(self, other: Union[SampledSignal, Grid1D]):
        grid = other if isinstance(other, Grid1D) else other.grid
        if not self.grid.compatible(grid):
            raise GridMismatchError(f"grids differ: {self.grid} vs {grid}")

    def with_values(self, values: np.ndarray, flags: tuple = None) -> SampledSignal:
        return SampledSignal(self.grid, values, self.flags if flags is None else flags)

    def flagged(self, *flags: str) -> SampledSignal:
        return SampledSignal(self.grid, self.values, self.flags + flags)

    def __add__(self, other: SampledSignal) -> SampledSignal:
        self.check_grid(other)
        return SampledSignal(self.grid, self.values + other.values, self.flags + other.flags)

    def __sub__(self, other: SampledSignal) -> SampledSignal:
        self.check_grid(other)
        return SampledSignal(self.grid, self.values - other.values, self.flags + other.flags)

    def __mul__(self, scalar: complex) -> SampledSignal:
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> SampledSignal:
        return self.with_values(self.values / scalar)

    def __neg__(self) -> SampledSignal:
        return self.with_values(-self.values)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    xi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.xi], dtype=float)

    @classmethod
    def from_array(cls, z) -> PhasePoint:
        return cls(float(z[0]), float(z[1]))

    def snapped(self, grid: Grid1D) -> PhasePoint:
        """x moved to the nearest grid point; xi is left exact."""
        return PhasePoint(grid.snap(self.x) * grid.spacing, self.xi)


PointLike = Union[PhasePoint, tuple, list, np.ndarray]


def as_point(z: PointLike) -> PhasePoint:
    return z if isinstance(z, PhasePoint) else PhasePoint.from_array(z)


##################
# Fourier transforms
##################
def fourier_array(values: np.ndarray, grid: Grid1D, inverse: bool = False) -> np.ndarray:
    """
    Centered DFT along axis 0 with quadrature weights.

    Forward maps samples on `grid` to samples of f^ on grid.dual(); inverse
    maps samples on a frequency grid back to the time grid.
    """
    shifted = np.fft.ifftshift(values, axes=0)
    if inverse:
        transformed = np.fft.ifft(shifted, axis=0) * grid.count * grid.dual_spacing
    else:
        transformed = np.fft.fft(shifted, axis=0) * grid.spacing
    return np.fft.fftshift(transformed, axes=0)


def fourier(f: SampledSignal) -> SampledSignal:
    """
    2pi-normalized Fourier transform, unitary: dx*sum|f|^2 == dxi*sum|f^|^2.
    """
    return SampledSignal(f.grid.dual(), fourier_array(f.values, f.grid), f.flags)


def inverse_fourier(spectrum: SampledSignal) -> SampledSignal:
    """Inverse of fourier; `spectrum` lives on a frequency grid."""
    time_grid = spectrum.grid.dual()
    return SampledSignal(time_grid, fourier_array(spectrum.values, time_grid, inverse=True), spectrum.flags)


def spectral_multiplier(values: np.ndarray, grid: Grid1D, multiplier: np.ndarray) -> np.ndarray:
    """Apply m(D): multiply the spectrum by `multiplier` sampled on grid.frequencies."""
    multiplier = multiplier if values.ndim == 1 else multiplier[:, None]
    return fourier_array(multiplier * fourier_array(values, grid), grid, inverse=True)


def spectral_derivative(values: np.ndarray, grid: Grid1D, order: int = 1) -> np.ndarray:
    return spectral_multiplier(values, grid, (2j * np.pi * grid.frequencies) ** order)


def reflect(f: SampledSignal) -> SampledSignal:
    """f(-x) on the periodic grid: index j goes to N - j."""
    return f.with_values(np.roll(f.values[::-1], 1))


##################
# Time-frequency shifts
##################
def tf_shift(f: SampledSignal, z: PointLike) -> SampledSignal:
    """
    pi(z) f = M_xi T_x f, with x snapped to the grid and xi exact.

    Parameters
    ----------
    f: SampledSignal
    z: PhasePoint or pair (x, xi)
    """
    z = as_point(z)
    if abs(z.x) > f.grid.length / 2:
        warnings.warn(f"shift x = {z.x} exceeds L/2 = {f.grid.length / 2}; samples wrap around",
                      WrapAroundWarning, stacklevel=2)
    return f.with_values(shift_array(f.values, f.grid, z.x, z.xi))


def shift_array(values: np.ndarray, grid: Grid1D, x: float, xi: float) -> np.ndarray:
    phase = np.exp(2j * np.pi * xi * grid.points)
    shifted = np.roll(values, grid.snap(x), axis=0)
    return shifted * (phase if values.ndim == 1 else phase[:, None])


def tf_shift_columns(g: SampledSignal, points: np.ndarray) -> np.ndarray:
    """
    Matrix whose columns are pi(z_m) g for the rows z_m of `points`.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grid = g.grid
    if np.any(np.abs(points[:, 0]) > grid.length / 2):
        warnings.warn("lattice points beyond L/2 wrap around", WrapAroundWarning, stacklevel=2)
    shifts = np.rint(points[:, 0] / grid.spacing).astype(int)
    rows = (np.arange(grid.count)[:, None] - shifts[None, :]) % grid.count
    return g.values[rows] * np.exp(2j * np.pi * np.outer(grid.points, points[:, 1]))


##################
# Phase gauge
##################
def align_phase(reference: SampledSignal, candidate: SampledSignal) -> tuple:
    """
    Unimodular c minimizing ||reference - c * candidate||.

    Returns
    -------
    (c, distance)
    """
    reference.check_grid(candidate)
    overlap = np.vdot(candidate.values, reference.values)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0 + 0j
    distance = (reference - candidate * phase).norm()
    return complex(phase), distance


def relative_phase_error(reference: SampledSignal, candidate: SampledSignal) -> float:
    return align_phase(reference, candidate)[1] / reference.norm()


##################
# Test signals
##################
SIGNAL_KINDS = ("gaussian", "plane_wave", "chirp", "constant", "gabor_atom",
                "hermite", "perturbed_eigenmode", "random", "noise")


def make_test_signal(kind: str, params: dict = None, grid: Grid1D = None) -> SampledSignal:
    """
    Deterministic samples of a named analytic signal.

    Parameters
    ----------
    kind: str
        One of SIGNAL_KINDS.
    params: dict
        gaussian: scale (e^{-pi (x/scale)^2}); plane_wave: xi0; chirp: c
        (e^{i pi c x^2}); constant: value; gabor_atom: x, xi, scale;
        hermite: n; perturbed_eigenmode: n, mu, scale; random: seed,
        atoms, radius; noise: seed.
    grid: Grid1D
        Defaults to the desk grid from config.
    """
    params = dict(params or {})
    grid = grid or Grid1D.default()
    x = grid.points

    match kind:
        case "gaussian":
            values = np.exp(-np.pi * (x / float(params.get("scale", 1.0))) ** 2)
        case "plane_wave":
            values = np.exp(2j * np.pi * float(params.get("xi0", 1.0)) * x)
        case "chirp":
            values = np.exp(1j * np.pi * float(params.get("c", 1.0)) * x ** 2)
        case "constant":
            values = np.full(grid.count, complex(params.get("value", 1.0)))
        case "gabor_atom":
            window = make_test_signal("gaussian", {"scale": params.get("scale", 1.0)}, grid)
            return tf_shift(window, PhasePoint(float(params.get("x", 0.0)), float(params.get("xi", 0.0))))
        case "hermite":
            values = _hermite_function(int(params.get("n", 0)), x)
        case "perturbed_eigenmode":
            values = _perturbed_eigenmode(grid, int(params.get("n", 0)), float(params.get("mu", 3.0)),
                                          float(params.get("scale", 1.0)))
        case "random":
            values = _random_atoms(grid, int(params.get("seed", config.seed)),
                                   int(params.get("atoms", config.random_atoms)),
                                   float(params.get("radius", config.random_radius)))
        case "noise":
            rng = np.random.default_rng(int(params.get("seed", config.seed)))
            values = rng.standard_normal(grid.count) + 1j * rng.standard_normal(grid.count)
            values /= math.sqrt(grid.spacing * np.sum(np.abs(values) ** 2))
        case _:
            raise ConfigurationError(f"unknown test signal kind '{kind}', expected one of {SIGNAL_KINDS}")

    return SampledSignal(grid, values)


def _hermite_function(n: int, x: np.ndarray) -> np.ndarray:
    # L2-normalized eigenfunctions of (1/4pi) d^2/dx^2 - pi x^2, eigenvalue -(n + 1/2)
    if not 0 <= n <= 100:
        raise ConfigurationError(f"hermite index must lie in [0, 100], got {n}")
    log_norm = 0.25 * math.log(2) - 0.5 * (n * math.log(2) + special.gammaln(n + 1))
    return math.exp(log_norm) * special.eval_hermite(n, math.sqrt(2 * math.pi) * x) * np.exp(-np.pi * x ** 2)


def _perturbed_eigenmode(grid: Grid1D, n: int, mu: float, scale: float) -> np.ndarray:
    from modules.symplectic import QuadraticForm, quadratic_weyl_matrix

    hamiltonian = quadratic_weyl_matrix(QuadraticForm.harmonic_oscillator(), grid)
    hamiltonian = hamiltonian + np.diag(scale * np.abs(np.sin(grid.points)) ** mu)
    hamiltonian = (hamiltonian + hamiltonian.conj().T) / 2
    _, vectors = np.linalg.eigh(hamiltonian)
    if not 0 <= n < grid.count:
        raise ConfigurationError(f"eigenmode index {n} out of range")
    # the spectrum is negative, the ground state has the largest eigenvalue
    mode = vectors[:, -1 - n] / math.sqrt(grid.spacing)
    peak = mode[np.argmax(np.abs(mode))]
    return mode * (abs(peak) / peak)


def _random_atoms(grid: Grid1D, seed: int, atoms: int, radius: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    window = make_test_signal("gaussian", grid=grid)
    angles = rng.uniform(0, 2 * np.pi, atoms)
    radii = radius * np.sqrt(rng.uniform(0, 1, atoms))
    centers = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    weights = rng.standard_normal(atoms) + 1j * rng.standard_normal(atoms)
    values = tf_shift_columns(window, centers) @ weights
    return values / math.sqrt(grid.spacing * np.sum(np.abs(values) ** 2))


def signal_corpus(grid: Grid1D = None, size: int = 20, seed: int = None, radius: float = 2.0) -> list:
    """Seeded unit-norm superpositions of Gabor atoms, localized inside `radius`."""
    seed = config.seed if seed is None else seed
    return [make_test_signal("random", {"seed": seed + k, "radius": radius}, grid) for k in range(size)]


@dataclass(frozen=True)
class SignalSpec:
    """
    Named signal that can be sampled on any grid; used where a computation
    needs the same signal on two grids.
    """
    kind: str = "gaussian"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ConfigurationError(f"unknown test signal kind '{self.kind}'")

    def sample(self, grid: Grid1D = None) -> SampledSignal:
        return make_test_signal(self.kind, self.params, grid)

    __call__ = sample

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


SignalSource = Union[SampledSignal, Callable[[Grid1D], SampledSignal]]


def sample_source(source: SignalSource, grid: Grid1D) -> SampledSignal:
    if isinstance(source, SampledSignal):
        source.check_grid(grid)
        return source
    signal = source(grid)
    logging.debug(f"sampled {getattr(source, 'kind', 'signal')} on N = {grid.count}")
    return signal
