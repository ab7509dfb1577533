"""
Short-time Fourier transform, Gabor frames and weighted modulation norms.

The STFT is V_g f(x, xi) = int f(v) conj(g(v - x)) exp(-2 pi i v xi) dv,
sampled on a PhaseLattice whose points sit on the signal grid and its dual.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import signal as sps

import config
from modules.errors import CoarseLatticeError, ConfigurationError, GridMismatchError, NotAFrameError
from modules.grid_signal import Grid1D, PhasePoint, SampledSignal, fourier_array, tf_shift_columns
from modules.symplectic import as_matrix


@dataclass(frozen=True, eq=False)
class PhaseLattice:
    """
    Rectangular lattice x_values x xi_values in phase space.

    x values are multiples of the grid spacing, xi values multiples of the
    dual spacing 1/L, so every lattice point is exactly representable.
    """
    grid: Grid1D
    x_values: np.ndarray
    xi_values: np.ndarray

    def __post_init__(self):
        x_values = np.rint(np.asarray(self.x_values, dtype=float) / self.grid.spacing) * self.grid.spacing
        xi_values = np.rint(np.asarray(self.xi_values, dtype=float) / self.grid.dual_spacing) * self.grid.dual_spacing
        if x_values.ndim != 1 or xi_values.ndim != 1 or not len(x_values) or not len(xi_values):
            raise ConfigurationError("lattice needs non-empty 1-D x and xi value arrays")
        object.__setattr__(self, "x_values", x_values)
        object.__setattr__(self, "xi_values", xi_values)

    @classmethod
    def full(cls, grid: Grid1D) -> PhaseLattice:
        """Every grid point times every frequency: alpha = dx, beta = dxi."""
        return cls(grid, grid.points, grid.frequencies)

    @classmethod
    def from_steps(cls, grid: Grid1D, alpha: float, beta: float) -> PhaseLattice:
        """Full-span separable lattice alpha*Z x beta*Z, containing the origin."""
        a = _lattice_ratio(alpha, grid.spacing, grid.count, "alpha")
        b = _lattice_ratio(beta, grid.dual_spacing, grid.count, "beta")
        half = grid.count // 2
        return cls(grid, grid.points[half % a::a], grid.frequencies[half % b::b])

    @classmethod
    def square(cls, grid: Grid1D, radius: float = None, step: float = None) -> PhaseLattice:
        radius = config.lattice_radius if radius is None else radius
        step = config.lattice_step if step is None else step
        return cls.rectangular(grid, radius, step, radius, step)

    @classmethod
    def rectangular(cls, grid: Grid1D, x_radius: float, x_step: float, xi_radius: float, xi_step: float) -> PhaseLattice:
        if x_step <= 0 or xi_step <= 0:
            raise ConfigurationError("lattice steps must be positive")
        x_values = np.arange(-x_radius, x_radius + x_step / 2, x_step)
        xi_values = np.arange(-xi_radius, xi_radius + xi_step / 2, xi_step)
        return cls(grid, x_values, xi_values)

    @classmethod
    def symbol_lattice(cls, grid: Grid1D) -> PhaseLattice:
        """Narrow in x, long in xi: resolves decay away from the diagonal in frequency."""
        return cls.rectangular(grid, config.symbol_lattice_x_radius, config.lattice_step,
                               config.symbol_lattice_xi_radius, config.symbol_lattice_xi_step)

    @property
    def shape(self) -> tuple:
        return len(self.x_values), len(self.xi_values)

    @property
    def size(self) -> int:
        return len(self.x_values) * len(self.xi_values)

    @property
    def points(self) -> np.ndarray:
        """(size, 2) array, row-major: time index outer, frequency index inner."""
        n_x, n_xi = self.shape
        return np.column_stack([np.repeat(self.x_values, n_xi), np.tile(self.xi_values, n_x)])

    @property
    def x_indices(self) -> np.ndarray:
        return (np.rint(self.x_values / self.grid.spacing).astype(int) + self.grid.count // 2) % self.grid.count

    @property
    def xi_indices(self) -> np.ndarray:
        return (np.rint(self.xi_values / self.grid.dual_spacing).astype(int) + self.grid.count // 2) % self.grid.count

    @property
    def x_step(self) -> float:
        return float(np.min(np.diff(self.x_values))) if len(self.x_values) > 1 else self.grid.length

    @property
    def xi_step(self) -> float:
        return float(np.min(np.diff(self.xi_values))) if len(self.xi_values) > 1 else self.grid.count / self.grid.length

    @property
    def cell_area(self) -> float:
        return self.x_step * self.xi_step

    @property
    def inscribed_radius(self) -> float:
        """Radius of the largest origin-centered disc inside the lattice's bounding box."""
        return float(min(-np.min(self.x_values), np.max(self.x_values), -np.min(self.xi_values), np.max(self.xi_values)))

    def is_full(self) -> bool:
        return self.shape == (self.grid.count, self.grid.count)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "shape": list(self.shape),
                "x": self.x_values.tolist(), "xi": self.xi_values.tolist()}


def _lattice_ratio(step: float, spacing: float, count: int, name: str) -> int:
    ratio = step / spacing
    if ratio < 0.5 or not math.isclose(ratio, round(ratio), abs_tol=1e-9):
        raise ConfigurationError(f"{name} = {step} is not a positive multiple of the grid step {spacing}")
    ratio = int(round(ratio))
    if count % ratio:
        raise ConfigurationError(f"{name} = {step} does not divide the grid period")
    return ratio


@dataclass(frozen=True, eq=False)
class GaborCoefficients:
    """STFT values, shape (len(x_values), len(xi_values))."""
    lattice: PhaseLattice
    values: np.ndarray

    CSV_HEADER = ("x", "xi", "re", "im")

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.lattice.shape:
            raise GridMismatchError(f"coefficient shape {values.shape} does not match lattice {self.lattice.shape}")
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> Grid1D:
        return self.lattice.grid

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.lattice.cell_area)

    def peak(self) -> PhasePoint:
        return stft_peak(self)

    def csv_rows(self):
        for (x, xi), value in zip(self.lattice.points, self.values.ravel()):
            yield x, xi, value.real, value.imag

    def to_dict(self) -> dict:
        flat = self.values.ravel()
        return {"lattice": self.lattice.to_dict(), "re": flat.real.tolist(), "im": flat.imag.tolist()}


##################
# STFT
##################
def stft(f: SampledSignal, g: SampledSignal, lattice: PhaseLattice = None) -> GaborCoefficients:
    """
    Riemann-sum STFT, one FFT per time shift.

    Parameters
    ----------
    f: SampledSignal
        Analyzed signal.
    g: SampledSignal
        Window on the same grid.
    lattice: PhaseLattice
        Defaults to the full grid-resolution lattice.
    """
    f.check_grid(g)
    grid = f.grid
    lattice = lattice or PhaseLattice.full(grid)
    if not lattice.grid.compatible(grid):
        raise GridMismatchError("lattice belongs to another grid")

    shifts = np.rint(lattice.x_values / grid.spacing).astype(int)
    rows = (np.arange(grid.count)[:, None] - shifts[None, :]) % grid.count
    products = f.values[:, None] * np.conj(g.values[rows])
    spectra = fourier_array(products, grid)
    return GaborCoefficients(lattice, spectra[lattice.xi_indices, :].T)


def istft(coefficients: GaborCoefficients, g: SampledSignal) -> SampledSignal:
    """
    Adjoint STFT with the ||g||^-2 normalization; exact inverse of stft on
    the full lattice.
    """
    grid = g.grid
    lattice = coefficients.lattice
    if not lattice.grid.compatible(grid):
        raise GridMismatchError("coefficients belong to another grid")
    if not lattice.is_full():
        raise CoarseLatticeError(f"istft needs the full {grid.count} x {grid.count} lattice, "
                                 f"got {lattice.shape}; use frame_reconstruct for coarse lattices")

    columns = fourier_array(coefficients.values.T, grid, inverse=True)
    shifts = np.rint(lattice.x_values / grid.spacing).astype(int)
    rows = (np.arange(grid.count)[:, None] - shifts[None, :]) % grid.count
    values = np.sum(columns * g.values[rows], axis=1) * grid.spacing / g.norm() ** 2
    return SampledSignal(grid, values)


def _quadratic_vertex(magnitude: np.ndarray, lattice: PhaseLattice, i: int, k: int) -> Optional[np.ndarray]:
    """Vertex of the quadratic fit of log|V| on the 3 x 3 block around (i, k), None unless concave."""
    if not (0 < i < magnitude.shape[0] - 1 and 0 < k < magnitude.shape[1] - 1):
        return None
    rows, cols = [i - 1, i, i + 1], [k - 1, k, k + 1]
    block = magnitude[np.ix_(rows, cols)]
    if np.any(block <= 0):
        return None

    du, dv = np.meshgrid(lattice.x_values[rows] - lattice.x_values[i], lattice.xi_values[cols] - lattice.xi_values[k],
                         indexing="ij")
    du, dv = du.ravel(), dv.ravel()
    design = np.column_stack([np.ones_like(du), du, dv, du ** 2, du * dv, dv ** 2])
    coef, *_ = np.linalg.lstsq(design, np.log(block).ravel(), rcond=None)
    hessian = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    if np.any(np.linalg.eigvalsh(hessian) >= 0):
        return None
    offset = np.linalg.solve(hessian, -coef[1:3])
    return np.array([lattice.x_values[i] + offset[0], lattice.xi_values[k] + offset[1]])


def stft_peak(coefficients: GaborCoefficients) -> PhasePoint:
    """
    Phase-space center of |V|: Newton steps on log|V| from the discrete
    maximum, each a quadratic fit on the 3 x 3 block around the lattice
    point nearest to the current estimate.

    On an elongated ridge (a dispersed packet) the discrete maximum can sit
    several cells away from the vertex along the ridge, so a step is only
    rejected when its vertex leaves the lattice.
    """
    magnitude = coefficients.magnitude()
    lattice = coefficients.lattice
    i, k = np.unravel_index(np.argmax(magnitude), magnitude.shape)
    estimate = np.array([lattice.x_values[i], lattice.xi_values[k]])

    for _ in range(config.peak_iterations):
        vertex = _quadratic_vertex(magnitude, lattice, i, k)
        if vertex is None:
            break
        if not (np.min(lattice.x_values) <= vertex[0] <= np.max(lattice.x_values)
                and np.min(lattice.xi_values) <= vertex[1] <= np.max(lattice.xi_values)):
            break
        estimate = vertex
        nearest = int(np.argmin(np.abs(lattice.x_values - vertex[0]))), int(np.argmin(np.abs(lattice.xi_values - vertex[1])))
        if nearest == (i, k):
            break
        i, k = nearest
    return PhasePoint(float(estimate[0]), float(estimate[1]))


##################
# Gabor frames
##################
@dataclass(frozen=True, eq=False)
class GaborSystem:
    """
    Window g with time steps alpha and frequency steps beta.

    alpha / dx and beta / dxi must be integers dividing N.
    """
    window: SampledSignal
    alpha: float
    beta: float
    lattice: PhaseLattice = field(init=False)

    def __post_init__(self):
        if self.window.norm() <= 0:
            raise ConfigurationError("Gabor window must be nonzero")
        object.__setattr__(self, "lattice", PhaseLattice.from_steps(self.window.grid, self.alpha, self.beta))

    @property
    def grid(self) -> Grid1D:
        return self.window.grid

    @property
    def density(self) -> float:
        return 1 / (self.alpha * self.beta)

    def synthesis_matrix(self, window: SampledSignal = None) -> np.ndarray:
        """Columns pi(lambda) g over the lattice."""
        return tf_shift_columns(window or self.window, self.lattice.points)

    def frame_operator(self) -> np.ndarray:
        columns = self.synthesis_matrix()
        return self.grid.spacing * columns @ columns.conj().T

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "lattice_shape": list(self.lattice.shape),
                "density": self.density}


class FrameBounds(NamedTuple):
    lower: float
    upper: float

    @property
    def is_frame(self) -> bool:
        return self.lower > config.frame_tolerance * self.upper

    @property
    def condition(self) -> float:
        return self.upper / self.lower if self.is_frame else math.inf


def frame_bounds(system: GaborSystem) -> FrameBounds:
    """
    Extreme eigenvalues of the dense frame operator.

    A vanishing lower bound is reported through FrameBounds.is_frame rather
    than raised.
    """
    eigenvalues = np.linalg.eigvalsh(system.frame_operator())
    bounds = FrameBounds(max(float(eigenvalues[0]), 0.0), float(eigenvalues[-1]))
    logging.debug(f"frame bounds {bounds} at density {system.density}")
    return bounds


def dual_window(system: GaborSystem) -> SampledSignal:
    """Canonical dual window S^-1 g."""
    bounds = frame_bounds(system)
    if not bounds.is_frame:
        raise NotAFrameError(f"lower frame bound {bounds.lower:.3e} vanishes against upper bound {bounds.upper:.3e}")
    gamma = np.linalg.solve(system.frame_operator(), system.window.values)
    return SampledSignal(system.grid, gamma)


def frame_analysis(f: SampledSignal, system: GaborSystem) -> GaborCoefficients:
    """Coefficients <f, pi(lambda) g> on the system lattice."""
    f.check_grid(system.window)
    coefficients = system.grid.spacing * system.synthesis_matrix().conj().T @ f.values
    return GaborCoefficients(system.lattice, coefficients.reshape(system.lattice.shape))


def frame_reconstruct(coefficients: GaborCoefficients, system: GaborSystem, dual: SampledSignal = None) -> SampledSignal:
    """Synthesis sum_lambda c_lambda pi(lambda) gamma with the (canonical) dual window."""
    dual = dual or dual_window(system)
    values = system.synthesis_matrix(dual) @ coefficients.values.ravel()
    return SampledSignal(system.grid, values)


##################
# Weights and modulation norms
##################
WEIGHT_KINDS = ("vs", "tensor", "constant")


@dataclass(frozen=True)
class Weight:
    """
    Polynomial weight v_s(z) = <z>^s.

    kind "tensor" evaluates v_s on the second half of the coordinates only,
    i.e. 1 (x) v_s on phase space x phase space.
    """
    kind: str = "vs"
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ConfigurationError(f"unknown weight kind '{self.kind}'")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        match self.kind:
            case "constant":
                return np.ones(z.shape[:-1])
            case "vs":
                return (1 + np.sum(z ** 2, axis=-1)) ** (self.s / 2)
            case "tensor":
                return (1 + np.sum(z[..., z.shape[-1] // 2:] ** 2, axis=-1)) ** (self.s / 2)


def bracket(r) -> np.ndarray:
    """Japanese bracket <r> = (1 + r^2)^(1/2)."""
    return np.sqrt(1 + np.asarray(r, dtype=float) ** 2)


def _lp(values: np.ndarray, p: float, weight: float, axis: int) -> np.ndarray:
    if np.isinf(p):
        return np.max(values, axis=axis)
    return (np.sum(values ** p, axis=axis) * weight) ** (1 / p)


def modulation_norm(f: SampledSignal, g: SampledSignal, p: float = 2, q: float = None, m: Weight = None,
                    transform=None) -> float:
    """
    Discrete M^{p,q}_m norm: inner L^p over x, outer L^q over xi.

    Parameters
    ----------
    transform: SymplecticMatrix or array, optional
        Evaluate the weight as m(Az), the norm of M^p_{m o A}.

    Notes
    -----
    Sums over the full grid lattice with dx*dxi weights; sup norms are grid
    maxima.
    """
    q = p if q is None else q
    if p < 1 or q < 1:
        raise ConfigurationError(f"mixed norm exponents must be >= 1, got p = {p}, q = {q}")
    m = m or Weight("constant")
    coefficients = stft(f, g)
    lattice = coefficients.lattice
    z = lattice.points.reshape(*lattice.shape, 2)
    if transform is not None:
        z = z @ as_matrix(transform).T
    weighted = coefficients.magnitude() * m(z)
    inner = _lp(weighted, p, lattice.x_step, axis=0)
    return float(_lp(inner, q, lattice.xi_step, axis=0))


def weight_equivalence_check(m: Weight, transform, radius: float = None, step: float = 0.25) -> tuple:
    """
    Empirical constants C1 <= v_s(Az) / v_s(z) <= C2 over a square sweep.
    """
    if m.kind != "vs":
        raise ConfigurationError("weight equivalence is defined for v_s weights")
    radius = 2 * config.lattice_radius if radius is None else radius
    axis = np.arange(-radius, radius + step / 2, step)
    z = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    ratio = m(z @ as_matrix(transform).T) / m(z)
    return float(np.min(ratio)), float(np.max(ratio))


def subconvolution_constant(s: float, radius: float = 8.0, step: float = 0.125) -> float:
    """
    Discrete C0 with (v_s^-1 * v_s^-1)(z) <= C0 v_s^-1(z) on a square of the plane.
    """
    axis = np.arange(-radius, radius + step / 2, step)
    z = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1)
    inverse = 1 / Weight("vs", s)(z)
    convolution = sps.fftconvolve(inverse, inverse, mode="same") * step ** 2
    return float(np.max(convolution / inverse))
