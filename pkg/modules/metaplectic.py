"""
Metaplectic operators on sampled signals, Gabor matrices of linear operators
and envelope regression of their off-diagonal decay.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from sklearn.linear_model import LinearRegression

import config
from modules.errors import ConfigurationError, GridMismatchError, InsufficientShellsError, MarginWarning
from modules.gabor import PhaseLattice, bracket
from modules.grid_signal import (Grid1D, PhasePoint, PointLike, SampledSignal, align_phase, as_point, fourier_array,
                                 shift_array, tf_shift, tf_shift_columns)
from modules.symplectic import GeneratorDescriptor, SymplecticMatrix, as_matrix, factor_symplectic


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """
    Linear map on signals of one grid.

    Parameters
    ----------
    name: str
    grid: Grid1D
    action: callable
        Acts on arrays along axis 0, so a matrix of columns is mapped column by column.
    phase_map: SymplecticMatrix, "identity" or "unknown"
        Phase-space map along which the Gabor matrix is expected to concentrate.
    kernel: ndarray, optional
        Dense N x N matrix when already known.
    """
    name: str
    grid: Grid1D
    action: Callable[[np.ndarray], np.ndarray]
    phase_map: Union[SymplecticMatrix, str] = "unknown"
    kernel: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, f: SampledSignal) -> SampledSignal:
        f.check_grid(self.grid)
        return f.with_values(self.apply_array(f.values))

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        if values.shape[0] != self.grid.count:
            raise GridMismatchError(f"operator {self.name} acts on {self.grid.count} samples")
        if self.kernel is not None:
            return self.kernel @ values
        return self.action(values)

    def dense(self) -> np.ndarray:
        if self.kernel is not None:
            return self.kernel
        if "dense" not in self._cache:
            self._cache["dense"] = self.action(np.eye(self.grid.count, dtype=complex))
        return self._cache["dense"]

    @property
    def map_matrix(self) -> Optional[SymplecticMatrix]:
        if isinstance(self.phase_map, SymplecticMatrix):
            return self.phase_map
        return SymplecticMatrix.identity() if self.phase_map == "identity" else None

    def compose(self, other: LinearOperator) -> LinearOperator:
        """self o other."""
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("cannot compose operators on different grids")
        first, second = self.map_matrix, other.map_matrix
        phase_map = first @ second if first is not None and second is not None else "unknown"
        kernel = self.kernel @ other.kernel if self.kernel is not None and other.kernel is not None else None
        return LinearOperator(f"{self.name}*{other.name}", self.grid,
                              lambda values: self.apply_array(other.apply_array(values)), phase_map, kernel)

    def adjoint(self) -> LinearOperator:
        return LinearOperator.from_matrix(f"{self.name}^*", self.grid, self.dense().conj().T)

    @classmethod
    def from_matrix(cls, name: str, grid: Grid1D, matrix: np.ndarray, phase_map="unknown") -> LinearOperator:
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (grid.count, grid.count):
            raise GridMismatchError(f"kernel shape {matrix.shape} does not fit grid of {grid.count}")
        return cls(name, grid, lambda values: matrix @ values, phase_map, matrix)

    @classmethod
    def identity(cls, grid: Grid1D) -> LinearOperator:
        return cls("identity", grid, lambda values: np.array(values, dtype=complex), "identity")

    @classmethod
    def time_frequency_shift(cls, grid: Grid1D, z: PointLike) -> LinearOperator:
        z = as_point(z)
        return cls(f"shift({z.x},{z.xi})", grid, lambda values: shift_array(values, grid, z.x, z.xi))


##################
# Metaplectic generators
##################
@lru_cache(maxsize=32)
def _dilation_matrix(length: float, count: int, a: float) -> np.ndarray:
    # trigonometric interpolation of f at x / a
    grid = Grid1D(length, count)
    exponent = np.exp(2j * np.pi * np.outer(grid.points / a, grid.frequencies))
    matrix = abs(a) ** -0.5 * grid.dual_spacing * exponent @ fourier_array(np.eye(count, dtype=complex), grid)
    matrix.setflags(write=False)
    return matrix


def generator_array(generator: GeneratorDescriptor, values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """
    Apply one generator along axis 0.

    dilation(a): |a|^-1/2 f(x/a); chirp(c): e^{i pi c x^2} f; fourier(+1):
    forward transform; fourier(-1): inverse transform.
    """
    match generator.kind:
        case "chirp":
            phase = np.exp(1j * np.pi * generator.parameter * grid.points ** 2)
            return values * (phase if values.ndim == 1 else phase[:, None])
        case "fourier":
            if not grid.is_self_dual:
                raise ConfigurationError("fourier generator needs a self-dual grid (L**2 == N)")
            return fourier_array(values, grid, inverse=generator.parameter < 0)
        case "dilation":
            if generator.parameter == -1:
                return np.roll(values[::-1], 1, axis=0)
            return _dilation_matrix(grid.length, grid.count, generator.parameter) @ values


def _outside_fraction(values: np.ndarray, mask: np.ndarray) -> float:
    total = float(np.sum(np.abs(values) ** 2))
    return float(np.sum(np.abs(values[~mask]) ** 2)) / total if total > 0 else 0.0


def _margin_leak(before: np.ndarray, after: np.ndarray, grid: Grid1D) -> float:
    mask = grid.margin_mask()
    dual_mask = grid.dual().margin_mask()
    spatial = _outside_fraction(after, mask) - _outside_fraction(before, mask)
    spectral = (_outside_fraction(fourier_array(after, grid), dual_mask)
                - _outside_fraction(fourier_array(before, grid), dual_mask))
    return max(spatial, spectral, 0.0)


def apply_generator(generator: GeneratorDescriptor, f: SampledSignal) -> SampledSignal:
    """
    One generator on a signal. A dilation that pushes energy past the margin
    window, in time or in frequency, flags the result with "margin".
    """
    values = generator_array(generator, f.values, f.grid)
    flags = f.flags
    if generator.kind == "dilation":
        leak = _margin_leak(f.values, values, f.grid)
        if leak > config.margin_leak_tolerance:
            warnings.warn(f"dilation by {generator.parameter} moved {leak:.2e} of the energy past the margin",
                          MarginWarning, stacklevel=2)
            flags = flags + ("margin",)
    return SampledSignal(f.grid, values, flags)


def metaplectic_apply(symplectic: SymplecticMatrix, f: SampledSignal) -> SampledSignal:
    """
    mu(A) f, projectively: generators of factor_symplectic(A) applied right to left.
    """
    for generator in reversed(factor_symplectic(symplectic)):
        f = apply_generator(generator, f)
    return f


def metaplectic_kernel(symplectic: SymplecticMatrix, grid: Grid1D) -> np.ndarray:
    kernel = np.eye(grid.count, dtype=complex)
    for generator in reversed(factor_symplectic(symplectic)):
        kernel = generator_array(generator, kernel, grid)
    return kernel


def metaplectic_operator(symplectic: SymplecticMatrix, grid: Grid1D) -> LinearOperator:
    word = factor_symplectic(symplectic)

    def action(values):
        for generator in reversed(word):
            values = generator_array(generator, values, grid)
        return values

    return LinearOperator("metaplectic", grid, action, symplectic)


def intertwining_defect(symplectic: SymplecticMatrix, z: PointLike, g: SampledSignal) -> float:
    """
    min over |c| = 1 of ||pi(Az) mu(A) g - c mu(A) pi(z) g|| / ||g||, with z
    and Az snapped to the grid.
    """
    z = as_point(z).snapped(g.grid)
    image = PhasePoint.from_array(symplectic.apply(z.as_array()))
    left = tf_shift(metaplectic_apply(symplectic, g), image)
    right = metaplectic_apply(symplectic, tf_shift(g, z))
    return align_phase(left, right)[1] / g.norm()


##################
# Gabor matrices
##################
@dataclass(frozen=True, eq=False)
class GaborMatrixSample:
    """k(w, z) = <T pi(z) g, pi(w) g>, rows over w, columns over z."""
    in_lattice: PhaseLattice
    out_lattice: PhaseLattice
    values: np.ndarray

    CSV_HEADER = ("w_x", "w_xi", "z_x", "z_xi", "abs", "arg")

    def __post_init__(self):
        if self.values.shape != (self.out_lattice.size, self.in_lattice.size):
            raise GridMismatchError("Gabor matrix shape does not match its lattices")

    @property
    def in_points(self) -> np.ndarray:
        return self.in_lattice.points

    @property
    def out_points(self) -> np.ndarray:
        return self.out_lattice.points

    @property
    def filled_radius(self) -> float:
        """Pair distances sampled in every direction from the origin."""
        return min(self.in_lattice.inscribed_radius, self.out_lattice.inscribed_radius)

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def csv_rows(self):
        for row, w in enumerate(self.out_points):
            for col, z in enumerate(self.in_points):
                value = self.values[row, col]
                yield w[0], w[1], z[0], z[1], abs(value), float(np.angle(value))

    def to_dict(self) -> dict:
        return {"in_lattice": self.in_lattice.to_dict(), "out_lattice": self.out_lattice.to_dict(),
                "abs": self.magnitude().ravel().tolist(), "arg": np.angle(self.values).ravel().tolist()}


def gabor_matrix(operator: LinearOperator, g: SampledSignal, in_lattice: PhaseLattice = None,
                 out_lattice: PhaseLattice = None) -> GaborMatrixSample:
    """
    Dense Gabor matrix: one operator application per input lattice point.
    """
    g.check_grid(operator.grid)
    in_lattice = in_lattice or PhaseLattice.square(g.grid)
    out_lattice = out_lattice or in_lattice
    radius = g.grid.margin_radius()
    for lattice in (in_lattice, out_lattice):
        if np.max(np.abs(lattice.points)) > radius:
            raise ConfigurationError(f"lattice leaves the margin window |z| <= {radius:.3f}")

    images = operator.apply_array(tf_shift_columns(g, in_lattice.points))
    tests = tf_shift_columns(g, out_lattice.points)
    values = g.grid.spacing * tests.conj().T @ images
    logging.debug(f"Gabor matrix of {operator.name}: {values.shape}")
    return GaborMatrixSample(in_lattice, out_lattice, values)


##################
# Envelope regression
##################
@dataclass(frozen=True, eq=False)
class DecayFit:
    """
    Fitted envelope |k| <= C <r>^-s of a Gabor matrix.

    Parameters
    ----------
    s_fit: float
        Fitted exponent, capped at `cap`.
    constant: float
        Fitted C.
    residual: float
        RMS residual of the log-log regression.
    radii, maxima: ndarray
        Radius of the argmax pair and the maximum of each populated shell.
    cap: float
        Exponent at which the envelope reaches the roundoff floor (inf when it never does).
    passed: bool or None
        Certificate outcome when one was requested.
    """
    s_fit: float
    constant: float
    residual: float
    radii: np.ndarray
    maxima: np.ndarray
    cap: float = math.inf
    passed: Optional[bool] = None
    notes: dict = field(default_factory=dict)

    CSV_HEADER = ("radius", "max")

    def envelope_constant(self, s: float) -> float:
        """Smallest C with every shell maximum below C <r>^-s."""
        return float(np.max(self.maxima * bracket(self.radii) ** s))

    def certify(self, s: float, slack: float = None, **notes) -> DecayFit:
        slack = config.certificate_slack if slack is None else slack
        passed = bool(self.s_fit >= min(s, self.cap) - slack)
        return dataclasses.replace(self, passed=passed, notes={**self.notes, "target_s": s, **notes})

    def csv_rows(self):
        yield from zip(self.radii.tolist(), self.maxima.tolist())

    def to_dict(self) -> dict:
        return {"s_fit": self.s_fit, "C_fit": self.constant, "residual": self.residual, "cap": self.cap,
                "passed": self.passed, "notes": self.notes,
                "shells": [{"radius": r, "max": m} for r, m in self.csv_rows()]}


def shell_maxima(distances: np.ndarray, magnitude: np.ndarray, shells: int) -> tuple:
    """Per linear shell of [0, max r]: radius of the argmax pair and the maximum."""
    edges = np.linspace(0, np.max(distances), shells + 1)
    index = np.clip(np.digitize(distances, edges) - 1, 0, shells - 1)
    radii, maxima = [], []
    for shell in range(shells):
        members = np.flatnonzero(index == shell)
        if members.size:
            best = members[np.argmax(magnitude[members])]
            radii.append(distances[best])
            maxima.append(magnitude[best])
    return np.array(radii), np.array(maxima)


def fit_envelope(distances: np.ndarray, magnitude: np.ndarray, shells: int = None, min_shells: int = None,
                 min_radius: float = None, max_radius: float = None, floor: float = None) -> DecayFit:
    shells = shells or config.decay_shells
    min_shells = config.decay_min_shells if min_shells is None else min_shells
    min_radius = config.decay_min_radius if min_radius is None else min_radius
    max_radius = config.decay_max_radius if max_radius is None else max_radius
    floor = config.roundoff_floor if floor is None else floor

    radii, maxima = shell_maxima(distances, magnitude, shells)
    if len(radii) < min_shells:
        raise InsufficientShellsError(f"only {len(radii)} of {shells} shells populated, need {min_shells}")

    peak = float(np.max(magnitude))
    if peak == 0:
        return DecayFit(math.inf, 0.0, 0.0, radii, maxima, math.inf, notes={"zero_operator": True})

    floor_value = floor * peak
    below = maxima <= floor_value
    cap = math.inf
    if np.any(below):
        log_bracket = math.log(bracket(radii[below][0]))
        if log_bracket > 0:
            cap = math.log(peak / floor_value) / log_bracket

    selected = (radii >= min_radius) & (radii <= max_radius) & ~below
    if np.count_nonzero(selected) < 3:
        logging.debug(f"{np.count_nonzero(selected)} shells in the fit range, reporting the cap {cap}")
        return DecayFit(cap, peak, 0.0, radii, maxima, cap)

    log_r = np.log(bracket(radii[selected]))[:, None]
    log_m = np.log(maxima[selected])
    model = LinearRegression().fit(log_r, log_m)
    residual = float(np.sqrt(np.mean((model.predict(log_r) - log_m) ** 2)))
    s_fit = min(-float(model.coef_[0]), cap)
    return DecayFit(s_fit, float(math.exp(model.intercept_)), residual, radii, maxima, cap)


def _pair_distances(sample: GaborMatrixSample, transform=None) -> np.ndarray:
    matrix = np.eye(2) if transform is None else as_matrix(transform)
    mapped = sample.in_points @ matrix.T
    return np.linalg.norm(sample.out_points[:, None, :] - mapped[None, :, :], axis=-1).ravel()


def decay_fit(sample: GaborMatrixSample, transform=None, **options) -> DecayFit:
    """
    Regress log shell maxima of |k(w, z)| against log <w - Az>.

    Without an explicit max_radius the fit stops at the inscribed radius of
    the smaller lattice: beyond it a ridge w = Bz of a misaligned map B runs
    out of lattice points and its shells look like decay.

    Parameters
    ----------
    sample: GaborMatrixSample
    transform: SymplecticMatrix, optional
        Forward phase-space map A; identity when omitted.
    options:
        shells, min_shells, min_radius, max_radius, floor (see config [DECAY FIT]).
    """
    if options.get("max_radius") is None:
        options["max_radius"] = min(config.decay_max_radius, sample.filled_radius)
    return fit_envelope(_pair_distances(sample, transform), sample.magnitude().ravel(), **options)


def polynomial_decay_bounds(sample: GaborMatrixSample, transform=None, orders=(2, 4, 6, 8), shells: int = None) -> dict:
    """
    Shell maxima of |k| <w - Az>^N: the outer half must stay below the
    largest value found on the inner half.
    """
    radii, maxima = shell_maxima(_pair_distances(sample, transform), sample.magnitude().ravel(),
                                 shells or config.decay_shells)
    half = len(radii) // 2
    report = {}
    for order in orders:
        weighted = maxima * bracket(radii) ** order
        inner, outer = float(np.max(weighted[:half])), float(np.max(weighted[half:]))
        report[order] = {"inner": inner, "outer": outer, "bounded": outer <= inner}
    return report
