"""
Weyl quantization of sampled symbols and the operator checks built on it:
symbol-class certificates from Gabor-matrix envelopes, composition decay,
symplectic covariance and type I Fourier integral operators.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import ndimage

import config
from modules.errors import ConfigurationError, GridMismatchError, TypeIRepresentationError
from modules.gabor import PhaseLattice, bracket, subconvolution_constant
from modules.grid_signal import (Grid1D, SampledSignal, fourier_array, make_test_signal, signal_corpus,
                                 spectral_multiplier)
from modules.metaplectic import DecayFit, LinearOperator, decay_fit, gabor_matrix, metaplectic_kernel
from modules.symplectic import SymplecticMatrix, as_matrix

STRUCTURES = ("general", "multiplication", "multiplier", "constant")
QUANTIZATIONS = (0.5, 1.0)


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    """
    Samples of sigma(x, xi) on the refined x-grid (2N points, spacing dx/2)
    times the N frequencies of `grid`.

    Midpoints (x_j + x_l)/2 of the signal grid are exactly the refined
    points, so the Weyl kernel needs no interpolation.
    """
    grid: Grid1D
    values: np.ndarray
    structure: str = "general"
    function: Optional[Callable] = field(default=None, repr=False)

    CSV_HEADER = ("x", "xi", "re", "im")

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (2 * self.grid.count, self.grid.count):
            raise GridMismatchError(f"symbol samples must have shape (2N, N), got {values.shape}")
        if self.structure not in STRUCTURES:
            raise ConfigurationError(f"unknown symbol structure '{self.structure}'")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("symbol samples must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, function: Callable, grid: Grid1D, structure: str = "general") -> SymbolGrid:
        x, xi = np.meshgrid(grid.refined().points, grid.frequencies, indexing="ij")
        return cls(grid, np.broadcast_to(function(x, xi), x.shape), structure, function)

    @classmethod
    def multiplication(cls, potential: Callable, grid: Grid1D) -> SymbolGrid:
        return cls.from_function(lambda x, xi: potential(x) + 0 * xi, grid, "multiplication")

    @classmethod
    def multiplier(cls, multiplier: Callable, grid: Grid1D) -> SymbolGrid:
        return cls.from_function(lambda x, xi: multiplier(xi) + 0 * x, grid, "multiplier")

    @classmethod
    def constant(cls, value: complex, grid: Grid1D) -> SymbolGrid:
        return cls.from_function(lambda x, xi: value + 0 * x * xi, grid, "constant")

    @property
    def x_points(self) -> np.ndarray:
        return self.grid.refined().points

    @property
    def xi_points(self) -> np.ndarray:
        return self.grid.frequencies

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.values.imag)) < 1e-14)

    def evaluate(self, x, xi) -> np.ndarray:
        """sigma at arbitrary points: exact from the generating function, else periodic cubic interpolation."""
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        if self.function is not None:
            return np.broadcast_to(self.function(x, xi), x.shape).astype(complex)
        coordinates = np.array([x / (self.grid.spacing / 2) + self.grid.count,
                                xi / self.grid.dual_spacing + self.grid.count // 2])
        real = ndimage.map_coordinates(self.values.real, coordinates, order=3, mode="grid-wrap")
        imag = ndimage.map_coordinates(self.values.imag, coordinates, order=3, mode="grid-wrap")
        return real + 1j * imag

    def composed_with(self, symplectic: SymplecticMatrix) -> SymbolGrid:
        """(sigma o A)(x, xi) = sigma(A(x, xi))."""
        matrix = as_matrix(symplectic)

        def composed(x, xi):
            return self.evaluate(matrix[0, 0] * x + matrix[0, 1] * xi, matrix[1, 0] * x + matrix[1, 1] * xi)

        structure = "constant" if self.structure == "constant" else "general"
        return SymbolGrid.from_function(composed, self.grid, structure)

    def conjugate(self) -> SymbolGrid:
        function = None if self.function is None else (lambda x, xi: np.conj(self.function(x, xi)))
        return SymbolGrid(self.grid, self.values.conj(), self.structure, function)

    def __add__(self, other: SymbolGrid) -> SymbolGrid:
        structure = self.structure if self.structure == other.structure else "general"
        return SymbolGrid(self.grid, self.values + other.values, structure)

    def __mul__(self, scalar: complex) -> SymbolGrid:
        return SymbolGrid(self.grid, self.values * scalar, self.structure)

    __rmul__ = __mul__

    def csv_rows(self):
        x, xi = np.meshgrid(self.x_points, self.xi_points, indexing="ij")
        for row in zip(x.ravel(), xi.ravel(), self.values.real.ravel(), self.values.imag.ravel()):
            yield row

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "structure": self.structure, "shape": list(self.values.shape),
                "re": self.values.real.ravel().tolist(), "im": self.values.imag.ravel().tolist()}


@dataclass(frozen=True)
class SymbolSpec:
    """Named symbol function that can be sampled on any grid."""
    name: str
    function: Callable = field(compare=False)
    structure: str = "general"

    def sample(self, grid: Grid1D) -> SymbolGrid:
        return SymbolGrid.from_function(self.function, grid, self.structure)

    __call__ = sample

    @classmethod
    def rough_potential(cls, mu: float, scale: float = 1.0) -> SymbolSpec:
        """scale * |sin x|^mu, of class M^inf_{1 (x) v_{mu+1}}."""
        return cls(f"{scale}|sin x|^{mu}", lambda x, xi: scale * np.abs(np.sin(x)) ** mu + 0 * xi, "multiplication")

    @classmethod
    def smooth_potential(cls, scale: float = 1.0) -> SymbolSpec:
        return cls(f"{scale}cos x", lambda x, xi: scale * np.cos(x) + 0 * xi, "multiplication")

    @classmethod
    def gaussian_bump(cls, x0: float = 0.0, xi0: float = 0.0, scale: float = 1.0) -> SymbolSpec:
        return cls(f"bump({x0},{xi0},{scale})",
                   lambda x, xi: np.exp(-np.pi * ((x - x0) ** 2 + (xi - xi0) ** 2) / scale ** 2))

    @classmethod
    def constant(cls, value: float = 1.0) -> SymbolSpec:
        return cls(f"constant({value})", lambda x, xi: value + 0 * x * xi, "constant")

    def to_dict(self) -> dict:
        return {"name": self.name, "structure": self.structure}


##################
# Quantization
##################
def _check_tau(tau: float):
    if tau not in QUANTIZATIONS:
        raise ConfigurationError(f"quantization parameter tau must be 1/2 (Weyl) or 1 (Kohn-Nirenberg), got {tau}")


def weyl_kernel(symbol: SymbolGrid, tau: float = 0.5) -> np.ndarray:
    """
    Dense kernel K[j, l] = dx dxi sum_k e^{2 pi i (x_j - x_l) xi_k} sigma(x_m, xi_k),
    with x_m the midpoint (tau = 1/2) or x_j (tau = 1).

    dx * dxi == 1/N, so K[j, l] = (-1)^(j-l) ifft(sigma[m])[(j - l) mod N].
    """
    _check_tau(tau)
    n = symbol.grid.count
    signs = (-1.0) ** np.arange(n)
    spectra = np.fft.ifft(symbol.values, axis=1) * signs
    j, l = np.indices((n, n))
    rows = j + l if tau == 0.5 else 2 * j
    return spectra[rows, (j - l) % n]


def detect_structure(symbol: SymbolGrid) -> str:
    if symbol.structure != "general":
        return symbol.structure
    values = symbol.values
    along_xi = np.all(values == values[:, :1])
    along_x = np.all(values == values[:1, :])
    if along_xi and along_x:
        return "constant"
    if along_xi:
        return "multiplication"
    return "multiplier" if along_x else "general"


def weyl_quantize(symbol: SymbolGrid, tau: float = 0.5, grid: Grid1D = None) -> LinearOperator:
    """
    sigma^w as a LinearOperator.

    Constants act as scalars, multiplication symbols pointwise and Fourier
    multipliers through the FFT; everything else through weyl_kernel.
    """
    _check_tau(tau)
    if grid is not None and not grid.compatible(symbol.grid):
        raise GridMismatchError("symbol grid does not match the signal grid")
    grid = symbol.grid
    n = grid.count
    structure = detect_structure(symbol)
    name = f"weyl[{structure}]" if tau == 0.5 else f"kn[{structure}]"

    if structure == "general":
        return LinearOperator.from_matrix(name, grid, weyl_kernel(symbol, tau), "identity")

    potential = symbol.values[2 * np.arange(n), 0]
    multiplier = symbol.values[0, :]

    def action(values: np.ndarray) -> np.ndarray:
        match structure:
            case "constant":
                return symbol.values[0, 0] * values
            case "multiplication":
                return (potential if values.ndim == 1 else potential[:, None]) * values
            case _:
                return spectral_multiplier(values, grid, multiplier)

    return LinearOperator(name, grid, action, "identity")


##################
# Symbol classes
##################
def symbol_norm(symbol: SymbolGrid, s: float, centers=None) -> float:
    """
    Discrete M^inf_{1 (x) v_s} norm with a gaussian phase-space window:
    sup over window centers and dual variables of |V_Phi sigma| <zeta>^s.
    """
    x, xi = symbol.x_points, symbol.xi_points
    hx, hxi = x[1] - x[0], xi[1] - xi[0]
    if centers is None:
        axis = np.arange(-2.0, 2.5, 1.0)
        centers = [(cx, cxi) for cx in axis for cxi in axis]
    zeta_x = np.fft.fftshift(np.fft.fftfreq(len(x), hx))
    zeta_xi = np.fft.fftshift(np.fft.fftfreq(len(xi), hxi))
    weight = bracket(np.hypot(zeta_x[:, None], zeta_xi[None, :])) ** s

    best = 0.0
    for cx, cxi in centers:
        window = np.exp(-np.pi * ((x[:, None] - cx) ** 2 + (xi[None, :] - cxi) ** 2))
        spectrum = np.fft.fftshift(np.fft.fft2(symbol.values * window)) * hx * hxi
        best = max(best, float(np.max(np.abs(spectrum) * weight)))
    return best


def certify_symbol_class(operator: LinearOperator, s: float, g: SampledSignal = None, lattice: PhaseLattice = None,
                         symbol: SymbolGrid = None, slack: float = None) -> DecayFit:
    """
    Fit the Gabor-matrix envelope of `operator` against <w - z>^-s.

    Passes when s_fit >= min(s, cap) - slack. With `symbol` given, the
    ratio of the fitted constant to the discrete symbol norm is reported.
    """
    g = g or make_test_signal("gaussian", grid=operator.grid)
    lattice = lattice or PhaseLattice.symbol_lattice(operator.grid)
    # the symbol lattice is narrow in x; the decay is read along xi differences
    fit = decay_fit(gabor_matrix(operator, g, lattice), max_radius=config.decay_max_radius)
    notes = {"operator": operator.name}
    if symbol is not None:
        norm = symbol_norm(symbol, s)
        notes.update(symbol_norm=norm, constant_ratio=fit.constant / norm if norm else math.inf)
    logging.info(f"{operator.name}: s_fit = {fit.s_fit:.3f} (target {s}, cap {fit.cap:.3f})")
    return fit.certify(s, slack, **notes)


@dataclass(frozen=True, eq=False)
class EnvelopeFunction:
    """H(u) = max |k(w, z)| over lattice pairs with w - z = u."""
    offsets: np.ndarray
    values: np.ndarray
    cell_area: float

    CSV_HEADER = ("u_x", "u_xi", "H")

    def at(self, u) -> float:
        distances = np.linalg.norm(self.offsets - np.asarray(u, dtype=float), axis=1)
        index = int(np.argmin(distances))
        return float(self.values[index]) if distances[index] < 1e-9 else 0.0

    def weighted_norm(self, s: float) -> float:
        """Discrete L^1_{v_s} norm."""
        return float(np.sum(self.values * bracket(np.linalg.norm(self.offsets, axis=1)) ** s) * self.cell_area)

    def csv_rows(self):
        for (ux, uxi), value in zip(self.offsets.tolist(), self.values.tolist()):
            yield ux, uxi, value

    def to_dict(self) -> dict:
        return {"cell_area": self.cell_area, "offsets": self.offsets.tolist(), "values": self.values.tolist()}


def envelope_function(operator: LinearOperator, g: SampledSignal = None, lattice: PhaseLattice = None) -> EnvelopeFunction:
    g = g or make_test_signal("gaussian", grid=operator.grid)
    lattice = lattice or PhaseLattice.square(operator.grid)
    sample = gabor_matrix(operator, g, lattice, lattice)

    steps = np.array([lattice.x_step, lattice.xi_step])
    differences = sample.out_points[:, None, :] - sample.in_points[None, :, :]
    keys = np.rint(differences / steps).astype(int).reshape(-1, 2)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    values = np.zeros(len(unique))
    np.maximum.at(values, inverse.ravel(), sample.magnitude().ravel())
    return EnvelopeFunction(unique * steps, values, lattice.cell_area)


def compose_and_check(symbols: list, s: float, g: SampledSignal = None, lattice: PhaseLattice = None,
                      tau: float = 0.5) -> DecayFit:
    """
    Envelope of sigma_1^w ... sigma_n^w against the product bound
    (C0 ||g||^-2)^(n-1) prod C_j, C_j the per-factor envelope constants and
    C0 the subconvolution constant of v_s.
    """
    if len(symbols) < 2:
        raise ConfigurationError("composition needs at least two symbols")
    operators = [weyl_quantize(symbol, tau) for symbol in symbols]
    g = g or make_test_signal("gaussian", grid=operators[0].grid)

    product = operators[0]
    for operator in operators[1:]:
        product = product.compose(operator)

    factor_fits = [certify_symbol_class(operator, s, g, lattice) for operator in operators]
    total = certify_symbol_class(product, s, g, lattice)
    subconvolution = subconvolution_constant(s)
    bound = (subconvolution / g.norm() ** 2) ** (len(operators) - 1) * math.prod(
        fit.envelope_constant(s) for fit in factor_fits)
    constant = total.envelope_constant(s)
    notes = {**total.notes, "factor_s_fit": [fit.s_fit for fit in factor_fits], "envelope_constant": constant,
             "product_bound": bound, "subconvolution_constant": subconvolution, "certificate": total.passed}
    return dataclasses.replace(total, passed=bool(constant <= bound), notes=notes)


def covariance_defect(symbol: SymbolGrid, symplectic: SymplecticMatrix, corpus: list = None) -> float:
    """
    max over the corpus of ||mu(A)^-1 sigma^w mu(A) f - (sigma o A)^w f|| / ||f||.
    """
    grid = symbol.grid
    corpus = corpus or signal_corpus(grid)
    metaplectic = metaplectic_kernel(symplectic, grid)
    conjugated = np.linalg.solve(metaplectic, weyl_kernel(symbol) @ metaplectic)
    composed = weyl_kernel(symbol.composed_with(symplectic))
    difference = conjugated - composed
    return max(float(np.linalg.norm(difference @ f.values) / np.linalg.norm(f.values)) for f in corpus)


##################
# Type I Fourier integral operators
##################
SymbolLike = Union[SymbolGrid, SymbolSpec, Callable, None]


def _amplitude(symbol: SymbolLike, x: np.ndarray, xi: np.ndarray) -> Union[np.ndarray, float]:
    if symbol is None:
        return 1.0
    if isinstance(symbol, SymbolGrid):
        return symbol.evaluate(x, xi)
    function = symbol.function if isinstance(symbol, SymbolSpec) else symbol
    return np.broadcast_to(function(x, xi), x.shape)


def fio_type1_array(symplectic: SymplecticMatrix, values: np.ndarray, grid: Grid1D, symbol: SymbolLike = None) -> np.ndarray:
    (a, b), (c, _) = as_matrix(symplectic)
    if abs(a) < 1e-8:
        raise TypeIRepresentationError(f"type-I representation unavailable: upper-left block {a:.2e} is singular")

    span = abs(1 / a) * grid.length / 2 + abs(b / a) * grid.count / (2 * grid.length)
    padding = int(min(config.fio_max_padding, max(1, math.ceil(4 * grid.dual_spacing * span))))
    padded_grid = Grid1D(padding * grid.length, padding * grid.count)
    start = (padding * grid.count - grid.count) // 2
    padded = np.zeros((padded_grid.count,) + values.shape[1:], dtype=complex)
    padded[start:start + grid.count] = values
    spectrum = fourier_array(padded, padded_grid)

    x, xi = np.meshgrid(grid.points, padded_grid.frequencies, indexing="ij")
    phase = 0.5 * (c / a) * x ** 2 + x * xi / a - 0.5 * (b / a) * xi ** 2
    kernel = np.exp(2j * np.pi * phase) * _amplitude(symbol, x, xi)
    return abs(a) ** -0.5 * padded_grid.dual_spacing * kernel @ spectrum


def fio_type1_apply(symplectic: SymplecticMatrix, f: SampledSignal, symbol: SymbolLike = None) -> SampledSignal:
    """
    Tf(x) = |A|^-1/2 sum_xi e^{2 pi i Phi(x, xi)} sigma(x, xi) f^(xi) dxi with
    Phi = 1/2 (C/A) x^2 + xi x / A - 1/2 (B/A) xi^2.

    f^ is taken from a zero-padded copy of f so that the oscillation of the
    phase in xi is resolved.
    """
    return f.with_values(fio_type1_array(symplectic, f.values, f.grid, symbol))


def fio_type1_operator(symplectic: SymplecticMatrix, grid: Grid1D, symbol: SymbolLike = None) -> LinearOperator:
    return LinearOperator("fio", grid, lambda values: fio_type1_array(symplectic, values, grid, symbol), symplectic)
