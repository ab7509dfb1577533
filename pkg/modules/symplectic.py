"""
Symplectic linear algebra on R^{2d}: the standard form J, the Lie algebra
sp(d, R) of Hamiltonian matrices, quadratic forms, flows and the
factorization of Sp(1, R) into metaplectic generator types.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

import config
from modules.errors import ConfigurationError
from modules.grid_signal import Grid1D, SampledSignal, spectral_derivative


def standard_form(d: int = 1) -> np.ndarray:
    """J = (0 I; -I 0)."""
    identity = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, identity], [-identity, zero]])


def symplectic_residual(matrix: np.ndarray) -> float:
    """max|M^T J M - J| relative to max(1, ||M||^2)."""
    matrix = np.asarray(matrix, dtype=float)
    j = standard_form(matrix.shape[0] // 2)
    scale = max(1.0, np.linalg.norm(matrix, 2) ** 2)
    return float(np.max(np.abs(matrix.T @ j @ matrix - j))) / scale


@dataclass(frozen=True, eq=False)
class SymplecticMatrix:
    """
    2d x 2d real matrix with M^T J M = J, block layout (A B; C D).
    """
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ConfigurationError(f"symplectic matrix must be 2d x 2d, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ConfigurationError("symplectic matrix has non-finite entries")
        residual = symplectic_residual(matrix)
        if residual > config.symplectic_validation:
            raise ConfigurationError(f"matrix is not symplectic: residual {residual:.3e}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def blocks(self) -> tuple:
        d = self.dimension
        m = self.matrix
        return m[:d, :d], m[:d, d:], m[d:, :d], m[d:, d:]

    @property
    def residual(self) -> float:
        return symplectic_residual(self.matrix)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def inverse(self) -> SymplecticMatrix:
        """M^-1 = -J M^T J."""
        j = standard_form(self.dimension)
        return SymplecticMatrix(-j @ self.matrix.T @ j)

    def apply(self, z) -> np.ndarray:
        """Act on points z of shape (..., 2d)."""
        return np.asarray(z, dtype=float) @ self.matrix.T

    def __matmul__(self, other: SymplecticMatrix) -> SymplecticMatrix:
        return SymplecticMatrix(self.matrix @ as_matrix(other))

    def is_identity(self, tolerance: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, np.eye(2 * self.dimension), atol=tolerance, rtol=0))

    def to_dict(self) -> dict:
        a, b, c, d = self.blocks
        return {"matrix": self.matrix.tolist(),
                "blocks": {"A": a.tolist(), "B": b.tolist(), "C": c.tolist(), "D": d.tolist()}}

    ######################
    # Named maps
    ######################
    @classmethod
    def identity(cls, d: int = 1) -> SymplecticMatrix:
        return cls(np.eye(2 * d))

    @classmethod
    def rotation(cls, t: float) -> SymplecticMatrix:
        """Harmonic oscillator flow (cos t, sin t; -sin t, cos t)."""
        return cls(np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]]))

    @classmethod
    def shear(cls, t: float) -> SymplecticMatrix:
        """Free particle flow z -> (z1 + 4 pi t z2, z2)."""
        return cls(np.array([[1.0, 4 * math.pi * t], [0.0, 1.0]]))

    @classmethod
    def dilation(cls, a: float) -> SymplecticMatrix:
        return cls(np.diag([a, 1 / a]))

    @classmethod
    def lower(cls, c: float) -> SymplecticMatrix:
        return cls(np.array([[1.0, 0.0], [c, 1.0]]))

    @classmethod
    def standard(cls, d: int = 1) -> SymplecticMatrix:
        return cls(standard_form(d))

    @classmethod
    def random(cls, rng: np.random.Generator, factors: int = 4, spread: float = 1.0) -> SymplecticMatrix:
        """Product of random dilations, lower shears and J."""
        matrix = np.eye(2)
        for _ in range(factors):
            match rng.integers(3):
                case 0:
                    step = np.diag([a := math.exp(rng.uniform(-spread / 2, spread / 2)), 1 / a])
                case 1:
                    step = np.array([[1.0, 0.0], [rng.uniform(-spread, spread), 1.0]])
                case _:
                    step = standard_form(1)
            matrix = matrix @ step
        return cls(matrix)


def as_matrix(value: Union[SymplecticMatrix, np.ndarray]) -> np.ndarray:
    return value.matrix if isinstance(value, SymplecticMatrix) else np.asarray(value, dtype=float)


##################
# Lie algebra and quadratic forms
##################
def _block(value, d: int) -> np.ndarray:
    block = np.array(value, dtype=float).reshape(d, d) if np.ndim(value) < 2 else np.array(value, dtype=float)
    if block.shape != (d, d):
        raise ConfigurationError(f"block must be {d} x {d}, got {block.shape}")
    return block


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """
    Element (A B; C -A^T) of sp(d, R) with B and C symmetric.
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        d = int(np.sqrt(np.size(self.a)))
        a, b, c = (_block(v, d) for v in (self.a, self.b, self.c))
        if not np.array_equal(b, b.T) or not np.array_equal(c, c.T):
            raise ConfigurationError("B and C blocks must be symmetric")
        for name, value in (("a", a), ("b", b), ("c", c)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.a, self.b], [self.c, -self.a.T]])

    @property
    def membership_residual(self) -> float:
        """max|J M^T + M J|, zero on sp(d, R)."""
        j = standard_form(self.dimension)
        m = self.matrix
        return float(np.max(np.abs(j @ m.T + m @ j)))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> HamiltonianMatrix:
        matrix = np.asarray(matrix, dtype=float)
        d = matrix.shape[0] // 2
        return cls(matrix[:d, :d], matrix[:d, d:], matrix[d:, :d])

    def __add__(self, other: HamiltonianMatrix) -> HamiltonianMatrix:
        return HamiltonianMatrix(self.a + other.a, self.b + other.b, self.c + other.c)

    def __mul__(self, scalar: float) -> HamiltonianMatrix:
        return HamiltonianMatrix(self.a * scalar, self.b * scalar, self.c * scalar)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "blocks": {"A": self.a.tolist(), "B": self.b.tolist(), "C": self.c.tolist()}}


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """
    P(x, xi) = 1/2 xi.B xi + xi.A x - 1/2 x.C x, with B, C symmetric.
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        # validates and freezes the blocks
        blocks = HamiltonianMatrix(self.a, self.b, self.c)
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, getattr(blocks, name))

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    @classmethod
    def from_scalars(cls, a: float = 0.0, b: float = 0.0, c: float = 0.0) -> QuadraticForm:
        return cls([[a]], [[b]], [[c]])

    @classmethod
    def zero(cls) -> QuadraticForm:
        return cls.from_scalars()

    @classmethod
    def free_particle(cls) -> QuadraticForm:
        """a = -4 pi^2 xi^2, whose Weyl operator is the Laplacian."""
        return cls.from_scalars(b=-8 * math.pi ** 2)

    @classmethod
    def harmonic_oscillator(cls) -> QuadraticForm:
        """a = -pi (x^2 + xi^2), whose Weyl operator is (1/4pi) Laplacian - pi x^2."""
        return cls.from_scalars(b=-2 * math.pi, c=2 * math.pi)

    @property
    def scalars(self) -> tuple:
        if self.dimension != 1:
            raise ConfigurationError("scalar blocks exist for d = 1 only")
        return float(self.a[0, 0]), float(self.b[0, 0]), float(self.c[0, 0])

    def __call__(self, x, xi) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.dimension == 1 and (x.ndim == 0 or x.shape[-1:] != (1,)):
            a, b, c = self.scalars
            return 0.5 * b * xi ** 2 + a * xi * x - 0.5 * c * x ** 2
        return (0.5 * np.einsum("...i,ij,...j", xi, self.b, xi) + np.einsum("...i,ij,...j", xi, self.a, x)
                - 0.5 * np.einsum("...i,ij,...j", x, self.c, x))

    def naive_generator(self) -> HamiltonianMatrix:
        return HamiltonianMatrix(self.a, self.b, self.c)

    def __add__(self, other: QuadraticForm) -> QuadraticForm:
        return QuadraticForm(self.a + other.a, self.b + other.b, self.c + other.c)

    def __mul__(self, scalar: float) -> QuadraticForm:
        return QuadraticForm(self.a * scalar, self.b * scalar, self.c * scalar)

    __rmul__ = __mul__

    def cache_key(self) -> tuple:
        return tuple(np.concatenate([self.a.ravel(), self.b.ravel(), self.c.ravel()]).tolist())

    def to_dict(self) -> dict:
        return {"A": self.a.tolist(), "B": self.b.tolist(), "C": self.c.tolist()}


def quadratic_symbol_to_generator(q: QuadraticForm) -> HamiltonianMatrix:
    """
    Generator whose flow is the phase-space map of exp(i t q^w).

    The block matrix of q rescaled by -1/(2 pi): the free particle symbol
    gives (0 4pi; 0 0), the harmonic oscillator (0 1; -1 0).
    """
    return q.naive_generator() * (-1 / (2 * math.pi))


def flow(generator: HamiltonianMatrix, t: float) -> SymplecticMatrix:
    """
    exp(t M) by scaling and squaring, projected back onto Sp(d, R) when the
    J-invariant drifts above the symplectic tolerance.
    """
    matrix = linalg.expm(t * generator.matrix)
    j = standard_form(generator.dimension)
    identity = np.eye(matrix.shape[0])
    for _ in range(8):
        if symplectic_residual(matrix) <= config.symplectic_tolerance:
            break
        # Newton step towards M^-1 = -J M^T J
        defect = -j @ matrix.T @ j @ matrix
        matrix = matrix @ (3 * identity - defect) / 2
        logging.debug(f"symplectic cleanup, residual now {symplectic_residual(matrix):.2e}")
    return SymplecticMatrix(matrix)


##################
# Factorization into generators
##################
GENERATOR_KINDS = ("dilation", "chirp", "fourier")


@dataclass(frozen=True)
class GeneratorDescriptor:
    """
    One metaplectic generator.

    dilation(a) ~ diag(a, 1/a), chirp(c) ~ (1 0; c 1), fourier(+1) ~ J and
    fourier(-1) ~ J^-1.
    """
    kind: str
    parameter: float

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigurationError(f"unknown generator kind '{self.kind}'")
        if self.kind == "dilation" and self.parameter == 0:
            raise ConfigurationError("dilation factor must be nonzero")
        if self.kind == "fourier" and self.parameter not in (1, -1):
            raise ConfigurationError("fourier generator takes direction +1 or -1")

    @property
    def matrix(self) -> np.ndarray:
        match self.kind:
            case "dilation":
                return np.diag([self.parameter, 1 / self.parameter])
            case "chirp":
                return np.array([[1.0, 0.0], [self.parameter, 1.0]])
            case "fourier":
                return standard_form(1) * self.parameter

    @property
    def trivial(self) -> bool:
        return (self.kind == "chirp" and self.parameter == 0) or (self.kind == "dilation" and self.parameter == 1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameter": self.parameter}


def factor_symplectic(symplectic: SymplecticMatrix) -> list:
    """
    Word g_1 ... g_k of generators with product equal to the input (d = 1).

    With M = (a b; c d) and pivot p in {a, b} the nonzero entry with the
    smallest |log|p||:

        pivot a: chirp(c/a) dilation(a) fourier(-1) chirp(-b/a) fourier(+1)
        pivot b: chirp(d/b) dilation(b) fourier(+1) chirp(a/b)

    Trivial factors and adjacent fourier(+1) fourier(-1) pairs are dropped.
    """
    if symplectic.dimension != 1:
        raise ConfigurationError("factorization is implemented for d = 1")
    (a, b), (c, d) = symplectic.matrix

    if b == 0 or (a != 0 and abs(math.log(abs(a))) <= abs(math.log(abs(b)))):
        word = [GeneratorDescriptor("chirp", c / a), GeneratorDescriptor("dilation", a),
                GeneratorDescriptor("fourier", -1), GeneratorDescriptor("chirp", -b / a),
                GeneratorDescriptor("fourier", 1)]
    else:
        word = [GeneratorDescriptor("chirp", d / b), GeneratorDescriptor("dilation", b),
                GeneratorDescriptor("fourier", 1), GeneratorDescriptor("chirp", a / b)]

    reduced = []
    for generator in word:
        if generator.trivial:
            continue
        if (reduced and generator.kind == "fourier" and reduced[-1].kind == "fourier"
                and generator.parameter == -reduced[-1].parameter):
            reduced.pop()
            continue
        reduced.append(generator)
    return reduced


def word_product(word: list, d: int = 1) -> np.ndarray:
    product = np.eye(2 * d)
    for generator in word:
        product = product @ generator.matrix
    return product


##################
# Weyl operators of quadratic forms
##################
def quadratic_weyl_array(q: QuadraticForm, values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """
    -(B/8pi^2) f'' - (i/4pi) A (x f' + (x f)') - 1/2 C x^2 f along axis 0,
    derivatives by FFT multipliers.
    """
    a, b, c = q.scalars
    x = grid.points if values.ndim == 1 else grid.points[:, None]
    result = -0.5 * c * x ** 2 * values
    if b:
        result = result - b / (8 * math.pi ** 2) * spectral_derivative(values, grid, 2)
    if a:
        mixed = x * spectral_derivative(values, grid, 1) + spectral_derivative(x * values, grid, 1)
        result = result - 1j * a / (4 * math.pi) * mixed
    return result


def quadratic_weyl_apply(q: QuadraticForm, f: SampledSignal) -> SampledSignal:
    """Weyl operator of the quadratic form q applied spectrally (d = 1)."""
    return f.with_values(quadratic_weyl_array(q, f.values, f.grid))


def quadratic_weyl_matrix(q: QuadraticForm, grid: Grid1D) -> np.ndarray:
    """Dense Hermitian discretization of q^w."""
    matrix = quadratic_weyl_array(q, np.eye(grid.count, dtype=complex), grid)
    return (matrix + matrix.conj().T) / 2
