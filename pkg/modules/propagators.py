"""
Schroedinger evolution e^{itH} for H = a^w + sigma^w with a quadratic and
sigma a bounded perturbation: closed forms, the metaplectic path, Strang
splitting and the Dyson-Phillips expansion, plus the Gabor-matrix
structure check of the evolution operator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg

import config
from modules.errors import ConfigurationError, NonHermitianError, TruncationError
from modules.gabor import PhaseLattice, stft
from modules.grid_signal import (Grid1D, PhasePoint, PointLike, SampledSignal, as_point, make_test_signal,
                                 spectral_multiplier)
from modules.metaplectic import DecayFit, LinearOperator, decay_fit, gabor_matrix, metaplectic_apply, metaplectic_operator
from modules.symplectic import (QuadraticForm, SymplecticMatrix, flow, quadratic_symbol_to_generator,
                                quadratic_weyl_matrix)
from modules.weyl import SymbolGrid, SymbolSpec, fio_type1_apply, fio_type1_operator, weyl_kernel


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """
    H = a^w + sigma^w.

    Parameters
    ----------
    quadratic: QuadraticForm
        The quadratic symbol a.
    perturbation: SymbolSpec, optional
        Bounded perturbation sigma, sampled on whichever grid the evolution runs.
    decay_class: float
        s such that sigma lies in M^inf_{1 (x) v_s}; sets the Gabor envelope target.
    admissible_class: float
        s entering the propagation constraint 0 < 2r < s - 2.
    """
    quadratic: QuadraticForm
    perturbation: Optional[SymbolSpec] = None
    name: str = "hamiltonian"
    decay_class: float = math.inf
    admissible_class: float = math.inf

    @classmethod
    def free_particle(cls) -> HamiltonianSpec:
        return cls(QuadraticForm.free_particle(), name="free_particle")

    @classmethod
    def harmonic_oscillator(cls) -> HamiltonianSpec:
        return cls(QuadraticForm.harmonic_oscillator(), name="harmonic_oscillator")

    @classmethod
    def perturbed_oscillator(cls, mu: float = None, scale: float = None) -> HamiltonianSpec:
        """Harmonic oscillator plus scale * |sin x|^mu."""
        mu = config.example2_mu if mu is None else mu
        scale = config.example2_scale if scale is None else scale
        if scale == 0:
            return cls(QuadraticForm.harmonic_oscillator(), name="perturbed_oscillator(scale=0)")
        return cls(QuadraticForm.harmonic_oscillator(), SymbolSpec.rough_potential(mu, scale),
                   f"perturbed_oscillator(mu={mu})", decay_class=mu + 1, admissible_class=mu)

    @property
    def generator(self):
        return quadratic_symbol_to_generator(self.quadratic)

    def flow(self, t: float) -> SymplecticMatrix:
        return flow(self.generator, t)

    def perturbation_symbol(self, grid: Grid1D) -> Optional[SymbolGrid]:
        return None if self.perturbation is None else self.perturbation.sample(grid)

    def to_dict(self) -> dict:
        return {"name": self.name, "quadratic": self.quadratic.to_dict(),
                "perturbation": None if self.perturbation is None else self.perturbation.to_dict(),
                "decay_class": self.decay_class, "admissible_class": self.admissible_class}


@dataclass(frozen=True, eq=False)
class PropagatorResult:
    t: float
    u_t: SampledSignal
    method: str
    diagnostics: dict = field(default_factory=dict)

    CSV_HEADER = ("x", "re", "im")

    def csv_rows(self):
        for x, value in zip(self.u_t.grid.points.tolist(), self.u_t.values.tolist()):
            yield x, value.real, value.imag

    def to_dict(self) -> dict:
        return {"t": self.t, "method": self.method, "norm": self.u_t.norm(), "flags": list(self.u_t.flags),
                "diagnostics": self.diagnostics}


##################
# Closed forms
##################
def free_particle(u0: SampledSignal, t: float) -> PropagatorResult:
    """e^{it Laplacian} u0 through the multiplier e^{-4 pi^2 i t xi^2}."""
    multiplier = np.exp(-4j * np.pi ** 2 * t * u0.grid.frequencies ** 2)
    u_t = u0.with_values(spectral_multiplier(u0.values, u0.grid, multiplier))
    return PropagatorResult(t, u_t, "closed_form", {"map": SymplecticMatrix.shear(t).to_dict()})


def gaussian_packet(grid: Grid1D, z: PointLike, t: float) -> SampledSignal:
    """Free evolution of the atom pi(z) e^{-pi x^2}, in closed form."""
    z = as_point(z)
    x = grid.points
    spread = 1 + 4j * np.pi * t
    values = (spread ** -0.5 * np.exp(-np.pi * (x - z.x - 4 * np.pi * t * z.xi) ** 2 / spread
                                      + 2j * np.pi * x * z.xi - 4j * np.pi ** 2 * t * z.xi ** 2))
    return SampledSignal(grid, values)


def caustic_distance(t: float) -> float:
    """Distance from t to the nearest pi/2 + k pi."""
    shifted = t - math.pi / 2
    return abs(shifted - math.pi * round(shifted / math.pi))


def harmonic_oscillator(u0: SampledSignal, t: float) -> PropagatorResult:
    """
    e^{it((1/4pi) Laplacian - pi x^2)} u0.

    Away from the caustics t = pi/2 + k pi the Mehler kernel is summed
    directly as a type I operator; near them the metaplectic path takes over.
    """
    distance = caustic_distance(t)
    if distance > config.caustic_distance:
        u_t = fio_type1_apply(SymplecticMatrix.rotation(t), u0)
        return PropagatorResult(t, u_t, "closed_form", {"caustic_distance": distance})
    logging.debug(f"t = {t} within {config.caustic_distance} of a caustic, switching to the metaplectic path")
    result = quadratic_propagate(QuadraticForm.harmonic_oscillator(), u0, t)
    return PropagatorResult(t, result.u_t, "metaplectic", {**result.diagnostics, "caustic_distance": distance})


def harmonic_oscillator_operator(grid: Grid1D, t: float) -> LinearOperator:
    """The harmonic evolution at time t as an operator, with the same path choice as harmonic_oscillator."""
    rotation = SymplecticMatrix.rotation(t)
    if caustic_distance(t) > config.caustic_distance:
        return fio_type1_operator(rotation, grid)
    return metaplectic_operator(rotation, grid)


def quadratic_propagate(q: QuadraticForm, u0: SampledSignal, t: float) -> PropagatorResult:
    """e^{it q^w} u0 = mu(A_t) u0 with A_t the flow of the calibrated generator."""
    symplectic = flow(quadratic_symbol_to_generator(q), t)
    return PropagatorResult(t, metaplectic_apply(symplectic, u0), "metaplectic", {"map": symplectic.to_dict()})


##################
# Strang splitting
##################
@lru_cache(maxsize=16)
def _quadratic_exponential(key: tuple, length: float, count: int, tau: float) -> np.ndarray:
    grid = Grid1D(length, count)
    q = QuadraticForm.from_scalars(*key)
    matrix = linalg.expm(1j * tau * quadratic_weyl_matrix(q, grid))
    matrix.setflags(write=False)
    return matrix


def quadratic_exponential(q: QuadraticForm, grid: Grid1D, tau: float) -> np.ndarray:
    """Dense e^{i tau K_q}, K_q the spectral discretization of q^w."""
    return _quadratic_exponential(q.cache_key(), grid.length, grid.count, float(tau))


def perturbation_half_step(symbol: SymbolGrid, tau: float) -> np.ndarray:
    """
    e^{i tau sigma^w}: exact for multiplication symbols, fourth-order Taylor
    polynomial of the dense kernel otherwise.
    """
    n = symbol.grid.count
    if symbol.structure in ("multiplication", "constant"):
        potential = symbol.values[2 * np.arange(n), 0]
        if np.max(np.abs(potential.imag)) > 1e-12:
            raise NonHermitianError("complex potential makes the evolution non-unitary")
        return np.diag(np.exp(1j * tau * potential.real))

    kernel = weyl_kernel(symbol)
    asymmetry = np.linalg.norm(kernel - kernel.conj().T)
    if asymmetry > 1e-10 * max(1.0, np.linalg.norm(kernel)):
        raise NonHermitianError(f"perturbation kernel is not Hermitian (defect {asymmetry:.2e})")
    generator = 1j * tau * kernel
    identity = np.eye(n, dtype=complex)
    step = identity + generator / 4
    for order in (3, 2, 1):
        step = identity + generator @ step / order
    return step


def split_step_matrix(hamiltonian: HamiltonianSpec, grid: Grid1D, dt: float) -> np.ndarray:
    """One Strang step V(dt/2) Q(dt) V(dt/2)."""
    quadratic = quadratic_exponential(hamiltonian.quadratic, grid, dt)
    symbol = hamiltonian.perturbation_symbol(grid)
    if symbol is None:
        return quadratic
    half = perturbation_half_step(symbol, dt / 2)
    return half @ quadratic @ half


def _check_steps(steps: int) -> int:
    steps = config.split_steps if steps is None else steps
    if int(steps) != steps or steps < 1:
        raise ConfigurationError(f"split-step needs steps >= 1, got {steps}")
    return int(steps)


def split_step(hamiltonian: HamiltonianSpec, u0: SampledSignal, t: float, steps: int = None) -> PropagatorResult:
    """
    Second-order Strang splitting of e^{itH} u0 with `steps` equal substeps.
    """
    steps = _check_steps(steps)
    step = split_step_matrix(hamiltonian, u0.grid, t / steps)
    values = u0.values
    for _ in range(steps):
        values = step @ values
    u_t = u0.with_values(values)
    drift = abs(u_t.norm() - u0.norm()) / max(u0.norm(), 1e-300)
    return PropagatorResult(t, u_t, "split_step", {"steps": steps, "dt": t / steps, "norm_drift": drift})


def split_step_operator(hamiltonian: HamiltonianSpec, grid: Grid1D, t: float, steps: int = None) -> LinearOperator:
    steps = _check_steps(steps)
    matrix = np.linalg.matrix_power(split_step_matrix(hamiltonian, grid, t / steps), steps)
    return LinearOperator.from_matrix(f"e^(itH)[{hamiltonian.name}]", grid, matrix, hamiltonian.flow(t))


##################
# Dyson-Phillips expansion
##################
def collocation_matrix(nodes: np.ndarray) -> np.ndarray:
    """
    Q[i, j] = int_{-1}^{s_i} l_j(s) ds for the Lagrange basis l_j on `nodes`.
    """
    legendre = np.polynomial.legendre
    coefficients = np.linalg.inv(legendre.legvander(nodes, len(nodes) - 1))
    return legendre.legval(nodes, legendre.legint(coefficients, lbnd=-1)).T


def dyson_tail(t: float, hamiltonian: HamiltonianSpec, symbol_norm: float, order: int,
               samples: int = None, calibration: float = None) -> dict:
    """
    Remainder bound x^(n+1)/(n+1)! e^x of the truncated series with
    x = t M(t) ||sigma|| c, M(t) = max_r ||A_r||^s over sampled r in [0, t].
    """
    samples = samples or config.dyson_flow_samples
    calibration = config.dyson_calibration if calibration is None else calibration
    s = hamiltonian.decay_class if math.isfinite(hamiltonian.decay_class) else 0.0
    growth = max(hamiltonian.flow(r).norm() ** s for r in np.linspace(0, t, samples))
    x = abs(t) * growth * symbol_norm * calibration
    return {"flow_growth": growth, "calibration": calibration, "x": x,
            "tail_bound": x ** (order + 1) / math.factorial(order + 1) * math.exp(x)}


def dyson_propagate(hamiltonian: HamiltonianSpec, u0: SampledSignal, t: float, order: int = None,
                    nodes: int = None) -> PropagatorResult:
    """
    e^{itH} u0 = mu(A_t) P(t) u0 with P(t) = Id + sum_n i^n int_{t >= t_1 >= ... >= t_n >= 0}
    B(t_1) ... B(t_n), B(r) = mu(A_-r) sigma^w mu(A_r).

    The nested integrals are iterated on one set of Gauss-Legendre nodes:
    each order integrates the previous one with the collocation matrix, so
    B is only ever evaluated at the shared nodes.
    """
    order = config.dyson_order if order is None else order
    nodes = nodes or config.dyson_nodes
    if order < 0:
        raise ConfigurationError(f"Dyson order must be >= 0, got {order}")
    grid = u0.grid
    symbol = hamiltonian.perturbation_symbol(grid)
    evolution = quadratic_exponential(hamiltonian.quadratic, grid, t)

    if symbol is None or order == 0:
        return PropagatorResult(t, u0.with_values(evolution @ u0.values), f"dyson({order})",
                                {"order": order, "term_norms": [], "tail_bound": 0.0})

    kernel = weyl_kernel(symbol)
    tail = dyson_tail(t, hamiltonian, float(np.linalg.norm(kernel, 2)), order)
    if tail["tail_bound"] >= 1:
        raise TruncationError(f"truncation insufficient: tail bound {tail['tail_bound']:.3e} at order {order}")

    points, weights = np.polynomial.legendre.leggauss(nodes)
    times = t * (points + 1) / 2
    weights = weights * t / 2
    integration = collocation_matrix(points) * t / 2
    propagators = [quadratic_exponential(hamiltonian.quadratic, grid, r) for r in times]

    current = np.repeat(u0.values[:, None], nodes, axis=1)
    total = np.array(u0.values, dtype=complex)
    term_norms = []
    for _ in range(order):
        conjugated = np.column_stack([u.conj().T @ (kernel @ (u @ current[:, i])) for i, u in enumerate(propagators)])
        integrand = 1j * conjugated
        current = integrand @ integration.T
        term = integrand @ weights
        total = total + term
        term_norms.append(float(np.sqrt(grid.spacing * np.sum(np.abs(term) ** 2))))

    logging.debug(f"Dyson terms {term_norms}")
    return PropagatorResult(t, u0.with_values(evolution @ total), f"dyson({order})",
                            {"order": order, "nodes": nodes, "term_norms": term_norms, **tail})


##################
# Structure of the evolution operator
##################
def propagator_gabor_structure(hamiltonian: HamiltonianSpec, t: float, g: SampledSignal = None,
                               lattice: PhaseLattice = None, steps: int = None, transform=None) -> DecayFit:
    """
    Envelope of the Gabor matrix of e^{itH} (split-step) along the quadratic
    flow A_t, certified against the class of the perturbation.

    The notes also carry the fit of P(t) = mu(A_-t) e^{itH} against the
    identity map. The default lattice is the square of radius
    structure_lattice_radius.
    """
    g = g or make_test_signal("gaussian")
    grid = g.grid
    lattice = lattice or PhaseLattice.square(grid, config.structure_lattice_radius)
    symplectic = hamiltonian.flow(t)
    operator = split_step_operator(hamiltonian, grid, t, steps)
    fit = decay_fit(gabor_matrix(operator, g, lattice), symplectic if transform is None else transform)

    residual_matrix = quadratic_exponential(hamiltonian.quadratic, grid, -t) @ operator.dense()
    residual = LinearOperator.from_matrix("P(t)", grid, residual_matrix, "identity")
    residual_fit = decay_fit(gabor_matrix(residual, g, lattice))
    logging.info(f"{hamiltonian.name} at t = {t}: s_fit = {fit.s_fit:.3f}, P(t) s_fit = {residual_fit.s_fit:.3f}")
    return fit.certify(hamiltonian.decay_class, map=symplectic.to_dict(),
                       residual_operator={"s_fit": residual_fit.s_fit, "C_fit": residual_fit.constant,
                                          "cap": residual_fit.cap})


def stft_center(result: PropagatorResult, g: SampledSignal = None, lattice: PhaseLattice = None) -> PhasePoint:
    """Refined phase-space center of |V_g u_t|."""
    g = g or make_test_signal("gaussian", grid=result.u_t.grid)
    return stft(result.u_t, g, lattice).peak()
