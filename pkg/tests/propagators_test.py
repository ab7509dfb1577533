####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/propagators_test.py
# - running a specific test: $ pytest tests/propagators_test.py::test_function

import math

import numpy as np
import pytest

from modules.errors import ConfigurationError, NonHermitianError, TruncationError
from modules.gabor import PhaseLattice
from modules.grid_signal import Grid1D, make_test_signal, relative_phase_error
from modules.metaplectic import gabor_matrix
from modules.propagators import (HamiltonianSpec, caustic_distance, dyson_propagate, free_particle, gaussian_packet,
                                 harmonic_oscillator, harmonic_oscillator_operator, perturbation_half_step,
                                 propagator_gabor_structure, quadratic_exponential, quadratic_propagate, split_step,
                                 stft_center)
from modules.symplectic import QuadraticForm, SymplecticMatrix
from modules.weyl import SymbolGrid, SymbolSpec, weyl_kernel

grid = Grid1D.default()
g = make_test_signal("gaussian", grid=grid)
atom = make_test_signal("gabor_atom", {"x": 1.0, "xi": 0.5}, grid)


################
# Free particle
################
@pytest.mark.parametrize("t, count", [(0.1, 512), (0.5, 2048), (1.0, 4096)])
def test_free_wave_packet(t, count):
    wide = Grid1D.self_dual(count)
    z = (wide.snap(-2.0) * wide.spacing, 0.3)
    u0 = make_test_signal("gabor_atom", {"x": z[0], "xi": z[1]}, wide)
    result = free_particle(u0, t)
    assert np.max(np.abs(result.u_t.values - gaussian_packet(wide, z, t).values)) < 1e-8

    lattice = PhaseLattice.rectangular(wide, 4.0, wide.spacing, 2.0, wide.dual_spacing)
    center = stft_center(result, make_test_signal("gaussian", grid=wide), lattice)
    cell = math.hypot(wide.spacing, wide.dual_spacing)
    assert math.hypot(center.x - (z[0] + 4 * math.pi * t * z[1]), center.xi - z[1]) <= cell


def test_free_particle_matches_the_metaplectic_path():
    closed = free_particle(atom, 0.2).u_t
    metaplectic = quadratic_propagate(QuadraticForm.free_particle(), atom, 0.2).u_t
    assert relative_phase_error(closed, metaplectic) < 1e-8


################
# Harmonic oscillator
################
def test_caustic_distance():
    assert caustic_distance(math.pi / 2) < 1e-15
    assert math.isclose(caustic_distance(0.0), math.pi / 2)
    assert math.isclose(caustic_distance(3 * math.pi / 2 + 0.05), 0.05)


def test_hermite_modes_only_pick_up_a_phase():
    for n in (0, 3):
        mode = make_test_signal("hermite", {"n": n}, grid)
        assert relative_phase_error(mode, harmonic_oscillator(mode, 0.7).u_t) < 1e-8


def test_closed_form_and_metaplectic_paths_agree():
    closed = harmonic_oscillator(atom, 0.7)
    assert closed.method == "closed_form"
    metaplectic = quadratic_propagate(QuadraticForm.harmonic_oscillator(), atom, 0.7)
    assert relative_phase_error(closed.u_t, metaplectic.u_t) < 1e-8


def test_caustic_switches_to_the_metaplectic_path():
    result = harmonic_oscillator(atom, math.pi / 2)
    assert result.method == "metaplectic"
    assert math.isclose(result.u_t.norm(), atom.norm(), rel_tol=1e-10)


def test_dense_exponential_matches_the_flow():
    q = QuadraticForm.harmonic_oscillator()
    dense = atom.with_values(quadratic_exponential(q, grid, 0.7) @ atom.values)
    assert relative_phase_error(quadratic_propagate(q, atom, 0.7).u_t, dense) < 1e-8


@pytest.mark.parametrize("t", [0.3, math.pi / 4, math.pi / 2, 2.0])
def test_harmonic_gabor_matrix(t):
    sample = gabor_matrix(harmonic_oscillator_operator(grid, t), g)
    mapped = sample.in_points @ SymplecticMatrix.rotation(t).matrix.T
    distances = np.linalg.norm(sample.out_points[:, None, :] - mapped[None, :, :], axis=-1)
    expected = 2 ** -0.5 * np.exp(-np.pi / 2 * distances ** 2)
    assert np.max(np.abs(sample.magnitude() - expected)) < 1e-5


def test_quadratic_evolution_is_a_group():
    q = QuadraticForm.harmonic_oscillator()
    stepwise = quadratic_propagate(q, quadratic_propagate(q, atom, 0.8).u_t, 1.1).u_t
    assert relative_phase_error(quadratic_propagate(q, atom, 1.9).u_t, stepwise) < 1e-8
    closed = harmonic_oscillator(harmonic_oscillator(atom, 0.8).u_t, 1.1).u_t
    assert relative_phase_error(harmonic_oscillator(atom, 1.9).u_t, closed) < 1e-8


################
# Split-step
################
def test_split_step_without_perturbation_is_exact():
    result = split_step(HamiltonianSpec.harmonic_oscillator(), atom, 0.7, steps=4)
    assert relative_phase_error(harmonic_oscillator(atom, 0.7).u_t, result.u_t) < 1e-8
    assert result.diagnostics["norm_drift"] < 1e-10


def test_split_step_is_second_order():
    hamiltonian = HamiltonianSpec(QuadraticForm.harmonic_oscillator(), SymbolSpec.smooth_potential(), "smooth")
    reference = split_step(hamiltonian, atom, 0.5, steps=4096).u_t
    coarse = (split_step(hamiltonian, atom, 0.5, steps=32).u_t - reference).norm()
    fine = (split_step(hamiltonian, atom, 0.5, steps=64).u_t - reference).norm()
    assert 3.0 < coarse / fine < 5.0


def test_perturbed_evolution_is_a_group():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0)
    whole = split_step(hamiltonian, atom, 0.6, steps=96).u_t
    halves = split_step(hamiltonian, split_step(hamiltonian, atom, 0.2, steps=32).u_t, 0.4, steps=64).u_t
    assert (whole - halves).norm() / atom.norm() < 1e-5


def test_split_step_rejects_zero_steps():
    with pytest.raises(ConfigurationError):
        split_step(HamiltonianSpec.harmonic_oscillator(), atom, 0.5, steps=0)


def test_non_hermitian_perturbations_are_refused():
    complex_potential = SymbolGrid.multiplication(lambda x: 1j * np.cos(x), grid)
    with pytest.raises(NonHermitianError):
        perturbation_half_step(complex_potential, 0.01)
    skew = SymbolGrid.from_function(lambda x, xi: 1j * np.exp(-np.pi * (x ** 2 + xi ** 2)), grid)
    with pytest.raises(NonHermitianError):
        perturbation_half_step(skew, 0.01)


def test_zero_scale_is_the_plain_oscillator():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0, 0.0)
    assert hamiltonian.perturbation is None
    assert hamiltonian.admissible_class == math.inf


################
# Dyson-Phillips
################
def test_dyson_matches_split_step():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0)
    dyson = dyson_propagate(hamiltonian, g, 0.25, order=6)
    split = split_step(hamiltonian, g, 0.25)
    assert (dyson.u_t - split.u_t).norm() / g.norm() < 1e-4
    assert dyson.method == "dyson(6)"


def test_dyson_terms_decay_factorially():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0)
    t = 0.25
    terms = dyson_propagate(hamiltonian, g, t, order=6).diagnostics["term_norms"]
    for k, norm in enumerate(terms, start=1):
        assert norm <= 1.5 * t ** k / math.factorial(k) * g.norm() + 1e-10


def test_dyson_terms_pass_the_ratio_test():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0)
    t = 0.25
    norm = float(np.linalg.norm(weyl_kernel(hamiltonian.perturbation_symbol(grid)), 2))
    terms = dyson_propagate(hamiltonian, g, t, order=6).diagnostics["term_norms"]
    # the n-th term carries t^n / n!, so consecutive terms shrink like t ||sigma|| / n
    for n in range(2, len(terms) + 1):
        assert 0 < terms[n - 1] / terms[n - 2] <= 3 * t * norm / n


def test_dyson_truncation_is_checked():
    with pytest.raises(TruncationError):
        dyson_propagate(HamiltonianSpec.perturbed_oscillator(3.0), g, 20.0, order=1)


################
# Gabor structure of e^{itH}
################
@pytest.mark.slow
def test_perturbed_propagator_concentrates_along_the_flow():
    hamiltonian = HamiltonianSpec.perturbed_oscillator(3.0)
    fit = propagator_gabor_structure(hamiltonian, 0.5, g)
    assert fit.s_fit >= 3.5
    assert fit.passed
    # at t = pi/3 the flow moves every z by |z|, so the identity misses the ridge everywhere
    misaligned = propagator_gabor_structure(hamiltonian, math.pi / 3, g, transform=SymplecticMatrix.identity())
    assert misaligned.s_fit < 1
