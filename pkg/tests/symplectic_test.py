####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/symplectic_test.py
# - running a specific test: $ pytest tests/symplectic_test.py::test_function

import math

import numpy as np
import pytest

from modules.errors import ConfigurationError
from modules.grid_signal import Grid1D, make_test_signal
from modules.symplectic import (GeneratorDescriptor, HamiltonianMatrix, QuadraticForm, SymplecticMatrix,
                                factor_symplectic, flow, quadratic_symbol_to_generator, quadratic_weyl_apply,
                                quadratic_weyl_matrix, standard_form, word_product)

rng = np.random.default_rng(1234)


def random_generator() -> HamiltonianMatrix:
    a, b, c = rng.uniform(-1, 1, 3)
    return HamiltonianMatrix([[a]], [[b]], [[c]])


################
# Group structure
################
def test_random_flows_are_symplectic_and_obey_the_group_law():
    for _ in range(200):
        generator = random_generator()
        s, t = rng.uniform(-2, 2, 2)
        total = flow(generator, s + t)
        assert total.residual <= 1e-10
        product = (flow(generator, s) @ flow(generator, t)).matrix
        assert np.max(np.abs(product - total.matrix)) / max(1.0, total.norm()) < 1e-9


def test_generators_are_in_the_lie_algebra():
    for _ in range(20):
        assert random_generator().membership_residual < 1e-14


def test_asymmetric_blocks_are_rejected():
    with pytest.raises(ConfigurationError):
        HamiltonianMatrix(np.eye(2), [[0.0, 1.0], [2.0, 0.0]], np.zeros((2, 2)))


def test_non_symplectic_matrix_is_rejected():
    with pytest.raises(ConfigurationError):
        SymplecticMatrix(np.diag([2.0, 2.0]))


def test_inverse():
    matrix = SymplecticMatrix.random(rng)
    assert (matrix @ matrix.inverse()).is_identity(1e-10)
    assert math.isclose(matrix.determinant, 1.0, rel_tol=1e-10)


################
# Calibrated flows
################
def test_harmonic_oscillator_flow_is_a_rotation():
    generator = quadratic_symbol_to_generator(QuadraticForm.harmonic_oscillator())
    assert np.allclose(generator.matrix, [[0.0, 1.0], [-1.0, 0.0]])
    for t in (0.3, math.pi / 4, 2.0):
        assert np.allclose(flow(generator, t).matrix, SymplecticMatrix.rotation(t).matrix, atol=1e-12)


def test_free_particle_flow_is_a_shear():
    generator = quadratic_symbol_to_generator(QuadraticForm.free_particle())
    assert np.allclose(generator.matrix, [[0.0, 4 * math.pi], [0.0, 0.0]])
    assert np.allclose(flow(generator, 0.5).matrix, SymplecticMatrix.shear(0.5).matrix)


def test_quadratic_form_evaluation():
    q = QuadraticForm.harmonic_oscillator()
    assert math.isclose(q(1.0, 2.0), -5 * math.pi)
    assert q.scalars == (0.0, -2 * math.pi, 2 * math.pi)
    assert (q + q).scalars == (2 * q).scalars


################
# Factorization
################
def test_factorization_round_trip():
    for _ in range(100):
        matrix = SymplecticMatrix.random(rng, factors=6, spread=2.0)
        word = factor_symplectic(matrix)
        assert np.max(np.abs(word_product(word) - matrix.matrix)) <= 1e-9 * max(1.0, matrix.norm())


def test_trivial_words():
    assert factor_symplectic(SymplecticMatrix.identity()) == []
    assert factor_symplectic(SymplecticMatrix.standard()) == [GeneratorDescriptor("fourier", 1)]


def test_factorization_near_the_caustic():
    rotation = SymplecticMatrix.rotation(math.pi / 2)
    assert np.allclose(word_product(factor_symplectic(rotation)), standard_form(1), atol=1e-12)


@pytest.mark.parametrize("kind, parameter", [("fourier", 2), ("dilation", 0), ("shear", 1.0)])
def test_invalid_generators(kind, parameter):
    with pytest.raises(ConfigurationError):
        GeneratorDescriptor(kind, parameter)


################
# Weyl operators of quadratic forms
################
def test_hermite_functions_are_oscillator_eigenfunctions():
    grid = Grid1D.default()
    q = QuadraticForm.harmonic_oscillator()
    for n in range(6):
        mode = make_test_signal("hermite", {"n": n}, grid)
        assert (quadratic_weyl_apply(q, mode) - mode * -(n + 0.5)).norm() < 1e-8


def test_quadratic_weyl_matrix_is_hermitian():
    grid = Grid1D(8.0, 64)
    matrix = quadratic_weyl_matrix(QuadraticForm.from_scalars(0.3, -1.0, 2.0), grid)
    assert np.allclose(matrix, matrix.conj().T)
