####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/weyl_test.py
# - running a specific test: $ pytest tests/weyl_test.py::test_function

import math

import numpy as np
import pytest

from modules.errors import ConfigurationError, GridMismatchError, TypeIRepresentationError
from modules.grid_signal import Grid1D, make_test_signal, signal_corpus, spectral_multiplier
from modules.propagators import free_particle
from modules.symplectic import SymplecticMatrix
from modules.weyl import (SymbolGrid, SymbolSpec, certify_symbol_class, compose_and_check, covariance_defect,
                          detect_structure, envelope_function, fio_type1_apply, symbol_norm, weyl_kernel,
                          weyl_quantize)

grid = Grid1D.default()
corpus = signal_corpus(grid, size=5)
bump = SymbolSpec.gaussian_bump(scale=1.5).sample(grid)


################
# Kernels and fast paths
################
def test_multiplication_kernel_is_diagonal():
    symbol = SymbolGrid.from_function(lambda x, xi: np.cos(x) + 0 * xi, grid)
    assert detect_structure(symbol) == "multiplication"
    assert np.max(np.abs(weyl_kernel(symbol) - np.diag(np.cos(grid.points)))) < 1e-12


def test_multiplier_kernel_matches_the_fft_path():
    symbol = SymbolGrid.from_function(lambda x, xi: np.exp(-xi ** 2) + 0 * x, grid)
    f = corpus[0]
    expected = spectral_multiplier(f.values, grid, np.exp(-grid.frequencies ** 2))
    assert np.max(np.abs(weyl_kernel(symbol) @ f.values - expected)) < 1e-10
    assert np.max(np.abs(weyl_quantize(symbol)(f).values - expected)) < 1e-10


def test_constant_symbol_is_a_scalar():
    operator = weyl_quantize(SymbolGrid.constant(2.0, grid))
    assert np.allclose(operator(corpus[1]).values, 2.0 * corpus[1].values)


def test_real_symbols_give_hermitian_weyl_kernels():
    kernel = weyl_kernel(bump)
    assert np.max(np.abs(kernel - kernel.conj().T)) < 1e-12


def test_conjugate_symbol_quantizes_to_the_adjoint():
    chirped = SymbolGrid.from_function(lambda x, xi: np.exp(-np.pi * (x ** 2 + xi ** 2) / 4 + 2j * x * xi), grid)
    assert np.max(np.abs(weyl_kernel(chirped.conjugate()) - weyl_kernel(chirped).conj().T)) < 1e-12


def test_quantization_is_linear():
    smooth = SymbolSpec.smooth_potential(0.5).sample(grid)
    combined = weyl_quantize(2.0 * bump + smooth * (1 - 1j))(corpus[2]).values
    expected = 2.0 * weyl_quantize(bump)(corpus[2]).values + (1 - 1j) * weyl_quantize(smooth)(corpus[2]).values
    assert np.max(np.abs(combined - expected)) < 1e-10


def test_kohn_nirenberg_differs_from_weyl():
    weyl, kohn_nirenberg = weyl_kernel(bump, 0.5), weyl_kernel(bump, 1.0)
    assert np.max(np.abs(weyl - kohn_nirenberg)) > 1e-6


def test_invalid_quantization_and_shapes():
    with pytest.raises(ConfigurationError):
        weyl_quantize(bump, tau=0.7)
    with pytest.raises(GridMismatchError):
        SymbolGrid(grid, np.zeros((grid.count, grid.count)))


################
# Symbol classes
################
def test_rough_potential_certifies_its_class():
    symbol = SymbolSpec.rough_potential(3.0).sample(grid)
    fit = certify_symbol_class(weyl_quantize(symbol), 4.0, symbol=symbol)
    assert 3.5 <= fit.s_fit <= 4.5
    assert fit.passed
    assert fit.notes["symbol_norm"] > 0


def test_smooth_bump_decays_fast():
    fit = certify_symbol_class(weyl_quantize(bump), 10.0)
    assert fit.s_fit >= 10


def test_certificate_does_not_depend_on_the_window():
    symbol = SymbolSpec.rough_potential(3.0).sample(grid)
    operator = weyl_quantize(symbol)
    standard = certify_symbol_class(operator, 4.0)
    wide = certify_symbol_class(operator, 4.0, g=make_test_signal("gaussian", {"scale": 1.25}, grid))
    assert wide.passed
    assert abs(wide.s_fit - standard.s_fit) < 1.0


def test_symbol_norm_of_the_constant():
    assert math.isclose(symbol_norm(SymbolGrid.constant(1.0, grid), 4.0), 1.0, rel_tol=1e-8)


def test_composition_stays_within_the_product_bound():
    smooth = SymbolSpec.smooth_potential(0.5).sample(grid)
    result = compose_and_check([smooth, bump], 4.0)
    assert result.passed
    assert result.notes["envelope_constant"] <= result.notes["product_bound"]
    assert len(result.notes["factor_s_fit"]) == 2


def test_envelope_function_of_the_identity():
    envelope = envelope_function(weyl_quantize(SymbolGrid.constant(1.0, grid)))
    assert math.isclose(envelope.at((0.0, 0.0)), 2 ** -0.5, rel_tol=1e-10)
    assert envelope.at((0.25, 0.0)) == 0.0
    assert envelope.weighted_norm(2.0) > 0


@pytest.mark.parametrize("symplectic", [SymplecticMatrix.lower(0.3), SymplecticMatrix.shear(0.02),
                                        SymplecticMatrix.standard()])
def test_symplectic_covariance(symplectic):
    assert covariance_defect(bump, symplectic, corpus) < 1e-5


################
# Type I operators
################
def test_type_one_shear_is_the_free_particle():
    atom = make_test_signal("gabor_atom", {"x": -1.0, "xi": 0.5}, grid)
    fio = fio_type1_apply(SymplecticMatrix.shear(0.1), atom)
    assert (fio - free_particle(atom, 0.1).u_t).norm() < 1e-8


def test_type_one_needs_an_invertible_block():
    with pytest.raises(TypeIRepresentationError):
        fio_type1_apply(SymplecticMatrix.standard(), corpus[0])
