####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/grid_signal_test.py
# - running a specific test: $ pytest tests/grid_signal_test.py::test_function

import math

import numpy as np
import pytest

from modules.errors import ConfigurationError, GridMismatchError, WrapAroundWarning
from modules.grid_signal import (Grid1D, PhasePoint, SampledSignal, SignalSpec, align_phase, fourier, inverse_fourier,
                                 make_test_signal, reflect, relative_phase_error, sample_source, signal_corpus,
                                 spectral_derivative, tf_shift)

grid = Grid1D.default()


################
# Grids
################
def test_default_grid_is_self_dual():
    assert grid.count == 512
    assert math.isclose(grid.spacing, grid.dual_spacing)
    assert grid.dual() is grid
    assert grid.points[grid.count // 2] == 0.0


def test_dual_of_rectangular_grid():
    rectangular = Grid1D(8.0, 128)
    dual = rectangular.dual()
    assert not rectangular.is_self_dual
    assert math.isclose(dual.length, 16.0)
    assert math.isclose(dual.spacing, rectangular.dual_spacing)


@pytest.mark.parametrize("count", [6, 7, 65])
def test_invalid_sample_counts(count):
    with pytest.raises(ConfigurationError):
        Grid1D(8.0, count)


def test_margin_mask_and_refinement():
    assert math.isclose(grid.margin_radius(), grid.length / 2 * 7 / 8)
    assert np.all(np.abs(grid.points[grid.margin_mask()]) <= grid.margin_radius())
    refined = grid.refined()
    assert refined.count == 2 * grid.count
    assert np.isin(np.round(grid.points, 12), np.round(refined.points, 12)).all()


################
# Signals
################
def test_signal_values_are_frozen():
    f = make_test_signal("gaussian", grid=grid)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_signals_on_different_grids_do_not_mix():
    f = make_test_signal("gaussian", grid=grid)
    h = make_test_signal("gaussian", grid=Grid1D(8.0, 64))
    with pytest.raises(GridMismatchError):
        f + h
    with pytest.raises(GridMismatchError):
        SampledSignal(grid, np.zeros(10))


def test_unknown_signal_kind():
    with pytest.raises(ConfigurationError):
        make_test_signal("sawtooth", grid=grid)
    with pytest.raises(ConfigurationError):
        SignalSpec("sawtooth")


def test_corpus_is_seeded_and_normalized():
    first = signal_corpus(grid, size=4, seed=7)
    second = signal_corpus(grid, size=4, seed=7)
    for f, h in zip(first, second):
        assert math.isclose(f.norm(), 1.0, rel_tol=1e-12)
        assert np.array_equal(f.values, h.values)


def test_hermite_functions_are_orthonormal():
    modes = [make_test_signal("hermite", {"n": n}, grid) for n in range(5)]
    gram = np.array([[f.inner(h) for h in modes] for f in modes])
    assert np.max(np.abs(gram - np.eye(5))) < 1e-10


def test_unperturbed_eigenmode_is_the_ground_state():
    mode = make_test_signal("perturbed_eigenmode", {"n": 0, "scale": 0.0}, grid)
    ground = make_test_signal("hermite", {"n": 0}, grid)
    assert (mode - ground).norm() < 1e-6


def test_signal_spec_samples_any_grid():
    spec = SignalSpec("chirp", {"c": 1.0})
    coarse, fine = spec(grid), sample_source(spec, Grid1D.self_dual(1024))
    assert coarse.grid.count == 512 and fine.grid.count == 1024
    assert np.allclose(np.abs(fine.values), 1.0)


################
# Fourier transform
################
def test_fourier_is_unitary_and_inverted():
    f = signal_corpus(grid, size=1)[0]
    spectrum = fourier(f)
    assert math.isclose(spectrum.norm(), f.norm(), rel_tol=1e-12)
    assert (inverse_fourier(spectrum) - f).norm() < 1e-12


def test_gaussian_is_fourier_invariant():
    f = make_test_signal("gaussian", grid=grid)
    assert np.max(np.abs(fourier(f).values - f.values)) < 1e-10


def test_fourier_twice_is_the_reflection():
    for f in signal_corpus(grid, size=3, seed=11):
        assert (fourier(fourier(f)) - reflect(f)).norm() < 1e-12


@pytest.mark.parametrize("x, xi", [(20, 30), (-15, 7), (0, -40)])
def test_fourier_exchanges_time_and_frequency_shifts(x, xi):
    # F pi(x, xi) f = e^{2 pi i x xi} pi(xi, -x) F f
    z = PhasePoint(x * grid.spacing, xi * grid.dual_spacing)
    f = signal_corpus(grid, size=1, seed=3)[0]
    left = fourier(tf_shift(f, z))
    right = tf_shift(fourier(f), (z.xi, -z.x)) * np.exp(2j * np.pi * z.x * z.xi)
    assert (left - right).norm() < 1e-10
    assert relative_phase_error(left, right) < 1e-10


def test_spectral_derivative_of_gaussian():
    f = make_test_signal("gaussian", grid=grid)
    expected = -2 * np.pi * grid.points * f.values
    assert np.max(np.abs(spectral_derivative(f.values, grid) - expected)) < 1e-9


################
# Time-frequency shifts
################
def test_tf_shift_moves_the_atom():
    x0 = 40 * grid.spacing
    shifted = tf_shift(make_test_signal("gaussian", grid=grid), PhasePoint(x0, 3.0))
    expected = np.exp(2j * np.pi * 3.0 * grid.points) * np.exp(-np.pi * (grid.points - x0) ** 2)
    assert np.max(np.abs(shifted.values - expected)) < 1e-12


def test_tf_shift_warns_on_wrap_around():
    with pytest.warns(WrapAroundWarning):
        tf_shift(make_test_signal("gaussian", grid=grid), (grid.length, 0.0))


def test_reflection_of_an_atom():
    x0 = 30 * grid.spacing
    atom = make_test_signal("gabor_atom", {"x": x0, "xi": 1.5}, grid)
    mirrored = make_test_signal("gabor_atom", {"x": -x0, "xi": -1.5}, grid)
    assert (reflect(atom) - mirrored).norm() < 1e-12


def test_align_phase_recovers_a_global_phase():
    f = signal_corpus(grid, size=1)[0]
    phase, distance = align_phase(f, f * np.exp(0.7j))
    assert distance < 1e-12
    assert abs(phase - np.exp(-0.7j)) < 1e-12
