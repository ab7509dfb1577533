####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/gabor_test.py
# - running a specific test: $ pytest tests/gabor_test.py::test_function

import math

import numpy as np
import pytest

from modules.errors import CoarseLatticeError, ConfigurationError, NotAFrameError
from modules.gabor import (GaborSystem, PhaseLattice, Weight, dual_window, frame_analysis, frame_bounds,
                           frame_reconstruct, istft, modulation_norm, stft, stft_peak, subconvolution_constant,
                           weight_equivalence_check)
from modules.grid_signal import Grid1D, SampledSignal, make_test_signal, signal_corpus, tf_shift
from modules.propagators import gaussian_packet
from modules.symplectic import SymplecticMatrix

grid = Grid1D.default()
window = make_test_signal("gaussian", grid=grid)
corpus = signal_corpus(grid, size=20)

frame_grid = Grid1D(8.0, 64)
frame_window = make_test_signal("gaussian", grid=frame_grid)


################
# STFT
################
def test_stft_round_trip():
    for f in corpus:
        rebuilt = istft(stft(f, window), window)
        assert (rebuilt - f).norm() / f.norm() < 1e-10


def test_moyal_identity():
    for f in signal_corpus(grid, size=100, seed=101):
        assert math.isclose(stft(f, window).norm(), f.norm() * window.norm(), rel_tol=1e-10)


@pytest.mark.parametrize("m, n", [(25, -40), (-60, 13)])
def test_stft_magnitude_is_shift_covariant(m, n):
    # |V_g pi(w) f|(z) = |V_g f|(z - w) for w on the grid lattice
    f = corpus[2]
    shifted = tf_shift(f, (m * grid.spacing, n * grid.dual_spacing))
    expected = np.roll(stft(f, window).magnitude(), (m, n), axis=(0, 1))
    assert np.max(np.abs(stft(shifted, window).magnitude() - expected)) < 1e-12


def test_gaussian_stft_anchor():
    magnitude = stft(window, window).magnitude()
    x, xi = np.meshgrid(grid.points, grid.frequencies, indexing="ij")
    expected = 2 ** -0.5 * np.exp(-np.pi * (x ** 2 + xi ** 2) / 2)
    inside = (np.abs(x) <= grid.margin_radius()) & (np.abs(xi) <= grid.margin_radius())
    assert np.max(np.abs(magnitude - expected)[inside]) < 1e-8


def test_istft_refuses_coarse_lattices():
    coarse = stft(corpus[0], window, PhaseLattice.square(grid))
    with pytest.raises(CoarseLatticeError):
        istft(coarse, window)


def test_peak_of_a_dispersed_packet():
    wide = Grid1D.self_dual(2048)
    z = (wide.snap(-2.0) * wide.spacing, 0.3)
    packet = gaussian_packet(wide, z, 0.5)
    lattice = PhaseLattice.rectangular(wide, 4.0, wide.spacing, 2.0, wide.dual_spacing)
    peak = stft_peak(stft(packet, make_test_signal("gaussian", grid=wide), lattice))
    assert abs(peak.x - (z[0] + 2 * math.pi * z[1])) < 1e-3
    assert abs(peak.xi - z[1]) < 1e-3


def test_peak_of_gabor_atom():
    atom = make_test_signal("gabor_atom", {"x": 2.0, "xi": 3.0}, grid)
    peak = stft_peak(stft(atom, window))
    assert abs(peak.x - 2.0) < grid.spacing
    assert abs(peak.xi - 3.0) < 1e-6


def test_gaussian_peaks_at_the_origin():
    peak = stft(window, window).peak()
    assert abs(peak.x) < 1e-9 and abs(peak.xi) < 1e-9


def test_chirp_ridge_follows_the_slope():
    magnitude = stft(make_test_signal("chirp", {"c": 1.0}, grid), window).magnitude()
    for x0 in (-3.0, 1.0, 4.0):
        row = grid.count // 2 + grid.snap(x0)
        ridge = grid.frequencies[np.argmax(magnitude[row])]
        assert abs(ridge - grid.points[row]) <= 2 * grid.dual_spacing


def test_square_lattice_is_snapped():
    lattice = PhaseLattice.square(grid)
    assert lattice.shape == (17, 17)
    assert np.allclose(lattice.x_values / grid.spacing, np.rint(lattice.x_values / grid.spacing))
    assert np.allclose(lattice.xi_values / grid.dual_spacing, np.rint(lattice.xi_values / grid.dual_spacing))


################
# Frames
################
def test_gaussian_frame_at_density_four():
    system = GaborSystem(frame_window, 0.5, 0.5)
    bounds = frame_bounds(system)
    assert bounds.is_frame
    assert 0 < bounds.lower <= bounds.upper
    f = make_test_signal("random", {"radius": 2.0}, frame_grid)
    rebuilt = frame_reconstruct(frame_analysis(f, system), system)
    assert (rebuilt - f).norm() / f.norm() < 1e-10


def test_frame_bounds_sandwich_the_coefficient_energy():
    system = GaborSystem(frame_window, 0.5, 0.5)
    bounds = frame_bounds(system)
    rng = np.random.default_rng(5)
    for _ in range(10):
        f = SampledSignal(frame_grid, rng.standard_normal(frame_grid.count) + 1j * rng.standard_normal(frame_grid.count))
        energy = float(np.sum(np.abs(frame_analysis(f, system).values) ** 2))
        assert bounds.lower * f.norm() ** 2 * (1 - 1e-10) <= energy <= bounds.upper * f.norm() ** 2 * (1 + 1e-10)


def test_undersampled_system_is_not_a_frame():
    system = GaborSystem(frame_window, 2.0, 2.0)
    assert not frame_bounds(system).is_frame
    assert frame_bounds(system).condition == math.inf
    with pytest.raises(NotAFrameError):
        dual_window(system)


def test_orthonormal_delta_basis():
    delta = np.zeros(frame_grid.count)
    delta[frame_grid.count // 2] = 1 / math.sqrt(frame_grid.spacing)
    system = GaborSystem(SampledSignal(frame_grid, delta), frame_grid.spacing, frame_grid.count / frame_grid.length)
    bounds = frame_bounds(system)
    assert math.isclose(bounds.lower, 1.0, rel_tol=1e-10)
    assert math.isclose(bounds.upper, 1.0, rel_tol=1e-10)


def test_lattice_steps_must_divide_the_grid():
    with pytest.raises(ConfigurationError):
        GaborSystem(frame_window, 0.3, 0.5)


################
# Weights and norms
################
def test_unweighted_l2_modulation_norm_is_moyal():
    f = corpus[1]
    assert math.isclose(modulation_norm(f, window, 2), f.norm() * window.norm(), rel_tol=1e-10)


def test_modulation_norm_rejects_small_exponents():
    with pytest.raises(ConfigurationError):
        modulation_norm(corpus[0], window, 0.5)


def test_weighted_norms_grow_with_the_weight():
    f = make_test_signal("gabor_atom", {"x": 2.0, "xi": 2.0}, grid)
    plain = modulation_norm(f, window, 1)
    weighted = modulation_norm(f, window, 1, m=Weight("vs", 1.0))
    assert weighted > plain
    assert modulation_norm(f, window, math.inf) <= f.norm() * window.norm() + 1e-12


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
def test_polynomial_weight_is_submultiplicative(s):
    weight = Weight("vs", s)
    rng = np.random.default_rng(int(10 * s))
    z, w = rng.uniform(-8, 8, (500, 2)), rng.uniform(-8, 8, (500, 2))
    assert np.all(weight(z + w) <= weight(z) * weight(w) * (1 + 1e-12))


def test_modulation_norms_do_not_depend_on_the_window():
    wide_window = make_test_signal("gaussian", {"scale": 1.5}, grid)
    ratios = [modulation_norm(f, window, 1, m=Weight("vs", 1.0)) / modulation_norm(f, wide_window, 1, m=Weight("vs", 1.0))
              for f in corpus[:8]]
    assert 0 < min(ratios) and max(ratios) / min(ratios) < 2


def test_rotation_preserves_polynomial_weights():
    lower, upper = weight_equivalence_check(Weight("vs", 2.0), SymplecticMatrix.rotation(0.7))
    assert math.isclose(lower, 1.0, rel_tol=1e-10)
    assert math.isclose(upper, 1.0, rel_tol=1e-10)


def test_shear_changes_polynomial_weights_boundedly():
    lower, upper = weight_equivalence_check(Weight("vs", 1.0), SymplecticMatrix.shear(0.1))
    assert lower < 1.0 < upper < math.inf


def test_subconvolution_constant_is_finite():
    constant = subconvolution_constant(3.0)
    assert 0 < constant < math.inf
