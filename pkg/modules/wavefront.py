"""
Numerical Gabor wave front sets.

Phase space minus a disc is cut into conic sectors. A sector is singular
for the global wave front set when |V_g u| fails to decay rapidly along it,
and for the Sobolev-type set WF^{p,r} when the weighted integral of
|V_g u|^p <z>^{pr} over the sector diverges, which on a finite grid means
it is non-negligible and still growing under refinement.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage
from sklearn.linear_model import LinearRegression

import config
from modules.errors import AdmissibilityError, ConfigurationError
from modules.gabor import bracket, stft
from modules.grid_signal import Grid1D, SampledSignal, SignalSource, make_test_signal, sample_source
from modules.propagators import HamiltonianSpec, split_step
from modules.symplectic import SymplecticMatrix, as_matrix
from modules.weyl import SymbolGrid, SymbolSpec, weyl_quantize


@dataclass(frozen=True)
class SectorGrid:
    """
    `count` sectors centered at k * 360/count degrees, restricted to the
    annulus inner_radius <= |z| <= outer_radius and cut into `shells` rings.
    The global decay rate is fitted on the outermost `fit_shells` rings.
    """
    count: int = config.sector_count
    inner_radius: float = config.sector_inner_radius
    outer_radius: Optional[float] = config.sector_outer_radius
    shells: int = config.sector_shells
    fit_shells: int = config.sector_fit_shells

    def __post_init__(self):
        if self.count < 4 or self.count % 2:
            raise ConfigurationError(f"sector count must be even and >= 4, got {self.count}")
        if self.inner_radius < 0 or self.shells < 2:
            raise ConfigurationError("sectors need a non-negative inner radius and at least two shells")
        if not 2 <= self.fit_shells <= self.shells:
            raise ConfigurationError(f"fit shells must lie in [2, {self.shells}], got {self.fit_shells}")
        if self.outer_radius is not None and self.outer_radius <= self.inner_radius:
            raise ConfigurationError("outer radius must exceed the inner radius")

    @property
    def width(self) -> float:
        return 2 * math.pi / self.count

    def outer(self, grid: Grid1D) -> float:
        return grid.margin_radius() if self.outer_radius is None else self.outer_radius

    def angle(self, index: int) -> float:
        return index * self.width

    def direction(self, index: int) -> np.ndarray:
        return np.array([math.cos(self.angle(index)), math.sin(self.angle(index))])

    def sector_of(self, vectors) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=float)
        angles = np.mod(np.arctan2(vectors[..., 1], vectors[..., 0]), 2 * math.pi)
        return np.floor(angles / self.width + 0.5).astype(int) % self.count

    def dilate(self, indices, slack: int = None) -> frozenset:
        slack = config.sector_slack if slack is None else slack
        return frozenset((i + d) % self.count for i in indices for d in range(-slack, slack + 1))

    def clusters(self, indices) -> list:
        """Runs of adjacent sector indices on the circle."""
        flagged = sorted(set(indices))
        if not flagged:
            return []
        if len(flagged) == self.count:
            return [flagged]
        start = next(i for i in flagged if (i - 1) % self.count not in flagged)
        runs, run = [], []
        for step in range(self.count):
            index = (start + step) % self.count
            if index in flagged:
                run.append(index)
            elif run:
                runs.append(run)
                run = []
        if run:
            runs.append(run)
        return runs

    def alias_free(self, grid: Grid1D, c: float) -> SectorGrid:
        """
        The same sectors, cut back to the disc that the aliased copies
        xi = c x +- L of a chirp ridge do not reach. For |c| <= 1 the copies
        only touch the corners of the lattice.
        """
        if abs(c) <= 1:
            return self
        limit = grid.length / math.sqrt(1 + c ** 2) - config.alias_allowance
        if self.outer(grid) <= limit:
            return self
        logging.warning(f"chirp c = {c} aliases at radius {limit + config.alias_allowance:.3f}; "
                        f"sectors cut back to outer radius {limit:.3f}")
        return replace(self, outer_radius=limit)

    def to_dict(self) -> dict:
        return {"count": self.count, "inner_radius": self.inner_radius, "outer_radius": self.outer_radius,
                "shells": self.shells, "fit_shells": self.fit_shells}


@dataclass(frozen=True)
class SectorRecord:
    index: int
    angle_deg: float
    rho: float = math.nan
    integral: float = math.nan
    growth: float = math.nan
    singular: bool = False

    def to_dict(self) -> dict:
        return {"index": self.index, "angle_deg": self.angle_deg, "rho": self.rho, "integral": self.integral,
                "growth": self.growth, "singular": self.singular}


@dataclass(frozen=True, eq=False)
class WaveFrontEstimate:
    """
    Per-sector classification.

    `directions` are the exact unit vectors of the singular set and
    `representatives` one vector per cluster of adjacent singular sectors
    (least decay in global mode, largest integral in Sobolev mode).
    Pushing through a symplectic map acts on these vectors, flags follow
    by re-binning.
    """
    sectors: SectorGrid
    records: tuple
    mode: str
    directions: np.ndarray
    representatives: np.ndarray
    p: Optional[float] = None
    r: Optional[float] = None
    params: dict = field(default_factory=dict)

    CSV_HEADER = ("index", "angle_deg", "rho", "integral", "growth", "singular")

    @property
    def singular(self) -> frozenset:
        return frozenset(self.sectors.sector_of(self.directions).tolist()) if len(self.directions) else frozenset()

    @property
    def representative_sectors(self) -> frozenset:
        if not len(self.representatives):
            return frozenset()
        return frozenset(self.sectors.sector_of(self.representatives).tolist())

    @property
    def singular_angles(self) -> list:
        return sorted(self.records[i].angle_deg for i in self.singular)

    def csv_rows(self):
        for record in self.records:
            yield (record.index, record.angle_deg, record.rho, record.integral, record.growth, record.singular)

    def to_dict(self) -> dict:
        return {"params": {"mode": self.mode, "p": self.p, "r": self.r, "sectors": self.sectors.to_dict(),
                           **self.params},
                "singular": sorted(self.singular), "representatives": sorted(self.representative_sectors),
                "sectors": [record.to_dict() for record in self.records]}


def _estimate(sectors: SectorGrid, records: list, mode: str, key: str, p=None, r=None, params=None) -> WaveFrontEstimate:
    flagged = [record.index for record in records if record.singular]
    representatives = []
    for cluster in sectors.clusters(flagged):
        if key == "rho":
            best = min(cluster, key=lambda i: records[i].rho)
        else:
            best = max(cluster, key=lambda i: records[i].integral)
        representatives.append(best)
    directions = np.array([sectors.direction(i) for i in flagged]).reshape(-1, 2)
    representative_directions = np.array([sectors.direction(i) for i in representatives]).reshape(-1, 2)
    return WaveFrontEstimate(sectors, tuple(records), mode, directions, representative_directions, p, r, params or {})


##################
# Phase-space profiles
##################
def _stft_magnitude(u: SampledSignal, g: SampledSignal) -> tuple:
    """
    |V_g u| on the full lattice.

    An x-independent magnitude (constants, plane waves) is recentered in xi
    at its maximum.
    """
    coefficients = stft(u, g)
    magnitude = coefficients.magnitude()
    lattice = coefficients.lattice
    peak = float(np.max(magnitude))
    if peak > 0 and np.max(np.ptp(magnitude, axis=0)) <= 1e-8 * peak:
        shift = lattice.shape[1] // 2 - int(np.argmax(magnitude[0]))
        magnitude = np.roll(magnitude, shift, axis=1)
        logging.debug(f"x-independent STFT magnitude recentered by {shift} frequency bins")
    return magnitude, lattice


def _magnitude_field(u: SampledSignal, g: SampledSignal) -> tuple:
    """|V_g u| with the polar coordinates and the cell area of every lattice point."""
    magnitude, lattice = _stft_magnitude(u, g)
    x, xi = np.meshgrid(lattice.x_values, lattice.xi_values, indexing="ij")
    return magnitude, np.hypot(x, xi), np.arctan2(xi, x), lattice.cell_area


def _sector_indices(sectors: SectorGrid, angles: np.ndarray) -> np.ndarray:
    return np.floor(np.mod(angles, 2 * math.pi) / sectors.width + 0.5).astype(int) % sectors.count


def _ray_maxima(magnitude: np.ndarray, lattice, sectors: SectorGrid, edges: np.ndarray) -> np.ndarray:
    """
    Shell maxima of |V_g u| along the center ray of every sector, linearly
    interpolated between lattice points at grid resolution.

    Returns a (count, shells) array.
    """
    step = min(lattice.x_step, lattice.xi_step)
    samples = max(2, int(math.ceil((edges[1] - edges[0]) / step)) + 1)
    radii = edges[:-1, None] + np.diff(edges)[:, None] * np.linspace(0, 1, samples)[None, :]
    angles = np.arange(sectors.count) * sectors.width
    x = np.cos(angles)[:, None, None] * radii[None]
    xi = np.sin(angles)[:, None, None] * radii[None]
    coordinates = np.array([(x - lattice.x_values[0]) / lattice.x_step,
                            (xi - lattice.xi_values[0]) / lattice.xi_step])
    values = ndimage.map_coordinates(magnitude, coordinates, order=1, mode="nearest")
    return values.max(axis=2)


def _window_for(g, grid: Grid1D) -> SampledSignal:
    return make_test_signal("gaussian", grid=grid) if g is None else sample_source(g, grid)


def wavefront_global(u: SignalSource, g=None, sectors: SectorGrid = None, grid: Grid1D = None) -> WaveFrontEstimate:
    """
    Per sector, regress log shell maxima of |V_g u| along the center ray
    against log <z> over the outermost `fit_shells` shells; the sector is
    singular when the fitted rate rho is below the threshold.

    A Gaussian ridge one sector away decays like exp(-a r^2) along the ray;
    its log-log slope only passes the threshold near the outer radius.
    Sectors with fewer than two fitted shells above the roundoff floor are
    regular.
    """
    sectors = sectors or SectorGrid()
    grid = grid or (u.grid if isinstance(u, SampledSignal) else Grid1D.default())
    u = sample_source(u, grid)
    magnitude, lattice = _stft_magnitude(u, _window_for(g, grid))

    edges = np.linspace(sectors.inner_radius, sectors.outer(grid), sectors.shells + 1)
    fitted = slice(sectors.shells - sectors.fit_shells, None)
    centers = ((edges[:-1] + edges[1:]) / 2)[fitted]
    maxima = _ray_maxima(magnitude, lattice, sectors, edges)[:, fitted]

    floor = config.roundoff_floor * float(np.max(magnitude))
    records = []
    for index in range(sectors.count):
        valid = maxima[index] > floor
        if np.count_nonzero(valid) < 2:
            rho = math.inf
        else:
            model = LinearRegression().fit(np.log(bracket(centers[valid]))[:, None], np.log(maxima[index][valid]))
            rho = -float(model.coef_[0])
        records.append(SectorRecord(index, math.degrees(sectors.angle(index)), rho=rho,
                                    singular=bool(rho < config.rho_threshold)))
    estimate = _estimate(sectors, records, "global", "rho", params={"rho_threshold": config.rho_threshold})
    logging.info(f"global wave front: singular sectors {sorted(estimate.singular)}")
    return estimate


def _sector_integrals(u: SampledSignal, g: SampledSignal, sectors: SectorGrid, p: float, r: float,
                      outer: float) -> tuple:
    magnitude, radius, angle, area = _magnitude_field(u, g)
    if np.isinf(p):
        density = magnitude * bracket(radius) ** r
    else:
        density = magnitude ** p * bracket(radius) ** (p * r) * area
    inside = (radius >= sectors.inner_radius) & (radius <= outer)
    integrals = np.zeros(sectors.count)
    reduce = np.maximum if np.isinf(p) else np.add
    reduce.at(integrals, _sector_indices(sectors, angle[inside]), density[inside])
    total = float(np.max(density) if np.isinf(p) else np.sum(density))
    return integrals, total


def wavefront_sobolev(u: SignalSource, g=None, p: float = 2, r: float = 1.0, sectors: SectorGrid = None,
                      grid: Grid1D = None) -> WaveFrontEstimate:
    """
    Per sector, the discrete integral of |V_g u|^p <z>^{pr} over the annular
    sector (a weighted sup for p = inf).

    A sector is singular when its integral exceeds divergence_floor times
    the integral over the whole plane and grows by more than growth_factor
    under refinement. With callable sources the refinement is N -> 2N on a
    self-dual grid; with fixed samples it is the nested radius R/sqrt(2) -> R.
    """
    if r <= 0:
        raise ConfigurationError(f"Sobolev wave front needs r > 0, got {r}")
    if p < 1:
        raise ConfigurationError(f"Sobolev wave front needs p >= 1, got {p}")
    sectors = sectors or SectorGrid()
    two_grid = not isinstance(u, SampledSignal) and (g is None or not isinstance(g, SampledSignal))
    grid = grid or (u.grid if isinstance(u, SampledSignal) else Grid1D.default())
    outer = sectors.outer(grid)

    integrals, total = _sector_integrals(sample_source(u, grid), _window_for(g, grid), sectors, p, r, outer)
    if two_grid:
        fine = Grid1D.self_dual(2 * grid.count)
        fine_outer = fine.margin_radius() if sectors.outer_radius is None else outer * math.sqrt(2)
        refined, _ = _sector_integrals(sample_source(u, fine), _window_for(g, fine), sectors, p, r, fine_outer)
    else:
        refined = integrals
        integrals, _ = _sector_integrals(sample_source(u, grid), _window_for(g, grid), sectors, p, r,
                                         outer / math.sqrt(2))

    floor = config.divergence_floor * total
    records = []
    for index in range(sectors.count):
        growth = refined[index] / integrals[index] if integrals[index] > 0 else math.inf
        singular = bool(refined[index] > floor and growth > config.growth_factor)
        records.append(SectorRecord(index, math.degrees(sectors.angle(index)), integral=float(refined[index]),
                                    growth=float(growth), singular=singular))
    estimate = _estimate(sectors, records, "sobolev", "integral", p, r,
                         {"two_grid": two_grid, "growth_factor": config.growth_factor,
                          "divergence_floor": config.divergence_floor})
    logging.info(f"WF^({p},{r}) wave front: singular sectors {sorted(estimate.singular)}")
    return estimate


##################
# Propagation
##################
def _push(vectors: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    if not len(vectors):
        return vectors
    pushed = vectors @ matrix.T
    return pushed / np.linalg.norm(pushed, axis=1, keepdims=True)


def propagate_wavefront(estimate: WaveFrontEstimate, symplectic: SymplecticMatrix) -> WaveFrontEstimate:
    """
    Push every singular direction v to Av/|Av| and re-bin; records of the
    target sectors inherit the statistics of their source sectors.
    """
    matrix = as_matrix(symplectic)
    sectors = estimate.sectors
    directions = _push(estimate.directions, matrix)
    representatives = _push(estimate.representatives, matrix)

    sources = {}
    for source, target in zip(sectors.sector_of(estimate.directions).tolist(), sectors.sector_of(directions).tolist()):
        sources.setdefault(target, []).append(estimate.records[source])
    records = []
    for index in range(sectors.count):
        angle = math.degrees(sectors.angle(index))
        inherited = sources.get(index)
        if inherited:
            records.append(SectorRecord(index, angle, min(rec.rho for rec in inherited),
                                        max(rec.integral for rec in inherited), max(rec.growth for rec in inherited), True))
        else:
            records.append(SectorRecord(index, angle))
    return WaveFrontEstimate(sectors, tuple(records), estimate.mode, directions, representatives, estimate.p,
                             estimate.r, {**estimate.params, "pushed_by": matrix.tolist()})


@dataclass(frozen=True)
class WaveFrontComparison:
    """
    Predicted against observed singular sectors with a slack of
    `slack` sectors: missed = P \\ dilate(O), extra = O \\ dilate(P).
    """
    predicted: frozenset
    observed: frozenset
    missed: frozenset
    extra: frozenset
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"predicted": sorted(self.predicted), "observed": sorted(self.observed), "missed": sorted(self.missed),
                "extra": sorted(self.extra), "passed": self.passed, "details": self.details}


def compare_estimates(predicted: WaveFrontEstimate, observed: WaveFrontEstimate, slack: int = None,
                      subset_only: bool = False, **details) -> WaveFrontComparison:
    sectors = predicted.sectors
    missed = predicted.singular - sectors.dilate(observed.singular, slack)
    extra = observed.singular - sectors.dilate(predicted.singular, slack)
    passed = not extra if subset_only else not (missed or extra)
    details = {**details, "predicted_representatives": sorted(predicted.representative_sectors),
               "observed_representatives": sorted(observed.representative_sectors)}
    return WaveFrontComparison(predicted.singular, observed.singular, missed, extra, passed, details)


def _wavefront(source, g, p, r, sectors, grid) -> WaveFrontEstimate:
    if p is None:
        return wavefront_global(source, g, sectors, grid)
    return wavefront_sobolev(source, g, p, r, sectors, grid)


def check_admissible(r: float, s: float):
    """0 < 2r < s - 2d with d = 1."""
    if not 0 < 2 * r < s - 2:
        raise AdmissibilityError(r, s)


def verify_propagation(hamiltonian: HamiltonianSpec, u0: SignalSource, t: float, p: Optional[float] = 2,
                       r: float = None, g=None, sectors: SectorGrid = None, steps: int = None,
                       grid: Grid1D = None, enforce_admissibility: bool = True) -> WaveFrontComparison:
    """
    Compare the wave front of e^{itH} u0 (split-step) with the wave front of
    u0 pushed by the quadratic flow A_t.

    p = None uses the global wave front set; otherwise r must satisfy
    0 < 2r < s - 2 for the admissible class s of the perturbation, unless
    enforce_admissibility is off (exploratory runs past the proven range).
    """
    if p is not None:
        if r is None:
            raise ConfigurationError("Sobolev propagation check needs r")
        if enforce_admissibility:
            check_admissible(r, hamiltonian.admissible_class)

    if isinstance(u0, SampledSignal):
        evolved = split_step(hamiltonian, u0, t, steps).u_t
    else:
        def evolved(target: Grid1D) -> SampledSignal:
            return split_step(hamiltonian, sample_source(u0, target), t, steps).u_t

    symplectic = hamiltonian.flow(t)
    initial = _wavefront(u0, g, p, r, sectors, grid)
    predicted = propagate_wavefront(initial, symplectic)
    observed = _wavefront(evolved, g, p, r, sectors, grid)
    comparison = compare_estimates(predicted, observed, t=t, p=p, r=r, hamiltonian=hamiltonian.name,
                                   initial=sorted(initial.singular), map=symplectic.to_dict())
    logging.info(f"propagation at t = {t}: missed {sorted(comparison.missed)}, extra {sorted(comparison.extra)}")
    return comparison


@dataclass(frozen=True)
class MicrolocalityReport:
    results: dict
    passed: bool

    def to_dict(self) -> dict:
        return {"passed": self.passed, "results": {name: result.to_dict() for name, result in self.results.items()}}


def verify_microlocality(symbol, u: SignalSource, p: Optional[float] = 2, r: float = 0.4, g=None,
                         sectors: SectorGrid = None, s: float = None, grid: Grid1D = None) -> MicrolocalityReport:
    """
    Singular sectors of sigma(x, D) u must lie within one sector of those of
    u; checked for the Weyl (tau = 1/2) and Kohn-Nirenberg (tau = 1) forms.
    """
    if s is not None and p is not None:
        check_admissible(r, s)
    results = {}
    initial = _wavefront(u, g, p, r, sectors, grid)
    for name, tau in (("weyl", 0.5), ("kohn_nirenberg", 1.0)):
        if isinstance(symbol, SymbolGrid):
            image = weyl_quantize(symbol, tau)(sample_source(u, symbol.grid))
        else:
            def image(target: Grid1D, tau=tau) -> SampledSignal:
                spec = symbol if isinstance(symbol, SymbolSpec) else SymbolSpec("symbol", symbol)
                return weyl_quantize(spec.sample(target), tau)(sample_source(u, target))
        observed = _wavefront(image, g, p, r, sectors, grid)
        results[name] = compare_estimates(initial, observed, subset_only=True, tau=tau, p=p, r=r)
    return MicrolocalityReport(results, all(result.passed for result in results.values()))
