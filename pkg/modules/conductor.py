"""
Experiment drivers behind the command line: each cmd_* method computes,
records its certificates in the RunBorg and exports CSV/JSON through the
DataWriter.
"""
import logging
import math

import numpy as np

from modules.data_writer import DataWriter
from modules.errors import ConfigurationError, ExitCode, TFPropError
from modules.gabor import (GaborSystem, PhaseLattice, Weight, dual_window, frame_analysis, frame_bounds,
                           frame_reconstruct, modulation_norm, stft, stft_peak)
from modules.grid_signal import Grid1D, PhasePoint, SignalSpec, make_test_signal, relative_phase_error, signal_corpus
from modules.hivemind import RunBorg
from modules.metaplectic import decay_fit, gabor_matrix
from modules.propagators import (HamiltonianSpec, dyson_propagate, free_particle, harmonic_oscillator,
                                 harmonic_oscillator_operator, propagator_gabor_structure, quadratic_propagate,
                                 split_step, split_step_operator, stft_center)
from modules.run_config import RunConfig
from modules.wavefront import check_admissible, verify_propagation, wavefront_global, wavefront_sobolev
from modules.weyl import SymbolSpec, certify_symbol_class, symbol_norm, weyl_quantize

COMMANDS = ("stft", "example1", "example2", "gap", "certify", "propagate", "wavefront", "frame")


class Conductor:
    """
    Runs one subcommand against a resolved RunConfig.

    Certificates are collected in the shared RunBorg; the report is written
    even when a computation fails part way, and the exit code reflects the
    outcome: PASS, or CERTIFICATE_FAILURE when any certificate failed.
    ConfigurationError is left to the caller.
    """
    def __init__(self, run_config: RunConfig, command: str, out: str = None):
        if command not in COMMANDS:
            raise ConfigurationError(f"unknown subcommand '{command}', expected one of {COMMANDS}")
        self.run_config = run_config
        self.command = command
        experiment = run_config.output.experiment or command

        # Own the shared run state
        self.hivemind = RunBorg()
        self.hivemind.start(command, experiment, run_config.to_dict())

        self.grid = run_config.grid.build()
        self.window = run_config.window.build(self.grid)
        self.signal_spec = run_config.signal.spec()
        self.out = out or run_config.output.directory
        self.writer = None
        self.report = {"command": command, "config": run_config.to_dict()}

    def run(self) -> ExitCode:
        # preconditions first, nothing is written for a refused configuration
        self.preflight()
        self.writer = DataWriter(self.out, self.hivemind.experiment)
        try:
            match self.command:
                case "stft":
                    self.cmd_stft()
                case "example1":
                    self.cmd_example1()
                case "example2":
                    self.cmd_example2()
                case "gap":
                    self.cmd_gap()
                case "certify":
                    self.cmd_certify()
                case "propagate":
                    self.cmd_propagate()
                case "wavefront":
                    self.cmd_wavefront()
                case "frame":
                    self.cmd_frame()
        except ConfigurationError:
            raise
        except TFPropError as error:
            logging.error(f"{self.command} stopped: {error}")
            self.report["error"] = {"type": type(error).__name__, "message": str(error)}
            self.hivemind.record(type(error).__name__, False)
        finally:
            self.hivemind.running = False
            self.writer.write_report(self.report)
            self.writer.write_metadata()

        outcome = ExitCode.PASS if self.hivemind.passed else ExitCode.CERTIFICATE_FAILURE
        print(f"======== {self.command}: {outcome.name} ========")
        for name in self.hivemind.failures():
            print(f"failed certificate: {name}")
        return outcome

    def preflight(self):
        if self.command == "example2":
            example = self.run_config.example2
            hamiltonian = HamiltonianSpec.perturbed_oscillator(example.mu, example.scale)
            check_admissible(example.r, hamiltonian.admissible_class)
            for r in example.norm_r:
                if not abs(r) < hamiltonian.admissible_class - 2:
                    raise ConfigurationError(f"norm bound r = {r} needs |r| < s - 2 = {hamiltonian.admissible_class - 2}")

    def certificate(self, name: str, passed, **details) -> bool:
        self.report.setdefault("certificates", {})[name] = {"passed": passed, **details}
        print(f"{name}: {'exploratory' if passed is None else 'pass' if passed else 'FAIL'}")
        return self.hivemind.record(name, passed)

    def hamiltonian(self) -> HamiltonianSpec:
        settings = self.run_config.propagator
        match settings.hamiltonian:
            case "free_particle":
                return HamiltonianSpec.free_particle()
            case "harmonic_oscillator":
                return HamiltonianSpec.harmonic_oscillator()
            case _:
                return HamiltonianSpec.perturbed_oscillator(settings.mu, settings.scale)

    ######################
    # Subcommands
    ######################
    def cmd_stft(self):
        """Coefficients on the square lattice, full-lattice norms and peak."""
        signal = self.signal_spec.sample(self.grid)
        full = stft(signal, self.window)
        moyal = abs(full.norm() - signal.norm() * self.window.norm()) / (signal.norm() * self.window.norm())
        peak = stft_peak(full)
        settings = self.run_config.lattice
        coefficients = stft(signal, self.window, PhaseLattice.square(self.grid, settings.radius, settings.step))

        self.writer.write_csv("stft", coefficients.CSV_HEADER, coefficients.csv_rows())
        self.report["stft"] = {"signal": self.signal_spec.to_dict(), "signal_norm": signal.norm(),
                               "window_norm": self.window.norm(), "coefficient_norm": full.norm(),
                               "peak": [peak.x, peak.xi], "lattice": coefficients.lattice.to_dict()}
        self.certificate("moyal", moyal < 1e-8, relative_error=moyal)

    def cmd_example1(self):
        """Harmonic oscillator from u0 = 1: evolution, Gabor matrix and wave front rotation."""
        t = self.run_config.example1.t
        u0 = make_test_signal("constant", grid=self.grid)
        result = harmonic_oscillator(u0, t)
        self.writer.write_csv("u_t", result.CSV_HEADER, result.csv_rows())
        self.report["evolution"] = result.to_dict()

        rotation = HamiltonianSpec.harmonic_oscillator().flow(t)
        if abs(math.cos(t)) > 1e-12:
            chirp = make_test_signal("chirp", {"c": -math.tan(t)}, self.grid) * complex(math.cos(t)) ** -0.5
            margin = self.grid.margin_mask()
            error = relative_phase_error(chirp.with_values(chirp.values * margin),
                                         result.u_t.with_values(result.u_t.values * margin))
            self.certificate("chirp_profile", None, relative_error=error)

        if self.run_config.example1.gabor_matrix:
            settings = self.run_config.lattice
            lattice = PhaseLattice.square(self.grid, settings.radius, settings.step)
            sample = gabor_matrix(harmonic_oscillator_operator(self.grid, t), self.window, lattice)
            distances = np.linalg.norm(sample.out_points[:, None, :] - (sample.in_points @ rotation.matrix.T)[None],
                                       axis=-1)
            expected = 2 ** -0.5 * np.exp(-np.pi / 2 * distances ** 2)
            error = float(np.max(np.abs(sample.magnitude() - expected)))
            self.writer.write_csv("gabor_matrix", sample.CSV_HEADER, sample.csv_rows())
            self.certificate("gabor_matrix", error < 1e-5, sup_error=error)
            fit = decay_fit(sample, rotation).certify(math.inf)
            self.writer.write_csv("decay_fit", fit.CSV_HEADER, fit.csv_rows())
            self.certificate("decay_fit", fit.passed, fit=fit.to_dict())

        comparison = verify_propagation(HamiltonianSpec.harmonic_oscillator(), SignalSpec("constant"), t, p=None,
                                        grid=self.grid, sectors=self.run_config.sectors.build())
        self.certificate("wavefront_rotation", comparison.passed, comparison=comparison.to_dict())

    def cmd_example2(self):
        """Perturbed oscillator: symbol class, norm bounds, Gabor structure and propagation of WF^{2,r}."""
        example = self.run_config.example2
        hamiltonian = HamiltonianSpec.perturbed_oscillator(example.mu, example.scale)
        self.report["hamiltonian"] = hamiltonian.to_dict()

        symbol = hamiltonian.perturbation_symbol(self.grid)
        if symbol is not None:
            fit = certify_symbol_class(weyl_quantize(symbol), hamiltonian.decay_class, self.window, symbol=symbol)
            self.writer.write_csv("symbol_class", fit.CSV_HEADER, fit.csv_rows())
            self.certificate("symbol_class", fit.passed, fit=fit.to_dict())

        operator = split_step_operator(hamiltonian, self.grid, example.t)
        corpus = signal_corpus(self.grid, size=5, seed=self.run_config.output.seed)
        ratios = {}
        for r in example.norm_r:
            for p in example.norm_p:
                weight = Weight("vs", r)
                ratio = max(modulation_norm(operator(f), self.window, p, m=weight)
                            / modulation_norm(f, self.window, p, m=weight) for f in corpus)
                ratios[f"r={r},p={p}"] = ratio
        self.certificate("norm_bounds", all(ratio < 10 for ratio in ratios.values()), ratios=ratios)

        structure = propagator_gabor_structure(hamiltonian, example.t, self.window)
        self.writer.write_csv("propagator_decay", structure.CSV_HEADER, structure.csv_rows())
        self.certificate("propagator_structure", structure.passed, fit=structure.to_dict())

        comparison = verify_propagation(hamiltonian, SignalSpec("constant"), example.t, p=2, r=example.r,
                                        grid=self.grid, sectors=self.run_config.sectors.build())
        self.certificate("propagation", comparison.passed, comparison=comparison.to_dict())

    def cmd_gap(self):
        """
        Propagation for r in mu/2 - 1 <= r < mu - 2, where the identity is
        not proven. Reported, never pass/fail.
        """
        example = self.run_config.example2
        hamiltonian = HamiltonianSpec.perturbed_oscillator(example.mu, example.scale)
        low, high = example.mu / 2 - 1, example.mu - 2
        r = example.gap_r if example.gap_r is not None else (low + high) / 2
        if not r > 0:
            raise ConfigurationError(f"gap experiment needs r > 0, got {r}")
        comparison = verify_propagation(hamiltonian, SignalSpec("constant"), example.t, p=2, r=r, grid=self.grid,
                                        sectors=self.run_config.sectors.build(), enforce_admissibility=False)
        self.certificate("gap_propagation", None, r=r, gap=[low, high], agrees=comparison.passed,
                         comparison=comparison.to_dict())

    def cmd_certify(self):
        settings = self.run_config.certify
        spec = getattr(SymbolSpec, settings.symbol)(**settings.params)
        symbol = spec.sample(self.grid)
        operator = weyl_quantize(symbol, settings.tau)
        fit = certify_symbol_class(operator, settings.s, self.window, symbol=symbol)
        self.writer.write_csv("symbol_class", fit.CSV_HEADER, fit.csv_rows())
        self.report["symbol"] = {**spec.to_dict(), "tau": settings.tau, "norm": symbol_norm(symbol, settings.s)}
        self.certificate("symbol_class", fit.passed, fit=fit.to_dict())

    def cmd_propagate(self):
        settings = self.run_config.propagator
        hamiltonian = self.hamiltonian()
        u0 = self.signal_spec.sample(self.grid)
        t = settings.t

        match settings.method:
            case "closed_form":
                if hamiltonian.perturbation is not None:
                    raise ConfigurationError("no closed form for a perturbed Hamiltonian, use split_step or dyson")
                if settings.hamiltonian == "free_particle":
                    result = free_particle(u0, t)
                else:
                    result = harmonic_oscillator(u0, t)
            case "metaplectic":
                if hamiltonian.perturbation is not None:
                    raise ConfigurationError("the metaplectic path only covers quadratic Hamiltonians")
                result = quadratic_propagate(hamiltonian.quadratic, u0, t)
            case "split_step":
                result = split_step(hamiltonian, u0, t, settings.steps)
            case _:
                result = dyson_propagate(hamiltonian, u0, t, settings.order)

        self.writer.write_csv("u_t", result.CSV_HEADER, result.csv_rows())
        start = stft(u0, self.window).peak()
        center = stft_center(result, self.window)
        predicted = PhasePoint.from_array(hamiltonian.flow(t).apply(start.as_array()))
        self.report["propagation"] = {**result.to_dict(), "hamiltonian": hamiltonian.to_dict(),
                                      "initial_center": [start.x, start.xi], "center": [center.x, center.xi],
                                      "predicted_center": [predicted.x, predicted.xi]}
        if hamiltonian.perturbation is None:
            offset = math.hypot(center.x - predicted.x, center.xi - predicted.xi)
            cell = math.hypot(self.grid.spacing, self.grid.dual_spacing)
            self.certificate("center", offset <= cell, offset=offset, cell=cell)

    def cmd_wavefront(self):
        settings = self.run_config.wavefront
        sectors = self.run_config.sectors.build()
        if self.signal_spec.kind == "chirp":
            sectors = sectors.alias_free(self.grid, float(self.signal_spec.params.get("c", 1.0)))
        if settings.p is None:
            estimate = wavefront_global(self.signal_spec, self.run_config.window.spec(), sectors, self.grid)
        else:
            estimate = wavefront_sobolev(self.signal_spec, self.run_config.window.spec(), settings.p, settings.r,
                                         sectors, self.grid)
        self.writer.write_csv("sectors", estimate.CSV_HEADER, estimate.csv_rows())
        self.report["wavefront"] = {**estimate.to_dict(), "singular_angles": estimate.singular_angles}

    def cmd_frame(self):
        settings = self.run_config.frame
        grid = Grid1D(settings.length, settings.count)
        system = GaborSystem(self.run_config.window.build(grid), settings.alpha, settings.beta)
        bounds = frame_bounds(system)
        self.report["frame"] = {**system.to_dict(), "lower": bounds.lower, "upper": bounds.upper,
                                "condition": bounds.condition, "frame": bounds.is_frame}
        self.certificate("frame", bounds.is_frame, lower=bounds.lower, upper=bounds.upper)
        if bounds.is_frame:
            dual = dual_window(system)
            signal = self.signal_spec.sample(grid)
            rebuilt = frame_reconstruct(frame_analysis(signal, system), system, dual)
            error = (rebuilt - signal).norm() / signal.norm()
            self.writer.write_csv("dual_window", ("x", "re", "im"),
                                  zip(grid.points.tolist(), dual.values.real.tolist(), dual.values.imag.tolist()))
            self.certificate("reconstruction", error < 1e-8, relative_error=error)
