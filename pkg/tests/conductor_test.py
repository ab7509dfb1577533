####################################################
# Running the tests with pytest (pip install pytest)
####################################################
# Run the tests in the cmd from the root folder:
# - running all the tests: $ pytest tests/conductor_test.py
# - running a specific test: $ pytest tests/conductor_test.py::test_function

import json

import pytest

from main import main
from modules.conductor import Conductor
from modules.errors import ConfigurationError
from modules.hivemind import RunBorg
from modules.run_config import RunConfig


def run(tmp_path, command, *overrides):
    argv = [command, "--out", str(tmp_path), "--quiet"]
    for override in overrides:
        argv += ["--override", override]
    return main(argv)


def report(tmp_path, experiment):
    return json.loads((tmp_path / experiment / "report.json").read_text())


################
# Exit codes
################
def test_frame_passes(tmp_path):
    assert run(tmp_path, "frame") == 0
    written = report(tmp_path, "frame")
    assert written["passed"]
    assert written["outcomes"] == {"frame": True, "reconstruction": True}
    assert written["certificates"]["reconstruction"]["relative_error"] < 1e-8
    assert (tmp_path / "frame" / "dual_window.csv").exists()
    assert (tmp_path / "frame" / "metadata.json").exists()


def test_undersampled_frame_fails(tmp_path):
    assert run(tmp_path, "frame", "frame.alpha=2", "frame.beta=2") == 1
    assert report(tmp_path, "frame")["outcomes"] == {"frame": False}


def test_bad_override_is_a_configuration_error(tmp_path):
    assert run(tmp_path, "frame", "grid.count=7") == 2
    assert not any(tmp_path.iterdir())


def test_inadmissible_example2_writes_nothing(tmp_path):
    assert run(tmp_path, "example2", "example2.r=0.6") == 2
    assert not (tmp_path / "example2").exists()


def test_closed_form_needs_a_quadratic_hamiltonian(tmp_path):
    assert run(tmp_path, "propagate", "propagator.hamiltonian=\"perturbed_oscillator\"") == 2


def test_unknown_command_is_refused():
    with pytest.raises(ConfigurationError):
        Conductor(RunConfig(), "spectrogram")


################
# Subcommands
################
def test_stft_is_deterministic(tmp_path):
    assert run(tmp_path, "stft") == 0
    first = (tmp_path / "stft" / "report.json").read_bytes()
    assert run(tmp_path, "stft") == 0
    assert (tmp_path / "stft" / "report.json").read_bytes() == first
    written = json.loads(first)
    assert written["outcomes"] == {"moyal": True}
    assert written["stft"]["peak"] == pytest.approx([0.0, 0.0], abs=1e-9)
    rows = (tmp_path / "stft" / "stft.csv").read_text().splitlines()
    assert rows[0] == "x,xi,re,im"
    assert len(rows) == 1 + 17 * 17


def test_certify_a_constant_symbol(tmp_path):
    assert run(tmp_path, "certify", "certify.symbol=\"constant\"", "certify.params={\"value\": 1.0}") == 0
    written = report(tmp_path, "certify")
    assert written["certificates"]["symbol_class"]["passed"]


def test_switching_the_symbol_needs_no_params(tmp_path):
    assert run(tmp_path, "certify", "certify.symbol=\"constant\"") == 0
    written = report(tmp_path, "certify")
    assert written["symbol"]["name"] == "constant(1.0)"
    assert written["certificates"]["symbol_class"]["passed"]


def test_params_of_another_symbol_are_a_configuration_error(tmp_path):
    assert run(tmp_path, "certify", "certify.symbol=\"constant\"", "certify.params={\"mu\": 3.0}") == 2
    assert not any(tmp_path.iterdir())


def test_split_step_keeps_the_center_on_the_flow(tmp_path):
    code = run(tmp_path, "propagate", "propagator.hamiltonian=\"harmonic_oscillator\"",
               "propagator.method=\"split_step\"", "propagator.steps=8", "signal.kind=\"gabor_atom\"",
               "signal.params={\"x\": 1.0, \"xi\": 0.5}", "output.experiment=\"oscillator\"")
    assert code == 0
    written = report(tmp_path, "oscillator")
    assert written["outcomes"] == {"center": True}
    assert (tmp_path / "oscillator" / "u_t.csv").exists()


def test_wavefront_of_a_chirp(tmp_path):
    code = run(tmp_path, "wavefront", "signal.kind=\"chirp\"", "signal.params={\"c\": 1.0}", "wavefront.p=null")
    assert code == 0
    written = report(tmp_path, "wavefront")
    assert written["wavefront"]["singular"] == [9, 45]
    assert written["wavefront"]["params"]["sectors"]["outer_radius"] is None


def test_steep_chirp_stays_inside_the_alias_free_disc(tmp_path):
    code = run(tmp_path, "wavefront", "signal.kind=\"chirp\"", "signal.params={\"c\": 2.0}", "wavefront.p=null")
    assert code == 0
    written = report(tmp_path, "wavefront")
    assert written["wavefront"]["params"]["sectors"]["outer_radius"] == pytest.approx(512 ** 0.5 / 5 ** 0.5 - 3.5)
    singular = set(written["wavefront"]["singular"])
    assert {13, 49} <= singular <= {12, 13, 14, 48, 49, 50}
    assert written["wavefront"]["representatives"] == [13, 49]


def test_run_state_is_shared():
    first, second = RunBorg(), RunBorg()
    first.start("frame", "trial", {})
    first.record("frame", True)
    second.record("exploratory", None)
    assert second.certificates == {"frame": True, "exploratory": None}
    assert first.passed
    second.record("reconstruction", False)
    assert first.failures() == ["reconstruction"]


@pytest.mark.slow
def test_example1_certificates(tmp_path):
    assert run(tmp_path, "example1") == 0
    outcomes = report(tmp_path, "example1")["outcomes"]
    assert outcomes["chirp_profile"] is None
    assert outcomes["gabor_matrix"] and outcomes["decay_fit"] and outcomes["wavefront_rotation"]
