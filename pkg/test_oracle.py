"""
Tests for the brute-force property checks
"""

import numpy as np
import pytest

from models.report import PropertyReport
from services.oracle_service import (
    CLASSICAL_FIXTURES,
    born_frequency_check,
    cat_state_check,
    classical_code_check,
    default_born_state,
    deferral_check,
    end_to_end_sweep,
    expected_cat_states,
    fourier_phase_check,
    fourier_phase_instance,
    load_fixture,
    phase_correction_check,
    phase_correction_instance,
)
from services.simulator_service import Basis, RegisterLabel, StateVector, clone, measure, outcome_probabilities


def test_fourier_phase_rule_on_bell_pair():
    alpha = np.array([1, 1]) / np.sqrt(2)
    assert fourier_phase_instance(2, [[1]], [[1]], alpha) == []


@pytest.mark.parametrize("p, f, g", [
    (2, [[1, 0]], [[0, 1]]),
    (3, [[1, 0]], [[0, 1]]),
    (3, [[1, 2]], [[0, 0]]),
])
def test_fourier_phase_rule_small_cases(p, f, g):
    alpha = np.full(p * p, 1 / p, dtype=complex)
    alpha[1] *= 1j
    alpha /= np.linalg.norm(alpha)
    assert fourier_phase_instance(p, f, g, alpha) == []


def test_fourier_phase_rule_with_shared_values():
    rng = np.random.default_rng(3)
    alpha = rng.normal(size=9) + 1j * rng.normal(size=9)
    alpha /= np.linalg.norm(alpha)
    assert fourier_phase_instance(3, [[1, 0]], [[1, 1], [0, 2]], alpha) == []


def test_fourier_phase_rule_zero_state():
    assert fourier_phase_instance(2, [[1]], [[1]], np.zeros(2)) == []


@pytest.mark.parametrize("p", [2, 3])
def test_fourier_phase_check(p):
    report = fourier_phase_check(n=3, p=p, trials=5, seed=1)
    assert report.ok, report.failures
    assert report.property == "fourier-phase"
    assert report.cases > 0


def test_fourier_phase_check_needs_both_sides():
    with pytest.raises(ValueError):
        fourier_phase_check(n=1)


def test_phase_correction_instance():
    rng = np.random.default_rng(0)
    alpha = rng.normal(size=9) + 1j * rng.normal(size=9)
    alpha /= np.linalg.norm(alpha)
    assert phase_correction_instance(3, [1, 2], alpha) < 1e-9


def test_phase_correction_minus_to_plus():
    plus = np.array([1, 1]) / np.sqrt(2)
    assert phase_correction_instance(2, [1], plus) < 1e-12
    assert phase_correction_instance(3, [0, 0], np.eye(9)[4]) == 0


def test_phase_correction_check():
    report = phase_correction_check(n=4, p=3, trials=20, seed=2)
    assert report.ok
    assert report.cases == 20


def test_born_frequencies_of_deterministic_register():
    amplitudes = np.zeros(4, dtype=complex)
    amplitudes[2] = 1.0
    state = StateVector(2, amplitudes, [RegisterLabel("", "a"), RegisterLabel("", "b")])
    report = born_frequency_check(state, 0, trials=200)
    assert report.ok
    assert report.cases == 2


@pytest.mark.parametrize("basis", [Basis.COMPUTATIONAL, Basis.FOURIER])
def test_born_frequencies_of_default_state(basis):
    report = born_frequency_check(default_born_state(), 0, basis, trials=10_000)
    assert report.ok, report.failures
    assert report.cases == 3
    assert "10000 shots" in report.instance


def test_fourier_probabilities_match_numpy_dft():
    state = default_born_state()
    # outcome y projects onto sum_x omega^(x y) |x>, so amplitudes are numpy's forward DFT
    rows = np.fft.fft(state.tensor(), axis=0, norm="ortho")
    expected = (np.abs(rows) ** 2).sum(axis=1)
    np.testing.assert_allclose(outcome_probabilities(state, 0, Basis.FOURIER), expected, atol=1e-12)

    rng = np.random.default_rng(4)
    trials = 10_000
    counts = np.bincount([measure(clone(state), 0, Basis.FOURIER, rng)[0].value for _ in range(trials)], minlength=3)
    sigma = np.sqrt(trials * expected * (1 - expected))
    assert np.all(np.abs(counts - trials * expected) <= 4 * sigma)


def test_classical_decoding_on_all_fixtures():
    report = classical_code_check([(name, load_fixture(name)) for name in CLASSICAL_FIXTURES])
    assert report.ok, report.failures
    # 2 + 2 + 4 + 9 + 49 input vectors
    assert report.cases == 66
    assert "combination_4_2" in report.instance


def test_expected_cat_states_shape():
    vector = expected_cat_states(2, 2, 2)
    assert vector.size == 64
    assert np.flatnonzero(vector).tolist() == [0, 7, 56, 63]
    assert np.linalg.norm(vector) == pytest.approx(1.0)


def test_cat_states_butterfly_exhaustive():
    report = cat_state_check("butterfly", load_fixture("butterfly"))
    assert report.ok, report.failures
    assert report.cases == 128


# combination_3_2 runs over F_3 because it has three targets; F_2 coding also decodes it
def test_cat_states_combination_sampled():
    report = cat_state_check("combination_3_2", load_fixture("combination_3_2"), limit=20)
    assert report.ok, report.failures
    assert report.cases == 20
    assert "F_3" in report.instance


def test_selection_deferral():
    report = deferral_check("butterfly", load_fixture("butterfly"), seeds=range(2))
    assert report.ok
    assert report.cases == 4


def test_end_to_end_sweep_on_threads():
    networks = [(name, load_fixture(name)) for name in ("single_edge", "butterfly")]
    report = end_to_end_sweep(networks, seeds=range(3), inputs=2, workers=2)
    assert report.ok, report.failures
    # single_edge: 1 selection, butterfly: 2 selections; 3 seeds x 2 inputs each
    assert report.cases == 18
    assert report.min_fidelity == pytest.approx(1.0, abs=1e-9)


def test_property_report_bookkeeping():
    report = PropertyReport(property="demo", instance="x")
    report.passed(3)
    assert report.ok
    report.fail("case 4", value=2)
    report.observe_fidelity(0.5)
    report.observe_fidelity(0.9)
    assert not report.ok
    assert report.cases == 4
    assert report.failures[0].witness == {"value": 2}
    assert report.min_fidelity == 0.5
    assert "FAIL" in report.summary_row()
