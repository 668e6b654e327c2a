"""
Tests for the qudit state-vector simulator
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from models.errors import EntanglementError, ImpossibleOutcomeError, RegisterBudgetError
from services.simulator_service import (
    Basis,
    RegisterLabel,
    StateVector,
    add_register,
    allocate,
    apply_controlled_add,
    apply_fourier,
    apply_phase,
    apply_shift,
    attach,
    clone,
    discard,
    empty_state,
    fidelity,
    fourier_matrix,
    measure,
    outcome_probabilities,
    reduced_state,
    register_index,
    snapshot,
    snapshot_matches,
    snapshot_to_json,
)


def _bell(p: int = 2) -> StateVector:
    state = allocate(p, 2)
    apply_fourier(state, 0)
    apply_controlled_add(state, 0, 1, 1)
    return state


def test_allocate_zero_state():
    state = allocate(3, 2)
    assert state.n == 2
    assert state.amplitudes.size == 9
    assert state.amplitudes[0] == 1
    assert state.norm() == pytest.approx(1.0)


@pytest.mark.parametrize("p, n", [(4, 1), (2, 0)])
def test_allocate_rejects_bad_arguments(p, n):
    with pytest.raises(ValueError):
        allocate(p, n)


def test_register_budget():
    with pytest.raises(RegisterBudgetError):
        allocate(2, 5, max_amplitudes=16)
    state = allocate(2, 4, max_amplitudes=16)
    with pytest.raises(RegisterBudgetError):
        add_register(state, "x", "extra")


def test_fourier_is_hadamard_for_qubits():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(fourier_matrix(2), h, atol=1e-12)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_fourier_unitary(p):
    f = fourier_matrix(p)
    np.testing.assert_allclose(f @ fourier_matrix(p, inverse=True), np.eye(p), atol=1e-12)
    state = allocate(p, 1)
    apply_fourier(state, 0)
    np.testing.assert_allclose(state.amplitudes, np.full(p, 1 / np.sqrt(p)), atol=1e-12)


def test_shift_and_phase():
    state = allocate(3, 1)
    apply_shift(state, 0, 2)
    np.testing.assert_allclose(state.amplitudes, [0, 0, 1])
    apply_phase(state, 0, 1)
    omega = np.exp(2j * np.pi / 3)
    np.testing.assert_allclose(state.amplitudes, [0, 0, omega ** 2], atol=1e-12)
    apply_shift(state, 0, -2)
    np.testing.assert_allclose(state.amplitudes, [omega ** 2, 0, 0], atol=1e-12)


@pytest.mark.parametrize("x, y, gamma, expected", [
    (1, 0, 2, 2),
    (2, 0, 2, 1),
    (2, 1, 1, 0),
    (0, 2, 2, 2),
])
def test_controlled_add_truth_table(x, y, gamma, expected):
    state = allocate(3, 2)
    apply_shift(state, 0, x)
    apply_shift(state, 1, y)
    apply_controlled_add(state, 0, 1, gamma)
    assert int(np.argmax(np.abs(state.amplitudes))) == x * 3 + expected


def test_controlled_add_target_before_control():
    state = allocate(2, 2)
    apply_shift(state, 1, 1)
    apply_controlled_add(state, 1, 0, 1)
    assert int(np.argmax(np.abs(state.amplitudes))) == 3


def test_controlled_add_same_register():
    with pytest.raises(ValueError):
        apply_controlled_add(allocate(2, 2), 1, 1, 1)


def test_bell_state_amplitudes():
    np.testing.assert_allclose(_bell().amplitudes, [1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)], atol=1e-12)


@pytest.mark.parametrize("y, sign", [(0, 1), (1, -1)])
def test_fourier_measurement_leaves_phase(y, sign):
    state = _bell()
    outcome, state = measure(state, 1, Basis.FOURIER, forced=y)
    assert outcome.value == y
    assert outcome.probability == pytest.approx(0.5)
    remaining = reduced_state(state, [0])
    expected = np.array([1, sign]) / np.sqrt(2)
    assert abs(np.vdot(expected, remaining)) ** 2 == pytest.approx(1.0)


@pytest.mark.parametrize("y", [0, 1, 2])
def test_fourier_measurement_qutrit_phase(y):
    state = _bell(3)
    measure(state, 1, Basis.FOURIER, forced=y)
    omega = np.exp(2j * np.pi / 3)
    expected = np.array([omega ** (-y * x) for x in range(3)]) / np.sqrt(3)
    remaining = reduced_state(state, [0])
    assert abs(np.vdot(expected, remaining)) ** 2 == pytest.approx(1.0)


@pytest.mark.parametrize("p, y", [(3, 1), (3, 2), (5, 3)])
def test_fourier_outcome_labels_basis_states(p, y):
    state = allocate(p, 1)
    apply_shift(state, 0, y)
    apply_fourier(state, 0)
    outcome, state = measure(state, 0, Basis.FOURIER, rng=np.random.default_rng(0))
    assert outcome.value == y
    assert outcome.probability == pytest.approx(1.0)
    np.testing.assert_allclose(outcome_probabilities(state, 0, Basis.FOURIER), np.eye(p)[y], atol=1e-12)


def test_computational_measurement_collapses():
    state = _bell()
    outcome, state = measure(state, 0, Basis.COMPUTATIONAL, forced=1)
    np.testing.assert_allclose(np.abs(state.amplitudes), [0, 0, 0, 1], atol=1e-12)


def test_forced_impossible_outcome():
    state = allocate(2, 1)
    with pytest.raises(ImpossibleOutcomeError):
        measure(state, 0, Basis.COMPUTATIONAL, forced=1)
    # state is untouched
    np.testing.assert_allclose(state.amplitudes, [1, 0])


def test_sampling_needs_rng():
    with pytest.raises(ValueError):
        measure(_bell(), 0)


def test_seeded_sampling_is_deterministic():
    first = [measure(_bell(), 0, rng=np.random.default_rng(5))[0].value for _ in range(3)]
    second = [measure(_bell(), 0, rng=np.random.default_rng(5))[0].value for _ in range(3)]
    assert first == second


def test_outcome_probabilities():
    state = allocate(3, 1)
    apply_fourier(state, 0)
    np.testing.assert_allclose(outcome_probabilities(state, 0), [1 / 3] * 3)
    np.testing.assert_allclose(outcome_probabilities(state, 0, Basis.FOURIER), [1, 0, 0], atol=1e-12)


def test_discard_product_register():
    state = allocate(2, 2, labels=[RegisterLabel("a", "x"), RegisterLabel("b", "y")])
    apply_fourier(state, 0)
    apply_shift(state, 1, 1)
    discard(state, 1)
    assert state.roles() == ["x"]
    np.testing.assert_allclose(state.amplitudes, [1 / np.sqrt(2)] * 2)


def test_discard_entangled_register():
    with pytest.raises(EntanglementError):
        discard(_bell(), 0)


def test_discard_rejects_small_entangled_residual():
    amplitudes = np.array([1, 0, 0, 1e-6], dtype=complex)
    state = StateVector(2, amplitudes / np.linalg.norm(amplitudes), [RegisterLabel("", "a"), RegisterLabel("", "b")])
    with pytest.raises(EntanglementError):
        discard(state, 1)


def test_reduced_state_of_entangled_subset():
    state = _bell()
    add_register(state, "c", "z")
    np.testing.assert_allclose(reduced_state(state, [0, 1]), _bell().amplitudes, atol=1e-12)
    with pytest.raises(EntanglementError):
        reduced_state(state, [0])


def test_attach_and_fidelity():
    state = empty_state(2)
    vector = np.array([0.6, 0.8j])
    attach(state, vector, "s", ["in"])
    assert register_index(state, "in") == 0
    with pytest.raises(KeyError):
        register_index(state, "out")
    assert fidelity(state, vector, [0]) == pytest.approx(1.0)
    assert fidelity(state, np.array([1, 0]), [0]) == pytest.approx(0.36)
    with pytest.raises(ValueError):
        attach(state, np.array([1.0, 1.0]), "s", ["bad"])


def test_clone_is_independent():
    state = _bell()
    copy = clone(state)
    apply_shift(copy, 0, 1)
    np.testing.assert_allclose(state.amplitudes, _bell().amplitudes)


def test_snapshot_and_golden_compare():
    entries = snapshot(_bell())
    assert [index for index, _ in entries] == [0, 3]
    golden = snapshot_to_json(entries)
    assert snapshot_matches(entries, golden)
    assert not snapshot_matches(entries, [[0, 0.5 ** 0.5, 0.0], [3, -(0.5 ** 0.5), 0.0]])


@settings(max_examples=40, deadline=None)
@given(p=st.sampled_from([2, 3, 5]), c=st.integers(0, 10), b=st.integers(0, 10), gamma=st.integers(0, 10))
def test_gates_preserve_norm(p, c, b, gamma):
    state = allocate(p, 3)
    apply_fourier(state, 0)
    apply_controlled_add(state, 0, 2, gamma)
    apply_shift(state, 1, c)
    apply_phase(state, 2, b)
    apply_fourier(state, 1, inverse=True)
    assert state.norm() == pytest.approx(1.0)
