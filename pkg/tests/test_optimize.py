from dataclasses import replace

import numpy as np
import pytest

from channels import classicalise, identity_channel, random_channel, unitary_channel
from optimize import (
    SearchConfig,
    diamond_distance,
    induced_trace_norm_distance,
    max_over_pure_states,
    optimal_effect,
    output_distance,
    stabilised,
)
from qops_core import (
    DimensionMismatchError,
    PreferredBasis,
    SearchError,
    maximally_entangled_state,
    random_effect,
    random_pure_state,
    trace_norm,
)
from witness_engine import r_monotone

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


@pytest.mark.parametrize(
    "overrides",
    [{"restarts": 0}, {"max_iters": 0}, {"tol": 0.0}, {"decay": 1.0}, {"patience": 0}],
)
def test_search_config_validation(overrides):
    with pytest.raises(SearchError):
        SearchConfig(**overrides)


def test_optimal_effect_value():
    effect, value = optimal_effect(np.diag([0.3, -0.3]))
    assert np.isclose(value, 0.3)
    assert np.allclose(effect.matrix, np.diag([1, 0]))


def test_max_over_pure_states_finds_population_maximum(small_search):
    found = max_over_pure_states(lambda rho: float(rho.matrix[0, 0].real), 3, small_search)
    assert found.value == pytest.approx(1.0, abs=1e-4)
    assert found.evaluations > small_search.restarts
    assert 0 <= found.restart < small_search.restarts


def test_search_is_deterministic(small_search):
    def objective(rho):
        return float(abs(rho.matrix[0, 1]))

    first = max_over_pure_states(objective, 2, small_search)
    second = max_over_pure_states(objective, 2, small_search)
    assert first.value == second.value
    assert first.restart == second.restart
    assert np.array_equal(first.argmax_state.matrix, second.argmax_state.matrix)


def test_induced_distance_identity_vs_gamma(small_search):
    gamma = classicalise(PreferredBasis.computational(2))
    found = induced_trace_norm_distance(identity_channel(2), gamma, small_search)
    assert found.value == pytest.approx(0.5, abs=1e-3)
    assert found.argmax_effect is not None
    assert found.value <= 0.5 + 1e-12


def test_induced_distance_orthogonal_unitaries(small_search):
    found = induced_trace_norm_distance(identity_channel(2), unitary_channel(PAULI_X), small_search)
    assert found.value == pytest.approx(1.0, abs=1e-4)


def test_diamond_distance_at_maximally_entangled_input():
    gamma = classicalise(PreferredBasis.computational(3))
    value = output_distance(stabilised(identity_channel(3)), stabilised(gamma), maximally_entangled_state(3))
    assert value == pytest.approx(1 - 1 / 3, abs=1e-12)


def test_diamond_distance_search():
    gamma = classicalise(PreferredBasis.computational(2))
    found = diamond_distance(identity_channel(2), gamma, SearchConfig(restarts=8, seed=3))
    assert found.value == pytest.approx(0.5, abs=5e-3)


def test_distance_dimension_mismatch(small_search):
    with pytest.raises(DimensionMismatchError):
        induced_trace_norm_distance(identity_channel(2), identity_channel(3), small_search)


def test_search_dimension_must_be_positive(small_search):
    with pytest.raises(DimensionMismatchError):
        max_over_pure_states(lambda rho: 0.0, 0, small_search)


def _population(rho):
    return float(rho.matrix[0, 0].real)


def test_search_stops_at_target(small_search):
    full = max_over_pure_states(_population, 3, small_search)
    early = max_over_pure_states(_population, 3, replace(small_search, target=1.0, target_tol=1e-6))
    assert early.value >= 1.0 - 1e-6
    assert early.converged
    assert early.restart == 0
    assert early.evaluations < full.evaluations


def test_unreachable_target_changes_nothing(small_search):
    full = max_over_pure_states(_population, 3, small_search)
    capped = max_over_pure_states(_population, 3, replace(small_search, target=2.0))
    assert capped.value == full.value
    assert capped.restart == full.restart
    assert capped.evaluations == full.evaluations


def test_target_tolerance_must_be_positive():
    with pytest.raises(SearchError):
        SearchConfig(target=1.0, target_tol=0.0)


def test_bare_objective_has_no_effect_but_distances_do(small_search):
    assert max_over_pure_states(_population, 2, small_search).argmax_effect is None
    found = induced_trace_norm_distance(identity_channel(2), unitary_channel(PAULI_X), small_search)
    rho = found.argmax_state.matrix
    delta = rho - PAULI_X @ rho @ PAULI_X
    assert found.argmax_effect.expectation(delta) == pytest.approx(found.value, abs=1e-10)


def test_optimal_effect_beats_random_effects(rng):
    for _ in range(10):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        delta = (a + a.conj().T) / 2
        delta -= np.trace(delta) / 4 * np.eye(4)
        effect, value = optimal_effect(delta)
        assert value == pytest.approx(trace_norm(delta) / 2, abs=1e-9)
        for _ in range(100):
            assert random_effect(4, rng).expectation(delta) <= value + 1e-12
        assert effect.expectation(delta) == pytest.approx(value, abs=1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_ancilla_never_lowers_the_distance(seed):
    rng = np.random.default_rng([seed, 31])
    a, b = random_channel(2, rng), random_channel(2, rng)
    search = SearchConfig(restarts=4, max_iters=3000, seed=seed)
    induced = induced_trace_norm_distance(a, b, search)
    diamond = diamond_distance(a, b, replace(search, target=induced.value, target_tol=1e-7))
    assert diamond.value >= induced.value - 1e-6


@pytest.mark.parametrize("d", [2, 3, 4])
def test_no_random_pure_state_beats_isolated_maximum(d, rng):
    bound = 1 - 1 / d
    for _ in range(5000):
        assert r_monotone(random_pure_state(d, rng)) / 2 <= bound + 1e-12


def test_search_reaches_isolated_maximum_at_its_target(small_search):
    found = max_over_pure_states(lambda rho: r_monotone(rho) / 2, 3, replace(small_search, target=2 / 3))
    assert found.value == pytest.approx(2 / 3, abs=1e-3)
    assert found.value <= 2 / 3 + 1e-12
