import json

import numpy as np
import pytest

from channels import classicalise
from qops_core import (
    DensityMatrix,
    Effect,
    PreferredBasis,
    ScenarioError,
    maximally_coherent_state,
    random_effect,
    random_pure_state,
)
from scenarios import (
    budget,
    baseline_interval,
    check_expectations,
    decode_matrix,
    encode_matrix,
    epsilon_mixture_state,
    evaluate,
    generalized_witness_v,
    get_named_scenario,
    hadamard_baseline_example,
    list_scenarios,
    named_scenario_from_json,
    named_scenario_to_json,
    noisy_witness,
    partial_summation,
    state_level_quantities,
    sweep_member,
    estimate_probability,
)
from witness_engine import w_isolated

PLUS = Effect.onto(np.ones(2))


@pytest.mark.parametrize("name", list_scenarios())
def test_catalogue_expectations_hold(name):
    outcomes = check_expectations(get_named_scenario(name))
    failed = [(o.quantity, o.measured, o.expected) for o in outcomes if not o.passed]
    assert not failed


def test_catalogue_names():
    assert list_scenarios() == [
        "bell", "born-hadamard", "classical-false-positive",
        "classically-correlated", "epsilon-mixture", "maximally-coherent",
    ]
    with pytest.raises(ScenarioError):
        get_named_scenario("teleportation")


def test_classical_false_positive_notes_sign_convention():
    named = get_named_scenario("classical-false-positive")
    assert "W^b = -1" in named.notes


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("eps", [0.0, 0.1, 0.3])
def test_epsilon_mixture_witness(d, eps):
    quantities = state_level_quantities(epsilon_mixture_state(d, eps))
    assert quantities["w_a"] == pytest.approx(eps * (1 - 1 / d), abs=1e-12)


def test_epsilon_mixture_ppt_threshold():
    assert state_level_quantities(epsilon_mixture_state(2, 0.3))["ppt"] == 1.0
    assert state_level_quantities(epsilon_mixture_state(2, 0.4))["ppt"] == 0.0
    with pytest.raises(ScenarioError):
        epsilon_mixture_state(2, 1.5)


def test_scenario_document_preserves_evaluation():
    named = get_named_scenario("bell")
    restored = named_scenario_from_json(named_scenario_to_json(named))
    assert restored.name == "bell"
    assert len(restored.expected) == len(named.expected)
    assert evaluate(restored).to_json() == evaluate(named).to_json()


def test_state_level_document():
    named = get_named_scenario("epsilon-mixture")
    restored = named_scenario_from_json(named_scenario_to_json(named))
    assert restored.state_level is not None
    assert evaluate(restored)["w_a"] == pytest.approx(evaluate(named)["w_a"], abs=1e-12)


@pytest.mark.parametrize(
    "document",
    [
        "{not json",
        json.dumps({"name": "x", "dim_s": 2}),
        json.dumps({"name": "x", "dim_s": 2, "dim_e": 2}),
        json.dumps({"name": "x", "dim_s": 2, "dim_e": 2, "joint_state": encode_matrix(np.eye(4) / 4)}),
    ],
)
def test_malformed_documents(document):
    with pytest.raises(ScenarioError):
        named_scenario_from_json(document)


def test_decode_matrix_shape():
    assert np.allclose(decode_matrix([[[1.0, 2.0]]]), np.array([[1 + 2j]]))
    with pytest.raises(ScenarioError):
        decode_matrix([[1.0, 2.0]])


def test_partial_summation_never_stops_on_incoherent_state(rng):
    for d in (2, 3, 4):
        diagonal = DensityMatrix(np.diag(rng.dirichlet(np.ones(d))).astype(complex), check=False)
        trace = partial_summation((diagonal, Effect.onto(np.ones(d))))
        assert trace.stop_index is None
        assert trace.witness == pytest.approx(0.0, abs=1e-12)


def test_partial_summation_complement_stops_earlier():
    coherent = (maximally_coherent_state(2), PLUS)
    with_complement = partial_summation(coherent)
    without = partial_summation(coherent, complement=False)
    assert with_complement.complement_used
    assert with_complement.stop_index == 0
    assert with_complement.stopped_by == "complement"
    assert without.stop_index is None
    assert abs(with_complement.witness) == pytest.approx(0.5, abs=1e-12)
    assert without.witness == pytest.approx(0.5, abs=1e-12)


def test_partial_summation_complement_never_stops_later():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(200):
        pair = (random_pure_state(4, rng), random_effect(4, rng))
        with_complement = partial_summation(pair)
        without = partial_summation(pair, complement=False)
        if with_complement.p_m <= 0.5:
            continue
        checked += 1
        assert with_complement.complement_used
        if without.stop_index is not None:
            assert with_complement.stop_index is not None
            assert with_complement.stop_index <= without.stop_index
    assert checked > 0


def test_partial_summation_keeps_plain_rule_for_negative_witness():
    # p_m = 0.54 and the plain sum reaches 0.66 (W < 0): only the plain rule fires
    rho = DensityMatrix(np.diag([0.6, 0.4]).astype(complex), check=False)
    rho_coherent = DensityMatrix(np.array([[0.6, -0.3], [-0.3, 0.4]], dtype=complex))
    effect = Effect(np.array([[0.9, 0.2], [0.2, 0.3]], dtype=complex))
    assert partial_summation((rho, effect), tolerance=1e-6).stop_index is None
    trace = partial_summation((rho_coherent, effect), tolerance=1e-6)
    assert trace.p_m > 0.5
    assert trace.complement_used
    assert trace.stopped_by == "plain"
    assert trace.stop_index == 1
    assert trace.plain_running_sums[-1] > trace.p_m


def test_partial_summation_uniform_terms_at_maximal_coherence():
    trace = partial_summation((maximally_coherent_state(4), Effect.onto(np.ones(4))))
    assert max(trace.terms) - min(trace.terms) == pytest.approx(0.0, abs=1e-12)


def test_partial_summation_on_born_scenario():
    trace = partial_summation(get_named_scenario("born-hadamard").scenario)
    assert abs(trace.witness) == pytest.approx(0.5, abs=1e-12)


def test_partial_summation_rejects_correlated_scenario():
    with pytest.raises(ScenarioError):
        partial_summation(get_named_scenario("bell").scenario)


def test_shot_noise_estimates(rng):
    assert estimate_probability(1.0, 10, rng) == 1.0
    with pytest.raises(ScenarioError):
        estimate_probability(0.5, 0, rng)
    sc = get_named_scenario("born-hadamard").scenario
    estimate = noisy_witness(sc, 200_000, rng)
    assert estimate == pytest.approx(0.5, abs=0.02)


def test_partial_summation_with_shots_is_reproducible():
    coherent = (maximally_coherent_state(2), PLUS)
    first = partial_summation(coherent, tolerance=0.05, shots=1000, rng=np.random.default_rng(5))
    second = partial_summation(coherent, tolerance=0.05, shots=1000, rng=np.random.default_rng(5))
    assert first == second


def test_hadamard_example_violates_baseline():
    family, test = hadamard_baseline_example()
    outcome = baseline_interval(family, test)
    assert outcome.violated
    assert outcome.margin == pytest.approx(0.5, abs=1e-12)
    assert (outcome.min_w, outcome.max_w) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_baseline_family_size_must_match_dimension():
    family, test = hadamard_baseline_example()
    with pytest.raises(ScenarioError):
        baseline_interval([family(0)], test)


def test_generalized_witness_reduces_to_isolated_witness(rng):
    rho = DensityMatrix.from_vector(rng.standard_normal(3) + 1j * rng.standard_normal(3))
    m = Effect.onto(np.ones(3))
    value = generalized_witness_v(rho, m, classicalise(PreferredBasis.computational(3)))
    assert value == pytest.approx(w_isolated(rho, m), abs=1e-12)


@pytest.mark.parametrize("kind, d, count", [("I", 3, 2), ("II", 3, 2), ("IV", 3, 4), ("III", 3, 10)])
def test_experiment_budget(kind, d, count):
    assert budget(kind, d).experiment_count == count


def test_sweep_members():
    assert sweep_member("maximally-coherent", 4).name == "maximally-coherent"
    first = sweep_member("random", 2, seed=9)
    second = sweep_member("random", 2, seed=9)
    assert np.array_equal(first.scenario.u_tau0, second.scenario.u_tau0)
    with pytest.raises(ScenarioError):
        sweep_member("maximally-coherent", 9)
    with pytest.raises(ScenarioError):
        sweep_member("ghz", 1)
