# scenarios.py - Named scenario catalogue and the experimental procedures built on it
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ValidationError

from channels import InterruptionKind, KrausChannel, apply, dual
from config import get_config
from optimize import SearchConfig
from qops_core import (
    BipartiteLayout,
    ComplexMatrix,
    ConsistencyError,
    DensityMatrix,
    DimensionMismatchError,
    Effect,
    PreferredBasis,
    ScenarioError,
    is_ppt,
    is_unitary,
    ket,
    maximally_entangled_state,
    random_density_matrix,
    random_effect,
    random_pure_state,
    random_unitary,
    tensor,
    trace_norm,
)
from witness_engine import (
    Scenario,
    WitnessReport,
    classicalise_system,
    correlation_split,
    iq_distance,
    measurement_maps,
    probability,
    witness_suite,
)

CONFIG = get_config()

# Gates
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
CNOT = tensor(P0, IDENTITY_2) + tensor(P1, PAULI_X)


def dft_matrix(d: int) -> ComplexMatrix:
    """F|0> is the maximally coherent state"""
    omega = np.exp(2j * np.pi / d)
    j, k = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    return omega ** (j * k) / np.sqrt(d)


# === Catalogue types ===

@dataclass(frozen=True)
class ExpectedValue:
    quantity: str
    value: float
    tolerance: float
    provenance: str


@dataclass(frozen=True, eq=False)
class StateLevelCase:
    """A joint state at tau measured with a joint effect directly, without dynamics"""
    layout: BipartiteLayout
    joint_state: DensityMatrix
    joint_effect: Effect


@dataclass(frozen=True, eq=False)
class NamedScenario:
    name: str
    expected: Tuple[ExpectedValue, ...]
    scenario: Optional[Scenario] = None
    state_level: Optional[StateLevelCase] = None
    notes: str = ""

    def __post_init__(self):
        if (self.scenario is None) == (self.state_level is None):
            raise ScenarioError(f"{self.name}: exactly one of scenario / state_level must be set")


@dataclass(frozen=True)
class ExpectationResult:
    quantity: str
    expected: float
    measured: float
    tolerance: float
    provenance: str

    @property
    def passed(self) -> bool:
        return abs(self.measured - self.expected) <= self.tolerance


def _expect(quantity: str, value: float, provenance: str, tolerance: float = 1e-12) -> ExpectedValue:
    return ExpectedValue(quantity, value, tolerance, provenance)


def _pure(d: int, label: int = 0) -> DensityMatrix:
    return DensityMatrix.basis_state(d, label)


# === Worked examples ===

def bell_scenario() -> NamedScenario:
    """|phi+> prepared at tau; (H (x) I) CNOT maps it back so a product M = |0><0| detects it"""
    layout = BipartiteLayout(2, 2)
    sc = Scenario(
        layout=layout,
        rho_s0=_pure(2),
        env0=_pure(2),
        u_tau0=CNOT @ tensor(HADAMARD, IDENTITY_2),
        u_T_tau=tensor(HADAMARD, IDENTITY_2) @ CNOT,
        m=Effect.onto(ket(2, 0)),
    )
    expected = (
        _expect("p1", 1.0, "DERIVED: 4x4 propagation"),
        _expect("p2", 0.5, "DERIVED: 4x4 propagation"),
        _expect("w_a", 0.5, "DERIVED: P^I - P^II"),
        _expect("coherence_term_a", 0.0, "reduced state maximally mixed"),
        _expect("correlation_term_a", 0.5, "DERIVED: correlations carry W^a"),
        _expect("iq_distance", 0.5, "DERIVED: off-diagonal block trace norm"),
        _expect("chi_norm", 1.5, "DERIVED: eigenvalues 3/4, -1/4 x3"),
        _expect("w_b", 0.5, "DERIVED: direct simulation"),
        _expect("w_c", 0.0, "DERIVED: reduced state incoherent"),
        _expect("thm4_rhs", -2.0, "DERIVED: 2(1/2) - 2(3/2)"),
    )
    return NamedScenario("bell", expected, scenario=sc)


def epsilon_mixture_state(d: int, eps: float) -> StateLevelCase:
    """(1 - eps) I/d^2 + eps |Psi><Psi| measured with M'' = |Psi><Psi|"""
    if not 0.0 <= eps <= 1.0:
        raise ScenarioError(f"eps must lie in [0, 1], got {eps}")
    layout = BipartiteLayout(d, d)
    psi = maximally_entangled_state(d).matrix
    rho = (1 - eps) * np.eye(d * d) / (d * d) + eps * psi
    return StateLevelCase(layout, DensityMatrix(rho, check=False), Effect(psi, check=False))


def state_level_quantities(case: StateLevelCase) -> Dict[str, float]:
    rho = case.joint_state.matrix
    quantum_part = rho - classicalise_system(rho, case.layout)
    return {
        "w_a": float(np.real(np.trace(case.joint_effect.matrix @ quantum_part))),
        "iq_distance": iq_distance(rho, case.layout),
        "ppt": float(is_ppt(rho, case.layout)),
        "chi_norm": correlation_split(case.joint_state, case.layout).chi_norm,
    }


def epsilon_mixture_scenario(d: int = 2, eps: float = 0.2) -> NamedScenario:
    case = epsilon_mixture_state(d, eps)
    expected = [_expect("w_a", eps * (1 - 1 / d), "eps (1 - 1/d)")]
    if d == 2:
        expected.append(_expect("ppt", 1.0 if eps < 1 / 3 else 0.0, "separable below eps = 1/3", 0.0))
    return NamedScenario("epsilon-mixture", tuple(expected), state_level=case,
                         notes=f"state-level evaluation at d={d}, eps={eps}")


def classical_false_positive_scenario() -> NamedScenario:
    """Classically controlled flip: the environment bit set before tau flips the system after it"""
    layout = BipartiteLayout(2, 2)
    sc = Scenario(
        layout=layout,
        rho_s0=_pure(2),
        env0=_pure(2),
        u_tau0=tensor(IDENTITY_2, PAULI_X),
        u_T_tau=tensor(IDENTITY_2, P0) + tensor(PAULI_X, P1),
        m=Effect.onto(ket(2, 1)),
    )
    expected = (
        _expect("p1", 1.0, "DERIVED: truth table"),
        _expect("p4", 0.0, "DERIVED: truth table"),
        _expect("w_b", 1.0, "maximum algebraic value"),
        _expect("w_c", 0.0, "environment reset hides nothing coherent"),
        _expect("w_a", 0.0, "DERIVED: Gamma acts trivially on |0>"),
        _expect("chi_norm", 0.0, "product state at tau"),
        _expect("chi_term_b", 0.0, "product state at tau"),
        _expect("coherence_term_b", 0.0, "diagonal reduced state"),
        _expect("map_mismatch_b", 1.0, "measure-I is sigma_x conjugation, measure-IV the identity"),
        _expect("prop1_lhs", 2.0, "DERIVED: identity vs sigma_x conjugation", CONFIG.OPTIMIZER_TOL),
        _expect("prop1_rhs", 2.0, "DERIVED: orthogonal environment states"),
    )
    notes = (
        "M = |1><1| variant. With M = |0><0| and rho_S(0) = |0><0| the same dynamics give "
        "W^b = -1, not +1; the magnitude is the same."
    )
    return NamedScenario("classical-false-positive", expected, scenario=sc, notes=notes)


def born_scenario(u_s: np.ndarray, u_e_trivial: bool = True, *, u_s_later: Optional[np.ndarray] = None,
                  rho_s0: Optional[DensityMatrix] = None, m: Optional[Effect] = None,
                  dim_e: int = 2, name: str = "born") -> NamedScenario:
    """
    Product dynamics u (x) u_E with env0 = |e_0>, so the joint state stays a product

    Args:
        u_s: system unitary before tau
        u_e_trivial: u_E = I when True, otherwise a diagonal phase unitary keeping |e_0> an eigenstate
        u_s_later: system unitary after tau (defaults to u_s)
        rho_s0: initial system state (defaults to |0>)
        m: final effect (defaults to |0><0|)
        dim_e: environment dimension
    """
    u_s = np.asarray(u_s, dtype=complex)
    if not is_unitary(u_s):
        raise ScenarioError("system unitary is not unitary")
    d = u_s.shape[0]
    u_s_later = u_s if u_s_later is None else np.asarray(u_s_later, dtype=complex)
    u_e = np.eye(dim_e, dtype=complex) if u_e_trivial else np.diag(np.exp(1j * np.pi * np.arange(dim_e) / dim_e))
    sc = Scenario(
        layout=BipartiteLayout(d, dim_e),
        rho_s0=rho_s0 if rho_s0 is not None else _pure(d),
        env0=_pure(dim_e),
        u_tau0=tensor(u_s, u_e),
        u_T_tau=tensor(u_s_later, u_e),
        m=m if m is not None else Effect.onto(ket(d, 0)),
    )
    return NamedScenario(name, (), scenario=sc)


def born_hadamard_scenario() -> NamedScenario:
    plus = Effect.onto(np.ones(2))
    named = born_scenario(HADAMARD, u_s_later=IDENTITY_2, m=plus, name="born-hadamard")
    provenance = "isolated maximum 1 - 1/d at d=2"
    expected = tuple(_expect(q, 0.5, provenance, 1e-10) for q in ("w_a", "w_b", "w_c", "w_isolated"))
    return replace(named, expected=expected + (_expect("correlation_term_a", 0.0, "product state", 1e-10),))


def classically_correlated_scenario() -> NamedScenario:
    """
    Environment = (coin, bit) with index 2 * coin + bit, coin maximally mixed.
    Before tau the coin flips both the system and the bit; after tau the bit flips the system back.
    """
    layout = BipartiteLayout(2, 4)
    coin0, coin1 = P0, P1
    env0 = DensityMatrix(tensor(np.eye(2) / 2, P0), check=False)
    u_tau0 = tensor(IDENTITY_2, tensor(coin0, IDENTITY_2)) + tensor(PAULI_X, tensor(coin1, PAULI_X))
    u_T_tau = tensor(IDENTITY_2, tensor(IDENTITY_2, P0)) + tensor(PAULI_X, tensor(IDENTITY_2, P1))
    sc = Scenario(layout, _pure(2), env0, u_tau0, u_T_tau, Effect.onto(ket(2, 0)))
    expected = (
        _expect("p1", 1.0, "DERIVED: bit undoes the flip"),
        _expect("w_a", 0.0, "state at tau is incoherent-quantum"),
        _expect("iq_distance", 0.0, "classical correlations only"),
        _expect("w_b", 0.5, "DERIVED: reset forgets the bit"),
        _expect("w_c", 0.0, "diagonal reduced state"),
        _expect("chi_term_b", 0.5, "classical correlations carry W^b"),
        _expect("chi_norm", 1.0, "DERIVED: diagonal chi entries +-1/4"),
    )
    return NamedScenario("classically-correlated", expected, scenario=sc,
                         notes="W^b false positive driven by classical system-environment correlations")


def maximally_coherent_scenario(d: int = 3) -> NamedScenario:
    """Isolated system (d_E = 1) driven from |0> to the maximally coherent state and measured on it"""
    plus = Effect.onto(np.ones(d))
    named = born_scenario(dft_matrix(d), u_s_later=np.eye(d), m=plus, dim_e=1, name="maximally-coherent")
    expected = (
        _expect("w_a", 1 - 1 / d, "isolated maximum 1 - 1/d", 1e-10),
        _expect("r_monotone", 2 * (1 - 1 / d), "R(|+><+|) = 2(1 - 1/d)", 1e-10),
        _expect("dimension_bound", float(d), "d >= 1/(1 - |W|)", 0.0),
    )
    return replace(named, expected=expected)


# === Random generators ===

def random_scenario(layout: BipartiteLayout, rng: np.random.Generator) -> Scenario:
    """Random dynamics, random effect, pure or mixed environment with equal odds"""
    mixed_env = rng.random() < 0.5
    env0 = random_density_matrix(layout.dim_e, rng) if mixed_env else random_pure_state(layout.dim_e, rng)
    return Scenario(
        layout=layout,
        rho_s0=random_density_matrix(layout.dim_s, rng),
        env0=env0,
        u_tau0=random_unitary(layout.joint_dim, rng),
        u_T_tau=random_unitary(layout.joint_dim, rng),
        m=random_effect(layout.dim_s, rng),
    )


def random_born_scenario(dim_s: int, rng: np.random.Generator, dim_e: int = 2) -> Scenario:
    named = born_scenario(
        random_unitary(dim_s, rng),
        u_e_trivial=bool(rng.random() < 0.5),
        u_s_later=random_unitary(dim_s, rng),
        rho_s0=random_density_matrix(dim_s, rng),
        m=random_effect(dim_s, rng),
        dim_e=dim_e,
    )
    return named.scenario


def random_iq_state(layout: BipartiteLayout, rng: np.random.Generator) -> DensityMatrix:
    """sum_i p_i |i><i| (x) rho_E^i"""
    weights = rng.dirichlet(np.ones(layout.dim_s))
    rho = np.zeros((layout.joint_dim, layout.joint_dim), dtype=complex)
    for i, p in enumerate(weights):
        rho += p * tensor(np.outer(ket(layout.dim_s, i), ket(layout.dim_s, i)),
                          random_density_matrix(layout.dim_e, rng).matrix)
    return DensityMatrix(rho, check=False)


# === Registry ===

SCENARIOS: Dict[str, Callable[[], NamedScenario]] = {
    "bell": bell_scenario,
    "born-hadamard": born_hadamard_scenario,
    "classical-false-positive": classical_false_positive_scenario,
    "classically-correlated": classically_correlated_scenario,
    "epsilon-mixture": epsilon_mixture_scenario,
    "maximally-coherent": maximally_coherent_scenario,
}


def list_scenarios() -> List[str]:
    return sorted(SCENARIOS)


def get_named_scenario(name: str) -> NamedScenario:
    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(list_scenarios())}")
    return SCENARIOS[name]()


def evaluate(named: NamedScenario, search: Optional[SearchConfig] = None) -> Union[WitnessReport, Dict[str, float]]:
    """WitnessReport for dynamic scenarios, a quantity dictionary for state-level ones"""
    if named.state_level is not None:
        return state_level_quantities(named.state_level)
    wants_prop1 = any(e.quantity.startswith("prop1") for e in named.expected)
    return witness_suite(named.scenario, include_prop1=wants_prop1, search=search)


def check_expectations(named: NamedScenario, search: Optional[SearchConfig] = None,
                       result: Optional[Union[WitnessReport, Dict[str, float]]] = None) -> List[ExpectationResult]:
    result = result if result is not None else evaluate(named, search)
    lookup = result.__getitem__ if isinstance(result, dict) else result.quantity
    checks = [
        ExpectationResult(e.quantity, e.value, lookup(e.quantity), e.tolerance, e.provenance)
        for e in named.expected
    ]
    for check in checks:
        if not check.passed:
            logger.warning(f"{named.name}: {check.quantity} = {check.measured:.15f}, expected {check.expected}")
    return checks


# === Experimental procedures ===

@dataclass(frozen=True)
class PartialSummationTrace:
    target: float
    terms: Tuple[float, ...]
    running_sums: Tuple[float, ...]
    stop_index: Optional[int]
    naive_stop_index: Optional[int]
    complement_used: bool
    p_m: float
    full_sum: float
    plain_running_sums: Tuple[float, ...] = ()
    stopped_by: Optional[str] = None

    @property
    def witness(self) -> float:
        """target - full sum; |witness| = |W^isolated| (sign flips when the complement is used)"""
        return self.target - self.full_sum


def _isolated_pair(source: Union[Scenario, Tuple[DensityMatrix, Effect]]) -> Tuple[DensityMatrix, np.ndarray]:
    if not isinstance(source, Scenario):
        rho, m_eff = source
        m_matrix = m_eff.matrix if isinstance(m_eff, Effect) else np.asarray(m_eff, dtype=complex)
        if m_matrix.shape != rho.matrix.shape:
            raise DimensionMismatchError("effect and state dimensions differ")
        return rho, m_matrix
    split = correlation_split(source.rho_se_tau, source.layout)
    displacement = trace_norm(split.rho_e.matrix - source.env0.matrix)
    if split.chi_norm > CONFIG.IQ_TOL or displacement > CONFIG.IQ_TOL:
        raise ScenarioError(
            f"partial summation needs a Born-approximation scenario (||chi|| = {split.chi_norm:.3e}, "
            f"environment displacement {displacement:.3e})"
        )
    m_eff = dual(measurement_maps(source).measure_IV).apply_matrix(source.m.matrix)
    return split.rho_s, m_eff


def estimate_probability(p: float, shots: int, rng: np.random.Generator) -> float:
    """Relative frequency of `shots` Bernoulli(p) outcomes"""
    if shots < 1:
        raise ScenarioError(f"shots must be positive, got {shots}")
    return rng.binomial(shots, float(np.clip(p, 0.0, 1.0))) / shots


def noisy_witness(sc: Scenario, shots: int, rng: np.random.Generator,
                  first: str = "I", second: str = "II") -> float:
    """Finite-shot estimate of P^first - P^second"""
    p_first = probability(sc, sc.interruption(first))
    p_second = probability(sc, sc.interruption(second))
    return estimate_probability(p_first, shots, rng) - estimate_probability(p_second, shots, rng)


def partial_summation(source: Union[Scenario, Tuple[DensityMatrix, Effect]], tolerance: Optional[float] = None,
                      complement: bool = True, shots: Optional[int] = None,
                      rng: Optional[np.random.Generator] = None,
                      basis: Optional[PreferredBasis] = None) -> PartialSummationTrace:
    """
    Accumulate the classicalised probability sum_n p_n(tau) Omega_mn one basis label at a time

    Stops (safely) at the first prefix strictly above target + tolerance: since every
    summand is nonnegative no later term can bring the sum back. The naive index records
    where stopping at the first prefix different from the target would have stopped.

    Args:
        source: isolated pair (rho, M') or a Born-approximation scenario
        tolerance: stopping tolerance (noise allowance)
        complement: when p_m > 1/2 also watch q_m = 1 - p_m with complemented summands
        shots: replace exact probabilities with finite-shot estimates
        rng: generator for shot sampling
        basis: order in which basis labels are visited
    """
    tolerance = CONFIG.PARTIAL_SUM_TOL if tolerance is None else tolerance
    rho, m_eff = _isolated_pair(source)
    basis = basis or PreferredBasis.computational(rho.dim)
    if shots is not None and rng is None:
        rng = np.random.default_rng(CONFIG.DEFAULT_SEED)

    def measured(p: float) -> float:
        return p if shots is None else estimate_probability(p, shots, rng)

    p_m = measured(float(np.real(np.trace(m_eff @ rho.matrix))))
    populations = [measured(float(np.real(rho.matrix[n, n]))) for n in basis.ordering]
    conditionals = [measured(float(np.real(m_eff[n, n]))) for n in basis.ordering]

    plain_terms = tuple(p * omega for p, omega in zip(populations, conditionals))
    plain_running = tuple(np.cumsum(plain_terms).tolist())
    plain_stop = _first_crossing(plain_running, p_m, tolerance)

    complement_used = complement and p_m > 0.5
    if complement_used:
        # both safe rules watch the same data; whichever crosses first stops
        target = 1.0 - p_m
        terms = tuple(p * (1.0 - omega) for p, omega in zip(populations, conditionals))
        running = tuple(np.cumsum(terms).tolist())
        complement_stop = _first_crossing(running, target, tolerance)
    else:
        target, terms, running, complement_stop = p_m, plain_terms, plain_running, None

    fired = [(k, rule) for k, rule in ((plain_stop, "plain"), (complement_stop, "complement")) if k is not None]
    stop_index, stopped_by = min(fired) if fired else (None, None)
    naive_index = next((k for k, s in enumerate(running) if abs(target - s) > tolerance), None)
    logger.debug(f"partial summation target={target:.6f} stop={stop_index} ({stopped_by}) naive={naive_index}")
    return PartialSummationTrace(
        target=target,
        terms=terms,
        running_sums=running,
        stop_index=stop_index,
        naive_stop_index=naive_index,
        complement_used=complement_used,
        p_m=p_m,
        full_sum=running[-1],
        plain_running_sums=plain_running,
        stopped_by=stopped_by,
    )


def _first_crossing(running: Sequence[float], target: float, tolerance: float) -> Optional[int]:
    return next((k for k, s in enumerate(running) if s > target + tolerance), None)


@dataclass(frozen=True)
class BaselineInterval:
    min_w: float
    max_w: float
    test_w: float
    violated: bool

    @property
    def margin(self) -> float:
        """Distance of the test witness outside the interval (negative when inside)"""
        return max(self.min_w - self.test_w, self.test_w - self.max_w)


WITNESS_PAIRS = {"w_a": ("I", "II"), "w_b": ("I", "IV"), "w_c": ("III", "IV")}


def witness_value(sc: Scenario, witness: str = "w_a") -> float:
    if witness not in WITNESS_PAIRS:
        raise ScenarioError(f"unknown witness {witness!r}")
    first, second = WITNESS_PAIRS[witness]
    return probability(sc, sc.interruption(first)) - probability(sc, sc.interruption(second))


def baseline_interval(sc_family: Union[Callable[[int], Scenario], Sequence[Scenario]], test: Scenario,
                      witness: str = "w_a", tol: Optional[float] = None) -> BaselineInterval:
    """Witness range over classical basis-state preparations and whether the test leaves it"""
    tol = CONFIG.DECOMPOSITION_TOL if tol is None else tol
    d = test.layout.dim_s
    family = [sc_family(i) for i in range(d)] if callable(sc_family) else list(sc_family)
    if len(family) != d:
        raise ScenarioError(f"baseline family has {len(family)} members, system dimension is {d}")
    values = [witness_value(sc, witness) for sc in family]
    test_w = witness_value(test, witness)
    interval = BaselineInterval(min(values), max(values), test_w, False)
    return replace(interval, violated=interval.margin > tol)


def basis_preparation_family(u_T_tau: np.ndarray, m: Effect, layout: BipartiteLayout,
                             env0: Optional[DensityMatrix] = None) -> Callable[[int], Scenario]:
    """label i -> scenario holding |i> until tau (U(tau,0) = I) with shared dynamics after tau"""
    env0 = env0 if env0 is not None else _pure(layout.dim_e)

    def prepare(label: int) -> Scenario:
        return Scenario(layout, _pure(layout.dim_s, label), env0, np.eye(layout.joint_dim), u_T_tau, m)

    return prepare


def hadamard_baseline_example() -> Tuple[Callable[[int], Scenario], Scenario]:
    """Isolated qubit: baseline |0>, |1> held to tau; the test reaches |+> through a Hadamard"""
    layout = BipartiteLayout(2, 1)
    plus = Effect.onto(np.ones(2))
    family = basis_preparation_family(IDENTITY_2, plus, layout)
    test = born_scenario(HADAMARD, u_s_later=IDENTITY_2, m=plus, dim_e=1).scenario
    return family, test


def generalized_witness_v(rho: DensityMatrix, m: Effect, e: KrausChannel) -> float:
    """V_E(rho, M) = tr(M[rho - E(rho)]), bounded by ||rho - E(rho)||_tr"""
    if e.dim_in != rho.dim or e.dim_out != rho.dim or m.dim != rho.dim:
        raise DimensionMismatchError("channel, effect and state dimensions must agree")
    delta = rho.matrix - apply(e, rho).matrix
    value = m.expectation(delta)
    bound = trace_norm(delta)
    if value > bound + CONFIG.ALGEBRA_TOL:
        raise ConsistencyError(f"V_E = {value} exceeds ||rho - E(rho)||_tr = {bound}")
    return value


@dataclass(frozen=True)
class ExperimentBudget:
    kind: InterruptionKind
    experiment_count: int


def budget(kind: Union[InterruptionKind, str], d: int) -> ExperimentBudget:
    """Runs per witness; the +1 counts the uninterrupted reference (a convention)"""
    kind = InterruptionKind(kind)
    if d < 1:
        raise ScenarioError("dimension must be positive")
    counts = {
        InterruptionKind.I: 2,
        InterruptionKind.II: 2,
        InterruptionKind.IV: d + 1,
        InterruptionKind.III: d * d + 1,
    }
    return ExperimentBudget(kind, counts[kind])


# === Sweep families ===

SWEEP_FAMILIES = ("epsilon-mixture", "maximally-coherent", "random")


def sweep_member(family: str, value: float, dims: Tuple[int, int] = (2, 2), seed: int = 0) -> NamedScenario:
    """One point of a named parameter family"""
    if family == "epsilon-mixture":
        return epsilon_mixture_scenario(dims[0], float(value))
    if family == "maximally-coherent":
        d = int(round(value))
        if d < 1 or d > CONFIG.MAX_DIM_S:
            raise ScenarioError(f"d = {d} outside 1..{CONFIG.MAX_DIM_S}")
        return maximally_coherent_scenario(d)
    if family == "random":
        index = int(round(value))
        rng = np.random.default_rng([seed, index])
        return NamedScenario(f"random-{index}", (), scenario=random_scenario(BipartiteLayout(*dims), rng))
    raise ScenarioError(f"unknown sweep family {family!r}; known: {', '.join(SWEEP_FAMILIES)}")


# === JSON documents ===

ComplexPairs = List[List[List[float]]]


def encode_matrix(m: np.ndarray) -> ComplexPairs:
    """Row-major nested [re, im] pairs"""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def decode_matrix(pairs: ComplexPairs) -> ComplexMatrix:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ScenarioError("complex matrices must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


class ExpectedValueModel(BaseModel):
    quantity: str
    value: float
    tolerance: float
    provenance: str = ""


class ScenarioDocument(BaseModel):
    schema_version: int = CONFIG.SCHEMA_VERSION
    name: str
    dim_s: int
    dim_e: int
    rho_s0: Optional[ComplexPairs] = None
    env0: Optional[ComplexPairs] = None
    u_tau0: Optional[ComplexPairs] = None
    u_T_tau: Optional[ComplexPairs] = None
    m: Optional[ComplexPairs] = None
    basis_ordering: Optional[List[int]] = None
    joint_state: Optional[ComplexPairs] = None
    joint_effect: Optional[ComplexPairs] = None
    expected: List[ExpectedValueModel] = []
    notes: str = ""


def named_scenario_to_json(named: NamedScenario) -> str:
    expected = [ExpectedValueModel(**vars(e)) for e in named.expected]
    if named.scenario is not None:
        sc = named.scenario
        doc = ScenarioDocument(
            name=named.name, dim_s=sc.layout.dim_s, dim_e=sc.layout.dim_e,
            rho_s0=encode_matrix(sc.rho_s0.matrix), env0=encode_matrix(sc.env0.matrix),
            u_tau0=encode_matrix(sc.u_tau0), u_T_tau=encode_matrix(sc.u_T_tau), m=encode_matrix(sc.m.matrix),
            basis_ordering=list(sc.basis.ordering), expected=expected, notes=named.notes,
        )
    else:
        case = named.state_level
        doc = ScenarioDocument(
            name=named.name, dim_s=case.layout.dim_s, dim_e=case.layout.dim_e,
            joint_state=encode_matrix(case.joint_state.matrix), joint_effect=encode_matrix(case.joint_effect.matrix),
            expected=expected, notes=named.notes,
        )
    return json.dumps(doc.model_dump(exclude_none=True), sort_keys=True, indent=2)


def named_scenario_from_json(text: str) -> NamedScenario:
    """Parse and validate a scenario document; every failure surfaces as ScenarioError"""
    try:
        doc = ScenarioDocument.model_validate_json(text)
    except ValidationError as e:
        raise ScenarioError(f"malformed scenario document: {e.errors()[0]['msg']}") from e
    layout = BipartiteLayout(doc.dim_s, doc.dim_e)
    expected = tuple(ExpectedValue(e.quantity, e.value, e.tolerance, e.provenance) for e in doc.expected)
    if doc.joint_state is not None:
        if doc.joint_effect is None:
            raise ScenarioError("state-level document needs joint_effect")
        case = StateLevelCase(layout, DensityMatrix(decode_matrix(doc.joint_state)),
                              Effect(decode_matrix(doc.joint_effect)))
        return NamedScenario(doc.name, expected, state_level=case, notes=doc.notes)
    missing = [k for k in ("rho_s0", "env0", "u_tau0", "u_T_tau", "m") if getattr(doc, k) is None]
    if missing:
        raise ScenarioError(f"scenario document lacks {', '.join(missing)}")
    basis = PreferredBasis(doc.dim_s, tuple(doc.basis_ordering) if doc.basis_ordering else None)
    sc = Scenario(
        layout=layout,
        rho_s0=DensityMatrix(decode_matrix(doc.rho_s0)),
        env0=DensityMatrix(decode_matrix(doc.env0)),
        u_tau0=decode_matrix(doc.u_tau0),
        u_T_tau=decode_matrix(doc.u_T_tau),
        m=Effect(decode_matrix(doc.m)),
        basis=basis,
    )
    return NamedScenario(doc.name, expected, scenario=sc, notes=doc.notes)


def load_scenario_file(path: Union[str, Path]) -> NamedScenario:
    return named_scenario_from_json(Path(path).read_text(encoding="utf-8"))
