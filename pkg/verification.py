# verification.py - Acceptance suite: closed-form extrema, worked examples and property sweeps
import json
from dataclasses import replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel

from channels import (
    PhaseDistribution,
    choi,
    classicalise,
    dephase,
    identity_channel,
    tensor_channels,
)
from config import Config, get_config
from optimize import (
    Optimum,
    SearchConfig,
    diamond_distance,
    induced_trace_norm_distance,
    max_over_pure_states,
    output_distance,
    stabilised,
)
from qops_core import (
    BipartiteLayout,
    DensityMatrix,
    Effect,
    PreferredBasis,
    maximally_coherent_state,
    maximally_entangled_state,
    random_effect,
    random_pure_state,
    random_unitary,
    tensor,
)
from scenarios import (
    SCENARIOS,
    basis_preparation_family,
    baseline_interval,
    check_expectations,
    epsilon_mixture_state,
    get_named_scenario,
    hadamard_baseline_example,
    partial_summation,
    random_born_scenario,
    random_iq_state,
    random_scenario,
    state_level_quantities,
)
from witness_engine import (
    Scenario,
    apply_superchannel,
    bound_check_thm4,
    bound_check_wb,
    build_superchannel,
    final_system_state,
    iq_distance,
    prop1_check,
    r_monotone,
    w_a_via_superchannel,
    witness_suite,
)

BOUND_LAYOUTS = ((2, 2), (2, 3), (3, 2))
EPSILONS = tuple(round(0.05 * k, 2) for k in range(7))


class CheckResult(BaseModel):
    """Outcome of one acceptance check; slack is the smallest (tolerance - error) seen"""
    name: str
    passed: bool
    slack: float
    cases: int
    detail: str = ""


class VerificationReport(BaseModel):
    schema_version: int
    seed: int
    passed: bool
    checks: List[CheckResult]

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, indent=2)


class _Tally:
    """Collects (error, tolerance) pairs for one check"""

    def __init__(self, name: str):
        self.name = name
        self.slack = float("inf")
        self.cases = 0
        self.notes: List[str] = []

    def add(self, error: float, tolerance: float, note: str = "") -> None:
        self.cases += 1
        margin = tolerance - error
        if margin < self.slack:
            self.slack = margin
            if note:
                self.notes = [note]

    def require(self, condition: bool, note: str) -> None:
        self.add(0.0 if condition else 1.0, 0.5, "" if condition else note)

    def result(self) -> CheckResult:
        slack = self.slack if self.cases else 0.0
        passed = self.cases > 0 and slack >= 0
        return CheckResult(name=self.name, passed=passed, slack=float(slack), cases=self.cases,
                           detail="; ".join(self.notes))


# === Workers for parallel sweeps ===

def _bound_slacks(dims: Tuple[int, int], seed: int, index: int) -> Tuple[float, float]:
    rng = np.random.default_rng([seed, dims[0], dims[1], index])
    sc = random_scenario(BipartiteLayout(*dims), rng)
    return bound_check_thm4(sc).slack, bound_check_wb(sc).slack


def _prop1_slack(dims: Tuple[int, int], seed: int, index: int, search: SearchConfig) -> float:
    rng = np.random.default_rng([seed, 101, dims[0], dims[1], index])
    sc = random_scenario(BipartiteLayout(*dims), rng)
    return prop1_check(sc, search, stop_at_bound=True).slack


def _superchannel_errors(seed: int, index: int) -> Tuple[float, float]:
    rng = np.random.default_rng([seed, 202, index])
    sc = random_scenario(BipartiteLayout(2, 2), rng)
    direct = witness_suite(sc, include_prop1=False).w_a
    s = build_superchannel(sc)
    state_error = float(np.max(np.abs(
        apply_superchannel(s, identity_channel(2)).matrix - final_system_state(sc, "I").matrix
    )))
    return abs(w_a_via_superchannel(sc) - direct), state_error


class VerificationSuite:
    """
    Runs the acceptance checks

    dims=None lets every check use its own dimension range; an explicit
    tuple restricts all dimension-indexed checks to it.
    """

    def __init__(self, config: Optional[Config] = None, seed: Optional[int] = None,
                 dims: Optional[Sequence[int]] = None):
        self.config = config or get_config()
        self.seed = self.config.DEFAULT_SEED if seed is None else int(seed)
        self.dims = tuple(dims) if dims else None
        self.search = self.config.get_search_config(seed=self.seed)
        self._distances: Dict[Tuple[str, int], Optimum] = {}
        self.checks: Dict[str, Callable[[], CheckResult]] = {
            "isolated-maximum": self.check_isolated_maximum,
            "diamond": self.check_diamond,
            "ancilla-no-help": self.check_ancilla_no_help,
            "bell": lambda: self._check_catalogue_entry("bell"),
            "epsilon-mixture": self.check_epsilon_mixture,
            "classical-false-positive": lambda: self._check_catalogue_entry("classical-false-positive"),
            "classically-correlated": lambda: self._check_catalogue_entry("classically-correlated"),
            "catalogue": self.check_catalogue,
            "iq-faithfulness": self.check_iq_faithfulness,
            "bounds": self.check_bounds,
            "superchannel": self.check_superchannel,
            "gamma-equivalence": self.check_gamma_equivalence,
            "partial-summation": self.check_partial_summation,
            "device-independence": self.check_device_independence,
            "born-unification": self.check_born_unification,
            "global-dephasing": self.check_global_dephasing,
            "determinism": self.check_determinism,
        }

    def _dims(self, default: Iterable[int]) -> Tuple[int, ...]:
        return self.dims if self.dims is not None else tuple(default)

    def _parallel(self):
        return Parallel(n_jobs=self.config.N_JOBS)

    def _distance(self, kind: str, d: int) -> Optimum:
        """Cached identity-vs-Gamma distance ('induced' or 'diamond'), stopped at the closed form 1 - 1/d"""
        key = (kind, d)
        if key not in self._distances:
            gamma = classicalise(PreferredBasis.computational(d))
            distance = diamond_distance if kind == "diamond" else induced_trace_norm_distance
            self._distances[key] = distance(identity_channel(d), gamma, replace(self.search, target=1 - 1 / d))
        return self._distances[key]

    # --- closed-form extrema ---

    def check_isolated_maximum(self) -> CheckResult:
        tally = _Tally("isolated-maximum")
        for d in self._dims((2, 3, 4, 5)):
            closed_form = 1 - 1 / d
            search = replace(self.search, target=closed_form)
            found = max_over_pure_states(lambda rho: r_monotone(rho) / 2, d, search)
            tally.add(abs(found.value - closed_form), 1e-3, f"d={d}: search found {found.value:.6f}")
            exact = r_monotone(maximally_coherent_state(d)) / 2
            tally.add(abs(exact - closed_form), 1e-12, f"d={d}: |+> gives {exact:.15f}")
        return tally.result()

    def check_diamond(self) -> CheckResult:
        tally = _Tally("diamond")
        for d in self._dims((2, 3, 4)):
            closed_form = 1 - 1 / d
            found = self._distance("diamond", d)
            tally.add(abs(found.value - closed_form), 1e-3, f"d={d}: search found {found.value:.6f}")
            ident, gamma = stabilised(identity_channel(d)), stabilised(classicalise(PreferredBasis.computational(d)))
            at_entangled = output_distance(ident, gamma, maximally_entangled_state(d))
            tally.add(abs(at_entangled - closed_form), 1e-12, f"d={d}: maximally entangled input")
            product = DensityMatrix(tensor(maximally_coherent_state(d).matrix, np.eye(d) / d), check=False)
            at_product = output_distance(ident, gamma, product)
            tally.add(abs(at_product - closed_form), 1e-12, f"d={d}: |+><+| (x) I/d input")
        return tally.result()

    def check_ancilla_no_help(self) -> CheckResult:
        tally = _Tally("ancilla-no-help")
        for d in self._dims((2, 3, 4)):
            gap = abs(self._distance("diamond", d).value - self._distance("induced", d).value)
            tally.add(gap, 2e-4, f"d={d}: diamond and induced differ by {gap:.2e}")
        return tally.result()

    def check_global_dephasing(self) -> CheckResult:
        """Gamma (x) Gamma at |+>|+> reaches 1 - 1/d^2, beyond the local value 1 - 1/d"""
        tally = _Tally("global-dephasing")
        for d in self._dims((2, 3, 4)):
            gamma = classicalise(PreferredBasis.computational(d))
            plus_plus = DensityMatrix(tensor(maximally_coherent_state(d).matrix, maximally_coherent_state(d).matrix),
                                      check=False)
            value = output_distance(identity_channel(d * d), tensor_channels(gamma, gamma), plus_plus)
            tally.add(abs(value - (1 - 1 / d ** 2)), 1e-12, f"d={d}: global value {value:.15f}")
            tally.require(value > 1 - 1 / d, f"d={d}: global dephasing does not exceed 1 - 1/d")
        return tally.result()

    # --- worked examples ---

    def _check_catalogue_entry(self, name: str, tally: Optional[_Tally] = None) -> CheckResult:
        tally = tally or _Tally(name)
        for outcome in check_expectations(get_named_scenario(name), self.search):
            tally.add(abs(outcome.measured - outcome.expected), outcome.tolerance,
                      f"{name}.{outcome.quantity} = {outcome.measured:.15f}")
        return tally.result()

    def check_catalogue(self) -> CheckResult:
        tally = _Tally("catalogue")
        for name in sorted(SCENARIOS):
            self._check_catalogue_entry(name, tally)
        return tally.result()

    def check_epsilon_mixture(self) -> CheckResult:
        tally = _Tally("epsilon-mixture")
        for d in self._dims((2, 3)):
            for eps in EPSILONS:
                quantities = state_level_quantities(epsilon_mixture_state(d, eps))
                tally.add(abs(quantities["w_a"] - eps * (1 - 1 / d)), 1e-12, f"d={d} eps={eps}")
                if d == 2 and eps < 1 / (d * d - 1):
                    tally.require(quantities["ppt"] == 1.0, f"eps={eps}: partial transpose not positive")
        return tally.result()

    # --- property sweeps ---

    def check_iq_faithfulness(self) -> CheckResult:
        tally = _Tally("iq-faithfulness")
        rng = np.random.default_rng([self.seed, 7])
        for d in (2, 3):
            layout = BipartiteLayout(d, d)
            psi = maximally_entangled_state(d).matrix
            for _ in range(self.config.VERIFY_IQ_SAMPLES):
                iq_state = random_iq_state(layout, rng)
                tally.add(iq_distance(iq_state, layout), 1e-10, f"d={d}: constructed IQ state")
                eps = rng.uniform(0.05, 1.0)
                perturbed = (1 - eps) * iq_state.matrix + eps * psi
                distance = iq_distance(perturbed, layout)
                tally.require(distance > 1e-3, f"d={d} eps={eps:.3f}: perturbed distance {distance:.2e}")
        return tally.result()

    def check_bounds(self) -> CheckResult:
        tally = _Tally("bounds")
        n = self.config.VERIFY_RANDOM_SCENARIOS
        for dims in BOUND_LAYOUTS:
            slacks = self._parallel()(delayed(_bound_slacks)(dims, self.seed, k) for k in range(n))
            for k, (thm4, wb) in enumerate(slacks):
                tally.add(-thm4, 1e-9, f"{dims} #{k}: thm4 slack {thm4:.3e}")
                tally.add(-wb, 1e-9, f"{dims} #{k}: wb slack {wb:.3e}")

        prop1_search = replace(
            self.config.get_search_config(restarts=self.config.VERIFY_PROP1_RESTARTS, seed=self.seed),
            max_iters=self.config.VERIFY_PROP1_MAX_ITERS,
            tol=self.config.VERIFY_PROP1_STEP_TOL,
        )
        # measurement-map bound: one search per scenario, layouts taken round-robin
        n_prop1 = self.config.VERIFY_PROP1_SCENARIOS
        layouts = [BOUND_LAYOUTS[k % len(BOUND_LAYOUTS)] for k in range(n_prop1)]
        slacks = self._parallel()(
            delayed(_prop1_slack)(dims, self.seed, k, prop1_search) for k, dims in enumerate(layouts)
        )
        for k, (dims, slack) in enumerate(zip(layouts, slacks)):
            tally.add(-slack, 1e-6, f"{dims} #{k}: prop1 slack {slack:.3e}")

        equality = prop1_check(get_named_scenario("classical-false-positive").scenario, self.search,
                               stop_at_bound=True)
        tally.add(abs(equality.slack), 1e-6, f"classical false positive prop1 gap {equality.slack:.2e}")
        return tally.result()

    def check_superchannel(self) -> CheckResult:
        tally = _Tally("superchannel")
        n = self.config.VERIFY_RANDOM_SCENARIOS
        errors = self._parallel()(delayed(_superchannel_errors)(self.seed, k) for k in range(n))
        for k, (w_error, state_error) in enumerate(errors):
            tally.add(w_error, 1e-10, f"#{k}: W^a mismatch {w_error:.2e}")
            tally.add(state_error, 1e-12, f"#{k}: final state mismatch {state_error:.2e}")
        return tally.result()

    def check_gamma_equivalence(self) -> CheckResult:
        tally = _Tally("gamma-equivalence")
        for d in self._dims((2, 3, 4)):
            measured = choi(classicalise(PreferredBasis.computational(d)))
            dephased = choi(dephase(PhaseDistribution.independent_flips(d)))
            error = float(np.max(np.abs(measured - dephased)))
            tally.add(error, 1e-12, f"d={d}: Choi matrices differ by {error:.2e}")
        return tally.result()

    def check_partial_summation(self) -> CheckResult:
        tally = _Tally("partial-summation")
        rng = np.random.default_rng([self.seed, 11])
        plus = Effect.onto(np.ones(2))
        incoherent = partial_summation((DensityMatrix.basis_state(2, 1), plus))
        tally.require(incoherent.stop_index is None, "zero witness stopped early")
        for _ in range(self.config.VERIFY_IQ_SAMPLES):
            d = int(rng.integers(2, 5))
            diagonal = DensityMatrix(np.diag(rng.dirichlet(np.ones(d))).astype(complex), check=False)
            trace = partial_summation((diagonal, random_effect(d, rng)))
            tally.require(trace.stop_index is None, f"d={d}: zero witness stopped at {trace.stop_index}")

        coherent = (maximally_coherent_state(2), plus)
        with_complement = partial_summation(coherent, complement=True)
        without = partial_summation(coherent, complement=False)
        never = float("inf")
        tally.require(
            (with_complement.stop_index if with_complement.stop_index is not None else never)
            < (without.stop_index if without.stop_index is not None else never),
            "complement rule did not stop earlier",
        )

        for case in range(self.config.VERIFY_COMPLEMENT_SAMPLES):
            pair = (random_pure_state(4, rng), random_effect(4, rng))
            with_complement = partial_summation(pair, complement=True)
            if with_complement.p_m <= 0.5:
                continue
            without = partial_summation(pair, complement=False)
            tally.require(
                (with_complement.stop_index if with_complement.stop_index is not None else never)
                <= (without.stop_index if without.stop_index is not None else never),
                f"case {case}: complement rule stopped at {with_complement.stop_index}, plain at {without.stop_index}",
            )

        maximal = partial_summation((maximally_coherent_state(4), Effect.onto(np.ones(4))))
        spread = max(maximal.terms) - min(maximal.terms)
        tally.add(spread, 1e-12, f"d=4 summands spread {spread:.2e}")
        return tally.result()

    def check_device_independence(self) -> CheckResult:
        tally = _Tally("device-independence")
        rng = np.random.default_rng([self.seed, 13])
        layout = BipartiteLayout(2, 1)
        u_T_tau = random_unitary(2, rng)
        m = random_effect(2, rng)
        family = basis_preparation_family(u_T_tau, m, layout)
        baseline = [family(i) for i in range(2)]
        for _ in range(self.config.VERIFY_MIXTURES):
            weights = rng.dirichlet(np.ones(2))
            mixed = DensityMatrix(np.diag(weights).astype(complex), check=False)
            test = Scenario(layout, mixed, baseline[0].env0, np.eye(2), u_T_tau, m)
            outcome = baseline_interval(baseline, test)
            tally.require(not outcome.violated, f"mixture {weights} violated the baseline")

        family, test = hadamard_baseline_example()
        outcome = baseline_interval(family, test)
        tally.require(outcome.violated, "Hadamard test did not violate the baseline")
        tally.add(max(0.0, 0.49 - outcome.margin), 1e-12, f"violation margin {outcome.margin:.6f}")
        return tally.result()

    def check_born_unification(self) -> CheckResult:
        tally = _Tally("born-unification")
        rng = np.random.default_rng([self.seed, 17])
        for dim_s in (2, 3):
            for _ in range(self.config.VERIFY_BORN_SAMPLES):
                report = witness_suite(random_born_scenario(dim_s, rng), include_prop1=False)
                gap = max(abs(report.w_a - report.w_b), abs(report.w_a - report.w_c),
                          abs(report.w_a - report.w_isolated))
                tally.add(gap, 1e-10, f"d_S={dim_s}: witnesses differ by {gap:.2e}")
        return tally.result()

    def check_determinism(self) -> CheckResult:
        tally = _Tally("determinism")

        def sample() -> str:
            rng = np.random.default_rng([self.seed, 19])
            sc = random_scenario(BipartiteLayout(2, 2), rng)
            small = SearchConfig(restarts=4, max_iters=500, seed=self.seed)
            return witness_suite(sc, search=small).to_json()

        tally.require(sample() == sample(), "repeated evaluation produced different reports")
        return tally.result()

    # --- driver ---

    def run(self, only: Optional[Sequence[str]] = None) -> VerificationReport:
        names = list(self.checks) if not only else list(only)
        unknown = [n for n in names if n not in self.checks]
        if unknown:
            raise KeyError(f"unknown check(s): {', '.join(unknown)}")

        logger.info(f"🚀 Running {len(names)} verification check(s) with seed {self.seed}")
        results = []
        for name in names:
            result = self.checks[name]()
            marker = "✅" if result.passed else "❌"
            logger.info(f"{marker} {name}: slack={result.slack:.3e} over {result.cases} case(s)")
            results.append(result)

        report = VerificationReport(
            schema_version=self.config.SCHEMA_VERSION,
            seed=self.seed,
            passed=all(r.passed for r in results),
            checks=results,
        )
        logger.info(f"📊 {sum(r.passed for r in results)}/{len(results)} checks passed")
        return report


def available_checks() -> List[str]:
    return list(VerificationSuite(get_config()).checks)
