# witness_engine.py - Scenario evaluation: probabilities, NSIT witnesses, decompositions and bounds
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Literal, NamedTuple, Optional, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, field_validator

from channels import (
    Interruption,
    InterruptionKind,
    KrausChannel,
    classicalise,
    dual,
    identity_channel,
    interruption_channel,
    kraus_from_joint_unitary,
    transfer_tensor,
)
from config import get_config
from optimize import SearchConfig, induced_trace_norm_distance
from qops_core import (
    BipartiteLayout,
    ComplexMatrix,
    ConsistencyError,
    DensityMatrix,
    DimensionMismatchError,
    Effect,
    Factor,
    NotUnitaryError,
    PreferredBasis,
    QopsError,
    hollow,
    is_unitary,
    partial_trace,
    readonly_array,
    tensor,
    trace_norm,
)

CONFIG = get_config()


def _trusted_state(m: np.ndarray) -> DensityMatrix:
    return DensityMatrix((m + m.conj().T) / 2, check=False)


def classicalise_system(m: np.ndarray, layout: BipartiteLayout) -> ComplexMatrix:
    """(Gamma (x) id) on a joint operator: keep only the system-diagonal blocks"""
    # a PreferredBasis only reorders the computational labels, so the block mask fits every basis
    blocks = np.asarray(m, dtype=complex).reshape(layout.dim_s, layout.dim_e, layout.dim_s, layout.dim_e)
    mask = np.eye(layout.dim_s)[:, None, :, None]
    return (blocks * mask).reshape(layout.joint_dim, layout.joint_dim)


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Two-time experiment: product start rho_S(0) (x) env0, evolution U(tau,0),
    optional interruption at tau, evolution U(T,tau), final effect M on the system.
    """
    layout: BipartiteLayout
    rho_s0: DensityMatrix
    env0: DensityMatrix
    u_tau0: ComplexMatrix
    u_T_tau: ComplexMatrix
    m: Effect
    basis: Optional[PreferredBasis] = None

    def __post_init__(self):
        layout = self.layout
        if self.basis is None:
            object.__setattr__(self, "basis", PreferredBasis.computational(layout.dim_s))
        for name, dim, expected in (
            ("rho_s0", self.rho_s0.dim, layout.dim_s),
            ("env0", self.env0.dim, layout.dim_e),
            ("m", self.m.dim, layout.dim_s),
            ("basis", self.basis.dim, layout.dim_s),
        ):
            if dim != expected:
                raise DimensionMismatchError(f"{name} has dimension {dim}, layout needs {expected}")
        for name in ("u_tau0", "u_T_tau"):
            u = readonly_array(getattr(self, name))
            layout.check(u, name)
            if not is_unitary(u):
                raise NotUnitaryError(f"{name} is not unitary")
            object.__setattr__(self, name, u)

    @cached_property
    def rho_se0(self) -> DensityMatrix:
        return DensityMatrix(tensor(self.rho_s0.matrix, self.env0.matrix), check=False)

    @cached_property
    def rho_se_tau(self) -> DensityMatrix:
        u = self.u_tau0
        return _trusted_state(u @ self.rho_se0.matrix @ u.conj().T)

    @cached_property
    def rho_s_tau(self) -> DensityMatrix:
        return _trusted_state(partial_trace(self.rho_se_tau.matrix, self.layout, Factor.SYSTEM))

    @cached_property
    def rho_e_tau(self) -> DensityMatrix:
        return _trusted_state(partial_trace(self.rho_se_tau.matrix, self.layout, Factor.ENVIRONMENT))

    @cached_property
    def m_joint(self) -> ComplexMatrix:
        return tensor(self.m.matrix, np.eye(self.layout.dim_e))

    def interruption(self, kind: Union[InterruptionKind, str]) -> Interruption:
        """Interruption of the given kind resetting the environment to env0"""
        return Interruption(InterruptionKind(kind), self.layout, self.env0)


# === Probabilities and isolated witness ===

def _interrupted_state(sc: Scenario, intr: Interruption) -> ComplexMatrix:
    if intr.layout != sc.layout:
        raise DimensionMismatchError(f"interruption layout {intr.layout} does not match scenario layout {sc.layout}")
    return interruption_channel(intr, sc.basis).apply_matrix(sc.rho_se_tau.matrix)


def _final_joint_state(sc: Scenario, intr: Interruption) -> ComplexMatrix:
    interrupted = _interrupted_state(sc, intr)
    return sc.u_T_tau @ interrupted @ sc.u_T_tau.conj().T


def probability(sc: Scenario, intr: Interruption) -> float:
    """P^i = tr[(M (x) I) U(T,tau) E^i(rho_SE(tau)) U(T,tau)^dagger], cross-checked three ways"""
    interrupted = _interrupted_state(sc, intr)
    rho_T = sc.u_T_tau @ interrupted @ sc.u_T_tau.conj().T
    joint = float(np.real(np.trace(sc.m_joint @ rho_T)))
    reduced = sc.m.expectation(partial_trace(rho_T, sc.layout, Factor.SYSTEM))
    heisenberg_m = sc.u_T_tau.conj().T @ sc.m_joint @ sc.u_T_tau
    heisenberg = float(np.real(np.trace(heisenberg_m @ interrupted)))
    spread = max(abs(joint - reduced), abs(joint - heisenberg))
    if spread > CONFIG.DECOMPOSITION_TOL:
        raise ConsistencyError(f"P^{intr.kind.value} forms disagree by {spread:.3e}")
    return float(np.clip(joint, 0.0, 1.0))


def final_system_state(sc: Scenario, kind: Union[InterruptionKind, str]) -> DensityMatrix:
    rho_T = _final_joint_state(sc, sc.interruption(kind))
    return _trusted_state(partial_trace(rho_T, sc.layout, Factor.SYSTEM))


def w_isolated(rho: DensityMatrix, m_eff: Union[Effect, np.ndarray]) -> float:
    """tr(M'[rho - Gamma(rho)])"""
    m_matrix = m_eff.matrix if isinstance(m_eff, Effect) else np.asarray(m_eff)
    if m_matrix.shape != rho.matrix.shape:
        raise DimensionMismatchError(f"effect shape {m_matrix.shape} does not match state shape {rho.matrix.shape}")
    return float(np.real(np.trace(m_matrix @ hollow(rho.matrix))))


def r_monotone(rho: DensityMatrix) -> float:
    """Vulnerability of coherence ||rho - Gamma(rho)||_tr"""
    return trace_norm(hollow(rho.matrix))


def dimension_lower_bound(w: float) -> int:
    """Smallest d compatible with an isolated witness of magnitude |w|: d >= 1 / (1 - |w|)"""
    if abs(w) >= 1:
        raise QopsError(f"|w| = {abs(w)} certifies no finite dimension")
    return max(1, math.ceil(1.0 / (1.0 - abs(w)) - CONFIG.DECOMPOSITION_TOL))


# === Superchannel ===

@dataclass(frozen=True, eq=False)
class Superchannel:
    """S[r, r', r'', s, s', s''] mapping a system channel at tau to rho_S(T)"""
    tensor: np.ndarray

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]


def build_superchannel(sc: Scenario) -> Superchannel:
    ds, de = sc.layout.dim_s, sc.layout.dim_e
    u4 = sc.u_T_tau.reshape(ds, de, ds, de)
    rho4 = sc.rho_se_tau.matrix.reshape(ds, de, ds, de)
    # a=r e=eps b=r' h=alpha c=r'' g=s'' k=beta d=s f=s'
    s = np.einsum("aebh,chgk,defk->abcdfg", u4, rho4, u4.conj(), optimize=True)
    return Superchannel(readonly_array(s))


def apply_superchannel(s: Superchannel, ch: KrausChannel) -> DensityMatrix:
    if ch.dim_in != s.dim or ch.dim_out != s.dim:
        raise DimensionMismatchError(f"superchannel on dimension {s.dim} given channel {ch.dim_in}->{ch.dim_out}")
    rho = np.einsum("abcdfg,bcfg->ad", s.tensor, transfer_tensor(ch))
    return _trusted_state(rho)


# === Correlations and decompositions ===

@dataclass(frozen=True, eq=False)
class CorrelationSplit:
    rho_s: DensityMatrix
    rho_e: DensityMatrix
    chi: ComplexMatrix

    @property
    def chi_norm(self) -> float:
        return trace_norm(self.chi)


def correlation_split(rho_se: DensityMatrix, layout: BipartiteLayout) -> CorrelationSplit:
    """rho_SE = rho_S (x) rho_E + chi"""
    layout.check(rho_se.matrix, "joint state")
    rho_s = _trusted_state(partial_trace(rho_se.matrix, layout, Factor.SYSTEM))
    rho_e = _trusted_state(partial_trace(rho_se.matrix, layout, Factor.ENVIRONMENT))
    chi = rho_se.matrix - tensor(rho_s.matrix, rho_e.matrix)
    return CorrelationSplit(rho_s, rho_e, readonly_array(chi))


class MeasurementMaps(NamedTuple):
    prepare_IV: KrausChannel
    measure_IV: KrausChannel
    measure_I: KrausChannel


def measurement_maps(sc: Scenario) -> MeasurementMaps:
    """Reduced CP maps before and after tau; mixed environments use the two-index Kraus family"""
    return MeasurementMaps(
        prepare_IV=kraus_from_joint_unitary(sc.u_tau0, sc.env0, sc.layout),
        measure_IV=kraus_from_joint_unitary(sc.u_T_tau, sc.env0, sc.layout),
        measure_I=kraus_from_joint_unitary(sc.u_T_tau, sc.rho_e_tau, sc.layout),
    )


def _witness(sc: Scenario, first: str, second: str) -> float:
    return probability(sc, sc.interruption(first)) - probability(sc, sc.interruption(second))


class WaDecomposition(NamedTuple):
    coherence_term: float
    correlation_term: float


class WbDecomposition(NamedTuple):
    chi_term: float
    coherence_term: float
    map_mismatch_term: float


def _check_sum(name: str, parts: float, whole: float) -> None:
    if abs(parts - whole) > CONFIG.DECOMPOSITION_TOL:
        raise ConsistencyError(f"{name} terms sum to {parts:.15f}, witness is {whole:.15f}")


def decompose_w_a(sc: Scenario, maps: Optional[MeasurementMaps] = None) -> WaDecomposition:
    """
    W^a = tr(M''[rho_S - Gamma(rho_S)]) + tr[(M (x) I) U ((id - Gamma (x) id) chi) U^dagger]

    M'' is the Heisenberg image of M under the measure-I map, i.e.
    tr_E[(I (x) rho_E(tau)) U^dagger (M (x) I) U].
    """
    maps = maps or measurement_maps(sc)
    split = correlation_split(sc.rho_se_tau, sc.layout)
    m_eff = dual(maps.measure_I).apply_matrix(sc.m.matrix)
    coherence = w_isolated(split.rho_s, m_eff)
    quantum_chi = split.chi - classicalise_system(split.chi, sc.layout)
    correlation = float(np.real(np.trace(sc.m_joint @ sc.u_T_tau @ quantum_chi @ sc.u_T_tau.conj().T)))
    _check_sum("W^a", coherence + correlation, _witness(sc, "I", "II"))
    return WaDecomposition(coherence, correlation)


def decompose_w_b(sc: Scenario, maps: Optional[MeasurementMaps] = None) -> WbDecomposition:
    """
    W^b = tr(M tr_E(U chi U^dagger))
        + tr(E_IV^dagger(M)[rho_S - Gamma(rho_S)])
        + tr(M (E_I - E_IV)(rho_S))
    """
    maps = maps or measurement_maps(sc)
    split = correlation_split(sc.rho_se_tau, sc.layout)
    propagated_chi = partial_trace(sc.u_T_tau @ split.chi @ sc.u_T_tau.conj().T, sc.layout, Factor.SYSTEM)
    chi_term = sc.m.expectation(propagated_chi)
    coherence = w_isolated(split.rho_s, dual(maps.measure_IV).apply_matrix(sc.m.matrix))
    mismatch = sc.m.expectation(
        maps.measure_I.apply_matrix(split.rho_s.matrix) - maps.measure_IV.apply_matrix(split.rho_s.matrix)
    )
    _check_sum("W^b", chi_term + coherence + mismatch, _witness(sc, "I", "IV"))
    return WbDecomposition(chi_term, coherence, mismatch)


# === Incoherent-quantum states ===

def iq_distance(rho_se: Union[DensityMatrix, np.ndarray], layout: BipartiteLayout,
                basis: Optional[PreferredBasis] = None) -> float:
    """||rho_SE - (Gamma (x) id) rho_SE||_tr / 2"""
    m = rho_se.matrix if isinstance(rho_se, DensityMatrix) else np.asarray(rho_se, dtype=complex)
    layout.check(m, "joint state")
    if basis is not None and basis.dim != layout.dim_s:
        raise DimensionMismatchError("basis does not match the system dimension")
    # basis only fixes a visiting order over computational labels; Gamma does not depend on it
    return 0.5 * trace_norm(m - classicalise_system(m, layout))


def is_iq(rho_se: Union[DensityMatrix, np.ndarray], layout: BipartiteLayout, tol: Optional[float] = None) -> bool:
    tol = CONFIG.IQ_TOL if tol is None else tol
    return iq_distance(rho_se, layout) <= tol


# === Bounds ===

class BoundRecord(BaseModel):
    """Both sides of an inequality; slack > 0 means it holds with room to spare"""
    name: str
    lhs: float
    rhs: float
    relation: Literal[">=", "<="]
    slack: float

    @classmethod
    def of(cls, name: str, lhs: float, rhs: float, relation: str = ">=") -> "BoundRecord":
        slack = lhs - rhs if relation == ">=" else rhs - lhs
        return cls(name=name, lhs=lhs, rhs=rhs, relation=relation, slack=slack)

    def holds(self, tol: float) -> bool:
        return self.slack >= -tol


def bound_check_thm4(sc: Scenario) -> BoundRecord:
    """R(rho_S(tau)) >= 2|W^a| - 2||chi||_tr"""
    split = correlation_split(sc.rho_se_tau, sc.layout)
    w_a = _witness(sc, "I", "II")
    return BoundRecord.of("thm4", r_monotone(split.rho_s), 2 * abs(w_a) - 2 * split.chi_norm)


def bound_check_wb(sc: Scenario) -> BoundRecord:
    """R(rho_S(tau)) >= 2|W^b| - 2||chi||_tr - 2||rho_E(tau) - env0||_tr"""
    split = correlation_split(sc.rho_se_tau, sc.layout)
    w_b = _witness(sc, "I", "IV")
    displacement = trace_norm(split.rho_e.matrix - sc.env0.matrix)
    return BoundRecord.of("wb", r_monotone(split.rho_s), 2 * abs(w_b) - 2 * split.chi_norm - 2 * displacement)


def prop1_check(sc: Scenario, search: Optional[SearchConfig] = None,
                maps: Optional[MeasurementMaps] = None, stop_at_bound: bool = False) -> BoundRecord:
    """
    ||E_I - E_IV||_induced <= ||rho_E(tau) - env0||_tr, lhs found by pure-state search

    stop_at_bound ends the search as soon as the lhs reaches the rhs; a
    tight or violated bound is then settled without the full restart schedule.
    """
    maps = maps or measurement_maps(sc)
    rhs = trace_norm(sc.rho_e_tau.matrix - sc.env0.matrix)
    if stop_at_bound:
        search = replace(search or SearchConfig(), target=rhs / 2, target_tol=CONFIG.DECOMPOSITION_TOL)
    found = induced_trace_norm_distance(maps.measure_I, maps.measure_IV, search)
    return BoundRecord.of("prop1", 2 * found.value, rhs, "<=")


# === Report ===

class WitnessReport(BaseModel):
    schema_version: int = CONFIG.SCHEMA_VERSION
    p1: float = Field(ge=0.0, le=1.0)
    p2: float = Field(ge=0.0, le=1.0)
    p3: float = Field(ge=0.0, le=1.0)
    p4: float = Field(ge=0.0, le=1.0)
    w_a: float
    w_b: float
    w_c: float
    w_isolated: float
    r_monotone: float = Field(ge=0.0)
    dimension_bound: int = Field(ge=1)
    decomposition: Dict[str, float]
    diagnostics: Dict[str, float]
    bounds: Dict[str, BoundRecord]

    @field_validator("w_a", "w_b", "w_c", "w_isolated")
    @classmethod
    def witness_magnitude(cls, value: float) -> float:
        if abs(value) > 1 + CONFIG.DECOMPOSITION_TOL:
            raise ValueError(f"witness magnitude {abs(value)} exceeds 1")
        return value

    def quantity(self, name: str) -> float:
        """Look a named quantity up among top-level fields, decomposition terms and diagnostics"""
        if name in self.decomposition:
            return self.decomposition[name]
        if name in self.diagnostics:
            return self.diagnostics[name]
        bound, _, side = name.rpartition("_")
        if bound in self.bounds and side in ("lhs", "rhs", "slack"):
            return float(getattr(self.bounds[bound], side))
        if name in WitnessReport.model_fields and name not in ("decomposition", "diagnostics", "bounds"):
            return float(getattr(self, name))
        raise KeyError(f"report has no quantity named {name!r}")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True, indent=2)


def w_a_via_superchannel(sc: Scenario) -> float:
    """tr(M [S.id - S.Gamma]) from the six-index tensor"""
    s = build_superchannel(sc)
    uninterrupted = apply_superchannel(s, identity_channel(sc.layout.dim_s))
    classicalised = apply_superchannel(s, classicalise(sc.basis))
    return sc.m.expectation(uninterrupted.matrix - classicalised.matrix)


def witness_suite(sc: Scenario, include_prop1: bool = True, search: Optional[SearchConfig] = None) -> WitnessReport:
    """Evaluate every probability, witness, decomposition and bound of one scenario"""
    p1, p2, p3, p4 = (probability(sc, sc.interruption(kind)) for kind in InterruptionKind)
    maps = measurement_maps(sc)
    dec_a = decompose_w_a(sc, maps)
    dec_b = decompose_w_b(sc, maps)
    w_c = p3 - p4
    if abs(w_c - dec_b.coherence_term) > CONFIG.DECOMPOSITION_TOL:
        raise ConsistencyError(f"W^c = {w_c:.15f} but the reduced-state formula gives {dec_b.coherence_term:.15f}")

    split = correlation_split(sc.rho_se_tau, sc.layout)
    bounds = {"thm4": bound_check_thm4(sc), "wb": bound_check_wb(sc)}
    if include_prop1:
        bounds["prop1"] = prop1_check(sc, search, maps)

    report = WitnessReport(
        p1=p1, p2=p2, p3=p3, p4=p4,
        w_a=p1 - p2, w_b=p1 - p4, w_c=w_c,
        w_isolated=dec_a.coherence_term,
        r_monotone=r_monotone(split.rho_s),
        dimension_bound=dimension_lower_bound(dec_a.coherence_term),
        decomposition={
            "coherence_term_a": dec_a.coherence_term,
            "correlation_term_a": dec_a.correlation_term,
            "chi_term_b": dec_b.chi_term,
            "coherence_term_b": dec_b.coherence_term,
            "map_mismatch_b": dec_b.map_mismatch_term,
        },
        diagnostics={
            "chi_norm": split.chi_norm,
            "iq_distance": iq_distance(sc.rho_se_tau, sc.layout),
            "env_displacement": trace_norm(split.rho_e.matrix - sc.env0.matrix),
        },
        bounds=bounds,
    )
    logger.debug(f"witness suite layout=({sc.layout.dim_s}, {sc.layout.dim_e}) w_a={report.w_a:.6f} "
                 f"w_b={report.w_b:.6f} w_c={report.w_c:.6f}")
    return report
