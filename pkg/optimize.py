# optimize.py - Derivative-free maximisation over pure states and channel distances
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed, effective_n_jobs
from loguru import logger

from channels import KrausChannel, identity_channel, tensor_channels
from config import get_config
from qops_core import (
    DensityMatrix,
    DimensionMismatchError,
    Effect,
    SearchError,
    positive_part_projector,
    trace_norm,
)

CONFIG = get_config()

Objective = Callable[[DensityMatrix], float]


@dataclass(frozen=True)
class SearchConfig:
    """
    Restart count, iteration cap and step schedule of the pure-state search

    target, when set, is a known upper bound (or a threshold worth stopping at):
    a restart ends once it comes within target_tol of it, and no further
    restarts are started after one does.
    """
    restarts: int = CONFIG.SEARCH_RESTARTS
    max_iters: int = CONFIG.SEARCH_MAX_ITERS
    step_init: float = CONFIG.SEARCH_STEP_INIT
    tol: float = CONFIG.SEARCH_STEP_TOL
    seed: int = CONFIG.DEFAULT_SEED
    decay: float = CONFIG.SEARCH_DECAY
    patience: int = CONFIG.SEARCH_PATIENCE
    n_jobs: int = CONFIG.N_JOBS
    target: Optional[float] = None
    target_tol: float = CONFIG.OPTIMIZER_TOL

    def reached(self, value: float) -> bool:
        return self.target is not None and value >= self.target - self.target_tol

    def __post_init__(self):
        if self.restarts < 1:
            raise SearchError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 1:
            raise SearchError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0 or self.step_init <= 0:
            raise SearchError("step_init and tol must be positive")
        if not 0 < self.decay < 1:
            raise SearchError(f"decay must lie in (0, 1), got {self.decay}")
        if self.patience < 1:
            raise SearchError("patience must be >= 1")
        if self.target_tol <= 0:
            raise SearchError("target_tol must be positive")


@dataclass(frozen=True, eq=False)
class Optimum:
    """
    Best value found and where

    argmax_effect is the Helstrom effect at the optimum for channel-distance
    searches; a bare objective defines no effect, so it is None there.
    """
    value: float
    argmax_state: DensityMatrix
    argmax_effect: Optional[Effect]
    converged: bool
    evaluations: int
    restart: int = 0


def optimal_effect(delta: np.ndarray) -> Tuple[Effect, float]:
    """Helstrom projector onto the positive eigenspace of delta and the value tr(M delta)"""
    effect = positive_part_projector(delta)
    return effect, float(np.real(np.trace(effect.matrix @ np.asarray(delta))))


def _random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(dim) + 1j * rng.standard_normal(dim)


def _ascend(objective: Objective, dim: int, cfg: SearchConfig, restart: int) -> Tuple[float, np.ndarray, bool, int]:
    """One restart: accept strict improvements, shrink the step after `patience` failures in a row"""
    rng = np.random.default_rng([cfg.seed, restart])
    vec = _random_vector(dim, rng)
    vec /= np.linalg.norm(vec)
    best = objective(DensityMatrix.from_vector(vec))
    evaluations = 1
    step = cfg.step_init
    failures = 0

    while step >= cfg.tol and evaluations <= cfg.max_iters and not cfg.reached(best):
        direction = _random_vector(dim, rng)
        candidate = vec + step * direction / np.linalg.norm(direction)
        candidate /= np.linalg.norm(candidate)
        value = objective(DensityMatrix.from_vector(candidate))
        evaluations += 1
        if value > best:
            vec, best = candidate, value
            failures = 0
        else:
            failures += 1
            if failures >= cfg.patience:
                step *= cfg.decay
                failures = 0

    return best, vec, step < cfg.tol or cfg.reached(best), evaluations


def _run_restarts(objective: Objective, dim: int, cfg: SearchConfig) -> List[Tuple[float, np.ndarray, bool, int]]:
    """All restarts, or with a target, batches of restarts until one reaches it"""
    if cfg.target is None:
        return Parallel(n_jobs=cfg.n_jobs)(
            delayed(_ascend)(objective, dim, cfg, restart) for restart in range(cfg.restarts)
        )
    batch = max(1, effective_n_jobs(cfg.n_jobs))
    runs: List[Tuple[float, np.ndarray, bool, int]] = []
    for start in range(0, cfg.restarts, batch):
        runs.extend(Parallel(n_jobs=cfg.n_jobs)(
            delayed(_ascend)(objective, dim, cfg, restart)
            for restart in range(start, min(start + batch, cfg.restarts))
        ))
        hit = next((k for k, run in enumerate(runs) if cfg.reached(run[0])), None)
        if hit is not None:
            # outcome is independent of the batch size
            return runs[: hit + 1]
    return runs


def max_over_pure_states(objective: Objective, dim: int, cfg: Optional[SearchConfig] = None) -> Optimum:
    """
    Maximise a (convex) objective over pure states of dimension dim

    Convexity is the caller's responsibility: it is what makes the pure-state
    restriction exact. Restarts are independent and seeded by (seed, restart).

    Args:
        objective: DensityMatrix -> float
        dim: Hilbert space dimension
        cfg: search configuration

    Returns:
        Optimum whose value is re-evaluated at the stored argmax
    """
    cfg = cfg or SearchConfig()
    if dim < 1:
        raise DimensionMismatchError("search dimension must be positive")

    runs = _run_restarts(objective, dim, cfg)

    # strict comparison keeps the lowest restart index on ties
    winner = 0
    for restart, run in enumerate(runs):
        if run[0] > runs[winner][0]:
            winner = restart

    argmax = DensityMatrix.from_vector(runs[winner][1])
    value = float(objective(argmax))
    evaluations = sum(run[3] for run in runs)
    converged = all(run[2] for run in runs)
    if not converged:
        logger.warning(f"pure-state search hit max_iters={cfg.max_iters} before the step fell below {cfg.tol}")
    logger.debug(f"search dim={dim} restarts={cfg.restarts} best={value:.12f} from restart {winner}")
    return Optimum(value, argmax, None, converged, evaluations, winner)


def output_distance(a: KrausChannel, b: KrausChannel, rho: DensityMatrix) -> float:
    """||a(rho) - b(rho)||_tr / 2 at one input"""
    return 0.5 * trace_norm(a.apply_matrix(rho.matrix) - b.apply_matrix(rho.matrix))


def _check_same_dims(a: KrausChannel, b: KrausChannel) -> None:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        raise DimensionMismatchError(
            f"channels differ in shape: {a.label} {a.dim_in}->{a.dim_out}, {b.label} {b.dim_in}->{b.dim_out}"
        )


def _distance_optimum(a: KrausChannel, b: KrausChannel, cfg: Optional[SearchConfig]) -> Optimum:
    found = max_over_pure_states(lambda rho: output_distance(a, b, rho), a.dim_in, cfg)
    delta = a.apply_matrix(found.argmax_state.matrix) - b.apply_matrix(found.argmax_state.matrix)
    effect, _ = optimal_effect((delta + delta.conj().T) / 2)
    return Optimum(found.value, found.argmax_state, effect, found.converged, found.evaluations, found.restart)


def induced_trace_norm_distance(a: KrausChannel, b: KrausChannel, cfg: Optional[SearchConfig] = None) -> Optimum:
    """max over pure rho of ||a(rho) - b(rho)||_tr / 2"""
    _check_same_dims(a, b)
    return _distance_optimum(a, b, cfg)


def stabilised(ch: KrausChannel) -> KrausChannel:
    """ch (x) id on an ancilla of the channel's own input dimension"""
    return tensor_channels(ch, identity_channel(ch.dim_in))


def diamond_distance(a: KrausChannel, b: KrausChannel, cfg: Optional[SearchConfig] = None) -> Optimum:
    """Induced distance of a (x) id and b (x) id, ancilla dimension equal to d"""
    _check_same_dims(a, b)
    return _distance_optimum(stabilised(a), stabilised(b), cfg)
