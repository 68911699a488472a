# qops_core.py - Dense complex linear algebra for states, effects and system-environment layouts
from dataclasses import InitVar, dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from scipy import linalg
from scipy.stats import unitary_group

from config import get_config

CONFIG = get_config()

ComplexMatrix = NDArray[np.complex128]


# === Errors ===

class QopsError(ValueError):
    """Base class for every error raised by the laboratory"""


class DimensionMismatchError(QopsError):
    pass


class NotHermitianError(QopsError):
    pass


class InvalidStateError(QopsError):
    pass


class InvalidEffectError(QopsError):
    pass


class NotUnitaryError(QopsError):
    pass


class ChannelError(QopsError):
    pass


class ScenarioError(QopsError):
    pass


class SearchError(QopsError):
    pass


class ConsistencyError(QopsError):
    """An internal cross-check between two equivalent computations failed"""


# === Matrix helpers ===

def as_matrix(entries: Union[Sequence, np.ndarray], rows: Optional[int] = None,
              cols: Optional[int] = None) -> ComplexMatrix:
    """
    Build a complex matrix either from nested rows or from row-major entries

    Args:
        entries: nested sequence / array, or a flat sequence when rows and cols are given
        rows, cols: shape of a flat row-major entry list

    Returns:
        complex128 two-dimensional array
    """
    arr = np.array(entries, dtype=complex)
    if rows is not None or cols is not None:
        if rows is None or cols is None or rows < 1 or cols < 1:
            raise DimensionMismatchError("rows and cols must both be positive")
        if arr.size != rows * cols:
            raise DimensionMismatchError(f"{arr.size} entries cannot fill a {rows}x{cols} matrix")
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got an array of rank {arr.ndim}")
    return arr


def readonly_array(m: np.ndarray) -> ComplexMatrix:
    arr = np.array(m, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _require_square(m: np.ndarray, what: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"{what} must be square, got shape {m.shape}")


def matrices_close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Entrywise equality within an explicit tolerance"""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.max(np.abs(a - b), initial=0.0) <= tol)


def is_hermitian(m: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = CONFIG.ALGEBRA_TOL if tol is None else tol
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and matrices_close(m, m.conj().T, tol)


def is_unitary(u: np.ndarray, tol: Optional[float] = None) -> bool:
    tol = CONFIG.CHANNEL_TOL if tol is None else tol
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return matrices_close(u.conj().T @ u, np.eye(u.shape[0]), tol)


def _hermitian_part(m: np.ndarray) -> ComplexMatrix:
    return (m + m.conj().T) / 2


def ket(dim: int, label: int) -> NDArray[np.complex128]:
    vec = np.zeros(dim, dtype=complex)
    vec[label] = 1.0
    return vec


def projector(vec: np.ndarray) -> ComplexMatrix:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(vec, vec.conj())


def hollow(m: np.ndarray) -> ComplexMatrix:
    """m with its diagonal replaced by zeros"""
    m = np.asarray(m, dtype=complex)
    return m - np.diag(np.diag(m))


# === Layout and basis ===

class Factor(str, Enum):
    SYSTEM = "system"
    ENVIRONMENT = "environment"


@dataclass(frozen=True)
class BipartiteLayout:
    """H_S (x) H_E with joint index (i, alpha) -> i * dim_e + alpha"""
    dim_s: int
    dim_e: int

    def __post_init__(self):
        if int(self.dim_s) < 1 or int(self.dim_e) < 1:
            raise DimensionMismatchError(f"layout dimensions must be positive, got ({self.dim_s}, {self.dim_e})")
        if self.dim_s > CONFIG.MAX_DIM_S or self.dim_e > CONFIG.MAX_DIM_E:
            raise DimensionMismatchError(
                f"layout ({self.dim_s}, {self.dim_e}) exceeds caps ({CONFIG.MAX_DIM_S}, {CONFIG.MAX_DIM_E})"
            )
        if self.dim_s * self.dim_e > CONFIG.MAX_JOINT_DIM:
            raise DimensionMismatchError(f"joint dimension {self.dim_s * self.dim_e} exceeds {CONFIG.MAX_JOINT_DIM}")

    @property
    def joint_dim(self) -> int:
        return self.dim_s * self.dim_e

    def index(self, i: int, alpha: int) -> int:
        return i * self.dim_e + alpha

    def check(self, m: np.ndarray, what: str = "joint operator") -> None:
        m = np.asarray(m)
        if m.shape != (self.joint_dim, self.joint_dim):
            raise DimensionMismatchError(
                f"{what} has shape {m.shape}, layout ({self.dim_s}, {self.dim_e}) needs "
                f"{self.joint_dim}x{self.joint_dim}"
            )


@dataclass(frozen=True)
class PreferredBasis:
    """The privileged system basis; ordering fixes the order labels are visited in"""
    dim: int
    ordering: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatchError("basis dimension must be positive")
        ordering = tuple(range(self.dim)) if self.ordering is None else tuple(int(k) for k in self.ordering)
        if sorted(ordering) != list(range(self.dim)):
            raise QopsError(f"basis ordering {ordering} is not a permutation of 0..{self.dim - 1}")
        object.__setattr__(self, "ordering", ordering)

    @classmethod
    def computational(cls, dim: int) -> "PreferredBasis":
        return cls(dim)

    def ket(self, label: int) -> NDArray[np.complex128]:
        return ket(self.dim, label)

    def projectors(self) -> Iterable[ComplexMatrix]:
        for label in self.ordering:
            yield projector(self.ket(label))


# === States and effects ===

def _check_dim_cap(dim: int) -> None:
    if dim > CONFIG.MAX_JOINT_DIM:
        raise DimensionMismatchError(f"dimension {dim} exceeds cap {CONFIG.MAX_JOINT_DIM}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Positive unit-trace operator; the stored array is read-only"""
    matrix: ComplexMatrix
    check: InitVar[bool] = True

    def __post_init__(self, check: bool):
        m = readonly_array(self.matrix)
        _require_square(m, "density matrix")
        _check_dim_cap(m.shape[0])
        object.__setattr__(self, "matrix", m)
        if not check:
            return
        tol = CONFIG.ALGEBRA_TOL
        if not is_hermitian(m, tol):
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise InvalidStateError(f"density matrix trace {np.trace(m).real:.3e} != 1")
        lowest = linalg.eigvalsh(_hermitian_part(m))[0]
        if lowest < -tol:
            raise InvalidStateError(f"density matrix has eigenvalue {lowest:.3e} < 0")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "DensityMatrix":
        """|psi><psi| for a (not necessarily normalised) nonzero vector"""
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise InvalidStateError("cannot build a state from the zero vector")
        return cls(projector(vec / norm), check=False)

    @classmethod
    def basis_state(cls, dim: int, label: int) -> "DensityMatrix":
        return cls.from_vector(ket(dim, label))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim, check=False)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> NDArray[np.float64]:
        return linalg.eigvalsh(_hermitian_part(self.matrix))

    def is_diagonal(self, tol: Optional[float] = None) -> bool:
        tol = CONFIG.ALGEBRA_TOL if tol is None else tol
        return bool(np.max(np.abs(hollow(self.matrix)), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class Effect:
    """Measurement operator 0 <= M <= I"""
    matrix: ComplexMatrix
    check: InitVar[bool] = True

    def __post_init__(self, check: bool):
        m = readonly_array(self.matrix)
        _require_square(m, "effect")
        _check_dim_cap(m.shape[0])
        object.__setattr__(self, "matrix", m)
        if not check:
            return
        tol = CONFIG.ALGEBRA_TOL
        if not is_hermitian(m, tol):
            raise InvalidEffectError("effect is not Hermitian")
        spectrum = linalg.eigvalsh(_hermitian_part(m))
        if spectrum[0] < -tol or spectrum[-1] > 1 + tol:
            raise InvalidEffectError(f"effect spectrum [{spectrum[0]:.3e}, {spectrum[-1]:.3e}] outside [0, 1]")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Effect":
        return cls(np.eye(dim, dtype=complex), check=False)

    @classmethod
    def onto(cls, vec: np.ndarray) -> "Effect":
        """Rank-one projector onto the normalised vector"""
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        return cls(projector(vec / np.linalg.norm(vec)), check=False)

    def complement(self) -> "Effect":
        return Effect(np.eye(self.dim) - self.matrix, check=False)

    def expectation(self, m: np.ndarray) -> float:
        """tr(M m), real part"""
        return float(np.real(np.trace(self.matrix @ np.asarray(m))))


# === Operations ===

def tensor(a: np.ndarray, b: np.ndarray) -> ComplexMatrix:
    """Kronecker product; (i, alpha) -> i * dim(b) + alpha"""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m: np.ndarray, layout: BipartiteLayout, keep: Union[Factor, str] = Factor.SYSTEM) -> ComplexMatrix:
    """
    Trace out one factor of a joint operator

    Args:
        m: (dim_s*dim_e) square matrix
        layout: the bipartition
        keep: 'system' returns tr_E(m), 'environment' returns tr_S(m)
    """
    m = np.asarray(m, dtype=complex)
    layout.check(m)
    blocks = m.reshape(layout.dim_s, layout.dim_e, layout.dim_s, layout.dim_e)
    if Factor(keep) is Factor.SYSTEM:
        return np.einsum("iaja->ij", blocks)
    return np.einsum("iaib->ab", blocks)


def partial_transpose(m: np.ndarray, layout: BipartiteLayout) -> ComplexMatrix:
    """Transpose on the environment factor only"""
    m = np.asarray(m, dtype=complex)
    layout.check(m)
    blocks = m.reshape(layout.dim_s, layout.dim_e, layout.dim_s, layout.dim_e)
    return blocks.transpose(0, 3, 2, 1).reshape(layout.joint_dim, layout.joint_dim)


def is_ppt(m: np.ndarray, layout: BipartiteLayout, tol: Optional[float] = None) -> bool:
    """Positive partial transpose test; decisive for separability at 2x2 and 2x3"""
    tol = CONFIG.ALGEBRA_TOL if tol is None else tol
    spectrum = linalg.eigvalsh(_hermitian_part(partial_transpose(m, layout)))
    return bool(spectrum[0] >= -tol)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values"""
    m = np.asarray(m, dtype=complex)
    _require_square(m)
    if is_hermitian(m, CONFIG.ALGEBRA_TOL * max(1.0, float(np.max(np.abs(m), initial=0.0)))):
        return float(np.sum(np.abs(linalg.eigvalsh(_hermitian_part(m)))))
    return float(np.sum(linalg.svdvals(m)))


def positive_part_projector(h: np.ndarray, tie_tolerance: Optional[float] = None) -> Effect:
    """
    Projector onto the eigenvectors of h with eigenvalue above tie_tolerance.

    For traceless h this is the Helstrom measurement: tr(P h) = ||h||_tr / 2.
    """
    tie_tolerance = CONFIG.TIE_TOLERANCE if tie_tolerance is None else tie_tolerance
    h = np.asarray(h, dtype=complex)
    _require_square(h)
    if not is_hermitian(h, CONFIG.ALGEBRA_TOL * max(1.0, float(np.max(np.abs(h), initial=0.0)))):
        raise NotHermitianError("positive part requested for a non-Hermitian matrix")
    values, vectors = linalg.eigh(_hermitian_part(h))
    kept = vectors[:, values > tie_tolerance]
    return Effect(kept @ kept.conj().T, check=False)


def maximally_coherent_state(d: int) -> DensityMatrix:
    """|+><+| with |+> = sum_i |i> / sqrt(d)"""
    if d < 1:
        raise DimensionMismatchError("dimension must be positive")
    return DensityMatrix(np.full((d, d), 1.0 / d, dtype=complex), check=False)


def maximally_entangled_state(d: int) -> DensityMatrix:
    """|Psi> = sum_i |i>|i> / sqrt(d) on the layout (d, d)"""
    if d < 1:
        raise DimensionMismatchError("dimension must be positive")
    layout = BipartiteLayout(d, d)
    vec = np.zeros(layout.joint_dim, dtype=complex)
    for i in range(d):
        vec[layout.index(i, i)] = 1.0
    return DensityMatrix.from_vector(vec)


def random_pure_state(d: int, rng: np.random.Generator) -> DensityMatrix:
    """Haar-random pure state from a normalised complex Gaussian vector"""
    vec = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return DensityMatrix.from_vector(vec)


def random_density_matrix(d: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre-induced mixed state of the given rank (full rank by default)"""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return DensityMatrix(_hermitian_part(rho / np.trace(rho).real), check=False)


def random_unitary(d: int, rng: np.random.Generator) -> ComplexMatrix:
    if d == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=complex)


def random_effect(d: int, rng: np.random.Generator) -> Effect:
    """U diag(u) U^dagger with u uniform on [0, 1] and U Haar"""
    u = random_unitary(d, rng)
    return Effect(_hermitian_part(u @ np.diag(rng.random(d)) @ u.conj().T), check=False)


def thermal_state(energies: Sequence[float], beta: float) -> DensityMatrix:
    """Boltzmann state diagonal in the energy eigenbasis"""
    energies = np.asarray(energies, dtype=float)
    if beta < 0:
        raise InvalidStateError("inverse temperature must be non-negative")
    weights = np.exp(-beta * (energies - energies.min()))
    logger.debug(f"thermal state at beta={beta}: populations {weights / weights.sum()}")
    return DensityMatrix(np.diag(weights / weights.sum()).astype(complex), check=False)
