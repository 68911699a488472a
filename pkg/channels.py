# channels.py - Kraus-family channels, both classicalisation constructions and interruptions I-IV
import itertools
from dataclasses import InitVar, dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy import linalg

from config import get_config
from qops_core import (
    BipartiteLayout,
    ChannelError,
    ComplexMatrix,
    DensityMatrix,
    DimensionMismatchError,
    NotUnitaryError,
    PreferredBasis,
    is_unitary,
    matrices_close,
    random_unitary,
    readonly_array,
)

CONFIG = get_config()


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """
    CP map rho -> sum_k K_k rho K_k^dagger.

    Trace preservation (sum K^dagger K = I) is checked unless check=False;
    dual() builds the one family that legitimately skips it.
    """
    kraus_ops: Tuple[ComplexMatrix, ...]
    label: str = "channel"
    check: InitVar[bool] = True
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self, check: bool):
        ops = tuple(readonly_array(k) for k in self.kraus_ops)
        if not ops:
            raise ChannelError(f"{self.label}: empty Kraus family")
        shape = ops[0].shape
        if len(shape) != 2 or any(k.shape != shape for k in ops):
            raise DimensionMismatchError(f"{self.label}: Kraus operators must share one matrix shape")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "_stack", np.stack(ops))
        if check:
            completeness = np.einsum("kji,kjl->il", self._stack.conj(), self._stack)
            if not matrices_close(completeness, np.eye(shape[1]), CONFIG.CHANNEL_TOL):
                raise ChannelError(f"{self.label}: Kraus family is not trace preserving")

    @property
    def dim_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def stacked(self) -> np.ndarray:
        """Kraus operators as one (n, dim_out, dim_in) array"""
        return self._stack

    def apply_matrix(self, m: np.ndarray) -> ComplexMatrix:
        """Action on an arbitrary operator (no state validation)"""
        m = np.asarray(m, dtype=complex)
        if m.shape != (self.dim_in, self.dim_in):
            raise DimensionMismatchError(f"{self.label} acts on dimension {self.dim_in}, got shape {m.shape}")
        return (self._stack @ m @ self._stack.conj().transpose(0, 2, 1)).sum(axis=0)

    def __len__(self) -> int:
        return len(self.kraus_ops)


@dataclass(frozen=True, eq=False)
class PhaseDistribution:
    """Discrete distribution of per-level phase vectors for random dephasing"""
    atoms: Tuple[Tuple[Tuple[float, ...], float], ...]

    def __post_init__(self):
        atoms = tuple((tuple(float(t) for t in phases), float(w)) for phases, w in self.atoms)
        if not atoms:
            raise ChannelError("phase distribution needs at least one atom")
        dims = {len(phases) for phases, _ in atoms}
        if len(dims) != 1:
            raise DimensionMismatchError(f"phase vectors of differing lengths {sorted(dims)}")
        weights = np.array([w for _, w in atoms])
        if np.any(weights < 0):
            raise ChannelError("phase weights must be nonnegative")
        if abs(weights.sum() - 1.0) > CONFIG.ALGEBRA_TOL:
            raise ChannelError(f"phase weights sum to {weights.sum():.15f}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self) -> int:
        return len(self.atoms[0][0])

    @classmethod
    def independent_flips(cls, d: int) -> "PhaseDistribution":
        """Each level independently gets phase 0 or pi with probability 1/2 (2^d atoms)"""
        weight = 1.0 / 2 ** d
        return cls(tuple((phases, weight) for phases in itertools.product((0.0, np.pi), repeat=d)))


class InterruptionKind(str, Enum):
    I = "I"        # do nothing
    II = "II"      # dynamically classicalise
    III = "III"    # reset environment
    IV = "IV"      # piecewise classicalise

    @property
    def resets_environment(self) -> bool:
        return self in (InterruptionKind.III, InterruptionKind.IV)

    @property
    def classicalises(self) -> bool:
        return self in (InterruptionKind.II, InterruptionKind.IV)


@dataclass(frozen=True, eq=False)
class Interruption:
    kind: InterruptionKind
    layout: BipartiteLayout
    env_reset_target: DensityMatrix

    def __post_init__(self):
        object.__setattr__(self, "kind", InterruptionKind(self.kind))
        if self.env_reset_target.dim != self.layout.dim_e:
            raise DimensionMismatchError(
                f"reset target has dimension {self.env_reset_target.dim}, environment has {self.layout.dim_e}"
            )


# === Constructors ===

def identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d, dtype=complex),), label=f"id[{d}]", check=False)


def unitary_channel(u: np.ndarray, label: str = "unitary") -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise NotUnitaryError(f"{label}: matrix is not unitary")
    return KrausChannel((u,), label=label)


def classicalise(basis: PreferredBasis) -> KrausChannel:
    """Blind projective measurement in the preferred basis (Gamma)"""
    return KrausChannel(tuple(basis.projectors()), label=f"gamma[{basis.dim}]")


def dephase(dist: PhaseDistribution) -> KrausChannel:
    """Random diagonal-phase conjugation; Kraus ops sqrt(w) diag(exp(i theta))"""
    ops = [np.sqrt(w) * np.diag(np.exp(1j * np.asarray(phases))) for phases, w in dist.atoms if w > 0]
    logger.debug(f"dephasing channel from {len(ops)} phase atoms at d={dist.dim}")
    return KrausChannel(tuple(ops), label=f"dephase[{dist.dim}]")


def relax_environment(target: DensityMatrix, dim_in: Optional[int] = None) -> KrausChannel:
    """Constant channel onto target; Kraus ops sqrt(q_m) |v_m><j|"""
    dim_in = target.dim if dim_in is None else dim_in
    values, vectors = linalg.eigh((target.matrix + target.matrix.conj().T) / 2)
    ops = []
    for q, v in zip(values, vectors.T):
        if q <= CONFIG.KRAUS_DROP_TOL:
            continue
        for j in range(dim_in):
            op = np.zeros((target.dim, dim_in), dtype=complex)
            op[:, j] = np.sqrt(q) * v
            ops.append(op)
    return KrausChannel(tuple(ops), label="relax")


def kraus_from_joint_unitary(u: np.ndarray, env_state: DensityMatrix, layout: BipartiteLayout) -> KrausChannel:
    """
    Reduced system channel rho -> tr_E[U (rho (x) env_state) U^dagger]

    Args:
        u: joint unitary in the layout's Kronecker ordering
        env_state: environment state, possibly mixed (eigen-decomposed)
        layout: the bipartition

    Returns:
        Kraus family K_ik = sqrt(p_i) <e_k|U|e_i>, zero-norm operators dropped
    """
    u = np.asarray(u, dtype=complex)
    layout.check(u, "joint unitary")
    if not is_unitary(u):
        raise NotUnitaryError("joint unitary is not unitary")
    if env_state.dim != layout.dim_e:
        raise DimensionMismatchError(f"environment state has dimension {env_state.dim}, expected {layout.dim_e}")
    blocks = u.reshape(layout.dim_s, layout.dim_e, layout.dim_s, layout.dim_e)
    weights, vectors = linalg.eigh((env_state.matrix + env_state.matrix.conj().T) / 2)
    ops = []
    for p, e_i in zip(weights, vectors.T):
        if p <= CONFIG.KRAUS_DROP_TOL:
            continue
        column = np.sqrt(p) * np.einsum("rasb,b->ras", blocks, e_i)
        for k in range(layout.dim_e):
            op = column[:, k, :]
            if np.linalg.norm(op) > CONFIG.KRAUS_DROP_TOL:
                ops.append(op)
    return KrausChannel(tuple(ops), label="reduced")


# === Calculus ===

def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    out = ch.apply_matrix(rho.matrix)
    return DensityMatrix((out + out.conj().T) / 2, check=False)


def compose(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """a after b"""
    if b.dim_out != a.dim_in:
        raise DimensionMismatchError(f"cannot compose {a.label} (in {a.dim_in}) after {b.label} (out {b.dim_out})")
    ops = tuple(ka @ kb for ka in a.kraus_ops for kb in b.kraus_ops)
    return KrausChannel(ops, label=f"{a.label}*{b.label}")


def tensor_channels(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    ops = tuple(np.kron(ka, kb) for ka in a.kraus_ops for kb in b.kraus_ops)
    return KrausChannel(ops, label=f"{a.label}(x){b.label}")


def dual(a: KrausChannel) -> KrausChannel:
    """Heisenberg-picture map M -> sum K^dagger M K; unital rather than trace preserving"""
    return KrausChannel(tuple(k.conj().T for k in a.kraus_ops), label=f"dual({a.label})", check=False)


def choi(ch: KrausChannel) -> ComplexMatrix:
    """sum_ij |i><j| (x) ch(|i><j|), input factor first"""
    vecs = np.stack([k.T.reshape(-1) for k in ch.kraus_ops])
    return vecs.T @ vecs.conj()


def channels_equal(a: KrausChannel, b: KrausChannel, tol: Optional[float] = None) -> bool:
    tol = CONFIG.ALGEBRA_TOL if tol is None else tol
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        return False
    return matrices_close(choi(a), choi(b), tol)


def transfer_tensor(ch: KrausChannel) -> np.ndarray:
    """E[r', r'', s', s''] = sum_k K_k[r', r''] conj(K_k[s', s''])"""
    return np.einsum("kab,kcd->abcd", ch.stacked, ch.stacked.conj())


def interruption_channel(intr: Interruption, basis: PreferredBasis) -> KrausChannel:
    layout = intr.layout
    if basis.dim != layout.dim_s:
        raise DimensionMismatchError(f"basis dimension {basis.dim} does not match system dimension {layout.dim_s}")
    system = classicalise(basis) if intr.kind.classicalises else identity_channel(layout.dim_s)
    environment = (
        relax_environment(intr.env_reset_target) if intr.kind.resets_environment else identity_channel(layout.dim_e)
    )
    logger.debug(f"interruption {intr.kind.value} on layout ({layout.dim_s}, {layout.dim_e})")
    return tensor_channels(system, environment)


def random_channel(d: int, rng: np.random.Generator, n_kraus: int = 2) -> KrausChannel:
    """Kraus blocks of the first d columns of a Haar unitary on d * n_kraus"""
    isometry = random_unitary(d * n_kraus, rng)[:, :d]
    ops = tuple(isometry[k * d:(k + 1) * d, :] for k in range(n_kraus))
    return KrausChannel(ops, label=f"random[{d}]")
