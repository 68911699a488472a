import numpy as np
import pytest

from channels import (
    ChannelError,
    Interruption,
    InterruptionKind,
    KrausChannel,
    PhaseDistribution,
    apply,
    channels_equal,
    choi,
    classicalise,
    compose,
    dephase,
    dual,
    identity_channel,
    interruption_channel,
    kraus_from_joint_unitary,
    random_channel,
    relax_environment,
    tensor_channels,
    transfer_tensor,
    unitary_channel,
)
from qops_core import (
    BipartiteLayout,
    DensityMatrix,
    DimensionMismatchError,
    NotUnitaryError,
    PreferredBasis,
    hollow,
    maximally_coherent_state,
    partial_trace,
    random_density_matrix,
    random_unitary,
    tensor,
)


def test_kraus_family_must_be_trace_preserving():
    with pytest.raises(ChannelError):
        KrausChannel((np.eye(2) * 0.5,))
    with pytest.raises(ChannelError):
        KrausChannel(())


def test_kraus_family_shapes_must_agree():
    with pytest.raises(DimensionMismatchError):
        KrausChannel((np.eye(2), np.eye(3)), check=False)


def test_unitary_channel_rejects_non_unitary():
    with pytest.raises(NotUnitaryError):
        unitary_channel(np.array([[1, 1], [0, 1]]))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gamma_constructions_agree(d):
    measured = classicalise(PreferredBasis.computational(d))
    dephased = dephase(PhaseDistribution.independent_flips(d))
    assert len(dephased) == 2 ** d
    assert channels_equal(measured, dephased)


def test_gamma_removes_coherences(rng):
    rho = random_density_matrix(3, rng)
    out = apply(classicalise(PreferredBasis.computational(3)), rho)
    assert np.allclose(out.matrix, np.diag(np.diag(rho.matrix)))
    assert np.allclose(hollow(out.matrix), 0)


def test_phase_distribution_weights_must_normalise():
    with pytest.raises(ChannelError):
        PhaseDistribution((((0.0, 0.0), 0.4), ((0.0, np.pi), 0.4)))
    with pytest.raises(DimensionMismatchError):
        PhaseDistribution((((0.0,), 0.5), ((0.0, np.pi), 0.5)))


def test_relax_environment_is_constant(rng):
    target = random_density_matrix(3, rng)
    relax = relax_environment(target)
    for _ in range(3):
        out = apply(relax, random_density_matrix(3, rng))
        assert np.allclose(out.matrix, target.matrix, atol=1e-12)


def test_compose_and_tensor(rng):
    u = random_unitary(2, rng)
    v = random_unitary(2, rng)
    composed = compose(unitary_channel(u), unitary_channel(v))
    assert channels_equal(composed, unitary_channel(u @ v), 1e-10)
    joint = tensor_channels(unitary_channel(u), identity_channel(3))
    assert (joint.dim_in, joint.dim_out) == (6, 6)
    with pytest.raises(DimensionMismatchError):
        compose(identity_channel(2), identity_channel(3))


def test_dual_is_adjoint(rng):
    ch = random_channel(3, rng)
    rho = random_density_matrix(3, rng).matrix
    m = random_density_matrix(3, rng).matrix
    lhs = np.trace(m @ ch.apply_matrix(rho))
    rhs = np.trace(dual(ch).apply_matrix(m) @ rho)
    assert np.isclose(lhs, rhs)
    assert np.allclose(dual(ch).apply_matrix(np.eye(3)), np.eye(3))


def test_choi_of_identity_is_unnormalised_bell_projector():
    c = choi(identity_channel(2))
    vec = np.array([1, 0, 0, 1])
    assert np.allclose(c, np.outer(vec, vec))


def test_choi_is_positive_with_input_trace_identity(rng):
    ch = random_channel(2, rng, n_kraus=3)
    c = choi(ch)
    assert np.linalg.eigvalsh(c)[0] > -1e-12
    assert np.allclose(partial_trace(c, BipartiteLayout(2, 2), "system"), np.eye(2))


def test_transfer_tensor_reproduces_action(rng):
    ch = random_channel(2, rng)
    rho = random_density_matrix(2, rng).matrix
    e = transfer_tensor(ch)
    via_tensor = np.einsum("abcd,bd->ac", e, rho)
    assert np.allclose(via_tensor, ch.apply_matrix(rho))


def test_kraus_from_joint_unitary_matches_partial_trace(rng):
    layout = BipartiteLayout(2, 3)
    u = random_unitary(6, rng)
    env = random_density_matrix(3, rng)
    reduced = kraus_from_joint_unitary(u, env, layout)
    rho = random_density_matrix(2, rng)
    direct = partial_trace(u @ tensor(rho.matrix, env.matrix) @ u.conj().T, layout)
    assert np.allclose(reduced.apply_matrix(rho.matrix), direct, atol=1e-12)


def test_kraus_from_joint_unitary_drops_empty_operators():
    layout = BipartiteLayout(2, 2)
    pure_env = DensityMatrix.basis_state(2, 0)
    reduced = kraus_from_joint_unitary(np.eye(4), pure_env, layout)
    assert len(reduced) == 1
    assert channels_equal(reduced, identity_channel(2))


@pytest.mark.parametrize(
    "kind, classicalises, resets",
    [("I", False, False), ("II", True, False), ("III", False, True), ("IV", True, True)],
)
def test_interruption_flags(kind, classicalises, resets):
    k = InterruptionKind(kind)
    assert k.classicalises is classicalises
    assert k.resets_environment is resets


def test_interruption_channel_iv_outputs_product():
    layout = BipartiteLayout(2, 2)
    env0 = DensityMatrix.basis_state(2, 1)
    intr = Interruption(InterruptionKind.IV, layout, env0)
    ch = interruption_channel(intr, PreferredBasis.computational(2))
    joint = tensor(maximally_coherent_state(2).matrix, np.eye(2) / 2)
    out = ch.apply_matrix(joint)
    assert np.allclose(out, tensor(np.eye(2) / 2, env0.matrix))


def test_interruption_reset_target_dimension():
    with pytest.raises(DimensionMismatchError):
        Interruption("III", BipartiteLayout(2, 2), DensityMatrix.basis_state(3, 0))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_gamma_is_idempotent(d, rng):
    gamma = classicalise(PreferredBasis.computational(d))
    for _ in range(100):
        once = gamma.apply_matrix(random_density_matrix(d, rng).matrix)
        assert np.allclose(gamma.apply_matrix(once), once, atol=1e-14)
    assert channels_equal(compose(gamma, gamma), gamma)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("n_kraus", [1, 2, 3])
def test_dual_of_dual_is_the_channel(d, n_kraus, rng):
    for _ in range(10):
        ch = random_channel(d, rng, n_kraus)
        assert channels_equal(dual(dual(ch)), ch, 1e-12)


@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
def test_interruptions_ii_and_iii_commute_into_iv(dims, rng):
    layout = BipartiteLayout(*dims)
    basis = PreferredBasis.computational(layout.dim_s)
    env_target = random_density_matrix(layout.dim_e, rng)
    ii, iii, iv = (
        interruption_channel(Interruption(kind, layout, env_target), basis)
        for kind in (InterruptionKind.II, InterruptionKind.III, InterruptionKind.IV)
    )
    assert channels_equal(compose(ii, iii), compose(iii, ii), 1e-12)
    assert channels_equal(compose(ii, iii), iv, 1e-12)
