import numpy as np
import pytest

from spinlab.clifford import (
    build_rep,
    clifford_apply,
    clifford_residuals,
    covariance_residual,
    lie_algebra_spinor,
    rotation_path,
    spin_lift,
    spinor_inner,
)
from spinlab.errors import NotPseudoOrthogonalError
from spinlab.metric import joinable

SIGNATURES = [(r, s) for m in range(1, 7) for r in range(m + 1) for s in [m - r]]


def test_circle_rep():
    rep = build_rep(1, 0)
    assert rep.N == 1
    np.testing.assert_allclose(rep.gammas[0], [[1j]])
    np.testing.assert_allclose(rep.gammas[0] @ rep.gammas[0], [[-1]])


def test_lorentzian_plane_squares():
    rep = build_rep(1, 1)
    np.testing.assert_allclose(rep.gammas[0] @ rep.gammas[0], -np.eye(2), atol=1e-15)
    np.testing.assert_allclose(rep.gammas[1] @ rep.gammas[1], np.eye(2), atol=1e-15)


@pytest.mark.parametrize("sig", SIGNATURES)
def test_relations_all_signatures(sig):
    rep = build_rep(*sig)
    assert rep.N == 2 ** (sum(sig) // 2)
    res = clifford_residuals(rep)
    assert res["anticommutator"] <= 1e-12
    assert res["adjoint_relation"] <= 1e-12
    assert res["gram_hermiticity"] <= 1e-12
    assert res["gram_min_abs_eigenvalue"] > 0.5


def test_apply_zero_and_basis_vector(rng):
    rep = build_rep(2, 0)
    G = np.eye(2)
    assert np.all(clifford_apply(rep, G, rng.normal(size=2), np.zeros(2)) == 0)
    np.testing.assert_allclose(clifford_apply(rep, G, [1.0, 0.0], [1.0, 0.0]), rep.gammas[0] @ [1.0, 0.0])


@pytest.mark.parametrize("sig", [(2, 0), (1, 1), (3, 1), (2, 2)])
def test_vector_squares_to_minus_norm(sig, rng):
    rep = build_rep(*sig)
    while True:
        P = np.eye(rep.m) + 0.1 * rng.normal(size=(rep.m, rep.m))
        G = P.T @ rep.eta @ P
        if joinable(rep.eta, G):
            break
    v = rng.normal(size=rep.m)
    psi = rng.normal(size=rep.N) + 1j * rng.normal(size=rep.N)
    twice = clifford_apply(rep, G, v, clifford_apply(rep, G, v, psi))
    np.testing.assert_allclose(twice, -(v @ G @ v) * psi, atol=1e-12)


def test_riemannian_pairing_positive(rng):
    rep = build_rep(3, 0)
    assert np.all(np.linalg.eigvalsh(rep.B) > 0)
    psi = rng.normal(size=rep.N) + 1j * rng.normal(size=rep.N)
    val = spinor_inner(rep, psi, psi)
    assert abs(val.imag) < 1e-14 and val.real > 0
    assert spinor_inner(rep, np.zeros(rep.N), psi) == 0


def test_lorentzian_null_spinor():
    rep = build_rep(1, 1)
    w, V = np.linalg.eigh(rep.B)
    assert w[0] < 0 < w[-1]
    null = V[:, 0] / np.sqrt(-w[0]) + V[:, -1] / np.sqrt(w[-1])
    assert np.linalg.norm(null) > 0.5
    assert abs(spinor_inner(rep, null, null)) < 1e-14


def test_lie_algebra_commutator(rng):
    rep = build_rep(2, 1)
    S = rng.normal(size=(3, 3))
    A = 0.5 * (S - rep.eta @ S.T @ rep.eta)
    X = lie_algebra_spinor(rep, A)
    for i in range(rep.m):
        lhs = X @ rep.gammas[i] - rep.gammas[i] @ X
        np.testing.assert_allclose(lhs, np.einsum("j,jab->ab", A[:, i], rep.gammas), atol=1e-13)


def test_identity_lifts_to_identity():
    rep = build_rep(3, 0)
    np.testing.assert_allclose(spin_lift(rep, np.eye(3)).Lambda, np.eye(rep.N), atol=1e-15)


@pytest.mark.parametrize("m,i,j", [(2, 0, 1), (3, 0, 1), (3, 1, 2)])
def test_full_rotation_gives_minus_identity(m, i, j):
    rep = build_rep(m, 0)
    path = rotation_path(m, i, j, 2 * np.pi)
    lift = spin_lift(rep, path(1.0), path=path)
    np.testing.assert_allclose(lift.Lambda, -np.eye(rep.N), atol=1e-10)


@pytest.mark.parametrize("sig", [(3, 0), (2, 1), (3, 1)])
def test_covariance_near_identity(sig, rng):
    rep = build_rep(*sig)
    import scipy.linalg

    worst = 0.0
    for _ in range(100):
        S = 0.1 * rng.normal(size=(rep.m, rep.m))
        O = scipy.linalg.expm(0.5 * (S - rep.eta @ S.T @ rep.eta))
        worst = max(worst, covariance_residual(rep, spin_lift(rep, O)))
    assert worst <= 1e-10


def test_non_orthogonal_rejected():
    rep = build_rep(2, 0)
    with pytest.raises(NotPseudoOrthogonalError):
        spin_lift(rep, np.diag([2.0, 0.5]))
