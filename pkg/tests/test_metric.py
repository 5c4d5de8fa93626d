import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab.errors import DegenerateFormError, NotJoinableError
from spinlab.metric import (
    b_map_residuals,
    b_matrix,
    comparison_a,
    comparison_b,
    frame_metric,
    identification_rotation,
    joinable,
    pseudo_onb,
    random_joinable_pairs,
    signature,
    sym_asym_project,
    transport_gap,
)


def test_signature_examples(rng):
    assert signature(np.diag([1.0, 1.0, -1.0])) == (2, 1)
    with pytest.raises(DegenerateFormError):
        signature(np.diag([1.0, 0.0]))
    P = rng.normal(size=(4, 4))
    assert signature(P.T @ P + 0.1 * np.eye(4)) == (4, 0)


def test_pseudo_onb_examples():
    np.testing.assert_allclose(pseudo_onb(np.eye(3)).vectors, np.eye(3))
    f = pseudo_onb(np.diag([4.0, -9.0]))
    np.testing.assert_allclose(f.vectors, np.diag([0.5, 1 / 3]))
    assert f.eps == (1.0, -1.0)
    G = np.array([[2.0, 1.0], [1.0, 2.0]])
    f = pseudo_onb(G)
    np.testing.assert_allclose(f.vectors.T @ G @ f.vectors, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(frame_metric(f), G, atol=1e-14)


def test_comparison_a_examples(rng):
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    np.testing.assert_allclose(comparison_a(np.eye(2), H).A, H)
    np.testing.assert_allclose(comparison_a(H, H).A, np.eye(2), atol=1e-15)
    G, H = random_joinable_pairs(rng, (2, 1), 1)
    A = comparison_a(G[0], H[0]).A
    np.testing.assert_allclose(G[0] @ A, H[0], atol=1e-12)


def test_comparison_b_examples():
    np.testing.assert_allclose(comparison_b(np.eye(2), np.diag([4.0, 1.0])).A, np.diag([0.5, 1.0]), atol=1e-15)
    G = np.array([[1.5, 0.2], [0.2, -0.7]])
    np.testing.assert_allclose(comparison_b(G, G).A, np.eye(2), atol=1e-14)


def test_joinable_examples(rng):
    assert joinable(np.eye(2), np.diag([4.0, 1.0]))
    assert not joinable(np.diag([1.0, -1.0]), np.diag([-1.0, 1.0]))
    for _ in range(20):
        P, Q = rng.normal(size=(2, 3, 3))
        assert joinable(P.T @ P + 0.1 * np.eye(3), Q.T @ Q + 0.1 * np.eye(3))


def test_b_matrix_not_joinable_raises():
    with pytest.raises(NotJoinableError):
        b_matrix(np.diag([1.0, -1.0]), np.diag([-1.0, 1.0]))


def test_rotation_examples(rng):
    eta = np.diag([1.0, -1.0])
    G = np.array([[1.3, 0.2], [0.2, -0.9]])
    np.testing.assert_allclose(identification_rotation(eta, G, G).A, np.eye(2), atol=1e-14)
    O = identification_rotation(eta, np.exp(0.4) * eta, np.exp(-0.3) * eta).A
    np.testing.assert_allclose(O, np.eye(2), atol=1e-14)
    for sig in [(3, 0), (2, 1), (3, 1)]:
        G, H = random_joinable_pairs(rng, sig, 50)
        e = np.diag([1.0] * sig[0] + [-1.0] * sig[1])
        ok = [joinable(e, a) and joinable(e, b) for a, b in zip(G, H)]
        for a, b in zip(G[ok], H[ok]):
            O = identification_rotation(e, a, b).A
            assert np.max(np.abs(O.T @ e @ O - e)) <= 1e-10


def test_sym_asym_examples():
    M = np.array([[1.0, 2.0], [2.0, 3.0]])
    s, a = sym_asym_project(M, (2, 0))
    np.testing.assert_allclose(s, M)
    np.testing.assert_allclose(a, 0)
    s, a = sym_asym_project(np.array([[0.0, 1.0], [-1.0, 0.0]]), (2, 0))
    np.testing.assert_allclose(s, 0)
    s, a = sym_asym_project(np.array([[0.0, 1.0], [0.0, 0.0]]), (1, 1))
    np.testing.assert_allclose(s, 0.5 * np.array([[0.0, 1.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(a, 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_transport_agrees_with_b_map(rng):
    G, H = random_joinable_pairs(rng, (2, 1), 3)
    for a, b in zip(G, H):
        gap = transport_gap(a, b)
        assert gap["transport_vs_b_map"] < 1e-6
        assert gap["transported_onb_residual"] < 1e-6


@pytest.mark.parametrize("sig", [(2, 0), (3, 0), (1, 1), (3, 1)])
def test_random_pairs_generator(sig, rng):
    G, H = random_joinable_pairs(rng, sig, 200)
    assert G.shape == (200, sum(sig), sum(sig))
    res = b_map_residuals(G, H)
    assert res["defining_relation"] <= 1e-12
    assert res["inverse"] <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), sig=st.sampled_from([(2, 0), (1, 1), (2, 1), (1, 2)]))
def test_b_map_properties(seed, sig):
    rng = np.random.default_rng(seed)
    G, H = random_joinable_pairs(rng, sig, 1)
    G, H = G[0], H[0]
    b = b_matrix(G, H)
    # defining relation, inverse pair and a-symmetry of b
    np.testing.assert_allclose(b.T @ H @ b, G, atol=1e-10 * np.max(np.abs(G)))
    np.testing.assert_allclose(b_matrix(H, G) @ b, np.eye(len(G)), atol=1e-10)
    np.testing.assert_allclose(G @ b, (G @ b).T, atol=1e-10 * np.max(np.abs(G)))
