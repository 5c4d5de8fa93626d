"""Complex spinor representations of the Clifford algebra in signature (r, s).

Conventions
-----------
Clifford relation: ``g_i g_j + g_j g_i = -2 eps_i delta_ij``, so spacelike
gammas (eps = +1) square to ``-1`` and timelike ones to ``+1``.
The spinor inner product is ``<psi, phi> = psi^H B phi`` (antilinear in the
first slot) and satisfies ``g_i^H B = (-1)^(s+1) B g_i``.

Spin lifts follow ``Lam g_i Lam^-1 = sum_j O[j, i] g_j``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from spinlab.errors import DimensionMismatchError, LogarithmError, NotPseudoOrthogonalError

_SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

# increments of a lifted path must satisfy ||O_k+1 O_k^-1 - I||_2 below this
CHART_RADIUS = 0.3
PSEUDO_ORTHOGONAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GammaRep:
    """Gamma matrices ``gammas[i]`` (shape ``(m, N, N)``) and the Gram matrix ``B``."""

    r: int
    s: int
    gammas: np.ndarray
    B: np.ndarray

    @property
    def m(self) -> int:
        return self.r + self.s

    @property
    def N(self) -> int:
        return self.gammas.shape[-1]

    @property
    def epsilon(self) -> np.ndarray:
        return np.array([1.0] * self.r + [-1.0] * self.s)

    @property
    def eta(self) -> np.ndarray:
        return np.diag(self.epsilon)


@dataclass(frozen=True, eq=False)
class SpinLift:
    Lambda: np.ndarray
    O: np.ndarray


def _euclidean_gammas(m: int) -> list[np.ndarray]:
    """Hermitian matrices squaring to the identity, pairwise anticommuting."""
    if m == 1:
        return [np.eye(1, dtype=complex)]
    gam = [_SIGMA1, _SIGMA2]
    d = 2
    while d + 1 < m:
        n = gam[0].shape[0]
        eye = np.eye(n, dtype=complex)
        gam = [np.kron(_SIGMA1, g) for g in gam] + [np.kron(_SIGMA2, eye), np.kron(_SIGMA3, eye)]
        d += 2
    if d < m:
        # odd dimension: the rescaled volume element anticommutes with the rest
        k = d // 2
        last = (1j) ** k * np.linalg.multi_dot(gam)
        gam.append(last)
    return gam


@lru_cache(maxsize=None)
def build_rep(r: int, s: int) -> GammaRep:
    """Build the spinor representation of signature ``(r, s)``.

    Spacelike gammas are ``i E_k`` and timelike ones ``E_k`` for hermitian
    ``E_k`` from the Pauli tensor-product recursion.  For odd ``m`` the
    representation produced by the recursion is the one returned.
    """
    r, s = int(r), int(s)
    if r < 0 or s < 0 or r + s < 1:
        raise ValueError(f"invalid signature ({r}, {s})")
    m = r + s
    euclid = _euclidean_gammas(m)
    gammas = np.array([1j * e if i < r else e for i, e in enumerate(euclid)])
    N = gammas.shape[-1]

    B = np.eye(N, dtype=complex)
    for i in range(r, m):
        B = B @ gammas[i]
    # the product of s hermitian matrices has adjoint (-1)^(s(s-1)/2) times itself
    if (s * (s - 1) // 2) % 2 == 1:
        B = 1j * B
    gammas.setflags(write=False)
    B.setflags(write=False)
    return GammaRep(r=r, s=s, gammas=gammas, B=B)


def clifford_matrix(rep: GammaRep, comps: np.ndarray) -> np.ndarray:
    """``sum_a comps[..., a] gamma_a`` for frame components ``comps``."""
    comps = np.asarray(comps)
    if comps.shape[-1] != rep.m:
        raise DimensionMismatchError(f"expected {rep.m} frame components, got {comps.shape[-1]}")
    return np.einsum("...a,aij->...ij", comps, rep.gammas)


def clifford_apply(rep: GammaRep, g: np.ndarray, v: np.ndarray, psi: np.ndarray, frame: np.ndarray | None = None) -> np.ndarray:
    """Clifford-multiply the spinor ``psi`` by the vector ``v``.

    ``v`` is given in coordinates; its components in the g-pseudo-orthonormal
    ``frame`` (columns) are used.  Without a frame, ``b_{eta,g}`` applied to
    the coordinate basis is used, the same frame spinor fields live in.
    """
    from spinlab.metric import reference_frame

    g = np.asarray(g, dtype=float)
    v = np.asarray(v)
    psi = np.asarray(psi)
    if g.shape != (rep.m, rep.m) or v.shape != (rep.m,):
        raise DimensionMismatchError("vector or form does not match the representation dimension")
    if psi.shape != (rep.N,):
        raise DimensionMismatchError(f"spinor must have {rep.N} components")
    if frame is None:
        frame = reference_frame(g, rep.eta)
    comps = np.linalg.solve(frame, v)
    return clifford_matrix(rep, comps) @ psi


def spinor_inner(rep: GammaRep, psi: np.ndarray, phi: np.ndarray) -> np.ndarray | complex:
    """``psi^H B phi``; broadcasts over leading axes."""
    psi = np.asarray(psi)
    phi = np.asarray(phi)
    if psi.shape[-1] != rep.N or phi.shape[-1] != rep.N:
        raise DimensionMismatchError(f"spinors must have {rep.N} components")
    out = np.einsum("...i,ij,...j->...", psi.conj(), rep.B, phi)
    return out[()] if out.ndim == 0 else out


def clifford_residuals(rep: GammaRep) -> dict[str, float]:
    """Maximal entrywise residuals of the defining relations of ``rep``."""
    g = rep.gammas
    eye = np.eye(rep.N)
    eps = rep.epsilon
    anti = 0.0
    adj = 0.0
    sign = (-1.0) ** (rep.s + 1)
    for i in range(rep.m):
        for j in range(rep.m):
            target = -2.0 * eps[i] * eye if i == j else 0.0
            anti = max(anti, float(np.max(np.abs(g[i] @ g[j] + g[j] @ g[i] - target))))
        adj = max(adj, float(np.max(np.abs(g[i].conj().T @ rep.B - sign * rep.B @ g[i]))))
    herm = float(np.max(np.abs(rep.B - rep.B.conj().T)))
    return {
        "anticommutator": anti,
        "adjoint_relation": adj,
        "gram_hermiticity": herm,
        "gram_min_abs_eigenvalue": float(np.min(np.abs(np.linalg.eigvalsh(rep.B)))),
    }


def lie_algebra_spinor(rep: GammaRep, A: np.ndarray) -> np.ndarray:
    """Spinor image of ``A`` in so(r, s): ``1/4 sum_ij eps_i A[j, i] g_i g_j``.

    The prefactor is the one for which ``[X, g_i] = sum_j A[j, i] g_j``.
    """
    A = np.asarray(A)
    pairs = rep.epsilon[:, None] * np.swapaxes(A, -1, -2)
    gg = np.einsum("ikl,jlm->ijkm", rep.gammas, rep.gammas)
    return 0.25 * np.einsum("...ij,ijkm->...km", pairs, gg)


def pseudo_orthogonality_residual(eta: np.ndarray, O: np.ndarray) -> np.ndarray:
    return np.max(np.abs(np.swapaxes(O, -1, -2) @ eta @ O - eta), axis=(-2, -1))


def _project_to_algebra(eta: np.ndarray, A: np.ndarray) -> np.ndarray:
    # so(eta) = {A : A^T eta + eta A = 0}
    return 0.5 * (A - eta @ np.swapaxes(A, -1, -2) @ eta)


def log_near_identity(O: np.ndarray, terms: int = 60) -> np.ndarray:
    """Series logarithm of matrices close to the identity (batched)."""
    O = np.asarray(O, dtype=float)
    Y = O - np.eye(O.shape[-1])
    out = np.zeros_like(Y)
    power = np.broadcast_to(np.eye(O.shape[-1]), Y.shape).copy()
    for k in range(1, terms + 1):
        power = power @ Y
        out += ((-1.0) ** (k + 1) / k) * power
    return out


def _check_pseudo_orthogonal(rep: GammaRep, O: np.ndarray) -> None:
    if O.shape[-2:] != (rep.m, rep.m):
        raise DimensionMismatchError(f"expected {rep.m}x{rep.m} matrices")
    res = pseudo_orthogonality_residual(rep.eta, O)
    if np.any(res > PSEUDO_ORTHOGONAL_TOL):
        raise NotPseudoOrthogonalError(f"O^T eta O - eta has residual {np.max(res):.3e}")
    if np.any(np.linalg.det(O) < 0):
        raise NotPseudoOrthogonalError("determinant is -1")


def _lift_near_identity(rep: GammaRep, O: np.ndarray) -> np.ndarray:
    A = _project_to_algebra(rep.eta, log_near_identity(O))
    return scipy.linalg.expm(lie_algebra_spinor(rep, A))


def _increment_norm(O_prev: np.ndarray, O_next: np.ndarray) -> np.ndarray:
    step = O_next @ np.linalg.inv(O_prev) - np.eye(O_prev.shape[-1])
    return np.linalg.norm(step, ord=2, axis=(-2, -1)) if step.ndim > 2 else np.linalg.norm(step, 2)


def lift_path(rep: GammaRep, Os: np.ndarray) -> np.ndarray:
    """Lift a sampled path ``Os[0], ..., Os[K]`` of pseudo-orthogonal matrices.

    ``Os`` has shape ``(K+1, ..., m, m)``; ``Os[0]`` must lie in the identity
    chart and every increment must stay within ``CHART_RADIUS``.  Returns the
    lift of the endpoint, continuous along the path.
    """
    Os = np.asarray(Os, dtype=float)
    first = np.linalg.norm(Os[0] - np.eye(rep.m), ord=2, axis=(-2, -1)) if Os.ndim > 3 else np.linalg.norm(Os[0] - np.eye(rep.m), 2)
    if np.any(first > CHART_RADIUS):
        raise LogarithmError("path does not start in the identity chart")
    lam = _lift_near_identity(rep, Os[0])
    for k in range(1, Os.shape[0]):
        if np.any(_increment_norm(Os[k - 1], Os[k]) > CHART_RADIUS):
            raise LogarithmError("path increment leaves the logarithm chart; refine the path")
        inc = Os[k] @ np.linalg.inv(Os[k - 1])
        lam = _lift_near_identity(rep, inc) @ lam
    return lam


def _refine_callable(path: Callable[[float], np.ndarray], max_level: int = 16) -> np.ndarray:
    K = 8
    for _ in range(max_level):
        ts = np.linspace(0.0, 1.0, K + 1)
        Os = np.array([np.asarray(path(t), dtype=float) for t in ts])
        ok = np.linalg.norm(Os[0] - np.eye(Os.shape[-1]), 2) <= CHART_RADIUS and all(
            np.all(_increment_norm(Os[k - 1], Os[k]) <= CHART_RADIUS) for k in range(1, K + 1)
        )
        if ok:
            return Os
        K *= 2
    raise LogarithmError("could not subdivide the path into logarithm charts")


def spin_lift(
    rep: GammaRep,
    O: np.ndarray,
    path: Sequence[np.ndarray] | Callable[[float], np.ndarray] | None = None,
) -> SpinLift:
    """Lift the special pseudo-orthogonal ``O`` to the spin group.

    Without ``path`` the lift is ``exp`` of the spinor image of ``log O``, which
    is the endpoint of the lifted one-parameter subgroup through ``O``.
    With ``path`` (samples from near the identity to ``O``, or a callable on
    ``[0, 1]``) the lift is continued along the path, which fixes the sign.
    """
    O = np.asarray(O, dtype=float)
    _check_pseudo_orthogonal(rep, O)
    if path is not None:
        Os = _refine_callable(path) if callable(path) else np.asarray(path, dtype=float)
        if np.max(np.abs(Os[-1] - O)) > 1e-10:
            raise ValueError("path does not end at O")
        return SpinLift(Lambda=lift_path(rep, Os), O=O)

    if np.linalg.norm(O - np.eye(rep.m), 2) <= CHART_RADIUS:
        return SpinLift(Lambda=_lift_near_identity(rep, O), O=O)
    A, err = scipy.linalg.logm(O, disp=False)
    if np.max(np.abs(np.imag(A))) > 1e-10 * max(1.0, np.max(np.abs(A))):
        raise LogarithmError("O has no real logarithm; supply a path")
    A = _project_to_algebra(rep.eta, np.real(A))
    if np.max(np.abs(scipy.linalg.expm(A) - O)) > 1e-9:
        raise LogarithmError("logarithm does not reproduce O; supply a path")
    return SpinLift(Lambda=scipy.linalg.expm(lie_algebra_spinor(rep, A)), O=O)


def covariance_residual(rep: GammaRep, lift: SpinLift) -> float:
    """``max_i || Lam g_i Lam^-1 - sum_j O[j, i] g_j ||`` entrywise."""
    lam = lift.Lambda
    inv = np.linalg.inv(lam)
    target = np.einsum("ji,jab->iab", lift.O, rep.gammas)
    got = np.einsum("ab,ibc,cd->iad", lam, rep.gammas, inv)
    return float(np.max(np.abs(got - target)))


def rotation_path(m: int, i: int, j: int, angle: float) -> Callable[[float], np.ndarray]:
    """Path ``t -> rotation by t*angle`` in the ``(i, j)`` coordinate plane."""

    def path(t: float) -> np.ndarray:
        O = np.eye(m)
        c, s = np.cos(t * angle), np.sin(t * angle)
        O[i, i] = c
        O[j, j] = c
        O[i, j] = -s
        O[j, i] = s
        return O

    return path
