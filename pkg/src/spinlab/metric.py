"""Pointwise operations on nondegenerate symmetric bilinear forms.

All functions accept a single ``(m, m)`` matrix or a stack ``(..., m, m)``.
The comparison maps are

* ``a_{g,h} = G^{-1} H``, so that ``g(a X, Y) = h(X, Y)``;
* ``b_{g,h} = a_{g,h}^{-1/2}`` (positive square root), so that
  ``h(b X, b Y) = g(X, Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg

from spinlab.errors import DegenerateFormError, DimensionMismatchError, NotJoinableError

DEGENERACY_FLOOR = 1e-10
# eigenvalues of a defective a_{g,h} (possible in indefinite signature) are
# only accurate to eps^(1/k) for a k x k Jordan block, so this is loose
SPECTRUM_IMAG_TOL = 1e-5
# eigenvector conditioning above which the Schur route is used instead
EIGENVECTOR_COND_LIMIT = 1e6
JOINABILITY_SAMPLES = 33
# random test forms are kept moderately conditioned so residuals measure the algorithm
RANDOM_FORM_COND_LIMIT = 100.0

BilinearForm = np.ndarray


@dataclass(frozen=True, eq=False)
class Frame:
    """Basis vectors as the columns of ``vectors``; ``eps`` is the realized signature pattern."""

    vectors: np.ndarray
    eps: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class ComparisonMap:
    A: np.ndarray
    role: Literal["a_gh", "b_gh", "rotation"]


def _as_form(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    if G.ndim < 2 or G.shape[-1] != G.shape[-2]:
        raise DimensionMismatchError(f"expected square matrices, got shape {G.shape}")
    return G


def _sym(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def _check_nondegenerate(G: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(_sym(G))
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    if np.any(np.abs(w) < DEGENERACY_FLOOR * scale) or np.any(scale == 0):
        raise DegenerateFormError("bilinear form is degenerate")
    return w


def signature(G: BilinearForm) -> tuple[int, int]:
    """Counts ``(r, s)`` of positive and negative eigenvalues."""
    G = _as_form(G)
    if G.ndim != 2:
        raise DimensionMismatchError("signature expects a single form")
    if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
        raise ValueError("form is not symmetric")
    w = _check_nondegenerate(G)
    r = int(np.sum(w > 0))
    return r, G.shape[0] - r


def signature_matrix(r: int, s: int) -> np.ndarray:
    return np.diag([1.0] * r + [-1.0] * s)


def pseudo_onb(G: BilinearForm) -> Frame:
    """A positive pseudo-orthonormal basis: ``G(b_i, b_j) = delta_ij eps_i``, ``+`` first.

    Eigenvectors are ordered by descending eigenvalue (stable for ties), each
    column signed so that its first nonzero entry is positive, and the last
    column flipped if needed to make the determinant positive.
    """
    G = _as_form(G)
    r, s = signature(G)
    w, Q = np.linalg.eigh(G)
    order = np.argsort(-w, kind="stable")
    w, Q = w[order], Q[:, order]
    for j in range(Q.shape[1]):
        nz = np.flatnonzero(np.abs(Q[:, j]) > 1e-14)
        if Q[nz[0], j] < 0:
            Q[:, j] = -Q[:, j]
    b = Q / np.sqrt(np.abs(w))
    if np.linalg.det(b) < 0:
        b[:, -1] = -b[:, -1]
    return Frame(vectors=b, eps=tuple([1.0] * r + [-1.0] * s))


def frame_metric(frame: Frame) -> np.ndarray:
    """The form in which ``frame`` is pseudo-orthonormal: ``b^-T diag(eps) b^-1``."""
    inv = np.linalg.inv(frame.vectors)
    return inv.T @ np.diag(frame.eps) @ inv


def a_matrix(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    return np.linalg.solve(G, H)


def _positive_spectrum(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eig(A)
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    if np.any(np.abs(w.imag) > SPECTRUM_IMAG_TOL * scale) or np.any(w.real <= 0):
        raise NotJoinableError("comparison map a_{g,h} is not positive definite")
    return w.real, V


def b_matrix(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``a_{g,h}^{-1/2}`` for (stacks of) forms; raises if not positive definite."""
    G = _as_form(G)
    H = _as_form(H)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        L = None
    if L is not None:
        # G = L L^T, a = L^-T S L^T with S = L^-1 H L^-T symmetric
        Linv = np.linalg.inv(L)
        S = _sym(Linv @ H @ np.swapaxes(Linv, -1, -2))
        mu, Q = np.linalg.eigh(S)
        if np.any(mu <= 0):
            raise NotJoinableError("comparison map a_{g,h} is not positive definite")
        root = (Q * mu[..., None, :] ** -0.5) @ np.swapaxes(Q, -1, -2)
        return np.swapaxes(Linv, -1, -2) @ root @ np.swapaxes(L, -1, -2)
    a = a_matrix(G, H)
    w, V = _positive_spectrum(a)
    with np.errstate(all="ignore"):
        X = np.linalg.solve(np.swapaxes(V, -1, -2), np.swapaxes(V * w[..., None, :] ** -0.5, -1, -2))
    X = np.real(np.swapaxes(X, -1, -2))
    bad = ~(np.linalg.cond(V) < EIGENVECTOR_COND_LIMIT)
    if np.any(bad):
        # nearly defective: principal square root through the real Schur form
        X = np.array(X)
        inv_a = np.linalg.solve(H, G)
        flat_X = X.reshape(-1, *X.shape[-2:])
        flat_inv = np.broadcast_to(inv_a, X.shape).reshape(-1, *X.shape[-2:])
        for idx in np.flatnonzero(np.ravel(bad)):
            flat_X[idx] = np.real(scipy.linalg.sqrtm(flat_inv[idx]))
        X = flat_X.reshape(X.shape)
    return X


def comparison_a(g: BilinearForm, h: BilinearForm) -> ComparisonMap:
    g, h = _as_form(g), _as_form(h)
    if g.shape != h.shape:
        raise DimensionMismatchError("forms have different dimensions")
    _check_nondegenerate(g)
    _check_nondegenerate(h)
    return ComparisonMap(A=a_matrix(g, h), role="a_gh")


def comparison_b(g: BilinearForm, h: BilinearForm) -> ComparisonMap:
    g, h = _as_form(g), _as_form(h)
    if g.shape != h.shape:
        raise DimensionMismatchError("forms have different dimensions")
    _check_nondegenerate(g)
    _check_nondegenerate(h)
    return ComparisonMap(A=b_matrix(g, h), role="b_gh")


def chebyshev_samples(samples: int) -> np.ndarray:
    """Chebyshev-Lobatto points on ``[0, 1]`` (endpoints included)."""
    if samples < 2:
        return np.array([0.0, 1.0])
    k = np.arange(samples)
    return 0.5 * (1.0 - np.cos(np.pi * k / (samples - 1)))


def joinable_mask(G: np.ndarray, H: np.ndarray, samples: int = JOINABILITY_SAMPLES) -> np.ndarray:
    """Pointwise joinability for stacks of forms (boolean array of the batch shape)."""
    G, H = _as_form(G), _as_form(H)
    ok = np.ones(G.shape[:-2], dtype=bool)
    wg = np.linalg.eigvalsh(_sym(G))
    rg = np.sum(wg > 0, axis=-1)
    wh = np.linalg.eigvalsh(_sym(H))
    # two positive definite endpoints: every G_t is positive definite and
    # G^{-1} G_t is similar to a positive definite matrix
    if np.all(wg > DEGENERACY_FLOOR * wg[..., -1:]) and np.all(wh > DEGENERACY_FLOOR * wh[..., -1:]):
        return ok
    for t in chebyshev_samples(samples):
        Gt = G + t * (H - G)
        w = np.linalg.eigvalsh(_sym(Gt))
        scale = np.max(np.abs(w), axis=-1)
        nondeg = np.all(np.abs(w) >= DEGENERACY_FLOOR * scale[..., None], axis=-1) & (scale > 0)
        ok &= nondeg & (np.sum(w > 0, axis=-1) == rg)
        with np.errstate(all="ignore"):
            a = np.linalg.solve(np.where(ok[..., None, None], G, np.eye(G.shape[-1])), Gt)
            ev = np.linalg.eigvals(a)
        evscale = np.max(np.abs(ev), axis=-1)
        ok &= np.all(np.abs(ev.imag) <= SPECTRUM_IMAG_TOL * evscale[..., None], axis=-1)
        ok &= np.all(ev.real > 0, axis=-1)
    return ok


def joinable(g: BilinearForm, h: BilinearForm, samples: int = JOINABILITY_SAMPLES) -> bool:
    """Sampled test of joinability along ``g + t (h - g)``; never raises."""
    try:
        g, h = _as_form(g), _as_form(h)
        if g.shape != h.shape:
            return False
        return bool(np.all(joinable_mask(g, h, samples)))
    except (np.linalg.LinAlgError, ValueError):
        return False


def reference_frame(g: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Columns ``b_{eta,g}(d_i)``: the g-pseudo-orthonormal frame used for spinors."""
    g = _as_form(g)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), g.shape)
    return b_matrix(eta, g)


def identification_rotation(eta: BilinearForm, g: BilinearForm, h: BilinearForm) -> ComparisonMap:
    """``O = b_{eta,h}^{-1} b_{g,h} b_{eta,g}``, the matrix of ``b_{g,h}`` between reference frames."""
    eta, g, h = _as_form(eta), _as_form(g), _as_form(h)
    O = rotation_matrix(eta, g, h)
    return ComparisonMap(A=O, role="rotation")


def rotation_matrix(eta: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    eta = np.broadcast_to(eta, g.shape)
    Eg = b_matrix(eta, g)
    Eh = b_matrix(eta, h)
    return np.linalg.solve(Eh, b_matrix(g, h) @ Eg)


def dagger(M: np.ndarray, r: int, s: int) -> np.ndarray:
    eta = signature_matrix(r, s)
    return eta @ np.swapaxes(M, -1, -2) @ eta


def sym_asym_project(M: np.ndarray, signature: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Split ``M`` into its ``(r,s)``-symmetric and antisymmetric parts."""
    M = np.asarray(M, dtype=float)
    Md = dagger(M, *signature)
    return 0.5 * (M + Md), 0.5 * (M - Md)


def matrix_pairing(A: np.ndarray, B: np.ndarray, signature: tuple[int, int]) -> float:
    """``tr(A^dagger B)``."""
    return float(np.trace(dagger(A, *signature) @ B))


def transport_frame(g: BilinearForm, h: BilinearForm, frame: np.ndarray, steps: int = 200) -> np.ndarray:
    """Horizontally transport ``frame`` along ``g_t = g + t (h - g)``.

    Integrates ``de/dt = -1/2 g_t^{-1} (h - g) e`` with classical RK4; the
    velocity ``e^{-1} de/dt`` stays in the (r,s)-symmetric matrices and the
    frame stays pseudo-orthonormal for ``g_t``.
    """
    g, h = _as_form(g), _as_form(h)
    dG = h - g

    def rhs(t, e):
        return -0.5 * np.linalg.solve(g + t * dG, dG @ e)

    e = np.array(frame, dtype=float)
    dt = 1.0 / steps
    for k in range(steps):
        t = k * dt
        k1 = rhs(t, e)
        k2 = rhs(t + dt / 2, e + dt / 2 * k1)
        k3 = rhs(t + dt / 2, e + dt / 2 * k2)
        k4 = rhs(t + dt, e + dt * k3)
        e = e + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return e


def transport_gap(g: BilinearForm, h: BilinearForm, steps: int = 200) -> dict[str, float]:
    """Compare horizontal transport of a g-frame with ``b_{g,h}`` applied to it."""
    e0 = pseudo_onb(g)
    moved = transport_frame(g, h, e0.vectors, steps)
    direct = b_matrix(np.asarray(g, float), np.asarray(h, float)) @ e0.vectors
    eta = np.diag(e0.eps)
    return {
        "transport_vs_b_map": float(np.max(np.abs(moved - direct))),
        "transported_onb_residual": float(np.max(np.abs(moved.T @ np.asarray(h) @ moved - eta))),
    }


def random_joinable_pairs(
    rng: np.random.Generator, sig: tuple[int, int], count: int, spread: float = 0.3, max_cond: float = RANDOM_FORM_COND_LIMIT
) -> tuple[np.ndarray, np.ndarray]:
    """``count`` random joinable pairs ``(G, H)`` of signature ``sig``.

    ``G = P^T eta P`` with ``P = I + spread * N(0, 1)`` and ``H = Q^T eta Q``
    with ``Q = P + spread * N(0, 1)``; candidates are drawn in batches and
    kept when both forms have condition number at most ``max_cond`` and
    :func:`joinable_mask` accepts the pair in both orders.
    """
    m = sum(sig)
    eta = signature_matrix(*sig)
    Gs, Hs = [], []
    found = 0
    while found < count:
        batch = max(2 * (count - found), 16)
        P = np.eye(m) + spread * rng.normal(size=(batch, m, m))
        Q = P + spread * rng.normal(size=(batch, m, m))
        G = np.swapaxes(P, -1, -2) @ eta @ P
        H = np.swapaxes(Q, -1, -2) @ eta @ Q
        ok = (np.linalg.cond(G) <= max_cond) & (np.linalg.cond(H) <= max_cond)
        ok &= joinable_mask(G, H) & joinable_mask(H, G)
        Gs.append(G[ok])
        Hs.append(H[ok])
        found += int(np.sum(ok))
    return np.concatenate(Gs)[:count], np.concatenate(Hs)[:count]


def b_map_residuals(G: np.ndarray, H: np.ndarray) -> dict[str, float]:
    """Worst relative residuals of ``b^T H b = G`` and ``b_{h,g} b_{g,h} = I`` over a stack."""
    b = b_matrix(G, H)
    back = b_matrix(H, G)
    scale = np.max(np.abs(G), axis=(-2, -1))
    defining = np.max(np.abs(np.swapaxes(b, -1, -2) @ H @ b - G), axis=(-2, -1)) / scale
    inverse = np.max(np.abs(back @ b - np.eye(G.shape[-1])), axis=(-2, -1))
    return {"defining_relation": float(np.max(defining)), "inverse": float(np.max(inverse))}
