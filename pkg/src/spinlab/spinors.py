"""Spinor fields, spin connection and Dirac operators on the torus.

Spinor components are taken with respect to the frame field
``e_a = b_{eta,g}(d_a)``, so a metric change acts on components through
the spin lift of the frame rotation.  Spin structures are constant boundary
phases ``exp(2 pi i delta_k)`` per direction, ``delta_k`` in {0, 1/2}.

Conventions (fixed once, checked by the test-suite):

* ``nabla_X psi = X(psi) + 1/4 sum_ab eps_a eps_b w_ab(X) g_a g_b psi`` with
  ``w_ab(X) = g(nabla_X e_a, e_b)``, plus ``i q A(X) psi`` with a potential;
* ``D psi = sum_a eps_a g_a nabla_{e_a} psi``.  On the flat circle
  ``D e^{ikx} = -k e^{ikx}``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from spinlab.clifford import CHART_RADIUS, GammaRep, build_rep, lie_algebra_spinor, lift_path
from spinlab.errors import DimensionMismatchError, LogarithmError, NotJoinableError, TwistMismatchError
from spinlab.grid import MetricField, TorusGrid, gradient
from spinlab.metric import b_matrix, joinable_mask

DENSE_LIMIT = 1024
MAX_SPECTRUM_DIM = 2**16
# relative size of the non-self-adjoint part tolerated before eigvalsh
SPECTRUM_ASYMMETRY_TOL = 1e-3
_PATH_REFINEMENTS = 12


@dataclass(frozen=True)
class SpinStructureTwist:
    delta: tuple[float, ...]

    def __post_init__(self):
        delta = tuple(float(d) for d in self.delta)
        if any(d not in (0.0, 0.5) for d in delta):
            raise ValueError(f"twist entries must be 0 or 1/2, got {delta}")
        object.__setattr__(self, "delta", delta)

    @classmethod
    def periodic(cls, m: int) -> "SpinStructureTwist":
        return cls((0.0,) * m)

    @classmethod
    def antiperiodic(cls, m: int) -> "SpinStructureTwist":
        return cls((0.5,) * m)

    @property
    def phases(self) -> tuple[complex, ...]:
        return tuple(1.0 if d == 0.0 else -1.0 for d in self.delta)


@dataclass(frozen=True, eq=False)
class SpinorField:
    grid: TorusGrid
    rep: GammaRep
    twist: SpinStructureTwist
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape + (self.rep.N,):
            raise DimensionMismatchError(f"spinor values must have shape {self.grid.shape + (self.rep.N,)}, got {vals.shape}")
        if len(self.twist.delta) != self.grid.m or self.rep.m != self.grid.m:
            raise DimensionMismatchError("twist, representation and grid dimensions differ")
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray) -> "SpinorField":
        return SpinorField(self.grid, self.rep, self.twist, values)

    @classmethod
    def zeros(cls, grid: TorusGrid, rep: GammaRep, twist: SpinStructureTwist) -> "SpinorField":
        return cls(grid, rep, twist, np.zeros(grid.shape + (rep.N,), dtype=complex))

    @classmethod
    def plane_wave(cls, grid: TorusGrid, rep: GammaRep, twist: SpinStructureTwist, k, v) -> "SpinorField":
        """``exp(i k.x) v``; each ``k_j - delta_j`` must be an integer."""
        k = np.asarray(k, dtype=float)
        if np.any(np.abs((k - np.array(twist.delta)) - np.round(k - np.array(twist.delta))) > 1e-12):
            raise TwistMismatchError(f"momentum {k.tolist()} is incompatible with twist {twist.delta}")
        phase = np.exp(1j * sum(kj * xj for kj, xj in zip(k, grid.coords())))
        return cls(grid, rep, twist, phase[..., None] * np.asarray(v, dtype=complex))


@dataclass(frozen=True, eq=False)
class UniversalSection:
    metric: MetricField
    spinor: SpinorField

    def __post_init__(self):
        if self.metric.grid != self.spinor.grid:
            raise DimensionMismatchError("metric and spinor live on different grids")
        if self.metric.signature != (self.spinor.rep.r, self.spinor.rep.s):
            raise DimensionMismatchError("spinor representation does not match the metric signature")


@dataclass(frozen=True, eq=False)
class MetricPath:
    """The affine path ``g + t (h - g)``, sampled ``samples + 1`` times for lifting."""

    g: MetricField
    h: MetricField
    samples: int = 8

    def __post_init__(self):
        if self.g.grid != self.h.grid or self.g.signature != self.h.signature:
            raise DimensionMismatchError("path endpoints differ in grid or signature")
        if not np.all(joinable_mask(self.g.values, self.h.values)):
            raise NotJoinableError("metrics are not joinable at every grid point")

    def at(self, t: float) -> MetricField:
        vals = self.g.values + t * (self.h.values - self.g.values)
        return MetricField(self.g.grid, vals, self.g.signature, validate=False)

    def reversed(self) -> "MetricPath":
        return MetricPath(self.h, self.g, self.samples)

    def segment(self, t0: float, t1: float) -> "MetricPath":
        return MetricPath(self.at(t0), self.at(t1), self.samples)


def rep_for(g: MetricField) -> GammaRep:
    return build_rep(*g.signature)


def _check_spinor(g: MetricField, psi: SpinorField) -> None:
    if psi.grid != g.grid:
        raise DimensionMismatchError("spinor and metric live on different grids")
    if (psi.rep.r, psi.rep.s) != g.signature:
        raise DimensionMismatchError("spinor representation does not match the metric signature")


def frame_field(g: MetricField) -> np.ndarray:
    """``E[..., k, a]``: coordinate components of the g-pseudo-orthonormal frame."""
    return g.frame


def frame_residual(g: MetricField) -> float:
    E = g.frame
    gram = np.einsum("...ka,...kl,...lb->...ab", E, g.values, E)
    return float(np.max(np.abs(gram - g.eta)))


def nabla_columns(g: MetricField, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``out[..., l, i, j]``: components of ``nabla^g_{X_i} Y_j`` for column fields ``X``, ``Y``."""
    dY = gradient(g.grid, Y)  # [..., k, l, j]
    full = dY + np.einsum("...lkp,...pj->...klj", g.christoffels, Y)
    return np.einsum("...ki,...klj->...lij", X, full)


def _connection_coordinate(g: MetricField) -> np.ndarray:
    """``w[..., k, a, b] = g(nabla_{d_k} e_a, e_b)``."""
    E = g.frame
    dE = gradient(g.grid, E) + np.einsum("...lkp,...pa->...kla", g.christoffels, E)
    w = np.einsum("...kla,...lq,...qb->...kab", dE, g.values, E)
    # the stencil breaks the product rule at O(h^4); keep the so(r, s) part
    return 0.5 * (w - np.swapaxes(w, -1, -2))


def spin_connection(g: MetricField) -> np.ndarray:
    """``w[..., a, b, c] = g(nabla_{e_c} e_a, e_b)``; antisymmetric in ``(a, b)``."""
    return np.einsum("...kab,...kc->...abc", _connection_coordinate(g), g.frame)


def connection_matrices(g: MetricField, rep: GammaRep | None = None) -> np.ndarray:
    """Spinor connection matrices ``Omega[..., k]`` for the coordinate directions."""
    rep = rep or rep_for(g)
    w = _connection_coordinate(g)
    # generator with [Omega, g_c] = sum_d (nabla e_c)^d g_d, i.e. A[d, c] = eps_d w_cd
    A = rep.epsilon[:, None] * np.swapaxes(w, -1, -2)
    return lie_algebra_spinor(rep, A)


def clifford_coefficients(rep: GammaRep, frame: np.ndarray) -> np.ndarray:
    """``C[..., k] = sum_a eps_a frame[..., k, a] g_a``."""
    return np.einsum("...ka,a,aij->...kij", frame, rep.epsilon, rep.gammas)


def _apply(M: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", M, psi)


def spinor_gradient(psi: SpinorField) -> np.ndarray:
    """``out[..., k, :] = d_k psi`` with the twist phases."""
    return gradient(psi.grid, psi.values, psi.twist.phases)


def _potential_term(g: MetricField, A, q: float) -> np.ndarray | None:
    if A is None or q == 0:
        return None
    A = g.grid.check(np.asarray(A, dtype=float), 1)
    return 1j * q * A


def covariant_derivative(g: MetricField, psi: SpinorField, X, A=None, q: float = 0.0) -> SpinorField:
    """``nabla^{g,qA}_X psi`` for a coordinate vector field ``X[..., k]`` (or a constant vector)."""
    _check_spinor(g, psi)
    X = np.broadcast_to(np.asarray(X, dtype=float), g.grid.shape + (g.grid.m,))
    dpsi = spinor_gradient(psi)
    Om = connection_matrices(g, psi.rep)
    full = dpsi + np.einsum("...kij,...j->...ki", Om, psi.values)
    pot = _potential_term(g, A, q)
    if pot is not None:
        full = full + pot[..., None] * psi.values[..., None, :]
    return psi.with_values(np.einsum("...k,...ki->...i", X, full))


def clifford_multiply(g: MetricField, V: np.ndarray, psi: SpinorField) -> SpinorField:
    """``V . psi`` for a coordinate vector field ``V[..., k]``."""
    comps = np.einsum("...ak,...k->...a", g.coframe, np.broadcast_to(V, g.grid.shape + (g.grid.m,)))
    return psi.with_values(_apply(np.einsum("...a,aij->...ij", comps, psi.rep.gammas), psi.values))


def dirac_potential(g: MetricField, A, q: float, psi: SpinorField) -> SpinorField:
    """``sum_a eps_a e_a . nabla^{g,qA}_{e_a} psi``."""
    _check_spinor(g, psi)
    C = clifford_coefficients(psi.rep, g.frame)
    full = spinor_gradient(psi) + np.einsum("...kij,...j->...ki", connection_matrices(g, psi.rep), psi.values)
    pot = _potential_term(g, A, q)
    if pot is not None:
        full = full + pot[..., None] * psi.values[..., None, :]
    return psi.with_values(np.einsum("...kij,...kj->...i", C, full))


def dirac(g: MetricField, psi: SpinorField) -> SpinorField:
    return dirac_potential(g, None, 0.0, psi)


def one_form_clifford(g: MetricField, A, psi: SpinorField) -> SpinorField:
    """Clifford multiplication by the one-form ``A`` through ``sharp_g``."""
    V = np.einsum("...kl,...l->...k", g.inverse, np.asarray(A, dtype=float))
    return clifford_multiply(g, V, psi)


def potential_form_gap(g: MetricField, A, q: float, psi: SpinorField) -> dict[str, float]:
    """Compare ``D^{g,qA}`` built from the connection with two closed forms.

    ``clifford_form`` is ``D^g psi + i q A . psi``, an exact identity of the
    discretisation; ``minus_form`` is ``D^g psi - q A . psi``, which differs
    from it by the factor ``-i`` on the potential term.
    """
    ours = dirac_potential(g, A, q, psi).values
    base = dirac(g, psi).values
    Apsi = q * one_form_clifford(g, A, psi).values
    scale = max(float(np.max(np.abs(ours))), 1e-300)
    out = {}
    for name, other in (("clifford_form", base + 1j * Apsi), ("minus_form", base - Apsi)):
        diff = float(np.max(np.abs(ours - other)))
        out[name + "_max_abs_difference"] = diff
        out[name + "_relative_difference"] = diff / scale
    return out


def universal_dirac(phi: UniversalSection) -> UniversalSection:
    """``(g, psi) -> (g, D^g psi)``."""
    return UniversalSection(phi.metric, dirac(phi.metric, phi.spinor))


def _rotation_samples(path: MetricPath, ts: np.ndarray) -> np.ndarray:
    """``O_t = E_{g_t}^{-1} b_{g, g_t} E_g`` for every ``t`` in ``ts`` and every grid point."""
    g = path.g
    out = []
    for t in ts:
        gt = g.values + t * (path.h.values - g.values)
        Et = b_matrix(np.broadcast_to(g.eta, gt.shape), gt)
        out.append(np.linalg.solve(Et, b_matrix(g.values, gt) @ g.frame))
    return np.array(out)


def beta_lift(path: MetricPath, rep: GammaRep | None = None) -> np.ndarray:
    """Spin matrices ``Lambda(x)`` with ``beta_{g,h} psi = Lambda psi`` on components.

    ``t -> O_t(x)`` is subdivided until every increment stays in the
    logarithm chart and lifted continuously from the identity.
    """
    rep = rep or rep_for(path.g)
    K = max(1, int(path.samples))
    for _ in range(_PATH_REFINEMENTS):
        Os = _rotation_samples(path, np.linspace(0.0, 1.0, K + 1))
        steps = Os[1:] @ np.linalg.inv(Os[:-1]) - np.eye(rep.m)
        if np.max(np.linalg.norm(steps, ord=2, axis=(-2, -1))) <= CHART_RADIUS:
            return lift_path(rep, Os)
        K *= 2
    raise LogarithmError("could not subdivide the metric path into logarithm charts")


def beta_transport(path: MetricPath, psi: SpinorField) -> SpinorField:
    """``beta_{g,h} psi``: components ``Lambda(x) psi(x)`` over ``h``."""
    _check_spinor(path.g, psi)
    lam = beta_lift(path, psi.rep)
    return psi.with_values(_apply(lam, psi.values))


def frame_correspondence(path: MetricPath) -> np.ndarray:
    """``b_{g,h}`` as coordinate matrices; it carries g-vectors to h-vectors."""
    return b_matrix(path.g.values, path.h.values)


def beta_diagnostics(g: MetricField, h: MetricField, psi: SpinorField, phi: SpinorField, X: np.ndarray, samples: int = 8) -> dict[str, float]:
    """Max residuals of the defining properties of ``beta_{g,h}``.

    ``inverse``: ``beta_{h,g} beta_{g,h} psi - psi``; ``isometry``:
    ``<beta psi, beta phi>_h - <psi, phi>_g``; ``intertwining``:
    ``beta(X . psi) - b_{g,h}(X) . beta psi`` for a vector field ``X``.
    """
    forward = MetricPath(g, h, samples)
    lam = beta_lift(forward, psi.rep)
    lam_back = beta_lift(forward.reversed(), psi.rep)
    bpsi = psi.with_values(_apply(lam, psi.values))
    bphi = _apply(lam, phi.values)
    B = psi.rep.B
    inner_h = np.einsum("...i,ij,...j->...", bpsi.values.conj(), B, bphi)
    inner_g = np.einsum("...i,ij,...j->...", psi.values.conj(), B, phi.values)
    moved = _apply(lam, clifford_multiply(g, X, psi).values)
    bX = np.einsum("...ij,...j->...i", frame_correspondence(forward), np.asarray(X, dtype=float))
    return {
        "inverse": float(np.max(np.abs(_apply(lam_back, bpsi.values) - psi.values))),
        "isometry": float(np.max(np.abs(inner_h - inner_g))),
        "intertwining": float(np.max(np.abs(moved - clifford_multiply(h, bX, bpsi).values))),
    }


def _so_part(conn: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Keep the part of ``conn[..., c, i, j]`` that is antisymmetric in ``(j, c)`` once lowered."""
    low = eps[:, None, None] * conn
    return eps[:, None, None] * 0.5 * (low - np.einsum("...cij->...jic", low))


def dirac_pullback(g: MetricField, h: MetricField, psi: SpinorField) -> SpinorField:
    """``D^h_g`` from the local two-term formula in the g-frame ``e_i``.

    ``sum_i eps_i e_i . nabla^g_{b e_i} psi
    + 1/4 sum_ij eps_i eps_j e_i . e_j . (b^{-1} nabla^h_{b e_i}(b e_j) - nabla^g_{b e_i} e_j) . psi``
    with ``b = b_{g,h}``.  The ``eps`` weights are 1 in Riemannian signature.
    """
    _check_spinor(g, psi)
    if not np.all(joinable_mask(g.values, h.values)):
        raise NotJoinableError("metrics are not joinable at every grid point")
    rep = psi.rep
    eps = rep.epsilon
    b = b_matrix(g.values, h.values)
    E = g.frame
    F = b @ E
    T = clifford_coefficients(rep, F)
    full = spinor_gradient(psi) + np.einsum("...kij,...j->...ki", connection_matrices(g, rep), psi.values)
    first = np.einsum("...kij,...kj->...i", T, full)

    # frame components [..., c, i, j] of b^{-1} nabla^h_{b e_i}(b e_j) and nabla^g_{b e_i} e_j
    conn_h = np.einsum("...cl,...lij->...cij", np.linalg.inv(F), nabla_columns(h, F, F))
    conn_g = np.einsum("...cl,...lij->...cij", g.coframe, nabla_columns(g, F, E))
    Vf = _so_part(conn_h, eps) - _so_part(conn_g, eps)
    ggg = np.einsum("iab,jbc,kcd->ijkad", rep.gammas, rep.gammas, rep.gammas)
    corr = 0.25 * np.einsum("...kij,i,j,ijkab->...ab", Vf, eps, eps, ggg)
    return psi.with_values(first + _apply(corr, psi.values))


def dirac_pullback_conjugated(g: MetricField, h: MetricField, psi: SpinorField, samples: int = 8) -> SpinorField:
    """``beta_{h,g} D^h beta_{g,h} psi``, the defining expression of the pullback."""
    forward = beta_transport(MetricPath(g, h, samples), psi)
    return beta_transport(MetricPath(h, g, samples), dirac(h, forward))


def vertical_derivative(
    path: MetricPath,
    spinor_path: Callable[[float], np.ndarray],
    t: float,
    step: float = 1e-3,
) -> np.ndarray:
    """Covariant t-derivative of component arrays ``spinor_path(t)`` along the path.

    Central differences of ``beta_{g_{t +- e}, g_t} psi_{t +- e}`` combined by
    one Richardson step.
    """
    rep = rep_for(path.g)
    here = path.at(t)

    def pulled(s: float) -> np.ndarray:
        lam = beta_lift(MetricPath(path.at(s), here, max(1, path.samples // 4)), rep)
        return _apply(lam, np.asarray(spinor_path(s), dtype=complex))

    def central(e: float) -> np.ndarray:
        return (pulled(t + e) - pulled(t - e)) / (2 * e)

    return (4 * central(step / 2) - central(step)) / 3


def _stencil_matrix(n: int, spacing: float, phase: complex) -> scipy.sparse.csr_matrix:
    rows, cols, vals = [], [], []
    for off, c in ((1, 8.0 / 12.0), (2, -1.0 / 12.0)):
        for sign in (1, -1):
            for j in range(n):
                k = j + sign * off
                factor = 1.0
                if k >= n:
                    factor = phase
                elif k < 0:
                    factor = 1.0 / phase
                rows.append(j)
                cols.append(k % n)
                vals.append(sign * c * factor / spacing)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)


def _block_diagonal(blocks: np.ndarray) -> scipy.sparse.bsr_matrix:
    P, N = blocks.shape[0], blocks.shape[-1]
    return scipy.sparse.bsr_matrix((blocks, np.arange(P), np.arange(P + 1)), shape=(P * N, P * N))


def dirac_matrix(g: MetricField, twist: SpinStructureTwist, A=None, q: float = 0.0) -> scipy.sparse.csr_matrix:
    """Sparse matrix of ``D^{g,qA}`` acting on row-major flattened component arrays."""
    rep = rep_for(g)
    grid = g.grid
    P, N = grid.npoints, rep.N
    C = clifford_coefficients(rep, g.frame).reshape(P, grid.m, N, N)
    Om = connection_matrices(g, rep).reshape(P, grid.m, N, N)
    zero = np.einsum("pkij,pkjl->pil", C, Om)
    if A is not None and q != 0:
        Af = np.asarray(A, dtype=float).reshape(P, grid.m)
        zero = zero + 1j * q * np.einsum("pk,pkij->pij", Af, C)
    total = _block_diagonal(zero).tocsr()
    for k in range(grid.m):
        factors = [scipy.sparse.identity(n, format="csr", dtype=complex) for n in grid.sizes]
        factors[k] = _stencil_matrix(grid.sizes[k], grid.spacing[k], twist.phases[k])
        factors.append(scipy.sparse.identity(N, format="csr", dtype=complex))
        deriv = factors[0]
        for f in factors[1:]:
            deriv = scipy.sparse.kron(deriv, f, format="csr")
        total = total + _block_diagonal(C[:, k]).tocsr() @ deriv
    return total.tocsr()


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    asymmetry: float
    dimension: int
    discarded_doublers: int


def low_frequency_weight(grid: TorusGrid, twist: SpinStructureTwist, vectors: np.ndarray) -> np.ndarray:
    """Share of each column's norm carried by momenta with ``|k_j| < n_j / 4`` in every direction.

    Columns are flattened component arrays; the twist is removed before the
    Fourier transform so that ``k`` is the true (possibly half-integer) momentum.
    """
    N = vectors.shape[0] // grid.npoints
    V = vectors.T.reshape((vectors.shape[1],) + grid.shape + (N,))
    untwist = np.exp(-1j * sum(d * x for d, x in zip(twist.delta, grid.coords())))
    V = V * untwist[None, ..., None]
    spec = np.abs(np.fft.fftn(V, axes=tuple(range(1, grid.m + 1)))) ** 2
    mask = np.ones(grid.shape, dtype=bool)
    for j, n in enumerate(grid.sizes):
        k = np.fft.fftfreq(n, 1.0 / n) + twist.delta[j]
        shape = [1] * grid.m
        shape[j] = n
        mask &= (np.abs(k) < n / 4).reshape(shape)
    low = np.sum(spec * mask[None, ..., None], axis=tuple(range(1, grid.m + 2)))
    return low / np.sum(spec, axis=tuple(range(1, grid.m + 2)))


def _physical_branch(ev: np.ndarray, weights: np.ndarray, scale: float) -> tuple[np.ndarray, int]:
    """Keep each cluster of (numerically) equal eigenvalues with multiplicity ``round(sum of weights)``."""
    order = np.argsort(ev)
    ev, weights = ev[order], weights[order]
    kept = []
    start = 0
    tol = 1e-8 * max(scale, 1.0)
    for i in range(1, len(ev) + 1):
        if i == len(ev) or ev[i] - ev[i - 1] > tol:
            count = int(round(float(np.sum(weights[start:i]))))
            kept.extend([float(np.mean(ev[start:i]))] * count)
            start = i
    return np.array(kept), len(ev) - len(kept)


def dirac_spectrum(g: MetricField, twist: SpinStructureTwist, count: int) -> SpectrumResult:
    """The ``count`` eigenvalues of ``D^g`` of smallest magnitude, sorted ascending.

    The matrix is conjugated by the square root of the volume weights, which
    makes it hermitian up to discretization error; that error (relative to
    the largest entry) is reported and must stay below ``SPECTRUM_ASYMMETRY_TOL``
    before the hermitian part is diagonalized.

    Central differences carry spurious doubler modes near the grid cutoff
    (their eigenvalues fall back towards zero).  Only the branch continuously
    connected to the continuum modes is returned: eigenvectors are weighted by
    their low-frequency content and degenerate clusters keep that many copies.
    """
    if g.signature[1] != 0:
        raise ValueError("dirac_spectrum needs a Riemannian metric")
    rep = rep_for(g)
    dim = g.grid.npoints * rep.N
    if dim > MAX_SPECTRUM_DIM:
        raise ValueError(f"operator dimension {dim} exceeds {MAX_SPECTRUM_DIM}")
    if not 0 < count <= dim // 2**g.grid.m:
        raise ValueError(f"count must be in 1..{dim // 2**g.grid.m}")
    M = dirac_matrix(g, twist)
    w = np.repeat(np.sqrt(g.volume_density.ravel()), rep.N)
    S = scipy.sparse.diags(w) @ M @ scipy.sparse.diags(1.0 / w)
    skew = S - S.conj().T
    scale = abs(S).max()
    asym = float(abs(skew).max() / scale) if skew.nnz else 0.0
    if asym > SPECTRUM_ASYMMETRY_TOL:
        raise ValueError(f"discrete operator is too far from self-adjoint ({asym:.3e})")
    H = 0.5 * (S + S.conj().T)
    if dim <= DENSE_LIMIT:
        ev, vecs = np.linalg.eigh(H.toarray())
    else:
        k = min(2**g.grid.m * (count + 8), dim - 2)
        ev, vecs = scipy.sparse.linalg.eigsh(H.tocsc(), k=k, sigma=1e-3 * np.pi, which="LM")
    # back to component arrays before measuring frequency content
    vecs = vecs / w[:, None]
    weights = low_frequency_weight(g.grid, twist, vecs)
    kept, dropped = _physical_branch(ev, weights, float(np.max(np.abs(ev))))
    if len(kept) < count:
        raise ValueError("not enough physical eigenvalues were resolved; lower count")
    kept = kept[np.argsort(np.abs(kept), kind="stable")][:count]
    return SpectrumResult(eigenvalues=np.sort(kept), asymmetry=asym, dimension=dim, discarded_doublers=dropped)


def flat_torus_spectrum(m: int, twist: SpinStructureTwist, max_abs: float) -> np.ndarray:
    """Exact Dirac eigenvalues of the flat ``2 pi`` torus with ``|lambda| <= max_abs``.

    Each momentum ``k`` in ``Z^m + delta`` contributes ``+-|k|`` with
    multiplicity ``N/2`` each (``N`` zeros for ``k = 0``); on the circle the
    single eigenvalue of ``exp(i k x)`` is ``-k``.
    """
    N = 2 ** (m // 2)
    delta = np.array(twist.delta)
    r = int(np.ceil(max_abs)) + 1
    axes = [np.arange(-r, r + 1) + d for d in delta]
    ks = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    norms = np.linalg.norm(ks, axis=1)
    ks, norms = ks[norms <= max_abs + 1e-12], norms[norms <= max_abs + 1e-12]
    if m == 1:
        return np.sort(-ks[:, 0])
    out = []
    for nk in norms:
        out.extend([0.0] * N if nk == 0 else [nk] * (N // 2) + [-nk] * (N // 2))
    return np.sort(np.array(out))
