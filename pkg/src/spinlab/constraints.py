"""Initial-data constraints on a spatial slice and the wave-gauge residual.

The slice ``S`` is an (m-1)-torus with Riemannian metric ``g0`` and second
fundamental form ``K(X, Y) = g(nabla_X nu, Y)``.  Spinors on ``S`` are
spacetime spinors of signature ``(m-1, 1)`` restricted to the slice; the
unit normal ``nu`` is the last (timelike) frame direction.  One-forms
``A0 = A|_S`` and ``A1 = (nabla_nu A)|_S`` have ``m`` components, spatial
coordinates first and the ``nu`` component last.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spinlab.clifford import build_rep, lie_algebra_spinor
from spinlab.edm import EDMParams
from spinlab.errors import DimensionMismatchError
from spinlab.grid import MetricField, curvature, gradient
from spinlab.spinors import SpinStructureTwist, _connection_coordinate

COUPLING_HAMILTONIAN = 16 * np.pi
COUPLING_MOMENTUM = 8 * np.pi


@dataclass(frozen=True, eq=False)
class InitialData:
    g0: MetricField
    K: np.ndarray
    psi0: list = field(default_factory=list)
    A0: np.ndarray | None = None
    A1: np.ndarray | None = None
    twist: SpinStructureTwist | None = None

    def __post_init__(self):
        n = self.g0.grid.m
        if self.g0.signature != (n, 0):
            raise ValueError("slice metric must be Riemannian")
        K = self.g0.grid.check(np.asarray(self.K, dtype=float), 2)
        if K.shape[-2:] != (n, n):
            raise DimensionMismatchError("K must be an (m-1) x (m-1) tensor field")
        if np.max(np.abs(K - np.swapaxes(K, -1, -2)), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(K), initial=0.0)):
            raise ValueError("K must be symmetric")
        object.__setattr__(self, "K", 0.5 * (K + np.swapaxes(K, -1, -2)))
        rep = self.rep
        psis = [np.asarray(getattr(psi, "values", psi), dtype=complex) for psi in self.psi0]
        for psi in psis:
            if psi.shape != self.g0.grid.shape + (rep.N,):
                raise DimensionMismatchError(f"slice spinors must have shape {self.g0.grid.shape + (rep.N,)}")
        object.__setattr__(self, "psi0", psis)
        for name in ("A0", "A1"):
            val = getattr(self, name)
            val = np.zeros(self.g0.grid.shape + (n + 1,)) if val is None else np.asarray(val, dtype=float)
            if val.shape != self.g0.grid.shape + (n + 1,):
                raise DimensionMismatchError(f"{name} must have {n + 1} components")
            object.__setattr__(self, name, val)
        if self.twist is None:
            object.__setattr__(self, "twist", SpinStructureTwist.periodic(n))

    @property
    def rep(self):
        n = self.g0.grid.m
        return build_rep(n, 1)


def _slice_spinor_derivatives(Z: InitialData, psi: np.ndarray, q: float) -> np.ndarray:
    """``out[..., k, :] = nabla^{qA}_{d_k} psi`` for spatial coordinate directions."""
    g0 = Z.g0
    n = g0.grid.m
    rep = Z.rep
    w = _connection_coordinate(g0)  # [..., k, a, b]
    Kke = np.einsum("...kl,...lb->...kb", Z.K, g0.frame)  # K(d_k, e_b)
    # spacetime generator, column c = frame components of nabla_{d_k} e_c:
    # nabla e_c = nabla^S e_c + K(., e_c) nu and nabla nu = sum_a K(., e_a) e_a
    gen = np.zeros(g0.grid.shape + (n, n + 1, n + 1))
    gen[..., :n, :n] = np.swapaxes(w, -1, -2)
    gen[..., n, :n] = Kke
    gen[..., :n, n] = Kke
    Om = lie_algebra_spinor(rep, gen)
    d = gradient(g0.grid, psi, Z.twist.phases)
    full = d + np.einsum("...kij,...j->...ki", Om, psi)
    if q != 0:
        full = full + 1j * q * Z.A0[..., :n, None] * psi[..., None, :]
    return full


def _normal_derivative(Z: InitialData, psi: np.ndarray, nab: np.ndarray, lam: float) -> np.ndarray:
    """``nabla_nu psi`` from the Dirac equation: ``g_nu (sum_a g_a nabla_{e_a} psi - lambda psi)``."""
    rep = Z.rep
    n = Z.g0.grid.m
    nab_e = np.einsum("...ka,...ki->...ai", Z.g0.frame, nab)
    spatial = np.einsum("aij,...aj->...i", rep.gammas[:n], nab_e)
    return np.einsum("ij,...j->...i", rep.gammas[n], spatial - lam * psi)


def _pair(rep, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", X.conj(), rep.B, Y)


def electric_field(Z: InitialData) -> np.ndarray:
    """``E_c = F(nu, d_c) = A1_c + K_c^d A0_d - d_c A0(nu)``."""
    n = Z.g0.grid.m
    Kmixed = np.einsum("...cp,...pd->...cd", Z.K, Z.g0.inverse)
    dnu = gradient(Z.g0.grid, Z.A0[..., n])
    return Z.A1[..., :n] + np.einsum("...cd,...d->...c", Kmixed, Z.A0[..., :n]) - dnu


def normal_stress(Z: InitialData, params: EDMParams) -> tuple[np.ndarray, np.ndarray]:
    """``T(nu, nu)`` and the coordinate one-form ``T(nu, .)`` on the slice."""
    g0 = Z.g0
    n = g0.grid.m
    rep = Z.rep
    if len(Z.psi0) != params.N:
        raise DimensionMismatchError(f"expected {params.N} slice spinors, got {len(Z.psi0)}")
    ginv = g0.inverse
    A0s = Z.A0[..., :n]
    Fs = gradient(g0.grid, A0s)
    Fs = Fs - np.swapaxes(Fs, -1, -2)
    E = electric_field(Z)
    Tnn = 0.5 * np.einsum("...a,...ab,...b->...", E, ginv, E) + 0.25 * np.einsum("...ij,...ik,...jl,...kl->...", Fs, ginv, ginv, Fs)
    Tn = np.einsum("...c,...cd,...bd->...b", E, ginv, Fs)
    gam_nu = rep.gammas[n]
    for lam, q, psi in zip(params.lam, params.q, Z.psi0):
        nab = _slice_spinor_derivatives(Z, psi, q)
        nab_nu = _normal_derivative(Z, psi, nab, lam) + (1j * q * Z.A0[..., n, None] * psi if q != 0 else 0.0)
        Tnn = Tnn + np.real(_pair(rep, np.einsum("ij,...j->...i", gam_nu, nab_nu), psi))
        # T1(nu, e_b) = 1/2 Re <nu . nabla_b psi + e_b . nabla_nu psi, psi>
        nab_e = np.einsum("...ka,...ki->...ai", g0.frame, nab)
        first = np.einsum("ij,...aj->...ai", gam_nu, nab_e)
        second = np.einsum("aij,...j->...ai", rep.gammas[:n], nab_nu)
        Tne = 0.5 * np.real(np.einsum("...ai,ij,...j->...a", (first + second).conj(), rep.B, psi))
        Tn = Tn + np.einsum("...ak,...a->...k", g0.coframe, Tne)
    return Tnn, Tn


def covariant_K(g0: MetricField, K: np.ndarray) -> np.ndarray:
    """``out[..., i, j, k] = (nabla_i K)_jk``."""
    dK = gradient(g0.grid, K)
    G = g0.christoffels
    return dK - np.einsum("...pij,...pk->...ijk", G, K) - np.einsum("...pik,...jp->...ijk", G, K)


@dataclass(frozen=True, eq=False)
class ConstraintResidual:
    hamiltonian: np.ndarray
    momentum: np.ndarray

    def norms(self) -> dict[str, float]:
        return {
            "hamiltonian_max": float(np.max(np.abs(self.hamiltonian))),
            "momentum_max": float(np.max(np.abs(self.momentum))),
        }


def constraint_residual(Z: InitialData, params: EDMParams) -> ConstraintResidual:
    """Left minus right side of the Hamiltonian and momentum constraints.

    ``scal + (tr K)^2 - |K|^2 - 16 pi T(nu, nu)`` and
    ``div K - d tr K - 8 pi T(nu, .)``, with ``|K|^2 = K_ij K^ij``.
    """
    g0 = Z.g0
    ginv = g0.inverse
    _, scal = curvature(g0)
    trK = np.einsum("...ij,...ij->...", ginv, Z.K)
    normsq = np.einsum("...ij,...ik,...jl,...kl->...", Z.K, ginv, ginv, Z.K)
    Tnn, Tn = normal_stress(Z, params)
    ham = scal + trK**2 - normsq - COUPLING_HAMILTONIAN * Tnn
    nK = covariant_K(g0, Z.K)
    divK = np.einsum("...ij,...ijk->...k", ginv, nK)
    mom = divK - gradient(g0.grid, trK) - COUPLING_MOMENTUM * Tn
    return ConstraintResidual(hamiltonian=ham, momentum=mom)


def wave_gauge_residual(h: MetricField, g: MetricField) -> np.ndarray:
    """``Q^k = h^ij (Gamma(g)^k_ij - Gamma(h)^k_ij)``."""
    if h.grid != g.grid:
        raise DimensionMismatchError("metrics live on different grids")
    return np.einsum("...ij,...kij->...k", h.inverse, g.christoffels - h.christoffels)
