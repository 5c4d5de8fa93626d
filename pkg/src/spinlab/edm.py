"""Einstein-Dirac-Maxwell operator, functional and related residuals.

Normalizations used throughout:

* ``g(F, F) = F_ij F^ij`` (the metric extended to the tensor square);
* ``T2 = F_{X k} F_Y^k - 1/4 g(F, F) g``;
* ``T1(X, Y) = 1/2 Re <X . nabla_Y psi + Y . nabla_X psi, psi>`` with the
  potential included in ``nabla``;
* the Dirac current ``j(X) = <X . psi, psi>`` is complex in general; its real
  counterpart that couples to ``A`` through ``nabla + i q A`` is
  ``jr = -Im j`` (equal to ``i j`` when ``s`` is even, zero when ``s`` is odd).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from spinlab.clifford import GammaRep
from spinlab.errors import DimensionMismatchError
from spinlab.grid import (
    TorusGrid,
    MetricField,
    codifferential,
    curvature,
    exterior_d,
    one_form_inner,
    volume_integrate,
)
from spinlab.spinors import (
    MetricPath,
    SpinorField,
    beta_transport,
    connection_matrices,
    dirac_potential,
    spinor_gradient,
)


@dataclass(frozen=True)
class EDMParams:
    lam: tuple[float, ...]
    q: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        q = tuple(float(v) for v in self.q)
        if len(lam) != len(q):
            raise ValueError("lambda and q must have the same length")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "q", q)

    @property
    def N(self) -> int:
        return len(self.lam)


def _as_list(psis) -> list[SpinorField]:
    if isinstance(psis, SpinorField):
        return [psis]
    return list(psis)


def _check_fields(params: EDMParams, g: MetricField, psis: list[SpinorField]) -> None:
    if len(psis) != params.N:
        raise DimensionMismatchError(f"expected {params.N} spinor fields, got {len(psis)}")
    for psi in psis:
        if psi.grid != g.grid or (psi.rep.r, psi.rep.s) != g.signature:
            raise DimensionMismatchError("spinor field does not match the metric")


def _zero_potential(g: MetricField, A) -> np.ndarray:
    if A is None:
        return np.zeros(g.grid.shape + (g.grid.m,))
    return g.grid.check(np.asarray(A, dtype=float), 1)


def _coordinate_clifford(rep: GammaRep, g: MetricField) -> np.ndarray:
    """``Gam[..., k] = d_k . ``: ``sum_a e^a(d_k) g_a``."""
    return np.einsum("...ak,aij->...kij", g.coframe, rep.gammas)


def dirac_current(g: MetricField, psi: SpinorField) -> np.ndarray:
    """Coordinate components ``j(d_k) = <d_k . psi, psi>`` (complex)."""
    rep = psi.rep
    Gam = _coordinate_clifford(rep, g)
    phi = np.einsum("...kij,...j->...ki", Gam, psi.values)
    return np.einsum("...ki,ij,...j->...k", phi.conj(), rep.B, psi.values)


def real_current(g: MetricField, psi: SpinorField) -> np.ndarray:
    """``-Im j``: the real current coupled to ``A`` by the functional."""
    return -dirac_current(g, psi).imag


def total_current(params: EDMParams, g: MetricField, psis, kind: str = "complex") -> np.ndarray:
    """``sum_i q_i j_i`` (``kind="complex"``) or ``sum_i q_i jr_i`` (``kind="real"``)."""
    psis = _as_list(psis)
    out = np.zeros(g.grid.shape + (g.grid.m,), dtype=complex if kind == "complex" else float)
    for qi, psi in zip(params.q, psis):
        out = out + qi * (dirac_current(g, psi) if kind == "complex" else real_current(g, psi))
    return out


def spinor_covariant_all(g: MetricField, psi: SpinorField, A=None, q: float = 0.0) -> np.ndarray:
    """``out[..., l, :] = nabla^{g,qA}_{d_l} psi``."""
    full = spinor_gradient(psi) + np.einsum("...kij,...j->...ki", connection_matrices(g, psi.rep), psi.values)
    if A is not None and q != 0:
        full = full + 1j * q * np.asarray(A, dtype=float)[..., None] * psi.values[..., None, :]
    return full


def spinor_stress(g: MetricField, psi: SpinorField, A=None, q: float = 0.0) -> np.ndarray:
    """``T1`` in coordinate components."""
    rep = psi.rep
    nab = spinor_covariant_all(g, psi, A, q)
    Gam = _coordinate_clifford(rep, g)
    moved = np.einsum("...kij,...lj->...kli", Gam, nab)
    X = np.einsum("...kli,ij,...j->...kl", moved.conj(), rep.B, psi.values)
    return 0.5 * np.real(X + np.swapaxes(X, -1, -2))


def full_contraction(g: MetricField, F: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``F_ij H^ij``."""
    return np.einsum("...ij,...ik,...jl,...kl->...", F, g.inverse, g.inverse, H)


def maxwell_stress(g: MetricField, A) -> np.ndarray:
    """``T2 = F_{k p} F_{l q} g^{pq} - 1/4 (F_ij F^ij) g_kl``."""
    F = exterior_d(g.grid, _zero_potential(g, A))
    FF = np.einsum("...kp,...lq,...pq->...kl", F, F, g.inverse)
    return FF - 0.25 * full_contraction(g, F, F)[..., None, None] * g.values


def energy_momentum(params: EDMParams, g: MetricField, psis, A=None, spinor_weight: float = 1.0) -> np.ndarray:
    """``sum_i T1(q_i, g, psi_i, A) + T2(g, A)``; ``spinor_weight`` scales the ``T1`` sum."""
    psis = _as_list(psis)
    _check_fields(params, g, psis)
    T = maxwell_stress(g, A)
    for qi, psi in zip(params.q, psis):
        T = T + spinor_weight * spinor_stress(g, psi, A, qi)
    return T


def einstein_tensor(g: MetricField) -> np.ndarray:
    ric, scal = curvature(g)
    return ric - 0.5 * scal[..., None, None] * g.values


@dataclass(frozen=True, eq=False)
class EDMResidual:
    einstein: np.ndarray
    dirac: list[np.ndarray]
    maxwell: np.ndarray

    def norms(self) -> dict[str, float]:
        return {
            "einstein_max": float(np.max(np.abs(self.einstein))) if self.einstein.size else 0.0,
            "dirac_max": max((float(np.max(np.abs(d))) for d in self.dirac), default=0.0),
            "maxwell_max": float(np.max(np.abs(self.maxwell))) if self.maxwell.size else 0.0,
        }


# Coupling weights for which the residual components are the Euler-Lagrange
# expressions of ``lagrangian`` (see ``calibrate_el_constants``).
VARIATIONAL_SPINOR_STRESS_WEIGHT = 0.5
VARIATIONAL_CURRENT_WEIGHT = 0.5


def edm_residual(params: EDMParams, g: MetricField, psis, A=None, normalization: str = "literal") -> EDMResidual:
    """``(G - T, D^{g,q_i A} psi_i - lambda_i psi_i, delta F - current)``.

    ``normalization="literal"``: ``T = sum T1 + T2`` and current ``sum q_i j_i``
    (complex).  ``normalization="variational"``: ``T = 1/2 sum T1 + T2`` and
    current ``1/2 sum q_i jr_i``, the Euler-Lagrange form of :func:`lagrangian`.
    """
    psis = _as_list(psis)
    _check_fields(params, g, psis)
    A = _zero_potential(g, A)
    if normalization == "literal":
        T = energy_momentum(params, g, psis, A)
        current = total_current(params, g, psis, "complex")
    elif normalization == "variational":
        T = energy_momentum(params, g, psis, A, spinor_weight=VARIATIONAL_SPINOR_STRESS_WEIGHT)
        current = VARIATIONAL_CURRENT_WEIGHT * total_current(params, g, psis, "real")
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    einstein = einstein_tensor(g) - T
    dirac_res = [dirac_potential(g, A, qi, psi).values - li * psi.values for li, qi, psi in zip(params.lam, params.q, psis)]
    maxwell = codifferential(g, exterior_d(g.grid, A)) - current
    return EDMResidual(einstein=einstein, dirac=dirac_res, maxwell=maxwell)


def lagrangian_density(params: EDMParams, g: MetricField, psis, A=None) -> np.ndarray:
    """``scal + sum_i (lambda_i <psi_i, psi_i> - Re <D^{g,q_i A} psi_i, psi_i>) - 1/2 g(F, F)``."""
    psis = _as_list(psis)
    _check_fields(params, g, psis)
    A = _zero_potential(g, A)
    _, scal = curvature(g)
    dens = scal.astype(float)
    for li, qi, psi in zip(params.lam, params.q, psis):
        B = psi.rep.B
        norm = np.real(np.einsum("...i,ij,...j->...", psi.values.conj(), B, psi.values))
        Dpsi = dirac_potential(g, A, qi, psi).values
        pair = np.real(np.einsum("...i,ij,...j->...", Dpsi.conj(), B, psi.values))
        dens = dens + li * norm - pair
    F = exterior_d(g.grid, A)
    return dens - 0.5 * full_contraction(g, F, F)


def lagrangian(params: EDMParams, g: MetricField, psis, A=None) -> float:
    """Integral of :func:`lagrangian_density`; the spinor pairing enters through its real part."""
    return float(np.real(volume_integrate(g, lagrangian_density(params, g, psis, A))))


@dataclass(frozen=True, eq=False)
class Direction:
    k: np.ndarray
    phis: list[np.ndarray]
    a: np.ndarray


def smooth_random_field(rng: np.random.Generator, grid: TorusGrid, amplitude: float = 1.0, kmax: int = 1, terms: int = 4) -> np.ndarray:
    """Sum of ``terms`` random low-frequency sinusoids (frequencies up to ``kmax``)."""
    X = grid.coords()
    out = np.zeros(grid.shape)
    for _ in range(terms):
        kv = rng.integers(-kmax, kmax + 1, size=grid.m)
        phase = rng.uniform(0, 2 * np.pi)
        out += 0.5 * amplitude * rng.normal() * np.sin(sum(k * x for k, x in zip(kv, X)) + phase)
    return out


def random_direction(rng: np.random.Generator, g: MetricField, psis, scale: float = 0.3) -> Direction:
    """Smooth random ``(k, phi, a)`` compatible with the twist of each spinor."""
    grid = g.grid
    m = grid.m
    k = np.zeros(grid.shape + (m, m))
    for i in range(m):
        for j in range(i, m):
            k[..., i, j] = k[..., j, i] = smooth_random_field(rng, grid, scale)
    phis = []
    for psi in _as_list(psis):
        carrier = np.exp(1j * sum(d * x for d, x in zip(psi.twist.delta, grid.coords())))
        comps = [smooth_random_field(rng, grid) + 1j * smooth_random_field(rng, grid) for _ in range(psi.rep.N)]
        phis.append(scale * carrier[..., None] * np.stack(comps, axis=-1))
    a = np.stack([smooth_random_field(rng, grid, scale) for _ in range(m)], axis=-1)
    return Direction(k, phis, a)


def _perturbed(params: EDMParams, g: MetricField, psis: list[SpinorField], A, d: Direction, t: float) -> float:
    gt = MetricField(g.grid, g.values + t * d.k, g.signature, validate=False)
    moved = []
    for psi, phi in zip(psis, d.phis):
        if t == 0.0:
            base = psi
        else:
            base = beta_transport(MetricPath(g, gt, samples=1), psi)
        moved.append(base.with_values(base.values + t * phi))
    return lagrangian(params, gt, moved, A + t * d.a)


def directional_derivative(params: EDMParams, g: MetricField, psis, A, d: Direction, step: float = 1e-3) -> dict[str, float]:
    """Central differences of ``t -> L(g + t k, beta psi + t phi, A + t a)``.

    Returns the plain central estimates at ``step``, ``step/2``, ``step/4``
    and the Richardson combination of the last two.
    """
    psis = _as_list(psis)
    A = _zero_potential(g, A)
    vals = {}
    for e in (step, step / 2, step / 4):
        vals[e] = (_perturbed(params, g, psis, A, d, e) - _perturbed(params, g, psis, A, d, -e)) / (2 * e)
    c1, c2, c4 = vals[step], vals[step / 2], vals[step / 4]
    return {"central_1": c1, "central_2": c2, "central_4": c4, "richardson": (4 * c4 - c2) / 3}


def pairing_terms(params: EDMParams, g: MetricField, psis, A, d: Direction) -> dict[str, float]:
    """Integrated basis functionals the first variation is compared against.

    ``einstein``: int <G, k>;  ``spinor_stress``: int <sum T1, k>;
    ``maxwell_stress``: int <T2, k>;  ``dirac``: int sum Re <D psi - lambda psi, phi + 1/4 tr_g(k) psi>;
    ``codifferential``: int g(delta F, a);  ``current``: int g(sum q_i jr_i, a).
    """
    psis = _as_list(psis)
    A = _zero_potential(g, A)
    ginv = g.inverse

    def tensor_pair(T):
        return float(np.real(volume_integrate(g, np.einsum("...ij,...ik,...jl,...kl->...", T, ginv, ginv, d.k))))

    G = einstein_tensor(g)
    T1 = sum(spinor_stress(g, psi, A, qi) for qi, psi in zip(params.q, psis))
    T2 = maxwell_stress(g, A)
    trk = np.einsum("...ij,...ij->...", ginv, d.k)
    dirac_pair = 0.0
    for li, qi, psi, phi in zip(params.lam, params.q, psis, d.phis):
        R = dirac_potential(g, A, qi, psi).values - li * psi.values
        target = phi + 0.25 * trk[..., None] * psi.values
        dens = np.real(np.einsum("...i,ij,...j->...", R.conj(), psi.rep.B, target))
        dirac_pair += float(np.real(volume_integrate(g, dens)))
    deltaF = codifferential(g, exterior_d(g.grid, A))
    jr = total_current(params, g, psis, "real")
    return {
        "einstein": tensor_pair(G),
        "spinor_stress": tensor_pair(T1) if psis else 0.0,
        "maxwell_stress": tensor_pair(T2),
        "dirac": dirac_pair,
        "codifferential": float(np.real(volume_integrate(g, one_form_inner(g, deltaF, d.a)))),
        "current": float(np.real(volume_integrate(g, one_form_inner(g, jr, d.a)))),
    }


# Frozen constants (c1, c2, c3) multiplying the variational residual pairings,
# obtained from ``calibrate_el_constants`` and checked by the test-suite.
EL_CONSTANTS = (-1.0, -2.0, -2.0)


def pairing_from_terms(terms: dict[str, float], constants=EL_CONSTANTS) -> float:
    c1, c2, c3 = constants
    einstein = terms["einstein"] - VARIATIONAL_SPINOR_STRESS_WEIGHT * terms["spinor_stress"] - terms["maxwell_stress"]
    maxwell = terms["codifferential"] - VARIATIONAL_CURRENT_WEIGHT * terms["current"]
    return c1 * einstein + c2 * terms["dirac"] + c3 * maxwell


@dataclass(frozen=True)
class ELReport:
    dL: float
    pairing: float
    gap: float
    relative_gap: float
    central: tuple[float, float, float]


def el_consistency(params: EDMParams, g: MetricField, psis, A, d: Direction, step: float = 1e-3, constants=EL_CONSTANTS) -> ELReport:
    """Compare the numerical first variation of ``L`` with the residual pairing."""
    psis = _as_list(psis)
    A = _zero_potential(g, A)
    dd = directional_derivative(params, g, psis, A, d, step)
    pairing = pairing_from_terms(pairing_terms(params, g, psis, A, d), constants)
    gap = abs(dd["richardson"] - pairing)
    scale = max(abs(dd["richardson"]), abs(pairing))
    return ELReport(
        dL=dd["richardson"],
        pairing=pairing,
        gap=gap,
        relative_gap=gap / scale if scale > 0 else 0.0,
        central=(dd["central_1"], dd["central_2"], dd["central_4"]),
    )


BASIS_KEYS = ("einstein", "spinor_stress", "maxwell_stress", "dirac", "codifferential", "current")


@dataclass(frozen=True)
class Calibration:
    """Least-squares coefficients of the first variation in the basis functionals."""

    coefficients: dict[str, float]
    constants: tuple[float, float, float]
    spinor_stress_weight: float
    current_weight: float
    residual: float


def calibrate_el_constants(samples: Sequence[tuple[EDMParams, MetricField, list, np.ndarray, Direction]], step: float = 1e-3) -> Calibration:
    """Fit ``dL = sum_b c_b * term_b`` over ``samples`` and derive the constants (see :func:`fit_el_constants`)."""
    rows, rhs = [], []
    for params, g, psis, A, d in samples:
        terms = pairing_terms(params, g, psis, A, d)
        rows.append([terms[k] for k in BASIS_KEYS])
        rhs.append(directional_derivative(params, g, psis, A, d, step)["richardson"])
    return fit_el_constants(np.array(rows), np.array(rhs))


def fit_el_constants(rows: np.ndarray, rhs: np.ndarray) -> Calibration:
    """Least-squares coefficients of ``rhs`` in the basis columns ``rows[:, BASIS_KEYS]``.

    ``c1`` is minus the coefficient of ``int <T2, k>`` (which must agree with
    the coefficient of ``int <G, k>`` whenever that column is not identically
    zero), ``c2`` that of the Dirac pairing and ``c3`` that of
    ``int g(delta F, a)``; the coupling weights follow as ratios
    (``-c_T1/c1``, ``-c_current/c3``).
    """
    M = np.asarray(rows, dtype=float)
    y = np.asarray(rhs, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    # in two dimensions G vanishes identically and its column is pure noise
    active = norms > 1e-3 * np.max(norms)
    coef = np.full(len(BASIS_KEYS), np.nan)
    sol, *_ = np.linalg.lstsq(M[:, active], y, rcond=None)
    coef[active] = sol
    c = dict(zip(BASIS_KEYS, (float(v) for v in coef)))
    resid = float(np.linalg.norm(M[:, active] @ sol - y) / max(np.linalg.norm(y), 1e-300))
    c1 = -c["maxwell_stress"]
    return Calibration(
        coefficients=c,
        constants=(c1, c["dirac"], c["codifferential"]),
        spinor_stress_weight=-c["spinor_stress"] / c1,
        current_weight=-c["current"] / c["codifferential"],
        residual=resid,
    )
