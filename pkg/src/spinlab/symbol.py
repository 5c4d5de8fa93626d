"""Empirical principal symbols of black-box spinor operators.

The operator is applied to ``exp(i s phi) v`` with ``phi(x) = omega . (x - x0)``
for a few small ``s`` and the values at ``x0`` are fitted by a polynomial in
``s``.  The coefficient of ``s^order`` is the principal symbol; for a
consistent finite-difference operator it agrees with the continuum symbol
because the stencil error enters only at higher powers of ``s``.
Convention: the symbol of ``d/dx`` is ``i omega``, so ``sigma(D^g)(omega) =
i sum_a eps_a omega(e_a) g_a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from spinlab.errors import SymbolFitError
from spinlab.grid import MetricField
from spinlab.metric import b_matrix
from spinlab.spinors import SpinorField, dirac, dirac_pullback, rep_for

FIT_SCALE = 0.05
FIT_MULTIPLES = np.array([-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0])
FIT_AGREEMENT_TOL = 1e-6
# stencils of the composed operators must not reach the twist seam
SEAM_MARGIN = 8


def default_point(template: SpinorField) -> tuple[int, ...]:
    return tuple(n // 2 for n in template.grid.sizes)


def _phase_field(template: SpinorField, omega: np.ndarray, point: tuple[int, ...]) -> np.ndarray:
    grid = template.grid
    phi = np.zeros(grid.shape)
    for k, x in enumerate(grid.coords()):
        x0 = point[k] * grid.spacing[k]
        # wrap to (-pi, pi] so the phase is smooth around the base point
        phi = phi + omega[k] * (np.mod(x - x0 + np.pi, 2 * np.pi) - np.pi)
    return phi


def _check_point(template: SpinorField, point: tuple[int, ...]) -> None:
    for p, n in zip(point, template.grid.sizes):
        if not (SEAM_MARGIN <= p < n - SEAM_MARGIN) or n // 2 <= SEAM_MARGIN:
            raise SymbolFitError(f"base point {tuple(point)} is too close to the wrapped edge of the grid")


def _fit(operator, template: SpinorField, omega, point, order: int, scale: float) -> np.ndarray:
    N = template.rep.N
    phi = _phase_field(template, omega, point)
    ss = scale * FIT_MULTIPLES
    samples = np.zeros((len(ss), N, N), dtype=complex)
    for i, s in enumerate(ss):
        wave = np.exp(1j * s * phi)
        for c in range(N):
            vals = np.zeros(template.grid.shape + (N,), dtype=complex)
            vals[..., c] = wave
            samples[i, :, c] = operator(template.with_values(vals)).values[point]
    degree = order + 4
    V = np.vander(ss, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, samples.reshape(len(ss), -1), rcond=None)
    return coef[order].reshape(N, N)


def principal_symbol(
    operator: Callable[[SpinorField], SpinorField],
    template: SpinorField,
    omega,
    point: tuple[int, ...] | None = None,
    order: int = 1,
    scale: float = FIT_SCALE,
) -> np.ndarray:
    """Order-``order`` symbol of ``operator`` at ``omega`` (coordinate covector) and grid ``point``.

    Two fits at ``scale`` and ``scale / 2`` must agree to ``FIT_AGREEMENT_TOL``
    relative, otherwise :class:`SymbolFitError` is raised.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (template.grid.m,):
        raise SymbolFitError(f"covector must have {template.grid.m} components")
    point = default_point(template) if point is None else tuple(int(p) for p in point)
    _check_point(template, point)
    coarse = _fit(operator, template, omega, point, order, scale)
    fine = _fit(operator, template, omega, point, order, scale / 2)
    size = max(np.max(np.abs(fine)), 1e-300)
    if np.max(np.abs(coarse - fine)) > FIT_AGREEMENT_TOL * max(size, 1.0):
        raise SymbolFitError(f"two-scale symbol fits disagree by {np.max(np.abs(coarse - fine)):.3e}")
    return fine


def clifford_symbol(g: MetricField, omega, point: tuple[int, ...]) -> np.ndarray:
    """``i sum_a eps_a omega(e_a) g_a`` at ``point``."""
    rep = rep_for(g)
    omega_e = np.asarray(omega, dtype=float) @ g.frame[point]
    return 1j * np.einsum("a,a,aij->ij", omega_e, rep.epsilon, rep.gammas)


def quadratic_forms(g: MetricField, h: MetricField, omega, point: tuple[int, ...]) -> dict[str, float]:
    """Closed-form candidates for the second-order symbol of the squared pulled-back operator.

    ``g_form = g^{-1}(omega, omega)``, ``h_form = h^{-1}(omega, omega)`` and
    ``chain_form = h(b_{h,g} omega^h, b_{h,g} omega^h)`` with ``omega^h`` the
    ``h``-dual vector, evaluated literally.
    """
    w = np.asarray(omega, dtype=float)
    G, H = g.values[point], h.values[point]
    Ginv, Hinv = np.linalg.inv(G), np.linalg.inv(H)
    u = b_matrix(H, G) @ (Hinv @ w)
    return {
        "g_form": float(w @ Ginv @ w),
        "h_form": float(w @ Hinv @ w),
        "chain_form": float(u @ H @ u),
    }


@dataclass(frozen=True)
class SymbolReport:
    omega: tuple[float, ...]
    point: tuple[int, ...]
    dirac_symbol_residual: float
    clifford_square_residual: float
    pullback_square_scalar: complex
    pullback_square_nonscalar: float
    candidates: dict
    candidate_gaps: dict
    matches: tuple[str, ...]

    def passed(self, dirac_tol: float = 1e-8, form_tol: float = 1e-6) -> bool:
        return self.dirac_symbol_residual <= dirac_tol and min(self.candidate_gaps.values()) <= form_tol


def symbol_report(g: MetricField, h: MetricField, template: SpinorField, omega, point=None, form_tol: float = 1e-6) -> SymbolReport:
    """Compare empirical symbols with the Clifford symbol and the candidate quadratic forms."""
    omega = np.asarray(omega, dtype=float)
    point = default_point(template) if point is None else tuple(int(p) for p in point)
    sigma = principal_symbol(lambda psi: dirac(g, psi), template, omega, point, order=1)
    expected = clifford_symbol(g, omega, point)
    N = template.rep.N
    forms = quadratic_forms(g, h, omega, point)
    square = expected @ expected
    sq_res = float(np.max(np.abs(square - forms["g_form"] * np.eye(N))))

    def pulled_twice(psi):
        return dirac_pullback(g, h, dirac_pullback(g, h, psi))

    sigma2 = principal_symbol(pulled_twice, template, omega, point, order=2)
    scalar = complex(np.trace(sigma2) / N)
    nonscalar = float(np.max(np.abs(sigma2 - scalar * np.eye(N))))
    gaps = {k: float(abs(scalar - v) + nonscalar) for k, v in forms.items()}
    return SymbolReport(
        omega=tuple(float(w) for w in omega),
        point=point,
        dirac_symbol_residual=float(np.max(np.abs(sigma - expected))),
        clifford_square_residual=sq_res,
        pullback_square_scalar=scalar,
        pullback_square_nonscalar=nonscalar,
        candidates=forms,
        candidate_gaps=gaps,
        matches=tuple(k for k, v in gaps.items() if v <= form_tol),
    )
