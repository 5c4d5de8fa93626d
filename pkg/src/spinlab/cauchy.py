"""Method-of-lines evolution of the Dirac equation on a fixed 1+1 background.

Coordinates are ``(x, t)`` with index 0 the circle direction and index 1 the
time coordinate; the background metric has signature ``(1, 1)`` and is given
as a callable ``background(t, x) -> (n, 2, 2)``.  ``D psi = lambda psi`` is
solved for ``d_t psi``:

    d_t psi = C_t^{-1} (lambda psi - C_x nabla_x psi) - (Omega_t + i q A_t) psi

and integrated with the classical fourth-order Runge-Kutta scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from spinlab.clifford import build_rep, lie_algebra_spinor
from spinlab.errors import CFLViolationError, DegenerateFormError
from spinlab.grid import TorusGrid, partial_derivative
from spinlab.metric import reference_frame
from spinlab.spinors import SpinStructureTwist, clifford_coefficients

MAX_CFL = 0.9
# charge growth beyond this factor over the physical bound Q(0) exp(2 |lambda| t)
# is treated as numerical instability
BLOWUP_FACTOR = 10.0
# step for differentiating the background in time (fourth-order central)
TIME_DERIVATIVE_STEP = 1e-3

Background = Callable[[float, np.ndarray], np.ndarray]


def flat_background(t: float, x: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(x) + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = -1.0
    return out


@dataclass(frozen=True, eq=False)
class EvolutionConfig:
    n: int
    steps: int
    cfl: float = 0.5
    twist: float = 0.0
    lam: float = 0.0
    stride: int = 1
    background: Background | None = None
    static: bool = True
    potential: Callable[[float, np.ndarray], np.ndarray] | None = None
    charge: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.cfl <= MAX_CFL):
            raise ValueError(f"CFL fraction must lie in (0, {MAX_CFL}], got {self.cfl}")
        if self.steps < 0 or self.stride < 1:
            raise ValueError("steps must be >= 0 and stride >= 1")
        SpinStructureTwist((self.twist,))
        self.grid  # validates n
        g = self.metric_at(0.0)
        if np.any(g[..., 0, 0] <= 0) or np.any(np.linalg.inv(g)[..., 1, 1] >= 0):
            raise ValueError("background is not globally hyperbolic for the coordinate slicing at t = 0")

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid((self.n,))

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.spacing[0]

    @property
    def spin_twist(self) -> SpinStructureTwist:
        return SpinStructureTwist((self.twist,))

    @property
    def rep(self):
        return build_rep(1, 1)

    def metric_at(self, t: float) -> np.ndarray:
        x = self.grid.coords()[0]
        bg = self.background or flat_background
        g = np.asarray(bg(t, x), dtype=float)
        if g.shape != (self.n, 2, 2):
            raise ValueError(f"background must return shape ({self.n}, 2, 2), got {g.shape}")
        return 0.5 * (g + np.swapaxes(g, -1, -2))


@dataclass(frozen=True, eq=False)
class _Slice:
    """Background data at one time: Clifford coefficients, connections, normal."""

    Ct_inv: np.ndarray
    Cx: np.ndarray
    Om_x: np.ndarray
    Om_t: np.ndarray
    normal_clifford: np.ndarray
    density: np.ndarray


def _time_derivative(f: Callable[[float], np.ndarray], t: float) -> np.ndarray:
    d = TIME_DERIVATIVE_STEP
    return (-f(t + 2 * d) + 8 * f(t + d) - 8 * f(t - d) + f(t - 2 * d)) / (12 * d)


def _slice(cfg: EvolutionConfig, t: float) -> _Slice:
    rep = cfg.rep
    grid = cfg.grid
    g = cfg.metric_at(t)
    ginv = np.linalg.inv(g)
    if np.any(g[..., 0, 0] <= 0) or np.any(ginv[..., 1, 1] >= 0):
        raise DegenerateFormError(f"coordinate slicing is not spacelike at t = {t}")
    E = reference_frame(g, rep.eta)
    if cfg.static:
        dgt = np.zeros_like(g)
        dEt = np.zeros_like(E)
    else:
        dgt = _time_derivative(cfg.metric_at, t)
        dEt = _time_derivative(lambda s: reference_frame(cfg.metric_at(s), rep.eta), t)
    dg = np.stack([partial_derivative(grid, g, 0), dgt], axis=1)  # [..., l, i, j] = d_l g_ij
    lowered = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    Gam = np.einsum("...kl,...lij->...kij", ginv, lowered)
    dE = np.stack([partial_derivative(grid, E, 0), dEt], axis=1)  # [..., k, l, a]
    nab = dE + np.einsum("...lkp,...pa->...kla", Gam, E)
    w = np.einsum("...kla,...lq,...qb->...kab", nab, g, E)
    w = 0.5 * (w - np.swapaxes(w, -1, -2))
    Om = lie_algebra_spinor(rep, rep.epsilon[:, None] * np.swapaxes(w, -1, -2))
    C = clifford_coefficients(rep, E)
    # future unit normal nu^k = -g^{k t} / sqrt(-g^{tt}) in frame components
    nu = -ginv[..., :, 1] / np.sqrt(-ginv[..., 1, 1])[..., None]
    nu_frame = np.einsum("...ak,...k->...a", np.linalg.inv(E), nu)
    normal = np.einsum("...a,aij->...ij", nu_frame, rep.gammas)
    return _Slice(
        Ct_inv=np.linalg.inv(C[:, 1]),
        Cx=C[:, 0],
        Om_x=Om[:, 0],
        Om_t=Om[:, 1],
        normal_clifford=normal,
        density=np.sqrt(g[..., 0, 0]),
    )


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray
    step_times: np.ndarray
    charge: np.ndarray
    max_norm: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _apply(M: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", M, psi)


def slice_charge(cfg: EvolutionConfig, sl: _Slice, psi: np.ndarray) -> float:
    """``int <nu . psi, psi> dv`` over the slice (real for signature (1, 1))."""
    rep = cfg.rep
    dens = np.einsum("...i,ij,...j->...", psi.conj(), rep.B, _apply(sl.normal_clifford, psi))
    return float(np.real(np.sum(dens * sl.density)) * cfg.grid.spacing[0])


def evolve_dirac(cfg: EvolutionConfig, psi0: np.ndarray) -> EvolutionResult:
    """RK4 evolution of ``psi0`` (shape ``(n, 2)``) for ``cfg.steps`` steps of size ``cfg.dt``."""
    rep = cfg.rep
    grid = cfg.grid
    psi = np.asarray(getattr(psi0, "values", psi0), dtype=complex)
    if psi.shape != (cfg.n, rep.N):
        raise ValueError(f"initial spinor must have shape ({cfg.n}, {rep.N}), got {psi.shape}")
    phase = cfg.spin_twist.phases[0]
    x = grid.coords()[0]
    cache: dict[float, _Slice] = {}

    def slice_at(t: float) -> _Slice:
        key = 0.0 if cfg.static else t
        if key not in cache:
            if not cfg.static:
                cache.clear()
            cache[key] = _slice(cfg, t)
        return cache[key]

    def potential_at(t: float) -> np.ndarray | None:
        if cfg.potential is None or cfg.charge == 0:
            return None
        return 1j * cfg.charge * np.asarray(cfg.potential(t, x), dtype=float)

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        sl = slice_at(t)
        du = partial_derivative(grid, u, 0, phase) + _apply(sl.Om_x, u)
        tt = _apply(sl.Om_t, u)
        P = potential_at(t)
        if P is not None:
            du = du + P[:, 0, None] * u
            tt = tt + P[:, 1, None] * u
        return _apply(sl.Ct_inv, cfg.lam * u - _apply(sl.Cx, du)) - tt

    dt = cfg.dt
    charges = [slice_charge(cfg, slice_at(0.0), psi)]
    norms = [float(np.max(np.abs(psi), initial=0.0))]
    times, states = [0.0], [psi.copy()]
    q0 = abs(charges[0])
    for step in range(1, cfg.steps + 1):
        t = (step - 1) * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tn = step * dt
        q = slice_charge(cfg, slice_at(tn), psi)
        nrm = float(np.max(np.abs(psi)))
        if not np.isfinite(q) or not np.isfinite(nrm) or (q0 > 0 and abs(q) > BLOWUP_FACTOR * q0 * np.exp(2 * abs(cfg.lam) * tn)):
            raise CFLViolationError(f"charge blow-up at step {step} (t = {tn:.6g}); reduce the CFL fraction")
        charges.append(q)
        norms.append(nrm)
        if step % cfg.stride == 0 or step == cfg.steps:
            times.append(tn)
            states.append(psi.copy())
    charge = np.array(charges)
    drift = float(np.max(np.abs(charge - charge[0])) / abs(charge[0])) if charge[0] != 0 else 0.0
    return EvolutionResult(
        times=np.array(times),
        states=np.array(states),
        step_times=dt * np.arange(cfg.steps + 1),
        charge=charge,
        max_norm=np.array(norms),
        diagnostics={"dt": dt, "steps": cfg.steps, "charge_drift": drift},
    )


def plane_wave_solution(cfg: EvolutionConfig, k: float, v, t: float) -> np.ndarray:
    """Exact solution on the flat cylinder with data ``exp(i k x) v``.

    ``psi(t) = exp(i k x) expm(t M) v`` with ``M = C_t^{-1}(lambda - i k C_x)``.
    """
    rep = cfg.rep
    Cx = rep.epsilon[0] * rep.gammas[0]
    Ct = rep.epsilon[1] * rep.gammas[1]
    M = np.linalg.solve(Ct, cfg.lam * np.eye(rep.N) - 1j * k * Cx)
    x = cfg.grid.coords()[0]
    return np.exp(1j * k * x)[:, None] * (scipy.linalg.expm(t * M) @ np.asarray(v, dtype=complex))[None, :]
