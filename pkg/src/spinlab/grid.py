"""Finite-difference calculus on the flat-coordinate m-torus.

Grid fields are numpy arrays of shape ``grid.shape + component_shape``.
Point ``j`` along direction ``k`` has coordinate ``x_k = j * h_k`` with
``h_k = 2 pi / n_k``.  Derivatives use the periodic 4th-order central
stencil; an optional boundary phase ``exp(2 pi i delta)`` is applied to the
values that wrap around, which is how spin-structure twists enter.

Index conventions: ``dg[..., l, i, j] = d_l g_ij``,
``Gamma[..., k, i, j] = Gamma^k_ij`` and two-forms are antisymmetric
``(m, m)`` component arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from spinlab.errors import DegenerateFormError, DimensionMismatchError, NotJoinableError
from spinlab.metric import DEGENERACY_FLOOR, joinable_mask, reference_frame, signature_matrix

_STENCIL = ((1, 8.0 / 12.0), (2, -1.0 / 12.0))


@dataclass(frozen=True)
class TorusGrid:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes:
            raise ValueError("grid needs at least one direction")
        for n in sizes:
            if n < 8 or n % 2:
                raise ValueError(f"grid sizes must be even and at least 8, got {n}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def spacing(self) -> np.ndarray:
        return 2 * np.pi / np.array(self.sizes, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays ``x_1, ..., x_m``, each of shape ``grid.shape``."""
        axes = [np.arange(n) * (2 * np.pi / n) for n in self.sizes]
        return np.meshgrid(*axes, indexing="ij")

    def check(self, values: np.ndarray, comp_ndim: int | None = None) -> np.ndarray:
        values = np.asarray(values)
        if values.shape[: self.m] != self.shape:
            raise DimensionMismatchError(f"field shape {values.shape} does not start with grid shape {self.shape}")
        if comp_ndim is not None and values.ndim != self.m + comp_ndim:
            raise DimensionMismatchError(f"expected {comp_ndim} component axes, got {values.ndim - self.m}")
        return values


def _shift(f: np.ndarray, axis: int, offset: int, phase: complex) -> np.ndarray:
    """Values at ``j + offset`` along ``axis``, with the boundary phase on wrapped entries."""
    out = np.roll(f, -offset, axis=axis)
    if phase == 1.0:
        return out
    n = f.shape[axis]
    idx = [slice(None)] * f.ndim
    if offset > 0:
        idx[axis] = slice(n - offset, n)
        out[tuple(idx)] *= phase
    else:
        idx[axis] = slice(0, -offset)
        out[tuple(idx)] /= phase
    return out


def partial_derivative(grid: TorusGrid, f: np.ndarray, direction: int, phase: complex = 1.0) -> np.ndarray:
    """4th-order periodic central difference of ``f`` along ``direction``.

    ``phase`` is the factor picked up by the field across the seam,
    ``f(x + 2 pi e_k) = phase * f(x)``.
    """
    f = grid.check(f)
    if not 0 <= direction < grid.m:
        raise ValueError(f"direction {direction} out of range for m = {grid.m}")
    if phase != 1.0:
        f = f.astype(complex)
    out = np.zeros_like(f)
    for off, c in _STENCIL:
        out = out + c * (_shift(f, direction, off, phase) - _shift(f, direction, -off, phase))
    return out / grid.spacing[direction]


def gradient(grid: TorusGrid, f: np.ndarray, phase=None) -> np.ndarray:
    """All partial derivatives stacked on a new axis right after the grid axes."""
    phases = [1.0] * grid.m if phase is None else list(phase)
    return np.stack([partial_derivative(grid, f, k, phases[k]) for k in range(grid.m)], axis=grid.m)


@dataclass(frozen=True, eq=False)
class MetricField:
    """A grid of nondegenerate symmetric forms of constant signature ``(r, s)``.

    Every point must be joinable to ``eta = diag(eps)`` so that the reference
    frame ``b_{eta, g}`` exists.
    """

    grid: TorusGrid
    values: np.ndarray
    signature: tuple[int, int]
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        m = self.grid.m
        if vals.shape != self.grid.shape + (m, m):
            raise DimensionMismatchError(f"metric values must have shape {self.grid.shape + (m, m)}")
        r, s = (int(v) for v in self.signature)
        if r + s != m:
            raise DimensionMismatchError(f"signature ({r}, {s}) does not match dimension {m}")
        if np.max(np.abs(vals - np.swapaxes(vals, -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(vals))):
            raise ValueError("metric field is not symmetric")
        vals = 0.5 * (vals + np.swapaxes(vals, -1, -2))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "signature", (r, s))
        if self.validate:
            w = np.linalg.eigvalsh(vals)
            scale = np.max(np.abs(w), axis=-1, keepdims=True)
            if np.any(np.abs(w) < DEGENERACY_FLOOR * scale):
                raise DegenerateFormError("metric field is degenerate somewhere on the grid")
            if np.any(np.sum(w > 0, axis=-1) != r):
                raise ValueError(f"metric field does not have signature ({r}, {s}) everywhere")
            if not np.all(joinable_mask(np.broadcast_to(self.eta, vals.shape), vals)):
                raise NotJoinableError("metric field is not joinable to the flat reference form")

    @classmethod
    def flat(cls, grid: TorusGrid, signature: tuple[int, int] | None = None) -> "MetricField":
        r, s = signature if signature is not None else (grid.m, 0)
        vals = np.broadcast_to(signature_matrix(r, s), grid.shape + (grid.m, grid.m))
        return cls(grid, vals, (r, s))

    @classmethod
    def constant(cls, grid: TorusGrid, matrix, signature: tuple[int, int] | None = None) -> "MetricField":
        matrix = np.asarray(matrix, dtype=float)
        if signature is None:
            w = np.linalg.eigvalsh(matrix)
            signature = (int(np.sum(w > 0)), int(np.sum(w < 0)))
        return cls(grid, np.broadcast_to(matrix, grid.shape + matrix.shape), signature)

    @classmethod
    def conformal(cls, grid: TorusGrid, u: np.ndarray, signature: tuple[int, int] | None = None) -> "MetricField":
        """``e^{2u} eta``."""
        r, s = signature if signature is not None else (grid.m, 0)
        u = grid.check(u, 0)
        return cls(grid, np.exp(2 * u)[..., None, None] * signature_matrix(r, s), (r, s))

    @property
    def eta(self) -> np.ndarray:
        return signature_matrix(*self.signature)

    @property
    def epsilon(self) -> np.ndarray:
        return np.diag(self.eta).copy()

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.values)

    @cached_property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.values)

    @cached_property
    def volume_density(self) -> np.ndarray:
        return np.sqrt(np.abs(self.det))

    @cached_property
    def frame(self) -> np.ndarray:
        """``frame[..., k, a]``: coordinate components of ``e_a = b_{eta,g}(d_a)``."""
        return reference_frame(self.values, self.eta)

    @cached_property
    def coframe(self) -> np.ndarray:
        """Inverse of :attr:`frame`; row ``a`` gives the frame components ``e^a(d_k)``."""
        return np.linalg.inv(self.frame)

    @cached_property
    def derivatives(self) -> np.ndarray:
        return gradient(self.grid, self.values)

    @cached_property
    def christoffels(self) -> np.ndarray:
        dg = self.derivatives
        # lowered[..., l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        lowered = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
        return np.einsum("...kl,...lij->...kij", self.inverse, lowered)


def christoffels(g: MetricField) -> np.ndarray:
    """``Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)``."""
    return g.christoffels


def curvature(g: MetricField) -> tuple[np.ndarray, np.ndarray]:
    """Ricci tensor and scalar curvature (round spheres have positive scal).

    ``Ric_bd = d_a Gamma^a_db - d_d Gamma^a_ab + Gamma^a_ae Gamma^e_db - Gamma^a_de Gamma^e_ab``.
    """
    G = g.christoffels
    dG = gradient(g.grid, G)  # dG[..., c, k, i, j] = d_c Gamma^k_ij
    ric = np.einsum("...aadb->...db", dG)
    trace = np.einsum("...aab->...b", G)
    ric = ric - gradient(g.grid, trace)  # [..., d, b] = d_d Gamma^a_ab
    ric = ric + np.einsum("...e,...edb->...db", trace, G) - np.einsum("...ade,...eab->...db", G, G)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    scal = np.einsum("...ij,...ij->...", g.inverse, ric)
    return ric, scal


def exterior_d(grid: TorusGrid, A: np.ndarray) -> np.ndarray:
    """``F_ij = d_i A_j - d_j A_i``."""
    A = grid.check(A, 1)
    dA = gradient(grid, A)
    return dA - np.swapaxes(dA, -1, -2)


def raise_two_form(g: MetricField, F: np.ndarray) -> np.ndarray:
    return np.einsum("...ik,...jl,...kl->...ij", g.inverse, g.inverse, F)


def codifferential(g: MetricField, F: np.ndarray) -> np.ndarray:
    """``(delta F)_j = -|g|^{-1/2} d_i(|g|^{1/2} F^{il})`` lowered with ``g``.

    With this sign ``delta`` is the formal adjoint of ``d`` for the pairing
    :func:`form_inner` (on flat space ``(delta F)_j = -d^i F_ij``).
    """
    F = g.grid.check(F, 2)
    flux = g.volume_density[..., None, None] * raise_two_form(g, F)
    div = sum(partial_derivative(g.grid, flux[..., i, :], i) for i in range(g.grid.m))
    up = -div / g.volume_density[..., None]
    return np.einsum("...jl,...l->...j", g.values, up)


def form_inner(g: MetricField, F: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Pointwise inner product of two-forms, ``1/2 F_ij H^ij``."""
    return 0.5 * np.einsum("...ij,...ij->...", F, raise_two_form(g, H))


def one_form_inner(g: MetricField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", a, g.inverse, b)


def volume_integrate(g: MetricField, f: np.ndarray) -> complex | float:
    """``sum f |det g|^{1/2} prod h_i`` with a fixed (row-major) summation order."""
    f = g.grid.check(f, 0)
    total = np.sum((f * g.volume_density).ravel()) * g.grid.cell_volume
    return total.item()


def field_to_json(grid: TorusGrid, values: np.ndarray, **extra) -> dict:
    """Grid field as ``{"grid": {"sizes": [...]}, "components": nested lists}``.

    Complex entries are written as ``[re, im]`` pairs.
    """
    values = grid.check(values)
    if np.iscomplexobj(values):
        comps = np.stack([values.real, values.imag], axis=-1).tolist()
        kind = "complex"
    else:
        comps = values.tolist()
        kind = "real"
    out = {"grid": {"sizes": list(grid.sizes)}, "dtype": kind, "components": comps}
    out.update(extra)
    return out


def field_from_json(data: dict) -> tuple[TorusGrid, np.ndarray]:
    grid = TorusGrid(tuple(data["grid"]["sizes"]))
    arr = np.asarray(data["components"], dtype=float)
    if data.get("dtype", "real") == "complex":
        if arr.shape[-1] != 2:
            raise ValueError("complex components must be [re, im] pairs")
        arr = arr[..., 0] + 1j * arr[..., 1]
    return grid, grid.check(arr)
