import numpy as np
import pytest

from spinlab.clifford import build_rep, spinor_inner
from spinlab.errors import NotJoinableError, TwistMismatchError
from spinlab.grid import MetricField, TorusGrid, gradient, partial_derivative
from spinlab.spinors import (
    MetricPath,
    SpinorField,
    SpinStructureTwist,
    UniversalSection,
    beta_diagnostics,
    beta_lift,
    beta_transport,
    clifford_multiply,
    connection_matrices,
    covariant_derivative,
    dirac,
    dirac_potential,
    dirac_pullback,
    dirac_pullback_conjugated,
    dirac_spectrum,
    flat_torus_spectrum,
    frame_correspondence,
    frame_field,
    frame_residual,
    potential_form_gap,
    rep_for,
    spin_connection,
    universal_dirac,
    vertical_derivative,
)
from conftest import anisotropic_metric, riemannian_pair, smooth_spd_field

HALF = SpinStructureTwist((0.5, 0.0))


def sample_spinors(grid: TorusGrid, rep, twist=HALF):
    x, y = grid.coords()
    carrier = np.exp(0.5j * x)[..., None]
    psi = SpinorField(grid, rep, twist, carrier * np.stack([np.cos(y) + 0.3j * np.sin(x + y), 0.5 + 0.2 * np.sin(2 * y)], -1))
    phi = SpinorField(grid, rep, twist, carrier * np.stack([np.sin(x - y), 1j * np.cos(x)], -1))
    return psi, phi


def compatibility_data(n):
    grid = TorusGrid((n, n))
    x, y = grid.coords()
    g = MetricField(grid, smooth_spd_field(grid), (2, 0))
    psi, phi = sample_spinors(grid, build_rep(2, 0))
    X = np.stack([np.cos(y), 0.5 + np.sin(x)], -1)
    return g, psi, phi, X


def leibniz_residual(n):
    g, psi, _, X = compatibility_data(n)
    x, y = g.grid.coords()
    f = np.sin(x) * np.cos(y)
    Xf = X[..., 0] * np.cos(x) * np.cos(y) - X[..., 1] * np.sin(x) * np.sin(y)
    lhs = covariant_derivative(g, psi.with_values(f[..., None] * psi.values), X).values
    rhs = Xf[..., None] * psi.values + f[..., None] * covariant_derivative(g, psi, X).values
    return float(np.max(np.abs(lhs - rhs)))


def compatibility_residual(n):
    g, psi, phi, X = compatibility_data(n)
    rep = psi.rep
    ip = spinor_inner(rep, psi.values, phi.values)
    lhs = np.einsum("...k,...k->...", X, gradient(g.grid, ip))
    rhs = spinor_inner(rep, covariant_derivative(g, psi, X).values, phi.values) + spinor_inner(
        rep, psi.values, covariant_derivative(g, phi, X).values
    )
    return float(np.max(np.abs(lhs - rhs)))


def test_twist_and_plane_wave_validation():
    with pytest.raises(ValueError):
        SpinStructureTwist((0.25,))
    grid = TorusGrid((16,))
    with pytest.raises(TwistMismatchError):
        SpinorField.plane_wave(grid, build_rep(1, 0), SpinStructureTwist((0.5,)), [1.0], [1.0])


def test_frame_examples():
    grid = TorusGrid((32, 32))
    x, y = grid.coords()
    np.testing.assert_allclose(frame_field(MetricField.flat(grid)), np.broadcast_to(np.eye(2), grid.shape + (2, 2)))
    u = 0.3 * np.sin(x) * np.cos(y)
    E = frame_field(MetricField.conformal(grid, u))
    np.testing.assert_allclose(E, np.exp(-u)[..., None, None] * np.eye(2), atol=1e-14)
    assert frame_residual(MetricField(grid, smooth_spd_field(grid), (2, 0))) < 1e-14
    assert frame_residual(MetricField(grid, np.diag([1.0, -1.0]) + 0.1 * smooth_spd_field(grid) - 0.1 * np.eye(2), (1, 1))) < 1e-14


def test_spin_connection_examples():
    grid = TorusGrid((64, 64))
    assert np.max(np.abs(spin_connection(MetricField.flat(grid)))) == 0
    x, y = grid.coords()
    u = 0.3 * np.sin(x) * np.cos(y)
    w = spin_connection(MetricField.conformal(grid, u))
    # w[a, b, c] = g(nabla_{e_c} e_a, e_b): w_12(e_1) = -e^{-u} d_2 u
    np.testing.assert_allclose(w[..., 0, 1, 0], -np.exp(-u) * (-0.3 * np.sin(x) * np.sin(y)), atol=1e-5)
    w = spin_connection(MetricField(grid, smooth_spd_field(grid), (2, 0)))
    assert np.max(np.abs(w + np.swapaxes(w, -3, -2))) < 1e-15


def test_covariant_derivative_flat_constant():
    grid = TorusGrid((16, 16))
    psi = SpinorField(grid, build_rep(2, 0), SpinStructureTwist.periodic(2), np.ones(grid.shape + (2,)) * [1.0, 2j])
    assert np.max(np.abs(covariant_derivative(MetricField.flat(grid), psi, [1.0, -0.5]).values)) < 1e-14


def test_leibniz_at_stencil_level():
    # the zero-order part is tensorial: nabla(f psi) - f nabla psi is the bare stencil commutator
    g, psi, _, X = compatibility_data(64)
    x, y = g.grid.coords()
    f = np.sin(x) * np.cos(y)
    fpsi = f[..., None] * psi.values
    lhs = covariant_derivative(g, psi.with_values(fpsi), X).values - f[..., None] * covariant_derivative(g, psi, X).values
    d = lambda v: sum(X[..., k, None] * partial_derivative(g.grid, v, k, psi.twist.phases[k]) for k in range(2))
    assert np.max(np.abs(lhs - (d(fpsi) - f[..., None] * d(psi.values)))) <= 1e-8


def test_leibniz_converges_fourth_order():
    r32, r64 = leibniz_residual(32), leibniz_residual(64)
    assert r32 / r64 > 14


@pytest.mark.xfail(strict=True, reason="continuum Leibniz rule carries the O(h^4) stencil error (about 1e-4 at n = 64)")
def test_leibniz_continuum_literal_tolerance():
    assert leibniz_residual(64) <= 1e-8


def test_connection_matrices_are_metric():
    for sig in [(2, 0), (1, 1)]:
        grid = TorusGrid((32, 32))
        vals = smooth_spd_field(grid) if sig == (2, 0) else np.diag([1.0, -1.0]) + 0.1 * (smooth_spd_field(grid) - np.eye(2))
        g = MetricField(grid, vals, sig)
        rep = rep_for(g)
        Om = connection_matrices(g)
        skew = np.swapaxes(Om.conj(), -1, -2) @ rep.B + rep.B @ Om
        assert np.max(np.abs(skew)) <= 1e-13


def test_metric_compatibility_converges_fourth_order():
    r32, r64 = compatibility_residual(32), compatibility_residual(64)
    assert r32 / r64 > 14


@pytest.mark.xfail(strict=True, reason="finite-difference left side carries the O(h^4) stencil error (about 8e-5 at n = 64)")
def test_metric_compatibility_literal_tolerance():
    assert compatibility_residual(64) <= 1e-7


def clifford_compatibility_residual(n):
    g, psi, _, X = compatibility_data(n)
    x, y = g.grid.coords()
    W = np.stack([np.sin(x + y), 0.3 + np.cos(y)], -1)
    # dW[..., i, k] = d_k W^i
    dW = np.stack([np.stack([np.cos(x + y), np.cos(x + y)], -1), np.stack([0 * x, -np.sin(y)], -1)], -2)
    nabla_W = np.einsum("...ik,...k->...i", dW, X) + np.einsum("...ikj,...k,...j->...i", g.christoffels, X, W)
    lhs = covariant_derivative(g, clifford_multiply(g, W, psi), X).values
    rhs = clifford_multiply(g, nabla_W, psi).values + clifford_multiply(g, W, covariant_derivative(g, psi, X)).values
    return float(np.max(np.abs(lhs - rhs)))


def test_clifford_compatibility_converges_fourth_order():
    r32, r64 = clifford_compatibility_residual(32), clifford_compatibility_residual(64)
    assert r32 / r64 > 14


@pytest.mark.xfail(strict=True, reason="product rule of the stencil fails at O(h^4) (about 2e-4 at n = 64)")
def test_clifford_compatibility_literal_tolerance():
    assert clifford_compatibility_residual(64) <= 1e-7


def test_circle_plane_waves_are_eigenvectors():
    grid = TorusGrid((256,))
    rep = build_rep(1, 0)
    tw = SpinStructureTwist((0.5,))
    g = MetricField.flat(grid)
    for k in (-2.5, 0.5, 1.5, 3.5):
        psi = SpinorField.plane_wave(grid, rep, tw, [k], [1.0])
        lam = -(8 * np.sin(k * grid.spacing[0]) - np.sin(2 * k * grid.spacing[0])) / (6 * grid.spacing[0])
        np.testing.assert_allclose(dirac(g, psi).values, lam * psi.values, atol=1e-12)
        assert abs(lam + k) < 5e-3


def test_potential_zero_and_identity(rng):
    grid = TorusGrid((32, 32))
    g = MetricField(grid, smooth_spd_field(grid), (2, 0))
    psi, _ = sample_spinors(grid, build_rep(2, 0))
    np.testing.assert_array_equal(dirac_potential(g, np.zeros(grid.shape + (2,)), 0.8, psi).values, dirac(g, psi).values)
    A = rng.normal(size=grid.shape + (2,))
    gap = potential_form_gap(g, A, 0.8, psi)
    assert gap["clifford_form_relative_difference"] < 1e-13
    assert gap["minus_form_relative_difference"] > 1e-2


def gauge_residual(n):
    grid = TorusGrid((n,))
    (x,) = grid.coords()
    g = MetricField.conformal(grid, 0.2 * np.sin(x))
    psi = SpinorField(grid, build_rep(1, 0), SpinStructureTwist((0.5,)), np.exp(0.5j * x)[..., None] * (np.cos(x) + 0.3j)[..., None])
    A = (0.3 * np.cos(x))[..., None]
    q = 0.7
    f, df = np.sin(x), np.cos(x)[..., None]
    phase = np.exp(-1j * q * f)[..., None]
    lhs = dirac_potential(g, A + df, q, psi.with_values(phase * psi.values)).values
    return float(np.max(np.abs(lhs - phase * dirac_potential(g, A, q, psi).values)))


def test_gauge_covariance():
    assert gauge_residual(512) <= 1e-7
    assert gauge_residual(128) / gauge_residual(256) > 14


def test_universal_dirac():
    grid = TorusGrid((16, 16))
    g = MetricField.flat(grid)
    zero = SpinorField.zeros(grid, build_rep(2, 0), HALF)
    out = universal_dirac(UniversalSection(g, zero))
    assert out.metric is g and np.all(out.spinor.values == 0)
    h = MetricField(grid, smooth_spd_field(grid), (2, 0))
    psi, _ = sample_spinors(grid, build_rep(2, 0))
    out = universal_dirac(UniversalSection(h, psi))
    assert out.metric is h
    np.testing.assert_array_equal(out.spinor.values, dirac(h, psi).values)


def test_beta_examples():
    g, h = riemannian_pair(32)
    psi, phi = sample_spinors(g.grid, build_rep(2, 0))
    lam = beta_lift(MetricPath(g, g))
    np.testing.assert_allclose(lam, np.broadcast_to(np.eye(2), lam.shape), atol=1e-15)
    x, y = g.grid.coords()
    conf = MetricField.conformal(g.grid, 0.3 * np.cos(x + y))
    flat = MetricField.flat(g.grid)
    np.testing.assert_allclose(beta_transport(MetricPath(flat, conf), psi).values, psi.values, atol=1e-14)
    X = np.stack([np.cos(y), np.sin(x)], -1)
    diag = beta_diagnostics(g, h, psi, phi, X)
    assert max(diag.values()) <= 1e-9


def test_beta_intertwining_lorentzian():
    grid = TorusGrid((24, 24))
    eta = np.diag([1.0, -1.0])
    g = MetricField(grid, eta + 0.1 * (smooth_spd_field(grid) - np.eye(2)), (1, 1))
    h = MetricField(grid, g.values + 0.1 * (smooth_spd_field(grid, 0.2, 1.0) - np.eye(2)), (1, 1))
    psi, phi = sample_spinors(grid, build_rep(1, 1))
    x, y = grid.coords()
    P = MetricPath(g, h)
    V = np.stack([np.sin(x + y), 0.3 + np.cos(y)], -1)
    lhs = beta_transport(P, clifford_multiply(g, V, psi)).values
    rhs = clifford_multiply(h, np.einsum("...ij,...j->...i", frame_correspondence(P), V), beta_transport(P, psi)).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_path_rejects_non_joinable():
    grid = TorusGrid((8, 8))
    g = MetricField.flat(grid, (1, 1))
    h = MetricField(grid, np.broadcast_to(np.diag([-1.0, 1.0]), grid.shape + (2, 2)), (1, 1), validate=False)
    with pytest.raises(NotJoinableError):
        MetricPath(g, h)


def test_pullback_identity_pair():
    grid = TorusGrid((32, 32))
    g = MetricField(grid, smooth_spd_field(grid), (2, 0))
    psi, _ = sample_spinors(grid, build_rep(2, 0))
    np.testing.assert_allclose(dirac_pullback(g, g, psi).values, dirac(g, psi).values, atol=1e-13)


def test_pullback_constant_metric_plane_waves():
    grid = TorusGrid((32, 32))
    rep = build_rep(2, 0)
    g = MetricField.flat(grid)
    H = np.diag([2.0, 0.5])
    h = MetricField.constant(grid, H)
    k = np.array([1.5, -2.0])
    tw = SpinStructureTwist((0.5, 0.0))
    M = np.zeros((2, 2), dtype=complex)
    for c in range(2):
        v = np.eye(2)[c]
        psi = SpinorField.plane_wave(grid, rep, tw, k, v)
        out = dirac_pullback(g, h, psi).values / psi.values.sum(axis=-1, keepdims=True)
        M[:, c] = out[3, 5]
    hgrid = grid.spacing
    kt = (8 * np.sin(k * hgrid) - np.sin(2 * k * hgrid)) / (6 * hgrid)
    mag = np.sqrt(kt @ np.linalg.inv(H) @ kt)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(M).real), [-mag, mag], atol=1e-12)
    assert np.max(np.abs(np.linalg.eigvals(M).imag)) < 1e-12


def pullback_gap(n, kind):
    grid = TorusGrid((n, n))
    g = anisotropic_metric(grid)
    x, y = grid.coords()
    if kind == "conformal":
        h = MetricField(grid, np.exp(0.4 * np.sin(x) * np.cos(y))[..., None, None] * g.values, (2, 0))
    else:
        h = MetricField.constant(grid, [[1.5, 0.3], [0.3, 0.8]])
    psi, _ = sample_spinors(grid, build_rep(2, 0))
    a = dirac_pullback(g, h, psi).values
    b = dirac_pullback_conjugated(g, h, psi).values
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@pytest.mark.parametrize("kind", ["conformal", "constant"])
def test_pullback_matches_conjugation(kind):
    assert pullback_gap(64, kind) <= 1e-3


def test_pullback_gap_decays_fourth_order():
    assert pullback_gap(32, "constant") / pullback_gap(64, "constant") > 14


def test_vertical_derivative_examples():
    g, h = riemannian_pair(16)
    path = MetricPath(g, h, samples=4)
    psi, phi = sample_spinors(g.grid, build_rep(2, 0))

    def transported(t):
        return beta_transport(MetricPath(g, path.at(t), samples=4), psi).values

    assert np.max(np.abs(vertical_derivative(path, transported, 0.4))) <= 1e-7
    const = MetricPath(g, g, samples=2)
    np.testing.assert_allclose(vertical_derivative(const, lambda t: np.sin(t) * psi.values, 0.3), np.cos(0.3) * psi.values, atol=1e-9)

    def moving(base, w):
        return lambda t: beta_transport(MetricPath(g, path.at(t), samples=4), base.with_values(base.values * np.exp(w * t))).values

    a, b = moving(psi, 0.7j), moving(phi, -0.4)
    t, e = 0.5, 1e-3
    rep = psi.rep
    lhs = (spinor_inner(rep, a(t + e), b(t + e)) - spinor_inner(rep, a(t - e), b(t - e))) / (2 * e)
    rhs = spinor_inner(rep, vertical_derivative(path, a, t), b(t)) + spinor_inner(rep, a(t), vertical_derivative(path, b, t))
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_spectrum_circle():
    grid = TorusGrid((256,))
    g = MetricField.flat(grid)
    res = dirac_spectrum(g, SpinStructureTwist((0.5,)), 22)
    exact = flat_torus_spectrum(1, SpinStructureTwist((0.5,)), 10.5)
    np.testing.assert_allclose(res.eigenvalues, exact, atol=5e-3)
    per = dirac_spectrum(MetricField.flat(TorusGrid((64,))), SpinStructureTwist((0.0,)), 3)
    assert np.sum(np.abs(per.eigenvalues) < 1e-10) == build_rep(1, 0).N


def test_spectrum_torus_both_twists():
    grid = TorusGrid((32, 32))
    tw = SpinStructureTwist((0.5, 0.5))
    res = dirac_spectrum(MetricField.flat(grid), tw, 24)
    exact = flat_torus_spectrum(2, tw, 1.6)
    assert len(exact) == 24
    np.testing.assert_allclose(res.eigenvalues, exact, atol=2e-3)
