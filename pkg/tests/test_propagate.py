import math

import numpy as np
import pytest
from scipy.special import spherical_jn

from sparsewave.errors import ResolutionError
from sparsewave.greens import SourceSpec, free_amplitude, kappa
from sparsewave.operators import o_t_apply, o_t_eigenvalue, o_t_eigenvalues
from sparsewave.potential import HarmonicProfile, LayerSpec, RadialProfile, SparsePotential
from sparsewave.propagate import (
    apriori_envelope,
    duhamel_linear_check,
    evolution_solve,
    layer_transfer,
    parametrix_residual,
    propagate_recursion,
)
from sparsewave.spectral import reduced_amplitude
from sparsewave.sphere import SphericalField, build_grid


def random_field(L, seed, band=None):
    g = build_grid(L)
    rng = np.random.default_rng(seed)
    c = (rng.normal(size=g.zeros().shape) + 1j * rng.normal(size=g.zeros().shape)) * g.mask
    if band is not None:
        c[band + 1:] = 0
    return SphericalField.from_coeffs(g, c)


def modulated(R, m, l, v):
    return LayerSpec(R, HarmonicProfile(((m, l, RadialProfile.constant(v)),)))


# ---- O_t and its spectrum ----

@pytest.mark.parametrize("k,t", [(1.0, 3.0), (1 + 0.5j, 2.0), (2 - 0j, 7.5)])
def test_degree_zero_eigenvalue(k, t):
    k = complex(k)
    assert abs(o_t_eigenvalue(0, t, k) - (np.exp(2j * k * t) - 1) / (2j * k)) < 1e-13


def test_eigenvalues_match_scipy_bessel():
    for k in (1.0, 0.7 + 0.3j):
        for t in (0.5, 4.0, 15.0):
            lam = o_t_eigenvalues(16, t, k)
            m = np.arange(17)
            ref = t * np.exp(1j * k * t) * (-1j) ** m * spherical_jn(m, k * t)
            np.testing.assert_allclose(lam, ref, rtol=1e-10, atol=1e-14)


def test_degree_one_small_argument():
    k, t = 1.0 + 0.5j, 1e-3
    approx = t * np.exp(1j * k * t) * (-1j) * k * t / 3
    assert abs(o_t_eigenvalue(1, t, k) - approx) < 1e-6 * abs(approx)


def test_eigenvalues_stable_for_large_argument():
    lam = o_t_eigenvalues(64, 1e4, 1 + 0.5j)
    assert np.all(np.isfinite(lam))
    assert abs(-2j * (1 + 0.5j) * lam[0] - 1) < 1e-12


def test_quadrature_route_matches_diagonal():
    f = random_field(24, 0, band=12)
    for k, t in [(1.0, 5.0), (1 + 0.2j, 10.0), (2.0, 9.5)]:
        a = o_t_apply(f, t, k, route="quadrature").values
        b = o_t_apply(f, t, k, route="diagonal").values
        assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(b))


def test_pure_harmonic_does_not_leak():
    g = build_grid(16)
    y = SphericalField.harmonic(g, 3, -2)
    out = o_t_apply(y, 4.0, 1.5, route="quadrature").coeffs
    lam = out[3, 16 - 2]
    out[3, 16 - 2] = 0
    assert np.max(np.abs(out)) < 1e-10
    assert abs(lam - o_t_eigenvalue(3, 4.0, 1.5)) < 1e-10


def test_quadrature_needs_resolution():
    f = random_field(8, 1)
    with pytest.raises(ResolutionError):
        o_t_apply(f, 30.0, 1.0, route="quadrature")
    # the diagonal route has no such limit
    assert np.all(np.isfinite(o_t_apply(f, 30.0, 1.0).values))


# ---- parametrix ----

def test_parametrix_degree_zero_is_exponential():
    k = 1 + 0.5j
    for t in (1.0, 3.0, 20.0):
        assert abs(parametrix_residual(0, t, k) - math.exp(-2 * k.imag * t)) < 1e-12


def test_parametrix_decays_like_inverse_t():
    k = 1 + 0.5j
    ts = np.geomspace(1e2, 1e4, 7)
    for m in range(1, 9):
        r = np.array([parametrix_residual(m, t, k) for t in ts])
        assert np.polyfit(np.log(ts), np.log(r), 1)[0] <= -0.9
        assert r[-1] < r[0]


def test_parametrix_requires_t_at_least_one():
    with pytest.raises(ValueError):
        parametrix_residual(1, 0.5, 1 + 0.5j)


# ---- one-layer transfer ----

def test_transfer_of_zero_layer_is_identity():
    f = random_field(8, 2)
    out = layer_transfer(f, LayerSpec.symmetric(20.0, 0.0), 1 + 0.3j)
    np.testing.assert_array_equal(out.values, f.values)


def test_symmetric_transfer_close_to_kappa():
    g = build_grid(8)
    k = 1 + 0.3j
    one = SphericalField.constant(g, 1.0)
    layer = LayerSpec.symmetric(20.0, 1e-2)
    # on constants O_t acts by lambda_0, so the transfer is exactly 1 - kappa
    exact = layer_transfer(one, layer, k).values - (1.0 - kappa(layer, k, g)).values
    assert np.max(np.abs(exact)) < 1e-14
    # slowly varying f: the gap comes from lambda_1 - lambda_0 on the degree-1 part, linear in v
    f = one + 0.1 * SphericalField.harmonic(g, 1, 0)
    gaps = []
    for v in (1e-2, 5e-3):
        layer = LayerSpec.symmetric(20.0, v)
        approx = (1.0 - kappa(layer, k, g)) * f
        gaps.append(np.max(np.abs(layer_transfer(f, layer, k).values - approx.values)) / v)
    assert gaps[0] == pytest.approx(gaps[1], rel=1e-8)
    assert gaps[0] < 1e-2


def test_modulated_transfers_do_not_commute():
    g = build_grid(10)
    k = 1 + 0.3j
    f = random_field(10, 3, band=3)
    a, b = modulated(20.0, 1, 0, 0.3), modulated(20.0, 2, 1, 0.3)
    ab = layer_transfer(layer_transfer(f, b, k), a, k).values
    ba = layer_transfer(layer_transfer(f, a, k), b, k).values
    assert np.max(np.abs(ab - ba)) > 1e-12 * 10 * np.max(np.abs(ab))


# ---- recursion ----

def test_recursion_without_potential():
    g = build_grid(8)
    f = SourceSpec.ball_indicator()
    recs = propagate_recursion(f, SparsePotential(), 1 + 0.3j, g)
    A0 = free_amplitude(f, 1 + 0.3j, g)
    assert len(recs) == 1
    assert recs[0].nu == 0.0
    np.testing.assert_array_equal(recs[0].A.values, A0.values)
    np.testing.assert_array_equal(recs[0].wkb.values, 1.0)


def test_recursion_against_radial_oracle():
    g = build_grid(8)
    f = SourceSpec.ball_indicator()
    k = 1 + 0.3j
    pot = SparsePotential.symmetric([20.0, 60.0], [0.2, 0.1])
    dev, nu = [], []
    for c in (1.0, 0.5):
        recs = propagate_recursion(f, pot.scaled(c), k, g)
        for r in recs:
            assert np.max(np.abs((r.reduced * r.wkb).values - r.A.values)) < 1e-12 * r.A.sup_norm()
        dev.append(max(np.max(np.abs(r.reduced.values - reduced_amplitude(f, pot.scaled(c).truncate(r.n), k)))
                       for r in recs))
        nu.append(max(r.nu for r in recs))
    assert dev[1] < dev[0] and nu[1] < nu[0]
    assert dev[0] < 1e-5


def test_recursion_requires_damping():
    with pytest.raises(ValueError):
        propagate_recursion(SourceSpec.ball_indicator(), SparsePotential(), 1.0, build_grid(4))


def test_envelope_structure():
    assert apriori_envelope(5, 0.5, 0.0, 0.3, 0.2, 100.0) == (0.3, 0.2)
    g = [apriori_envelope(n, 0.5, 0.01, 0.3, 0.2, 100.0)[0] for n in range(6)]
    assert all(a <= b for a, b in zip(g, g[1:]))
    gp = [apriori_envelope(3, 0.5, 0.01, 0.3, 0.2, R)[1] for R in (100.0, 200.0, 300.0)]
    assert gp[2] - gp[1] == pytest.approx(gp[1] - gp[0], rel=1e-12)
    # overflow reported as inf, not an exception
    assert math.isinf(apriori_envelope(10, 0.01, 1.0, 0.3, 0.2, 100.0)[0])


# ---- evolution family ----

def test_closed_form_evolution_matches_ode():
    f = random_field(8, 4)
    k, tau = 1.0 + 0.2j, 5.0
    closed = evolution_solve(f, None, k, tau, mode="closed")
    ode = evolution_solve(f, SparsePotential.symmetric([tau + 1.0], [0.0]), k, tau, mode="radial",
                          rtol=1e-12, atol=1e-15)
    assert np.max(np.abs(closed.coeffs - ode.coeffs)) < 1e-8


def test_degree_zero_evolution_is_scalar():
    g = build_grid(6)
    f = SphericalField.constant(g, 2.0)
    pot = SparsePotential.symmetric([10.0, 30.0], [0.3, -0.2])
    k = 1.3 + 0.1j
    U = evolution_solve(f, pot, k, 5.0, rtol=1e-12, atol=1e-15)
    integral = 0.3 - 0.2
    np.testing.assert_allclose(U.values, 2.0 * np.exp(integral / (2j * k)), rtol=1e-9)


def test_real_k_evolution_preserves_l2():
    f = random_field(6, 5)
    pot = SparsePotential((LayerSpec.symmetric(8.0, 0.3), modulated(12.0, 1, 1, 0.2)))
    U = evolution_solve(f, pot, 1.5, 5.0, rtol=1e-11, atol=1e-14)
    assert abs(U.l2_norm() - f.l2_norm()) < 1e-8 * f.l2_norm()


def test_duhamel_check():
    g = build_grid(8)
    k = 1 + 0.3j
    one = SphericalField.constant(g, 1.0)
    assert duhamel_linear_check(LayerSpec.symmetric(100.0, 0.0), k, one) == 0.0
    # on constants both linear terms are the same scalar
    assert duhamel_linear_check(LayerSpec.symmetric(100.0, 1e-3), k, one) < 1e-15
    f = one + SphericalField.harmonic(g, 2, 0)
    a = duhamel_linear_check(LayerSpec.symmetric(100.0, 1e-3), k, f)
    b = duhamel_linear_check(LayerSpec.symmetric(100.0, 2e-3), k, f)
    assert b == pytest.approx(2 * a, rel=1e-10)
    ratios = [duhamel_linear_check(LayerSpec.symmetric(R, 1e-3), k, f) / 1e-3 for R in (1e2, 1e3, 1e4)]
    assert ratios[0] > ratios[1] > ratios[2]
