import math

import numpy as np
import pytest

from sparsewave.greens import SourceSpec, ball_amplitude
from sparsewave.potential import RadialProfile, SparsePotential
from sparsewave.sphere import SphericalField, build_grid
from sparsewave.spectral import (
    TriangleDomain,
    entropy_J1,
    entropy_J2,
    entropy_lower_bound,
    fourier_density,
    harmonic_measure_triangle,
    log_spectral_density,
    mean_log_wkb,
    probe_point,
    spectral_density,
)

BALL = SourceSpec.ball_indicator()


@pytest.fixture(scope="module")
def omega():
    return harmonic_measure_triangle(TriangleDomain())


# ---- triangle ----

def test_triangle_geometry():
    T = TriangleDomain()
    a, b, c = T.vertices
    assert (a, b) == (0.5, 2.0)
    assert abs(c - complex(1.25, 0.75 * math.tan(math.pi / 10))) < 1e-15
    assert T.contains(T.k0)
    assert not T.contains(1.25)
    assert abs(T.boundary_point(0.0) - a) < 1e-15
    assert abs(T.boundary_point(T.perimeter) - a) < 1e-12
    assert abs(T.boundary_point(1.5 + T.side_length) - c) < 1e-12
    assert np.min(np.abs(T.edge_distances(c))) < 1e-15


def test_triangle_rejects_bad_parameters():
    with pytest.raises(ValueError):
        TriangleDomain(a=2.0, b=1.0)
    with pytest.raises(ValueError):
        TriangleDomain(gamma1=9.0)
    with pytest.raises(ValueError):
        TriangleDomain(k0=1.25 + 1.0j)


# ---- harmonic measure ----

def test_measure_is_a_probability(omega):
    assert abs(omega.total_mass - 1) < 1e-3
    assert omega.mass.min() >= 0


def test_measure_reproduces_harmonic_functions(omega):
    # int omega g = g(k0) for harmonic g; P1 elements are exact on linear g
    k0 = omega.triangle.k0
    for g in (lambda z: z.real, lambda z: z.imag):
        assert abs(omega.integrate(g, "all") - g(k0)) < 1e-12
    g = lambda z: (z * z).real
    assert abs(omega.integrate(g, "all") - g(k0)) < 1e-3


def test_measure_symmetry_and_endpoint_exponent(omega):
    assert omega.symmetry_defect() < 2e-3
    expected = omega.triangle.gamma1 - 1
    assert abs(omega.endpoint_exponent() - expected) < 0.15 * expected


def test_base_rule_integrates_density(omega):
    s, w = omega.base_rule()
    assert abs(w.sum() - omega.integrate(lambda z: np.ones(z.shape), "base")) < 1e-3 * w.sum()
    assert np.all(w >= 0) and s.min() >= 0.5 and s.max() <= 2.0


def test_coarse_mesh_rejected():
    with pytest.raises(ValueError):
        harmonic_measure_triangle(TriangleDomain(), h=0.1)


# ---- spectral density ----

def test_spectral_density_basics():
    g = build_grid(6)
    assert spectral_density(SphericalField.constant(g, 0.0), 1.0) == 0.0
    A = SphericalField.constant(g, 0.3 + 0.1j)
    assert spectral_density(A, 1.5) == pytest.approx(spectral_density(0.3 + 0.1j, 1.5), rel=1e-12)
    assert spectral_density(2 * A, 1.5) == pytest.approx(4 * spectral_density(A, 1.5), rel=1e-12)
    with pytest.raises(ValueError):
        spectral_density(A, 1 + 0.1j)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.7])
def test_free_density_matches_fourier_route(k):
    assert abs(spectral_density(ball_amplitude(k), k) - fourier_density(BALL, k)) < 1e-8 * fourier_density(BALL, k)
    f = SourceSpec(RadialProfile([0.0, 0.5, 1.0], [1.0, 0.2, 0.7]))
    f2 = SourceSpec(RadialProfile([0.0, 0.5, 1.0], [2.0, 0.4, 1.4]))
    assert fourier_density(f2, k) == pytest.approx(4 * fourier_density(f, k), rel=1e-12)
    assert log_spectral_density(BALL, SparsePotential(), k)[0] == pytest.approx(math.log(fourier_density(BALL, k)),
                                                                                 rel=1e-10)


# ---- entropy terms ----

POT = SparsePotential.symmetric([20.0, 60.0], [0.2, 0.1])


def test_J1_without_potential(omega):
    assert entropy_J1(SparsePotential(), omega).value == 0.0


def test_mean_log_wkb_routes_agree():
    s = np.linspace(0.5, 2.0, 7)
    a = mean_log_wkb(POT, s, "1d")
    b = mean_log_wkb(POT, s, "3d")
    assert np.max(np.abs(a - b)) < 1e-8
    with pytest.raises(ValueError):
        mean_log_wkb(POT, s, "2d")


def test_J1_far_layer_contribution_decreases(omega):
    inc = []
    for R in (1e2, 1e3, 1e4):
        r = entropy_J1(SparsePotential.symmetric([R], [0.1]), omega)
        assert r.within_shape
        inc.append(abs(r.value))
    assert inc[0] > inc[1] > inc[2]


def test_J2_chain_and_scaling(omega):
    base = entropy_J2(BALL, SparsePotential(), omega)
    assert base.ok
    # subharmonic mean-value chain
    assert base.defect > -1e-6
    twice = entropy_J2(SourceSpec.ball_indicator(2.0), SparsePotential(), omega)
    w_base = omega.base_rule()[1].sum()
    assert twice.value - base.value == pytest.approx(math.log(2) * w_base, rel=1e-10)


def test_probe_point(omega):
    k0 = probe_point(omega.triangle, BALL)
    assert omega.triangle.contains(k0) and k0.real == omega.triangle.midpoint


@pytest.fixture(scope="module")
def bound(omega):
    return entropy_lower_bound(POT, BALL, omega)


def test_entropy_reports(bound):
    assert len(bound.reports) == 3
    assert all(r.jensen_ok for r in bound.reports)
    assert all(r.jensen_gap >= r.offset - 1e-9 for r in bound.reports)
    assert bound.uniform_ok


def test_weaker_potential_raises_lower_envelope(omega, bound):
    half = entropy_lower_bound(POT.scaled(0.5), BALL, omega)
    assert half.min_lhs > bound.min_lhs


def test_entropy_requires_radial_setting(omega):
    with pytest.raises(ValueError):
        entropy_lower_bound(POT, SourceSpec.ball_indicator(harmonic=(1, 0)), omega)
