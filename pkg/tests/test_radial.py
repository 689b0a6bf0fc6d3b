import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.special import spherical_jn, spherical_yn

from sparsewave.errors import InvalidPotentialError
from sparsewave.greens import SourceSpec, ball_amplitude, born_solve
from sparsewave.potential import HarmonicProfile, LayerSpec, RadialProfile, SparsePotential
from sparsewave.radial import (
    ChannelData,
    DoublyExponentialSchedule,
    cutoff_index,
    eigenvalue_absence_check,
    jost_value,
    prufer_gap_bound,
    prufer_log_factor,
    prufer_property_check,
    prufer_quantity,
    radial_amplitude_oracle,
    radial_amplitudes,
    solve_radial,
    wronskian,
)
from sparsewave.sphere import build_grid
from sparsewave.towers import Tower

POT = SparsePotential.symmetric([5.0, 20.0], [0.3, -0.2])


# ---- channel solutions ----

def test_free_channel_zero_is_plane_wave():
    k = 1.2 + 0.3j
    s = solve_radial(SparsePotential(), 0, k)
    assert np.max(np.abs(s.w - 1)) < 1e-10
    np.testing.assert_allclose(s.u, np.exp(1j * k * s.r), rtol=1e-10)


def test_free_channel_one_is_riccati_hankel():
    k = 1.2 + 0.3j
    s = solve_radial(SparsePotential(), 1, k, r_min=0.5)
    z = k * s.r
    h1 = z * (spherical_jn(1, z) + 1j * spherical_yn(1, z))
    ratio = s.u / h1
    assert np.max(np.abs(ratio / ratio[-1] - 1)) < 1e-10
    np.testing.assert_allclose(s.w, 1 + 1j / z, rtol=1e-10)


@pytest.mark.parametrize("k", [1.0, 2.5, 1 + 0.01j])
@pytest.mark.parametrize("m", [0, 1, 3])
def test_wronskian_constant(k, m):
    # stable in both directions only for real or barely damped k
    a = solve_radial(POT, m, k, rtol=1e-12)
    b = solve_radial(POT, m, k, outgoing=False, rtol=1e-12)
    W = wronskian(a, b)[a.r >= 1.0]
    assert np.max(np.abs(W + 2j * k)) < 5e-10 * abs(k)


@pytest.mark.parametrize("k", [1 + 0.05j, 0.7 + 0.3j, 2.0 + 1j])
def test_outgoing_tail_constant(k):
    s = solve_radial(POT, 2, k)
    assert np.max(np.abs(s.tail_ratio() - 1)) < 1e-9


def test_solver_rejects_asymmetric_and_bad_k():
    asym = SparsePotential((LayerSpec(5.0, HarmonicProfile(((1, 0, RadialProfile.constant(0.1)),))),))
    with pytest.raises(InvalidPotentialError):
        solve_radial(asym, 0, 1 + 0.1j)
    with pytest.raises(ValueError):
        solve_radial(POT, 0, 1 - 0.1j)


# ---- Jost value and amplitude oracle ----

@pytest.mark.parametrize("k", [1 + 0.3j, 1.5, 0.7 + 0.05j])
def test_transfer_matrix_matches_ode_sweep(k):
    a = jost_value(POT, k, method="transfer")
    b = jost_value(POT, k, method="ode")
    assert abs(a - b) < 1e-10


def test_jost_value_of_nothing_is_one():
    assert jost_value(SparsePotential(), 1 + 0.2j) == 1.0


@pytest.mark.parametrize("k", [0.5, 1.0 + 0.2j, 2.0])
def test_oracle_without_potential(k):
    got = radial_amplitude_oracle(SourceSpec.ball_indicator(), SparsePotential(), k)
    assert abs(got - ball_amplitude(k)) < 1e-13


def test_oracle_matches_born_for_weak_shell():
    g = build_grid(8)
    f = SourceSpec.ball_indicator()
    k, v = 1 + 0.5j, 1e-3
    pot = SparsePotential.symmetric([2.0], [v])
    born = born_solve(f, pot, k, g)
    oracle = radial_amplitude_oracle(f, pot, k)
    # Born's discretization error is second order in v
    assert np.max(np.abs(born.amplitude.values - oracle)) < 10 * v * v * abs(ball_amplitude(k))


def test_oracle_amplitudes_per_layer_count():
    f = SourceSpec.ball_indicator()
    pot = SparsePotential.symmetric([20.0, 60.0, 180.0], [0.2, 0.1, 0.05])
    amps = radial_amplitudes(f, pot, 1 + 0.3j)
    assert len(amps) == 4
    assert amps[0] == pytest.approx(ball_amplitude(1 + 0.3j), abs=1e-14)
    assert amps[2] == pytest.approx(radial_amplitude_oracle(f, pot.truncate(2), 1 + 0.3j))


def test_oracle_preconditions():
    f = SourceSpec.ball_indicator()
    with pytest.raises(InvalidPotentialError):
        radial_amplitude_oracle(f, SparsePotential.symmetric([0.5], [0.1]), 1 + 0.1j)
    with pytest.raises(ValueError):
        radial_amplitude_oracle(f, POT, -1.0)
    with pytest.raises(ValueError):
        radial_amplitude_oracle(SourceSpec.ball_indicator(harmonic=(1, 0)), POT, 1 + 0.1j)


# ---- gap growth ----

def test_prufer_channel_zero_conserved():
    E = 2.0
    assert prufer_log_factor(0, E, 10.0, 30.0) == 0.0
    sol = solve_ivp(lambda r, y: [y[1], -E * y[0]], (10.0, 30.0), [0.3, 0.8], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    Q = prufer_quantity(*sol.sol(np.linspace(10, 30, 50)), E)
    assert np.max(np.abs(Q / Q[0] - 1)) < 1e-10


def test_prufer_bound_for_many_initial_conditions():
    # linear ODE: propagate two fundamental solutions, then any initial condition
    m, E, rn, r = 3, 1.0, 10.0, 20.0
    c = m * (m + 1.0)
    rs = np.linspace(rn, r, 101)
    fund = [solve_ivp(lambda t, y: [y[1], (c / t**2 - E) * y[0]], (rn, r), y0, method="DOP853",
                      rtol=1e-12, atol=1e-14, t_eval=rs).y for y0 in ([1.0, 0.0], [0.0, 1.0])]
    rng = np.random.default_rng(0)
    ic = rng.normal(size=(1000, 2))
    f = ic[:, :1] * fund[0][0] + ic[:, 1:] * fund[1][0]
    fp = ic[:, :1] * fund[0][1] + ic[:, 1:] * fund[1][1]
    Q = prufer_quantity(f, fp, E)
    bound = prufer_quantity(ic[:, 0], ic[:, 1], E)[:, None] * np.exp(
        [prufer_log_factor(m, E, rn, x) for x in rs])[None, :]
    assert np.all(Q >= bound * (1 - 1e-10))
    assert prufer_gap_bound(m, E, rn, r, ic[0, 0], ic[0, 1]) == pytest.approx(bound[0, -1])


def test_prufer_bound_monotone_in_channel():
    vals = [prufer_gap_bound(m, 1.0, 10.0, 20.0, 1.0, 0.0) for m in range(8)]
    assert vals[0] == 1.0
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        prufer_log_factor(1, 0.0, 10.0, 20.0)


def test_prufer_randomized_suite():
    res = prufer_property_check(trials=150, seed=3)
    assert res.violations == 0
    assert res.m0_drift < 1e-10


def test_halved_exponent_is_violated():
    # the halved growth exponent is not a valid bound
    assert prufer_property_check(trials=100, seed=1, convention="halved").violations > 0


def test_channel_tail_sums():
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(6, 11)) + 1j * rng.normal(size=(6, 11))
    d = ChannelData(10.0, 1.0, vals)
    p = d.tail_sums
    assert np.all(np.diff(p) <= 0)
    assert p[0] == pytest.approx(np.sum(np.abs(vals) ** 2))


# ---- eigenvalue absence ----

@pytest.fixture(scope="module")
def schedule():
    return DoublyExponentialSchedule(1e40, 1.4, 5)


@pytest.mark.parametrize("E", [0.5, 1.0, 4.0])
@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_contradiction_on_doubly_exponential_schedule(schedule, E, gamma):
    rep = eigenvalue_absence_check(schedule, E, gamma)
    assert rep.verdict and rep.increasing
    assert len(rep.certificates) == 4
    assert all(c.margin_positive for c in rep.certificates)


def test_threshold_monotone_in_gamma(schedule):
    thr = [eigenvalue_absence_check(schedule, 1.0, g).certificates[0].log_threshold for g in (0.5, 1.0, 2.0)]
    assert thr[0] < thr[1] < thr[2]


def test_scaling_radii_increases_margins(schedule):
    a = eigenvalue_absence_check(schedule, 1.0, 1.0).certificates
    b = eigenvalue_absence_check(schedule.scaled(10.0), 1.0, 1.0).certificates
    assert all(y.margin_abs > x.margin_abs for x, y in zip(a, b))


def test_cutoff_index_is_minimal():
    assert float(cutoff_index(10.0, 0.1)) == 1428.0
    # keep the targets well inside exact float integers
    for R, gamma in ((10.0, 0.1), (3.0, 0.5), (20.0, 0.05)):
        k = cutoff_index(R, gamma)
        assert k.h == 0 and float(k).is_integer()
        target = R * math.exp(gamma * R ** (4 / 3) * math.log(R))
        assert float(k) > target >= float(k) - 1
        # R^2 / k < R exp(-gamma R^{4/3} ln R)
        assert R * R / float(k) < R * math.exp(-gamma * R ** (4 / 3) * math.log(R))
    assert cutoff_index(1e40, 1.0).h >= 1


def test_short_gap_rejected():
    with pytest.raises(InvalidPotentialError):
        eigenvalue_absence_check([10.0, 11.0], 1.0)
    with pytest.raises(ValueError):
        eigenvalue_absence_check([10.0, 100.0], -1.0)


def test_small_float_schedule_fails():
    # ordinary geometric radii give no contradiction
    rep = eigenvalue_absence_check([10.0, 100.0, 1000.0], 1.0, 1.0)
    assert not rep.verdict
    assert isinstance(rep.certificates[0].radius, Tower)
