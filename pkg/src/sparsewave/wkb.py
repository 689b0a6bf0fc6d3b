"""The multiplicative WKB factor and its relatives.

``WKB_n(k, theta) = exp[-(4 pi)^{-1} int e^{ik(|t| - <theta, t>)} V_n(t) / |t| dt]``.
The exponent is the sum of the per-layer ``kappa`` fields, so the factor is
multiplicative over layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidPotentialError
from .greens import FOUR_PI, _layer_breaks, gauss_nodes, kappa
from .potential import BumpEnsemble, RadialProfile
from .sphere import SphericalField, build_grid

WKB_RADIAL_NODES = 16


def wkb_exponent(pot, k, grid, route="diagonal", n_radial=8):
    """Field ``(4 pi)^{-1} int e^{ik(|t| - <theta, t>)} V(t)/|t| dt`` over ``theta``.

    ``route="quadrature"`` sums the shell product rule directly and raises a
    resolution error when the grid cannot resolve the phase ``|k| R``;
    ``route="diagonal"`` uses the closed-form sphere spectrum (always valid).
    """
    out = SphericalField.constant(grid, 0.0)
    for layer in pot.layers:
        out = out + kappa(layer, k, grid, route=route, n_radial=n_radial)
    return out


def wkb_factor(pot, k, grid, route="diagonal", n_radial=8):
    """``exp(-exponent)`` as a field over the sphere."""
    if complex(k).imag < 0:
        raise ValueError("wkb_factor requires Im k >= 0")
    e = wkb_exponent(pot, k, grid, route, n_radial)
    return e.with_values(np.exp(-e.values))


def _require_symmetric(pot):
    if not pot.is_symmetric:
        raise InvalidPotentialError("radial reduction needs spherically symmetric layers")


def wkb_exponent_symmetric(pot, k, n_radial=WKB_RADIAL_NODES):
    """``int_0^inf V(r) (e^{2ikr} - 1)/(2ik) dr`` by Gauss-Legendre per shell."""
    _require_symmetric(pot)
    k = complex(k)
    total = 0.0 + 0.0j
    for layer in pot.layers:
        r, w = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
        total += np.sum(w * layer.radial(r) * np.expm1(2j * k * r) / (2j * k))
    return complex(total)


def wkb_factor_symmetric(pot, k, n_radial=WKB_RADIAL_NODES):
    return complex(np.exp(-wkb_exponent_symmetric(pot, k, n_radial)))


def wkb_1d(V, k, support=None):
    """``exp[-(i/2k) int_0^inf V(r) dr]`` for a half-line potential.

    ``V`` is a :class:`RadialProfile` (supported on ``[0, 1]``) or a callable
    together with ``support = (a, b)``.
    """
    k = complex(k)
    if k == 0:
        raise ValueError("wkb_1d is undefined at k = 0")
    if isinstance(V, RadialProfile):
        x = np.asarray(V.offsets, dtype=float)
        y = np.asarray(V.values, dtype=float)
        integral = float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))
    else:
        if support is None:
            raise ValueError("callable potentials need a support interval")
        integral = quad(V, *support, limit=200, epsabs=1e-14, epsrel=1e-13)[0]
    return complex(np.exp(-0.5j * integral / k))


def _ball_rule(n_radial, degree):
    g = build_grid(degree)
    x, w = np.polynomial.legendre.leggauss(n_radial)
    s = 0.5 * (x + 1.0)
    return s, 0.5 * w, g.nodes, g.weights


def bump_integrals(ensemble, k, theta, n_radial=12, degree=12, chunk=256):
    """``c_j = (4 pi)^{-1} int e^{ik(|t| - <theta, t>)} b_j(t)/|t| dt`` for each bump shape.

    Product rule in local ball coordinates around each center.
    """
    k = complex(k)
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    s, ws, dirs, wd = _ball_rule(n_radial, degree)
    # local offsets and weights on the unit ball, shape weight folded in
    local = (s[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    lw = (((1.0 - s * s) ** 2 * ws * s * s)[:, None] * wd[None, :]).ravel()
    out = np.empty(ensemble.radii.size, dtype=complex)
    for start in range(0, out.size, chunk):
        c = ensemble.centers[start:start + chunk]
        rho = ensemble.radii[start:start + chunk]
        pts = c[:, None, :] + rho[:, None, None] * local[None, :, :]
        t = np.linalg.norm(pts, axis=-1)
        phase = np.exp(1j * k * (t - pts @ theta))
        out[start:start + chunk] = (phase / t) @ lw * rho**3 / FOUR_PI
    return out


def amplitude_variance(ensemble):
    v = 1.0 if ensemble.distribution == "rademacher" else 1.0 / 3.0
    return v * ensemble.scale**2


@dataclass(frozen=True)
class MomentEstimate:
    mean: complex
    second_moment: float
    mean_stderr: float
    second_stderr: float
    exact_second_moment: float
    trials: int


def randomized_wkb_moment(layer, k, theta, trials, seed=0, n_radial=12, degree=12):
    """Monte-Carlo mean and ``E|X|^2`` of the exponent ``X`` for a random-bump layer.

    Trial ``i`` redraws the bump amplitudes from a generator seeded with
    ``(seed, i)``; the exponent is linear in them, so each trial costs one
    dot product with the per-bump integrals.
    """
    if trials < 100:
        raise ValueError("at least 100 trials are required")
    ens = layer.profile if hasattr(layer, "profile") else layer
    if not isinstance(ens, BumpEnsemble):
        raise InvalidPotentialError("randomized moment needs a random-bump layer")
    c = bump_integrals(ens, k, theta, n_radial, degree)
    X = np.empty(trials, dtype=complex)
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        X[i] = ens.scale * (ens.draw(rng) @ c)
    p = np.abs(X) ** 2
    return MomentEstimate(
        mean=complex(X.mean()),
        second_moment=float(p.mean()),
        mean_stderr=float(np.sqrt(np.mean(np.abs(X - X.mean()) ** 2) / (trials - 1))),
        second_stderr=float(p.std(ddof=1) / np.sqrt(trials)),
        exact_second_moment=float(amplitude_variance(ens) * np.sum(np.abs(c) ** 2)),
        trials=trials,
    )
