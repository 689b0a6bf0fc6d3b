"""Spherical Bessel functions of complex argument, in overflow-safe scaled form."""

from __future__ import annotations

import numpy as np


def _j0_scaled(z):
    # e^{iz} sin(z)/z, accurate near z = 0
    if abs(z) < 1e-3:
        z2 = z * z
        s = 1.0 - z2 / 6.0 + z2 * z2 / 120.0
    else:
        return (np.exp(2j * z) - 1.0) / (2j * z)
    return np.exp(1j * z) * s


def _hankel_scaled(mmax, z):
    """``e^{iz} h^{(1)}_m(z)`` and ``e^{iz} h^{(2)}_m(z)`` for ``m <= mmax`` by upward recurrence."""
    h1 = np.empty(mmax + 1, dtype=complex)
    h2 = np.empty(mmax + 1, dtype=complex)
    e2 = np.exp(2j * z)
    h1[0] = -1j * e2 / z
    h2[0] = 1j / z
    if mmax >= 1:
        h1[1] = -e2 * (z + 1j) / (z * z)
        h2[1] = -(z - 1j) / (z * z)
    for m in range(1, mmax):
        c = (2 * m + 1) / z
        h1[m + 1] = c * h1[m] - h1[m - 1]
        h2[m + 1] = c * h2[m] - h2[m - 1]
    return h1, h2


def _j1_scaled(z):
    if abs(z) < 1e-3:
        z2 = z * z
        s = z / 3.0 - z * z2 / 30.0
    else:
        e2 = np.exp(2j * z)
        return ((e2 - 1.0) / (2j)) / (z * z) - ((e2 + 1.0) / 2.0) / z
    return np.exp(1j * z) * s


def scaled_spherical_jn(mmax, z):
    """``e^{iz} j_m(z)`` for ``m = 0..mmax`` and complex ``z`` with ``Im z >= 0``.

    The exponential prefactor cancels the ``e^{Im z}`` growth of ``j_m``, so
    the result stays finite for arbitrarily large ``Im z``.  For very large
    ``|z|`` with ``m^2 << |z|`` the Hankel pair is used (upward recurrence;
    ``j_m`` has not started to decay so the sum does not cancel); otherwise
    Miller's downward recurrence, normalized against the larger of ``j_0``
    and ``j_1``.
    """
    z = complex(z)
    mmax = int(mmax)
    out = np.zeros(mmax + 1, dtype=complex)
    if z == 0:
        out[0] = 1.0
        return out
    az = abs(z)
    if az > 2000.0 and mmax * mmax < 0.2 * az:
        h1, h2 = _hankel_scaled(max(mmax, 1), z)
        return (0.5 * (h1 + h2))[: mmax + 1]
    top = max(mmax, az)
    start = int(top) + 40 + int(np.sqrt(40.0 * top))
    nxt = 0.0 + 0.0j
    cur = 1e-300 + 0.0j
    vals = np.zeros(max(mmax, 1) + 1, dtype=complex)
    for m in range(start, 0, -1):
        prev = (2 * m + 1) / z * cur - nxt
        nxt, cur = cur, prev
        if m - 1 < vals.size:
            vals[m - 1] = cur
        if m < vals.size:
            vals[m] = nxt
        if abs(cur) > 1e250:
            nxt /= 1e250
            cur /= 1e250
            vals /= 1e250
    j0, j1 = _j0_scaled(z), _j1_scaled(z)
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    return (vals * scale)[: mmax + 1]


def scaled_spherical_jn_single(m, z):
    return scaled_spherical_jn(m, z)[m]


def outgoing_factor(m, z):
    """``w_m(z) = sum_s i^s (m+s)! / (s! (m-s)! (2z)^s)``.

    The outgoing Riccati-Hankel solution equals ``e^{iz} w_m(z)``; it is
    normalized to ``e^{iz}`` at infinity.  Returns ``(w, dw/dz)``.
    """
    z = np.asarray(z, dtype=complex)
    w = np.zeros_like(z)
    dw = np.zeros_like(z)
    coef = 1.0
    for s in range(0, m + 1):
        if s > 0:
            coef *= (m + s) * (m - s + 1) / s
        term = coef * (1j**s) / (2.0 * z) ** s
        w = w + term
        dw = dw - s * term / z
    return w, dw
