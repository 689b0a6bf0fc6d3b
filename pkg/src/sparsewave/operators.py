"""The sphere operators ``O_t`` and their closed-form spectrum.

``O_t f(theta) = (4 pi)^{-1} t \\int e^{ikt(1 - <theta, s>)} f(s) ds`` is a
zonal convolution, hence diagonal on spherical harmonics with eigenvalue
``t e^{ikt} (-i)^m j_m(kt)`` on degree ``m``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ResolutionError
from .special import scaled_spherical_jn
from .sphere import SphericalField, apply_diagonal

DIAGONAL_THRESHOLD = 20.0


def o_t_eigenvalues(L, t, k):
    """Eigenvalues of ``O_t`` for degrees ``0..L``."""
    if not t > 0:
        raise ValueError("t must be positive")
    z = complex(k) * t
    m = np.arange(L + 1)
    return t * (-1j) ** m * scaled_spherical_jn(L, z)


def o_t_eigenvalue(m, t, k):
    """``t e^{ikt} (-i)^m j_m(kt)``, stable for large ``kt`` and large ``m``."""
    return complex(o_t_eigenvalues(m, t, k)[m])


def required_degree(k, t):
    return 2 + math.ceil(abs(complex(k)) * t)


def one_minus_cos(a, b):
    """``1 - <a_i, b_j>`` for unit vectors, computed as ``|a - b|^2 / 2``.

    Avoids the cancellation of ``1 - cos`` near the forward direction.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = a[:, None, :] - b[None, :, :]
    return 0.5 * np.einsum("ijk,ijk->ij", d, d)


def zonal_quadrature(grid, source_values, k, t, chunk=1024):
    """``(4 pi)^{-1} t sum_j w_j e^{ikt(1 - <theta_i, s_j>)} g_j`` at every node.

    ``source_values`` may carry extra trailing axes (several fields at once).
    """
    g = np.asarray(source_values, dtype=complex)
    g = g * grid.weights.reshape((-1,) + (1,) * (g.ndim - 1))
    nodes = grid.nodes
    out = np.empty(g.shape, dtype=complex)
    kt = complex(k) * t
    for start in range(0, grid.size, chunk):
        sl = slice(start, start + chunk)
        phase = np.exp(1j * kt * one_minus_cos(nodes[sl], nodes))
        out[sl] = phase @ g
    return out * (t / (4.0 * np.pi))


def o_t_apply(f, t, k, route="auto"):
    """Apply ``O_t`` to a spherical field.

    ``route`` is ``"diagonal"`` (closed-form spectrum, always valid),
    ``"quadrature"`` (direct zonal quadrature; needs the grid to resolve the
    phase ``kt``) or ``"auto"`` (quadrature up to ``|k|t = 20``).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if route == "auto":
        route = "diagonal" if abs(complex(k)) * t > DIAGONAL_THRESHOLD else "quadrature"
    if route == "diagonal":
        return apply_diagonal(f, o_t_eigenvalues(f.grid.degree, t, k))
    if route != "quadrature":
        raise ValueError(f"unknown route {route!r}")
    need = required_degree(k, t)
    if f.grid.degree < need:
        raise ResolutionError(
            f"grid degree {f.grid.degree} cannot resolve phase |k|t={abs(complex(k)) * t:.3g}; "
            f"need degree >= {need}",
            required_degree=need,
        )
    return SphericalField(f.grid, zonal_quadrature(f.grid, f.values, k, t))
