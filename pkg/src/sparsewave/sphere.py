"""Quadrature and spherical-harmonic machinery on the unit sphere.

Grid: Gauss-Legendre nodes in the polar cosine times ``2L + 1`` equispaced
azimuths, which integrates every product of two harmonics of degree ``<= L``
exactly.  Harmonics are the orthonormal complex ``Y_m^l`` with the
Condon-Shortley phase; ``m`` is the degree and ``l`` the order throughout.

Coefficient arrays have shape ``(L + 1, 2L + 1)`` and are indexed
``coeffs[m, l + L]``; entries with ``|l| > m`` are zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import TruncationError

MIN_DEGREE = 4
MAX_DEGREE = 256


def normalized_legendre(L, x):
    """Orthonormal associated Legendre functions for ``0 <= l <= m <= L``.

    Returns an array ``P[m, l, i]`` such that ``P[m, l, i] * exp(1j*l*phi)``
    is ``Y_m^l`` evaluated at polar cosine ``x[i]``.  Uses the standard
    stable three-term recursion on normalized values, so nothing overflows
    for large degree.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((L + 1, L + 1, x.size))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for l in range(1, L + 1):
        P[l, l] = -np.sqrt((2.0 * l + 1.0) / (2.0 * l)) * s * P[l - 1, l - 1]
    for l in range(0, L):
        P[l + 1, l] = np.sqrt(2.0 * l + 3.0) * x * P[l, l]
    for l in range(0, L + 1):
        for m in range(l + 2, L + 1):
            a = np.sqrt((4.0 * m * m - 1.0) / (m * m - l * l))
            b = np.sqrt(((m - 1.0) ** 2 - l * l) / (4.0 * (m - 1.0) ** 2 - 1.0))
            P[m, l] = a * (x * P[m - 1, l] - b * P[m - 2, l])
    return P


def sph_harm(m, l, directions):
    """Complex orthonormal ``Y_m^l`` at unit vectors ``directions`` (n, 3)."""
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    r = np.linalg.norm(d, axis=1)
    x = np.clip(d[:, 2] / r, -1.0, 1.0)
    phi = np.arctan2(d[:, 1], d[:, 0])
    la = abs(l)
    P = normalized_legendre(m, x)[m, la]
    y = P * np.exp(1j * la * phi)
    if l < 0:
        y = (-1) ** la * np.conj(y)
    return y


def real_sph_harm(m, l, directions):
    """Real orthonormal harmonic of degree ``m`` and signed order ``l``."""
    if l == 0:
        return sph_harm(m, 0, directions).real
    y = sph_harm(m, abs(l), directions)
    sign = (-1) ** abs(l) * np.sqrt(2.0)
    return sign * (y.real if l > 0 else y.imag)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Product quadrature on the unit sphere exact to degree ``2L``."""

    degree: int
    cos_theta: np.ndarray = field(repr=False)
    gl_weights: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def n_theta(self):
        return self.cos_theta.size

    @property
    def n_phi(self):
        return self.phi.size

    @property
    def size(self):
        return self.n_theta * self.n_phi

    @cached_property
    def nodes(self):
        """Unit directions, shape ``(n_theta * n_phi, 3)``, theta-major."""
        s = np.sqrt(1.0 - self.cos_theta**2)
        x = np.outer(s, np.cos(self.phi))
        y = np.outer(s, np.sin(self.phi))
        z = np.outer(self.cos_theta, np.ones_like(self.phi))
        return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    @cached_property
    def weights(self):
        return np.outer(self.gl_weights, np.full(self.n_phi, 2.0 * np.pi / self.n_phi)).ravel()

    @cached_property
    def legendre(self):
        return normalized_legendre(self.degree, self.cos_theta)

    @cached_property
    def degrees(self):
        """Degree ``m`` of every coefficient slot, shape ``(L + 1, 2L + 1)``."""
        L = self.degree
        return np.repeat(np.arange(L + 1)[:, None], 2 * L + 1, axis=1)

    @cached_property
    def mask(self):
        """True on valid ``(m, l)`` slots."""
        L = self.degree
        orders = np.arange(-L, L + 1)[None, :]
        return np.abs(orders) <= self.degrees

    def integrate(self, values):
        return np.sum(self.weights * np.asarray(values))

    def zeros(self):
        return np.zeros((self.degree + 1, 2 * self.degree + 1), dtype=complex)


def build_grid(L):
    """Build the quadrature grid of band limit ``L`` (``4 <= L <= 256``)."""
    if int(L) != L or not MIN_DEGREE <= L <= MAX_DEGREE:
        raise ValueError(f"grid degree must be an integer in [{MIN_DEGREE}, {MAX_DEGREE}], got {L}")
    L = int(L)
    x, w = np.polynomial.legendre.leggauss(L + 1)
    n_phi = 2 * L + 1
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return SphereGrid(L, x, w, phi)


def sh_analyze(grid, values):
    """Spherical-harmonic coefficients of grid values (exact if band-limited)."""
    L = grid.degree
    f = np.asarray(values, dtype=complex).reshape(grid.n_theta, grid.n_phi)
    F = np.fft.fft(f, axis=1) * (2.0 * np.pi / grid.n_phi)
    P = grid.legendre * grid.gl_weights[None, None, :]
    coeffs = grid.zeros()
    for l in range(0, L + 1):
        pos = P[:, l, :] @ F[:, l]
        coeffs[:, L + l] = pos
        if l > 0:
            coeffs[:, L - l] = (-1) ** l * (P[:, l, :] @ F[:, grid.n_phi - l])
    coeffs[~grid.mask] = 0.0
    return coeffs


def sh_synthesize(grid, coeffs):
    """Grid values of a coefficient array.

    Raises TruncationError when ``coeffs`` carries degrees above the band limit.
    """
    L = grid.degree
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 2 or c.shape[1] % 2 != 1:
        raise ValueError("coefficient array must have shape (M + 1, 2M + 1)")
    M = c.shape[0] - 1
    if M > L or c.shape[1] != 2 * M + 1:
        if c.shape[1] != 2 * M + 1:
            raise ValueError("coefficient array must have shape (M + 1, 2M + 1)")
        overflow = np.sqrt(np.sum(np.abs(c[L + 1 :]) ** 2))
        raise TruncationError(
            f"coefficients up to degree {M} exceed grid band limit {L} "
            f"(overflow l2 norm {overflow:.3e})",
            max_degree=M,
            overflow_norm=overflow,
        )
    if M < L:
        c = pad_coeffs(c, L)
    G = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    P = grid.legendre
    for l in range(0, L + 1):
        G[:, l] = P[:, l, :].T @ c[:, L + l]
        if l > 0:
            G[:, grid.n_phi - l] = (-1) ** l * (P[:, l, :].T @ c[:, L - l])
    return (np.fft.ifft(G, axis=1) * grid.n_phi).ravel()


def pad_coeffs(coeffs, L):
    """Embed a lower-degree coefficient array into band limit ``L``."""
    c = np.asarray(coeffs, dtype=complex)
    M = c.shape[0] - 1
    out = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    out[: M + 1, L - M : L + M + 1] = c
    return out


@dataclass(frozen=True, eq=False)
class SphericalField:
    """Complex function on the unit sphere held as grid values."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, sh_synthesize(grid, coeffs))

    @classmethod
    def constant(cls, grid, value=1.0):
        return cls(grid, np.full(grid.size, value, dtype=complex))

    @classmethod
    def harmonic(cls, grid, m, l, scale=1.0):
        c = grid.zeros()
        c[m, grid.degree + l] = scale
        return cls.from_coeffs(grid, c)

    @cached_property
    def coeffs(self):
        return sh_analyze(self.grid, self.values)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def l2_norm(self):
        return float(np.sqrt(self.grid.integrate(np.abs(self.values) ** 2).real))

    def inner(self, other):
        return complex(self.grid.integrate(np.conj(self.values) * other.values))

    def with_values(self, values):
        return SphericalField(self.grid, values)

    def __mul__(self, other):
        if isinstance(other, SphericalField):
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, SphericalField):
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SphericalField):
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __rsub__(self, other):
        return self.with_values(other - self.values)

    def __truediv__(self, other):
        if isinstance(other, SphericalField):
            return self.with_values(self.values / other.values)
        return self.with_values(self.values / other)


def apply_diagonal(f, multipliers):
    """Multiply coefficient ``(m, l)`` of ``f`` by ``multipliers[m]``."""
    mult = np.asarray(multipliers)
    return SphericalField.from_coeffs(f.grid, f.coeffs * mult[:, None])


def laplace_beltrami_apply(f):
    """Laplace-Beltrami operator: coefficient ``(m, l)`` times ``-m(m+1)``."""
    m = np.arange(f.grid.degree + 1)
    return apply_diagonal(f, -m * (m + 1.0))


def heat_multipliers(L, k, t):
    m = np.arange(L + 1)
    return np.exp(m * (m + 1.0) / (2j * complex(k) * t))


def heat_flow(f, k, t):
    """Apply ``exp[-B / (2ikt)]``: coefficient ``(m, l)`` times ``exp[m(m+1)/(2ikt)]``."""
    if not t > 0:
        raise ValueError(f"heat_flow requires t > 0, got {t}")
    if complex(k).imag < 0:
        raise ValueError("heat_flow requires Im k >= 0")
    return apply_diagonal(f, heat_multipliers(f.grid.degree, k, t))


def write_field_csv(path, f):
    """Rows ``(node, x, y, z, re, im)`` with a header."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "z", "re", "im"])
        for i, (d, v) in enumerate(zip(f.grid.nodes, f.values)):
            w.writerow([i, *(f"{c:.17g}" for c in d), f"{v.real:.17g}", f"{v.imag:.17g}"])


def write_coeffs_csv(path, coeffs):
    """Rows ``(m, l, re, im)`` for every valid slot."""
    c = np.asarray(coeffs)
    L = c.shape[0] - 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "l", "re", "im"])
        for m in range(L + 1):
            for l in range(-m, m + 1):
                v = c[m, L + l]
                w.writerow([m, l, f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_coeffs_csv(path):
    rows = list(csv.DictReader(open(path, newline="")))
    L = max(int(r["m"]) for r in rows)
    c = np.zeros((L + 1, 2 * L + 1), dtype=complex)
    for r in rows:
        c[int(r["m"]), L + int(r["l"])] = float(r["re"]) + 1j * float(r["im"])
    return c
