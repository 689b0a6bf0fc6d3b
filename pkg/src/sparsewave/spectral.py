"""Spectral density, triangle harmonic measure and the entropy bound.

Sphere integrals in the entropy terms use the normalized measure
``dtheta / 4 pi``.  With that choice Jensen's inequality reads

    ln ||A||^2 >= ln(4 pi) + 2 (mean ln|WKB| + mean ln|A~|),

so ``ln sigma' = ln ||A||^2 + ln(k/pi) >= ln(4k) + 2(...)``; on a base
interval with ``k >= 1/4`` the offset is nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve
from scipy.spatial import Delaunay
from scipy.special import spherical_jn

from .errors import CertificateFailure, NonConvergenceError
from .greens import FOUR_PI, _layer_breaks, gauss_nodes, shell_quadrature
from .radial import jost_value, radial_amplitude_oracle
from .sphere import SphericalField, build_grid
from .wkb import wkb_exponent_symmetric

D_CONFIG = 9
DEFAULT_GAMMA1 = 10.0


# --- triangle and harmonic measure ----------------------------------------


@dataclass(frozen=True)
class TriangleDomain:
    """Isosceles triangle over ``I = [a, b]`` with base angles ``pi / gamma1``.

    The probe point ``k0`` defaults to the axis of symmetry at a third of
    the apex height.
    """

    a: float = 0.5
    b: float = 2.0
    gamma1: float = DEFAULT_GAMMA1
    k0: complex = None
    d_config: float = D_CONFIG

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("base interval must satisfy a < b")
        if not self.gamma1 > self.d_config:
            raise ValueError(f"gamma1 must exceed d_config = {self.d_config}")
        if self.k0 is None:
            object.__setattr__(self, "k0", complex(self.midpoint, self.height / 3.0))
        object.__setattr__(self, "k0", complex(self.k0))
        if not self.contains(self.k0):
            raise ValueError("k0 must lie strictly inside the triangle")

    @property
    def angle(self):
        return math.pi / self.gamma1

    @property
    def midpoint(self):
        return 0.5 * (self.a + self.b)

    @property
    def height(self):
        return 0.5 * (self.b - self.a) * math.tan(self.angle)

    @property
    def apex(self):
        return complex(self.midpoint, self.height)

    @property
    def vertices(self):
        return (complex(self.a), complex(self.b), self.apex)

    def contains(self, z, margin=0.0):
        """Strict interior test, optionally at distance ``> margin`` from the boundary."""
        return bool(np.all(self.edge_distances(complex(z)) > margin))

    def edge_distances(self, z):
        """Signed distances of ``z`` to the three edges, positive inside."""
        z = np.asarray(z, dtype=complex)
        V = self.vertices
        out = []
        for p, q in zip(V, V[1:] + V[:1]):
            e = (q - p) / abs(q - p)
            out.append(((z - p) * e.conjugate()).imag)  # inward for ccw order
        return np.stack(out)

    @property
    def side_length(self):
        return 0.5 * (self.b - self.a) / math.cos(self.angle)

    @property
    def perimeter(self):
        return (self.b - self.a) + 2.0 * self.side_length

    def boundary_point(self, s):
        """Point at arc length ``s`` along ``a -> b -> apex -> a``."""
        s = np.asarray(s, dtype=float)
        L0, L1 = self.b - self.a, self.side_length
        a, b, c = self.vertices
        return np.where(
            s <= L0,
            a + s,
            np.where(s <= L0 + L1, b + (c - b) * (s - L0) / L1, c + (a - c) * (s - L0 - L1) / L1),
        )


def _mesh_points(T, h):
    """Triangular lattice clipped to ``T`` plus evenly spaced boundary nodes."""
    V = T.vertices
    pts = []
    for p, q in zip(V, V[1:] + V[:1]):
        n = max(2, math.ceil(abs(q - p) / h))
        t = np.arange(n) / n
        pts.append(p + (q - p) * t)
    boundary = np.concatenate(pts)
    dy = h * math.sqrt(3.0) / 2.0
    rows = np.arange(1, math.ceil(T.height / dy) + 1) * dy
    inner = []
    for j, y in enumerate(rows):
        shift = 0.5 * h * (j % 2)
        half = math.ceil((T.b - T.a) / h) + 1
        x = T.midpoint + shift + h * np.arange(-half, half + 1)
        z = x + 1j * y
        keep = np.all(T.edge_distances(z) > 0.45 * h, axis=0) & (np.abs(z - T.k0) > 0.45 * h)
        inner.append(z[keep])
    interior = np.concatenate(inner + [[T.k0]])
    return boundary, interior


def _stiffness(xy, tris):
    """P1 stiffness matrix via cotangent weights."""
    rows, cols, vals = [], [], []
    for i0, i1, i2 in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        a, b, c = tris[:, i0], tris[:, i1], tris[:, i2]
        u = xy[b] - xy[a]
        v = xy[c] - xy[a]
        cross = np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        cot = np.einsum("ij,ij->i", u, v) / cross
        w = 0.5 * cot  # weight of edge (b, c) opposite vertex a
        rows += [b, c, b, c]
        cols += [c, b, b, c]
        vals += [-w, -w, w, w]
    n = len(xy)
    return coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class HarmonicMeasure:
    """Discrete harmonic measure of ``T`` seen from ``k0``.

    ``s`` is arc length along ``a -> b -> apex -> a``; ``mass`` holds the
    nodal masses and ``density`` their ratio to the dual arc lengths.
    """

    triangle: TriangleDomain
    s: np.ndarray
    points: np.ndarray
    mass: np.ndarray
    density: np.ndarray
    h: float

    @property
    def total_mass(self):
        return float(self.mass.sum())

    @property
    def base(self):
        """Mask of nodes on ``I`` (closed)."""
        return self.s <= (self.triangle.b - self.triangle.a) * (1 + 1e-12)

    @property
    def sides(self):
        return ~self.base

    def integrate(self, g, where="base"):
        """``int omega g ds`` over the base, the sides or the whole boundary."""
        mask = {"base": self.base, "sides": self.sides, "all": np.ones_like(self.base)}[where]
        z = self.points[mask]
        return float(np.sum(self.mass[mask] * np.asarray(g(z), dtype=float)))

    def endpoint_exponent(self, lo=0.04, hi=0.2):
        """Least-squares slope of ``ln omega`` vs ``ln(s - a)`` near the left endpoint.

        The window is ``[lo, hi]`` times the base length.
        """
        L0 = self.triangle.b - self.triangle.a
        m = self.base & (self.s >= lo * L0) & (self.s <= hi * L0)
        if m.sum() < 3:
            raise ValueError("too few base nodes in the fitting window")
        return float(np.polyfit(np.log(self.s[m]), np.log(self.density[m]), 1)[0])

    def symmetry_defect(self):
        """Max relative mismatch of the base density under ``s -> |I| - s``."""
        L0 = self.triangle.b - self.triangle.a
        m = self.base
        s, w = self.s[m], self.density[m]
        mirrored = np.interp(L0 - s, s, w)
        return float(np.max(np.abs(mirrored - w)) / np.max(w))

    def base_rule(self, n=None):
        """Composite Gauss rule on ``I`` weighted by the interpolated density.

        Returns nodes ``s`` and weights ``w`` with ``sum w g(s) ~ int_I omega g ds``.
        Panels follow the mesh nodes and are refined until there are at least
        ``n`` quadrature nodes (default: eight per mesh interval).
        """
        T = self.triangle
        m = self.base
        knots = self.s[m]
        per = 1 if n is None else max(1, math.ceil(n / (8 * (knots.size - 1))))
        edges = np.linspace(knots[:-1], knots[1:], per + 1, axis=1)[:, :-1].ravel()
        x, w = gauss_nodes(0.0, knots[-1], 8, tuple(edges[1:]))
        dens = PchipInterpolator(knots, self.density[m])(x)
        return T.a + x, w * np.clip(dens, 0.0, None)

    def rows(self):
        return np.column_stack([self.s, self.density])


def harmonic_measure_triangle(T, h=0.01):
    """Harmonic measure of ``T`` at ``k0`` from a P1 finite-element Laplace solve.

    Delaunay triangulation keeps every interior edge weight nonnegative,
    so the discrete maximum principle holds and the measure is
    nonnegative.  The masses are the column of boundary impulses seen at
    ``k0``: ``omega_b = -K_bi K_ii^{-1} e_{k0}``; they sum to one since
    constants lie in the kernel of ``K``.
    """
    boundary, interior = _mesh_points(T, h)
    nb = boundary.size
    if nb < 200:
        raise ValueError(f"h = {h} gives {nb} boundary nodes; at least 200 are required")
    z = np.concatenate([boundary, interior])
    xy = np.column_stack([z.real, z.imag])
    tris = Delaunay(xy, qhull_options="Qbb Qc Qz Q12").simplices
    e1, e2 = z[tris[:, 1]] - z[tris[:, 0]], z[tris[:, 2]] - z[tris[:, 0]]
    area = 0.5 * np.abs((e1.conj() * e2).imag)
    tris = tris[area > 1e-14 * h * h]
    K = _stiffness(xy, tris)
    Kii = K[nb:, nb:].tocsc()
    Kbi = K[:nb, nb:]
    e = np.zeros(z.size - nb)
    e[-1] = 1.0
    g = spsolve(Kii, e)
    if not np.all(np.isfinite(g)):
        raise NonConvergenceError("harmonic-measure Laplace solve failed")
    mass = -(Kbi @ g)
    mass[np.abs(mass) < 1e-300] = 0.0
    # arc length and dual lengths; boundary is ordered a -> b -> apex -> a
    seg = np.abs(np.diff(np.concatenate([boundary, boundary[:1]])))
    s = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    dual = 0.5 * (seg + np.roll(seg, 1))
    return HarmonicMeasure(T, s, boundary, mass, mass / dual, h)


# --- spectral density -----------------------------------------------------


def spectral_density(A, k):
    """``sigma'(k^2) = (k / pi) ||A||^2_{L^2(S^2)}`` for a field or a radial amplitude.

    A complex scalar stands for a ``theta``-independent amplitude.
    """
    if complex(k).imag != 0 or not complex(k).real > 0:
        raise ValueError("k must be real and positive")
    k = complex(k).real
    if isinstance(A, SphericalField):
        return float(k / math.pi * A.l2_norm() ** 2)
    return float(k / math.pi * FOUR_PI * abs(complex(A)) ** 2)


def fourier_density(f, k):
    """Free spectral density of ``f`` from the Fourier transform on ``|xi| = k``.

    ``d sigma_f / dE = (2k)^{-1} int_{|xi| = k} |f^(xi)|^2 dS`` with the
    unitary transform, evaluated with the radial Bessel integral.
    """
    k = float(k)
    m = f.degree
    edges = [0.0] + sorted(set(float(x) for x in f.profile.offsets if 0 < x < 1)) + [1.0]
    re = sum(
        quad(lambda r: r * r * f.profile(r) * spherical_jn(m, k * r), lo, hi, epsabs=1e-15, epsrel=1e-13)[0]
        for lo, hi in zip(edges, edges[1:])
    )
    # |f^|^2 on the sphere integrates to k^2 (2 pi)^{-3} (4 pi)^2 |M|^2 times |Y|^2 mass
    ang = FOUR_PI if f.is_radial else 1.0
    surface = k * k * (4.0 * math.pi) ** 2 / (2.0 * math.pi) ** 3 * re * re * ang
    return float(surface / (2.0 * k))


# --- entropy terms --------------------------------------------------------


def wkb4_shape(pot, n_radial=16):
    """``int |V(u)| (1 + |u|^2)^{-3/2} du`` for symmetric shells."""
    total = 0.0
    for layer in pot.layers:
        r, w = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
        total += FOUR_PI * np.sum(w * np.abs(layer.radial(r)) * r * r * (1.0 + r * r) ** -1.5)
    return float(total)


def mean_log_wkb(pot, s, route="1d", grid_degree=8, n_radial=16):
    """Sphere average of ``ln|WKB(s, theta)|`` at real ``s > 0``.

    ``route="1d"``: ``-(1/2) int V(r) sin(2 s r)/s dr``.
    ``route="3d"``: ``-(8 pi)^{-1} int sin(2 s|u|)/(s|u|^2) V(u) du`` on the
    shell product rule.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros(s.size)
    if route == "1d":
        for layer in pot.layers:
            r, w = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
            out -= 0.5 * (np.sin(2.0 * np.outer(s, r)) / s[:, None]) @ (w * layer.radial(r))
    elif route == "3d":
        q = shell_quadrature(pot.layers, build_grid(grid_degree), n_radial)
        u = np.linalg.norm(q.points, axis=1)
        kern = np.sin(2.0 * np.outer(s, u)) / (s[:, None] * u * u)
        out = -(kern @ q.coupling) / (8.0 * math.pi)
    else:
        raise ValueError(f"unknown route {route!r}")
    return out


@dataclass(frozen=True)
class J1Result:
    value: float
    shape: float
    fitted_C: float
    ibp_C: float

    @property
    def within_shape(self):
        return abs(self.value) <= self.ibp_C * self.shape * (1 + 1e-9) + 1e-15


def entropy_J1(pot, omega, route="1d", n=None):
    """``J1 = int_I omega(s) mean ln|WKB_n(s, .)| ds`` with the shape constants.

    ``ibp_C`` is the constant from one integration by parts in ``s``:
    ``|J1| <= TV(omega/s) (1 + R_1^{-2})^{3/2} / (16 pi) * shape``, where
    ``shape = int |V|(1+|u|^2)^{-3/2}``.
    """
    T = omega.triangle
    if n is None and len(pot):
        n = max(2 * int(omega.base.sum()), math.ceil(8.0 * (pot.layers[-1].outer_radius) * (T.b - T.a)))
    s, w = omega.base_rule(n)
    value = float(w @ mean_log_wkb(pot, s, route)) if len(pot) else 0.0
    shape = wkb4_shape(pot)
    m = omega.base
    phi = omega.density[m] / (T.a + omega.s[m])
    tv = float(np.sum(np.abs(np.diff(phi))) + abs(phi[0]) + abs(phi[-1]))
    r1 = pot.layers[0].inner_radius if len(pot) else math.inf
    ibp = tv * (1.0 + r1**-2) ** 1.5 / (16.0 * math.pi)
    fitted = abs(value) / shape if shape > 0 else 0.0
    return J1Result(value, shape, fitted, ibp)


def reduced_amplitude(f, pot, k):
    """``A~_n = A_n / WKB_n`` for a radial source behind symmetric shells."""
    A = radial_amplitude_oracle(f, pot, k)
    return complex(A * np.exp(wkb_exponent_symmetric(pot, k))) if len(pot) else A


class _ProbeSet:
    """Points where amplitudes are needed, with the source moments cached.

    ``A_n = M / F_n`` for a radial source, so ``M`` is computed once.
    """

    def __init__(self, f, omega, n_quad=None):
        T = omega.triangle
        self.s, self.w = omega.base_rule(n_quad)
        self.sides = omega.points[omega.sides]
        self.side_mass = omega.mass[omega.sides]
        self.k0 = T.k0
        pts = np.concatenate([self.s.astype(complex), self.sides, [self.k0]])
        self.points = pts
        self.moments = np.array([f.radial_moment(k) for k in pts])

    def amplitudes(self, pot):
        return self.moments / np.array([jost_value(pot, k) for k in self.points])

    def reduced(self, pot):
        A = self.amplitudes(pot)
        if not len(pot):
            return A
        return A * np.exp([wkb_exponent_symmetric(pot, k) for k in self.points])

    def split(self, values):
        nb, ns = self.s.size, self.sides.size
        return values[:nb], values[nb:nb + ns], values[-1]


def probe_point(T, f, threshold=1e-3, count=17):
    """Probe point on the axis of ``T`` maximizing ``min_theta |A^0(k)|``.

    Candidates sit at heights ``0.2 .. 0.6`` of the apex height.  For a
    radial source ``A^0`` does not depend on ``theta``.
    """
    if not f.is_radial:
        raise ValueError("probe search is implemented for radial sources")
    ys = np.linspace(0.2, 0.6, count) * T.height
    vals = [abs(f.radial_moment(complex(T.midpoint, y))) for y in ys]
    i = int(np.argmax(vals))
    if vals[i] <= threshold:
        raise CertificateFailure(f"|A0| <= {threshold} on every probe candidate")
    return complex(T.midpoint, ys[i])


@dataclass(frozen=True)
class J2Result:
    """``J2`` on the base and its mean-value lower bound.

    ``chain = ln|A~(k0)| - int_sides omega ln|A~|``; ``defect = value - chain``
    is nonnegative up to discretization for a subharmonic integrand.
    """

    value: float
    chain: float
    probe_modulus: float
    ok: bool
    message: str = ""

    @property
    def defect(self):
        return self.value - self.chain


def entropy_J2(f, pot, omega, threshold=1e-8, n_quad=None, probes=None):
    """``J2 = int_I omega(s) mean ln|A~_n(s, .)| ds`` and the mean-value chain.

    A vanishing reduced amplitude at ``k0`` or on the boundary gives a
    report with ``ok = False`` rather than an exception.
    """
    probes = _ProbeSet(f, omega, n_quad) if probes is None else probes
    base, side_vals, at_k0 = probes.split(np.abs(probes.reduced(pot)))
    smallest = min(at_k0, base.min(), side_vals.min())
    if not smallest > threshold:
        return J2Result(math.nan, math.nan, float(at_k0), False, f"|A~| <= {threshold} on the probe set")
    value = float(probes.w @ np.log(base))
    chain = float(math.log(at_k0) - probes.side_mass @ np.log(side_vals))
    return J2Result(value, chain, float(at_k0), True)


@dataclass(frozen=True)
class EntropyReport:
    n: int
    J1: float
    J2: float
    lhs: float
    offset: float
    J2_chain: float
    J1_shape: float
    J1_fitted_C: float
    certificate_ok: bool
    message: str = ""

    @property
    def jensen_ok(self):
        return bool(self.certificate_ok and self.lhs >= 2.0 * (self.J1 + self.J2))

    @property
    def jensen_gap(self):
        """``lhs - 2 (J1 + J2)``; at least ``offset`` by Jensen."""
        return self.lhs - 2.0 * (self.J1 + self.J2)

    def row(self):
        return {
            "n": self.n,
            "J1": self.J1,
            "J2": self.J2,
            "lhs": self.lhs,
            "jensen_ok": int(self.jensen_ok),
            "J2_chain": self.J2_chain,
            "offset": self.offset,
            "J1_fitted_C": self.J1_fitted_C,
        }


@dataclass(frozen=True)
class EntropyBound:
    """Per-``n`` reports with the certified threshold for ``min_n lhs``.

    ``threshold = offset + 2 (min_n J2_chain - ibp_C * shape(V))`` bounds every
    ``lhs`` from below since ``|J1_n| <= ibp_C shape(V_n)``.
    """

    reports: list
    threshold: float
    ibp_C: float = field(default=math.nan)

    @property
    def min_lhs(self):
        return min(r.lhs for r in self.reports)

    @property
    def uniform_ok(self):
        return bool(all(r.jensen_ok for r in self.reports) and self.min_lhs > self.threshold)


def log_spectral_density(f, pot, s):
    """``ln sigma'_n(s^2)`` at real ``s`` from the radial oracle."""
    A = np.array([radial_amplitude_oracle(f, pot, si) for si in np.atleast_1d(s)])
    return np.log(4.0 * np.asarray(s, dtype=float)) + 2.0 * np.log(np.abs(A))


def entropy_lower_bound(pot, f, omega, n_max=None, n_quad=None):
    """Entropy reports for ``V_0 .. V_{n_max}`` (symmetric shells, radial source)."""
    if not pot.is_symmetric or not f.is_radial:
        raise ValueError("entropy reports need symmetric shells and a radial source")
    n_max = len(pot) if n_max is None else int(n_max)
    probes = _ProbeSet(f, omega, n_quad)
    s, w = probes.s, probes.w
    offset = float(w @ np.log(4.0 * s))
    reports = []
    ibp = 0.0
    for n in range(n_max + 1):
        Vn = pot.truncate(n)
        j1 = entropy_J1(Vn, omega, n=n_quad)
        j2 = entropy_J2(f, Vn, omega, probes=probes)
        ibp = j1.ibp_C if n else ibp
        if not j2.ok:
            reports.append(EntropyReport(n, j1.value, math.nan, math.nan, offset, math.nan,
                                         j1.shape, j1.fitted_C, False, j2.message))
            continue
        A = probes.split(probes.amplitudes(Vn))[0]
        lhs = float(w @ (np.log(4.0 * s) + 2.0 * np.log(np.abs(A))))
        reports.append(EntropyReport(n, j1.value, j2.value, lhs, offset, j2.chain,
                                     j1.shape, j1.fitted_C, True))
    chains = [r.J2_chain for r in reports if r.certificate_ok]
    shape = wkb4_shape(pot.truncate(n_max))
    threshold = offset + 2.0 * (min(chains) - ibp * shape) if chains else math.nan
    return EntropyBound(reports, threshold, ibp)
