"""Free-space Green's function, few-layer Born solver and the recursion coefficients.

Volume integrals over a shell use a product rule: Gauss-Legendre in ``r``
over the unit-thickness shell times the sphere grid in angle.  In the Born
(Nystrom) sums the singular diagonal ``G0(x_i, x_i)`` is replaced by the
average of the kernel over a ball with the node's quadrature volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonConvergenceError, ResolutionError
from .operators import o_t_eigenvalues, required_degree, zonal_quadrature
from .potential import RadialProfile, SparsePotential
from .special import outgoing_factor, scaled_spherical_jn
from .sphere import SphericalField, sh_analyze, sh_synthesize, sph_harm

FOUR_PI = 4.0 * math.pi
DEFAULT_RADIAL_NODES = 8
MAX_BORN_LAYERS = 3
MAX_BORN_RADIUS = 1e3


@lru_cache(maxsize=64)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_nodes(a, b, n, breaks=()):
    """Composite Gauss-Legendre rule on ``[a, b]`` split at interior ``breaks``."""
    pts = [a] + sorted(x for x in breaks if a < x < b) + [b]
    x, w = _leggauss(n)
    nodes, weights = [], []
    for lo, hi in zip(pts, pts[1:]):
        h = 0.5 * (hi - lo)
        nodes.append(lo + h * (x + 1.0))
        weights.append(h * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _layer_breaks(layer):
    prof = layer.profile
    if isinstance(prof, RadialProfile):
        return tuple(layer.inner_radius + prof.offsets)
    return ()


@dataclass(frozen=True, eq=False)
class ShellQuadrature:
    """Quadrature nodes covering the shells of a potential."""

    points: np.ndarray
    weights: np.ndarray
    potential: np.ndarray

    @property
    def size(self):
        return self.weights.size

    @property
    def coupling(self):
        return self.potential * self.weights


def shell_quadrature(layers, grid, n_radial=DEFAULT_RADIAL_NODES):
    pts, wts, vals = [], [], []
    for layer in layers:
        r, wr = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
        for ri, wi in zip(r, wr):
            pts.append(ri * grid.nodes)
            wts.append(wi * ri * ri * grid.weights)
            vals.append(layer.on_sphere(ri, grid.nodes))
    if not pts:
        return ShellQuadrature(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    return ShellQuadrature(np.concatenate(pts), np.concatenate(wts), np.concatenate(vals))


def free_green(x, y, k):
    """``e^{ik|x-y|} / (4 pi |x-y|)``."""
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    return np.exp(1j * complex(k) * d) / (FOUR_PI * d)


def _self_cell(weights, k):
    # integral of e^{ik rho} / (4 pi rho) over the ball of equal volume
    a = np.cbrt(3.0 * weights / FOUR_PI)
    k = complex(k)
    return (np.exp(1j * k * a) * (a / (1j * k) + 1.0 / k**2) - 1.0 / k**2) / weights


def _apply_kernel(quad, k, u, chunk=512):
    """``(K u)_i = sum_j G0(x_i, x_j) V_j W_j u_j`` with the self-cell diagonal."""
    X = quad.points
    c = quad.coupling * u
    out = np.empty(quad.size, dtype=complex)
    k = complex(k)
    for start in range(0, quad.size, chunk):
        sl = slice(start, start + chunk)
        d = np.linalg.norm(X[sl, None, :] - X[None, :, :], axis=-1)
        idx = np.arange(sl.start, min(sl.stop, quad.size))
        d[idx - start, idx] = 1.0
        G = np.exp(1j * k * d) / (FOUR_PI * d)
        G[idx - start, idx] = _self_cell(quad.weights[idx], k)
        out[sl] = G @ c
    return out


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Source ``f(x) = g(|x|) Y_m^l(x/|x|)`` supported in the unit ball.

    Without a harmonic the source is radial, ``f(x) = g(|x|)``.
    """

    profile: RadialProfile
    harmonic: tuple = None

    def __post_init__(self):
        if self.profile.offsets[-1] > 1.0:
            raise ValueError("source must be supported in the unit ball")

    @classmethod
    def ball_indicator(cls, scale=1.0, harmonic=None):
        return cls(RadialProfile.constant(scale), harmonic)

    @property
    def is_radial(self):
        return self.harmonic is None

    @property
    def degree(self):
        return 0 if self.harmonic is None else self.harmonic[0]

    def radial_nodes(self, n=24):
        return gauss_nodes(0.0, 1.0, n, tuple(self.profile.offsets))

    @property
    def norm(self):
        r, w = self.radial_nodes()
        val = np.sum(w * r * r * self.profile(r) ** 2)
        return float(np.sqrt(val * (FOUR_PI if self.is_radial else 1.0)))

    def angular(self, directions):
        if self.is_radial:
            return np.ones(len(np.atleast_2d(directions)), dtype=complex)
        m, l = self.harmonic
        return sph_harm(m, l, directions)

    def radial_moment(self, k, n=24):
        """``int_0^1 r^2 g(r) j_m(kr) dr``."""
        r, w = self.radial_nodes(n)
        m = self.degree
        jm = np.array([scaled_spherical_jn(m, complex(k) * ri)[m] * np.exp(-1j * complex(k) * ri) for ri in r])
        return np.sum(w * r * r * self.profile(r) * jm)

    def scaled(self, c):
        return SourceSpec(self.profile.scaled(c), self.harmonic)


def free_amplitude_closed_form(f, k, directions):
    """``A^0`` from the plane-wave expansion: ``(-i)^m Y(theta) int r^2 g j_m(kr) dr``."""
    m = f.degree
    moment = f.radial_moment(k)
    return (-1j) ** m * f.angular(directions) * moment


def ball_amplitude(k):
    """Free amplitude of the unit-ball indicator, ``(sin k - k cos k) / k^3``."""
    k = complex(k)
    if abs(k) < 1e-3:
        return 1.0 / 3.0 - k * k / 30.0
    return (np.sin(k) - k * np.cos(k)) / k**3


def free_amplitude(f, k, grid, n_radial=24):
    """``A^0(f, k, theta) = (4 pi)^{-1} int e^{-ik<theta, x>} f(x) dx`` by ball quadrature."""
    k = complex(k)
    if k.imag < 0:
        raise ValueError("k must lie in the closed upper half-plane")
    if f.profile.sup() == 0.0:
        raise ValueError("zero source")
    need = 2 + math.ceil(abs(k))
    if grid.degree < need:
        raise ResolutionError(f"free_amplitude needs grid degree >= {need}", required_degree=need)
    r, wr = f.radial_nodes(n_radial)
    ang = f.angular(grid.nodes) * grid.weights
    cos = grid.nodes @ grid.nodes.T
    out = np.zeros(grid.size, dtype=complex)
    for ri, wi in zip(r, wr):
        g = f.profile(ri)
        if g == 0.0:
            continue
        out += (np.exp(-1j * k * ri * cos) @ ang) * (wi * ri * ri * g)
    return SphericalField(grid, out / FOUR_PI)


def incident_field(f, k, points):
    """Free solution ``(-Delta - k^2)^{-1} f`` at points outside the unit ball."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(p, axis=1)
    if np.any(r <= 1.0):
        raise ValueError("incident_field is only available outside the source support")
    w, _ = outgoing_factor(f.degree, complex(k) * r)
    return (
        (-1j) ** f.degree * f.radial_moment(k) * f.angular(p / r[:, None]) * w * np.exp(1j * complex(k) * r) / r
    )


@dataclass(frozen=True)
class GreenSample:
    x: np.ndarray
    y: np.ndarray
    k: complex
    value: complex
    free_part: complex
    delta: complex


@dataclass(frozen=True, eq=False)
class BornResult:
    amplitude: SphericalField
    error_bar: float
    orders: int
    contraction: float
    increments: tuple
    quadrature: ShellQuadrature = field(repr=False)
    total_field: np.ndarray = field(repr=False)
    greens: tuple = ()


def _far_phase(grid, quad, k):
    return np.exp(-1j * complex(k) * (grid.nodes @ quad.points.T))


def _born_series(quad, k, u0, order_cap, tol, measure):
    """Sum ``sum_p (-K)^p u0`` until ``measure(increment) < tol``.

    Returns ``(u, increment norms, contraction, last norm)``.
    """
    u = u0.copy()
    delta = u0
    norms = []
    growth = 0
    contraction = 0.0
    for _ in range(order_cap):
        delta = -_apply_kernel(quad, k, delta)
        u = u + delta
        nrm = measure(delta)
        if norms and norms[-1] > 0:
            contraction = nrm / norms[-1]
            growth = growth + 1 if contraction > 1.0 else 0
            if growth >= 3:
                raise NonConvergenceError(
                    f"Born series diverges (increment ratio {contraction:.3g})", contraction=contraction
                )
        norms.append(nrm)
        if nrm < tol:
            break
    return u, norms, contraction


def born_solve(f, pot, k, grid, order_cap=30, tol=1e-12, n_radial=DEFAULT_RADIAL_NODES, pairs=()):
    """Amplitude after the layers of ``pot`` by the Born series on shell nodes.

    ``pairs`` lists ``(x, y)`` points at which ``G = G0 + delta`` is sampled.
    The result's ``error_bar`` is the sup-norm of the last amplitude
    increment.
    """
    k = complex(k)
    if not isinstance(pot, SparsePotential):
        pot = SparsePotential(tuple(pot))
    if len(pot) > MAX_BORN_LAYERS:
        raise ValueError(f"born_solve handles at most {MAX_BORN_LAYERS} layers")
    if pot.layers and pot.outer_radius > MAX_BORN_RADIUS:
        raise ValueError(f"born_solve is restricted to radii <= {MAX_BORN_RADIUS:g}")
    if not k.imag > 0:
        raise ValueError("born_solve requires Im k > 0")
    if pot.layers and pot.radii[0] <= 1.0:
        raise ValueError("layers must lie outside the source support")
    A0 = free_amplitude(f, k, grid)
    quad = shell_quadrature(pot.layers, grid, n_radial)
    if quad.size == 0:
        return BornResult(A0, 0.0, 0, 0.0, (), quad, np.zeros(0, dtype=complex), _green_samples(quad, k, pairs, order_cap, tol))
    E = _far_phase(grid, quad, k) * (quad.coupling / FOUR_PI)

    def measure(delta):
        return float(np.max(np.abs(E @ delta)))

    u0 = incident_field(f, k, quad.points)
    u, norms, contraction = _born_series(quad, k, u0, order_cap, tol, measure)
    A = A0.values - E @ u
    err = norms[-1] if norms else 0.0
    greens = _green_samples(quad, k, pairs, order_cap, tol)
    return BornResult(SphericalField(grid, A), err, len(norms), contraction, tuple(norms), quad, u, greens)


def _green_samples(quad, k, pairs, order_cap, tol):
    out = []
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        free = complex(free_green(x, y, k))
        if quad.size == 0:
            out.append(GreenSample(x, y, k, free, free, 0.0))
            continue
        gy = free_green(quad.points, y, k)
        w, _, _ = _born_series(quad, k, gy, order_cap, tol * max(1.0, np.max(np.abs(gy))), lambda d: float(np.max(np.abs(d))))
        gx = free_green(x, quad.points, k)
        delta = complex(-np.sum(gx * quad.coupling * w))
        out.append(GreenSample(x, y, k, free + delta, free, delta))
    return tuple(out)


def far_field_remainder(f, pot, k, radii, grid, born=None, **born_kwargs):
    """``sup_theta |rho(x, k)|`` with ``u = e^{ik|x|}/|x| (A + rho)`` at each radius."""
    k = complex(k)
    radii = np.asarray(radii, dtype=float)
    floor = max(1.0, pot.outer_radius if len(pot) else 1.0)
    if np.any(radii <= floor):
        raise ValueError(f"radii must exceed the outermost support radius {floor}")
    if born is None:
        born = born_solve(f, pot, k, grid, **born_kwargs)
    quad = born.quadrature
    rows = []
    m = f.degree
    moment = f.radial_moment(k)
    ang = f.angular(grid.nodes)
    for r in radii:
        x = r * grid.nodes
        w, _ = outgoing_factor(m, k * r)
        scaled = (-1j) ** m * moment * ang * w
        if quad.size:
            d = np.linalg.norm(x[:, None, :] - quad.points[None, :, :], axis=-1)
            kern = np.exp(1j * k * (d - r)) * (r / (FOUR_PI * d))
            scaled = scaled - kern @ (quad.coupling * born.total_field)
        rho = scaled - born.amplitude.values
        rows.append((float(r), float(np.max(np.abs(rho)))))
    return rows


def kappa(layer, k, grid, route="diagonal", n_radial=DEFAULT_RADIAL_NODES):
    """``kappa(theta) = (4 pi)^{-1} int v(u)/|u| e^{ik(|u| - <theta, u>)} du`` over one layer.

    This is ``int_R^{R+1} O_t q_t dt`` applied to the constant 1.  The
    ``"diagonal"`` route multiplies the harmonic coefficients of each
    ``q_t`` by the closed-form eigenvalues of ``O_t``; ``"quadrature"``
    sums the shell product rule directly.
    """
    k = complex(k)
    r, wr = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
    if route == "quadrature":
        need = required_degree(k, layer.outer_radius)
        if grid.degree < need:
            raise ResolutionError(f"kappa quadrature needs grid degree >= {need}", required_degree=need)
        out = np.zeros(grid.size, dtype=complex)
        for ri, wi in zip(r, wr):
            q = layer.on_sphere(ri, grid.nodes)
            if np.any(q):
                out += wi * zonal_quadrature(grid, q, k, ri)
        return SphericalField(grid, out)
    if route != "diagonal":
        raise ValueError(f"unknown route {route!r}")
    if layer.is_symmetric:
        # constant q_t: only the degree-0 eigenvalue (e^{2ikt} - 1)/(2ik) contributes
        lam0 = np.array([o_t_eigenvalues(0, ri, k)[0] for ri in r])
        val = np.sum(wr * lam0 * layer.radial(r))
        return SphericalField.constant(grid, val)
    acc = grid.zeros()
    for ri, wi in zip(r, wr):
        q = layer.on_sphere(ri, grid.nodes)
        if np.any(q):
            acc += wi * sh_analyze(grid, q) * o_t_eigenvalues(grid.degree, ri, k)[:, None]
    return SphericalField(grid, sh_synthesize(grid, acc))


def kappa_symmetric_closed_form(R, v, k):
    """``v int_R^{R+1} (e^{2ikr} - 1)/(2ik) dr`` for a constant shell."""
    k = complex(k)
    return v * ((np.exp(2j * k * (R + 1.0)) - np.exp(2j * k * R)) / (2j * k) ** 2 - 1.0 / (2j * k))


def _radial_kernel(r, s, k):
    """``e^{-ikr} j0(k min) h0(k max) e^{iks}``, bounded for ``Im k >= 0``."""
    R, S = np.meshgrid(r, s, indexing="ij")
    inner = -(np.exp(2j * k * S) - 1.0) / (2.0 * k * k * R * S)
    outer = -(np.exp(2j * k * S) - np.exp(2j * k * (S - R))) / (2.0 * k * k * R * S)
    return np.where(S <= R, inner, outer)


@dataclass(frozen=True)
class BetaResult:
    field: SphericalField
    error_bar: float
    orders: int


def beta(layer, k, grid, born_order=8, route="auto", n_radial=None, tol=1e-15):
    """Quadratic recursion coefficient of one layer.

    ``beta(theta) = (4 pi)^{-1} int e^{-ik<theta,u>} v(u) int G(u,s) v(s) e^{ik|s|}/|s| ds du``
    with the layer's own resolvent ``G`` expanded to ``born_order`` Born
    terms (order 0 is ``G0``).  Symmetric layers use the exact radial
    reduction (``route="radial"``); other layers use shell Nystrom sums
    (``route="shell"``).
    """
    k = complex(k)
    if not k.imag > 0:
        raise ValueError("beta requires Im k > 0")
    if route == "auto":
        route = "radial" if layer.is_symmetric else "shell"
    if route == "radial":
        val, err, orders = beta_radial(layer, k, born_order, n_radial or 64, tol)
        return BetaResult(SphericalField.constant(grid, val), err, orders)
    if route != "shell":
        raise ValueError(f"unknown route {route!r}")
    quad = shell_quadrature([layer], grid, n_radial or DEFAULT_RADIAL_NODES)
    if not np.any(quad.potential):
        return BetaResult(SphericalField.constant(grid, 0.0), 0.0, 0)
    rad = np.linalg.norm(quad.points, axis=1)
    E = _far_phase(grid, quad, k) * (quad.coupling / FOUR_PI)
    # Phi = sum_p (-K)^p G0 [v e^{ik|s|}/|s|] on the shell nodes
    delta = _apply_kernel(quad, k, np.exp(1j * k * rad) / rad)
    total = delta.copy()
    norms = [float(np.max(np.abs(E @ delta)))]
    for _ in range(born_order):
        delta = -_apply_kernel(quad, k, delta)
        total = total + delta
        norms.append(float(np.max(np.abs(E @ delta))))
        if norms[-1] < tol:
            break
    return BetaResult(SphericalField(grid, E @ total), norms[-1] if len(norms) > 1 else norms[0], len(norms))


def beta_radial(layer, k, born_order=8, n_radial=64, tol=1e-15):
    """Radial reduction of ``beta`` for a symmetric layer; returns ``(value, error_bar, terms)``."""
    k = complex(k)
    r, wr = gauss_nodes(layer.inner_radius, layer.outer_radius, n_radial, _layer_breaks(layer))
    v = layer.radial(r)
    K = _radial_kernel(r, r, k)
    # Psi_0(r) = ik int s^2 v(s)/s K(r,s) ds ; Psi_{p+1} = -ik int s^2 v Psi_p K ds
    M = 1j * k * K * (wr * r * r * v)[None, :]
    outer = wr * r * r * v * (np.exp(2j * k * r) - 1.0) / (2j * k * r)
    psi = M @ (1.0 / r)
    total = outer @ psi
    err = abs(total)
    terms = 1
    for _ in range(born_order):
        psi = -(M @ psi)
        inc = outer @ psi
        total += inc
        err = abs(inc)
        terms += 1
        if err < tol:
            break
    return complex(total), float(err), terms
