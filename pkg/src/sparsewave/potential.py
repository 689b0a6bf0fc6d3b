"""Sparse potentials supported on concentric unit-thickness spherical shells."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidPotentialError
from .sphere import real_sph_harm

THICKNESS = 1.0


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Piecewise-linear radial table over the shell, indexed by depth ``s = r - R`` in [0, 1]."""

    offsets: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.offsets, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 2:
            raise InvalidPotentialError("radial table needs at least two (r, value) pairs")
        if np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] > THICKNESS:
            raise InvalidPotentialError("radial table offsets must increase within [0, 1]")
        object.__setattr__(self, "offsets", s)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value):
        return cls(np.array([0.0, THICKNESS]), np.array([value, value], dtype=float))

    def __call__(self, s):
        return np.interp(s, self.offsets, self.values, left=0.0, right=0.0)

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def scaled(self, c):
        return RadialProfile(self.offsets, c * self.values)

    @property
    def is_constant(self):
        return (
            self.offsets[0] == 0.0
            and self.offsets[-1] == THICKNESS
            and np.all(self.values == self.values[0])
        )


@dataclass(frozen=True, eq=False)
class HarmonicProfile:
    """Sum of radial tables times real spherical harmonics ``(degree, order, table)``."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((int(m), int(l), t) for m, l, t in self.terms)
        for m, l, _ in terms:
            if m < 0 or abs(l) > m:
                raise InvalidPotentialError(f"invalid harmonic index ({m}, {l})")
        object.__setattr__(self, "terms", terms)

    def __call__(self, s, directions):
        out = np.zeros(np.shape(s))
        for m, l, table in self.terms:
            out = out + table(s) * real_sph_harm(m, l, directions)
        return out

    def sup(self):
        # |Y_m^l| <= sqrt((2m+1)/4pi), the real combination picks up sqrt(2)
        total = 0.0
        for m, l, table in self.terms:
            ymax = math.sqrt((2 * m + 1) / (4 * math.pi)) * (1.0 if l == 0 else math.sqrt(2.0))
            total += table.sup() * ymax
        return total

    def scaled(self, c):
        return HarmonicProfile(tuple((m, l, t.scaled(c)) for m, l, t in self.terms))

    @property
    def max_degree(self):
        return max((m for m, _, _ in self.terms), default=0)


def bump_shape(d, radius):
    """Smooth compact bump with peak 1 at the center."""
    x = np.clip(1.0 - (d / radius) ** 2, 0.0, None)
    return x * x


@dataclass(frozen=True, eq=False)
class BumpEnsemble:
    """Random bumps in small disjoint balls inside one shell.

    Amplitudes are ``scale * w_j`` with i.i.d. mean-zero ``w_j`` drawn from
    ``distribution`` (``"rademacher"`` or ``"uniform"`` on [-1, 1]) by a
    generator seeded with ``seed``; evaluation is a pure function of
    ``(seed, x)``.
    """

    centers: np.ndarray
    radii: np.ndarray
    scale: float
    distribution: str = "rademacher"
    seed: int = 0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.broadcast_to(np.asarray(self.radii, dtype=float), (c.shape[0],)).copy()
        if self.distribution not in ("rademacher", "uniform"):
            raise InvalidPotentialError(f"unknown amplitude distribution {self.distribution!r}")
        if r.size > 1:
            for i, j in cKDTree(c).query_pairs(2.0 * float(r.max())):
                if np.linalg.norm(c[i] - c[j]) < r[i] + r[j]:
                    raise InvalidPotentialError("bump balls must not intersect")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)

    @classmethod
    def on_shell(cls, R, count, radius, scale, distribution="rademacher", seed=0):
        """``count`` bumps on a Fibonacci lattice of the mid-sphere of the shell ``(R, R+1)``."""
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        s = np.sqrt(1.0 - z * z)
        dirs = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        return cls((R + 0.5) * dirs, radius, scale, distribution, seed)

    def draw(self, rng):
        n = self.radii.size
        if self.distribution == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=n)
        return rng.uniform(-1.0, 1.0, size=n)

    @cached_property
    def amplitudes(self):
        return self.scale * self.draw(np.random.default_rng(self.seed))

    def shapes(self, points):
        """Per-bump shape values at ``points``, shape ``(n_points, n_bumps)``."""
        p = np.atleast_2d(points)
        d = np.linalg.norm(p[:, None, :] - self.centers[None, :, :], axis=-1)
        return bump_shape(d, self.radii[None, :])

    def __call__(self, points):
        return self.shapes(points) @ self.amplitudes

    def sup(self):
        return float(np.max(np.abs(self.amplitudes))) if self.radii.size else 0.0

    def scaled(self, c):
        return replace(self, scale=c * self.scale)


@dataclass(frozen=True, eq=False)
class LayerSpec:
    """One shell ``{R < |x| < R + 1}`` with its profile and sup bound ``v``."""

    inner_radius: float
    profile: object
    index: int = 0
    bound: float = field(default=None)

    def __post_init__(self):
        if not self.inner_radius > 0:
            raise InvalidPotentialError("inner radius must be positive")
        if isinstance(self.profile, BumpEnsemble):
            r = np.linalg.norm(self.profile.centers, axis=1)
            if np.any(r - self.profile.radii <= self.inner_radius) or np.any(
                r + self.profile.radii >= self.inner_radius + THICKNESS
            ):
                raise InvalidPotentialError("bumps must lie inside the shell")
        certified = self.profile.sup()
        if self.bound is None:
            object.__setattr__(self, "bound", certified)
        elif self.bound < certified - 1e-12 * max(1.0, certified):
            raise InvalidPotentialError(
                f"declared bound {self.bound} is below the certified sup {certified}"
            )

    @classmethod
    def symmetric(cls, R, v, index=0):
        return cls(float(R), RadialProfile.constant(v), index=index)

    @property
    def thickness(self):
        return THICKNESS

    @property
    def outer_radius(self):
        return self.inner_radius + THICKNESS

    @property
    def is_symmetric(self):
        return isinstance(self.profile, RadialProfile)

    def radial(self, r):
        """Radial profile at radius ``r`` (symmetric layers only)."""
        if not self.is_symmetric:
            raise InvalidPotentialError("layer is not spherically symmetric")
        r = np.asarray(r, dtype=float)
        inside = (r > self.inner_radius) & (r < self.outer_radius)
        return np.where(inside, self.profile(r - self.inner_radius), 0.0)

    def on_sphere(self, r, directions):
        """Profile values ``q_r(theta)`` on the sphere of radius ``r``."""
        directions = np.atleast_2d(directions)
        if not self.inner_radius < r < self.outer_radius:
            return np.zeros(len(directions))
        s = r - self.inner_radius
        if isinstance(self.profile, RadialProfile):
            return np.full(len(directions), float(self.profile(s)))
        if isinstance(self.profile, HarmonicProfile):
            return self.profile(np.full(len(directions), s), directions)
        return self.profile(r * directions)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(p, axis=1)
        inside = (r > self.inner_radius) & (r < self.outer_radius)
        out = np.zeros(len(p))
        if not np.any(inside):
            return out
        pi, ri = p[inside], r[inside]
        if isinstance(self.profile, RadialProfile):
            out[inside] = self.profile(ri - self.inner_radius)
        elif isinstance(self.profile, HarmonicProfile):
            out[inside] = self.profile(ri - self.inner_radius, pi / ri[:, None])
        else:
            out[inside] = self.profile(pi)
        return out

    def scaled(self, c):
        return LayerSpec(self.inner_radius, self.profile.scaled(c), index=self.index)

    def moved(self, R):
        """Same profile on the shell starting at ``R`` (bumps are translated radially)."""
        prof = self.profile
        if isinstance(prof, BumpEnsemble):
            rc = np.linalg.norm(prof.centers, axis=1)
            centers = prof.centers * ((rc - self.inner_radius + R) / rc)[:, None]
            prof = replace(prof, centers=centers)
        return LayerSpec(float(R), prof, index=self.index)


@dataclass(frozen=True, eq=False)
class SparsePotential:
    """Ordered disjoint shells; ``V_n`` is the sum of the first ``n``."""

    layers: tuple = ()

    def __post_init__(self):
        layers = tuple(replace(l, index=i) if l.index != i else l for i, l in enumerate(self.layers))
        for a, b in zip(layers, layers[1:]):
            if not b.inner_radius > a.inner_radius:
                raise InvalidPotentialError("layer radii must be strictly increasing")
            if not a.outer_radius < b.inner_radius:
                raise InvalidPotentialError(
                    f"shells at R={a.inner_radius} and R={b.inner_radius} overlap"
                )
        object.__setattr__(self, "layers", layers)

    @classmethod
    def symmetric(cls, radii, strengths):
        return cls(tuple(LayerSpec.symmetric(R, v) for R, v in zip(radii, strengths)))

    def __len__(self):
        return len(self.layers)

    @property
    def radii(self):
        return np.array([l.inner_radius for l in self.layers])

    @property
    def bounds(self):
        return np.array([l.bound for l in self.layers])

    @property
    def l2_norm(self):
        return float(np.linalg.norm(self.bounds)) if self.layers else 0.0

    @property
    def is_symmetric(self):
        return all(l.is_symmetric for l in self.layers)

    @property
    def outer_radius(self):
        return self.layers[-1].outer_radius if self.layers else 0.0

    def truncate(self, n):
        """Keep the first ``n`` layers (``V_n``)."""
        return SparsePotential(self.layers[:n])

    def outside(self, R):
        """``chi_{|x|>R} V``: drop the layers with ``R_n + 1 <= R``.

        A layer cut by the sphere ``|x| = R`` has no sensible unit-shell
        representation and is rejected.
        """
        kept = []
        for l in self.layers:
            if l.outer_radius <= R:
                continue
            if l.inner_radius < R:
                raise InvalidPotentialError(f"truncation radius {R} cuts the shell at {l.inner_radius}")
            kept.append(l)
        return SparsePotential(tuple(kept))

    def scaled(self, c):
        return SparsePotential(tuple(l.scaled(c) for l in self.layers))

    def evaluate(self, x):
        """``V(x)`` at one point or an array of points; 0 outside every shell."""
        p = np.asarray(x, dtype=float)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        out = np.zeros(len(p))
        for l in self.layers:
            out += l(p)
        return float(out[0]) if single else out

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for l in self.layers:
            out = out + l.radial(r)
        return out


def layer_l2_profile(pot):
    """Per-layer certified bounds ``(n, v_n)`` and the l2 norm of the sequence."""
    rows = [(l.index, float(l.bound)) for l in pot.layers]
    return rows, pot.l2_norm


@dataclass(frozen=True)
class SparsenessReport:
    """Sparseness diagnostics, one entry per consecutive pair ``(R_n, R_{n+1})``."""

    log_sigma: np.ndarray
    doubling: np.ndarray
    sigma_small: np.ndarray
    tail_small: np.ndarray
    gap_large: np.ndarray
    alpha_ok: np.ndarray
    alpha: float

    @property
    def alpha_schedule_ok(self):
        return bool(np.all(self.alpha_ok))

    @property
    def all_ok(self):
        return bool(
            np.all(self.doubling)
            and np.all(self.sigma_small)
            and np.all(self.tail_small)
            and np.all(self.gap_large)
            and self.alpha_schedule_ok
        )

    def rows(self):
        for n in range(self.log_sigma.size):
            yield (
                n,
                float(self.log_sigma[n]),
                bool(self.doubling[n]),
                bool(self.sigma_small[n]),
                bool(self.tail_small[n]),
                bool(self.gap_large[n]),
                bool(self.alpha_ok[n]),
            )


def _log_diff(la, lb):
    # log(e^la - e^lb) for la > lb
    return la + np.log1p(-np.exp(lb - la))


def validate_sparseness_log(log_radii, alpha):
    """Sparseness flags from ``log R_n``; usable for radii far beyond float range.

    Each condition compares logarithms, so ``sigma_n = R_n^3.5 e^{R_n} /
    (R_{n+1} - R_n)`` never has to be formed.  The ``alpha`` flag accepts
    equality, which the iterated schedule ``R_{n+1} = e^{alpha R_n}``
    produces exactly.
    """
    lr = np.asarray(log_radii, dtype=float)
    if lr.size < 2:
        raise InvalidPotentialError("sparseness needs at least two layers")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if np.any(np.diff(lr) <= 0):
        raise InvalidPotentialError("layer radii must be strictly increasing")
    n = np.arange(lr.size - 1, dtype=float)
    a, b = lr[:-1], lr[1:]
    R = np.exp(np.minimum(a, 700.0))
    R = np.where(a > 700.0, np.inf, R)
    log_gap = _log_diff(b, a)
    log_sigma = 3.5 * a + R - log_gap
    doubling = b > a + math.log(2.0)
    sigma_small = log_sigma < -n
    with np.errstate(divide="ignore"):
        log_tail = np.log(n) + a - 0.5 * b
    tail_small = log_tail < -2.0 * n
    with np.errstate(divide="ignore"):
        gap_large = np.log(n) < log_gap
    alpha_ok = b >= alpha * R * (1.0 - 1e-12)
    return SparsenessReport(log_sigma, doubling, sigma_small, tail_small, gap_large, alpha_ok, alpha)


def validate_sparseness(pot, alpha):
    """Certify the sparseness conditions for ``pot``'s radii."""
    radii = pot.radii if isinstance(pot, SparsePotential) else np.asarray(pot, dtype=float)
    if radii.size < 2:
        raise InvalidPotentialError("sparseness needs at least two layers")
    if np.any(np.diff(radii) <= 0):
        raise InvalidPotentialError("layer radii must be strictly increasing")
    return validate_sparseness_log(np.log(radii), alpha)


def iterated_log_schedule(R0, alpha, count):
    """``log R_n`` for ``R_{n+1} = exp(alpha R_n)``, kept in log form."""
    out = [math.log(R0)]
    for _ in range(count - 1):
        prev = out[-1]
        out.append(alpha * math.exp(prev) if prev < 700 else math.inf)
    return np.array(out)


def validate_iterated_schedule(R0, alpha, count):
    """Sparseness flags for ``R_{n+1} = exp(alpha R_n)`` using that relation exactly.

    With ``ln R_{n+1} = alpha R_n`` every condition is a function of
    ``R_n`` alone: ``ln sigma_n = 3.5 ln R_n + (1 - alpha) R_n - log1p(-R_n e^{-alpha R_n})``
    and ``ln(n R_n R_{n+1}^{-1/2}) = ln n + ln R_n - alpha R_n / 2``.  Once
    ``R_n`` overflows those logs are ``-inf``, which decides every flag.
    """
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    log_r = iterated_log_schedule(R0, alpha, count)[:-1]
    n = np.arange(log_r.size, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        R = np.exp(log_r)
        big = ~np.isfinite(R)
        log_gap = np.where(big, np.inf, alpha * R + np.log1p(-R * np.exp(-alpha * R)))
        log_sigma = np.where(big, -np.inf, 3.5 * log_r + R - log_gap)
        log_tail = np.where(big, -np.inf, np.log(n) + log_r - 0.5 * alpha * R)
        gap_large = np.log(n) < log_gap
    doubling = np.where(big, True, alpha * R > log_r + math.log(2.0))
    ones = np.ones(n.size, dtype=bool)
    return SparsenessReport(log_sigma, doubling, log_sigma < -n, log_tail < -2.0 * n, gap_large, ones, alpha)
