"""Radial channels: outgoing solutions, the Jost-function amplitude oracle,
gap growth across potential-free regions, and the eigenvalue-absence check.

Channel ``m`` of a symmetric potential solves
``-u'' + [m(m+1)/r^2 + V(r) - k^2] u = 0`` with ``u = r psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidPotentialError, StepSizeError, StiffnessError
from .greens import _layer_breaks
from .potential import SparsePotential
from .special import outgoing_factor
from .towers import Tower, ratio

RTOL = 1e-10
OVERFLOW_GUARD = 1e250


def _require_symmetric(pot):
    if not isinstance(pot, SparsePotential) or not pot.is_symmetric:
        raise InvalidPotentialError("radial channels need a symmetric SparsePotential")


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Outgoing (or incoming) solution of one channel on an ``r`` grid.

    Stored in scaled form ``w = u e^{-ikr}`` (outgoing) or ``w = u e^{ikr}``
    (incoming) to keep the values bounded for ``Im k >= 0``.
    """

    m: int
    k: complex
    r: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    outgoing: bool = True
    support: float = 0.0

    @property
    def _sign(self):
        return 1.0 if self.outgoing else -1.0

    @property
    def u(self):
        return self.w * np.exp(self._sign * 1j * self.k * self.r)

    @property
    def du(self):
        s = self._sign * 1j * self.k
        return (self.dw + s * self.w) * np.exp(s * self.r)

    def tail_ratio(self):
        """``w / w_m(kr)`` beyond the last shell; identically 1 for an exact solution."""
        sel = self.r >= self.support
        z = self._sign * self.k * self.r[sel]
        ref, _ = outgoing_factor(self.m, z)
        return self.w[sel] / ref


def wronskian(a, b):
    """``u_a u_b' - u_a' u_b`` on the common grid of two solutions."""
    if a.r.shape != b.r.shape or not np.allclose(a.r, b.r):
        raise ValueError("solutions must share the r grid")
    return a.u * b.du - a.du * b.u


def _segments(pot, r_min, r_max):
    pts = {r_min, r_max}
    for layer in pot.layers:
        for x in (layer.inner_radius, layer.outer_radius, *_layer_breaks(layer)):
            if r_min < x < r_max:
                pts.add(float(x))
    return sorted(pts, reverse=True)


def solve_radial(pot, m, k, r_max=None, r_min=0.05, outgoing=True, points_per_unit=8, rtol=RTOL):
    """Channel-``m`` solution matched to the outgoing (or incoming) wave at ``r_max``.

    Integrates ``w'' + 2i s k w' - (m(m+1)/r^2 + V) w = 0`` inward, ``s = +1``
    outgoing and ``-1`` incoming, with DOP853.  Raises
    :class:`StiffnessError` if the solution leaves the double range before
    ``r_min``.
    """
    _require_symmetric(pot)
    if not 0 <= m <= 64:
        raise ValueError("channel index must lie in 0..64")
    k = complex(k)
    if k.imag < 0:
        raise ValueError("k must lie in the closed upper half-plane")
    support = pot.outer_radius if len(pot) else 0.0
    if r_max is None:
        r_max = support + 10.0
    if r_max < support + 10.0:
        raise ValueError("r_max must lie at least 10 beyond the last shell")
    s = 1.0 if outgoing else -1.0
    cent = m * (m + 1.0)

    def rhs(r, y):
        w, dw = y
        q = cent / (r * r) + float(pot.radial(np.array([r]))[0])
        return [dw, -2j * s * k * dw + q * w]

    z = s * k * r_max
    w0, dz0 = outgoing_factor(m, z)
    y = np.array([complex(w0), complex(s * k * dz0)])
    rs, ws, dws = [np.array([r_max])], [np.array([y[0]])], [np.array([y[1]])]
    edges = _segments(pot, r_min, r_max)
    for hi, lo in zip(edges[:-1], edges[1:]):
        n = max(2, int(math.ceil((hi - lo) * points_per_unit)) + 1)
        grid = np.linspace(hi, lo, n)
        sol = solve_ivp(rhs, (hi, lo), y, method="DOP853", t_eval=grid, rtol=rtol, atol=1e-14)
        if not sol.success:
            raise StepSizeError(f"radial integration failed on [{lo}, {hi}]: {sol.message}")
        big = np.abs(sol.y[0]) > OVERFLOW_GUARD
        if np.any(big):
            raise StiffnessError(
                f"channel {m} overflows below r = {sol.t[np.argmax(big) - 1]:.6g}",
                smallest_reliable_r=float(sol.t[max(np.argmax(big) - 1, 0)]),
            )
        y = sol.y[:, -1]
        rs.append(sol.t[1:])
        ws.append(sol.y[0, 1:])
        dws.append(sol.y[1, 1:])
    r = np.concatenate(rs)[::-1]
    return RadialSolution(
        m,
        k,
        r,
        np.concatenate(ws)[::-1],
        np.concatenate(dws)[::-1],
        outgoing,
        support,
    )


def _jost_sweep(layers, k, rtol):
    """Inward sweep of ``(a, c)`` with ``u = e^{ikr}(a + c)``; returns ``F = u(0)``.

    ``a' = V(a + c)/(2ik)`` and ``c' = -V(a + c)/(2ik) - 2ik c``.  Between
    shells ``a`` is frozen and ``c`` picks up ``e^{2ik(r_0 - r)}``.
    """
    a, c = 1.0 + 0.0j, 0.0 + 0.0j
    r_here = None
    for layer in reversed(layers):
        if r_here is not None:
            c *= np.exp(2j * k * (r_here - layer.outer_radius))

        def rhs(r, y, layer=layer):
            v = float(layer.radial(np.array([r]))[0]) / (2j * k)
            s = v * (y[0] + y[1])
            return [s, -s - 2j * k * y[1]]

        edges = sorted({layer.inner_radius, layer.outer_radius, *(
            x for x in _layer_breaks(layer) if layer.inner_radius < x < layer.outer_radius)}, reverse=True)
        y = np.array([a, c])
        for hi, lo in zip(edges[:-1], edges[1:]):
            sol = solve_ivp(rhs, (hi, lo), y, method="DOP853", rtol=rtol, atol=1e-15)
            if not sol.success:
                raise StepSizeError(sol.message)
            y = sol.y[:, -1]
        a, c = y
        r_here = layer.inner_radius
    if r_here is None:
        return 1.0 + 0.0j
    return complex(a + c * np.exp(2j * k * r_here))


def _constant_pieces(layer):
    """``[(lo, hi, v), ...]`` when the shell profile is piecewise constant, else ``None``."""
    x = np.asarray(layer.profile.offsets, dtype=float)
    y = np.asarray(layer.profile.values, dtype=float)
    pieces = []
    for x0, x1, y0, y1 in zip(x[:-1], x[1:], y[:-1], y[1:]):
        if x1 <= x0:
            continue
        if y0 != y1:
            return None
        pieces.append((layer.inner_radius + x0, layer.inner_radius + x1, y0))
    return pieces


def _jost_transfer(pieces, k):
    """Exact inward transfer of ``(u, u')`` through constant pieces, then free to 0.

    A running complex log scale keeps the state normalized.
    """
    r = pieces[-1][1]
    steps = []
    for lo, hi, v in reversed(pieces):
        if hi < r:
            steps.append((hi, r, 0.0))
        steps.append((lo, hi, v))
        r = lo
    steps.append((0.0, r, 0.0))
    state = np.array([1.0, 1j * k])
    log_scale = 1j * k * pieces[-1][1]
    for a, b, w in steps:
        q = np.sqrt(k * k - w + 0j)
        d = b - a
        c = np.cos(q * d)
        sinc = d if abs(q * d) < 1e-8 else np.sin(q * d) / q
        state = np.array([c * state[0] - sinc * state[1], q * q * sinc * state[0] + c * state[1]])
        norm = np.max(np.abs(state))
        state = state / norm
        log_scale += np.log(norm)
    return complex(np.exp(log_scale) * state[0])


def jost_value(pot, k, rtol=1e-12, method="auto"):
    """``F(k) = u(0)`` for the channel-0 solution with ``u = e^{ikr}`` outside.

    ``method="transfer"`` uses exact transfer matrices and needs piecewise
    constant shells; ``"ode"`` integrates; ``"auto"`` picks the former when possible.
    """
    _require_symmetric(pot)
    k = complex(k)
    if not len(pot):
        return 1.0 + 0.0j
    if method in ("auto", "transfer"):
        pieces = [_constant_pieces(l) for l in pot.layers]
        if all(p is not None for p in pieces):
            return _jost_transfer([q for p in pieces for q in p], k)
        if method == "transfer":
            raise InvalidPotentialError("transfer method needs piecewise constant shells")
    elif method != "ode":
        raise ValueError(f"unknown method {method!r}")
    return _jost_sweep(list(pot.layers), k, rtol)


def radial_amplitude_oracle(f, pot, k, rtol=1e-12):
    """Far-field amplitude of a radial source behind symmetric shells.

    The outgoing solution of ``(H - k^2) u = f`` is
    ``u(r) = F^{-1} e^{ikr}/r int s sin(ks)/k f(s) ds`` outside the
    potential (the source sits in the free unit ball), hence ``A = A^0/F``.
    """
    if not f.is_radial:
        raise ValueError("the oracle needs a radial source")
    k = complex(k)
    if k.imag < 0 or k == 0 or (k.imag == 0 and k.real < 0):
        raise ValueError("radial_amplitude_oracle requires Im k > 0 or real k > 0")
    _require_symmetric(pot)
    if len(pot) and pot.radii[0] <= 1.0:
        raise InvalidPotentialError("shells must lie outside the unit ball")
    return complex(f.radial_moment(k) / jost_value(pot, k, rtol))


def radial_amplitudes(f, pot, k, rtol=1e-12):
    """Oracle amplitude after each number of layers ``n = 0..N``."""
    return [radial_amplitude_oracle(f, pot.truncate(n), k, rtol) for n in range(len(pot) + 1)]


# --- gap growth -----------------------------------------------------------

PRUFER_FACTORS = {"rigorous": 1.0, "halved": 2.0}


def prufer_quantity(f, fp, E):
    return np.abs(f) ** 2 + np.abs(fp) ** 2 / E


def prufer_log_factor(m, E, r_n, r, convention="rigorous"):
    """``-m(m+1)(r - r_n) / (c sqrt(E) r r_n)`` with ``c = 1`` (rigorous) or ``2`` (halved)."""
    if not E > 0:
        raise ValueError("energy must be positive")
    c = PRUFER_FACTORS[convention]
    return -m * (m + 1.0) * (r - r_n) / (c * math.sqrt(E) * r * r_n)


def prufer_gap_bound(m, E, r_n, r, f_n, fp_n, convention="rigorous"):
    """Lower bound on ``|f(r)|^2 + |f'(r)|^2/E`` across a potential-free gap.

    From ``Q = f^2 + f'^2/E``: ``Q' = 2 f f' m(m+1)/(E r^2)`` and
    ``|2 f f'| <= sqrt(E) Q``, so ``Q(r) >= Q(r_n) exp[-m(m+1)(r - r_n)/(sqrt(E) r r_n)]``.
    ``convention="halved"`` halves the exponent.
    """
    return float(prufer_quantity(f_n, fp_n, E) * math.exp(prufer_log_factor(m, E, r_n, r, convention)))


@dataclass(frozen=True)
class PruferCheck:
    trials: int
    violations: int
    worst_deficit: float
    m0_drift: float


def prufer_property_check(trials=1000, seed=0, convention="rigorous", m_max=10, E_range=(0.25, 4.0),
                          r_range=(10.0, 50.0), gap_range=(0.1, 20.0), samples=64):
    """Integrate random gap problems and count violations of the bound.

    Each trial draws ``m``, ``E``, ``r_n``, the gap and a phase, integrates the
    free channel equation with DOP853 and checks the bound at ``samples``
    points.  ``m0_drift`` is the largest relative change of ``Q`` seen in the
    ``m = 0`` trials (exactly conserved).
    """
    rng = np.random.default_rng(seed)
    violations, worst, drift = 0, 0.0, 0.0
    for _ in range(trials):
        m = int(rng.integers(0, m_max + 1))
        E = rng.uniform(*E_range)
        r_n = rng.uniform(*r_range)
        gap = rng.uniform(*gap_range)
        phase = rng.uniform(0.0, 2 * math.pi)
        y0 = [math.cos(phase), math.sqrt(E) * math.sin(phase)]
        c = m * (m + 1.0)
        rs = np.linspace(r_n, r_n + gap, samples + 1)[1:]
        sol = solve_ivp(lambda r, y: [y[1], (c / (r * r) - E) * y[0]], (r_n, r_n + gap), y0,
                        method="DOP853", rtol=1e-12, atol=1e-14, t_eval=rs)
        Q = prufer_quantity(sol.y[0], sol.y[1], E)
        Q0 = prufer_quantity(y0[0], y0[1], E)
        bound = Q0 * np.exp([prufer_log_factor(m, E, r_n, r, convention) for r in rs])
        deficit = float(np.max(1.0 - Q / bound))
        if deficit > 1e-9:
            violations += 1
            worst = max(worst, deficit)
        if m == 0:
            drift = max(drift, float(np.max(np.abs(Q / Q0 - 1.0))))
    return PruferCheck(trials, violations, worst, drift)


@dataclass(frozen=True, eq=False)
class ChannelData:
    """Channel values ``f_{m,l}(r_n)`` at a probe radius, coefficient layout ``[m, l + L]``."""

    r_probe: float
    energy: float
    values: np.ndarray

    @property
    def tail_sums(self):
        """``p_m = sum_{j >= m} sum_l |f_{j,l}|^2``."""
        per = np.sum(np.abs(self.values) ** 2, axis=1)
        return np.cumsum(per[::-1])[::-1]

    def weighted_sum(self):
        """``sum_m (m+1)^2 sum_l |f_{m,l}|^2``."""
        per = np.sum(np.abs(self.values) ** 2, axis=1)
        m = np.arange(per.size)
        return float(np.sum((m + 1.0) ** 2 * per))


# --- eigenvalue absence ---------------------------------------------------


def cutoff_index(R, gamma):
    """Least integer ``k_n > R exp(gamma R^{4/3} ln R)``, as an int when it fits."""
    R = Tower.of(R)
    expo = gamma * (R ** (4.0 / 3.0)) * R.log()
    val = R * Tower.exp_of(expo)
    if val.h == 0 and val.y < 2**53:
        return Tower(0, float(math.floor(val.y) + 1))
    return val


@dataclass(frozen=True)
class GapGrowthCertificate:
    """One gap of the contradiction chain.

    ``margin`` is the log of the lower bound on the gap mass; it is
    ``margin_abs`` with sign ``margin_sign``.  ``log_threshold`` is the log of
    the least gap length for which the margin is nonnegative.
    """

    n: int
    energy: float
    gamma: float
    radius: Tower
    next_radius: Tower
    cutoff: Tower
    neg_log_factor: Tower
    log_threshold: Tower
    margin_abs: Tower
    margin_sign: int
    convention: str = "rigorous"

    @property
    def margin_positive(self):
        return self.margin_sign > 0

    def log_factor(self, m):
        """Log of the channel-``m`` growth factor at the gap entry ``R_n + 2``."""
        r = self.radius + 2.0
        c = PRUFER_FACTORS[self.convention]
        if r.h == 0:
            return -((m + 1.0) ** 2) / (c * math.sqrt(self.energy) * r.y)
        return 0.0

    def row(self):
        sign = "+" if self.margin_sign > 0 else "-"
        return {
            "n": self.n,
            "gap": self.next_radius.describe(),
            "threshold": self.log_threshold.describe(),
            "margin": sign + self.margin_abs.describe(),
            "verdict": self.margin_positive,
        }


def _log_poly(R, C1, C2):
    """``ln(C1 R^2 - C2 R)`` for a float radius."""
    return math.log(C1 * R * R - C2 * R)


@dataclass(frozen=True)
class DoublyExponentialSchedule:
    """``R_{n+1} = exp(exp(R_n^beta))`` from ``R_0``, kept symbolic in ``beta``."""

    R0: float
    beta: float = 1.4
    count: int = 5

    def radii(self):
        out = [Tower.of(self.R0)]
        for _ in range(self.count - 1):
            out.append(Tower.exp_of(Tower.exp_of(out[-1] ** self.beta)))
        return out

    def scaled(self, c):
        """Same rule started from ``c R_0``."""
        return DoublyExponentialSchedule(c * self.R0, self.beta, self.count)


def doubly_exponential_schedule(R0, count, beta=1.4):
    return DoublyExponentialSchedule(R0, beta, count).radii()


@dataclass(frozen=True)
class AbsenceReport:
    certificates: list
    verdict: bool
    increasing: bool


def _sign_tower(x):
    """Split a signed float (``h = 0``) tower into ``(magnitude, sign)``."""
    if x.h == 0 and x.y < 0:
        return Tower(0, -x.y), -1
    if x.h == 0 and x.y == 0:
        return x, 0
    return x, 1


def _float_gap(n, Rn, Rnext, E, gamma, C1, C2, c):
    """Exact evaluation when ``R_n`` is a float; ``R_{n+1}`` may be a tower."""
    R = Rn.y
    L = math.log(R)
    B = gamma * R ** (4.0 / 3.0) * L
    kn = cutoff_index(Rn, gamma)
    # ln P = 2 ln(k + 1) - ln(R + 2) - ln(c sqrt(E))
    ln_pen = (kn + 1.0).log() * 2.0 - math.log(R + 2.0) - math.log(c * math.sqrt(E))
    penalty = Tower.exp_of(ln_pen)
    ln_base = _log_poly(R, C1, C2)
    if Rnext.h == 0:
        ln_gap = math.log(Rnext.y - R - 2.0)
    else:
        ln_gap = Rnext.log() + math.log1p(-ratio(Tower(0, R + 2.0), Rnext))
    gain = Tower.of(ln_gap) + ln_base
    loss = penalty + B
    margin, sign = _sign_tower(gain - loss) if not (gain < loss) else (loss - gain, -1)
    threshold = loss - ln_base
    return kn, penalty, threshold, margin, sign


def _tower_gap(Rn, Rnext, E, gamma, c, beta):
    """Leading-order evaluation once ``ln R_n`` is itself beyond the double range.

    With ``L = ln R_n`` the gain is ``~ ln R_{n+1}`` and the loss is
    ``~ exp(2 gamma e^{4L/3} L)``.  Their iterated logs are ``ln ln ln R_{n+1}``
    and ``(4/3) L + ln L + ln(2 gamma)``; relative to ``L`` the lower-order
    terms vanish at double precision, so the sign follows from comparing the
    leading coefficients (``beta`` against ``4/3`` on the schedule).
    """
    L = Rn.log()
    kn = cutoff_index(Rn, gamma)
    penalty = Tower.exp_of((kn + 1.0).log() * 2.0 - (Rn + 2.0).log() - math.log(c * math.sqrt(E)))
    gain = Rnext.log()
    if beta is not None:
        lead = beta - 4.0 / 3.0
    else:
        g3 = Rnext.log().log().log()
        p3 = L * (4.0 / 3.0)
        lead = 1.0 if g3 > p3 else (-1.0 if g3 < p3 else 0.0)
    sign = int(np.sign(lead))
    margin = gain if sign > 0 else penalty
    return kn, penalty, penalty, margin, sign


def eigenvalue_absence_check(schedule, E, gamma=1.0, C1=1.0, C2=1.0, convention="rigorous"):
    """Replay the gap-growth contradiction on a radius schedule.

    For each gap ``(R_n + 2, R_{n+1})`` the log of the lower bound on the
    gap mass is

    ``ln(R_{n+1} - R_n - 2) + ln(C1 R_n^2 - C2 R_n) - gamma R_n^{4/3} ln R_n
    - (k_n + 1)^2 / (c sqrt(E) (R_n + 2))``

    with ``c = 1`` (rigorous growth factor) or ``2`` (halved exponent).  A positive and
    increasing margin means the mass is unbounded along the schedule,
    contradicting square integrability.  ``schedule`` is a
    :class:`DoublyExponentialSchedule`, a :class:`SparsePotential` or a list
    of radii (floats or towers).
    """
    if not E > 0:
        raise ValueError("energy must be positive")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    beta = None
    if isinstance(schedule, DoublyExponentialSchedule):
        beta = schedule.beta
        R = schedule.radii()
    elif isinstance(schedule, SparsePotential):
        R = [Tower.of(x) for x in schedule.radii]
    else:
        R = [Tower.of(x) for x in schedule]
    if len(R) < 2:
        raise InvalidPotentialError("at least two radii are needed")
    c = PRUFER_FACTORS[convention]
    certs = []
    for n in range(len(R) - 1):
        Rn, Rnext = R[n], R[n + 1]
        if not Rnext > Rn + 2.0:
            raise InvalidPotentialError("gaps must exceed the shell plus probe width")
        if Rn.h == 0:
            kn, pen, thr, margin, sign = _float_gap(n, Rn, Rnext, E, gamma, C1, C2, c)
        else:
            kn, pen, thr, margin, sign = _tower_gap(Rn, Rnext, E, gamma, c, beta)
        certs.append(GapGrowthCertificate(n, E, gamma, Rn, Rnext, kn, pen, thr, margin, sign, convention))
    pos = all(cert.margin_positive for cert in certs)
    inc = all(b.margin_abs > a.margin_abs for a, b in zip(certs, certs[1:]))
    return AbsenceReport(certs, pos and inc, inc)
