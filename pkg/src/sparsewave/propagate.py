"""Layer-by-layer amplitude recursion, the parametrix and the evolution family.

The amplitude after ``n + 1`` barriers is ``A_{n+1} = A_n (1 - kappa_n +
beta_n) + eta_n``.  The remainder ``eta_n`` is carried as a magnitude budget
only.  ``WKB_n = exp(-sum_{j<n} kappa_j)`` is extracted so that the reduced
amplitude ``A_n / WKB_n`` stays close to the free amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepSizeError
from .greens import _layer_breaks, beta, free_amplitude, gauss_nodes, kappa
from .operators import o_t_apply, o_t_eigenvalue, o_t_eigenvalues
from .potential import SparsePotential
from .sphere import (
    SphericalField,
    apply_diagonal,
    sh_analyze,
    sh_synthesize,
)

__all__ = [
    "AmplitudeRecord",
    "apriori_envelope",
    "duhamel_linear_check",
    "eta_budget",
    "evolution_solve",
    "layer_transfer",
    "o_t_apply",
    "o_t_eigenvalue",
    "parametrix_residual",
    "propagate_recursion",
]

TRANSFER_NODES = 8
# below this first radius the identification A_0 = A^0 is flagged
MIN_FIRST_RADIUS = 10.0


def parametrix_residual(m, t, k):
    """``|-2ik lambda_m(t) - exp[m(m+1)/(2ikt)]|``."""
    if not t >= 1:
        raise ValueError("parametrix residual is defined for t >= 1")
    k = complex(k)
    lam = o_t_eigenvalue(int(m), t, k)
    return float(abs(-2j * k * lam - np.exp(m * (m + 1.0) / (2j * k * t))))


def layer_transfer(f, layer, k, n_nodes=TRANSFER_NODES):
    """``[I - int_R^{R+1} O_t q_t dt] f`` with Gauss-Legendre in ``t``.

    ``O_t`` is applied on the diagonal route, so the grid only has to
    resolve ``q_t f`` and not the phase ``kt``.
    """
    k = complex(k)
    if not k.imag > 0:
        raise ValueError("layer_transfer requires Im k > 0")
    grid = f.grid
    t, w = gauss_nodes(layer.inner_radius, layer.outer_radius, n_nodes, _layer_breaks(layer))
    acc = grid.zeros()
    for ti, wi in zip(t, w):
        q = layer.on_sphere(ti, grid.nodes)
        if np.any(q):
            acc += wi * sh_analyze(grid, q * f.values) * o_t_eigenvalues(grid.degree, ti, k)[:, None]
    return SphericalField(grid, f.values - sh_synthesize(grid, acc))


def _log_add(a, b):
    return np.logaddexp(a, b)


def apriori_envelope(n, eps, v_l2, A0_sup, A0_grad_sup, R_next, C=1.0):
    """Envelopes ``(g_n, g'_n)`` for ``sup|A_n|`` and ``sup|grad A_n|``.

    ``g_n = (|A_0| + C |v| eps^-9) exp(C eps^-8 |v| sqrt(n))`` and
    ``g'_n = |grad A_0| + R eps^-9 |v| + n R |v| eps^-8 g_n``.  Evaluated in
    the log domain; values beyond the double range come back as ``inf``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not C > 0:
        raise ValueError("C must be positive")
    if v_l2 == 0:
        return float(A0_sup), float(A0_grad_sup)
    le = math.log(eps)
    lv = math.log(v_l2)
    growth = C * math.exp(-8.0 * le + lv) * math.sqrt(n) if n > 0 else 0.0
    log_pref = _log_add(math.log(A0_sup) if A0_sup > 0 else -np.inf, math.log(C) - 9.0 * le + lv)
    log_g = log_pref + growth
    terms = [math.log(A0_grad_sup) if A0_grad_sup > 0 else -np.inf,
             math.log(R_next) - 9.0 * le + lv]
    if n > 0:
        terms.append(math.log(n) + math.log(R_next) + lv - 8.0 * le + log_g)
    log_gp = np.logaddexp.reduce(terms)

    def _exp(x):
        return math.inf if x > 709.0 else math.exp(x)

    return _exp(log_g), _exp(log_gp)


def eta_budget(n, eps, v_next, C=1.0, d=1.0):
    """Remainder budget ``exp(C eps^-d) v_{n+1} exp(-eps n)``."""
    x = C * eps ** (-d) - eps * n
    if v_next == 0:
        return 0.0
    lx = x + math.log(v_next)
    return math.inf if lx > 709.0 else math.exp(lx)


def gradient_sup_bound(f):
    """Certified bound on ``sup |grad_Sigma f|`` from the harmonic coefficients.

    Uses ``sup |grad Y| <= sqrt(m(m+1)(2m+1)/(4 pi)) |c_m|`` per degree.
    """
    c = f.coeffs
    m = np.arange(f.grid.degree + 1)
    per = np.sqrt(np.sum(np.abs(c) ** 2, axis=1))
    return float(np.sum(np.sqrt(m * (m + 1.0) * (2 * m + 1.0) / (4 * np.pi)) * per))


@dataclass(frozen=True, eq=False)
class AmplitudeRecord:
    """State after ``n`` barriers and the coefficients of barrier ``n``."""

    n: int
    A: SphericalField
    wkb: SphericalField
    reduced: SphericalField
    kappa: SphericalField
    beta: SphericalField
    eta_bound: float
    envelope_g: float
    envelope_gprime: float
    nu: float
    envelope_ok: bool
    beta_error: float = 0.0
    flags: dict = field(default_factory=dict)

    def row(self):
        return {
            "n": self.n,
            "sup_A": self.A.sup_norm(),
            "sup_reduced": self.reduced.sup_norm(),
            "nu": self.nu,
            "g": self.envelope_g,
            "g_prime": self.envelope_gprime,
            "eta_bound": self.eta_bound,
            "envelope_ok": self.envelope_ok,
        }


def propagate_recursion(f, pot, k, grid, born_order=8, C=1.0, d=1.0, eps=None, A0=None):
    """Run ``A_{n+1} = A_n (1 - kappa_n + beta_n)`` from ``A_0 = A^0``.

    Returns one record per ``n = 0..N`` where ``N`` is the number of layers;
    the last record carries zero coefficients.  ``C`` and ``d`` set the
    remainder budget and the envelopes; they are configuration, not derived
    constants.
    """
    k = complex(k)
    if not k.imag > 0:
        raise ValueError("propagate_recursion requires Im k > 0")
    if not isinstance(pot, SparsePotential):
        raise TypeError("pot must be a SparsePotential")
    eps = k.imag if eps is None else eps
    env_eps = min(eps, 0.999)
    if A0 is None:
        A0 = free_amplitude(f, k, grid)
    A0_sup = A0.sup_norm()
    A0_grad = gradient_sup_bound(A0)
    v_l2 = pot.l2_norm
    first_ok = len(pot) == 0 or pot.radii[0] >= MIN_FIRST_RADIUS
    zero = SphericalField.constant(grid, 0.0)

    records = []
    A = A0
    log_wkb = SphericalField.constant(grid, 0.0)
    N = len(pot)
    for n in range(N + 1):
        if n < N:
            layer = pot.layers[n]
            kap = kappa(layer, k, grid)
            b = beta(layer, k, grid, born_order=born_order)
            bet, berr = b.field, b.error_bar
            v_next, R_next = layer.bound, layer.inner_radius
        else:
            kap, bet, berr = zero, zero, 0.0
            v_next, R_next = 0.0, pot.outer_radius if N else 1.0
        wkb = SphericalField(grid, np.exp(-log_wkb.values))
        reduced = A / wkb
        g, gp = apriori_envelope(n, env_eps, v_l2, A0_sup, A0_grad, R_next, C)
        records.append(
            AmplitudeRecord(
                n=n,
                A=A,
                wkb=wkb,
                reduced=reduced,
                kappa=kap,
                beta=bet,
                eta_bound=eta_budget(n, eps, v_next, C, d),
                envelope_g=g,
                envelope_gprime=gp,
                nu=float(np.max(np.abs(reduced.values - A0.values))),
                envelope_ok=bool(A.sup_norm() <= g * (1 + 1e-12)),
                beta_error=berr,
                flags={"first_radius_ok": first_ok},
            )
        )
        if n < N:
            A = A * (1.0 - kap + bet)
            log_wkb = log_wkb + kap
    return records


def _coeff_rhs(L, k, pot, grid_mode, grid):
    m = np.arange(L + 1)
    cent = m * (m + 1.0)
    mask = grid.mask if grid is not None else None

    def rhs(t, y):
        c = y.reshape(L + 1, 2 * L + 1)
        out = (cent / (t * t))[:, None] * c
        if pot is not None:
            if grid_mode:
                vals = np.zeros(grid.size)
                for layer in pot.layers:
                    vals = vals + layer.on_sphere(t, grid.nodes)
                if np.any(vals):
                    out = out + sh_analyze(grid, vals * sh_synthesize(grid, c)) * mask
            else:
                out = out + float(pot.radial(np.array([t]))[0]) * c
        return (out / (2j * k)).ravel()

    return rhs


def _breaks(pot, a, b):
    pts = [a]
    if pot is not None:
        for layer in pot.layers:
            for r in (layer.inner_radius, layer.outer_radius):
                if a < r < b:
                    pts.append(r)
    pts.append(b)
    return sorted(set(pts))


def evolution_solve(f, pot, k, tau, t_end=math.inf, mode="auto", rtol=1e-10, atol=1e-13):
    """``U(tau, t_end, k) f`` for ``dU/dt = -(2ik)^{-1} [B/t^2 - V(t)] U``.

    ``mode`` is ``"closed"`` (``V = 0`` only: coefficient ``(m, l)`` times
    ``exp[m(m+1)(1/tau - 1/t_end)/(2ik)]``), ``"radial"`` (symmetric ``V``;
    each coefficient obeys a scalar ODE), ``"grid"`` (any ``V``; the
    multiplication by ``V`` couples the coefficients through the grid) or
    ``"auto"``.  ODE modes use DOP853 between the shell edges; an infinite end
    point is reached by the exact potential-free tail in ``s = 1/t``.
    """
    k = complex(k)
    if not tau >= 1:
        raise ValueError("tau must be >= 1")
    if not t_end >= tau:
        raise ValueError("t_end must be >= tau")
    grid = f.grid
    L = grid.degree
    if pot is not None and len(pot) == 0:
        pot = None
    if mode == "auto":
        mode = "closed" if pot is None else ("radial" if pot.is_symmetric else "grid")
    if mode == "closed":
        if pot is not None:
            raise ValueError("closed form requires V = 0")
        m = np.arange(L + 1)
        inv = 1.0 / tau - (0.0 if math.isinf(t_end) else 1.0 / t_end)
        return apply_diagonal(f, np.exp(m * (m + 1.0) * inv / (2j * k)))
    if mode not in ("radial", "grid"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "radial" and pot is not None and not pot.is_symmetric:
        raise ValueError("radial mode requires symmetric layers")
    rhs = _coeff_rhs(L, k, pot, mode == "grid", grid)
    y = f.coeffs.ravel().astype(complex)

    finite_end = t_end if not math.isinf(t_end) else max(tau, pot.outer_radius if pot else tau)
    edges = _breaks(pot, tau, finite_end)
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise StepSizeError(f"integration failed on [{a}, {b}]: {sol.message}")
        y = sol.y[:, -1]
    if math.isinf(t_end):
        # past the last shell V = 0, so the tail on s = 1/t in (0, 1/finite_end] is exact
        m = np.arange(L + 1)
        mult = np.exp(m * (m + 1.0) / (finite_end * 2j * k))
        y = (y.reshape(L + 1, 2 * L + 1) * mult[:, None]).ravel()
    return SphericalField.from_coeffs(grid, y.reshape(L + 1, 2 * L + 1))


def duhamel_linear_check(layer, k, f, t_end=math.inf, n_nodes=TRANSFER_NODES):
    """Sup-norm gap between the transfer's linear term and the Duhamel term.

    The transfer contributes ``-int O_t q_t f dt``.  The first Duhamel term
    of ``U(R, t_end)`` is ``int U_0(t, t_end) (q_t / 2ik) U_0(R, t) f dt``.
    """
    k = complex(k)
    grid = f.grid
    L = grid.degree
    m = np.arange(L + 1)
    cent = m * (m + 1.0)
    R = layer.inner_radius
    t, w = gauss_nodes(R, layer.outer_radius, n_nodes, _layer_breaks(layer))
    lin = grid.zeros()
    duh = grid.zeros()
    end_inv = 0.0 if math.isinf(t_end) else 1.0 / t_end
    for ti, wi in zip(t, w):
        q = layer.on_sphere(ti, grid.nodes)
        if not np.any(q):
            continue
        lin -= wi * sh_analyze(grid, q * f.values) * o_t_eigenvalues(L, ti, k)[:, None]
        pre = apply_diagonal(f, np.exp(cent * (1.0 / R - 1.0 / ti) / (2j * k)))
        mid = sh_analyze(grid, q * pre.values) / (2j * k)
        duh += wi * mid * np.exp(cent * (1.0 / ti - end_inv) / (2j * k))[:, None]
    return float(np.max(np.abs(sh_synthesize(grid, lin - duh))))

