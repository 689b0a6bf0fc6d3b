"""Sequence lemmas used as oracles for the amplitude recursion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar


def affine_iteration_bound(a, b, x0):
    """Bounds on ``x_{n+1}`` for ``x_{n+1} <= a_n x_n + b_n``, all ``n``.

    ``x_{n+1} <= (x_0 + sum_{j<=n} b_j) max{1, a_j a_{j+1} ... a_n}``.
    Returns an array whose entry ``n`` bounds ``x_{n+1}``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("a and b must have equal length")
    if np.any(a < 0) or np.any(b < 0) or x0 < 0:
        raise ValueError("inputs must be nonnegative")
    out = np.empty(a.size)
    # P_n = max_j a_j ... a_n satisfies P_n = a_n max(1, P_{n-1})
    P = 0.0
    total = float(x0)
    for n in range(a.size):
        P = a[n] * max(1.0, P)
        total += b[n]
        out[n] = total * max(1.0, P)
    return out


def affine_iterates(a, b, x0):
    """Equality iteration ``x_{n+1} = a_n x_n + b_n``; entry ``n`` is ``x_{n+1}``."""
    x = float(x0)
    out = np.empty(len(a))
    for n, (an, bn) in enumerate(zip(a, b)):
        x = an * x + bn
        out[n] = x
    return out


def poly_exp_max(j, eps):
    """``sup_{x > 0} x^j e^{-eps x} = (j/e)^j eps^{-j}``."""
    if not (j > 0 and eps > 0):
        raise ValueError("j and eps must be positive")
    return float(np.exp(j * (np.log(j) - 1.0 - np.log(eps))))


@dataclass(frozen=True)
class ProductAsymptotics:
    iterates: np.ndarray
    envelope: np.ndarray

    @property
    def violations(self):
        return int(np.sum(np.abs(self.iterates) > self.envelope * (1 + 1e-12)))


def product_asymptotics(q, d, x0, alpha, omega, C=1.0, indexing="iterated"):
    """Iterates of ``x_{n+1} = x_n (1 + q_n) + d_n`` and their envelope.

    Envelope at ``n``:
    ``exp(C |q|_2^2) |exp(sum_{j<n} q_j)| (|x_0| + omega S_n)``.
    With ``indexing="iterated"``, ``S_n = sum_{j=0}^{n-1} exp(-alpha j + |q|_2 sqrt(j+1))``,
    which is what iterating the recursion gives for ``|d_j| <= omega e^{-alpha j}``.
    ``indexing="shifted"`` uses ``sum_{j=1}^{n} exp(-alpha j + |q|_2 sqrt j)``, smaller by
    ``e^{-alpha}`` per term.  ``C = 1`` suffices when every ``|q_j| <= 1/2``.
    Entry ``n`` of both arrays refers to ``x_n``, ``n = 0..N``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    q = np.asarray(q, dtype=complex)
    d = np.asarray(d, dtype=complex)
    N = q.size
    if d.size != N:
        raise ValueError("q and d must have equal length")
    x = np.empty(N + 1, dtype=complex)
    x[0] = x0
    for n in range(N):
        x[n + 1] = x[n] * (1.0 + q[n]) + d[n]
    qn = float(np.sqrt(np.sum(np.abs(q) ** 2)))
    csum = np.concatenate([[0.0], np.cumsum(q)])
    j = np.arange(N)
    if indexing == "iterated":
        terms = np.exp(-alpha * j + qn * np.sqrt(j + 1.0))
    elif indexing == "shifted":
        terms = np.exp(-alpha * (j + 1.0) + qn * np.sqrt(j + 1.0))
    else:
        raise ValueError(f"unknown indexing {indexing!r}")
    S = np.concatenate([[0.0], np.cumsum(terms)])
    env = np.exp(C * qn * qn) * np.abs(np.exp(csum)) * (abs(x0) + omega * S)
    return ProductAsymptotics(x, env)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    violations: int
    worst_ratio: float

    def row(self):
        return {"lemma": self.name, "trials": self.trials, "violations": self.violations,
                "worst_ratio": self.worst_ratio}


def affine_bound_suite(trials=10_000, seed=0, max_length=30):
    """Random trials of :func:`affine_iteration_bound` on sub-equality iterations.

    Trial ``i`` draws ``a_n in [0, 2)``, ``b_n in [0, 1)``, ``x_0 in [0, 1)`` from
    ``default_rng([seed, i])`` and runs ``x_{n+1} = a_n x_n + u_n b_n`` with
    ``u_n in [0, 1)``.  ``worst_ratio`` is the largest ``x_{n+1} / bound``.
    """
    bad, worst = 0, 0.0
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        N = int(rng.integers(1, max_length + 1))
        a = rng.uniform(0.0, 2.0, N)
        b = rng.uniform(0.0, 1.0, N)
        x0 = float(rng.uniform())
        x = affine_iterates(a, b * rng.uniform(size=N), x0)
        bound = affine_iteration_bound(a, b, x0)
        r = x / bound
        worst = max(worst, float(r.max()))
        bad += int(np.any(r > 1.0 + 1e-12))
    return SuiteResult("affine", trials, bad, worst)


def product_suite(trials=10_000, seed=0, max_length=40, indexing="iterated"):
    """Random trials of :func:`product_asymptotics`.

    ``q_n`` are complex with ``|q_n| <= min(1/2, c / sqrt(n+1))``, ``d_n``
    complex with ``|d_n| <= omega e^{-alpha n}``.
    """
    bad, worst = 0, 0.0
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        N = int(rng.integers(1, max_length + 1))
        n = np.arange(N)
        c = rng.uniform(0.05, 1.0)
        q = np.minimum(0.5, c / np.sqrt(n + 1.0)) * rng.uniform(size=N) * np.exp(2j * np.pi * rng.uniform(size=N))
        alpha = rng.uniform(0.1, 2.0)
        omega = rng.uniform(0.0, 2.0)
        d = omega * np.exp(-alpha * n) * rng.uniform(size=N) * np.exp(2j * np.pi * rng.uniform(size=N))
        x0 = complex(rng.normal(), rng.normal())
        res = product_asymptotics(q, d, x0, alpha, omega, indexing=indexing)
        r = np.abs(res.iterates) / res.envelope
        worst = max(worst, float(r.max()))
        bad += int(res.violations > 0)
    return SuiteResult(f"product[{indexing}]", trials, bad, worst)


def poly_exp_tightness(js=(1, 2, 3, 5, 8), epss=(0.1, 0.5, 1.0, 2.0)):
    """Largest relative gap between :func:`poly_exp_max` and a numerical maximum."""
    worst = 0.0
    for j in js:
        for eps in epss:
            x0 = j / eps
            res = minimize_scalar(lambda x: -(j * np.log(x) - eps * x), bounds=(x0 / 10, 10 * x0),
                                  method="bounded", options={"xatol": 1e-12 * x0})
            num = float(np.exp(-res.fun))
            exact = poly_exp_max(j, eps)
            worst = max(worst, abs(num - exact) / exact)
    return worst
