"""Command-line driver: ``sparsewave <subcommand> CONFIG [--output DIR]``.

Configs are JSON documents with ``"schema": "sparsewave/1"``.  Each
subcommand writes CSV tables (header row, 17 significant digits) and a
``metadata.json`` with the config echo, library versions and wall time.
Exit status: 0 on success, 2 for an invalid config, 3 for a numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import scipy

from .errors import ConfigError, InvalidPotentialError, ResolutionError, SparseWaveError
from .greens import SourceSpec, beta, free_amplitude, free_amplitude_closed_form, kappa
from .operators import o_t_eigenvalues, required_degree, zonal_quadrature
from .potential import (
    BumpEnsemble,
    LayerSpec,
    RadialProfile,
    SparsePotential,
    validate_iterated_schedule,
    validate_sparseness_log,
)
from .propagate import evolution_solve, parametrix_residual, propagate_recursion
from .radial import (
    DoublyExponentialSchedule,
    eigenvalue_absence_check,
    prufer_property_check,
    radial_amplitudes,
)
from .seqbounds import affine_bound_suite, poly_exp_max, poly_exp_tightness, product_suite
from .spectral import (
    TriangleDomain,
    entropy_lower_bound,
    fourier_density,
    harmonic_measure_triangle,
    reduced_amplitude,
    spectral_density,
)
from .sphere import SphericalField, build_grid, heat_flow
from .wkb import randomized_wkb_moment, wkb_exponent, wkb_exponent_symmetric

SCHEMA = "sparsewave/1"
SUBCOMMANDS = ("validate", "propagate", "wkb", "parametrix", "oracle", "entropy", "eigcheck", "seqbounds")
THREADS_ENV = "SPARSEWAVE_THREADS"
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# --- configuration --------------------------------------------------------


def line_of(text, path):
    """1-based line of the key at ``path`` (tuple of keys / indices) in ``text``.

    Keys are searched in order, each after the previous match; list indices
    are skipped.  Falls back to the last located line.
    """
    pos, line = 0, 1
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``to_dict`` round-trips ``from_dict``."""

    schema: str = SCHEMA
    output: str = "out"
    grid_degree: int = 16
    potential: dict = field(default_factory=lambda: {"layers": []})
    source: dict = field(default_factory=lambda: {"profile": "ball", "scale": 1.0})
    k: dict = field(default_factory=lambda: {"tau": [1.0], "eps": [0.3]})
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data, text=""):
        known = {"schema", "output", "grid_degree", "potential", "source", "k", *SUBCOMMANDS}
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown top-level key {key!r}", line_of(text, (key,)))
        params = {name: data[name] for name in SUBCOMMANDS if name in data}
        cfg = cls(
            schema=data.get("schema"),
            output=data.get("output", "out"),
            grid_degree=data.get("grid_degree", 16),
            potential=data.get("potential", {"layers": []}),
            source=data.get("source", {"profile": "ball", "scale": 1.0}),
            k=data.get("k", {"tau": [1.0], "eps": [0.3]}),
            params=params,
        )
        cfg.check(text)
        return cfg

    def check(self, text=""):
        def fail(msg, *path):
            raise ConfigError(msg, line_of(text, path))

        if self.schema != SCHEMA:
            fail(f"schema must be {SCHEMA!r}, got {self.schema!r}", "schema")
        if not isinstance(self.grid_degree, int) or not 4 <= self.grid_degree <= 256:
            fail("grid_degree must be an integer in [4, 256]", "grid_degree")
        if not isinstance(self.output, str) or not self.output:
            fail("output must be a nonempty string", "output")
        layers = self.potential.get("layers", [])
        if not isinstance(layers, list):
            fail("potential.layers must be a list", "potential", "layers")
        for i, layer in enumerate(layers):
            if not isinstance(layer, dict) or not _positive(layer.get("R")):
                fail(f"layer {i} needs a positive radius R", "potential", "layers", i, "R")
            kinds = [key for key in ("v", "profile", "bumps") if key in layer]
            if len(kinds) != 1:
                fail(f"layer {i} needs exactly one of v, profile, bumps", "potential", "layers", i, "R")
        for name in ("tau", "eps"):
            vals = self.k.get(name)
            if not isinstance(vals, list) or not vals or not all(_number(x) for x in vals):
                fail(f"k.{name} must be a nonempty list of numbers", "k", name)
        if any(x <= 0 for x in self.k["tau"]):
            fail("k.tau must be positive", "k", "tau")
        if any(x < 0 for x in self.k["eps"]):
            fail("k.eps must be nonnegative", "k", "eps")
        for sub, params in self.params.items():
            if not isinstance(params, dict):
                fail(f"section {sub!r} must be an object", sub)
            _check_numbers(params, (sub,), fail)

    @property
    def k_values(self):
        return [complex(t, e) for t in self.k["tau"] for e in self.k["eps"]]


_POSITIVE_KEYS = {"tol", "rtol", "atol", "h", "trials", "born_order", "order_cap", "count", "m_max",
                  "alpha", "gamma1", "R0", "samples", "degree", "n_radial"}


def _number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _positive(x):
    return _number(x) and x > 0


def _check_numbers(obj, path, fail):
    """Tolerances, caps and counts must be positive wherever they appear."""
    if isinstance(obj, dict):
        for key, val in obj.items():
            if key in _POSITIVE_KEYS and not (_positive(val) or isinstance(val, list)):
                fail(f"{'.'.join(map(str, path + (key,)))} must be positive", *path, key)
            _check_numbers(val, path + (key,), fail)
    elif isinstance(obj, list):
        for i, val in enumerate(obj):
            _check_numbers(val, path + (i,), fail)


def load_config(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", 1)
    return ExperimentConfig.from_dict(data, text)


# --- output ---------------------------------------------------------------


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, rows, columns=None):
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def versions():
    try:
        pkg = version("artifact")
    except PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "artifact": pkg}


# --- builders -------------------------------------------------------------


def build_layer(spec):
    R = float(spec["R"])
    if "v" in spec:
        return LayerSpec.symmetric(R, float(spec["v"]))
    if "profile" in spec:
        p = spec["profile"]
        return LayerSpec(R, RadialProfile(np.array(p["offsets"], float), np.array(p["values"], float)))
    b = spec["bumps"]
    ens = BumpEnsemble.on_shell(R, int(b["count"]), float(b["radius"]), float(b.get("scale", 1.0)),
                                b.get("distribution", "rademacher"), int(b.get("seed", 0)))
    return LayerSpec(R, ens)


def build_potential(spec):
    return SparsePotential(tuple(build_layer(s) for s in spec.get("layers", [])))


def build_source(spec):
    harmonic = tuple(spec["harmonic"]) if spec.get("harmonic") else None
    if spec.get("profile", "ball") == "ball":
        return SourceSpec.ball_indicator(float(spec.get("scale", 1.0)), harmonic)
    p = spec["profile"]
    prof = RadialProfile(np.array(p["offsets"], float), np.array(p["values"], float))
    return SourceSpec(prof.scaled(float(spec.get("scale", 1.0))), harmonic)


def _t_values(spec, default):
    """A list, or ``{"start", "stop", "num"}`` for a log-spaced range."""
    if spec is None:
        return list(default)
    if isinstance(spec, dict):
        return list(np.geomspace(spec["start"], spec["stop"], int(spec["num"])))
    return [float(t) for t in spec]


# --- subcommands ----------------------------------------------------------
# Each runner returns ``{filename: rows}`` and a summary dict for metadata.


def run_validate(cfg):
    p = cfg.params.get("validate", {})
    alpha = float(p.get("alpha", 2.0))
    if "schedule" in p:
        s = p["schedule"]
        rep = validate_iterated_schedule(float(s["R0"]), float(s.get("alpha", alpha)), int(s["count"]))
    else:
        radii = p.get("radii")
        log_radii = np.log(np.array(radii, float) if radii else build_potential(cfg.potential).radii)
        rep = validate_sparseness_log(log_radii, alpha)
    cols = ("n", "log_sigma", "doubling", "sigma_small", "tail_small", "gap_large", "alpha_ok")
    rows = [dict(zip(cols, r)) for r in rep.rows()]
    return {"validate.csv": rows}, {"all_ok": rep.all_ok}


def run_oracle(cfg):
    f = build_source(cfg.source)
    pot = build_potential(cfg.potential)
    grid = build_grid(cfg.grid_degree)
    free, amps = [], []
    worst = 0.0
    for k in cfg.k_values:
        A = free_amplitude(f, k, grid)
        ref = free_amplitude_closed_form(f, k, grid.nodes)
        err = float(np.max(np.abs(A.values - ref)) / np.max(np.abs(ref)))
        worst = max(worst, err)
        i = int(np.argmax(np.abs(ref)))
        free.append({"tau": k.real, "eps": k.imag, "re_quadrature": A.values[i].real,
                     "im_quadrature": A.values[i].imag, "re_closed": ref[i].real,
                     "im_closed": ref[i].imag, "rel_err": err})
        if f.is_radial and pot.is_symmetric and k.real > 0:
            for n, a in enumerate(radial_amplitudes(f, pot, k)):
                amps.append({"tau": k.real, "eps": k.imag, "n": n, "re_A": a.real, "im_A": a.imag})
    out = {"free.csv": free}
    if amps:
        out["oracle.csv"] = amps
    return out, {"free_max_rel_err": worst}


def run_parametrix(cfg):
    p = cfg.params.get("parametrix", {})
    m_max = int(p.get("m_max", 8))
    ts = _t_values(p.get("t"), np.geomspace(1e2, 1e4, 9))
    rows, slopes = [], {}
    for k in (cfg.k_values if p.get("residuals", True) else []):
        for m in range(m_max + 1):
            res = [parametrix_residual(m, t, k) for t in ts]
            for t, r in zip(ts, res):
                rows.append({"tau": k.real, "eps": k.imag, "m": m, "t": t, "residual": r,
                             "m0_reference": math.exp(-2.0 * k.imag * t) if m == 0 else math.nan})
            if m > 0:
                slope = float(np.polyfit(np.log(ts), np.log(res), 1)[0])
                slopes[f"{k.real:g}{k.imag:+g}j/m={m}"] = slope
    out = {"parametrix.csv": rows} if rows else {}
    summary = {"max_slope": max(slopes.values())} if slopes else {}
    if "ot_check" in p:
        c = p["ot_check"]
        L = int(c.get("degree", 48))
        grid = build_grid(L)
        cm = int(c.get("m_max", 16))
        if cm > L:
            raise ResolutionError(f"ot_check degree {L} cannot hold harmonics up to m_max = {cm}", cm)
        kt_max = float(c.get("kt_max", 20.0))
        ot_rows, worst = [], 0.0
        for k in cfg.k_values:
            for t in _t_values(c.get("t"), [1.0, 5.0, 10.0, 20.0]):
                if abs(k) * t > kt_max:
                    continue
                if L < required_degree(k, t):
                    raise ResolutionError(f"ot_check degree {L} cannot resolve |k|t = {abs(k) * t:.3g}",
                                          required_degree(k, t))
                lam = o_t_eigenvalues(L, t, k)
                F = np.column_stack([SphericalField.harmonic(grid, m, m // 2).values for m in range(cm + 1)])
                G = zonal_quadrature(grid, F, k, t)
                for m in range(cm + 1):
                    d = float(np.max(np.abs(G[:, m] - lam[m] * F[:, m])))
                    worst = max(worst, d)
                    ot_rows.append({"tau": k.real, "eps": k.imag, "t": t, "m": m, "discrepancy": d})
        out["ot_diagonal.csv"] = ot_rows
        summary["ot_max_discrepancy"] = worst
    return out, summary


def run_propagate(cfg):
    p = cfg.params.get("propagate", {})
    f = build_source(cfg.source)
    pot = build_potential(cfg.potential)
    grid = build_grid(cfg.grid_degree)
    out, summary = {}, {}
    if p.get("recursion", True):
        rows = []
        scales = [float(c) for c in p.get("scales", [1.0])]
        compare = f.is_radial and pot.is_symmetric
        worst_nu, worst_dev = {}, {}
        for c in scales:
            P = pot.scaled(c)
            for k in cfg.k_values:
                recs = propagate_recursion(f, P, k, grid, born_order=int(p.get("born_order", 8)),
                                           C=float(p.get("C", 1.0)), d=float(p.get("d", 1.0)))
                for r in recs:
                    row = {"scale": c, "tau": k.real, "eps": k.imag, **r.row()}
                    dev = math.nan
                    if compare:
                        ref = reduced_amplitude(f, P.truncate(r.n), k)
                        dev = float(np.max(np.abs(r.reduced.values - ref)))
                        worst_dev[c] = max(worst_dev.get(c, 0.0), dev)
                    row["oracle_dev"] = dev
                    worst_nu[c] = max(worst_nu.get(c, 0.0), r.nu)
                    rows.append(row)
        out["propagate.csv"] = rows
        summary["sup_nu"] = {str(c): worst_nu[c] for c in scales}
        if worst_dev:
            summary["oracle_dev"] = {str(c): worst_dev[c] for c in scales}
    if "evolution" in p:
        e = p["evolution"]
        tau = float(e.get("tau", 5.0))
        rtol = float(e.get("rtol", 1e-12))
        harmonics = [tuple(h) for h in e.get("harmonics", [[0, 0], [2, 1], [5, -3]])]
        f0 = sum((SphericalField.harmonic(grid, m, l) for m, l in harmonics[1:]),
                 SphericalField.harmonic(grid, *harmonics[0]))
        free_pot = SparsePotential.symmetric([tau + 1.0], [0.0])
        rows = []
        for k in cfg.k_values:
            closed = evolution_solve(f0, None, k, tau, mode="closed")
            ode = evolution_solve(f0, free_pot, k, tau, mode="radial", rtol=rtol, atol=1e-15)
            rows.append({"tau": k.real, "eps": k.imag, "check": "closed_vs_ode",
                         "value": float(np.max(np.abs(closed.coeffs - ode.coeffs)))})
            if k.imag == 0 and len(pot):
                U = evolution_solve(f0, pot, k, tau, mode="auto", rtol=rtol, atol=1e-15)
                rows.append({"tau": k.real, "eps": k.imag, "check": "l2_conservation",
                             "value": abs(U.l2_norm() - f0.l2_norm()) / f0.l2_norm()})
        out["evolution.csv"] = rows
        summary["evolution_max"] = {c: max(r["value"] for r in rows if r["check"] == c)
                                    for c in {r["check"] for r in rows}}
    if "heat" in p:
        rows = []
        coeffs = np.random.default_rng(int(p["heat"].get("seed", 0))).normal(size=(2, grid.degree + 1, 2 * grid.degree + 1))
        g = SphericalField.from_coeffs(grid, (coeffs[0] + 1j * coeffs[1]) * grid.mask)
        for k in cfg.k_values:
            if k.imag != 0:
                continue
            for t in _t_values(p["heat"].get("t"), [1.0, 10.0, 100.0]):
                h = heat_flow(g, k, t)
                d = float(np.max(np.abs(np.abs(h.coeffs) - np.abs(g.coeffs))))
                rows.append({"tau": k.real, "t": t, "coeff_modulus_err": d})
        out["heat.csv"] = rows
        summary["heat_max"] = max((r["coeff_modulus_err"] for r in rows), default=None)
    return out, summary


def run_wkb(cfg):
    p = cfg.params.get("wkb", {})
    pot = build_potential(cfg.potential)
    grid = build_grid(cfg.grid_degree)
    out, summary = {}, {}
    rows = []
    for k in cfg.k_values:
        field3 = wkb_exponent(pot, k, grid).values
        row = {"tau": k.real, "eps": k.imag, "re_3d": float(field3.mean().real), "im_3d": float(field3.mean().imag),
               "spread_3d": float(np.max(np.abs(field3 - field3.mean())))}
        if pot.is_symmetric:
            one = wkb_exponent_symmetric(pot, k)
            row.update(re_1d=one.real, im_1d=one.imag, abs_diff=float(np.max(np.abs(field3 - one))))
        rows.append(row)
    if rows:
        out["wkb.csv"] = rows
        if pot.is_symmetric:
            summary["max_abs_diff"] = max(r["abs_diff"] for r in rows)
    k = cfg.k_values[0]
    if "kappa_beta" in p:
        kb = p["kappa_beta"]
        base = build_layer(kb.get("layer", {"R": 20.0, "v": 1.0}))
        order = int(kb.get("born_order", 8))
        rows = []
        ref = kappa(base, k, grid).values
        for c in kb.get("linearity", [0.5, 2.0, -1.0, 1e-3]):
            val = kappa(base.scaled(c), k, grid).values
            rows.append({"check": "kappa_linear", "index": 0, "c": c,
                         "value": float(np.max(np.abs(val - c * ref)) / np.max(np.abs(ref)))})
        for c in kb.get("c", [1e-2, 1e-3]):
            b = beta(base.scaled(c), k, grid, born_order=order).field.values
            rows.append({"check": "beta_over_c2", "index": 0, "c": c, "value": float(np.max(np.abs(b))) / c**2})
        fam = kb.get("family", {"R": [20.0, 60.0, 180.0, 540.0, 1620.0], "v0": 0.2, "power": 1.0})
        total = 0.0
        for n, R in enumerate(fam["R"]):
            v = float(fam["v0"]) * (n + 1.0) ** -float(fam["power"])
            b = beta(LayerSpec.symmetric(float(R), v), k, grid, born_order=order).field.values
            total += float(np.max(np.abs(b)))
            rows.append({"check": "beta_partial_sum", "index": n, "c": v, "value": total})
        out["kappa_beta.csv"] = rows
        bc = [r["value"] for r in rows if r["check"] == "beta_over_c2"]
        summary["kappa_linear_max"] = max(r["value"] for r in rows if r["check"] == "kappa_linear")
        summary["beta_c2_spread"] = (max(bc) - min(bc)) / max(bc)
    if "randomized" in p:
        rz = p["randomized"]
        theta = np.array(rz.get("theta", [0.0, 0.0, 1.0]), float)
        rows = []
        for n, R in enumerate(rz.get("R", [10.0, 20.0, 40.0, 80.0, 160.0])):
            count = max(1, int(round(float(rz.get("density", 0.25)) * R * R)))
            ens = BumpEnsemble.on_shell(float(R), count, float(rz.get("radius", 0.3)), float(rz.get("scale", 1.0)),
                                        rz.get("distribution", "rademacher"), int(rz.get("seed", 0)))
            est = randomized_wkb_moment(ens, k, theta, int(rz.get("trials", 2000)), seed=int(rz.get("seed", 0)) + n)
            rows.append({"index": n, "R": float(R), "count": count, "re_mean": est.mean.real, "im_mean": est.mean.imag,
                         "second_moment": est.second_moment, "second_stderr": est.second_stderr,
                         "exact_second_moment": est.exact_second_moment,
                         "z_exact": (est.second_moment - est.exact_second_moment) / est.second_stderr})
        out["randomized.csv"] = rows
        summary["randomized"] = randomized_trend(rows)
    return out, summary


def randomized_trend(rows):
    """Weighted slope of the second moment against the layer index and its z-score."""
    n = np.array([r["index"] for r in rows], float)
    y = np.array([r["second_moment"] for r in rows])
    se = np.array([r["second_stderr"] for r in rows])
    w = 1.0 / se**2
    nb = np.sum(w * n) / np.sum(w)
    slope = float(np.sum(w * (n - nb) * y) / np.sum(w * (n - nb) ** 2))
    slope_se = float(1.0 / math.sqrt(np.sum(w * (n - nb) ** 2)))
    return {"slope": slope, "slope_se": slope_se, "slope_z": slope / slope_se,
            "max_abs_z_exact": float(max(abs(r["z_exact"]) for r in rows))}


def run_entropy(cfg):
    p = cfg.params.get("entropy", {})
    tri = p.get("triangle", {})
    k0 = tri.get("k0")
    T = TriangleDomain(float(tri.get("a", 0.5)), float(tri.get("b", 2.0)), float(tri.get("gamma1", 10.0)),
                       None if k0 is None else complex(*k0), float(tri.get("d_config", 9.0)))
    omega = harmonic_measure_triangle(T, float(p.get("h", 0.01)))
    f = build_source(cfg.source)
    pot = build_potential(cfg.potential)
    out = {"harmonic_measure.csv": [{"s": s, "omega": w} for s, w in omega.rows()]}
    summary = {"mass": omega.total_mass, "min_omega": float(omega.density.min()),
               "symmetry_defect": omega.symmetry_defect(), "endpoint_exponent": omega.endpoint_exponent(),
               "gamma1_minus_1": T.gamma1 - 1.0}
    if len(pot) or p.get("reports", True):
        bound = entropy_lower_bound(pot, f, omega, p.get("n_max"))
        out["entropy.csv"] = [r.row() for r in bound.reports]
        summary.update(threshold=bound.threshold, min_lhs=bound.min_lhs, uniform_ok=bound.uniform_ok,
                       jensen_ok=all(r.jensen_ok for r in bound.reports))
    grid = build_grid(cfg.grid_degree)
    rows = []
    for k in _t_values(p.get("density_k"), np.linspace(0.5, 2.0, 16)):
        a = spectral_density(free_amplitude(f, k, grid), k)
        b = fourier_density(f, k)
        rows.append({"k": k, "sigma_factor": a, "sigma_fourier": b, "rel_err": abs(a - b) / b})
    out["density.csv"] = rows
    summary["density_max_rel_err"] = max(r["rel_err"] for r in rows)
    return out, summary


def run_eigcheck(cfg):
    p = cfg.params.get("eigcheck", {})
    s = p.get("schedule", {"R0": 1e40, "beta": 1.4, "count": 5})
    sched = DoublyExponentialSchedule(float(s["R0"]), float(s.get("beta", 1.4)), int(s.get("count", 5)))
    rows, verdicts = [], {}
    for E in p.get("energies", [0.5, 1.0, 4.0]):
        for g in p.get("gammas", [0.5, 1.0, 2.0]):
            rep = eigenvalue_absence_check(sched, float(E), float(g), float(p.get("C1", 1.0)),
                                           float(p.get("C2", 1.0)), p.get("convention", "rigorous"))
            for c in rep.certificates:
                rows.append({"E": E, "gamma": g, **c.row()})
            verdicts[f"E={E},gamma={g}"] = bool(rep.verdict and rep.increasing)
    out = {"eigcheck.csv": rows}
    summary = {"verdicts": verdicts, "all": all(verdicts.values())}
    if "prufer" in p:
        q = p["prufer"]
        chk = prufer_property_check(int(q.get("trials", 1000)), int(q.get("seed", 0)),
                                    q.get("convention", p.get("convention", "rigorous")))
        out["prufer.csv"] = [{"trials": chk.trials, "violations": chk.violations,
                              "worst_deficit": chk.worst_deficit, "m0_drift": chk.m0_drift}]
        summary["prufer_violations"] = chk.violations
        summary["m0_drift"] = chk.m0_drift
    return out, summary


def run_seqbounds(cfg):
    p = cfg.params.get("seqbounds", {})
    seed = int(p.get("seed", 0))
    res = [affine_bound_suite(int(p.get("affine_trials", 10_000)), seed)]
    for idx in p.get("indexings", ["iterated"]):
        res.append(product_suite(int(p.get("product_trials", 10_000)), seed, indexing=idx))
    rows = [r.row() for r in res]
    summary = {r.name: r.violations for r in res}
    summary["poly_exp_max_1_1"] = poly_exp_max(1, 1)
    summary["poly_exp_tightness"] = poly_exp_tightness()
    return {"seqbounds.csv": rows}, summary


RUNNERS = {
    "validate": run_validate,
    "propagate": run_propagate,
    "wkb": run_wkb,
    "parametrix": run_parametrix,
    "oracle": run_oracle,
    "entropy": run_entropy,
    "eigcheck": run_eigcheck,
    "seqbounds": run_seqbounds,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def run(cfg, subcommand, output=None):
    """Run one subcommand; returns the output directory and the summary."""
    outdir = Path(output or cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with np.errstate(over="ignore", under="ignore"):
        tables, summary = RUNNERS[subcommand](cfg)
    wall = time.perf_counter() - start
    for name, rows in tables.items():
        write_csv(outdir / name, rows)
    meta = {
        "subcommand": subcommand,
        "config": cfg.to_dict(),
        "versions": versions(),
        "threads": os.environ.get(THREADS_ENV),
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "files": sorted(tables),
        "summary": _jsonable(summary),
    }
    (outdir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return outdir, summary


def main(argv=None):
    parser = argparse.ArgumentParser(prog="sparsewave", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("config", help="JSON experiment config")
    parser.add_argument("--output", help="output directory (overrides the config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"{args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"{args.config}:{exc.line}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outdir, _ = run(cfg, args.subcommand, args.output)
    except (ConfigError, InvalidPotentialError) as exc:
        where = ("potential",) if isinstance(exc, InvalidPotentialError) else ()
        print(f"{args.config}:{line_of(Path(args.config).read_text(), where)}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"{args.config}:{line_of(Path(args.config).read_text(), ())}: missing config key {exc}",
              file=sys.stderr)
        return EXIT_CONFIG
    except (SparseWaveError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"sparsewave {args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(outdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
