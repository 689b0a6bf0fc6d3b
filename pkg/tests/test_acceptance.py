"""Acceptance criteria 1-12, driven by the configs under ``configs/``.

Each check prints one ``PASS``/``FAIL`` line (run ``pytest -s`` to see
them live; they also appear in the captured output of a failure).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from sparsewave import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

_cache = {}


def run_config(name, subcommand, tmp_path_factory):
    key = (name, subcommand)
    if key not in _cache:
        cfg = cli.load_config(CONFIGS / name)
        out = tmp_path_factory.mktemp(name.removesuffix(".json"))
        outdir, summary = cli.run(cfg, subcommand, out)
        _cache[key] = outdir, summary
    return _cache[key]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


LINES = []


@pytest.fixture(scope="module", autouse=True)
def _collect_lines(criterion_log):
    yield
    criterion_log.extend(LINES)


def report(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_01_free_amplitude(tmp_path_factory):
    outdir, s = run_config("acceptance_01_free_amplitude.json", "oracle", tmp_path_factory)
    rows = read_csv(outdir / "free.csv")
    meta = json.loads((outdir / "metadata.json").read_text())
    err, wall = s["free_max_rel_err"], meta["wall_time_s"]
    report(1, len(rows) == 20 and err < 1e-8 and wall < 5.0,
           f"{len(rows)} k values, max rel err {err:.2e} (tol 1e-8), runtime {wall:.2f} s (< 5 s)")


def test_criterion_02_ot_diagonal(tmp_path_factory):
    outdir, s = run_config("acceptance_02_ot_diagonal.json", "parametrix", tmp_path_factory)
    rows = read_csv(outdir / "ot_diagonal.csv")
    m_max = max(int(r["m"]) for r in rows)
    worst = s["ot_max_discrepancy"]
    report(2, m_max >= 16 and worst < 1e-8,
           f"m <= {m_max}, |k|t <= 20, max discrepancy {worst:.2e} (tol 1e-8)")


def test_criterion_03_parametrix(tmp_path_factory):
    outdir, s = run_config("acceptance_03_parametrix.json", "parametrix", tmp_path_factory)
    rows = read_csv(outdir / "parametrix.csv")
    m0 = [r for r in rows if int(r["m"]) == 0]
    dev = max(abs(float(r["residual"]) - float(r["m0_reference"])) for r in m0)
    slope = s["max_slope"]
    report(3, slope <= -0.9 and dev <= 1e-12,
           f"worst log-log slope {slope:.3f} (<= -0.9), m=0 deviation from e^(-2 eps t) {dev:.1e} (tol 1e-12)")


def test_criterion_04_desk_scale(tmp_path_factory):
    _, s = run_config("acceptance_04_theorem_desk.json", "propagate", tmp_path_factory)
    nu = [s["sup_nu"][c] for c in ("1.0", "0.5", "0.25")]
    dev = [s["oracle_dev"][c] for c in ("1.0", "0.5", "0.25")]
    finite = all(math.isfinite(x) for x in nu + dev)
    ok = finite and nu[0] > nu[1] > nu[2] and dev[0] > dev[1] > dev[2]
    report(4, ok, "sup nu (v, v/2, v/4) = " + ", ".join(f"{x:.3e}" for x in nu)
           + "; oracle dev = " + ", ".join(f"{x:.3e}" for x in dev))


def test_criterion_05_kappa_beta(tmp_path_factory):
    outdir, s = run_config("acceptance_05_kappa_beta.json", "wkb", tmp_path_factory)
    rows = read_csv(outdir / "kappa_beta.csv")
    fam = [r for r in rows if r["check"] == "beta_partial_sum"]
    partial = np.array([float(r["value"]) for r in fam])
    v = np.array([float(r["c"]) for r in fam])
    inc = np.diff(partial, prepend=0.0)
    # summability: beta_n / v_n^2 stays bounded, so sum beta_n <= C sum v_n^2 < inf
    ratio = inc / v**2
    stable = bool(np.all(np.diff(inc) < 0) and ratio.max() <= 2 * ratio.min())
    limit = partial[-1] + ratio.max() * (np.pi**2 / 6 - np.sum(1.0 / np.arange(1, v.size + 1) ** 2)) * v[0] ** 2
    ok = s["kappa_linear_max"] < 1e-12 and s["beta_c2_spread"] < 0.1 and stable
    report(5, ok, f"kappa linearity {s['kappa_linear_max']:.1e} (tol 1e-12), beta/c^2 spread "
           f"{s['beta_c2_spread']:.1e} (< 10%), beta_n/v_n^2 in [{ratio.min():.4f}, {ratio.max():.4f}], "
           f"partial sum {partial[-1]:.5f} -> limit <= {limit:.5f}")


def test_criterion_06_prufer(tmp_path_factory):
    _, s = run_config("acceptance_06_prufer.json", "eigcheck", tmp_path_factory)
    ok = s["prufer_violations"] == 0 and s["m0_drift"] < 1e-10
    report(6, ok, f"{s['prufer_violations']} violations in 1000 trials, m=0 drift {s['m0_drift']:.1e} (tol 1e-10)")


def test_criterion_07_eigcheck(tmp_path_factory):
    _, s = run_config("acceptance_07_eigcheck.json", "eigcheck", tmp_path_factory)
    bad = [k for k, v in s["verdicts"].items() if not v]
    report(7, s["all"] and len(s["verdicts"]) == 9,
           f"{len(s['verdicts']) - len(bad)}/{len(s['verdicts'])} (E, gamma) pairs positive and increasing over 5 indices")


def test_criterion_08_harmonic_measure(tmp_path_factory):
    _, s = run_config("acceptance_08_09_entropy.json", "entropy", tmp_path_factory)
    target = s["gamma1_minus_1"]
    rel = abs(s["endpoint_exponent"] - target) / target
    ok = abs(s["mass"] - 1) < 1e-3 and s["symmetry_defect"] < 2e-3 and rel < 0.15 and s["min_omega"] >= 0
    report(8, ok, f"mass {s['mass']:.15f}, symmetry {s['symmetry_defect']:.1e}, endpoint exponent "
           f"{s['endpoint_exponent']:.3f} vs {target:g} ({rel:.1%} < 15%)")


def test_criterion_09_entropy(tmp_path_factory):
    outdir, s = run_config("acceptance_08_09_entropy.json", "entropy", tmp_path_factory)
    rows = read_csv(outdir / "entropy.csv")
    C = [float(r["J1_fitted_C"]) for r in rows if int(r["n"]) > 0]
    spread = max(C) / min(C)
    ok = s["jensen_ok"] and all(int(r["jensen_ok"]) for r in rows) and spread <= 2 and s["density_max_rel_err"] < 1e-8
    report(9, ok, f"jensen_ok for n = 0..{len(rows) - 1}, J1 fitted C ratio {spread:.2f} (<= 2), "
           f"factorization vs Fourier density {s['density_max_rel_err']:.1e} (tol 1e-8)")


def test_criterion_10_seqbounds(tmp_path_factory):
    _, s = run_config("acceptance_10_seqbounds.json", "seqbounds", tmp_path_factory)
    ok = (s["affine"] == 0 and s["product[iterated]"] == 0
          and abs(s["poly_exp_max_1_1"] - math.exp(-1)) < 1e-15 and s["poly_exp_tightness"] < 1e-6)
    report(10, ok, f"affine {s['affine']}/10^4, product {s['product[iterated]']}/10^4 violations, "
           f"1/e value {s['poly_exp_max_1_1']:.16f}, tightness {s['poly_exp_tightness']:.1e} "
           f"(literal index shift: {s.get('product[shifted]')} violations, see notes)")


def test_criterion_11_semigroup(tmp_path_factory):
    _, s = run_config("acceptance_11_semigroup.json", "propagate", tmp_path_factory)
    ev = s["evolution_max"]
    ok = s["heat_max"] < 1e-12 and ev["closed_vs_ode"] < 1e-8 and ev["l2_conservation"] < 1e-8
    report(11, ok, f"heat isometry {s['heat_max']:.1e} (1e-12), closed vs ODE {ev['closed_vs_ode']:.1e} (1e-8), "
           f"L2 drift {ev['l2_conservation']:.1e} (1e-8)")


def test_criterion_12_randomized(tmp_path_factory):
    outdir, s = run_config("acceptance_12_randomized.json", "wkb", tmp_path_factory)
    r = s["randomized"]
    rows = read_csv(outdir / "randomized.csv")
    ok = len(rows) == 5 and r["slope_z"] < 3 and r["max_abs_z_exact"] < 3
    report(12, ok, f"5 indices, trend z {r['slope_z']:.2f} (< 3), max |z| vs independence sum "
           f"{r['max_abs_z_exact']:.2f} (< 3)")


@pytest.fixture(scope="module", autouse=True)
def _clear_cache():
    yield
    _cache.clear()
