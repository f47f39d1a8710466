"""Acceptance criteria, one test per criterion.

Each test prints (and records for the terminal summary) a single line
``criterion N: PASS|FAIL | details`` and then asserts the criterion at its
stated tolerance.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import riesz_variance_k1
from wavelnd.field import (
    DomainBox,
    FieldSpec,
    SpacetimePoint as P,
    covariance_direct_k1,
    covariance_matrix,
    covariance_spectral,
    sandwich_scan,
    variance,
)
from wavelnd.lnd import (
    LndConfig,
    SphereRule,
    proof_grid_conditional_check,
    sectorial_check_k1,
    slnd_integral,
    slnd_ratio_scan,
)
from wavelnd.modulus import ModulusConfig, entropy_scan, modulus_experiment
from wavelnd.sampler import GridSpec, sample_field

BOX = DomainBox(1.0, 2.0, 1.0)
SANDWICH_SET = [(1, 0.5), (1, 1.0), (2, 1.0), (3, 1.5)]


def test_criterion_01_engine_cross_validation(criterion):
    start = time.perf_counter()
    worst = 0.0
    for beta in (0.3, 0.5, 0.9, 1.0):
        sp = FieldSpec(1, beta)
        rng = np.random.default_rng(2024)
        for _ in range(50):
            p = P(rng.uniform(1, 2), (rng.uniform(-1, 1),))
            q = P(rng.uniform(1, 2), (rng.uniform(-1, 1),))
            a = covariance_direct_k1(sp, p, q)
            b = covariance_spectral(sp, p, q)
            worst = max(worst, abs(a - b) / abs(a))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed <= 60
    assert criterion(1, ok, f"max rel diff {worst:.2e} (tol 1e-6), {elapsed:.1f} s (limit 60 s)")


def test_criterion_02_white_noise_anchor(criterion):
    sp = FieldSpec(1, 1.0)
    errs = [abs(variance(sp, P(t, (0.0,))) - t * t / 4) for t in (0.5, 1.0, 2.0)]
    ok = max(errs) <= 1e-6
    assert criterion(2, ok, f"max |Var - t^2/4| = {max(errs):.2e} (tol 1e-6)")


def _rectangle_identity_mc(beta, n=1_000_000, seed=31):
    """Monte Carlo of int_0^1 rho^(2-beta) E|Y - Y'|^-beta d rho, Y, Y' uniform on [-1, 1].

    |Y - Y'| has density (2 - d)/2 on [0, 2]; sampling d = 2 u^(1/(1-beta)) absorbs
    the singularity so the estimator has finite variance for every beta < 1.
    """
    rng = np.random.default_rng(seed)
    rho = rng.random(n)
    d = 2.0 * rng.random(n) ** (1.0 / (1.0 - beta))
    w = rho ** (2 - beta) * 2 ** (1 - beta) / (1 - beta) * (2 - d) / 2
    return w.mean(), w.std(ddof=1) / math.sqrt(n)


def test_criterion_03_riesz_anchor(criterion):
    details, ok = [], True
    for beta in (0.3, 0.5, 0.9):
        ref = riesz_variance_k1(beta)
        err = abs(variance(FieldSpec(1, beta), P(1.0, (0.0,))) - ref)
        m, se = _rectangle_identity_mc(beta)
        mc_ok = abs(m - ref) <= 3 * se
        ok &= err <= 1e-6 and mc_ok
        details.append(f"beta={beta}: err {err:.1e}, MC {abs(m - ref) / se:.2f} SE")
    assert criterion(3, ok, "; ".join(details) + " (tol 1e-6, MC 3 SE)")


def test_criterion_04_sandwich(criterion):
    details, ok = [], True
    for k, beta in SANDWICH_SET:
        res = sandwich_scan(FieldSpec(k, beta), BOX, 1000, seed=404, max_delta=0.5)
        c1, c2 = res["C1"], res["C2"]
        ok &= c1 > 0 and math.isfinite(c2)
        details.append(f"(k={k},beta={beta}) C1={c1:.4f} C2={c2:.4f}")
    assert criterion(4, ok, "; ".join(details))


def _doubling_change(report, k, beta):
    rule = SphereRule(k)
    worst = 0.0
    for tr in report.trials:
        tg = P.from_array(tr["target"])
        cond = [P.from_array(c) for c in tr["conditioning"]]
        a = slnd_integral(tg, cond, beta, rule)
        b = slnd_integral(tg, cond, beta, rule.doubled())
        if b > 0:
            worst = max(worst, abs(a - b) / b)
    return worst


def _lnd_criterion(scan, pairs):
    details, ok = [], True
    for k, beta in pairs:
        sp = FieldSpec(k, beta)
        r1 = scan(sp, LndConfig(BOX, n_conditioning=8, trials=200, seed=1))
        r2 = scan(sp, LndConfig(BOX, n_conditioning=8, trials=200, seed=2))
        m1, m2 = r1.min_ratio, r2.min_ratio
        change = abs(m2 - m1) / m1
        dbl = _doubling_change(r1, k, beta)
        ok &= m1 > 0 and m2 > 0 and change <= 0.5 and dbl <= 0.005
        details.append(f"(k={k},beta={beta}) min_ratio {m1:.4f}/{m2:.4f} change {change:.1%} "
                       f"doubling {dbl:.2e}")
    return ok, "; ".join(details)


def test_criterion_05_slnd(criterion):
    ok, detail = _lnd_criterion(slnd_ratio_scan, SANDWICH_SET)
    assert criterion(5, ok, detail + " (seed change <= 50%, doubling <= 0.5%)")


def test_criterion_06_sectorial(criterion):
    ok, detail = _lnd_criterion(sectorial_check_k1, [(1, 0.5), (1, 1.0)])
    assert criterion(6, ok, detail)


def test_criterion_07_proof_grid(criterion):
    sp = FieldSpec(1, 1.0)
    C2 = sandwich_scan(sp, BOX, 1000, seed=404)["C2"]
    res = proof_grid_conditional_check(sp, BOX, 6, C2)
    ratios = [lv["ratio"] for lv in res["levels"] if lv["n"] >= 1]
    ok = all(r > 0 for r in ratios)
    seq = ", ".join(f"{r:.4f}" for r in ratios)
    assert criterion(7, ok, f"C2={C2:.4f}, ratios n=1..6: {seq}")


def test_criterion_08_sampler_fidelity(criterion):
    sp = FieldSpec(1, 1.0)
    pts = [P(1.0, (0.0,)), P(1.0, (0.1,)), P(1.2, (0.0,)), P(1.5, (-0.5,)),
           P(2.0, (0.9,)), P(1.7, (0.2,))]
    n = 20_000
    X = sample_field(sp, pts, n, seed=88).values
    C = covariance_matrix(sp, pts)
    E = X.T @ X / n
    se = np.sqrt((np.outer(np.diag(C), np.diag(C)) + C ** 2) / n)
    cov_z = float(np.max(np.abs(E - C) / se))
    mean_z = float(np.max(np.abs(X.mean(axis=0)) / np.sqrt(np.diag(C) / n)))
    ok = cov_z <= 5 and mean_z <= 4
    assert criterion(8, ok, f"max cov deviation {cov_z:.2f} SE (tol 5), "
                            f"max mean deviation {mean_z:.2f} sd/sqrt(n) (tol 4)")


def test_criterion_09_modulus(criterion):
    sp = FieldSpec(1, 1.0)
    start = time.perf_counter()
    reps = []
    for seed in (1, 2):
        cfg = ModulusConfig(BOX, GridSpec(BOX, 40, 40), n_levels=6, n_samples=100, seed=seed)
        reps.append(modulus_experiment(sp, cfg))
    elapsed = time.perf_counter() - start
    mono = all(bool(np.all(np.diff(r.J_values, axis=1) <= 0)) for r in reps)
    disp = max(r.K_dispersion for r in reps)
    k1, k2 = reps[0].K_estimate, reps[1].K_estimate
    rel = abs(k1 - k2) / k1
    ok = mono and disp <= 0.25 and rel <= 0.15 and elapsed <= 600
    eps = ", ".join(f"{e:.4f}" for e in reps[0].epsilon_schedule)
    assert criterion(9, ok, f"monotone {mono}, dispersion {disp:.3f} (tol 0.25), K {k1:.4f}/{k2:.4f} "
                            f"rel {rel:.2%} (tol 15%), {elapsed:.0f} s; eps {eps}")


def test_criterion_10_entropy_exponent(criterion):
    details, ok = [], True
    for beta in (0.5, 1.0):
        sp = FieldSpec(1, beta)
        r = entropy_scan(sp, BOX, GridSpec(BOX, 60, 60), budget=3600)
        ok &= r["relative_error"] <= 0.10
        details.append(f"beta={beta}: fitted {r['fitted_exponent']:.3f} vs (1+k)/(2-beta) "
                       f"{r['theory_exponent']:.3f} err {r['relative_error']:.1%}; "
                       f"vs 2(1+k)/(2-beta) {r['corrected_exponent']:.3f} "
                       f"err {r['relative_error_corrected']:.1%}")
    assert criterion(10, ok, "; ".join(details) + " (tol 10% against (1+k)/(2-beta))")


CLI_RUNS = [
    ["covariance", "--k", "2", "--beta", "1", "--p", "1,0,0", "--q", "1.3,0.2,0.1"],
    ["sample", "--seed", "42", "--nt", "4", "--nx", "4", "--n-samples", "700"],
    ["verify-lnd", "--k", "2", "--beta", "1", "--trials", "8", "--seed", "3"],
    ["sectorial", "--beta", "0.5", "--trials", "20", "--seed", "3"],
    ["proof-grid", "--levels", "4", "--pairs", "100", "--seed", "5"],
    ["modulus", "--nt", "12", "--nx", "12", "--levels", "3", "--n-samples", "300",
     "--pairs", "100", "--seed", "6"],
    ["entropy", "--nt", "20", "--nx", "20"],
]


def test_criterion_11_cli_determinism(criterion, tmp_path):
    bad = []
    for argv in CLI_RUNS:
        for fmt in ("json", "csv"):
            outputs = []
            for i, threads in enumerate(("1", "1", "4")):
                out = tmp_path / f"{argv[0]}-{fmt}-{i}.{fmt}"
                res = subprocess.run(
                    [sys.executable, "-m", "wavelnd", *argv, "--format", fmt,
                     "--threads", threads, "--out", str(out)],
                    capture_output=True, text=True)
                assert res.returncode == 0, res.stderr
                outputs.append(out.read_bytes())
            if not outputs[0] == outputs[1] == outputs[2]:
                bad.append(f"{argv[0]}/{fmt}")
    ok = not bad
    assert criterion(11, ok, f"{len(CLI_RUNS) * 2} command/format combinations x 3 runs "
                             f"(threads 1, 1, 4); mismatches: {bad or 'none'}")
