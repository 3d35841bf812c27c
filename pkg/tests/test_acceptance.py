"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget."""

import json
import math
import os
import time

import numpy as np
import pytest

from jdsn.cli import main
from jdsn.estimate import classify_increments
from jdsn.fisher import fisher_information, jump_information_mc, jump_score_moments, observed_information
from jdsn.mcstudy import consistency_ladder, normality_diagnostics, run_replications
from jdsn.model import RegimeConfig, get_model, psi, psi_d2, psi_dalpha, psi_dy
from jdsn.simulate import replication_seed, simulate_path, solve_limit_path

from conftest import FAMILY_KEYS, random_alpha, record_criterion

pytestmark = pytest.mark.acceptance

WORKERS = os.cpu_count() or 1
OU = get_model("ou-gamma")
DEEP = RegimeConfig(8000, 1 / 200, 40.0, 0.2)


def _rel_ok(analytic, fd, tol=1e-6):
    return np.abs(analytic - fd) <= tol * (1.0 + np.abs(analytic))


def _fd_alpha(fun, m, x, y, alpha, j, h):
    e = np.zeros_like(alpha)
    e[j] = h * max(1.0, abs(alpha[j]))
    return (fun(m, x, y, alpha + e) - fun(m, x, y, alpha - e)) / (2 * e[j])


def test_criterion_1_derivative_coherence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    bad = 0
    total = 0
    for key in FAMILY_KEYS:
        m = get_model(f"ou-{key}")
        fam = m.density
        for _ in range(20):  # 20 parameter draws x 50 points = 1000 points per family
            a = random_alpha(fam, rng)
            y = fam.sample(rng, a, 50)
            x = rng.normal(size=50)
            hy = 1e-6 * np.maximum(np.abs(y), 1e-3)
            checks = [(psi_dy(m, x, y, a), (psi(m, x, y + hy, a) - psi(m, x, y - hy, a)) / (2 * hy))]
            g = psi_dalpha(m, x, y, a)
            dya, daa = psi_d2(m, x, y, a)
            for j in range(a.size):
                checks.append((g[:, j], _fd_alpha(psi, m, x, y, a, j, 1e-6)))
                checks.append((dya[:, j], (psi_dalpha(m, x, y + hy, a)[:, j] - psi_dalpha(m, x, y - hy, a)[:, j]) / (2 * hy)))
                checks.append((daa[:, :, j], _fd_alpha(psi_dalpha, m, x, y, a, j, 1e-6)))
            for an, fd in checks:
                an, fd = np.asarray(an), np.asarray(fd)
                total += an.size
                bad += int(np.count_nonzero(~_rel_ok(an, fd)))
                worst = max(worst, float(np.max(np.abs(an - fd) / (1.0 + np.abs(an)))))
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10.0
    record_criterion(1, ok, f"{total} derivative entries, {bad} outside 1e-6 rel (worst {worst:.2e}), {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_2_zero_score_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for key in FAMILY_KEYS:
        m = get_model(f"ou-{key}")
        for _ in range(3):
            a = random_alpha(m.density, rng)
            mean, _ = jump_score_moments(m, 0.5, a)
            worst = max(worst, float(np.max(np.abs(mean))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0
    record_criterion(2, ok, f"max |E score| = {worst:.2e} (<= 1e-6), {elapsed:.1f}s (< 10s)")
    assert ok


def test_criterion_3_fisher_oracles():
    t0 = time.perf_counter()
    info = fisher_information(OU, OU.theta0)
    I1, I2, I3 = info.I1[0, 0], info.I2[0, 0], info.I3[0, 0]
    closed = ((1 - math.exp(-2)) / 2, 2.0, 2.0)
    quad_err = max(abs(I1 - closed[0]), abs(I2 - closed[1]), abs(I3 - closed[2]))
    rng = np.random.default_rng(3)
    # sampling oracles: x_t^2 at uniform times for I1, marks for I3; I2's integrand is constant
    path = solve_limit_path(OU, OU.theta0.mu, 2001)
    xs2 = path(rng.uniform(size=10**6)) ** 2
    mc1, se1 = xs2.mean(), xs2.std(ddof=1) / 1e3
    mc3, se3 = jump_information_mc(OU, OU.theta0, 10**6, rng)
    z1 = abs(I1 - mc1) / se1
    z3 = abs(I3 - mc3[0, 0]) / se3[0, 0]
    elapsed = time.perf_counter() - t0
    ok = quad_err <= 1e-6 and z1 <= 4 and z3 <= 4 and elapsed < 30.0
    record_criterion(
        3, ok,
        f"I1={I1:.10f} I2={I2:.10f} I3={I3:.10f}, max quad err {quad_err:.1e} (<= 1e-6), "
        f"MC z-scores I1 {z1:.2f} I3 {z3:.2f} (<= 4), {elapsed:.1f}s (< 30s)",
    )
    assert ok


def test_criterion_4_filter_fidelity():
    t0 = time.perf_counter()
    reg0 = RegimeConfig(4000, 0.005, 30.0, 0.2, v=1.0)
    ratios, wrong, intervals, missed, jumps = [], 0, 0, 0, 0
    for i in range(200):
        reg = reg0.with_seed(replication_seed(4, i))
        obs, truth = simulate_path(OU, OU.theta0, reg)
        lab = classify_increments(obs, reg, OU.density.support)
        has_jump = truth.counts > 0
        ratios.append(lab.n_jump / reg.lam)
        wrong += int(np.count_nonzero(lab.is_jump != has_jump))
        intervals += obs.n
        missed += int(np.count_nonzero(has_jump & ~lab.is_jump))
        jumps += int(np.count_nonzero(has_jump))
    mean_ratio = float(np.mean(ratios))
    rate = wrong / intervals
    elapsed = time.perf_counter() - t0
    ok = 0.9 <= mean_ratio <= 1.1 and rate <= 0.02 and elapsed < 120.0
    record_criterion(
        4, ok,
        f"mean lambda_hat/lambda = {mean_ratio:.4f} (in [0.9, 1.1]), per-interval misclassification {rate:.2e} (<= 2%); "
        f"jump intervals labelled C: {missed}/{jumps} = {missed / jumps:.2%}; {elapsed:.1f}s (< 120s)",
    )
    assert ok


def test_criterion_5_consistency_ladder():
    t0 = time.perf_counter()
    ladder = [RegimeConfig(500, 1 / 50, 10.0, 0.2), RegimeConfig(2000, 1 / 100, 20.0, 0.2), DEEP]
    res = consistency_ladder(OU, OU.theta0, ladder, 200, master_seed=5, workers=WORKERS)
    shrink = res.shrink_factors()
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(shrink >= 1.5)) and elapsed < 600.0
    detail = ", ".join(f"{n} {s:.2f}x" for n, s in zip(res.names, shrink))
    record_criterion(5, ok, f"RMSE shrink rung1/rung3: {detail} (each >= 1.5x); verdict {res.verdict}; {elapsed:.0f}s (< 600s)")
    assert ok


def test_criterion_6_asymptotic_normality():
    t0 = time.perf_counter()
    table = run_replications(OU, OU.theta0, DEEP, 500, master_seed=6, workers=WORKERS)
    rep = normality_diagnostics(table, fisher_information(OU, OU.theta0))
    elapsed = time.perf_counter() - t0
    ok = rep.relative_error <= 0.25 and rep.ks_passed >= 3 and elapsed < 900.0
    pv = ", ".join(f"{p:.3g}" for p in rep.ks_pvalue)
    record_criterion(
        6, ok,
        f"relative covariance error {rep.relative_error:.3f} (<= 0.25), KS p-values [{pv}], "
        f"{rep.ks_passed}/4 above 0.01 (need >= 3), mean {np.round(rep.mean, 2).tolist()}, "
        f"{rep.n_used}/{rep.n_rows} rows used; {elapsed:.0f}s (< 900s)",
    )
    assert ok


def test_criterion_7_observed_information():
    t0 = time.perf_counter()
    info = fisher_information(OU, OU.theta0)
    I = info.assembled
    norm_I = np.abs(I).sum(axis=1).max()
    ratios, ratios_hat = [], []
    for i in range(100):
        reg = DEEP.with_seed(replication_seed(7, i))
        obs, _ = simulate_path(OU, OU.theta0, reg)
        lab = classify_increments(obs, reg, OU.density.support)
        C = observed_information(obs, OU.theta0, lab, OU, reg.lam)  # known-regime mode: true lambda
        ratios.append(np.abs(C + I).sum(axis=1).max() / norm_I)
        C_hat = observed_information(obs, OU.theta0, lab, OU, max(lab.n_jump, 1))
        ratios_hat.append(np.abs(C_hat + I).sum(axis=1).max() / norm_I)
    mean = float(np.mean(ratios))
    elapsed = time.perf_counter() - t0
    ok = mean <= 0.15 and elapsed < 300.0
    record_criterion(
        7, ok,
        f"mean ||C + I||_inf / ||I||_inf = {mean:.4f} with true lambda (<= 0.15); "
        f"{np.mean(ratios_hat):.4f} with lambda_hat scaling (informational); {elapsed:.0f}s (< 300s)",
    )
    assert ok


def test_criterion_8_determinism(tmp_path):
    cfg = {
        "model": "ou-gamma",
        "regime": {"n": 300, "epsilon": 0.05, "lambda": 8, "rho": 0.2},
        "reps": 100,
        "seed": 88,
        "substeps": 4,
    }
    first = tmp_path / "first"
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    codes = [main(["mc", "--config", str(tmp_path / "c.json"), "--out", str(first), "--workers", "1"])]
    outputs = {}
    for w in (1, 2, 3):
        out = tmp_path / f"w{w}"
        codes.append(main(["mc", "--config", str(first / "manifest.json"), "--out", str(out), "--workers", str(w)]))
        outputs[w] = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    base = {p.name: p.read_bytes() for p in sorted(first.iterdir())}
    same = all(o == base for o in outputs.values())
    ok = same and codes == [0, 0, 0, 0] and {"mc.csv", "normality.json", "qq.csv", "manifest.json"} <= set(base)
    record_criterion(8, ok, f"files {sorted(base)} byte-identical across reruns with 1, 2, 3 workers: {same}")
    assert ok
