"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one `ACCEPT <k> PASS/FAIL` line (visible with -s) and
asserts both the property and its runtime budget.  Seeds are fixed so
every statistical verdict is reproducible.
"""

import os
import time

import numpy as np

from scbf.cli import main as cli_main
from scbf.config import RunConfig, replace
from scbf.diagnostics import (absorption_identity_suite, check_monotonicity,
                              ensemble_energy_balance,
                              galerkin_convergence_study,
                              gronwall_uniqueness_test, ito_isometry_suite,
                              ledger_residual_orders, moment_bound_check,
                              poisson_count_suite, stationary_variance_check,
                              stokes_identity_suite, trilinear_suite,
                              wiener_statistics_suite)
from scbf.integrator import simulate_path
from scbf.persist import read_snapshot, write_snapshot

JOBS = max(1, int(os.environ.get("SCBF_JOBS", min(2, os.cpu_count() or 1))))


def report(k, ok, detail):
    line = f"ACCEPT {k:2d} {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    return ok


def test_criterion_01_convection_identity_suite():
    t0 = time.time()
    r2d = trilinear_suite(2, 8, 6000, seed=101, tol=1e-10)
    r3d = trilinear_suite(3, 4, 4000, seed=102, tol=1e-10)
    elapsed = time.time() - t0
    ok = r2d.passed and r3d.passed and elapsed < 60
    assert report(1, ok, f"trilinear identities: worst 2D={r2d.worst:.2e} "
                         f"3D={r3d.worst:.2e} tol=1e-10, 1e4 triples [{elapsed:.0f}s]")


def test_criterion_02_pairing_identities():
    t0 = time.time()
    reps = [stokes_identity_suite(2, 8, 2000, seed=103, tol=1e-12),
            stokes_identity_suite(3, 4, 1000, seed=104, tol=1e-12)]
    worst_a = max(r.worst for r in reps)
    creps = [absorption_identity_suite(r, 500, seed=105, tol=1e-10)
             for r in (1.0, 2.0, 3.0, 5.0)]
    worst_c = max(r.worst for r in creps)
    ok = all(r.passed for r in reps + creps)
    elapsed = time.time() - t0
    assert report(2, ok, f"<Au,u>=|u|_V^2 worst={worst_a:.2e} (tol 1e-12); "
                         f"<C(u),u>=|u|_Lr1 worst={worst_c:.2e} (tol 1e-10) [{elapsed:.0f}s]")


def test_criterion_03_monotonicity():
    t0 = time.time()
    reps = [check_monotonicity(r, 10000, seed=106, tol=1e-10)
            for r in (1.0, 2.0, 3.0, 5.0)]
    elapsed = time.time() - t0
    worst = min(r.worst for r in reps)
    ok = all(r.passed for r in reps) and elapsed < 120
    assert report(3, ok, f"monotonicity margin >= {worst:.2e} >= -1e-10, "
                         f"1e4 pairs per r in {{1,2,3,5}} [{elapsed:.0f}s]")


def test_criterion_04_noise_statistics():
    t0 = time.time()
    cfg = RunConfig(d=2, n=6, T=1.0, dt=0.02, sigma_kind="additive", sigma_a0=0.5,
                    q_c=0.1, q_s=2.0, jump_intensity=2.0, gamma_c0=0.5,
                    gamma_c1=0.3, seed=0)
    w = wiener_statistics_suite(cfg, m=10000)
    p = poisson_count_suite(cfg, m=10000)
    iso = ito_isometry_suite(cfg, m=10000)
    elapsed = time.time() - t0
    ok = w.passed and p.passed and iso.passed and elapsed < 300
    assert report(4, ok, f"isometry {iso.extra['isometry_sigmas']:.2f}sig, "
                         f"martingale {iso.extra['martingale_sigmas']:.2f}sig (<=3); "
                         f"chi2 {p.extra['chi2']:.1f} < {p.extra['critical_1pct']:.1f}; "
                         f"wiener {w.worst:.2f}sig [{elapsed:.0f}s]")


def test_criterion_05_deterministic_ledger_order():
    t0 = time.time()
    cfg = RunConfig(d=2, n=16, r=3.0, mu=1.0, beta=1.0, T=1.0, dt=1 / 64,
                    scheme="exponential-tamed", sigma_kind="off",
                    jump_intensity=0.0, init="taylor-green", output_times=(1.0,))
    dts = [1.0 / 2 ** k for k in range(6, 11)]
    res, slope = ledger_residual_orders(cfg, dts)
    elapsed = time.time() - t0
    ok = slope >= 0.9 and elapsed < 300
    assert report(5, ok, f"ledger residual slope {slope:.3f} >= 0.9 over "
                         f"dt in 2^-6..2^-10 (residuals {res[0]:.1e}->{res[-1]:.1e}) "
                         f"[{elapsed:.0f}s]")


BALANCE_CFG = RunConfig(d=2, n=8, r=3.0, mu=1.0, beta=1.0, T=1.0, dt=0.02,
                        scheme="exponential-tamed", sigma_kind="additive",
                        sigma_a0=0.3, q_c=0.1, q_s=2.0, jump_intensity=2.0,
                        gamma_c0=0.3, gamma_c1=0.2, init="taylor-green",
                        output_times=(1.0,), seed=11)


def test_criterion_06_ensemble_energy_balance():
    t0 = time.time()
    rep = ensemble_energy_balance(BALANCE_CFG, m=10000, jobs=JOBS, pilot=128)
    ou_cfg = replace(BALANCE_CFG, n=6, T=5.0, dt=0.01, seed=21, sigma_a0=0.4)
    ou = stationary_variance_check(ou_cfg, m=4000, modes=((1, 0), (0, 1), (1, 1)),
                                   jobs=JOBS)
    elapsed = time.time() - t0
    ok = rep.passed and ou.passed and rep.excluded == 0 and elapsed < 900
    assert report(6, ok, f"balance mean={rep.mean:.2e} within 3se={3 * rep.se:.1e}"
                         f"+band={rep.bias_band:.1e} (m={rep.m}); "
                         f"OU variance worst {ou.worst:.2f}sig <= 3 [{elapsed:.0f}s]")


def test_criterion_07_moment_bound():
    t0 = time.time()
    rep = moment_bound_check(BALANCE_CFG, m=1000, jobs=JOBS)
    elapsed = time.time() - t0
    ok = rep.passed and elapsed < 600
    assert report(7, ok, f"E[sup|u|^2]+dissipation = {rep.estimate:.3f} "
                         f"(+-{rep.estimate_ci:.3f}) <= {rep.bound:.1f} "
                         f"(C={rep.bound_constant:.0f}, K1={rep.k1:.3f}) [{elapsed:.0f}s]")


def test_criterion_08_pathwise_uniqueness():
    t0 = time.time()
    regimes = [
        RunConfig(d=2, n=8, r=1.0, mu=1.0, beta=1.0, T=1.0, dt=1 / 64,
                  scheme="exponential-tamed", sigma_kind="additive", sigma_a0=0.3,
                  q_s=2.0, jump_intensity=1.0, gamma_c0=0.3, gamma_c1=0.0,
                  init="taylor-green", output_times=(1.0,), seed=200),
        RunConfig(d=2, n=8, r=3.0, mu=1.0, beta=1.0, T=1.0, dt=1 / 64,
                  scheme="exponential-tamed", sigma_kind="additive", sigma_a0=0.3,
                  q_s=2.0, jump_intensity=1.0, gamma_c0=0.3, gamma_c1=0.0,
                  init="taylor-green", output_times=(1.0,), seed=300),
        RunConfig(d=3, n=4, r=3.0, mu=1.0, beta=0.6, T=0.5, dt=1 / 32,
                  scheme="exponential-tamed", sigma_kind="additive", sigma_a0=0.2,
                  q_s=2.0, jump_intensity=1.0, gamma_c0=0.2, gamma_c1=0.0,
                  init="taylor-green", output_times=(0.5,), seed=400),
        RunConfig(d=3, n=3, r=5.0, mu=1.0, beta=1.0, T=0.5, dt=1 / 32,
                  scheme="exponential-tamed", sigma_kind="additive", sigma_a0=0.2,
                  q_s=2.0, jump_intensity=1.0, gamma_c0=0.2, gamma_c1=0.0,
                  init="taylor-green", output_times=(0.5,), seed=500),
    ]
    zero = gronwall_uniqueness_test(regimes[1], 0.0, 10)
    seps = [gronwall_uniqueness_test(cfg, 1e-6, 25) for cfg in regimes]
    elapsed = time.time() - t0
    ok = zero.passed and all(r.passed for r in seps) and elapsed < 600
    worst = max(r.worst for r in seps)
    assert report(8, ok, f"delta=0 bitwise zero; delta=1e-6 envelope ratio "
                         f"<= {worst:.3f} <= 1 over 100 seeds in 4 regimes "
                         f"[{elapsed:.0f}s]")


def test_criterion_09_galerkin_self_convergence():
    t0 = time.time()
    cfg = RunConfig(d=2, n=32, r=3.0, mu=1.0, beta=1.0, T=1.0, dt=1 / 256,
                    scheme="exponential-tamed", sigma_kind="additive",
                    sigma_a0=0.3, q_c=0.1, q_s=2.0, jump_intensity=2.0,
                    gamma_c0=0.3, gamma_c1=0.2, init="decaying",
                    output_times=tuple(np.linspace(0.0, 1.0, 9)), seed=7)
    rep = galerkin_convergence_study(cfg, [4, 8, 16, 32], rate_floor=1.0)
    elapsed = time.time() - t0
    ok = rep.passed and elapsed < 600
    diffs = ", ".join(f"{x:.2e}" for x in rep.sup_differences)
    assert report(9, ok, f"sup diffs strictly decreasing [{diffs}], "
                         f"terminal rate {rep.rate:.2f} >= 1 [{elapsed:.0f}s]")


def test_criterion_10_infrastructure(tmp_path):
    t0 = time.time()
    cfg = RunConfig(d=2, n=6, r=3.0, T=0.5, dt=0.05, sigma_kind="additive",
                    sigma_a0=0.4, jump_intensity=4.0, gamma_c0=0.4, gamma_c1=0.2,
                    seed=8, output_times=(0.0, 0.25, 0.5))
    tr = simulate_path(cfg)
    snap = tmp_path / "t.scbf"
    write_snapshot(tr, snap, cfg)
    back, _ = read_snapshot(snap)
    round_trip = all(np.array_equal(a.coeffs, b.coeffs)
                     for a, b in zip(tr.states, back.states)) \
        and back.record.equal(tr.record)
    replay = simulate_path(cfg, record=back.record)
    replay_ok = all(np.array_equal(a.coeffs, b.coeffs)
                    for a, b in zip(tr.states, replay.states))
    cfg_text = "d = 2\nn = 6\nseed = 5\nsigma_kind = additive\njump_intensity = 2.0\n"
    cfgp = tmp_path / "v.cfg"
    cfgp.write_text(cfg_text)
    outs = []
    for sub in ("v1", "v2"):
        out = tmp_path / sub
        rc = cli_main(["verify", "--config", str(cfgp), "--out", str(out),
                       "--no-figures"])
        assert rc == 0
        outs.append((out / "verify.jsonl").read_bytes())
    identical = outs[0] == outs[1]
    elapsed = time.time() - t0
    ok = round_trip and replay_ok and identical
    assert report(10, ok, f"snapshot round trip bitwise={round_trip}, "
                          f"replay bitwise={replay_ok}, verify reports "
                          f"byte-identical={identical} [{elapsed:.0f}s]")
