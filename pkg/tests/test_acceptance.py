"""Acceptance gate: one test per acceptance criterion, pinned tolerances.

Each test prints a single machine-readable verdict line. Two clauses are
known to be unattainable at desk scale and are left honestly red rather than
weakened; their tests state the measured ceiling in the failure message:

  - criterion 05: a 100x discrete gradient amplification cannot be observed
    because the centered difference saturates at ~0.43/h once the shock
    occupies 1-2 cells (measured ceiling ~14-18x at n = 2048);
  - criterion 11: the N = 4 and N = 6 small-amplitude runs do not reach
    gradient abort before numerical dissipation flattens the perturbation
    at any grid that fits in desk-scale time (N = 2 does abort, at n = 4096).
"""
import time

import numpy as np
import pytest

from hkslab.blowup import (CharTrace, build_invariant_table,
                           estimate_blowup_time)
from hkslab.core import make_grid
from hkslab.propagation import ConeSpec, compute_A, verify_cone
from hkslab.riemann import InvariantMap, PhasePoint, eigen
from hkslab.scenarios import (ScenarioConfig, build_data, perturbation_norm,
                              run_scenario)
from hkslab.transform import RescaleParam, parabolic_rescale

from conftest import canonical_solver, covered_points


def _verdict(num, ok, detail):
    print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {num:02d}: {detail}"


def test_criterion_01_eigenstructure(rng):
    start = time.time()
    z1, z2 = covered_points(rng, 1000)
    worst = 0.0
    ordered = True
    for a, b in zip(z1, z2):
        lam1, lam2, r1, r2 = eigen(PhasePoint(a, b))
        ordered &= lam1 < 0.0 < lam2
        mat = np.array([[b, a], [1.0, 0.0]])
        for lam, r in ((lam1, r1), (lam2, r2)):
            res = mat @ np.asarray(r) - lam * np.asarray(r)
            worst = max(worst, float(np.max(np.abs(res))))
    elapsed = time.time() - start
    _verdict(1, worst <= 1e-12 and ordered and elapsed < 1.0,
             f"residual {worst:.2e} (<=1e-12), ordering {ordered}, "
             f"{elapsed:.2f}s (<1s)")


def test_criterion_02_invariant_construction(rng):
    start = time.time()
    imap = InvariantMap()
    z1, z2 = covered_points(rng, 200, z2_lim=1.2, margin=0.4, spread=2.5)
    eps = 1e-4

    # batched finite-difference Jacobian (uncached so the memo quantum
    # cannot contaminate the stencil)
    stack1 = np.concatenate([z1 + eps, z1 - eps, z1, z1])
    stack2 = np.concatenate([z2, z2, z2 + eps, z2 - eps])
    w1s, w2s = imap.w_eval_many(stack1, stack2, cached=False)
    k = len(z1)
    fd = np.empty((k, 2, 2))
    fd[:, 0, 0] = (w1s[0:k] - w1s[k:2 * k]) / (2 * eps)
    fd[:, 1, 0] = (w2s[0:k] - w2s[k:2 * k]) / (2 * eps)
    fd[:, 0, 1] = (w1s[2 * k:3 * k] - w1s[3 * k:]) / (2 * eps)
    fd[:, 1, 1] = (w2s[2 * k:3 * k] - w2s[3 * k:]) / (2 * eps)

    worst_orth = worst_grad1 = worst_det = worst_round = 0.0
    for i in range(k):
        p = PhasePoint(z1[i], z2[i])
        lam1, lam2, r1, r2 = eigen(p)
        s = np.sqrt(p.z2 ** 2 + 4.0 * p.z1)
        for row, r in ((0, r1), (1, r2)):
            g = fd[i, row]
            rel = abs(g @ np.asarray(r)) / (np.linalg.norm(g)
                                            * np.linalg.norm(r))
            worst_orth = max(worst_orth, rel)
        f1 = imap.f_eval(p, 1)
        closed = np.array([f1, f1 * 0.5 * (-p.z2 + s)])
        worst_grad1 = max(worst_grad1, float(np.max(
            np.abs(fd[i, 0] - closed) / np.abs(closed))))
        det_formula = imap.det_grad_w(p)
        det_fd = float(np.linalg.det(fd[i]))
        worst_det = max(worst_det,
                        abs(det_fd - det_formula) / abs(det_formula))
        assert det_formula > 0
        w = imap.w_eval(p)
        back = imap.invert_w(w)
        worst_round = max(worst_round, abs(back.z1 - p.z1),
                          abs(back.z2 - p.z2))

    w0 = imap.w_eval(PhasePoint(1.0, 0.0))
    spot_w = max(abs(w0.w1 - np.e), abs(w0.w2 + np.e))
    spot_d = abs(imap.dlambda2_dw1(PhasePoint(1.0, 0.0)) - 1.0 / (2.0 * np.e))
    elapsed = time.time() - start
    ok = (worst_orth <= 1e-5 and worst_grad1 <= 1e-6 and worst_det <= 1e-5
          and worst_round <= 1e-8 and spot_w <= 1e-9 and spot_d <= 1e-6
          and elapsed < 30.0)
    _verdict(2, ok,
             f"grad_w.r {worst_orth:.2e} (<=1e-5), grad w1 {worst_grad1:.2e} "
             f"(<=1e-6), det {worst_det:.2e} (<=1e-5), roundtrip "
             f"{worst_round:.2e} (<=1e-8), spots {spot_w:.1e}/{spot_d:.1e}, "
             f"{elapsed:.1f}s (<30s)")


def test_criterion_03_constant_exactness():
    config = ScenarioConfig(scenario="constant", rho_bar=1.0, c_bar=1.0,
                            grid=make_grid(1, 512, 16.0), t_end=1.0,
                            solver=canonical_solver())
    report = run_scenario(config)
    final = report.extras["result"].final_state
    d_rho = float(np.max(np.abs(final.rho - 1.0)))
    d_q = float(np.max(np.abs(final.q)))
    d_c = abs(float(np.max(final.c)) - np.exp(-1.0))
    ok = d_rho <= 1e-12 and d_q <= 1e-12 and d_c <= 1e-8
    _verdict(3, ok, f"drho {d_rho:.2e} (<=1e-12), dq {d_q:.2e} (<=1e-12), "
                    f"|c(1)-1/e| {d_c:.2e} (<=1e-8)")


def test_criterion_04_conservation_positivity(canonical_abort_run):
    result = canonical_abort_run.extras["result"]
    vol = result.grid.cell_volume
    mass0 = float(np.sum(result.snapshots[0].rho)) * vol
    drift = max(abs(float(np.sum(s.rho)) * vol - mass0) / mass0
                for s in result.snapshots)
    c_positive = all(bool(np.all(np.exp(s.log_c) > 0.0))
                     for s in result.snapshots)
    sups = [float(np.max(np.exp(s.log_c))) for s in result.snapshots]
    c_monotone = all(b <= a + 1e-12 for a, b in zip(sups, sups[1:]))
    ok = (canonical_abort_run.verdict == "gradient_abort"
          and drift <= 1e-10 and c_positive and c_monotone)
    _verdict(4, ok, f"verdict {canonical_abort_run.verdict}, mass drift "
                    f"{drift:.2e} (<=1e-10), c>0 {c_positive}, "
                    f"sup c nonincreasing {c_monotone}")


def test_criterion_05_gradient_blowup_amplification():
    # Honest red: the 100x amplification clause is unattainable; see the
    # module docstring. Abort factor set to 100 so the run would abort if
    # the amplification were reachable.
    start = time.time()
    config = ScenarioConfig(
        scenario="remark11", grid=make_grid(1, 2048, 16.0), t_end=2.0,
        solver=canonical_solver(gradient_abort_factor=100.0, record_every=5))
    report = run_scenario(config)
    result = report.extras["result"]
    recs = [r for r in result.records if r.norms is not None]
    g0 = recs[0].norms.sup_grad_rho
    amp = max(r.norms.sup_grad_rho for r in recs) / g0
    bounded = []
    for key in ("sup_rho", "sup_c", "sup_grad_c", "sup_grad_log_c"):
        vals = [abs(getattr(r.norms, key)) for r in recs]
        bounded.append(max(vals) / max(vals[0], 1e-300))
    elapsed = time.time() - start
    cls = report.blowup.classification if report.blowup else "none"
    ok = (report.verdict == "gradient_abort" and amp >= 100.0
          and max(bounded) < 3.0 and cls == "gradient_blowup"
          and elapsed < 120.0)
    _verdict(5, ok,
             f"verdict {report.verdict}, amplification {amp:.1f}x (>=100x "
             f"required; discrete ceiling ~(shock jump)/(2h|grad rho0|) "
             f"~14-18x at n=2048), bounded max ratio {max(bounded):.2f} "
             f"(<3), classification {cls}, {elapsed:.0f}s (<120s)")


def test_criterion_06_range_preservation(canonical_abort_run):
    result = canonical_abort_run.extras["result"]
    table = build_invariant_table(result)
    s0 = result.snapshots[0]
    P0, Q0 = table.pq(s0.rho, s0.q[0])
    h = result.grid.h
    lip = float(np.max(np.abs(np.diff(P0)))) / h
    tol = 5.0 * h * lip
    excess = 0.0
    for s in result.snapshots:
        P, Q = table.pq(s.rho, s.q[0])
        excess = max(excess,
                     float(P0.min() - P.min()), float(P.max() - P0.max()),
                     float(Q0.min() - Q.min()), float(Q.max() - Q0.max()))
    trace = canonical_abort_run.trace
    assert trace is not None
    drift = float(np.max(np.abs(np.asarray(trace.P) - trace.P[0])))
    ok = excess <= tol and drift <= tol
    _verdict(6, ok, f"range excess {excess:.3f} (<= {tol:.3f} = 5h Lip), "
                    f"trace P drift {drift:.3f} (<= {tol:.3f}) until abort "
                    f"t={result.t_abort:.3f}")


def test_criterion_07_riccati_ordering(riccati_sweep):
    ests = {n: estimate_blowup_time(riccati_sweep[n].trace)
            for n in (512, 1024, 2048)}
    nonincreasing = (ests[1024] <= ests[512] * 1.05
                     and ests[2048] <= ests[1024] * 1.05)
    t_upper = riccati_sweep[2048].blowup.riccati_T_upper
    bounded = ests[2048] <= t_upper * 1.1

    # scalar oracle: exact Riccati decay y = y0 / (1 + y0 k t) sampled on a
    # trace must recover the divergence time 1/(|y0| k) to 1e-6 relative
    y0, kk = -0.5, 2.0
    t_div = 1.0 / (abs(y0) * kk)
    ts = np.linspace(0.0, 0.8 * t_div, 400)
    y = y0 / (1.0 + y0 * kk * ts)
    synth = CharTrace(times=ts, positions=np.zeros_like(ts),
                      P=np.zeros_like(ts), Q=np.zeros_like(ts), P_tilde=y,
                      Phi=np.ones_like(ts), dlam2_dw1=np.ones_like(ts),
                      truncated=False)
    oracle_rel = abs(estimate_blowup_time(synth) - t_div) / t_div
    ok = nonincreasing and bounded and oracle_rel <= 1e-6
    _verdict(7, ok,
             f"T_est {ests[512]:.3f}/{ests[1024]:.3f}/{ests[2048]:.3f} "
             f"nonincreasing(5%) {nonincreasing}, T_est <= 1.1*T_upper="
             f"{t_upper:.0f} {bounded}, scalar oracle rel {oracle_rel:.1e} "
             f"(<=1e-6)")


def test_criterion_08_finite_speed(propagation_pairs):
    details = []
    ok = True
    for n, (run_b, run_c) in propagation_pairs.items():
        A = compute_A(run_b, run_c)
        cone = ConeSpec(center=10.0, A=A, T_star=0.25)
        tol = 10.0 * 2.0 * run_b.grid.h  # Lip of the data profile ~ 2
        rep = verify_cone(run_b, run_c, cone, tol)
        speed_chain = (rep.empirical_front_speed
                       <= rep.lambda_max_observed * 1.1
                       <= cone.speed(run_b.grid.dim))
        ok &= (not rep.cone_violation) and speed_chain
        details.append(f"n={n}: violation={rep.cone_violation} "
                       f"front={rep.empirical_front_speed:.2f}<=1.1*"
                       f"{rep.lambda_max_observed:.2f}<=6Ad="
                       f"{cone.speed(1):.1f}")
    _verdict(8, ok, "; ".join(details))


def test_criterion_09_scaling_symmetry():
    errs = []
    for n in (512, 1024, 2048):
        solver = canonical_solver(gradient_abort_factor=1e6, record_every=50)
        grid = make_grid(1, n, 16.0)
        orig = run_scenario(ScenarioConfig(scenario="remark11", grid=grid,
                                           t_end=0.16, solver=solver))
        resc = run_scenario(ScenarioConfig(scenario="thm13_case1", a=2.0,
                                           grid=grid, t_end=0.04,
                                           solver=solver))
        s_a = parabolic_rescale(orig.extras["result"].final_state,
                                RescaleParam(2.0))
        s_b = resc.extras["result"].final_state
        h = grid.h
        errs.append(float(np.sum(np.abs(s_a.rho - s_b.rho)) * h
                          + np.sum(np.abs(s_a.q - s_b.q)) * h
                          + np.sum(np.abs(s_a.log_c - s_b.log_c)) * h))
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    ok = all(r >= 1.7 for r in ratios)
    _verdict(9, ok, f"L1 errors {[f'{e:.3e}' for e in errs]}, halving "
                    f"ratios {[f'{r:.2f}' for r in ratios]} (>=1.7)")


def test_criterion_10_multid_consistency():
    config = ScenarioConfig(
        scenario="thm13_case2", delta=0.2, grid=make_grid(2, 256, 8.0),
        t_end=2.0,
        solver=canonical_solver(gradient_abort_factor=2.0, max_steps=40000))
    report = run_scenario(config)
    slice_max = report.extras["slice_max_diff"]
    tol = 10.0 * config.grid.h
    ok = report.verdict == "gradient_abort" and slice_max <= tol
    _verdict(10, ok, f"verdict {report.verdict} at t={report.t_final:.3f}, "
                     f"slice disagreement {slice_max:.2e} (<= {tol:.3f} = 10h)")


def test_criterion_11_small_amplitude_family():
    # Honest red for N in {4, 6}: their blow-up horizons scale like
    # delta^-N and numerical dissipation flattens the perturbation first
    # at every grid that fits in desk-scale time; N = 2 aborts at n = 4096.
    norms = {}
    verdicts = {}
    for N in (2, 4, 6):
        config = ScenarioConfig(
            scenario="corollary14", delta=0.2, N=N,
            grid=make_grid(1, 4096, 16.0), t_end=500.0,
            solver=canonical_solver(max_steps=20000, snapshot_every=50,
                                    record_every=50))
        norms[N] = perturbation_norm(build_data(config), config.rho_bar, m=2)
        report = run_scenario(config)
        verdicts[N] = (report.verdict, report.t_final)
    monotone = norms[2] > norms[4] > norms[6]
    small = norms[6] < 1e-2
    all_abort = all(v == "gradient_abort" for v, _ in verdicts.values())
    ok = monotone and small and all_abort
    _verdict(11, ok,
             f"H2 norms {norms[2]:.3e}>{norms[4]:.3e}>{norms[6]:.3e} "
             f"monotone {monotone}, N=6 < 1e-2 {small}; verdicts "
             + ", ".join(f"N={N}:{v}@t={t:.1f}" for N, (v, t)
                         in verdicts.items())
             + " (all must be gradient_abort; N>=4 needs n>~8192 and a "
               ">10x horizon)")
