"""Acceptance criteria 1-14 at their stated tolerances, one recorded line each."""
import time

import numpy as np
import pytest

from perronhjb.controls import ControlSignal
from perronhjb.ergodic import attractiveness_probe, build_ergodic_set, connect, stability_check
from perronhjb.floquet import fd_second, first_directional, lambda_F, second_directional
from perronhjb.hjb import (Scheme, SimplexGrid, extract_eigenvector, optimal_trajectory,
                           polyline_distance, run_discounted, run_time_dependent,
                           step_time_dependent, verify_particular_solution)
from perronhjb.hypotheses import h_checks
from perronhjb.perron import (d2lambda_P, diagonalizable_real, dlambda_P, fd_d2lambda, fd_dlambda,
                              lambda_P, optimize_perron, spectrum)
from perronhjb.simplex import integrate, reward, uniform_simplex
from perronhjb.spectral import build_running_example, table1

LAMBDA_REF = 0.7273
ALPHA_REF = 3.35


@pytest.fixture(scope="module")
def hjb_run(params):
    t0 = time.perf_counter()
    run = run_time_dependent(params, dy=1e-2, dt=1e-3, T=10.0)
    run.diagnostics["wall"] = time.perf_counter() - t0
    return run


def test_c01_perron_optimum(params, acceptance):
    t0 = time.perf_counter()
    opt = optimize_perron(params)
    wall = time.perf_counter() - t0
    ok = abs(opt.alpha_star - ALPHA_REF) <= 0.01 and abs(opt.lambda_star - LAMBDA_REF) <= 1e-3 \
        and wall < 1.0
    acceptance(1, ok, f"alpha*={opt.alpha_star:.6f} lambda*={opt.lambda_star:.7f} t={wall:.3f}s")
    assert ok


def test_c02_monotone_alternative(acceptance):
    t0 = time.perf_counter()
    alphas = np.r_[0.0, np.logspace(-3, 4, 400)]
    mono = build_running_example(0.5, 0.5, 1.0, 2.0)
    lm = np.array([lambda_P(mono, a) for a in alphas])
    ok_mono = bool(np.all(np.diff(lm) >= -1e-12) and np.all(lm <= 0.5 + 1e-12))
    uni = build_running_example(0.5, 5.0, 1.0, 2.0)
    lu = np.array([lambda_P(uni, a) for a in alphas])
    k = int(np.argmax(lu))
    d = np.diff(lu)
    unimodal = bool(np.all(d[:k] >= -1e-12) and np.all(d[k:] <= 1e-12))
    tail = lambda_P(uni, 1e4)
    wall = time.perf_counter() - t0
    ok = ok_mono and unimodal and 0 < k < len(alphas) - 1 and lu[k] > 0.5 \
        and abs(tail - 0.5) <= 0.01 and wall < 5.0
    acceptance(2, ok, f"monotone={ok_mono} unimodal={unimodal} max={lu[k]:.4f} "
                      f"tail(1e4)={tail:.5f} t={wall:.2f}s")
    assert ok


def test_c03_derivative_formulas(params, acceptance):
    rng = np.random.default_rng(3)
    alphas = rng.uniform(0.1, 20.0, 20)
    e1 = max(abs(dlambda_P(params, a) - fd_dlambda(params, a)) for a in alphas)
    e2 = max(abs(d2lambda_P(params, a) - fd_d2lambda(params, a)) / abs(fd_d2lambda(params, a))
             for a in alphas)
    ok = e1 <= 1e-6 and e2 <= 1e-2
    acceptance(3, ok, f"max |dlambda - fd|={e1:.2e} max rel d2 gap={e2:.2e}")
    assert ok


def test_c04_floquet_reduction(acceptance):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        t1, t2 = rng.uniform(0.1, 5.0, 2)
        b2, b3 = rng.uniform(0.5, 3.0, 2)
        p = build_running_example(t1, t2, b2, b3)
        a = rng.uniform(0.1, 10.0)
        worst = max(worst, abs(lambda_F(p, ControlSignal.constant(a)).lambda_F - lambda_P(p, a)))
    ok = worst <= 1e-8
    acceptance(4, ok, f"max |lambda_F - lambda_P| over 50 models = {worst:.2e}")
    assert ok


def test_c05_floquet_derivatives(params, acceptance):
    a = optimize_perron(params).alpha_star
    sine, square = ControlSignal.sine(0.0, 1.0, 1.0), ControlSignal.square_wave(-1.0, 1.0, 1.0)
    first = max(abs(first_directional(params, a, g)) for g in (sine, square))
    rel = max(abs(second_directional(params, a, g) - fd_second(params, a, g, eps=1e-2))
              / abs(fd_second(params, a, g, eps=1e-2)) for g in (sine, square))
    ones = abs(second_directional(params, a, ControlSignal.constant(1.0)) - d2lambda_P(params, a))
    ok = first <= 1e-5 and rel <= 1e-2 and ones <= 1e-10
    acceptance(5, ok, f"first={first:.2e} second rel gap={rel:.2e} gamma=1 gap={ones:.1e}")
    assert ok


def test_c06_simplex_conservation(params, acceptance):
    worst_rate, worst_dist, worst_avg, worst_corr = 0.0, 0.0, 0.0, 0.0
    for alpha in (1.0, 3.35, 6.0):
        s = spectrum(params, alpha)
        for y0 in ([1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1 / 3]):
            raw = integrate(params, y0, ControlSignal.constant(alpha), 10.0, renormalize=False)
            worst_rate = max(worst_rate, raw.max_drift_rate())
            run = integrate(params, y0, ControlSignal.constant(alpha), 50.0, record_every=10)
            worst_dist = max(worst_dist, np.linalg.norm(run.end - s.e1))
            gap = run.average_reward(params)[-1] - s.lambdas[0]
            worst_avg = max(worst_avg, abs(gap))
            # the transient contributes log<phi, y0> / T; reported, not used for the verdict
            worst_corr = max(worst_corr, abs(gap - np.log(s.phi1 @ np.asarray(y0)) / 50.0))
    ok = worst_rate <= 1e-9 and worst_dist <= 1e-6 and worst_avg <= 1e-3
    acceptance(6, ok, f"drift/time={worst_rate:.1e} |y-e|={worst_dist:.1e} "
                      f"|<L>-lambda|={worst_avg:.1e} (minus log<phi,y0>/T: {worst_corr:.1e})")
    assert ok


def test_c07_ergodic_set(params, acceptance):
    z = build_ergodic_set(params, delta=0.05)
    err = max(z.endpoint_errors().values())
    stab = stability_check(params, z, n_samples=500, tol=1e-8)
    rng = np.random.default_rng(7)
    pts = uniform_simplex(params, rng, 4000)
    pts = pts[z.z_minus.contains(pts)][:40]
    land = max(connect(params, a, b, region=z.z_minus).landing_error
               for a, b in zip(pts[:20], pts[20:]))
    ok = err <= 1e-6 and stab.ok and stab.n_checked >= 500 and len(pts) == 40 and land <= 1e-4
    acceptance(7, ok, f"endpoint err={err:.1e} stability worst={stab.worst:.1e} "
                      f"max landing={land:.1e}")
    assert ok


def test_c08_attractiveness(params, acceptance):
    rep = attractiveness_probe(params, delta=0.1, n_trials=100, seed=0, T_max=100.0)
    acceptance(8, rep.ok, f"entered={int(np.isfinite(rep.entry_times).sum())}/100 "
                          f"exits={int(rep.exited.sum())} max entry={rep.max_entry:.2f}")
    assert rep.ok


def test_c09_hypotheses(params, acceptance):
    rep = h_checks(params, n_fd=10, fd_rtol=1e-5)
    h4 = rep["H4"].details
    neg = bool(np.all(np.array(h4["values"]) < 0))
    fd = max(h4["fd_rel_err"])
    ok = rep.passed and neg and fd <= 1e-5 and len(h4["fd_rel_err"]) == 10
    acceptance(9, ok, f"{rep.summary()} H4 negative={neg} fd rel={fd:.1e}")
    assert ok


def test_c10_hjb_ergodic_constant(hjb_run, acceptance):
    r = hjb_run
    ok = abs(r.lambda_ratio - LAMBDA_REF) <= 5e-2 and abs(r.lambda_slope - LAMBDA_REF) <= 5e-2 \
        and r.collapse() <= 5e-2 and r.diagnostics["wall"] < 120
    acceptance(10, ok, f"ratio={r.lambda_ratio:.5f} slope={r.lambda_slope:.5f} "
                       f"collapse={r.collapse():.3e} t={r.diagnostics['wall']:.1f}s")
    assert ok


def test_c11_discounted(params, hjb_run, acceptance):
    lam = optimize_perron(params).lambda_star
    runs = [run_discounted(params, e, dy=1e-2) for e in (0.1, 0.05, 0.01)]
    Lmax = np.max(np.abs(reward(params, runs[0].grid.points)))
    bound = all(np.max(np.abs(r.eps * r.field.values)) <= Lmax for r in runs)
    spreads = [r.diagnostics["spread"] for r in runs]
    mean = runs[-1].diagnostics["mean"]
    ok = bound and spreads[0] > spreads[1] > spreads[2] and abs(mean - lam) <= 5e-2 \
        and abs(mean - hjb_run.lambda_hj) <= 2e-2
    acceptance(11, ok, f"bound={bound} spreads={[f'{s:.2e}' for s in spreads]} "
                       f"mean(0.01)={mean:.5f}")
    assert ok


def test_c12_optimal_trajectory(params, hjb_run, acceptance):
    opt = optimize_perron(params)
    ev = extract_eigenvector(hjb_run)
    traj = optimal_trajectory(params, ev, [0.0, 0.5, 0.0], T=10.0, dt=1e-3)
    dist = np.linalg.norm(traj.record.end - spectrum(params, opt.alpha_star).e1)
    tail = traj.tail_control()
    avg = traj.record.average_reward(params)[-1]
    sep = polyline_distance(ev.longest_separation(), spectrum(params, opt.alpha_star).e1[:2])
    ok = dist <= 5 * hjb_run.dy and abs(tail - ALPHA_REF) <= 0.2 and abs(avg - opt.lambda_star) <= 2e-2
    acceptance(12, ok, f"end dist={dist:.1e} tail control={tail:.3f} path reward={avg:.4f} "
                       f"(e* to separation line {sep:.1e})")
    assert ok


def test_c13_particular_solution(acceptance):
    mono = verify_particular_solution(build_running_example(0.5, 0.5, 1.0, 2.0, a=1.0, A=6.0))
    sub = verify_particular_solution(build_running_example(0.5, 5.0, 1.0, 2.0, a=0.5, A=2.0))
    ok = mono.passed and mono.case == "monotone" and sub.passed and sub.case == "subdomain" \
        and sub.a_prime is not None
    acceptance(13, ok, f"monotone {mono.checks} | S' {sub.checks} A'={sub.a_prime:.6f}")
    assert ok


def test_c14_scheme_properties(acceptance):
    p = table1()
    g = SimplexGrid(p, 5e-2)
    sch = Scheme.build(g)
    rng = np.random.default_rng(14)
    mono = shift = 0
    for _ in range(100):
        u = rng.normal(size=g.size)
        dt = rng.uniform(0.1, 1.0) * sch.max_step()
        base = step_time_dependent(sch, u, dt)
        v = u.copy()
        v[rng.integers(g.size)] += rng.uniform(1e-3, 1.0)
        mono += bool(np.all(step_time_dependent(sch, v, dt) - base >= -1e-12))
        c = rng.uniform(-5, 5)
        shift += bool(np.allclose(step_time_dependent(sch, u + c, dt), base + c, atol=1e-12))
    signs = 0
    for _ in range(20):
        t1 = rng.uniform(0.1, 2.0)
        fam = build_running_example(t1, rng.uniform(2.05, 6.0) * t1, *rng.uniform(0.5, 3.0, 2))
        a = rng.uniform(0.01, 50.0)
        rep = diagonalizable_real(fam, a)
        ev = np.sort(np.linalg.eigvals(fam.matrix(a)).real)[::-1]
        signs += bool(rep.ok and np.all(np.diff(rep.roots) < 0) and np.allclose(rep.roots, ev))
    ok = mono == 100 and shift == 100 and signs == 20
    acceptance(14, ok, f"monotone {mono}/100 shift {shift}/100 three real ordered {signs}/20")
    assert ok
