"""Ergodic HJB equation on the simplex.

Marches the time-dependent equation, reads off the ergodic constant, extracts
the switching curve and follows the resulting feedback from a corner.
"""
from perronhjb import optimize_perron, spectrum, table1
from perronhjb.hjb import (extract_eigenvector, optimal_trajectory, polyline_distance,
                           run_discounted, run_time_dependent)

params = table1()
opt = optimize_perron(params)
run = run_time_dependent(params, dy=1e-2, dt=1e-3, T=10.0)
print(f"u(T)/T = {run.lambda_ratio:.5f}, slope = {run.lambda_slope:.5f}, "
      f"lambda* = {opt.lambda_star:.5f}, probe spread = {run.collapse():.2e}")

for eps in (0.1, 0.05, 0.01):
    d = run_discounted(params, eps).diagnostics
    print(f"eps = {eps:<5} mean eps*u = {d['mean']:.5f} spread = {d['spread']:.2e}")

ev = extract_eigenvector(run)
e_star = spectrum(params, opt.alpha_star).e1
print(f"switching curve passes {polyline_distance(ev.longest_separation(), e_star[:2]):.1e} "
      f"from the optimal eigenvector")

traj = optimal_trajectory(params, ev, [0.0, 0.5, 0.0], T=10.0)
print(f"feedback from (0, 0.5, 0): late control {traj.tail_control():.3f}, "
      f"average reward {traj.record.average_reward(params)[-1]:.4f}")
