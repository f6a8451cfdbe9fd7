"""Perron eigenvalue of G + alpha F along the control axis.

Prints the optimum, a coarse table of the curve, and the two shapes the curve
can take depending on the ratio tau2 / tau1.
"""
import numpy as np

from perronhjb import build_running_example, optimize_perron, perron_curve, table1
from perronhjb.perron import classify_monotonicity, lambda_P

params = table1()
opt = optimize_perron(params)
print(f"optimal constant control alpha* = {opt.alpha_star:.6f}, lambda* = {opt.lambda_star:.7f}")

curve = perron_curve(params, np.linspace(0.0, 20.0, 11), opt)
print(f"{'alpha':>8} {'lambda_P':>10} {'dlambda':>10}")
for a, v, d in zip(curve.alphas, curve.values, curve.derivs):
    print(f"{a:8.2f} {v:10.6f} {d:10.6f}")

for tau2 in (0.5, 5.0):
    fam = build_running_example(0.5, tau2, 1.0, 2.0)
    tail = lambda_P(fam, 1e4)
    print(f"tau2 = {tau2}: {classify_monotonicity(0.5, tau2)}, lambda_P(1e4) = {tail:.5f}")
