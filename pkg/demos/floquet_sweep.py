"""Periodic perturbations of the optimal constant control.

The first-order change of the Floquet eigenvalue vanishes at alpha*, and the
second-order change from the closed formula matches finite differences.
"""
import numpy as np

from perronhjb import ControlSignal, optimize_perron, table1
from perronhjb.floquet import epsilon_sweep, fd_second, first_directional, second_directional

params = table1()
a = optimize_perron(params).alpha_star
for name, gamma in (("sine", ControlSignal.sine(0.0, 1.0, 1.0)),
                    ("square", ControlSignal.square_wave(-1.0, 1.0, 1.0))):
    d1 = first_directional(params, a, gamma)
    d2 = second_directional(params, a, gamma)
    print(f"{name:>6}: first {d1:+.2e}  second {d2:+.6f}  finite difference "
          f"{fd_second(params, a, gamma, eps=1e-2):+.6f}")
    for eps, lam in epsilon_sweep(params, a, gamma, np.linspace(-0.5, 0.5, 5)):
        print(f"        eps {eps:+.2f}  lambda_F {lam:.7f}")
