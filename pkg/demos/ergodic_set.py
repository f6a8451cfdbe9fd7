"""Ergodic set of the projected dynamics and its attractiveness.

Builds the region bounded by the two constant-control trajectories, checks
that the boundary drift points inward, and sends random bang-bang controls
towards it.
"""
from perronhjb import table1
from perronhjb.ergodic import attractiveness_probe, build_ergodic_set, stability_check

params = table1()
z = build_ergodic_set(params, delta=0.1)
print(f"boundary vertices: {len(z.polygon)}, endpoint errors: {z.endpoint_errors()}")
stab = stability_check(params, z, n_samples=500)
print(f"inward drift on the boundary: {stab.ok} (worst {stab.worst:.2e})")
probe = attractiveness_probe(params, delta=0.1, n_trials=20, seed=1)
print(f"20 random controls: all enter {probe.ok}, latest entry at t = {probe.max_entry:.2f}")
