"""Relaxation versus epsilon problem on the 10-enterprise park.

The epsilon optimum never drops below the relaxed bound and never
decreases as the margin grows.
"""

from eipnet import epsilon_sweep, load_instance, solve_methodology

inst = load_instance("eip10")
res = solve_methodology(inst)
print(f"Z_bar = {res.z_bar:.4f}   Z_eps = {res.z_eps:.4f}   gap = {res.gap:.2e}")
print(f"relaxed optimum already strict: {res.exact}\n")

sweep = epsilon_sweep(inst, [1e-6, 1e-4, 1e-2, 1.0, 5.0])
print(f"{'eps':>8} {'Z_eps':>12} {'stand-alone':>12}")
for p in sweep.points:
    print(f"{p.value:8.0e} {p.z_eps:12.4f} {p.stand_alone:12d}")
