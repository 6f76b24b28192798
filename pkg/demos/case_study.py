"""Design the 15-enterprise park and print the per-enterprise report.

Writes the solution, flux table and network graph to ``demos/out/eip15``.
Usage: python3 demos/case_study.py [internal|external]
"""

import sys
import time
from pathlib import Path

from eipnet import build_report, extract_network, load_instance, solve_methodology
from eipnet.io import save_solution, to_dot, write_flux_csv

engine = sys.argv[1] if len(sys.argv) > 1 else "internal"
inst = load_instance("eip15")
t0 = time.perf_counter()
res = solve_methodology(inst, engine=engine)
print(f"solved with the {engine} engine in {time.perf_counter() - t0:.1f}s\n")

op = res.operation()
edges = extract_network(op)
report = build_report(inst, op, res, res.selection.audit, edges)
print(report.to_text())

out = Path(__file__).parent / "out" / "eip15"
out.mkdir(parents=True, exist_ok=True)
save_solution(out / "solution.json", op, inst, edges, alpha=inst.alpha)
write_flux_csv(out / "flux.csv", op)
(out / "network.dot").write_text(to_dot(op, edges))
print(f"files written to {out}")
