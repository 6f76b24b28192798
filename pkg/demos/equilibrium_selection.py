"""An optimal design that is not an equilibrium, and how it is repaired.

At alpha = 0.70 the first optimum HiGHS returns lets one enterprise lower
its cost by drawing more water from a partner.  The design problem rules
this out only through constraints of other enterprises (their contracts),
which the deviating enterprise does not face.  Searching the
optimal face yields an optimum of equal value where nobody can gain.
"""

from eipnet import extract_network, load_instance, solve_methodology, verify_equilibrium

inst = load_instance("eip15", alpha=0.70)

first = solve_methodology(inst, engine="external", select=False)
op = first.operation()
audit = verify_equilibrium(op, extract_network(op), inst)
print(f"first optimum: Z = {op.discharge.sum():.4f}, equilibrium = {audit.is_equilibrium}")
for c in audit.failures:
    print(f"  enterprise {c.enterprise}: cost {c.current_cost:.4f} -> {c.best_cost:.4f} "
          f"by {c.mode} reply, inflow {c.best_inflow.round(3).tolist()}")

chosen = solve_methodology(inst, engine="external")
op = chosen.operation()
audit = verify_equilibrium(op, extract_network(op), inst)
sel = chosen.selection
print(f"\nselected optimum: Z = {op.discharge.sum():.4f}, equilibrium = {audit.is_equilibrium}")
print(f"  found by {sel.objective} after {sel.solves} extra solves; removed edges {list(sel.bans)}")
