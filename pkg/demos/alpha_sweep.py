"""Fresh water, participation and cost as the contract coefficient varies.

Prints the CSV series (alpha, Z, stand-alone count, total cost, ...).
Usage: python3 demos/alpha_sweep.py [internal|external]
"""

import sys

from eipnet import alpha_sweep, load_instance, make_grid

engine = sys.argv[1] if len(sys.argv) > 1 else "external"
inst = load_instance("eip15")
res = alpha_sweep(inst, make_grid(0.60, 0.95, 0.05), engine=engine)
print(res.to_csv(), end="")
