"""Memory-traffic model and measured phase timings.

Each phase of the forward-Euler update is annotated with its predicted
memory traffic in doubles per stencil entry, assuming perfect caching of
node-indexed arrays within a row and 4-byte column indices.  The script
prints the prediction table for 2D and 3D stencils and then runs a short
simulation to report measured wall-clock time per phase alongside the model.

Run:  python3 demos/05_performance_model.py
"""

import os

from eulerflow import perf, problems
from eulerflow.assembly import assemble
from eulerflow.stepper import Solver

for dim in (2, 3):
    print(perf.format_table(dim))
    print()

pred = perf.predict_traffic(3)["step6"]
print(f"final high-order update in 3D: {pred.reads:.2f} reads + "
      f"{pred.writes:.2f} writes per entry\n")

setup = problems.mach3_channel(dim=2, refine=3)
matrices = assemble(setup.mesh)
solver = Solver(matrices, boundary=setup.boundary, ranks=2)
solver.set_state(setup.U0)
for _ in range(10):
    solver.ssp_rk3_step()

os.makedirs("demo_output", exist_ok=True)
print(f"measured over {solver.n_euler_steps} forward-Euler stages on "
      f"{matrices.n} nodes:")
print(perf.report(solver, csv_path="demo_output/perf.csv"))
print("per-phase CSV written to demo_output/perf.csv")
