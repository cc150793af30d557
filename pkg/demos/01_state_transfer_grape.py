"""Drive a two-level system from |0> to |1> with GRAPE.

The smallest complete optimization: one objective, one control, the
square-modulus functional, and the quasi-Newton driver. Demonstrates
that the machine-precision gradient path reaches J_T < 1e-6 in a
handful of iterations.
"""

import numpy as np

from qoc import functionals as F
from qoc.core import ControlGenerator, Operator, make_time_grid
from qoc.grape import ControlProblem, Objective, run_grape

# system: H = eps(t)/2 * sigma_x, resonant pi-pulse scale
sigma_x = np.array([[0, 1], [1, 0]], dtype=complex)
gen = ControlGenerator(
    Operator(np.zeros((2, 2))), [Operator(0.5 * sigma_x)]
)

grid = make_time_grid(np.pi, np.pi / 50)
ket0 = np.array([1, 0], dtype=complex)
ket1 = np.array([0, 1], dtype=complex)

problem = ControlProblem(
    objectives=[Objective(initial=ket0, generator=gen, target=ket1)],
    grid=grid,
    controls=0.7 * np.ones((grid.n_intervals, 1)),
    functional=F.sm_overlap_functional([ket1]),
)

result = run_grape(problem, max_iters=20, J_T_threshold=1e-10)

print("iteration history (J_T):")
for it, j_t in zip(result.record.iterations, result.record.J_T):
    print(f"  {it:3d}  {j_t:.3e}")
print(f"final J_T = {result.final_J_T:.3e} after {result.iterations} "
      f"iterations ({result.grad_evals} gradient evaluations)")

# the optimal constant pulse for this problem is amplitude 1 (area pi)
print(f"mean optimized amplitude: {np.mean(result.controls):.6f} (exact: 1)")
