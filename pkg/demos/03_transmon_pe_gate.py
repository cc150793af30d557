"""Optimize an arbitrary perfect entangler on two coupled transmons.

The flagship application: instead of pinning a specific target gate,
the functional only asks that the achieved gate land on the
perfect-entangler polyhedron in the Weyl chamber (plus staying in the
logical subspace). The gradient of the geometric functional is obtained
by finite differences over the 16 gate entries; everything upstream of
the gate is differentiated analytically through the extended-state
scheme, so the total gradient is exact to propagator precision.

Runtime: about a minute.
"""

import numpy as np

from qoc import functionals as F
from qoc import gates
from qoc.core import make_time_grid
from qoc.grape import ControlProblem, Objective, run_grape
from qoc.propagator import propagate
from qoc.transmon import (
    build_transmon,
    default_transmon_params,
    guess_pulse,
    logical_basis,
)

params = default_transmon_params(n_levels=3)
gen = build_transmon(params)
grid = make_time_grid(100.0, 0.1)  # ns
basis = logical_basis(params.n_levels)

amp = 2 * np.pi * 35e-3  # 35 MHz drive, real quadrature
controls = np.column_stack(
    [guess_pulse("blackman", amp, grid), np.zeros(grid.n_intervals)]
)

problem = ControlProblem(
    objectives=[Objective(initial=b, generator=gen) for b in basis],
    grid=grid,
    controls=controls,
    functional=F.pe_functional(),
)

u0 = gates.extract_gate(
    [propagate(gen, controls, grid, b) for b in basis], basis
)
print(f"guess gate:     C = {gates.concurrence(u0):.4f}, "
      f"D_PE = {gates.d_pe_gate(u0):+.4f}, "
      f"p_loss = {gates.pop_loss(u0):.4f}")

result = run_grape(problem, max_iters=50)

u = gates.extract_gate(result.final_states, basis)
c = gates.weyl_coordinates(u)
print(f"optimized gate: C = {gates.concurrence(u):.6f}, "
      f"D_PE = {gates.d_pe_gate(u):+.6f}, "
      f"p_loss = {gates.pop_loss(u):.6f}")
print(f"Weyl point: ({c.c1 / np.pi:.3f}, {c.c2 / np.pi:.3f}, "
      f"{c.c3 / np.pi:.3f}) pi")
print(f"{result.iterations} iterations, {result.grad_evals} gradient "
      f"evaluations, {result.record.seconds_per_grad:.2f} s per gradient")
