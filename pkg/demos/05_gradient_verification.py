"""Verify the extended-state gradient against brute-force finite
differences, for every functional form.

The point of the scheme: the gradient of any final-time functional over
all N_T x L pulse values costs one forward propagation (with storage)
plus one backward propagation of an (L+1)-block extended state --
independent of which functional is used, and exact to propagator
precision. Finite differences over the full control set need 2 N_T L
propagations and are accurate only to ~1e-7; here they serve as the
independent check.
"""

import time

import numpy as np

from qoc import functionals as F
from qoc.core import make_time_grid
from qoc.grape import Objective, grape_gradient
from qoc.propagator import propagate
from qoc.transmon import (
    build_transmon,
    default_transmon_params,
    forbidden_levels_projector,
    guess_pulse,
    logical_basis,
    target_gate_sqrt_iswap,
)

gen = build_transmon(default_transmon_params(3))
grid = make_time_grid(2.0, 0.1)
basis = logical_basis(3)
target = target_gate_sqrt_iswap()
targets = [sum(target[i, k] * basis[i] for i in range(4)) for k in range(4)]
objectives = [
    Objective(initial=basis[k], generator=gen, target=targets[k])
    for k in range(4)
]

rng = np.random.default_rng(1)
amp = 2 * np.pi * 35e-3
eps = np.column_stack(
    [guess_pulse("blackman", amp, grid), np.zeros(grid.n_intervals)]
)
eps += rng.normal(scale=0.01, size=eps.shape)


def j_value(fun, controls):
    finals = [propagate(gen, controls, grid, b) for b in basis]
    j = fun.final_time_value(finals, objectives)
    if fun.lambda_a:
        j += fun.lambda_a * float(np.sum(controls**2))
    if fun.lambda_b:
        from qoc.functionals import run_cost_b_forbidden

        trajs = [propagate(gen, controls, grid, b, store=True) for b in basis]
        j += run_cost_b_forbidden(trajs, fun.forbidden, fun.lambda_b)[0]
    return j


cases = {
    "SM (overlap form)": F.sm_overlap_functional(targets),
    "SM (state form)": F.sm_state_functional(targets),
    "PE (gate form)": F.pe_functional(),
    "concurrence (gate form)": F.concurrence_functional(),
    "SM + amplitude penalty": F.sm_overlap_functional(targets, lambda_a=0.05),
    "SM + forbidden levels": F.sm_state_functional(
        targets, lambda_b=1e-3, forbidden=forbidden_levels_projector(3, 2)
    ),
}

h = 1e-6
for name, fun in cases.items():
    tic = time.perf_counter()
    res = grape_gradient(objectives, eps, grid, fun)
    t_scheme = time.perf_counter() - tic

    tic = time.perf_counter()
    fd = np.zeros_like(eps)
    for n in range(grid.n_intervals):
        for l in range(2):
            ep = eps.copy()
            em = eps.copy()
            ep[n, l] += h
            em[n, l] -= h
            fd[n, l] = (j_value(fun, ep) - j_value(fun, em)) / (2 * h)
    t_fd = time.perf_counter() - tic

    rel = np.max(np.abs(res.grad - fd)) / np.max(np.abs(fd))
    print(f"{name:26s} rel err {rel:.2e}   "
          f"scheme {t_scheme * 1e3:6.1f} ms vs FD {t_fd:5.2f} s")
