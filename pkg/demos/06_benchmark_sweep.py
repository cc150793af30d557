"""Runtime and storage scaling of one gradient evaluation.

Sweeps the transmon level truncation (Hilbert space dimension) at fixed
duration, and the gate duration (number of time steps) at fixed
dimension, timing the full forward-plus-backward gradient scheme. The
cost per gradient is linear in the number of time steps; the growth
with Hilbert space dimension is superlinear (matrix-vector products
plus the widening spectral range of the transmon Hamiltonian). Stored
memory is exactly N * (N_T + 1) * N_H complex amplitudes.

Writes benchmark_sweep.csv next to this script.
"""

import csv
import time

import numpy as np

from qoc import functionals as F
from qoc.core import make_time_grid
from qoc.grape import Objective, grape_gradient
from qoc.transmon import (
    build_transmon,
    default_transmon_params,
    guess_pulse,
    logical_basis,
    target_gate_sqrt_iswap,
)


def time_gradient(n_levels, t_ns, dt=0.1, reps=3):
    gen = build_transmon(default_transmon_params(n_levels))
    grid = make_time_grid(t_ns, dt)
    basis = logical_basis(n_levels)
    target = target_gate_sqrt_iswap()
    targets = [
        sum(target[i, k] * basis[i] for i in range(4)) for k in range(4)
    ]
    objectives = [
        Objective(initial=basis[k], generator=gen, target=targets[k])
        for k in range(4)
    ]
    eps = np.column_stack(
        [guess_pulse("blackman", 2 * np.pi * 35e-3, grid),
         np.zeros(grid.n_intervals)]
    )
    fun = F.sm_overlap_functional(targets)
    grape_gradient(objectives, eps, grid, fun)  # warmup
    best = np.inf
    for _ in range(reps):
        tic = time.perf_counter()
        grape_gradient(objectives, eps, grid, fun)
        best = min(best, time.perf_counter() - tic)
    stored = 4 * (grid.n_intervals + 1) * gen.dim * 16
    return {
        "n_levels": n_levels,
        "N_H": gen.dim,
        "T_ns": t_ns,
        "N_T": grid.n_intervals,
        "seconds_per_gradient": best,
        "stored_state_bytes": stored,
    }


rows = []
print("sweep over Hilbert space dimension (T = 20 ns):")
for n_levels in (3, 5, 7, 9):
    row = time_gradient(n_levels, 20.0)
    rows.append(row)
    print(f"  N_H = {row['N_H']:4d}: {row['seconds_per_gradient']:.3f} s, "
          f"{row['stored_state_bytes'] / 2**20:.2f} MiB stored")

print("sweep over duration (n_levels = 3):")
for t_ns in (20.0, 40.0, 80.0, 160.0):
    row = time_gradient(3, t_ns)
    rows.append(row)
    print(f"  N_T = {row['N_T']:5d}: {row['seconds_per_gradient']:.3f} s, "
          f"{row['stored_state_bytes'] / 2**20:.2f} MiB stored")

with open("benchmark_sweep.csv", "w", newline="") as fh:
    writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
print("wrote benchmark_sweep.csv")

n_t = [r["N_T"] for r in rows[4:]]
secs = [r["seconds_per_gradient"] for r in rows[4:]]
slope = np.polyfit(n_t, secs, 1)[0]
print(f"duration sweep: {slope * 1e3:.3f} ms per additional time step")
