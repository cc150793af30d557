"""Command-line interface: optimize, propagate, gate analysis, and
benchmark sweeps.

Subcommands::

    qoc optimize  <config.json>
    qoc propagate <config.json> --controls <csv>
    qoc gate      <matrix.txt>
    qoc benchmark <config.json>

Configs are JSON with a strict schema (unknown keys rejected, errors
name the offending field path). Frequencies in configs use the lab
convention (GHz / MHz); conversion to angular units happens at the
transmon-builder boundary. All CSV numbers carry 17 significant digits
(round-trip safe for 64-bit floats).
"""

import argparse
import csv
import json
import sys
import threading
import time

import numpy as np

from . import functionals as F
from . import gates
from .core import make_time_grid
from .grape import ControlProblem, Objective, grape_gradient, run_grape
from .krotov import KrotovParams, run_krotov
from .transmon import (
    TransmonParams,
    build_transmon,
    forbidden_levels_projector,
    guess_pulse,
    logical_basis,
    target_gate_sqrt_iswap,
)

FMT = "%.17g"
TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema


def _check_keys(obj, allowed, path):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in `{path or '<root>'}`"
        )


def _get(obj, key, path, kind, default=None, required=False, positive=False,
         choices=None):
    full = f"{path}.{key}" if path else key
    if key not in obj:
        if required:
            raise ConfigError(f"missing required key `{full}`")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"`{full}` must be of type {kind.__name__}")
    if positive and not value > 0:
        raise ConfigError(f"`{full}` must be positive")
    if choices is not None and value not in choices:
        raise ConfigError(f"`{full}` must be one of {sorted(choices)}")
    return value


def parse_system(cfg, path="system"):
    _check_keys(cfg, {"w1", "w2", "wd", "alpha1", "alpha2", "J", "lambda",
                      "n_levels"}, path)
    return TransmonParams.from_ghz(
        w1=_get(cfg, "w1", path, float, required=True),
        w2=_get(cfg, "w2", path, float, required=True),
        wd=_get(cfg, "wd", path, float, required=True),
        alpha1_mhz=_get(cfg, "alpha1", path, float, required=True),
        alpha2_mhz=_get(cfg, "alpha2", path, float, required=True),
        coupling_mhz=_get(cfg, "J", path, float, required=True),
        lam=_get(cfg, "lambda", path, float, required=True),
        n_levels=_get(cfg, "n_levels", path, int, required=True, positive=True),
    )


def parse_grid(cfg, path="grid"):
    _check_keys(cfg, {"T_ns", "dt_ns"}, path)
    t = _get(cfg, "T_ns", path, float, required=True, positive=True)
    dt = _get(cfg, "dt_ns", path, float, required=True, positive=True)
    try:
        return make_time_grid(t, dt)
    except ValueError as exc:
        raise ConfigError(f"`{path}`: {exc}") from exc


def parse_guess(cfg, grid, path="guess"):
    _check_keys(cfg, {"shape", "amplitude_MHz"}, path)
    shape = _get(cfg, "shape", path, str, default="blackman",
                 choices={"blackman", "flattop", "const"})
    amp_mhz = _get(cfg, "amplitude_MHz", path, float, default=35.0)
    amp = TWO_PI * amp_mhz * 1e-3
    return np.column_stack(
        [guess_pulse(shape, amp, grid), np.zeros(grid.n_intervals)]
    )


def parse_functional(cfg, n_levels, path="functional"):
    _check_keys(cfg, {"kind", "target", "lambda_a", "lambda_b",
                      "forbidden_levels"}, path)
    kind = _get(cfg, "kind", path, str, required=True,
                choices={"sm", "pe", "c"})
    lambda_a = _get(cfg, "lambda_a", path, float, default=0.0)
    lambda_b = _get(cfg, "lambda_b", path, float, default=0.0)
    forbidden = None
    if lambda_b:
        min_level = _get(cfg, "forbidden_levels", path, int, required=True,
                         positive=True)
        forbidden = forbidden_levels_projector(n_levels, min_level)
    basis = logical_basis(n_levels)
    if kind == "sm":
        target_name = _get(cfg, "target", path, str, default="sqrt_iswap")
        target = _load_target_gate(target_name)
        targets = [
            sum(target[i, k] * basis[i] for i in range(4)) for k in range(4)
        ]
        if lambda_b:
            fun = F.sm_state_functional(targets, lambda_a=lambda_a,
                                        lambda_b=lambda_b, forbidden=forbidden)
        else:
            fun = F.sm_overlap_functional(targets, lambda_a=lambda_a)
        return fun, targets
    if kind == "pe":
        return F.pe_functional(lambda_a=lambda_a, lambda_b=lambda_b,
                               forbidden=forbidden), None
    return F.concurrence_functional(lambda_a=lambda_a, lambda_b=lambda_b,
                                    forbidden=forbidden), None


def _load_target_gate(name):
    named = {
        "sqrt_iswap": target_gate_sqrt_iswap(),
        "cnot": gates.CNOT,
        "iswap": gates.ISWAP,
        "swap": gates.SWAP,
        "identity": gates.IDENTITY4,
    }
    if name in named:
        return named[name]
    try:
        return read_gate_matrix(name)
    except OSError as exc:
        raise ConfigError(
            f"`functional.target` is neither a named gate nor a readable "
            f"matrix file: {exc}"
        ) from exc


def parse_method(cfg, path="method"):
    _check_keys(cfg, {"kind", "max_iters", "J_T_threshold",
                      "grad_norm_threshold", "lbfgs_m", "wolfe_c1", "wolfe_c2",
                      "bound_MHz", "krotov_lambda_a", "krotov_shape"}, path)
    kind = _get(cfg, "kind", path, str, default="grape",
                choices={"grape", "krotov"})
    return {
        "kind": kind,
        "max_iters": _get(cfg, "max_iters", path, int, default=50),
        "J_T_threshold": _get(cfg, "J_T_threshold", path, float),
        "grad_norm_threshold": _get(cfg, "grad_norm_threshold", path, float),
        "lbfgs_m": _get(cfg, "lbfgs_m", path, int, default=10),
        "wolfe_c1": _get(cfg, "wolfe_c1", path, float, default=1e-4),
        "wolfe_c2": _get(cfg, "wolfe_c2", path, float, default=0.9),
        "bound_MHz": _get(cfg, "bound_MHz", path, float),
        "krotov_lambda_a": _get(cfg, "krotov_lambda_a", path, float,
                                default=1.0),
        "krotov_shape": _get(cfg, "krotov_shape", path, str,
                             default="flattop", choices={"flattop", "const"}),
    }


def parse_output(cfg, path="output"):
    _check_keys(cfg, {"controls_csv", "convergence_csv", "summary"}, path)
    return {
        "controls_csv": _get(cfg, "controls_csv", path, str,
                             default="controls.csv"),
        "convergence_csv": _get(cfg, "convergence_csv", path, str,
                                default="convergence.csv"),
        "summary": _get(cfg, "summary", path, str, default="summary.txt"),
    }


def load_run_config(config_path):
    with open(config_path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    _check_keys(cfg, {"system", "grid", "guess", "functional", "method",
                      "output", "seed", "workers"}, "")
    system = parse_system(cfg.get("system", {}))
    grid = parse_grid(cfg.get("grid", {}))
    guess = parse_guess(cfg.get("guess", {}), grid)
    functional, targets = parse_functional(cfg.get("functional", {}),
                                           system.n_levels)
    method = parse_method(cfg.get("method", {}))
    output = parse_output(cfg.get("output", {}))
    seed = _get(cfg, "seed", "", int, default=0)
    workers = _get(cfg, "workers", "", int, default=0, positive=False)
    return {
        "system": system,
        "grid": grid,
        "guess": guess,
        "functional": functional,
        "targets": targets,
        "method": method,
        "output": output,
        "seed": seed,
        "workers": workers,
    }


# ---------------------------------------------------------------------------
# file formats


def read_gate_matrix(path):
    """4x4 complex matrix: 4 lines, 4 whitespace-separated `a+bj` entries."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([complex(tok) for tok in line.split()])
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ValueError(f"{path}: expected a 4x4 matrix")
    return np.array(rows, dtype=np.complex128)


def write_controls_csv(path, grid, controls):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_midpoint_ns", "omega_re_MHz", "omega_im_MHz"])
        mids = grid.midpoints()
        for n in range(grid.n_intervals):
            re_mhz = controls[n, 0] / TWO_PI * 1e3
            im_mhz = controls[n, 1] / TWO_PI * 1e3
            writer.writerow([FMT % mids[n], FMT % re_mhz, FMT % im_mhz])


def read_controls_csv(path, grid):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["t_midpoint_ns", "omega_re_MHz", "omega_im_MHz"]:
            raise ValueError(f"{path}: unexpected controls header {header}")
        rows = [[float(x) for x in row] for row in reader if row]
    if len(rows) != grid.n_intervals:
        raise ValueError(
            f"{path}: {len(rows)} rows do not match N_T = {grid.n_intervals}"
        )
    arr = np.array(rows)
    return np.column_stack([arr[:, 1], arr[:, 2]]) * TWO_PI * 1e-3


def write_convergence_csv(path, record):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "J", "J_T", "grad_inf_norm",
                         "grad_evals", "seconds_per_grad"])
        for it, j, j_t, gnorm, evals, spg in record.rows():
            writer.writerow([it, FMT % j, FMT % j_t, FMT % gnorm, evals,
                             FMT % spg])


def write_summary(path, entries):
    with open(path, "w") as fh:
        for key, value in entries:
            if isinstance(value, float):
                fh.write(f"{key} = {FMT % value}\n")
            else:
                fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------------------
# RSS sampling


class PeakRssSampler:
    """Samples this process's resident set size on a 50 ms cadence.

    Approximate by nature (sampling may miss short-lived spikes).
    """

    def __init__(self, interval=0.05):
        import psutil

        self._proc = psutil.Process()
        self._interval = interval
        self._peak = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def _loop(self):
        while not self._stop.is_set():
            self._peak = max(self._peak, self._proc.memory_info().rss)
            self._stop.wait(self._interval)

    def __enter__(self):
        self._peak = self._proc.memory_info().rss
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join()

    @property
    def peak_mb(self):
        return self._peak / (1024.0**2)


# ---------------------------------------------------------------------------
# commands


def _build_problem(cfg):
    gen = build_transmon(cfg["system"])
    basis = logical_basis(cfg["system"].n_levels)
    functional = cfg["functional"]
    if functional.mode == "overlap":
        objectives = [
            Objective(initial=basis[k], generator=gen,
                      target=cfg["targets"][k])
            for k in range(4)
        ]
    else:
        objectives = [Objective(initial=b, generator=gen) for b in basis]
    workers = cfg["workers"] or len(objectives)
    return ControlProblem(
        objectives=objectives, grid=cfg["grid"], controls=cfg["guess"],
        functional=functional, workers=workers,
    )


def _gate_summary(finals, basis):
    u = gates.extract_gate(finals, basis)
    c = gates.weyl_coordinates(u)
    return u, [
        ("concurrence", gates.concurrence(u)),
        ("D_PE", gates.d_pe_gate(u)),
        ("pop_loss", gates.pop_loss(u)),
        ("c1_rad", c.c1),
        ("c2_rad", c.c2),
        ("c3_rad", c.c3),
    ]


def cmd_optimize(args):
    cfg = load_run_config(args.config)
    np.random.seed(cfg["seed"])
    problem = _build_problem(cfg)
    method = cfg["method"]
    basis = logical_basis(cfg["system"].n_levels)

    if method["kind"] == "grape":
        bounds = None
        if method["bound_MHz"] is not None:
            bnd = TWO_PI * method["bound_MHz"] * 1e-3
            bounds = (-bnd, bnd)
        result = run_grape(
            problem,
            max_iters=method["max_iters"],
            J_T_threshold=method["J_T_threshold"],
            grad_norm_threshold=method["grad_norm_threshold"],
            lbfgs_opts={"m": method["lbfgs_m"], "c1": method["wolfe_c1"],
                        "c2": method["wolfe_c2"], "bounds": bounds},
        )
        controls = result.controls
        record = result.record
        final_j, final_j_t = result.J, result.final_J_T
        finals = result.final_states
        status = result.status
        iterations = result.iterations
    else:
        shape = None if method["krotov_shape"] == "flattop" else 1.0
        result = run_krotov(
            problem,
            KrotovParams(lambda_a=method["krotov_lambda_a"], shape=shape),
            max_iters=method["max_iters"],
            J_T_threshold=method["J_T_threshold"],
        )
        controls = result.controls
        record = None
        final_j = final_j_t = result.J_history[-1]
        finals = result.final_states
        status = result.message
        iterations = result.iterations

    write_controls_csv(cfg["output"]["controls_csv"], cfg["grid"], controls)
    if record is not None:
        write_convergence_csv(cfg["output"]["convergence_csv"], record)
    else:
        with open(cfg["output"]["convergence_csv"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "J_T"])
            for i, j in enumerate(result.J_history):
                writer.writerow([i, FMT % j])

    _, gate_entries = _gate_summary(finals, basis)
    write_summary(
        cfg["output"]["summary"],
        [("status", status), ("iterations", iterations),
         ("final_J", final_j), ("final_J_T", final_j_t)] + gate_entries,
    )
    print(f"final J_T = {final_j_t:.6g} ({status}); "
          f"wrote {cfg['output']['summary']}")
    return 0


def cmd_propagate(args):
    cfg = load_run_config(args.config)
    problem = _build_problem(cfg)
    controls = read_controls_csv(args.controls, cfg["grid"])
    res = grape_gradient(problem.objectives, controls, cfg["grid"],
                         problem.functional, workers=problem.workers)
    basis = logical_basis(cfg["system"].n_levels)
    _, gate_entries = _gate_summary(res.final_states, basis)
    write_summary(
        cfg["output"]["summary"],
        [("status", "propagate-only"), ("final_J", res.J),
         ("final_J_T", res.J_T)] + gate_entries,
    )
    print(f"J = {res.J:.17g}")
    return 0


def cmd_gate(args):
    try:
        u = read_gate_matrix(args.matrix)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    g = gates.local_invariants(u)
    c = gates.weyl_coordinates(u)
    conc = gates.concurrence(u)
    print(f"c1 = {c.c1:.12g}")
    print(f"c2 = {c.c2:.12g}")
    print(f"c3 = {c.c3:.12g}")
    print(f"g1 = {g.g1:.12g}")
    print(f"g2 = {g.g2:.12g}")
    print(f"g3 = {g.g3:.12g}")
    print(f"concurrence = {conc:.12g}")
    print(f"D_PE = {gates.d_pe(*g):.12g}")
    print(f"pop_loss = {gates.pop_loss(u):.12g}")
    print(f"perfect_entangler = {gates.in_pe_polyhedron(*c)}")
    return 0


def cmd_benchmark(args):
    with open(args.config) as fh:
        cfg = json.load(fh)
    _check_keys(cfg, {"system", "sweep_n_levels", "sweep_T_ns", "dt_ns",
                      "functional", "method", "n_gradients", "iterations",
                      "output_csv"}, "")
    base_system = cfg.get("system", {})
    n_levels_list = cfg.get("sweep_n_levels", [])
    t_list = cfg.get("sweep_T_ns", [])
    if not n_levels_list and not t_list:
        print("error: empty sweep (`sweep_n_levels` and `sweep_T_ns`)",
              file=sys.stderr)
        return 2
    if not n_levels_list:
        n_levels_list = [base_system.get("n_levels", 5)]
    if not t_list:
        t_list = [100.0]
    dt = cfg.get("dt_ns", 0.1)
    functional_cfg = cfg.get("functional", {"kind": "sm"})
    method = cfg.get("method", "grape")
    n_gradients = cfg.get("n_gradients", 3)
    iterations = cfg.get("iterations", 0)
    out_path = cfg.get("output_csv", "benchmark.csv")

    fields = ["n_levels", "N_H", "T_ns", "N_T", "functional", "method",
              "seconds_per_gradient", "peak_rss_mb", "stored_state_bytes",
              "final_J", "iterations"]
    rows = []
    for n_levels in n_levels_list:
        for t_ns in t_list:
            row = _benchmark_cell(
                dict(base_system, n_levels=n_levels), t_ns, dt,
                functional_cfg, method, n_gradients, iterations,
            )
            rows.append(row)
            print(
                f"n_levels={row['n_levels']} T={row['T_ns']}ns "
                f"N_T={row['N_T']}: {row['seconds_per_gradient']:.4f} s/grad"
            )
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {out_path}")
    return 0


def _benchmark_cell(system_cfg, t_ns, dt, functional_cfg, method,
                    n_gradients, iterations):
    defaults = dict(w1=4.380, w2=4.614, wd=4.498, alpha1=210.0, alpha2=215.0,
                    J=-3.0, **{"lambda": 1.03})
    defaults.update(system_cfg)
    system = parse_system(defaults)
    grid = make_time_grid(float(t_ns), float(dt))
    guess = np.column_stack(
        [guess_pulse("blackman", TWO_PI * 0.035, grid),
         np.zeros(grid.n_intervals)]
    )
    functional, targets = parse_functional(functional_cfg, system.n_levels)
    gen = build_transmon(system)
    basis = logical_basis(system.n_levels)
    if functional.mode == "overlap":
        objectives = [
            Objective(initial=basis[k], generator=gen, target=targets[k])
            for k in range(4)
        ]
    else:
        objectives = [Objective(initial=b, generator=gen) for b in basis]

    with PeakRssSampler() as sampler:
        grape_gradient(objectives, guess, grid, functional)  # warmup
        times = []
        for _ in range(n_gradients):
            tic = time.perf_counter()
            res = grape_gradient(objectives, guess, grid, functional)
            times.append(time.perf_counter() - tic)
        final_j = res.J
        iters_done = 0
        if iterations:
            problem = ControlProblem(objectives=objectives, grid=grid,
                                     controls=guess, functional=functional)
            if method == "krotov":
                kres = run_krotov(problem, max_iters=iterations)
                final_j, iters_done = kres.J_history[-1], kres.iterations
            else:
                gres = run_grape(problem, max_iters=iterations)
                final_j, iters_done = gres.J, gres.iterations

    n_obj = len(objectives)
    return {
        "n_levels": system.n_levels,
        "N_H": gen.dim,
        "T_ns": float(t_ns),
        "N_T": grid.n_intervals,
        "functional": functional.name,
        "method": method,
        "seconds_per_gradient": min(times),
        "peak_rss_mb": sampler.peak_mb,
        "stored_state_bytes": n_obj * (grid.n_intervals + 1) * gen.dim * 16,
        "final_J": final_j,
        "iterations": iters_done,
    }


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qoc",
        description="Quantum optimal control of piecewise-constant pulses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run a pulse optimization")
    p_opt.add_argument("config")
    p_opt.set_defaults(func=cmd_optimize)

    p_prop = sub.add_parser("propagate",
                            help="evaluate a functional for given controls")
    p_prop.add_argument("config")
    p_prop.add_argument("--controls", required=True)
    p_prop.set_defaults(func=cmd_propagate)

    p_gate = sub.add_parser("gate", help="analyze a 4x4 gate matrix")
    p_gate.add_argument("matrix")
    p_gate.set_defaults(func=cmd_gate)

    p_bench = sub.add_parser("benchmark", help="sweep problem sizes and time "
                                               "gradient evaluations")
    p_bench.add_argument("config")
    p_bench.set_defaults(func=cmd_benchmark)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
