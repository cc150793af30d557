"""Time propagation of piecewise-constant dynamics.

A Chebychev polynomial expansion of ``exp(-i H dt)`` covers Hermitian
generators (coefficients proportional to Bessel functions, truncated at
machine precision); a generic adaptive Runge-Kutta step covers anything
else. Backward propagation is forward propagation under the adjoint
generator with the sign of dt flipped.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import jv

from .core import Operator

__all__ = [
    "SpectralBounds",
    "ChebyCoeffs",
    "spectral_bounds",
    "cheby_coeffs",
    "cheby_step",
    "ode_step",
    "propagate",
    "PropagationError",
    "SpectralRangeError",
]


class PropagationError(RuntimeError):
    pass


class SpectralRangeError(PropagationError):
    """Chebychev recursion diverged: spectral bounds do not bracket the
    spectrum. Recompute bounds with a larger margin."""


@dataclass(frozen=True)
class SpectralBounds:
    """Real interval [e_min, e_max] enclosing the spectrum of every
    evaluated generator on the grid."""

    e_min: float
    e_max: float

    def __post_init__(self):
        if self.e_min > self.e_max:
            raise ValueError("e_min > e_max")

    @property
    def center(self):
        return 0.5 * (self.e_min + self.e_max)

    @property
    def half_range(self):
        return 0.5 * (self.e_max - self.e_min)


@dataclass(frozen=True)
class ChebyCoeffs:
    """Expansion coefficients for one time step ``exp(-i H dt)``.

    ``coeffs[m]`` multiplies the m'th recursion vector; the phase from
    shifting the spectrum to [-1, 1] is folded in. Valid for any
    operator whose spectrum lies within the generating bounds.
    """

    coeffs: np.ndarray
    e_avg: float
    half_range: float
    dt: float

    @property
    def order(self):
        return len(self.coeffs)


def spectral_bounds(gen, controls, margin=0.05):
    """Worst-case Gershgorin bounds over all intervals of a control set.

    Certified (every eigenvalue of every ``H_n`` lies inside), cheap
    (one pass over the matrix entries), and widened by the relative
    ``margin`` to keep the Chebychev recursion safely inside [-1, 1].
    """
    if not gen.is_hermitian:
        raise ValueError(
            "Gershgorin spectral bounds require a Hermitian generator; "
            "use the ODE path for non-Hermitian dynamics"
        )
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if controls.shape[1] != gen.n_controls:
        raise ValueError("controls shape does not match number of control operators")

    def diag_and_radius(op):
        dense = op.to_dense() if op.dim <= 64 or op.is_dense else None
        if dense is not None:
            d = np.real(np.diag(dense))
            r = np.sum(np.abs(dense), axis=1) - np.abs(np.diag(dense))
        else:
            d = np.real(op.diagonal())
            r = np.asarray(np.abs(op.mat).sum(axis=1)).ravel() - np.abs(op.diagonal())
        return d, r

    d0, r0 = diag_and_radius(gen.drift)
    diags = [diag_and_radius(op) for op in gen.control_ops]
    # per-interval disc centers and radii, vectorized over the grid
    centers = d0[None, :] + sum(
        controls[:, l, None] * diags[l][0][None, :] for l in range(gen.n_controls)
    )
    radii = r0[None, :] + sum(
        np.abs(controls[:, l, None]) * diags[l][1][None, :]
        for l in range(gen.n_controls)
    )
    e_min = float(np.min(centers - radii))
    e_max = float(np.max(centers + radii))
    pad = 0.5 * margin * (e_max - e_min)
    return SpectralBounds(e_min - pad, e_max + pad)


def cheby_coeffs(bounds, dt, tol=1e-15):
    """Chebychev coefficients for ``exp(-i H dt)`` on the given bounds.

    The series is truncated once the Bessel-function tail drops below
    ``tol`` relative to the largest coefficient. The number of retained
    terms grows roughly linearly with ``half_range * |dt|``.
    """
    if dt == 0:
        raise ValueError("dt must be nonzero (its sign encodes the direction)")
    if tol < 1e-16:
        raise ValueError("tol below 1e-16 is not reachable in double precision")
    z = bounds.half_range * dt
    n_max = max(16, int(1.3 * abs(z)) + 24)
    while True:
        m = np.arange(n_max + 1)
        a = jv(m, z) * np.where(m == 0, 1.0, 2.0)
        mags = np.abs(a)
        limit = tol * mags.max()
        # keep everything up to the last coefficient above the cutoff
        above = np.nonzero(mags > limit)[0]
        order = above[-1] + 1
        if order <= n_max:
            a = a[: order + 1]  # one sub-threshold tail term certifies truncation
            break
        n_max *= 2
    phase = np.exp(-1j * bounds.center * dt)
    return ChebyCoeffs(a * phase, bounds.center, bounds.half_range, dt)


def _norm(x):
    return float(np.linalg.norm(x.ravel()))


def cheby_step(op, v, coeffs):
    """One step ``exp(-i H dt) v`` via the three-term Chebychev recursion.

    ``op`` is anything with an ``apply`` method mapping arrays to arrays
    of the same shape (an ``Operator``, or the extended-state gradient
    generator). Divergence of the recursion norm signals that the
    spectral bounds do not bracket the spectrum.
    """
    a = coeffs.coeffs
    e_avg = coeffs.e_avg
    half = coeffs.half_range

    if half <= 0:
        # Gershgorin width zero ==> H is exactly e_avg * identity
        return a[0] * np.asarray(v, dtype=np.complex128)

    def apply_norm(x):
        return (op.apply(x) - e_avg * x) / half

    phi_prev = np.asarray(v, dtype=np.complex128).copy()
    guard = 1e8 * max(_norm(phi_prev), 1e-300)
    out = a[0] * phi_prev
    phi = -1j * apply_norm(phi_prev)
    out += a[1] * phi
    for m in range(2, len(a)):
        phi, phi_prev = -2j * apply_norm(phi) + phi_prev, phi
        out += a[m] * phi
        if _norm(phi) > guard:
            raise SpectralRangeError(
                "Chebychev recursion diverged at order "
                f"{m}; enlarge the spectral-bounds margin"
            )
    return out


def ode_step(op, v, dt, tol=1e-10):
    """One step of ``dv/dt = -i H v`` with an adaptive explicit RK solver.

    Works for arbitrary square generators (Hermitian or not); used as
    the fallback where the Chebychev expansion does not apply.
    """
    v = np.asarray(v, dtype=np.complex128)
    shape = v.shape

    def rhs(_t, y):
        return (-1j * op.apply(y.reshape(shape))).ravel()

    sol = integrate.solve_ivp(
        rhs,
        (0.0, dt),
        v.ravel(),
        method="DOP853",
        rtol=tol,
        atol=tol * 1e-3,
    )
    if not sol.success:
        raise PropagationError(f"ODE step failed: {sol.message}")
    return sol.y[:, -1].reshape(shape)


def _coeffs_for_grid(gen, controls, grid, direction, margin, tol):
    """One ChebyCoeffs per distinct interval length (one for uniform grids)."""
    bounds = spectral_bounds(gen, controls, margin=margin)
    sign = 1.0 if direction == "forward" else -1.0
    cache = {}
    table = []
    for dt in grid.dt:
        key = round(float(dt), 15)
        if key not in cache:
            cache[key] = cheby_coeffs(bounds, sign * float(dt), tol=tol)
        table.append(cache[key])
    return table


def propagate(
    gen,
    controls,
    grid,
    v0,
    direction="forward",
    store=False,
    method="cheby",
    margin=0.05,
    tol=1e-10,
):
    """Propagate ``v0`` across the whole time grid.

    Forward: ``Psi(t_n) = U_n ... U_1 v0``. Backward: ``v0`` is the state
    at ``t = T`` and each step applies ``U_n^dag`` (adjoint generator,
    negative time step), yielding the costate at earlier grid points.

    With ``store=True`` returns all ``N_T + 1`` states indexed by grid
    point; otherwise only the final state of the sweep.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    controls = gen.validate_controls(controls, grid.n_intervals)
    n_t = grid.n_intervals
    work_gen = gen if direction == "forward" else gen.adjoint()
    use_cheby = method == "cheby"
    if use_cheby and not gen.is_hermitian:
        use_cheby = False
    coeffs_table = (
        _coeffs_for_grid(work_gen, controls, grid, direction, margin, 1e-15)
        if use_cheby
        else None
    )

    v = np.asarray(v0, dtype=np.complex128).copy()
    traj = None
    if store:
        traj = [None] * (n_t + 1)
        traj[n_t if direction == "backward" else 0] = v.copy()

    order = range(n_t) if direction == "forward" else range(n_t - 1, -1, -1)
    for n in order:
        h_n = work_gen.evaluate(controls[n])
        try:
            if use_cheby:
                v = cheby_step(h_n, v, coeffs_table[n])
            else:
                dt = grid.dt[n] if direction == "forward" else -grid.dt[n]
                v = ode_step(h_n, v, dt, tol=tol)
        except PropagationError as exc:
            raise PropagationError(f"interval {n + 1}: {exc}") from exc
        if store:
            traj[n + 1 if direction == "forward" else n] = v.copy()
    return traj if store else v
