"""Final-time functionals in the three reduced forms (overlaps, states,
gate), running costs, and the reduced-gradient engine.

The gradient of a real functional over complex reduced variables is
carried in the paired-real convention ``dJ/dRe[z] + i dJ/dIm[z]``
(twice the Wirtinger derivative with respect to ``z*``). Costates for
the backward propagation are ``chi = -(1/2) * that gradient``.

Analytic gradients are used where available; central finite differences
over the (few) reduced variables are the universal fallback.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import gates
from .core import Operator

__all__ = [
    "FunctionalSpec",
    "eval_J_T_sm",
    "grad_J_T_sm",
    "eval_J_T_pe",
    "grad_J_T_pe",
    "eval_J_T_c",
    "reduced_fd_gradient",
    "chi_from_states",
    "chi_from_gate",
    "run_cost_a_l2",
    "run_cost_b_forbidden",
    "sm_overlap_functional",
    "sm_state_functional",
    "pe_functional",
    "concurrence_functional",
]

FD_STEP = 1e-6


def eval_J_T_sm(tau):
    """Square-modulus functional ``1 - |sum_k tau_k / N|^2``."""
    tau = np.asarray(tau, dtype=np.complex128)
    return float(1.0 - abs(np.sum(tau) / tau.size) ** 2)


def grad_J_T_sm(tau):
    """Paired-real gradient of the square-modulus functional over tau.

    Every component equals ``-(2/N^2) sum_k' tau_k'``.
    """
    tau = np.asarray(tau, dtype=np.complex128)
    n = tau.size
    return np.full(n, -2.0 / n**2 * np.sum(tau), dtype=np.complex128)


def eval_J_T_pe(u):
    """Perfect-entangler functional: clamped distance plus leakage.

    ``J = max(D_PE, 0)/2 + p_loss/2``. The clamp keeps minimization
    driving the gate onto the polyhedron instead of through it.
    """
    return float(
        0.5 * max(gates.d_pe_gate(u), 0.0) + 0.5 * gates.pop_loss(u)
    )


def eval_J_T_c(u):
    """Concurrence functional ``(1 - C)/2 + p_loss/2``."""
    return float(0.5 * (1.0 - gates.concurrence(u)) + 0.5 * gates.pop_loss(u))


def _grad_pop_loss(u):
    # p_loss = 1 - tr(U^dag U)/4; paired-real gradient is -U/2
    return -0.5 * np.asarray(u, dtype=np.complex128)


def grad_J_T_pe(u):
    """Paired-real gradient of the PE functional over the gate entries.

    The leakage term is analytic; the clamped distance term falls back
    to finite differences (its eigenphase pipeline has no convenient
    closed form here). Exposed mainly for cross-checking the FD engine.
    """
    u = np.asarray(u, dtype=np.complex128)
    grad = 0.5 * _grad_pop_loss(u)
    if gates.d_pe_gate(u) > 0:
        grad = grad + 0.5 * reduced_fd_gradient(
            lambda m: max(gates.d_pe_gate(m), 0.0), u
        )
    return grad


def reduced_fd_gradient(f, z, h=FD_STEP):
    """Central-difference gradient of a real function of few variables.

    ``z`` may be real or complex, any shape. For complex input the
    result holds ``dJ/dRe + i dJ/dIm`` per component. Cost is two
    evaluations of ``f`` per real component.
    """
    z = np.asarray(z)
    complex_input = np.iscomplexobj(z)
    grad = np.zeros(z.shape, dtype=np.complex128 if complex_input else float)
    it = np.nditer(z, flags=["multi_index"])
    steps = (1.0, 1j) if complex_input else (1.0,)
    with warnings.catch_warnings():
        # probing intentionally perturbs off constraint manifolds (e.g.
        # unitarity); per-probe warnings are not actionable
        warnings.simplefilter("ignore", UserWarning)
        for _ in it:
            idx = it.multi_index
            for step in steps:
                zp = z.copy()
                zm = z.copy()
                zp[idx] += step * h
                zm[idx] -= step * h
                fp, fm = f(zp), f(zm)
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise ValueError(
                        f"non-finite functional value probing component {idx}"
                    )
                grad[idx] += step * (fp - fm) / (2.0 * h)
    return grad if z.shape else grad[()]


def chi_from_states(j_func, states_T, grad=None, h=FD_STEP):
    """Costates ``chi_k(T) = -(1/2) grad_{Psi_k} J`` for a state functional.

    ``j_func`` maps the list of final states to a real J. If ``grad``
    (an analytic paired-real gradient per state) is not supplied, the
    gradient is taken by central differences over every amplitude.
    """
    states_T = [np.asarray(s, dtype=np.complex128) for s in states_T]
    if grad is not None:
        grads = grad(states_T)
    else:
        stacked = np.stack(states_T)
        g = reduced_fd_gradient(
            lambda arr: j_func([arr[k] for k in range(arr.shape[0])]), stacked, h=h
        )
        grads = [g[k] for k in range(len(states_T))]
    return [-0.5 * gk for gk in grads]


def chi_from_gate(j_func, u, logical_basis, grad=None, h=FD_STEP):
    """Costates for a gate functional via the 4x4 reduced gradient.

    ``chi_k = -(1/2) sum_i (grad_U J)_{ik} |phi_i>`` with the gradient
    over the 16 gate entries (analytic if supplied, finite differences
    otherwise -- 32 real probes regardless of Hilbert space size).
    """
    gu = grad(u) if grad is not None else reduced_fd_gradient(j_func, u, h=h)
    basis = [np.asarray(b, dtype=np.complex128) for b in logical_basis]
    chis = []
    for k in range(4):
        chi = np.zeros_like(basis[0])
        for i in range(4):
            chi += gu[i, k] * basis[i]
        chis.append(-0.5 * chi)
    return chis


def run_cost_a_l2(eps, lambda_a, grid=None):
    """Amplitude penalty ``lambda_a * sum eps^2`` and its gradient.

    The time-step weight is folded into ``lambda_a`` (the value is a
    plain sum over all pulse values); the gradient entry for value
    ``eps_nl`` is ``2 lambda_a eps_nl``.
    """
    eps = np.asarray(eps, dtype=float)
    return lambda_a * float(np.sum(eps**2)), 2.0 * lambda_a * eps


def run_cost_b_forbidden(trajectories, projector, lambda_b, grid=None):
    """Forbidden-subspace population cost over stored trajectories.

    ``value = lambda_b * sum_n sum_k <Psi_k(t_n)|D|Psi_k(t_n)>`` with all
    time-step weighting folded into ``lambda_b``. Also returns the
    backward-propagation inhomogeneities
    ``xi_k(t_n) = -lambda_b * D |Psi_k(t_n)>``.

    ``projector`` should be Hermitian idempotent; a non-projector D is
    accepted with a warning (the expectation values are still real for
    Hermitian D).
    """
    d = projector
    defect = _projector_defect(d)
    if defect > 1e-10:
        warnings.warn(
            f"forbidden-subspace operator is not a projector (defect {defect:.2e})",
            stacklevel=2,
        )
    value = 0.0
    xis = []
    for traj in trajectories:
        xi_k = []
        for psi in traj:
            dpsi = d.apply(psi)
            value += float(np.vdot(psi, dpsi).real)
            xi_k.append(-lambda_b * dpsi)
        xis.append(xi_k)
    return lambda_b * value, xis


def _projector_defect(d):
    if d.dim <= 64 or d.is_dense:
        m = d.to_dense()
        return float(np.max(np.abs(m @ m - m)))
    m2 = (d.mat @ d.mat - d.mat).tocoo()
    return float(np.max(np.abs(m2.data))) if m2.nnz else 0.0


@dataclass
class FunctionalSpec:
    """A final-time functional in one of the three reduced forms.

    mode 'overlap': ``evaluate(tau)`` over the N overlaps with targets
    (requires ``targets``); mode 'state': ``evaluate(states_T)``; mode
    'gate': ``evaluate(U_L)`` over the logical-subspace gate. If
    ``gradient`` is None the reduced finite-difference engine supplies
    it. Optional running costs: quadratic amplitude penalty
    (``lambda_a``) and forbidden-subspace population (``lambda_b`` with
    ``forbidden`` projector).
    """

    mode: str
    evaluate: Callable
    gradient: Optional[Callable] = None
    targets: Optional[list] = None
    lambda_a: float = 0.0
    lambda_b: float = 0.0
    forbidden: Optional[Operator] = None
    #: custom state-dependent running cost: (trajectories, grid) ->
    #: (value, xis); overrides the forbidden-projector default
    running_cost_b: Optional[Callable] = None
    fd_step: float = FD_STEP
    name: str = ""

    def __post_init__(self):
        if self.mode not in ("overlap", "state", "gate"):
            raise ValueError(f"unknown functional mode {self.mode!r}")
        if self.mode == "overlap" and self.targets is None:
            raise ValueError("overlap mode requires target states")
        if self.lambda_b and self.forbidden is None and self.running_cost_b is None:
            raise ValueError("lambda_b > 0 requires a forbidden-subspace projector")

    @property
    def has_state_cost(self):
        return self.running_cost_b is not None or bool(self.lambda_b)

    def state_running_cost(self, trajectories, grid):
        """Value and backward inhomogeneities of the state-dependent
        running cost over stored trajectories."""
        if self.running_cost_b is not None:
            return self.running_cost_b(trajectories, grid)
        return run_cost_b_forbidden(
            trajectories, self.forbidden, self.lambda_b, grid
        )

    def reduced_gradient(self, z):
        """Paired-real gradient over the reduced variables."""
        if self.gradient is not None:
            return self.gradient(z)
        return reduced_fd_gradient(self.evaluate, np.asarray(z), h=self.fd_step)

    def boundary_costates(self, finals, objectives):
        """``chi_k(T) = -dJ_T/d<Psi_k(T)|`` for every objective."""
        if self.mode == "overlap":
            tau = np.array(
                [np.vdot(t, f) for t, f in zip(self.targets, finals)]
            )
            g_tau = self.reduced_gradient(tau)
            return [
                -0.5 * g_tau[k] * np.asarray(self.targets[k], dtype=np.complex128)
                for k in range(len(finals))
            ]
        if self.mode == "state":
            return chi_from_states(
                self.evaluate, finals, grad=self.gradient, h=self.fd_step
            )
        basis = [obj.initial for obj in objectives]
        u = gates.extract_gate(finals, basis)
        return chi_from_gate(
            self.evaluate, u, basis, grad=self.gradient, h=self.fd_step
        )

    def final_time_value(self, finals, objectives):
        if self.mode == "overlap":
            tau = np.array(
                [np.vdot(t, f) for t, f in zip(self.targets, finals)]
            )
            return float(self.evaluate(tau))
        if self.mode == "state":
            return float(self.evaluate(finals))
        basis = [obj.initial for obj in objectives]
        return float(self.evaluate(gates.extract_gate(finals, basis)))


def sm_overlap_functional(targets, lambda_a=0.0):
    """Square-modulus gate functional in overlap form (analytic gradient)."""
    return FunctionalSpec(
        mode="overlap",
        evaluate=eval_J_T_sm,
        gradient=grad_J_T_sm,
        targets=[np.asarray(t, dtype=np.complex128) for t in targets],
        lambda_a=lambda_a,
        name="sm",
    )


def sm_state_functional(targets, lambda_a=0.0, lambda_b=0.0, forbidden=None,
                        analytic=True):
    """Square-modulus functional in state form.

    Same J as :func:`sm_overlap_functional` but differentiated through
    the final states (used for the two-path equivalence check and for
    combining with state-dependent running costs).
    """
    targets = [np.asarray(t, dtype=np.complex128) for t in targets]

    def evaluate(states):
        tau = np.array([np.vdot(t, s) for t, s in zip(targets, states)])
        return eval_J_T_sm(tau)

    def gradient(states):
        tau = np.array([np.vdot(t, s) for t, s in zip(targets, states)])
        s = np.sum(tau)
        n = len(targets)
        # chain rule through tau: grad_Psi J = -(2/N^2) s * |tgt>
        return [-2.0 / n**2 * s * t for t in targets]

    return FunctionalSpec(
        mode="state",
        evaluate=evaluate,
        gradient=gradient if analytic else None,
        lambda_a=lambda_a,
        lambda_b=lambda_b,
        forbidden=forbidden,
        name="sm-state",
    )


def pe_functional(lambda_a=0.0, lambda_b=0.0, forbidden=None, fd_step=FD_STEP):
    """Perfect-entangler functional in gate form (FD reduced gradient)."""
    return FunctionalSpec(
        mode="gate",
        evaluate=eval_J_T_pe,
        lambda_a=lambda_a,
        lambda_b=lambda_b,
        forbidden=forbidden,
        fd_step=fd_step,
        name="pe",
    )


def concurrence_functional(lambda_a=0.0, lambda_b=0.0, forbidden=None,
                           fd_step=FD_STEP):
    """Gate-concurrence functional in gate form (FD reduced gradient).

    Piecewise smooth: the concurrence is clamped at 1 inside the
    perfect-entangler polyhedron, so the gradient of the concurrence
    term is exactly zero there.
    """
    return FunctionalSpec(
        mode="gate",
        evaluate=eval_J_T_c,
        lambda_a=lambda_a,
        lambda_b=lambda_b,
        forbidden=forbidden,
        fd_step=fd_step,
        name="c",
    )
