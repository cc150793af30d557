"""Limited-memory BFGS with a strong-Wolfe line search.

The two-loop recursion builds the quasi-Newton direction from stored
correction pairs; every line-search trial evaluates both the value and
the gradient (the Wolfe curvature test needs the slope anyway, and the
optimization callback produces both at once). Optional box bounds are
handled by projecting the search direction at active bounds and
clipping iterates, which preserves monotone decrease without the full
active-set machinery.
"""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = ["LbfgsState", "OptimResult", "lbfgs_minimize"]


@dataclass
class LbfgsState:
    """Correction-pair history and line-search bookkeeping."""

    m: int = 10
    s_list: deque = field(default_factory=deque)
    y_list: deque = field(default_factory=deque)
    rho_list: deque = field(default_factory=deque)
    iteration: int = 0
    #: per-iteration records (phi0, dphi0, alpha, phi_alpha, dphi_alpha)
    line_searches: list = field(default_factory=list)

    def push(self, s, y):
        sy = float(np.dot(s, y))
        if sy <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            return False  # curvature condition violated: skip the pair
        if len(self.s_list) >= self.m:
            self.s_list.popleft()
            self.y_list.popleft()
            self.rho_list.popleft()
        self.s_list.append(s)
        self.y_list.append(y)
        self.rho_list.append(1.0 / sy)
        return True

    def reset(self):
        self.s_list.clear()
        self.y_list.clear()
        self.rho_list.clear()

    def direction(self, grad):
        """Two-loop recursion; steepest descent with empty history."""
        q = -grad.copy()
        if not self.s_list:
            return q
        alphas = []
        for s, y, rho in zip(
            reversed(self.s_list), reversed(self.y_list), reversed(self.rho_list)
        ):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        s, y = self.s_list[-1], self.y_list[-1]
        gamma = np.dot(s, y) / np.dot(y, y)
        q *= gamma
        for (s, y, rho), a in zip(
            zip(self.s_list, self.y_list, self.rho_list), reversed(alphas)
        ):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        return q


@dataclass
class OptimResult:
    x: np.ndarray
    J: float
    grad: np.ndarray
    iterations: int
    grad_evals: int
    status: str
    message: str
    J_history: list
    grad_norm_history: list
    seconds_per_grad: float
    state: LbfgsState


def _project_direction(d, x, lower, upper, grad):
    """Zero direction components pushing against an active bound.

    If the projected quasi-Newton direction loses descent (its overlap
    with the gradient turns non-negative), fall back to the projected
    steepest descent so the iteration keeps making progress.
    """
    d = d.copy()
    at_lo = (x <= lower) & (d < 0)
    at_hi = (x >= upper) & (d > 0)
    d[at_lo | at_hi] = 0.0
    if np.dot(d, grad) >= 0:
        d = -grad.copy()
        d[(x <= lower) & (d < 0)] = 0.0
        d[(x >= upper) & (d > 0)] = 0.0
    return d


def _wolfe_line_search(evaluate, x, f0, g0, d, c1, c2, max_trials=20,
                       alpha0=1.0):
    """Strong-Wolfe search along d (bracket + zoom with bisection).

    ``evaluate(x)`` returns (f, grad). Each trial costs one evaluation
    of both. Near round-off level, where the Armijo comparison becomes
    meaningless, a step satisfying the curvature condition with
    ``f <= f0 + eps |f0|`` is accepted (approximate Wolfe). Returns
    (alpha, f, g, x_new, trials, record) or None after ``max_trials``
    failures.
    """
    dphi0 = float(np.dot(g0, d))
    if dphi0 >= 0:
        return None
    f_slack = 1e-14 * abs(f0)

    def phi(alpha):
        xn = x + alpha * d
        f, g = evaluate(xn)
        return f, g, float(np.dot(g, d)), xn

    def acceptable(alpha, f, dphi):
        if abs(dphi) > -c2 * dphi0:
            return False
        return f <= f0 + c1 * alpha * dphi0 or f <= f0 + f_slack

    trials = 0
    alpha_prev, phi_prev = 0.0, f0
    alpha = alpha0
    alpha_max = 1e10
    bracket = None
    while trials < max_trials:
        f, g, dphi, xn = phi(alpha)
        trials += 1
        if acceptable(alpha, f, dphi):
            return alpha, f, g, xn, trials, (f0, dphi0, alpha, f, dphi)
        if f > f0 + c1 * alpha * dphi0 + f_slack or (trials > 1 and f >= phi_prev):
            bracket = (alpha_prev, phi_prev, alpha)
            break
        if dphi >= 0:
            bracket = (alpha, f, alpha_prev)
            break
        alpha_prev, phi_prev = alpha, f
        alpha = min(2.0 * alpha, alpha_max)
    if bracket is None:
        return None
    lo, f_lo, hi = bracket
    while trials < max_trials:
        alpha = 0.5 * (lo + hi)
        f, g, dphi, xn = phi(alpha)
        trials += 1
        if acceptable(alpha, f, dphi):
            return alpha, f, g, xn, trials, (f0, dphi0, alpha, f, dphi)
        if f > f0 + c1 * alpha * dphi0 + f_slack or f >= f_lo:
            hi = alpha
        else:
            if dphi * (hi - lo) >= 0:
                hi = lo
            lo, f_lo = alpha, f
    return None


def lbfgs_minimize(
    value_grad,
    x0,
    m=10,
    c1=1e-4,
    c2=0.9,
    max_iters=100,
    bounds=None,
    gtol=0.0,
    callback=None,
):
    """Minimize a smooth function with L-BFGS and strong-Wolfe steps.

    Parameters
    ----------
    value_grad : callable
        ``value_grad(x) -> (J, grad)`` with finite outputs.
    x0 : array_like
        Starting point (flat real vector).
    m : int
        History size for the two-loop recursion.
    c1, c2 : float
        Wolfe constants (sufficient decrease / curvature).
    max_iters : int
    bounds : None or (lower, upper)
        Componentwise box bounds (scalars or arrays). Iterates are
        clipped and directions projected at active bounds.
    gtol : float
        Stop once ``max|grad|`` falls below this.
    callback : callable or None
        ``callback(info_dict) -> bool``; returning True stops the run.
        Called after every accepted iterate.

    Returns
    -------
    OptimResult
        Monotone J over accepted iterates; on line-search failure the
        best iterate so far is returned with status 'linesearch_failed'.
    """
    x = np.asarray(x0, dtype=float).ravel().copy()
    lower, upper = (-np.inf, np.inf) if bounds is None else bounds
    lower = np.broadcast_to(np.asarray(lower, dtype=float), x.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), x.shape)
    if bounds is not None:
        x = np.clip(x, lower, upper)

    n_evals = 0
    t_grad = 0.0

    def evaluate(xq):
        nonlocal n_evals, t_grad
        if bounds is not None:
            xq = np.clip(xq, lower, upper)
        tic = time.perf_counter()
        f, g = value_grad(xq)
        t_grad += time.perf_counter() - tic
        n_evals += 1
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise ValueError("value_grad returned non-finite output")
        return float(f), np.asarray(g, dtype=float).ravel()

    f, g = evaluate(x)
    state = LbfgsState(m=m)
    j_hist = [f]
    gnorm_hist = [float(np.max(np.abs(g)))]
    status, message = "maxiter", f"reached {max_iters} iterations"

    if max_iters == 0:
        status, message = "maxiter", "zero iterations requested"

    def projected_grad(xq, gq):
        if bounds is None:
            return gq
        pg = gq.copy()
        pg[(xq <= lower) & (gq > 0)] = 0.0
        pg[(xq >= upper) & (gq < 0)] = 0.0
        return pg

    for it in range(max_iters):
        if np.max(np.abs(projected_grad(x, g))) <= gtol:
            status, message = "converged", f"max|projected grad| <= {gtol:g}"
            break
        d = state.direction(g)
        if bounds is not None:
            d = _project_direction(d, x, lower, upper, g)
            if not np.any(d):
                status, message = "converged", "projected direction vanished"
                break
        alpha0 = 1.0 if state.s_list else min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-30))
        res = _wolfe_line_search(evaluate, x, f, g, d, c1, c2, alpha0=alpha0)
        if res is None and state.s_list:
            # quasi-Newton direction may be poor across non-smooth
            # regions; restart from steepest descent before giving up
            state.reset()
            d = -g if bounds is None else _project_direction(-g, x, lower,
                                                             upper, g)
            alpha0 = min(1.0, 1.0 / max(np.max(np.abs(g)), 1e-30))
            res = _wolfe_line_search(evaluate, x, f, g, d, c1, c2,
                                     alpha0=alpha0)
        if res is None:
            status, message = "linesearch_failed", "no Wolfe step after 20 trials"
            break
        alpha, f_new, g_new, x_new, _trials, record = res
        if bounds is not None:
            x_new = np.clip(x_new, lower, upper)
        state.push(x_new - x, g_new - g)
        state.line_searches.append(record)
        x, f, g = x_new, f_new, g_new
        state.iteration = it + 1
        j_hist.append(f)
        gnorm_hist.append(float(np.max(np.abs(g))))
        if callback is not None and callback(
            {"iteration": it + 1, "x": x, "J": f, "grad": g}
        ):
            status, message = "callback", "stopped by callback"
            break

    return OptimResult(
        x=x,
        J=f,
        grad=g,
        iterations=state.iteration,
        grad_evals=n_evals,
        status=status,
        message=message,
        J_history=j_hist,
        grad_norm_history=gnorm_hist,
        seconds_per_grad=t_grad / max(n_evals, 1),
        state=state,
    )
