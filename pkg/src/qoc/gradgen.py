"""Extended-state machinery for machine-precision step gradients.

Propagating an extended vector of L zero-initialized gradient blocks
plus the base state under a block generator yields, in one sweep, both
``U_n Psi`` and ``(dU_n/d eps_{nl}) Psi`` for every control l. The block
generator shares the spectrum of the underlying evaluated generator
(with extra multiplicity), so the same Chebychev coefficients apply.
"""

import numpy as np

from .core import DimensionMismatch
from .propagator import cheby_step

__all__ = [
    "ExtendedState",
    "GradGenerator",
    "apply_gradgen",
    "zero_grad_blocks",
    "grad_step",
]


class ExtendedState:
    """L gradient blocks stacked on top of the base state.

    Stored as a single ``(L + 1, N_H)`` complex array; row ``L`` is the
    base state, rows ``0..L-1`` are the gradient blocks.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValueError("extended state needs shape (L + 1, N_H) with L >= 1")
        self.data = data

    @classmethod
    def from_base(cls, base, n_controls):
        """Extended state with zeroed gradient blocks over ``base``."""
        base = np.asarray(base, dtype=np.complex128)
        data = np.zeros((n_controls + 1, base.size), dtype=np.complex128)
        data[-1] = base
        return cls(data)

    @property
    def n_controls(self):
        return self.data.shape[0] - 1

    @property
    def base(self):
        return self.data[-1]

    @property
    def grad_blocks(self):
        return self.data[:-1]

    def copy(self):
        return ExtendedState(self.data.copy())


class GradGenerator:
    """Abstract block operator G_n: never materialized, only applied.

    The action on an extended state is ``H_n`` on every block plus the
    control operator ``H_n^(l)`` feeding the base state into block l.

    Parameters
    ----------
    base : Operator
        Evaluated generator ``H_n`` for the interval.
    control_ops : sequence of Operator
        ``dH_n / d eps_{nl}`` for each control (the constant control
        operators for linear control coupling).
    """

    def __init__(self, base, control_ops):
        self.base = base
        self.control_ops = list(control_ops)
        for op in self.control_ops:
            if op.dim != base.dim:
                raise DimensionMismatch("control operator dimension differs from base")
        self.dim = base.dim
        self.n_controls = len(self.control_ops)

    def apply(self, x):
        """Block action on a raw ``(L + 1, N_H)`` array."""
        x = np.asarray(x)
        if x.shape != (self.n_controls + 1, self.dim):
            raise DimensionMismatch(
                f"expected extended shape {(self.n_controls + 1, self.dim)}, "
                f"got {x.shape}"
            )
        out = self.base.apply(x)
        base_in = x[-1]
        for l, op in enumerate(self.control_ops):
            out[l] += op.apply(base_in)
        return out

    def adjoint_blocks(self):
        """Blockwise Hermitian conjugate (same block layout).

        This is the generator of the backward extended step, whose
        exponential with negative dt produces ``(dU_n^dag/d eps) chi``
        and ``U_n^dag chi``; it is not the matrix adjoint of G_n.
        """
        return GradGenerator(
            self.base.adjoint(), [op.adjoint() for op in self.control_ops]
        )

    def to_dense(self):
        """Dense ``(L+1) N_H`` block matrix, for small-scale validation only."""
        n, L = self.dim, self.n_controls
        full = np.zeros(((L + 1) * n, (L + 1) * n), dtype=np.complex128)
        h = self.base.to_dense()
        for b in range(L + 1):
            full[b * n : (b + 1) * n, b * n : (b + 1) * n] = h
        for l, op in enumerate(self.control_ops):
            full[l * n : (l + 1) * n, L * n :] = op.to_dense()
        return full


def apply_gradgen(gg, x):
    """Apply the block generator to an extended state."""
    return ExtendedState(gg.apply(x.data))


def zero_grad_blocks(x):
    """Zero the gradient blocks in place (base block untouched)."""
    x.data[:-1] = 0.0
    return x


def grad_step(gg, psi, coeffs):
    """Propagate ``psi`` by one interval while producing step gradients.

    Returns an extended state whose base block is ``exp(-i H_n dt) psi``
    and whose l'th gradient block is ``(dU_n/d eps_{nl}) psi``. The
    Chebychev coefficients of the underlying generator apply unchanged
    because the block generator has the same (real) eigenvalues.
    """
    x = ExtendedState.from_base(psi, gg.n_controls)
    return ExtendedState(cheby_step(gg, x.data, coeffs))
