"""Shared primitives: complex state vectors, sparse operators, time grids,
and piecewise-constant control fields.

States are plain 1-D complex numpy arrays. Operators wrap either a dense
array (small dimensions) or a CSR sparse matrix, plus a hermiticity flag
that downstream propagators rely on.
"""

import numpy as np
from scipy import sparse

__all__ = [
    "DENSE_CUTOFF",
    "Operator",
    "ControlGenerator",
    "TimeGrid",
    "apply",
    "apply_add",
    "inner",
    "make_time_grid",
    "as_state",
]

#: Matrices up to this dimension are stored dense (gate-analysis scale).
DENSE_CUTOFF = 16

_HERM_TOL = 1e-12


class DimensionMismatch(ValueError):
    """Operator/state dimensions are inconsistent."""


def as_state(v):
    """Coerce ``v`` to a 1-D complex128 array, validating finiteness."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("state must be a non-empty 1-D array")
    if not np.all(np.isfinite(v.view(np.float64))):
        raise ValueError("state contains non-finite entries")
    return v


class Operator:
    """Square complex matrix acting on state vectors.

    Parameters
    ----------
    matrix : array_like or scipy sparse matrix
        Square complex matrix.
    hermitian : bool or None
        If True, validated against ``max|A - A^dag| < 1e-12`` on
        construction. If None, the flag is detected numerically.

    The matrix is stored dense for ``dim <= DENSE_CUTOFF`` and as CSR
    otherwise (row-compressed storage keeps the large transmon
    Hamiltonians cheap to apply).
    """

    def __init__(self, matrix, hermitian=None):
        if sparse.issparse(matrix):
            mat = matrix.tocsr().astype(np.complex128)
        else:
            mat = np.asarray(matrix, dtype=np.complex128)
            if mat.ndim != 2:
                raise ValueError("operator matrix must be 2-D")
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator must be square, got shape {mat.shape}")
        self.dim = mat.shape[0]
        if self.dim <= DENSE_CUTOFF:
            self.mat = mat.toarray() if sparse.issparse(mat) else mat
        else:
            self.mat = sparse.csr_matrix(mat)
        herm_defect = self._hermiticity_defect()
        if hermitian is None:
            hermitian = bool(herm_defect < _HERM_TOL)
        elif hermitian and herm_defect >= _HERM_TOL:
            raise ValueError(
                f"operator declared hermitian but max|A - A^dag| = {herm_defect:.3e}"
            )
        self.is_hermitian = hermitian

    @classmethod
    def _trusted(cls, mat, hermitian):
        """Wrap an already-validated matrix without re-checking (used in
        the per-interval hot path)."""
        op = cls.__new__(cls)
        op.mat = mat
        op.dim = mat.shape[0]
        op.is_hermitian = hermitian
        return op

    def _hermiticity_defect(self):
        if self.is_dense:
            return float(np.max(np.abs(self.mat - self.mat.conj().T)))
        diff = (self.mat - self.mat.conj().T).tocoo()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    @property
    def is_dense(self):
        return isinstance(self.mat, np.ndarray)

    def apply(self, v):
        """Return ``A @ v``. ``v`` may be a vector or a stack of row vectors."""
        v = np.asarray(v)
        if v.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"operator dim {self.dim} does not match state length {v.shape[-1]}"
            )
        if v.ndim == 1:
            return self.mat @ v
        return (self.mat @ v.T).T

    def apply_add(self, v, out):
        """Accumulate ``out += A @ v`` (same semantics as :meth:`apply`)."""
        out += self.apply(v)
        return out

    def adjoint(self):
        """Return the Hermitian conjugate as a new Operator."""
        if self.is_hermitian:
            return self
        return Operator(self.mat.conj().T, hermitian=False)

    def to_dense(self):
        return self.mat if self.is_dense else self.mat.toarray()

    def diagonal(self):
        return np.asarray(self.mat.diagonal())

    def __matmul__(self, v):
        return self.apply(v)


def apply(op, v):
    """Apply ``op`` to state ``v`` (function form of ``Operator.apply``)."""
    return op.apply(v)


def apply_add(op, v, out):
    """In-place accumulate ``out += op @ v``."""
    return op.apply_add(v, out)


def inner(a, b):
    """Inner product ``<a|b>``, conjugate-linear in the first argument.

    Also serves as the Hilbert-Schmidt product for vectorized density
    matrices.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"state lengths differ: {a.shape} vs {b.shape}"
        )
    return complex(np.vdot(a, b))


class ControlGenerator:
    """Drift plus control operators: ``H_n = H0 + sum_l eps[n,l] * H_l``.

    Parameters
    ----------
    drift : Operator
    control_ops : sequence of Operator
        One operator per control field, all sharing the drift's dimension.
    """

    def __init__(self, drift, control_ops):
        self.drift = drift
        self.control_ops = list(control_ops)
        for op in self.control_ops:
            if op.dim != drift.dim:
                raise DimensionMismatch("control operator dimension differs from drift")
        self.dim = drift.dim
        self.n_controls = len(self.control_ops)
        self.is_hermitian = drift.is_hermitian and all(
            op.is_hermitian for op in self.control_ops
        )
        self._sparse_eval = None
        if not drift.is_dense:
            self._sparse_eval = _SparseEvaluator(drift, self.control_ops)

    def evaluate(self, eps_row):
        """Evaluated generator for one interval: ``H0 + sum_l eps_l H_l``."""
        eps_row = np.atleast_1d(np.asarray(eps_row, dtype=float))
        if eps_row.shape != (self.n_controls,):
            raise ValueError(
                f"expected {self.n_controls} control values, got shape {eps_row.shape}"
            )
        if self._sparse_eval is not None:
            mat = self._sparse_eval.combine(eps_row)
        else:
            mat = self.drift.mat.copy()
            for eps, op in zip(eps_row, self.control_ops):
                mat += eps * op.mat
        return Operator._trusted(mat, self.is_hermitian)

    def adjoint(self):
        if self.is_hermitian:
            return self
        return ControlGenerator(
            self.drift.adjoint(), [op.adjoint() for op in self.control_ops]
        )

    def validate_controls(self, values, n_intervals):
        """Check a pulse-value matrix against this generator and a grid."""
        values = np.asarray(values, dtype=float)
        if values.shape != (n_intervals, self.n_controls):
            raise ValueError(
                f"controls shape {values.shape} does not match "
                f"(N_T, L) = ({n_intervals}, {self.n_controls})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("controls contain non-finite entries")
        return values


class _SparseEvaluator:
    """Aligns drift and control matrices onto one shared CSR pattern so
    that the per-interval generator is a single data-vector combination
    (no per-interval sparse additions in the propagation hot path)."""

    def __init__(self, drift, control_ops):
        pattern = abs(drift.mat.tocsr())
        for op in control_ops:
            pattern = pattern + abs(op.mat.tocsr())
        pattern = pattern.tocsr()
        pattern.sort_indices()
        self.indices = pattern.indices
        self.indptr = pattern.indptr
        self.shape = pattern.shape
        self.base = self._expand(drift.mat, pattern)
        self.ctrl = [self._expand(op.mat, pattern) for op in control_ops]

    @staticmethod
    def _expand(x, pattern):
        x = x.tocsr()
        x.sort_indices()
        out = np.zeros(pattern.nnz, dtype=np.complex128)
        for i in range(pattern.shape[0]):
            p0, p1 = pattern.indptr[i], pattern.indptr[i + 1]
            x0, x1 = x.indptr[i], x.indptr[i + 1]
            pos = p0 + np.searchsorted(pattern.indices[p0:p1], x.indices[x0:x1])
            out[pos] = x.data[x0:x1]
        return out

    def combine(self, eps_row):
        data = self.base.copy()
        for eps, c in zip(eps_row, self.ctrl):
            data += eps * c
        return sparse.csr_matrix(
            (data, self.indices, self.indptr), shape=self.shape
        )


class TimeGrid:
    """Strictly increasing time grid with interval steps and point weights.

    ``dt[n]`` is the n'th interval length ``t_n - t_{n-1}`` (n = 1..N_T,
    stored 0-based). The point weight ``delta_t[n]`` is the time step
    around grid point ``t_n``: ``dt[0]`` at the left edge, ``dt[-1]`` at
    the right edge, and the midpoint average in between.
    """

    def __init__(self, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("time grid needs at least two points")
        dt = np.diff(points)
        if np.any(dt <= 0):
            raise ValueError("time grid points must be strictly increasing")
        self.points = points
        self.dt = dt
        delta_t = np.empty(points.size)
        delta_t[0] = dt[0]
        delta_t[-1] = dt[-1]
        delta_t[1:-1] = 0.5 * (points[2:] - points[:-2])
        self.delta_t = delta_t

    @property
    def n_intervals(self):
        return self.dt.size

    @property
    def duration(self):
        return float(self.points[-1] - self.points[0])

    @property
    def is_uniform(self):
        dt0 = self.dt[0]
        return bool(np.all(np.abs(self.dt - dt0) <= 1e-12 * abs(dt0)))

    def midpoints(self):
        return 0.5 * (self.points[:-1] + self.points[1:])

    def __repr__(self):
        return (
            f"TimeGrid(T={self.duration:g}, N_T={self.n_intervals}, "
            f"uniform={self.is_uniform})"
        )


def make_time_grid(T, dt):
    """Uniform grid over [0, T] with step ``dt``.

    ``T/dt`` must be an integer up to floating-point round-off; the
    number of intervals is ``round(T/dt)``.
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    ratio = T / dt
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-6 * max(1.0, ratio):
        raise ValueError(
            f"T/dt = {ratio:g} is not an integer number of intervals"
        )
    return TimeGrid(np.linspace(0.0, T, n + 1))
