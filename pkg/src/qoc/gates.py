"""Two-qubit gate analysis on the 4-dimensional logical subspace.

Covers extraction of the logical gate from propagated basis states, the
magic (Bell) basis transform, Makhlin local invariants, Weyl chamber
coordinates with canonicalization, gate concurrence, the algebraic
distance to the perfect-entangler polyhedron, and population loss.

All coordinates are in radians. The perfect-entangler polyhedron is
``c1 + c2 >= pi/2``, ``c1 - c2 <= pi/2``, ``c2 + c3 <= pi/2``.
"""

import warnings
from typing import NamedTuple

import numpy as np

from .core import inner

__all__ = [
    "MAGIC_BASIS",
    "LocalInvariants",
    "WeylPoint",
    "extract_gate",
    "to_magic_basis",
    "from_magic_basis",
    "local_invariants",
    "weyl_coordinates",
    "canonical_gate",
    "in_weyl_chamber",
    "in_pe_polyhedron",
    "gate_concurrence",
    "concurrence",
    "d_pe",
    "d_pe_gate",
    "pop_loss",
    "CNOT",
    "SWAP",
    "ISWAP",
    "SQRT_ISWAP",
    "IDENTITY4",
]

#: Magic-basis column vectors: (|00> + |11>, i|01> + i|10>, |01> - |10>,
#: i|00> - i|11>) / sqrt(2). One fixed global-phase convention; all
#: derived quantities are convention-invariant.
MAGIC_BASIS = np.array(
    [
        [1, 0, 0, 1j],
        [0, 1j, 1, 0],
        [0, 1j, -1, 0],
        [1, 0, 0, -1j],
    ],
    dtype=np.complex128,
) / np.sqrt(2.0)

IDENTITY4 = np.eye(4, dtype=np.complex128)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
ISWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
_S2 = 1.0 / np.sqrt(2.0)
SQRT_ISWAP = np.array(
    [[1, 0, 0, 0], [0, _S2, 1j * _S2, 0], [0, 1j * _S2, _S2, 0], [0, 0, 0, 1]],
    dtype=np.complex128,
)


class LocalInvariants(NamedTuple):
    g1: float
    g2: float
    g3: float


class WeylPoint(NamedTuple):
    c1: float
    c2: float
    c3: float


def extract_gate(final_states, logical_basis):
    """Project the achieved evolution onto the logical subspace.

    ``U[i, j] = <phi_i | Psi_j(T)>`` for the four logical basis states
    ``phi_i`` and the four propagated states ``Psi_j(T)``. The basis must
    be orthonormal to 1e-12.
    """
    basis = [np.asarray(b, dtype=np.complex128) for b in logical_basis]
    finals = [np.asarray(s, dtype=np.complex128) for s in final_states]
    if len(basis) != 4 or len(finals) != 4:
        raise ValueError("need exactly four basis states and four final states")
    gram = np.array([[inner(a, b) for b in basis] for a in basis])
    if np.max(np.abs(gram - np.eye(4))) > 1e-12:
        raise ValueError("logical basis is not orthonormal to 1e-12")
    u = np.empty((4, 4), dtype=np.complex128)
    for i in range(4):
        for j in range(4):
            u[i, j] = inner(basis[i], finals[j])
    return u


def to_magic_basis(u):
    """Representation of a gate in the magic (Bell) basis."""
    return MAGIC_BASIS.conj().T @ np.asarray(u, dtype=np.complex128) @ MAGIC_BASIS


def from_magic_basis(u):
    return MAGIC_BASIS @ np.asarray(u, dtype=np.complex128) @ MAGIC_BASIS.conj().T


def _warn_if_not_unitary(u, tol=1e-8):
    defect = np.max(np.abs(u.conj().T @ u - np.eye(4)))
    if defect > tol:
        warnings.warn(
            f"gate is not unitary (defect {defect:.2e}); "
            "invariants computed on the matrix as given",
            stacklevel=3,
        )
        return False
    return True


def local_invariants(u):
    """Makhlin local invariants (g1, g2, g3) of a two-qubit gate.

    Computed from ``m = U_B^T U_B`` in the magic basis, normalized by
    ``det U`` so that the values match the standard convention for
    special-unitary gates while staying global-phase invariant:
    ``g1 + i g2 = tr^2(m) / (16 det U)`` and
    ``g3 = [tr^2(m) - tr(m^2)] / (4 det U)``.
    """
    u = np.asarray(u, dtype=np.complex128)
    unitary = _warn_if_not_unitary(u)
    ub = to_magic_basis(u)
    det_u = np.linalg.det(ub)  # equals det(u); better conditioned here
    m = ub.T @ ub
    tr_m = np.trace(m)
    g12 = tr_m**2 / (16.0 * det_u)
    g3 = (tr_m**2 - np.trace(m @ m)) / (4.0 * det_u)
    if unitary and abs(g3.imag) > 1e-9:
        raise ValueError(f"imaginary residue of g3 is {g3.imag:.2e} for a unitary gate")
    return LocalInvariants(float(g12.real), float(g12.imag), float(g3.real))


def weyl_coordinates(u):
    """Weyl chamber coordinates (c1, c2, c3) of a two-qubit gate, in radians.

    The coordinates are obtained from the eigenphases of
    ``m = U_B^T U_B`` (global phase removed via det U, phases sorted,
    branch fixed), then canonicalized into the Weyl chamber. Ties in
    degenerate phase clusters are broken by a stable sort.
    """
    u = np.asarray(u, dtype=np.complex128)
    ub = to_magic_basis(u)
    det_u = np.linalg.det(ub)
    m = ub.T @ ub
    ev = np.linalg.eigvals(m / np.sqrt(det_u))
    two_s = np.angle(ev) / np.pi
    two_s = np.where(two_s <= -0.5, two_s + 2.0, two_s)
    s = np.sort(two_s / 2.0, kind="stable")[::-1]
    n = int(round(np.sum(s)))
    s -= np.concatenate([np.ones(n), np.zeros(4 - n)])
    s = np.roll(s, -n)
    c1 = s[0] + s[1]
    c2 = s[0] + s[2]
    c3 = s[1] + s[2]
    if c3 < 0:
        c1 = 1.0 - c1
        c3 = -c3
    return WeylPoint(float(c1 * np.pi), float(c2 * np.pi), float(c3 * np.pi))


# Diagonal entries of (c1 XX + c2 YY + c3 ZZ)/2 in the magic basis, as
# coefficient rows over (c1, c2, c3).
_CANONICAL_PHASES = np.array(
    [
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [-1.0, -1.0, -1.0],
        [-1.0, 1.0, 1.0],
    ]
) * 0.5


def canonical_gate(c1, c2, c3):
    """Canonical gate ``exp[(i/2)(c1 XX + c2 YY + c3 ZZ)]``.

    XX, YY, ZZ commute pairwise and are simultaneously diagonal in the
    magic basis, so the exponential is a closed-form 4x4 construction.
    """
    phases = np.exp(1j * (_CANONICAL_PHASES @ np.array([c1, c2, c3])))
    return from_magic_basis(np.diag(phases))


def in_weyl_chamber(c1, c2, c3, slack=1e-12):
    """Membership in the canonical Weyl chamber region."""
    if c3 < -slack or c2 < c3 - slack:
        return False
    if c1 < np.pi / 2:
        return c2 <= c1 + slack
    return c2 <= np.pi - c1 + slack


def in_pe_polyhedron(c1, c2, c3, slack=1e-12):
    """Membership in the perfect-entangler polyhedron."""
    half_pi = 0.5 * np.pi
    return (
        c1 + c2 >= half_pi - slack
        and c1 - c2 <= half_pi + slack
        and c2 + c3 <= half_pi + slack
    )


def gate_concurrence(c1, c2, c3):
    """Gate concurrence from Weyl chamber coordinates.

    1 inside the perfect-entangler polyhedron; otherwise the maximum of
    ``|sin(c_i +/- c_j)|`` over the cyclic pairs (1,3), (2,1), (3,2).
    """
    if in_pe_polyhedron(c1, c2, c3):
        return 1.0
    c = np.array([c1, c2, c3])
    rolled = np.roll(c, 1)  # (c3, c1, c2)
    args = np.concatenate([c - rolled, c + rolled])
    return float(np.max(np.abs(np.sin(args))))


def concurrence(u):
    """Gate concurrence of a two-qubit gate matrix."""
    return gate_concurrence(*weyl_coordinates(u))


def d_pe(g1, g2, g3):
    """Algebraic distance toward the perfect-entangler polyhedron,
    ``g3 sqrt(g1^2 + g2^2) - g1`` (zero on the polyhedron boundary).

    Only meaningful as a distance on the origin side of the chamber;
    optimizer-facing code clamps at zero.
    """
    return float(g3 * np.sqrt(g1**2 + g2**2) - g1)


def d_pe_gate(u):
    """Perfect-entangler distance evaluated from a gate matrix."""
    return d_pe(*local_invariants(u))


def pop_loss(u):
    """Population lost from the logical subspace: ``1 - tr(U^dag U)/4``."""
    u = np.asarray(u, dtype=np.complex128)
    return float(1.0 - np.trace(u.conj().T @ u).real / u.shape[0])
