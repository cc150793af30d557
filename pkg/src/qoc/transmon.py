"""Two-transmon benchmark system: effective Hamiltonian in the rotating
frame, logical basis, guess pulses, and the entangling target gate.

Two anharmonic oscillators with a static qubit-qubit coupling, driven by
one shared complex microwave field split into two real controls (the
real and imaginary quadratures). All frequencies are stored in angular
units (rad/ns); constructors take the lab-frame GHz/MHz values.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import DENSE_CUTOFF, ControlGenerator, Operator
from .gates import SQRT_ISWAP

__all__ = [
    "TransmonParams",
    "default_transmon_params",
    "build_transmon",
    "logical_basis",
    "logical_projector",
    "forbidden_levels_projector",
    "pulse_envelope",
    "guess_pulse",
    "target_gate_sqrt_iswap",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TransmonParams:
    """System parameters in angular units (rad/ns).

    ``w1``, ``w2``: qubit frequencies; ``wd``: drive/rotating-frame
    frequency; ``alpha1``, ``alpha2``: anharmonicities; ``coupling``:
    effective qubit-qubit coupling; ``lam``: relative drive coupling of
    the second transmon; ``n_levels``: oscillator truncation (>= 2).
    """

    w1: float
    w2: float
    wd: float
    alpha1: float
    alpha2: float
    coupling: float
    lam: float
    n_levels: int

    def __post_init__(self):
        if self.n_levels < 2:
            raise ValueError("need at least two levels per transmon")
        for name in ("w1", "w2", "wd", "alpha1", "alpha2", "coupling", "lam"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} is not finite")

    @classmethod
    def from_ghz(cls, w1, w2, wd, alpha1_mhz, alpha2_mhz, coupling_mhz, lam,
                 n_levels):
        """Build from the conventional units: qubit/drive frequencies in
        GHz, anharmonicities and coupling in MHz (all as plain numbers,
        converted to angular rad/ns here, at one boundary)."""
        return cls(
            w1=TWO_PI * w1,
            w2=TWO_PI * w2,
            wd=TWO_PI * wd,
            alpha1=TWO_PI * alpha1_mhz * 1e-3,
            alpha2=TWO_PI * alpha2_mhz * 1e-3,
            coupling=TWO_PI * coupling_mhz * 1e-3,
            lam=lam,
            n_levels=n_levels,
        )


def default_transmon_params(n_levels=5):
    """Reference parameter set for two coupled transmons with a shared
    drive line (w1 = 4.380 GHz, w2 = 4.614 GHz, wd = 4.498 GHz,
    alpha1 = 210 MHz, alpha2 = 215 MHz, J = -3 MHz, lambda = 1.03)."""
    return TransmonParams.from_ghz(
        w1=4.380, w2=4.614, wd=4.498,
        alpha1_mhz=210.0, alpha2_mhz=215.0,
        coupling_mhz=-3.0, lam=1.03,
        n_levels=n_levels,
    )


def _lowering(n):
    """Single-oscillator lowering operator, b |n> = sqrt(n) |n-1>."""
    return sparse.diags(np.sqrt(np.arange(1, n)), 1, format="csr")


def build_transmon(params):
    """Drift and the two quadrature control operators.

    ``H0 = sum_q [(w_q - wd + alpha_q/2) n_q - (alpha_q/2) n_q^2]
    + J (b1^dag b2 + b1 b2^dag)`` on the ``n_levels^2`` product space
    (left transmon major), with
    ``H_re = [(b1^dag + b1) + lam (b2^dag + b2)] / 2`` and
    ``H_im = i [(b1^dag - b1) + lam (b2^dag - b2)] / 2``.
    """
    nq = params.n_levels
    b = _lowering(nq)
    bd = b.conj().T.tocsr()
    eye = sparse.identity(nq, format="csr", dtype=np.complex128)
    num = sparse.diags(np.arange(nq, dtype=float), 0, format="csr")
    # (b^dag b)^2 built by squaring the diagonal number operator exactly
    num2 = sparse.diags(np.arange(nq, dtype=float) ** 2, 0, format="csr")

    def one(q, op):
        return sparse.kron(op, eye, "csr") if q == 1 else sparse.kron(eye, op, "csr")

    h0 = (
        (params.w1 - params.wd + 0.5 * params.alpha1) * one(1, num)
        - 0.5 * params.alpha1 * one(1, num2)
        + (params.w2 - params.wd + 0.5 * params.alpha2) * one(2, num)
        - 0.5 * params.alpha2 * one(2, num2)
        + params.coupling
        * (sparse.kron(bd, b, "csr") + sparse.kron(b, bd, "csr"))
    )
    h_re = 0.5 * (one(1, bd + b) + params.lam * one(2, bd + b))
    h_im = 0.5j * (one(1, bd - b) + params.lam * one(2, bd - b))
    return ControlGenerator(
        Operator(h0, hermitian=True),
        [Operator(h_re, hermitian=True), Operator(h_im, hermitian=True)],
    )


def logical_basis(n_levels):
    """|00>, |01>, |10>, |11> as canonical vectors in the product space
    (left transmon major: index = n1 * n_levels + n2)."""
    if n_levels < 2:
        raise ValueError("need at least two levels per transmon")
    dim = n_levels**2
    states = []
    for n1, n2 in ((0, 0), (0, 1), (1, 0), (1, 1)):
        v = np.zeros(dim, dtype=np.complex128)
        v[n1 * n_levels + n2] = 1.0
        states.append(v)
    return states


def logical_projector(n_levels):
    """Projector onto the 4-dimensional logical subspace."""
    dim = n_levels**2
    diag = np.zeros(dim)
    for n1, n2 in ((0, 0), (0, 1), (1, 0), (1, 1)):
        diag[n1 * n_levels + n2] = 1.0
    return Operator(np.diag(diag) if dim <= DENSE_CUTOFF
                    else sparse.diags(diag, 0, format="csr"), hermitian=True)


def forbidden_levels_projector(n_levels, min_level):
    """Projector onto product states with any transmon at or above
    ``min_level`` (the 'forbidden' high-excitation subspace)."""
    if not 0 < min_level < n_levels:
        raise ValueError("min_level must lie strictly inside the level range")
    dim = n_levels**2
    diag = np.zeros(dim)
    for n1 in range(n_levels):
        for n2 in range(n_levels):
            if n1 >= min_level or n2 >= min_level:
                diag[n1 * n_levels + n2] = 1.0
    return Operator(np.diag(diag) if dim <= DENSE_CUTOFF
                    else sparse.diags(diag, 0, format="csr"), hermitian=True)


def pulse_envelope(shape, x):
    """Unit-amplitude envelope on the scaled time x = t/T in [0, 1].

    Shapes: 'blackman' (smooth window, zero at both ends), 'flattop'
    (sine-squared ramps over the first and last 10%), 'const'.
    """
    x = np.asarray(x, dtype=float)
    if shape == "blackman":
        return 0.42 - 0.5 * np.cos(TWO_PI * x) + 0.08 * np.cos(2 * TWO_PI * x)
    if shape == "flattop":
        ramp = 0.1
        env = np.ones_like(x)
        up = x < ramp
        down = x > 1.0 - ramp
        env[up] = np.sin(0.5 * np.pi * x[up] / ramp) ** 2
        env[down] = np.sin(0.5 * np.pi * (1.0 - x[down]) / ramp) ** 2
        return env
    if shape == "const":
        return np.ones_like(x)
    raise ValueError(f"unknown pulse shape {shape!r}")


def guess_pulse(shape, amplitude, grid):
    """Guess envelope sampled at interval midpoints (one control column
    of length N_T)."""
    if not np.isfinite(amplitude):
        raise ValueError("amplitude must be finite")
    return amplitude * pulse_envelope(shape, grid.midpoints() / grid.duration)


def target_gate_sqrt_iswap():
    """The sqrt(iSWAP) target gate (central block mixes |01> and |10>
    with amplitude 1/sqrt(2) and phase i)."""
    return SQRT_ISWAP.copy()
