import numpy as np
import pytest

from qoc.core import ControlGenerator, Operator, make_time_grid
from qoc.propagator import (
    SpectralBounds,
    SpectralRangeError,
    cheby_coeffs,
    cheby_step,
    ode_step,
    propagate,
    spectral_bounds,
)


def rand_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def expm_oracle(h, dt):
    """Dense matrix exponential by eigendecomposition (Hermitian h)."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def single_op_generator(mat):
    return ControlGenerator(Operator(mat), [])


class TestSpectralBounds:
    def test_diagonal(self):
        gen = single_op_generator(np.diag([0.0, 1.0, 2.0]))
        b = spectral_bounds(gen, np.zeros((1, 0)), margin=0.0)
        assert b.e_min <= 0.0 and b.e_max >= 2.0
        assert b.e_min == 0.0 and b.e_max == 2.0

    def test_pauli_x(self):
        gen = single_op_generator(np.array([[0, 1], [1, 0]], dtype=complex))
        b = spectral_bounds(gen, np.zeros((1, 0)), margin=0.0)
        assert b.e_min == -1.0 and b.e_max == 1.0

    def test_brackets_dense_eigensolve(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            h0 = rand_hermitian(rng, 32)
            h1 = rand_hermitian(rng, 32)
            gen = ControlGenerator(Operator(h0), [Operator(h1)])
            eps = rng.normal(scale=0.7, size=(6, 1))
            b = spectral_bounds(gen, eps, margin=0.0)
            for row in eps:
                w = np.linalg.eigvalsh(h0 + row[0] * h1)
                assert w.min() >= b.e_min - 1e-12
                assert w.max() <= b.e_max + 1e-12

    def test_non_hermitian_rejected(self):
        gen = single_op_generator(np.array([[0, 1], [0, 0]], dtype=complex))
        with pytest.raises(ValueError, match="ODE"):
            spectral_bounds(gen, np.zeros((1, 0)))


class TestChebyCoeffs:
    def test_zero_step_limit(self):
        c = cheby_coeffs(SpectralBounds(-1.0, 1.0), 1e-12)
        assert abs(c.coeffs[0]) == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.abs(c.coeffs[1:]) < 1e-10)

    def test_scalar_exponential_reconstruction(self):
        # z = half_range * dt = 10
        bounds = SpectralBounds(-4.0, 16.0)
        dt = 1.0
        c = cheby_coeffs(bounds, dt)
        xs = np.linspace(bounds.e_min, bounds.e_max, 1000)
        xn = (xs - c.e_avg) / c.half_range
        acc = np.zeros_like(xs, dtype=complex)
        t_prev = np.ones_like(xn)
        t_cur = xn.copy()
        acc += c.coeffs[0] * t_prev
        acc += c.coeffs[1] * (-1j) * t_cur
        for m in range(2, c.order):
            t_prev, t_cur = t_cur, 2 * xn * t_cur - t_prev
            acc += c.coeffs[m] * (-1j) ** m * t_cur
        assert np.max(np.abs(acc - np.exp(-1j * xs * dt))) < 1e-13

    def test_truncation_criterion(self):
        c = cheby_coeffs(SpectralBounds(-5.0, 5.0), 1.0)
        mags = np.abs(c.coeffs)
        assert mags[-1] < 1e-14 * mags.max()

    def test_order_grows_linearly(self):
        orders = []
        for half in (20.0, 40.0, 80.0):
            c = cheby_coeffs(SpectralBounds(-half, half), 1.0)
            m = np.abs(c.coeffs)
            orders.append(np.max(np.nonzero(m > 1e-15 * m.max())[0]))
        r1 = orders[1] / orders[0]
        r2 = orders[2] / orders[1]
        assert 1.4 < r1 < 2.6 and 1.4 < r2 < 2.6

    def test_unreachable_tolerance(self):
        with pytest.raises(ValueError, match="1e-16"):
            cheby_coeffs(SpectralBounds(-1, 1), 1.0, tol=1e-18)

    def test_zero_dt_rejected(self):
        with pytest.raises(ValueError, match="dt"):
            cheby_coeffs(SpectralBounds(-1, 1), 0.0)


class TestChebyStep:
    def test_zero_hamiltonian(self):
        op = Operator(np.zeros((3, 3)))
        v = np.array([1, 2j, -1], dtype=complex)
        c = cheby_coeffs(SpectralBounds(0.0, 0.0), 0.7)
        assert np.max(np.abs(cheby_step(op, v, c) - v)) < 1e-15

    def test_eigenstate_phase(self):
        rng = np.random.default_rng(10)
        h = rand_hermitian(rng, 6)
        w, vecs = np.linalg.eigh(h)
        op = Operator(h)
        c = cheby_coeffs(SpectralBounds(w.min(), w.max()), 0.43)
        out = cheby_step(op, vecs[:, 2].astype(complex), c)
        expected = np.exp(-1j * w[2] * 0.43) * vecs[:, 2]
        assert np.max(np.abs(out - expected)) < 1e-13

    def test_matches_expm_oracle(self):
        rng = np.random.default_rng(12)
        h = rand_hermitian(rng, 16)
        v = rng.normal(size=16) + 1j * rng.normal(size=16)
        w = np.linalg.eigvalsh(h)
        c = cheby_coeffs(SpectralBounds(w.min(), w.max()), 0.3)
        out = cheby_step(Operator(h), v, c)
        assert np.max(np.abs(out - expm_oracle(h, 0.3) @ v)) < 1e-12

    def test_fifty_random_problems(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            n = rng.integers(2, 65)
            h = rand_hermitian(rng, n)
            v = rng.normal(size=n) + 1j * rng.normal(size=n)
            v /= np.linalg.norm(v)
            dt = rng.uniform(-0.5, 0.5) or 0.1
            w = np.linalg.eigvalsh(h)
            c = cheby_coeffs(SpectralBounds(w.min(), w.max()), dt)
            out = cheby_step(Operator(h), v, c)
            assert np.max(np.abs(out - expm_oracle(h, dt) @ v)) < 1e-12

    def test_norm_preserved(self):
        rng = np.random.default_rng(1)
        h = rand_hermitian(rng, 10)
        v = rng.normal(size=10) + 1j * rng.normal(size=10)
        w = np.linalg.eigvalsh(h)
        c = cheby_coeffs(SpectralBounds(w.min(), w.max()), 0.5)
        out = cheby_step(Operator(h), v, c)
        assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-12

    def test_margin_insensitivity(self):
        rng = np.random.default_rng(6)
        h = rand_hermitian(rng, 12)
        v = rng.normal(size=12) + 1j * rng.normal(size=12)
        w = np.linalg.eigvalsh(h)
        outs = []
        for pad in (0.0, 0.5, 2.0):
            c = cheby_coeffs(SpectralBounds(w.min() - pad, w.max() + pad), 0.4)
            outs.append(cheby_step(Operator(h), v, c))
        assert np.max(np.abs(outs[0] - outs[1])) < 1e-12
        assert np.max(np.abs(outs[0] - outs[2])) < 1e-12

    def test_violated_range_diverges(self):
        rng = np.random.default_rng(14)
        h = rand_hermitian(rng, 8) * 10.0
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        c = cheby_coeffs(SpectralBounds(-0.5, 0.5), 2.0)
        with pytest.raises(SpectralRangeError, match="margin"):
            cheby_step(Operator(h), v, c)


class TestOdeStep:
    def test_zero_hamiltonian(self):
        op = Operator(np.zeros((2, 2)))
        v = np.array([0.6, 0.8j])
        out = ode_step(op, v, 1.0)
        assert np.max(np.abs(out - v)) < 1e-10

    def test_matches_cheby_on_hermitian(self):
        rng = np.random.default_rng(15)
        h = rand_hermitian(rng, 8)
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        v /= np.linalg.norm(v)
        w = np.linalg.eigvalsh(h)
        c = cheby_coeffs(SpectralBounds(w.min(), w.max()), 0.4)
        tol = 1e-10
        out_ode = ode_step(Operator(h), v, 0.4, tol=tol)
        out_cheby = cheby_step(Operator(h), v, c)
        assert np.max(np.abs(out_ode - out_cheby)) < 10 * tol

    def test_decay_generator(self):
        gamma = 1.0
        h = np.diag([0.0, -1j * gamma])  # dv/dt = -i H v => amplitude decay
        op = Operator(h)
        v = np.array([0.0, 1.0], dtype=complex)
        out = ode_step(op, v, 1.0, tol=1e-12)
        assert abs(out[1] - np.exp(-1.0)) < 1e-10


class TestPropagate:
    def _random_problem(self, rng, n=6, n_t=8, n_l=2):
        h0 = rand_hermitian(rng, n)
        ops = [rand_hermitian(rng, n) for _ in range(n_l)]
        gen = ControlGenerator(Operator(h0), [Operator(o) for o in ops])
        grid = make_time_grid(0.8, 0.1)
        eps = rng.normal(scale=0.4, size=(grid.n_intervals, n_l))
        v0 = rng.normal(size=n) + 1j * rng.normal(size=n)
        v0 /= np.linalg.norm(v0)
        return gen, grid, eps, v0

    def test_single_step_equals_cheby(self):
        rng = np.random.default_rng(20)
        h = rand_hermitian(rng, 5)
        gen = single_op_generator(h)
        grid = make_time_grid(0.3, 0.3)
        v0 = rng.normal(size=5) + 1j * rng.normal(size=5)
        out = propagate(gen, np.zeros((1, 0)), grid, v0)
        assert np.max(np.abs(out - expm_oracle(h, 0.3) @ v0)) < 1e-12

    def test_forward_backward_roundtrip(self):
        rng = np.random.default_rng(22)
        gen, grid, eps, v0 = self._random_problem(rng)
        fwd = propagate(gen, eps, grid, v0, "forward")
        back = propagate(gen, eps, grid, fwd, "backward")
        assert np.max(np.abs(back - v0)) < 1e-11

    def test_stored_trajectory_length(self):
        rng = np.random.default_rng(23)
        gen, grid, eps, v0 = self._random_problem(rng)
        traj = propagate(gen, eps, grid, v0, store=True)
        assert len(traj) == grid.n_intervals + 1
        assert np.array_equal(traj[0], v0)

    def test_backward_is_adjoint_of_forward(self):
        # <backward(w), v> == <w, forward(v)>
        rng = np.random.default_rng(24)
        gen, grid, eps, v0 = self._random_problem(rng)
        w = rng.normal(size=6) + 1j * rng.normal(size=6)
        fwd = propagate(gen, eps, grid, v0)
        bwd = propagate(gen, eps, grid, w, "backward")
        assert abs(np.vdot(w, fwd) - np.vdot(bwd, v0)) < 1e-12

    def test_unitarity_over_thousand_steps(self):
        rng = np.random.default_rng(25)
        h0 = rand_hermitian(rng, 6)
        h1 = rand_hermitian(rng, 6)
        gen = ControlGenerator(Operator(h0), [Operator(h1)])
        grid = make_time_grid(100.0, 0.1)
        eps = 0.3 * np.sin(np.linspace(0, 6 * np.pi, grid.n_intervals))[:, None]
        v0 = rng.normal(size=6) + 1j * rng.normal(size=6)
        v0 /= np.linalg.norm(v0)
        out = propagate(gen, eps, grid, v0)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-11

    def test_ode_path_agrees_with_cheby(self):
        rng = np.random.default_rng(26)
        gen, grid, eps, v0 = self._random_problem(rng)
        out_c = propagate(gen, eps, grid, v0, method="cheby")
        out_o = propagate(gen, eps, grid, v0, method="ode", tol=1e-12)
        assert np.max(np.abs(out_c - out_o)) < 1e-9

    def test_interval_reported_on_error(self):
        gen = single_op_generator(np.diag([0.0, 50.0]))
        grid = make_time_grid(1.0, 0.5)

        from qoc.propagator import PropagationError

        v0 = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
        bad = ControlGenerator(Operator(np.diag([0.0, 50.0])), [])
        # sabotage: force coefficients for a much smaller range
        from qoc import propagator as P

        orig = P.spectral_bounds
        P.spectral_bounds = lambda *a, **k: SpectralBounds(-0.1, 0.1)
        try:
            with pytest.raises(PropagationError, match="interval"):
                propagate(bad, np.zeros((2, 0)), grid, v0)
        finally:
            P.spectral_bounds = orig
