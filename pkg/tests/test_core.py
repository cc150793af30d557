import numpy as np
import pytest
from scipy import sparse

from qoc.core import (
    ControlGenerator,
    Operator,
    TimeGrid,
    apply,
    apply_add,
    inner,
    make_time_grid,
)


def rand_sparse_complex(rng, n, density=0.4):
    mask = rng.random((n, n)) < density
    mat = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * mask
    return mat


class TestApply:
    def test_identity(self):
        op = Operator(np.eye(4))
        v = np.array([1, 2j, -3, 0.5], dtype=complex)
        assert np.array_equal(apply(op, v), v)

    def test_pauli_x(self):
        sx = Operator(np.array([[0, 1], [1, 0]], dtype=complex))
        out = apply(sx, np.array([1, 0], dtype=complex))
        assert np.allclose(out, [0, 1])

    def test_sparse_matches_dense_oracle(self):
        rng = np.random.default_rng(11)
        mat = rand_sparse_complex(rng, 8)
        op = Operator(sparse.csr_matrix(mat))
        v = rng.normal(size=8) + 1j * rng.normal(size=8)
        assert np.max(np.abs(apply(op, v) - mat @ v)) < 1e-14

    def test_apply_add_accumulates(self):
        rng = np.random.default_rng(5)
        mat = rand_sparse_complex(rng, 6)
        op = Operator(mat)
        v = rng.normal(size=6) + 1j * rng.normal(size=6)
        y = rng.normal(size=6) + 1j * rng.normal(size=6)
        out = apply_add(op, v, y.copy())
        assert np.max(np.abs(out - (y + mat @ v))) < 1e-14

    def test_dimension_mismatch(self):
        op = Operator(np.eye(3))
        with pytest.raises(Exception, match="dim"):
            apply(op, np.zeros(4, dtype=complex))

    def test_linearity(self):
        rng = np.random.default_rng(2)
        mat = rand_sparse_complex(rng, 7)
        op = Operator(mat)
        u = rng.normal(size=7) + 1j * rng.normal(size=7)
        v = rng.normal(size=7) + 1j * rng.normal(size=7)
        a, b = 0.3 - 1.1j, -2.0 + 0.7j
        lhs = apply(op, a * u + b * v)
        rhs = a * apply(op, u) + b * apply(op, v)
        assert np.max(np.abs(lhs - rhs)) < 1e-13


class TestOperator:
    def test_hermitian_validated(self):
        with pytest.raises(ValueError, match="hermitian"):
            Operator(np.array([[0, 1], [0, 0]], dtype=complex), hermitian=True)

    def test_hermitian_autodetect(self):
        assert Operator(np.array([[0, 1j], [-1j, 0]])).is_hermitian
        assert not Operator(np.array([[0, 1], [0, 0]], dtype=complex)).is_hermitian

    def test_large_dims_stored_sparse(self):
        op = Operator(np.eye(32))
        assert not op.is_dense
        assert Operator(np.eye(8)).is_dense

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError, match="square"):
            Operator(np.zeros((3, 4)))


class TestInner:
    def test_normalization(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        v /= np.linalg.norm(v)
        assert abs(inner(v, v) - 1.0) < 1e-15

    def test_orthogonality(self):
        assert inner(np.array([1, 0], dtype=complex),
                     np.array([0, 1], dtype=complex)) == 0

    def test_matches_summation_oracle(self):
        rng = np.random.default_rng(9)
        a = rng.normal(size=12) + 1j * rng.normal(size=12)
        b = rng.normal(size=12) + 1j * rng.normal(size=12)
        oracle = sum(np.conj(x) * y for x, y in zip(a, b))
        scale = np.linalg.norm(a) * np.linalg.norm(b)
        assert abs(inner(a, b) - oracle) < 1e-15 * scale

    def test_length_mismatch(self):
        with pytest.raises(Exception, match="length"):
            inner(np.zeros(3, dtype=complex), np.zeros(4, dtype=complex))

    def test_adjoint_identity(self):
        rng = np.random.default_rng(21)
        mat = rand_sparse_complex(rng, 6)
        op = Operator(mat)
        for _ in range(10):
            a = rng.normal(size=6) + 1j * rng.normal(size=6)
            b = rng.normal(size=6) + 1j * rng.normal(size=6)
            lhs = inner(a, apply(op, b))
            rhs = np.conj(inner(b, apply(op.adjoint(), a)))
            assert abs(lhs - rhs) < 1e-13


class TestTimeGrid:
    def test_paper_scale_grids(self):
        assert make_time_grid(100.0, 0.1).n_intervals == 1000
        assert make_time_grid(800.0, 0.1).n_intervals == 8000

    def test_small_grid_weights(self):
        grid = make_time_grid(1.0, 0.5)
        assert np.allclose(grid.points, [0, 0.5, 1.0])
        assert np.allclose(grid.delta_t, [0.5, 0.5, 0.5])

    def test_interval_sum_telescopes(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            points = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, 17))])
            grid = TimeGrid(points)
            T = grid.duration
            assert abs(np.sum(grid.dt) - T) < 1e-12 * T
            # point weights overcount the duration by the half edge steps
            expected = T + 0.5 * (grid.dt[0] + grid.dt[-1])
            assert abs(np.sum(grid.delta_t) - expected) < 1e-12 * T

    def test_interior_weights_are_midpoint_averages(self):
        points = np.array([0.0, 0.2, 0.5, 1.0, 1.1])
        grid = TimeGrid(points)
        assert np.allclose(grid.delta_t, [0.2, 0.25, 0.4, 0.3, 0.1])

    def test_non_divisible_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            make_time_grid(1.0, 0.3)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            make_time_grid(-1.0, 0.1)


class TestControlGenerator:
    def test_evaluate(self):
        rng = np.random.default_rng(8)
        h0 = rng.normal(size=(5, 5))
        h1 = rng.normal(size=(5, 5))
        h0 = h0 + h0.T
        h1 = h1 + h1.T
        gen = ControlGenerator(Operator(h0), [Operator(h1)])
        out = gen.evaluate([0.37]).to_dense()
        assert np.max(np.abs(out - (h0 + 0.37 * h1))) < 1e-14

    def test_sparse_evaluator_matches_dense(self):
        rng = np.random.default_rng(13)
        n = 24  # above the dense cutoff
        mats = []
        for _ in range(3):
            m = rand_sparse_complex(rng, n, density=0.15)
            mats.append(m + m.conj().T)
        gen = ControlGenerator(
            Operator(sparse.csr_matrix(mats[0])),
            [Operator(sparse.csr_matrix(m)) for m in mats[1:]],
        )
        eps = rng.normal(size=2)
        out = gen.evaluate(eps).to_dense()
        expected = mats[0] + eps[0] * mats[1] + eps[1] * mats[2]
        assert np.max(np.abs(out - expected)) < 1e-14

    def test_shape_validation(self):
        gen = ControlGenerator(Operator(np.eye(2)), [Operator(np.eye(2))])
        with pytest.raises(ValueError, match="shape"):
            gen.validate_controls(np.zeros((5, 2)), 5)
