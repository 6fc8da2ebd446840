import numpy as np
import pytest

from sldmotion.errors import DegeneracyError, EvaluationError, ShapeError
from sldmotion.numkit import (
    Rng,
    dct_basis,
    dct_forward,
    dct_inverse,
    gaussian,
    grad_check,
    matmul,
    orthonormalize,
    orthonormalize_backward,
    orthonormalize_fwd,
)


def naive_matmul(a, b):
    # independent triple-loop oracle
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            for l in range(k):
                out[i, j] += a[i, l] * b[l, j]
    return out


class TestMatmul:
    def test_identity(self):
        a = Rng(1).normal((3, 5))
        assert np.allclose(matmul(np.eye(3), a), a, atol=0)

    def test_hand_checked(self):
        out = matmul([[1.0, 2.0], [3.0, 4.0]], [[0.0], [1.0]])
        assert np.array_equal(out, [[2.0], [4.0]])

    def test_matches_triple_loop(self):
        rng = Rng(2)
        a, b = rng.normal((5, 4)), rng.normal((4, 3))
        assert np.max(np.abs(matmul(a, b) - naive_matmul(a, b))) < 1e-12

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    def test_batched(self):
        rng = Rng(3)
        a, b = rng.normal((4, 2, 3)), rng.normal((4, 3, 5))
        out = matmul(a, b)
        assert out.shape == (4, 2, 5)
        for i in range(4):
            assert np.allclose(out[i], naive_matmul(a[i], b[i]), atol=1e-12)

    def test_associativity(self):
        rng = Rng(4)
        for _ in range(10):
            a, b, c = rng.normal((3, 4)), rng.normal((4, 5)), rng.normal((5, 2))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            assert np.max(np.abs(left - right)) < 1e-9


class TestDctBasis:
    def test_orthonormality(self):
        b = dct_basis(4)
        assert np.max(np.abs(b.forward @ b.inverse - np.eye(4))) < 1e-12

    def test_constant_signal_concentrates_in_row_zero(self):
        b = dct_basis(4)
        coeffs = b.forward @ np.ones(4)
        assert abs(coeffs[0] - 2.0) < 1e-12
        assert np.max(np.abs(coeffs[1:])) < 1e-12

    def test_first_row_value(self):
        # sqrt(1/4) = 1/2 exactly for every column
        b = dct_basis(4)
        assert np.array_equal(b.forward[0], np.full(4, 0.5))

    def test_too_short(self):
        with pytest.raises(ValueError):
            dct_basis(1)

    @pytest.mark.parametrize("total", [24, 125])
    def test_round_trip(self, total):
        b = dct_basis(total)
        rng = Rng(10 + total)
        for _ in range(20):
            x = rng.normal((total,))
            back = b.inverse @ (b.forward @ x)
            assert np.max(np.abs(back - x)) < 1e-9

    def test_truncation_monotone_and_exact_on_bandlimited(self):
        total = 24
        b = dct_basis(total)
        rng = Rng(77)
        x = rng.normal((total,))
        errors = []
        for n in range(1, total + 1):
            approx = b.inverse[:, :n] @ (b.forward[:n] @ x)
            errors.append(float(np.linalg.norm(approx - x)))
        for lo, hi in zip(errors[1:], errors[:-1]):
            assert lo <= hi + 1e-12
        # a signal with only 5 frequency components reconstructs exactly at n=5
        coeffs = np.zeros(5)
        coeffs[:5] = rng.normal((5,))
        band = b.inverse[:, :5] @ coeffs
        back = b.inverse[:, :5] @ (b.forward[:5] @ band)
        assert np.max(np.abs(back - band)) < 1e-12

    def test_truncation_is_best_in_subspace(self):
        # the projection beats any other point of the retained-frequency span
        total, n = 16, 6
        b = dct_basis(total)
        rng = Rng(5)
        x = rng.normal((total,))
        proj = b.inverse[:, :n] @ (b.forward[:n] @ x)
        best = np.linalg.norm(x - proj)
        for _ in range(50):
            other = b.inverse[:, :n] @ rng.normal((n,))
            assert best <= np.linalg.norm(x - other) + 1e-12

    def test_multi_channel_helpers(self):
        b = dct_basis(12, retained=5)
        rng = Rng(6)
        frames = rng.normal((12, 3, 3))
        coeffs = dct_forward(b, frames)
        assert coeffs.shape == (5, 3, 3)
        full = dct_forward(b, frames, retained=12)
        assert np.max(np.abs(dct_inverse(b, full) - frames)) < 1e-9


class TestOrthonormalize:
    def test_fixed_point(self):
        basis = dct_basis(6).forward[:4]
        out = orthonormalize(basis)
        assert np.max(np.abs(out - basis)) < 1e-12

    def test_axis_scaling(self):
        out = orthonormalize(np.array([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0]]))
        assert np.allclose(out, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], atol=1e-15)

    def test_random_orthonormal_and_span_preserving(self):
        rng = Rng(8)
        d = rng.normal((4, 8))
        e = orthonormalize(d)
        assert np.max(np.abs(e @ e.T - np.eye(4))) < 1e-9
        # least-squares reconstruction oracle: every input row lies in the span
        for row in d:
            coeff, *_ = np.linalg.lstsq(e.T, row, rcond=None)
            assert np.linalg.norm(e.T @ coeff - row) < 1e-9

    def test_idempotent(self):
        rng = Rng(9)
        d = rng.normal((5, 9))
        once = orthonormalize(d)
        twice = orthonormalize(once)
        assert np.max(np.abs(twice - once)) < 1e-10

    def test_degenerate_rows_error_names_row(self):
        with pytest.raises(DegeneracyError, match="row 1"):
            orthonormalize(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))

    def test_rows_exceed_columns(self):
        with pytest.raises(ShapeError):
            orthonormalize(np.ones((4, 3)))

    def test_backward_matches_finite_differences(self):
        rng = Rng(12)
        d = rng.normal((4, 7))
        g0 = rng.normal((4, 7))

        def f(p):
            eff, cache = orthonormalize_fwd(p)
            return float(np.sum(eff * g0)), orthonormalize_backward(g0, cache)

        assert grad_check(f, d, 1e-5) < 1e-6


class TestGradCheck:
    def test_quadratic(self):
        def f(x):
            return 0.5 * float(np.sum(x * x)), x

        x = Rng(13).normal((6,))
        assert grad_check(f, x, 1e-5) < 1e-8

    def test_constant(self):
        def f(x):
            return 1.0, np.zeros_like(x)

        assert grad_check(f, np.ones(4), 1e-5) == 0.0

    def test_non_finite_probe(self):
        def f(x):
            return float(np.log(x[0])), np.array([1.0 / x[0]])

        with pytest.raises(EvaluationError):
            grad_check(f, np.array([1e-6]), 1e-2)

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            grad_check(lambda x: (0.0, np.zeros_like(x)), np.ones(2), 0.5)


class TestRng:
    def test_deterministic(self):
        a = gaussian(Rng(7), (100,))
        b = gaussian(Rng(7), (100,))
        assert np.array_equal(a, b)

    def test_moments(self):
        z = gaussian(Rng(7), (100000,))
        assert abs(float(z.mean())) < 0.02
        assert abs(float(z.var()) - 1.0) < 0.05

    def test_empty_shape(self):
        assert gaussian(Rng(1), (0,)).shape == (0,)

    def test_streams_continue(self):
        rng = Rng(5)
        first = rng.normal((10,))
        second = rng.normal((10,))
        assert not np.array_equal(first, second)
        # replaying the same call sequence reproduces both draws
        replay = Rng(5)
        assert np.array_equal(replay.normal((10,)), first)
        assert np.array_equal(replay.normal((10,)), second)

    def test_derive_independent(self):
        rng = Rng(5)
        a = rng.derive(0).normal((10,))
        b = rng.derive(1).normal((10,))
        assert not np.array_equal(a, b)
        assert np.array_equal(a, Rng(5).derive(0).normal((10,)))

    def test_uniform_range(self):
        u = Rng(3).uniform((1000,))
        assert np.all(u >= 0.0) and np.all(u < 1.0)

    def test_permutation(self):
        perm = Rng(4).permutation(20)
        assert sorted(perm.tolist()) == list(range(20))

    def test_state_round_trip(self):
        rng = Rng(9)
        rng.normal((7,))
        clone = Rng.from_state(rng.state())
        assert np.array_equal(rng.normal((5,)), clone.normal((5,)))
