import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degenfem.sparsela import CsrMatrix, NonConvergence, NonFiniteValue, pcg, solve_spd, spmv


def dense_product(a, x):
    n = len(x)
    y = [0.0] * n
    for i in range(n):
        for j in range(n):
            y[i] += a[i][j] * x[j]
    return np.array(y)


def test_identity_spmv(rng):
    x = rng.standard_normal(6)
    assert np.array_equal(spmv(CsrMatrix.identity(6), x), x)


def test_small_spmv():
    m = CsrMatrix.from_dense([[2, 1], [1, 2]])
    assert np.array_equal(m @ np.array([1.0, 1.0]), [3.0, 3.0])


def test_spmv_matches_dense_oracle(rng):
    a = rng.standard_normal((5, 5))
    a = a + a.T
    x = rng.standard_normal(5)
    np.testing.assert_allclose(spmv(CsrMatrix.from_dense(a), x), dense_product(a, x), rtol=0, atol=1e-15 * 10)


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        spmv(CsrMatrix.identity(3), np.ones(4))


def test_from_triplets_sums_duplicates_order_independently(rng):
    rows = rng.integers(0, 4, 60)
    cols = rng.integers(0, 4, 60)
    vals = rng.standard_normal(60)
    a = CsrMatrix.from_triplets(4, rows, cols, vals)
    perm = rng.permutation(60)
    b = CsrMatrix.from_triplets(4, rows[perm], cols[perm], vals[perm])
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.col_idx, b.col_idx)
    dense = np.zeros((4, 4))
    np.add.at(dense, (rows, cols), vals)
    np.testing.assert_allclose(a.to_dense(), dense, atol=1e-14)


def test_csr_validation():
    with pytest.raises(ValueError):
        CsrMatrix(2, [0, 2, 1], [0, 1, 0], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        CsrMatrix(2, [0, 2, 2], [1, 0], [1.0, 1.0])
    with pytest.raises(ValueError):
        CsrMatrix(2, [0, 1, 2], [0, 2], [1.0, 1.0])


def test_add_and_scale():
    a = CsrMatrix.from_dense([[1.0, 0], [0, 0]])
    b = CsrMatrix.from_dense([[2.0, -1], [-1, 2]])
    np.testing.assert_array_equal((a + b.scaled(0.5)).to_dense(), [[2.0, -0.5], [-0.5, 1.0]])


def test_zero_rhs_zero_iterations():
    x, it, res = pcg(CsrMatrix.from_dense([[2.0, 1], [1, 2]]), np.zeros(2))
    assert it == 0 and np.array_equal(x, np.zeros(2))


def test_diagonal_solve():
    x = solve_spd(CsrMatrix.from_dense(np.diag([2.0, 4.0])), np.array([2.0, 8.0]))
    np.testing.assert_allclose(x, [1.0, 2.0], rtol=1e-14)


def test_nonconvergence_reports_residual(rng):
    n = 40
    a = rng.standard_normal((n, n))
    a = a @ a.T + 1e-3 * np.eye(n)
    with pytest.raises(NonConvergence) as exc:
        solve_spd(CsrMatrix.from_dense(a), rng.standard_normal(n), rtol=1e-12, max_iter=2)
    assert exc.value.residual > 0


def test_indefinite_breakdown():
    with pytest.raises(NonFiniteValue):
        solve_spd(CsrMatrix.from_dense([[1.0, 3.0], [3.0, 1.0]]), np.array([1.0, -1.0]))


def test_nan_rhs():
    with pytest.raises(NonFiniteValue):
        solve_spd(CsrMatrix.identity(2), np.array([np.nan, 1.0]))


def test_deterministic(rng):
    a = rng.standard_normal((30, 30))
    m = CsrMatrix.from_dense(a @ a.T + np.eye(30))
    b = rng.standard_normal(30)
    assert np.array_equal(solve_spd(m, b), solve_spd(m, b))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 25), seed=st.integers(0, 2 ** 32 - 1))
def test_cg_residual_contract(n, seed):
    r = np.random.default_rng(seed)
    q = r.standard_normal((n, n))
    a = q @ q.T + n * np.diag(r.uniform(0.1, 10, n))
    b = r.standard_normal(n)
    m = CsrMatrix.from_dense(a)
    x = solve_spd(m, b, rtol=1e-10)
    assert np.linalg.norm(a @ x - b) <= 1e-10 * np.linalg.norm(b) * 1.0001
