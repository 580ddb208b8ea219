import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conetest.errors import CsvFormatError, DegenerateInputError
from conetest.estimators import (
    CovEstimate,
    DataMatrix,
    as_cov,
    diagonal_covariance,
    gram_matrix,
    pooled_covariance,
    sample_covariance,
    sample_mean,
)


def test_sample_mean_examples():
    assert np.array_equal(sample_mean(np.array([[1.0, 2.0], [3.0, 4.0]])), [2.0, 3.0])
    assert np.array_equal(sample_mean(np.zeros((2, 2))), [0.0, 0.0])
    assert np.array_equal(sample_mean(np.array([[1.0], [2.0], [6.0]])), [3.0])


def test_sample_covariance_examples():
    cov = sample_covariance(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.allclose(cov.matrix, [[1.0, 1.0], [1.0, 1.0]], atol=0)
    same_rows = np.tile([2.0, -1.0, 3.0], (4, 1))
    assert np.array_equal(sample_covariance(same_rows).matrix, np.zeros((3, 3)))


def test_sample_covariance_row_accumulation_oracle():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((5, 3))
    m = x.mean(axis=0)
    acc = np.zeros((3, 3))
    for row in x:
        acc += np.outer(row - m, row - m)
    acc /= 5
    assert np.allclose(sample_covariance(x).matrix, acc, atol=1e-12)


def test_diagonal_covariance():
    d = diagonal_covariance(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(d.matrix, np.eye(2))
    assert d.structure == "diagonal"
    rng = np.random.default_rng(12)
    x = rng.standard_normal((6, 4))
    full = sample_covariance(x)
    assert np.array_equal(np.diag(diagonal_covariance(x).matrix), np.diag(full.matrix))
    assert np.count_nonzero(diagonal_covariance(x).matrix - np.diag(np.diag(full.matrix))) == 0


def test_zero_variance_column_flagged():
    x = np.column_stack([np.ones(5), np.arange(5.0)])
    assert sample_covariance(x).zero_variance_columns == (0,)
    assert diagonal_covariance(x).zero_variance_columns == (0,)


def test_pooled_covariance():
    pooled = pooled_covariance(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(pooled.matrix, np.eye(2))
    assert pooled.structure == "pooled"
    assert np.array_equal(pooled_covariance(np.tile([1.0, 2.0], (3, 1))).matrix, np.zeros((2, 2)))
    rng = np.random.default_rng(13)
    x = rng.standard_normal((5, 3))
    expected = np.trace(sample_covariance(x).matrix) / 3
    assert np.allclose(pooled_covariance(x).matrix, expected * np.eye(3), atol=1e-14)


def test_gram_matrix_examples():
    assert np.array_equal(gram_matrix(np.array([[1.0, 2.0], [3.0, 4.0]])), [[5.0, 7.0], [7.0, 10.0]])
    assert np.array_equal(gram_matrix(np.eye(2)), np.eye(2) / 2)


def test_gram_identity():
    rng = np.random.default_rng(14)
    for _ in range(20):
        n = rng.integers(2, 12)
        p = rng.integers(1, 6)
        x = rng.standard_normal((n, p)) * rng.uniform(0.1, 5)
        m = sample_mean(x)
        lhs = gram_matrix(x) - np.outer(m, m)
        assert np.max(np.abs(lhs - sample_covariance(x).matrix)) <= 1e-10


def test_row_permutation_invariance():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((8, 3))
    perm = rng.permutation(8)
    a = sample_covariance(x).matrix
    b = sample_covariance(x[perm]).matrix
    assert np.allclose(a, b, atol=1e-12)


def test_bit_identical_reproducibility():
    rng = np.random.default_rng(16)
    x = rng.standard_normal((7, 4))
    assert np.array_equal(sample_covariance(x).matrix, sample_covariance(x.copy()).matrix)
    assert np.array_equal(gram_matrix(x), gram_matrix(x.copy()))


@given(st.integers(min_value=2, max_value=10), st.integers(min_value=1, max_value=5),
       st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_gram_identity_property(n, p, seed):
    x = np.random.default_rng(seed).standard_normal((n, p))
    m = sample_mean(x)
    assert np.max(np.abs(gram_matrix(x) - np.outer(m, m) - sample_covariance(x).matrix)) <= 1e-10


def test_data_matrix_validation():
    with pytest.raises(DegenerateInputError):
        DataMatrix(np.ones((1, 3)))
    with pytest.raises(DegenerateInputError):
        DataMatrix(np.array([[np.nan, 1.0], [2.0, 3.0]]))
    with pytest.raises(DegenerateInputError):
        DataMatrix(np.ones(4))


def test_cov_estimate_validation():
    with pytest.raises(DegenerateInputError):
        CovEstimate(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DegenerateInputError):
        CovEstimate(np.array([[1.0, 0.1], [0.1, 1.0]]), structure="diagonal")
    est = as_cov(np.diag([1.0, 2.0]))
    assert est.structure == "diagonal"
    assert as_cov(np.array([[1.0, 0.2], [0.2, 1.0]])).structure == "full"


def test_csv_loading(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,b\n1.0,2.0\n3.5,-4.25\n")
    data = DataMatrix.from_csv(path, header=True)
    assert data.n == 2 and data.p == 2
    assert np.array_equal(data.values, [[1.0, 2.0], [3.5, -4.25]])

    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0\n3.0,oops\n")
    with pytest.raises(CsvFormatError, match="row 2, column 2"):
        DataMatrix.from_csv(bad)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(CsvFormatError, match="ragged"):
        DataMatrix.from_csv(ragged)
