import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from zalms.errors import DomainError
from zalms.linalg import ar1_correlation, matmul, outer, symmetrize, trace_of_product


def test_ar1_correlation_small():
    R = ar1_correlation(3, 0.6, 1.0)
    expected = np.array([[1.0, 0.6, 0.36], [0.6, 1.0, 0.6], [0.36, 0.6, 1.0]])
    np.testing.assert_allclose(R, expected, rtol=0, atol=1e-15)


def test_ar1_correlation_paper_input():
    R = ar1_correlation(17, 0.6, 0.64 / (1 - 0.36))
    assert R[0, 0] == pytest.approx(1.0)
    assert R[0, 16] == pytest.approx(0.6 ** 16)
    assert np.linalg.eigvalsh(R).min() > 0


@pytest.mark.parametrize("args", [(0, 0.5, 1.0), (3, 1.0, 1.0), (3, -1.2, 1.0), (3, 0.5, 0.0)])
def test_ar1_correlation_domain(args):
    with pytest.raises(DomainError):
        ar1_correlation(*args)


@given(st.integers(1, 12), st.floats(-0.95, 0.95), st.floats(0.01, 10))
def test_ar1_correlation_is_symmetric_toeplitz_psd(L, c, v):
    R = ar1_correlation(L, c, v)
    assert np.array_equal(R, R.T)
    assert np.all(np.diag(R) == v)
    assert np.linalg.eigvalsh(R).min() > -1e-12 * v


square = st.integers(1, 6).flatmap(
    lambda n: arrays(float, (n, n), elements=st.floats(-10, 10)))


@given(square)
def test_trace_of_product_matches_numpy(a):
    b = a[::-1].copy()
    assert trace_of_product(a, b) == pytest.approx(np.trace(a @ b), abs=1e-9)


@given(square)
def test_symmetrize(a):
    s = symmetrize(a)
    assert np.array_equal(s, s.T)
    np.testing.assert_allclose(s, (a + a.T) / 2)


def test_shape_checks():
    with pytest.raises(DomainError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(DomainError):
        trace_of_product(np.ones((2, 2)), np.ones((3, 3)))
    with pytest.raises(DomainError):
        symmetrize(np.ones((2, 3)))


def test_outer():
    np.testing.assert_array_equal(outer([1.0, 2.0], [3.0, 4.0]), [[3.0, 4.0], [6.0, 8.0]])
