import numpy as np
import pytest

from perfid.errors import SingularMatrixError
from perfid.linalg import null_space, numerical_rank, singular_values, solve_linear


def _cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_solve_trivial():
    b = np.array([1 + 2j, 3, -1j])
    np.testing.assert_allclose(solve_linear(np.eye(3), b), b)
    np.testing.assert_allclose(solve_linear(np.diag([2.0, 4.0]), [2.0, 4.0]), [1, 1])


@pytest.mark.parametrize("seed", range(5))
def test_solve_planted(seed):
    rng = np.random.default_rng(seed)
    A = _cgauss(rng, 10, 10)
    x = _cgauss(rng, 10)
    got = solve_linear(A, A @ x)
    assert np.linalg.norm(got - x) <= 1e-10 * np.linalg.norm(x)
    b = _cgauss(rng, 10)
    assert np.linalg.norm(A @ solve_linear(A, b) - b) <= 1e-10 * np.linalg.norm(b)


def test_solve_singular():
    A = np.ones((3, 3))
    with pytest.raises(SingularMatrixError) as info:
        solve_linear(A, np.ones(3))
    assert info.value.condition > 1e14
    with pytest.raises(SingularMatrixError):
        solve_linear(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        solve_linear(np.ones((2, 3)), np.ones(2))


def test_rank_zero_matrix():
    Z = np.zeros((3, 5))
    assert numerical_rank(Z) == 0
    assert null_space(Z).shape == (5, 5)


def test_rank_one_outer(rng):
    A = np.outer(_cgauss(rng, 4), _cgauss(rng, 6))
    assert numerical_rank(A) == 1
    N = null_space(A)
    assert N.shape == (6, 5)
    np.testing.assert_allclose(N.conj().T @ N, np.eye(5), atol=1e-12)
    s1 = singular_values(A)[0]
    assert np.max(np.linalg.norm(A @ N, axis=0)) <= 1e-7 * s1


@pytest.mark.parametrize("seed", range(5))
def test_null_space_random(seed):
    rng = np.random.default_rng(seed)
    A = _cgauss(rng, 7, 4) @ _cgauss(rng, 4, 12)
    N = null_space(A)
    assert N.shape == (12, 8)
    np.testing.assert_allclose(N.conj().T @ N, np.eye(8), atol=1e-12)
    assert np.max(np.linalg.norm(A @ N, axis=0)) <= 10 * 1e-8 * singular_values(A)[0]


def test_rel_tol_validated():
    with pytest.raises(ValueError):
        numerical_rank(np.eye(2), rel_tol=0)
    with pytest.raises(ValueError):
        null_space(np.eye(2), rel_tol=1.5)
