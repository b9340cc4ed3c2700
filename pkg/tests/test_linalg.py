import numpy as np
import pytest
import scipy.sparse as sp

from multirate_st.linalg import BlockLayout, LUSolver, SingularSystemError, kron, lu_solve


def test_kron_identity_is_block_diagonal():
    B = sp.random(4, 3, density=0.5, random_state=0, format="csr")
    K = kron(np.eye(2), B).toarray()
    np.testing.assert_array_equal(K, np.block([[B.toarray(), np.zeros((4, 3))], [np.zeros((4, 3)), B.toarray()]]))


def test_kron_jump_block_and_shape():
    Mp = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    K = kron([[1, 0], [-1, 1]], Mp).toarray()
    np.testing.assert_array_equal(K[2:, :2], -Mp.toarray())
    assert kron(np.ones((2, 3)), sp.eye(5)).shape == (10, 15)


def test_kron_mixed_product():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 2))
    B = sp.random(5, 4, density=0.6, random_state=1)
    x, y = rng.standard_normal(2), rng.standard_normal(4)
    np.testing.assert_allclose(kron(A, B) @ np.kron(x, y), np.kron(A @ x, B @ y), atol=1e-12)


def test_lu_examples():
    b = np.arange(1.0, 6.0)
    np.testing.assert_array_equal(lu_solve(sp.eye(5), b), b)
    np.testing.assert_allclose(lu_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0])), [1, 1])


def test_lu_random_spd_residual():
    rng = np.random.default_rng(3)
    Q = rng.standard_normal((50, 50))
    A = sp.csr_matrix(Q @ Q.T + 50 * np.eye(50))
    b = rng.standard_normal(50)
    solver = LUSolver(A)
    x = solver.solve(b)
    glob, comp = solver.residual(x, b)
    assert glob < 1e-10 and comp < 1e-10


def test_lu_badly_scaled_rows():
    # rows of wildly different size, like elasticity against storage terms
    A = sp.csr_matrix(np.array([[1e12, 1e3, 0.0], [1e3, 1e-6, 1e-9], [0.0, 1e-9, 1e-8]]))
    b = A @ np.array([1e-3, 2.0, -1.0])
    solver = LUSolver(A)
    x = solver.solve(b)
    # every row, including the tiny ones, is satisfied to rounding
    assert solver.residual(x, b)[1] < 1e-14


def test_singular_and_non_square():
    with pytest.raises(SingularSystemError, match="zero row"):
        LUSolver(sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]])), "slab 7")
    with pytest.raises(SingularSystemError):
        LUSolver(sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), "slab 3").solve(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        LUSolver(sp.csr_matrix(np.ones((2, 3))))


def test_block_layout():
    lay = BlockLayout((("u", 2, 3), ("p", 4, 5)))
    assert lay.size == 26 and lay.offsets == {"u": 0, "p": 6}
    assert lay.index("p", 1, 2) == 6 + 5 + 2
    parts = lay.split(np.arange(26.0))
    assert parts["u"].shape == (2, 3) and parts["p"][0, 0] == 6.0
    with pytest.raises(IndexError):
        lay.index("u", 2, 0)
