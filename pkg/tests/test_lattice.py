import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stabsm.codes import builtin, stabilizer_matrix
from stabsm.lattice import (
    Torus,
    WrapAroundWarning,
    all_f2_vectors,
    code_parameters,
    in_rowspace_f2,
    independent_rows_f2,
    instantiate,
    instantiate_vector,
    inverse_f2,
    join_zx,
    kernel_f2,
    matmul_f2,
    rank_f2,
    rref_f2,
    solve_f2,
    split_zx,
    symplectic_product,
)
from stabsm.polyalg import PolyMatrix, parse_poly

bits = st.integers(2, 7).flatmap(
    lambda r: st.integers(2, 9).flatmap(lambda c: arrays(np.uint8, (r, c), elements=st.integers(0, 1)))
)


def test_cell_ordering_first_coordinate_most_significant():
    t = Torus((2, 3))
    assert t.cell_index((1, 2)) == 5
    assert t.cell_index((-1, 0)) == 3
    assert np.array_equal(t.coords[4], [1, 1])
    assert np.array_equal(t.shifted_cells((0, 1))[:3], [1, 2, 0])


def test_torus_rejects_tiny_sizes():
    with pytest.raises(ValueError):
        Torus((1, 3))


@given(bits)
def test_rank_nullity(M):
    ker = kernel_f2(M)
    assert rank_f2(M) + ker.shape[0] == M.shape[1]
    if ker.size:
        assert not matmul_f2(M, ker.T).any()
        R, piv = rref_f2(ker)
        assert np.array_equal(R, ker)


@given(bits, st.data())
def test_solve_consistent_systems(M, data):
    v = data.draw(arrays(np.uint8, M.shape[1], elements=st.integers(0, 1)))
    b = matmul_f2(M, v)
    x = solve_f2(M, b)
    assert x is not None and np.array_equal(matmul_f2(M, x), b)


def test_solve_inconsistent():
    assert solve_f2(np.array([[1, 1], [1, 1]]), np.array([0, 1])) is None


@given(bits)
def test_independent_rows_span_rowspace(M):
    idx = independent_rows_f2(M)
    assert len(idx) == rank_f2(M)
    for row in M:
        assert in_rowspace_f2(M[idx], row) if idx else not row.any()


def test_inverse_roundtrip():
    A = np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=np.uint8)
    assert np.array_equal(matmul_f2(A, inverse_f2(A)), np.eye(3, dtype=np.uint8))
    with pytest.raises(np.linalg.LinAlgError):
        inverse_f2(np.ones((2, 2), dtype=np.uint8))


def test_all_f2_vectors_bit_order():
    v = all_f2_vectors(3)
    assert v.shape == (8, 3)
    assert list(v[6]) == [0, 1, 1]


def test_split_join_roundtrip():
    rng = np.random.default_rng(1)
    v = rng.integers(0, 2, size=(4, 24)).astype(np.uint8)
    z, x = split_zx(v, 3)
    assert np.array_equal(join_zx(z, x, 3), v)


def test_instantiate_matches_vector_placement():
    code = builtin("toric2d")
    t = code.torus(3)
    M = instantiate(code.S, t)
    for cell in (0, 4, 8):
        col = instantiate_vector(code.S.column(1), t, offset=t.coords[cell])
        assert np.array_equal(M[:, cell * code.m + 1], col)


def test_wraparound_warning_on_small_torus():
    S = PolyMatrix.from_columns([[parse_poly("1 + x^2", 1), parse_poly("0", 1)]], 1)
    with pytest.warns(WrapAroundWarning):
        instantiate(S, Torus((2,)))


@pytest.mark.parametrize("name, L", [("toric2d", 3), ("toric3d", 2), ("xcube", 2), ("cblt", 2)])
def test_instantiated_stabilizers_commute(name, L):
    code = builtin(name)
    S = stabilizer_matrix(code, code.torus(L))
    assert not symplectic_product(S, S, code.l).any()


def test_code_parameters_toric2d():
    code = builtin("toric2d")
    par = code_parameters(code, code.torus(3))
    assert (par.N, par.N_s, par.N_c, par.logical_count) == (18, 18, 2, 2)
