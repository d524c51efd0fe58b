import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabsm.codes import builtin
from stabsm.polyalg import (
    LaurentPoly,
    PolyMatrix,
    antipode,
    commute_check,
    excitation_map,
    format_poly,
    lambda_matrix,
    parse_poly,
    pauli_vector,
)

D = 3


@st.composite
def polys(draw, d=D):
    terms = draw(st.lists(st.tuples(*[st.integers(-3, 3)] * d), max_size=6))
    return LaurentPoly.from_terms(terms, d)


@given(polys(), polys(), polys())
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + a).is_zero()
    assert a * LaurentPoly.one(D) == a


@given(polys(), polys())
def test_antipode_is_an_involutive_ring_map(a, b):
    assert antipode(antipode(a)) == a
    assert antipode(a * b) == antipode(a) * antipode(b)
    assert antipode(a + b) == antipode(a) + antipode(b)


@given(polys())
def test_text_roundtrip(a):
    assert parse_poly(format_poly(a), D) == a


def test_parse_examples():
    p = parse_poly("1 + x^-1*y + z^2", 3)
    assert p.terms == {(0, 0, 0), (-1, 1, 0), (0, 0, 2)}
    assert parse_poly("x + x", 3).is_zero()
    assert parse_poly("0", 2).is_zero()
    with pytest.raises(ValueError):
        parse_poly("w", 2)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        LaurentPoly.one(2) + LaurentPoly.one(3)


def test_shift_is_monomial_product():
    a = parse_poly("1 + x", 2)
    assert a.shift((0, 1)) == a * parse_poly("y", 2)


def test_lambda_squares_to_identity():
    lam = lambda_matrix(2, 2)
    sq = lam @ lam
    for i in range(4):
        for j in range(4):
            assert sq[i, j] == (LaurentPoly.one(2) if i == j else LaurentPoly.zero(2))


@pytest.mark.parametrize("name", ["toric2d", "toric3d", "xcube", "cblt"])
def test_builtin_codes_commute(name):
    code = builtin(name)
    assert commute_check(code.S)
    assert (excitation_map(code.S) @ code.S).is_zero()


def test_anticommuting_pair_detected():
    # Z and X on the same single qubit per cell
    S = PolyMatrix.from_columns([["1", "0"], ["0", "1"]], 1)
    assert not commute_check(S)


def test_pauli_vector_layout():
    v = pauli_vector(["1 + x"], ["0"], 1)
    assert len(v) == 2 and v[1].is_zero() and len(v[0]) == 2


def test_toric3d_excitation_map_against_hand_listing():
    # Listed with the vertex row first and acting on (X | Z) ordered vectors,
    # which is S^dagger with rows permuted; the third row's last nonzero
    # entry comes out as 1 + x^-1 from the formula.
    S = builtin("toric3d").S
    hand = PolyMatrix.from_rows(
        [
            ["0", "0", "0", "1 + x", "1 + y", "1 + z"],
            ["1 + y^-1", "1 + x^-1", "0", "0", "0", "0"],
            ["1 + z^-1", "0", "1 + x^-1", "0", "0", "0"],
            ["0", "1 + z^-1", "1 + y^-1", "0", "0", "0"],
        ],
        3,
    )
    E = excitation_map(S) @ lambda_matrix(3, 3)
    for r, t in enumerate([3, 0, 1, 2]):
        for j in range(6):
            assert E[t, j] == hand[r, j]
