from fractions import Fraction

from hypothesis import given
from hypothesis import strategies as st

from stabinv.polymat import PolyMatrix, RatMatrix, clear_denominators, column, membership_im, rank_rs, smith_form
from stabinv.ratcore import Poly, RatFn, S

from strategies import polys, stable_proper


def test_clear_denominators_scalar():
    Pp, _, d = clear_denominators(RatMatrix([[RatFn(1, S + 1)]]))
    assert d == S + 1 and Pp == PolyMatrix([[Poly([1])]])


def test_clear_denominators_ex1(ex1):
    _, _, d = clear_denominators(ex1)
    assert d == (S + 1) ** 2 * (S + Fraction(1, 2)) * (S + 2) * (S + 3)


def test_clear_denominators_polynomial_input():
    P = RatMatrix([[S, 1], [2, S**2]])
    Pp, Y, d = clear_denominators(P, column([RatFn(1, S)]))
    assert d == Poly([1]) and Pp.to_rat() == P
    assert Y == column([RatFn(1, S)])


def test_smith_already_diagonal():
    P = PolyMatrix.diag([S, S * (S + 1)])
    dec = smith_form(P)
    assert list(dec.invariant_factors) == [S, S * (S + 1)]
    assert dec.U_R == PolyMatrix.eye(2) and dec.V_R == PolyMatrix.eye(2)
    assert dec.check(P)


def test_smith_coprime_diagonal():
    P = PolyMatrix.diag([S, S + 1])
    dec = smith_form(P)
    assert list(dec.invariant_factors) == [Poly([1]), S * (S + 1)]
    assert dec.check(P)


def test_smith_rank_one():
    P = PolyMatrix([[S, S], [S, S]])
    dec = smith_form(P)
    assert dec.rank == 1 and list(dec.invariant_factors) == [S]
    assert dec.check(P)


def test_rank_examples(ex1):
    assert rank_rs(ex1) == (2, (0, 1))
    assert rank_rs(RatMatrix([[S, 2 * S], [1, 2]])) == (1, (0,))
    assert rank_rs(RatMatrix.zeros(2, 3)) == (0, ())


def test_membership_examples(ex1, ex2):
    c = column([RatFn(1, S + 2), RatFn()])
    assert membership_im(ex1, ex1 @ c)
    Yd = column([RatFn(2, S**2 + 1) + RatFn(8, S), RatFn(1, S)])
    assert not membership_im(ex2, Yd)
    assert membership_im(ex2, RatMatrix.zeros(2, 1))


def test_ratmatrix_json_roundtrip(ex1):
    assert RatMatrix.from_json(ex1.to_json()) == ex1


@st.composite
def poly_matrices(draw, max_dim=3, max_degree=2):
    r = draw(st.integers(1, max_dim))
    c = draw(st.integers(1, max_dim))
    return PolyMatrix([[draw(polys(max_degree)) for _ in range(c)] for _ in range(r)])


@given(poly_matrices())
def test_smith_certificates(P):
    if P.is_zero():
        return
    dec = smith_form(P)
    assert dec.check(P)
    assert (dec.U_R @ dec.S_m @ dec.V_R) == P
    assert dec.U_R.det().degree == 0 and dec.V_R.det().degree == 0
    for a, b in zip(dec.invariant_factors, dec.invariant_factors[1:]):
        assert (b % a).is_zero()


@given(poly_matrices())
def test_rank_matches_invariant_factor_count(P):
    if P.is_zero():
        assert rank_rs(P.to_rat())[0] == 0
        return
    assert rank_rs(P.to_rat())[0] == smith_form(P).rank


@given(st.lists(stable_proper(), min_size=4, max_size=4), st.lists(stable_proper(), min_size=2, max_size=2))
def test_membership_soundness(entries, c):
    P = RatMatrix([entries[:2], entries[2:]])
    assert membership_im(P, P @ column(c))
