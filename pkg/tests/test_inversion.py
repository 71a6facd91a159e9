from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabinv.inversion import (
    APPROXIMATE,
    EXACT_STABLE,
    EXACT_UNSTABLE,
    allpass_factor,
    approx_inverse_allpass,
    certify_inverse,
    check_conditions,
    common_denominator,
    exact_right_inverse,
    rhp_zero_factor,
)
from stabinv.lti import pseudo_inverse
from stabinv.polymat import RatMatrix, column
from stabinv.ratcore import RatFn, S

from strategies import stable_polys, stable_proper


def test_common_denominator_ex1(ex1):
    expect = (S + 1) ** 2 * (S + Fraction(1, 2)) * (S + 2) * (S + 3)
    assert common_denominator(ex1) == expect


def test_conditions_member_of_image(ex1):
    Y = ex1 @ column([RatFn(1, S + 1), RatFn(1, S + 2)])
    rep = check_conditions(ex1, Y)
    assert rep.membership_ok
    # the oracle decides interpolation: Y(1) evaluated directly
    vanishes = np.abs(Y(1.0)).max() < 1e-9
    assert rep.interpolation_ok == vanishes
    assert rep.classification == (EXACT_STABLE if vanishes else EXACT_UNSTABLE)


def test_conditions_ex2_not_member(ex2):
    from stabinv.plants import ex2_desired

    rep = check_conditions(ex2, ex2_desired())
    assert not rep.membership_ok and rep.classification == APPROXIMATE


def test_conditions_zero_output(ex1):
    rep = certify_inverse(ex1, RatMatrix.zeros(2, 1))
    assert rep.membership_ok and rep.interpolation_ok and rep.classification == EXACT_STABLE
    assert rep.U.is_zero() and rep.certificate == []


def test_conditions_dimension_mismatch(ex1):
    with pytest.raises(ValueError):
        check_conditions(ex1, RatMatrix.zeros(3, 1))


def test_right_inverse_diagonal():
    P = RatMatrix.diag([RatFn(1, S + 1), RatFn(1, S + 2)])
    assert exact_right_inverse(P) == RatMatrix.diag([RatFn(S + 1), RatFn(S + 2)])


def test_right_inverse_tall_matches_pseudo_inverse_on_image(ex2):
    Xi = exact_right_inverse(ex2)
    Pd = pseudo_inverse(ex2)
    for c in (RatFn(1, S + 1), RatFn(S, S**2 + 2 * S + 5)):
        Y = ex2 @ RatMatrix([[c]])
        assert Xi @ Y == Pd @ Y == RatMatrix([[c]])


def test_right_inverse_rank_one_projector():
    P = column([RatFn(1, S + 1), RatFn(2, S + 1)]) @ RatMatrix([[1, 1]])
    Xi = exact_right_inverse(P)
    assert P @ Xi @ P == P


def test_right_inverse_kappa_is_annihilated():
    P = RatMatrix([[RatFn(1, S + 1), RatFn(1, S + 2)]])
    kappa = column([RatFn(1, S + 3), RatFn(5)])
    assert P @ exact_right_inverse(P, kappa) == RatMatrix.eye(1)
    with pytest.raises(ValueError):
        exact_right_inverse(P, RatMatrix.zeros(1, 2))


def test_right_inverse_rank_zero():
    with pytest.raises(ValueError):
        exact_right_inverse(RatMatrix.zeros(2, 2))


def test_necessity_witness(ex1):
    Y = column([RatFn(1, S + 1), RatFn(0)])
    rep = certify_inverse(ex1, Y)
    assert rep.classification == EXACT_UNSTABLE
    assert any(abs(p - 1) < 1e-9 for p in rep.certificate)
    assert not rep.certificate_stable
    assert ex1 @ rep.U == Y


def test_classification_follows_interpolation_not_certificate(ex1):
    # Y = P c with stable c has U = c, although Y(1) != 0
    c = column([RatFn(1, S + 1), RatFn(1, S + 2)])
    rep = certify_inverse(ex1, ex1 @ c)
    assert rep.U == c and rep.certificate_stable
    assert rep.classification == EXACT_UNSTABLE and rep.failed_order == 0


def test_interpolating_output_is_stable(ex1):
    # multiplying by (s-1)/(s+1) makes Y vanish at the RHP zero
    Y = ex1 @ column([RatFn(1, S + 1), RatFn(1, S + 2)]) * RatFn(S - 1, S + 4)
    rep = certify_inverse(ex1, Y)
    assert rep.classification == EXACT_STABLE and rep.certificate_stable
    assert ex1 @ rep.U == Y


def test_rhp_zero_factor(ex1, ex1_pi):
    assert rhp_zero_factor(ex1) == S - 1
    assert rhp_zero_factor(ex1_pi) == S - Fraction(1, 5)


@pytest.mark.parametrize(
    "zeros, expect",
    [
        ([1.0], RatFn(S - 1, S + 1)),
        ([0.2], RatFn(S - Fraction(1, 5), S + Fraction(1, 5))),
        ([1 + 1j, 1 - 1j], RatFn(S**2 - 2 * S + 2, S**2 + 2 * S + 2)),
    ],
)
def test_allpass_examples(zeros, expect):
    ap = allpass_factor(zeros)
    assert ap.ratio == expect
    assert ap.max_deviation() < 1e-12
    assert ap.normalized(0) == pytest.approx(1.0)


def test_allpass_imaginary_axis_rejected():
    with pytest.raises(ValueError):
        allpass_factor([1j, -1j])


def test_approx_allpass_minimum_phase_is_exact():
    P = RatMatrix.diag([RatFn(1, S + 1), RatFn(1, S + 2)])
    Xa, ap = approx_inverse_allpass(P)
    assert ap.ratio == RatFn(1) and Xa == exact_right_inverse(P)


def test_approx_allpass_ex2(ex2):
    Xa, ap = approx_inverse_allpass(ex2, normalize_dc=False)
    assert all(p.value.real < 0 for p in Xa.poles())
    assert ex2 @ Xa @ ex2 == ex2 * ap.ratio


def test_approx_allpass_scalar_magnitude():
    P = RatMatrix([[RatFn(1 - S, (S + 1) ** 2)]])
    Xa, ap = approx_inverse_allpass(P)
    assert Xa[0, 0] == RatFn(S + 1)
    assert (P @ Xa)[0, 0] == RatFn(1 - S, 1 + S)
    w = np.logspace(-3, 3, 200)
    assert np.allclose([abs((P @ Xa)[0, 0](1j * x)) for x in w], 1.0, atol=1e-12)


@st.composite
def minimum_phase_plants(draw):
    n = draw(st.integers(1, 3))
    diag = []
    for _ in range(n):
        num = draw(stable_polys(max_degree=1))
        den = draw(stable_polys(max_degree=2)) * (S + 1)
        diag.append(RatFn(num, den))
    P = RatMatrix.diag(diag)
    if n > 1:
        # a constant unimodular mixing keeps the zeros unchanged
        k = Fraction(draw(st.integers(-3, 3)), 2)
        T = RatMatrix([[1 if i == j else (k if (i, j) == (0, 1) else 0) for j in range(n)] for i in range(n)])
        P = T @ P
    return P


@settings(max_examples=40)
@given(minimum_phase_plants(), st.data())
def test_soundness_minimum_phase(P, data):
    c = column([data.draw(stable_proper()) for _ in range(P.cols)])
    Y = P @ c
    rep = certify_inverse(P, Y)
    assert rep.classification == EXACT_STABLE
    assert P @ rep.U == Y
    assert rep.certificate_stable


@settings(max_examples=25)
@given(st.data())
def test_necessity_generic_output(data):
    z = Fraction(data.draw(st.integers(1, 6)), 2)
    P = RatMatrix([[RatFn(S - z, (S + 1) * (S + 3))]])
    c = data.draw(stable_proper())
    # P c vanishes at z; a generic stable term breaks the interpolation
    Yg = P @ RatMatrix([[c]]) + RatMatrix([[RatFn(1, S + 2)]])
    rep = certify_inverse(P, Yg)
    assert rep.classification == EXACT_UNSTABLE
    assert any(abs(p - float(z)) < 1e-9 for p in rep.certificate)
