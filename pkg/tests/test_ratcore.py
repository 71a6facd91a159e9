from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabinv.ratcore import PoleError, Poly, RatFn, S, poly_arith, poly_gcd, poly_lcm, poly_roots, ratfn_eval

from strategies import polys


def test_expansion_and_divmod():
    assert poly_arith(S + 1, S + 2, "mul") == S**2 + 3 * S + 2
    q, r = poly_arith(S**2 + 3 * S + 2, S + 1, "divmod")
    assert q == S + 2 and r.is_zero()


def test_square_expansion_inside_pseudo_inverse_denominator():
    lhs = S**4 - 10 * S**3 - 75 * S**2 + 500 * S + 2500
    assert (S**2 - 5 * S - 50) ** 2 == lhs


def test_divmod_by_zero_raises():
    with pytest.raises(ZeroDivisionError):
        poly_arith(S, Poly(), "divmod")


def test_gcd_examples():
    assert poly_gcd(S**2 - 1, S - 1) == S - 1
    assert poly_gcd(S + 1, S + 2) == Poly([1])
    a = S**4 - 10 * S**3 - 74 * S**2 + 480 * S + 2600
    assert poly_gcd(a, S**2 - 5 * S - 50) == S - 10


def test_lcm_is_monic_multiple():
    l = poly_lcm(2 * (S + 1) ** 2, S**2 - 1)
    assert l.is_monic()
    assert (l % (S + 1) ** 2).is_zero() and (l % (S - 1)).is_zero()
    assert l.degree == 3


def test_roots_simple_and_complex():
    r = sorted(z.value.real for z in poly_roots(S**2 + 3 * S + 2))
    assert np.allclose(r, [-2, -1])
    roots = poly_roots(S**3 - 74 * S - 260)
    vals = sorted((z.value for z in roots), key=lambda z: (z.real, z.imag))
    assert np.allclose(vals, [-5 - 1j, -5 + 1j, 10], atol=1e-10)


def test_repeated_root_multiplicity():
    roots = poly_roots((S - 1) ** 2)
    assert len(roots) == 1 and roots[0].mult == 2
    assert abs(roots[0].value - 1) < 1e-12


def test_roots_of_constant_rejected():
    with pytest.raises(ValueError):
        poly_roots(Poly([3]))


def test_eval_examples():
    assert abs(ratfn_eval(RatFn(1 - S, (S + 1) ** 2), 1.0)) == 0
    assert ratfn_eval(RatFn(S + 5, S + 2), 0.0) == pytest.approx(2.5)
    f = RatFn(S**2 + 3 * S + 2, S**3 - 74 * S - 260)
    assert ratfn_eval(f, 0.0) == pytest.approx(-2 / 260)


def test_eval_at_pole_raises():
    with pytest.raises(PoleError):
        ratfn_eval(RatFn(1, S + 1), -1.0)


def test_json_format_ascending_rational_strings():
    assert (S**2 + 3 * S + 2).to_json() == ["2", "3", "1"]
    f = RatFn(Fraction(3, 10), S + Fraction(1, 2))
    assert RatFn.from_json(f.to_json()) == f
    assert f.to_json() == {"num": ["3/10"], "den": ["1/2", "1"]}


def test_float_ingestion_is_exact_binary_value():
    p = Poly([0.1])
    assert p.coeffs[0] == Fraction(0.1)


def test_reduction_and_monic_denominator():
    f = RatFn(2 * (S + 1) * (S + 3), 4 * (S + 1) * (S + 2))
    assert f.den == S + 2 and f.num == Fraction(1, 2) * (S + 3)


@given(polys(4), polys(4))
def test_exact_add_sub_roundtrip(a, b):
    assert (a + b) - b == a


@given(polys(3), polys(3, nonzero=True))
def test_divmod_identity(a, b):
    q, r = divmod(a, b)
    assert q * b + r == a
    assert r.is_zero() or r.degree < b.degree


@given(polys(3), polys(3, nonzero=True), polys(2), polys(2, nonzero=True))
def test_ratfn_ops_stay_reduced(n1, d1, n2, d2):
    f = RatFn(n1, d1) * RatFn(n2, d2) + RatFn(n2, d1)
    assert f.den.is_monic()
    if not f.num.is_zero():
        assert poly_gcd(f.num, f.den).degree == 0


@given(st.lists(st.floats(-8, 8), min_size=1, max_size=8))
def test_roots_roundtrip(roots):
    roots = sorted(roots)
    if any(b - a < 0.5 for a, b in zip(roots, roots[1:])):
        return
    p = Poly.from_roots([Fraction(r).limit_denominator(1000) for r in roots])
    rebuilt = np.poly([z.value for z in poly_roots(p) for _ in range(z.mult)])[::-1]
    ref = np.array([float(c) for c in p.monic().coeffs])
    assert np.max(np.abs(rebuilt.real - ref)) < 1e-8 * max(1.0, np.max(np.abs(ref)))


@given(polys(6, nonzero=True))
def test_roots_come_in_conjugate_pairs(p):
    if p.degree < 1:
        return
    vals = [z.value for z in poly_roots(p) for _ in range(z.mult)]
    for v in vals:
        if v.imag != 0:
            assert any(w == v.conjugate() for w in vals)
