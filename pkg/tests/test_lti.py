from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from stabinv.lti import (
    StateSpace,
    balanced_reduce,
    freq_response,
    hinf_norm,
    internal_stability,
    invariant_zeros,
    is_stable,
    minreal,
    pseudo_inverse,
    realize,
    ss_to_tfm,
    zero_polynomial,
)
from stabinv.polymat import RatMatrix, column
from stabinv.ratcore import Poly, RatFn, S

from strategies import stable_proper, stable_strictly_proper


def _markov(f: RatFn, K: int) -> list:
    """h_0..h_K of f = sum h_k s^-k by long division of num * s^K."""
    q = (f.num * Poly.monomial(K)) // f.den
    c = list(q.coeffs) + [Fraction(0)] * (K + 1 - len(q.coeffs))
    return [c[K - k] for k in range(K + 1)]


def _hankel_rank(M: RatMatrix, blocks: int = 8) -> int:
    h = [[_markov(M[i, j], 2 * blocks) for j in range(M.cols)] for i in range(M.rows)]
    H = np.block(
        [[np.array([[float(h[i][j][a + b + 1]) for j in range(M.cols)] for i in range(M.rows)]) for b in range(blocks)]
         for a in range(blocks)]
    )
    return int(np.linalg.matrix_rank(H, tol=1e-9 * np.abs(H).max()))


def test_realize_first_order():
    Sy = realize(RatMatrix([[RatFn(1, S + 1)]]))
    assert (Sy.A, Sy.B, Sy.C, Sy.D) == (np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[0.0]]))


def test_realize_ex1_is_minimal(ex1):
    Sy = realize(ex1)
    assert Sy.n == _hankel_rank(ex1)
    assert Sy.n == 5
    ctrb = np.hstack([np.linalg.matrix_power(Sy.A, k) @ Sy.B for k in range(Sy.n)])
    obsv = np.vstack([Sy.C @ np.linalg.matrix_power(Sy.A, k) for k in range(Sy.n)])
    assert np.linalg.matrix_rank(ctrb) == Sy.n == np.linalg.matrix_rank(obsv)


def test_realize_constant():
    Sy = realize(RatMatrix([[2]]))
    assert Sy.n == 0 and Sy.D[0, 0] == 2


def test_realize_rejects_improper():
    with pytest.raises(ValueError):
        realize(RatMatrix([[S]]))


def test_ss_to_tfm_examples(ex2):
    assert ss_to_tfm(StateSpace([[-1]], [[1]], [[1]], [[0]])) == RatMatrix([[RatFn(1, S + 1)]])
    assert ss_to_tfm(realize(ex2)) == ex2
    assert ss_to_tfm(StateSpace.gain([[3, 4]])) == RatMatrix([[3, 4]])


def test_ss_to_tfm_of_float_model_is_exact_for_stored_values():
    Sy = StateSpace([[-0.5]], [[1]], [[0.3]], [[0]])
    assert ss_to_tfm(Sy)[0, 0] == RatFn(Fraction(0.3), S + Fraction(1, 2))


def test_zeros_ex1(ex1):
    zs = invariant_zeros(ex1)
    assert [z.z for z in zs.rhp] == pytest.approx([1.0])
    assert zero_polynomial(ex1) == S**3 + Fraction(33, 20) * S**2 - Fraction(6, 5) * S - Fraction(29, 20)


def test_zeros_perturbed(ex1_pi):
    zs = invariant_zeros(ex1_pi)
    assert len(zs.rhp) == 1 and abs(zs.rhp[0].z - 0.2) < 1e-9


def test_zeros_ex2(ex2):
    zs = invariant_zeros(realize(ex2))
    assert len(zs.all) == 1 and abs(zs.all[0].z - 10) < 1e-6


def test_zero_directions_annihilate(ex1):
    for z in invariant_zeros(ex1).all:
        Pz = ex1(z.z)
        assert np.linalg.norm(Pz @ z.u_z) < 1e-6 * np.linalg.norm(Pz)
        assert np.linalg.norm(z.y_z.conj() @ Pz) < 1e-6 * np.linalg.norm(Pz)
        assert abs(np.linalg.norm(z.u_z) - 1) < 1e-12


def test_pseudo_inverse_ex2(ex2):
    d = S**3 - 74 * S - 260
    assert pseudo_inverse(ex2) == RatMatrix([[RatFn(S**3 + 8 * S**2 + 17 * S + 10, d), RatFn(S**2 + 3 * S + 2, d)]])


def test_pseudo_inverse_square_and_constant(ex1):
    assert pseudo_inverse(ex1) == ex1.inv()
    assert pseudo_inverse(RatMatrix([[1], [1]])) == RatMatrix([[Fraction(1, 2), Fraction(1, 2)]])


def test_pseudo_inverse_rank_deficient():
    with pytest.raises(ValueError):
        pseudo_inverse(RatMatrix([[1, 1], [1, 1]]))


def test_stability_examples():
    assert is_stable(StateSpace([[-1]], [[1]], [[1]], [[0]]))
    assert not is_stable(StateSpace([[0.0]], [[1]], [[1]], [[0]]))
    assert not internal_stability(RatMatrix([[RatFn(1, S - 1)]]), StateSpace.gain([[0.0]]))
    assert internal_stability(RatMatrix([[RatFn(1, S - 1)]]), StateSpace.gain([[2.0]]))


def test_hinf_norm_examples():
    assert hinf_norm(realize(RatMatrix([[RatFn(1, S + 1)]]))) == pytest.approx(1.0, rel=1e-9)
    assert hinf_norm(realize(RatMatrix([[RatFn(1 - S, 1 + S)]]))) == pytest.approx(1.0, rel=1e-9)
    G = realize(RatMatrix([[RatFn(5, S + 1)]]))
    grid = freq_response(G, np.logspace(-4, 3, 2000)).max()
    assert abs(hinf_norm(G) - grid) < 1e-4 * grid


def test_hinf_norm_resonant_peak_beats_grid():
    G = realize(RatMatrix([[RatFn(1, S**2 + Fraction(1, 50) * S + 1)]]))
    n, w = hinf_norm(G, return_freq=True)
    grid = freq_response(G, np.linspace(0.9, 1.1, 4001)).max()
    assert grid <= n * (1 + 1e-9) and n <= grid * (1 + 1e-3)
    assert abs(w - 1) < 1e-2


def test_hinf_norm_rejects_unstable():
    with pytest.raises(ValueError):
        hinf_norm(StateSpace([[1.0]], [[1]], [[1]], [[0]]))


def test_balanced_reduce_examples(ex1):
    G = realize(ex1)
    red, hsv, bound = balanced_reduce(G, tol=0.0)
    assert red.n == G.n and bound == 0
    w = np.logspace(-2, 2, 50)
    assert np.allclose(freq_response(red, w), freq_response(G, w), atol=1e-9)
    dup = StateSpace(np.diag([-1.0, -1.0]), [[1], [1]], [[1, 1]], [[0]])
    assert balanced_reduce(dup, tol=1e-9)[0].n == 1


def test_balanced_reduce_respects_hankel_bound():
    G = realize(RatMatrix([[RatFn(1, S + 1) + RatFn(Fraction(1, 100), S + 10) + RatFn(Fraction(1, 1000), S + 30)]]))
    red, hsv, bound = balanced_reduce(G, order=1)
    err = hinf_norm(minreal(_diff(G, red)))
    assert err <= bound * (1 + 1e-6)


def _diff(a, b):
    from stabinv.lti import parallel

    return parallel(a, b, -1.0)


@st.composite
def proper_matrices(draw):
    r, c = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    return RatMatrix([[draw(stable_proper()) for _ in range(c)] for _ in range(r)])


@given(proper_matrices())
def test_realization_roundtrip(M):
    assert ss_to_tfm(realize(M)) == M


@given(st.lists(stable_strictly_proper(), min_size=4, max_size=4), st.integers(0, 2**31))
def test_zeros_invariant_under_similarity(entries, seed):
    M = RatMatrix([entries[:2], entries[2:]]) + RatMatrix([[1, 0], [0, 1]])
    G = realize(M)
    T = np.random.default_rng(seed).normal(size=(G.n, G.n)) + 3 * np.eye(G.n)
    z1 = np.asarray(invariant_zeros(G).values)
    z2 = np.asarray(invariant_zeros(G.transform(T)).values)
    assert len(z1) == len(z2)
    gap = np.abs(z1[:, None] - z2[None, :]).min(axis=1) if len(z1) else np.zeros(0)
    assert np.all(gap < 1e-6 * np.maximum(1.0, np.abs(z1)))


@given(st.lists(stable_strictly_proper(), min_size=2, max_size=2), stable_proper())
def test_pseudo_inverse_identities(col, c):
    assume(any(not f.is_zero() for f in col))
    P = column(col)
    Pd = pseudo_inverse(P)
    assert Pd @ P == RatMatrix.eye(1)
    Y = P @ RatMatrix([[c]])
    assert P @ Pd @ Y == Y


@given(st.lists(stable_strictly_proper(), min_size=1, max_size=3))
def test_hinf_norm_upper_bounds_grid(entries):
    G = realize(column(entries))
    n = hinf_norm(G)
    grid = freq_response(G, np.logspace(-3, 3, 400)).max()
    assert grid <= n * (1 + 1e-9)


def test_zero_coinciding_with_pole():
    M = RatMatrix.diag([RatFn(S + 1, (S + 2) * (S + 3)), RatFn(1, (S + 1) * (S + 4))])
    zs = invariant_zeros(M)
    z = next(q for q in zs.all if abs(q.z + 1) < 1e-6)
    assert abs(np.linalg.norm(z.u_z) - 1) < 1e-12 and abs(np.linalg.norm(z.y_z) - 1) < 1e-12
    assert abs(z.u_z[0]) > 0.99
