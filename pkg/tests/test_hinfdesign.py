from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabinv.hinfdesign import (
    PerfWeight,
    approx_inverse_sik,
    approx_inverse_tp,
    _missing_zero_factor,
    augment_plant,
    hinf_synthesize,
    noise_floor_bands,
    purify_integrators,
    scalar_pick,
    sensitivities,
    synthesize_mixed,
)
from stabinv.lti import StateSpace, freq_response, internal_stability, invariant_zeros, lft, realize
from stabinv.plants import EX1_WEIGHT, ex1_inverse, ex2_inverse
from stabinv.polymat import RatMatrix
from stabinv.ratcore import Poly, RatFn, S

FIRST = RatMatrix([[RatFn(1, S + 1)]])


def test_weight_transfer_function():
    W = PerfWeight.uniform(1, M=2, omega_B=1, eps=1e-3)
    assert W.channel(0) == RatFn(S / 2 + 1, S + Fraction(1e-3))
    w = np.array([0.0, 0.3, 7.0])
    assert np.allclose(freq_response(W.state_space(), w)[:, 0], [abs(W(1j * x)[0, 0]) for x in w])


def test_weight_rejects_invalid():
    with pytest.raises(ValueError):
        PerfWeight((0.5,), (1.0,), (1e-3,))
    with pytest.raises(ValueError):
        PerfWeight((2.0,), (1.0, 2.0), (1e-3,))


def test_weight_config_roundtrip():
    W = PerfWeight((2.0, 3.0), (5.0, 1.0), (1e-3, 1e-2))
    assert PerfWeight.from_config(W.to_config()) == W


def test_augment_open_loop_is_weight():
    W = PerfWeight.uniform(1, M=2, omega_B=1, eps=1e-3)
    G = augment_plant(realize(FIRST), W, eps_u=0.0)
    assert (G.n_y, G.n_u) == (3, 2)
    T = lft(G, StateSpace.gain([[0.0]]))
    w = np.logspace(-2, 2, 30)
    Tz = np.array([T(1j * x)[0, 0] for x in w])
    assert np.allclose(Tz, [W(1j * x)[0, 0] for x in w], rtol=1e-10)


def test_augment_order_bookkeeping(ex1):
    P = realize(ex1)
    G = augment_plant(P, EX1_WEIGHT, eps_u=0.01)
    assert G.n == P.n + 2
    assert G.part.nz == 2 + 2 and G.D[2:4, 2:].tolist() == (0.01 * np.eye(2)).tolist()
    with pytest.raises(ValueError):
        augment_plant(P, PerfWeight.uniform(3))


def test_synthesis_first_order():
    Pss = realize(FIRST)
    res = synthesize_mixed(Pss, PerfWeight.uniform(1, M=2, omega_B=1, eps=1e-3))
    assert res.gamma <= 1.1 and res.closed_loop_ok
    So = sensitivities(Pss, res.K)["S_o"]
    W = PerfWeight.uniform(1, M=2, omega_B=1, eps=1e-3)
    w = np.logspace(-4, 3, 3000)
    grid = max(abs(W(1j * x)[0, 0]) * freq_response(So, [x])[0] for x in w)
    assert grid <= res.gamma * (1 + 1e-6)


def test_synthesis_rejects_small_range():
    G = augment_plant(realize(FIRST), PerfWeight.uniform(1, omega_B=10.0))
    with pytest.raises(ValueError):
        hinf_synthesize(G, gamma_range=(0.1, 0.2))


def test_ex1_synthesis_soundness(ex1):
    inv = ex1_inverse()
    syn = inv.synthesis
    assert np.isfinite(syn.gamma) and syn.gamma <= 10 and syn.closed_loop_ok
    assert syn.gamma_achieved <= syn.gamma * (1 + 2 * 1e-3)
    assert internal_stability(ex1, inv.K)
    assert inv.is_stable()


def test_ex1_rhp_zero_interpolation(ex1):
    inv = ex1_inverse()
    To = sensitivities(realize(ex1), inv.K)["T_o"]
    for z in invariant_zeros(ex1).rhp:
        assert np.linalg.norm(z.y_z.conj() @ To(z.z)) < 1e-6


def test_ex1_dc_tracking_exact(ex1):
    So = sensitivities(realize(ex1), ex1_inverse().K)["S_o"]
    assert np.abs(So(0.0)).max() < 1e-9


def test_waterbed_consistency(ex1):
    # gamma bounds the synthesized (unpurified) loop
    inv = ex1_inverse()
    So = sensitivities(realize(ex1), inv.synthesis.K)["S_o"]
    for x in np.logspace(-2, 3, 200):
        smax = np.linalg.svd(So(1j * x), compute_uv=False)[0]
        wmin = min(abs(EX1_WEIGHT(1j * x)[i, i]) for i in range(2))
        assert smax * wmin <= inv.synthesis.gamma * (1 + 1e-6)


def test_purify_single_pole():
    K = StateSpace([[-1e-3]], [[1.0]], [[1.0]], [[0.0]])
    Kp, moved = purify_integrators(K, pole_tol=1e-2)
    assert Kp.A[0, 0] == 0.0 and len(moved) == 1


def test_purify_identity_without_small_poles():
    K = StateSpace([[-1.0, 0.0], [1.0, -3.0]], [[1.0], [0.0]], [[0.0, 1.0]], [[0.0]])
    Kp, moved = purify_integrators(K, pole_tol=1e-2)
    assert Kp is K and moved == []


def test_purify_keeps_high_frequency_response():
    K = realize(RatMatrix([[RatFn(S + 2, (S + Fraction(1, 1000)) * (S + 5))]]))
    Kp, _ = purify_integrators(K, pole_tol=1e-2)
    w = np.logspace(-1, 3, 50)
    assert np.all(np.abs(freq_response(Kp, w) / freq_response(K, w) - 1) < 1e-2)
    assert sorted(np.abs(Kp.poles()))[0] == 0.0


def test_purify_flags_repeated_poles():
    K = StateSpace([[-1e-4, 1.0], [0.0, -1e-4]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    with pytest.warns(RuntimeWarning, match="repeated near-zero"):
        purify_integrators(K, pole_tol=1e-2)


def test_sik_minimum_phase_tight_weight():
    inv = approx_inverse_sik(FIRST, PerfWeight.uniform(1, M=2, omega_B=5, eps=1e-3))
    PX = (FIRST @ inv.tfm)[0, 0]
    assert abs(1 - PX(0.01j)) < 0.02
    assert inv.is_stable()


def test_sik_rejects_tall(ex2):
    with pytest.raises(ValueError, match="full row rank"):
        approx_inverse_sik(ex2, PerfWeight.uniform(2))


def test_ex1_inverse_singular_values_finite(ex1):
    inv = ex1_inverse()
    sv = freq_response(inv.ss, np.logspace(-2, 3, 100))
    assert np.all(np.isfinite(sv)) and sv.max() < 1e3


def test_tp_ex2(ex2):
    inv = ex2_inverse()
    assert inv.info["augmentation"] == "none"
    assert inv.info["P_p"] == scalar_pick(ex2).to_json()
    assert all(p.value.real < 0 for p in inv.exact.poles())
    assert inv.is_stable()
    Tp = RatFn.from_json(inv.info["T_p"])
    assert abs(Tp(10.0)) < 1e-6


def test_missing_zero_factor():
    assert _missing_zero_factor(S - 2, S + 1) == S - 2
    assert _missing_zero_factor(S - 2, (S - 2) * (S + 3)) == Poly([1])
    assert _missing_zero_factor((S - 2) ** 2, (S - 2) * (S + 3)) == S - 2


def test_tp_preconditions(ex1):
    with pytest.raises(ValueError, match="full column rank"):
        approx_inverse_tp(ex1, PerfWeight.uniform(1))
    d = (S + 1) * (S + 3)
    with pytest.raises(ValueError, match="RHP zeros"):
        approx_inverse_tp(RatMatrix([[RatFn(1, d)], [RatFn(S + 2, d)]]), PerfWeight.uniform(1))


def test_scalar_pick_policies(ex2):
    assert scalar_pick(ex2) == ex2[0, 0]
    assert scalar_pick(ex2, "column_average") == (ex2[0, 0] + ex2[1, 0]) * RatFn(Fraction(1, 2))
    with pytest.raises(ValueError):
        scalar_pick(ex2, "median")


@settings(max_examples=15)
@given(st.sampled_from([Fraction(1, 2), 1, 2, 5]), st.sampled_from([Fraction(1, 4), 1, 3]))
def test_synthesis_soundness_scalar(a, wb):
    P = realize(RatMatrix([[RatFn(a, S + a)]]))
    res = synthesize_mixed(P, PerfWeight.uniform(1, omega_B=float(wb)))
    assert res.closed_loop_ok
    assert res.gamma_achieved <= res.gamma * (1 + 2e-3)


def test_noise_floor_bands(ex1):
    Si = sensitivities(realize(ex1), ex1_inverse().K)["S_i"]
    bands = noise_floor_bands(Si, 1e-2)
    # pure integrators drive S_i to zero at low frequency
    assert bands and bands[0][0] == pytest.approx(1e-4)
    assert noise_floor_bands(StateSpace.gain(np.eye(2)), 0.5) == []
