"""Built-in benchmark plants and the scenarios that exercise them.

All plant data are exact rational literals. ``ex1_*`` is the 2x2
non-minimum-phase plant with an RHP zero at 1 and its perturbed
counterpart; ``ex2_*`` is the tall 2x1 plant with an invariant zero at 10
and a desired output outside its image.
"""

from __future__ import annotations

from fractions import Fraction as F

from .hinfdesign import ApproxInverse, PerfWeight, approx_inverse_sik, approx_inverse_tp
from .inversion import allpass_factor
from .lti import StateSpace, realize
from .polymat import RatMatrix
from .ratcore import RatFn, S
from .sim import Scenario

__all__ = [
    "ex1_plant",
    "ex1_perturbed",
    "ex2_plant",
    "ex2_desired",
    "EX1_X0",
    "EX1_XBAR0_1",
    "EX1_XBAR0_2",
    "EX1_WEIGHT",
    "EX1_FB_WEIGHT",
    "EX2_WEIGHT",
    "EX2_REFERENCE",
    "ex1_inverse",
    "ex1_fb_inverse",
    "ex1_allpass_filter",
    "ex1_nominal_scenario",
    "ex1_robust_scenario",
    "ex2_inverse",
    "ex2_scenario",
]


def ex1_plant() -> RatMatrix:
    """Square plant with zeros ``{-10, ~-0.86, 1}`` as transcribed."""
    return RatMatrix(
        [
            [RatFn(1 - S, (S + 1) ** 2), RatFn(F(3, 10), S + F(1, 2))],
            [RatFn(-(1 - S), (S + 1) ** 2 * (S + 2)), RatFn(2, S + 3)],
        ]
    )


def ex1_perturbed() -> RatMatrix:
    """Perturbed plant with an RHP zero at 0.2 and six poles."""
    return RatMatrix(
        [
            [RatFn(F(1, 5) - S, S**2 + 20 * S + 100), RatFn(F(3, 10), S + F(1, 10))],
            [RatFn(S**2 + F(9, 5) * S - F(2, 5), S**2 + 8 * S + 16), RatFn(2, S + F(21, 10))],
        ]
    )


def ex2_plant() -> RatMatrix:
    """Tall 2x1 plant with the invariant zero at 10."""
    d = S**2 + 3 * S + 2
    return RatMatrix([[RatFn(S**2 - 5 * S - 50, d)], [RatFn(S - 10, d)]])


def ex2_desired() -> RatMatrix:
    """Desired output ``[2/(s^2+1) + 8/s, 1/s]^T``, not in the image of the plant."""
    return RatMatrix([[RatFn(2, S**2 + 1) + RatFn(8, S)], [RatFn(1, S)]])


# time-domain form of ex2_desired: 2 sin t + 8 and a unit step
EX2_REFERENCE = [
    [{"type": "sin", "amp": 2.0, "omega": 1.0}, {"type": "step", "amp": 8.0, "t0": 0.0}],
    [{"type": "step", "amp": 1.0, "t0": 0.0}],
]

EX1_X0 = [3.1, 4.1, -3.7, 4.1, 1.3, -4.0]
EX1_XBAR0_1 = [-0.2, 0.6, 1.9, 1.9, -0.5, 1.9, 1.8, 0.4, 1.4, -0.6, 0.3, 1.7, 1.4, 1.8]
EX1_XBAR0_2 = [0.3, -0.9, 0.7, 0.9, 0.4, 0.5, 0.5, 0.5, -0.2, 0.3, -0.7, 0.4, -1.0, -0.4, -0.9]

# loop shape 5/s per channel
EX1_WEIGHT = PerfWeight.uniform(2, M=2.0, omega_B=5.0, eps=1e-3)
# the feedback path runs around the perturbed plant and needs a slower design
EX1_FB_WEIGHT = PerfWeight.uniform(2, M=2.0, omega_B=0.3, eps=1e-3)
# T_p must pass the reference band (omega = 1) with near-unit gain
EX2_WEIGHT = PerfWeight.uniform(1, M=2.0, omega_B=30.0, eps=1e-3)

_cache: dict = {}


def _cached(key, fn):
    if key not in _cache:
        _cache[key] = fn()
    return _cache[key]


def ex1_inverse(W: PerfWeight | None = None) -> ApproxInverse:
    W = EX1_WEIGHT if W is None else W
    return _cached(("ex1", W), lambda: approx_inverse_sik(ex1_plant(), W))


def ex1_fb_inverse(W: PerfWeight | None = None) -> ApproxInverse:
    W = EX1_FB_WEIGHT if W is None else W
    return _cached(("ex1", W), lambda: approx_inverse_sik(ex1_plant(), W))


def ex1_allpass_filter() -> StateSpace:
    """Unit-DC-gain all-pass of the RHP zero, one copy per output channel."""
    ap = allpass_factor(ex1_plant())
    f = ap.normalized
    return realize(RatMatrix([[f, RatFn()], [RatFn(), f]]))


def _steps(n, amp=1.0):
    return [{"type": "step", "amp": amp, "t0": 0.0} for _ in range(n)]


def ex1_nominal_scenario(t_final: float = 30.0, dt: float = 1e-3) -> Scenario:
    """Feedforward-only step tracking on the nominal plant."""
    P = realize(ex1_plant())
    return Scenario(
        plant_nominal=P,
        inverse_ff=ex1_inverse().ss,
        inverse_fb=ex1_inverse().ss,
        reference=_steps(2),
        t_final=t_final,
        dt=dt,
        name="ex1-nominal",
    )


def ex1_robust_scenario(random_ics: bool = False, t_final: float = 250.0, dt: float = 1e-3,
                        t_disturbance: float = 125.0, filter_in_fb: bool = True) -> Scenario:
    """Dual feedforward/feedback loop on the perturbed plant with a unit output step disturbance."""
    P = realize(ex1_plant())
    Pa = realize(ex1_perturbed())
    return Scenario(
        plant_nominal=P,
        plant_actual=Pa,
        inverse_ff=ex1_inverse().ss,
        inverse_fb=ex1_fb_inverse().ss,
        allpass_filter=ex1_allpass_filter(),
        allpass_filter_in_fb=filter_in_fb,
        reference=_steps(2),
        disturbance=[{"type": "step", "amp": 1.0, "t0": t_disturbance} for _ in range(2)],
        x0=EX1_X0 if random_ics else None,
        xbar0_1=EX1_XBAR0_1 if random_ics else None,
        xbar0_2=EX1_XBAR0_2 if random_ics else None,
        t_final=t_final,
        dt=dt,
        name="ex1-robust-ics" if random_ics else "ex1-robust",
    )


def ex2_inverse(W: PerfWeight | None = None) -> ApproxInverse:
    W = EX2_WEIGHT if W is None else W
    return _cached(("ex2", W), lambda: approx_inverse_tp(ex2_plant(), W))


def ex2_scenario(t_final: float = 60.0, dt: float = 1e-3) -> Scenario:
    """Feedforward tracking of the unreachable desired output."""
    P = realize(ex2_plant())
    Xi = ex2_inverse().ss
    return Scenario(
        plant_nominal=P,
        inverse_ff=Xi,
        inverse_fb=Xi,
        reference=EX2_REFERENCE,
        t_final=t_final,
        dt=dt,
        name="ex2",
    )
