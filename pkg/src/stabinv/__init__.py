"""Stable inversion of MIMO LTI systems.

Exact rational algebra (:mod:`ratcore`, :mod:`polymat`), realizations and
zeros (:mod:`lti`), exact and all-pass inverses (:mod:`inversion`),
H-infinity approximate inverses (:mod:`hinfdesign`), L2 projection geometry
(:mod:`geometry`), time-domain simulation (:mod:`sim`) and the command line
(:mod:`cli`).
"""

from .geometry import contraction_margin, gram_schmidt, l2_inner, line_projection, project_residual
from .hinfdesign import PerfWeight, approx_inverse_sik, approx_inverse_tp, hinf_synthesize, synthesize_mixed
from .inversion import allpass_factor, approx_inverse_allpass, certify_inverse, check_conditions, exact_right_inverse
from .lti import StateSpace, hinf_norm, invariant_zeros, pseudo_inverse, realize, ss_to_tfm
from .polymat import PolyMatrix, RatMatrix, membership_im, rank_rs, smith_form
from .ratcore import Poly, RatFn, S, poly_gcd, poly_roots
from .sim import Scenario, fit_decay, simulate_closed_loop, simulate_open
from .tolerances import TOL

__version__ = "0.1.0"

__all__ = [
    "Poly", "RatFn", "S", "poly_gcd", "poly_roots",
    "PolyMatrix", "RatMatrix", "smith_form", "rank_rs", "membership_im",
    "StateSpace", "realize", "ss_to_tfm", "invariant_zeros", "pseudo_inverse", "hinf_norm",
    "check_conditions", "certify_inverse", "exact_right_inverse", "allpass_factor", "approx_inverse_allpass",
    "PerfWeight", "synthesize_mixed", "hinf_synthesize", "approx_inverse_sik", "approx_inverse_tp",
    "l2_inner", "gram_schmidt", "project_residual", "line_projection", "contraction_margin",
    "Scenario", "simulate_open", "simulate_closed_loop", "fit_decay",
    "TOL",
]
