"""Exact right inverses and the conditions under which they are stable.

A desired output ``Y`` can be produced by a stable input ``U = Xi Y`` iff
``Y`` lies in the image of ``P`` over the rational functions and ``Y``
vanishes (with enough derivatives) at every right-half-plane zero of ``P``.
This module checks both conditions, builds the Smith-form right inverse,
and constructs the all-pass factor carrying the RHP zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lti import ZeroSet, invariant_zeros, realize, zero_polynomial
from .polymat import RatMatrix, clear_denominators, membership_im, smith_form
from .ratcore import PoleError, Poly, RatFn, S, as_fraction, poly_lcm, poly_roots
from .tolerances import TOL

__all__ = [
    "InverseReport",
    "AllPass",
    "check_conditions",
    "exact_right_inverse",
    "certify_inverse",
    "allpass_factor",
    "rhp_zero_factor",
    "approx_inverse_allpass",
    "common_denominator",
]

EXACT_STABLE = "exact_stable"
EXACT_UNSTABLE = "exact_unstable"
APPROXIMATE = "approximate_required"


def common_denominator(M: RatMatrix) -> Poly:
    d = Poly([1])
    for row in M:
        for f in row:
            if f.den.degree > 0:
                d = poly_lcm(d, f.den)
    return d


def _cz(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class InverseReport:
    """Outcome of the stable-inversion test for one desired output.

    ``residuals`` has one row per (RHP zero, derivative order) with the
    worst entry magnitude ``max_k |Y_k^(order)(z)|``; ``directional`` holds
    ``|y_z^* Y(z)|`` for each RHP zero, reported but not used for the
    classification.
    """

    membership_ok: bool
    interpolation_ok: bool
    classification: str
    residuals: list = field(default_factory=list)
    directional: list = field(default_factory=list)
    threshold: float = 0.0
    inverse: RatMatrix | None = None
    U: RatMatrix | None = None
    certificate: list = field(default_factory=list)
    failed_order: int | None = None

    @property
    def certificate_stable(self) -> bool:
        return all(p.real < -TOL.stab_margin for p in self.certificate)

    def to_json(self) -> dict:
        out = {
            "membership_ok": self.membership_ok,
            "interpolation_ok": self.interpolation_ok,
            "classification": self.classification,
            "threshold": self.threshold,
            "residuals": [
                {"z": _cz(r["z"]), "order": r["order"], "residual": r["residual"]} for r in self.residuals
            ],
            "directional": [{"z": _cz(r["z"]), "residual": r["residual"]} for r in self.directional],
            "failed_order": self.failed_order,
            "certificate_poles": [_cz(p) for p in self.certificate],
        }
        if self.inverse is not None:
            out["inverse"] = self.inverse.to_json()
        if self.U is not None:
            out["U"] = self.U.to_json()
        return out


def _grid_scale(Y: RatMatrix) -> float:
    w = np.logspace(-3, 3, 61)
    m = 0.0
    for row in Y:
        for f in row:
            for wk in w:
                try:
                    m = max(m, abs(f(1j * wk)))
                except PoleError:
                    pass
    return max(1.0, m)


def _eval_safe(f: RatFn, z: complex) -> float:
    try:
        return abs(f(z))
    except PoleError:
        return math.inf


def check_conditions(P: RatMatrix, Y: RatMatrix, zeros: ZeroSet | None = None) -> InverseReport:
    """Image membership and RHP interpolation for the desired output ``Y``."""
    if P.rows != Y.rows:
        raise ValueError("P and Y have different row counts")
    member = membership_im(P, Y)
    zs = invariant_zeros(realize(P)) if zeros is None else zeros
    thr = TOL.interp_tol * _grid_scale(Y)
    residuals, directional = [], []
    interp = True
    failed = None
    for zr in zs.rhp:
        D = Y
        for k in range(max(zr.mult, 1)):
            res = max((_eval_safe(f, zr.z) for row in D for f in row), default=0.0)
            residuals.append({"z": zr.z, "order": k, "residual": res})
            if not res < thr:
                interp = False
                failed = k if failed is None else min(failed, k)
            D = D.map(lambda f: f.derivative())
        try:
            Yz = Y(zr.z)[:, 0] if Y.cols == 1 else Y(zr.z)
            dres = float(np.linalg.norm(zr.y_z.conj() @ Yz))
        except PoleError:
            dres = math.inf
        directional.append({"z": zr.z, "residual": dres})
    if not member:
        cls = APPROXIMATE
    elif interp:
        cls = EXACT_STABLE
    else:
        cls = EXACT_UNSTABLE
    return InverseReport(member, interp, cls, residuals, directional, thr, failed_order=failed)


def exact_right_inverse(P: RatMatrix, kappa: RatMatrix | None = None) -> RatMatrix:
    """Right inverse ``Xi = Vi_R1 Lambda^-1 Ui_R1 Delta (+ null-space term)``.

    ``Vi_R1`` are the first ``r`` columns of ``V_R^-1`` and ``Ui_R1`` the first
    ``r`` rows of ``U_R^-1`` from the Smith form of ``Delta * P``. ``P @ Xi``
    is the identity on the image of ``P``. An optional ``kappa``
    (``n_u x n_y``) adds ``(I - Vi_R1 V_R1) kappa``, which ``P`` annihilates.
    """
    if not isinstance(P, RatMatrix):
        P = RatMatrix(P)
    if P.is_zero():
        raise ValueError("right inverse of a rank-0 matrix")
    Pp, _, delta = clear_denominators(P)
    dec = smith_form(Pp)
    lam_inv = RatMatrix.diag([RatFn(1, d) for d in dec.invariant_factors])
    Vi1 = dec.V_R1_inv.to_rat()
    Ui1 = dec.U_R1_inv.to_rat()
    Xi = (Vi1 @ lam_inv @ Ui1) * RatFn(delta)
    if kappa is not None:
        if kappa.shape != (P.cols, P.rows):
            raise ValueError(f"kappa must be {P.cols}x{P.rows}")
        N = RatMatrix.eye(P.cols) - Vi1 @ dec.V_R1.to_rat()
        Xi = Xi + N @ kappa
    return Xi


def certify_inverse(P: RatMatrix, Y: RatMatrix, kappa: RatMatrix | None = None,
                    zeros: ZeroSet | None = None) -> InverseReport:
    """Condition check plus the constructed inverse and the poles of ``U = Xi Y``."""
    rep = check_conditions(P, Y, zeros)
    Xi = exact_right_inverse(P, kappa)
    U = Xi @ Y
    rep.inverse = Xi
    rep.U = U
    d = common_denominator(U)
    rep.certificate = [r.value for r in poly_roots(d) for _ in range(r.mult)] if d.degree > 0 else []
    return rep


# ---------------------------------------------------------------------------


def _rational_near(x: float, p: Poly | None, max_den: int = 10**6) -> Fraction:
    """Nearby simple rational: accepted if it is an exact root of ``p``, or
    (without ``p``) if it reproduces the float to rounding accuracy."""
    q = Fraction(x).limit_denominator(max_den)
    if p is not None:
        return q if p(q) == 0 else as_fraction(x)
    return q if abs(float(q) - x) <= 1e-13 * max(1.0, abs(x)) else as_fraction(x)


def _factor_from_roots(vals, exact: Poly | None) -> Poly:
    """Monic real polynomial with the given roots; exact when they are rational."""
    out = Poly([1])
    done = set()
    for k, z in enumerate(vals):
        if k in done:
            continue
        if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
            a = _rational_near(z.real, exact)
            out = out * (S - a)
        else:
            # pair with the conjugate
            j = next(
                (i for i in range(len(vals)) if i not in done and i != k and abs(vals[i] - z.conjugate()) < 1e-8 * max(1, abs(z))),
                None,
            )
            if j is not None:
                done.add(j)
            b = _rational_near(-2 * z.real, None)
            c = _rational_near(z.real**2 + z.imag**2, None)
            quad = Poly([Fraction(c).limit_denominator(10**6), Fraction(b).limit_denominator(10**6), 1])
            if exact is None or not (exact % quad).is_zero():
                quad = Poly([c, b, 1])
            out = out * quad
        done.add(k)
    return out


def rhp_zero_factor(P: RatMatrix) -> Poly:
    """Exact monic factor of the zero polynomial carrying all RHP zeros.

    Rational zeros are recovered exactly (checked by exact divisibility);
    irrational ones fall back to their floating-point values.
    """
    zp = zero_polynomial(P)
    if zp.degree < 1:
        return Poly([1])
    vals = [r.value for r in poly_roots(zp) if r.value.real > 0 for _ in range(r.mult)]
    return _factor_from_roots(vals, zp)


@dataclass(frozen=True)
class AllPass:
    """All-pass factor ``z_plus(s) / z_d_plus(s)``.

    ``z_plus`` has the RHP zeros, ``z_d_plus`` their mirror images in the LHP.
    ``ratio`` has DC gain ``(-1)^k`` with ``k`` the number of real RHP zeros;
    ``normalized`` flips the sign so that the DC gain is +1.
    """

    z_plus: Poly
    z_d_plus: Poly
    ratio: RatFn

    @property
    def dc_sign(self) -> int:
        v = self.ratio(0.0)
        return 1 if np.real(v) >= 0 else -1

    @property
    def normalized(self) -> RatFn:
        return self.ratio if self.dc_sign > 0 else -self.ratio

    @property
    def degree(self) -> int:
        return self.z_plus.degree

    def max_deviation(self, omega=None) -> float:
        """``max | |ratio(j w)| - 1 |`` on a log grid."""
        w = np.logspace(-3, 3, 2001) if omega is None else np.asarray(omega)
        return float(max(abs(abs(self.ratio(1j * x)) - 1.0) for x in w))

    def to_json(self) -> dict:
        return {"z_plus": self.z_plus.to_json(), "z_d_plus": self.z_d_plus.to_json(), "ratio": self.ratio.to_json()}


def _mirror_monic(p: Poly) -> Poly:
    m = p.mirror()
    return m.monic() if not m.is_zero() else m


def allpass_factor(Z) -> AllPass:
    """All-pass factor from RHP zeros.

    ``Z`` may be a :class:`ZeroSet`, a sequence of complex values (with
    repetition for multiplicity), a monic :class:`Poly` whose roots are the
    RHP zeros, or a :class:`RatMatrix` (zeros computed exactly).
    """
    if isinstance(Z, RatMatrix):
        zp = rhp_zero_factor(Z)
    elif isinstance(Z, Poly):
        zp = Z.monic() if not Z.is_zero() else Poly([1])
    else:
        vals = list(Z.rhp_values) if isinstance(Z, ZeroSet) else [complex(z) for z in Z]
        if any(abs(v.real) <= 1e-12 * max(1.0, abs(v)) for v in vals):
            raise ValueError("imaginary-axis zero: the mirror factor is ill-posed")
        zp = _factor_from_roots(vals, None)
    if zp.degree >= 1:
        for r in poly_roots(zp):
            if abs(r.value.real) <= 1e-12 * max(1.0, abs(r.value)):
                raise ValueError("imaginary-axis zero: the mirror factor is ill-posed")
    zd = _mirror_monic(zp)
    return AllPass(zp, zd, RatFn(zp, zd))


def approx_inverse_allpass(P: RatMatrix, kappa: RatMatrix | None = None, normalize_dc: bool = True,
                           allpass: AllPass | None = None) -> tuple[RatMatrix, AllPass]:
    """Right inverse times the all-pass factor, ``Xi_a = Xi (z+/z_d+)``.

    The ``z+`` numerator cancels the RHP poles that the exact inverse injects,
    so ``Xi_a Y`` is stable for stable ``Y`` in the image of ``P``. With
    ``normalize_dc`` the factor is sign-corrected to unit DC gain so that
    step references are tracked without offset.
    """
    ap = allpass_factor(P) if allpass is None else allpass
    Xi = exact_right_inverse(P, kappa)
    f = ap.normalized if normalize_dc else ap.ratio
    return Xi * f, ap
