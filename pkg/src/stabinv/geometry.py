"""L2 geometry of stable rational vectors.

Inner products on the imaginary axis are computed from realizations with a
Sylvester equation (and by frequency quadrature as an independent check).
The column basis of a plant is orthonormalized with real Gram-Schmidt
coefficients, giving the projection/residual split used to quantify the
unreachable part of a desired output. ``contraction_margin`` measures the
loop gain of the uncertainty feedback.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.integrate as sint
import scipy.linalg as sla

from .inversion import AllPass
from .lti import StateSpace, hinf_norm, is_stable, realize
from .polymat import RatMatrix
from .ratcore import Poly, RatFn, as_fraction, poly_roots
from .tolerances import TOL

__all__ = [
    "l2_inner",
    "l2_inner_quad",
    "OrthoBasis",
    "gram_schmidt",
    "Projection",
    "project_residual",
    "contraction_margin",
    "split_marginal",
    "spectral_lines",
    "LineProjection",
    "line_projection",
]


def _as_vec(F) -> RatMatrix:
    if isinstance(F, RatMatrix):
        if F.cols != 1:
            raise ValueError("expected a column vector")
        return F
    return RatMatrix([[f] for f in F])


def _check_l2(F: RatMatrix) -> StateSpace:
    for row in F:
        f = row[0]
        if not (f.is_zero() or f.is_strictly_proper()):
            raise ValueError("L2 inner product needs strictly proper entries")
    S = realize(F)
    if not is_stable(S):
        raise ValueError("L2 inner product needs all poles in the open left half-plane")
    return S


def l2_inner(F, G) -> float:
    """``(1/2pi) int F(jw)^* G(jw) dw`` via ``A_F^T X + X A_G + C_F^T C_G = 0``."""
    F, G = _as_vec(F), _as_vec(G)
    if F.rows != G.rows:
        raise ValueError("vectors differ in length")
    SF, SG = _check_l2(F), _check_l2(G)
    if SF.n == 0 or SG.n == 0:
        return 0.0
    X = sla.solve_sylvester(SF.A.T, SG.A, -SF.C.T @ SG.C)
    return float((SF.B.T @ X @ SG.B)[0, 0])


def l2_inner_quad(F, G, epsabs: float = 1e-13, epsrel: float = 1e-11) -> float:
    """Same inner product by adaptive quadrature on ``w = tan(theta)``."""
    F, G = _as_vec(F), _as_vec(G)
    SF, SG = _check_l2(F), _check_l2(G)
    if SF.n == 0 or SG.n == 0:
        return 0.0

    def integrand(th):
        w = math.tan(th)
        v = np.vdot(SF(1j * w)[:, 0], SG(1j * w)[:, 0])
        return v.real / math.cos(th) ** 2

    poles = np.concatenate([SF.poles(), SG.poles()])
    brk = sorted({math.atan(abs(p.imag)) for p in poles if abs(p.imag) > 0} | {math.atan(abs(p)) for p in poles})
    brk = [b for b in brk if 0 < b < math.pi / 2]
    val, _ = sint.quad(integrand, 0.0, math.pi / 2, epsabs=epsabs, epsrel=epsrel, limit=500, points=brk or None)
    return val / math.pi


@dataclass
class OrthoBasis:
    """Orthonormal vectors ``q_i = sum_j coeffs[j, i] * L[:, j]``.

    ``gram_L`` is the Gram matrix of the original columns, ``gram`` that of
    the ``q_i`` (close to identity), ``dropped`` the indices of columns
    removed as numerically dependent.
    """

    L: RatMatrix
    coeffs: np.ndarray
    gram_L: np.ndarray
    gram: np.ndarray
    kept: list
    dropped: list = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.coeffs.shape[1]

    @property
    def q(self) -> list:
        return [_combine(self.L, self.coeffs[:, i]) for i in range(self.r)]

    def to_json(self) -> dict:
        return {
            "q": [v.to_json() for v in self.q],
            "gram": self.gram.tolist(),
            "coeffs": self.coeffs.tolist(),
            "dropped": self.dropped,
        }


def _combine(L: RatMatrix, c) -> RatMatrix:
    out = RatMatrix.zeros(L.rows, 1)
    for j, cj in enumerate(c):
        if cj != 0:
            out = out + L[:, j] * RatFn(as_fraction(float(cj)))
    return out


def _gram(L: RatMatrix) -> np.ndarray:
    r = L.cols
    cols = [L[:, j] for j in range(r)]
    G = np.empty((r, r))
    for i in range(r):
        for j in range(i, r):
            G[i, j] = G[j, i] = l2_inner(cols[i], cols[j])
    return G


def gram_schmidt(L: RatMatrix, degenerate_tol: float = 1e-10) -> OrthoBasis:
    """Modified Gram-Schmidt on the columns of ``L`` with real coefficients.

    Works in coefficient space with the Gram matrix of ``L``; a column whose
    remaining energy falls below ``degenerate_tol * max column energy`` is
    dropped with a warning.
    """
    if not isinstance(L, RatMatrix):
        L = RatMatrix(L)
    G = _gram(L)
    r = L.cols
    scale = max(float(np.max(np.diag(G))), 1e-300)
    basis = []  # coefficient vectors in terms of L's columns
    kept, dropped = [], []
    ip = lambda a, b: float(a @ G @ b)
    for j in range(r):
        v = np.zeros(r)
        v[j] = 1.0
        for _ in range(2):  # second pass re-orthogonalizes
            for q in basis:
                v = v - ip(q, v) * q
        e = ip(v, v)
        if e < degenerate_tol * scale:
            warnings.warn(f"column {j} is numerically dependent in L2 and was dropped", RuntimeWarning)
            dropped.append(j)
            continue
        basis.append(v / math.sqrt(e))
        kept.append(j)
    C = np.array(basis).T if basis else np.zeros((r, 0))
    return OrthoBasis(L, C, G, C.T @ G @ C, kept, dropped)


@dataclass
class Projection:
    proj: RatMatrix
    res: RatMatrix
    res_energy: float
    coeffs: np.ndarray  # <F, q_i>
    energy: float  # <F, F>
    proj_energy: float
    orthogonality: float = 0.0  # largest |<res, q_k>|


def project_residual(F, Q: OrthoBasis) -> Projection:
    """Split ``F = proj + res`` with ``proj = sum <F, q_i> q_i``."""
    F = _as_vec(F)
    b = np.array([l2_inner(Q.L[:, j], F) for j in range(Q.L.cols)])
    a = Q.coeffs.T @ b
    cL = Q.coeffs @ a
    proj = _combine(Q.L, cL)
    res = F - proj
    ff = l2_inner(F, F)
    pp = float(cL @ Q.gram_L @ cL)
    # <res, res> expanded in exact terms of computed inner products
    re = ff - 2 * float(cL @ b) + pp
    orth = np.abs(Q.coeffs.T @ (b - Q.gram_L @ cL)) if Q.r else np.zeros(0)
    return Projection(proj, res, max(re, 0.0), a, ff, pp, float(np.max(orth)) if orth.size else 0.0)


def split_marginal(f: RatFn, tol: float = 1e-9) -> tuple[RatFn, RatFn]:
    """``f = f_axis + f_stable`` separating imaginary-axis poles.

    The axis factor of the denominator must have rational coefficients
    (steps, sinusoids of rational frequency); the split is then exact, via
    the Bezout identity between the two coprime denominator factors.
    """
    d = f.den
    if d.degree < 1:
        return RatFn(), f
    ax = Poly([1])
    for r in poly_roots(d):
        z = r.value
        if abs(z.real) <= tol * max(1.0, abs(z)):
            if abs(z.imag) <= tol:
                fac = Poly([0, 1])
            elif z.imag > 0:
                w2 = Fraction(z.imag**2).limit_denominator(10**6)
                fac = Poly([w2, 0, 1])
            else:
                continue
            ax = ax * fac**r.mult
    if ax.degree < 1:
        return RatFn(), f
    if not (d % ax).is_zero():
        raise ValueError("imaginary-axis poles are not rational; cannot split exactly")
    ds = d.exact_div(ax)
    # a*ax + b*ds = 1
    a, b = _bezout(ax, ds)
    # f = n/(ax ds) = n b / ax + n a / ds
    n = f.num
    fa = RatFn(n * b, ax)
    q, rem = divmod(fa.num, fa.den)
    f_axis = RatFn(rem, fa.den)
    f_stable = f - f_axis
    return f_axis, f_stable


def _bezout(p: Poly, q: Poly):
    r0, r1 = p, q
    s0, s1 = Poly([1]), Poly()
    t0, t1 = Poly(), Poly([1])
    while not r1.is_zero():
        qq, rr = divmod(r0, r1)
        r0, r1 = r1, rr
        s0, s1 = s1, s0 - qq * s1
        t0, t1 = t1, t0 - qq * t1
    if r0.degree != 0:
        raise ValueError("factors are not coprime")
    c = r0.lc
    return s0 / c, t0 / c


def contraction_margin(P: RatMatrix, Xi, allpass: AllPass | None, gap: RatMatrix) -> dict:
    """``alpha_b = || (z+/z_d+) gap P Xi ||_inf`` and whether it is below one.

    ``Xi`` may be a rational matrix or a state-space operator. The product
    is formed exactly when everything is rational.
    """
    if gap.is_zero():
        return {"alpha_b": 0.0, "contracts": True}
    f = allpass.normalized if allpass is not None else RatFn(1)
    if isinstance(Xi, RatMatrix):
        M = (gap @ P @ Xi) * f
        S = realize(M)
    else:
        from .lti import series

        left = realize((gap @ P) * f)
        S = series(Xi, left)
    if not is_stable(S):
        raise ValueError("the composed operator is unstable")
    a = float(hinf_norm(S))
    return {"alpha_b": a, "contracts": bool(a < 1.0)}


# ---------------------------------------------------------------------------
# persistent (power) signals


def spectral_lines(Y: RatMatrix, tol: float = 1e-9) -> list:
    """Simple imaginary-axis poles of ``Y`` as ``(omega, R)`` with ``omega >= 0``.

    ``R`` is the residue vector at ``j omega``; the steady-state signal is
    ``R`` for ``omega = 0`` and ``2 Re(R e^{j omega t})`` otherwise. Repeated
    axis poles (ramps, resonances) raise ``ValueError``.
    """
    Y = _as_vec(Y)
    poles = {}
    for row in Y:
        f = row[0]
        if f.den.degree < 1:
            continue
        for r in poly_roots(f.den):
            z = r.value
            if abs(z.real) <= tol * max(1.0, abs(z)) and z.imag >= -tol:
                if r.mult > 1:
                    raise ValueError("repeated imaginary-axis pole: not a bounded power signal")
                w = abs(z.imag) if abs(z.imag) > tol else 0.0
                poles.setdefault(round(w, 9), w)
    out = []
    for w in sorted(poles.values()):
        p = 1j * w
        R = np.zeros(Y.rows, dtype=complex)
        for k, row in enumerate(Y):
            f = row[0]
            if f.den.degree < 1:
                continue
            scale = max(abs(float(c)) for c in f.den.coeffs)
            if abs(f.den(p)) <= 1e-9 * max(1.0, scale):
                R[k] = complex(f.num(p)) / complex(f.den.derivative()(p))
        out.append((w, R))
    return out


@dataclass
class LineProjection:
    """Split of a power signal against the image of ``P`` on each spectral line.

    At every line the reachable set is the column span of ``P(j omega)``; the
    projection is orthogonal in the Hermitian inner product, which is the
    time-average inner product of the steady-state signals. Powers are time
    averages of ``||.||^2``.
    """

    lines: list  # dicts: omega, R, proj, res, power, proj_power, res_power
    power: float
    proj_power: float
    res_power: float
    error_power: float | None = None

    def to_json(self) -> dict:
        enc = lambda v: [[float(x.real), float(x.imag)] for x in v]
        return {
            "power": self.power,
            "proj_power": self.proj_power,
            "res_power": self.res_power,
            "error_power": self.error_power,
            "lines": [
                {"omega": d["omega"], "R": enc(d["R"]), "res": enc(d["res"]), "res_power": d["res_power"]}
                for d in self.lines
            ],
        }


def line_projection(P, Y: RatMatrix, inverse=None) -> LineProjection:
    """Per-line projection of ``Y`` onto ``Im P(j omega)``.

    With ``inverse`` (anything callable at ``s`` returning an ``n_u x n_y``
    array, e.g. a :class:`StateSpace`) each line also reports the
    steady-state error ``(I - P Xi)(j omega) R`` and its power.
    """
    lines = []
    tot = [0.0, 0.0, 0.0]
    for w, R in spectral_lines(Y):
        Pw = np.asarray(P(1j * w), dtype=complex)
        Qm, sv, _ = np.linalg.svd(Pw, full_matrices=False)
        Qm = Qm[:, sv > TOL.svd_tol * max(1.0, sv[0])]
        proj = Qm @ (Qm.conj().T @ R)
        res = R - proj
        wt = 1.0 if w == 0 else 2.0
        d = {
            "omega": w,
            "R": R,
            "proj": proj,
            "res": res,
            "power": wt * float(np.vdot(R, R).real),
            "proj_power": wt * float(np.vdot(proj, proj).real),
            "res_power": wt * float(np.vdot(res, res).real),
        }
        if inverse is not None:
            E = R - Pw @ (np.asarray(inverse(1j * w), dtype=complex) @ R)
            d["error"] = E
            d["error_power"] = wt * float(np.vdot(E, E).real)
        lines.append(d)
        tot[0] += d["power"]
        tot[1] += d["proj_power"]
        tot[2] += d["res_power"]
    err = sum(d["error_power"] for d in lines) if inverse is not None else None
    return LineProjection(lines, *tot, err)
