"""Mixed-sensitivity H-infinity design and the approximate inverses built on it.

The generalized plant penalizes ``W_P S_o`` (plus a small control penalty);
``hinf_synthesize`` bisects on gamma with the two-Riccati central
controller for a general ``D11``. On top of that sit integrator
purification, the ``S_i K`` inverse for full-row-rank plants and the
``T_p P^+`` inverse for tall plants.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .inversion import allpass_factor, rhp_zero_factor
from .lti import (
    StateSpace,
    feedback,
    freq_response,
    hinf_norm,
    internal_stability,
    is_stable,
    lft,
    minreal,
    pseudo_inverse,
    realize,
    ss_to_tfm,
)
from .polymat import RatMatrix, rank_rs
from .ratcore import Poly, RatFn, as_fraction, poly_gcd, poly_roots
from .tolerances import TOL

__all__ = [
    "PerfWeight",
    "SynthesisResult",
    "ApproxInverse",
    "GeneralizedPlant",
    "Partition",
    "augment_plant",
    "synthesize_mixed",
    "hinf_synthesize",
    "purify_integrators",
    "approx_inverse_sik",
    "approx_inverse_tp",
    "sensitivities",
    "noise_floor_bands",
]


@dataclass(frozen=True)
class PerfWeight:
    """Diagonal performance weight ``W_Pi(s) = (s/M_i + w_Bi) / (s + w_Bi eps_i)``."""

    M: tuple
    omega_B: tuple
    eps: tuple

    def __post_init__(self):
        if not (len(self.M) == len(self.omega_B) == len(self.eps)):
            raise ValueError("weight parameter lists differ in length")
        for m, w, e in zip(self.M, self.omega_B, self.eps):
            if not (m >= 1 and w > 0 and 0 < e <= 1):
                raise ValueError(f"invalid weight parameters M={m}, omega_B={w}, eps={e}")

    @classmethod
    def uniform(cls, n: int, M: float = 2.0, omega_B: float = 1.0, eps: float = 1e-3) -> "PerfWeight":
        return cls((float(M),) * n, (float(omega_B),) * n, (float(eps),) * n)

    @classmethod
    def from_config(cls, cfg: dict) -> "PerfWeight":
        """From ``{channel: {"M":..,"omega_B":..,"eps":..}}`` (channels in key order)."""
        keys = sorted(cfg, key=lambda k: (len(str(k)), str(k)))
        return cls(
            tuple(float(cfg[k].get("M", 2.0)) for k in keys),
            tuple(float(cfg[k]["omega_B"]) for k in keys),
            tuple(float(cfg[k].get("eps", 1e-3)) for k in keys),
        )

    def to_config(self) -> dict:
        return {str(i): {"M": m, "omega_B": w, "eps": e} for i, (m, w, e) in enumerate(zip(self.M, self.omega_B, self.eps))}

    @property
    def n(self) -> int:
        return len(self.M)

    def channel(self, i: int) -> RatFn:
        m, w, e = (as_fraction(self.M[i]), as_fraction(self.omega_B[i]), as_fraction(self.eps[i]))
        return RatFn(Poly([w, 1 / m]), Poly([w * e, 1]))

    def __call__(self, s) -> np.ndarray:
        return np.diag([(s / m + w) / (s + w * e) for m, w, e in zip(self.M, self.omega_B, self.eps)])

    def state_space(self) -> StateSpace:
        M, w, e = map(np.asarray, (self.M, self.omega_B, self.eps))
        return StateSpace(np.diag(-w * e), np.eye(self.n), np.diag(w * (1 - e / M)), np.diag(1 / M))


def augment_plant(P, W: PerfWeight, eps_u: float = 1e-2) -> StateSpace:
    """Generalized plant with inputs ``[w; u]`` and outputs ``[z1; z2; e]``.

    ``z1 = W_P (w + P u)``, ``z2 = eps_u u`` and ``e = -(w + P u)``, so that
    closing ``u = K e`` gives ``z1 = W_P S_o w``. State is ``[x_P; x_W]``.
    """
    P = P if isinstance(P, StateSpace) else realize(P)
    if W.n != P.n_y:
        raise ValueError(f"weight has {W.n} channels, plant has {P.n_y} outputs")
    Wss = W.state_space()
    ny, nu, n = P.n_y, P.n_u, P.n
    AW, BW, CW, DW = Wss.A, Wss.B, Wss.C, Wss.D
    A = np.block([[P.A, np.zeros((n, ny))], [BW @ P.C, AW]])
    B1 = np.vstack([np.zeros((n, ny)), BW])
    B2 = np.vstack([P.B, BW @ P.D])
    C1 = np.vstack([np.hstack([DW @ P.C, CW]), np.zeros((nu, n + ny))])
    C2 = np.hstack([-P.C, np.zeros((ny, ny))])
    D11 = np.vstack([DW, np.zeros((nu, ny))])
    D12 = np.vstack([DW @ P.D, eps_u * np.eye(nu)])
    D21 = -np.eye(ny)
    D22 = -P.D
    return GeneralizedPlant(
        A,
        np.hstack([B1, B2]),
        np.vstack([C1, C2]),
        np.block([[D11, D12], [D21, D22]]),
        part=Partition(nw=ny, nu=nu, nz=ny + nu, ny=ny),
    )


@dataclass(frozen=True)
class Partition:
    """Channel sizes: exogenous ``w``, control ``u``, performance ``z``, measured ``y``."""

    nw: int
    nu: int
    nz: int
    ny: int


class GeneralizedPlant(StateSpace):
    """State-space system with inputs ``[w; u]`` and outputs ``[z; y]``."""

    __slots__ = ("part",)

    def __init__(self, A, B, C, D, part: Partition):
        super().__init__(A, B, C, D)
        if part.nw + part.nu != self.n_u or part.nz + part.ny != self.n_y:
            raise ValueError("partition does not match the plant dimensions")
        self.part = part


def _ric(H: np.ndarray, n: int) -> np.ndarray | None:
    """Stabilizing Riccati solution ``X = X2 X1^-1`` from the stable subspace of ``H``."""
    ev = np.linalg.eigvals(H)
    scale = max(1.0, np.max(np.abs(ev)))
    if np.min(np.abs(ev.real)) < 1e-9 * scale:
        return None
    T, Z, k = sla.schur(H, sort="lhp")
    if k != n:
        return None
    X1, X2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(X1) > 1e12:
        return None
    X = np.linalg.solve(X1.T, X2.T).T
    return 0.5 * (X + X.T)


@dataclass
class _Scaled:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D11: np.ndarray
    D22: np.ndarray
    Ru: np.ndarray  # u = Ru u~
    Ly: np.ndarray  # y~ = Ly y


def _normalize(G: StateSpace, part: Partition) -> _Scaled:
    nw, nu, nz, ny = part.nw, part.nu, part.nz, part.ny
    B1, B2 = G.B[:, :nw], G.B[:, nw:]
    C1, C2 = G.C[:nz], G.C[nz:]
    D11, D12 = G.D[:nz, :nw], G.D[:nz, nw:]
    D21, D22 = G.D[nz:, :nw], G.D[nz:, nw:]
    U, s, Vt = np.linalg.svd(D12)
    if s.size < nu or s[-1] < 1e-12 * max(1.0, s[0]):
        raise ValueError("D12 does not have full column rank")
    Uo = np.hstack([U[:, nu:], U[:, :nu]])
    Ru = Vt.T / s
    U2, s2, V2t = np.linalg.svd(D21)
    if s2.size < ny or s2[-1] < 1e-12 * max(1.0, s2[0]):
        raise ValueError("D21 does not have full row rank")
    V2 = V2t.T
    V2o = np.hstack([V2[:, ny:], V2[:, :ny]])
    Ly = (U2 / s2).T
    return _Scaled(
        A=G.A,
        B1=B1 @ V2o,
        B2=B2 @ Ru,
        C1=Uo.T @ C1,
        C2=Ly @ C2,
        D11=Uo.T @ D11 @ V2o,
        D22=Ly @ D22 @ Ru,
        Ru=Ru,
        Ly=Ly,
    )


def _central(sc: _Scaled, gamma: float):
    """Central controller for the normalized plant at level ``gamma`` (or None)."""
    A, B1, B2, C1, C2, D11 = sc.A, sc.B1, sc.B2, sc.C1, sc.C2, sc.D11
    n = A.shape[0]
    m1, m2 = B1.shape[1], B2.shape[1]
    p1, p2 = C1.shape[0], C2.shape[0]
    D12 = np.vstack([np.zeros((p1 - m2, m2)), np.eye(m2)])
    D21 = np.hstack([np.zeros((p2, m1 - p2)), np.eye(p2)])
    g2 = gamma**2
    D1111 = D11[: p1 - m2, : m1 - p2]
    D1112 = D11[: p1 - m2, m1 - p2 :]
    D1121 = D11[p1 - m2 :, : m1 - p2]
    D1122 = D11[p1 - m2 :, m1 - p2 :]
    lb = max(
        np.linalg.norm(np.hstack([D1111, D1112]), 2) if D1111.size + D1112.size else 0.0,
        np.linalg.norm(np.vstack([D1111, D1121]), 2) if D1111.size + D1121.size else 0.0,
    )
    if gamma <= lb * (1 + 1e-9):
        return None
    B = np.hstack([B1, B2])
    C = np.vstack([C1, C2])
    D1d = np.hstack([D11, D12])
    Dd1 = np.vstack([D11, D21])
    R = D1d.T @ D1d - sla.block_diag(g2 * np.eye(m1), np.zeros((m2, m2)))
    Rt = Dd1 @ Dd1.T - sla.block_diag(g2 * np.eye(p1), np.zeros((p2, p2)))
    Ri, Rti = np.linalg.inv(R), np.linalg.inv(Rt)
    H = np.block([[A, np.zeros((n, n))], [-C1.T @ C1, -A.T]]) - np.vstack([B, -C1.T @ D1d]) @ Ri @ np.hstack(
        [D1d.T @ C1, B.T]
    )
    J = np.block([[A.T, np.zeros((n, n))], [-B1 @ B1.T, -A]]) - np.vstack([C.T, -B1 @ Dd1.T]) @ Rti @ np.hstack(
        [Dd1 @ B1.T, C]
    )
    X = _ric(H, n)
    if X is None:
        return None
    Y = _ric(J, n)
    if Y is None:
        return None
    tolX = 1e-9 * max(1.0, np.linalg.norm(X))
    tolY = 1e-9 * max(1.0, np.linalg.norm(Y))
    if np.min(np.linalg.eigvalsh(X)) < -tolX or np.min(np.linalg.eigvalsh(Y)) < -tolY:
        return None
    rho = np.max(np.abs(np.linalg.eigvals(X @ Y)))
    if rho >= g2 * (1 - 1e-9):
        return None
    F = -Ri @ (D1d.T @ C1 + B.T @ X)
    L = -(B1 @ Dd1.T + Y @ C.T) @ Rti
    F1, F2 = F[:m1], F[m1:]
    F12 = F1[m1 - p2 :]
    L1, L2 = L[:, :p1], L[:, p1:]
    L12 = L1[:, p1 - m2 :]
    I1111 = g2 * np.eye(D1111.shape[0]) - D1111 @ D1111.T
    I1111t = g2 * np.eye(D1111.shape[1]) - D1111.T @ D1111
    Dh11 = -D1121 @ D1111.T @ np.linalg.solve(I1111, D1112) - D1122 if D1111.size else -D1122.copy()
    M12 = np.eye(m2) - (D1121 @ np.linalg.solve(I1111t, D1121.T) if D1121.size else 0.0)
    M21 = np.eye(p2) - D1112.T @ np.linalg.solve(I1111, D1112)
    Dh12 = np.linalg.cholesky(M12)
    Dh21 = np.linalg.cholesky(M21).T
    Z = np.linalg.inv(np.eye(n) - Y @ X / g2)
    Bh2 = Z @ (B2 + L12) @ Dh12
    Ch2 = -Dh21 @ (C2 + F12)
    Bh1 = -Z @ L2 + Bh2 @ np.linalg.solve(Dh12, Dh11)
    Ch1 = F2 + Dh11 @ np.linalg.solve(Dh21, Ch2)
    Ah = A + B @ F + Bh1 @ np.linalg.solve(Dh21, Ch2)
    return StateSpace(Ah, Bh1, Ch1, Dh11), (X, Y, rho)


def _controller(sc: _Scaled, gamma: float) -> StateSpace | None:
    out = _central(sc, gamma)
    if out is None:
        return None
    K0 = out[0]
    if np.any(sc.D22):
        K0 = feedback(K0, StateSpace.gain(sc.D22), sign=-1.0)
    return K0.scaled(left=sc.Ru, right=sc.Ly)


@dataclass
class SynthesisResult:
    K: StateSpace
    gamma: float
    closed_loop_ok: bool
    iterations: int
    gamma_achieved: float = float("nan")
    gamma_bracket: tuple = ()
    lower_bound: float = 0.0

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "gamma_achieved": self.gamma_achieved,
            "order": self.K.n,
            "ok": self.closed_loop_ok,
            "iterations": self.iterations,
        }


def hinf_synthesize(
    G: GeneralizedPlant,
    gamma_range: tuple | None = None,
    gamma_tol: float | None = None,
    slack: float | None = None,
    max_iter: int = 60,
    plant=None,
) -> SynthesisResult:
    """Gamma bisection with the central two-Riccati controller.

    Parameters
    ----------
    G : GeneralizedPlant
        Inputs ``[w; u]``, outputs ``[z; y]``.
    gamma_range : (lo, hi), optional
        Default ``[0.5 * lower bound, 100]`` where the lower bound is the
        high-frequency limit ``sigma_max(D11)`` (at least 1e-3).
    plant : StateSpace or RatMatrix, optional
        Used for the internal-stability check of the final loop.
    """
    gamma_tol = TOL.gamma_tol if gamma_tol is None else gamma_tol
    slack = TOL.gamma_slack if slack is None else slack
    part = G.part
    sc = _normalize(G, part)
    d11 = np.linalg.norm(G.D[: part.nz, : part.nw], 2)
    lb = max(d11, 1e-3)
    lo, hi = (0.5 * lb, 100.0) if gamma_range is None else map(float, gamma_range)
    if _central(sc, hi) is None:
        raise ValueError(f"no stabilizing H-infinity controller with gamma <= {hi}")
    it = 0
    while hi / lo - 1 > gamma_tol and it < max_iter:
        mid = np.sqrt(lo * hi)
        if _central(sc, mid) is None:
            lo = mid
        else:
            hi = mid
        it += 1
    gamma = hi * (1 + slack)
    K = _controller(sc, gamma)
    if K is None:
        gamma = hi
        K = _controller(sc, gamma)
    Tzw = lft(G, K)
    ok = is_stable(Tzw)
    if plant is not None:
        ok = ok and internal_stability(plant, K)
    achieved = hinf_norm(Tzw, tol=1e-8) if is_stable(Tzw) else float("inf")
    return SynthesisResult(K, float(gamma), bool(ok), it, float(achieved), (lo, hi), lb)


def synthesize_mixed(P, W: PerfWeight, eps_u: float = 1e-2, **kw) -> SynthesisResult:
    """Augment ``P`` with ``W`` and synthesize; the loop check uses ``P``."""
    Pss = P if isinstance(P, StateSpace) else realize(P)
    G = augment_plant(Pss, W, eps_u)
    return hinf_synthesize(G, plant=Pss, **kw)


def sensitivities(P, K) -> dict:
    """``S_i, T_i, S_o, T_o`` (and the loop ``L_o = P K``) as state-space systems."""
    P = P if isinstance(P, StateSpace) else realize(P)
    K = K if isinstance(K, StateSpace) else realize(K)
    from .lti import series

    Lo = series(K, P)  # P K
    Li = series(P, K)  # K P
    So = feedback(StateSpace.gain(np.eye(P.n_y)), Lo, -1.0)
    Si = feedback(StateSpace.gain(np.eye(P.n_u)), Li, -1.0)
    To = feedback(Lo, StateSpace.gain(np.eye(P.n_y)), -1.0)
    Ti = feedback(Li, StateSpace.gain(np.eye(P.n_u)), -1.0)
    return {"S_o": So, "T_o": To, "S_i": Si, "T_i": Ti, "L_o": Lo, "L_i": Li}


def noise_floor_bands(S: StateSpace, floor: float, omega=None) -> list:
    """Frequency bands where ``sigma_max(S(j w))`` is below ``floor``.

    Reporting only: in such bands the tracking error is dominated by the
    measurement-noise level and the operator is left unchanged. Returns
    ``[(w_lo, w_hi), ...]`` on the evaluation grid.
    """
    w = np.logspace(-4, 3, 701) if omega is None else np.asarray(omega, dtype=float)
    below = np.asarray(freq_response(S, w))[:, 0] < floor
    bands, start = [], None
    for k, b in enumerate(below):
        if b and start is None:
            start = k
        if start is not None and (not b or k == w.size - 1):
            bands.append((float(w[start]), float(w[k if b else k - 1])))
            start = None
    return bands


# ---------------------------------------------------------------------------


def purify_integrators(K: StateSpace, pole_tol: float | None = None):
    """Move real poles with ``|p| < pole_tol`` to exactly zero.

    The small modes are separated by an ordered real Schur form and a
    Sylvester block-diagonalization; their block is replaced by zero and the
    rest of the realization is untouched. Returns ``(K_pure, moved)`` with
    the list of relocated poles.
    """
    pole_tol = TOL.pole_tol if pole_tol is None else pole_tol
    if K.n == 0:
        return K, []
    ev = np.linalg.eigvals(K.A)
    small = [p for p in ev if abs(p) < pole_tol and abs(p.imag) <= 1e-12 * max(1.0, abs(p)) + 1e-14]
    if not small:
        return K, []
    T, Z, k = sla.schur(K.A, sort=lambda x: abs(x) < pole_tol and abs(np.imag(x)) <= 1e-12 + 1e-12 * abs(x))
    if k > 1:
        # a coupled (non-diagonal) block with clustered poles indicates a Jordan chain
        spread = np.ptp(np.diag(T[:k, :k]))
        coupling = np.linalg.norm(np.triu(T[:k, :k], 1))
        if coupling > 1e-6 * pole_tol and spread < 1e-3 * pole_tol:
            warnings.warn("repeated near-zero poles: Jordan structure is not preserved", RuntimeWarning)
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    # [I X; 0 I] block-diagonalizes T when T11 X - X T22 = -T12
    X = sla.solve_sylvester(T11, -T22, -T12) if T22.size else np.zeros((k, 0))
    n = K.n
    Tm = np.eye(n)
    Tm[:k, k:] = X
    Tmi = np.eye(n)
    Tmi[:k, k:] = -X
    V = Z @ Tm
    Vi = Tmi @ Z.T
    Ad = Vi @ K.A @ V
    Ad[:k, :k] = 0.0
    Ad[:k, k:] = 0.0
    Ad[k:, :k] = 0.0
    Kp = StateSpace(Ad, Vi @ K.B, K.C @ V, K.D)
    return Kp, [complex(p) for p in small]


@dataclass
class ApproxInverse:
    """H-infinity based approximate inverse.

    ``ss`` is the operator from desired output to input. ``tfm`` is computed
    on demand from a minimal realization (float coefficients, so pole-zero
    cancellations there are only approximate), except for the ``T_p P^+``
    construction where ``exact`` holds the exactly cancelled product.
    """

    ss: StateSpace
    K: StateSpace
    synthesis: SynthesisResult
    kind: str
    purified: list = field(default_factory=list)
    exact: RatMatrix | None = None
    info: dict = field(default_factory=dict)

    @property
    def tfm(self) -> RatMatrix:
        if self.exact is not None:
            return self.exact
        return ss_to_tfm(minreal(self.ss))

    def poles(self) -> np.ndarray:
        return minreal(self.ss).poles()

    def is_stable(self) -> bool:
        return is_stable(minreal(self.ss))

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "state_space": self.ss.to_json(),
            "controller": self.K.to_json(),
            "synthesis": self.synthesis.to_json(),
            "purified_poles": [[p.real, p.imag] for p in self.purified],
            "stable": self.is_stable(),
        }
        if self.exact is not None:
            out["tfm"] = self.exact.to_json()
        out.update({k: v for k, v in self.info.items() if isinstance(v, (int, float, str, list, dict, bool))})
        return out


def approx_inverse_sik(P, W: PerfWeight, eps_u: float = 1e-2, purify: bool = True, **kw) -> ApproxInverse:
    """``S_i K = K (I + P K)^-1`` for a full-row-rank plant.

    The synthesized controller has its near-zero poles (from the ``eps``
    weights) replaced by pure integrators, which forces ``S_o(0) = 0``.
    """
    Pr = P if isinstance(P, RatMatrix) else ss_to_tfm(P)
    r, _ = rank_rs(Pr)
    if r != Pr.rows or Pr.rows > Pr.cols:
        raise ValueError(f"S_i K inverse needs full row rank n_y <= n_u (rank {r}, n_y={Pr.rows})")
    Pss = P if isinstance(P, StateSpace) else realize(P)
    syn = synthesize_mixed(Pss, W, eps_u, **kw)
    if syn.K.n == 0 and not np.any(syn.K.D):
        raise ValueError("synthesis returned K = 0; the inverse would be zero")
    K, moved = purify_integrators(syn.K) if purify else (syn.K, [])
    if purify and not internal_stability(Pss, K):
        raise ValueError("purified controller does not stabilize the plant")
    Xi = feedback(K, Pss, sign=-1.0)
    return ApproxInverse(Xi, K, syn, "sik", moved)


def _rationalize_ss(K: StateSpace) -> RatMatrix:
    return ss_to_tfm(minreal(K))


def scalar_pick(P: RatMatrix, policy: str = "entry") -> RatFn:
    """Scalar used for the ``T_p`` design: entry (1,1) or first-column average."""
    if policy == "entry":
        return P[0, 0]
    if policy == "column_average":
        acc = RatFn()
        for i in range(P.rows):
            acc = acc + P[i, 0]
        return acc * RatFn(Fraction(1, P.rows))
    raise ValueError(f"unknown scalar-pick policy {policy!r}")


def _missing_zero_factor(zplus: Poly, num: Poly) -> Poly:
    """Part of ``zplus`` not already dividing ``num`` (with multiplicity)."""
    rem = zplus
    n = num
    while True:
        g = poly_gcd(rem, n) if not n.is_zero() else rem
        if g.degree < 1:
            return rem
        rem = rem.exact_div(g)
        n = n.exact_div(g)


def approx_inverse_tp(P: RatMatrix, W: PerfWeight, pick: str = "entry", eps_u: float = 1e-2,
                      purify: bool = True, **kw) -> ApproxInverse:
    """``T_p P^+`` for a tall plant with RHP zeros.

    ``T_p = P_p K_p / (1 + P_p K_p)`` is designed on a scalar ``P_p`` taken
    from ``P`` and carrying every RHP zero of ``P``; the exact product with
    the pseudo-inverse cancels the RHP poles of ``P^+``.
    """
    if not isinstance(P, RatMatrix):
        P = ss_to_tfm(P)
    r, _ = rank_rs(P)
    if not (r == P.cols < P.rows):
        raise ValueError(f"T_p P^+ inverse needs full column rank n_u < n_y (rank {r}, shape {P.shape})")
    zplus = rhp_zero_factor(P)
    if zplus.degree < 1:
        raise ValueError("T_p P^+ inverse expects RHP zeros; use the pseudo-inverse directly")
    Pp = scalar_pick(P, pick)
    miss = _missing_zero_factor(zplus, Pp.num)
    augmented = "none"
    if miss.degree >= 1:
        cand = Pp * RatFn(miss)
        if cand.is_proper():
            Pp, augmented = cand, "z_plus"
        else:
            Pp, augmented = Pp * allpass_factor(miss).ratio, "allpass"
    Pp_m = RatMatrix([[Pp]])
    Pss = realize(Pp_m)
    W1 = PerfWeight(W.M[:1], W.omega_B[:1], W.eps[:1])
    syn = synthesize_mixed(Pss, W1, eps_u, **kw)
    K, moved = purify_integrators(syn.K) if purify else (syn.K, [])
    Kt = _rationalize_ss(K)[0, 0]
    L = Pp * Kt
    Tp = RatFn(L.num, L.num + L.den)
    for zr in poly_roots(zplus):
        v = abs(Tp(zr.value))
        if not v < TOL.interp_tol:
            raise ValueError(f"T_p does not vanish at the RHP zero {zr.value} (|T_p| = {v:.3e})")
    Pd = pseudo_inverse(P)
    Xi = RatMatrix([[Tp * f for f in row] for row in Pd])
    Xss = realize(Xi)
    info = {"P_p": Pp.to_json(), "T_p": Tp.to_json(), "augmentation": augmented, "pick": pick}
    return ApproxInverse(Xss, K, syn, "tp_pinv", moved, exact=Xi, info=info)
