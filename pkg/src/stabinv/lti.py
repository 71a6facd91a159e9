"""Continuous-time state-space systems.

Realization of rational matrices (exact, then minimal), conversion back to
transfer matrices, invariant zeros with input/output directions, stability
tests, pseudo-inverses, frequency responses, the H-infinity norm, balanced
truncation and the usual interconnections.

Functions
---------
realize, ss_to_tfm, minreal
invariant_zeros, zero_polynomial, pseudo_inverse
is_stable, internal_stability, closed_loop_A
freq_response, sigma_max, hinf_norm
hankel_singular_values, balanced_reduce
series, parallel, feedback, lft, append
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .polymat import RatMatrix, clear_denominators, rank_rs, smith_form
from .ratcore import Poly, RatFn, as_fraction, poly_lcm
from .tolerances import TOL

__all__ = [
    "StateSpace",
    "Zero",
    "ZeroSet",
    "realize",
    "ss_to_tfm",
    "minreal",
    "invariant_zeros",
    "zero_polynomial",
    "pseudo_inverse",
    "is_stable",
    "internal_stability",
    "closed_loop_A",
    "freq_response",
    "sigma_max",
    "hinf_norm",
    "hankel_singular_values",
    "balanced_reduce",
    "series",
    "parallel",
    "feedback",
    "lft",
    "append",
]


def _arr(x, shape=None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if shape is not None and a.size == 0:
        a = a.reshape(shape)
    return a


class StateSpace:
    """Realization ``x' = A x + B u``, ``y = C x + D u``.

    Parameters
    ----------
    A, B, C, D : array_like
        Real matrices of compatible sizes. Empty ``A`` (order 0) is allowed;
        then ``B`` is ``0 x n_u`` and ``C`` is ``n_y x 0``.
    exact : tuple of nested lists of Fraction, optional
        Exact matrices the floats were derived from, kept so that
        :func:`ss_to_tfm` can recover the transfer matrix without rounding.
    """

    __slots__ = ("A", "B", "C", "D", "exact")

    def __init__(self, A, B, C, D, exact=None):
        D = _arr(D)
        ny, nu = D.shape
        A = np.asarray(A, dtype=float)
        n = A.shape[0] if A.size else 0
        self.A = A.reshape(n, n)
        self.B = np.asarray(B, dtype=float).reshape(n, nu)
        self.C = np.asarray(C, dtype=float).reshape(ny, n)
        self.D = D
        for m in (self.A, self.B, self.C, self.D):
            if not np.all(np.isfinite(m)):
                raise ValueError("state-space matrices must be finite")
        self.exact = exact

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.D.shape[1]

    @property
    def n_y(self) -> int:
        return self.D.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_y, self.n_u

    def __call__(self, s) -> np.ndarray:
        """Transfer matrix evaluated at the complex point ``s``."""
        if self.n == 0:
            return self.D.astype(complex)
        return self.C @ np.linalg.solve(s * np.eye(self.n) - self.A, self.B) + self.D

    def __repr__(self):
        return f"StateSpace(n={self.n}, n_y={self.n_y}, n_u={self.n_u})"

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n else np.zeros(0, complex)

    def transform(self, T: np.ndarray) -> "StateSpace":
        """Similarity ``x = T z``."""
        Ti = np.linalg.inv(T)
        return StateSpace(Ti @ self.A @ T, Ti @ self.B, self.C @ T, self.D)

    def __neg__(self):
        return StateSpace(self.A, self.B, -self.C, -self.D)

    def scaled(self, left=None, right=None) -> "StateSpace":
        """``diag(left) @ G @ diag(right)`` for constant matrices."""
        L = np.eye(self.n_y) if left is None else _arr(left)
        R = np.eye(self.n_u) if right is None else _arr(right)
        return StateSpace(self.A, self.B @ R, L @ self.C, L @ self.D @ R)

    def dcgain(self) -> np.ndarray:
        return np.real(self(0.0))

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("A", "B", "C", "D")}

    @classmethod
    def from_json(cls, data: dict) -> "StateSpace":
        try:
            D = _arr(data["D"])
            n = len(data["A"])
            return cls(
                np.asarray(data["A"], float).reshape(n, n),
                np.asarray(data["B"], float).reshape(n, D.shape[1]),
                np.asarray(data["C"], float).reshape(D.shape[0], n),
                D,
            )
        except KeyError as exc:
            raise ValueError(f"state-space JSON is missing {exc}") from None

    @classmethod
    def gain(cls, D) -> "StateSpace":
        D = _arr(D)
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)

    @property
    def tfm(self) -> RatMatrix:
        return ss_to_tfm(self)


# ---------------------------------------------------------------------------
# exact linear algebra on Fraction lists


def _fmat(rows, cols, f=lambda i, j: Fraction(0)):
    return [[f(i, j) for j in range(cols)] for i in range(rows)]


def _fmul(X, Y):
    if not X or not Y:
        return [[Fraction(0)] * (len(Y[0]) if Y else 0) for _ in X]
    Yt = list(zip(*Y))
    return [[sum((a * b for a, b in zip(r, c) if a and b), Fraction(0)) for c in Yt] for r in X]


def _rref(M):
    """Reduced row echelon form of a Fraction matrix; returns (rows, pivots)."""
    a = [list(r) for r in M]
    m = len(a)
    ncol = len(a[0]) if m else 0
    piv = []
    r = 0
    for j in range(ncol):
        p = next((i for i in range(r, m) if a[i][j] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][j]
        a[r] = [x * inv for x in a[r]]
        for i in range(m):
            if i != r and a[i][j] != 0:
                f = a[i][j]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv.append(j)
        r += 1
        if r == m:
            break
    return a[:r], piv


def _to_float(M, shape):
    return np.array([[float(x) for x in r] for r in M], dtype=float).reshape(shape)


# ---------------------------------------------------------------------------


def realize(M: RatMatrix) -> StateSpace:
    """Minimal realization of a proper rational matrix.

    One controllable canonical block per column (shared column denominator),
    followed by exact removal of the unobservable subspace. The result is
    minimal and keeps its exact matrices for lossless round trips.
    """
    if not isinstance(M, RatMatrix):
        M = RatMatrix(M)
    if not M.is_proper():
        raise ValueError("realize needs a proper rational matrix")
    ny, nu = M.shape
    blocks = []
    D = _fmat(ny, nu)
    for j in range(nu):
        d = Poly([1])
        for i in range(ny):
            d = poly_lcm(d, M[i, j].den) if not M[i, j].is_zero() else d
        nj = d.degree
        rows = []
        for i in range(ny):
            f = M[i, j]
            q, r = divmod(f.num * d.exact_div(f.den), d)
            D[i][j] = q.coeffs[0] if q.degree == 0 else Fraction(0)
            rc = list(r.coeffs) + [Fraction(0)] * (nj - len(r.coeffs))
            rows.append(rc[:nj])
        blocks.append((d, nj, rows))
    n = sum(b[1] for b in blocks)
    A = _fmat(n, n)
    B = _fmat(n, nu)
    C = _fmat(ny, n)
    off = 0
    for j, (d, nj, rows) in enumerate(blocks):
        dc = d.coeffs
        for k in range(nj - 1):
            A[off + k][off + k + 1] = Fraction(1)
        for k in range(nj):
            A[off + nj - 1][off + k] = -dc[k]
        if nj:
            B[off + nj - 1][j] = Fraction(1)
        for i in range(ny):
            for k in range(nj):
                C[i][off + k] = rows[i][k]
        off += nj
    A, B, C = _observable_part(A, B, C)
    n = len(A)
    return StateSpace(
        _to_float(A, (n, n)), _to_float(B, (n, nu)), _to_float(C, (ny, n)), _to_float(D, (ny, nu)),
        exact=(A, B, C, D),
    )


def _observable_part(A, B, C):
    n = len(A)
    if n == 0:
        return A, B, C
    O, blk = [], [list(r) for r in C]
    for _ in range(n):
        O.extend(blk)
        R, piv = _rref(O)
        if len(R) == n:
            return A, B, C
        O = R
        blk = _fmul(blk, A)
    R, piv = _rref(O)
    if len(R) == n:
        return A, B, C
    RA = _fmul(R, A)
    Ao = [[r[p] for p in piv] for r in RA]
    Bo = _fmul(R, B)
    Co = [[r[p] for p in piv] for r in C]
    return Ao, Bo, Co


def ss_to_tfm(S: StateSpace) -> RatMatrix:
    """Transfer matrix ``C (sI - A)^-1 B + D`` by exact Leverrier-Faddeev.

    Float matrices are rationalized with their exact binary values, so the
    result is the exact transfer matrix of the stored floats.
    """
    if S.exact is not None:
        A, B, C, D = S.exact
    else:
        q = lambda M: [[as_fraction(x) for x in r] for r in M]
        A, B, C, D = q(S.A), q(S.B), q(S.C), q(S.D)
    n = len(A)
    ny, nu = S.shape
    if n == 0:
        return RatMatrix([[RatFn(D[i][j]) for j in range(nu)] for i in range(ny)], (ny, nu))
    # adj(sI - A) = sum_k N_k s^(n-1-k);  det = sum_k c_k s^(n-k)
    N = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    c = [Fraction(1)]
    CNB = []
    for k in range(1, n + 1):
        CNB.append(_fmul(_fmul(C, N), B))
        AN = _fmul(A, N)
        ck = -sum((AN[i][i] for i in range(n)), Fraction(0)) / k
        c.append(ck)
        N = [[AN[i][j] + (ck if i == j else 0) for j in range(n)] for i in range(n)]
    den = Poly(c[::-1])
    out = []
    for i in range(ny):
        row = []
        for j in range(nu):
            num = Poly([CNB[n - 1 - p][i][j] for p in range(n)])
            row.append(RatFn(num + den * D[i][j], den))
        out.append(row)
    return RatMatrix(out, (ny, nu))


def _orth(M: np.ndarray, tol: float) -> np.ndarray:
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U[:, s > tol]


def _krylov_basis(A, B, tol):
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1.0)
    V = _orth(B, tol * scale)
    W = V
    while V.shape[1] < n and W.shape[1]:
        X = A @ W
        X = X - V @ (V.T @ X)
        X = X - V @ (V.T @ X)
        W = _orth(X, tol * scale)
        V = np.hstack([V, W])
    return V


def minreal(S: StateSpace, tol: float | None = None) -> StateSpace:
    """Numerically minimal realization (controllable, then observable part).

    Orthogonal Krylov bases are grown block by block and truncated at
    ``tol`` relative to the system scale.
    """
    tol = TOL.svd_tol if tol is None else tol
    if S.n == 0:
        return S
    V = _krylov_basis(S.A, S.B, tol)
    A, B, C = V.T @ S.A @ V, V.T @ S.B, S.C @ V
    if A.shape[0] == 0:
        return StateSpace.gain(S.D)
    W = _krylov_basis(A.T, C.T, tol)
    A, B, C = W.T @ A @ W, W.T @ B, C @ W
    return StateSpace(A, B, C, S.D)


# ---------------------------------------------------------------------------
# zeros


class Zero(NamedTuple):
    z: complex
    mult: int
    u_z: np.ndarray
    y_z: np.ndarray


@dataclass
class ZeroSet:
    """Finite invariant zeros with unit input/output directions.

    ``everywhere`` is set when the pencil loses rank identically, i.e. the
    system is singular in the normal-rank sense and every ``s`` is a zero
    of the square pencil.
    """

    all: list
    normal_rank: int
    everywhere: bool = False

    @property
    def rhp(self) -> list:
        return [z for z in self.all if z.z.real > 0]

    @property
    def values(self) -> np.ndarray:
        return np.array([z.z for z in self.all for _ in range(z.mult)], dtype=complex)

    @property
    def rhp_values(self) -> np.ndarray:
        return np.array([z.z for z in self.rhp for _ in range(z.mult)], dtype=complex)

    def to_json(self) -> dict:
        def cz(v):
            return [float(np.real(v)), float(np.imag(v))]

        def row(z):
            return {
                "z": cz(z.z),
                "mult": z.mult,
                "u_z": [cz(x) for x in z.u_z],
                "y_z": [cz(x) for x in z.y_z],
            }

        return {
            "all": [row(z) for z in self.all],
            "rhp": [row(z) for z in self.rhp],
            "normal_rank": self.normal_rank,
            "everywhere": self.everywhere,
        }


def _pencil(S: StateSpace):
    n = S.n
    M = np.block([[S.A, S.B], [S.C, S.D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    return M, N


def _normal_rank(S: StateSpace, rng) -> int:
    scale = 1.0 + np.max(np.abs(S.poles())) if S.n else 1.0
    pts = scale * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    ranks = []
    for s in pts:
        sv = np.linalg.svd(S(s), compute_uv=False)
        ranks.append(int(np.sum(sv > 1e-9 * max(sv[0] if sv.size else 0, 1e-300))))
    return max(ranks) if ranks else 0


def _square_pencil_zeros(S: StateSpace) -> np.ndarray:
    M, N = _pencil(S)
    if M.shape[0] == 0:
        return np.zeros(0, complex)
    w = sla.eigvals(M, N, homogeneous_eigvals=True)
    alpha, beta = w
    ok = np.abs(beta) > 1e-10 * np.abs(alpha) + 1e-14
    return alpha[ok] / beta[ok]


def _pencil_singular(S: StateSpace) -> bool:
    M, N = _pencil(S)
    rng = np.random.default_rng(7)
    dim = M.shape[0]
    for s in rng.standard_normal(2) * 3 + 0.37:
        sv = np.linalg.svd(M - s * N, compute_uv=False)
        if sv[-1] > 1e-10 * sv[0]:
            return False
    return dim > 0


def _sv_drop(S: StateSpace, z: complex, rho: int) -> float:
    """Relative size of the (n + rho)-th singular value of the pencil at z."""
    M, N = _pencil(S)
    sv = np.linalg.svd(M - z * N, compute_uv=False)
    k = S.n + rho - 1
    return sv[k] / sv[0] if k < sv.size else 0.0


def _cluster(vals, tol):
    out = []
    for v in sorted(vals, key=lambda x: (round(x.real, 8), x.imag)):
        for c in out:
            if abs(v - c[0]) <= tol * max(1.0, abs(c[0])):
                c[1].append(v)
                break
        else:
            out.append([v, [v]])
    return [(np.mean(c[1]), len(c[1])) for c in out]


def invariant_zeros(S, tol: float | None = None, seed: int = 0) -> ZeroSet:
    """Invariant zeros from the Rosenbrock pencil ``[[A - sI, B], [C, D]]``.

    Square regular systems use the generalized eigenvalues directly. Other
    shapes are compressed to the normal rank with two independent random
    projections; candidates common to both and confirmed by a singular-value
    drop of the original pencil are kept. Directions come from the SVD of
    ``P(z)`` at the vanishing singular value.
    """
    if isinstance(S, RatMatrix):
        S = realize(S)
    tol = TOL.zero_tol if tol is None else tol
    rng = np.random.default_rng(seed)
    rho = _normal_rank(S, rng)
    ny, nu = S.shape
    everywhere = False
    if rho == 0:
        return ZeroSet([], 0, everywhere=S.n >= 0)
    if ny == nu == rho:
        if _pencil_singular(S):
            everywhere = True
            cands = np.zeros(0, complex)
        else:
            cands = _square_pencil_zeros(S)
    else:
        everywhere = _pencil_singular(S) if ny == nu else False
        sets = []
        for k in range(2):
            L = rng.standard_normal((rho, ny))
            R = rng.standard_normal((nu, rho))
            Sc = StateSpace(S.A, S.B @ R, L @ S.C, L @ S.D @ R)
            sets.append(_square_pencil_zeros(Sc))
        cands = []
        for z in sets[0]:
            if sets[1].size and np.min(np.abs(sets[1] - z)) < 1e-5 * max(1, abs(z)):
                cands.append(z)
        cands = np.array([z for z in cands if _sv_drop(S, z, rho) < tol], dtype=complex)
    # symmetrize conjugates and cluster multiplicities
    cands = [complex(z.real, 0.0) if abs(z.imag) < 1e-9 * max(1, abs(z)) else complex(z) for z in cands]
    zeros = []
    for z, m in _cluster(cands, 1e-5):
        if abs(z.imag) < 1e-9 * max(1, abs(z)):
            z = complex(z.real, 0.0)
        u_z, y_z = _zero_directions(S, z, rho)
        zeros.append(Zero(complex(z), m, u_z, y_z))
    zeros.sort(key=lambda q: (q.z.real, q.z.imag))
    return ZeroSet(zeros, rho, everywhere)


def _pencil_directions(S: StateSpace, z: complex):
    """Input and output parts of the null vectors of the Rosenbrock pencil at ``z``."""
    M, N = _pencil(S)
    U, _, Vh = np.linalg.svd(M - z * N)
    u = Vh[-1].conj()[S.n :]
    y = U[:, -1][S.n :]
    return u, y


def _zero_directions(S: StateSpace, z: complex, rho: int):
    # a zero that coincides with a pole leaves P(z) undefined; use the pencil there
    if S.n and np.linalg.cond(z * np.eye(S.n) - S.A) > 1e10:
        u, y = _pencil_directions(S, z)
        if np.linalg.norm(u) > 1e-12 and np.linalg.norm(y) > 1e-12:
            return u / np.linalg.norm(u), y / np.linalg.norm(y)
    Pz = S(z + 1e-9) if S.n and np.linalg.cond(z * np.eye(S.n) - S.A) > 1e14 else S(z)
    U, s, Vh = np.linalg.svd(Pz)
    k = min(rho, len(s)) - 1 if rho else 0
    # vanishing singular value is the smallest of the leading rho
    k = max(k, 0)
    u = Vh.conj().T[:, min(k, Vh.shape[0] - 1)]
    y = U[:, min(k, U.shape[1] - 1)]
    return u / np.linalg.norm(u), y / np.linalg.norm(y)


def zero_polynomial(P: RatMatrix) -> Poly:
    """Monic polynomial whose roots are the transmission zeros of ``P``.

    Product of the Smith-McMillan numerators, exact.
    """
    Pp, _, delta = clear_denominators(P)
    dec = smith_form(Pp)
    z = Poly([1])
    for d in dec.invariant_factors:
        z = z * RatFn(d, delta).num.monic()
    return z


# ---------------------------------------------------------------------------


def pseudo_inverse(P: RatMatrix) -> RatMatrix:
    """Exact left inverse ``(P^T P)^-1 P^T`` of a full-column-rank matrix."""
    if not isinstance(P, RatMatrix):
        P = RatMatrix(P)
    r, _ = rank_rs(P)
    if r != P.cols:
        raise ValueError(f"pseudo_inverse needs full column rank (rank {r}, {P.cols} columns)")
    Pt = P.T()
    return (Pt @ P).inv() @ Pt


def is_stable(S, margin: float | None = None) -> bool:
    """All poles strictly left of ``-margin``."""
    margin = TOL.stab_margin if margin is None else margin
    if isinstance(S, RatMatrix):
        S = realize(S)
    return bool(S.n == 0 or np.max(np.linalg.eigvals(S.A).real) < -margin)


def _as_ss(X) -> StateSpace:
    if isinstance(X, StateSpace):
        return X
    if not isinstance(X, RatMatrix):
        X = RatMatrix(X)
    return realize(X)


def closed_loop_A(P, K) -> np.ndarray:
    """State matrix of the negative-feedback loop ``u = K (r - y)``, ``y = P u``."""
    P, K = _as_ss(P), _as_ss(K)
    W = np.eye(P.n_u) + K.D @ P.D
    Wi = np.linalg.inv(W)
    # u = Wi (Ck xk - Dk Cp xp) plus external terms
    Uxp = -Wi @ K.D @ P.C
    Uxk = Wi @ K.C
    Yxp = P.C + P.D @ Uxp
    Yxk = P.D @ Uxk
    return np.block(
        [
            [P.A + P.B @ Uxp, P.B @ Uxk],
            [-K.B @ Yxp, K.A - K.B @ Yxk],
        ]
    )


def internal_stability(P, K, margin: float | None = None) -> bool:
    """Four-block internal stability of the unity negative-feedback loop.

    All four blocks of ``[[I, K], [-P, I]]^-1`` share the state matrix of the
    loop built from minimal realizations of ``P`` and ``K``; they are all
    stable iff that matrix is Hurwitz.
    """
    margin = TOL.stab_margin if margin is None else margin
    P, K = minreal(_as_ss(P)), minreal(_as_ss(K))
    if P.n_u != K.n_y or P.n_y != K.n_u:
        raise ValueError("P and K are not dimension compatible")
    try:
        Acl = closed_loop_A(P, K)
    except np.linalg.LinAlgError:
        return False  # ill-posed loop
    return bool(Acl.size == 0 or np.max(np.linalg.eigvals(Acl).real) < -margin)


# ---------------------------------------------------------------------------
# frequency domain


def freq_response(S: StateSpace, omega: Sequence[float]) -> np.ndarray:
    """Singular values of ``S(j w)`` for each ``w``; shape ``(len(w), min(n_y, n_u))``."""
    omega = np.asarray(omega, dtype=float)
    if S.n:
        H, Q = sla.hessenberg(S.A, calc_q=True)
        B, C = Q.T @ S.B, S.C @ Q
    out = np.empty((omega.size, min(S.shape)))
    I = np.eye(S.n)
    for k, w in enumerate(omega):
        G = S.D.astype(complex)
        if S.n:
            G = G + C @ np.linalg.solve(1j * w * I - H, B)
        out[k] = np.linalg.svd(G, compute_uv=False)
    return out


def sigma_max(S: StateSpace, w: float) -> float:
    return float(np.linalg.svd(S(1j * w), compute_uv=False)[0]) if min(S.shape) else 0.0


def _imag_axis_freqs(S: StateSpace, gamma: float) -> np.ndarray:
    A, B, C, D = S.A, S.B, S.C, S.D
    R = gamma**2 * np.eye(S.n_u) - D.T @ D
    Ri = np.linalg.inv(R)
    Ah = A + B @ Ri @ D.T @ C
    H = np.block(
        [
            [Ah, B @ Ri @ B.T],
            [-C.T @ (np.eye(S.n_y) + D @ Ri @ D.T) @ C, -Ah.T],
        ]
    )
    ev = np.linalg.eigvals(H)
    scale = max(1.0, np.max(np.abs(ev)))
    w = ev.imag[(np.abs(ev.real) < 1e-7 * scale) & (ev.imag >= 0)]
    return np.sort(w)


def hinf_norm(S, tol: float | None = None, return_freq: bool = False):
    """H-infinity norm of a stable system.

    Level-set iteration on the imaginary-axis eigenvalues of the
    Hamiltonian, started from the largest of the DC, high-frequency and
    pole-frequency gains. Converges to ``tol`` relative accuracy.
    """
    tol = TOL.hinf_tol if tol is None else tol
    S = _as_ss(S)
    if not is_stable(S):
        raise ValueError("hinf_norm needs a stable system")
    if min(S.shape) == 0:
        return (0.0, 0.0) if return_freq else 0.0
    dnorm = np.linalg.norm(S.D, 2)
    if S.n == 0:
        return (dnorm, np.inf) if return_freq else dnorm
    cand = [0.0]
    p = S.poles()
    for lam in p:
        cand.append(abs(lam))
        if abs(lam.imag) > 0:
            cand.append(abs(lam.imag))
    cand = np.unique(cand)
    vals = [sigma_max(S, w) for w in cand]
    k = int(np.argmax(vals))
    glb, wpk = vals[k], cand[k]
    if dnorm > glb:
        glb, wpk = dnorm, np.inf
    if glb == 0.0:
        return (0.0, 0.0) if return_freq else 0.0
    for _ in range(100):
        gamma = glb * (1 + 2 * tol)
        w = _imag_axis_freqs(S, gamma)
        if w.size == 0:
            break
        ws = np.concatenate([w, [w[-1]]])
        mids = 0.5 * (ws[:-1] + ws[1:]) if w.size > 1 else w
        vals = [sigma_max(S, m) for m in mids]
        k = int(np.argmax(vals))
        if vals[k] <= glb * (1 + tol):
            break
        glb, wpk = vals[k], mids[k]
    return (glb, wpk) if return_freq else glb


# ---------------------------------------------------------------------------
# balanced truncation


def _gram_factor(X: np.ndarray) -> np.ndarray:
    X = 0.5 * (X + X.T)
    w, V = np.linalg.eigh(X)
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def _gramians(S: StateSpace):
    Wc = sla.solve_continuous_lyapunov(S.A, -S.B @ S.B.T)
    Wo = sla.solve_continuous_lyapunov(S.A.T, -S.C.T @ S.C)
    return Wc, Wo


def hankel_singular_values(S: StateSpace) -> np.ndarray:
    if not is_stable(S):
        raise ValueError("Hankel singular values need a stable system")
    if S.n == 0:
        return np.zeros(0)
    Wc, Wo = _gramians(S)
    Lc, Lo = _gram_factor(Wc), _gram_factor(Wo)
    return np.linalg.svd(Lo.T @ Lc, compute_uv=False)


def balanced_reduce(S: StateSpace, tol: float = 0.0, order: int | None = None):
    """Square-root balanced truncation.

    Keeps Hankel singular values above ``max(tol, svd_tol) * sigma_max`` (or the
    leading ``order`` ones). Returns ``(reduced, hsv, error_bound)`` where the
    bound is twice the sum of the discarded values.
    """
    if not is_stable(S):
        raise ValueError("balanced_reduce needs a stable system")
    if S.n == 0:
        return S, np.zeros(0), 0.0
    Wc, Wo = _gramians(S)
    Lc, Lo = _gram_factor(Wc), _gram_factor(Wo)
    U, hsv, Vt = np.linalg.svd(Lo.T @ Lc)
    thr = max(tol, TOL.svd_tol) * hsv[0] if hsv.size and hsv[0] > 0 else np.inf
    r = int(np.sum(hsv > thr)) if order is None else int(order)
    if r == 0:
        return StateSpace.gain(S.D), hsv, 2 * float(np.sum(hsv))
    si = 1.0 / np.sqrt(hsv[:r])
    T = Lc @ Vt[:r].T * si
    Ti = (si[:, None] * U[:, :r].T) @ Lo.T
    red = StateSpace(Ti @ S.A @ T, Ti @ S.B, S.C @ T, S.D)
    return red, hsv, 2 * float(np.sum(hsv[r:]))


# ---------------------------------------------------------------------------
# interconnections


def series(S1: StateSpace, S2: StateSpace) -> StateSpace:
    """``S2 @ S1``: the output of ``S1`` drives ``S2``."""
    if S1.n_y != S2.n_u:
        raise ValueError("series: dimension mismatch")
    A = np.block([[S1.A, np.zeros((S1.n, S2.n))], [S2.B @ S1.C, S2.A]])
    B = np.vstack([S1.B, S2.B @ S1.D])
    C = np.hstack([S2.D @ S1.C, S2.C])
    return StateSpace(A, B, C, S2.D @ S1.D)


def parallel(S1: StateSpace, S2: StateSpace, sign: float = 1.0) -> StateSpace:
    if S1.shape != S2.shape:
        raise ValueError("parallel: dimension mismatch")
    A = sla.block_diag(S1.A, S2.A)
    return StateSpace(A, np.vstack([S1.B, S2.B]), np.hstack([S1.C, sign * S2.C]), S1.D + sign * S2.D)


def append(*systems: StateSpace) -> StateSpace:
    """Block-diagonal stacking of independent systems."""
    A = sla.block_diag(*[s.A for s in systems])
    B = sla.block_diag(*[s.B for s in systems])
    C = sla.block_diag(*[s.C for s in systems])
    D = sla.block_diag(*[s.D for s in systems])
    n = A.shape[0] if A.size else 0
    return StateSpace(A.reshape(n, n), B.reshape(n, -1) if n else np.zeros((0, D.shape[1])),
                      C.reshape(D.shape[0], n), D)


def feedback(S1: StateSpace, S2: StateSpace, sign: float = -1.0) -> StateSpace:
    """Closed loop ``y = S1 (r + sign * S2 y)`` from ``r`` to ``y``."""
    if S1.n_u != S2.n_y or S1.n_y != S2.n_u:
        raise ValueError("feedback: dimension mismatch")
    W = np.eye(S1.n_u) - sign * S2.D @ S1.D
    Wi = np.linalg.inv(W)
    # u1 = Wi (r + sign * (C2 x2 + D2 C1 x1))
    U1x1 = sign * Wi @ S2.D @ S1.C
    U1x2 = sign * Wi @ S2.C
    Y1x1 = S1.C + S1.D @ U1x1
    Y1x2 = S1.D @ U1x2
    A = np.block(
        [
            [S1.A + S1.B @ U1x1, S1.B @ U1x2],
            [S2.B @ Y1x1, S2.A + S2.B @ Y1x2],
        ]
    )
    B = np.vstack([S1.B @ Wi, S2.B @ S1.D @ Wi])
    C = np.hstack([Y1x1, Y1x2])
    return StateSpace(A, B, C, S1.D @ Wi)


def lft(G: StateSpace, K: StateSpace) -> StateSpace:
    """Lower fractional transformation ``F_l(G, K)``.

    ``K`` maps the last ``K.n_u`` outputs of ``G`` to its last ``K.n_y`` inputs.
    """
    ny2, nu2 = K.n_u, K.n_y
    nz, nw = G.n_y - ny2, G.n_u - nu2
    B1, B2 = G.B[:, :nw], G.B[:, nw:]
    C1, C2 = G.C[:nz], G.C[nz:]
    D11, D12 = G.D[:nz, :nw], G.D[:nz, nw:]
    D21, D22 = G.D[nz:, :nw], G.D[nz:, nw:]
    W = np.eye(nu2) - K.D @ D22
    Wi = np.linalg.inv(W)
    # u = Wi (Ck xk + Dk C2 x + Dk D21 w)
    Ux = Wi @ K.D @ C2
    Uk = Wi @ K.C
    Uw = Wi @ K.D @ D21
    Yx = C2 + D22 @ Ux
    Yk = D22 @ Uk
    Yw = D21 + D22 @ Uw
    A = np.block([[G.A + B2 @ Ux, B2 @ Uk], [K.B @ Yx, K.A + K.B @ Yk]])
    B = np.vstack([B1 + B2 @ Uw, K.B @ Yw])
    C = np.hstack([C1 + D12 @ Ux, D12 @ Uk])
    D = D11 + D12 @ Uw
    return StateSpace(A, B, C, D)
