"""Time-domain simulation of inversion-based tracking.

Signals are generated in the time domain and held over each step; systems
are discretized exactly for piecewise-constant inputs. Whole interconnections
are assembled into one discrete linear system and propagated in a tight
loop, with outputs reconstructed by a single matrix product at the end.

``simulate_exact`` is the lossless alternative for rational desired outputs:
the input ``U = Xi Y`` and the output ``Y`` are both impulse responses of
known realizations, so the cascade is autonomous and propagates with the
matrix exponential only.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .lti import StateSpace, realize
from .polymat import RatMatrix
from .ratcore import RatFn
from .tolerances import TOL

__all__ = [
    "Signal",
    "signal_from_spec",
    "Discrete",
    "discretize",
    "SimTrace",
    "simulate_open",
    "simulate_exact",
    "Scenario",
    "simulate_closed_loop",
    "DecayFit",
    "fit_decay",
    "fit_state",
]


# ---------------------------------------------------------------------------
# signals


class Signal:
    """Scalar reference or disturbance signal.

    Built from a spec dict: ``{"type": "step", "amp": a, "t0": t}``,
    ``{"type": "sin", "amp": a, "omega": w}`` (optional ``"phase"``), or
    ``{"type": "ratfn", "num": [...], "den": [...]}``, the inverse Laplace
    transform of a strictly proper rational function. Lists of specs add up.
    """

    def __init__(self, spec):
        self.specs = spec if isinstance(spec, list) else [spec]
        self._ss = []
        for sp in self.specs:
            kind = sp.get("type")
            if kind not in ("step", "sin", "ratfn", "zero"):
                raise ValueError(f"unknown signal type {kind!r}")
            if kind == "ratfn":
                f = RatFn.from_json(sp)
                if not (f.is_zero() or f.is_strictly_proper()):
                    raise ValueError("rational signals must be strictly proper")
                self._ss.append(realize(RatMatrix([[f]])))
            else:
                self._ss.append(None)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for sp, S in zip(self.specs, self._ss):
            kind = sp["type"]
            if kind == "step":
                out += float(sp.get("amp", 1.0)) * (t >= float(sp.get("t0", 0.0)))
            elif kind == "sin":
                out += float(sp.get("amp", 1.0)) * np.sin(float(sp["omega"]) * t + float(sp.get("phase", 0.0)))
            elif kind == "ratfn" and S.n:
                out += _impulse(S, t)
        return out

    def to_json(self):
        return self.specs if len(self.specs) > 1 else self.specs[0]


def _impulse(S: StateSpace, t: np.ndarray) -> np.ndarray:
    """Impulse response samples of a SISO strictly proper system."""
    w, V = np.linalg.eig(S.A)
    if np.linalg.cond(V) < 1e8:
        c = (S.C @ V)[0]
        b = np.linalg.solve(V, S.B)[:, 0]
        return np.real(np.exp(np.outer(t, w)) @ (c * b))
    out = np.empty(t.size)
    for k, tk in enumerate(t.ravel()):
        out[k] = (S.C @ sla.expm(S.A * tk) @ S.B)[0, 0]
    return out.reshape(t.shape)


def signal_from_spec(spec) -> Signal:
    return spec if isinstance(spec, Signal) else Signal(spec)


def _sample(signals, t: np.ndarray, n: int) -> np.ndarray:
    if signals is None:
        return np.zeros((t.size, n))
    if callable(signals) and not isinstance(signals, (list, tuple, Signal)):
        v = np.asarray(signals(t), dtype=float)
        return v.reshape(t.size, n)
    if isinstance(signals, (Signal, dict)):
        signals = [signals] * n
    if len(signals) != n:
        raise ValueError(f"expected {n} signal channels, got {len(signals)}")
    return np.column_stack([signal_from_spec(s)(t) for s in signals])


# ---------------------------------------------------------------------------
# discretization


@dataclass
class Discrete:
    Ad: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.Ad.shape[0]


def discretize(S: StateSpace, dt: float) -> Discrete:
    """Zero-order-hold discretization from ``expm([[A, B], [0, 0]] dt)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, m = S.n, S.n_u
    if n == 0:
        return Discrete(np.zeros((0, 0)), np.zeros((0, m)), S.C, S.D, dt)
    Maug = np.zeros((n + m, n + m))
    Maug[:n, :n] = S.A
    Maug[:n, n:] = S.B
    E = sla.expm(Maug * dt)
    return Discrete(E[:n, :n], E[:n, n:], S.C, S.D, dt)


# ---------------------------------------------------------------------------
# traces


@dataclass
class SimTrace:
    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_pi: np.ndarray
    e: np.ndarray
    u_ff: np.ndarray | None = None
    u_fb: np.ndarray | None = None
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def e_norm(self) -> np.ndarray:
        return np.linalg.norm(self.e, axis=1)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        nu, ny = self.u.shape[1], self.y.shape[1]
        w.writerow(
            ["t"] + [f"u{i+1}" for i in range(nu)] + [f"y{i+1}" for i in range(ny)]
            + [f"ypi{i+1}" for i in range(ny)] + [f"e{i+1}" for i in range(ny)]
        )
        data = np.hstack([self.t[:, None], self.u, self.y, self.y_pi, self.e])
        for row in data:
            w.writerow([format(float(x), ".17g") for x in row])
        return buf.getvalue() if fh is None else ""


def _run(M: np.ndarray, NV: np.ndarray, x0: np.ndarray, cap: float):
    """Propagate ``x_{k+1} = M x_k + NV[k]``; returns the state history and a divergence flag."""
    steps = NV.shape[0]
    X = np.empty((steps, x0.size))
    x = x0.astype(float).copy()
    check = 256
    for k in range(steps):
        X[k] = x
        x = M @ x + NV[k]
        if k % check == 0 and not (np.max(np.abs(x)) < cap):
            return X[: k + 1], True
    return X, False


def fit_state(v, n: int) -> np.ndarray:
    """Initial-state vector of length ``n``: truncated or zero-padded."""
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float).ravel()
    if v.size >= n:
        return v[:n].copy()
    return np.concatenate([v, np.zeros(n - v.size)])


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()[:16]


def simulate_exact(P, Xi: RatMatrix, Y: RatMatrix, x0=None, xbar0=None, t_final: float = 10.0,
                   dt: float = 1e-3, cap: float | None = None) -> SimTrace:
    """Open-loop inversion with a rational desired output, without discretization error.

    ``u`` is the impulse response of ``U = Xi Y``; a direct term of ``U``
    acts as an impulse and shifts the plant state by ``B_P D_U`` at ``t = 0``.
    ``xbar0`` is added to the initial state of the realization of ``U``.
    """
    cap = TOL.overflow_cap if cap is None else cap
    Pss = P if isinstance(P, StateSpace) else realize(P)
    U = Xi @ Y
    if not U.is_proper():
        raise ValueError("U = Xi Y is improper; it has impulsive derivatives")
    SU, SY = realize(U), realize(Y)
    nY, nU, nP = SY.n, SU.n, Pss.n
    A = sla.block_diag(SY.A, np.block([[SU.A, np.zeros((nU, nP))], [Pss.B @ SU.C, Pss.A]]))
    z0 = np.concatenate([SY.B[:, 0], SU.B[:, 0] + fit_state(xbar0, nU), fit_state(x0, nP) + Pss.B @ SU.D[:, 0]])
    t = np.arange(0.0, t_final + 0.5 * dt, dt)
    Phi = sla.expm(A * dt)
    X, div = _run(Phi, np.zeros((t.size, A.shape[0])), z0, cap)
    t = t[: X.shape[0]]
    yd = X[:, :nY] @ SY.C.T
    u = X[:, nY : nY + nU] @ SU.C.T
    y = X[:, nY + nU :] @ Pss.C.T + u @ Pss.D.T
    e = yd - y
    return SimTrace(t, u, y, y.copy(), e, diverged=div, meta={"solver": "exact-exponential", "dt": dt})


def simulate_open(plant, inverse, y_d, x0=None, xbar0=None, t_final: float = 10.0, dt: float = 1e-3,
                  cap: float | None = None) -> SimTrace:
    """Cascade ``inverse -> plant`` driven by the desired output.

    With a rational ``inverse`` and a rational ``y_d`` this is
    :func:`simulate_exact`; otherwise ``inverse`` is a state-space operator
    and ``y_d`` a list of signal specs (one per output channel), simulated
    with a zero-order hold.
    """
    if isinstance(inverse, RatMatrix) and isinstance(y_d, RatMatrix):
        return simulate_exact(plant, inverse, y_d, x0, xbar0, t_final, dt, cap)
    cap = TOL.overflow_cap if cap is None else cap
    Pss = plant if isinstance(plant, StateSpace) else realize(plant)
    Iss = inverse if isinstance(inverse, StateSpace) else realize(inverse)
    if Iss.n_u != Pss.n_y or Iss.n_y != Pss.n_u:
        raise ValueError("inverse and plant dimensions do not match")
    t = np.arange(0.0, t_final + 0.5 * dt, dt)
    R = _sample(y_d, t, Pss.n_y)
    di, dp = discretize(Iss, dt), discretize(Pss, dt)
    ni, npl = di.n, dp.n
    # u = Ci xi + Di r ; xp+ = Ap xp + Bp u
    M = np.block([[di.Ad, np.zeros((ni, npl))], [dp.Bd @ Iss.C, dp.Ad]])
    N = np.vstack([di.Bd, dp.Bd @ Iss.D])
    x0v = np.concatenate([fit_state(xbar0, ni), fit_state(x0, npl)])
    X, div = _run(M, R @ N.T, x0v, cap)
    t, R = t[: X.shape[0]], R[: X.shape[0]]
    u = X[:, :ni] @ Iss.C.T + R @ Iss.D.T
    y = X[:, ni:] @ Pss.C.T + u @ Pss.D.T
    return SimTrace(t, u, y, y.copy(), R - y, diverged=div,
                    meta={"solver": "zoh", "dt": dt})


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class Scenario:
    """Dual feedforward/feedback tracking run.

    ``inverse_ff`` maps the reference to ``u_ff``; ``inverse_fb`` maps the
    (optionally all-pass filtered, delayed) model mismatch ``y_Pi - y`` to
    ``u_fb``; the applied input is ``u_ff - u_fb``. ``x0`` initializes the
    actual plant, ``x0_nominal`` the internal nominal model.
    """

    plant_nominal: object
    inverse_ff: StateSpace
    inverse_fb: StateSpace | None = None
    plant_actual: object = None
    allpass_filter: StateSpace | None = None
    allpass_filter_in_fb: bool = False
    reference: list | None = None
    disturbance: list | None = None
    x0: Sequence | None = None
    x0_nominal: Sequence | None = None
    xbar0_1: Sequence | None = None
    xbar0_2: Sequence | None = None
    t_final: float = 10.0
    dt: float = 1e-3
    loop_delay_steps: int = 1
    name: str = "scenario"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.loop_delay_steps < 1:
            raise ValueError("loop_delay_steps must be at least 1")

    def describe(self) -> dict:
        sig = lambda s: None if s is None else [signal_from_spec(x).to_json() if not callable(x) or isinstance(x, Signal) else "callable" for x in s]
        return {
            "name": self.name,
            "t_final": self.t_final,
            "dt": self.dt,
            "loop_delay_steps": self.loop_delay_steps,
            "allpass_filter_in_fb": self.allpass_filter_in_fb,
            "reference": sig(self.reference),
            "disturbance": sig(self.disturbance),
            "x0": None if self.x0 is None else list(map(float, self.x0)),
            "xbar0_1": None if self.xbar0_1 is None else list(map(float, self.xbar0_1)),
            "xbar0_2": None if self.xbar0_2 is None else list(map(float, self.xbar0_2)),
        }


class _Layout:
    """Bookkeeping of state blocks and linear signal maps on ``[xi; v]``."""

    def __init__(self):
        self.blocks = {}
        self.n = 0

    def add(self, name, size):
        self.blocks[name] = (self.n, size)
        self.n += size

    def sel(self, name, nv):
        o, k = self.blocks[name]
        R = np.zeros((k, self.n + nv))
        R[:, o : o + k] = np.eye(k)
        return R


def simulate_closed_loop(sc: Scenario) -> SimTrace:
    """Simulate the feedforward/feedback loop of a :class:`Scenario`."""
    P = sc.plant_nominal if isinstance(sc.plant_nominal, StateSpace) else realize(sc.plant_nominal)
    Pa = sc.plant_actual if sc.plant_actual is not None else P
    Pa = Pa if isinstance(Pa, StateSpace) else realize(Pa)
    ff = sc.inverse_ff
    fb = sc.inverse_fb if sc.inverse_fb is not None else ff
    ny, nu = P.n_y, P.n_u
    if Pa.shape != P.shape or ff.shape != (nu, ny) or fb.shape != (nu, ny):
        raise ValueError("scenario blocks have inconsistent dimensions")
    if sc.allpass_filter_in_fb:
        if sc.allpass_filter is None:
            raise ValueError("allpass filter requested but not supplied")
        Fl = sc.allpass_filter
        if Fl.shape == (1, 1) and ny > 1:
            Fl = StateSpace(
                np.kron(np.eye(ny), Fl.A), np.kron(np.eye(ny), Fl.B), np.kron(np.eye(ny), Fl.C), np.kron(np.eye(ny), Fl.D)
            )
    else:
        Fl = StateSpace.gain(np.eye(ny))
    dt = sc.dt
    d = {k: discretize(s, dt) for k, s in (("ff", ff), ("fb", fb), ("P", P), ("Pa", Pa), ("F", Fl))}
    L = _Layout()
    for k in ("ff", "fb", "P", "Pa", "F"):
        L.add(k, d[k].n)
    nd = sc.loop_delay_steps
    L.add("q", nd * ny)
    nv = 2 * ny  # [r; dist]
    N = L.n
    Vr = np.zeros((ny, N + nv))
    Vr[:, N : N + ny] = np.eye(ny)
    Vd = np.zeros((ny, N + nv))
    Vd[:, N + ny :] = np.eye(ny)
    oq = L.blocks["q"][0]
    q_last = np.zeros((ny, N + nv))
    q_last[:, oq + (nd - 1) * ny : oq + nd * ny] = np.eye(ny)

    u_ff = ff.C @ L.sel("ff", nv) + ff.D @ Vr
    u_fb = fb.C @ L.sel("fb", nv) + fb.D @ q_last
    u_c = u_ff - u_fb
    y = P.C @ L.sel("P", nv) + P.D @ u_c
    y_pi = Pa.C @ L.sel("Pa", nv) + Pa.D @ u_c + Vd
    y_delta = y_pi - y
    y_bar = Fl.C @ L.sel("F", nv) + Fl.D @ y_delta

    T = np.zeros((N, N + nv))

    def put(name, rows):
        o, k = L.blocks[name]
        T[o : o + k] = rows

    put("ff", d["ff"].Ad @ L.sel("ff", nv)[:, :] + d["ff"].Bd @ Vr) if d["ff"].n else None
    put("fb", d["fb"].Ad @ L.sel("fb", nv) + d["fb"].Bd @ q_last) if d["fb"].n else None
    put("P", d["P"].Ad @ L.sel("P", nv) + d["P"].Bd @ u_c) if d["P"].n else None
    put("Pa", d["Pa"].Ad @ L.sel("Pa", nv) + d["Pa"].Bd @ u_c) if d["Pa"].n else None
    put("F", d["F"].Ad @ L.sel("F", nv) + d["F"].Bd @ y_delta) if d["F"].n else None
    qrows = np.zeros((nd * ny, N + nv))
    qrows[:ny] = y_bar
    for i in range(1, nd):
        qrows[i * ny : (i + 1) * ny, oq + (i - 1) * ny : oq + i * ny] = np.eye(ny)
    T[oq : oq + nd * ny] = qrows

    t = np.arange(0.0, sc.t_final + 0.5 * dt, dt)
    Rv = _sample(sc.reference, t, ny)
    Dv = _sample(sc.disturbance, t, ny)
    V = np.hstack([Rv, Dv])
    x0 = np.zeros(N)
    for name, vec in (("ff", sc.xbar0_1), ("fb", sc.xbar0_2), ("P", sc.x0_nominal), ("Pa", sc.x0)):
        o, k = L.blocks[name]
        x0[o : o + k] = fit_state(vec, k)
    M, Nm = T[:, :N], T[:, N:]
    X, div = _run(M, V @ Nm.T, x0, TOL.overflow_cap)
    k = X.shape[0]
    t, V = t[:k], V[:k]
    XV = np.hstack([X, V])
    out = lambda R: XV @ R.T
    Y_pi = out(y_pi)
    tr = SimTrace(
        t,
        out(u_c),
        out(y),
        Y_pi,
        V[:, :ny] - Y_pi,
        u_ff=out(u_ff),
        u_fb=out(u_fb),
        diverged=div,
        meta={"solver": "zoh-closed-loop", "dt": dt, "scenario": sc.name, "hash": _hash(sc.describe())},
    )
    return tr


# ---------------------------------------------------------------------------
# decay fit


@dataclass
class DecayFit:
    """``||e(t)|| <= alpha ||e(t0)|| exp(-beta (t - t0)) + phi`` fitted on a window."""

    alpha: float
    beta: float
    phi: float
    fit_window: tuple
    residual: float
    amplitude: float = 0.0  # alpha * ||e(t0)||

    def to_json(self) -> dict:
        f = lambda x: x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
        return {
            "alpha": f(self.alpha),
            "beta": f(self.beta),
            "phi": self.phi,
            "amplitude": f(self.amplitude),
            "fit_window": list(self.fit_window),
            "residual": self.residual,
        }


def fit_decay(trace, window: tuple | None = None, rel_floor: float = 1e-3) -> DecayFit:
    """Exponential envelope fit of the tracking error norm.

    ``phi`` is the mean norm over the trailing 10% of the window; a straight
    line is fitted to ``log(||e|| - phi)`` over samples whose excess is above
    ``rel_floor`` times its maximum.
    """
    if isinstance(trace, SimTrace):
        t, en = trace.t, trace.e_norm
    else:
        t, en = trace
        t, en = np.asarray(t, float), np.asarray(en, float)
        if en.ndim > 1:
            en = np.linalg.norm(en, axis=1)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, en = t[m], en[m]
    if t.size == 0:
        raise ValueError("empty fit window")
    win = (float(t[0]), float(t[-1]))
    if not np.any(en > 0):
        return DecayFit(0.0, math.inf, 0.0, win, 0.0, 0.0)
    ntail = max(1, int(math.ceil(0.1 * t.size)))
    phi = float(np.mean(en[-ntail:]))
    ex = en - phi
    sel = ex > rel_floor * np.max(ex) if np.max(ex) > 0 else np.zeros_like(ex, bool)
    if np.count_nonzero(sel) < 2:
        return DecayFit(0.0, math.inf, phi, win, 0.0, 0.0)
    tt = t[sel] - t[0]
    ly = np.log(ex[sel])
    A = np.column_stack([np.ones_like(tt), -tt])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    c, beta = coef
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    amp = float(np.exp(c))
    e0 = float(en[0])
    alpha = amp / e0 if e0 > 0 else amp
    return DecayFit(alpha, float(beta), phi, win, resid, amp)
