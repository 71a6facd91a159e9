"""Command-line front end.

``stabinv analyze | invert | synth | simulate | reproduce``. Plants are JSON
files holding a rational matrix (``{"entries": [[{"num": [...], "den":
[...]}, ...], ...]}``), a state-space model (``{"A", "B", "C", "D"}``), or a
built-in name given as ``builtin:ex1``, ``builtin:ex1-perturbed`` or
``builtin:ex2``. Exit codes: 0 ok, 2 precondition violation, 3 parse error,
4 divergence flagged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import plants
from .geometry import contraction_margin, line_projection
from .hinfdesign import PerfWeight, approx_inverse_sik, approx_inverse_tp, sensitivities, synthesize_mixed
from .inversion import (
    allpass_factor,
    approx_inverse_allpass,
    certify_inverse,
    check_conditions,
    exact_right_inverse,
)
from .lti import StateSpace, freq_response, internal_stability, invariant_zeros, pseudo_inverse, realize, ss_to_tfm
from .polymat import RatMatrix, membership_im, rank_rs, smith_form, clear_denominators
from .ratcore import RatFn
from .sim import Scenario, fit_decay, simulate_closed_loop
from .tolerances import TOL

__all__ = ["main", "dumps", "load_plant", "load_scenario", "ParseError", "PreconditionError"]

EXIT_OK, EXIT_PRECONDITION, EXIT_PARSE, EXIT_DIVERGED = 0, 2, 3, 4


class ParseError(Exception):
    """Malformed input file; the message carries the file and position."""


class PreconditionError(Exception):
    """Input is well formed but violates the requirements of the requested method."""


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON with sorted keys and floats at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, Fraction):
        return json.dumps(str(obj))
    return json.dumps(str(obj))


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")


# ---------------------------------------------------------------------------
# input parsing

_BUILTIN = {
    "ex1": plants.ex1_plant,
    "ex1-perturbed": plants.ex1_perturbed,
    "ex2": plants.ex2_plant,
    "ex2-desired": plants.ex2_desired,
}


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _plant_from_data(data, where: str):
    if isinstance(data, str):
        return _plant_from_ref(data)
    if not isinstance(data, dict):
        raise ParseError(f"{where}: expected an object")
    try:
        if "entries" in data:
            return RatMatrix.from_json(data)
        if "A" in data:
            return StateSpace.from_json(data)
    except (ValueError, TypeError, ZeroDivisionError, KeyError, IndexError) as exc:
        raise ParseError(f"{where}: {exc}") from None
    raise ParseError(f"{where}: expected 'entries' (rational matrix) or 'A','B','C','D' (state space)")


def _plant_from_ref(ref: str):
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in _BUILTIN:
            raise ParseError(f"{ref}: unknown built-in; choose from {sorted(_BUILTIN)}")
        return _BUILTIN[name]()
    return _plant_from_data(_read_json(ref), ref)


def load_plant(ref: str):
    """Rational matrix or state space from a file path or ``builtin:name``."""
    return _plant_from_ref(ref)


def _as_rat(P) -> RatMatrix:
    return P if isinstance(P, RatMatrix) else ss_to_tfm(P)


def _weights(data, n: int) -> PerfWeight:
    if data is None:
        return PerfWeight.uniform(n, M=2.0, omega_B=5.0, eps=1e-3)
    if isinstance(data, dict) and set(data) <= {"M", "omega_B", "eps"}:
        return PerfWeight.uniform(n, **{k: float(v) for k, v in data.items()})
    return PerfWeight.from_config(data)


def _operator(spec, P: RatMatrix, where: str):
    """Inverse operator from ``{"method": ..., "weights": ..., "eps_u": ...}``."""
    if isinstance(spec, str):
        spec = {"method": spec}
    if not isinstance(spec, dict) or "method" not in spec:
        raise ParseError(f"{where}: operator spec needs a 'method'")
    return _build_inverse(P, spec["method"], spec.get("weights"), spec.get("eps_u", 1e-2))


def _build_inverse(P: RatMatrix, method: str, weights=None, eps_u: float = 1e-2):
    """Returns ``(StateSpace operator, json-able description)``."""
    if method == "exact":
        Xi = exact_right_inverse(P)
        if not Xi.is_proper():
            raise PreconditionError("exact right inverse is improper and cannot be realized (minimum-phase square-plant condition)")
        return realize(Xi), {"method": "exact", "tfm": Xi.to_json()}
    if method == "allpass":
        Xi, ap = approx_inverse_allpass(P)
        if not Xi.is_proper():
            raise PreconditionError("all-pass inverse is improper; the plant needs relative degree zero (all-pass inverse condition)")
        return realize(Xi), {"method": "allpass", "tfm": Xi.to_json(), "allpass": ap.to_json()}
    if method == "sik":
        W = _weights(weights, P.rows)
        try:
            inv = approx_inverse_sik(P, W, eps_u)
        except ValueError as exc:
            raise PreconditionError(f"S_i K inverse: {exc}") from None
        return inv.ss, {"method": "sik", "weights": W.to_config(), **inv.to_json()}
    if method in ("tp", "tp_pinv"):
        W = _weights(weights, 1)
        try:
            inv = approx_inverse_tp(P, W, eps_u=eps_u)
        except ValueError as exc:
            raise PreconditionError(f"T_p P^+ inverse: {exc}") from None
        return inv.ss, {"method": "tp", "weights": W.to_config(), **inv.to_json()}
    raise ParseError(f"unknown inverse method {method!r}; choose exact, allpass, sik or tp")


def load_scenario(path: str) -> Scenario:
    """Scenario from a JSON file.

    Fields: ``plant`` (plant reference or inline object), ``plant_actual``,
    ``inverse_ff`` and ``inverse_fb`` (operator specs), ``allpass_filter_in_fb``,
    ``reference`` and ``disturbance`` (one signal spec or list per channel),
    ``x0``, ``x0_nominal``, ``xbar0_1``, ``xbar0_2``, ``t_final``, ``dt``,
    ``loop_delay_steps``, ``name``.
    """
    data = _read_json(path)
    if not isinstance(data, dict) or "plant" not in data:
        raise ParseError(f"{path}: scenario needs a 'plant' field")
    known = {
        "plant", "plant_actual", "inverse_ff", "inverse_fb", "allpass_filter_in_fb", "reference", "disturbance",
        "x0", "x0_nominal", "xbar0_1", "xbar0_2", "t_final", "dt", "loop_delay_steps", "name",
    }
    extra = set(data) - known
    if extra:
        raise ParseError(f"{path}: unknown scenario fields {sorted(extra)}")
    P = _as_rat(_plant_from_data(data["plant"], f"{path}: plant"))
    Pa = data.get("plant_actual")
    Pa = None if Pa is None else realize(_as_rat(_plant_from_data(Pa, f"{path}: plant_actual")))
    ff, _ = _operator(data.get("inverse_ff", "sik"), P, f"{path}: inverse_ff")
    fb_spec = data.get("inverse_fb")
    fb = ff if fb_spec is None else _operator(fb_spec, P, f"{path}: inverse_fb")[0]
    filt = bool(data.get("allpass_filter_in_fb", False))
    F = None
    if filt:
        f = allpass_factor(P).normalized
        F = realize(RatMatrix([[f if i == j else RatFn() for j in range(P.rows)] for i in range(P.rows)]))
    try:
        return Scenario(
            plant_nominal=realize(P),
            plant_actual=Pa,
            inverse_ff=ff,
            inverse_fb=fb,
            allpass_filter=F,
            allpass_filter_in_fb=filt,
            reference=_channels(data.get("reference"), P.rows),
            disturbance=_channels(data.get("disturbance"), P.rows),
            x0=data.get("x0"),
            x0_nominal=data.get("x0_nominal"),
            xbar0_1=data.get("xbar0_1"),
            xbar0_2=data.get("xbar0_2"),
            t_final=float(data.get("t_final", 10.0)),
            dt=float(data.get("dt", 1e-3)),
            loop_delay_steps=int(data.get("loop_delay_steps", 1)),
            name=str(data.get("name", Path(path).stem)),
        )
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def _channels(spec, n: int):
    if spec is None:
        return None
    if isinstance(spec, dict):
        return [spec] * n
    if len(spec) != n:
        raise ParseError(f"expected {n} signal channels, got {len(spec)}")
    return list(spec)


# ---------------------------------------------------------------------------
# commands


def _cz(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def analyze(P, seed: int = 0) -> dict:
    """Rank, pivot columns, invariant factors, zeros and minimum-phase verdict."""
    Pr = _as_rat(P)
    r, piv = rank_rs(Pr)
    Pp, _, delta = clear_denominators(Pr)
    dec = smith_form(Pp)
    zs = invariant_zeros(Pr, seed=seed)
    return {
        "shape": list(Pr.shape),
        "rank": r,
        "pivot_columns": list(piv),
        "invariant_factors": [d.to_json() for d in dec.invariant_factors],
        "common_denominator": delta.to_json(),
        "poles": [{"p": _cz(r.value), "mult": r.mult} for r in Pr.poles()],
        "zeros": zs.to_json(),
        "minimum_phase": len(zs.rhp) == 0 and not zs.everywhere,
    }


def cmd_analyze(args) -> int:
    rep = analyze(load_plant(args.plant), args.seed)
    _write(_out(args, "report.json"), dumps(rep))
    return EXIT_OK


def cmd_invert(args) -> int:
    P = _as_rat(load_plant(args.plant))
    r, _ = rank_rs(P)
    out = {"method": args.method}
    if args.method == "exact":
        if r == 0:
            raise PreconditionError("rank-0 plant has no right inverse")
        Xi = exact_right_inverse(P)
        out["inverse"] = Xi.to_json()
        out["projector_ok"] = _projector_ok(P, Xi)
        if args.y is not None:
            Y = _as_rat(load_plant(args.y))
            rep = certify_inverse(P, Y)
            out["report"] = rep.to_json()
            out["classification"] = rep.classification
    else:
        weights = json.loads(args.weights) if args.weights else None
        ss, desc = _build_inverse(P, args.method, weights, args.eps_u)
        out.update(desc)
        out["state_space"] = ss.to_json()
        if args.y is not None:
            Y = _as_rat(load_plant(args.y))
            out["report"] = check_conditions(P, Y).to_json()
            out["classification"] = out["report"]["classification"]
    _write(_out(args, "inverse.json"), dumps(out))
    return EXIT_OK


def _projector_ok(P: RatMatrix, Xi: RatMatrix) -> bool:
    """``P Xi P == P`` exactly."""
    return (P @ Xi @ P) == P


def cmd_synth(args) -> int:
    P = load_plant(args.plant)
    Pss = P if isinstance(P, StateSpace) else realize(P)
    W = _weights(json.loads(args.weights) if args.weights else None, Pss.n_y)
    t0 = time.perf_counter()
    syn = synthesize_mixed(Pss, W, args.eps_u)
    sens = sensitivities(Pss, syn.K)
    w = np.logspace(-3, 3, 61)
    out = {
        "weights": W.to_config(),
        "eps_u": args.eps_u,
        "synthesis": syn.to_json(),
        "internally_stable": internal_stability(Pss, syn.K),
        "sigma_grid": {"omega": w.tolist(), "S_o": freq_response(sens["S_o"], w).tolist(), "T_o": freq_response(sens["T_o"], w).tolist()},
        "seconds": time.perf_counter() - t0 if args.timing else None,
    }
    _write(_out(args, "synthesis.json"), dumps(out))
    return EXIT_OK


def _metrics(tr, sc: Scenario) -> dict:
    fit = fit_decay(tr)
    m = {
        "diverged": tr.diverged,
        "decay_fit": fit.to_json(),
        "e_sup": float(np.max(tr.e_norm)) if tr.t.size else 0.0,
        "e_trailing_mean": float(np.mean(tr.e_norm[-max(1, tr.t.size // 10):])),
        "u_sup": float(np.max(np.abs(tr.u))) if tr.t.size else 0.0,
        "u_fb_sup": float(np.max(np.abs(tr.u_fb))) if tr.u_fb is not None else 0.0,
        "meta": tr.meta,
        "scenario": sc.describe(),
    }
    return m


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    tr = simulate_closed_loop(sc)
    outdir = Path(args.out) if args.out else None
    metrics = _metrics(tr, sc)
    if outdir is None:
        _write(None, dumps(metrics))
    else:
        outdir.mkdir(parents=True, exist_ok=True)
        _write_trace(tr, outdir / "trace", args.format)
        _write(outdir / "metrics.json", dumps(metrics))
    return EXIT_DIVERGED if tr.diverged else EXIT_OK


def _write_trace(tr, stem: Path, fmt: str):
    if fmt == "csv":
        stem.with_suffix(".csv").write_text(tr.to_csv())
    else:
        data = {"t": tr.t, "u": tr.u, "y": tr.y, "y_pi": tr.y_pi, "e": tr.e, "meta": tr.meta, "diverged": tr.diverged}
        stem.with_suffix(".json").write_text(dumps(data) + "\n")


def reproduce(which: str, stride: int = 100) -> dict:
    """Data bundle for one built-in example; traces are decimated by ``stride``."""
    w = np.logspace(-3, 3, 121)
    if which == "ex1":
        P = plants.ex1_plant()
        inv = plants.ex1_inverse()
        sc = plants.ex1_nominal_scenario()
        tr = simulate_closed_loop(sc)
        sens = sensitivities(realize(P), inv.K)
        return {
            "report": {
                "analysis": analyze(P),
                "gamma": inv.synthesis.gamma,
                "gamma_reference": 3.6,
                "internally_stable": internal_stability(realize(P), inv.K),
                "purified_poles": [_cz(p) for p in inv.purified],
                "inverse_sigma": {"omega": w, "sigma": freq_response(inv.ss, w)},
                "T_o_sigma": freq_response(sens["T_o"], w),
                "decay_fit": fit_decay(tr).to_json(),
            },
            "traces": {"tracking": tr},
        }
    if which == "ex1-robust":
        P, Pi = plants.ex1_plant(), plants.ex1_perturbed()
        traces, fits = {}, {}
        for ics in (False, True):
            sc = plants.ex1_robust_scenario(random_ics=ics)
            tr = simulate_closed_loop(sc)
            traces[sc.name] = tr
            fits[sc.name] = {
                "before": fit_decay(tr, (0.0, 125.0 - sc.dt)).to_json(),
                "after": fit_decay(tr, (125.0, sc.t_final)).to_json(),
                "diverged": tr.diverged,
            }
        ap = allpass_factor(P)
        gap = (Pi - P) @ P.inv()
        cm = contraction_margin(P, plants.ex1_fb_inverse().ss, ap, gap)
        return {
            "report": {
                "zeros_nominal": invariant_zeros(P).to_json(),
                "zeros_perturbed": invariant_zeros(Pi).to_json(),
                "poles_perturbed": [{"p": _cz(r.value), "mult": r.mult} for r in Pi.poles()],
                "gamma_ff": plants.ex1_inverse().synthesis.gamma,
                "gamma_fb": plants.ex1_fb_inverse().synthesis.gamma,
                "contraction": cm,
                "fits": fits,
            },
            "traces": traces,
        }
    if which == "ex2":
        P, Yd = plants.ex2_plant(), plants.ex2_desired()
        inv = plants.ex2_inverse()
        sc = plants.ex2_scenario()
        tr = simulate_closed_loop(sc)
        lp = line_projection(P, Yd, inv.ss)
        return {
            "report": {
                "pseudo_inverse": pseudo_inverse(P).to_json(),
                "zeros": invariant_zeros(P).to_json(),
                "membership": membership_im(P, Yd),
                "gamma": inv.synthesis.gamma,
                "gamma_reference": 2.32,
                "T_p": inv.info["T_p"],
                "inverse_stable": inv.is_stable(),
                "inverse_sigma": {"omega": w, "sigma": freq_response(inv.ss, w)},
                "line_projection": lp.to_json(),
                "decay_fit": fit_decay(tr).to_json(),
            },
            "traces": {"tracking": tr},
        }
    raise ParseError(f"unknown example {which!r}; choose ex1, ex1-robust or ex2")


def _decimate(tr, stride: int):
    from dataclasses import replace

    sl = slice(None, None, stride)
    return replace(
        tr, t=tr.t[sl], u=tr.u[sl], y=tr.y[sl], y_pi=tr.y_pi[sl], e=tr.e[sl],
        u_ff=None if tr.u_ff is None else tr.u_ff[sl], u_fb=None if tr.u_fb is None else tr.u_fb[sl],
    )


def cmd_reproduce(args) -> int:
    bundle = reproduce(args.which)
    outdir = Path(args.out) if args.out else Path("reproduce") / args.which
    outdir.mkdir(parents=True, exist_ok=True)
    _write(outdir / "report.json", dumps(bundle["report"]))
    diverged = False
    for name, tr in bundle["traces"].items():
        _write_trace(_decimate(tr, args.stride), outdir / name, args.format)
        diverged |= tr.diverged
    sys.stdout.write(f"wrote {outdir}\n")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _out(args, default: str) -> Path | None:
    return None if not args.out else Path(args.out) / default


# ---------------------------------------------------------------------------


def _tol_override(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {k!r} needs a number") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stabinv", description="Stable inversion of MIMO LTI systems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", action="append", type=_tol_override, default=[], metavar="KEY=VALUE",
                        help="override a tolerance (repeatable)")
    common.add_argument("--out", help="output directory (default: stdout for single reports)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
    common.add_argument("--format", choices=("json", "csv"), default="csv", help="trace format")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="rank, Smith form and zeros of a plant")
    p.add_argument("plant")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("invert", parents=[common], help="build an inverse and, with --y, classify a desired output")
    p.add_argument("plant")
    p.add_argument("--method", choices=("exact", "allpass", "sik", "tp"), default="exact")
    p.add_argument("--y", help="desired output (rational column) for the condition check")
    p.add_argument("--weights", help='JSON weight spec, e.g. \'{"omega_B": 5}\'')
    p.add_argument("--eps-u", type=float, default=1e-2, dest="eps_u")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("synth", parents=[common], help="mixed-sensitivity H-infinity synthesis")
    p.add_argument("plant")
    p.add_argument("--weights", help="JSON weight spec")
    p.add_argument("--eps-u", type=float, default=1e-2, dest="eps_u")
    p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte determinism)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", parents=[common], help="regenerate a built-in example")
    p.add_argument("which", choices=("ex1", "ex1-robust", "ex2"))
    p.add_argument("--stride", type=int, default=100, help="trace decimation factor")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    saved = TOL.as_dict()
    try:
        TOL.update(**dict(args.tol))
    except (TypeError, ValueError, KeyError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except PreconditionError as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    except ValueError as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    finally:
        TOL.update(**saved)


if __name__ == "__main__":
    sys.exit(main())
