"""Numerical tolerances shared across the package.

The values are read at call time, so ``TOL.update(...)`` (used by the CLI's
``--tol key=value`` flag) affects every subsequent computation.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class Tolerances:
    mult_tol: float = 1e-6  # relative clustering radius for repeated roots
    eval_tol: float = 1e-12  # relative pole guard in rational evaluation
    svd_tol: float = 1e-9  # relative rank threshold for numeric minimality
    stab_margin: float = 1e-9  # eigenvalues must satisfy Re < -stab_margin
    zero_tol: float = 1e-7  # relative singular-value drop accepted as a zero
    interp_tol: float = 1e-8  # relative interpolation residual at RHP zeros
    gamma_tol: float = 1e-3  # relative bisection tolerance for synthesis
    gamma_slack: float = 0.02  # controller built at gamma * (1 + slack)
    hinf_tol: float = 1e-10  # relative accuracy of the H-infinity norm
    orth_tol: float = 1e-7
    quad_tol: float = 1e-6
    pole_tol: float = 1e-2  # integrator purification radius
    overflow_cap: float = 1e9

    def update(self, **kw) -> None:
        names = {f.name for f in fields(self)}
        for k, v in kw.items():
            if k not in names:
                raise KeyError(f"unknown tolerance {k!r}")
            setattr(self, k, float(v))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


TOL = Tolerances()
