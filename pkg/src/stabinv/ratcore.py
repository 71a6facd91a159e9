"""Exact univariate polynomials and rational functions over the rationals.

Coefficients are stored as :class:`fractions.Fraction` in ascending powers of
``s`` (``coeffs[k]`` multiplies ``s**k``).  Floats are converted through
``Fraction(float)``, i.e. their exact binary value, so every algebraic
operation is bit-exact.  Root finding is the only place floating point enters.
"""

from __future__ import annotations

import math
import numbers
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import linalg

__all__ = [
    "Poly",
    "RatFn",
    "Root",
    "PoleError",
    "as_fraction",
    "poly_arith",
    "poly_gcd",
    "poly_lcm",
    "poly_roots",
    "ratfn_eval",
    "S",
]


class PoleError(ZeroDivisionError):
    """Raised when a rational function is evaluated at (or too near) a pole."""


def as_fraction(x) -> Fraction:
    """Convert ``x`` to an exact :class:`Fraction`.

    Strings such as ``"3/10"`` or ``"0.3"`` are parsed decimally; floats keep
    their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, numbers.Integral):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(float(x)):
            raise ValueError(f"non-finite coefficient {x!r}")
        return Fraction(float(x))
    if isinstance(x, numbers.Rational):
        return Fraction(x.numerator, x.denominator)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def _trim(c: list) -> tuple:
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


class Poly:
    """Immutable polynomial with exact rational coefficients (ascending order)."""

    __slots__ = ("_c", "_hash")

    def __init__(self, coeffs: Iterable = ()):
        if isinstance(coeffs, Poly):
            self._c = coeffs._c
        else:
            self._c = _trim([as_fraction(c) for c in coeffs])
        self._hash = None

    # construction helpers -------------------------------------------------
    @classmethod
    def const(cls, c) -> "Poly":
        return cls([c])

    @classmethod
    def monomial(cls, k: int, c=1) -> "Poly":
        return cls([0] * k + [c])

    @classmethod
    def from_roots(cls, roots: Sequence) -> "Poly":
        """Monic polynomial with the given roots.

        Complex roots are accepted only in conjugate pairs; the product is
        formed in complex floating point and the (real) result rationalized.
        """
        if all(not isinstance(r, complex) for r in roots):
            p = cls([1])
            for r in roots:
                p = p * cls([-as_fraction(r), 1])
            return p
        c = np.poly(np.asarray(roots, dtype=complex))[::-1]
        if np.max(np.abs(c.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(c))):
            raise ValueError("complex roots must come in conjugate pairs")
        return cls(c.real.tolist())

    @property
    def coeffs(self) -> tuple:
        return self._c

    @property
    def degree(self) -> int:
        """Degree; ``-1`` for the zero polynomial."""
        return len(self._c) - 1

    @property
    def lc(self) -> Fraction:
        return self._c[-1] if self._c else Fraction(0)

    def is_zero(self) -> bool:
        return not self._c

    def is_const(self) -> bool:
        return len(self._c) <= 1

    def is_monic(self) -> bool:
        return bool(self._c) and self._c[-1] == 1

    def monic(self) -> "Poly":
        if not self._c:
            return self
        lc = self._c[-1]
        if lc == 1:
            return self
        return Poly([c / lc for c in self._c])

    def height(self) -> int:
        """Bit size of the largest numerator/denominator (pivot tie-breaking)."""
        return max((max(abs(c.numerator), c.denominator).bit_length() for c in self._c), default=0)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._c, other._c
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return Poly._raw(_trim(out))

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(tuple(-c for c in self._c))

    def __sub__(self, other):
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, RatFn):
            return NotImplemented
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._c, other._c
        if not a or not b:
            return Poly._raw(())
        if len(b) == 1:
            k = b[0]
            return Poly._raw(tuple(c * k for c in a))
        if len(a) == 1:
            k = a[0]
            return Poly._raw(tuple(c * k for c in b))
        out = [Fraction(0)] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return Poly._raw(_trim(out))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out, base = Poly([1]), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __divmod__(self, other):
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        r = list(self._c)
        db = other.degree
        if len(r) - 1 < db:
            return Poly._raw(()), self
        inv = 1 / other._c[-1]
        b = other._c
        q = [Fraction(0)] * (len(r) - db)
        for k in range(len(r) - 1 - db, -1, -1):
            c = r[k + db] * inv
            q[k] = c
            if c:
                for j in range(db + 1):
                    r[k + j] -= c * b[j]
        return Poly._raw(_trim(q)), Poly._raw(_trim(r[:db]))

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other: "Poly") -> "Poly":
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return q

    def __truediv__(self, other):
        if isinstance(other, (Poly, RatFn)):
            return RatFn(self, 1) / other
        k = as_fraction(other)
        if k == 0:
            raise ZeroDivisionError("polynomial division by zero")
        return Poly._raw(tuple(c / k for c in self._c))

    def __rtruediv__(self, other):
        return RatFn(other, self)

    def derivative(self) -> "Poly":
        return Poly._raw(tuple(k * c for k, c in enumerate(self._c) if k))

    def compose_shift(self, a) -> "Poly":
        """Return ``p(s + a)``."""
        a = as_fraction(a)
        out = Poly()
        lin = Poly([a, 1])
        for c in reversed(self._c):
            out = out * lin + c
        return out

    def mirror(self) -> "Poly":
        """Return ``p(-s)``."""
        return Poly._raw(tuple(c if k % 2 == 0 else -c for k, c in enumerate(self._c)))

    # evaluation -----------------------------------------------------------
    def __call__(self, z):
        """Horner evaluation; exact for rational ``z``, floating otherwise."""
        if isinstance(z, (int, Fraction)):
            acc = Fraction(0)
            for c in reversed(self._c):
                acc = acc * z + c
            return acc
        acc = 0.0 * z
        for c in reversed(self._c):
            acc = acc * z + float(c)
        return acc

    def to_numpy(self) -> np.ndarray:
        """Float coefficients, ascending."""
        return np.array([float(c) for c in self._c], dtype=float)

    # identity -------------------------------------------------------------
    def __eq__(self, other):
        other = _coerce_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self._c == other._c

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._c)
        return self._hash

    def __bool__(self):
        return bool(self._c)

    def __repr__(self):
        return f"Poly({[str(c) for c in self._c]})"

    def __str__(self):
        if not self._c:
            return "0"
        terms = []
        for k in range(len(self._c) - 1, -1, -1):
            c = self._c[k]
            if c == 0:
                continue
            mag = abs(c)
            sign = "-" if c < 0 else "+"
            body = "" if (mag == 1 and k) else str(mag)
            if k:
                body += ("*" if body else "") + ("s" if k == 1 else f"s^{k}")
            terms.append((sign, body))
        first_sign, first = terms[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out

    # serialization --------------------------------------------------------
    def to_json(self) -> list:
        return [str(c) for c in self._c]

    @classmethod
    def from_json(cls, data) -> "Poly":
        if not isinstance(data, list):
            raise ValueError("polynomial must be a JSON array of rational strings")
        return cls(as_fraction(c) if not isinstance(c, str) else Fraction(c) for c in data)

    @classmethod
    def _raw(cls, c: tuple) -> "Poly":
        p = cls.__new__(cls)
        p._c = c
        p._hash = None
        return p


def _coerce_poly(x):
    if isinstance(x, Poly):
        return x
    if isinstance(x, RatFn):
        return NotImplemented
    try:
        return Poly([x])
    except TypeError:
        return NotImplemented


S = Poly([0, 1])
"""The indeterminate ``s``."""


def poly_arith(a: Poly, b: Poly, kind: str):
    """Dispatch ``add``, ``sub``, ``mul`` or ``divmod`` on two polynomials."""
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "divmod":
        return divmod(a, b)
    raise ValueError(f"unknown polynomial operation {kind!r}")


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic greatest common divisor (Euclid with monic remainders)."""
    if a.is_zero() and b.is_zero():
        raise ValueError("gcd(0, 0) is undefined")
    a, b = a.monic(), b.monic()
    while not b.is_zero():
        a, b = b, (a % b).monic()
    return a.monic()


def poly_lcm(a: Poly, b: Poly) -> Poly:
    if a.is_zero() or b.is_zero():
        return Poly()
    g = poly_gcd(a, b)
    return (a.exact_div(g) * b).monic()


def squarefree_factors(p: Poly) -> list[tuple[Poly, int]]:
    """Yun's square-free decomposition: ``p ~ prod f_i**i`` with exact ``f_i``."""
    p = p.monic()
    if p.degree < 1:
        return []
    out = []
    dp = p.derivative()
    a = poly_gcd(p, dp)
    b = p.exact_div(a)
    c = dp.exact_div(a) if not a.is_const() else dp / a.lc
    d = c - b.derivative()
    i = 1
    while b.degree >= 1:
        g = poly_gcd(b, d) if not d.is_zero() else b
        if g.degree >= 1:
            out.append((g, i))
        b = b.exact_div(g)
        c = d.exact_div(g) if not d.is_zero() else d
        d = c - b.derivative()
        i += 1
    return out


class Root(NamedTuple):
    value: complex
    mult: int


def _simple_roots(p: Poly) -> np.ndarray:
    """Roots of a squarefree polynomial via a balanced companion matrix."""
    c = p.monic().to_numpy()
    n = len(c) - 1
    if n == 1:
        return np.array([-c[0]], dtype=complex)
    comp = np.zeros((n, n))
    comp[0, :] = -c[n - 1 :: -1][:n]
    comp[1:, :-1] = np.eye(n - 1)
    bal, _ = linalg.matrix_balance(comp, permute=False)
    r = linalg.eigvals(bal, check_finite=True)
    if not np.all(np.isfinite(r)):
        raise np.linalg.LinAlgError("companion eigenvalue iteration did not converge")
    # Newton polish on the exact-coefficient squarefree factor
    dp = np.polynomial.polynomial.polyder(c)
    for _ in range(3):
        f = np.polynomial.polynomial.polyval(r, c)
        df = np.polynomial.polynomial.polyval(r, dp)
        ok = np.abs(df) > 0
        step = np.zeros_like(r)
        step[ok] = f[ok] / df[ok]
        cand = r - step
        better = np.abs(np.polynomial.polynomial.polyval(cand, c)) <= np.abs(f)
        r = np.where(better, cand, r)
    return r


def _symmetrize(r: np.ndarray, tol: float) -> list[complex]:
    """Force exact conjugate symmetry on the roots of a real polynomial."""
    out: list[complex] = []
    used = np.zeros(len(r), dtype=bool)
    order = np.argsort(-np.abs(r.imag))
    for i in order:
        if used[i]:
            continue
        z = r[i]
        if abs(z.imag) <= tol * max(1.0, abs(z)):
            used[i] = True
            out.append(complex(z.real, 0.0))
            continue
        rest = [j for j in range(len(r)) if not used[j] and j != i]
        j = min(rest, key=lambda j: abs(r[j] - np.conj(z)))
        used[i] = used[j] = True
        re = 0.5 * (z.real + r[j].real)
        im = 0.5 * (abs(z.imag) + abs(r[j].imag))
        out.extend([complex(re, im), complex(re, -im)])
    return out


def poly_roots(p: Poly, mult_tol: float = 1e-6) -> list[Root]:
    """All complex roots of ``p`` with multiplicities.

    Multiplicities come from an exact square-free decomposition; the numeric
    roots of each factor are then merged if they fall within ``mult_tol``
    (relative) of each other.  Conjugate pairs are returned symmetrically.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs a polynomial of degree >= 1")
    found: list[Root] = []
    for f, m in squarefree_factors(p):
        for z in _symmetrize(_simple_roots(f), 1e-10):
            found.append(Root(z, m))
    merged: list[list] = []
    for z, m in found:
        for item in merged:
            if abs(item[0] - z) <= mult_tol * max(1.0, abs(z)):
                item[0] = (item[0] * item[1] + z * m) / (item[1] + m)
                item[1] += m
                break
        else:
            merged.append([z, m])
    merged.sort(key=lambda it: (it[0].real, it[0].imag))
    return [Root(complex(z), int(m)) for z, m in merged]


class RatFn:
    """Reduced rational function ``num/den`` with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num=0, den=1, *, _reduced: bool = False):
        if isinstance(num, RatFn):
            if den != 1:
                num = num / RatFn(den)
            self.num, self.den = num.num, num.den
            return
        n = num if isinstance(num, Poly) else Poly([num]) if not isinstance(num, (list, tuple)) else Poly(num)
        d = den if isinstance(den, Poly) else Poly([den]) if not isinstance(den, (list, tuple)) else Poly(den)
        if d.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if not _reduced:
            if n.is_zero():
                d = Poly([1])
            elif d.degree > 0 and n.degree > 0:
                g = poly_gcd(n, d)
                if g.degree > 0:
                    n, d = n.exact_div(g), d.exact_div(g)
            lc = d.lc
            if lc != 1:
                n, d = n / lc, d / lc
        self.num, self.den = n, d

    @classmethod
    def _make(cls, n: Poly, d: Poly) -> "RatFn":
        return cls(n, d)

    # predicates -----------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_poly(self) -> bool:
        return self.den.degree == 0

    def is_proper(self) -> bool:
        return self.num.degree <= self.den.degree

    def is_strictly_proper(self) -> bool:
        return self.num.degree < self.den.degree

    @property
    def relative_degree(self) -> int:
        if self.is_zero():
            return math.inf
        return self.den.degree - self.num.degree

    def poles(self, mult_tol: float = 1e-6) -> list[Root]:
        return poly_roots(self.den, mult_tol) if self.den.degree >= 1 else []

    def zeros(self, mult_tol: float = 1e-6) -> list[Root]:
        return poly_roots(self.num, mult_tol) if self.num.degree >= 1 else []

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = _coerce_rat(other)
        if other is NotImplemented:
            return NotImplemented
        if self.den == other.den:
            return RatFn(self.num + other.num, self.den)
        if self.den.degree == 0:
            return RatFn(self.num * other.den + other.num, other.den, _reduced=True)
        if other.den.degree == 0:
            return RatFn(self.num + other.num * self.den, self.den, _reduced=True)
        g = poly_gcd(self.den, other.den)
        if g.degree == 0:
            n = self.num * other.den + other.num * self.den
            return RatFn(n, self.den * other.den, _reduced=n.is_zero())
        a = other.den.exact_div(g)
        b = self.den.exact_div(g)
        return RatFn(self.num * a + other.num * b, self.den * a)

    __radd__ = __add__

    def __neg__(self):
        return RatFn(-self.num, self.den, _reduced=True)

    def __sub__(self, other):
        other = _coerce_rat(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = _coerce_rat(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return RatFn()
        g1 = poly_gcd(self.num, other.den) if other.den.degree > 0 and self.num.degree > 0 else Poly([1])
        g2 = poly_gcd(other.num, self.den) if self.den.degree > 0 and other.num.degree > 0 else Poly([1])
        n = self.num.exact_div(g1) * other.num.exact_div(g2)
        d = self.den.exact_div(g2) * other.den.exact_div(g1)
        lc = d.lc
        if lc != 1:
            n, d = n / lc, d / lc
        return RatFn(n, d, _reduced=True)

    __rmul__ = __mul__

    def inv(self) -> "RatFn":
        if self.is_zero():
            raise ZeroDivisionError("inverse of the zero rational function")
        return RatFn(self.den, self.num)

    def __truediv__(self, other):
        other = _coerce_rat(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        return _coerce_rat(other) * self.inv()

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        return RatFn(self.num**k, self.den**k, _reduced=True)

    def derivative(self) -> "RatFn":
        n, d = self.num, self.den
        return RatFn(n.derivative() * d - n * d.derivative(), d * d)

    def compose_shift(self, a) -> "RatFn":
        """Return ``f(s + a)``."""
        return RatFn(self.num.compose_shift(a), self.den.compose_shift(a))

    def mirror(self) -> "RatFn":
        """Return ``f(-s)``."""
        return RatFn(self.num.mirror(), self.den.mirror())

    # evaluation -----------------------------------------------------------
    def __call__(self, z, eval_tol: float = 1e-12):
        return ratfn_eval(self, z, eval_tol)

    # identity -------------------------------------------------------------
    def __eq__(self, other):
        other = _coerce_rat(other)
        if other is NotImplemented:
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"RatFn({self.num!r}, {self.den!r})"

    def __str__(self):
        if self.den.degree == 0:
            return str(self.num)
        return f"({self.num})/({self.den})"

    def to_json(self) -> dict:
        return {"num": self.num.to_json(), "den": self.den.to_json()}

    @classmethod
    def from_json(cls, data) -> "RatFn":
        if isinstance(data, (int, float, str)):
            return cls(as_fraction(data))
        if not isinstance(data, dict) or "num" not in data:
            raise ValueError("rational function must be an object with 'num' and 'den'")
        return cls(Poly.from_json(data["num"]), Poly.from_json(data.get("den", ["1"])))


def _coerce_rat(x):
    if isinstance(x, RatFn):
        return x
    if isinstance(x, Poly):
        return RatFn(x, Poly([1]), _reduced=True)
    try:
        return RatFn(Poly([x]), Poly([1]), _reduced=True)
    except TypeError:
        return NotImplemented


def ratfn_eval(f: RatFn, z, eval_tol: float = 1e-12) -> complex:
    """Floating-point Horner evaluation of ``f`` at complex ``z``.

    Raises :class:`PoleError` if ``|den(z)|`` is below ``eval_tol`` times the
    scale of the denominator terms at ``z``.
    """
    if isinstance(f, Poly):
        f = RatFn(f)
    z = complex(z)
    d = f.den(z)
    scale = sum(abs(float(c)) * abs(z) ** k for k, c in enumerate(f.den.coeffs))
    if abs(d) <= eval_tol * max(scale, 1e-300):
        raise PoleError(f"evaluation at a pole: den({z}) = {d}")
    return complex(f.num(z) / d)
