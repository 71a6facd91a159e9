"""Polynomial and rational matrices: denominator clearing, Smith form, rank.

Matrices are small and dense, so entries live in tuples of tuples and all
elimination is done with exact arithmetic from :mod:`stabinv.ratcore`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .ratcore import Poly, RatFn, as_fraction, poly_lcm

__all__ = [
    "PolyMatrix",
    "RatMatrix",
    "SmithDecomposition",
    "clear_denominators",
    "smith_form",
    "rank_rs",
    "membership_im",
    "column",
]


class _Matrix:
    """Dense immutable matrix over a ring whose elements support + - *."""

    _zero: Callable
    _one: Callable
    _coerce: Callable

    __slots__ = ("rows", "cols", "_e")

    def __init__(self, entries: Iterable[Iterable], shape: tuple[int, int] | None = None):
        e = tuple(tuple(self._coerce(x) for x in row) for row in entries)
        if shape is None:
            rows = len(e)
            cols = len(e[0]) if rows else 0
        else:
            rows, cols = shape
        if any(len(r) != cols for r in e) or len(e) != rows:
            raise ValueError("matrix entries must be rectangular")
        self.rows, self.cols, self._e = rows, cols, e

    @classmethod
    def _raw(cls, e: tuple, rows: int, cols: int):
        m = cls.__new__(cls)
        m.rows, m.cols, m._e = rows, cols, e
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int):
        z = cls._zero()
        return cls._raw(tuple(tuple(z for _ in range(cols)) for _ in range(rows)), rows, cols)

    @classmethod
    def eye(cls, n: int):
        z, o = cls._zero(), cls._one()
        return cls._raw(tuple(tuple(o if i == j else z for j in range(n)) for i in range(n)), n, n)

    @classmethod
    def diag(cls, items: Sequence):
        n = len(items)
        z = cls._zero()
        return cls._raw(
            tuple(tuple(cls._coerce(items[i]) if i == j else z for j in range(n)) for i in range(n)), n, n
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def entries(self) -> tuple:
        return self._e

    def __getitem__(self, idx):
        if isinstance(idx, tuple):
            i, j = idx
            if isinstance(i, int) and isinstance(j, int):
                return self._e[i][j]
            ri = range(self.rows)[i] if isinstance(i, slice) else [i] if isinstance(i, int) else list(i)
            cj = range(self.cols)[j] if isinstance(j, slice) else [j] if isinstance(j, int) else list(j)
            return type(self)._raw(tuple(tuple(self._e[a][b] for b in cj) for a in ri), len(ri), len(cj))
        return self[idx, :]

    def col(self, j: int):
        return self[:, j]

    def row(self, i: int):
        return self[i, :]

    def T(self):
        return type(self)._raw(tuple(zip(*self._e)) if self.rows else tuple(), self.cols, self.rows)

    def map(self, f):
        return type(self)._raw(tuple(tuple(f(x) for x in r) for r in self._e), self.rows, self.cols)

    def __add__(self, other):
        other = self._like(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        return type(self)._raw(
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self._e, other._e)), self.rows, self.cols
        )

    def __sub__(self, other):
        return self + (-self._like(other))

    def __neg__(self):
        return self.map(lambda x: -x)

    def __mul__(self, k):
        """Scalar multiplication (use ``@`` for matrix products)."""
        k = self._coerce(k)
        return self.map(lambda x: x * k)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = self._like(other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        z = self._zero()
        oc = other.T()._e if other.rows else tuple(() for _ in range(other.cols))
        out = []
        for r in self._e:
            row = []
            for c in oc:
                acc = z
                for a, b in zip(r, c):
                    if a and b:
                        acc = acc + a * b
                row.append(acc)
            out.append(tuple(row))
        return type(self)._raw(tuple(out), self.rows, other.cols)

    def hstack(self, *others):
        mats = [self] + [self._like(o) for o in others]
        if len({m.rows for m in mats}) != 1:
            raise ValueError("hstack needs equal row counts")
        return type(self)._raw(
            tuple(tuple(x for m in mats for x in m._e[i]) for i in range(self.rows)),
            self.rows,
            sum(m.cols for m in mats),
        )

    def vstack(self, *others):
        mats = [self] + [self._like(o) for o in others]
        if len({m.cols for m in mats}) != 1:
            raise ValueError("vstack needs equal column counts")
        return type(self)._raw(tuple(r for m in mats for r in m._e), sum(m.rows for m in mats), self.cols)

    def is_zero(self) -> bool:
        return all(x.is_zero() for r in self._e for x in r)

    def _like(self, other):
        if isinstance(other, type(self)):
            return other
        if isinstance(other, _Matrix):
            return type(self)(other._e, other.shape)
        return type(self)(other)

    def __eq__(self, other):
        if not isinstance(other, _Matrix):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for r1, r2 in zip(self._e, other._e) for a, b in zip(r1, r2)
        )

    def __hash__(self):
        return hash((self.shape, self._e))

    def __iter__(self):
        return iter(self._e)

    def tolist(self) -> list[list]:
        return [list(r) for r in self._e]

    def __repr__(self):
        body = "; ".join(", ".join(str(x) for x in r) for r in self._e)
        return f"{type(self).__name__}({self.rows}x{self.cols}: [{body}])"


def _poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, RatFn):
        if not x.is_poly():
            raise ValueError("non-polynomial entry in a polynomial matrix")
        return x.num
    if isinstance(x, (list, tuple)):
        return Poly(x)
    return Poly([x])


def _rat(x) -> RatFn:
    if isinstance(x, RatFn):
        return x
    if isinstance(x, Poly):
        return RatFn(x)
    if isinstance(x, dict):
        return RatFn.from_json(x)
    return RatFn(as_fraction(x))


class PolyMatrix(_Matrix):
    """Matrix over the polynomial ring."""

    __slots__ = ()
    _zero = staticmethod(lambda: Poly())
    _one = staticmethod(lambda: Poly([1]))
    _coerce = staticmethod(_poly)

    def to_rat(self) -> "RatMatrix":
        return RatMatrix._raw(tuple(tuple(RatFn(x) for x in r) for r in self._e), self.rows, self.cols)

    def det(self) -> Poly:
        return _bareiss_det(self)

    def max_degree(self) -> int:
        return max((x.degree for r in self._e for x in r), default=-1)


class RatMatrix(_Matrix):
    """Matrix over the field of rational functions."""

    __slots__ = ()
    _zero = staticmethod(lambda: RatFn())
    _one = staticmethod(lambda: RatFn(1))
    _coerce = staticmethod(_rat)

    def __call__(self, z):
        """Evaluate entrywise at a complex point (numpy array)."""
        import numpy as np

        return np.array([[f(z) for f in r] for r in self._e], dtype=complex).reshape(self.rows, self.cols)

    def inv(self) -> "RatMatrix":
        """Inverse over the rational-function field (Gauss-Jordan)."""
        if self.rows != self.cols:
            raise ValueError("inverse of a non-square matrix")
        n = self.rows
        a = [list(r) + [RatFn(1) if i == j else RatFn() for j in range(n)] for i, r in enumerate(self._e)]
        for k in range(n):
            piv = min(
                (i for i in range(k, n) if not a[i][k].is_zero()),
                key=lambda i: (a[i][k].num.degree + a[i][k].den.degree, a[i][k].num.height()),
                default=None,
            )
            if piv is None:
                raise ZeroDivisionError("singular rational matrix")
            a[k], a[piv] = a[piv], a[k]
            p = a[k][k].inv()
            a[k] = [x * p for x in a[k]]
            for i in range(n):
                if i != k and not a[i][k].is_zero():
                    f = a[i][k]
                    a[i] = [x - f * y for x, y in zip(a[i], a[k])]
        return RatMatrix._raw(tuple(tuple(r[n:]) for r in a), n, n)

    def det(self) -> RatFn:
        p, _, delta = clear_denominators(self)
        return RatFn(p.det()) / RatFn(delta) ** self.rows if self.rows else RatFn(1)

    def is_proper(self) -> bool:
        return all(x.is_proper() for r in self._e for x in r)

    def is_strictly_proper(self) -> bool:
        return all(x.is_zero() or x.is_strictly_proper() for r in self._e for x in r)

    def poles(self, mult_tol: float = 1e-6):
        """Poles of the least common denominator (with multiplicities)."""
        from .ratcore import poly_roots

        _, _, d = clear_denominators(self)
        return poly_roots(d, mult_tol) if d.degree >= 1 else []

    def to_json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "entries": [[x.to_json() for x in r] for r in self._e],
        }

    @classmethod
    def from_json(cls, data) -> "RatMatrix":
        if not isinstance(data, dict) or "entries" not in data:
            raise ValueError("rational matrix JSON needs an 'entries' field")
        ent = [[RatFn.from_json(x) for x in row] for row in data["entries"]]
        rows = data.get("rows", len(ent))
        cols = data.get("cols", len(ent[0]) if ent else 0)
        return cls(ent, (rows, cols))


def column(items: Sequence) -> RatMatrix:
    """Rational column vector from a sequence of entries."""
    return RatMatrix([[x] for x in items])


# ---------------------------------------------------------------------------


def clear_denominators(P: RatMatrix, Y: RatMatrix | None = None):
    """Multiply through by the monic lcm ``delta`` of all denominators of ``P``.

    Returns ``(P_poly, Y_scaled, delta)`` with ``P_poly = delta * P`` purely
    polynomial and ``Y_scaled = delta * Y`` (``None`` when ``Y`` is omitted).
    """
    if P.rows == 0 or P.cols == 0:
        raise ValueError("empty matrix")
    delta = Poly([1])
    for r in P:
        for x in r:
            if x.den.degree > 0:
                delta = poly_lcm(delta, x.den)
    Pp = PolyMatrix._raw(
        tuple(tuple(x.num * delta.exact_div(x.den) for x in r) for r in P), P.rows, P.cols
    )
    Ys = None
    if Y is not None:
        d = RatFn(delta)
        Ys = Y.map(lambda x: x * d)
    return Pp, Ys, delta


def _bareiss_det(M: PolyMatrix) -> Poly:
    n = M.rows
    if n != M.cols:
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return Poly([1])
    a = [list(r) for r in M]
    sign = 1
    prev = Poly([1])
    for k in range(n - 1):
        piv = next((i for i in range(k, n) if not a[i][k].is_zero()), None)
        if piv is None:
            return Poly()
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]).exact_div(prev)
        prev = a[k][k]
    return a[n - 1][n - 1] * sign


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmithDecomposition:
    """``U_R @ S_m @ V_R == P`` with unimodular ``U_R``, ``V_R``.

    ``U_R_inv`` and ``V_R_inv`` are the polynomial inverses, so that
    ``U_R @ U_R_inv == I`` and ``V_R @ V_R_inv == I`` exactly.
    """

    U_R: PolyMatrix
    S_m: PolyMatrix
    V_R: PolyMatrix
    U_R_inv: PolyMatrix
    V_R_inv: PolyMatrix
    invariant_factors: tuple
    rank: int

    @property
    def Lambda(self) -> PolyMatrix:
        return PolyMatrix.diag(list(self.invariant_factors))

    # block partitions used by the right inverse
    @property
    def U_R1(self) -> PolyMatrix:
        return self.U_R[:, : self.rank]

    @property
    def V_R1(self) -> PolyMatrix:
        return self.V_R[: self.rank, :]

    @property
    def U_R1_inv(self) -> PolyMatrix:
        """First ``rank`` rows of ``U_R_inv``."""
        return self.U_R_inv[: self.rank, :]

    @property
    def V_R1_inv(self) -> PolyMatrix:
        """First ``rank`` columns of ``V_R_inv``."""
        return self.V_R_inv[:, : self.rank]

    def check(self, P: PolyMatrix) -> bool:
        """Exact verification of every certificate identity."""
        m, n = P.shape
        if not (self.U_R @ self.S_m @ self.V_R == P):
            return False
        if not (self.U_R @ self.U_R_inv == PolyMatrix.eye(m) and self.V_R @ self.V_R_inv == PolyMatrix.eye(n)):
            return False
        for M in (self.U_R, self.V_R):
            d = M.det()
            if d.degree != 0:
                return False
        d = self.invariant_factors
        if any(not f.is_monic() for f in d):
            return False
        if any(not (d[i + 1] % d[i]).is_zero() for i in range(len(d) - 1)):
            return False
        for i in range(m):
            for j in range(n):
                want = d[i] if (i == j and i < self.rank) else Poly()
                if self.S_m[i, j] != want:
                    return False
        return True


class _Elim:
    """Working state for Smith elimination with certificate accumulation.

    Row operations ``A <- E A`` update ``Uinv <- E Uinv`` and ``U <- U E^-1``;
    column operations ``A <- A F`` update ``Vinv <- Vinv F`` and ``V <- F^-1 V``.
    """

    def __init__(self, P: PolyMatrix):
        m, n = P.shape
        self.m, self.n = m, n
        self.a = [list(r) for r in P]
        one, zero = Poly([1]), Poly()
        self.U = [[one if i == j else zero for j in range(m)] for i in range(m)]
        self.Ui = [[one if i == j else zero for j in range(m)] for i in range(m)]
        self.V = [[one if i == j else zero for j in range(n)] for i in range(n)]
        self.Vi = [[one if i == j else zero for j in range(n)] for i in range(n)]

    def swap_rows(self, i, j):
        if i == j:
            return
        a, Ui, U = self.a, self.Ui, self.U
        a[i], a[j] = a[j], a[i]
        Ui[i], Ui[j] = Ui[j], Ui[i]
        for r in U:
            r[i], r[j] = r[j], r[i]

    def swap_cols(self, i, j):
        if i == j:
            return
        for r in self.a:
            r[i], r[j] = r[j], r[i]
        for r in self.Vi:
            r[i], r[j] = r[j], r[i]
        self.V[i], self.V[j] = self.V[j], self.V[i]

    def add_row(self, i, j, q: Poly):
        """row_i += q * row_j."""
        if q.is_zero():
            return
        self.a[i] = [x + q * y for x, y in zip(self.a[i], self.a[j])]
        self.Ui[i] = [x + q * y for x, y in zip(self.Ui[i], self.Ui[j])]
        for r in self.U:
            r[j] = r[j] - q * r[i]

    def add_col(self, i, j, q: Poly):
        """col_j += q * col_i."""
        if q.is_zero():
            return
        for r in self.a:
            r[j] = r[j] + q * r[i]
        for r in self.Vi:
            r[j] = r[j] + q * r[i]
        self.V[i] = [x - q * y for x, y in zip(self.V[i], self.V[j])]

    def scale_row(self, i, c):
        inv = 1 / c
        self.a[i] = [x * c for x in self.a[i]]
        self.Ui[i] = [x * c for x in self.Ui[i]]
        for r in self.U:
            r[i] = r[i] * inv


def _pivot_key(p: Poly):
    return (p.degree, p.height())


def smith_form(P: PolyMatrix) -> SmithDecomposition:
    """Smith normal form with unimodular certificates and their inverses.

    Pivots are chosen as the nonzero entry of least degree (ties broken by
    coefficient height), which guarantees termination and limits growth.
    """
    if not isinstance(P, PolyMatrix):
        P = PolyMatrix(P)
    if P.is_zero():
        raise ValueError("smith_form needs a nonzero matrix")
    st = _Elim(P)
    a = st.a
    m, n = st.m, st.n
    factors = []
    t = 0
    while t < min(m, n):
        cands = [(i, j) for i in range(t, m) for j in range(t, n) if not a[i][j].is_zero()]
        if not cands:
            break
        i0, j0 = min(cands, key=lambda ij: _pivot_key(a[ij[0]][ij[1]]))
        st.swap_rows(t, i0)
        st.swap_cols(t, j0)
        while True:
            dirty = False
            for i in range(t + 1, m):
                if not a[i][t].is_zero():
                    q, _ = divmod(a[i][t], a[t][t])
                    st.add_row(i, t, -q)
                    if not a[i][t].is_zero():
                        dirty = True
            for j in range(t + 1, n):
                if not a[t][j].is_zero():
                    q, _ = divmod(a[t][j], a[t][t])
                    st.add_col(t, j, -q)
                    if not a[t][j].is_zero():
                        dirty = True
            if dirty:
                # a remainder of lower degree than the pivot appeared: re-pivot
                cands = [(i, t) for i in range(t, m) if not a[i][t].is_zero()]
                cands += [(t, j) for j in range(t + 1, n) if not a[t][j].is_zero()]
                i0, j0 = min(cands, key=lambda ij: _pivot_key(a[ij[0]][ij[1]]))
                st.swap_rows(t, i0)
                st.swap_cols(t, j0)
                continue
            bad = next(
                ((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if not (a[i][j] % a[t][t]).is_zero()),
                None,
            )
            if bad is None:
                break
            # pull the offending row into the pivot row to restore divisibility
            st.add_row(t, bad[0], Poly([1]))
        st.scale_row(t, 1 / a[t][t].lc)
        factors.append(a[t][t])
        t += 1

    r = len(factors)
    mk = lambda rows, k: PolyMatrix._raw(tuple(tuple(x) for x in rows), k, len(rows[0]) if rows else 0)
    return SmithDecomposition(
        U_R=mk(st.U, m),
        S_m=mk(a, m),
        V_R=mk(st.V, n),
        U_R_inv=mk(st.Ui, m),
        V_R_inv=mk(st.Vi, n),
        invariant_factors=tuple(factors),
        rank=r,
    )


# ---------------------------------------------------------------------------


def _clear_columns(M: RatMatrix) -> list[list[Poly]]:
    """Scale each column by its denominator lcm; column dependence is unchanged."""
    cols = []
    for j in range(M.cols):
        d = Poly([1])
        for i in range(M.rows):
            x = M[i, j]
            if x.den.degree > 0:
                d = poly_lcm(d, x.den)
        cols.append([M[i, j].num * d.exact_div(M[i, j].den) for i in range(M.rows)])
    return [[cols[j][i] for j in range(M.cols)] for i in range(M.rows)]


def rank_rs(M) -> tuple[int, tuple[int, ...]]:
    """Rank over the rational-function field and the first independent columns.

    Fraction-free (Bareiss) row echelon elimination over the polynomial ring;
    the pivot columns are the lexicographically first independent set ``J``
    (zero-based indices).
    """
    if isinstance(M, PolyMatrix):
        a = [list(r) for r in M]
        rows, cols = M.shape
    else:
        M = M if isinstance(M, RatMatrix) else RatMatrix(M)
        rows, cols = M.shape
        if rows == 0 or cols == 0:
            return 0, ()
        a = _clear_columns(M)
    pivots = []
    prev = Poly([1])
    r = 0
    for j in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if not a[i][j].is_zero()), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        for i in range(r + 1, rows):
            for k in range(j + 1, cols):
                a[i][k] = (a[i][k] * a[r][j] - a[i][j] * a[r][k]).exact_div(prev)
            a[i][j] = Poly()
        prev = a[r][j]
        pivots.append(j)
        r += 1
    return r, tuple(pivots)


def independent_columns(M: RatMatrix) -> RatMatrix:
    """The column basis ``L`` formed by the first independent columns."""
    _, J = rank_rs(M)
    return M[:, list(J)]


def membership_im(P: RatMatrix, Y: RatMatrix) -> bool:
    """True iff every column of ``Y`` lies in the column span of ``P`` over R(s)."""
    if P.rows != Y.rows:
        raise ValueError("row counts of P and Y differ")
    if Y.is_zero():
        return True
    r, _ = rank_rs(P)
    return rank_rs(P.hstack(Y))[0] == r
