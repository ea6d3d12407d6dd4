"""Windowed Laurent matrices over differential polynomials.

A :class:`LoopMatrix` is an ``n x n`` matrix whose entries are finite Laurent
sums in ``z`` with :class:`~dshierarchy.diffpoly.DiffPoly` coefficients. It
represents an element of the loop algebra ``gl_n((z^-1))`` known modulo the
part of filtration degree above ``prec``. High filtration degree means low
powers of ``z``, so a truncated matrix is exact for all ``z``-powers at or
above ``window[0]``.

Precision is tracked as a filtration degree rather than as a raw z-range
because the grading is multiplicative: the product of elements known through
degrees ``pa`` and ``pb`` is known through
``min(pa + mindeg(b), pb + mindeg(a))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping

from .diffpoly import DiffPoly, DiffPolyRing

__all__ = [
    "GradingSpec",
    "LoopMatrix",
    "SplittingKind",
    "WindowError",
    "ad_exp_conjugate",
    "complement",
    "graded_split",
    "mat_bracket",
    "project_splitting",
]

INF = math.inf


class WindowError(ArithmeticError):
    """Raised when a result would need Laurent data outside the known window."""


class SplittingKind(Enum):
    MINUS = "minus"
    PLUS = "plus"
    IWAHORI_MINUS = "iwahori-minus"
    IWAHORI_PLUS = "iwahori-plus"


_COMPLEMENT = {
    SplittingKind.MINUS: SplittingKind.PLUS,
    SplittingKind.PLUS: SplittingKind.MINUS,
    SplittingKind.IWAHORI_MINUS: SplittingKind.IWAHORI_PLUS,
    SplittingKind.IWAHORI_PLUS: SplittingKind.IWAHORI_MINUS,
}


def complement(kind: SplittingKind) -> SplittingKind:
    return _COMPLEMENT[kind]


@dataclass(frozen=True)
class GradingSpec:
    """A Z-grading of ``gl_n[z, z^-1]``.

    For the diagonal kinds the elementary matrix ``E_ij z^k`` is homogeneous
    of degree ``weights[j] - weights[i] + z_degree * k``. A custom grading is
    transported from a diagonal ``base`` grading through a constant-in-time
    ``conjugator`` ``C``: ``x`` has degree ``d`` when ``C^-1 x C`` does.
    """

    name: str
    n: int
    z_degree: int
    weights: tuple[int, ...]
    conjugator: "LoopMatrix | None" = None
    base: "GradingSpec | None" = None

    @classmethod
    def principal(cls, n: int) -> "GradingSpec":
        return cls("principal", n, -n, tuple(range(n)))

    @classmethod
    def homogeneous(cls, n: int) -> "GradingSpec":
        return cls("homogeneous", n, -1, (0,) * n)

    @classmethod
    def custom(cls, conjugator: "LoopMatrix", base: "GradingSpec", name: str = "custom") -> "GradingSpec":
        if not base.is_diagonal:
            raise ValueError("the base of a custom grading must itself be diagonal")
        if not conjugator.is_exact or not conjugator.is_constant_in_t():
            raise ValueError("conjugator must be an exact, t-independent matrix")
        return cls(name, base.n, base.z_degree, base.weights, conjugator.with_grading(base), base)

    @property
    def is_diagonal(self) -> bool:
        return self.conjugator is None

    def degree(self, i: int, j: int, k: int) -> int:
        if self.conjugator is not None:
            raise TypeError("elementary matrices are not homogeneous for a custom grading")
        return self.weights[j] - self.weights[i] + self.z_degree * k

    @property
    def _spread(self) -> int:
        return max(self.weights) - min(self.weights)

    def z_min(self, prec: int) -> int:
        """Smallest z-power from which every entry has degree ``<= prec``."""
        if self.conjugator is not None:
            c_hi = self.conjugator.z_range()[1]
            d_hi = _inverse_conjugator(self).z_range()[1]
            return self.base.z_min(prec) + c_hi + d_hi
        return -((prec - self._spread) // -self.z_degree)

    def z0_bound(self, kind: SplittingKind) -> int:
        """Precision needed to project onto ``kind`` (and its complement) exactly."""
        if self.conjugator is not None:
            # conservative: ask for every entry at z^0 and above
            p = -self.z_degree * self.z_min(0)
            while self.z_min(p) > 0:
                p += 1
            while self.z_min(p - 1) <= 0:
                p -= 1
            return p
        n = self.n
        if kind in (SplittingKind.MINUS, SplittingKind.PLUS):
            return max(self.degree(i, j, 0) for i in range(n) for j in range(n))
        lower = max(self.degree(i, j, 0) for i in range(n) for j in range(n) if i >= j)
        z1 = max(self.degree(i, j, 1) for i in range(n) for j in range(n))
        return max(lower, z1)

    def inverse_conjugator(self) -> "LoopMatrix":
        return _inverse_conjugator(self)

    def to_base(self, x: "LoopMatrix") -> "LoopMatrix":
        """``C^-1 x C`` regraded by the base grading (identity for diagonal kinds)."""
        if self.conjugator is None:
            return x.with_grading(self)
        if not x.is_exact:
            raise WindowError("cannot move a truncated matrix into the base frame")
        c = self.conjugator
        return (_inverse_conjugator(self) @ x.with_grading(self.base) @ c).with_grading(self.base)

    def from_base(self, y: "LoopMatrix") -> "LoopMatrix":
        """``C y C^-1`` regraded by this grading; truncated inputs stay truncated."""
        if self.conjugator is None:
            return y.with_grading(self)
        y = y.with_grading(self.base)
        c, ci = self.conjugator, _inverse_conjugator(self)
        raw = _mul(_mul(c, y), ci)
        if y.prec is None:
            return LoopMatrix(self.n, raw._entries, self, None)
        zmin = self.z_min(y.prec)
        kept = {key: v for key, v in raw._entries.items() if key[2] >= zmin}
        return LoopMatrix._build(self.n, kept, self, y.prec)

    def piece_basis(self, d: int) -> tuple["LoopMatrix", ...]:
        """Basis of the degree-``d`` part of ``L sl_n``."""
        return _piece_basis(self, d)

    def __repr__(self):
        return f"GradingSpec({self.name!r}, n={self.n})"


@lru_cache(maxsize=None)
def _inverse_conjugator(g: GradingSpec) -> "LoopMatrix":
    return g.conjugator.inverse_2x2() if g.n == 2 else _inverse_unimodular(g.conjugator)


def _inverse_unimodular(c: "LoopMatrix") -> "LoopMatrix":
    raise NotImplementedError("custom gradings are only provided for 2x2 conjugators")


@lru_cache(maxsize=None)
def _piece_basis(g: GradingSpec, d: int) -> tuple["LoopMatrix", ...]:
    n = g.n
    if g.conjugator is not None:
        return tuple(g.from_base(b) for b in _piece_basis(g.base, d))
    out = []
    zd = g.z_degree
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            num = d - (g.weights[j] - g.weights[i])
            if num % zd == 0:
                out.append(LoopMatrix.elementary(n, i, j, num // zd, grading=g))
    if d % zd == 0:
        k = d // zd
        for i in range(n - 1):
            out.append(LoopMatrix(n, {(i, i, k): 1, (i + 1, i + 1, k): -1}, g))
    out.sort(key=lambda m: sorted(m.entries))
    return tuple(out)


def _coerce_entry(v) -> DiffPoly:
    return v if isinstance(v, DiffPoly) else DiffPoly.const(v)


class LoopMatrix:
    """Immutable ``n x n`` Laurent matrix with DiffPoly coefficients.

    ``entries`` maps ``(row, col, z_power)`` (0-based) to a nonzero DiffPoly.
    ``prec`` is ``None`` for exact matrices; otherwise components of
    filtration degree above ``prec`` are unknown and never stored.
    Equality compares the size, the stored entries and the precision.
    """

    __slots__ = ("n", "_entries", "grading", "prec", "_hash", "_degcache")

    def __init__(self, n: int, entries: Mapping[tuple[int, int, int], object] | None = None,
                 grading: GradingSpec | None = None, prec: int | None = None):
        if n < 1:
            raise ValueError("matrix size must be positive")
        grading = grading or GradingSpec.principal(n)
        if grading.n != n:
            raise ValueError("grading size does not match matrix size")
        clean = {}
        for (i, j, k), v in (entries or {}).items():
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"entry ({i}, {j}) outside a {n}x{n} matrix")
            p = _coerce_entry(v)
            if p:
                clean[(i, j, int(k))] = p
        self._init(n, clean, grading, prec)
        if prec is not None:
            self._entries = self._truncated_entries(prec)

    def _init(self, n, entries, grading, prec):
        self.n = n
        self._entries = entries
        self.grading = grading
        self.prec = prec
        self._hash = None
        self._degcache = None

    @classmethod
    def _build(cls, n, entries, grading, prec) -> "LoopMatrix":
        obj = cls.__new__(cls)
        obj._init(n, entries, grading, prec)
        return obj

    def _truncated_entries(self, prec: int) -> dict:
        g = self.grading
        if g.is_diagonal:
            return {key: v for key, v in self._entries.items() if g.degree(*key) <= prec}
        zmin = g.z_min(prec)
        return {key: v for key, v in self._entries.items() if key[2] >= zmin}

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, n: int, grading: GradingSpec | None = None, prec: int | None = None) -> "LoopMatrix":
        return cls(n, {}, grading, prec)

    @classmethod
    def identity(cls, n: int, grading: GradingSpec | None = None) -> "LoopMatrix":
        return cls(n, {(i, i, 0): 1 for i in range(n)}, grading)

    @classmethod
    def elementary(cls, n: int, i: int, j: int, k: int = 0, coeff=1,
                   grading: GradingSpec | None = None) -> "LoopMatrix":
        return cls(n, {(i, j, k): coeff}, grading)

    @classmethod
    def from_laurent(cls, rows: list[list[Mapping[int, object] | object]],
                     grading: GradingSpec | None = None) -> "LoopMatrix":
        """Build from nested rows; each cell is a scalar or a ``{z_power: coeff}`` map."""
        n = len(rows)
        entries = {}
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError("matrix must be square")
            for j, cell in enumerate(row):
                cell = cell if isinstance(cell, Mapping) else {0: cell}
                for k, c in cell.items():
                    entries[(i, j, k)] = _coerce_entry(c) + entries.get((i, j, k), DiffPoly())
        return cls(n, entries, grading)

    @classmethod
    def from_sympy(cls, mat, z, grading: GradingSpec | None = None) -> "LoopMatrix":
        """Convert a sympy matrix of rational Laurent polynomials in ``z``."""
        import sympy as sp

        n = mat.shape[0]
        entries = {}
        for i in range(n):
            for j in range(n):
                expr = sp.expand(mat[i, j])
                if expr == 0:
                    continue
                for term in sp.Add.make_args(expr):
                    coeff, power = term.as_coeff_exponent(z)
                    if coeff.free_symbols:
                        raise ValueError("only rational coefficients are supported")
                    c = Fraction(int(sp.Rational(coeff).p), int(sp.Rational(coeff).q))
                    key = (i, j, int(power))
                    entries[key] = entries.get(key, DiffPoly()) + c
        return cls(n, entries, grading)

    # -- inspection ---------------------------------------------------
    @property
    def entries(self) -> Mapping[tuple[int, int, int], DiffPoly]:
        return self._entries

    @property
    def is_exact(self) -> bool:
        return self.prec is None

    def is_zero(self) -> bool:
        return not self._entries

    def __bool__(self):
        return bool(self._entries)

    def is_constant_in_t(self) -> bool:
        return all(v.is_constant() for v in self._entries.values())

    def z_range(self) -> tuple[int, int]:
        ks = [k for _, _, k in self._entries]
        return (min(ks), max(ks)) if ks else (0, 0)

    @property
    def window(self) -> tuple[int, int]:
        """Range of z-powers that are fully determined (and may be nonzero)."""
        lo, hi = self.z_range()
        if self.prec is None:
            return (lo, hi)
        return (self.grading.z_min(self.prec), hi)

    def coeff(self, i: int, j: int, k: int) -> DiffPoly:
        if self.prec is not None:
            g = self.grading
            known = g.degree(i, j, k) <= self.prec if g.is_diagonal else k >= g.z_min(self.prec)
            if not known:
                raise WindowError(f"entry ({i}, {j}) at z^{k} is beyond the known precision")
        return self._entries.get((i, j, k), DiffPoly())

    def entry(self, i: int, j: int) -> dict[int, DiffPoly]:
        return {k: v for (a, b, k), v in self._entries.items() if a == i and b == j}

    def trace(self) -> dict[int, DiffPoly]:
        out: dict[int, DiffPoly] = {}
        for (i, j, k), v in self._entries.items():
            if i == j:
                out[k] = out.get(k, DiffPoly()) + v
        return {k: v for k, v in out.items() if v}

    def is_traceless(self) -> bool:
        return not self.trace()

    def variables(self) -> set[str]:
        out = set()
        for v in self._entries.values():
            out |= v.variables()
        return out

    def degrees(self) -> list[int]:
        """Filtration degrees present (diagonal gradings read them off entries)."""
        g = self.grading
        if g.is_diagonal:
            return sorted({g.degree(*key) for key in self._entries})
        return sorted(graded_split(self).keys())

    def min_degree(self) -> float:
        if self._degcache is None:
            ds = self.degrees() if self._entries else []
            self._degcache = ds[0] if ds else INF
        return self._degcache

    def mindeg_bound(self) -> float:
        """Lower bound on the degree of the true (untruncated) element."""
        if self._entries:
            return self.min_degree()
        return INF if self.prec is None else self.prec + 1

    def is_homogeneous(self, degree: int | None = None) -> bool:
        ds = self.degrees()
        if not ds:
            return True
        return len(ds) == 1 and (degree is None or ds[0] == degree)

    # -- structural ---------------------------------------------------
    def with_grading(self, g: GradingSpec) -> "LoopMatrix":
        if g is self.grading or g == self.grading:
            return self
        if self.prec is not None:
            raise WindowError("cannot regrade a truncated matrix")
        return LoopMatrix._build(self.n, self._entries, g, None)

    def truncate(self, prec: int | None) -> "LoopMatrix":
        if prec is None:
            return self
        if self.prec is not None and prec >= self.prec:
            return self
        return LoopMatrix._build(self.n, self._truncated_entries(prec), self.grading, prec)

    def exact(self) -> "LoopMatrix":
        """Forget the truncation tag, treating the stored part as exact."""
        return LoopMatrix._build(self.n, self._entries, self.grading, None)

    def map_entries(self, f: Callable[[DiffPoly], DiffPoly]) -> "LoopMatrix":
        out = {}
        for key, v in self._entries.items():
            w = f(v)
            if w:
                out[key] = w
        return LoopMatrix._build(self.n, out, self.grading, self.prec)

    def derive(self) -> "LoopMatrix":
        """Entrywise ``d/dt``; the filtration degree is unchanged."""
        return self.map_entries(DiffPoly.derive)

    def subs(self, mapping: Mapping[str, DiffPoly]) -> "LoopMatrix":
        cache: dict = {}
        return self.map_entries(lambda p: p.subs(mapping, cache))

    def prolong(self, rhs: Mapping[str, DiffPoly]) -> "LoopMatrix":
        cache: dict = {}
        return self.map_entries(lambda p: p.prolong(rhs, cache))

    def filter(self, pred: Callable[[int, int, int], bool]) -> "LoopMatrix":
        out = {key: v for key, v in self._entries.items() if pred(*key)}
        return LoopMatrix._build(self.n, out, self.grading, self.prec)

    # -- arithmetic ---------------------------------------------------
    def _combine(self, other: "LoopMatrix", sign: int) -> "LoopMatrix":
        if not isinstance(other, LoopMatrix):
            return NotImplemented
        if other.n != self.n:
            raise ValueError("matrix sizes differ")
        g = _common_grading(self, other)
        prec = _min_prec(self.prec, other.prec)
        out = dict(self._entries)
        for key, v in other._entries.items():
            s = out.get(key)
            w = v if sign > 0 else -v
            if s is None:
                out[key] = w
            else:
                s = s + w
                if s:
                    out[key] = s
                else:
                    del out[key]
        res = LoopMatrix._build(self.n, out, g, prec)
        if prec is not None and (self.prec != prec or other.prec != prec):
            res._entries = res._truncated_entries(prec)
        return res

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return LoopMatrix._build(self.n, {k: -v for k, v in self._entries.items()}, self.grading, self.prec)

    def __mul__(self, c):
        if isinstance(c, LoopMatrix):
            raise TypeError("use @ for matrix products")
        if not isinstance(c, DiffPoly):
            c = DiffPoly.const(c)
        return self.map_entries(lambda p: p * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1 / Fraction(c))

    def __matmul__(self, other):
        if not isinstance(other, LoopMatrix):
            return NotImplemented
        return _mul(self, other)

    def shift(self, k: int) -> "LoopMatrix":
        """Multiply by ``z^k``; only exact matrices may be shifted."""
        if self.prec is not None:
            raise WindowError("cannot shift a truncated matrix")
        return LoopMatrix._build(self.n, {(i, j, kk + k): v for (i, j, kk), v in self._entries.items()},
                                 self.grading, None)

    def bracket(self, other: "LoopMatrix") -> "LoopMatrix":
        return _mul(self, other) - _mul(other, self)

    def inverse_2x2(self) -> "LoopMatrix":
        """Inverse of an exact 2x2 matrix with constant monomial determinant."""
        if self.n != 2 or self.prec is not None:
            raise ValueError("inverse_2x2 needs an exact 2x2 matrix")
        det = (self.restrict(0, 0) @ self.restrict(1, 1)) - (self.restrict(0, 1) @ self.restrict(1, 0))
        d = det.entry(0, 0)
        if len(d) != 1:
            raise ValueError("determinant is not a monomial in z")
        (k, c), = d.items()
        if not c.is_constant():
            raise ValueError("determinant depends on t")
        inv = Fraction(1) / c.constant_term()
        a, b = self.entry(0, 0), self.entry(0, 1)
        cc, dd = self.entry(1, 0), self.entry(1, 1)
        ents = {}
        for (i, j), cell, sgn in (((0, 0), dd, 1), ((0, 1), b, -1), ((1, 0), cc, -1), ((1, 1), a, 1)):
            for kk, v in cell.items():
                ents[(i, j, kk - k)] = v * (sgn * inv)
        return LoopMatrix(2, ents, self.grading)

    def restrict(self, i: int, j: int) -> "LoopMatrix":
        """The scalar Laurent polynomial at ``(i, j)`` as a 1x1 matrix."""
        return LoopMatrix(1, {(0, 0, k): v for k, v in self.entry(i, j).items()},
                          GradingSpec.homogeneous(1))

    # -- equality / display ------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, LoopMatrix):
            return NotImplemented
        return self.n == other.n and self.prec == other.prec and self._entries == other._entries

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.prec, frozenset(self._entries.items())))
        return self._hash

    def to_text(self, ring: DiffPolyRing | None = None) -> str:
        rows = []
        for i in range(self.n):
            cells = [_laurent_text(self.entry(i, j), ring) for j in range(self.n)]
            rows.append("[" + ", ".join(cells) + "]")
        tail = "" if self.prec is None else f" + O(deg > {self.prec})"
        return "[" + ", ".join(rows) + "]" + tail

    def __repr__(self):
        return f"LoopMatrix({self.to_text()})"


def _laurent_text(cell: Mapping[int, DiffPoly], ring: DiffPolyRing | None) -> str:
    if not cell:
        return "0"
    out = ""
    for k in sorted(cell, reverse=True):
        body = cell[k].to_text(ring)
        zpart = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
        sign = "-" if body.startswith("-") and len(cell[k].terms) == 1 else "+"
        if sign == "-":
            body = body[1:].lstrip()
        if not zpart:
            term = body
        elif body == "1":
            term = zpart
        elif len(cell[k].terms) == 1:
            term = f"{body} {zpart}"
        else:
            term = f"({body}) {zpart}"
        if not out:
            out = term if sign == "+" else f"-{term}"
        else:
            out += f" {sign} {term}"
    return out


def _min_prec(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _common_grading(a: LoopMatrix, b: LoopMatrix) -> GradingSpec:
    if a.grading == b.grading:
        return a.grading
    if b.prec is None:
        return a.grading
    if a.prec is None:
        return b.grading
    raise ValueError(f"incompatible gradings {a.grading.name!r} and {b.grading.name!r}")


def _product_prec(a: LoopMatrix, b: LoopMatrix):
    if a.prec is None and b.prec is None:
        return None
    cands = []
    if a.prec is not None:
        cands.append(a.prec + b.mindeg_bound())
    if b.prec is not None:
        cands.append(b.prec + a.mindeg_bound())
    p = min(cands)
    return None if p == INF else int(p)


def _mul(a: LoopMatrix, b: LoopMatrix) -> LoopMatrix:
    if a.n != b.n:
        raise ValueError("matrix sizes differ")
    g = _common_grading(a, b)
    if a.prec is not None or b.prec is not None:
        if not g.is_diagonal:
            raise WindowError("truncated products are computed in the base frame of a custom grading")
        a, b = a.with_grading(g) if a.prec is None else a, b.with_grading(g) if b.prec is None else b
    prec = _product_prec(a, b)
    rows: dict[int, list] = {}
    for (l, j, kb), vb in b._entries.items():
        rows.setdefault(l, []).append((j, kb, vb))
    out: dict[tuple[int, int, int], DiffPoly] = {}
    diag = g.is_diagonal
    for (i, l, ka), va in a._entries.items():
        for j, kb, vb in rows.get(l, ()):
            key = (i, j, ka + kb)
            if prec is not None and diag and g.degree(*key) > prec:
                continue
            prod = va * vb
            s = out.get(key)
            out[key] = prod if s is None else s + prod
    out = {k: v for k, v in out.items() if v}
    res = LoopMatrix._build(a.n, out, g, prec)
    if prec is not None and not diag:
        res._entries = res._truncated_entries(prec)
    return res


def mat_bracket(a: LoopMatrix, b: LoopMatrix) -> LoopMatrix:
    """Commutator ``ab - ba`` with precision contracted by the product rule.

    Raises :class:`WindowError` when the result is truncated and no z-power
    of it is fully determined.
    """
    res = a.bracket(b)
    if res.prec is not None and a._entries and b._entries:
        hi = a.z_range()[1] + b.z_range()[1]
        if res.window[0] > hi:
            raise WindowError("bracket has an empty window; increase the truncation depth")
    return res


def graded_split(x: LoopMatrix, g: GradingSpec | None = None) -> dict[int, LoopMatrix]:
    """Split into homogeneous components (returned exact, keyed by degree)."""
    g = g or x.grading
    if g.is_diagonal:
        x = x if x.grading == g or x.prec is None else _regrade_checked(x, g)
        parts: dict[int, dict] = {}
        for key, v in x.entries.items():
            parts.setdefault(g.degree(*key), {})[key] = v
        return {d: LoopMatrix._build(x.n, ents, g, None) for d, ents in sorted(parts.items())}
    if x.prec is not None:
        raise WindowError("graded_split of a truncated matrix needs a diagonal grading")
    y = g.to_base(x)
    return {d: g.from_base(c) for d, c in graded_split(y, g.base).items()}


def _regrade_checked(x: LoopMatrix, g: GradingSpec) -> LoopMatrix:
    raise ValueError(f"matrix carries grading {x.grading.name!r}, not {g.name!r}")


def project_splitting(x: LoopMatrix, splitting: SplittingKind) -> LoopMatrix:
    """Project onto one summand of a loop-algebra splitting.

    MINUS keeps ``z^k`` for ``k >= 0``; IWAHORI_MINUS keeps ``k >= 1`` and the
    lower-triangular plus diagonal part of ``z^0``. PLUS and IWAHORI_PLUS are
    the complements, and keep the precision of ``x``. The kept part of a
    MINUS-type projection is a polynomial in ``z`` and is returned exact.
    """
    if x.prec is not None and x.prec < x.grading.z0_bound(splitting):
        raise WindowError(
            f"precision {x.prec} does not determine the z^0 component (need {x.grading.z0_bound(splitting)})")
    if splitting is SplittingKind.MINUS:
        return x.filter(lambda i, j, k: k >= 0).exact()
    if splitting is SplittingKind.IWAHORI_MINUS:
        return x.filter(lambda i, j, k: k >= 1 or (k == 0 and i >= j)).exact()
    if splitting is SplittingKind.PLUS:
        return x.filter(lambda i, j, k: k < 0)
    return x.filter(lambda i, j, k: k < 0 or (k == 0 and i < j))


def ad_exp_conjugate(m: LoopMatrix, x: LoopMatrix, max_degree: int) -> LoopMatrix:
    """``sum_k ad(m)^k x / k!`` truncated above ``max_degree``.

    ``m`` must have strictly positive filtration degree so each degree gets
    finitely many contributions.
    """
    if not m:
        return x.truncate(max_degree)
    dm = m.min_degree()
    if dm <= 0:
        raise ValueError("ad_exp_conjugate needs m of strictly positive degree")
    term = x.truncate(max_degree)
    total = term
    k = 1
    while term:
        if term.mindeg_bound() + dm > max_degree:
            break
        term = (m.bracket(term)).truncate(max_degree) * Fraction(1, k)
        total = total + term
        k += 1
    return total


def pairwise_brackets_vanish(mats: Iterable[LoopMatrix]) -> bool:
    ms = list(mats)
    return all(not ms[i].bracket(ms[j]) for i in range(len(ms)) for j in range(i + 1, len(ms)))
