"""Differential polynomials with exact rational coefficients.

A differential polynomial is a polynomial in jet symbols ``x^{(n)}`` (the
formal ``n``-th derivative of a dependent variable ``x``) equipped with the
total derivation ``d/dt`` that sends ``x^{(n)}`` to ``x^{(n+1)}``.

Jets are keyed by ``(name, order)`` so polynomials over different rings can be
combined freely; a :class:`DiffPolyRing` only fixes the variable order and the
weights used for canonical rendering and homogeneity checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Callable, Iterable, Iterator, Mapping

from gmpy2 import mpq

Jet = tuple[str, int]
Monomial = tuple[tuple[Jet, int], ...]

__all__ = [
    "DiffPoly",
    "DiffPolyRing",
    "Jet",
    "Monomial",
    "dp_derive",
    "format_fraction",
]


_MPQ = type(mpq(0))


def _to_fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def _as_q(c):
    """Coerce to the internal exact rational type (gmpy2 ``mpq``)."""
    if type(c) is _MPQ:
        return c
    if isinstance(c, int) and not isinstance(c, bool):
        return mpq(c)
    if isinstance(c, Rational):
        return mpq(int(c.numerator), int(c.denominator))
    if isinstance(c, str):
        return mpq(c)
    if isinstance(c, bool):
        return mpq(int(c))
    raise TypeError(f"exact rational expected, got {type(c).__name__}")


@lru_cache(maxsize=1 << 16)
def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        ja, pa = a[i]
        jb, pb = b[j]
        if ja == jb:
            out.append((ja, pa + pb))
            i += 1
            j += 1
        elif ja < jb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


@lru_cache(maxsize=1 << 16)
def _mono_derive(m: Monomial) -> tuple[tuple[int, Monomial], ...]:
    """Leibniz rule on a single monomial: list of (multiplicity, monomial)."""
    out = []
    for idx, ((name, order), power) in enumerate(m):
        rest = list(m[:idx]) + list(m[idx + 1:])
        if power > 1:
            rest.append(((name, order), power - 1))
        rest.append(((name, order + 1), 1))
        rest.sort()
        merged: list[tuple[Jet, int]] = []
        for jet, p in rest:
            if merged and merged[-1][0] == jet:
                merged[-1] = (jet, merged[-1][1] + p)
            else:
                merged.append((jet, p))
        out.append((power, tuple(merged)))
    return tuple(out)


class DiffPoly:
    """Immutable differential polynomial over the rationals.

    Zero coefficients are never stored, so two polynomials are equal exactly
    when their term dictionaries are equal. Coefficients are held as gmpy2
    ``mpq`` values (lowest terms, positive denominator); :meth:`coefficient`
    returns them as :class:`fractions.Fraction`.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        clean: dict[Monomial, object] = {}
        if terms:
            for m, c in terms.items():
                if c:
                    clean[m] = _as_q(c)
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict[Monomial, Fraction]) -> "DiffPoly":
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, c) -> "DiffPoly":
        c = _as_q(c)
        return cls._raw({(): c} if c else {})

    @classmethod
    def jet(cls, name: str, order: int = 0, power: int = 1) -> "DiffPoly":
        if order < 0 or power < 1:
            raise ValueError("jet order must be >= 0 and power >= 1")
        return cls._raw({(((name, order), power),): mpq(1)})

    @classmethod
    def coerce(cls, x) -> "DiffPoly":
        if isinstance(x, DiffPoly):
            return x
        return cls.const(x)

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return self._terms

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_constant(self) -> bool:
        return all(not m for m in self._terms)

    def constant_term(self) -> Fraction:
        return _to_fraction(self._terms.get((), 0))

    def coefficient(self, m: Monomial) -> Fraction:
        return _to_fraction(self._terms.get(m, 0))

    def jets(self) -> set[Jet]:
        return {jet for m in self._terms for jet, _ in m}

    def variables(self) -> set[str]:
        return {name for name, _ in self.jets()}

    def max_order(self) -> int:
        return max((order for _, order in self.jets()), default=-1)

    def weights(self, ring: "DiffPolyRing") -> set[int]:
        return {ring.monomial_weight(m) for m in self._terms}

    def is_homogeneous(self, ring: "DiffPolyRing", weight: int | None = None) -> bool:
        ws = self.weights(ring)
        if not ws:
            return True
        if weight is None:
            return len(ws) == 1
        return ws == {weight}

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        other = DiffPoly.coerce(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s += c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return DiffPoly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-DiffPoly.coerce(other))

    def __rsub__(self, other):
        return DiffPoly.coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, DiffPoly):
            c = _as_q(other)
            if not c:
                return DiffPoly._raw({})
            if c == 1:
                return self
            return DiffPoly._raw({m: v * c for m, v in self._terms.items()})
        if not self._terms or not other._terms:
            return DiffPoly._raw({})
        out: dict[Monomial, Fraction] = {}
        for ma, ca in self._terms.items():
            for mb, cb in other._terms.items():
                m = _mono_mul(ma, mb)
                s = out.get(m)
                out[m] = ca * cb if s is None else s + ca * cb
        return DiffPoly._raw({m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _as_q(other)
        return self * (1 / c)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not differential polynomials")
        out = DiffPoly.const(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return self._terms == other._terms
        try:
            return self._terms == DiffPoly.const(other)._terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # -- calculus -----------------------------------------------------
    def derive(self, times: int = 1) -> "DiffPoly":
        """Total derivative ``d/dt`` applied ``times`` times."""
        p = self
        for _ in range(times):
            out: dict[Monomial, Fraction] = {}
            for m, c in p._terms.items():
                for mult, dm in _mono_derive(m):
                    s = out.get(dm)
                    v = c * mult
                    out[dm] = v if s is None else s + v
            p = DiffPoly._raw({m: c for m, c in out.items() if c})
        return p

    def partial(self, jet: Jet) -> "DiffPoly":
        """Partial derivative with respect to one jet coordinate."""
        out: dict[Monomial, Fraction] = {}
        for m, c in self._terms.items():
            for idx, (j, power) in enumerate(m):
                if j != jet:
                    continue
                if power == 1:
                    rest = m[:idx] + m[idx + 1:]
                else:
                    rest = m[:idx] + ((j, power - 1),) + m[idx + 1:]
                out[rest] = out.get(rest, 0) + c * power
        return DiffPoly(out)

    def prolong(self, rhs: Mapping[str, "DiffPoly"], cache: dict | None = None) -> "DiffPoly":
        """Apply the evolutionary derivation with characteristic ``rhs``.

        The derivation sends ``x`` to ``rhs[x]`` and commutes with ``d/dt``,
        so ``x^{(n)}`` goes to ``d^n/dt^n rhs[x]``. Variables absent from
        ``rhs`` are treated as constants of the flow.
        """
        cache = {} if cache is None else cache
        total = DiffPoly()
        for jet in sorted(self.jets()):
            name, order = jet
            if name not in rhs:
                continue
            dj = cache.get(jet)
            if dj is None:
                dj = DiffPoly.coerce(rhs[name]).derive(order)
                cache[jet] = dj
            total = total + self.partial(jet) * dj
        return total

    def subs(self, mapping: Mapping[str, "DiffPoly"], cache: dict | None = None) -> "DiffPoly":
        """Compose: replace each variable ``x`` by ``mapping[x]`` (jets by its derivatives)."""
        cache = {} if cache is None else cache
        out = DiffPoly()
        for m, c in self._terms.items():
            term = DiffPoly.const(c)
            for (name, order), power in m:
                if name in mapping:
                    key = (name, order)
                    val = cache.get(key)
                    if val is None:
                        val = DiffPoly.coerce(mapping[name]).derive(order)
                        cache[key] = val
                else:
                    val = DiffPoly.jet(name, order)
                term = term * val ** power
            out = out + term
        return out

    def evaluate(self, jet_value: Callable[[Jet], object], one=1.0):
        """Evaluate numerically; ``jet_value`` maps a jet to a number or array."""
        total = None
        cache: dict[Jet, object] = {}
        for m, c in self._terms.items():
            term = float(c) * one
            for jet, power in m:
                val = cache.get(jet)
                if val is None:
                    val = jet_value(jet)
                    cache[jet] = val
                term = term * (val if power == 1 else val ** power)
            total = term if total is None else total + term
        return 0.0 * one if total is None else total

    # -- display ------------------------------------------------------
    def __repr__(self):
        return f"DiffPoly({self.to_text()!r})"

    def to_text(self, ring: "DiffPolyRing | None" = None) -> str:
        ring = ring or DiffPolyRing.infer(self)
        return ring.render(self)


def dp_derive(p: DiffPoly) -> DiffPoly:
    """``d/dt`` of a differential polynomial (Leibniz rule)."""
    return p.derive()


def format_fraction(c) -> str:
    num, den = int(c.numerator), int(c.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def _prime_suffix(order: int) -> str:
    if order <= 3:
        return "'" * order
    return f"^({order})"


@dataclass(frozen=True)
class DiffPolyRing:
    """Names and weights of the dependent variables.

    ``weights[i]`` is the weight of ``variables[i]``; the jet ``x^{(n)}`` has
    weight ``weight(x) + n``.
    """

    variables: tuple[str, ...]
    weights: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        ws = tuple(self.weights) or (1,) * len(self.variables)
        if len(ws) != len(self.variables):
            raise ValueError("one weight per variable required")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        object.__setattr__(self, "weights", ws)

    @classmethod
    def infer(cls, p: DiffPoly) -> "DiffPolyRing":
        return cls(tuple(sorted(p.variables())))

    def __contains__(self, name: str) -> bool:
        return name in self.variables

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def weight_of(self, name: str) -> int:
        return self.weights[self.variables.index(name)]

    def gen(self, name: str, order: int = 0) -> DiffPoly:
        if name not in self.variables:
            raise KeyError(f"{name!r} is not a variable of this ring")
        return DiffPoly.jet(name, order)

    @property
    def gens(self) -> tuple[DiffPoly, ...]:
        return tuple(DiffPoly.jet(v) for v in self.variables)

    def jet_weight(self, jet: Jet) -> int:
        name, order = jet
        return self.weight_of(name) + order

    def monomial_weight(self, m: Monomial) -> int:
        return sum(self.jet_weight(j) * p for j, p in m)

    def contains(self, p: DiffPoly) -> bool:
        return p.variables() <= set(self.variables)

    # canonical order: total weight, then the factor list by (variable index, jet order)
    def monomial_key(self, m: Monomial):
        factors = []
        for (name, order), power in m:
            factors.extend([(self.index(name), order)] * power)
        factors.sort()
        return (self.monomial_weight(m), tuple(factors))

    def sorted_terms(self, p: DiffPoly) -> list[tuple[Monomial, Fraction]]:
        return sorted(p.terms.items(), key=lambda mc: self.monomial_key(mc[0]))

    def render_monomial(self, m: Monomial) -> str:
        parts = []
        for (name, order), power in sorted(m, key=lambda jp: (self.index(jp[0][0]), jp[0][1])):
            s = name + _prime_suffix(order)
            if power > 1:
                s = f"{s}^{power}" if order <= 3 else f"({s})^{power}"
            parts.append(s)
        return " ".join(parts)

    def render(self, p: DiffPoly) -> str:
        if p.is_zero():
            return "0"
        out = []
        for k, (m, c) in enumerate(self.sorted_terms(p)):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            body = self.render_monomial(m)
            if not body:
                txt = format_fraction(mag)
            elif mag == 1:
                txt = body
            else:
                txt = f"{format_fraction(mag)} {body}"
            if k == 0:
                out.append(txt if sign == "+" else f"-{txt}")
            else:
                out.append(f"{sign} {txt}")
        return " ".join(out)

    def render_latex(self, p: DiffPoly) -> str:
        if p.is_zero():
            return "0"
        out = []
        for k, (m, c) in enumerate(self.sorted_terms(p)):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            factors = []
            for (name, order), power in sorted(m, key=lambda jp: (self.index(jp[0][0]), jp[0][1])):
                base = _latex_name(name)
                if order == 0:
                    s = base
                elif order <= 3:
                    s = base + "'" * order
                else:
                    s = f"{base}^{{({order})}}"
                if power > 1:
                    s = f"{s}^{{{power}}}" if order == 0 else f"\\left({s}\\right)^{{{power}}}"
                factors.append(s)
            body = " ".join(factors)
            if mag.denominator == 1:
                coef = str(mag.numerator)
            else:
                coef = f"\\frac{{{mag.numerator}}}{{{mag.denominator}}}"
            if not body:
                txt = coef
            elif mag == 1:
                txt = body
            else:
                txt = f"{coef} {body}"
            if k == 0:
                out.append(txt if sign == "+" else f"-{txt}")
            else:
                out.append(f"{sign} {txt}")
        return " ".join(out)

    def iter_jets(self, max_order: int) -> Iterator[Jet]:
        for name in self.variables:
            for n in range(max_order + 1):
                yield (name, n)

    def monomials_of_weight(self, weight: int) -> list[Monomial]:
        """All monomials (coefficient 1) of exactly the given weight."""
        jets = [
            (name, n)
            for name in self.variables
            for n in range(max(0, weight - self.weight_of(name)) + 1)
            if self.weight_of(name) + n <= weight and self.weight_of(name) + n > 0
        ]
        jets.sort()
        results: list[Monomial] = []

        def rec(start: int, remaining: int, acc: list[tuple[Jet, int]]):
            if remaining == 0:
                results.append(tuple(acc))
                return
            for idx in range(start, len(jets)):
                jet = jets[idx]
                w = self.jet_weight(jet)
                maxp = remaining // w
                for power in range(1, maxp + 1):
                    acc.append((jet, power))
                    rec(idx + 1, remaining - w * power, acc)
                    acc.pop()

        if weight == 0:
            return [()]
        rec(0, weight, [])
        return results


def _latex_name(name: str) -> str:
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return f"{head}_{{{tail}}}" if tail else head


def linear_combination(pairs: Iterable[tuple[object, DiffPoly]]) -> DiffPoly:
    out = DiffPoly()
    for c, p in pairs:
        out = out + p * c
    return out
