"""Matrix data for ``sl_n`` and a small catalog of Heisenberg subalgebras.

Conventions: ``E_ij`` are 0-based elementary matrices, ``e_i = E_{i,i+1}``,
``f_i = E_{i+1,i}``, ``h_i = E_ii - E_{i+1,i+1}``. The cyclic element is
``p_-1 = sum_i f_i + E_{1n} z`` and its partner ``p_1 = sum_i e_i + E_{n1} z^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable

import sympy as sp

from . import _linalg
from .diffpoly import DiffPoly
from .loop import GradingSpec, LoopMatrix, graded_split

__all__ = [
    "HEISENBERG_IDS",
    "HeisenbergSpec",
    "SimpleLieData",
    "SplitError",
    "TransversalSpace",
    "centralizer_dimension",
    "default_transversal",
    "get_heisenberg",
    "homogeneous_heisenberg",
    "is_strongly_regular",
    "kernel_image_split",
    "make_sln",
    "nonsmooth_sl2_heisenberg",
    "principal_heisenberg",
]


class SplitError(ValueError):
    """The kernel/image decomposition does not exist for the given data."""


def _E(n, i, j, k=0, c=1, g=None):
    return LoopMatrix.elementary(n, i, j, k, c, grading=g)


@dataclass(frozen=True)
class SimpleLieData:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("sl_n needs n >= 2")

    @property
    def id(self) -> str:
        return f"sl{self.n}"

    @property
    def rank(self) -> int:
        return self.n - 1

    @property
    def coxeter_number(self) -> int:
        return self.n

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(range(1, self.n))

    @cached_property
    def grading(self) -> GradingSpec:
        return GradingSpec.principal(self.n)

    def E(self, i: int, j: int, k: int = 0, coeff=1) -> LoopMatrix:
        return _E(self.n, i, j, k, coeff, self.grading)

    @cached_property
    def e(self) -> tuple[LoopMatrix, ...]:
        return tuple(self.E(i, i + 1) for i in range(self.n - 1))

    @cached_property
    def f(self) -> tuple[LoopMatrix, ...]:
        return tuple(self.E(i + 1, i) for i in range(self.n - 1))

    @cached_property
    def h(self) -> tuple[LoopMatrix, ...]:
        return tuple(self.E(i, i) - self.E(i + 1, i + 1) for i in range(self.n - 1))

    @cached_property
    def e_theta(self) -> LoopMatrix:
        return self.E(0, self.n - 1)

    @cached_property
    def f_theta(self) -> LoopMatrix:
        return self.E(self.n - 1, 0)

    @cached_property
    def cartan_matrix(self) -> tuple[tuple[int, ...], ...]:
        n = self.rank
        return tuple(tuple(2 if i == j else (-1 if abs(i - j) == 1 else 0) for j in range(n)) for i in range(n))

    @cached_property
    def coweights(self) -> tuple[LoopMatrix, ...]:
        """Fundamental coweights ``diag(1,..,1,0,..,0) - (i/n) Id`` (i ones)."""
        n = self.n
        out = []
        for i in range(1, n):
            ents = {(r, r, 0): Fraction(int(r < i)) - Fraction(i, n) for r in range(n)}
            out.append(LoopMatrix(n, ents, self.grading))
        return tuple(out)

    @cached_property
    def pbar_minus1(self) -> LoopMatrix:
        out = LoopMatrix.zero(self.n, self.grading)
        for f in self.f:
            out = out + f
        return out

    @cached_property
    def p_minus1(self) -> LoopMatrix:
        return self.pbar_minus1 + self.E(0, self.n - 1, 1)

    @cached_property
    def p_plus1(self) -> LoopMatrix:
        out = self.E(self.n - 1, 0, -1)
        for e in self.e:
            out = out + e
        return out

    @cached_property
    def n_plus(self) -> tuple[LoopMatrix, ...]:
        return tuple(self.E(i, j) for i in range(self.n) for j in range(i + 1, self.n))

    @cached_property
    def n_minus(self) -> tuple[LoopMatrix, ...]:
        return tuple(self.E(j, i) for i in range(self.n) for j in range(i + 1, self.n))

    @cached_property
    def borel_plus(self) -> tuple[LoopMatrix, ...]:
        return self.h + self.n_plus

    @cached_property
    def borel_minus(self) -> tuple[LoopMatrix, ...]:
        return self.h + self.n_minus

    def in_borel_plus(self, x: LoopMatrix) -> bool:
        return all(k == 0 and i <= j for i, j, k in x.entries) and x.is_traceless()

    def in_n_plus(self, x: LoopMatrix) -> bool:
        return all(k == 0 and i < j for i, j, k in x.entries)

    def in_cartan(self, x: LoopMatrix) -> bool:
        return all(k == 0 and i == j for i, j, k in x.entries) and x.is_traceless()


@lru_cache(maxsize=None)
def make_sln(n: int) -> SimpleLieData:
    return SimpleLieData(n)


@dataclass(frozen=True)
class TransversalSpace:
    """A complement ``V`` to ``[pbar_-1, n_+]`` inside ``b_+``."""

    basis: tuple[LoopMatrix, ...]
    degrees: tuple[int, ...]
    names: tuple[str, ...] = ()

    def coords(self, x: LoopMatrix) -> list[DiffPoly]:
        return _linalg.Frame(self.basis).coords(x)

    def combine(self, coeffs) -> LoopMatrix:
        return _linalg.Frame(self.basis).combine(coeffs)

    def is_transversal(self, lie: SimpleLieData) -> bool:
        image = [lie.pbar_minus1.bracket(x) for x in lie.n_plus]
        total = _linalg.span_rank(list(image) + list(self.basis))
        return (
            total == len(lie.borel_plus)
            and _linalg.span_rank(image) == len(lie.n_plus)
            and len(self.basis) == len(lie.borel_plus) - len(lie.n_plus)
        )


@lru_cache(maxsize=None)
def default_transversal(lie: SimpleLieData) -> TransversalSpace:
    """First-row transversal ``span{E_{1,j+1}}``, degree ``j`` for each exponent ``j``."""
    basis = tuple(lie.E(0, j) for j in lie.exponents)
    names = ("v",) if lie.n == 2 else tuple(f"v{j}" for j in lie.exponents)
    return TransversalSpace(basis, tuple(lie.exponents), names)


@dataclass(frozen=True, eq=False)
class HeisenbergSpec:
    """A Heisenberg subalgebra given by its graded basis.

    ``basis(d)`` lists the generators of filtration degree ``d``. When a
    ``conjugator`` ``C`` is present the filtration is transported from a
    diagonal grading, and ``base()`` returns the conjugated spec in which the
    filtration is diagonal.
    """

    lie: SimpleLieData
    kind: str
    id: str
    filtration: GradingSpec
    generator: Callable[[int], tuple[LoopMatrix, ...]] = field(repr=False)
    conjugator: LoopMatrix | None = None
    filtration_note: str = ""

    def basis(self, d: int) -> tuple[LoopMatrix, ...]:
        return _basis_cached(self, d)

    def basis_between(self, lo: int, hi: int) -> dict[int, tuple[LoopMatrix, ...]]:
        return {d: self.basis(d) for d in range(lo, hi + 1) if self.basis(d)}

    def in_positive_part(self, x: LoopMatrix) -> bool:
        """Membership in ``a_+ = a ∩ g[[z^-1]]`` for a basis combination."""
        return all(k <= 0 for _, _, k in x.entries)

    def in_plus_part(self, x: LoopMatrix) -> bool:
        """Membership in ``a^+``, the part of filtration degree ``>= 0``."""
        return all(d >= 0 for d in graded_split(x, self.filtration))

    def degree_of(self, x: LoopMatrix) -> int:
        parts = graded_split(x, self.filtration)
        if len(parts) != 1:
            raise ValueError("element is not homogeneous for this filtration")
        return next(iter(parts))

    @cached_property
    def base(self) -> "HeisenbergSpec":
        if self.conjugator is None:
            return self
        g = self.filtration
        outer = self

        def gen(d):
            return tuple(g.to_base(b) for b in outer.basis(d))

        return HeisenbergSpec(self.lie, self.kind + ":base", self.id + ":base", g.base, gen,
                              None, "conjugated frame")

    def __repr__(self):
        return f"HeisenbergSpec({self.id!r}, {self.lie.id})"


@lru_cache(maxsize=None)
def _basis_cached(spec: HeisenbergSpec, d: int) -> tuple[LoopMatrix, ...]:
    return tuple(b.with_grading(spec.filtration) for b in spec.generator(d))


@lru_cache(maxsize=None)
def principal_heisenberg(lie: SimpleLieData) -> HeisenbergSpec:
    n = lie.n

    def gen(d: int):
        if d % n == 0:
            return ()
        base = lie.p_plus1 if d > 0 else lie.p_minus1
        out = base
        for _ in range(abs(d) - 1):
            out = out @ base
        return (out,)

    return HeisenbergSpec(lie, "principal", "principal", lie.grading, gen,
                          filtration_note="principal grading, deg z = -n")


@lru_cache(maxsize=None)
def homogeneous_heisenberg(lie: SimpleLieData) -> HeisenbergSpec:
    g = GradingSpec.homogeneous(lie.n)

    def gen(d: int):
        return tuple(h.with_grading(g).shift(-d) for h in lie.h)

    return HeisenbergSpec(lie, "homogeneous", "homogeneous", g, gen,
                          filtration_note="homogeneous grading, deg z = -1")


def ptilde(i: int) -> LoopMatrix:
    """Generator ``[[0, z^(2-i)], [z^-i, 0]]`` of the non-smooth sl2 Heisenberg."""
    return LoopMatrix(2, {(0, 1, 2 - i): 1, (1, 0, -i): 1}, GradingSpec.principal(2))


NONSMOOTH_CONJUGATOR = LoopMatrix(
    2, {(0, 0, 0): Fraction(-1, 2), (0, 1, 1): -1, (1, 0, -1): Fraction(-1, 2), (1, 1, 0): 1},
    GradingSpec.homogeneous(2))


@lru_cache(maxsize=None)
def nonsmooth_sl2_heisenberg() -> HeisenbergSpec:
    lie = make_sln(2)
    g = GradingSpec.custom(NONSMOOTH_CONJUGATOR, GradingSpec.homogeneous(2), "nonsmooth-sl2")

    def gen(d: int):
        return (ptilde(d + 1).with_grading(g),)

    return HeisenbergSpec(lie, "nonsmooth_sl2", "nonsmooth-sl2", g, gen, NONSMOOTH_CONJUGATOR,
                          filtration_note="homogeneous filtration transported by the conjugator")


HEISENBERG_IDS = ("principal", "homogeneous", "nonsmooth-sl2")


def get_heisenberg(heis_id: str, lie: SimpleLieData) -> HeisenbergSpec:
    if heis_id == "principal":
        return principal_heisenberg(lie)
    if heis_id == "homogeneous":
        return homogeneous_heisenberg(lie)
    if heis_id == "nonsmooth-sl2":
        if lie.n != 2:
            raise ValueError("the non-smooth Heisenberg is only defined for sl2")
        return nonsmooth_sl2_heisenberg()
    raise KeyError(f"unknown Heisenberg id {heis_id!r}; choose from {', '.join(HEISENBERG_IDS)}")


def _symbol_at_one(p: LoopMatrix, spec: HeisenbergSpec) -> sp.Matrix:
    y = spec.filtration.to_base(p) if p.is_exact else p
    n = p.n
    m = sp.zeros(n, n)
    for (i, j, _k), v in y.entries.items():
        if not v.is_constant():
            raise ValueError("strong regularity is defined for constant elements")
        c = v.constant_term()
        m[i, j] += sp.Rational(c.numerator, c.denominator)
    return m


def centralizer_dimension(p: LoopMatrix, spec: HeisenbergSpec) -> int:
    """Dimension of the centralizer of the symbol of ``p`` inside ``sl_n``."""
    spec.degree_of(p)
    s = _symbol_at_one(p, spec)
    n = p.n
    cols = []
    for i in range(n):
        for j in range(n):
            x = sp.zeros(n, n)
            x[i, j] = 1
            cols.append(list(s * x - x * s))
    ad = sp.Matrix(cols).T
    # centralizer in gl_n minus the identity direction
    return n * n - ad.rank() - 1


def is_strongly_regular(p: LoopMatrix, spec: HeisenbergSpec) -> bool:
    """True when the symbol of ``p`` is regular semisimple.

    ``p`` must be homogeneous for the filtration of ``spec``; its symbol (in
    the conjugated frame if ``spec`` has a conjugator) is evaluated at
    ``z = 1`` and tested for a squarefree characteristic polynomial.
    """
    spec.degree_of(p)
    s = _symbol_at_one(p, spec)
    x = sp.Symbol("x")
    f = s.charpoly(x).as_expr()
    squarefree = sp.degree(sp.gcd(f, sp.diff(f, x)), x) == 0
    return bool(squarefree) and centralizer_dimension(p, spec) == spec.lie.rank


@lru_cache(maxsize=None)
def _split_solver(spec: HeisenbergSpec, p_base: LoopMatrix, d: int, l: int):
    base = spec.base
    g = base.filtration
    kernel = list(base.basis(d))
    source = list(g.piece_basis(d - l))
    image = [p_base.bracket(b) for b in source]
    solver = _linalg.SplitSolver(kernel + image, list(g.piece_basis(d)))
    return solver, kernel, source


def kernel_image_split(delta: LoopMatrix, p: LoopMatrix, spec: HeisenbergSpec, degree: int,
                       ) -> tuple[LoopMatrix, LoopMatrix]:
    """Decompose ``delta = a_part + [p, m_part]`` in the degree-``degree`` piece.

    ``a_part`` lies in the Heisenberg at that degree; ``m_part`` has degree
    ``degree - deg p`` and is the least-norm solution in the coordinates of
    the elementary piece basis.
    """
    g = spec.filtration
    p_base = g.to_base(p.exact() if p.prec is not None else p)
    l = spec.base.degree_of(p_base)
    d_base = delta if delta.prec is None else delta.exact()
    d_base = g.to_base(d_base)
    if d_base and not d_base.is_homogeneous(degree):
        raise ValueError(f"delta is not homogeneous of degree {degree}")
    solver, kernel, source = _split_solver(spec, p_base, degree, l)
    coeffs = solver.solve(d_base)
    if coeffs is None:
        raise SplitError(f"degree {degree} component is not in a + [p, .]; is p strongly regular?")
    a_part = LoopMatrix.zero(p.n, g.base or g)
    m_part = LoopMatrix.zero(p.n, g.base or g)
    for c, b in zip(coeffs[:len(kernel)], kernel):
        if c:
            a_part = a_part + b * c
    for c, b in zip(coeffs[len(kernel):], source):
        if c:
            m_part = m_part + b * c
    return g.from_base(a_part), g.from_base(m_part)


def kernel_coefficients(a_part: LoopMatrix, spec: HeisenbergSpec, degree: int) -> list[DiffPoly]:
    """Coordinates of an element of ``a`` at ``degree`` in the basis ``spec.basis(degree)``."""
    basis = spec.basis(degree)
    if not basis:
        if a_part:
            raise ValueError("nonzero element at a degree with no Heisenberg generators")
        return []
    g = spec.filtration
    frame = _linalg.Frame([g.to_base(b) for b in basis])
    return frame.coords(g.to_base(a_part))
