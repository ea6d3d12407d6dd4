"""Drinfeld-Sokolov gauge, canonical oper form and the Miura map.

Gauge action convention: for ``g = e^m``

    Ad(g)(d/dt + A) = d/dt + g A g^-1 - (d/dt g) g^-1
                    = d/dt + sum_k ad_m^k(A)/k! - sum_{k>=1} ad_m^(k-1)(m')/k!

Nothing here ever integrates: each step solves a finite linear system over Q,
so every output is a differential polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import sympy as sp

from . import _linalg
from .diffpoly import DiffPoly, DiffPolyRing
from .lie import (
    HeisenbergSpec,
    SimpleLieData,
    TransversalSpace,
    default_transversal,
    kernel_coefficients,
    kernel_image_split,
)
from .loop import GradingSpec, LoopMatrix, ad_exp_conjugate, graded_split

__all__ = [
    "Connection",
    "DSGaugeResult",
    "GaugeSlice",
    "canonical_oper_form",
    "ds_reduce",
    "gauge_connection",
    "infinitesimal_gauge_project",
    "miura_map",
    "miura_variables",
    "unipotent_exp",
    "unipotent_log",
]

KernelShift = Callable[[int, LoopMatrix], LoopMatrix | None]


@dataclass(frozen=True)
class Connection:
    """The operator ``d/dt + p + q`` with ``q`` of filtration degree above ``deg p``."""

    p: LoopMatrix
    q: LoopMatrix
    ring: DiffPolyRing

    @property
    def matrix(self) -> LoopMatrix:
        return self.p + self.q


def _dexp(m: LoopMatrix, max_degree: int | None) -> LoopMatrix:
    """``sum_{k>=1} ad_m^(k-1)(m')/k!`` (the logarithmic derivative of ``e^m``)."""
    dm = m.derive()
    if max_degree is not None:
        dm = dm.truncate(max_degree)
    term, total, k = dm, dm, 1
    while term:
        if max_degree is not None and term.mindeg_bound() + m.min_degree() > max_degree:
            break
        term = m.bracket(term) * Fraction(1, k + 1)
        if max_degree is not None:
            term = term.truncate(max_degree)
        total = total + term
        k += 1
    return total


def _exp_ad_exact(m: LoopMatrix, x: LoopMatrix, limit: int = 64) -> LoopMatrix:
    term, total = x, x
    for k in range(1, limit):
        term = m.bracket(term) * Fraction(1, k)
        if not term:
            return total
        total = total + term
    raise ArithmeticError("ad(m) is not nilpotent on the given element")


def gauge_connection(m: LoopMatrix, a: LoopMatrix, max_degree: int | None = None) -> LoopMatrix:
    """Matrix part of ``Ad(e^m)(d/dt + a)``.

    With ``max_degree`` the result is truncated there and ``m`` must have
    positive degree; without it ``ad m`` must be nilpotent on ``a``.
    """
    if not m:
        return a if max_degree is None else a.truncate(max_degree)
    if max_degree is None:
        return _gauge_exact(m, a)
    return ad_exp_conjugate(m, a, max_degree) - _dexp(m, max_degree)


def _dexp_exact(m: LoopMatrix, limit: int = 64) -> LoopMatrix:
    term = m.derive()
    total = term
    for k in range(1, limit):
        term = m.bracket(term) * Fraction(1, k + 1)
        if not term:
            return total
        total = total + term
    raise ArithmeticError("ad(m) is not nilpotent")


def _gauge_exact(m: LoopMatrix, a: LoopMatrix) -> LoopMatrix:
    return _exp_ad_exact(m, a) - _dexp_exact(m)


@dataclass(frozen=True)
class DSGaugeResult:
    """Output of :func:`ds_reduce`.

    The gauge is the ordered product ``E = e^{m_K} ... e^{m_1}`` with
    ``m_k`` of degree ``k``; ``Ad(E)`` carries ``d/dt + p + q`` to
    ``d/dt + p + abelian_part`` through ``truncation_degree``. ``M = E^-1`` so
    ``dress(x) = Ad(M) x``. Exponents live in the base frame of the Heisenberg data.
    """

    spec: HeisenbergSpec
    p: LoopMatrix
    q: LoopMatrix
    level: int
    truncation_degree: int
    exponent_components: Mapping[int, LoopMatrix]
    abelian_coeffs: Mapping[tuple[int, int], DiffPoly]
    abelian_part: LoopMatrix = field(repr=False)

    @property
    def depth(self) -> int:
        return self.truncation_degree - self.level

    def _frame(self) -> GradingSpec:
        return self.spec.filtration

    def dress(self, x: LoopMatrix) -> LoopMatrix:
        """``Ad(M) x`` for exact homogeneous ``x``; known through ``deg x + depth``."""
        g = self._frame()
        y = g.to_base(x)
        d = self.spec.base.degree_of(y)
        top = d + self.depth
        out = y.truncate(top)
        for k in sorted(self.exponent_components, reverse=True):
            m = self.exponent_components[k]
            if m:
                out = ad_exp_conjugate(-m, out, top)
        return g.from_base(out)

    def resubstitute(self) -> LoopMatrix:
        """Undo the gauge on ``p + abelian_part``; equals ``p + q`` through truncation."""
        g = self._frame()
        out = g.to_base(self.p) + self.abelian_part.truncate(self.truncation_degree)
        for k in sorted(self.exponent_components, reverse=True):
            m = self.exponent_components[k]
            if m:
                out = gauge_connection(-m, out, self.truncation_degree)
        return out

    def check(self) -> bool:
        g = self._frame()
        target = (g.to_base(self.p) + g.to_base(self.q)).truncate(self.truncation_degree)
        return self.resubstitute() == target


def ds_reduce(conn: Connection, spec: HeisenbergSpec, truncation_degree: int,
              kernel_shift: KernelShift | None = None) -> DSGaugeResult:
    """Abelianize ``d/dt + p + q`` degree by degree.

    At degree ``d`` the current component is split as ``a + [p, m]`` with
    ``a`` in the Heisenberg; ``e^m`` (``m`` of degree ``d - deg p``) removes the
    image part. ``kernel_shift(k, m)`` may return an element of the kernel of
    ``ad p`` to add to ``m``; any such choice yields the same dressing.
    """
    if truncation_degree < 1:
        raise ValueError("truncation_degree must be >= 1")
    g = spec.filtration
    base = spec.base
    p = g.to_base(conn.p)
    q = g.to_base(conn.q)
    level = base.degree_of(p)
    if level >= 0:
        raise ValueError("the leading term must have negative degree")
    if q and min(graded_split(q)) <= level:
        raise ValueError("q must have filtration degree above deg p")
    cur = q.truncate(truncation_degree)
    exps: dict[int, LoopMatrix] = {}
    coeffs: dict[tuple[int, int], DiffPoly] = {}
    abelian = LoopMatrix.zero(p.n, base.filtration)
    for d in range(level + 1, truncation_degree + 1):
        comp = graded_split(cur).get(d, LoopMatrix.zero(p.n, base.filtration))
        a, m = kernel_image_split(comp, p, base, d)
        k = d - level
        if kernel_shift is not None:
            shift = kernel_shift(k, m)
            if shift:
                if p.bracket(shift):
                    raise ValueError("kernel_shift must return an element commuting with p")
                m = m + shift
        if m:
            cur = gauge_connection(m, p + cur, truncation_degree) - p
        exps[k] = m
        abelian = abelian + a
        for idx, c in enumerate(kernel_coefficients(a, base, d)):
            if c:
                coeffs[(d, idx)] = c
    return DSGaugeResult(spec, conn.p, conn.q, level, truncation_degree, exps, coeffs, abelian)


# -- canonical oper form ---------------------------------------------------

def unipotent_exp(x: LoopMatrix) -> LoopMatrix:
    """``exp(x)`` for nilpotent ``x`` (finite sum)."""
    out = LoopMatrix.identity(x.n, x.grading)
    term = LoopMatrix.identity(x.n, x.grading)
    for k in range(1, x.n + 1):
        term = (term @ x) * Fraction(1, k)
        if not term:
            break
        out = out + term
    return out


def unipotent_log(g: LoopMatrix) -> LoopMatrix:
    """``log(g)`` for unipotent ``g`` (finite sum)."""
    y = g - LoopMatrix.identity(g.n, g.grading)
    out = LoopMatrix.zero(g.n, g.grading)
    term = LoopMatrix.identity(g.n, g.grading)
    for k in range(1, g.n + 1):
        term = term @ y
        if not term:
            break
        out = out + term * Fraction((-1) ** (k + 1), k)
    return out


def _oper_solver(lie: SimpleLieData, V: TransversalSpace, j: int):
    src = [x for x in lie.n_plus if lie.grading.degree(*next(iter(x.entries))) == j + 1]
    vb = [b for b, d in zip(V.basis, V.degrees) if d == j]
    cols = [lie.pbar_minus1.bracket(x) for x in src] + vb
    ambient = [b for b in lie.borel_plus if b.is_homogeneous(j)]
    return _linalg.SplitSolver(cols, ambient), src


def canonical_oper_form(b: LoopMatrix, lie: SimpleLieData, V: TransversalSpace | None = None,
                        ) -> tuple[list[DiffPoly], LoopMatrix]:
    """Gauge ``d/dt + pbar_-1 + b`` (``b`` in ``b_+``) into ``d/dt + pbar_-1 + v``, ``v`` in V.

    Returns the coordinates of ``v`` in the basis of ``V`` and ``log N`` for
    the unipotent gauge ``N`` with ``Ad(N)(d/dt + pbar_-1 + b) = d/dt + pbar_-1 + v``.
    """
    V = V or default_transversal(lie)
    if not lie.in_borel_plus(b):
        raise ValueError("b must take values in b_+")
    pbar = lie.pbar_minus1
    cur = b.with_grading(lie.grading)
    group = LoopMatrix.identity(lie.n, lie.grading)
    for j in range(0, lie.n - 1):
        comp = graded_split(cur).get(j)
        if comp is None:
            continue
        solver, src = _oper_solver(lie, V, j)
        coeffs = solver.solve(comp)
        if coeffs is None:
            raise ValueError(f"degree {j} part of b is not in [pbar, n_+] + V")
        x = LoopMatrix.zero(lie.n, lie.grading)
        for c, s in zip(coeffs[:len(src)], src):
            if c:
                x = x + s * c
        if x:
            cur = _gauge_exact(x, pbar + cur) - pbar
            group = unipotent_exp(x) @ group
    v = V.coords(cur)
    return v, unipotent_log(group)


def miura_variables(lie: SimpleLieData) -> DiffPolyRing:
    names = ("u",) if lie.n == 2 else tuple(f"u{i}" for i in range(1, lie.n))
    return DiffPolyRing(names, (1,) * len(names))


def oper_variables(lie: SimpleLieData, V: TransversalSpace | None = None) -> DiffPolyRing:
    V = V or default_transversal(lie)
    return DiffPolyRing(V.names, tuple(d + 1 for d in V.degrees))


def miura_cartan(lie: SimpleLieData, ring: DiffPolyRing | None = None) -> LoopMatrix:
    """``h = sum_i u_i w_i`` with ``w_i`` the fundamental coweights, so ``alpha_i(h) = u_i``."""
    ring = ring or miura_variables(lie)
    out = LoopMatrix.zero(lie.n, lie.grading)
    for name, w in zip(ring.variables, lie.coweights):
        out = out + w * DiffPoly.jet(name)
    return out


def miura_map(lie: SimpleLieData, V: TransversalSpace | None = None) -> dict[str, DiffPoly]:
    """Oper coordinates of the Miura oper ``d/dt + pbar_-1 + h``, as polynomials in ``u``."""
    V = V or default_transversal(lie)
    v, _ = canonical_oper_form(miura_cartan(lie), lie, V)
    return dict(zip(V.names, v))


# -- transversal projection -------------------------------------------------

class GaugeSlice:
    """Decomposition ``b = ad p(r) + V + frozen`` of a finite space of connections.

    ``project(delta, a)`` finds ``n`` in span(r) such that
    ``delta - (n' + [a, n])`` lies in ``V + frozen`` and returns its
    coordinates. ``frozen`` directions (if any) are reported separately so the
    caller can certify they vanish.
    """

    def __init__(self, p: LoopMatrix, r_basis: Sequence[LoopMatrix], v_basis: Sequence[LoopMatrix],
                 frozen: Sequence[LoopMatrix] = ()):
        self.p = p
        self.r_basis = tuple(r_basis)
        self.v_basis = tuple(v_basis)
        self.frozen = tuple(frozen)
        cols = [p.bracket(r) for r in self.r_basis] + list(self.v_basis) + list(self.frozen)
        self.frame = _linalg.Frame(cols)

    def project(self, delta: LoopMatrix, a: LoopMatrix, max_iter: int | None = None,
                ) -> tuple[list[DiffPoly], LoopMatrix, list[DiffPoly]]:
        nr, nv = len(self.r_basis), len(self.v_basis)
        corr = LoopMatrix.zero(delta.n, delta.grading)
        limit = max_iter or (nr + 2)
        for _ in range(limit + 1):
            res = delta - (corr.derive() + a.bracket(corr))
            c = self.frame.coords(res)
            step = c[:nr]
            if not any(step):
                return c[nr:nr + nv], corr, c[nr + nv:]
            for coef, r in zip(step, self.r_basis):
                if coef:
                    corr = corr + r * coef
        raise ArithmeticError("gauge projection did not terminate")


class ConstantGaugeSlice:
    """Like :class:`GaugeSlice`, but the gauge may also use constant ``sl_n``.

    Needed when the Heisenberg has elements of non-negative degree outside
    ``g[[z^-1]]``: the dressed generators then only determine the flow up to
    a z-independent gauge transformation. The correction ``n`` is found by
    solving the linear system over the field of fractions of the jet ring
    (with sympy) one z-power block at a time; the flow is accepted only when
    every coordinate comes out polynomial.
    """

    def __init__(self, p: LoopMatrix, r_basis: Sequence[LoopMatrix], v_basis: Sequence[LoopMatrix],
                 frozen: Sequence[LoopMatrix] = ()):
        self.p = p
        self.r_basis = tuple(r_basis)
        self.v_basis = tuple(v_basis)
        self.frozen = tuple(frozen)
        n, g = p.n, p.grading
        consts = [LoopMatrix.elementary(n, i, j, 0, grading=g) for i in range(n) for j in range(n) if i != j]
        consts += [LoopMatrix(n, {(i, i, 0): 1, (i + 1, i + 1, 0): -1}, g) for i in range(n - 1)]
        self.gauge_basis = self.r_basis + tuple(_linalg.complement_basis(consts, list(self.r_basis)))

    def project(self, delta: LoopMatrix, a: LoopMatrix) -> tuple[list[DiffPoly], LoopMatrix, list[DiffPoly]]:
        conv = _SympyJets()
        xs = sp.symbols(f"x0:{len(self.gauge_basis)}")
        dxs = sp.symbols(f"dx0:{len(self.gauge_basis)}")
        targets = self.v_basis + self.frozen
        cs = sp.symbols(f"c0:{len(targets)}")
        expr: dict[tuple[int, int, int], sp.Expr] = {}

        def add(m: LoopMatrix, coeff):
            for key, v in m.entries.items():
                expr[key] = expr.get(key, 0) + coeff * conv.to_sympy(v)

        add(delta.exact(), 1)
        for x, dx, b in zip(xs, dxs, self.gauge_basis):
            add(b, -dx)
            add(a.bracket(b), -x)
        for c, b in zip(cs, targets):
            add(b, -c)
        eqs = [sp.expand(e) for e in expr.values()]
        known: dict = {}
        pending = set(xs) | set(cs)
        while pending:
            subs = dict(known)
            for x, dx in zip(xs, dxs):
                if x in known:
                    subs[dx] = conv.derive(known[x])
            unknown_d = {dx for x, dx in zip(xs, dxs) if x not in known}
            cur = [e for e in (sp.expand(e.subs(subs)) for e in eqs) if e != 0]
            usable = [e for e in cur if not (e.free_symbols & unknown_d)]
            found = self._solve(usable, pending)
            if not found:
                # leftover gauge freedom (a symmetry of the slice): fix it to zero
                free_x = [x for x in xs if x in pending]
                if not free_x:
                    raise ArithmeticError("transversal coordinates are not determined")
                found = {free_x[0]: sp.Integer(0)}
            known.update(found)
            pending -= set(found)
        vals = [conv.from_sympy(known[c]) for c in cs]
        corr = LoopMatrix.zero(delta.n, delta.grading)
        for x, b in zip(xs, self.gauge_basis):
            v = conv.from_sympy(known[x])
            if v:
                corr = corr + b * v
        res = delta.exact() - (corr.derive() + a.bracket(corr))
        for c, b in zip(vals, targets):
            if c:
                res = res - b * c
        if res:
            raise ArithmeticError("constant-gauge projection left a residual")
        nv = len(self.v_basis)
        return vals[:nv], corr, vals[nv:]

    @staticmethod
    def _solve(eqs, pending) -> dict:
        if not eqs:
            return {}
        unknowns = sorted(pending, key=str)
        sol = sp.linsolve(eqs, unknowns)
        if not sol:
            raise ArithmeticError("inconsistent constant-gauge system")
        (vals,) = sol
        return {u: sp.cancel(v) for u, v in zip(unknowns, vals) if not (v.free_symbols & pending)}


class _SympyJets:
    """Round trip between :class:`DiffPoly` and sympy expressions in jet symbols."""

    def __init__(self):
        self._sym: dict[tuple[str, int], sp.Symbol] = {}
        self._jet: dict[sp.Symbol, tuple[str, int]] = {}

    def symbol(self, name: str, order: int) -> sp.Symbol:
        key = (name, order)
        if key not in self._sym:
            s = sp.Symbol(f"{name}__{order}")
            self._sym[key] = s
            self._jet[s] = key
        return self._sym[key]

    def to_sympy(self, p: DiffPoly) -> sp.Expr:
        out = sp.Integer(0)
        for mono, c in p.terms.items():
            t = sp.Rational(int(c.numerator), int(c.denominator))
            for (name, order), power in mono:
                t *= self.symbol(name, order) ** power
            out += t
        return out

    def derive(self, e: sp.Expr) -> sp.Expr:
        out = sp.Integer(0)
        for s in e.free_symbols:
            name, order = self._jet[s]
            out += sp.diff(e, s) * self.symbol(name, order + 1)
        return sp.expand(out)

    def from_sympy(self, e: sp.Expr) -> DiffPoly:
        e = sp.cancel(e)
        num, den = sp.fraction(e)
        if den.free_symbols:
            raise ArithmeticError(f"gauge projection is not polynomial: {e}")
        e = sp.expand(num / den)
        out = DiffPoly()
        if e == 0:
            return out
        gens = sorted(e.free_symbols, key=str)
        if not gens:
            return DiffPoly.const(Fraction(int(sp.Rational(e).p), int(sp.Rational(e).q)))
        for monom, coeff in sp.Poly(e, *gens).terms():
            term = DiffPoly.const(Fraction(int(coeff.p), int(coeff.q)))
            for g, k in zip(gens, monom):
                if k:
                    term = term * DiffPoly.jet(*self._jet[g], power=k)
            out = out + term
        return out


def kdv_slice(lie: SimpleLieData, V: TransversalSpace | None = None) -> GaugeSlice:
    V = V or default_transversal(lie)
    return _kdv_slice(lie, V)


_SLICES: dict = {}


def _kdv_slice(lie, V):
    key = (lie, V)
    if key not in _SLICES:
        _SLICES[key] = GaugeSlice(lie.pbar_minus1, lie.n_plus, V.basis)
    return _SLICES[key]


def infinitesimal_gauge_project(delta_b: LoopMatrix, b: LoopMatrix, lie: SimpleLieData,
                                V: TransversalSpace | None = None) -> tuple[LoopMatrix, LoopMatrix]:
    """Move a tangent vector ``delta_b`` at ``d/dt + pbar_-1 + b`` into ``V``.

    Returns ``(delta_v, n)`` with ``n`` in ``n_+`` and
    ``delta_v = delta_b - (n' + [pbar_-1 + b, n])`` in ``V``; this is the
    tangent vector modulo the infinitesimal gauge action of ``n``.
    """
    V = V or default_transversal(lie)
    if not lie.in_borel_plus(delta_b):
        raise ValueError("delta_b must take values in b_+")
    sl = kdv_slice(lie, V)
    vc, corr, _ = sl.project(delta_b, lie.pbar_minus1 + b)
    return V.combine(vc), corr
