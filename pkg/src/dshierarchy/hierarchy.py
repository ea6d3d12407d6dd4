"""KdV, mKdV and generalized Drinfeld-Sokolov flows.

Every flow is read off a zero-curvature identity. With ``A`` the matrix of
the connection ``d/dt + A`` and ``L`` the projected dressed Lax matrix, this
module uses

    d/dt_m A = sigma_m (L' + [A, L]),    sigma_1 = +1,  sigma_m = -1 (m >= 2)

(``L'`` is ``d/dt L``). The signs are chosen so that ``t_1 = t`` and the
classical normalizations ``v_t3 = 3/2 v v' - 1/4 v'''`` and
``u_t3 = 3/8 u^2 u' - 1/4 u'''`` both hold; :data:`SIGN_CONVENTION` names this
choice in serialized output. Each emitted flow carries the operator ``L_eff``
for which ``[d/dt_m + L_eff, d/dt + A] = 0`` holds exactly, and that
residual is recomputed by prolongation as a certificate.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import sympy as sp

from . import _linalg
from .diffpoly import DiffPoly, DiffPolyRing
from .gauge import (
    ConstantGaugeSlice,
    Connection,
    GaugeSlice,
    ds_reduce,
    kdv_slice,
    miura_cartan,
    miura_map,
    miura_variables,
    oper_variables,
)
from .lie import (
    HeisenbergSpec,
    SimpleLieData,
    TransversalSpace,
    default_transversal,
    is_strongly_regular,
    principal_heisenberg,
)
from .loop import GradingSpec, LoopMatrix, SplittingKind, WindowError, graded_split, project_splitting

__all__ = [
    "CertificateError",
    "FlowEquation",
    "GeneralizedSetup",
    "SIGN_CONVENTION",
    "check_flow_index",
    "check_homogeneity",
    "flow_commutator",
    "flow_indices",
    "generate_flow_generalized",
    "generate_flow_kdv",
    "generate_flow_mkdv",
    "miura_intertwining_residual",
    "oper_to_scalar_operator",
    "zero_curvature_residual",
]

SIGN_CONVENTION = "zc-sigma:v1"
DEFAULT_BUFFER = 0
MAX_RETRIES = 3


class CertificateError(ArithmeticError):
    """An exact identity that must vanish did not."""


def sign_for(m: int) -> int:
    return 1 if m == 1 else -1


def truncation_buffer() -> int:
    raw = os.environ.get("DS_TRUNC_BUFFER")
    if raw is None or raw == "":
        return DEFAULT_BUFFER
    try:
        val = int(raw)
    except ValueError:
        raise ValueError(f"DS_TRUNC_BUFFER must be an integer, got {raw!r}") from None
    if val < 0:
        raise ValueError("DS_TRUNC_BUFFER must be non-negative")
    return val


def flow_indices(lie: SimpleLieData, upto: int) -> list[int]:
    """Positive integers ``<= upto`` congruent to an exponent mod the Coxeter number."""
    h = lie.coxeter_number
    exps = {e % h for e in lie.exponents}
    return [m for m in range(1, upto + 1) if m % h in exps]


def check_flow_index(lie: SimpleLieData, m: int) -> None:
    if not isinstance(m, int) or m < 1 or m % lie.coxeter_number not in {e % lie.coxeter_number for e in lie.exponents}:
        raise ValueError(f"m={m} is not a flow index for {lie.id} "
                         f"(need m >= 1 and m mod {lie.coxeter_number} an exponent)")


@dataclass(frozen=True)
class FlowEquation:
    """One flow ``d/dt_m x = rhs[x]`` together with its Lax data."""

    hierarchy_kind: str
    algebra_id: str
    heisenberg_id: str
    m: int
    ring: DiffPolyRing
    rhs: Mapping[str, DiffPoly]
    connection: LoopMatrix | None = field(default=None, repr=False)
    lax_dressed: LoopMatrix | None = field(default=None, repr=False)
    lax_projected: LoopMatrix | None = field(default=None, repr=False)
    lax_effective: LoopMatrix | None = field(default=None, repr=False)
    sign: int = 1
    method: str = ""
    truncation_degree: int | None = None

    @property
    def weight(self) -> int:
        return self.m

    def rhs_weight(self, var: str) -> int:
        return self.m + self.ring.weight_of(var)

    def to_text(self) -> str:
        return "\n".join(f"d/dt{self.m} {x} = {self.ring.render(self.rhs[x])}" for x in self.ring.variables)


def required_truncation(grading: GradingSpec, kind: SplittingKind, m: int, level: int) -> int:
    """Smallest DS depth at which the projection of the dressed ``p_-m`` is determined.

    The dressing of a degree ``-m`` element is known through degree
    ``-m + truncation - level``; the projection needs everything up to
    ``grading.z0_bound(kind)``.
    """
    return max(1, grading.z0_bound(kind) + m + level)


def _retrying(build, required: int, truncation_degree: int | None, buf: int | None = None):
    if truncation_degree is not None:
        return build(truncation_degree)
    buf = truncation_buffer() if buf is None else buf
    last = None
    for attempt in range(MAX_RETRIES + 1):
        trunc = required + buf + 2 * attempt
        try:
            return build(trunc)
        except (WindowError, CertificateError) as exc:
            last = exc
    raise CertificateError(f"flow not certified after {MAX_RETRIES} retries: {last}")


def zero_curvature_residual(flow: FlowEquation) -> LoopMatrix:
    """``d/dt_m A - L_eff' - [A, L_eff]`` with ``d/dt_m`` acting by prolongation."""
    if flow.connection is None or flow.lax_effective is None:
        raise ValueError("flow carries no Lax data")
    a, lx = flow.connection, flow.lax_effective
    return a.prolong(flow.rhs) - lx.derive() - a.bracket(lx)


def check_homogeneity(flow: FlowEquation) -> dict[str, set[int]]:
    """Map each variable whose rhs has a wrong weight to the offending weights."""
    bad = {}
    for x, p in flow.rhs.items():
        ws = p.weights(flow.ring)
        if ws - {flow.rhs_weight(x)}:
            bad[x] = ws
    return bad


def _certify(flow: FlowEquation, weights: bool = True) -> FlowEquation:
    res = zero_curvature_residual(flow)
    if res:
        raise CertificateError(f"zero-curvature residual is nonzero: {res.to_text(flow.ring)}")
    bad = check_homogeneity(flow) if weights else None
    if bad:
        raise CertificateError(f"inhomogeneous right-hand side: {bad}")
    return flow


# -- mKdV -----------------------------------------------------------------

def generate_flow_mkdv(lie: SimpleLieData, m: int, truncation_degree: int | None = None,
                       kernel_shift=None) -> FlowEquation:
    """``m``-th flow of the modified hierarchy on the Miura oper ``d/dt + p_-1 + h``."""
    check_flow_index(lie, m)
    if truncation_degree is None and kernel_shift is None:
        return _mkdv_cached(lie, m, truncation_buffer())
    return _retrying(lambda t: _mkdv(lie, m, t, kernel_shift), _mkdv_required(lie, m), truncation_degree)


def _mkdv_required(lie, m):
    return required_truncation(lie.grading, SplittingKind.IWAHORI_MINUS, m, -1)


def _kdv_required(lie, m):
    return required_truncation(lie.grading, SplittingKind.MINUS, m, -1)


# keyed on the buffer too, so changing DS_TRUNC_BUFFER is never masked by the cache
@lru_cache(maxsize=None)
def _mkdv_cached(lie, m, buf):
    return _retrying(lambda t: _mkdv(lie, m, t, None), _mkdv_required(lie, m), None, buf)


def _mkdv(lie: SimpleLieData, m: int, trunc: int, kernel_shift) -> FlowEquation:
    spec = principal_heisenberg(lie)
    ring = miura_variables(lie)
    h = miura_cartan(lie, ring)
    a = lie.p_minus1 + h
    res = ds_reduce(Connection(lie.p_minus1, h, ring), spec, trunc, kernel_shift)
    t = res.dress(spec.basis(-m)[0])
    lproj = project_splitting(t, SplittingKind.IWAHORI_MINUS)
    sigma = sign_for(m)
    delta = (lproj.derive() + a.bracket(lproj)) * sigma
    if not lie.in_cartan(delta):
        raise CertificateError("mKdV variation is not Cartan-valued")
    rhs = {}
    for i, name in enumerate(ring.variables):
        rhs[name] = delta.coeff(i, i, 0) - delta.coeff(i + 1, i + 1, 0)
    flow = FlowEquation("mkdv", lie.id, "principal", m, ring, rhs, a, t, lproj, lproj * sigma,
                        sigma, "dressing", trunc)
    return _certify(flow)


# -- KdV ------------------------------------------------------------------

def kdv_connection(lie: SimpleLieData, V: TransversalSpace | None = None) -> tuple[LoopMatrix, LoopMatrix, DiffPolyRing]:
    V = V or default_transversal(lie)
    ring = oper_variables(lie, V)
    b = V.combine([DiffPoly.jet(x) for x in ring.variables])
    return lie.p_minus1 + b, b, ring


def generate_flow_kdv(lie: SimpleLieData, m: int, method: str = "gauge_projection",
                      truncation_degree: int | None = None, kernel_shift=None) -> FlowEquation:
    """``m``-th flow of the KdV-type hierarchy on canonical opers.

    ``gauge_projection`` dresses the oper directly and projects the
    variation back to ``V``; ``miura_pushforward`` pushes the modified flow
    through the Miura map. Both give the same right-hand side.
    """
    check_flow_index(lie, m)
    if method == "gauge_projection":
        if truncation_degree is None and kernel_shift is None:
            return _kdv_cached(lie, m, truncation_buffer())
        return _retrying(lambda t: _kdv_gauge(lie, m, t, kernel_shift), _kdv_required(lie, m),
                         truncation_degree)
    if method == "miura_pushforward":
        return _kdv_pushforward(lie, m, generate_flow_mkdv(lie, m, truncation_degree))
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=None)
def _kdv_cached(lie, m, buf):
    return _retrying(lambda t: _kdv_gauge(lie, m, t, None), _kdv_required(lie, m), None, buf)


def _kdv_gauge(lie: SimpleLieData, m: int, trunc: int, kernel_shift) -> FlowEquation:
    spec = principal_heisenberg(lie)
    V = default_transversal(lie)
    a, b, ring = kdv_connection(lie, V)
    res = ds_reduce(Connection(lie.p_minus1, b, ring), spec, trunc, kernel_shift)
    t = res.dress(spec.basis(-m)[0])
    lproj = project_splitting(t, SplittingKind.MINUS)
    sigma = sign_for(m)
    delta = (lproj.derive() + a.bracket(lproj)) * sigma
    if not lie.in_borel_plus(delta):
        raise CertificateError("KdV variation is not b_+-valued")
    vc, corr, _ = kdv_slice(lie, V).project(delta, a)
    rhs = dict(zip(ring.variables, vc))
    flow = FlowEquation("kdv", lie.id, "principal", m, ring, rhs, a, t, lproj, lproj * sigma - corr,
                        sigma, "gauge_projection", trunc)
    return _certify(flow)


def _pullback_solve(targets: Mapping[str, DiffPoly], mu: Mapping[str, DiffPoly], ring: DiffPolyRing,
                    weights: Mapping[str, int]) -> dict[str, DiffPoly]:
    """Find ``F_x`` in the ``ring`` variables with ``F_x(mu) = targets[x]``."""
    out = {}
    for x, target in targets.items():
        monos = ring.monomials_of_weight(weights[x])
        cache: dict = {}
        images = [DiffPoly({mono: 1}).subs(mu, cache) for mono in monos]
        keys = sorted({k for im in images for k in im.terms} | set(target.terms))
        index = {k: i for i, k in enumerate(keys)}
        mat = sp.zeros(len(keys), len(monos))
        for j, im in enumerate(images):
            for k, c in im.terms.items():
                mat[index[k], j] = sp.Rational(c.numerator, c.denominator)
        rhs = sp.zeros(len(keys), 1)
        for k, c in target.terms.items():
            rhs[index[k], 0] = sp.Rational(c.numerator, c.denominator)
        try:
            sol, params = mat.gauss_jordan_solve(rhs)
        except ValueError:
            raise CertificateError(f"pushforward of {x} is not a polynomial in the oper variables") from None
        if params.shape[0]:
            raise CertificateError("Miura pullback is not injective on this weight space")
        poly = DiffPoly({mono: Fraction(int(sp.Rational(c).p), int(sp.Rational(c).q))
                         for mono, c in zip(monos, sol) if c != 0})
        if poly.subs(mu) != target:
            raise CertificateError("pushforward solve failed verification")
        out[x] = poly
    return out


def _kdv_pushforward(lie: SimpleLieData, m: int, mk: FlowEquation) -> FlowEquation:
    mu = miura_map(lie)
    ring = oper_variables(lie)
    cache: dict = {}
    targets = {x: mu[x].prolong(mk.rhs, cache) for x in ring.variables}
    weights = {x: m + ring.weight_of(x) for x in ring.variables}
    rhs = _pullback_solve(targets, mu, ring, weights)
    flow = FlowEquation("kdv", lie.id, "principal", m, ring, rhs, sign=mk.sign,
                        method="miura_pushforward", truncation_degree=mk.truncation_degree)
    if check_homogeneity(flow):
        raise CertificateError("pushforward flow is inhomogeneous")
    return flow


def miura_intertwining_residual(lie: SimpleLieData, m: int) -> dict[str, DiffPoly]:
    """``D_m^mKdV(mu_x) - (D_m^KdV x)(mu)`` for each oper variable ``x``."""
    mk = generate_flow_mkdv(lie, m)
    kd = generate_flow_kdv(lie, m, "gauge_projection")
    mu = miura_map(lie)
    cache: dict = {}
    sub_cache: dict = {}
    return {x: mu[x].prolong(mk.rhs, cache) - kd.rhs[x].subs(mu, sub_cache) for x in kd.ring.variables}


# -- commutators and scalar operators ---------------------------------------

def flow_commutator(f: FlowEquation, g: FlowEquation) -> dict[str, DiffPoly]:
    """``[D_f, D_g] x = D_f(g_x) - D_g(f_x)`` for every variable ``x``."""
    if f.ring.variables != g.ring.variables:
        raise ValueError("flows live on different rings")
    cf, cg = {}, {}
    return {x: g.rhs[x].prolong(f.rhs, cf) - f.rhs[x].prolong(g.rhs, cg) for x in f.ring.variables}


def oper_to_scalar_operator(v: Sequence[DiffPoly], lie: SimpleLieData) -> list[DiffPoly]:
    """Coefficients ``q_1..q_n`` of ``d^n - q_1 d^(n-1) - ... - q_n``.

    The oper ``d/dt + pbar_-1 + sum_j v_j E_{1,j+1}`` is conjugated by
    ``diag(1, -1, 1, ...)`` into companion form ``d/dt - C`` with first row
    ``(q_1, .., q_n)`` and ones below the diagonal, giving
    ``q_1 = 0`` and ``q_{j+1} = (-1)^(j+1) v_j``.
    """
    if len(v) != lie.rank:
        raise ValueError(f"expected {lie.rank} first-row coordinates")
    q = [DiffPoly()]
    for j, vj in enumerate(v, start=1):
        q.append(DiffPoly.coerce(vj) * (-1) ** (j + 1))
    return q


# -- generalized hierarchies -------------------------------------------------

def _polynomial_part(vectors: Sequence[LoopMatrix], min_power: int = 0) -> list[LoopMatrix]:
    """Basis of the combinations of ``vectors`` with no z-power below ``min_power``."""
    if not vectors:
        return []
    positions = _linalg.positions_of(vectors)
    bad = [i for i, p in enumerate(positions) if p[2] < min_power]
    cols = [_linalg.rational_vector(v, positions) for v in vectors]
    rows = [[cols[j][i] for j in range(len(vectors))] for i in bad]
    null = _linalg.nullspace(rows, len(vectors))
    out = []
    for coeffs in null:
        x = LoopMatrix.zero(vectors[0].n, vectors[0].grading)
        for c, v in zip(coeffs, vectors):
            if c:
                x = x + v * c
        out.append(x)
    return out


def _max_z_power(g: GradingSpec, lower: int) -> int:
    """Largest z-power of an element of ``g[z]`` with every component above ``lower``."""
    base = g if g.is_diagonal else g.base
    n = base.n
    k = 0
    while any(base.degree(i, j, k + 1) > lower for i in range(n) for j in range(n)):
        k += 1
    if not g.is_diagonal:
        k += g.conjugator.z_range()[1] + g.inverse_conjugator().z_range()[1]
    return k


def filtered_polynomials(g: GradingSpec, lower: int) -> list[LoopMatrix]:
    """Basis of ``sl_n[z]`` intersected with the part of filtration degree ``> lower``.

    For a conjugated grading the intersection is not spanned by homogeneous
    elements, so it is computed as the kernel of the map sending ``x`` to its
    components of degree ``<= lower``.
    """
    n = g.n
    ambient = []
    for k in range(_max_z_power(g, lower) + 1):
        for i in range(n):
            for j in range(n):
                if i != j:
                    ambient.append(LoopMatrix.elementary(n, i, j, k, grading=g))
        for i in range(n - 1):
            ambient.append(LoopMatrix(n, {(i, i, k): 1, (i + 1, i + 1, k): -1}, g))
    low = []
    for x in ambient:
        parts = graded_split(g.to_base(x))
        y = sum((v for d, v in parts.items() if d <= lower), LoopMatrix.zero(n, g.base or g))
        low.append(y)
    positions = _linalg.positions_of(low)
    cols = [_linalg.rational_vector(y, positions) for y in low]
    rows = [[cols[j][i] for j in range(len(ambient))] for i in range(len(positions))]
    out = []
    for coeffs in _linalg.nullspace(rows, len(ambient)):
        x = LoopMatrix.zero(n, g)
        for c, v in zip(coeffs, ambient):
            if c:
                x = x + v * c
        out.append(x)
    return sorted(out, key=lambda x: (min(x.degrees()), sorted(x.entries)))


class GeneralizedSetup:
    """Spaces for the generalized hierarchy attached to ``(spec, p)``.

    ``b_gen`` is the part of ``sl_n[z]`` of filtration degree above ``deg p``,
    ``r`` the part of degree above 0, ``frozen`` the Heisenberg directions in
    ``b_gen``; ``V`` is a complement of ``[p, r] + frozen`` in ``b_gen``.
    For conjugated filtrations these spaces need not be graded, and ``V``
    elements are then only filtered; ``homogeneous`` records which case holds.
    """

    def __init__(self, spec: HeisenbergSpec, p: LoopMatrix, V: Sequence[LoopMatrix] | None = None):
        if not is_strongly_regular(p, spec):
            raise ValueError("p is not strongly regular for this Heisenberg")
        g = spec.filtration
        self.spec, self.p = spec, p.with_grading(g)
        self.level = spec.degree_of(p)
        self.b_basis = filtered_polynomials(g, self.level)
        self.r_basis = filtered_polynomials(g, 0)
        top = max((max(x.degrees()) for x in self.b_basis), default=self.level)
        candidates = [x for d in range(self.level + 1, top + 1) for x in spec.basis(d)]
        self.frozen = _polynomial_part(candidates)
        if V is None:
            image = [self.p.bracket(r) for r in self.r_basis]
            self.V = tuple(_linalg.complement_basis(self.b_basis, image + self.frozen))
        else:
            self.V = tuple(x.with_grading(g) for x in V)
        self.V_degrees = tuple(min(x.degrees()) for x in self.V)
        self.homogeneous = all(x.is_homogeneous() for x in self.V + tuple(self.r_basis))
        self.check_transversal()
        self.constant_gauge = self._needs_constant_gauge(top)
        slice_cls = ConstantGaugeSlice if self.constant_gauge else GaugeSlice
        self.slice = slice_cls(self.p, self.r_basis, self.V, self.frozen)
        self.ring = DiffPolyRing(self._names(), tuple(d - self.level for d in self.V_degrees))

    def _needs_constant_gauge(self, top: int) -> bool:
        """True when some Heisenberg element of degree >= 0 is not in ``g[[z^-1]]``."""
        return any(not self.spec.in_positive_part(x) for d in range(0, top + 1) for x in self.spec.basis(d))

    def _names(self) -> tuple[str, ...]:
        lie = self.spec.lie
        if self.spec.kind == "homogeneous" and lie.n == 2 and len(self.V) == 2:
            return ("q", "r")
        return tuple(f"w{i}" for i in range(1, len(self.V) + 1))

    def check_transversal(self) -> None:
        dim_b = len(self.b_basis)
        image = [self.p.bracket(r) for r in self.r_basis]
        parts = image + list(self.V) + list(self.frozen)
        if len(parts) != dim_b or _linalg.span_rank(parts) != dim_b:
            raise ValueError("V is not transversal: b_gen != ad p(r) + V + (a ∩ b_gen)")
        if _linalg.span_rank(self.b_basis + list(self.V)) != dim_b:
            raise ValueError("V must lie in b_gen")

    def connection(self) -> tuple[LoopMatrix, LoopMatrix]:
        q = LoopMatrix.zero(self.p.n, self.spec.filtration)
        for name, x in zip(self.ring.variables, self.V):
            q = q + x * DiffPoly.jet(name)
        return self.p + q, q


_SETUPS: dict = {}


def generalized_setup(spec: HeisenbergSpec, p: LoopMatrix) -> GeneralizedSetup:
    key = (spec, p)
    if key not in _SETUPS:
        _SETUPS[key] = GeneralizedSetup(spec, p)
    return _SETUPS[key]


def generate_flow_generalized(spec: HeisenbergSpec, p: LoopMatrix, q_index, V_gen: Sequence[LoopMatrix] | None = None,
                              truncation_degree: int | None = None, kernel_shift=None) -> FlowEquation:
    """Flow generated by the Heisenberg element ``q`` on ``d/dt + p + V_gen``.

    ``q_index`` is ``(degree, i)`` selecting ``spec.basis(degree)[i]``, or a
    bare degree meaning ``i = 0``. ``q`` must lie outside ``a_+``.
    """
    degree, idx = (q_index, 0) if isinstance(q_index, int) else q_index
    basis = spec.basis(degree)
    if idx >= len(basis):
        raise ValueError(f"no Heisenberg generator ({degree}, {idx})")
    q = basis[idx]
    if spec.in_positive_part(q):
        raise ValueError("q must be a nonzero class in a / a_+")
    setup = GeneralizedSetup(spec, p, V_gen) if V_gen is not None else generalized_setup(spec, p)
    m = -degree
    if m < 0:
        raise ValueError("flows are generated by elements of non-positive degree")

    def build(trunc):
        a, qv = setup.connection()
        res = ds_reduce(Connection(p, qv, setup.ring), spec, trunc, kernel_shift)
        t = res.dress(q)
        lproj = project_splitting(t, SplittingKind.MINUS).with_grading(spec.filtration)
        sigma = sign_for(m)
        delta = (lproj.derive() + a.bracket(lproj)) * sigma
        vc, corr, frozen = setup.slice.project(delta, a)
        if any(frozen):
            raise CertificateError("variation has a component along the Heisenberg")
        rhs = dict(zip(setup.ring.variables, vc))
        flow = FlowEquation("generalized", spec.lie.id, spec.id, m, setup.ring, rhs, a, t, lproj,
                            lproj * sigma - corr, sigma, "dressing", trunc)
        return _certify(flow, setup.homogeneous)

    required = required_truncation(spec.filtration, SplittingKind.MINUS, m, setup.level)
    return _retrying(build, required, truncation_degree)
