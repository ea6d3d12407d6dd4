from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import diffpolys
from dshierarchy.diffpoly import DiffPoly
from dshierarchy.gauge import (
    Connection,
    canonical_oper_form,
    ds_reduce,
    gauge_connection,
    infinitesimal_gauge_project,
    miura_cartan,
    miura_map,
    miura_variables,
    unipotent_exp,
    unipotent_log,
)
from dshierarchy.lie import (
    default_transversal,
    homogeneous_heisenberg,
    make_sln,
    nonsmooth_sl2_heisenberg,
    principal_heisenberg,
)
from dshierarchy.loop import LoopMatrix

J = DiffPoly.jet
F = Fraction


def _sl2_miura_connection():
    lie = make_sln(2)
    ring = miura_variables(lie)
    return lie, Connection(lie.p_minus1, miura_cartan(lie, ring), ring)


# -- ds_reduce -------------------------------------------------------------------

def test_zero_q_gives_trivial_gauge():
    lie = make_sln(2)
    conn = Connection(lie.p_minus1, LoopMatrix.zero(2, lie.grading), miura_variables(lie))
    res = ds_reduce(conn, principal_heisenberg(lie), 5)
    assert all(not m for m in res.exponent_components.values())
    assert not res.abelian_coeffs


def test_abelianized_connection_is_a_fixed_point():
    lie, conn = _sl2_miura_connection()
    spec = principal_heisenberg(lie)
    res = ds_reduce(conn, spec, 5)
    again = ds_reduce(Connection(lie.p_minus1, res.abelian_part, conn.ring), spec, 5)
    assert all(not m for m in again.exponent_components.values())
    assert again.abelian_coeffs == res.abelian_coeffs


def test_abelian_coefficients_are_homogeneous():
    lie, conn = _sl2_miura_connection()
    res = ds_reduce(conn, principal_heisenberg(lie), 5)
    for (d, _), c in res.abelian_coeffs.items():
        # coefficient of p_d is a differential polynomial of weight d + 1
        assert c.is_homogeneous(conn.ring, d + 1)


def test_ds_reduce_validates_input():
    lie, conn = _sl2_miura_connection()
    spec = principal_heisenberg(lie)
    with pytest.raises(ValueError):
        ds_reduce(conn, spec, 0)
    bad = Connection(lie.p_minus1, lie.f[0] * J("u"), conn.ring)
    with pytest.raises(ValueError):
        ds_reduce(bad, spec, 3)


@st.composite
def connections(draw):
    kind = draw(st.sampled_from(["sl2", "sl3", "hom2", "nonsmooth"]))
    if kind in ("sl2", "sl3"):
        lie = make_sln(2 if kind == "sl2" else 3)
        spec = principal_heisenberg(lie)
        pieces = list(lie.borel_plus)
    elif kind == "hom2":
        lie = make_sln(2)
        spec = homogeneous_heisenberg(lie)
        pieces = [x.with_grading(spec.filtration) for x in lie.e + lie.f + lie.h]
    else:
        spec = nonsmooth_sl2_heisenberg()
        from dshierarchy.hierarchy import generalized_setup
        setup = generalized_setup(spec, spec.basis(-1)[0])
        pieces = list(setup.V)
    p = spec.basis(-1)[0]
    q = LoopMatrix.zero(p.n, spec.filtration)
    for x in pieces:
        if draw(st.booleans()):
            q = q + x.with_grading(spec.filtration) * draw(diffpolys(names=("u",), max_order=2, max_terms=2))
    trunc = draw(st.integers(1, 3))
    return spec, Connection(p, q, None), trunc


@given(connections())
def test_resubstitution_identity(case):
    spec, conn, trunc = case
    res = ds_reduce(conn, spec, trunc)
    assert res.check()


# -- canonical oper form and the Miura map ------------------------------------------

def test_transversal_element_is_already_canonical():
    lie = make_sln(3)
    V = default_transversal(lie)
    b = V.combine([J("a"), J("b")])
    v, log_n = canonical_oper_form(b, lie, V)
    assert v == [J("a"), J("b")]
    assert not log_n


def test_sl2_miura_map():
    lie = make_sln(2)
    assert miura_map(lie) == {"v": F(1, 4) * J("u") ** 2 + F(1, 2) * J("u", 1)}
    v, log_n = canonical_oper_form(miura_cartan(lie), lie)
    assert v == [F(1, 4) * J("u") ** 2 + F(1, 2) * J("u", 1)]
    gauged = gauge_connection(log_n, lie.pbar_minus1 + miura_cartan(lie))
    assert gauged == lie.pbar_minus1 + lie.E(0, 1) * v[0]


@pytest.mark.parametrize("n", [2, 3, 4])
def test_miura_map_vanishes_at_zero(n):
    lie = make_sln(n)
    zero = {u: DiffPoly() for u in miura_variables(lie).variables}
    assert all(not p.subs(zero) for p in miura_map(lie).values())


@st.composite
def gauge_pairs(draw):
    n = draw(st.sampled_from([2, 3]))
    lie = make_sln(n)
    b = LoopMatrix.zero(n, lie.grading)
    for x in lie.borel_plus:
        if draw(st.booleans()):
            b = b + x * draw(diffpolys(names=("u",), max_order=1, max_terms=2, max_factors=2))
    nmat = LoopMatrix.zero(n, lie.grading)
    for x in lie.n_plus:
        nmat = nmat + x * draw(diffpolys(names=("u",), max_order=1, max_terms=2, max_factors=1))
    return lie, b, nmat


@given(gauge_pairs())
def test_canonical_form_is_gauge_invariant(case):
    lie, b, nmat = case
    pbar = lie.pbar_minus1
    b2 = gauge_connection(nmat, pbar + b) - pbar
    assert lie.in_borel_plus(b2)
    assert canonical_oper_form(b, lie)[0] == canonical_oper_form(b2, lie)[0]


def test_unipotent_exp_log_round_trip():
    lie = make_sln(3)
    x = lie.E(0, 1) * J("a") + lie.E(1, 2) * 2 + lie.E(0, 2) * J("b")
    assert unipotent_log(unipotent_exp(x)) == x


# -- infinitesimal gauge --------------------------------------------------------------

def test_v_valued_tangent_needs_no_correction():
    lie = make_sln(2)
    delta = lie.E(0, 1) * J("v", 3)
    dv, corr = infinitesimal_gauge_project(delta, lie.E(0, 1) * J("v"), lie)
    assert dv == delta and not corr


def test_cartan_tangent_in_sl2():
    # delta_b = diag(a, -a) at b = v E_12: n = -a e, and then
    # delta_v = delta_b - n' - [f + v e, n] = a' e
    lie = make_sln(2)
    a = J("a")
    dv, corr = infinitesimal_gauge_project(lie.h[0] * a, lie.E(0, 1) * J("v"), lie)
    assert corr == lie.e[0] * (-a)
    assert dv == lie.E(0, 1) * a.derive()


@st.composite
def tangents(draw):
    n = draw(st.sampled_from([2, 3]))
    lie = make_sln(n)
    V = default_transversal(lie)
    b = V.combine([J(x) for x in V.names])
    delta = LoopMatrix.zero(n, lie.grading)
    for x in lie.borel_plus:
        if draw(st.booleans()):
            delta = delta + x * draw(diffpolys(names=V.names, max_order=2, max_terms=2, max_factors=2))
    return lie, V, b, delta


@given(tangents())
def test_infinitesimal_gauge_round_trip(case):
    lie, V, b, delta = case
    dv, corr = infinitesimal_gauge_project(delta, b, lie, V)
    a = lie.pbar_minus1 + b
    assert lie.in_n_plus(corr)
    assert dv == delta - (corr.derive() + a.bracket(corr))
    # the result lies in V
    assert V.combine(V.coords(dv)) == dv
