from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path

import sympy as sp
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dshierarchy.diffpoly import DiffPoly

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

PROPERTY_CASES = 200


def fractions(max_num: int = 9, max_den: int = 6):
    return st.builds(Fraction, st.integers(-max_num, max_num), st.integers(1, max_den))


def nonzero_fractions(max_num: int = 9, max_den: int = 6):
    return fractions(max_num, max_den).filter(bool)


def jets(names=("u", "w"), max_order: int = 3):
    return st.tuples(st.sampled_from(names), st.integers(0, max_order))


@st.composite
def diffpolys(draw, names=("u", "w"), max_order=3, max_terms=4, max_factors=3):
    p = DiffPoly()
    for _ in range(draw(st.integers(0, max_terms))):
        term = DiffPoly.const(draw(fractions()))
        for _ in range(draw(st.integers(0, max_factors))):
            name, order = draw(jets(names, max_order))
            term = term * DiffPoly.jet(name, order)
        p = p + term
    return p


def sympy_to_diffpoly(expr, symbol_map) -> DiffPoly:
    """Convert a polynomial in jet symbols; ``symbol_map`` sends symbol -> (name, order)."""
    expr = sp.expand(expr)
    gens = list(symbol_map)
    out = DiffPoly()
    if expr == 0:
        return out
    poly = sp.Poly(expr, *gens)
    for monom, coeff in poly.terms():
        c = sp.Rational(coeff)
        term = DiffPoly.const(Fraction(int(c.p), int(c.q)))
        for g, power in zip(gens, monom):
            if power:
                name, order = symbol_map[g]
                term = term * DiffPoly.jet(name, order, power)
        out = out + term
    return out
