"""Serialized form of derived equations.

A document stores one flow: provenance metadata plus, for every variable,
the right-hand side as a list of monomials. Coefficients are written as
``"num/den"`` strings and monomials appear in the ring's canonical order, so
emitting the same flow twice gives byte-identical output and
``parse(emit(doc)) == doc``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from . import __version__
from .diffpoly import DiffPoly, DiffPolyRing

SCHEMA = "dshierarchy.equations"
SCHEMA_VERSION = 1
SIGN_CONVENTION = "zc-sigma:v1"
WEIGHT_CONVENTION = "jet-weight:v1"

CONVENTIONS = {
    SIGN_CONVENTION: "d/dt_m A = s_m (L' + [A, L]) with L the projected dressed generator; "
                     "s_1 = +1 and s_m = -1 for m >= 2",
    WEIGHT_CONVENTION: "weight of x^(n) is weight(x) + n; the right-hand side of d/dt_m x has "
                       "weight weight(x) + m",
}


class DocumentError(ValueError):
    pass


def _frac_str(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def _parse_frac(s: str) -> Fraction:
    if not isinstance(s, str) or s.count("/") != 1:
        raise DocumentError(f"coefficient {s!r} is not of the form 'num/den'")
    num, den = s.split("/")
    try:
        q = Fraction(int(num), int(den))
    except (ValueError, ZeroDivisionError) as exc:
        raise DocumentError(f"bad coefficient {s!r}") from exc
    if int(den) <= 0 or Fraction(int(num), int(den)).denominator != int(den):
        raise DocumentError(f"coefficient {s!r} is not in lowest terms")
    return q


@dataclass(frozen=True)
class Metadata:
    algebra: str
    heisenberg: str
    hierarchy: str
    m: int
    variables: tuple[str, ...]
    weights: tuple[int, ...]
    method: str = ""
    truncation_degree: int | None = None
    weight_convention: str = WEIGHT_CONVENTION
    sign_convention: str = SIGN_CONVENTION
    tool_version: str = __version__


@dataclass(frozen=True)
class EquationDocument:
    metadata: Metadata
    equations: tuple[tuple[str, DiffPoly], ...] = field(default=())

    @property
    def ring(self) -> DiffPolyRing:
        return DiffPolyRing(self.metadata.variables, self.metadata.weights)

    @property
    def rhs(self) -> dict[str, DiffPoly]:
        return dict(self.equations)

    @classmethod
    def from_flow(cls, flow) -> "EquationDocument":
        ring = flow.ring
        meta = Metadata(
            algebra=flow.algebra_id,
            heisenberg=flow.heisenberg_id,
            hierarchy=flow.hierarchy_kind,
            m=flow.m,
            variables=tuple(ring.variables),
            weights=tuple(ring.weights),
            method=flow.method,
            truncation_degree=flow.truncation_degree,
        )
        return cls(meta, tuple((x, flow.rhs[x]) for x in ring.variables))

    # -- JSON ----------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        ring = self.ring
        eqs = []
        for lhs, p in self.equations:
            monos = []
            for mono, c in ring.sorted_terms(p):
                factors = [{"var": name, "order": order, "power": power}
                           for (name, order), power in sorted(mono, key=lambda jp: (ring.index(jp[0][0]), jp[0][1]))]
                monos.append({"coeff": _frac_str(Fraction(c)), "factors": factors})
            eqs.append({"lhs": lhs, "rhs": monos})
        meta = self.metadata
        return {
            "schema": SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "metadata": {
                "algebra": meta.algebra,
                "heisenberg": meta.heisenberg,
                "hierarchy": meta.hierarchy,
                "m": meta.m,
                "variables": [{"name": v, "weight": w} for v, w in zip(meta.variables, meta.weights)],
                "method": meta.method,
                "truncation_degree": meta.truncation_degree,
                "weight_convention": meta.weight_convention,
                "sign_convention": meta.sign_convention,
                "tool_version": meta.tool_version,
            },
            "equations": eqs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EquationDocument":
        if data.get("schema") != SCHEMA:
            raise DocumentError(f"not an equation document (schema {data.get('schema')!r})")
        if data.get("schema_version") != SCHEMA_VERSION:
            raise DocumentError(f"unsupported schema version {data.get('schema_version')!r}")
        try:
            md = data["metadata"]
            meta = Metadata(
                algebra=md["algebra"],
                heisenberg=md["heisenberg"],
                hierarchy=md["hierarchy"],
                m=int(md["m"]),
                variables=tuple(v["name"] for v in md["variables"]),
                weights=tuple(int(v["weight"]) for v in md["variables"]),
                method=md.get("method", ""),
                truncation_degree=md.get("truncation_degree"),
                weight_convention=md["weight_convention"],
                sign_convention=md["sign_convention"],
                tool_version=md["tool_version"],
            )
            eqs = []
            for eq in data["equations"]:
                p = DiffPoly()
                for mono in eq["rhs"]:
                    term = DiffPoly.const(_parse_frac(mono["coeff"]))
                    for f in mono["factors"]:
                        if f["var"] not in meta.variables:
                            raise DocumentError(f"unknown variable {f['var']!r}")
                        term = term * DiffPoly.jet(f["var"], int(f["order"]), int(f["power"]))
                    p = p + term
                eqs.append((eq["lhs"], p))
        except (KeyError, TypeError) as exc:
            raise DocumentError(f"malformed equation document: {exc}") from exc
        return cls(meta, tuple(eqs))

    @classmethod
    def from_json(cls, text: str) -> "EquationDocument":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    # -- human-readable ------------------------------------------------------
    def to_text(self) -> str:
        ring, m = self.ring, self.metadata.m
        return "\n".join(f"d/dt{m} {x} = {ring.render(p)}" for x, p in self.equations)

    def to_latex(self) -> str:
        ring, m = self.ring, self.metadata.m
        lines = []
        for x, p in self.equations:
            lhs = f"\\partial_{{t_{{{m}}}}} {_latex_var(x)}"
            lines.append(f"{lhs} = {ring.render_latex(p)}")
        return " \\\\\n".join(lines)

    def render(self, fmt: str) -> str:
        if fmt == "text":
            return self.to_text()
        if fmt == "latex":
            return self.to_latex()
        if fmt == "json":
            return self.to_json().rstrip("\n")
        raise ValueError(f"unknown format {fmt!r}")


def _latex_var(name: str) -> str:
    from .diffpoly import _latex_name
    return _latex_name(name)
