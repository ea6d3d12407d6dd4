"""Exact linear algebra over Q for finite pieces of the loop algebra.

Matrices are computed once with sympy and stored as lists of Fractions, then
applied to vectors whose entries are differential polynomials. Elements of
the loop algebra are flattened to coordinates over a list of positions
``(row, col, z_power)``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import sympy as sp

from .diffpoly import DiffPoly
from .loop import GradingSpec, LoopMatrix

Position = tuple[int, int, int]
RatMatrix = list[list[Fraction]]


def _to_fraction(x) -> Fraction:
    x = sp.Rational(x)
    return Fraction(int(x.p), int(x.q))


def to_sympy(rows: RatMatrix, ncols: int | None = None) -> sp.Matrix:
    if not rows:
        return sp.zeros(0, ncols or 0)
    return sp.Matrix([[sp.Rational(c.numerator, c.denominator) for c in row] for row in rows])


def from_sympy(m: sp.Matrix) -> RatMatrix:
    return [[_to_fraction(m[i, j]) for j in range(m.shape[1])] for i in range(m.shape[0])]


def rank(rows: RatMatrix) -> int:
    return to_sympy(rows).rank() if rows else 0


def nullspace(rows: RatMatrix, ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : rows x = 0}``, in reduced echelon form."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    vecs = to_sympy(rows).nullspace()
    if not vecs:
        return []
    basis = sp.Matrix.hstack(*vecs).T.rref()[0]
    return [[_to_fraction(basis[i, j]) for j in range(ncols)] for i in range(basis.shape[0])]


def apply(mat: RatMatrix, vec: Sequence[DiffPoly]) -> list[DiffPoly]:
    out = []
    for row in mat:
        acc = DiffPoly()
        for c, v in zip(row, vec):
            if c and v:
                acc = acc + v * c
        out.append(acc)
    return out


def positions_of(mats: Sequence[LoopMatrix]) -> list[Position]:
    return sorted({key for m in mats for key in m.entries})


def flatten(x: LoopMatrix, positions: Sequence[Position], index: dict | None = None) -> list[DiffPoly]:
    """Coordinates of ``x`` over ``positions``; raises if ``x`` has other entries."""
    index = index or {p: i for i, p in enumerate(positions)}
    vec = [DiffPoly()] * len(positions)
    for key, v in x.entries.items():
        i = index.get(key)
        if i is None:
            raise ValueError(f"entry at {key} lies outside the frame")
        vec[i] = v
    return vec


def rational_vector(x: LoopMatrix, positions: Sequence[Position]) -> list[Fraction]:
    out = []
    for v in flatten(x, positions):
        if not v.is_constant():
            raise ValueError("expected a matrix with rational entries")
        out.append(v.constant_term())
    return out


class Frame:
    """A basis of constant loop matrices together with an exact left inverse."""

    def __init__(self, basis: Sequence[LoopMatrix], grading: GradingSpec | None = None):
        self.basis = tuple(basis)
        if not self.basis:
            raise ValueError("empty frame")
        self.n = self.basis[0].n
        self.grading = grading or self.basis[0].grading
        self.positions = positions_of(self.basis)
        self._index = {p: i for i, p in enumerate(self.positions)}
        cols = [rational_vector(b, self.positions) for b in self.basis]
        a = to_sympy(cols).T
        if a.rank() != len(self.basis):
            raise ValueError("frame vectors are linearly dependent")
        self.left_inverse: RatMatrix = from_sympy((a.T * a).inv() * a.T)

    def __len__(self):
        return len(self.basis)

    def coords(self, x: LoopMatrix, check: bool = True) -> list[DiffPoly]:
        c = apply(self.left_inverse, flatten(x, self.positions, self._index))
        if check and self.combine(c) != x.exact():
            raise ValueError("matrix is not in the span of the frame")
        return c

    def combine(self, coeffs: Sequence[DiffPoly | Fraction | int]) -> LoopMatrix:
        out = LoopMatrix.zero(self.n, self.grading)
        for c, b in zip(coeffs, self.basis):
            if c:
                out = out + b * c
        return out

    def contains(self, x: LoopMatrix) -> bool:
        if any(key not in self._index for key in x.entries):
            return False
        return self.combine(self.coords(x, check=False)) == x.exact()


class SplitSolver:
    """Least-norm solver for ``target = sum_i c_i cols_i`` inside a finite piece."""

    def __init__(self, cols: Sequence[LoopMatrix], ambient: Sequence[LoopMatrix]):
        self.cols = tuple(cols)
        self.positions = positions_of(list(ambient) + list(cols))
        self._index = {p: i for i, p in enumerate(self.positions)}
        if self.cols:
            a = to_sympy([rational_vector(c, self.positions) for c in self.cols]).T
            self.rank = a.rank()
            self.pinv: RatMatrix = from_sympy(a.pinv())
        else:
            self.rank = 0
            self.pinv = []

    def solve(self, target: LoopMatrix) -> list[DiffPoly] | None:
        """Least-norm coefficients, or ``None`` if ``target`` is outside the span."""
        try:
            vec = flatten(target, self.positions, self._index)
        except ValueError:
            return None
        coeffs = apply(self.pinv, vec)
        recon = LoopMatrix.zero(target.n, target.grading)
        for c, col in zip(coeffs, self.cols):
            if c:
                recon = recon + col * c
        if recon != target.exact():
            return None
        return coeffs


def complement_basis(space: Sequence[LoopMatrix], sub: Sequence[LoopMatrix]) -> list[LoopMatrix]:
    """Greedy choice of vectors from ``space`` completing ``sub`` to a basis of span(space)."""
    positions = positions_of(list(space) + list(sub))
    chosen: list[LoopMatrix] = []
    current = [rational_vector(v, positions) for v in sub]
    r = rank(current)
    for v in space:
        cand = current + [rational_vector(v, positions)]
        rr = rank(cand)
        if rr > r:
            chosen.append(v)
            current, r = cand, rr
    return chosen


def span_rank(mats: Sequence[LoopMatrix]) -> int:
    if not mats:
        return 0
    positions = positions_of(mats)
    return rank([rational_vector(m, positions) for m in mats])
