"""Numerical evaluation and time integration of derived flows.

Everything here works on a uniform periodic grid with double precision. The
symbolic modules never see a float; a flow enters only through its
right-hand sides, which are compiled once into lists of
``(coefficient, [(variable, order, power), ...])``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .diffpoly import DiffPoly

SPECTRAL = "spectral"
FD4 = "fd4"
DIFF_METHODS = (SPECTRAL, FD4)

DEFAULT_BLOWUP = 1e6
#: RK4 is stable on the imaginary axis up to |dt lambda| = 2 sqrt 2; keep a margin
RK4_IMAGINARY_LIMIT = 2.5


class NumericError(RuntimeError):
    """Non-finite values or an invalid numerical setup."""


class BlowUpError(NumericError):
    def __init__(self, t: float, sup: float):
        super().__init__(f"solution blew up at t={t:.6g} (sup norm {sup:.3g})")
        self.t = t
        self.sup = sup


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class GridFunction:
    """Samples of a periodic function on ``N`` equispaced points of ``[0, L)``."""

    samples: np.ndarray
    length: float

    def __post_init__(self):
        a = np.array(self.samples, dtype=float)
        if a.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not _is_power_of_two(a.size):
            raise ValueError(f"grid size {a.size} is not a power of two")
        if not np.all(np.isfinite(a)):
            raise NumericError("samples contain non-finite values")
        if not self.length > 0:
            raise ValueError("length must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return grid(self.n, self.length)

    def integral(self) -> float:
        return float(self.samples.sum() * self.dx)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n: int, length: float) -> "GridFunction":
        return cls(f(grid(n, length)), length)


def grid(n: int, length: float) -> np.ndarray:
    return np.arange(n) * (length / n)


# -- derivatives -------------------------------------------------------------

def spectral_derivatives(f: np.ndarray, length: float, max_order: int) -> list[np.ndarray]:
    """``[f, f', ..., f^(max_order)]`` by FFT differentiation."""
    n = f.size
    out = [f]
    if max_order == 0:
        return out
    fh = np.fft.rfft(f)
    ik = 2j * np.pi * np.fft.rfftfreq(n, d=length / n)
    nyquist = n % 2 == 0
    for p in range(1, max_order + 1):
        g = fh * ik ** p
        if nyquist and p % 2:
            g[-1] = 0.0
        out.append(np.fft.irfft(g, n))
    return out


_FD4 = {
    1: ({-2: 1, -1: -8, 1: 8, 2: -1}, 12),
    2: ({-2: -1, -1: 16, 0: -30, 1: 16, 2: -1}, 12),
    3: ({-3: 1, -2: -8, -1: 13, 1: -13, 2: 8, 3: -1}, 8),
    4: ({-3: -1, -2: 12, -1: -39, 0: 56, 1: -39, 2: 12, 3: -1}, 6),
}


def _fd4_apply(f: np.ndarray, h: float, order: int) -> np.ndarray:
    stencil, denom = _FD4[order]
    acc = np.zeros_like(f)
    for shift, w in stencil.items():
        # np.roll(f, -s)[j] == f[j + s]
        acc += w * np.roll(f, -shift)
    return acc / (denom * h ** order)


def fd4_derivatives(f: np.ndarray, length: float, max_order: int) -> list[np.ndarray]:
    """Fourth-order central differences; orders above 4 are composed from lower ones."""
    h = length / f.size
    out = [f]
    for p in range(1, max_order + 1):
        if p <= 4:
            out.append(_fd4_apply(f, h, p))
        else:
            out.append(_fd4_apply(out[p - 4], h, 4))
    return out


def derivatives(f: np.ndarray, length: float, max_order: int, method: str = SPECTRAL) -> list[np.ndarray]:
    if method == SPECTRAL:
        return spectral_derivatives(f, length, max_order)
    if method == FD4:
        return fd4_derivatives(f, length, max_order)
    raise ValueError(f"unknown differentiation method {method!r}")


# -- compiled right-hand sides ---------------------------------------------------

Term = tuple[float, tuple[tuple[str, int, int], ...]]


@dataclass(frozen=True)
class CompiledRHS:
    """Right-hand sides of a flow, flattened for fast repeated evaluation."""

    variables: tuple[str, ...]
    terms: Mapping[str, tuple[Term, ...]]
    orders: Mapping[str, int]

    @classmethod
    def from_polys(cls, variables: Sequence[str], rhs: Mapping[str, DiffPoly]) -> "CompiledRHS":
        orders = {x: 0 for x in variables}
        terms = {}
        for x in variables:
            flat = []
            for mono, c in rhs[x].terms.items():
                factors = []
                for (name, order), power in mono:
                    if name not in orders:
                        raise ValueError(f"right-hand side uses unknown variable {name!r}")
                    orders[name] = max(orders[name], order)
                    factors.append((name, order, power))
                flat.append((float(c), tuple(factors)))
            terms[x] = tuple(flat)
        return cls(tuple(variables), terms, orders)

    @property
    def max_order(self) -> int:
        return max(self.orders.values(), default=0)

    def __call__(self, state: Mapping[str, np.ndarray], length: float, method: str = SPECTRAL
                 ) -> dict[str, np.ndarray]:
        jets = {x: derivatives(state[x], length, self.orders[x], method) for x in self.variables}
        n = next(iter(state.values())).size
        out = {}
        for x in self.variables:
            acc = np.zeros(n)
            for c, factors in self.terms[x]:
                t = np.full(n, c)
                for name, order, power in factors:
                    d = jets[name][order]
                    t = t * (d if power == 1 else d ** power)
                acc += t
            out[x] = acc
        return out


def compile_flow(flow) -> CompiledRHS:
    return CompiledRHS.from_polys(flow.ring.variables, flow.rhs)


def _as_arrays(variables: Sequence[str], state: Mapping[str, GridFunction | np.ndarray],
               length: float | None) -> tuple[dict[str, np.ndarray], float]:
    missing = [x for x in variables if x not in state]
    if missing:
        raise ValueError(f"state is missing variables {missing}")
    arrays, lengths = {}, set()
    for x in variables:
        g = state[x]
        if isinstance(g, GridFunction):
            arrays[x] = np.array(g.samples)
            lengths.add(g.length)
        else:
            arrays[x] = np.array(GridFunction(g, length or 1.0).samples)
    if length is not None:
        lengths.add(length)
    if len(lengths) != 1:
        raise ValueError("state variables live on different domains")
    if len({a.size for a in arrays.values()}) != 1:
        raise ValueError("state variables have different grid sizes")
    return arrays, lengths.pop()


def evaluate_rhs(flow, state: Mapping[str, GridFunction], diff_method: str = SPECTRAL
                 ) -> dict[str, GridFunction]:
    """Evaluate every right-hand side of ``flow`` pointwise on ``state``."""
    if diff_method not in DIFF_METHODS:
        raise ValueError(f"unknown differentiation method {diff_method!r}")
    rhs = compile_flow(flow)
    arrays, length = _as_arrays(rhs.variables, state, None)
    with np.errstate(all="ignore"):
        values = rhs(arrays, length, diff_method)
    for x, v in values.items():
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite value in the right-hand side for {x}")
    return {x: GridFunction(v, length) for x, v in values.items()}


# -- time stepping ---------------------------------------------------------------

@dataclass
class Diagnostics:
    times: list[float] = field(default_factory=list)
    mass: dict[str, list[float]] = field(default_factory=dict)
    energy: dict[str, list[float]] = field(default_factory=dict)
    steps: int = 0
    dt: float = 0.0
    extra: dict[str, float] = field(default_factory=dict)

    def record(self, t: float, state: Mapping[str, np.ndarray], dx: float):
        self.times.append(t)
        for x, v in state.items():
            self.mass.setdefault(x, []).append(float(v.sum() * dx))
            self.energy.setdefault(x, []).append(float((v * v).sum() * dx))

    @staticmethod
    def _drift(series: Sequence[float]) -> float:
        ref = abs(series[0])
        worst = max(abs(s - series[0]) for s in series)
        return worst / ref if ref > 0 else worst

    def mass_drift(self) -> dict[str, float]:
        """Largest relative change of the integral of each variable (absolute if it starts at 0)."""
        return {x: self._drift(s) for x, s in self.mass.items()}

    def energy_drift(self) -> dict[str, float]:
        return {x: self._drift(s) for x, s in self.energy.items()}

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "dt": self.dt,
            "times": self.times,
            "mass": self.mass,
            "energy": self.energy,
            "mass_drift": self.mass_drift(),
            "energy_drift": self.energy_drift(),
            **({"extra": self.extra} if self.extra else {}),
        }


@dataclass
class Trajectory:
    variables: tuple[str, ...]
    length: float
    x: np.ndarray
    times: np.ndarray
    values: dict[str, np.ndarray]  # variable -> (len(times), N)
    diagnostics: Diagnostics
    label: str = ""

    def final(self) -> dict[str, GridFunction]:
        return {x: GridFunction(v[-1], self.length) for x, v in self.values.items()}


def default_stability_c(rhs: CompiledRHS) -> float:
    """Constant ``c`` for ``dt <= c (L/N)^p``, from the top-order linear terms.

    A term ``a x^(p)`` with largest ``p`` contributes eigenvalues up to
    ``|a| (pi N / L)^p``; RK4 needs ``dt |lambda|`` below about 2.8.
    """
    p = rhs.max_order
    worst = 0.0
    for terms in rhs.terms.values():
        for c, factors in terms:
            if len(factors) == 1 and factors[0][1] == p and factors[0][2] == 1:
                worst = max(worst, abs(c))
    return RK4_IMAGINARY_LIMIT / ((worst or 1.0) * math.pi ** max(p, 1))


def stable_dt_bound(rhs: CompiledRHS, n: int, length: float, c: float | None = None) -> float:
    """Heuristic largest RK4 step ``c (L/N)^order`` (``c`` defaults to :func:`default_stability_c`)."""
    c = default_stability_c(rhs) if c is None else c
    return c * (length / n) ** max(rhs.max_order, 1)


def rk4_step(f: Callable[[dict], dict], y: dict[str, np.ndarray], dt: float) -> dict[str, np.ndarray]:
    k1 = f(y)
    k2 = f({x: y[x] + 0.5 * dt * k1[x] for x in y})
    k3 = f({x: y[x] + 0.5 * dt * k2[x] for x in y})
    k4 = f({x: y[x] + dt * k3[x] for x in y})
    return {x: y[x] + dt / 6.0 * (k1[x] + 2 * k2[x] + 2 * k3[x] + k4[x]) for x in y}


def integrate(flow, initial: Mapping[str, GridFunction], dt: float, t_end: float, scheme: str = "rk4",
              diff_method: str = SPECTRAL, save_every: int | None = None,
              blowup_threshold: float = DEFAULT_BLOWUP, stability_c: float | None = None,
              check_stability: bool = True, rhs: CompiledRHS | None = None) -> Trajectory:
    """Integrate ``flow`` from ``initial`` to ``t_end`` with classical RK4.

    The step is shrunk slightly so that a whole number of steps ends exactly
    at ``t_end``. Steps above :func:`stable_dt_bound` are rejected unless
    ``check_stability`` is false.
    ``save_every`` stores every k-th step (default: about 100 snapshots).
    """
    if scheme != "rk4":
        raise ValueError(f"unsupported scheme {scheme!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    rhs = rhs or compile_flow(flow)
    y, length = _as_arrays(rhs.variables, initial, None)
    n = next(iter(y.values())).size
    if check_stability:
        bound = stable_dt_bound(rhs, n, length, stability_c)
        if dt > bound:
            raise ValueError(f"dt={dt:g} exceeds the stability heuristic {bound:g} (order {rhs.max_order})")
    steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / steps if steps else 0.0
    save_every = save_every or max(1, steps // 100)
    dx = length / n

    def f(state):
        return rhs(state, length, diff_method)

    diag = Diagnostics(dt=h)
    diag.record(0.0, y, dx)
    times, snaps = [0.0], {x: [v.copy()] for x, v in y.items()}
    for i in range(1, steps + 1):
        with np.errstate(all="ignore"):
            y = rk4_step(f, y, h)
        sup = max(float(np.max(np.abs(v))) for v in y.values())
        t = i * h
        if not math.isfinite(sup) or sup > blowup_threshold:
            raise BlowUpError(t, sup)
        if i % save_every == 0 or i == steps:
            times.append(t)
            for x, v in y.items():
                snaps[x].append(v.copy())
            diag.record(t, y, dx)
    diag.steps = steps
    return Trajectory(rhs.variables, length, grid(n, length), np.array(times),
                      {x: np.array(s) for x, s in snaps.items()}, diag,
                      getattr(flow, "hierarchy_kind", "") + (f":{flow.m}" if hasattr(flow, "m") else ""))


# -- traveling waves ---------------------------------------------------------

def kdv_soliton_parameters(k: float) -> tuple[float, float, float]:
    """``(A, k, c)`` with ``A sech^2(k (x - c t))`` solving ``v_t = 3/2 v v' - 1/4 v'''``.

    The ansatz gives ``c = k^2`` from the ``f'`` terms and ``3/2 A + 3 k^2 = 0``
    from the ``f f'`` terms, using ``f'' = k^2 (4 f - 6 f^2)`` for ``f = sech^2(k x)``.
    """
    return -2.0 * k * k, k, k * k


def kdv_soliton(x: np.ndarray, t: float, k: float, length: float, x0: float = 0.0) -> np.ndarray:
    """The soliton centred at ``x0 + c t``, wrapped onto ``[0, length)``."""
    a, k, c = kdv_soliton_parameters(k)
    xi = np.mod(x - x0 - c * t + length / 2, length) - length / 2
    return a / np.cosh(k * xi) ** 2


@dataclass
class SolitonRun:
    k: float
    n: int
    length: float
    dt: float
    t_end: float
    linf_error: float
    trajectory: Trajectory


def soliton_transit(flow, k: float = 1.0, n: int = 512, length: float = 100.0, dt: float = 2e-3,
                    transits: float = 1.0, diff_method: str = SPECTRAL) -> SolitonRun:
    """Propagate the KdV soliton until it has crossed the whole domain ``transits`` times.

    Returns the L-infinity distance from the exact travelling wave at the end.
    """
    _, _, c = kdv_soliton_parameters(k)
    x = grid(n, length)
    x0 = length / 2
    var = flow.ring.variables[0]
    t_end = transits * length / c
    init = {var: GridFunction(kdv_soliton(x, 0.0, k, length, x0), length)}
    traj = integrate(flow, init, dt, t_end, diff_method=diff_method)
    exact = kdv_soliton(x, t_end, k, length, x0)
    err = float(np.max(np.abs(traj.values[var][-1] - exact)))
    traj.diagnostics.extra["linf_error"] = err
    return SolitonRun(k, n, length, traj.diagnostics.dt, t_end, err, traj)


# -- Miura -----------------------------------------------------------------------

def miura_residual(mkdv_flow, kdv_flow, miura: Mapping[str, DiffPoly], state: Mapping[str, np.ndarray],
                   length: float, diff_method: str = SPECTRAL) -> float:
    """Sup norm of ``d/dt Miura(u) - KdV(Miura(u))`` with ``u_t`` given by the modified flow.

    ``d/dt Miura(u)`` is the prolongation of each Miura polynomial along the
    modified flow, evaluated on ``u``; ``KdV(Miura(u))`` evaluates the KdV
    right-hand side on the numerically formed ``v = Miura(u)``.
    """
    u_vars = mkdv_flow.ring.variables
    v_vars = kdv_flow.ring.variables
    if not set(v_vars).isdisjoint(u_vars):
        raise ValueError("oper and Miura variables must have different names")
    lhs_polys = {v: miura[v].prolong(mkdv_flow.rhs) for v in v_vars}
    v_state = _evaluate_polys({v: miura[v] for v in v_vars}, state, u_vars, length, diff_method)
    lhs = _evaluate_polys(lhs_polys, state, u_vars, length, diff_method)
    rhs = compile_flow(kdv_flow)(v_state, length, diff_method)
    return float(max(np.max(np.abs(lhs[v] - rhs[v])) for v in v_vars))


def _evaluate_polys(polys: Mapping[str, DiffPoly], state: Mapping[str, np.ndarray], variables: Sequence[str],
                    length: float, method: str) -> dict[str, np.ndarray]:
    orders = {x: 0 for x in variables}
    for p in polys.values():
        for (name, order) in p.jets():
            orders[name] = max(orders[name], order)
    jets = {x: derivatives(np.asarray(state[x], dtype=float), length, orders[x], method) for x in variables}
    n = np.asarray(state[variables[0]]).size
    return {k: np.asarray(p.evaluate(lambda j: jets[j[0]][j[1]], one=np.ones(n)), dtype=float)
            for k, p in polys.items()}


@dataclass
class MiuraRun:
    residual: float
    intertwining_error: float
    trajectory: Trajectory


def miura_check(mkdv_flow, kdv_flow, miura: Mapping[str, DiffPoly], initial: Mapping[str, GridFunction],
                dt: float, t_end: float, diff_method: str = SPECTRAL) -> MiuraRun:
    """Evolve ``u`` by the modified flow and compare with KdV along ``v = Miura(u)``.

    Two numbers come back: the largest pointwise residual of the KdV equation
    along ``Miura(u(t))`` at the stored times, and the sup distance between
    ``Miura(u(t_end))`` and an independent KdV integration of ``Miura(u(0))``.
    """
    traj = integrate(mkdv_flow, initial, dt, t_end, diff_method=diff_method)
    u_vars = mkdv_flow.ring.variables
    polys = {v: miura[v] for v in kdv_flow.ring.variables}
    length = traj.length
    worst = 0.0
    for i in range(len(traj.times)):
        st = {u: traj.values[u][i] for u in u_vars}
        worst = max(worst, miura_residual(mkdv_flow, kdv_flow, miura, st, length, diff_method))
    v0 = _evaluate_polys(polys, {u: traj.values[u][0] for u in u_vars}, u_vars, length, diff_method)
    v_end = _evaluate_polys(polys, {u: traj.values[u][-1] for u in u_vars}, u_vars, length, diff_method)
    kdv = integrate(kdv_flow, {v: GridFunction(a, length) for v, a in v0.items()}, dt, t_end,
                    diff_method=diff_method)
    gap = float(max(np.max(np.abs(kdv.values[v][-1] - v_end[v])) for v in v_end))
    traj.diagnostics.extra.update({"miura_residual": worst, "intertwining_error": gap})
    return MiuraRun(worst, gap, traj)


# -- output --------------------------------------------------------------------

def write_trajectory(traj: Trajectory, path: str | Path, metadata: Mapping | None = None) -> list[Path]:
    """Write one ``t,x,value`` CSV per variable plus a JSON diagnostics sidecar.

    With a single variable the CSV goes to ``path``; otherwise each variable
    gets ``<stem>_<var>.csv``. The sidecar is ``<stem>.json``.
    """
    path = Path(path)
    written = []
    for var in traj.variables:
        target = path if len(traj.variables) == 1 else path.with_name(f"{path.stem}_{var}{path.suffix or '.csv'}")
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "value"])
            for t, row in zip(traj.times, traj.values[var]):
                for xv, val in zip(traj.x, row):
                    w.writerow([repr(float(t)), repr(float(xv)), repr(float(val))])
        written.append(target)
    side = path.with_suffix(".json")
    payload = {"variables": list(traj.variables), "length": traj.length, "grid": int(traj.x.size),
               "label": traj.label, "diagnostics": traj.diagnostics.to_dict()}
    if metadata:
        payload["metadata"] = dict(metadata)
    side.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    written.append(side)
    return written
