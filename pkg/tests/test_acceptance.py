"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line with its time.

Run on its own with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
import test_ds_gauge
import test_hierarchy
import test_lie_data
from conftest import PROPERTY_CASES
from dshierarchy import (
    flow_commutator,
    generate_flow_kdv,
    generate_flow_mkdv,
    make_sln,
    miura_intertwining_residual,
    miura_map,
)
from dshierarchy.diffpoly import DiffPoly
from dshierarchy.lie import NONSMOOTH_CONJUGATOR, nonsmooth_sl2_heisenberg, ptilde
from dshierarchy.loop import LoopMatrix
from dshierarchy.numeric import (
    GridFunction,
    compile_flow,
    grid,
    integrate,
    kdv_soliton,
    miura_check,
    soliton_transit,
    stable_dt_bound,
)

J = DiffPoly.jet
F = Fraction


@contextmanager
def criterion(capsys, number, title, budget):
    start = time.perf_counter()
    ok, note = False, ""
    try:
        yield
        ok = True
    except AssertionError as exc:
        note = f"  [{str(exc).splitlines()[0] if str(exc) else 'assertion failed'}]"
        raise
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        if ok and not within:
            note = f"  [over budget of {budget:g} s]"
        with capsys.disabled():
            print(f"\ncriterion {number:2d} {status}  {title}  ({elapsed:.2f} s){note}")
        if ok:
            assert within, f"criterion {number} took {elapsed:.1f} s (budget {budget} s)"


def _zero(polys):
    return all(not p for p in polys.values())


def test_criterion_01_kdv(capsys):
    with criterion(capsys, 1, "sl2 KdV flow m=3 is exact", 10):
        flow = generate_flow_kdv(make_sln(2), 3)
        assert flow.rhs == {"v": F(3, 2) * J("v") * J("v", 1) - F(1, 4) * J("v", 3)}


def test_criterion_02_mkdv(capsys):
    with criterion(capsys, 2, "sl2 mKdV flow m=3 is exact", 10):
        flow = generate_flow_mkdv(make_sln(2), 3)
        assert flow.rhs == {"u": F(3, 8) * J("u") ** 2 * J("u", 1) - F(1, 4) * J("u", 3)}


def test_criterion_03_miura(capsys):
    with criterion(capsys, 3, "sl2 Miura map v = u^2/4 + u'/2", 1):
        assert miura_map(make_sln(2)) == {"v": F(1, 4) * J("u") ** 2 + F(1, 2) * J("u", 1)}


def test_criterion_04_dressed_lax(capsys):
    # The reference matrix prints u z^2 on the diagonal. That entry has the
    # wrong degree: with u z it is the unique solution of [T, d/dt + p + h] = 0
    # (checked independently by the sympy oracle), so the comparison uses u z.
    with criterion(capsys, 4, "IWAHORI-MINUS projection of T3 matches the displayed matrix (diagonal z^2 read as z)", 10):
        test_hierarchy.test_T3_matches_display_with_diagonal_power_corrected()
        assert not oracles.sl2_T3_literal_is_consistent()


def test_criterion_05_first_flow(capsys):
    with criterion(capsys, 5, "m=1 flows are d/dt for sl2 and sl3, KdV and mKdV", 10):
        for n in (2, 3):
            for gen in (generate_flow_kdv, generate_flow_mkdv):
                flow = gen(make_sln(n), 1)
                assert flow.rhs == {x: J(x, 1) for x in flow.ring.variables}


def test_criterion_06_commuting_flows(capsys):
    with criterion(capsys, 6, "[D3, D5] = 0 on sl2; [D1, D2] = [D2, D4] = 0 on sl3", 300):
        for gen in (generate_flow_kdv, generate_flow_mkdv):
            sl2, sl3 = make_sln(2), make_sln(3)
            assert _zero(flow_commutator(gen(sl2, 3), gen(sl2, 5)))
            assert _zero(flow_commutator(gen(sl3, 1), gen(sl3, 2)))
            assert _zero(flow_commutator(gen(sl3, 2), gen(sl3, 4)))


def test_criterion_07_miura_intertwining(capsys):
    with criterion(capsys, 7, "Miura pushes mKdV onto KdV: sl2 m=3, sl3 m=2,4 (sl3 has no m=3)", 60):
        for n in (2, 3):
            lie = make_sln(n)
            if 3 % lie.coxeter_number:
                assert _zero(miura_intertwining_residual(lie, 3))
            else:
                # sl3 has no third flow (3 is a multiple of the Coxeter number);
                # its neighbours 2 and 4 are checked instead
                with pytest.raises(ValueError):
                    miura_intertwining_residual(lie, 3)
                assert _zero(miura_intertwining_residual(lie, 2))
                assert _zero(miura_intertwining_residual(lie, 4))


def test_criterion_08_nonsmooth(capsys):
    with criterion(capsys, 8, "non-smooth Heisenberg diagonalizes under C; a^+ and a_+ differ at p~1", 1):
        c = NONSMOOTH_CONJUGATOR
        cinv = c.inverse_2x2()
        g = c.grading
        for i in (-2, -1, 0, 1, 2, 3):
            diag = LoopMatrix(2, {(0, 0, 1 - i): 1, (1, 1, 1 - i): -1}, g)
            assert cinv @ ptilde(i).with_grading(g) @ c == diag
        spec = nonsmooth_sl2_heisenberg()
        p1 = spec.basis(0)[0]
        assert spec.in_plus_part(p1) and not spec.in_positive_part(p1)


def _run_counted(strategy, body):
    count = 0

    @settings(max_examples=PROPERTY_CASES)
    @given(strategy)
    def prop(case):
        nonlocal count
        count += 1
        body(case)

    prop()
    return count


def test_criterion_09_properties(capsys):
    suites = [
        ("DS re-substitution", test_ds_gauge.connections(),
         test_ds_gauge.test_resubstitution_identity.hypothesis.inner_test),
        ("dressing tie-break invariance", test_hierarchy.kernel_shifts(),
         test_hierarchy.test_dressing_is_independent_of_kernel_choices.hypothesis.inner_test),
        ("flow homogeneity", test_hierarchy.homogeneous_inputs(),
         test_hierarchy.test_flows_raise_weight_by_m.hypothesis.inner_test),
        ("kernel/image round trip", test_lie_data.split_cases(),
         test_lie_data.test_kernel_image_round_trip.hypothesis.inner_test),
    ]
    with criterion(capsys, 9, "property suites with 200+ exact cases each", 300):
        counts = {name: _run_counted(strategy, body) for name, strategy, body in suites}
        with capsys.disabled():
            print("   cases: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
        assert all(v >= 200 for v in counts.values()), counts


def test_criterion_10_numeric(capsys):
    sl2 = make_sln(2)
    kdv, mkdv = generate_flow_kdv(sl2, 3), generate_flow_mkdv(sl2, 3)
    with criterion(capsys, 10, "soliton transit, conservation over 1000 steps, Miura residual", 120):
        run = soliton_transit(kdv, k=1.0, n=512, length=100.0, dt=2e-3)
        length, n = 60.0, 256
        x = grid(n, length)
        init = {"v": GridFunction(kdv_soliton(x, 0.0, 1.0, length, length / 2), length)}
        diag = integrate(kdv, init, 4e-3, 4.0).diagnostics
        length, n = 100.0, 512
        x = grid(n, length)
        u0 = {"u": GridFunction(0.5 * np.cos(2 * math.pi * x / length), length)}
        dt = 0.9 * stable_dt_bound(compile_flow(mkdv), n, length)
        miura = miura_check(mkdv, kdv, miura_map(sl2), u0, dt, 0.5)
        mass, momentum = diag.mass_drift()["v"], diag.energy_drift()["v"]
        with capsys.disabled():
            print(f"   soliton Linf {run.linf_error:.2e}, mass drift {mass:.2e}, "
                  f"momentum drift {momentum:.2e} ({diag.steps} steps), Miura residual {miura.residual:.2e}")
        assert run.linf_error < 1e-6
        assert diag.steps == 1000 and mass < 1e-8 and momentum < 1e-8
        assert miura.residual < 1e-8


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
