import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import same_up_to_sign
from robustpulse import benchmark, robust as R, series, tables
from robustpulse.analysis import suppression_order
from robustpulse.sequences import (ControlScheme, Global, PulseSequence, bb1, evaluate, overlap_with,
                                   pc_target, zc_target)
from robustpulse.solve import ROOT_TOL, Root, SolverError
from robustpulse.su2 import Z, global_pulse

PI = math.pi
PRINT_TOL = 5e-5 * PI
PC_EULER = benchmark.benchmark_euler(ControlScheme.PC)


def _phase_gap(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % (2 * PI)
    return float(np.max(np.minimum(d, 2 * PI - d)))


def _eps_derivs(seq, order):
    return series.derivatives(seq.tuples(), "eps", order)


@settings(max_examples=50)
@given(st.floats(0.01 * PI, 1.99 * PI))
def test_score1_solver_matches_closed_form(theta):
    sol = R.score_n(theta, 0.3, 1, use_table=False)
    assert sol.params[0] == pytest.approx(R.score1_angle(theta), abs=1e-9)
    assert overlap_with(sol.sequence, global_pulse(theta, 0.3)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("key", sorted(tables.scoren()))
def test_score_table_rows(key):
    theta, n = key
    sol = R.score_n(theta * PI, 0.0, n)
    assert np.max(np.abs(np.array(sol.params) - tables.scoren()[key])) < PRINT_TOL
    assert sol.residual < ROOT_TOL
    assert suppression_order(sol.sequence, global_pulse(theta * PI, 0.0), "delta").order >= n


def test_score_centre_pulse_is_split_above_three_pi():
    sol = R.score_n(PI, 0.0, 3)
    assert all(g.theta <= 3 * PI + 1e-12 for g in sol.sequence.elements)
    assert overlap_with(sol.sequence, global_pulse(PI, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_score_table_branch_continuation():
    sol = R.score_n(1.5 * PI, 0.0, 2, branch="table")
    area = sum(g.theta for g in sol.sequence.elements) / PI
    assert area < 6.0
    with pytest.raises(ValueError):
        R.score_n(1.5 * PI, 0.0, 2, branch="other")


def test_score_input_validation():
    with pytest.raises(ValueError):
        R.score_n(0.0)
    with pytest.raises(ValueError):
        R.score_n(PI, n=5)


@pytest.mark.parametrize("gate", benchmark.GATES)
def test_up1_closed_form_equals_solver(gate):
    closed = R.up1(*PC_EULER[gate])
    numeric = R.up_n(*PC_EULER[gate], n=1, use_table=False)
    pool = [numeric.params] + [r.x for r in numeric.alternatives]
    assert min(_phase_gap(closed.params, p) for p in pool) < 1e-8


@pytest.mark.parametrize("key", sorted(tables.up12()))
def test_up_table_rows(key):
    gate, n = key
    sol = R.up1(*PC_EULER[gate]) if n == 1 else R.up_n(*PC_EULER[gate], n=n)
    assert _phase_gap(sol.params, tables.up12()[key][1]) < PRINT_TOL
    u = evaluate(sol.sequence)
    assert np.allclose(u.as_array(), benchmark.benchmark_gates()[gate].as_array(), atol=1e-9)
    assert np.max(np.abs(_eps_derivs(sol.sequence, n)[1:])) < 1e-7


def test_up2_symmetric_pin():
    sol = R.up_n(*PC_EULER["H"], n=2)
    assert _phase_gap(sol.params[1], sol.params[2]) < 1e-9


@given(st.floats(0.1, 6.0), st.floats(0.2, 2.9), st.floats(0.1, 6.0))
@settings(max_examples=15)
def test_up1_is_first_order_for_random_targets(a, b, c):
    sol = R.up1(a, b, c)
    derivs = _eps_derivs(sol.sequence, 1)
    assert same_up_to_sign(derivs[0], pc_target(a, b, c).as_array(), 1e-9)
    assert np.max(np.abs(derivs[1])) < 1e-8


@pytest.mark.parametrize("n", range(1, 6))
def test_uz_and_suz_phases(n):
    assert _phase_gap(R.uz_phases(n), tables.uzn()[n]) < PRINT_TOL
    assert _phase_gap(R.suz_phases(n), tables.suzn()[n]) < PRINT_TOL
    a, b, c = 0.4, 1.3, 2.2
    for seq in (R.uz_n(a, b, c, n), R.suz_n(a, b, c, n)):
        d = series.derivatives(seq.tuples(), "eps", n)
        assert same_up_to_sign(d[0], zc_target(a, b, c).as_array(), 1e-10)
        assert np.max(np.abs(d[1:])) < 1e-7


def test_suz1_closed_form():
    assert np.allclose(np.array(R.suz_phases(1)) / PI, [1 / 3, 5 / 3], atol=1e-12)


@given(st.floats(0.01 * PI, 2 * PI))
def test_ra1_is_robust_to_amplitude(theta):
    seq = R.ra1(theta, 0.2)
    d = _eps_derivs(seq, 1)
    assert same_up_to_sign(d[0], global_pulse(theta, 0.2).as_array(), 1e-12)
    assert np.max(np.abs(d[1])) < 1e-10
    assert rep_ok(R.ra1_prefix, theta, 0.2, "delta")


def rep_ok(builder, theta, phi, kind):
    # the prefix is identity-like in detuning: derivative of prefix vanishes
    seq = builder(theta, phi)
    d = series.derivatives(seq.tuples(), kind, 1)
    return np.max(np.abs(d[1])) < 1e-9


@pytest.mark.parametrize("theta", sorted(tables.ra2()))
def test_ra2_rows_satisfy_constraints(theta):
    sol = R.ra2(theta * PI)
    assert np.max(np.abs(R.ra2_constraints(sol.params, theta * PI))) < 1e-9
    assert np.max(np.abs(np.array(sol.params) - tables.ra2()[theta])) < PRINT_TOL
    d = _eps_derivs(sol.sequence, 2)
    assert np.max(np.abs(d[1:])) < 1e-7


@given(st.floats(0.05 * PI, 2 * PI), st.floats(-0.05, 0.05))
def test_rz1_is_stark_robust(theta, es):
    seq = R.rz1(theta)
    assert overlap_with(seq, Z(theta)) == pytest.approx(1.0, abs=1e-12)
    d = series.derivatives(seq.tuples(), "eps_s", 1)
    assert np.max(np.abs(d[1])) < 1e-9


@pytest.mark.parametrize("order,n_insert", [(1, 2), (2, 4)])
@pytest.mark.parametrize("flip", [False, True])
def test_theorem1_construction(order, n_insert, flip):
    rng = np.random.default_rng(7)
    theta, phi = 0.8 * PI, 0.3
    half = R.solve_trs_half(theta, phi, order, n_insert, rng)
    half.validate()
    a, b, c = 0.5, 1.1, 2.0
    seq = R.theorem1_construct(half, a, b, c, phase_flip=flip)
    half_pulse = global_pulse(theta / 2, phi)
    other = global_pulse(theta / 2, phi + (PI if flip else 0.0))
    expect = Z(a) @ half_pulse @ Z(b) @ other @ Z(c)
    d = series.derivatives(seq.tuples(), "eps", order)
    assert same_up_to_sign(d[0], expect.as_array(), 1e-9)
    assert np.max(np.abs(d[1:])) < 1e-7


def test_trs_half_validation_failures():
    bad = R.TrsHalfSequence([Global(PI / 3, 0.0)], 2 * PI / 3 + 0.1, 0.0, 0)
    with pytest.raises(ValueError, match="mirror"):
        bad.validate()
    plain = R.TrsHalfSequence([Global(PI / 2, 0.0)], PI, 0.0, 1)
    with pytest.raises(ValueError, match="robust"):
        plain.validate()
    with pytest.raises(TypeError):
        R.TrsHalfSequence(["x"], PI, 0.0, 1)


@pytest.mark.parametrize("theta", [PI / 4, PI / 2, PI, 1.5 * PI])
def test_rep_check(theta):
    assert R.rep_check(R.score1, theta, 0.4, "eps").passed
    assert not R.rep_check(bb1, theta, 0.4, "eps").passed
    assert R.rep_check(lambda t, p: PulseSequence(ControlScheme.PC, [Global(t, p)]),
                       theta, 0.4, "delta").deviation < 1e-12


def test_concatenate_requires_rep():
    outer = R.up1(*PC_EULER["H"]).sequence
    with pytest.raises(ValueError, match="REP"):
        R.concatenate(outer, bb1)
    seq = R.concatenate(outer)
    assert overlap_with(seq, evaluate(outer)) == pytest.approx(1.0, abs=1e-12)
    d = series.derivatives(seq.tuples(), "delta", 1)
    assert np.max(np.abs(d[1])) < 1e-7
    assert np.max(np.abs(_eps_derivs(seq, 1)[1])) < 1e-7


def test_sr1_in_ra1_is_doubly_robust():
    seq = R.sr1_in_ra1(0.7 * PI)
    for axis in ("eps", "delta"):
        assert np.max(np.abs(series.derivatives(seq.tuples(), axis, 1)[1])) < 1e-9


def test_solution_residual_gate():
    seq = R.score1(PI)
    with pytest.raises(ValueError, match="gate"):
        R.RobustFamilySolution(R.Family.SCORE, 1, (0.0,), None, 1.0, 0.0, seq)


def test_solver_error_when_nothing_converges():
    with pytest.raises(SolverError):
        R._pick([], "nothing")
    assert R._pick([Root((1.0,), 0.0, 0.0, 0.0, 0)], "x")[1] == ()
