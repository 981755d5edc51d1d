import math

import numpy as np
import pytest

from robustpulse import benchmark as B, tables
from robustpulse.analysis import avg_gate_fidelity
from robustpulse.sequences import ControlScheme, TARGET, benchmark_gates, overlap_with

PI = math.pi
ROWS = [(s, l) for s, l, _, _ in tables.pulcomp()]
# T disagreements that are analysed in the decisions ledger
KNOWN_T_MISMATCH = {("PC", "SCORBUTUS*"): 14.11, ("ZC", "Basic"): 13.5, ("ZC", "SCORBUTUS*"): 21.61}


@pytest.mark.parametrize("scheme,label", ROWS)
def test_bookkeeping_row(scheme, label):
    row = B.bookkeeping_row(scheme, label)
    assert row.k_ok, (row.k, row.printed_k)
    if (scheme, label) in KNOWN_T_MISMATCH:
        assert not row.T_ok
        assert row.T == pytest.approx(KNOWN_T_MISMATCH[(scheme, label)], abs=0.01)
    else:
        assert row.T_ok, (row.T, row.printed_T)


@pytest.mark.parametrize("scheme,label", ROWS)
def test_every_benchmark_sequence_is_exact(scheme, label):
    euler = B.benchmark_euler(scheme)
    for gate in B.GATES:
        seq = B.build(scheme, label, gate)
        assert seq.scheme is ControlScheme(scheme) and seq.label == label
        tol = 1e-8 if label.startswith("nU") else 1e-10
        assert overlap_with(seq, TARGET[ControlScheme(scheme)](*euler[gate])) > 1 - tol


def test_pc_representatives_are_exact_gates():
    gates = benchmark_gates()
    for gate, abg in B.benchmark_euler("PC").items():
        assert np.allclose(TARGET[ControlScheme.PC](*abg).as_array(), gates[gate].as_array(), atol=1e-12)


def test_competitors():
    comps = B.suite("PC")
    assert [c.label for c in comps] == list(B.PC_SUITE)
    flags = {c.label: c.introduced for c in comps}
    assert flags["UP1"] and flags["SR1inUP1"] and not flags["BB1"] and not flags["Basic"]
    basic = comps[0]
    assert basic.duration() == pytest.approx(max(
        B.duration_T(s) * PI for s, _ in basic.sequences))
    for seq, target in basic.sequences:
        assert avg_gate_fidelity(seq, target) == pytest.approx(1.0)


def test_z_slowdown_changes_only_zc_durations():
    assert B.bookkeeping_row("ZC", "Basic", 1.0).T == pytest.approx(3.5)
    assert B.bookkeeping_row("AC", "Basic", 1.0).T == B.bookkeeping_row("AC", "Basic").T
