"""
Benchmark bookkeeping and competitor suites.

Every named sequence is realized for the four benchmark gates (H, Z(pi/4),
Y(pi/2), X(pi/2)) of its control scheme.  Conventions:

* ``k`` counts physical pulses of the sequence built for generic nonzero
  Euler angles;
* ``T`` is the longest duration over the four gates in units of pi, with
  local Z angles weighted by the slowdown factor, after zero-area pulses
  are dropped and neighbours merged;
* a ``*`` label means every pulse of the basic sequence is replaced by the
  named composite pulse.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

from . import numsearch, robust, tables
from .analysis import Competitor
from .sequences import (BASIC, BENCHMARK_ANGLES, DEFAULT_Z_SLOWDOWN, REFERENCE_SEQUENCES, TARGET,
                        ControlScheme, PulseSequence, benchmark_gates, drop_zero_area,
                        exact_pc_euler, replace_globals, replace_z, simplify, stats)

PI = math.pi
GATES = ("H", "Z(pi/4)", "Y(pi/2)", "X(pi/2)")
# nonzero, distinct and tabulated for SCOREn so no random solve is needed
GENERIC_EULER = (PI / 4, PI / 2, PI)
T_TOL = 0.05


def _score2(theta: float, phi: float) -> PulseSequence:
    return robust.score_n(theta, phi, 2, branch="table").sequence


INNER = {
    "SCROFULOUS": REFERENCE_SEQUENCES["SCROFULOUS"],
    "BB1": REFERENCE_SEQUENCES["BB1"],
    "CORPSE": REFERENCE_SEQUENCES["CORPSE"],
    "sCORPSE": REFERENCE_SEQUENCES["sCORPSE"],
    "SCORBUTUS": REFERENCE_SEQUENCES["SCORBUTUS"],
    "SCORE1": robust.score1,
    "SCORE2": _score2,
    "RA1": robust.ra1,
    "SR1inRA1": robust.sr1_in_ra1,
}


def _replaced(scheme: ControlScheme, inner: Callable, label: str) -> Callable:
    def build(euler):
        basic = drop_zero_area(BASIC[scheme](*euler))
        return replace_globals(basic, inner, label=label)
    return build


def _numeric(name: str) -> Callable:
    def build(euler, gate=None):
        problem = numsearch.preset_problem(name, gate or "H", seeds=0)
        thetas = numsearch.printed_thetas(name, gate) if gate else (1.0,) * problem.n_slots
        return numsearch.to_sequence(problem, thetas)
    build.numeric = True
    return build


def _rz1_star(euler):
    # the pi/2 pulses framing each RZ1 meet the basic pi/2 pulses: merge them
    basic = drop_zero_area(BASIC[ControlScheme.ZC](*euler))
    return simplify(replace_z(basic, robust.rz1, label="RZ1*"))


def _builders() -> dict:
    pc, zc, ac = ControlScheme.PC, ControlScheme.ZC, ControlScheme.AC
    b = {
        (pc, "Basic"): lambda e: BASIC[pc](*e),
        (pc, "UP1"): lambda e: robust.up1(*e).sequence,
        (pc, "UP2"): lambda e: robust.up_n(*e, n=2).sequence,
        (pc, "SR1inUP1"): lambda e: robust.sr1_in_up1(*e),
        (zc, "Basic"): lambda e: BASIC[zc](*e),
        (zc, "UZ1"): lambda e: robust.uz_n(*e, 1),
        (zc, "UZ2"): lambda e: robust.uz_n(*e, 2),
        (zc, "sUZ1"): lambda e: robust.suz_n(*e, 1),
        (zc, "sUZ2"): lambda e: robust.suz_n(*e, 2),
        (zc, "SR1inUZ1"): lambda e: robust.sr1_in_uz1(*e),
        (zc, "RZ1*"): _rz1_star,
        (ac, "Basic"): lambda e: BASIC[ac](*e),
    }
    replacements = {
        pc: ["SCROFULOUS", "BB1", "SCORE1*", "SCORE2*", "CORPSE", "sCORPSE*", "SCORBUTUS*"],
        zc: ["SCROFULOUS", "BB1", "SCORE1*", "SCORE2*", "CORPSE*", "sCORPSE*", "SCORBUTUS*"],
        ac: ["RA1*", "SCORE1*", "SCORE2*", "CORPSE*", "sCORPSE*", "SR1inRA1*"],
    }
    for scheme, labels in replacements.items():
        for label in labels:
            b[(scheme, label)] = _replaced(scheme, INNER[label.rstrip("*")], label)
    for name, preset in numsearch.PRESETS.items():
        b[(preset.scheme, name)] = _numeric(name)
    return b


BUILDERS = _builders()
INTRODUCED = {"UP1", "UP2", "SR1inUP1", "SCORE1*", "SCORE2*", "UZ1", "UZ2", "sUZ1", "sUZ2",
              "SR1inUZ1", "RZ1*", "RA1*", "SR1inRA1*"} | set(numsearch.PRESETS)


def benchmark_euler(scheme: ControlScheme) -> dict:
    """Euler triples (radians) per gate.

    Phase-control triples are the representatives whose product equals the
    gate exactly (see :func:`sequences.exact_pc_euler`); the tabulated UP
    phases are solutions for these, and every phase-control competitor uses
    the same convention.
    """
    scheme = ControlScheme(scheme)
    out = {g: tuple(v * PI for v in BENCHMARK_ANGLES[scheme][g]) for g in GATES}
    if scheme is ControlScheme.PC:
        gates = benchmark_gates()
        out = {g: exact_pc_euler(*abg, gates[g]) for g, abg in out.items()}
    return out


def build(scheme, label: str, gate: str) -> PulseSequence:
    """The named sequence for one benchmark gate."""
    scheme = ControlScheme(scheme)
    builder = BUILDERS[(scheme, label)]
    euler = benchmark_euler(scheme)[gate]
    seq = builder(euler, gate) if getattr(builder, "numeric", False) else builder(euler)
    return seq.relabel(label)


@dataclass(frozen=True)
class BookkeepingRow:
    scheme: ControlScheme
    label: str
    k: int
    T: float
    per_gate_T: dict
    printed_k: int | None = None
    printed_T: float | None = None

    @property
    def k_ok(self) -> bool:
        return self.printed_k is None or self.k == self.printed_k

    @property
    def T_ok(self) -> bool:
        return self.printed_T is None or abs(self.T - self.printed_T) <= T_TOL


def template_k(scheme, label: str) -> int:
    builder = BUILDERS[(ControlScheme(scheme), label)]
    seq = builder(GENERIC_EULER) if not getattr(builder, "numeric", False) else builder(None)
    return len(seq)


def duration_T(seq: PulseSequence, z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> float:
    """Duration in units of pi after dropping zero-area pulses and merging neighbours."""
    return stats(simplify(drop_zero_area(seq)), z_slowdown).duration / PI


@functools.lru_cache(maxsize=None)
def bookkeeping_row(scheme, label: str, z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> BookkeepingRow:
    scheme = ControlScheme(scheme)
    per = {g: duration_T(build(scheme, label, g), z_slowdown) for g in GATES}
    printed = {(s, l): (k, t) for s, l, k, t in tables.pulcomp()}
    pk, pt = printed.get((scheme.value, label), (None, None))
    return BookkeepingRow(scheme, label, template_k(scheme, label), max(per.values()), per, pk, pt)


def bookkeeping_table(z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> list:
    """All rows of the printed table, recomputed."""
    return [bookkeeping_row(s, l, z_slowdown) for s, l, _, _ in tables.pulcomp()]


def competitor(scheme, label: str) -> Competitor:
    scheme = ControlScheme(scheme)
    euler = benchmark_euler(scheme)
    seqs = tuple((build(scheme, label, g), TARGET[scheme](*euler[g])) for g in GATES)
    return Competitor(label, seqs, label in INTRODUCED)


PC_SUITE = ("Basic", "UP1", "UP2", "SCROFULOUS", "BB1", "SCORE1*", "SCORE2*", "CORPSE",
            "sCORPSE*", "SR1inUP1", "SCORBUTUS*")


def suite(scheme) -> list:
    """Every tabulated sequence of ``scheme`` as a phase-diagram competitor."""
    scheme = ControlScheme(scheme)
    labels = PC_SUITE if scheme is ControlScheme.PC else [
        l for s, l, _, _ in tables.pulcomp() if s == scheme.value]
    return [competitor(scheme, l) for l in labels]
