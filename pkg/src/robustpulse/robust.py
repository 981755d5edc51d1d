"""
Analytic robust families, their numerical solvers, the time-reversal
construction and the concatenation engine.

Families
--------
SCOREn   detuning-robust ``[theta]_phi`` from nested switchback pulses
UP1/UPn  amplitude-robust phase-control unitaries with inserted 2 pi pulses
UZn/sUZn amplitude-robust Z-control unitaries (target-independent phases)
RA1/RA2  amplitude-robust rotations with fixed phases (amplitude control)
RZ1      Stark-robust local Z rotation

All solvers share :func:`robustpulse.solve.find_roots`; residuals come from
exact Taylor coefficients (:mod:`robustpulse.series`).
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import series, tables
from .sequences import (ControlScheme, EulerTarget, Global, LocalZ, PulseSequence,
                        benchmark_gates, evaluate, pc_target, wrap_phase, zc_target)
from .solve import (ROOT_TOL, Root, SolverError, derivative_residual,
                    find_roots, next_order_residual, project_to_roots,
                    random_seeds)
from .su2 import ErrorParams, global_pulse, trace_overlap

PI = math.pi
TWO_PI = 2.0 * PI
MAX_AREA = 3.0 * PI
N_RANDOM = 64
TABLE_TOL = 1e-4 * PI
REP_STEPS = (1e-3, 5e-4)
REP_TOL = 1e-7
# derivative magnitude accepted when certifying a claimed order of a half sequence
ORDER_TOL = 1e-7

__all__ = [
    "Family", "RobustFamilySolution", "SolverError", "TrsHalfSequence", "RepResult",
    "score1", "score1_angle", "score_sequence", "score_n",
    "up_sequence", "up1", "up1_candidates", "up1_equations", "up_n",
    "uz_sequence", "suz_sequence", "uz_phases", "suz_phases", "uz_n", "suz_n", "solve_uz_phases",
    "ra1", "ra1_prefix", "ra1_angle", "ra2", "ra2_sequence", "ra2_constraints", "rz1",
    "theorem1_construct", "solve_trs_half",
    "concatenate", "sr1_in_up1", "sr1_in_uz1", "sr1_in_ra1", "rep_check",
]


class Family(str, enum.Enum):
    SCORE = "SCORE"
    UP = "UP"
    UZ = "UZ"
    SUZ = "SUZ"
    RA = "RA"
    RZ = "RZ"


@dataclass(frozen=True)
class RobustFamilySolution:
    """Solved parameters of one family instance.

    Attributes
    ----------
    params : tuple
        Solved auxiliary angles or phases in radians.
    residual : float
        Largest component of the solved conditions at ``params``.
    next_residual : float
        Largest component of the first uncontrolled derivative, used to rank
        competing roots.
    alternatives : tuple of Root
        The other converged roots, best first.
    """

    family: Family
    order: int
    params: tuple
    target: object
    residual: float
    next_residual: float
    sequence: PulseSequence
    alternatives: tuple = ()

    def __post_init__(self):
        if not self.residual < ROOT_TOL:
            raise ValueError(f"residual {self.residual:.3e} above the {ROOT_TOL:g} gate")

    def params_in_pi(self) -> tuple:
        return tuple(p / PI for p in self.params)


def _check_theta(theta: float, upper_inclusive: bool = False) -> None:
    ok = 0 < theta <= TWO_PI if upper_inclusive else 0 < theta < TWO_PI
    if not ok:
        raise ValueError(f"rotation angle {theta / PI:.6g} pi outside the admissible range")


def _check_order(n: int, allowed: range) -> None:
    if n not in allowed:
        raise ValueError(f"order {n} not in {allowed.start}..{allowed.stop - 1}")


def _pulse_q(theta: float, phi: float) -> np.ndarray:
    return global_pulse(theta, phi).as_array()


def _seed_list(table_seed, n_random: int, dim: int, lo: float, hi: float, seed: int) -> list:
    seeds = [] if table_seed is None else [np.asarray(table_seed, float)]
    if n_random:
        seeds.extend(random_seeds(n_random, dim, lo, hi, seed))
    return seeds


def _pick(roots: list, what: str) -> tuple:
    if not roots:
        raise SolverError(f"{what}: no seed converged below {ROOT_TOL:g}")
    return roots[0], tuple(roots[1:])


# ---------------------------------------------------------------------------
# SCOREn
# ---------------------------------------------------------------------------

def _split_signed(theta: float, phi: float) -> list:
    """``[theta]_phi`` as equal same-phase pieces of at most 3 pi each.

    Pulses about the same axis compose exactly under amplitude and detuning
    error, so the split changes the pulse count only.
    """
    pieces = max(1, math.ceil(abs(theta) / MAX_AREA - 1e-12))
    return [Global.signed(theta / pieces, phi)] * pieces


def score1_angle(theta: float) -> float:
    return PI - theta / 2 - math.asin(0.5 * math.sin(theta / 2))


def _score_elements(theta: float, phi: float, varthetas) -> list:
    n = len(varthetas)
    left = [("G", float(v), phi + PI if (n - k) % 2 == 0 else phi)
            for k, v in enumerate(varthetas, start=1)]
    big = theta + sum((-1) ** (n - k) * 2 * v for k, v in enumerate(varthetas, start=1))
    return left + [("G", big, phi)] + left[::-1]


def score_sequence(theta: float, phi: float, varthetas) -> PulseSequence:
    """Nested switchback sequence for given auxiliary angles.

    Pulse ``k`` (counted from the outside) has phase ``phi + pi`` when
    ``n - k`` is even, and the centre pulse has area
    ``theta + sum_k (-1)**(n-k) 2 vartheta_k`` (a negative area flips its phase;
    an area above 3 pi is emitted as equal same-phase pieces).
    """
    els = _score_elements(theta, phi, varthetas)
    out = []
    for _, t, p in els:
        out.extend(_split_signed(t, p))
    return PulseSequence(ControlScheme.PC, out, f"SCORE{len(varthetas)}")


def score1(theta: float, phi: float = 0.0) -> PulseSequence:
    """``[v]_(phi+pi) [theta+2v]_phi [v]_(phi+pi)`` with ``v = pi - theta/2 - asin(sin(theta/2)/2)``."""
    _check_theta(theta)
    return score_sequence(theta, phi, [score1_angle(theta)])


def _score_problem(theta: float, n: int):
    target = _pulse_q(theta, 0.0)

    def residual(x):
        return derivative_residual(_score_elements(theta, 0.0, x), target, "delta", n)

    def nxt(x):
        return next_order_residual(_score_elements(theta, 0.0, x), "delta", n)

    def area(x):
        return float(sum(abs(t) for _, t, _ in _score_elements(theta, 0.0, x)))

    return residual, nxt, area


def _score_continuation(theta: float, n: int, residual_at, step: float = 0.05 * PI):
    """Follow the tabulated branch from the nearest tabulated angle to ``theta``."""
    rows = {th: v for (th, order), v in tables.scoren().items() if order == n}
    start = min(rows, key=lambda th: abs(th * PI - theta))
    x = np.array(rows[start], float)
    steps = max(1, math.ceil(abs(theta - start * PI) / step))
    bounds = ([0.0] * n, [MAX_AREA] * n)
    for t in np.linspace(start * PI, theta, steps + 1):
        roots = find_roots(lambda v: residual_at(v, t), [x], bounds=bounds)
        if not roots:
            return None
        x = np.array(roots[0].x)
    return x


def score_n(theta: float, phi: float = 0.0, n: int = 1, *, use_table: bool = True,
            branch: str = "residual", n_random: int = N_RANDOM,
            seed: int = 0) -> RobustFamilySolution:
    """Solve the order-``n`` switchback sequence for ``[theta]_phi``.

    When ``theta`` is tabulated (and ``use_table``) the table row is polished
    first; otherwise, or if that fails, ``n_random`` uniform seeds on
    ``[0, 3 pi]`` are added and the root with the smallest order-``n+1``
    residual wins (``branch="residual"``).  With ``branch="table"`` the
    tabulated branch is instead followed by continuation in ``theta`` from
    the nearest tabulated angle; these are the sequences the bookkeeping
    table was compiled from.  A centre area above 3 pi is split (see
    :func:`score_sequence`).
    """
    _check_theta(theta)
    _check_order(n, range(1, 5))
    if branch not in ("residual", "table"):
        raise ValueError("branch must be 'residual' or 'table'")
    residual, nxt, area = _score_problem(theta, n)
    table_seed = None
    if n == 1:
        table_seed = [score1_angle(theta)]
    if use_table:
        key = tables.lookup_theta({k[0]: None for k in tables.scoren()}, theta)
        if key is not None:
            table_seed = tables.scoren()[(key, n)]
        elif branch == "table":
            x = _score_continuation(theta, n, lambda v, t: _score_problem(t, n)[0](v))
            if x is not None:
                table_seed = x
    bounds = ([0.0] * n, [MAX_AREA] * n)
    roots: list = []
    if table_seed is not None and (use_table or n == 1):
        roots = find_roots(residual, [table_seed], bounds=bounds, next_residual=nxt, area=area)
    if not roots:
        seeds = _seed_list(table_seed, n_random, n, 0.0, MAX_AREA, seed)
        roots = find_roots(residual, seeds, bounds=bounds, next_residual=nxt, area=area)
    best, alts = _pick(roots, f"SCORE{n} at theta={theta / PI:.6g} pi")
    return RobustFamilySolution(Family.SCORE, n, best.x, (theta, phi), best.residual,
                                best.next_residual, score_sequence(theta, phi, best.x), alts)


# ---------------------------------------------------------------------------
# UP1 / UPn
# ---------------------------------------------------------------------------

def _up_elements(alpha, beta, gamma, phases) -> list:
    n = len(phases) // 2
    return ([("G", PI / 2, alpha)] + [("G", TWO_PI, p) for p in phases[:n]]
            + [("G", PI, 0.5 * (gamma + alpha - beta))]
            + [("G", TWO_PI, p) for p in phases[n:]] + [("G", PI / 2, gamma)])


def up_sequence(alpha: float, beta: float, gamma: float, phases) -> PulseSequence:
    """Basic phase-control sequence with ``len(phases) / 2`` 2 pi pulses on each side of the pi pulse."""
    n = len(phases) // 2
    return PulseSequence(ControlScheme.PC, [Global(t, p) for _, t, p in
                                            _up_elements(alpha, beta, gamma, phases)], f"UP{n}")


def up1_equations(alpha: float, beta: float, gamma: float, phi1: float, phi2: float) -> np.ndarray:
    """Residual of the two trigonometric first-order conditions for UP1."""
    t1 = -phi1 - beta / 2 + alpha
    t2 = phi2 + beta / 2 - gamma
    return np.array([
        math.sin(t1) + math.sin(t2) + 0.5 * math.sin((alpha - gamma) / 2),
        math.cos(t1) + math.cos(t2) + 0.5 * (math.cos(beta / 2) + math.cos((alpha - gamma) / 2)),
    ])


def up1_candidates(alpha: float, beta: float, gamma: float) -> list:
    """Closed-form ``(phi1, phi2)`` pairs: both orderings of the tangent roots.

    For ``alpha = gamma`` the two ``+-`` branches of the symmetric solution
    are returned instead.
    """
    a = math.sin((alpha - gamma) / 2)
    b = math.cos(beta / 2)
    c = math.cos((alpha - gamma) / 2)
    if abs(a) < 1e-12:
        base = -beta / 2 + gamma
        r = math.acos(-0.5 * math.cos(beta / 4) ** 2)
        return [(wrap_phase(base + r), wrap_phase(base + r)),
                (wrap_phase(base - r), wrap_phase(base - r))]
    s = b + c
    denom = a * a + s * (s - 4)
    root = math.sqrt(max(0.0, (a * a + s * s) * (16 - a * a - s * s)))
    if abs(denom) < 1e-14:
        return []
    tt = (-(4 * a + root) / denom, (-4 * a + root) / denom)
    out = []
    for t1, t2 in (tt, tt[::-1]):
        f1, f2 = 2 * math.atan(t1), 2 * math.atan(t2)
        out.append((wrap_phase(-f1 - beta / 2 + alpha), wrap_phase(f2 - beta / 2 + gamma)))
    return out


def _up_problem(alpha, beta, gamma, n, symmetric=False):
    target = pc_target(alpha, beta, gamma).as_array()

    def residual(x):
        r = derivative_residual(_up_elements(alpha, beta, gamma, x), target, "eps", n)
        if symmetric and n > 1:
            # the two 2 pi pulses next to the central pi pulse share a phase
            r = np.append(r, math.sin(0.5 * (x[n - 1] - x[n])))
        return r

    def nxt(x):
        return next_order_residual(_up_elements(alpha, beta, gamma, x), "eps", n)

    return residual, nxt, (lambda x: 0.0)


def _up_solution(alpha, beta, gamma, n, roots, what) -> RobustFamilySolution:
    best, alts = _pick(roots, what)
    return RobustFamilySolution(Family.UP, n, best.x, EulerTarget(alpha, beta, gamma),
                                best.residual, best.next_residual,
                                up_sequence(alpha, beta, gamma, best.x), alts)


def up1(alpha: float, beta: float, gamma: float) -> RobustFamilySolution:
    """Closed-form UP1 for the phase-control target ``Z(a) Y(b) Z(2 pi - g)``.

    Both symmetric closed-form solutions are checked against the exact
    first-order conditions; the one with the smaller second-order residual is
    returned and the other is kept in ``alternatives``.  Targets where the
    closed form degenerates fall back to the numerical solver.
    """
    residual, nxt, _ = _up_problem(alpha, beta, gamma, 1)
    roots = []
    for idx, cand in enumerate(up1_candidates(alpha, beta, gamma)):
        x = np.array(cand)
        res = float(np.max(np.abs(residual(x))))
        if res < ROOT_TOL and not any(np.allclose(x, r.x, atol=1e-9) for r in roots):
            roots.append(Root(cand, res, nxt(x), 0.0, idx))
    roots.sort(key=lambda r: (round(r.next_residual, 9), r.seed_index))
    if not roots:
        return up_n(alpha, beta, gamma, 1)
    return _up_solution(alpha, beta, gamma, 1, roots, "UP1")


def _up_table_seed(alpha, beta, gamma, n):
    """Printed phases when ``(alpha, beta, gamma)`` is the tabulated representative.

    The phases depend on the representative, not only on the gate: moving
    any Euler angle by 2 pi moves the central phase by pi.  Tabulated rows
    implement their gate exactly (not up to sign), so the seed is offered
    only when the requested triple does too.
    """
    u = pc_target(alpha, beta, gamma).as_array()
    gates = benchmark_gates()
    for (gate, order), (abg, phases) in tables.up12().items():
        if order != n:
            continue
        d = np.abs(np.array([alpha, beta, gamma]) - np.array(abg)) % TWO_PI
        if np.all(np.minimum(d, TWO_PI - d) < 1e-12) and np.allclose(u, gates[gate].as_array(), atol=1e-9):
            return phases
    return None


@functools.lru_cache(maxsize=256)
def _up_n_cached(alpha, beta, gamma, n, use_table, n_random, seed, symmetric):
    residual, nxt, _ = _up_problem(alpha, beta, gamma, n, symmetric)
    table_seed = _up_table_seed(alpha, beta, gamma, n) if use_table else None
    roots: list = []
    if table_seed is not None and not symmetric and n > 1:
        # nearest member of the root continuum: damped least squares would
        # slide along it
        x = project_to_roots(residual, table_seed)
        if x is not None:
            x = np.mod(x, TWO_PI)
            roots = [Root(tuple(float(v) for v in x), float(np.max(np.abs(residual(x)))),
                          nxt(x), 0.0, 0)]
    elif table_seed is not None:
        roots = find_roots(residual, [table_seed], periodic=True, next_residual=nxt)
    if not roots:
        seeds = _seed_list(table_seed, n_random, 2 * n, 0.0, TWO_PI, seed)
        roots = find_roots(residual, seeds, periodic=True, next_residual=nxt)
    return _up_solution(alpha, beta, gamma, n, roots, f"UP{n}")


def up_n(alpha: float, beta: float, gamma: float, n: int = 2, *, use_table: bool = True,
         n_random: int = N_RANDOM, seed: int = 0, symmetric: bool = True) -> RobustFamilySolution:
    """Numerically solved UPn (``2n`` inserted 2 pi pulses, phases unbounded).

    Seeds: the tabulated row when the target is a tabulated benchmark
    representative, then ``n_random`` uniform phases.  For ``n = 2`` the
    order conditions leave a one-parameter family of roots; ``symmetric``
    adds the condition that the two 2 pi pulses adjacent to the central pi
    pulse share a phase, which isolates the roots.  Without it the tabulated
    seed is projected onto the nearest member of the family.

    Note the central phase ``(gamma + alpha - beta) / 2`` depends on the
    representative of the Euler angles; see :func:`sequences.exact_pc_euler`.
    """
    _check_order(n, range(1, 3))
    return _up_n_cached(float(alpha), float(beta), float(gamma), int(n), bool(use_table),
                        int(n_random), int(seed), bool(symmetric))


# ---------------------------------------------------------------------------
# UZn / sUZn
# ---------------------------------------------------------------------------

def _uz_elements(alpha, beta, gamma, phases) -> list:
    return ([("Z", alpha, 0.0)] + [("G", TWO_PI, p + PI) for p in phases]
            + [("G", PI / 2, PI), ("Z", beta, 0.0), ("G", PI / 2, 0.0)]
            + [("G", TWO_PI, p) for p in reversed(phases)] + [("Z", gamma, 0.0)])


def _suz_elements(alpha, beta, gamma, phases) -> list:
    inner, last = list(phases[:-1]), phases[-1]
    return ([("Z", alpha, 0.0)] + [("G", PI, p + PI) for p in inner]
            + [("G", PI / 2, last + PI), ("Z", beta, 0.0), ("G", PI / 2, last)]
            + [("G", PI, p) for p in reversed(inner)] + [("Z", gamma, 0.0)])


def _to_sequence(els, scheme, label) -> PulseSequence:
    return PulseSequence(scheme, [LocalZ(t) if k == "Z" else Global(t, p) for k, t, p in els], label)


def uz_sequence(alpha, beta, gamma, phases) -> PulseSequence:
    return _to_sequence(_uz_elements(alpha, beta, gamma, phases), ControlScheme.ZC, f"UZ{len(phases)}")


def suz_sequence(alpha, beta, gamma, phases) -> PulseSequence:
    return _to_sequence(_suz_elements(alpha, beta, gamma, phases), ControlScheme.ZC,
                        f"sUZ{len(phases) - 1}")


# generic target used to pose the target-independent phase conditions
_UZ_PROBE = (0.3, 1.1, 0.7)


def _uz_problem(n: int, short: bool):
    build = _suz_elements if short else _uz_elements
    target = zc_target(*_UZ_PROBE).as_array()

    def residual(x):
        return derivative_residual(build(*_UZ_PROBE, x), target, "eps", n)

    def nxt(x):
        return next_order_residual(build(*_UZ_PROBE, x), "eps", n)

    return residual, nxt


@functools.lru_cache(maxsize=None)
def _polished_phases(n: int, short: bool) -> tuple:
    if n == 1:
        if short:
            return (PI / 3, 5 * PI / 3)
        return (math.acos(-0.25),)
    seed = (tables.suzn() if short else tables.uzn())[n]
    residual, nxt = _uz_problem(n, short)
    roots = find_roots(residual, [seed], periodic=True, next_residual=nxt)
    if not roots:
        raise SolverError(f"{'sUZ' if short else 'UZ'}{n}: table phases do not polish to a root")
    x = np.array(roots[0].x)
    d = np.abs(x - np.mod(seed, TWO_PI))
    if np.max(np.minimum(d, TWO_PI - d)) > TABLE_TOL:
        raise SolverError(f"{'sUZ' if short else 'UZ'}{n}: polished root left the table value")
    return tuple(float(v) for v in x)


def uz_phases(n: int) -> tuple:
    """Target-independent UZn phases (radians).

    ``n = 1`` is the closed form ``acos(-1/4)``; higher orders are the
    tabulated 4-decimal values polished to an exact root (the raw values
    leave an order-``n`` residual near 1e-4).
    """
    _check_order(n, range(1, 6))
    return _polished_phases(n, False)


def suz_phases(n: int) -> tuple:
    _check_order(n, range(1, 6))
    return _polished_phases(n, True)


def uz_n(alpha: float, beta: float, gamma: float, n: int = 1) -> PulseSequence:
    """Amplitude-robust ``Z(a) Y(b) Z(g)`` with ``n`` 2 pi pulses on each side."""
    return uz_sequence(alpha, beta, gamma, uz_phases(n))


def suz_n(alpha: float, beta: float, gamma: float, n: int = 1) -> PulseSequence:
    """Short variant of :func:`uz_n`: ``n`` pi pulses per side and a free pi/2 phase."""
    return suz_sequence(alpha, beta, gamma, suz_phases(n))


def solve_uz_phases(n: int, short: bool = False, *, n_random: int = N_RANDOM,
                    seed: int = 0, extra_seeds=()) -> list:
    """All distinct phase roots found from random seeds, best first."""
    _check_order(n, range(1, 6))
    residual, nxt = _uz_problem(n, short)
    dim = n + 1 if short else n
    seeds = list(extra_seeds) + list(random_seeds(n_random, dim, 0.0, TWO_PI, seed))
    return find_roots(residual, seeds, periodic=True, next_residual=nxt)


# ---------------------------------------------------------------------------
# RA1 / RA2 / RZ1
# ---------------------------------------------------------------------------

def ra1_angle(theta: float) -> float:
    return math.acos(-theta / TWO_PI)


def ra1_prefix(theta: float, phi: float = 0.0) -> PulseSequence:
    """The five pulses preceding ``[theta]_phi`` in RA1; detuning-robust on their own."""
    _check_theta(theta, upper_inclusive=True)
    v = ra1_angle(theta)
    q = phi + PI / 2
    return PulseSequence(ControlScheme.AC, (
        Global(v, q), Global(PI, phi), Global(2 * v, q), Global(PI, phi), Global(v, q)), "RA1-prefix")


def ra1(theta: float, phi: float = 0.0) -> PulseSequence:
    """``[v]_(phi+pi/2) [pi]_phi [2v]_(phi+pi/2) [pi]_phi [v]_(phi+pi/2) [theta]_phi``, ``v = acos(-theta / 2 pi)``."""
    pre = ra1_prefix(theta, phi)
    return PulseSequence(ControlScheme.AC, pre.elements + (Global(theta, phi),), "RA1")


def _ra2_areas(v) -> list:
    a, b, c = v
    return [a, a - b, c - b, 2 * c, c - b, a - b, a]


def _ra2_elements(theta, phi, v) -> list:
    out = []
    for i, area in enumerate(_ra2_areas(v)):
        out.append(("G", area, phi + PI / 2))
        if i < 6:
            out.append(("G", PI, phi))
    return out + [("G", theta, phi)]


def ra2_sequence(theta: float, phi: float, v) -> PulseSequence:
    """Second-order amplitude-robust rotation for auxiliary angles ``v``.

    Areas ``v1, v1-v2, v3-v2, 2 v3, v3-v2, v1-v2, v1`` about ``phi + pi/2``
    interleaved with six ``[pi]_phi`` and followed by ``[theta]_phi``;
    negative areas flip their phase.
    """
    return PulseSequence(ControlScheme.AC, [Global.signed(t, p) for _, t, p in
                                            _ra2_elements(theta, phi, v)], "RA2")


def ra2_constraints(v, theta: float) -> np.ndarray:
    """The three trigonometric conditions on ``(v1, v2, v3)``."""
    a, b, c = v
    sa, sb, sc = math.sin(a), math.sin(b), math.sin(c)
    ca, cb, cc = math.cos(a), math.cos(b), math.cos(c)
    return np.array([
        theta + TWO_PI * (ca + cb + cc),
        a * sa + b * sb + c * sc,
        ca * sa + cb * (2 * sa + sb) + cc * (2 * (sa + sb) + sc),
    ])


def ra2(theta: float, phi: float = 0.0, *, use_table: bool = True, n_random: int = N_RANDOM,
        seed: int = 0) -> RobustFamilySolution:
    """Solve the three RA2 conditions, then certify the built sequence to second order."""
    _check_theta(theta)
    target = _pulse_q(theta, 0.0)

    def seq_residual(x):
        return derivative_residual(_ra2_elements(theta, 0.0, x), target, "eps", 2)

    def nxt(x):
        return next_order_residual(_ra2_elements(theta, 0.0, x), "eps", 2)

    def area(x):
        areas = [abs(t) for t in _ra2_areas(x)]
        return sum(areas) + 6 * PI if max(areas) <= MAX_AREA else math.inf

    residual = lambda x: ra2_constraints(x, theta)
    bounds = ([0.0] * 3, [MAX_AREA] * 3)
    key = tables.lookup_theta(tables.ra2(), theta) if use_table else None
    table_seed = tables.ra2()[key] if key is not None else None
    roots: list = []
    if table_seed is not None:
        roots = find_roots(residual, [table_seed], bounds=bounds, next_residual=nxt, area=area)
    if not roots:
        seeds = _seed_list(table_seed, n_random, 3, 0.0, MAX_AREA, seed)
        roots = find_roots(residual, seeds, bounds=bounds, next_residual=nxt, area=area)
    # the conditions are necessary and sufficient for this form; confirm anyway
    roots = [r for r in roots if math.isfinite(r.area)
             and np.max(np.abs(seq_residual(np.array(r.x)))) < ROOT_TOL]
    best, alts = _pick(roots, f"RA2 at theta={theta / PI:.6g} pi")
    return RobustFamilySolution(Family.RA, 2, best.x, (theta, phi), best.residual,
                                best.next_residual, ra2_sequence(theta, phi, best.x), alts)


def rz1(theta: float) -> PulseSequence:
    """Stark-robust ``Z(theta)``: RA1 rotated into Z rotations framed by ``[pi/2]`` pulses."""
    _check_theta(theta, upper_inclusive=True)
    v = ra1_angle(theta)
    seq = [Global(PI / 2, PI), LocalZ(v), Global(PI / 2, 0.0), LocalZ(PI), Global(PI / 2, PI),
           LocalZ(2 * v), Global(PI / 2, 0.0), LocalZ(PI), Global(PI / 2, PI), LocalZ(v),
           Global(PI / 2, 0.0), LocalZ(theta)]
    return PulseSequence(ControlScheme.ZC, seq, "RZ1")


# ---------------------------------------------------------------------------
# time-reversal construction
# ---------------------------------------------------------------------------

def _mirror(half, flip: bool) -> list:
    shift = PI if flip else 0.0
    return [Global(g.theta, g.phi + shift) for g in reversed(half)]


@dataclass(frozen=True)
class TrsHalfSequence:
    """First half of a time-reversal symmetric composite pulse.

    ``half + reversed(half)`` should implement ``[claimed_theta]_claimed_phi``
    with amplitude error suppressed through ``claimed_order``.
    """

    half: tuple
    claimed_theta: float
    claimed_phi: float
    claimed_order: int

    def __post_init__(self):
        object.__setattr__(self, "half", tuple(self.half))
        if not all(isinstance(g, Global) for g in self.half):
            raise TypeError("a half sequence holds global pulses only")

    def full(self) -> PulseSequence:
        return PulseSequence(ControlScheme.PC, self.half + tuple(_mirror(self.half, False)), "TRS")

    def mirror_error(self) -> float:
        """``1 - overlap`` between the symmetric product and the claimed pulse."""
        u = evaluate(self.full())
        return 1.0 - trace_overlap(u, global_pulse(self.claimed_theta, self.claimed_phi))

    def order_residual(self) -> float:
        """Largest amplitude-error derivative of orders 1..claimed_order."""
        if self.claimed_order < 1:
            return 0.0
        d = series.derivatives(self.full().tuples(), "eps", self.claimed_order)
        return float(np.max(np.abs(d[1:])))

    def validate(self, tol: float = 1e-9) -> None:
        err = self.mirror_error()
        if err > tol:
            raise ValueError(f"half sequence fails the mirror identity (1 - overlap = {err:.3e})")
        res = self.order_residual()
        if res > ORDER_TOL:
            raise ValueError(f"half sequence is not robust to order {self.claimed_order} "
                             f"(derivative residual {res:.3e})")


def theorem1_construct(half: TrsHalfSequence, alpha: float, beta: float, gamma: float,
                       phase_flip: bool = False) -> PulseSequence:
    """``Z(a) half Z(b) mirror(half) Z(g)`` (Z-control).

    Implements ``Z(a) [theta/2]_phi Z(b) [theta/2]_phi' Z(g)`` with the
    half's amplitude robustness, where ``phi' = phi`` or, with
    ``phase_flip``, ``phi + pi`` (the mirrored half then has all phases
    shifted by pi, which is how the UZ and sUZ sequences are built).
    """
    half.validate()
    els = ([LocalZ(alpha)] + list(half.half) + [LocalZ(beta)]
           + _mirror(half.half, phase_flip) + [LocalZ(gamma)])
    return PulseSequence(ControlScheme.ZC, els, "TRS-Z")


def solve_trs_half(theta: float, phi: float, order: int, n_insert: int,
                   rng: np.random.Generator, attempts: int = 20) -> TrsHalfSequence:
    """Random half ``[2pi]_p1 ... [2pi]_pm [theta/2]_phi`` whose symmetric product is robust.

    Phases start from uniform random values and are solved by damped least
    squares; the first attempt that converges is returned.
    """
    target = _pulse_q(theta, phi)

    def els(x):
        half = [("G", TWO_PI, p) for p in x] + [("G", theta / 2, phi)]
        return half + half[::-1]

    residual = lambda x: derivative_residual(els(x), target, "eps", order)
    for _ in range(attempts):
        roots = find_roots(residual, [rng.uniform(0, TWO_PI, n_insert)], periodic=True)
        if roots:
            x = roots[0].x
            return TrsHalfSequence([Global(TWO_PI, p) for p in x] + [Global(theta / 2, phi)],
                                   theta, phi, order)
    raise SolverError(f"no robust half found for order {order} with {n_insert} insertions")


# ---------------------------------------------------------------------------
# REP check and concatenation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RepResult:
    passed: bool
    deviation: float


def _aligned(q: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return q if q @ ref >= 0 else -q


def rep_check(builder: Callable[[float, float], PulseSequence], theta: float, phi: float,
              error_kind: str = "eps", steps=REP_STEPS, tol: float = REP_TOL) -> RepResult:
    """Does the composite pulse share the bare pulse's first derivative in one error?

    Both derivatives are Richardson-extrapolated central differences with
    steps ``h`` and ``h/2``; the sign of the composite quaternion is aligned
    to the bare pulse before differencing.
    """
    if error_kind not in ("eps", "delta"):
        raise ValueError("error_kind must be 'eps' or 'delta'")
    seq = builder(theta, phi)
    ref0 = global_pulse(theta, phi).as_array()

    def err(z):
        return ErrorParams(epsilon=z) if error_kind == "eps" else ErrorParams(delta=z)

    def comp(z):
        return _aligned(evaluate(seq, err(z)).as_array(), ref0)

    def bare(z):
        return global_pulse(theta, phi, err(z)).as_array()

    def richardson(f):
        h1, h2 = steps
        d1 = (f(h1) - f(-h1)) / (2 * h1)
        d2 = (f(h2) - f(-h2)) / (2 * h2)
        r = (h1 / h2) ** 2
        return (r * d2 - d1) / (r - 1)

    dev = float(np.max(np.abs(richardson(comp) - richardson(bare))))
    return RepResult(dev < tol, dev)


def _is_two_pi(g: Global) -> bool:
    return abs(g.theta - TWO_PI) < 1e-12


def concatenate(outer: PulseSequence, inner: Callable[[float, float], PulseSequence] = score1,
                check_rep: bool = True, label: str | None = None) -> PulseSequence:
    """Replace every non-2pi global pulse of ``outer`` by ``inner(theta, phi)``.

    With ``check_rep`` the inner family must pass the amplitude REP check at
    every substituted ``(theta, phi)``, otherwise ``ValueError``.
    """
    out = []
    for e in outer.elements:
        if isinstance(e, Global) and not _is_two_pi(e):
            if check_rep:
                rep = rep_check(inner, e.theta, e.phi, "eps")
                if not rep.passed:
                    raise ValueError(f"inner pulse is not amplitude-REP at theta={e.theta / PI:.6g} pi "
                                     f"(deviation {rep.deviation:.3e})")
            out.extend(inner(e.theta, e.phi).elements)
        else:
            out.append(e)
    return PulseSequence(outer.scheme, out, label or f"SR1in{outer.label}")


def sr1_in_up1(alpha: float, beta: float, gamma: float) -> PulseSequence:
    return concatenate(up1(alpha, beta, gamma).sequence, label="SR1inUP1")


def sr1_in_uz1(alpha: float, beta: float, gamma: float) -> PulseSequence:
    return concatenate(uz_n(alpha, beta, gamma, 1), label="SR1inUZ1")


def sr1_in_ra1(theta: float, phi: float = 0.0) -> PulseSequence:
    """RA1 with its final ``[theta]_phi`` swapped for SCORE1 (the prefix is already detuning-robust)."""
    pre = ra1_prefix(theta, phi)
    return PulseSequence(ControlScheme.AC, pre.elements + score1(theta, phi).elements, "SR1inRA1")
