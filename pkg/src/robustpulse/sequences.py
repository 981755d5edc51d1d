"""
Pulse-sequence data model, basic sequences, Euler decompositions and the
literature reference sequences.

Sequences are written left to right in operator-product order: the leftmost
element acts last.  A global pulse ``Global(theta, phi)`` is the rotation
``[theta]_phi = exp(-i theta/2 (cos phi sx + sin phi sy))``; a ``LocalZ`` is a
site-local ``Z(angle)`` rotation.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq, least_squares

from . import series
from .su2 import (ZERO_ERROR, ErrorParams, Su2, X, Y, Z, compose, qmul,
                  pulse_quats, trace_overlap, zrot_quats)

TWO_PI = 2.0 * math.pi
MAX_AREA = 3.0 * math.pi
# areas this close to zero are dropped by ``drop_zero_area``
_ZERO_AREA = 1e-12
EULER_DEGENERACY_TOL = 1e-9
DEFAULT_Z_SLOWDOWN = 5.0


class ControlScheme(str, enum.Enum):
    """Which local parameter is individually tunable."""

    PC = "PC"
    AC = "AC"
    ZC = "ZC"


def wrap_phase(phi: float) -> float:
    """Map a phase to ``[0, 2 pi)``."""
    out = math.fmod(phi, TWO_PI)
    if out < 0:
        out += TWO_PI
    # fmod of a value just below 2 pi can round up to it
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class Global:
    """Global pulse ``[theta]_phi`` with ``0 <= theta <= 3 pi``."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("pulse area and phase must be finite")
        if self.theta < 0:
            raise ValueError(f"pulse area {self.theta!r} is negative; use Global.signed")
        if self.theta > MAX_AREA * (1 + 1e-12):
            raise ValueError(f"pulse area {self.theta / math.pi:.6g} pi exceeds 3 pi")
        object.__setattr__(self, "phi", wrap_phase(self.phi))

    @classmethod
    def signed(cls, theta: float, phi: float) -> "Global":
        """Accept a negative area by flipping the phase by pi."""
        if theta < 0:
            return cls(-theta, phi + math.pi)
        return cls(theta, phi)

    def as_tuple(self) -> tuple:
        return ("G", self.theta, self.phi)


@dataclass(frozen=True)
class LocalZ:
    """Site-local rotation ``Z(angle)``; subject to the Stark error only."""

    angle: float

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise ValueError("Z angle must be finite")

    def as_tuple(self) -> tuple:
        return ("Z", self.angle, 0.0)


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulse list under one control scheme."""

    scheme: ControlScheme
    elements: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scheme", ControlScheme(self.scheme))
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            if not isinstance(e, (Global, LocalZ)):
                raise TypeError(f"not a pulse element: {e!r}")
            if isinstance(e, LocalZ) and self.scheme is not ControlScheme.ZC:
                raise ValueError(f"LocalZ elements need ZC, not {self.scheme.value}")

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def tuples(self) -> list:
        """``(kind, theta, phi)`` triples for the series engine."""
        return [e.as_tuple() for e in self.elements]

    def then(self, other: "PulseSequence", label: str | None = None) -> "PulseSequence":
        """Operator product ``self @ other`` (``other`` acts first)."""
        scheme = self.scheme if self.scheme == other.scheme else ControlScheme.ZC
        return PulseSequence(scheme, self.elements + other.elements,
                             self.label if label is None else label)

    def relabel(self, label: str) -> "PulseSequence":
        return PulseSequence(self.scheme, self.elements, label)

    def with_scheme(self, scheme: ControlScheme) -> "PulseSequence":
        return PulseSequence(scheme, self.elements, self.label)


@dataclass(frozen=True)
class SequenceStats:
    """Pulse count, global area in units of pi, and duration in units of 1/Omega."""

    k: int
    T: float
    duration: float


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(seq: PulseSequence, err: ErrorParams = ZERO_ERROR) -> Su2:
    """Unitary of ``seq`` under the quasistatic error ``err``."""
    q = evaluate_batch(seq, err.epsilon, err.delta, err.epsilon_s)
    return Su2.from_array(q)


def evaluate_batch(seq: PulseSequence, epsilon=0.0, delta=0.0, epsilon_s=0.0) -> np.ndarray:
    """Vectorised evaluation; error arguments broadcast, result shape ``(..., 4)``."""
    epsilon, delta, epsilon_s = np.broadcast_arrays(
        np.asarray(epsilon, float), np.asarray(delta, float), np.asarray(epsilon_s, float))
    out = np.zeros(epsilon.shape + (4,))
    out[..., 0] = 1.0
    for e in seq.elements:
        if isinstance(e, Global):
            p = pulse_quats(e.theta, e.phi, epsilon, delta)
        else:
            p = zrot_quats(e.angle, epsilon_s)
        out = qmul(out, p)
    return out


def stats(seq: PulseSequence, z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> SequenceStats:
    """Pulse count, global area (units of pi) and wall-clock duration.

    Every element counts one pulse.  Duration is ``sum(theta) + z_slowdown *
    sum(|angle|)`` in units of ``1/Omega``.
    """
    area = sum(e.theta for e in seq.elements if isinstance(e, Global))
    zsum = sum(abs(e.angle) for e in seq.elements if isinstance(e, LocalZ))
    return SequenceStats(len(seq.elements), area / math.pi, area + z_slowdown * zsum)


def parallel_duration(seqs: Iterable[PulseSequence], z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> float:
    """Duration of an ensemble run in parallel: the longest member sets the clock."""
    durations = [stats(s, z_slowdown).duration for s in seqs]
    if not durations:
        raise ValueError("empty ensemble")
    return max(durations)


# ---------------------------------------------------------------------------
# Euler angles
# ---------------------------------------------------------------------------

class EulerConvention(str, enum.Enum):
    ZYZ = "ZYZ"
    XYX = "XYX"


@dataclass(frozen=True)
class EulerTarget:
    """Target unitary ``R(alpha) Y(beta) R(gamma)`` with ``R`` = Z or X."""

    alpha: float
    beta: float
    gamma: float
    convention: EulerConvention = EulerConvention.ZYZ

    def __post_init__(self):
        object.__setattr__(self, "convention", EulerConvention(self.convention))

    def unitary(self) -> Su2:
        outer = Z if self.convention is EulerConvention.ZYZ else X
        return compose(outer(self.alpha), compose(Y(self.beta), outer(self.gamma)))

    def in_pi(self) -> tuple:
        return (self.alpha / math.pi, self.beta / math.pi, self.gamma / math.pi)


def euler_zyz(u: Su2) -> EulerTarget:
    """ZYZ angles with ``beta`` in ``[0, pi]`` and ``alpha, gamma`` in ``[0, 2 pi)``.

    For ``beta`` within 1e-9 of 0 or pi the decomposition is degenerate and
    ``gamma = 0`` is returned.
    """
    w, x, y, z = u.w, u.x, u.y, u.z
    # Z(a)Y(b)Z(c) = (cb cos s, -sb sin d, sb cos d, cb sin s) with s=(a+c)/2, d=(a-c)/2
    beta = 2.0 * math.atan2(math.hypot(x, y), math.hypot(w, z))
    total = 2.0 * math.atan2(z, w)
    diff = 2.0 * math.atan2(-x, y)
    if beta < EULER_DEGENERACY_TOL:
        return EulerTarget(wrap_phase(total), 0.0, 0.0)
    if beta > math.pi - EULER_DEGENERACY_TOL:
        return EulerTarget(wrap_phase(diff), math.pi, 0.0)
    return EulerTarget(wrap_phase(0.5 * (total + diff)), beta, wrap_phase(0.5 * (total - diff)))


def euler_xyx(u: Su2) -> EulerTarget:
    """XYX angles, obtained by the proper rotation taking the x axis to z."""
    t = euler_zyz(Su2(u.w, -u.z, u.y, u.x))
    return EulerTarget(t.alpha, t.beta, t.gamma, EulerConvention.XYX)


# ---------------------------------------------------------------------------
# basic sequences
# ---------------------------------------------------------------------------

def basic_pc(alpha: float, beta: float, gamma: float) -> PulseSequence:
    """``[pi/2]_a [pi]_((g+a-b)/2) [pi/2]_g``, equal to ``Z(a) Y(b) Z(2 pi - g)``."""
    return PulseSequence(ControlScheme.PC, (
        Global(math.pi / 2, alpha),
        Global(math.pi, 0.5 * (gamma + alpha - beta)),
        Global(math.pi / 2, gamma),
    ), "basic")


def basic_zc(alpha: float, beta: float, gamma: float) -> PulseSequence:
    """``Z(a) [pi/2]_pi Z(b) [pi/2]_0 Z(g)``, equal to ``Z(a) Y(b) Z(g)``."""
    return PulseSequence(ControlScheme.ZC, (
        LocalZ(alpha), Global(math.pi / 2, math.pi), LocalZ(beta),
        Global(math.pi / 2, 0.0), LocalZ(gamma),
    ), "basic")


def basic_ac(alpha: float, beta: float, gamma: float) -> PulseSequence:
    """``[a]_0 [b]_(pi/2) [g]_0``, equal to ``X(a) Y(b) X(g)``."""
    for v in (alpha, beta, gamma):
        if not 0 <= v < MAX_AREA:
            raise ValueError("amplitude-control angles must lie in [0, 3 pi)")
    return PulseSequence(ControlScheme.AC, (
        Global(alpha, 0.0), Global(beta, math.pi / 2), Global(gamma, 0.0),
    ), "basic")


def pc_target(alpha: float, beta: float, gamma: float) -> Su2:
    """Unitary implemented by ``basic_pc(alpha, beta, gamma)``."""
    return compose(Z(alpha), compose(Y(beta), Z(TWO_PI - gamma)))


def zc_target(alpha: float, beta: float, gamma: float) -> Su2:
    return EulerTarget(alpha, beta, gamma).unitary()


def ac_target(alpha: float, beta: float, gamma: float) -> Su2:
    return EulerTarget(alpha, beta, gamma, EulerConvention.XYX).unitary()


BASIC = {ControlScheme.PC: basic_pc, ControlScheme.ZC: basic_zc, ControlScheme.AC: basic_ac}
TARGET = {ControlScheme.PC: pc_target, ControlScheme.ZC: zc_target, ControlScheme.AC: ac_target}

# Euler triples (units of pi) of the four benchmark gates H, Z(pi/4), Y(pi/2), X(pi/2)
BENCHMARK_ANGLES = {
    ControlScheme.PC: {"H": (0, 0.5, 1), "Z(pi/4)": (0.25, 0, 0),
                       "Y(pi/2)": (0, 0.5, 0), "X(pi/2)": (1.5, 0.5, 1.5)},
    ControlScheme.ZC: {"H": (0, 0.5, 1), "Z(pi/4)": (0.125, 0, 0.125),
                       "Y(pi/2)": (0, 0.5, 0), "X(pi/2)": (1.5, 0.5, 0.5)},
    ControlScheme.AC: {"H": (1, 0.5, 0), "Z(pi/4)": (0.5, 0.25, 1.5),
                       "Y(pi/2)": (0, 0.5, 0), "X(pi/2)": (0.25, 0, 0.25)},
}


def benchmark_gates() -> dict:
    """The four benchmark gates as exact unitaries (up to global phase)."""
    h = Su2(0.0, math.sqrt(0.5), 0.0, math.sqrt(0.5))
    return {"H": h, "Z(pi/4)": Z(math.pi / 4), "Y(pi/2)": Y(math.pi / 2), "X(pi/2)": X(math.pi / 2)}


def exact_pc_euler(alpha: float, beta: float, gamma: float, gate: Su2) -> tuple:
    """Representative of a phase-control Euler triple that equals ``gate`` exactly.

    ``pc_target`` is defined on real angles, and moving ``gamma`` by 2 pi
    flips its sign.  Sequences built from the angles (their central phase is
    ``(gamma + alpha - beta) / 2``) therefore differ between the two
    representatives; this picks the one whose product is ``+gate``.
    """
    if pc_target(alpha, beta, gamma).as_array() @ gate.as_array() < 0:
        return alpha, beta, gamma + TWO_PI
    return alpha, beta, gamma


def benchmark_targets(scheme: ControlScheme) -> dict:
    """Benchmark Euler triples in radians for ``scheme``."""
    scheme = ControlScheme(scheme)
    return {k: tuple(v * math.pi for v in abg) for k, abg in BENCHMARK_ANGLES[scheme].items()}


# ---------------------------------------------------------------------------
# sequence surgery
# ---------------------------------------------------------------------------

def drop_zero_area(seq: PulseSequence, tol: float = _ZERO_AREA) -> PulseSequence:
    """Remove pulses and Z rotations of (numerically) zero angle."""
    keep = [e for e in seq.elements
            if not (isinstance(e, Global) and e.theta <= tol)
            and not (isinstance(e, LocalZ) and abs(e.angle) <= tol)]
    return PulseSequence(seq.scheme, keep, seq.label)


def replace_globals(seq: PulseSequence, factory: Callable[[float, float], PulseSequence],
                    keep: Callable[[Global], bool] = lambda g: False,
                    label: str | None = None) -> PulseSequence:
    """Substitute ``factory(theta, phi)`` for every global pulse not kept."""
    out = []
    for e in seq.elements:
        if isinstance(e, Global) and not keep(e):
            out.extend(factory(e.theta, e.phi).elements)
        else:
            out.append(e)
    return PulseSequence(seq.scheme, out, seq.label if label is None else label)


def replace_z(seq: PulseSequence, factory: Callable[[float], PulseSequence],
              label: str | None = None) -> PulseSequence:
    """Substitute ``factory(angle)`` for every local Z rotation."""
    out = []
    for e in seq.elements:
        if isinstance(e, LocalZ):
            out.extend(factory(e.angle).elements)
        else:
            out.append(e)
    return PulseSequence(seq.scheme, out, seq.label if label is None else label)


def _same_phase(a: float, b: float, tol: float = 1e-12) -> bool:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d) < tol


def simplify(seq: PulseSequence) -> PulseSequence:
    """Merge neighbours that a pulse programmer would merge.

    Adjacent Z rotations add; adjacent globals with equal phase add (when the
    sum stays within 3 pi); equal-area globals with opposite phases cancel.
    Each rule is exact in the presence of amplitude, detuning and Stark
    errors.
    """
    out: list = []
    for e in seq.elements:
        prev = out[-1] if out else None
        if isinstance(e, LocalZ) and isinstance(prev, LocalZ):
            out[-1] = LocalZ(prev.angle + e.angle)
        elif isinstance(e, Global) and isinstance(prev, Global):
            if _same_phase(prev.phi, e.phi) and prev.theta + e.theta <= MAX_AREA:
                out[-1] = Global(prev.theta + e.theta, prev.phi)
            elif _same_phase(prev.phi, e.phi + math.pi) and abs(prev.theta - e.theta) < 1e-12:
                out.pop()
            else:
                out.append(e)
        else:
            out.append(e)
    return PulseSequence(seq.scheme, out, seq.label)


# ---------------------------------------------------------------------------
# reference sequences from the composite-pulse literature
# ---------------------------------------------------------------------------

def _check_angle(theta: float) -> None:
    if not 0 < theta < TWO_PI:
        raise ValueError(f"target angle {theta!r} outside (0, 2 pi)")


def bb1(theta: float, phi: float = 0.0) -> PulseSequence:
    """Wimperis BB1: ``[theta]_0 [pi]_f [2pi]_3f [pi]_f`` with ``f = acos(-theta / 4 pi)``."""
    _check_angle(theta)
    f = math.acos(-theta / (4 * math.pi))
    return PulseSequence(ControlScheme.PC, (
        Global(theta, phi), Global(math.pi, phi + f),
        Global(TWO_PI, phi + 3 * f), Global(math.pi, phi + f)), "BB1")


def _corpse(theta: float, phi: float, n1: int, label: str) -> PulseSequence:
    _check_angle(theta)
    k = math.asin(math.sin(theta / 2) / 2)
    return PulseSequence(ControlScheme.PC, (
        Global(TWO_PI * n1 + theta / 2 - k, phi),
        Global(TWO_PI - 2 * k, phi + math.pi),
        Global(theta / 2 - k, phi)), label)


def corpse(theta: float, phi: float = 0.0) -> PulseSequence:
    """Cummins-Jones CORPSE (first-order detuning compensation)."""
    return _corpse(theta, phi, 1, "CORPSE")


def short_corpse(theta: float, phi: float = 0.0) -> PulseSequence:
    """Short CORPSE: the minimal-area CORPSE member (``n1 = 0``)."""
    return _corpse(theta, phi, 0, "sCORPSE")


# sinc(x) on (0, 4.4934) covers [-0.2172, 1); its minimum sits at tan x = x
_SINC_MIN_X = 4.493409457909064


def _argsinc(v: float) -> float:
    f = lambda x: math.sin(x) / x - v
    if v > 0:
        return brentq(f, 1e-12, math.pi, xtol=1e-15)
    return brentq(f, math.pi, _SINC_MIN_X, xtol=1e-15)


def scrofulous(theta: float, phi: float = 0.0) -> PulseSequence:
    """Cummins-Llewellyn-Jones SCROFULOUS (first-order amplitude compensation)."""
    _check_angle(theta)
    v = 2 * math.cos(theta / 2) / math.pi
    if v <= math.sin(_SINC_MIN_X) / _SINC_MIN_X:
        raise ValueError(f"SCROFULOUS has no solution for theta = {theta / math.pi:.6g} pi")
    t1 = math.pi if v == 0.0 else _argsinc(v)
    a1 = -math.pi * math.cos(t1) / (2 * t1 * math.sin(theta / 2))
    a2 = -math.pi / (2 * t1)
    if abs(a1) > 1 or abs(a2) > 1:
        raise ValueError(f"SCROFULOUS has no solution for theta = {theta / math.pi:.6g} pi")
    p1 = math.acos(a1)
    p2 = p1 - math.acos(a2)
    return PulseSequence(ControlScheme.PC, (
        Global(t1, phi + p1), Global(math.pi, phi + p2), Global(t1, phi + p1)), "SCROFULOUS")


def _scorbutus_residual(v, theta):
    b, c, p1, p2, p3 = v
    els = [("G", math.pi, p1), ("G", b, p2), ("G", c, p3), ("G", b, p2), ("G", math.pi, p1)]
    target = np.array([math.cos(theta / 2), math.sin(theta / 2), 0.0, 0.0])
    out = []
    for axis in ("eps", "delta"):
        coeffs = series.sequence_series(els, axis, 1)
        if axis == "eps":
            sign = 1.0 if coeffs[0] @ target >= 0 else -1.0
            out.append(coeffs[0] - sign * target)
        out.append(coeffs[1])
    return np.concatenate(out)


# the theta = pi member of the branch: [pi]_(pi/3) [pi/2]_(2pi/3) [2pi]_(5pi/3) ...
_SCORBUTUS_ANCHOR = (math.pi, np.array([0.5, 2.0, 1 / 3, 2 / 3, 5 / 3]) * math.pi)


@functools.lru_cache(maxsize=256)
def _scorbutus_params(theta: float) -> tuple:
    """Continue the palindromic solution from theta = pi to ``theta``."""
    t0, x = _SCORBUTUS_ANCHOR
    steps = max(1, int(math.ceil(abs(theta - t0) / (0.05 * math.pi))))
    lo = [0.0, 0.0, -np.inf, -np.inf, -np.inf]
    hi = [MAX_AREA, MAX_AREA, np.inf, np.inf, np.inf]
    for t in np.linspace(t0, theta, steps + 1)[1:] if theta != t0 else [t0]:
        sol = least_squares(_scorbutus_residual, x, args=(t,), bounds=(lo, hi),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
        x = sol.x
    if np.max(np.abs(_scorbutus_residual(x, theta))) > 1e-10:
        raise ValueError(f"SCORBUTUS continuation failed at theta = {theta / math.pi:.6g} pi")
    return tuple(float(v) for v in x)


def scorbutus(theta: float, phi: float = 0.0) -> PulseSequence:
    """Five-pulse palindrome compensating amplitude and detuning errors to first order.

    ``[pi]_p1 [b]_p2 [c]_p3 [b]_p2 [pi]_p1`` with ``(b, c, p1, p2, p3)`` solved
    numerically, continued from the closed-form member at ``theta = pi``.
    """
    _check_angle(theta)
    b, c, p1, p2, p3 = _scorbutus_params(float(theta))
    return PulseSequence(ControlScheme.PC, (
        Global(math.pi, phi + p1), Global(b, phi + p2), Global(c, phi + p3),
        Global(b, phi + p2), Global(math.pi, phi + p1)), "SCORBUTUS")


REFERENCE_SEQUENCES = {
    "BB1": bb1, "CORPSE": corpse, "sCORPSE": short_corpse,
    "SCROFULOUS": scrofulous, "SCORBUTUS": scorbutus,
}


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

class SequenceParseError(ValueError):
    """Malformed sequence file; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def dumps(seq: PulseSequence) -> str:
    """Serialise to the line format (angles in units of pi, 17 significant digits)."""
    lines = [f"scheme: {seq.scheme.value}"]
    if seq.label:
        lines.append(f"# label: {seq.label}")
    for e in seq.elements:
        if isinstance(e, Global):
            lines.append(f"G {e.theta / math.pi:.17g} {e.phi / math.pi:.17g}")
        else:
            lines.append(f"Z {e.angle / math.pi:.17g}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> PulseSequence:
    """Parse the line format written by :func:`dumps`."""
    scheme = None
    label = ""
    elements = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            if line[1:].strip().startswith("label:"):
                label = line[1:].strip()[len("label:"):].strip()
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("scheme:"):
            value = line.split(":", 1)[1].strip().upper()
            try:
                scheme = ControlScheme(value)
            except ValueError:
                raise SequenceParseError(lineno, f"unknown scheme {value!r}") from None
            continue
        parts = line.split()
        try:
            nums = [float(p) * math.pi for p in parts[1:]]
        except ValueError:
            raise SequenceParseError(lineno, f"non-numeric angle in {line!r}") from None
        try:
            if parts[0] == "G" and len(nums) == 2:
                elements.append(Global(*nums))
            elif parts[0] == "Z" and len(nums) == 1:
                elements.append(LocalZ(nums[0]))
            else:
                raise SequenceParseError(lineno, f"expected 'G theta phi' or 'Z angle', got {line!r}")
        except ValueError as exc:
            if isinstance(exc, SequenceParseError):
                raise
            raise SequenceParseError(lineno, str(exc)) from None
    if scheme is None:
        raise SequenceParseError(1, "missing 'scheme:' header")
    try:
        return PulseSequence(scheme, elements, label)
    except ValueError as exc:
        raise SequenceParseError(1, str(exc)) from None


def read_sequence(path) -> PulseSequence:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def overlap_with(seq: PulseSequence, target: Su2, err: ErrorParams = ZERO_ERROR) -> float:
    return trace_overlap(evaluate(seq, err), target)
