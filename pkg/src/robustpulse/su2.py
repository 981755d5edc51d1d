"""
Exact SU(2) algebra on unit quaternions.

A quaternion ``(w, x, y, z)`` stands for the SU(2) element

    U = w*1 - i*(x*sx + y*sy + z*sz)

so that a rotation by angle ``t`` about the unit axis ``n`` is
``(cos(t/2), sin(t/2)*n)``.  Products follow operator order: ``compose(a, b)``
is ``a @ b``, i.e. ``b`` acts first.

Besides the scalar :class:`Su2` value type, this module exposes array-level
kernels (``qmul``, ``pulse_quats``, ``zrot_quats``) that the sequence
evaluator and the numerical search use on stacks of quaternions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Su2",
    "ErrorParams",
    "ZERO_ERROR",
    "IDENTITY",
    "compose",
    "global_pulse",
    "z_pulse",
    "trace_overlap",
    "infidelity",
    "X",
    "Y",
    "Z",
    "qmul",
    "pulse_quats",
    "zrot_quats",
]

# drift above this is renormalized; above the hard limit it is a logic error
_RENORM_DRIFT = 1e-14
_HARD_DRIFT = 1e-6


class NormError(ArithmeticError):
    """Raised when a quaternion is far from unit norm."""


@dataclass(frozen=True)
class ErrorParams:
    """Quasistatic error triple.

    Attributes
    ----------
    epsilon : float
        Fractional Rabi amplitude error; every global pulse area becomes
        ``theta * (1 + epsilon)``.
    delta : float
        Off-resonance fraction ``Delta / Omega``; tilts the rotation axis
        of every global pulse toward z.
    epsilon_s : float
        Fractional error on local Z (Stark) rotation angles.
    """

    epsilon: float = 0.0
    delta: float = 0.0
    epsilon_s: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "delta", "epsilon_s"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def is_zero(self) -> bool:
        return self.epsilon == 0.0 and self.delta == 0.0 and self.epsilon_s == 0.0

    def scaled(self, factor: float) -> "ErrorParams":
        return ErrorParams(self.epsilon * factor, self.delta * factor,
                           self.epsilon_s * factor)

    def negated(self, eps: bool = True, delta: bool = True,
                eps_s: bool = True) -> "ErrorParams":
        return ErrorParams(-self.epsilon if eps else self.epsilon,
                           -self.delta if delta else self.delta,
                           -self.epsilon_s if eps_s else self.epsilon_s)


ZERO_ERROR = ErrorParams()


@dataclass(frozen=True)
class Su2:
    """Unit quaternion ``(w, x, y, z)`` for ``w*1 - i(x sx + y sy + z sz)``."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
        if abs(n2 - 1.0) > _HARD_DRIFT:
            raise NormError(f"quaternion norm^2 {n2!r} is not 1")

    @classmethod
    def from_array(cls, q) -> "Su2":
        q = np.asarray(q, dtype=float)
        return cls(*_renormalized(q))

    @classmethod
    def from_matrix(cls, m) -> "Su2":
        """Build from a 2x2 SU(2) matrix."""
        m = np.asarray(m, dtype=complex)
        w = 0.5 * (m[0, 0] + m[1, 1]).real
        z = -0.5 * (m[0, 0] - m[1, 1]).imag
        x = -0.5 * (m[0, 1] + m[1, 0]).imag
        y = 0.5 * (m[1, 0] - m[0, 1]).real
        return cls.from_array([w, x, y, z])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def matrix(self) -> np.ndarray:
        """2x2 complex matrix of the group element."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([[w - 1j * z, -y - 1j * x],
                         [y - 1j * x, w + 1j * z]])

    def inverse(self) -> "Su2":
        return Su2(self.w, -self.x, -self.y, -self.z)

    def __neg__(self) -> "Su2":
        return Su2(-self.w, -self.x, -self.y, -self.z)

    def __matmul__(self, other: "Su2") -> "Su2":
        return compose(self, other)

    @property
    def angle(self) -> float:
        """Rotation angle in [0, 2*pi]."""
        return 2.0 * math.atan2(math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2), self.w)


IDENTITY = Su2(1.0, 0.0, 0.0, 0.0)


def _renormalized(q: np.ndarray) -> tuple:
    n2 = float(q @ q)
    drift = abs(n2 - 1.0)
    if drift > _HARD_DRIFT:
        raise NormError(f"quaternion norm^2 {n2!r} is not 1")
    if drift > _RENORM_DRIFT:
        q = q / math.sqrt(n2)
    return tuple(float(v) for v in q)


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------

def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product on the last axis; broadcasts over leading axes."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def pulse_quats(theta, phi, epsilon=0.0, delta=0.0) -> np.ndarray:
    """Quaternions of ``exp(-i theta(1+eps)/2 (s_phi + delta sz))``.

    All arguments broadcast against each other.
    """
    theta, phi, epsilon, delta = np.broadcast_arrays(
        np.asarray(theta, float), np.asarray(phi, float),
        np.asarray(epsilon, float), np.asarray(delta, float))
    half = 0.5 * theta * (1.0 + epsilon)
    root = np.sqrt(1.0 + delta * delta)
    s = np.sin(half * root) / root
    return np.stack([np.cos(half * root), s * np.cos(phi), s * np.sin(phi), s * delta], axis=-1)


def zrot_quats(angle, epsilon_s=0.0) -> np.ndarray:
    """Quaternions of ``Z(angle * (1 + epsilon_s))``."""
    angle, epsilon_s = np.broadcast_arrays(np.asarray(angle, float), np.asarray(epsilon_s, float))
    half = 0.5 * angle * (1.0 + epsilon_s)
    zero = np.zeros_like(half)
    return np.stack([np.cos(half), zero, zero, np.sin(half)], axis=-1)


# ---------------------------------------------------------------------------
# scalar API
# ---------------------------------------------------------------------------

def compose(a: Su2, b: Su2) -> Su2:
    """Group product ``a @ b`` (``b`` applied first), renormalized."""
    q = (a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
         a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
         a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
         a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w)
    return Su2(*_renormalized(np.array(q)))


def global_pulse(theta: float, phi: float, err: ErrorParams = ZERO_ERROR) -> Su2:
    """Erroneous global pulse ``[theta]_phi`` under amplitude and detuning error.

    The rotation angle is ``theta (1+eps) sqrt(1+delta^2)`` about the axis
    ``(cos phi, sin phi, delta) / sqrt(1+delta^2)``.  ``err.epsilon_s`` is
    ignored.
    """
    return Su2(*(float(v) for v in pulse_quats(theta, phi, err.epsilon, err.delta)))


def z_pulse(angle: float, err: ErrorParams = ZERO_ERROR) -> Su2:
    """Local rotation ``Z(angle (1 + eps_s))``; amplitude and detuning are ignored."""
    half = 0.5 * angle * (1.0 + err.epsilon_s)
    return Su2(math.cos(half), 0.0, 0.0, math.sin(half))


def X(angle: float) -> Su2:
    return Su2(math.cos(angle / 2), math.sin(angle / 2), 0.0, 0.0)


def Y(angle: float) -> Su2:
    return Su2(math.cos(angle / 2), 0.0, math.sin(angle / 2), 0.0)


def Z(angle: float) -> Su2:
    return Su2(math.cos(angle / 2), 0.0, 0.0, math.sin(angle / 2))


def trace_overlap(u: Su2, v: Su2) -> float:
    """``|Tr(u^dag v)| / 2``, the sign-insensitive overlap in [0, 1]."""
    return min(1.0, abs(u.w * v.w + u.x * v.x + u.y * v.y + u.z * v.z))


def infidelity(u, v) -> float:
    """``1 - trace_overlap(u, v)**2`` computed without cancellation.

    Uses the Lagrange identity ``|u|^2 |v|^2 - (u.v)^2 = sum_{i<j} (u_i v_j -
    u_j v_i)^2`` so values far below machine epsilon stay accurate.
    """
    a = u.as_array() if isinstance(u, Su2) else np.asarray(u, float)
    b = v.as_array() if isinstance(v, Su2) else np.asarray(v, float)
    outer = np.multiply.outer(a, b)
    minors = outer - outer.T
    return float(0.5 * np.sum(minors * minors))
