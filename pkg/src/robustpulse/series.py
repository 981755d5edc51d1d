"""
Truncated Taylor series of pulse products in a single error parameter.

An error *direction* ``(a, b, c)`` sets ``epsilon = a*t``, ``delta = b*t`` and
``epsilon_s = c*t`` for a scalar ``t``.  Each pulse is ``exp(G(t))`` with
``G`` polynomial in ``t``; its series is read off the first block row of
``expm`` of the block upper-triangular Toeplitz matrix built from the
coefficients of ``G`` (truncated polynomials in ``t`` form an algebra and
``expm`` respects it).  Products of series are Cauchy products.

The coefficients returned are exact to rounding, which is what the robust
family solvers need: order-4 and order-5 conditions are far below what any
finite-difference stencil resolves.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

# Pauli matrices times -i: the quaternion units
_UNITS = np.array([
    [[0, -1j], [-1j, 0]],
    [[0, -1], [1, 0]],
    [[-1j, 0], [0, 1j]],
], dtype=complex)

DIRECTIONS = {
    "eps": (1.0, 0.0, 0.0),
    "delta": (0.0, 1.0, 0.0),
    "eps_s": (0.0, 0.0, 1.0),
    "diagonal": (1.0, 1.0, 0.0),
}


def direction_vector(axis) -> tuple:
    if isinstance(axis, str):
        try:
            return DIRECTIONS[axis]
        except KeyError:
            raise ValueError(f"unknown error axis {axis!r}; expected one of {sorted(DIRECTIONS)}")
    a = tuple(float(v) for v in axis)
    if len(a) != 3:
        raise ValueError("error direction needs three components (eps, delta, eps_s)")
    return a


def _generators(elements, direction):
    """Polynomial coefficients (degree <= 2) of the pulse generators.

    Returns an array of shape ``(n_pulses, 3, 3)``: pulse, power of ``t``,
    vector component; the pulse is ``exp(-i g(t) . sigma)``.
    """
    a, b, c = direction
    out = np.zeros((len(elements), 3, 3))
    for k, (kind, theta, phi) in enumerate(elements):
        h = 0.5 * theta
        if kind == "G":
            cp, sp = math.cos(phi), math.sin(phi)
            out[k, 0] = (h * cp, h * sp, 0.0)
            out[k, 1] = (h * a * cp, h * a * sp, h * b)
            out[k, 2] = (0.0, 0.0, h * a * b)
        else:
            out[k, 0] = (0.0, 0.0, h)
            out[k, 1] = (0.0, 0.0, h * c)
    return out


def sequence_blocks(elements, direction, order: int) -> np.ndarray:
    """Block-Toeplitz exponentials of every pulse, shape ``(n, 2m, 2m)``."""
    m = order + 1
    gens = _generators(elements, direction)
    mats = np.einsum("pkv,vij->pkij", gens, _UNITS)  # (n, 3, 2, 2)
    big = np.zeros((len(elements), 2 * m, 2 * m), dtype=complex)
    for power in range(3):
        for i in range(m - power):
            j = i + power
            big[:, 2 * i:2 * i + 2, 2 * j:2 * j + 2] = mats[:, power]
    return expm(big)


def _matrix_to_quat(mat: np.ndarray) -> np.ndarray:
    return np.stack([mat[..., 0, 0].real, -mat[..., 0, 1].imag,
                     -mat[..., 0, 1].real, -mat[..., 0, 0].imag], axis=-1)


def sequence_series(elements, direction, order: int) -> np.ndarray:
    """Taylor coefficients of the sequence product, shape ``(order+1, 4)``.

    ``elements`` is a list of ``(kind, theta, phi)`` with ``kind`` in
    ``{"G", "Z"}`` (``phi`` ignored for ``Z``), leftmost applied last.
    """
    if not elements:
        out = np.zeros((order + 1, 4))
        out[0, 0] = 1.0
        return out
    blocks = sequence_blocks(elements, direction_vector(direction), order)
    total = blocks[0]
    for blk in blocks[1:]:
        total = total @ blk
    return _matrix_to_quat(total[0:2, :].reshape(2, order + 1, 2).transpose(1, 0, 2))


def derivatives(elements, direction, order: int) -> np.ndarray:
    """Derivatives ``d^m U / dt^m`` at ``t = 0`` for ``m = 0..order``."""
    coeffs = sequence_series(elements, direction, order)
    facts = np.array([math.factorial(m) for m in range(order + 1)], dtype=float)
    return coeffs * facts[:, None]
