"""
Fidelity metrics, suppression-order certification and the phase-diagram sweep.

Average gate fidelity of a coherent error ``U`` followed by depolarizing
decay at rate ``gamma`` for the sequence duration ``t`` (qubit, d = 2):

    F = exp(-gamma t) (|Tr(V^dag U)|^2 + 2) / 6 + (1 - exp(-gamma t)) / 2

Durations use Omega = 1 units: global area plus ``z_slowdown`` times the
local Z angles.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .sequences import (DEFAULT_Z_SLOWDOWN, PulseSequence, evaluate, evaluate_batch,
                        parallel_duration, stats)
from .solve import make_rng
from .su2 import ZERO_ERROR, ErrorParams, Su2, infidelity, trace_overlap

AXES = {
    "eps": (1.0, 0.0, 0.0),
    "delta": (0.0, 1.0, 0.0),
    "eps_s": (0.0, 0.0, 1.0),
    "diagonal": (1.0, 1.0, 0.0),
}
ZETA_RANGE = (1e-3, 3e-2)
N_ZETA = 8
# the minors-based infidelity stays accurate to ~1e-26, so the floor only has
# to clear rounding noise, not the 1e-16 cancellation of 1 - overlap^2
INFIDELITY_FLOOR = 1e-20
SLOPE_WINDOW = 0.3
TIE_TOL = 1e-12


@dataclass(frozen=True)
class FidelityParams:
    """Decoherence rate (units of Omega) and the Z-rotation slowdown factor."""

    gamma: float = 0.0
    z_slowdown: float = DEFAULT_Z_SLOWDOWN

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be finite and non-negative")


def fidelity_from_overlap(overlap, duration, gamma: float):
    """Closed-form average fidelity from ``|Tr(V^dag U)| / 2``; broadcasts."""
    decay = np.exp(-gamma * np.asarray(duration, float))
    o2 = np.asarray(overlap, float) ** 2
    return decay * (4.0 * o2 + 2.0) / 6.0 + (1.0 - decay) / 2.0


def avg_gate_fidelity(seq: PulseSequence, target: Su2, err: ErrorParams = ZERO_ERROR,
                      fp: FidelityParams = FidelityParams(),
                      duration: float | None = None) -> float:
    """Haar-averaged gate fidelity of ``seq`` against ``target``.

    ``duration`` overrides the sequence's own duration, e.g. with the
    ensemble maximum when several sites run in parallel.
    """
    t = stats(seq, fp.z_slowdown).duration if duration is None else duration
    o = trace_overlap(evaluate(seq, err), target)
    return float(fidelity_from_overlap(o, t, fp.gamma))


def _random_states(rng: np.random.Generator, n: int) -> np.ndarray:
    # uniform on the Bloch sphere: azimuth and cos(polar) uniform
    phi = rng.uniform(0.0, 2 * math.pi, n)
    ct = rng.uniform(-1.0, 1.0, n)
    half = np.arccos(ct) / 2
    return np.stack([np.cos(half), np.exp(1j * phi) * np.sin(half)], axis=1)


def haar_mc_fidelity(seq: PulseSequence, target: Su2, err: ErrorParams = ZERO_ERROR,
                     fp: FidelityParams = FidelityParams(), samples: int = 100_000,
                     rng_seed: int = 0, duration: float | None = None) -> tuple:
    """Monte-Carlo state-averaged fidelity; returns ``(mean, standard_error)``.

    Each sampled pure state ``psi`` contributes
    ``exp(-gamma t) |<V psi|U psi>|^2 + (1 - exp(-gamma t)) / 2``.
    """
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    t = stats(seq, fp.z_slowdown).duration if duration is None else duration
    u = evaluate(seq, err).matrix()
    v = target.matrix()
    psi = _random_states(make_rng(rng_seed), samples)
    amp = np.einsum("ni,ij,nj->n", (v @ psi.T).T.conj(), u, psi)
    decay = math.exp(-fp.gamma * t)
    f = decay * np.abs(amp) ** 2 + (1 - decay) / 2
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# suppression order
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderFit:
    """Log-log fit of infidelity against error strength along one axis."""

    slope: float
    order: int | None
    zetas: tuple
    infidelities: tuple

    @property
    def certified(self) -> bool:
        return self.order is not None


def _axis(axis) -> tuple:
    if isinstance(axis, str):
        if axis not in AXES:
            raise ValueError(f"unknown axis {axis!r}; expected one of {sorted(AXES)}")
        return AXES[axis]
    return tuple(float(a) for a in axis)


def certify_slope(slope: float, window: float = SLOPE_WINDOW) -> int | None:
    """Order ``n`` with ``|slope - 2(n+1)| <= window``, else None."""
    n = round(slope / 2) - 1
    if n >= 0 and abs(slope - 2 * (n + 1)) <= window:
        return int(n)
    return None


def suppression_order(seq: PulseSequence, target: Su2, axis="eps",
                      zeta_range: tuple = ZETA_RANGE, n_points: int = N_ZETA,
                      window: float = SLOPE_WINDOW, floor: float = INFIDELITY_FLOOR,
                      max_shift: int = 32) -> OrderFit:
    """Fit ``log(1 - overlap^2)`` against ``log(zeta)`` along ``axis``.

    Points below ``floor`` are dropped.  While fewer than four survive, the
    whole window moves up by a factor 2**0.25 (at most ``max_shift`` times);
    keeping its width stops the survivors from reaching the large-zeta
    region where the next order bends the curve.
    """
    if infidelity(evaluate(seq), target) > 1e-10:
        raise ValueError("sequence is not exact at zero error; order is undefined")
    a, b, c = _axis(axis)
    lo, hi = zeta_range
    for _ in range(max_shift + 1):
        zetas = np.geomspace(lo, hi, n_points)
        q = evaluate_batch(seq, a * zetas, b * zetas, c * zetas)
        t = target.as_array()
        outer = q[:, :, None] * t[None, None, :]
        minors = outer - np.swapaxes(outer, 1, 2)
        inf = 0.5 * np.sum(minors * minors, axis=(1, 2))
        keep = inf >= floor
        if keep.sum() >= 4:
            break
        lo, hi = lo * 2 ** 0.25, hi * 2 ** 0.25
    if keep.sum() < 2:
        # exact to the floor everywhere we can look
        return OrderFit(math.inf, None, tuple(zetas), tuple(inf))
    slope = float(np.polyfit(np.log(zetas[keep]), np.log(inf[keep]), 1)[0])
    return OrderFit(slope, certify_slope(slope, window), tuple(zetas[keep]), tuple(inf[keep]))


def min_pulse_bound(n: int) -> int:
    """Pulse count needed to cancel errors through order ``n``: ``ceil(3(n+1)/2)``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    return -(-3 * (n + 1) // 2)


# ---------------------------------------------------------------------------
# phase diagram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Competitor:
    """One candidate implementation of a target ensemble.

    ``sequences`` pairs each site's sequence with its target; the ensemble
    runs in parallel so the longest member sets the duration.
    """

    label: str
    sequences: tuple
    introduced: bool = False

    def duration(self, z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> float:
        return parallel_duration([s for s, _ in self.sequences], z_slowdown)


@dataclass
class PhaseDiagram:
    eps: np.ndarray
    delta: np.ndarray
    gamma: float
    labels: tuple
    fidelity: np.ndarray  # (competitor, eps, delta)
    winner: np.ndarray  # (eps, delta) competitor index
    introduced: tuple = field(default=())

    def winner_label(self, i: int, j: int) -> str:
        return self.labels[self.winner[i, j]]

    def best(self) -> np.ndarray:
        return np.take_along_axis(self.fidelity, self.winner[None], axis=0)[0]

    def win_counts(self) -> dict:
        counts = np.bincount(self.winner.ravel(), minlength=len(self.labels))
        return {lab: int(c) for lab, c in zip(self.labels, counts)}

    def introduced_fraction(self) -> float:
        flags = np.array(self.introduced, bool)
        return float(flags[self.winner].mean()) if flags.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "delta", "gamma", "winner_label", "best_F"] + [f"F_{l}" for l in self.labels])
        best = self.best()
        for i, e in enumerate(self.eps):
            for j, d in enumerate(self.delta):
                w.writerow([f"{e:.12g}", f"{d:.12g}", f"{self.gamma:.12g}", self.winner_label(i, j),
                            f"{best[i, j]:.15g}"] + [f"{f:.15g}" for f in self.fidelity[:, i, j]])
        return buf.getvalue()

    def summary(self) -> dict:
        best = self.best()
        regions = {}
        for k, lab in enumerate(self.labels):
            mask = self.winner == k
            if mask.any():
                regions[lab] = {"cells": int(mask.sum()), "fraction": float(mask.mean()),
                                "min_F": float(best[mask].min()), "max_F": float(best[mask].max()),
                                "introduced": bool(self.introduced[k]) if self.introduced else False}
        return {"gamma": self.gamma, "grid": [len(self.eps), len(self.delta)],
                "eps_range": [float(self.eps[0]), float(self.eps[-1])],
                "delta_range": [float(self.delta[0]), float(self.delta[-1])],
                "introduced_fraction": self.introduced_fraction(), "regions": regions}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def competitor_fidelity(comp: Competitor, eps: np.ndarray, delta: np.ndarray, gamma: float,
                        z_slowdown: float = DEFAULT_Z_SLOWDOWN) -> np.ndarray:
    """Fidelity on the ``eps x delta`` grid, averaged over targets and the four sign flips."""
    E, D = np.meshgrid(eps, delta, indexing="ij")
    t = comp.duration(z_slowdown)
    total = np.zeros_like(E)
    for seq, target in comp.sequences:
        tq = target.as_array()
        for se in (1.0, -1.0):
            for sd in (1.0, -1.0):
                q = evaluate_batch(seq, se * E, sd * D, 0.0)
                total += fidelity_from_overlap(np.minimum(1.0, np.abs(q @ tq)), t, gamma)
    return total / (4 * len(comp.sequences))


def phase_diagram(competitors: Sequence[Competitor], eps, delta, gamma: float,
                  z_slowdown: float = DEFAULT_Z_SLOWDOWN, workers: int = 1) -> PhaseDiagram:
    """Winner map over the ``(eps, delta)`` grid.

    Ties within 1e-12 go to the shorter competitor, then to the earlier one
    in ``competitors``.
    """
    eps = np.asarray(eps, float)
    delta = np.asarray(delta, float)
    if eps.size < 2 or delta.size < 2:
        raise ValueError("grid must be at least 2 x 2")
    run = lambda c: competitor_fidelity(c, eps, delta, gamma, z_slowdown)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fids = list(ex.map(run, competitors))
    else:
        fids = [run(c) for c in competitors]
    F = np.stack(fids)
    durations = np.array([c.duration(z_slowdown) for c in competitors])
    best = F.max(axis=0)
    # among near-ties: shortest, then first listed
    cand = F >= best[None] - TIE_TOL
    key = np.where(cand, durations[:, None, None], np.inf)
    winner = np.argmin(key, axis=0)
    return PhaseDiagram(eps, delta, gamma, tuple(c.label for c in competitors), F, winner,
                        tuple(c.introduced for c in competitors))


def grid(n: int = 41, hi: float = 0.1) -> np.ndarray:
    return np.linspace(0.0, hi, n)
