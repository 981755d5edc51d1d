"""
Two-stage gradient search for robust pulse areas under fixed phase ansatzes.

Amplitude control (AC) sequences are ``[t1]_p1 [t2]_p2 ... [tk]_pk``.
Z control (ZC) sequences alternate local ``Z(t)`` slots with x-y slots; an
x-y slot is a local Z conjugated by global pi/2 pulses,

    [pi/2]_(p + pi/2)  Z(t)  [pi/2]_(p - pi/2)  =  [t]_p      (zero error)

written in operator order (the right factor acts first).

Stage 1 maximizes ``F(0) + mean_i F(zeta_i)`` over the corners ``zeta_i``
of the error hypercube; stage 2 re-maximizes ``F(0)`` from the stage-1
point, where ``F = |Tr(U^dag V)| / 2``.  Gradients use the exact insertion
rule: the derivative of a rotation with respect to its angle is the same
rotation advanced by a quarter turn, scaled by ``pi / (2 alpha)``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import tables
from .sequences import (BENCHMARK_ANGLES, ControlScheme, Global, LocalZ, PulseSequence,
                        TARGET, basic_ac, basic_zc)
from .solve import make_rng
from .su2 import ErrorParams, Su2, pulse_quats, qmul, zrot_quats

PI = math.pi
MAX_AREA = 3.0 * PI
DEFAULT_SEEDS = 256
DEFAULT_HALF_WIDTH = 0.05
MAX_ITER = 1000
ACCEPT_TOL = 1e-6


class SearchError(RuntimeError):
    """No seed produced an acceptable sequence."""


@dataclass(frozen=True)
class Preset:
    scheme: ControlScheme
    phases: tuple  # radians; None marks a ZC Z slot
    active: tuple  # which of (eps, delta, eps_s) the ansatz targets


def _phases(name: str) -> tuple:
    return tuple(tables.preset(name)["phases"])


PRESETS = {
    "nUZ-SE": Preset(ControlScheme.ZC, _phases("nuz-se"), (False, False, True)),
    "nUZ-SORE": Preset(ControlScheme.ZC, _phases("nuz-sore"), (False, True, True)),
    "nUZ-SAE": Preset(ControlScheme.ZC, _phases("nuz-sae"), (True, False, True)),
    "nUZ-SAORE": Preset(ControlScheme.ZC, _phases("nuz-saore"), (True, True, True)),
    "nUA-AE": Preset(ControlScheme.AC, _phases("nua-ae"), (True, False, False)),
    "nUA-ORE": Preset(ControlScheme.AC, _phases("nua-ore"), (False, True, False)),
    "nUA-AORE1": Preset(ControlScheme.AC, _phases("nua-aore1"), (True, True, False)),
    "nUA-AORE2": Preset(ControlScheme.AC, _phases("nua-aore2"), (True, True, False)),
}
PRESET_TABLE = dict(zip(PRESETS, tables.PRESET_NAMES))


@dataclass(frozen=True)
class SearchProblem:
    """Search problem.

    Attributes
    ----------
    phases : tuple
        Fixed phase per slot (radians).  Under ZC ``None`` marks a Z slot.
    hypercube : tuple
        Half-widths ``(eps0, delta0, eps_s0)``; the nonzero ones span the
        corner set.
    table_seeds : tuple
        Extra starting points tried before the random ones.
    """

    scheme: ControlScheme
    target: Su2
    phases: tuple
    hypercube: tuple = (0.0, 0.0, 0.0)
    theta_bounds: tuple = (0.0, MAX_AREA)
    seeds: int = DEFAULT_SEEDS
    rng_seed: int = 0
    table_seeds: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scheme", ControlScheme(self.scheme))
        if self.scheme is ControlScheme.PC:
            raise ValueError("numerical search covers AC and ZC only")
        if self.scheme is ControlScheme.AC and any(p is None for p in self.phases):
            raise ValueError("AC ansatz has no Z slots")
        if len(self.hypercube) != 3 or any(h < 0 for h in self.hypercube):
            raise ValueError("hypercube needs three non-negative half-widths")
        if not self.phases:
            raise ValueError("empty ansatz")

    @property
    def n_slots(self) -> int:
        return len(self.phases)

    def corners(self) -> np.ndarray:
        """Extreme points of the active-error hypercube, shape ``(N, 3)``."""
        axes = [(-h, h) if h > 0 else (0.0,) for h in self.hypercube]
        if all(h == 0 for h in self.hypercube):
            return np.zeros((0, 3))
        return np.array(list(itertools.product(*axes)), dtype=float)

    def error_points(self) -> np.ndarray:
        """Centre followed by the corners."""
        return np.vstack([np.zeros((1, 3)), self.corners()])


@dataclass(frozen=True)
class SearchResult:
    thetas: tuple
    objective: float
    fidelity_at_zero: float
    corner_fidelities: tuple
    gradient_norm: float
    seed_index: int
    accepted: bool = True

    def thetas_in_pi(self) -> tuple:
        return tuple(t / PI for t in self.thetas)


# ---------------------------------------------------------------------------
# evaluation and analytic Jacobian
# ---------------------------------------------------------------------------

def zc_xy_slot(theta: float, phi: float, err: ErrorParams = ErrorParams()) -> Su2:
    """x-y rotation built from a local Z between two global pi/2 pulses."""
    q = _xy_quats(np.array([theta]), phi, np.array([[err.epsilon, err.delta, err.epsilon_s]]),
                  zrot_quats(theta, err.epsilon_s)[None])
    return Su2.from_array(q[0])


def _xy_quats(theta, phi, errs, inner):
    eps, delta = errs[:, 0], errs[:, 1]
    a = pulse_quats(PI / 2, phi + PI / 2, eps, delta)
    b = pulse_quats(PI / 2, phi - PI / 2, eps, delta)
    return qmul(qmul(a, inner), b)


def _slot_quats(problem: SearchProblem, thetas, errs):
    """Per-slot quaternions and their angle derivatives, shapes ``(k, M, 4)``."""
    eps, delta, eps_s = errs[:, 0], errs[:, 1], errs[:, 2]
    q, d = [], []
    alpha = PI / ((1 + eps) * np.sqrt(1 + delta * delta))
    alpha_s = PI / (1 + eps_s)
    for theta, phi in zip(thetas, problem.phases):
        if problem.scheme is ControlScheme.AC:
            q.append(pulse_quats(theta, phi, eps, delta))
            d.append((PI / (2 * alpha))[:, None] * pulse_quats(theta + alpha, phi, eps, delta))
        else:
            z = zrot_quats(theta, eps_s)
            dz = (PI / (2 * alpha_s))[:, None] * zrot_quats(theta + alpha_s, eps_s)
            if phi is None:
                q.append(z)
                d.append(dz)
            else:
                q.append(_xy_quats(theta, phi, errs, z))
                d.append(_xy_quats(theta, phi, errs, dz))
    return np.stack(q), np.stack(d)


def unitary_and_jacobian(problem: SearchProblem, thetas, errs) -> tuple:
    """Sequence quaternions ``(M, 4)`` and ``dU/dtheta_i`` ``(k, M, 4)`` at error points ``errs``."""
    errs = np.atleast_2d(np.asarray(errs, float))
    q, d = _slot_quats(problem, np.asarray(thetas, float), errs)
    k, m = q.shape[:2]
    ident = np.zeros((m, 4))
    ident[:, 0] = 1.0
    prefix = [ident]
    for i in range(k):
        prefix.append(qmul(prefix[-1], q[i]))
    suffix = [ident]
    for i in range(k - 1, -1, -1):
        suffix.append(qmul(q[i], suffix[-1]))
    suffix = suffix[::-1]  # suffix[i] = q[i] ... q[k-1]
    jac = np.stack([qmul(qmul(prefix[i], d[i]), suffix[i + 1]) for i in range(k)])
    return prefix[-1], jac


def jacobian(problem: SearchProblem, thetas, err: ErrorParams = ErrorParams()) -> tuple:
    """``(dU/dtheta_i as (k, 4) quaternion rows, dF/dtheta_i)`` at one error point."""
    u, jac = unitary_and_jacobian(problem, thetas, [[err.epsilon, err.delta, err.epsilon_s]])
    t = problem.target.as_array()
    s = 1.0 if u[0] @ t >= 0 else -1.0
    return jac[:, 0, :], s * (jac[:, 0, :] @ t)


def _fid_and_grad(problem: SearchProblem, thetas, errs) -> tuple:
    u, jac = unitary_and_jacobian(problem, thetas, errs)
    t = problem.target.as_array()
    dots = u @ t
    sign = np.where(dots >= 0, 1.0, -1.0)
    return np.abs(dots), (jac @ t) * sign[None, :]  # (M,), (k, M)


def fidelities(problem: SearchProblem, thetas, errs=None) -> np.ndarray:
    errs = problem.error_points() if errs is None else errs
    return _fid_and_grad(problem, thetas, np.atleast_2d(errs))[0]


def objective(problem: SearchProblem, thetas) -> float:
    """``F(0) + mean F(corners)``; just ``F(0)`` for an all-zero hypercube."""
    f = fidelities(problem, thetas)
    return float(f[0] + (f[1:].mean() if f.size > 1 else 0.0))


def _stage1(problem: SearchProblem):
    errs = problem.error_points()

    def fun(x):
        f, g = _fid_and_grad(problem, x, errs)
        if f.size > 1:
            return -(f[0] + f[1:].mean()), -(g[:, 0] + g[:, 1:].mean(axis=1))
        return -f[0], -g[:, 0]
    return fun


def _stage2(problem: SearchProblem):
    errs = np.zeros((1, 3))

    def fun(x):
        f, g = _fid_and_grad(problem, x, errs)
        return -f[0], -g[:, 0]
    return fun


def gradient_at_zero(problem: SearchProblem, thetas) -> np.ndarray:
    return _fid_and_grad(problem, thetas, np.zeros((1, 3)))[1][:, 0]


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------

def seed_points(problem: SearchProblem) -> np.ndarray:
    """Table seeds first, then ``problem.seeds`` uniform draws from a Philox stream."""
    lo, hi = problem.theta_bounds
    rand = make_rng(problem.rng_seed).uniform(lo, hi, size=(problem.seeds, problem.n_slots))
    table = np.array(problem.table_seeds, dtype=float).reshape(-1, problem.n_slots)
    return np.vstack([table, rand])


def _optimize(fun, x0, bounds):
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": MAX_ITER, "ftol": 1e-16, "gtol": 1e-12, "maxls": 50})
    return res.x


def _run_seed(problem: SearchProblem, idx: int, x0: np.ndarray) -> SearchResult:
    bounds = [problem.theta_bounds] * problem.n_slots
    x1 = _optimize(_stage1(problem), x0, bounds)
    x2 = _optimize(_stage2(problem), x1, bounds)
    f = fidelities(problem, x2)
    obj = float(f[0] + (f[1:].mean() if f.size > 1 else 0.0))
    grad = float(np.max(np.abs(gradient_at_zero(problem, x2))))
    return SearchResult(tuple(float(v) for v in x2), obj, float(f[0]), tuple(float(v) for v in f[1:]),
                        grad, idx, bool(f[0] >= 1 - ACCEPT_TOL))


def run_seeds(problem: SearchProblem, workers: int = 1) -> list:
    """All per-seed results in seed order."""
    seeds = seed_points(problem)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(lambda a: _run_seed(problem, *a), enumerate(seeds)))
    return [_run_seed(problem, i, x) for i, x in enumerate(seeds)]


def two_stage_search(problem: SearchProblem, workers: int = 1) -> SearchResult:
    """Best accepted result over all seeds (highest objective, then lowest seed index)."""
    results = [r for r in run_seeds(problem, workers) if r.accepted]
    if not results:
        raise SearchError(f"no solution: no seed reached F(0) >= {1 - ACCEPT_TOL}")
    return min(results, key=lambda r: (-round(r.objective, 12), r.seed_index))


# ---------------------------------------------------------------------------
# presets and materialization
# ---------------------------------------------------------------------------

def preset_target(name: str, gate: str) -> tuple:
    """Euler triple (radians) of a benchmark gate under the preset's scheme."""
    scheme = PRESETS[name].scheme
    return tuple(v * PI for v in BENCHMARK_ANGLES[scheme][gate])


def printed_thetas(name: str, gate: str) -> tuple:
    return tables.preset(PRESET_TABLE[name])["rows"][gate][1]


def preset_problem(name: str, gate: str, half_width: float = DEFAULT_HALF_WIDTH,
                   seeds: int = DEFAULT_SEEDS, rng_seed: int = 0,
                   use_table: bool = True) -> SearchProblem:
    """Problem for a built-in ansatz and benchmark gate, active errors at ``half_width``."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    target = TARGET[p.scheme](*preset_target(name, gate))
    cube = tuple(half_width if a else 0.0 for a in p.active)
    table = (printed_thetas(name, gate),) if use_table else ()
    return SearchProblem(p.scheme, target, p.phases, cube, seeds=seeds, rng_seed=rng_seed,
                         table_seeds=table, label=f"{name} {gate}")


def to_sequence(problem: SearchProblem, thetas) -> PulseSequence:
    """Physical pulse list; each ZC x-y slot expands to three pulses."""
    out = []
    for theta, phi in zip(thetas, problem.phases):
        if problem.scheme is ControlScheme.AC:
            out.append(Global(theta, phi))
        elif phi is None:
            out.append(LocalZ(theta))
        else:
            out += [Global(PI / 2, phi + PI / 2), LocalZ(theta), Global(PI / 2, phi - PI / 2)]
    return PulseSequence(problem.scheme, out, problem.label)


def basic_sequence(problem_scheme: ControlScheme, euler) -> PulseSequence:
    return basic_ac(*euler) if ControlScheme(problem_scheme) is ControlScheme.AC else basic_zc(*euler)


# ---------------------------------------------------------------------------
# problem file
# ---------------------------------------------------------------------------

class ProblemParseError(ValueError):
    """Malformed problem file; ``lineno`` is 1-based (0 for whole-file errors)."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


PROBLEM_KEYS = ("scheme", "target", "gate", "preset", "phases", "hypercube", "seeds",
                "rng_seed", "label")


def _floats(lineno: int, key: str, value: str, count: int | None = None) -> list:
    try:
        out = [float(v) for v in value.split()]
    except ValueError:
        raise ProblemParseError(lineno, f"{key}: non-numeric value in {value!r}") from None
    if count is not None and len(out) != count:
        raise ProblemParseError(lineno, f"{key}: expected {count} numbers, got {len(out)}")
    return out


def loads_problem(text: str) -> SearchProblem:
    """Parse a key-value problem file.

    One ``key: value`` per line, ``#`` comments.  Keys:

    ``scheme``      AC or ZC (implied by ``preset``)
    ``target``      Euler angles of the target, units of pi
    ``gate``        benchmark gate name, alternative to ``target``
    ``preset``      built-in ansatz name, or
    ``phases``      explicit phases in units of pi, ``z`` marking a ZC Z slot
    ``hypercube``   half-widths ``eps0 delta0 eps_s0``
    ``seeds``       number of random starts
    ``rng_seed``    generator seed
    ``label``       free text

    With ``preset`` and ``gate`` the printed table row is used as an extra
    seed; an absent ``hypercube`` then defaults to the preset's active
    errors at the default half-width.
    """
    kv: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ProblemParseError(lineno, f"expected 'key: value', got {line!r}")
        key, value = (s.strip() for s in line.split(":", 1))
        key = key.lower().replace("-", "_")
        if key not in PROBLEM_KEYS:
            raise ProblemParseError(lineno, f"unknown key {key!r}; expected one of {PROBLEM_KEYS}")
        if key in kv:
            raise ProblemParseError(lineno, f"duplicate key {key!r}")
        kv[key], lines[key] = value, lineno

    preset = kv.get("preset")
    if preset is not None and preset not in PRESETS:
        raise ProblemParseError(lines["preset"], f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    if (preset is None) == ("phases" not in kv):
        raise ProblemParseError(0, "give exactly one of 'preset' and 'phases'")
    if ("gate" in kv) == ("target" in kv):
        raise ProblemParseError(0, "give exactly one of 'gate' and 'target'")

    if "scheme" in kv:
        try:
            scheme = ControlScheme(kv["scheme"].upper())
        except ValueError:
            raise ProblemParseError(lines["scheme"], f"unknown scheme {kv['scheme']!r}") from None
        if preset is not None and scheme is not PRESETS[preset].scheme:
            raise ProblemParseError(lines["scheme"], f"preset {preset} is a {PRESETS[preset].scheme.value} ansatz")
    elif preset is not None:
        scheme = PRESETS[preset].scheme
    else:
        raise ProblemParseError(0, "missing 'scheme'")
    if scheme is ControlScheme.PC:
        raise ProblemParseError(lines.get("scheme", 0), "numerical search covers AC and ZC only")

    if preset is not None:
        phases = PRESETS[preset].phases
    else:
        phases = []
        for tok in kv["phases"].split():
            if tok.lower() == "z":
                phases.append(None)
            else:
                phases.append(_floats(lines["phases"], "phases", tok, 1)[0] * PI)
        phases = tuple(phases)

    table_seeds: tuple = ()
    if "gate" in kv:
        gate = kv["gate"]
        if gate not in BENCHMARK_ANGLES[scheme]:
            raise ProblemParseError(lines["gate"], f"unknown gate {gate!r}; choose from {sorted(BENCHMARK_ANGLES[scheme])}")
        euler = tuple(v * PI for v in BENCHMARK_ANGLES[scheme][gate])
        if preset is not None:
            table_seeds = (printed_thetas(preset, gate),)
    else:
        euler = tuple(v * PI for v in _floats(lines["target"], "target", kv["target"], 3))

    if "hypercube" in kv:
        cube = tuple(_floats(lines["hypercube"], "hypercube", kv["hypercube"], 3))
    elif preset is not None:
        cube = tuple(DEFAULT_HALF_WIDTH if a else 0.0 for a in PRESETS[preset].active)
    else:
        raise ProblemParseError(0, "missing 'hypercube'")

    def _int(key, default):
        if key not in kv:
            return default
        try:
            v = int(kv[key])
        except ValueError:
            raise ProblemParseError(lines[key], f"{key}: expected an integer, got {kv[key]!r}") from None
        if v < 0:
            raise ProblemParseError(lines[key], f"{key}: must be non-negative")
        return v

    seeds, rng_seed = _int("seeds", DEFAULT_SEEDS), _int("rng_seed", 0)
    try:
        return SearchProblem(scheme, TARGET[scheme](*euler), phases, cube, seeds=seeds,
                             rng_seed=rng_seed, table_seeds=table_seeds,
                             label=kv.get("label", preset or ""))
    except ValueError as exc:
        raise ProblemParseError(0, str(exc)) from None


def read_problem(path) -> SearchProblem:
    with open(path, encoding="utf-8") as fh:
        return loads_problem(fh.read())
