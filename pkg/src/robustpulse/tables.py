"""
Reader for the embedded parameter tables (``data/tables.txt``).

Every number is kept exactly as printed (units of pi); parsed accessors return
floats in radians.
"""

from __future__ import annotations

import functools
import math
from fractions import Fraction
from importlib import resources

FIXTURE = "tables.txt"
TABLE_NAMES = ("scoren", "up12", "uzn", "suzn", "ra2",
               "nuz-se", "nuz-sore", "nuz-sae", "nuz-saore",
               "nua-ae", "nua-ore", "nua-aore1", "nua-aore2", "pulcomp")
PRESET_NAMES = TABLE_NAMES[5:13]


@functools.lru_cache(maxsize=1)
def _raw() -> str:
    return resources.files(__package__).joinpath("data", FIXTURE).read_text(encoding="utf-8")


@functools.lru_cache(maxsize=1)
def sections() -> dict:
    """Section name -> list of verbatim data lines (comments stripped)."""
    out: dict = {}
    current = None
    for line in _raw().splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            out[current] = []
        elif current is not None and s and not s.startswith("#"):
            out[current].append(s)
    return out


def table_text(name: str) -> str:
    """The section exactly as stored, including its header comments."""
    if name not in sections():
        raise KeyError(name)
    lines, keep = [], False
    for line in _raw().splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            keep = s[1:-1] == name
        if keep:
            lines.append(line.rstrip())
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n"


def to_pi_units(text: str) -> float:
    """Parse ``'1/3'`` or ``'0.63497'`` (units of pi) to a float in units of pi."""
    return float(Fraction(text.strip()))


def _values(field: str) -> list:
    return [to_pi_units(v) for v in field.split(",")]


def _rad(values) -> tuple:
    return tuple(v * math.pi for v in values)


def _cols(line: str) -> list:
    return [c.strip() for c in line.split("|")]


@functools.lru_cache(maxsize=1)
def scoren() -> dict:
    """``(theta_over_pi, n) -> varthetas`` in radians."""
    out = {}
    for line in sections()["scoren"]:
        th, n, vals = _cols(line)
        out[(to_pi_units(th), int(n))] = _rad(_values(vals))
    return out


@functools.lru_cache(maxsize=1)
def up12() -> dict:
    """``(gate, n) -> (euler_radians, phases_radians)``."""
    out = {}
    for line in sections()["up12"]:
        gate, abg, n, vals = _cols(line)
        out[(gate, int(n))] = (_rad(_values(abg)), _rad(_values(vals)))
    return out


@functools.lru_cache(maxsize=1)
def uzn() -> dict:
    return {int(n): _rad(_values(v)) for n, v in map(_cols, sections()["uzn"])}


@functools.lru_cache(maxsize=1)
def suzn() -> dict:
    return {int(n): _rad(_values(v)) for n, v in map(_cols, sections()["suzn"])}


@functools.lru_cache(maxsize=1)
def ra2() -> dict:
    return {to_pi_units(th): _rad(_values(v)) for th, v in map(_cols, sections()["ra2"])}


@functools.lru_cache(maxsize=None)
def preset(name: str) -> dict:
    """Numerical-search table: ``{'phases': [...], 'rows': {gate: (euler, thetas)}}``.

    Phases are radians, with ``None`` marking a Z slot.
    """
    lines = sections()[name]
    head = _cols(lines[0])
    if head[0] != "phases":
        raise ValueError(f"section {name} lacks a phases line")
    phases = [None if p.strip() == "-" else to_pi_units(p) * math.pi for p in head[1].split(",")]
    rows = {}
    for line in lines[1:]:
        gate, abg, vals = _cols(line)
        rows[gate] = (_rad(_values(abg)), _rad(_values(vals)))
    return {"phases": phases, "rows": rows}


@functools.lru_cache(maxsize=1)
def pulcomp() -> list:
    """Rows ``(scheme, label, k, T)`` of the bookkeeping table."""
    out = []
    for line in sections()["pulcomp"]:
        scheme, label, k, T, *_ = _cols(line)
        out.append((scheme, label, int(k), float(T)))
    return out


def lookup_theta(table: dict, theta: float, tol: float = 1e-12):
    """Return the tabulated key matching ``theta`` (radians), or None."""
    x = theta / math.pi
    for key in table:
        th = key[0] if isinstance(key, tuple) else key
        if abs(th - x) < tol:
            return th
    return None
