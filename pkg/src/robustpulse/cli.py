"""
Command-line frontend.

All angles on the command line and in files are in units of pi: ``--theta 0.5``
means a pi/2 rotation and ``--target 0 0.5 1`` the Euler triple
``(0, pi/2, pi)``.  Error strengths (``--eps``, ``--delta``, ``--eps-s``) are
fractions and ``--gamma`` is a rate in units of the Rabi frequency.

Exit codes: 0 success, 2 usage error, 3 parse error, 4 solver
non-convergence.  Options may also come from ``--config FILE`` holding
``key = value`` lines (keys are long option names); command-line flags win
over the file, which wins over built-in defaults.  ``PULSE_THREADS`` caps
the worker count of ``sweep`` and ``search``.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import io
import math
import os
import re
import sys
import tempfile

import numpy as np

from . import analysis, benchmark, numsearch, robust, tables
from .sequences import (BASIC, REFERENCE_SEQUENCES, TARGET, ControlScheme, PulseSequence,
                        SequenceParseError, drop_zero_area, dumps, evaluate, read_sequence,
                        replace_globals, replace_z, stats)
from .solve import SolverError, alignment
from .su2 import ErrorParams, Su2, global_pulse, trace_overlap, z_pulse

PI = math.pi
EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_SOLVER = 0, 2, 3, 4
COMMANDS = ("synth", "eval", "order", "rep", "search", "sweep", "tables", "compare")

# families whose builder takes (theta, phi) and implements [theta]_phi
PULSE_FAMILIES = ("SCORE", "BB1", "CORPSE", "sCORPSE", "SCROFULOUS", "SCORBUTUS", "RA", "SR1")
FAMILY_SCHEMES = {
    "basic": {"PC", "ZC", "AC"},
    "SCORE": {"PC", "ZC", "AC"},
    "BB1": {"PC", "ZC"},
    "SCROFULOUS": {"PC", "ZC"},
    "SCORBUTUS": {"PC", "ZC"},
    "CORPSE": {"PC", "ZC", "AC"},
    "sCORPSE": {"PC", "ZC", "AC"},
    "UP": {"PC"},
    "UZ": {"ZC"},
    "sUZ": {"ZC"},
    "RZ": {"ZC"},
    "RA": {"AC"},
    "SR1": {"PC", "ZC", "AC"},
}
ORDERS = {"SCORE": range(1, 5), "UP": range(1, 3), "UZ": range(1, 6), "sUZ": range(1, 6),
          "RA": range(1, 3), "RZ": range(1, 2), "SR1": range(1, 2)}


class UsageError(Exception):
    """Invalid flags or flag combination (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def fmt(x: float) -> str:
    """At least ten significant digits."""
    return f"{x:.12g}"


def workers() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("PULSE_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"PULSE_THREADS must be an integer, got {cap!r}") from None
    return n


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_config(path: str) -> dict:
    """``key = value`` (or ``key: value``) lines; ``#`` comments."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.match(r"^([A-Za-z][\w-]*)\s*[=:]\s*(.*)$", line)
            if not m:
                raise SequenceParseError(lineno, f"config: expected 'key = value', got {line!r}")
            out[m.group(1).replace("-", "_")] = m.group(2).strip()
    return out


def split_family(name: str, n: int | None) -> tuple:
    """``'SCORE2'`` -> ``('SCORE', 2)``; an explicit ``n`` wins."""
    canon = {k.lower(): k for k in FAMILY_SCHEMES}
    if name.lower() in canon:  # names such as BB1 end in a digit
        return canon[name.lower()], n
    m = re.match(r"^(SR1in\w+|[A-Za-z]+?)(\d*)$", name)
    if not m:
        raise UsageError(f"unrecognised family {name!r}")
    base, digits = m.group(1), m.group(2)
    if base.startswith("SR1in"):
        return "SR1", 1
    if base.upper() == "SR" and digits == "1":
        return "SR1", 1
    if base.lower() not in canon:
        close = difflib.get_close_matches(base, list(FAMILY_SCHEMES), n=3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise UsageError(f"unknown family {base!r}{hint}")
    base = canon[base.lower()]
    order = n if n is not None else (int(digits) if digits else None)
    return base, order


def _need_order(family: str, n: int | None) -> int:
    allowed = ORDERS.get(family)
    if allowed is None:
        return 0
    if n is None:
        n = allowed.start
    if n not in allowed:
        raise UsageError(f"{family} order must be in {allowed.start}..{allowed.stop - 1}, got {n}")
    return n


def pulse_builder(family: str, n: int):
    """``(theta, phi) -> PulseSequence`` for single-rotation families."""
    if family == "SCORE":
        return lambda t, p: robust.score_n(t, p, n).sequence
    if family == "RA":
        return robust.ra1 if n == 1 else (lambda t, p: robust.ra2(t, p).sequence)
    if family == "SR1":
        return robust.sr1_in_ra1
    return REFERENCE_SEQUENCES[family]


def build(scheme: ControlScheme, family: str, n: int, target, theta, phi) -> tuple:
    """Return ``(sequence, target Su2, params or None)``.

    ``target`` is an Euler triple in radians (scheme convention) or None, in
    which case ``theta``/``phi`` (radians) name a single rotation.
    """
    if scheme.value not in FAMILY_SCHEMES[family]:
        ok = sorted(f for f, s in FAMILY_SCHEMES.items() if scheme.value in s)
        raise UsageError(f"family {family} is not available under {scheme.value}; "
                         f"choose from {', '.join(ok)}")
    n = _need_order(family, n)
    single = target is None
    if single and theta is None:
        raise UsageError("give --target A B C or --theta T [--phi P]")
    if not single and theta is not None:
        raise UsageError("--target and --theta are mutually exclusive")
    phi = 0.0 if phi is None else phi

    if family == "RZ":
        if single:
            return robust.rz1(theta), z_pulse(theta), None
        seq = replace_z(drop_zero_area(BASIC[scheme](*target)), robust.rz1, label="RZ1*")
        return seq, TARGET[scheme](*target), None
    if family in ("UP", "UZ", "sUZ", "basic") or (family == "SR1" and scheme is not ControlScheme.AC):
        if single:
            raise UsageError(f"family {family} under {scheme.value} needs --target A B C")
        tgt = TARGET[scheme](*target)
        if family == "basic":
            return BASIC[scheme](*target), tgt, None
        if family == "UP":
            sol = robust.up1(*target) if n == 1 else robust.up_n(*target, n=n)
            return sol.sequence, tgt, sol.params
        if family == "UZ":
            return robust.uz_n(*target, n), tgt, robust.uz_phases(n)
        if family == "sUZ":
            return robust.suz_n(*target, n), tgt, robust.suz_phases(n)
        return (robust.sr1_in_up1(*target) if scheme is ControlScheme.PC
                else robust.sr1_in_uz1(*target)), tgt, None

    inner = pulse_builder(family, n)
    if single:
        params = None
        if family == "SCORE":
            sol = robust.score_n(theta, phi, n)
            seq, params = sol.sequence, sol.params
        elif family == "RA" and n == 2:
            sol = robust.ra2(theta, phi)
            seq, params = sol.sequence, sol.params
        elif family == "RA":
            seq, params = robust.ra1(theta, phi), (robust.ra1_angle(theta),)
        else:
            seq = inner(theta, phi)
        return seq.with_scheme(scheme), global_pulse(theta, phi), params
    basic = drop_zero_area(BASIC[scheme](*target))
    label = f"{family}{n or ''}*"
    return replace_globals(basic, inner, label=label), TARGET[scheme](*target), None


def residual(seq: PulseSequence, target: Su2) -> float:
    return float(np.max(np.abs(alignment(evaluate(seq).as_array(), target.as_array()))))


def _angles(values):
    return None if values is None else tuple(v * PI for v in values)


def _opt(values):
    return None if values is None else values * PI


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(a, out) -> int:
    scheme = ControlScheme(a.scheme)
    family, n = split_family(a.family, a.n)
    seq, target, params = build(scheme, family, n, _angles(a.target), _opt(a.theta), _opt(a.phi))
    text = dumps(seq)
    st = stats(seq, a.z_slowdown)
    header = ["family", "scheme", "k", "T", "duration", "residual", "params_over_pi"]
    row = [a.family, scheme.value, st.k, fmt(st.T), fmt(st.duration), fmt(residual(seq, target)),
           " ".join(fmt(p / PI) for p in params) if params is not None else ""]
    report = csv_text(header, [row])
    if a.out:
        write_atomic(a.out, text)
        out.write(report)
    else:
        out.write(text)
        sys.stderr.write(report)
    return EXIT_OK


def _eval_target(a, seq: PulseSequence) -> Su2:
    if a.target is not None and a.theta is not None:
        raise UsageError("--target and --theta are mutually exclusive")
    if a.target is not None:
        return TARGET[seq.scheme](*_angles(a.target))
    if a.theta is not None:
        return global_pulse(_opt(a.theta), _opt(a.phi) or 0.0)
    return evaluate(seq)


def cmd_eval(a, out) -> int:
    seq = read_sequence(a.file)
    target = _eval_target(a, seq)
    err = ErrorParams(a.eps, a.delta, a.eps_s)
    fp = analysis.FidelityParams(a.gamma, a.z_slowdown)
    st = stats(seq, a.z_slowdown)
    overlap = trace_overlap(evaluate(seq, err), target)
    fid = analysis.avg_gate_fidelity(seq, target, err, fp)
    out.write(csv_text(["overlap", "avg_gate_fidelity", "k", "T", "duration"],
                       [[fmt(overlap), fmt(fid), st.k, fmt(st.T), fmt(st.duration)]]))
    return EXIT_OK


def _sequence_from_args(a) -> tuple:
    if a.file:
        if a.family:
            raise UsageError("give either a sequence file or --family, not both")
        seq = read_sequence(a.file)
        return seq, _eval_target(a, seq)
    if not a.family:
        raise UsageError("give a sequence file or --family")
    family, n = split_family(a.family, a.n)
    scheme = ControlScheme(a.scheme) if a.scheme else _default_scheme(family)
    theta = _opt(a.theta)
    if a.target is None and theta is None:
        theta = PI / 2
    seq, target, _ = build(scheme, family, n, _angles(a.target), theta, _opt(a.phi))
    return seq, target


def _default_scheme(family: str) -> ControlScheme:
    allowed = FAMILY_SCHEMES[family]
    for s in ("PC", "ZC", "AC"):
        if s in allowed:
            return ControlScheme(s)
    raise AssertionError(family)


def cmd_order(a, out) -> int:
    seq, target = _sequence_from_args(a)
    try:
        fit = analysis.suppression_order(seq, target, a.axis.replace("-", "_"))
    except ValueError as exc:
        if "undefined" in str(exc):
            raise UsageError(f"order undefined: {exc}") from None
        raise
    order = "" if fit.order is None else str(fit.order)
    passed = fit.certified and (a.expect is None or fit.order >= a.expect)
    out.write(csv_text(["axis", "slope", "order", "pass"],
                       [[a.axis, fmt(fit.slope), order, "pass" if passed else "fail"]]))
    return EXIT_OK


def cmd_rep(a, out) -> int:
    family, n = split_family(a.family, a.n)
    if family not in PULSE_FAMILIES:
        raise UsageError(f"REP applies to single-rotation families: {', '.join(PULSE_FAMILIES)}")
    n = _need_order(family, n)
    builder = pulse_builder(family, n)
    res = robust.rep_check(builder, a.theta * PI, a.phi * PI, a.kind, tol=a.tol)
    out.write(csv_text(["family", "kind", "theta_over_pi", "phi_over_pi", "deviation", "pass"],
                       [[a.family, a.kind, fmt(a.theta), fmt(a.phi), fmt(res.deviation),
                         "pass" if res.passed else "fail"]]))
    return EXIT_OK


def cmd_search(a, out) -> int:
    if (a.problem is None) == (a.preset is None):
        raise UsageError("give exactly one of a problem file and --preset")
    if a.problem is not None:
        problem = numsearch.read_problem(a.problem)
        if a.seeds is not None or a.rng_seed is not None:
            problem = numsearch.SearchProblem(
                problem.scheme, problem.target, problem.phases, problem.hypercube,
                problem.theta_bounds, a.seeds if a.seeds is not None else problem.seeds,
                a.rng_seed if a.rng_seed is not None else problem.rng_seed,
                problem.table_seeds, problem.label)
    else:
        if a.preset not in numsearch.PRESETS:
            close = difflib.get_close_matches(a.preset, list(numsearch.PRESETS), n=3)
            raise UsageError(f"unknown preset {a.preset!r}; did you mean {', '.join(close) or sorted(numsearch.PRESETS)}?")
        problem = numsearch.preset_problem(
            a.preset, a.gate, a.half_width,
            seeds=numsearch.DEFAULT_SEEDS if a.seeds is None else a.seeds,
            rng_seed=a.rng_seed or 0, use_table=not a.no_table)
    result = numsearch.two_stage_search(problem, workers=workers())
    seq = numsearch.to_sequence(problem, result.thetas)
    if a.out:
        write_atomic(a.out, dumps(seq))
    st = stats(seq, a.z_slowdown)
    out.write(csv_text(
        ["label", "objective", "fidelity_at_zero", "min_corner_fidelity", "gradient_norm",
         "seed_index", "k", "T", "thetas_over_pi"],
        [[problem.label, fmt(result.objective), fmt(result.fidelity_at_zero),
          fmt(min(result.corner_fidelities, default=result.fidelity_at_zero)),
          fmt(result.gradient_norm), result.seed_index, st.k, fmt(st.T),
          " ".join(fmt(t) for t in result.thetas_in_pi())]]))
    return EXIT_OK


def _competitors(scheme: ControlScheme, labels) -> list:
    known = [l for s, l, _, _ in tables.pulcomp() if s == scheme.value]
    if scheme is ControlScheme.PC:
        known = list(dict.fromkeys(list(benchmark.PC_SUITE) + known))
    if not labels:
        return benchmark.suite(scheme)
    bad = [l for l in labels if (scheme, l) not in benchmark.BUILDERS]
    if bad:
        msgs = []
        for l in bad:
            close = difflib.get_close_matches(l, known, n=3)
            msgs.append(f"{l!r}" + (f" (did you mean {', '.join(close)}?)" if close else ""))
        raise UsageError(f"unknown competitor(s) for {scheme.value}: {'; '.join(msgs)}. "
                         f"Known: {', '.join(known)}")
    return [benchmark.competitor(scheme, l) for l in labels]


def cmd_sweep(a, out) -> int:
    scheme = ControlScheme(a.scheme)
    if a.grid < 2:
        raise UsageError("--grid must be at least 2")
    comps = _competitors(scheme, a.competitors)
    g = analysis.grid(a.grid, a.max_error)
    pd = analysis.phase_diagram(comps, g, g, a.gamma, a.z_slowdown, workers=workers())
    csv_body = pd.to_csv()
    if a.out:
        write_atomic(a.out, csv_body)
    else:
        out.write(csv_body)
    if a.summary:
        write_atomic(a.summary, pd.to_json() + "\n")
    sys.stderr.write(f"introduced_fraction={fmt(pd.introduced_fraction())}\n")
    return EXIT_OK


def cmd_compare(a, out) -> int:
    scheme = ControlScheme(a.scheme)
    comps = _competitors(scheme, a.competitors)
    rows = []
    for c in comps:
        f = analysis.competitor_fidelity(c, np.array([a.eps]), np.array([a.delta]), a.gamma,
                                         a.z_slowdown)[0, 0]
        rows.append((c.label, float(f), c.duration(a.z_slowdown), c.introduced))
    best = max(rows, key=lambda r: (r[1], -r[2]))
    body = [[l, fmt(f), fmt(d), int(i), int(l == best[0])] for l, f, d, i in rows]
    out.write(csv_text(["label", "F", "duration", "introduced", "best"], body))
    return EXIT_OK


def cmd_tables(a, out) -> int:
    if a.list or not a.name:
        out.write("\n".join(tables.TABLE_NAMES) + "\n")
        return EXIT_OK
    if a.name not in tables.TABLE_NAMES:
        close = difflib.get_close_matches(a.name, tables.TABLE_NAMES, n=3)
        raise UsageError(f"unknown table {a.name!r}; did you mean {', '.join(close) or ', '.join(tables.TABLE_NAMES)}?")
    out.write(tables.table_text(a.name))
    return EXIT_OK


HANDLERS = {"synth": cmd_synth, "eval": cmd_eval, "order": cmd_order, "rep": cmd_rep,
            "search": cmd_search, "sweep": cmd_sweep, "tables": cmd_tables, "compare": cmd_compare}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _scheme_arg(p, required=True):
    p.add_argument("--scheme", type=str.upper, choices=["PC", "ZC", "AC"], required=required)


def _target_args(p):
    p.add_argument("--target", type=float, nargs=3, metavar=("A", "B", "C"),
                   help="Euler angles of the target (units of pi)")
    p.add_argument("--theta", type=float, help="single rotation angle (units of pi)")
    p.add_argument("--phi", type=float, help="single rotation phase (units of pi)")


def _common(p):
    p.add_argument("--z-slowdown", type=float, default=5.0,
                   help="duration weight of local Z angles (default 5)")


def make_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="robustpulse", description="Robust composite pulses. All angles are in units of pi.")
    top.add_argument("--config", help="key = value file of option defaults")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="build a robust sequence and write it as a sequence file")
    _scheme_arg(p)
    p.add_argument("--family", required=True, help="basic, SCORE, UP, UZ, sUZ, RA, RZ, SR1, BB1, CORPSE, ...")
    p.add_argument("--n", type=int, help="order (also accepted as a suffix, e.g. SCORE2)")
    _target_args(p)
    p.add_argument("--out", help="sequence file to write (default: stdout)")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a sequence file under errors")
    p.add_argument("file")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--eps-s", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    _target_args(p)
    _common(p)

    p = sub.add_parser("order", help="fit the error-suppression order")
    p.add_argument("file", nargs="?")
    p.add_argument("--family")
    p.add_argument("--n", type=int)
    _scheme_arg(p, required=False)
    _target_args(p)
    p.add_argument("--axis", default="eps", choices=["eps", "delta", "eps_s", "eps-s", "diagonal"])
    p.add_argument("--expect", type=int, help="fail unless the certified order is at least this")

    p = sub.add_parser("rep", help="check the robust-equivalent-pulse property")
    p.add_argument("--family", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--kind", default="eps", choices=["eps", "delta"])
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=robust.REP_TOL)

    p = sub.add_parser("search", help="two-stage numerical search")
    p.add_argument("problem", nargs="?", help="key-value problem file")
    p.add_argument("--preset")
    p.add_argument("--gate", default="H")
    p.add_argument("--half-width", type=float, default=numsearch.DEFAULT_HALF_WIDTH)
    p.add_argument("--seeds", type=int)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--no-table", action="store_true", help="do not seed from the printed row")
    p.add_argument("--out", help="sequence file for the best result")
    _common(p)

    p = sub.add_parser("sweep", help="phase diagram over (eps, delta)")
    _scheme_arg(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--max-error", type=float, default=0.1)
    p.add_argument("--competitors", nargs="+")
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.add_argument("--summary", help="JSON summary file")
    _common(p)

    p = sub.add_parser("compare", help="competitor fidelities at one error point")
    _scheme_arg(p)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--competitors", nargs="+")
    _common(p)

    p = sub.add_parser("tables", help="print embedded reference tables")
    p.add_argument("--name")
    p.add_argument("--list", action="store_true")
    return top


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> None:
    """Feed config-file values in as subcommand defaults (flags still win)."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config(known.config)
    command = next((t for t in rest if t in COMMANDS), None)
    if command is None:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[command]
    defaults = {}
    for action in sp._actions:
        if action.dest in values:
            raw = values.pop(action.dest)
            try:
                if action.nargs in ("+", 3) or isinstance(action.nargs, int):
                    conv = [action.type(v) if action.type else v for v in raw.split()]
                elif isinstance(action, argparse._StoreTrueAction):
                    conv = raw.lower() in ("1", "true", "yes", "on")
                else:
                    conv = action.type(raw) if action.type else raw
            except ValueError:
                raise UsageError(f"config: bad value {raw!r} for {action.dest}") from None
            if action.choices is not None and conv not in action.choices:
                raise UsageError(f"config: {action.dest} must be one of {list(action.choices)}")
            defaults[action.dest] = conv
            action.required = False
    if values:
        raise UsageError(f"config: unknown option(s) for {command}: {', '.join(sorted(values))}")
    sp.set_defaults(**defaults)


def main(argv=None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    parser = make_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return HANDLERS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (SequenceParseError, numsearch.ProblemParseError) as exc:
        sys.stderr.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except (SolverError, numsearch.SearchError) as exc:
        sys.stderr.write(f"solver did not converge: {exc}\n")
        return EXIT_SOLVER
    except (ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
