import csv
import io
import math
import os

import numpy as np
import pytest

from robustpulse import cli, tables
from robustpulse.sequences import ControlScheme, basic_pc, dumps, evaluate, pc_target, read_sequence
from robustpulse.su2 import trace_overlap

PI = math.pi


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_synth_up1_matches_table(tmp_path):
    path = tmp_path / "up1.txt"
    code, text = run("synth", "--scheme", "PC", "--family", "UP", "--n", 1, "--target", 0, 0.5, 1,
                     "--out", path)
    assert code == 0
    phases = [float(p) for p in rows(text)[0]["params_over_pi"].split()]
    printed = np.array(tables.up12()[("H", 1)][1]) / PI
    assert np.max(np.abs(np.array(phases) - printed)) < 1e-4
    seq = read_sequence(path)
    assert seq.scheme is ControlScheme.PC and len(seq) == 5


def test_synth_suz1_phases():
    code, _ = run("synth", "--scheme", "ZC", "--family", "sUZ", "--n", 1, "--target", 0.3, 0.7, 1.1)
    assert code == 0


def test_synth_suz1_report(capsys):
    cli.main(["synth", "--scheme", "ZC", "--family", "sUZ1", "--target", "0.3", "0.7", "1.1"],
             out=io.StringIO())
    report = rows(capsys.readouterr().err)[0]
    assert np.allclose([float(p) for p in report["params_over_pi"].split()], [1 / 3, 5 / 3], atol=1e-10)


def test_synth_ra1_angle():
    code, text = run("synth", "--scheme", "AC", "--family", "RA", "--n", 1, "--theta", 1.0, "--phi", 0,
                     "--out", os.devnull)
    assert code == 0
    assert float(rows(text)[0]["params_over_pi"]) == pytest.approx(2 / 3, abs=1e-10)


@pytest.mark.parametrize("argv", [
    ("synth", "--scheme", "ZC", "--family", "UP", "--n", "1", "--target", "0", "0.5", "1"),
    ("synth", "--scheme", "PC", "--family", "SCORE", "--n", "7", "--theta", "0.5"),
    ("synth", "--scheme", "PC", "--family", "UP", "--n", "1"),
    ("synth", "--scheme", "PC", "--family", "SCOER", "--n", "1", "--theta", "0.5"),
    ("synth", "--scheme", "XX", "--family", "basic", "--target", "0", "0", "0"),
    ("eval",),
    ("bogus",),
])
def test_usage_errors_exit_2(argv, capsys):
    assert cli.main(list(argv), out=io.StringIO()) == 2
    assert capsys.readouterr().err


def test_family_typo_suggests(capsys):
    cli.main(["synth", "--scheme", "PC", "--family", "SCOER", "--n", "1", "--theta", "0.5"],
             out=io.StringIO())
    assert "SCORE" in capsys.readouterr().err


def test_round_trip_synth_eval(tmp_path):
    path = tmp_path / "s.txt"
    run("synth", "--scheme", "PC", "--family", "SR1", "--target", 0.25, 0.5, 1, "--out", path)
    seq = read_sequence(path)
    code, text = run("eval", path, "--target", 0.25, 0.5, 1)
    assert code == 0
    row = rows(text)[0]
    direct = trace_overlap(evaluate(seq), pc_target(0.25 * PI, 0.5 * PI, PI))
    assert abs(float(row["overlap"]) - direct) < 1e-12
    assert float(row["overlap"]) == pytest.approx(1.0, abs=1e-10)


def test_eval_basic_is_perfect(tmp_path):
    path = tmp_path / "b.txt"
    path.write_text(dumps(basic_pc(0.3, 1.2, 2.0)))
    code, text = run("eval", path)
    assert code == 0
    assert rows(text)[0]["avg_gate_fidelity"].startswith("1")
    assert float(rows(text)[0]["avg_gate_fidelity"]) == pytest.approx(1.0, abs=1e-12)


def test_eval_sr1inup1_under_errors(tmp_path):
    path = tmp_path / "s.txt"
    run("synth", "--scheme", "PC", "--family", "SR1", "--target", 0, 0.5, 1, "--out", path)
    code, text = run("eval", path, "--eps", 0.05, "--delta", 0.05)
    assert code == 0
    assert 0.999 <= float(rows(text)[0]["avg_gate_fidelity"]) <= 1.0


def test_eval_parse_error_names_line(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("scheme: PC\nG 0.5 0\nG half 0\n")
    assert cli.main(["eval", str(path)], out=io.StringIO()) == 3
    assert "line 3" in capsys.readouterr().err


def test_order_examples(tmp_path):
    code, text = run("order", "--family", "SCORE1", "--theta", 0.5, "--axis", "delta")
    assert code == 0
    row = rows(text)[0]
    assert row["order"] == "1" and float(row["slope"]) == pytest.approx(4.0, abs=0.3)
    path = tmp_path / "ac.txt"
    run("synth", "--scheme", "AC", "--family", "basic", "--target", 0.3, 0.6, 1.1, "--out", path)
    code, text = run("order", path, "--axis", "eps")
    assert code == 0 and rows(text)[0]["order"] == "0"
    # a failed check is a result, reported in the pass column
    code, text = run("order", path, "--axis", "eps", "--expect", 1)
    assert code == 0 and rows(text)[0]["pass"] == "fail"


def test_order_undefined(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("scheme: PC\nG 0.5 0\n")
    code, _ = run("order", path, "--target", 0, 1, 0)
    assert code == 2


def test_rep_example():
    code, text = run("rep", "--family", "SCORE1", "--kind", "eps")
    assert code == 0 and rows(text)[0]["pass"] == "pass"
    code, text = run("rep", "--family", "BB1", "--kind", "eps")
    assert code == 0 and rows(text)[0]["pass"] == "fail"


def test_tables_byte_stable():
    code, a = run("tables", "--name", "scoren")
    _, b = run("tables", "--name", "scoren")
    assert code == 0 and a == b
    assert a == tables.table_text("scoren")
    code, listing = run("tables", "--list")
    assert "scoren" in listing.split()
    assert run("tables", "--name", "nope")[0] == 2


def test_compare_headline_claim():
    code, text = run("compare", "--scheme", "PC", "--eps", 0.03, "--delta", 0.03, "--gamma", 1e-5)
    assert code == 0
    table = rows(text)
    best = [r for r in table if r["best"] == "1"]
    assert len(best) == 1 and float(best[0]["F"]) > 0.999
    assert max(float(r["F"]) for r in table) == float(best[0]["F"])


def test_compare_unknown_competitor(capsys):
    code, _ = run("compare", "--scheme", "PC", "--competitors", "BB2")
    assert code == 2
    assert "BB1" in capsys.readouterr().err


def test_sweep_outputs(tmp_path, capsys):
    csv_path, js = tmp_path / "d.csv", tmp_path / "d.json"
    code, _ = run("sweep", "--scheme", "PC", "--gamma", 5e-5, "--grid", 3, "--competitors", "Basic",
                  "UP1", "--out", csv_path, "--summary", js)
    assert code == 0
    table = rows(csv_path.read_text())
    assert len(table) == 9 and {r["winner_label"] for r in table} <= {"Basic", "UP1"}
    assert "introduced_fraction" in capsys.readouterr().err
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_search_exit_codes(tmp_path):
    prob = tmp_path / "p.txt"
    prob.write_text("scheme: ZC\nphases: z\ntarget: 0 0.5 0\nhypercube: 0 0 0\nseeds: 2\n")
    assert run("search", prob)[0] == 4
    prob.write_text("scheme: ZC\nphases: z\ntarget: 0 0.5\nhypercube: 0 0 0\n")
    assert run("search", prob)[0] == 3
    out = tmp_path / "best.txt"
    code, text = run("search", "--preset", "nUA-AE", "--gate", "H", "--seeds", 1, "--out", out)
    assert code == 0 and out.exists()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\nscheme = AC\nfamily = RA\nn = 1\ntheta = 1.0\n")
    code, text = run("--config", cfg, "synth", "--out", os.devnull)
    assert code == 0 and float(rows(text)[0]["params_over_pi"]) == pytest.approx(2 / 3)
    code, text = run("--config", cfg, "synth", "--theta", 0.5, "--out", os.devnull)
    expect = math.acos(-0.25) / PI
    assert float(rows(text)[0]["params_over_pi"]) == pytest.approx(expect)
    cfg.write_text("colour = blue\n")
    assert run("--config", cfg, "synth", "--scheme", "PC", "--family", "basic")[0] == 2


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "f.txt"
    cli.write_atomic(target, "abc\n")
    cli.write_atomic(target, "def\n")
    assert target.read_text() == "def\n"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_pulse_threads(monkeypatch):
    monkeypatch.setenv("PULSE_THREADS", "1")
    assert cli.workers() == 1
    monkeypatch.setenv("PULSE_THREADS", "0")
    assert cli.workers() >= 1
    monkeypatch.delenv("PULSE_THREADS")
    assert cli.workers() >= 1


def test_numbers_printed_with_ten_digits():
    assert cli.fmt(1 / 3) == "0.333333333333"
    assert len(cli.fmt(math.pi).replace(".", "")) >= 10
