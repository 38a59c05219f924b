import json
import math
import subprocess
import sys

import numpy as np
import pytest

from socfeas import io
from socfeas.cli import (
    ExperimentRow,
    check_certificate,
    complexity_measure,
    expand_suite,
    fit_iteration_constant,
    main,
    rows_to_csv,
)
from socfeas.conditioning import Instance, generate
from socfeas.errors import ParseError
from socfeas.lorentz import ConeStructure


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "primal", "--m", "2", "--cone", "3", "--seed", "11", "--out", str(d / "p.txt")]) == 0
    assert main(["generate", "dual", "--m", "3", "--cone", "2", "2", "--seed", "7", "--out", str(d / "d.txt")]) == 0
    codes = {
        "p": main(["solve", str(d / "p.txt"), "-o", str(d / "p.json")]),
        "d": main(["solve", str(d / "d.txt"), "-o", str(d / "d.json"), "--condition-estimate", "--samples", "40"]),
    }
    return d, codes


def test_generate_is_deterministic(tmp_path, files):
    d, _ = files
    main(["generate", "primal", "--m", "2", "--cone", "3", "--seed", "11", "--out", str(tmp_path / "again.txt")])
    assert (tmp_path / "again.txt").read_bytes() == (d / "p.txt").read_bytes()
    assert "margin: 0.5" in (d / "p.txt").read_text()


def test_instance_round_trip():
    inst = generate("dual", 3, ConeStructure((2, 1)), 0.25, 5)
    back = io.parse_instance(io.format_instance(inst))
    assert np.array_equal(back.A, inst.A) and np.array_equal(back.certificate, inst.certificate)
    assert (back.cone, back.kind, back.seed, back.margin) == (inst.cone, "dual", 5, 0.25)
    bare = Instance(inst.A, inst.cone)
    assert io.parse_instance(io.format_instance(bare)).certificate is None


@pytest.mark.parametrize(
    "text",
    [
        "m: 1\ncone: 1\nmatrix:\n1 2\n",
        "version: 1\nm: 1\ncone: 1\n",
        "version: 1\nm: 1\ncone: 1\nmatrix:\n1 2 3\n",
        "version: 1\nm: 1\ncone: 1\nmatrix:\n1 x\n",
        "version: 1\nm: 1\ncone: 1\nmatrix:\n1 2\ncertificate:\n1 0\n",
        "version: 1\nm: 1\ncone: 1\nkind: dual\nmatrix:\n1 2\ncertificate:\n1 0\n",
        "version: 1\nm: 1\ncone: 0\nmatrix:\n1\n",
    ],
)
def test_malformed_instances(text):
    with pytest.raises(ParseError):
        io.parse_instance(text)


def test_solve_exit_codes(files):
    d, codes = files
    assert codes == {"p": 0, "d": 1}
    rp = io.RunReport.parse((d / "p.json").read_text())
    rd = io.RunReport.parse((d / "d.json").read_text())
    assert rp.outcome == "primal" and rd.outcome == "dual"
    assert rd.condition is not None and rd.condition["c"][0] <= rd.condition["c"][1]
    assert len(rp.trace) == rp.iterations + 1


def test_check_certificates(files, capsys):
    d, _ = files
    assert run(["check", d / "p.txt", d / "p.json"], capsys)[0] == 0
    assert run(["check", d / "d.txt", d / "d.json"], capsys)[0] == 0
    assert run(["check", d / "p.txt", d / "p.json", "--gamma", "1e-9"], capsys)[0] == 1
    doc = json.loads((d / "d.json").read_text())
    doc["certificate"]["y"] = [-v for v in doc["certificate"]["y"]]
    (d / "neg.json").write_text(json.dumps(doc))
    assert run(["check", d / "d.txt", d / "neg.json"], capsys)[0] == 1


def test_check_wrong_shapes():
    inst = generate("dual", 2, ConeStructure((2,)), 0.5, 0)
    with pytest.raises(ParseError):
        check_certificate(inst, {"kind": "dual", "y": [1.0]})
    with pytest.raises(ParseError):
        check_certificate(inst, {"kind": "other"})


def test_error_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("version: 1\nm: 2\ncone: 2\nmatrix:\n1 2 3\n")
    code, out = run(["solve", bad], capsys)
    assert code == 3 and "ParseError" in out.err
    assert run(["solve", tmp_path / "missing.txt"], capsys)[0] == 3
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 3
    zero = tmp_path / "zero.txt"
    zero.write_text("version: 1\nm: 1\ncone: 1 1\nmatrix:\n1 1 0 0\n")
    assert run(["solve", zero], capsys)[0] == 3  # a zero block


def test_precision_exit_code(tmp_path, capsys):
    f = tmp_path / "ill.txt"
    f.write_text("version: 1\nm: 1\ncone: 1\nmatrix:\n1.0 -1.0\n")
    code, out = run(["solve", f, "--fixed-precision-bits", "72", "--no-trace"], capsys)
    assert code == 2
    rep = io.RunReport.parse(out.out)
    assert rep.outcome == "precision_exceeded" and rep.c_u > 0 and rep.trace == []


def test_report_round_trip(files):
    d, _ = files
    text = (d / "d.json").read_text()
    rep = io.RunReport.parse(text)
    assert rep.emit() == text
    assert io.RunReport.parse(rep.emit()) == rep
    with pytest.raises(ParseError):
        io.RunReport.parse("not json")
    with pytest.raises(ParseError):
        io.RunReport.parse('{"version": 99}')


def test_reports_are_byte_identical(tmp_path, files):
    d, _ = files
    main(["solve", str(d / "d.txt"), "-o", str(tmp_path / "again.json"), "--condition-estimate", "--samples", "40"])
    assert (tmp_path / "again.json").read_bytes() == (d / "d.json").read_bytes()


def test_timing_flag(tmp_path, files):
    d, _ = files
    main(["solve", str(d / "d.txt"), "--timing", "--no-trace", "-o", str(tmp_path / "t.json")])
    assert io.RunReport.parse((tmp_path / "t.json").read_text()).wall_clock > 0


def test_empty_suite(tmp_path, capsys):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"entries": []}))
    code, _ = run(["experiment", suite, "--out", tmp_path / "out"], capsys)
    assert code == 0
    csv_text = (tmp_path / "out" / "summary.csv").read_text()
    assert csv_text.splitlines() == [",".join(ExperimentRow.__dataclass_fields__)]
    assert json.loads((tmp_path / "out" / "fit.json").read_text())["K0"] is None


def test_small_experiment(tmp_path, capsys):
    suite = tmp_path / "suite.json"
    spec = {"samples": 20, "entries": [{"kind": "dual", "m": 2, "cone": [2], "seeds": [1, 2]},
                                       {"kind": "primal", "m": 1, "cone": [2], "seeds": [1], "gamma": [0.5]}]}
    suite.write_text(json.dumps(spec))
    code, out = run(["experiment", suite, "--out", tmp_path / "out"], capsys)
    assert code == 0
    lines = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert len(lines) == 4
    assert len(list((tmp_path / "out").glob("*.json"))) == 4  # three reports and the fit
    assert "K0 =" in out.out


def test_expand_suite_ids_sorted():
    spec = {"entries": [{"kind": "primal", "m": 2, "cone": [3], "seeds": [2, 1], "gamma": [0.5, 0.1]}]}
    entries = expand_suite(spec)
    assert len(entries) == 4 and [e.id for e in entries] == sorted(e.id for e in entries)
    assert {e.gamma for e in entries} == {0.5, 0.1}


def _row(iterations, cx, ok=True):
    return ExperimentRow("x", "dual", 1, "2", 1, 0, 0.5, 0.1, "dual" if ok else "error", iterations, 50,
                         0, 0, 0, 1, 1, 2, cx, ok)


def test_fit_and_csv():
    rows = [_row(10, 1.0), _row(20, 2.0), _row(999, 1.0, ok=False)]
    assert fit_iteration_constant(rows) == pytest.approx(10.0)
    assert fit_iteration_constant([]) is None
    text = rows_to_csv(rows[:1])
    assert text.splitlines()[1].split(",")[9] == "10"
    assert complexity_measure(1, math.e, 1.0) == pytest.approx(1.0)


def test_median_iterations_grow_with_r(suite_runs):
    by_r = {}
    for _, row, _ in suite_runs:
        by_r.setdefault(row.r, []).append(row.iterations)
    medians = [float(np.median(by_r[r])) for r in sorted(by_r)]
    assert len(medians) >= 3
    assert all(a < b for a, b in zip(medians, medians[1:])), medians


def test_console_exit_codes(files, tmp_path):
    d, _ = files
    cmd = [sys.executable, "-m", "socfeas"]
    assert subprocess.run([*cmd, "check", d / "d.txt", d / "d.json"], capture_output=True).returncode == 0
    assert subprocess.run([*cmd, "solve"], capture_output=True).returncode == 3
    (tmp_path / "bad.txt").write_text("garbage\n")
    assert subprocess.run([*cmd, "solve", tmp_path / "bad.txt"], capture_output=True).returncode == 3
