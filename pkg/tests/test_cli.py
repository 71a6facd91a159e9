import json
import subprocess
import sys

import pytest

from stabinv.cli import EXIT_DIVERGED, EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, dumps, main
from stabinv.inversion import APPROXIMATE
from stabinv.polymat import RatMatrix, column
from stabinv.ratcore import RatFn, S
from stabinv.tolerances import TOL


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _zeros(rep):
    return sorted(complex(*z["z"]).real for z in rep["zeros"]["all"])


def test_analyze_ex1(capsys):
    code, out, _ = run(capsys, "analyze", "builtin:ex1")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["rank"] == 2 and rep["pivot_columns"] == [0, 1]
    assert not rep["minimum_phase"]
    assert [complex(*z["z"]).real for z in rep["zeros"]["rhp"]] == pytest.approx([1.0])


def test_analyze_from_file(tmp_path, capsys, ex2):
    f = tmp_path / "p.json"
    f.write_text(json.dumps(ex2.to_json()))
    code, out, _ = run(capsys, "analyze", str(f))
    assert code == EXIT_OK
    assert _zeros(json.loads(out)) == pytest.approx([10.0])


def test_analyze_output_is_deterministic(tmp_path, capsys):
    run(capsys, "analyze", "builtin:ex1-perturbed", "--out", str(tmp_path / "a"))
    run(capsys, "analyze", "builtin:ex1-perturbed", "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()


def test_parse_error_has_position(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text('{"entries": [\n  [1,, 2]]}')
    code, _, err = run(capsys, "analyze", str(f))
    assert code == EXIT_PARSE and "line 2" in err and "column" in err


def test_unknown_builtin_and_tolerance(capsys):
    assert run(capsys, "analyze", "builtin:nope")[0] == EXIT_PARSE
    assert run(capsys, "analyze", "builtin:ex1", "--tol", "no_such=1")[0] == EXIT_PARSE


def test_tolerance_override_is_restored(capsys):
    before = TOL.zero_tol
    assert run(capsys, "analyze", "builtin:ex2", "--tol", "zero_tol=1e-6")[0] == EXIT_OK
    assert TOL.zero_tol == before


def test_invert_exact_unstable_classification(tmp_path, capsys):
    y = tmp_path / "y.json"
    y.write_text(json.dumps(column([RatFn(1, S + 1), RatFn(1, S + 2)]).to_json()))
    code, out, _ = run(capsys, "invert", "builtin:ex1", "--method", "exact", "--y", str(y))
    rep = json.loads(out)
    assert code == EXIT_OK and rep["classification"] == "exact_unstable" and rep["projector_ok"]
    poles = [complex(*p) for p in rep["report"]["certificate_poles"]]
    assert any(abs(p - 1) < 1e-9 for p in poles)


def test_invert_tp_ex2(capsys):
    code, out, _ = run(capsys, "invert", "builtin:ex2", "--method", "tp", "--weights", '{"omega_B": 30}',
                       "--y", "builtin:ex2-desired")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["stable"] and rep["classification"] == APPROXIMATE


def test_invert_precondition_exit(capsys):
    code, _, err = run(capsys, "invert", "builtin:ex2", "--method", "sik")
    assert code == EXIT_PRECONDITION and "full row rank" in err


def test_synth_ex1(capsys):
    code, out, _ = run(capsys, "synth", "builtin:ex1")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["internally_stable"] and rep["synthesis"]["gamma"] <= 10
    assert rep["seconds"] is None


def _scenario(tmp_path, **kw):
    base = {"plant": "builtin:ex1", "inverse_ff": {"method": "sik"}, "reference": {"type": "step"}, "t_final": 5.0}
    base.update(kw)
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(base))
    return str(f)


def test_simulate_writes_trace_and_metrics(tmp_path, capsys):
    out = tmp_path / "out"
    code, _, _ = run(capsys, "simulate", _scenario(tmp_path), "--out", str(out))
    assert code == EXIT_OK
    assert (out / "trace.csv").read_text().startswith("t,u1,u2,y1,y2")
    m = json.loads((out / "metrics.json").read_text())
    assert not m["diverged"] and m["decay_fit"]["beta"] > 0


def test_simulate_json_format(tmp_path, capsys):
    out = tmp_path / "out"
    run(capsys, "simulate", _scenario(tmp_path, t_final=0.1), "--out", str(out), "--format", "json")
    assert set(json.loads((out / "trace.json").read_text())) >= {"t", "u", "y", "e"}


def test_simulate_divergence_exit(tmp_path, capsys):
    sc = _scenario(tmp_path, plant={"entries": [[{"num": ["-1", "1"], "den": ["2", "1"]}]]},
                   inverse_ff={"method": "exact"}, t_final=40.0)
    assert run(capsys, "simulate", sc)[0] == EXIT_DIVERGED


def test_simulate_rejects_unknown_field(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", _scenario(tmp_path, colour="red"))
    assert code == EXIT_PARSE and "colour" in err


def test_reproduce_ex2(tmp_path, capsys):
    out = tmp_path / "ex2"
    assert run(capsys, "reproduce", "ex2", "--out", str(out))[0] == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["membership"] is False and rep["inverse_stable"]
    assert rep["pseudo_inverse"] == RatMatrix([[RatFn(S**3 + 8 * S**2 + 17 * S + 10, S**3 - 74 * S - 260),
                                                RatFn(S**2 + 3 * S + 2, S**3 - 74 * S - 260)]]).to_json()
    assert rep["decay_fit"]["phi"] > 0
    assert (out / "tracking.csv").exists()


def test_dumps_is_stable():
    assert dumps({"b": 1.0, "a": [0.1, 2]}) == dumps({"a": [0.1, 2], "b": 1.0})
    assert json.loads(dumps({"x": 0.1}))["x"] == 0.1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "stabinv.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "reproduce" in r.stdout
