import json
import subprocess
import sys
from pathlib import Path

import pytest

from folspec.cli import (
    EXIT_ERROR,
    EXIT_FAIL,
    EXIT_INCONCLUSIVE,
    EXIT_PASS,
    EXIT_USAGE,
    UsageError,
    main,
    parse_invocation,
)
import folspec.cli as cli
from folspec.lab import Report, read_report


def test_spectrum_plan_defaults():
    plan = parse_invocation(["spectrum", "--model", "carriere", "--truncation", "64",
                             "--count", "20"])
    cfg = plan.config
    assert (cfg.kind, cfg.model, cfg.truncation, cfg.count) == ("spectrum", "carriere", 64, 20)
    assert plan.fmt == "json" and str(plan.out) == "reports/spectrum-carriere.json"
    assert cfg.tol("rel_tol") == 1e-8


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "hopf-de-rham", "count": 10, "truncation": 5}))
    plan = parse_invocation(["invariance", "--config", str(cfg), "--count", "40"])
    assert plan.config.count == 40
    assert plan.config.model == "hopf-de-rham" and plan.config.truncation == 5


def test_tol_goes_to_the_main_tolerance():
    assert parse_invocation(["estimates", "--tol", "1e-6"]).config.tol("slack") == 1e-6
    assert parse_invocation(["invariance", "--tol", "1e-6"]).config.tol("rel_tol") == 1e-6


def test_half_integer_truncation_kept():
    plan = parse_invocation(["spectrum", "--model", "hopf-spinor", "--truncation", "5.5"])
    assert plan.config.truncation == 5.5


@pytest.mark.parametrize("argv", [
    ["spectrum", "--format", "xml"],
    ["spectrum", "--bogus"],
    ["frobnicate"],
    ["spectrum", "--model", "klein-bottle"],
    ["convergence", "--ladder", "8,x"],
    ["spectrum", "--count", "0"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err.lower()


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(UsageError):
        parse_invocation(["spectrum", "--config", str(bad)])
    bad.write_text(json.dumps({"colour": 1}))
    with pytest.raises(UsageError, match="colour"):
        parse_invocation(["spectrum", "--config", str(bad)])


def test_models_listing(capsys):
    assert main(["models"]) == EXIT_PASS
    out = capsys.readouterr().out
    for name in ("carriere", "hopf-spinor", "circle-fibration", "synthetic"):
        assert name in out


def test_invariance_carriere_exit_0(tmp_path, capsys):
    out = tmp_path / "inv.json"
    assert main(["invariance", "--model", "carriere", "--out", str(out)]) == EXIT_PASS
    assert read_report(out).verdict == "pass"
    assert "verdict: PASS" in capsys.readouterr().out


def test_invariance_with_conjugation(tmp_path):
    out = tmp_path / "inv.json"
    code = main(["invariance", "--model", "carriere", "--truncation", "16", "--conjugation",
                 "--weight", "fourier: 0, 0, 0.7071067811865476", "--out", str(out), "--quiet"])
    assert code == EXIT_PASS
    assert any(c["name"].startswith("conjugation") for c in read_report(out).checks)


def test_estimates_summary_flags_equality(tmp_path, capsys):
    code = main(["estimates", "--model", "hopf-spinor", "--out", str(tmp_path / "e.json")])
    assert code == EXIT_PASS
    assert "limiting case" in capsys.readouterr().out


def test_scientific_failure_exit_1(tmp_path):
    # too tight for the N = 8 truncation of the default weights
    code = main(["invariance", "--model", "carriere", "--truncation", "8", "--quiet",
                 "--out", str(tmp_path / "r.json")])
    assert code == EXIT_FAIL


def test_computational_failure_exit_4(tmp_path, capsys):
    code = main(["cohomology", "--model", "hopf-spinor", "--out", str(tmp_path / "r.json")])
    assert code == EXIT_ERROR
    assert "computation failed" in capsys.readouterr().err


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["spectrum", "--model", "carriere", "--truncation", "8", "--quiet",
                 "--out", str(blocker / "r.json")])
    assert code == EXIT_ERROR


def test_inconclusive_exit_3(tmp_path, monkeypatch):
    def fake(plan):
        r = Report({})
        r.add_check("unsure", "inconclusive")
        return r

    monkeypatch.setattr(cli, "_run", fake)
    assert main(["spectrum", "--quiet", "--out", str(tmp_path / "r.json")]) == EXIT_INCONCLUSIVE


def test_csv_output(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--model", "carriere", "--truncation", "8", "--count", "6",
                 "--format", "csv", "--out", str(out), "--quiet"]) == EXIT_PASS
    lines = out.read_text().splitlines()
    assert lines[0] == "model,run,index,eigenvalue,residual" and len(lines) > 6


def test_identical_invocations_give_identical_reports(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        main(["cohomology", "--model", "carriere", "--truncation", "8", "--quiet", "--out", str(p)])
    a, b = (json.loads(p.read_text()) for p in paths)
    a.pop("meta"), b.pop("meta")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "folspec.cli", "models"], capture_output=True,
                          text=True, cwd=tmp_path)
    assert proc.returncode == 0 and "carriere" in proc.stdout


def test_synthetic_model_through_config(tmp_path):
    doc = Path(__file__).resolve().parent.parent / "docs" / "carriere-synthetic.json"
    cfg = tmp_path / "syn.json"
    cfg.write_text(json.dumps({"model": "synthetic", "parameters": {"document": str(doc)},
                               "count": 8}))
    out = tmp_path / "s.json"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out), "--quiet"]) == EXIT_PASS
    ev = read_report(out).runs[0]["eigenvalues"]
    assert min(abs(x) for x in ev) == pytest.approx(0.4812118250596, rel=1e-10)


def test_missing_synthetic_document_exit_4(tmp_path):
    cfg = tmp_path / "syn.json"
    cfg.write_text(json.dumps({"model": "synthetic", "parameters": {"document": "nope.json"}}))
    assert main(["spectrum", "--config", str(cfg), "--quiet",
                 "--out", str(tmp_path / "s.json")]) == EXIT_ERROR
