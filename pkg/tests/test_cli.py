"""End-to-end command line behavior, including exit codes and artifacts."""

import hashlib
import json
import subprocess
import sys

import pytest

from scopf.cli import (EXIT_FAILED, EXIT_INVALID_INPUT, EXIT_OK, EXIT_USAGE,
                       main)

RTS_SOLVE = ["solve", "ieee_rts24", "--gamma-fraction", "0.05"]


def run(argv):
    """main() returns its code, but validation failures exit; accept both."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_validate_builtin_case(capsys):
    assert run(["validate", "ieee_rts24"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "24 buses, 38 branches" in out
    assert "0 errors" in out


def test_validate_synthetic_spec(capsys):
    assert run(["validate", "synthetic:30:7"]) == EXIT_OK
    assert "30 buses" in capsys.readouterr().out


def test_missing_case_file_is_invalid_input(capsys):
    assert run(["validate", "/no/such/case.json"]) == EXIT_INVALID_INPUT
    assert "error" in capsys.readouterr().err


def test_bad_synthetic_spec_is_invalid_input():
    assert run(["validate", "synthetic:30"]) == EXIT_INVALID_INPUT


def test_usage_errors_exit_64():
    assert run([]) == EXIT_USAGE
    assert run(["frobnicate", "ieee_rts24"]) == EXIT_USAGE
    assert run(["solve", "ieee_rts24", "--variant", "clairvoyant"]) == EXIT_USAGE
    assert run(["report", "ieee_rts24"]) == EXIT_USAGE  # -o is required


def test_inconsistent_case_data_exits_2(tmp_path, capsys):
    assert run(["convert", "synthetic:20:3", "-o", str(tmp_path / "c.json")]) == EXIT_OK
    data = json.loads((tmp_path / "c.json").read_text())
    for bus in data["buses"]:
        bus["is_reference"] = False
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(data))
    assert run(["solve", str(broken)]) == EXIT_INVALID_INPUT
    assert "reference" in capsys.readouterr().err


def test_solve_writes_canonical_solution(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert run(RTS_SOLVE + ["-o", str(out)]) == EXIT_OK
    assert "objective" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["format"] == "scopf-solution"
    assert doc["variant"] == "corrective"
    assert doc["case"] == "ieee_rts24"
    assert doc["objective"] > 0
    assert "timings" not in doc


def test_solve_stdout_when_no_output(capsys):
    assert run(["solve", "synthetic:20:3", "--gamma-fraction", "0.3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "scopf-solution"


def test_solve_monolithic_agrees(tmp_path):
    a, b = tmp_path / "iter.json", tmp_path / "mono.json"
    argv = ["solve", "synthetic:20:3", "--gamma-fraction", "0.3"]
    assert run(argv + ["-o", str(a)]) == EXIT_OK
    assert run(argv + ["--monolithic", "-o", str(b)]) == EXIT_OK
    obj_a = json.loads(a.read_text())["objective"]
    obj_b = json.loads(b.read_text())["objective"]
    assert obj_a == pytest.approx(obj_b, rel=1e-8)


def test_solve_simplex_backend_agrees(tmp_path):
    # the reference backend is dense and desk-scale by design; cross-check
    # it through the CLI on a case it is meant for
    from scopf.network import save_case
    from test_scopf import triangle_toy
    case = tmp_path / "triangle.json"
    save_case(triangle_toy(), case)
    a, b = tmp_path / "h.json", tmp_path / "s.json"
    argv = ["solve", str(case), "--gamma-fraction", "0.5"]
    assert run(argv + ["-o", str(a)]) == EXIT_OK
    assert run(argv + ["--backend", "simplex", "-o", str(b)]) == EXIT_OK
    assert json.loads(a.read_text())["objective"] == \
        pytest.approx(json.loads(b.read_text())["objective"], rel=1e-8)
    assert json.loads(b.read_text())["objective"] == pytest.approx(905.6, abs=1e-6)


def test_infeasible_shed_cap_exits_3_with_diagnosis(capsys):
    assert run(["solve", "ieee_rts24", "--gamma-fraction", "0.02"]) == EXIT_FAILED
    err = capsys.readouterr().err
    assert "infeasible" in err
    diag = json.loads(err.strip().splitlines()[-1])
    assert diag["contingency"] == 10
    assert diag["islanded_buses"] == [6]


def test_nonconvergence_exits_3(tmp_path, capsys):
    # a case whose corrective solve needs cuts cannot finish in one pass
    from scopf.network import save_case
    from test_scopf import triangle_toy
    case = tmp_path / "triangle.json"
    save_case(triangle_toy(), case)
    rc = run(["solve", str(case), "--gamma-fraction", "0.5",
              "--max-iterations", "1"])
    assert rc == EXIT_FAILED
    assert "error" in capsys.readouterr().err


def test_solve_then_verify_round_trip(tmp_path, capsys):
    sol = tmp_path / "sol.json"
    assert run(RTS_SOLVE + ["-o", str(sol)]) == EXIT_OK
    assert run(["verify", "ieee_rts24", str(sol)]) == EXIT_OK
    assert "verification passed" in capsys.readouterr().out


def test_verify_flags_tampered_solution(tmp_path, capsys):
    sol = tmp_path / "sol.json"
    assert run(RTS_SOLVE + ["-o", str(sol)]) == EXIT_OK
    doc = json.loads(sol.read_text())
    doc["generation_mw"][0] += 25.0
    sol.write_text(json.dumps(doc))
    assert run(["verify", "ieee_rts24", str(sol)]) == EXIT_FAILED
    assert "verification failed" in capsys.readouterr().out


def test_screen_writes_ranking_csv(tmp_path, capsys):
    out = tmp_path / "rank.csv"
    assert run(["screen", "ieee_rts24", "-o", str(out)]) == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "rank,branch_id,kind,max_ratio,worst_branch"
    assert len(lines) == 39
    ratios = [float(ln.split(",")[3]) for ln in lines[1:]]
    assert ratios == sorted(ratios, reverse=True)


def test_screen_table_to_stdout(capsys):
    assert run(["screen", "ieee_rts24"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "max_ratio" in out and len(out.strip().splitlines()) == 39


def test_bench_summary_and_csv(tmp_path, capsys):
    out = tmp_path / "rows.csv"
    assert run(["bench", "synthetic:20:3", "--gamma-fraction", "0.3",
                "--phases", "-o", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "median_theta_update_s" in text
    assert '"objective"' in text  # the --phases line is one JSON object
    header = out.read_text().splitlines()[0]
    assert header.startswith("branch_id,kind,t_theta_update_s")


def test_report_directory_with_verified_hashes(tmp_path, capsys):
    outdir = tmp_path / "run"
    assert run(["report", "synthetic:20:3", "--gamma-fraction", "0.3",
                "--bench", "-o", str(outdir)]) == EXIT_OK
    assert "report with" in capsys.readouterr().out
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["format"] == "scopf-run-manifest"
    assert manifest["config"]["gamma_fraction"] == 0.3
    names = set(manifest["outputs"])
    assert {"solution.json", "dispatch.csv", "flows.csv", "outages.csv",
            "loading.png", "convergence.png"} <= names
    assert any(n.startswith("method_times") for n in names)
    for name, digest in manifest["outputs"].items():
        blob = (outdir / name).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == digest
    # everything in the directory is accounted for
    on_disk = {p.name for p in outdir.iterdir()} - {"manifest.json"}
    assert on_disk == names


def test_report_accepts_existing_solution(tmp_path):
    sol = tmp_path / "sol.json"
    assert run(["solve", "synthetic:20:3", "--gamma-fraction", "0.3",
                "-o", str(sol)]) == EXIT_OK
    outdir = tmp_path / "render"
    assert run(["report", "synthetic:20:3", "--gamma-fraction", "0.3",
                "--solution", str(sol), "-o", str(outdir)]) == EXIT_OK
    rendered = json.loads((outdir / "solution.json").read_text())
    assert rendered == json.loads(sol.read_text())


def test_convert_is_idempotent(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["convert", "ieee_rts24", "-o", str(a)]) == EXIT_OK
    assert run(["convert", str(a), "-o", str(b)]) == EXIT_OK
    assert a.read_text() == b.read_text()


def test_overlay_flags_load(tmp_path, capsys):
    rel = tmp_path / "rel.csv"
    rel.write_text("branch_id,outage_probability\n0,0.5\n")
    assert run(["validate", "ieee_rts24", "--reliability", str(rel)]) == EXIT_OK
    bad = tmp_path / "bad.csv"
    bad.write_text("branch_id,outage_probability\n99,0.5\n")
    assert run(["validate", "ieee_rts24", "--reliability", str(bad)]) == \
        EXIT_INVALID_INPUT


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "scopf.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("scopf ")
