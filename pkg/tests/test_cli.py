import csv
import json
import subprocess
import sys

import pytest

from capwidth import cli

SEGMENTS = "ballproduct(rho=[1,2], I=[[1],[]], J=[[],[1]])"


def read_report(outdir):
    with (outdir / "report.csv").open() as fh:
        return list(csv.DictReader(fh))


def test_meanwidth_ball_exact(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["meanwidth", "--body", "ball(1)", "--samples", "40000",
                     "--seed", "3", "--out", str(out)])
    assert code == 0
    rows = read_report(out)
    m = [r for r in rows if r["parameter"] == "M"][0]
    assert float(m["value"]) == 2.0
    assert float(m["std_error"]) == 0.0
    assert m["seed"] == "3"
    assert m["budget"] == "40000"
    assert (out / "runlog.json").exists()


def test_report_bit_identical_across_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["meanwidth", "--body", "cube(1)", "--samples", "30000",
                         "--out", str(out)]) == 0
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()


def test_malformed_body_names_token(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["meanwidth", "--body", "blob(2)", "--out", str(tmp_path / "o")])
    assert "blob" in str(exc.value)


def test_malformed_body_subprocess_exit():
    proc = subprocess.run(
        [sys.executable, "-m", "capwidth.cli", "meanwidth", "--body", "ball(2",
         "--out", "/tmp/capwidth_cli_err"],
        capture_output=True, text=True,
    )
    assert proc.returncode != 0
    assert "position" in proc.stderr + proc.stdout


def test_green_and_squash_artifacts(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["green", "--body", "cube(1)", "--out", str(out)]) == 0
    rows = read_report(out)
    assert rows[-1]["verdict"] == "MINIMAL"
    assert cli.main(["squash", "--out", str(out)]) == 0
    series = (out / "series_squash.csv").read_text().splitlines()
    assert series[0] == "p,mean_width"
    assert len(series) == 9


def test_quermass_csv_schema(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["quermass", "--body", "cube(1)", "--budget", "60000",
                     "--out", str(out)]) == 0
    lines = (out / "quermass.csv").read_text().splitlines()
    assert lines[0] == "body,i,W_i,W_i_err,Wbar_i"
    assert len(lines) == 4  # header + W_0..W_2


def test_capacity_json_schema(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["capacity", "--body", "ball(1)", "--modes", "4", "--starts", "2",
                     "--out", str(out)]) == 0
    payload = json.loads((out / "capacity.json").read_text())
    assert set(payload) == {"body", "raw", "normalized", "modes", "starts", "converged", "seed"}
    assert payload["normalized"]["value"] == pytest.approx(1.0, abs=1e-9)


def test_localmin_failure_gates_exit(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["localmin", "--body", SEGMENTS, "--directions", "2",
                     "--samples", "30000", "--out", str(out)])
    assert code == 1
    payload = json.loads((out / "localmin.json").read_text())
    assert payload["passed"] is False
    assert payload["witness"] is not None
    rows = read_report(out)
    assert rows[-1]["verdict"] == "FAIL"


def test_localmin_pass_exits_zero(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["localmin", "--body", "ballproduct(rho=[1,1], I=[[1,2],[]], J=[[],[1,2]])",
                     "--directions", "2", "--samples", "30000", "--out", str(out)])
    assert code == 0


def test_search_series(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["search", "--body", "ellipsoid(2,1)", "--steps", "60",
                     "--out", str(out)]) == 0
    lines = (out / "series_search.csv").read_text().splitlines()
    assert lines[0] == "step,mean_width"
    assert float(lines[-1].split(",")[1]) == pytest.approx(2.8284271247461903, abs=1e-3)


def test_run_config_sections_and_determinism(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[global]\nseed = 5\nsamples = 30000\nworkers = 2\n\n"
        "[meanwidth disk]\nbody = ball(1)\n\n"
        "[green square]\nbody = cube(1)\n\n"
        "[meanwidth square mc]\nbody = cube(1)\nantithetic = false\n"
    )
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
    rows = read_report(a)
    # section order is preserved regardless of worker interleaving
    assert [r["experiment"] for r in rows][:3] == ["meanwidth", "meanwidth", "green"]
    assert all(r["seed"] == "5" for r in rows)
    log = json.loads((a / "runlog.json").read_text())
    assert [c["name"] for c in log["cells"]] == ["meanwidth disk", "green square", "meanwidth square mc"]


def test_run_config_unknown_section(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[frobnicate all]\nbody = ball(1)\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", str(cfg), "--out", str(tmp_path / "o")])
    assert "frobnicate" in str(exc.value)


def test_run_config_cell_error_is_local(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[global]\nseed = 2\nsamples = 20000\n\n"
        "[meanwidth bad]\nbody = blob(1)\n\n"
        "[meanwidth good]\nbody = ball(1)\n"
    )
    out = tmp_path / "o"
    code = cli.main(["run", str(cfg), "--out", str(out)])
    assert code == 1
    rows = read_report(out)
    # the bad cell fails, the good cell still reports
    assert any(r["verdict"] == "FAIL" and "blob" in r["parameter"] for r in rows)
    assert any(r["parameter"] == "M" and float(r["value"]) == 2.0 for r in rows)


def test_probe_informational_verdict(tmp_path):
    out = tmp_path / "o"
    body = "ballproduct(rho=[1,1,1], I=[[1],[],[2]], J=[[],[1],[2]])"
    code = cli.main(["probe", "--body", body, "--samples", "40000", "--out", str(out)])
    # increase/decrease are findings, not failures
    assert code == 0
    rows = read_report(out)
    verdicts = {r["verdict"] for r in rows}
    assert verdicts & {"decrease", "increase", "inconclusive"}
