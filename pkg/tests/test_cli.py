# Standard library imports
import hashlib
import io
import json
import os
import subprocess
import sys
from pathlib import Path

# Third-party imports
import dotenv
import pandas as pd
import pytest

# Local imports
import main as cli
import src.settings as settings_module
from src.output_utils import TOOL_VERSION
from tests.conftest import SCENARIO_DIR

PROJECT_ROOT = Path(__file__).resolve().parent.parent

SMALL_TOY = "function F=[[1,z],[0,z-1]]\nregion rect re=[-2,2] im=[-2,2] grid=21x21\n"
EQ2_FINE = "function F=[[1,0],[0,z]]\nregion disk center=0 radius=0.95 grid=101x128\n"


@pytest.fixture
def scenario_file(tmp_path):
    def write(text: str, name: str = "scenario.svf") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


def _run(argv, capsys):
    status = cli.main(argv)
    out = capsys.readouterr().out
    return status, out


def test_scan_prints_csv(scenario_file, capsys):
    status, out = _run(["scan", scenario_file(SMALL_TOY)], capsys)
    assert status == cli.EXIT_OK
    df = pd.read_csv(io.StringIO(out))
    assert list(df.columns) == ["re", "im", "s1", "s2", "flag"]
    assert len(df) == 21 * 21
    assert df.loc[0, "re"] == -2.0 and df.loc[0, "im"] == -2.0
    assert df.loc[1, "re"] == pytest.approx(-1.8)
    assert (df["flag"] == 0).all()


def test_scan_single_index_to_file(scenario_file, tmp_path, capsys):
    out_path = tmp_path / "field.csv"
    status, out = _run(["scan", scenario_file(SMALL_TOY), "--k", "2", "--out", str(out_path)], capsys)
    assert status == cli.EXIT_OK
    assert out == ""
    df = pd.read_csv(out_path)
    assert list(df.columns) == ["re", "im", "s2", "flag"]
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_scan_rejects_bad_index(scenario_file, capsys):
    assert _run(["scan", scenario_file(SMALL_TOY), "--k", "3"], capsys)[0] == cli.EXIT_NOT_APPLICABLE
    assert _run(["scan", scenario_file(SMALL_TOY), "--k", "two"], capsys)[0] == cli.EXIT_NOT_APPLICABLE


def test_scan_marks_flagged_points(scenario_file, capsys):
    text = "matrix Z=[[0]]\nfunction F=resolvent(Z)\nregion rect re=[-1,1] im=[-1,1] grid=3x3\n"
    status, out = _run(["scan", scenario_file(text)], capsys)
    assert status == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "re,im,s1,flag"
    assert lines[5] == "0.0,0.0,,1"


def test_extrema_json(scenario_file, capsys):
    status, out = _run(["extrema", scenario_file(SMALL_TOY)], capsys)
    assert status == cli.EXIT_OK
    reports = json.loads(out)
    assert [(r["k"], r["kind"]) for r in reports] == [(1, "max"), (1, "min"), (2, "max"), (2, "min")]
    s1_min = reports[1]
    assert abs(complex(s1_min["location"]["re"], s1_min["location"]["im"])) < 1e-4


def test_verify_mean_value(scenario_file, capsys):
    argv = ["verify", scenario_file(SMALL_TOY), "--check", "mean-value", "--z0", "0,0", "--r", "0.5",
            "--x", "e2", "--K", "2", "--N", "256"]
    status, out = _run(argv, capsys)
    assert status == cli.EXIT_OK
    report = json.loads(out)
    assert report["check"] == "mean-value"
    assert report["verdict"] == "certified"
    assert report["witnesses"]["lhs"] == pytest.approx(1.5, abs=1e-10)


def test_verify_inconclusive_and_refuted(scenario_file, capsys):
    toy = scenario_file(SMALL_TOY)
    assert _run(["verify", toy, "--check", "min-principle"], capsys)[0] == cli.EXIT_INCONCLUSIVE
    assert _run(["verify", toy, "--check", "factorize", "--z0", "0,0"], capsys)[0] == cli.EXIT_INCONCLUSIVE
    eq2 = str(SCENARIO_DIR / "eq2_diag.svf")
    argv = ["verify", eq2, "--check", "max-direction", "--x", "e2", "--K", "2", "--samples", "8"]
    assert _run(argv, capsys)[0] == cli.EXIT_REFUTED


def test_verify_resolvent_scenario(capsys):
    status, out = _run(["verify", str(SCENARIO_DIR / "jordan_resolvent.svf"), "--check", "resolvent"], capsys)
    assert status == cli.EXIT_OK
    assert json.loads(out)["verdict"] == "certified"


def test_verify_spectral_checks_on_bound_matrix(scenario_file, capsys):
    text = "matrix A=[[0,1],[0,0]]\nfunction F=[[z]]\n"
    path = scenario_file(text)
    assert _run(["verify", path, "--check", "laplace", "--matrix", "A", "--z=2,0"], capsys)[0] == cli.EXIT_OK
    assert _run(["verify", path, "--check", "cauchy", "--matrix", "A", "--t", "2"], capsys)[0] == cli.EXIT_OK
    argv = ["verify", path, "--check", "resolvent-derivative", "--matrix", "A", "--z", "1,1"]
    assert _run(argv, capsys)[0] == cli.EXIT_OK


def test_verify_not_applicable(scenario_file, capsys):
    toy = scenario_file(SMALL_TOY)
    assert _run(["verify", toy, "--check", "laplace"], capsys)[0] == cli.EXIT_NOT_APPLICABLE
    assert _run(["verify", toy, "--check", "mean-value", "--x", "e3"], capsys)[0] == cli.EXIT_NOT_APPLICABLE
    assert _run(["verify", toy, "--check", "mean-value", "--x", "1,foo"], capsys)[0] == cli.EXIT_NOT_APPLICABLE
    assert _run(["verify", toy, "--check", "max-direction", "--z0", "5,0"], capsys)[0] == cli.EXIT_NOT_APPLICABLE
    no_region = scenario_file("function F=[[z]]\n", "bare.svf")
    assert _run(["scan", no_region], capsys)[0] == cli.EXIT_NOT_APPLICABLE


def test_scenario_and_io_errors(scenario_file, tmp_path, capsys):
    assert _run(["scan", scenario_file("function F=[[1,z],[0,]]\n")], capsys)[0] == cli.EXIT_SCENARIO
    assert _run(["scan", str(tmp_path / "missing.svf")], capsys)[0] == cli.EXIT_IO
    out_path = tmp_path / "no" / "such" / "dir" / "field.csv"
    assert _run(["scan", scenario_file(SMALL_TOY), "--out", str(out_path)], capsys)[0] == cli.EXIT_IO


def test_unknown_check_is_a_usage_error(scenario_file):
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", scenario_file(SMALL_TOY), "--check", "nonsense"])
    assert info.value.code == 2


def test_manifest(scenario_file, tmp_path, capsys):
    path = scenario_file(SMALL_TOY)
    manifest_path = tmp_path / "run.json"
    argv = ["verify", path, "--check", "frobenius", "--manifest", str(manifest_path), "--seed", "7"]
    assert _run(argv, capsys)[0] == cli.EXIT_INCONCLUSIVE
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    assert manifest["scenario_sha256"] == hashlib.sha256(SMALL_TOY.encode("utf-8")).hexdigest()
    assert manifest["command"] == "verify"
    assert manifest["seed"] == 7
    assert manifest["flags"]["check"] == "frobenius"
    assert manifest["checks"][0]["verdict"] == "inconclusive"
    assert manifest["tool_version"] == TOOL_VERSION


def test_explore_and_pseudospectra(scenario_file, capsys):
    status, out = _run(["explore", scenario_file(SMALL_TOY)], capsys)
    assert status == cli.EXIT_OK
    df = pd.read_csv(io.StringIO(out))
    assert list(df.columns) == ["re", "im", "s1", "s2", "frobenius", "abs_det", "condition", "flag"]
    assert df["abs_det"].to_numpy() == pytest.approx((df["s1"] * df["s2"]).to_numpy())

    status, out = _run(["pseudospectra", str(SCENARIO_DIR / "jordan_resolvent.svf")], capsys)
    assert status == cli.EXIT_OK
    df = pd.read_csv(io.StringIO(out))
    assert list(df.columns) == ["re", "im", "smin", "resolvent_norm", "flag"]
    assert df["resolvent_norm"].to_numpy() == pytest.approx(1.0 / df["smin"].to_numpy())
    assert _run(["pseudospectra", scenario_file(SMALL_TOY)], capsys)[0] == cli.EXIT_NOT_APPLICABLE


def test_config_file_overrides_settings(scenario_file, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"direction_derivatives": 2}), encoding="utf-8")
    argv = ["verify", str(SCENARIO_DIR / "eq2_diag.svf"), "--check", "max-direction", "--z0", "0,0",
            "--samples", "8", "--config", str(config)]
    status, out = _run(argv, capsys)
    assert status == cli.EXIT_OK
    assert json.loads(out)["parameters"]["Kd"] == 2


def _subprocess_scan(scenario: str, out: Path, threads: str):
    env = dict(os.environ, SVFIELD_THREADS=threads)
    return subprocess.run([sys.executable, str(PROJECT_ROOT / "main.py"), "scan", scenario, "--out", str(out)],
                          cwd=PROJECT_ROOT, env=env, capture_output=True, text=True)


def test_scan_is_byte_identical_across_thread_counts(scenario_file, tmp_path):
    scenario = scenario_file(EQ2_FINE)
    one, four = tmp_path / "one.csv", tmp_path / "four.csv"
    first = _subprocess_scan(scenario, one, "1")
    second = _subprocess_scan(scenario, four, "4")
    assert first.returncode == 0, first.stderr
    assert second.returncode == 0, second.stderr
    assert one.read_bytes() == four.read_bytes()
    df = pd.read_csv(one)
    assert df["s1"].max() - df["s1"].min() <= 1e-10


def test_cli_exit_code_from_subprocess(tmp_path):
    broken = tmp_path / "broken.svf"
    broken.write_text("region rect re=[0,1] im=[0,1] grid=3x3\n", encoding="utf-8")
    result = subprocess.run([sys.executable, str(PROJECT_ROOT / "main.py"), "scan", str(broken)],
                            cwd=PROJECT_ROOT, capture_output=True, text=True)
    assert result.returncode == 2
    assert "no function" in result.stderr


def test_malformed_vector_from_subprocess(scenario_file):
    result = subprocess.run([sys.executable, str(PROJECT_ROOT / "main.py"), "verify", scenario_file(SMALL_TOY),
                             "--check", "mean-value", "--x", "1,foo"],
                            cwd=PROJECT_ROOT, capture_output=True, text=True)
    assert result.returncode == cli.EXIT_NOT_APPLICABLE
    assert "Traceback" not in result.stderr
    assert "--x expects" in result.stderr


def test_environment_file_is_read_once_by_settings():
    assert settings_module.load_dotenv is dotenv.load_dotenv
    assert not hasattr(cli, "load_dotenv")
