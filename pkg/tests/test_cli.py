import io
import subprocess
import sys

import numpy as np
import pytest

from swpm.cli import CSV_HEADER, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, read_csv
from swpm.config import parse_config

SMOKE = """\
scheme=pthf
m0=32
N=5
tEnd=0.6
timeGridPoints=31
workerCount=1
seed=9
"""


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "smoke.cfg"
    p.write_text(SMOKE)
    return p


def test_run_writes_long_csv(cfg, tmp_path):
    out = tmp_path / "a.csv"
    code, text = run(["run", "--config", str(cfg), "--out", str(out)])
    assert code == EXIT_OK
    assert "wrote 465 rows" in text
    assert "t=0.6 s: E=" in text and "timing:" in text
    comments, rows = read_csv(out)
    # 31 times x 3 moments x 5 statistics
    assert len(rows) == 465
    assert comments["source"] == "swpm" and comments["m0"] == "32"
    assert parse_config("\n".join(f"{k}={v}" for k, v in comments.items() if k not in ("source", "version"))).N == 5
    assert open(out).read().splitlines()[len(comments)] == ",".join(CSV_HEADER)
    s0 = [r for r in rows if r[0] == 0.0 and r[1] == "s" and r[2] == "reference"]
    assert s0[0][3] == pytest.approx(115.0)


def test_repeat_runs_are_byte_identical(cfg, tmp_path):
    out = tmp_path / "a.csv"
    assert run(["run", "--config", str(cfg), "--out", str(out)])[0] == 0
    first = out.read_bytes()
    assert run(["run", "--config", str(cfg), "--out", str(out)])[0] == 0
    assert out.read_bytes() == first
    b = tmp_path / "b.csv"
    assert run(["run", "--config", str(cfg), "--out", str(b), "--workers", "2"])[0] == 0
    assert read_csv(b)[1] == read_csv(out)[1]
    run(["run", "--config", str(cfg), "--out", str(b), "--seed", "10"])
    assert read_csv(b)[1] != read_csv(out)[1]


def test_run_to_stdout(cfg):
    code, text = run(["oracle", "--config", str(cfg), "--out", "-"])
    assert code == EXIT_OK
    assert "# source=dsmc_oracle" in text
    assert len([l for l in text.splitlines() if not l.startswith("#")]) == 466


def test_equilibrium_output():
    code, text = run(["equilibrium"])
    assert code == EXIT_OK
    assert "T_eq = 2.666667" in text
    assert "s_eq = 134.333333" in text
    assert "V = (0.000000, 1.000000, 0.000000)" in text
    assert "E = 9.000000" in text


def test_validate():
    code, text = run(["validate", "--seed", "3"])
    assert code == EXIT_OK
    assert "FAIL" not in text and "total weight" in text


def test_table_errors_command():
    code, text = run(["table-errors", "--m0", "128", "--reductions", "2", "--seed", "5"])
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[1].split() == ["scheme", "central_hf", "raw_hf"]
    table = {l.split()[0]: [float(x) for x in l.split()[1:]] for l in lines[2:]}
    assert set(table) == {"pthf", "energy", "energy_hf"}
    assert max(table["pthf"]) < 1e-12
    assert table["energy"][0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--config", "/nonexistent/x.cfg"],
        ["run", "--seed", "-1"],
        ["frobnicate"],
        [],
        ["run", "--workers", "many"],
    ],
)
def test_config_errors_exit_1(argv, capsys):
    assert main(argv, io.StringIO()) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_bad_config_file_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("m0=10\nN=abc\n")
    assert main(["run", "--config", str(p)], io.StringIO()) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_runtime_errors_exit_2(capsys):
    assert main(["table-errors", "--reductions", "0"], io.StringIO()) == EXIT_RUNTIME
    assert capsys.readouterr().err.startswith("error:")


def test_validate_failure_exits_2(monkeypatch):
    import swpm.cli as cli

    real = cli.compute_moments

    def skewed(v, g):
        return real(v, np.asarray(g) * 1.5)

    monkeypatch.setattr(cli, "compute_moments", skewed)
    code, text = run(["validate"])
    assert code == EXIT_RUNTIME and "FAIL" in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "swpm", "equilibrium"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "T_eq = 2.666667" in res.stdout
