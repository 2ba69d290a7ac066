import csv
import subprocess
import sys

import pytest

from hstori.cli import build_config, main, make_parser
from hstori.errors import ConfigError
from hstori.fixtures import nondegenerate_fixture
from hstori.kahler_potential import save_potential


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _cfg(argv):
    return build_config(make_parser().parse_args(argv))


def test_verify_flat(tmp_path):
    assert main(["verify-flat", "--out", str(tmp_path), "--N", "16"]) == 0
    assert "PASS" in (tmp_path / "report.txt").read_text()
    assert len(_rows(tmp_path / "flat_torus.csv")) == 1 + 16 * 16


def test_kernel(tmp_path):
    assert main(["kernel", "--out", str(tmp_path)]) == 0
    assert _rows(tmp_path / "symbol.csv")[0] == ["n1", "n2", "Q"]


def test_cp2(tmp_path):
    assert main(["cp2", "--out", str(tmp_path)]) == 0
    assert _rows(tmp_path / "cp2_grid.csv")[0] == ["r1", "r2", "volume", "H_norm"]


def test_solve_single_rho(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--rho", "0.04"]) == 0
    text = (tmp_path / "report.txt").read_text()
    assert "certified" in text and "status: PASS" in text
    assert len(_rows(tmp_path / "solve.csv")) == 2


def test_solve_degenerate_exits_nonzero(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--potential", "degenerate", "--rho", "0.05"]) == 1
    text = (tmp_path / "report.txt").read_text()
    assert "status: degenerate" in text and "Hessian condition" in text


def test_predict(tmp_path):
    assert main(["predict", "--out", str(tmp_path), "--rho", "0.02", "0.04"]) == 0
    assert len(_rows(tmp_path / "predict.csv")) == 3


def test_config_file_and_potential_path(tmp_path):
    pot, _ = nondegenerate_fixture()
    save_potential(pot, tmp_path / "pot.yaml")
    (tmp_path / "run.yaml").write_text(
        "potential: pot.yaml\nrho: [0.03]\nr: [0.6, 0.8]\nN: 32\nsweep: {delta: 0.0, count: 1}\n"
    )
    cfg = _cfg(["sweep", "--config", str(tmp_path / "run.yaml"), "--out", str(tmp_path / "o")])
    assert cfg.rho == (0.03,) and cfg.r == (0.6, 0.8) and cfg.sweep_count == 1
    loaded, r = cfg.load()
    assert loaded.allclose(pot)
    assert main(["sweep", "--config", str(tmp_path / "run.yaml"), "--out", str(tmp_path / "o")]) == 0
    assert len(_rows(tmp_path / "o" / "sweep.csv")) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--N", "15"],
        ["solve", "--N", "512"],
        ["solve", "--rho", "0.2"],
        ["solve", "--tol", "1e-13"],
        ["solve", "--r", "0.5", "-0.1"],
    ],
)
def test_config_validation(argv):
    with pytest.raises(ConfigError):
        _cfg(argv)
    assert main(argv) == 2


def test_bad_config_files(tmp_path):
    (tmp_path / "bad.yaml").write_text("frobnicate: 1\n")
    assert main(["solve", "--config", str(tmp_path / "bad.yaml")]) == 2
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    assert main(["solve", "--config", str(tmp_path / "list.yaml")]) == 2
    assert main(["solve", "--potential", str(tmp_path / "missing.yaml")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "hstori", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify-flat" in out.stdout
