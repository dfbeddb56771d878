import csv
import math

import pytest

from fraceig.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, fmt, main
from fraceig.config import ConfigError, RunConfig, parse_config


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_defaults_and_comments():
    cfg = parse_config("# header\n\ndim = 2   # square\nn = 9\nweight = cospi\nlambda_grid = 0.1, 0.2 0.3\nsvg = yes\n")
    assert cfg.dim == 2 and cfg.n == 9 and cfg.weight == "cospi"
    assert cfg.lambda_grid == (0.1, 0.2, 0.3) and cfg.svg is True
    assert cfg.nonlinearity == RunConfig().nonlinearity


@pytest.mark.parametrize("text, line", [
    ("dim = 1\nn == 3\n", 2),
    ("dim = 1\nwidth = 3\n", 2),
    ("n = 5\nn = 7\n", 2),
    ("svg = maybe\n", 1),
    ("just words\n", 1),
])
def test_parse_errors_report_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line and f"line {line}" in str(info.value)


@pytest.mark.parametrize("text", [
    "n = 0\n", "tol = -1\n", "policy = spiral\n", "nonlinearity = sinh\n",
    "weight = gauss\n", "dim = 3\n", "lambda_grid = 0.1 -0.2\n", "R = -1\n",
])
def test_parse_invalid_values(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3" and fmt(True) == "true" and fmt(math.inf) == "inf"


def test_lambda_star_within_bound(tmp_path, capsys):
    cfg = _write(tmp_path, "dim = 1\nn = 31\nnonlinearity = exp\nweight = one\n")
    assert main(["lambda-star", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = _rows(tmp_path / "o" / "summary.csv")
    head, vals = rows[0], dict(zip(rows[0], rows[1]))
    assert head[:4] == ["dim", "n", "nonlinearity", "weight"]
    assert 0 < float(vals["lambda_lo"]) < float(vals["lambda_hi"]) <= float(vals["upper_bound"])
    assert "lambda_hi" in capsys.readouterr().out
    main(["lambda-star", "--config", cfg, "--out", str(tmp_path / "o")])
    assert len(_rows(tmp_path / "o" / "summary.csv")) == 3


def test_branch_empty_grid(tmp_path):
    cfg = _write(tmp_path, "policy = grid\nlambda_grid =\n")
    assert main(["branch", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "branch.csv").read_text() == "lambda,sup_u,mu1,iterations,residual\n"


def test_branch_with_svg(tmp_path):
    cfg = _write(tmp_path, "n = 15\npolicy = grid\nlambda_grid = 0.1 0.5 0.9\nsvg = true\n")
    assert main(["branch", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "branch.csv")
    assert len(rows) == 4
    assert [float(r[0]) for r in rows[1:]] == [0.1, 0.5, 0.9]
    svg = (tmp_path / "branch.svg").read_text()
    assert svg.count("<polyline") == 1 and 'version="1.1"' in svg


def test_extremal(tmp_path, capsys):
    cfg = _write(tmp_path, "n = 15\nnonlinearity = mems2\n")
    assert main(["extremal", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "u_star.csv")
    assert rows[0] == ["x1", "u_star", "g_fprime_f"] and len(rows) == 16
    assert all(0 < float(r[1]) < 1 for r in rows[1:])
    assert "extremal_integral" in capsys.readouterr().out


def test_uniqueness_report(tmp_path):
    cfg = _write(tmp_path, "dim = 2\nn = 11\nweight = cospi\nstarts = 5\n")
    assert main(["uniqueness", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    report = dict(_rows(tmp_path / "report.csv")[1:])
    for key in ("gamma", "alpha", "theta", "trace_c", "big_c", "eps_lambda", "tau0", "tau1", "min_s"):
        assert key in report
    assert report["certified"] == "true"


def test_uniqueness_needs_2d(tmp_path):
    cfg = _write(tmp_path, "dim = 1\n")
    assert main(["uniqueness", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_identities(tmp_path):
    cfg = _write(tmp_path, "dim = 2\nn = 7\nm = 24\n")
    assert main(["identities", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "pohozaev.csv")
    assert rows[0][4:8] == ["lateral", "bottom", "bulk", "top"] and len(rows) == 3
    assert abs(float(rows[2][-1])) < abs(float(rows[1][-1]))
    assert len(_rows(tmp_path / "boundary_energy.csv")) == 13


def test_props_refuses_power(tmp_path):
    cfg = _write(tmp_path, "nonlinearity = power(3)\n")
    assert main(["props", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "props.csv")
    assert any(r[-1] == "refused: not log-convex" for r in rows[1:])


def test_props_exp(tmp_path):
    cfg = _write(tmp_path, "nonlinearity = exp\n")
    assert main(["props", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "props.csv")[1:]
    ks = [float(r[3]) for r in rows if r[0] == "shift_k"]
    assert ks == pytest.approx([1.0, 4.0], rel=0.01)
    assert all(float(r[4]) >= -1e-12 for r in rows if r[0] != "criticality_ratio")


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "dim = 1\nn = 3x\n")
    assert main(["branch", "--config", cfg]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert main(["branch", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write(tmp_path, "n = 7\n")
    assert main(["props", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    # two fixed-point sweeps cannot converge at the constructive lower bound
    cfg = _write(tmp_path, "n = 7\nnonlinearity = exp\nmax_iter = 2\npolicy = adaptive\n")
    assert main(["lambda-star", "--config", cfg, "--out", str(tmp_path)]) == EXIT_SOLVER


def test_missing_config_argument():
    with pytest.raises(SystemExit):
        main(["branch"])
