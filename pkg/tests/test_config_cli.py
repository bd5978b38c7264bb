import json

import numpy as np
import pytest

from helmskel.cli import main, run_verification
from helmskel.config import ConfigError, ProblemConfig, parse_config, problem_from_config


def _write(tmp_path, text, name="case.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_config_defaults(tmp_path):
    path = _write(tmp_path, "[physics]\nk = 5.0\n[bc]\nkind = robin\n")
    cfg = parse_config(path)
    assert cfg.gamma == pytest.approx(0.2)
    assert cfg.nx == cfg.ny == 8
    assert cfg.px == cfg.py == 2
    assert cfg.tgamma == "collar"
    assert cfg.solver_method == "gmres"
    assert cfg.tol == 1e-10


def test_bad_mu_rejected(tmp_path):
    path = _write(tmp_path, "[physics]\nmu_im = -1\n")
    with pytest.raises(ConfigError, match=r"\(A2\)"):
        parse_config(path)


def test_divisibility_rejected(tmp_path):
    path = _write(tmp_path, "[geometry]\nnx = 4\n[partition]\npx = 3\n")
    with pytest.raises(ConfigError, match="divide"):
        parse_config(path)


def test_unknown_key_rejected(tmp_path):
    path = _write(tmp_path, "[physics]\nwavenumber = 3\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(path)
    path = _write(tmp_path, "[noise]\nx = 1\n")
    with pytest.raises(ConfigError, match="unknown config section"):
        parse_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(str(tmp_path / "absent.ini"))


def test_robin_scale_validation():
    with pytest.raises(ConfigError, match=r"\(A3\)|\(A4\)"):
        ProblemConfig(bc_kind="robin", lambda_scale=0.0)


def test_kappa_modes(tmp_path):
    cfg = ProblemConfig(kappa_mode="absorbing-layer", bc_kind="neumann")
    problem = problem_from_config(cfg)
    ks = problem.coeffs.kappa_sq
    assert callable(ks)
    assert np.imag(ks(np.array([0.75]), np.array([0.5]))[0]) > 0
    assert np.imag(ks(np.array([0.25]), np.array([0.5]))[0]) == 0

    cfg = ProblemConfig(kappa_mode="resonant", bc_kind="dirichlet")
    problem = problem_from_config(cfg)
    assert problem.coeffs.kappa_sq == pytest.approx(20.50554489770757, rel=1e-9)


def test_solve_zero_data_gives_zero(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "k = 5.0", "source = zero",
        "[bc]", "kind = robin",
        "[output]", f"dir = {tmp_path}/out",
    ]))
    assert main(["solve", "--config", cfg_path]) == 0
    sol = np.loadtxt(tmp_path / "out" / "solution.txt")
    assert np.abs(sol[:, 1:]).max() == 0.0
    report = json.loads((tmp_path / "out" / "solve_report.json").read_text())
    assert report["converged"]


def test_solve_manufactured_convergence(tmp_path):
    errs = {}
    for n in (8, 16):
        cfg_path = _write(tmp_path, "\n".join([
            "[geometry]", f"nx = {n}", f"ny = {n}",
            "[physics]", "k = 5.0", "kappa_mode = zero", "source = manufactured",
            "[bc]", "kind = dirichlet",
            "[output]", f"dir = {tmp_path}/out{n}",
        ]), name=f"m{n}.ini")
        assert main(["solve", "--config", cfg_path]) == 0
        report = json.loads((tmp_path / f"out{n}" / "solve_report.json").read_text())
        errs[n] = report["l2_error_rel"]
    ratio = errs[8] / errs[16]
    assert 3.5 <= ratio <= 4.5


def test_solve_resonant_failure_diagnosed(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "k = 5.0", "kappa_mode = resonant", "source = one",
        "[bc]", "kind = dirichlet",
        "[solver]", "maxit = 60",
        "[output]", f"dir = {tmp_path}/outres",
    ]))
    assert main(["solve", "--config", cfg_path]) == 1
    report = json.loads((tmp_path / "outres" / "solve_report.json").read_text())
    assert not report["converged"]
    assert "kernel" in report.get("kernel_diagnosis", "")


def test_verify_all_pass_and_deterministic(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "k = 5.0",
        "[bc]", "kind = robin",
        "[output]", f"dir = {tmp_path}/v1",
    ]))
    assert main(["verify", "--config", cfg_path]) == 0
    assert main(["verify", "--config", cfg_path, "--out", str(tmp_path / "v2")]) == 0
    a = (tmp_path / "v1" / "verify_report.json").read_bytes()
    b = (tmp_path / "v2" / "verify_report.json").read_bytes()
    assert a == b


def test_verify_tamper_negative_control(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "k = 5.0",
        "[bc]", "kind = robin",
        "[output]", f"dir = {tmp_path}/vt",
    ]))
    assert main(["verify", "--config", cfg_path, "--tamper"]) == 1
    report = json.loads((tmp_path / "vt" / "verify_report.json").read_text())
    assert not report["exchange_axioms"]["passed"]


def test_verification_suites_directly(tmp_path):
    cfg = ProblemConfig()
    results = run_verification(cfg, seed=42)
    assert results["all_passed"]
    assert results["seed"] == 42


def test_spectrum_command(tmp_path, capsys):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "k = 5.0",
        "[bc]", "kind = robin",
        "[output]", f"dir = {tmp_path}/sp",
    ]))
    assert main(["spectrum", "--config", cfg_path]) == 0
    report = json.loads((tmp_path / "sp" / "spectrum.json").read_text())
    assert report["pass_estimate_chain"] and report["pass_coercivity_bound"]


def test_spectrum_cap_exceeded(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[analysis]", "dense_cap = 4",
        "[output]", f"dir = {tmp_path}/spc",
    ]))
    assert main(["spectrum", "--config", cfg_path]) == 2


def test_sweep_command(tmp_path):
    cfg_path = _write(tmp_path, "\n".join([
        "[physics]", "tgamma = boundary_h1",
        "[output]", f"dir = {tmp_path}/sw",
    ]))
    assert main(["sweep", "--config", cfg_path, "--k-list", "5,10"]) == 0
    lines = (tmp_path / "sw" / "sweep.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 2 + 2
    assert main(["sweep", "--config", cfg_path, "--k-list", ""]) == 2


def test_cli_config_error_exit(tmp_path):
    cfg_path = _write(tmp_path, "[physics]\nmu_im = -2\n")
    assert main(["solve", "--config", cfg_path]) == 2


def test_cli_assumption_violation_exit(tmp_path, monkeypatch):
    from helmskel import cli
    from helmskel.skeleton import AssumptionViolation

    def boom(cfg):
        raise AssumptionViolation("block 1 singular; perturb kappa or gamma")

    monkeypatch.setattr(cli, "problem_from_config", boom)
    cfg_path = _write(tmp_path, "[physics]\nk = 5.0\n")
    assert main(["solve", "--config", cfg_path]) == 3
