import json
import math
import os

import pytest

from colsparse.cli import main


def run_cli(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr().out.strip()
    return code, json.loads(out.splitlines()[-1])


def test_statdim_command(capsys):
    code, out = run_cli(
        capsys, "statdim", "--k", "10", "--s", "10", "--n", "100", "--rank", "1"
    )
    assert code == 0
    assert abs(out["mu_value"] - 130.0) <= 3.0
    assert out["tau_star"] > 0
    assert out["unimodal"] is True


def test_statdim_soft_with_ratio(capsys):
    code, out = run_cli(
        capsys,
        "statdim",
        "--k", "6", "--s", "4", "--n", "30",
        "--alpha", str(math.pi / 10),
        "--ratio", "large",
    )
    assert code == 0
    assert out["ratio"] == 0.9
    assert out["m_value"] > 0


def test_recover_command(capsys):
    code, out = run_cli(
        capsys,
        "recover",
        "--k", "3", "--n", "15", "--s", "2", "--m", "24",
        "--algorithm", "nast", "--seed", "4",
    )
    assert code == 0
    assert out["algorithm"] == "nast"
    assert out["success"] == (out["rel_error"] < 1e-3)
    assert len(out["angular_errors"]) == 2


def test_cert_command_soft(capsys):
    code, out = run_cli(
        capsys,
        "cert",
        "--kind", "soft",
        "--k", "4", "--n", "12", "--s", "2", "--m", "20", "--seed", "1",
    )
    assert code == 0
    assert out["kind"] == "soft"
    if out["found"]:
        assert out["report"]["satisfied"] is True


def test_cert_command_exact(capsys):
    code, out = run_cli(
        capsys,
        "cert",
        "--kind", "exact",
        "--k", "3", "--n", "12", "--s", "2", "--m", "30", "--seed", "2",
    )
    assert code == 0
    if out["found"]:
        assert out["report"]["passed"] is True


def test_sweep_statdim_figure(tmp_path, capsys):
    code, out = run_cli(
        capsys,
        "sweep",
        "--figure", "fig8",
        "--out", str(tmp_path),
        "--grid", "5", "10",
        "--n", "40",
    )
    assert code == 0
    text = (tmp_path / "fig8.csv").read_text().splitlines()
    assert text[0] == "k,s,n,r,tau_star,mu_value"
    assert len(text) == 1 + 4


def test_sweep_trial_figure(tmp_path, capsys):
    code, out = run_cli(
        capsys,
        "sweep",
        "--figure", "fig6",
        "--out", str(tmp_path),
        "--trials", "1",
        "--m", "20", "--n", "15",
        "--max-iters", "4000",
        "--jobs", "1",
    )
    assert code == 0
    assert (tmp_path / "fig6.csv").exists()
    assert (tmp_path / "fig6_records.csv").exists()
    assert (tmp_path / "fig6_records.jsonl").exists()


def test_l1demo_command(capsys):
    code, out = run_cli(capsys, "l1demo", "--instances", "6", "--seed", "3")
    assert out["instances"] == 6
    assert out["exact"] + out["support_zeroed"] + out["other"] == 6
    assert code == (0 if out["other"] == 0 else 1)


def test_jobs_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("COLSPARSE_JOBS", "2")
    from colsparse.bench import default_jobs

    assert default_jobs() == 2
