import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from helmpseudo import cli, pseudospectrum, theory
from helmpseudo.linalg import ShiftOperator

from conftest import level_fem, level_mesh
from helmpseudo.fem import assemble_poisson_dirichlet


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def record(out, stem=""):
    return json.loads((out / f"{stem}record.json").read_text())


# -- parsing ------------------------------------------------------------------


@pytest.mark.parametrize("text,value", [("8pi", 8 * math.pi), ("2.5*pi", 2.5 * math.pi), ("pi", math.pi),
                                        ("3.0", 3.0), (" 16 pi ", 16 * math.pi), (4.0, 4.0)])
def test_parse_kappa(text, value):
    assert cli.parse_kappa(text) == pytest.approx(value, rel=1e-15)


def test_parse_kappa_rejects_garbage():
    with pytest.raises(ValueError):
        cli.parse_kappa("eightpi")


def test_format_kappa_roundtrip():
    for k in (4 * math.pi, 8 * math.pi, 2.5 * math.pi, 3.7):
        assert cli.parse_kappa(cli.format_kappa(k)) == pytest.approx(k, rel=1e-12)


def test_sigma_rules():
    k = 8 * math.pi
    assert cli.sigma_value(cli.parse_sigma_rule("halfk"), k) == pytest.approx(0.5 * k)
    assert cli.sigma_value(cli.parse_sigma_rule("HALFK2"), k) == pytest.approx(0.5 * k * k)
    assert cli.sigma_value(cli.parse_sigma_rule("abs:3.5"), k) == 3.5
    for bad in ("abs:-1", "quarter"):
        with pytest.raises(ValueError):
            cli.parse_sigma_rule(bad)


# -- configuration ------------------------------------------------------------


def test_config_precedence():
    preset = {"problem": "shifted-laplace", "level": 3, "epsilons": (0.1,)}
    file_layer = cli.parse_config_text("# comment\nlevel = 2\nkappa = 4pi  # trailing\nsigma_rule = halfk\n")
    cfg = cli.make_config(preset, file_layer, {"level": 1, "tol": None})
    assert cfg.level == 1
    assert cfg.kappa == pytest.approx(4 * math.pi)
    assert cfg.sigma == pytest.approx(2 * math.pi)
    assert cfg.epsilons == (0.1,)
    assert cfg.tol == 1e-6


def test_config_text_roundtrip():
    cfg = cli.make_config({"problem": "shifted-laplace", "kappa": 8 * math.pi, "sigma_rule": "halfk",
                           "epsilons": (0.01, 0.1)})
    again = cli.make_config(cli.parse_config_text(cfg.to_text()))
    assert again == cfg


def test_config_validation():
    with pytest.raises(ValueError):
        cli.make_config({"problem": "helmholtz", "sigma_rule": "halfk"})
    with pytest.raises(ValueError):
        cli.make_config({"tol": 1.0})
    with pytest.raises(ValueError):
        cli.make_config({"epsilons": (-0.1,)})
    with pytest.raises(ValueError):
        cli.parse_config_text("nonsense = 3\n")
    with pytest.raises(ValueError):
        cli.parse_config_text("just words\n")
    assert cli.make_config({"problem": "shifted-laplace"}).rule == "halfk2"


# -- commands -----------------------------------------------------------------


def test_mesh_command(tmp_path):
    code, out = run(tmp_path, "mesh", "--level", "1")
    assert code == 0
    assert (out / "mesh_level1.txt").read_text().startswith("vertices 113 triangles 192")
    assert "level = 1" in (out / "config.txt").read_text()
    assert record(out)["summary"]["vertices"] == 113


def test_error_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "gmres", "--problem", "helmholtz", "--sigma-rule", "halfk")
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_config_file_flag(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("level = 1\nproblem = poisson\n")
    code, out = cli.main(["mesh", "--config", str(cfg), "--out", str(tmp_path / "o")]), tmp_path / "o"
    assert code == 0 and (out / "mesh_level1.txt").exists()


def test_assemble_command(tmp_path):
    code, out = run(tmp_path, "assemble", "--level", "1", "--problem", "shifted-laplace", "--kappa", "4pi")
    assert code == 0
    for f in ("K.mtx", "M.mtx", "Mb.mtx", "A.mtx", "B.mtx", "load.csv"):
        assert (out / f).exists()


def test_gmres_exact_preconditioner_and_warning(tmp_path):
    code, out = run(tmp_path, "gmres", "--level", "1", "--problem", "shifted-laplace",
                    "--kappa", "4pi", "--sigma-rule", "abs:0")
    assert code == 0 and record(out)["iterations"] == 1
    code, out = run(tmp_path, "gmres", "--level", "1", "--problem", "helmholtz", "--kappa", "8pi",
                    "--maxiter", "3", name="short")
    rec = record(out)
    assert code == 2 and rec["converged"] is False and len(rec["residual_history"]) == 4
    lines = (out / "residuals.csv").read_text().splitlines()
    assert lines[0] == "iteration,relative_residual,circle_bound" and len(lines) == 5


def test_gmres_records_prediction(tmp_path):
    code, out = run(tmp_path, "gmres", "--level", "1", "--problem", "shifted-laplace",
                    "--kappa", "4pi", "--sigma-rule", "halfk2")
    rec = record(out)
    assert code == 0 and rec["converged"]
    assert rec["summary"]["predicted_iterations"] == theory.iterations_estimate("sl", 1e-6, kappa=4 * math.pi).N
    assert rec["summary"]["true_relative_residual"] <= 1e-5


def test_regions_command(tmp_path):
    code, out = run(tmp_path, "regions", "--level", "1", "--problem", "poisson", "--eps", "0.05,0.1")
    assert code == 0
    A = assemble_poisson_dirichlet(level_mesh(1), level_fem(1).K)
    s = ShiftOperator(A).sigma_min(0.0)
    discs = [r for r in theory.read_regions(out / "regions.txt") if r["variant"] == "disc"]
    assert [d["radius"] for d in discs] == pytest.approx([s - 0.05, s - 0.1], abs=1e-12)

    code, out = run(tmp_path, "regions", "--level", "1", "--problem", "helmholtz", "--kappa", "4pi",
                    "--eps", "0.1", name="h")
    strip = [r for r in theory.read_regions(out / "regions.txt") if r["variant"] == "strip"][0]
    lam = np.linalg.eigvalsh(level_fem(1).Mb.toarray())[-1]
    assert strip["im_min"] == pytest.approx(-0.1) and strip["im_max"] == pytest.approx(4 * math.pi * lam + 0.1)

    code, out = run(tmp_path, "regions", "--level", "1", "--problem", "shifted-laplace", "--kappa", "4pi",
                    "--eps", "0.1", name="sl")
    variants = {r["variant"]: r for r in theory.read_regions(out / "regions.txt")}
    assert "lemma41" in variants
    half = [r for r in theory.read_regions(out / "regions.txt")
            if r["variant"] == "disc" and r["provenance"] == "eigenvalue-disc"]
    assert half and half[0]["center"] == 0.5 and half[0]["kind"] == "inclusion"


def test_psgrid_is_reproducible(tmp_path):
    argv = ["psgrid", "--level", "1", "--problem", "poisson", "--eps", "0.2", "--max-depth", "2",
            "--grid-n", "8"]
    c1, o1 = run(tmp_path, *argv, name="a")
    c2, o2 = run(tmp_path, *argv, name="b")
    assert c1 == c2 == 0
    for f in ("grid.csv", "grid.tri.csv", "isolines.csv", "regions.txt"):
        assert (o1 / f).read_bytes() == (o2 / f).read_bytes()
    g = pseudospectrum.read_grid_csv(o1 / "grid.csv")
    assert not np.isnan(g.values).any()
    root = ET.parse(o1 / "pseudospectrum.svg").getroot()
    assert root.get("width") == "800" and root.get("height") == "800"
    ns = "{http://www.w3.org/2000/svg}"
    assert len(list(root.iter(ns + "polygon"))) + len(list(root.iter(ns + "polyline"))) > 0
    assert ">-0<" not in (o1 / "pseudospectrum.svg").read_text()


def test_psgrid_budget_warning(tmp_path, capsys):
    code, out = run(tmp_path, "psgrid", "--level", "1", "--problem", "poisson", "--eps", "0.2",
                    "--grid-n", "8", "--budget", "120")
    assert code == 2
    assert "warning" in capsys.readouterr().err
    assert (out / "grid.csv").exists() and record(out)["warnings"]


def test_shifted_laplace_svg_has_dashed_half_disc(tmp_path):
    code, out = run(tmp_path, "psgrid", "--level", "1", "--problem", "shifted-laplace", "--kappa", "4pi",
                    "--eps", "0.1", "--max-depth", "1", "--grid-n", "8")
    assert code == 0
    text = (out / "pseudospectrum.svg").read_text()
    assert 'stroke-dasharray="8,6"' in text and "B(1/2, 1/2)" in text


def test_reproduce_fig1(tmp_path):
    code, out = run(tmp_path, "reproduce", "fig1", "--max-depth", "2")
    out = out / "fig1"
    assert code == 0
    assert (out / "pseudospectrum.svg").exists() and (out / "isolines.csv").exists()
    assert "problem = poisson" in (out / "config.txt").read_text()
