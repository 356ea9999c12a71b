"""Command-line harness: ``helmpseudo <command> [flags]``.

Commands write their artifacts (CSV, SVG, a config snapshot and a JSON run
record) into ``--out``. Exit status is 0 on success, 2 when a run finished
with a budget or convergence warning, and 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import fem, linalg, mesh, pseudospectrum, svg, theory

log = logging.getLogger("helmpseudo")

PROBLEMS = ("poisson", "helmholtz", "shifted-laplace")
FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5")
EXIT_OK, EXIT_ERROR, EXIT_WARN = 0, 1, 2


# ---------------------------------------------------------------------------
# parsing helpers


def parse_kappa(text: str | float) -> float:
    """Accept plain numbers and multiples of pi such as ``8pi`` or ``2.5*pi``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.eE+-]*)\*?(pi|π)", s)
    if m:
        coef = m.group(1)
        return (float(coef) if coef else 1.0) * math.pi
    return float(s)


def format_kappa(kappa: float) -> str:
    c = kappa / math.pi
    return f"{c:g}pi" if abs(c - round(c, 6)) < 1e-9 else repr(kappa)


def parse_sigma_rule(text: str) -> str:
    s = text.strip().lower()
    if s in ("halfk", "halfk2"):
        return s
    if s.startswith("abs:"):
        v = float(s[4:])
        if v < 0:
            raise ValueError("absolute sigma must be non-negative")
        return f"abs:{v!r}"
    raise ValueError(f"unknown sigma rule {text!r}; use abs:<v>, halfk or halfk2")


def sigma_value(rule: str, kappa: float) -> float:
    if rule == "halfk":
        return 0.5 * kappa
    if rule == "halfk2":
        return 0.5 * kappa * kappa
    return float(rule[4:])


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    problem: str = "helmholtz"
    level: int = 2
    kappa: float = 8 * math.pi
    sigma_rule: str | None = None
    epsilons: tuple = (0.01, 0.1)
    tol: float = 1e-6
    maxiter: int = 1000
    seed: int = linalg.DEFAULT_SEED
    out: str = "runs"
    max_depth: int = 4
    budget: int = pseudospectrum.DEFAULT_BUDGET
    grid_n: int = 16
    target: float = 2e-2
    kappas: tuple = (4 * math.pi, 8 * math.pi, 16 * math.pi)

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.sigma_rule is not None and self.problem != "shifted-laplace":
            raise ValueError("sigma_rule only applies to the shifted-laplace problem")
        if self.sigma_rule is not None:
            parse_sigma_rule(self.sigma_rule)
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.maxiter < 1 or self.budget < 1 or self.max_depth < 0 or self.grid_n < 4:
            raise ValueError("maxiter, budget, max_depth and grid_n must be positive")
        pseudospectrum.LevelSpec.of(self.epsilons)
        if not self.target > 0:
            raise ValueError("target must be positive")
        if not self.kappas or min(self.kappas) <= 0:
            raise ValueError("kappas must be a nonempty list of positive values")
        return self

    @property
    def rule(self) -> str:
        return self.sigma_rule or "halfk2"

    @property
    def sigma(self) -> float:
        return sigma_value(self.rule, self.kappa) if self.problem == "shifted-laplace" else 0.0

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "kappa":
                v = format_kappa(v)
            elif f.name == "kappas":
                v = ", ".join(format_kappa(k) for k in v)
            elif f.name == "epsilons":
                v = ", ".join(repr(e) for e in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_CONVERT = {
    "problem": str, "level": int, "kappa": parse_kappa, "sigma_rule": parse_sigma_rule,
    "epsilons": lambda v: tuple(sorted(_floats(v))), "tol": float, "maxiter": int, "seed": int,
    "out": str, "max_depth": int, "budget": int, "grid_n": int, "target": float,
    "kappas": lambda v: tuple(parse_kappa(k) for k in str(v).split(",") if k.strip())
    if not isinstance(v, (list, tuple)) else tuple(parse_kappa(k) for k in v),
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERT:
            raise ValueError(f"config line {n}: unknown key {key!r}")
        out[key] = _CONVERT[key](value)
    return out


def make_config(*layers: dict) -> RunConfig:
    """Later layers override earlier ones; values are converted and validated."""
    merged = {}
    for layer in layers:
        for k, v in layer.items():
            if v is not None:
                merged[k] = _CONVERT[k](v) if isinstance(v, str) and k != "out" else v
    return RunConfig(**merged).validate()


# ---------------------------------------------------------------------------
# run record


@dataclass
class RunRecord:
    command: str
    config: dict
    residual_history: list = field(default_factory=list)
    iterations: int | None = None
    converged: bool | None = None
    bound: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


class _Timer:
    def __init__(self, record: RunRecord):
        self.record = record

    def __call__(self, phase: str):
        timer = self

        class _Phase:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                timer.record.timings[phase] = timer.record.timings.get(phase, 0.0) + time.perf_counter() - self.t

        return _Phase()


def _start(command: str, cfg: RunConfig) -> tuple[RunRecord, Path, _Timer]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    record = RunRecord(command, _jsonable(asdict(cfg)))
    return record, out, _Timer(record)


# ---------------------------------------------------------------------------
# problem set-up


@dataclass
class Problem:
    cfg: RunConfig
    mesh: mesh.Mesh
    fem: fem.FemMatrices
    A: object
    B: object
    h: float

    @property
    def op(self) -> linalg.ShiftOperator:
        return linalg.ShiftOperator(self.A, self.B, seed=self.cfg.seed)

    def load(self) -> np.ndarray:
        b = fem.assemble_load(self.mesh, fem.LoadSpec(f=fem.gaussian_source))
        return b[self.fem.interior] if self.cfg.problem == "poisson" else b


def build_problem(cfg: RunConfig) -> Problem:
    m = mesh.mesh_hierarchy(cfg.level)
    fm = fem.assemble_all(m)
    h = mesh.mesh_size(m)
    if cfg.problem == "poisson":
        return Problem(cfg, m, fm, fem.assemble_poisson_dirichlet(m, fm.K), None, h)
    p = fem.HelmholtzParams(cfg.kappa, cfg.sigma)
    A = fem.assemble_helmholtz(fm, p)
    if cfg.problem == "helmholtz":
        return Problem(cfg, m, fm, A, None, h)
    # sigma = 0 gives the exact preconditioner B = A
    B = fem.assemble_shifted_laplace(fm, p) if p.sigma > 0 else A.copy()
    return Problem(cfg, m, fm, A, B, h)


def build_regions(prob: Problem, fov: linalg.FovPolygon, epsilons) -> tuple[list, dict]:
    """Every applicable region for each epsilon plus the calibration record."""
    cfg = prob.cfg
    op = prob.op
    stab = theory.StabilityConstants.oracle(op)
    calib = {"sigma_min_origin": 1.0 / stab.C_2S, "C_2S": stab.C_2S}
    regions = []
    for eps in epsilons:
        regions.append(theory.exclusion_disc(stab, eps))
        regions.append(theory.inclusion_fov_dilation(fov, eps))
    if cfg.problem == "helmholtz":
        C = theory.helmholtz_constant(1.0 / stab.C_2S, cfg.kappa, prob.h)
        lam = linalg._extreme_eigs(prob.fem.Mb)[1]
        calib.update(helmholtz_C=C, lambda_max_Mb=lam)
        for eps in epsilons:
            regions.append(theory.helmholtz_exclusion(cfg.kappa, prob.h, 2, C, eps))
            regions.append(theory.helmholtz_strip(cfg.kappa, lam, eps=eps))
    elif cfg.problem == "shifted-laplace":
        C1 = linalg.norm_equivalence_constants(prob.fem.M).mass_condition_sqrt
        calib.update(C1=C1, sigma=cfg.sigma)
        for eps in epsilons:
            regions.append(theory.sl_exclusion(cfg.kappa, cfg.sigma, eps))
            regions.append(theory.lemma41_region(C1, eps))
            regions.append(theory.sl_annulus_approx(cfg.kappa, cfg.sigma, eps))
            regions.append(theory.sl_eigenvalue_disc(eps))
    return regions, calib


def _region_record(r) -> dict:
    return {"variant": r.variant, "kind": r.kind, "provenance": r.provenance, **r.params()}


# ---------------------------------------------------------------------------
# commands


def cmd_mesh(cfg: RunConfig) -> tuple[RunRecord, int]:
    record, out, timer = _start("mesh", cfg)
    with timer("mesh"):
        m = mesh.mesh_hierarchy(cfg.level)
        mesh.check_mesh(m, area=3.0)
    mesh.save_mesh(m, out / f"mesh_level{cfg.level}.txt")
    record.summary = {"vertices": m.n_vertices, "triangles": m.n_triangles,
                      "boundary_edges": len(m.boundary_edges), "h": mesh.mesh_size(m)}
    record.save(out / "record.json")
    return record, EXIT_OK


def cmd_assemble(cfg: RunConfig) -> tuple[RunRecord, int]:
    record, out, timer = _start("assemble", cfg)
    with timer("assemble"):
        prob = build_problem(cfg)
    fem.write_matrix_market(prob.fem.K, out / "K.mtx")
    fem.write_matrix_market(prob.fem.M, out / "M.mtx")
    fem.write_matrix_market(prob.fem.Mb, out / "Mb.mtx")
    fem.write_matrix_market(prob.A, out / "A.mtx")
    if prob.B is not None:
        fem.write_matrix_market(prob.B, out / "B.mtx")
    fem.write_vector_csv(prob.load(), out / "load.csv")
    record.summary = {"n": prob.A.shape[0], "nnz": int(prob.A.nnz), "h": prob.h}
    record.save(out / "record.json")
    return record, EXIT_OK


def _psgrid_svg(prob: Problem, res, regions, fov, title: str) -> svg.SvgCanvas:
    canvas = svg.isoline_plot(res.isolines, res.window, title)
    outer = fov.outer
    canvas.polyline(outer, "#888888", 1.0, closed=True)
    canvas.add_legend("FOV", "#888888")
    # exclusion disc for the smallest epsilon (regions come in epsilon order)
    disc = regions[0]
    if not disc.empty:
        canvas.circle(disc.center, disc.radius, "#000000", dash="2,3", width=1.0)
        canvas.add_legend(f"exclusion, eps = {min(res.levels.epsilons):g}", "#000000", "2,3")
    if prob.cfg.problem == "shifted-laplace":
        canvas.circle(0.5, 0.5, "#000000", dash="8,6")
        canvas.add_legend("B(1/2, 1/2)", "#000000", "8,6")
    return canvas


def cmd_psgrid(cfg: RunConfig, tag: str = "") -> tuple[RunRecord, int]:
    record, out, timer = _start("psgrid", cfg)
    with timer("assemble"):
        prob = build_problem(cfg)
        op = prob.op
    with timer("fov"):
        fov = linalg.fov_boundary(op)
    window = pseudospectrum.default_window(op, cfg.epsilons, fov=fov)
    with timer("grid"):
        res = pseudospectrum.compute_pseudospectrum(op, cfg.epsilons, window, cfg.grid_n,
                                                    cfg.max_depth, cfg.budget)
    with timer("regions"):
        regions, calib = build_regions(prob, fov, cfg.epsilons)
    stem = f"{tag}_" if tag else ""
    pseudospectrum.write_grid_csv(res.grid, out / f"{stem}grid.csv")
    pseudospectrum.write_isolines_csv(res.isolines, out / f"{stem}isolines.csv")
    theory.write_regions(regions, out / f"{stem}regions.txt")
    title = f"{cfg.problem}, level {cfg.level}"
    if cfg.problem != "poisson":
        title += f", kappa = {format_kappa(cfg.kappa)}"
    if cfg.problem == "shifted-laplace":
        title += f", sigma rule {cfg.rule}"
    _psgrid_svg(prob, res, regions, fov, title).save(out / f"{stem}pseudospectrum.svg")
    record.regions = [_region_record(r) for r in regions]
    record.summary = {
        "window": list(res.window), "evaluations": res.grid.evaluations,
        "finest_diameter": res.finest_diameter(), "calibration": calib,
        "isolines": {repr(e): [{"points": len(p.points), "closed": p.closed} for p in ls]
                     for e, ls in res.isolines.items()},
    }
    code = EXIT_OK
    if res.warning:
        record.warnings.append(res.warning)
        code = EXIT_WARN
    record.save(out / f"{stem}record.json")
    return record, code


def cmd_regions(cfg: RunConfig) -> tuple[RunRecord, int]:
    record, out, timer = _start("regions", cfg)
    with timer("assemble"):
        prob = build_problem(cfg)
    with timer("fov"):
        fov = linalg.fov_boundary(prob.op)
    with timer("regions"):
        regions, calib = build_regions(prob, fov, cfg.epsilons)
    theory.write_regions(regions, out / "regions.txt")
    record.regions = [_region_record(r) for r in regions]
    record.summary = {"calibration": calib}
    record.save(out / "record.json")
    return record, EXIT_OK


def run_gmres(prob: Problem, tol: float, maxiter: int):
    """Right-preconditioned GMRES (plain GMRES when there is no B)."""
    b = prob.load()
    if prob.B is None:
        run = linalg.gmres(prob.A, b, tol, maxiter)
        return run, run.solution
    P = linalg.PreconditionedOperator(prob.A, prob.B)
    run = linalg.gmres(P, b, tol, maxiter)
    return run, P.recover_solution(run.solution)


def cmd_gmres(cfg: RunConfig) -> tuple[RunRecord, int]:
    record, out, timer = _start("gmres", cfg)
    with timer("assemble"):
        prob = build_problem(cfg)
    with timer("gmres"):
        run, x = run_gmres(prob, cfg.tol, cfg.maxiter)
    res = run.residual_history
    rel = res / res[0]
    record.residual_history = rel.tolist()
    record.iterations = run.iterations
    record.converged = run.converged
    pred = None
    if cfg.problem == "shifted-laplace":
        est = theory.iterations_estimate("sl", cfg.tol, kappa=cfg.kappa)
        pred = est.N
        q = cfg.kappa / (cfg.kappa + cfg.sigma)
        # report-only: circle B(1, 1 - q) with unit multiplier
        record.bound = [(1 - q) ** i for i in range(len(rel))] if q > 0 else []
    with open(out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_residual", "circle_bound"])
        for i, r in enumerate(rel):
            w.writerow([i, repr(float(r)), repr(record.bound[i]) if record.bound else ""])
    record.summary = {"n": prob.A.shape[0], "iterations": run.iterations, "converged": run.converged,
                      "predicted_iterations": pred,
                      "true_relative_residual": float(np.linalg.norm(prob.load() - prob.A @ x)
                                                      / np.linalg.norm(prob.load()))}
    record.save(out / "record.json")
    if not run.converged:
        record.warnings.append("GMRES did not converge")
        return record, EXIT_WARN
    return record, EXIT_OK


def bisect_sweep(level: int, kappas, rules, target: float, seed: int = linalg.DEFAULT_SEED) -> list[dict]:
    """Closest real point to the origin on the level set where the resolvent
    norm of A B^{-1} equals 1/target."""
    m = mesh.mesh_hierarchy(level)
    fm = fem.assemble_all(m)
    rows = []
    for rule in rules:
        for k in kappas:
            p = fem.HelmholtzParams(k, sigma_value(rule, k))
            op = linalg.ShiftOperator(fem.assemble_helmholtz(fm, p), fem.assemble_shifted_laplace(fm, p),
                                      seed=seed)
            x = theory.bisect_closest_real(op, 1.0 / target)
            rows.append({"kappa": k, "sigma_rule": rule, "sigma": p.sigma, "x": x,
                         "prediction": k / (k + p.sigma)})
    return rows


def cmd_bisect(cfg: RunConfig) -> tuple[RunRecord, int]:
    record, out, timer = _start("bisect", cfg)
    rules = [cfg.sigma_rule] if cfg.sigma_rule else ["halfk", "halfk2"]
    with timer("bisect"):
        rows = bisect_sweep(cfg.level, cfg.kappas, rules, cfg.target, cfg.seed)
    with open(out / "bisect.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "sigma_rule", "sigma", "x", "prediction"])
        for r in rows:
            w.writerow([repr(float(r["kappa"])), r["sigma_rule"], repr(float(r["sigma"])),
                        repr(float(r["x"])), repr(float(r["prediction"]))])
    series = {}
    for rule in rules:
        sel = [r for r in rows if r["sigma_rule"] == rule]
        series[f"x, {rule}"] = [r["x"] for r in sel]
        series[f"k/(k+s), {rule}"] = [r["prediction"] for r in sel]
    svg.line_plot([k / math.pi for k in cfg.kappas], series, "closest real point of the level set",
                  "kappa / pi", "x").save(out / "bisect.svg")
    record.summary = {"rows": rows}
    record.save(out / "record.json")
    return record, EXIT_OK


def gmres_sweep(level: int, kappas, rules, tol: float, maxiter: int) -> list[dict]:
    rows = []
    for rule in rules:
        for k in kappas:
            cfg = make_config({"problem": "shifted-laplace", "level": level, "kappa": k,
                               "sigma_rule": rule, "tol": tol, "maxiter": maxiter})
            prob = build_problem(cfg)
            t = time.perf_counter()
            run, _ = run_gmres(prob, tol, maxiter)
            rows.append({"kappa": k, "sigma_rule": rule, "sigma": cfg.sigma,
                         "iterations": run.iterations, "converged": run.converged,
                         "seconds": time.perf_counter() - t})
    return rows


def cmd_reproduce(cfg: RunConfig, figure: str) -> tuple[RunRecord, int]:
    if figure not in FIGURES:
        raise ValueError(f"figure must be one of {FIGURES}")
    base = Path(cfg.out) / figure
    if figure in ("fig1", "fig2"):
        return cmd_psgrid(replace(cfg, out=str(base)))
    if figure == "fig3":
        code = EXIT_OK
        records = []
        for rule in ("halfk", "halfk2"):
            rec, c = cmd_psgrid(replace(cfg, sigma_rule=rule, out=str(base)), tag=rule)
            records.append(rec)
            code = max(code, c)
        summary = RunRecord("reproduce", _jsonable(asdict(cfg)),
                            summary={r: rec.summary for r, rec in zip(("halfk", "halfk2"), records)})
        summary.save(base / "summary.json")
        return summary, code
    if figure == "fig4":
        return cmd_bisect(replace(cfg, out=str(base)))
    record, out, timer = _start("reproduce", replace(cfg, out=str(base)))
    rules = [cfg.sigma_rule] if cfg.sigma_rule else ["halfk", "halfk2"]
    with timer("gmres"):
        rows = gmres_sweep(cfg.level, cfg.kappas, rules, cfg.tol, cfg.maxiter)
    with open(out / "iterations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "sigma_rule", "sigma", "iterations", "converged", "predicted"])
        for rule in rules:
            sel = [r for r in rows if r["sigma_rule"] == rule]
            C = theory.calibrate_sl_constant(sel[0]["kappa"], cfg.tol, sel[0]["iterations"])
            for r in sel:
                r["predicted"] = theory.iterations_estimate("sl", cfg.tol, kappa=r["kappa"], C=C).N
                w.writerow([repr(float(r["kappa"])), rule, repr(float(r["sigma"])), r["iterations"], r["converged"],
                            r["predicted"]])
    series = {}
    for rule in rules:
        sel = [r for r in rows if r["sigma_rule"] == rule]
        series[f"measured, {rule}"] = [r["iterations"] for r in sel]
        series[f"estimate, {rule}"] = [r["predicted"] for r in sel]
    svg.line_plot([k / math.pi for k in cfg.kappas], series, f"GMRES iterations, level {cfg.level}",
                  "kappa / pi", "iterations").save(out / "iterations.svg")
    record.summary = {"rows": rows, "level": cfg.level}
    code = EXIT_OK
    if not all(r["converged"] for r in rows):
        record.warnings.append("some GMRES runs did not converge")
        code = EXIT_WARN
    record.save(out / "record.json")
    return record, code


# desk-scale presets for the reproduce command
FIGURE_PRESETS = {
    "fig1": {"problem": "poisson", "level": 1, "epsilons": (0.05, 0.2), "max_depth": 4, "grid_n": 10},
    "fig2": {"problem": "helmholtz", "level": 3, "kappa": 8 * math.pi, "epsilons": (0.03, 0.1),
             "max_depth": 3, "grid_n": 8},
    "fig3": {"problem": "shifted-laplace", "level": 3, "kappa": 8 * math.pi,
             "epsilons": (1e-3, 1e-2, 1e-1), "max_depth": 3, "grid_n": 12},
    "fig4": {"problem": "shifted-laplace", "level": 3},
    "fig5": {"problem": "shifted-laplace", "level": 4},
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--problem", choices=PROBLEMS)
    common.add_argument("--level", type=int)
    common.add_argument("--kappa", type=parse_kappa)
    common.add_argument("--sigma-rule", dest="sigma_rule", type=parse_sigma_rule)
    common.add_argument("--eps", dest="epsilons", type=lambda s: tuple(sorted(_floats(s))))
    common.add_argument("--kappas", type=lambda s: tuple(parse_kappa(k) for k in s.split(",")))
    common.add_argument("--tol", type=float)
    common.add_argument("--maxiter", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--max-depth", dest="max_depth", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--target", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="helmpseudo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("mesh", "assemble", "psgrid", "regions", "gmres", "bisect"):
        sub.add_parser(name, parents=[common])
    rep = sub.add_parser("reproduce", parents=[common])
    rep.add_argument("figure", choices=FIGURES)
    return parser


_COMMANDS = {"mesh": cmd_mesh, "assemble": cmd_assemble, "psgrid": cmd_psgrid,
             "regions": cmd_regions, "gmres": cmd_gmres, "bisect": cmd_bisect}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    try:
        preset = FIGURE_PRESETS.get(getattr(args, "figure", None), {})
        file_layer = parse_config_text(Path(args.config).read_text()) if args.config else {}
        cfg = make_config(preset, file_layer, flags)
        if args.command == "reproduce":
            record, code = cmd_reproduce(cfg, args.figure)
        else:
            record, code = _COMMANDS[args.command](cfg)
    except Exception as exc:  # reported, exit status 1
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for w in record.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps(_jsonable(record.summary), sort_keys=True)[:2000])
    return code


if __name__ == "__main__":
    sys.exit(main())
