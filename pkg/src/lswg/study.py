"""Manufactured-solution convergence studies driven by key=value configs."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import problems
from .assembly import SparseSpdSystem, WGSpace, assemble
from .mesh import FAMILIES, grid_family
from .polyspace import project_exact_solution
from .postproc import (ErrorRecord, convergence_orders, energy_error, format_table,
                       l2_error, write_error_csv)
from .solver import ConvergenceError, NotPositiveDefiniteError, SolveReport, cg_solve, direct_solve

log = logging.getLogger(__name__)

CASES = ("s2", "s5", "poly")
SOLVERS = ("auto", "cg", "direct")
KEYS = ("case", "k", "epsilon", "bx", "by", "family", "levels", "solver", "out", "poly")

# solver=auto switches to CG only above this many unknowns
AUTO_DIRECT_MAX_DOFS = 50000


class ConfigError(ValueError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass
class StudyConfig:
    case: str = "s2"
    k: int = 2
    epsilon: Optional[float] = None
    b: Optional[tuple] = None
    family: str = "triangular"
    levels: list = field(default_factory=lambda: [3, 4, 5])
    solver: str = "auto"
    out: str = "out"
    poly: tuple = problems.DEFAULT_POLY

    def problem(self) -> problems.Manufactured:
        if self.case == "s2":
            return problems.S2
        if self.case == "s5":
            return problems.S5
        return problems.polynomial(self.poly)

    @property
    def eps(self) -> float:
        return self.epsilon if self.epsilon is not None else self.problem().default_eps

    @property
    def velocity(self) -> tuple:
        return tuple(self.b) if self.b is not None else tuple(self.problem().default_b)


def _parse_poly(text: str):
    terms = []
    for tok in text.replace(";", " ").split():
        c, a, b = tok.split(":")
        a, b = int(a), int(b)
        if a < 0 or b < 0:
            raise ValueError("negative exponent")
        terms.append((float(c), a, b))
    if not terms:
        raise ValueError("empty polynomial")
    return tuple(terms)


def _apply(cfg: StudyConfig, key: str, value: str, where: str, bset: dict):
    value = value.strip()
    try:
        if key == "case":
            if value not in CASES:
                raise ValueError(f"case must be one of {CASES}")
            cfg.case = value
        elif key == "k":
            k = int(value)
            if not 1 <= k <= 4:
                raise ValueError("k must be in 1..4")
            cfg.k = k
        elif key == "epsilon":
            eps = float(value)
            if not (eps > 0 and math.isfinite(eps)):
                raise ValueError("epsilon must be positive")
            cfg.epsilon = eps
        elif key in ("bx", "by"):
            v = float(value)
            if not math.isfinite(v):
                raise ValueError(f"{key} must be finite")
            bset[key] = v
        elif key == "family":
            if value not in FAMILIES:
                raise ValueError(f"family must be one of {sorted(FAMILIES)}")
            cfg.family = value
        elif key == "levels":
            levels = [int(t) for t in value.replace(" ", "").split(",") if t]
            if not levels or any(lv < 1 for lv in levels):
                raise ValueError("levels must be positive integers")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError("levels must be strictly increasing")
            cfg.levels = levels
        elif key == "solver":
            if value not in SOLVERS:
                raise ValueError(f"solver must be one of {SOLVERS}")
            cfg.solver = value
        elif key == "out":
            cfg.out = value
        elif key == "poly":
            cfg.poly = _parse_poly(value)
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {value!r} ({exc})") from None


def parse_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> StudyConfig:
    """Read ``key=value`` lines (``#`` starts a comment); ``overrides`` win.

    Unknown keys, unparsable numbers and out-of-range values raise
    ConfigError naming the offending line or flag.
    """
    cfg = StudyConfig()
    bset: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for i, raw in enumerate(lines, 1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{i}: expected key=value, got {raw!r}")
            key, value = text.split("=", 1)
            _apply(cfg, key.strip(), value, f"{path}:{i}: {raw.strip()}", bset)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        _apply(cfg, key, str(value), f"--{key}={value}", bset)
    if bset:
        bx, by = cfg.velocity
        cfg.b = (bset.get("bx", bx), bset.get("by", by))
    return cfg


@dataclass
class LevelResult:
    record: ErrorRecord
    space: WGSpace
    x: np.ndarray
    qhu: np.ndarray
    solve: SolveReport
    system: SparseSpdSystem


@dataclass
class StudyReport:
    config: StudyConfig
    records: list
    solves: list
    status: str = "ok"
    message: str = ""

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 3

    def table(self) -> str:
        cfg = self.config
        title = (f"case {cfg.case}, P{cfg.k} WG element, {cfg.family} grids, "
                 f"eps={cfg.eps:g}, b={cfg.velocity}")
        return format_table(self.records, title)


def choose_solver(solver: str, eps: float, n: int) -> str:
    if solver != "auto":
        return solver
    return "direct" if eps <= 1e-7 or n <= AUTO_DIRECT_MAX_DOFS else "cg"


def solve_level(cfg: StudyConfig, level: int, solver: Optional[str] = None) -> LevelResult:
    prob = cfg.problem()
    eps, b, k = cfg.eps, cfg.velocity, cfg.k
    mesh = grid_family(cfg.family, level)
    space = WGSpace(mesh, k)
    system = assemble(space, eps, b, prob.source(eps, b), prob.u,
                      prob.normal_derivative(problems.unit_square_normal))
    method = choose_solver(solver or cfg.solver, eps, len(system.F))
    try:
        if method == "cg":
            xf, rep = cg_solve(system.A, system.F)
        else:
            xf, rep = direct_solve(system.A, system.F, report=True)
    except (ConvergenceError, NotPositiveDefiniteError) as exc:
        raise SolverFailure(f"level {level}: {exc}") from exc
    x = system.expand(xf)
    qhu = project_exact_solution(prob.u, prob.grad, mesh, k, space.dofs)
    rec = ErrorRecord(
        level=level,
        h=mesh.h,
        l2=l2_error(space, x, prob.u),
        energy=energy_error(space, x, qhu, b),
        n_dofs=space.n_dofs,
    )
    log.info("level %d: N=%d l2=%.3e energy=%.3e (%s, %d it, %.2fs)",
             level, space.n_dofs, rec.l2, rec.energy, rep.method, rep.iterations, rep.wall_time)
    return LevelResult(rec, space, x, qhu, rep, system)


def run_study(cfg: StudyConfig, write: bool = True) -> StudyReport:
    records, solves = [], []
    report = StudyReport(cfg, records, solves)
    for level in cfg.levels:
        try:
            res = solve_level(cfg, level)
        except SolverFailure as exc:
            report.status, report.message = "solver-failure", str(exc)
            log.error("%s", exc)
            break
        records.append(res.record)
        solves.append(res.solve)
    if len(records) >= 2:
        report.records = convergence_orders(records)
    if write:
        write_report(report)
    return report


def write_report(report: StudyReport) -> None:
    cfg = report.config
    os.makedirs(cfg.out, exist_ok=True)
    stem = f"{cfg.case}_k{cfg.k}_{cfg.family}_eps{cfg.eps:g}"
    write_error_csv(report.records, os.path.join(cfg.out, stem + ".csv"))
    with open(os.path.join(cfg.out, stem + ".txt"), "w") as fh:
        fh.write(report.table() + "\n")
    meta = {
        "config": {**asdict(cfg), "epsilon": cfg.eps, "b": list(cfg.velocity)},
        "status": report.status,
        "message": report.message,
        "solver_defaults": {"cg_tol": 1e-12, "cg_max_iter": "50*N", "preconditioner": "jacobi"},
        "solves": [{"level": r.level, "n_dofs": r.n_dofs, **asdict(s)}
                   for r, s in zip(report.records, report.solves)],
    }
    with open(os.path.join(cfg.out, stem + ".json"), "w") as fh:
        json.dump(meta, fh, indent=2)
