"""Pipelines behind the CLI subcommands.

``execute`` resolves the mesh, runs the solver, and writes trace.csv,
result.json and the per-pipeline tables into one output directory.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import resources as res
from .config import RunConfig, dump_config
from .errors import BudgetError, ValidationError
from .grid import GridSpec, TimeGrid, mesh_for_schrodinger, mesh_for_spectral, mesh_for_upwind, round_omega
from .mollifier import MolliferSpec, init_kvn, init_levelset, init_liouville, init_wkb
from .observables import (
    DiagonalObservable,
    ObservableSpec,
    born_sample,
    decay_factor,
    expect_hje,
    expect_kvn,
    expect_liouville,
    hje_spec,
    make_sampling_plan,
    sampling_factors,
    schrodinger_observables,
    schrodinger_sampling_factors,
)
from .problems import get_problem
from .report import dumps, sha256_text, with_content_hash, write_csv
from .splitting import (
    evolve,
    kvn_trotter_plan,
    liouville_nonunitary_plan,
    liouville_phase_plan,
    schrodinger_plan,
    write_trace_csv,
)
from .upwind import (
    DENSE_DIAGNOSTIC_BUDGET,
    assemble_hje,
    assemble_kvn,
    assemble_liouville,
    build_block_system,
    condition_diagnostics,
)

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "LINREP_OUTPUT_ROOT"
DENSE_SPLIT_BUDGET = 1024  # grid points for the dense non-unitary splitting
LOCAL_MAX_THRESHOLD = 1e-3

ENTRY_FOR = {
    ("ode-liouville", "fd"): "liouville_fd_qlsa",
    ("ode-liouville", "nonunitary-split"): "liouville_sim",
    ("ode-kvn", "fd"): "kvn_fd_qlsa",
    ("ode-kvn", "spectral-sim"): "kvn_sim",
    ("hje", "fd"): "liouville_phase_fd_qlsa",
    ("hje", "splitting"): "liouville_phase_sim",
    ("schrodinger", "splitting"): "schrodinger_sim",
}


@dataclass
class RunOutcome:
    result: dict
    trace: list = field(default_factory=list)
    trace_columns: tuple = ()
    tables: dict = field(default_factory=dict)  # filename -> (header, rows)
    figures: list = field(default_factory=list)
    texts: dict = field(default_factory=dict)  # filename -> text


def _time_grid(T: float, dt_target: float, steps: int | None) -> TimeGrid:
    if steps is not None:
        return TimeGrid(T / steps, steps)
    return TimeGrid.from_horizon(T, dt_target)


def _explicit_dt(cfg: RunConfig, dx: float) -> float | None:
    if cfg.mesh.dt is not None:
        return cfg.mesh.dt
    if cfg.mesh.lam is not None:
        return cfg.mesh.lam * dx
    return None


def count_local_maxima(values: np.ndarray, threshold: float = LOCAL_MAX_THRESHOLD) -> int:
    """Strict periodic local maxima above ``threshold`` * max."""
    v = np.asarray(values, dtype=float)
    left, right = np.roll(v, 1), np.roll(v, -1)
    return int(np.sum((v > left) & (v >= right) & (v > threshold * v.max())))


def _resource_block(cfg: RunConfig, d: int, eps: float | None, factors: dict, ell: float) -> dict:
    key = ENTRY_FOR.get((cfg.subcommand, cfg.method))
    if key is None:
        return {}
    eps = eps if eps is not None else cfg.resources.eps
    rc = cfg.resources
    merged = {**factors, **rc.factors}
    out = {"eps": eps, "d": d, "ell": ell, "alpha": rc.alpha, "factors_used": merged}
    for kind in ("subroutine", "observable"):
        e = res.lookup(key, kind)
        out[kind] = {"method": e.method, "formula": e.render(), "anchor": e.anchor,
                     "value": res.evaluate(e, d, eps, ell, merged, rc.alpha, rc.observable),
                     "alpha_flag": e.uses_alpha}
    return out


# --- ODE pipelines -----------------------------------------------------------------

def _ode(cfg: RunConfig, inst, rep: str) -> RunOutcome:
    d, fld, m = inst.dim, inst.field, cfg.mesh
    T = m.horizon or inst.horizon
    spectral = cfg.method in ("spectral-sim", "nonunitary-split")
    cfl_total = max(sum(fld.sup_per_axis), 1e-12)
    strategy = None
    if m.eps is not None:
        if spectral:
            strategy = mesh_for_spectral(m.eps, d, m.ell, horizon=T)
        else:
            strategy = mesh_for_upwind(m.eps, d, c_f=cfl_total / d, horizon=T)
        M, cells = strategy.M, strategy.support_cells
        dt_target = _explicit_dt(cfg, strategy.dx) or strategy.dt
    else:
        M = m.M or (64 if d == 1 else 32)
        dx = 1.0 / M
        if spectral:
            # omega ~ eps with dx ~ eps^(1+2/ell) / d^(1/ell)
            inv = 0.0 if math.isinf(m.ell) else 1.0 / m.ell
            omega_target = (dx * d**inv) ** (1.0 / (1.0 + 2.0 * inv))
        else:
            omega_target = (d * dx) ** (1.0 / 3.0)
        cells = m.omega_cells or round_omega(omega_target, dx)[1]
        dt_target = _explicit_dt(cfg, dx) or (dx if spectral else 0.5 * dx / cfl_total)
    g = GridSpec(d, M)
    if cfg.method == "nonunitary-split" and g.size > DENSE_SPLIT_BUDGET:
        raise BudgetError(f"non-unitary splitting is dense; {g.size} points exceed {DENSE_SPLIT_BUDGET}")
    tg = _time_grid(T, dt_target, m.steps)
    spec = MolliferSpec.on_grid(g, cells, m.kernel)
    init = init_liouville(g, spec, inst.q0) if rep == "liouville" else init_kvn(g, spec, inst.q0)
    w0 = init.values

    names = cfg.observables or ["mean"]
    for n in names:
        if n not in ("mean", "mass"):
            raise ValidationError(f"unknown ODE observable {n!r}; expected mean or mass", "observables")

    def expect(state, ospec):
        if rep == "liouville":
            return expect_liouville(state, ospec, g)
        return expect_kvn(state, ospec, g)

    obs_specs = {}
    if "mean" in names:
        for i in range(d):
            obs_specs[f"mean_x{i}"] = ObservableSpec.coordinate(i)
    if "mass" in names:
        obs_specs["mass_obs"] = ObservableSpec.constant(1.0)

    def observer(n, state, row):
        for k, s in obs_specs.items():
            row[k] = expect(state, s)

    diagnostics: dict = {}
    ledger = None
    if cfg.method == "fd":
        scheme = (assemble_liouville if rep == "liouville" else assemble_kvn)(g, tg, fld)
        run = evolve(scheme, w0, tg.steps, observer)
        diagnostics.update({"lambda": scheme.lam, "cfl_margin": scheme.cfl_margin, "row_sparsity": scheme.row_sparsity(),
                            "div_sup": scheme.div_sup,
                            "decay_factor_g": decay_factor([r["l2_norm"] for r in run.trace])})
        system = build_block_system(scheme, w0, tg.steps)
        report = condition_diagnostics(system, DENSE_DIAGNOSTIC_BUDGET)
        diagnostics["condition"] = report.to_dict()
        if not report.skipped:
            hist = system.solve()
            diagnostics["qlsa_emulation_defect"] = float(np.abs(hist[-1] - run.state).max())
    elif cfg.method == "nonunitary-split":
        plan = liouville_nonunitary_plan(g, fld, tg.dt)
        run = evolve(plan, w0, tg.steps, observer)
        ledger = run.ledger
        cc = res.copy_cost(ledger) if ledger.steps else None
        diagnostics["copy_cost"] = cc.to_dict() if cc else None
        diagnostics["imag_residual"] = float(np.abs(np.imag(run.state)).max())
    else:
        plan = kvn_trotter_plan(g, fld, tg.dt, cfg.order)
        run = evolve(plan, w0, tg.steps, observer)
        norms = [r["l2_norm"] for r in run.trace]
        diagnostics["l2_drift"] = float(max(abs(x - norms[0]) for x in norms))

    final = {k: run.trace[-1][k] for k in obs_specs}
    result: dict = {"final_observables": final}
    if inst.exact is not None and "mean" in names:
        q = inst.exact(tg.horizon)
        result["exact_solution"] = [float(v) for v in q]
        result["recovery_error"] = float(max(abs(final[f"mean_x{i}"] - q[i]) for i in range(d)))
    if rep == "liouville":
        factors = sampling_factors(rho0=w0, d=d)
    else:
        factors = sampling_factors(rho0=np.abs(w0) ** 2, psi0=w0, d=d)
    if cfg.sampling is not None:
        result["sampling"] = _sample(cfg, run.state, g.coordinates()[0].reshape(-1))

    mesh = strategy.to_dict() if strategy else {}
    mesh.update({"M": M, "dx": g.spacing, "dt": tg.dt, "steps": tg.steps, "horizon": tg.horizon,
                 "omega": spec.width, "support_cells": cells, "kernel": m.kernel})
    result.update({"mesh": mesh, "diagnostics": diagnostics, "factors": factors,
                   "resources": _resource_block(cfg, d, m.eps, factors, m.ell)})

    dens = np.real(run.state) if rep == "liouville" else np.abs(run.state) ** 2
    coords = g.coordinates().reshape(d, -1)
    header = [f"x{i}" for i in range(d)] + ["density"]
    rows = [[*(float(c) for c in coords[:, k]), float(dens[k])] for k in range(g.size)]
    figures = [{"name": "trace", "x": [r["time"] for r in run.trace],
                "series": {k: [r[k] for r in run.trace] for k in obs_specs},
                "xlabel": "t", "ylabel": "observable"}]
    if d == 1:
        figures.append({"name": "density", "x": coords[0].tolist(), "series": {"density": dens.tolist()},
                        "xlabel": "x", "ylabel": "density"})
    return RunOutcome(result, run.trace, tuple(obs_specs), {"state.csv": (header, rows)}, figures)


def _sample(cfg: RunConfig, state: np.ndarray, values: np.ndarray) -> dict:
    s = cfg.sampling
    obs = DiagonalObservable(values)
    plan = make_sampling_plan(state, obs, s.eps, s.confidence, seed=cfg.seed)
    out = born_sample(state, obs, plan)
    return {"plan": plan.to_dict(), "empirical_mean": out.empirical_mean, "exact_mean": out.exact,
            "variance": out.variance, "n_used": out.n_used, "abs_error": abs(out.empirical_mean - out.exact)}


# --- HJE pipeline ------------------------------------------------------------------

def _hje(cfg: RunConfig, inst) -> RunOutcome:
    d, ham, m = inst.dim, inst.hamiltonian, cfg.mesh
    T = m.horizon or inst.horizon
    spectral = cfg.method == "splitting"
    cfl_total = sum(ham.sup_dHdp) + sum(ham.sup_dHdx)
    strategy = None
    if m.eps is not None:
        if spectral:
            strategy = mesh_for_spectral(m.eps, 2 * d, m.ell, horizon=T)
        else:
            strategy = mesh_for_upwind(m.eps, 2 * d, c_f=cfl_total / (2 * d), horizon=T)
        M, cells = strategy.M, strategy.support_cells
        dt_target = _explicit_dt(cfg, strategy.dx) or strategy.dt
    else:
        M = m.M or 64
        dx = 1.0 / M
        cells = m.omega_cells or max(2, math.ceil(math.sqrt(M)))
        dt_target = _explicit_dt(cfg, dx) or (dx if spectral else 0.5 * dx / cfl_total)
    g2 = GridSpec.phase_space(d, M)
    tg = _time_grid(T, dt_target, m.steps)
    spec = MolliferSpec.on_grid(g2, cells, m.kernel)
    init = init_levelset(g2, spec, inst.u0)
    w0 = init.values
    names = cfg.observables or ["density", "momentum"]
    specs = {n: hje_spec(n) for n in names}
    diagnostics: dict = {}
    if spectral:
        plan = liouville_phase_plan(g2, inst.grad_v, tg.dt, cfg.order)
        run = evolve(plan, w0, tg.steps)
        norms = [r["l2_norm"] for r in run.trace]
        diagnostics["l2_drift"] = float(max(abs(x - norms[0]) for x in norms))
    else:
        scheme = assemble_hje(g2, tg, ham)
        run = evolve(scheme, w0, tg.steps)
        diagnostics.update({"lambda": scheme.lam, "cfl_margin": scheme.cfl_margin,
                            "row_sparsity": scheme.row_sparsity()})
        report = condition_diagnostics(build_block_system(scheme, w0, tg.steps), DENSE_DIAGNOSTIC_BUDGET)
        diagnostics["condition"] = report.to_dict()

    w = np.real(run.state)
    vals = {n: expect_hje(w, s, g2) for n, s in specs.items()}
    xg = GridSpec(d, M)
    x = xg.coordinates().reshape(d, -1)
    result: dict = {"final_observables": {n: {"max": float(v.max()), "min": float(v.min())} for n, v in vals.items()}}
    exact_fn = inst.extras.get("hje_exact")
    cols = dict(vals)
    if exact_fn is not None and d == 1:
        rho_ex, u_ex = exact_fn(tg.horizon, x[0])
        cols["density_exact"] = rho_ex
        cols["momentum_exact"] = rho_ex * u_ex
        errs = {}
        if "momentum" in vals:
            errs["momentum_max_error"] = float(np.abs(vals["momentum"] - rho_ex * u_ex).max())
        if "density" in vals:
            errs["density_max_error"] = float(np.abs(vals["density"] - rho_ex).max())
        result["oracle_errors"] = errs
    if "density" in vals and "momentum" in vals:
        rho = vals["density"]
        mask = rho > 1e-3 * rho.max()
        u = np.where(mask, vals["momentum"] / np.where(mask, rho, 1.0), np.nan)
        cols["velocity"] = u
    factors = sampling_factors(w0=w0, d=d)
    mesh = strategy.to_dict() if strategy else {}
    mesh.update({"M": M, "dx": g2.spacing, "dt": tg.dt, "steps": tg.steps, "horizon": tg.horizon,
                 "omega": spec.width, "support_cells": cells, "kernel": m.kernel})
    result.update({"mesh": mesh, "diagnostics": diagnostics, "factors": factors,
                   "resources": _resource_block(cfg, d, m.eps, factors, m.ell)})
    header = [f"x{i}" for i in range(d)] + list(cols)
    rows = [[*(float(c) for c in x[:, k]), *(float(cols[c][k]) for c in cols)] for k in range(x.shape[1])]
    figures = []
    if d == 1:
        figures.append({"name": "observables", "x": x[0].tolist(),
                        "series": {k: np.asarray(v, dtype=float).tolist() for k, v in cols.items()},
                        "xlabel": "x", "ylabel": "value"})
    return RunOutcome(result, run.trace, (), {"observables.csv": (header, rows)}, figures)


# --- Schrodinger pipeline ----------------------------------------------------------

def _schrodinger(cfg: RunConfig, inst) -> RunOutcome:
    m = cfg.mesh
    T = m.horizon or inst.horizon
    hbar = inst.hbar
    strategy = None
    if m.eps is not None:
        strategy = mesh_for_schrodinger(m.eps, inst.dim, m.ell, "observable", horizon=T)
        M, hbar = strategy.M, strategy.hbar
        dt_target = _explicit_dt(cfg, strategy.dx) or strategy.dt
        steps = m.steps
    else:
        M = m.M or inst.extras["M"]
        dt_target = _explicit_dt(cfg, 1.0 / M)
        steps = m.steps or (None if dt_target else inst.extras["steps"])
    g = GridSpec(inst.dim, M)
    tg = _time_grid(T, dt_target or T, steps)
    init = init_wkb(g, inst.amplitude, inst.phase, hbar)
    plan = schrodinger_plan(g, inst.potential, hbar, tg.dt, cfg.order)
    run = evolve(plan, init.values, tg.steps)
    masses = [r["mass"] for r in run.trace]
    names = cfg.observables or ["density"]
    vals = {}
    for n in names:
        vals[n] = np.asarray(schrodinger_observables(run.state, g, hbar, n))
    dx = g.spacing ** g.dim
    rho = np.abs(run.state) ** 2
    n_u0 = float(np.linalg.norm(init.values))
    eps_res = m.eps if m.eps is not None else cfg.resources.eps
    factors = {"N_u0": n_u0}
    result = {
        "final_observables": {n: {"integral": float(v.sum() * dx), "max": float(v.max())} for n, v in vals.items()},
        "hbar": hbar,
        "mass_initial": masses[0],
        "mass_final": masses[-1],
        "mass_drift": float(max(abs(x - masses[0]) for x in masses)),
        "density_local_maxima": count_local_maxima(rho),
        "sampling_variance_factors": schrodinger_sampling_factors(n_u0, M, eps_res),
        "factors": factors,
    }
    if cfg.sampling is not None:
        result["sampling"] = _sample(cfg, run.state, g.coordinates()[0].reshape(-1))
    mesh = strategy.to_dict() if strategy else {}
    mesh.update({"M": M, "dx": g.spacing, "dt": tg.dt, "steps": tg.steps, "horizon": tg.horizon})
    result.update({"mesh": mesh, "diagnostics": {"order": cfg.order},
                   "resources": _resource_block(cfg, g.dim, m.eps, factors, m.ell)})
    x = g.coordinates().reshape(g.dim, -1)
    dens_rows = [[float(x[0, k]), float(rho[k])] for k in range(g.size)]
    obs_header = ["x"] + list(vals)
    obs_rows = [[float(x[0, k]), *(float(vals[n][k]) for n in vals)] for k in range(g.size)]
    figures = [{"name": "density", "x": x[0].tolist(), "series": {"rho": rho.tolist()},
                "xlabel": "x", "ylabel": "rho", "title": f"hbar={hbar:g}, t={tg.horizon:g}"}]
    return RunOutcome(result, run.trace, (), {"density.csv": (["x", "rho"], dens_rows),
                                              "observables.csv": (obs_header, obs_rows)}, figures)


# --- resources ---------------------------------------------------------------------

def _resources(cfg: RunConfig) -> RunOutcome:
    rc = cfg.resources
    md = res.table_markdown(rc.d, rc.eps, rc.ell, rc.factors, rc.alpha, rc.observable)
    csv_text = res.table_csv(rc.d, rc.eps, rc.ell, rc.factors, rc.alpha, rc.observable)
    subs = [e for e in res.entries("subroutine")]
    grid = [(d, e) for d in rc.grid_d for e in rc.grid_eps]
    cmp = res.compare_table(subs, grid, rc.ell, rc.factors, rc.alpha, rc.observable)
    result = {
        "table": res.full_table(rc.d, rc.eps, rc.ell, rc.factors, rc.alpha, rc.observable),
        "comparison": [{"d": r.d, "eps": r.eps, "best": r.best, "sim_dominates": r.sim_dominates} for r in cmp.rows],
        "crossovers": cmp.crossovers,
        "conventions": {"constants": 1, "log_base": 2, "log_floor": 1, "alpha": rc.alpha, "ell": rc.ell},
    }
    texts = {"resources.md": md + "\n" + cmp.to_markdown(), "resources.csv": csv_text, "comparison.csv": cmp.to_csv()}
    return RunOutcome(result, texts=texts)


# --- entry point -------------------------------------------------------------------

def run_config(cfg: RunConfig) -> RunOutcome:
    if cfg.subcommand == "resources":
        return _resources(cfg)
    problem = get_problem(cfg.problem)
    expected = {"ode-liouville": "ode", "ode-kvn": "ode", "hje": "hje", "schrodinger": "schrodinger"}[cfg.subcommand]
    if problem.kind != expected:
        raise ValidationError(f"problem {problem.name!r} is a {problem.kind} problem, not usable with {cfg.subcommand}",
                              "problem.name")
    inst = problem.instantiate(cfg.params)
    if cfg.subcommand == "ode-liouville":
        out = _ode(cfg, inst, "liouville")
    elif cfg.subcommand == "ode-kvn":
        out = _ode(cfg, inst, "kvn")
    elif cfg.subcommand == "hje":
        out = _hje(cfg, inst)
    else:
        out = _schrodinger(cfg, inst)
    out.result["problem"] = {"name": problem.name, "summary": problem.summary, "anchor": problem.anchor,
                             "params": dict(inst.params)}
    return out


def default_output_dir(cfg: RunConfig) -> Path:
    if cfg.output:
        return Path(cfg.output)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    tag = sha256_text(dump_config(cfg))[:10]
    name = cfg.subcommand + (f"-{cfg.problem}" if cfg.problem else "")
    return root / f"{name}-{tag}"


def execute(cfg: RunConfig, out_dir: str | Path | None = None) -> tuple[Path, dict]:
    """Run ``cfg`` and write its artifacts; returns (directory, result dict)."""
    out = run_config(cfg)
    directory = Path(out_dir) if out_dir is not None else default_output_dir(cfg)
    directory.mkdir(parents=True, exist_ok=True)
    config_text = dump_config(cfg)
    config_hash = sha256_text(config_text)
    result = {"config": cfg.to_dict(), "config_sha256": config_hash, "subcommand": cfg.subcommand,
              "method": cfg.method, "seed": cfg.seed, **out.result}
    artifacts = ["result.json", "config.yaml"]
    if out.trace:
        write_trace_csv(directory / "trace.csv", out.trace, out.trace_columns, f"config-sha256 {config_hash}")
        artifacts.append("trace.csv")
    for name, (header, rows) in out.tables.items():
        write_csv(directory / name, header, rows, f"config-sha256 {config_hash}")
        artifacts.append(name)
    for name, text in out.texts.items():
        (directory / name).write_text(text)
        artifacts.append(name)
    (directory / "config.yaml").write_text(config_text)
    result["artifacts"] = sorted(artifacts)
    result = with_content_hash(result)
    (directory / "result.json").write_text(dumps(result))
    if cfg.plots and out.figures:
        from .plotting import render_figures
        render_figures(out.figures, directory)
    return directory, result
