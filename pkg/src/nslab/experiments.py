"""Experiment harness: Kato and inviscid-limit studies, reports, persistence.

All outputs are deterministic functions of (config, seed): floats are written
with shortest-roundtrip repr, JSON keys are sorted, and wall-clock timestamps
live only in checkpoint sidecar metadata.  Files are written atomically
(temp file + rename).
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .bl_norms import BLWeightParams, bl_norm, bl_profile_fit, verify_section2_lemmas
from .checkpoint import save_checkpoint
from .config import ExperimentConfig, initial_field
from .fieldkit import SpectralField, build_graded_grid, dealias_size, to_physical
from .green_stokes import (ContourParams, contour_residual, residual_kernel,
                           residual_kernel_quadrature, verify_pointwise_bounds)
from .ns_solver import SolverConfig, Trajectory, run_euler, run_navier_stokes
from .biot_savart import velocity_from_vorticity


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def kato_functional(trajectory: Trajectory, nu: float | None = None) -> float:
    """nu * int_0^T (integral of |omega|^2 over the slab) dt, trapezoid in time.

    Equals nu * int int |grad u|^2 by the enstrophy identity for no-penetration
    decaying flows; nonnegative and nondecreasing in T by construction.
    """
    if len(trajectory.fields) == 0:
        raise ValueError("empty trajectory")
    nu = trajectory.config.nu if nu is None else nu
    enst = np.asarray(trajectory.diagnostics["enstrophy"], dtype=float)
    return float(nu * np.trapz(enst, trajectory.times))


def kato_integrand(trajectory: Trajectory, nu: float | None = None) -> np.ndarray:
    nu = trajectory.config.nu if nu is None else nu
    return nu * np.asarray(trajectory.diagnostics["enstrophy"], dtype=float)


def velocity_lp_gap(a: Trajectory, b: Trajectory, p: float) -> np.ndarray:
    """|| u_a(t) - u_b(t) ||_{L^p} on the shared grid, per stored time."""
    if a.grid is not b.grid and a.grid.n_nodes != b.grid.n_nodes:
        raise ValueError("trajectories must share one grid")
    n_x = dealias_size(max(a.fields[0].K, b.fields[0].K))
    w_z = a.grid.weights
    out = []
    for fa, fb in zip(a.fields, b.fields):
        u1a, u2a = velocity_from_vorticity(fa)
        u1b, u2b = velocity_from_vorticity(fb)
        d1 = to_physical(u1a, n_x).values - to_physical(u1b, n_x).values
        d2 = to_physical(u2a, n_x).values - to_physical(u2b, n_x).values
        mag = np.abs(d1) ** 2 + np.abs(d2) ** 2
        integrand = mag ** (p / 2.0)
        val = (2.0 * math.pi / n_x) * float(np.sum(integrand @ w_z))
        out.append(val ** (1.0 / p))
    return np.asarray(out)


def velocity_sup_gap(a: Trajectory, b: Trajectory) -> np.ndarray:
    """sup-norm counterpart of velocity_lp_gap (boundedness evidence)."""
    n_x = dealias_size(max(a.fields[0].K, b.fields[0].K))
    out = []
    for fa, fb in zip(a.fields, b.fields):
        u1a, u2a = velocity_from_vorticity(fa)
        u1b, u2b = velocity_from_vorticity(fb)
        d1 = to_physical(u1a, n_x).values - to_physical(u1b, n_x).values
        d2 = to_physical(u2a, n_x).values - to_physical(u2b, n_x).values
        out.append(float(np.sqrt(np.abs(d1) ** 2 + np.abs(d2) ** 2).max()))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def semigroup_growth_report(field: SpectralField, nu: float, times: tuple,
                            params: BLWeightParams, rho: float = 0.2, k: int = 1) -> dict:
    """Measured growth factors of the layer norm under e^{nu (t-s) B}.

    Mirrors the semigroup estimate |||e^{nu(t-s)B} f|||_{delta(t),k} <=
    C sqrt(t/s) |||f|||_{delta(s),k}; the first positive node is the earliest s
    (the s = 0 endpoint is covered by the delta(0)-norm convention, not by the
    sqrt(t/s) factor).  Report-only.
    """
    from .stokes_semigroup import apply_semigroup

    rows = []
    for s in times:
        if s <= 0:
            continue
        ref = bl_norm(apply_semigroup(field, nu, s), s, rho, params, k=k)
        for t in times:
            if t <= s:
                continue
            evolved = apply_semigroup(field, nu, t)
            val = bl_norm(evolved, t, rho, params, k=k)
            rows.append({
                "s": s, "t": t,
                "growth": val / ref if ref > 0 else math.inf,
                "envelope": math.sqrt(t / s),
            })
    worst = max((r["growth"] / r["envelope"] for r in rows), default=0.0)
    return {"rows": rows, "max_constant": worst}


def _sweep_grid_config(cfg: ExperimentConfig, nu: float) -> SolverConfig:
    """Solver config pinned to the finest common resolution of the sweep."""
    nu_min = min(cfg.nu_list)
    solver = cfg.solver_config(nu=nu)
    if cfg.delta_ref <= 0:
        solver.delta_ref = max(0.5 * math.sqrt(nu_min * cfg.dt), 1e-5 * cfg.z_max)
    return solver


def run_kato_sweep(cfg: ExperimentConfig) -> dict:
    """Kato functional along the nu ladder on the default analytic datum.

    The datum is fixed as a flow (velocity class); layer-carrying descriptors
    such as prandtl-pulse realize their vorticity with the run's own
    delta = sqrt(nu), which is what makes the boundary-layer dissipation
    mechanism measurable at all.
    """
    rows = []
    grid = _sweep_grid_config(cfg, cfg.nu_list[0]).build_grid()
    for nu in cfg.nu_list:
        omega0 = initial_field(cfg.datum, grid, cfg.modes, nu=nu)
        solver = _sweep_grid_config(cfg, nu)
        traj = run_navier_stokes(solver, SpectralField(grid, omega0.coeffs.copy(), omega0.real))
        if not traj.completed:
            rows.append({"nu": nu, "kato": math.nan, "failure": traj.failure})
            break
        rows.append({
            "nu": nu,
            "kato": kato_functional(traj),
            "max_enstrophy": max(traj.diagnostics["enstrophy"]),
            "max_noslip_rate": max(traj.diagnostics["noslip_rate"]),
            "max_picard_iters": max(traj.picard_iters),
        })
    done = [r for r in rows if "failure" not in r]
    slope = math.nan
    if len(done) >= 2:
        x = np.log([r["nu"] for r in done])
        y = np.log([r["kato"] for r in done])
        slope = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "loglog_slope": slope}


def run_inviscid_sweep(cfg: ExperimentConfig) -> dict:
    """sup_t L^p velocity gaps against the Euler reference along the nu ladder.

    The Euler reference runs once on the finest common grid and is reused for
    every viscous member (comparison error must be nu-dominated, not
    resolution-dominated).
    """
    solver0 = _sweep_grid_config(cfg, cfg.nu_list[0])
    grid = solver0.build_grid()
    # nu=None enforces a nu-independent datum: identical omega_0 across members
    omega0 = initial_field(cfg.datum, grid, cfg.modes, nu=None)

    euler_cfg = _sweep_grid_config(cfg, cfg.nu_list[0])
    euler_cfg.nu = 0.0
    euler = run_euler(euler_cfg, SpectralField(grid, omega0.coeffs.copy(), omega0.real))

    rows = []
    for nu in cfg.nu_list:
        solver = _sweep_grid_config(cfg, nu)
        traj = run_navier_stokes(solver, SpectralField(grid, omega0.coeffs.copy(), omega0.real))
        if not traj.completed:
            rows.append({"nu": nu, "failure": traj.failure})
            break
        rows.append({
            "nu": nu,
            "sup_l2": float(velocity_lp_gap(traj, euler, 2.0).max()),
            "sup_l4": float(velocity_lp_gap(traj, euler, 4.0).max()),
            "sup_linf": float(velocity_sup_gap(traj, euler).max()),
            "kato": kato_functional(traj),
        })
    return {"rows": rows}


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, schema: str, columns: list[str], rows: list[list]) -> None:
    lines = [f"# schema=nslab/{schema}/v1", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    write_atomic(path, "\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    write_atomic(path, json.dumps(payload, sort_keys=True, indent=1, default=_fmt) + "\n")


def _timeseries_rows(traj: Trajectory, cfg: ExperimentConfig):
    params = BLWeightParams.for_viscosity(traj.config.nu, beta=cfg.beta, p_power=cfg.p_power)
    c0 = bl_profile_fit(traj, params)
    integrand = kato_integrand(traj)
    columns = ["time", "picard_iters", "contraction", "noslip_trace", "noslip_drift",
               "noslip_rate", "divergence_residual", "reality_defect", "kinetic_energy",
               "enstrophy", "kato_integrand", "l1_norm", "bl_norm_k0", "c0_fit"]
    rows = []
    d = traj.diagnostics
    for i, t in enumerate(traj.times):
        field = traj.fields[i]
        l1 = sum(float(field.grid.integrate(np.abs(field.mode(a))))
                 for a in range(-field.K, field.K + 1))
        rows.append([
            float(t),
            traj.picard_iters[i - 1] if i > 0 and traj.picard_iters else 0,
            traj.contraction[i - 1] if i > 0 and traj.contraction else 0.0,
            d["noslip_trace"][i], d["noslip_drift"][i], d["noslip_rate"][i],
            d["divergence_residual"][i], d["reality_defect"][i],
            d["kinetic_energy"][i], d["enstrophy"][i], float(integrand[i]),
            l1, bl_norm(field, float(t), 0.0, params, k=0), float(c0[i]),
        ])
    return columns, rows


def _green_triple_rows(cfg: ExperimentConfig, n_points: int = 120):
    rng = np.random.default_rng(cfg.seed)
    rows = []
    worst = 0.0
    for _ in range(n_points):
        nu = float(rng.choice([1e-2, 1e-3, 1e-4]))
        alpha = int(rng.integers(1, 17))
        t = float(np.exp(rng.uniform(math.log(1e-3), 0.0)))
        zeta = float(rng.uniform(0.0, 12.0) * math.sqrt(nu * t) + rng.uniform(0.0, 0.3))
        y = float(rng.uniform(0.0, zeta))
        z = zeta - y
        closed = float(residual_kernel(nu, alpha, t, y, z))
        quad = residual_kernel_quadrature(nu, alpha, t, y, z)
        cont, cont_err = contour_residual(nu, alpha, t, y, z)
        scale = max(abs(closed), 1e-10 / 1e-6)
        disc = max(abs(closed - quad), abs(closed - cont)) / scale
        worst = max(worst, disc)
        regime = "low" if alpha * alpha * nu <= 1.0 else "high"
        rows.append([nu, alpha, t, y, z, regime, closed, quad, cont, cont_err, disc])
    columns = ["nu", "alpha", "t", "y", "z", "regime", "closed_form", "quadrature",
               "contour", "contour_err_est", "rel_or_abs_discrepancy"]
    return columns, rows, worst


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute the configured command; write reports under cfg.out_dir.

    Returns the summary dict (also written as summary.json).
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    summary: dict = {"command": cfg.command, "seed": cfg.seed,
                     "config_hash": cfg.content_hash()}

    if cfg.command in ("simulate-ns", "simulate-euler"):
        is_euler = cfg.command == "simulate-euler"
        solver = cfg.solver_config(nu=0.0 if is_euler else cfg.nu)
        grid = solver.build_grid()
        omega0 = initial_field(cfg.datum, grid, cfg.modes,
                               nu=None if is_euler else cfg.nu)
        traj = (run_euler if is_euler else run_navier_stokes)(solver, omega0)
        columns, rows = _timeseries_rows(traj, cfg)
        write_csv(os.path.join(cfg.out_dir, "timeseries.csv"), "timeseries", columns, rows)
        if cfg.checkpoint_every > 0:
            for i in range(0, len(traj.fields), cfg.checkpoint_every):
                save_checkpoint(os.path.join(cfg.out_dir, f"ckpt_{i:06d}.bin"),
                                traj.fields[i], solver.nu, float(traj.times[i]),
                                config_hash=cfg.content_hash())
        summary.update({
            "completed": traj.completed,
            "failure": traj.failure,
            "kato": kato_functional(traj),
            "max_noslip_rate": max(traj.diagnostics["noslip_rate"]),
            "max_noslip_trace": max(traj.diagnostics["noslip_trace"]),
            "final_energy": traj.diagnostics["kinetic_energy"][-1],
        })

    elif cfg.command == "sweep-kato":
        result = run_kato_sweep(cfg)
        columns = ["nu", "kato", "max_enstrophy", "max_noslip_rate", "max_picard_iters"]
        rows = [[r.get(c, math.nan) for c in columns] for r in result["rows"]]
        write_csv(os.path.join(cfg.out_dir, "kato_sweep.csv"), "kato-sweep", columns, rows)
        summary.update({"loglog_slope": result["loglog_slope"],
                        "n_runs": len(result["rows"])})

    elif cfg.command == "sweep-inviscid":
        result = run_inviscid_sweep(cfg)
        columns = ["nu", "sup_l2", "sup_l4", "sup_linf", "kato"]
        rows = [[r.get(c, math.nan) for c in columns] for r in result["rows"]]
        write_csv(os.path.join(cfg.out_dir, "inviscid_sweep.csv"), "inviscid-sweep",
                  columns, rows)
        gaps = [r["sup_l2"] for r in result["rows"] if "sup_l2" in r]
        summary.update({
            "n_runs": len(result["rows"]),
            "monotone_decreasing": bool(all(b < a for a, b in zip(gaps, gaps[1:]))),
        })

    elif cfg.command == "verify-green":
        columns, rows, worst = _green_triple_rows(cfg)
        write_csv(os.path.join(cfg.out_dir, "green_triple.csv"), "green-triple",
                  columns, rows)
        report = verify_pointwise_bounds()
        write_json(os.path.join(cfg.out_dir, "bound_report.json"), report.to_dict())
        summary.update({"max_discrepancy": worst,
                        "fitted_theta0": report.fitted_theta0,
                        "fitted_c": report.fitted_c})

    elif cfg.command == "norms-report":
        grid = build_graded_grid(cfg.z_max, cfg.grid_nodes, cfg.delta_ref or 0.02)
        report = verify_section2_lemmas(grid)
        write_json(os.path.join(cfg.out_dir, "lemmas.json"), report)
        summary.update({k: v for k, v in report.items() if k.endswith("ratio")})

    write_json(os.path.join(cfg.out_dir, "summary.json"), summary)
    return summary
