"""Nonlinear Navier-Stokes evolution on the half-space via Duhamel/Picard.

Each macro step solves the fixed point of

    omega = e^{nu dt B} omega_n - int_0^dt e^{nu (dt-s) B} N(s) ds
            - int_0^dt Gamma(nu (dt-s)) g(s) ds,
    N = u . grad omega,  g = [d/dz Dirichlet-inverse of N]|_{z=0},

with N and g linear in time within the step (endpoint values from the previous
state and the current iterate).  The trace term's minus sign delivers the
boundary flux identity nu (d/dz + |d/dx|) omega|_{z=0} = g; see
stokes_semigroup.duhamel_solve_stokes.

An explicit RK4 Euler solver (nu = 0) provides the inviscid reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .biot_savart import boundary_source_trace, velocity_from_vorticity
from .fieldkit import (GradedGrid, PhysicalField, SpectralField, build_graded_grid,
                       ddz, dealias_size, to_physical, to_spectral)
from .stokes_semigroup import propagator_matrix, trace_kernel_weights


class PicardError(RuntimeError):
    """Fixed-point iteration failed; carries per-iterate diagnostics."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


class _StepRejected(Exception):
    """Internal signal: contraction factors >= 1 three times in a row."""


@dataclass
class SolverConfig:
    nu: float
    modes: int = 8
    n_nodes: int = 384
    z_max: float = 30.0
    delta_ref: float | None = None  # default sqrt(nu dt)/2, floored for nu=0
    t_final: float = 0.25
    dt: float = 0.0125
    picard_tol: float = 1e-10
    picard_max: int = 30
    dealias_fraction: float = 2.0 / 3.0
    linearize: bool = False  # diagnostic: force N = 0 (pure Stokes march)

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.picard_tol <= 0 or self.dt <= 0 or self.t_final <= 0:
            raise ValueError("picard_tol, dt, t_final must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    def resolved_delta_ref(self) -> float:
        if self.delta_ref is not None:
            return self.delta_ref
        if self.nu > 0:
            return max(0.5 * math.sqrt(self.nu * self.dt), 1e-5 * self.z_max)
        return 0.02 * self.z_max

    def build_grid(self) -> GradedGrid:
        return build_graded_grid(self.z_max, self.n_nodes, self.resolved_delta_ref())


@dataclass
class Trajectory:
    times: np.ndarray
    fields: list[SpectralField]
    config: SolverConfig
    picard_iters: list[int] = field(default_factory=list)
    contraction: list[float] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    completed: bool = True
    failure: str | None = None

    @property
    def grid(self) -> GradedGrid:
        return self.fields[0].grid

    def velocity(self, index: int):
        return velocity_from_vorticity(self.fields[index])


# ---------------------------------------------------------------------------
# nonlinear term
# ---------------------------------------------------------------------------

def nonlinear_term(omega: SpectralField, dealias_fraction: float = 2.0 / 3.0) -> SpectralField:
    """N = u . grad omega, computed pseudo-spectrally with 2/3-rule headroom.

    Velocity comes from the per-mode elliptic solve, x-derivatives are exact in
    mode space, d/dz is the graded finite difference; products are formed on a
    padded physical grid so retained modes |alpha| <= K are alias-free.
    """
    grid, K = omega.grid, omega.K
    u1, u2 = velocity_from_vorticity(omega)
    omega_x = SpectralField(grid, (1j * omega.alphas)[:, None] * omega.coeffs, omega.real)
    omega_z = SpectralField(grid, ddz(omega.coeffs, grid), omega.real)
    n_x = dealias_size(K, dealias_fraction)
    prod = to_physical(u1, n_x).values * to_physical(omega_x, n_x).values \
        + to_physical(u2, n_x).values * to_physical(omega_z, n_x).values
    return to_spectral(PhysicalField(grid, prod), K)


def _w11_seminorm(coeffs: np.ndarray, field_obj: SpectralField) -> float:
    """Discrete W^{1,1} distance at analyticity weight rho = 0."""
    grid = field_obj.grid
    alphas = np.abs(field_obj.alphas)
    total = 0.0
    dz = ddz(coeffs, grid)
    psi_dz = (grid.nodes / (1.0 + grid.nodes)) * dz
    for k, a in enumerate(alphas):
        total += float(grid.integrate(np.abs(coeffs[k])))
        total += a * float(grid.integrate(np.abs(coeffs[k])))
        total += float(grid.integrate(np.abs(psi_dz[k])))
    return total


# ---------------------------------------------------------------------------
# Picard stepping
# ---------------------------------------------------------------------------

def step_picard(omega_n: SpectralField, dt: float, config: SolverConfig):
    """One macro step of the Duhamel fixed point; returns (omega, info).

    Raises _StepRejected after three consecutive non-contracting iterates and
    PicardError when picard_max is exhausted.
    """
    if config.nu <= 0:
        raise ValueError("step_picard requires nu > 0")
    grid, K = omega_n.grid, omega_n.K
    nu = config.nu
    mats = {a: propagator_matrix(grid, nu, a, dt) for a in range(K + 1)}
    halfs = {a: propagator_matrix(grid, nu, a, 0.5 * dt) for a in range(K + 1)}
    traces = {a: trace_kernel_weights(grid, nu, a, dt) for a in range(K + 1)}

    base = SpectralField.zeros(grid, K, real=omega_n.real)
    for alpha in range(-K, K + 1):
        base.coeffs[alpha + K] = mats[abs(alpha)] @ omega_n.mode(alpha)

    if config.linearize:
        return base, {"iterations": 0, "factors": [], "converged": True}

    n_old = nonlinear_term(omega_n, config.dealias_fraction)
    g_old = boundary_source_trace(n_old)

    def apply_rhs(n_new: SpectralField, g_new: dict) -> SpectralField:
        out = SpectralField.zeros(grid, K, real=omega_n.real)
        for alpha in range(-K, K + 1):
            a = abs(alpha)
            b_old, b_new = traces[a]
            acc = base.coeffs[alpha + K].copy()
            acc -= dt * (halfs[a] @ (0.5 * (n_old.mode(alpha) + n_new.mode(alpha))))
            acc -= b_old * g_old.get(alpha, 0.0) + b_new * g_new.get(alpha, 0.0)
            out.coeffs[alpha + K] = acc
        return out

    scale = max(1.0, _w11_seminorm(omega_n.coeffs, omega_n))
    current = base
    deltas: list[float] = []
    factors: list[float] = []
    rising = 0
    for it in range(1, config.picard_max + 1):
        n_new = nonlinear_term(current, config.dealias_fraction)
        g_new = boundary_source_trace(n_new)
        proposed = apply_rhs(n_new, g_new)
        delta = _w11_seminorm(proposed.coeffs - current.coeffs, current)
        if deltas:
            factor = delta / deltas[-1] if deltas[-1] > 0 else 0.0
            factors.append(factor)
            rising = rising + 1 if factor >= 1.0 else 0
            if rising >= 3:
                raise _StepRejected
        deltas.append(delta)
        current = proposed
        if delta <= config.picard_tol * scale:
            return current, {"iterations": it, "factors": factors, "converged": True}
    raise PicardError(
        f"no contraction to tol={config.picard_tol} within {config.picard_max} iterates "
        f"(last increments {deltas[-3:]})", deltas)


def _advance(omega: SpectralField, dt: float, config: SolverConfig, depth: int = 0):
    """Advance by dt, halving the step when contraction is rejected."""
    try:
        return step_picard(omega, dt, config)
    except _StepRejected:
        if depth >= 6:
            raise PicardError("contraction not restored after 6 step halvings", [])
        first, info1 = _advance(omega, 0.5 * dt, config, depth + 1)
        second, info2 = _advance(first, 0.5 * dt, config, depth + 1)
        return second, {
            "iterations": info1["iterations"] + info2["iterations"],
            "factors": info1["factors"] + info2["factors"],
            "converged": True,
            "halved": True,
        }


# ---------------------------------------------------------------------------
# diagnostics shared by the solvers
# ---------------------------------------------------------------------------

def boundary_velocity(omega: SpectralField) -> np.ndarray:
    """u1(x, 0) on the dealiased x-grid (u2(x, 0) vanishes identically)."""
    traces = boundary_source_trace(omega)  # u1_alpha(0) = -int e^{-|a|y} omega_alpha
    K = omega.K
    n_x = dealias_size(K)
    spectrum = np.zeros(n_x, dtype=complex)
    for alpha, val in traces.items():
        spectrum[alpha % n_x] = val
    return np.real(np.fft.ifft(spectrum) * n_x) if omega.real else np.fft.ifft(spectrum) * n_x


def noslip_rate(omega: SpectralField, nu: float, traces_g: dict[int, complex] | None) -> float:
    """sup_x |d/dt u1(t, x, 0)| through the flux identity.

    d/dt u1|_{z=0} = nu (d/dz + |d/dx|) omega|_{z=0} - g, the quantity the
    boundary-vorticity formulation drives to zero.
    """
    K = omega.K
    n_x = dealias_size(K)
    spectrum = np.zeros(n_x, dtype=complex)
    for alpha in range(-K, K + 1):
        prof = omega.mode(alpha)
        flux = nu * (ddz(prof, omega.grid)[0] + abs(alpha) * prof[0])
        g = traces_g.get(alpha, 0.0) if traces_g else 0.0
        spectrum[alpha % n_x] = flux - g
    vals = np.fft.ifft(spectrum) * n_x
    return float(np.abs(vals).max())


def divergence_residual(omega: SpectralField) -> float:
    """Max per-mode FD residual of i alpha u1 + d u2/dz (zero up to FD error)."""
    u1, u2 = velocity_from_vorticity(omega)
    worst = 0.0
    for alpha in range(-omega.K, omega.K + 1):
        res = 1j * alpha * u1.mode(alpha) + ddz(u2.mode(alpha), omega.grid)
        worst = max(worst, float(np.abs(res).max()))
    return worst


def kinetic_energy(omega: SpectralField) -> float:
    """(1/2) integral of |u|^2 over the slab, via Parseval in x."""
    u1, u2 = velocity_from_vorticity(omega)
    total = 0.0
    for k in range(omega.coeffs.shape[0]):
        total += float(omega.grid.integrate(np.abs(u1.coeffs[k]) ** 2 + np.abs(u2.coeffs[k]) ** 2))
    return math.pi * total


def enstrophy(omega: SpectralField) -> float:
    """Integral of |omega|^2 over the slab (the Kato-functional integrand)."""
    total = 0.0
    for k in range(omega.coeffs.shape[0]):
        total += float(omega.grid.integrate(np.abs(omega.coeffs[k]) ** 2))
    return 2.0 * math.pi * total


def _collect_diagnostics(traj: Trajectory, nu: float) -> None:
    u1_wall0 = boundary_velocity(traj.fields[0])
    noslip_tr, noslip_dr, noslip_rt = [], [], []
    div_res, reality, energy, enst = [], [], [], []
    for f in traj.fields:
        wall = boundary_velocity(f)
        noslip_tr.append(float(np.abs(wall).max()))
        noslip_dr.append(float(np.abs(wall - u1_wall0).max()))
        if nu > 0 and not traj.config.linearize:
            g = boundary_source_trace(nonlinear_term(f, traj.config.dealias_fraction))
        else:
            g = None
        noslip_rt.append(noslip_rate(f, nu, g) if nu > 0 else 0.0)
        div_res.append(divergence_residual(f))
        reality.append(f.reality_defect())
        energy.append(kinetic_energy(f))
        enst.append(enstrophy(f))
    traj.diagnostics.update({
        "noslip_trace": noslip_tr,
        "noslip_drift": noslip_dr,
        "noslip_rate": noslip_rt,
        "divergence_residual": div_res,
        "reality_defect": reality,
        "kinetic_energy": energy,
        "enstrophy": enst,
    })


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def run_navier_stokes(config: SolverConfig, omega0: SpectralField) -> Trajectory:
    """March the nonlinear problem on [0, t_final], storing macro nodes.

    A Picard failure aborts the run and returns the partial trajectory with
    ``completed = False``.
    """
    if config.nu <= 0:
        raise ValueError("run_navier_stokes requires nu > 0")
    n_steps = int(round(config.t_final / config.dt))
    times = [0.0]
    traj = Trajectory(np.array(times), [omega0.copy()], config)
    current = omega0
    for n in range(n_steps):
        try:
            current, info = _advance(current, config.dt, config)
        except PicardError as exc:
            traj.completed = False
            traj.failure = str(exc)
            break
        times.append((n + 1) * config.dt)
        traj.fields.append(current)
        traj.picard_iters.append(info["iterations"])
        traj.contraction.append(max(info["factors"]) if info["factors"] else 0.0)
    traj.times = np.array(times)
    _collect_diagnostics(traj, config.nu)
    return traj


def run_euler(config: SolverConfig, omega0: SpectralField) -> Trajectory:
    """Inviscid reference: RK4 on d omega/dt = -N(omega), no boundary flux.

    Only no-penetration holds (automatic from the Dirichlet stream function).
    Mode-norm blowup within a step triggers internal step halving.
    """
    if config.nu != 0:
        raise ValueError("run_euler requires nu = 0")
    frac = config.dealias_fraction

    def rhs(f: SpectralField) -> np.ndarray:
        return -nonlinear_term(f, frac).coeffs

    def rk4(coeffs: np.ndarray, dt: float) -> np.ndarray:
        f0 = SpectralField(omega0.grid, coeffs, omega0.real)
        k1 = rhs(f0)
        k2 = rhs(SpectralField(omega0.grid, coeffs + 0.5 * dt * k1, omega0.real))
        k3 = rhs(SpectralField(omega0.grid, coeffs + 0.5 * dt * k2, omega0.real))
        k4 = rhs(SpectralField(omega0.grid, coeffs + dt * k3, omega0.real))
        return coeffs + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(coeffs: np.ndarray, dt: float, depth: int = 0) -> np.ndarray:
        ref = np.abs(coeffs).max()
        out = rk4(coeffs, dt)
        if np.all(np.isfinite(out)) and np.abs(out).max() <= 10.0 * max(ref, 1e-300):
            return out
        if depth >= 8:
            raise RuntimeError("Euler step kept blowing up after 8 halvings (CFL)")
        half = advance(coeffs, 0.5 * dt, depth + 1)
        return advance(half, 0.5 * dt, depth + 1)

    n_steps = int(round(config.t_final / config.dt))
    traj = Trajectory(np.array([0.0]), [omega0.copy()], config)
    coeffs = omega0.coeffs.copy()
    times = [0.0]
    for n in range(n_steps):
        coeffs = advance(coeffs, config.dt)
        times.append((n + 1) * config.dt)
        traj.fields.append(SpectralField(omega0.grid, coeffs.copy(), omega0.real))
        traj.picard_iters.append(0)
        traj.contraction.append(0.0)
    traj.times = np.array(times)
    _collect_diagnostics(traj, 0.0)
    return traj
