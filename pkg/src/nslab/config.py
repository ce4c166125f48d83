"""Experiment configuration: flat key=value text files, overrides, initial data.

Unknown keys are rejected (fail fast).  Units: times in simulation units,
lengths in half-space units, nu is the kinematic viscosity; see README for the
full key table.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .checkpoint import load_checkpoint
from .fieldkit import GradedGrid, SpectralField
from .ns_solver import SolverConfig

COMMANDS = ("verify-green", "simulate-ns", "simulate-euler",
            "sweep-kato", "sweep-inviscid", "norms-report")


@dataclass
class ExperimentConfig:
    command: str
    nu: float = 1e-3
    nu_list: tuple = ()
    modes: int = 8
    grid_nodes: int = 384
    z_max: float = 30.0
    delta_ref: float = 0.0  # 0 -> solver default sqrt(nu dt)/2
    t_final: float = 0.25
    dt: float = 0.0125
    picard_tol: float = 1e-10
    picard_max: int = 30
    dealias_fraction: float = 2.0 / 3.0
    datum: str = "prepared-pulse:amplitude=0.4,mode=1"
    beta: float = 0.5
    p_power: float = 2.0
    seed: int = 0
    out_dir: str = "out"
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.command in ("sweep-kato", "sweep-inviscid"):
            if not self.nu_list:
                raise ValueError(f"{self.command} requires nu_list")
            vals = list(self.nu_list)
            if any(v <= 0 for v in vals):
                raise ValueError("nu_list entries must be positive (nu = 0 is the Euler"
                                 " reference, computed implicitly)")
            if any(b >= a for a, b in zip(vals, vals[1:])):
                raise ValueError("nu_list must be strictly decreasing")

    def solver_config(self, nu: float | None = None, linearize: bool = False) -> SolverConfig:
        return SolverConfig(
            nu=self.nu if nu is None else nu,
            modes=self.modes,
            n_nodes=self.grid_nodes,
            z_max=self.z_max,
            delta_ref=self.delta_ref if self.delta_ref > 0 else None,
            t_final=self.t_final,
            dt=self.dt,
            picard_tol=self.picard_tol,
            picard_max=self.picard_max,
            dealias_fraction=self.dealias_fraction,
            linearize=linearize,
        )

    def content_hash(self) -> str:
        # output location is not part of the experiment's identity
        text = "|".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self)
                        if f.name != "out_dir")
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_TYPES = {
    "command": str, "nu": float, "modes": int, "grid_nodes": int, "z_max": float,
    "delta_ref": float, "t_final": float, "dt": float, "picard_tol": float,
    "picard_max": int, "dealias_fraction": float, "datum": str, "beta": float,
    "p_power": float, "seed": int, "out_dir": str, "checkpoint_every": int,
}


def _parse_value(key: str, raw: str):
    if key == "nu_list":
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    if key not in _TYPES:
        raise ValueError(f"unknown config key {key!r}")
    return _TYPES[key](raw)


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment; unknown keys rejected."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as fh:
        values = parse_config_text(fh.read())
    for key, raw in (overrides or {}).items():
        values[key] = _parse_value(key, raw) if isinstance(raw, str) else raw
    if "command" not in values:
        raise ValueError("config must set 'command'")
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# named initial data
# ---------------------------------------------------------------------------

def _parse_datum(descriptor: str):
    name, _, rest = descriptor.partition(":")
    params = {}
    if rest:
        if name == "checkpoint":
            return name, {"path": rest}
        for tok in rest.split(","):
            k, _, v = tok.partition("=")
            params[k.strip()] = v.strip()
    return name, params


def initial_field(descriptor: str, grid: GradedGrid, K: int,
                  nu: float | None = None) -> SpectralField:
    """Resolve a datum descriptor into a spectral field on the given grid.

    Named closed forms:
      shear-exp:amplitude=A,rate=r          A e^{-r z} in mode 0
      shear-compatible:amplitude=A,rate=r   A (1 + r z) e^{-r z} in mode 0
                                            (zero boundary vorticity flux)
      prepared-pulse:amplitude=A,mode=m     A cos(m x) p_m(z) with
                                            p_m = e^{-z} - (m+2)/(m+1) e^{-2z},
                                            so u = 0 on the boundary
      prandtl-pulse:layer=U,amplitude=A,mode=m
                                            vorticity of the no-slip shear flow
                                            u1 = U (1 - e^{-z/delta}) e^{-z},
                                            delta = sqrt(nu) (requires nu), plus
                                            the prepared pulse above; the
                                            velocity field is nu-independent in
                                            the limit while the vorticity
                                            carries the delta^{-1} wall layer
      checkpoint:PATH                       binary checkpoint payload
    """
    name, params = _parse_datum(descriptor)
    z = grid.nodes
    if name == "shear-exp":
        amp = float(params.get("amplitude", 1.0))
        rate = float(params.get("rate", 1.0))
        return SpectralField.from_modes(grid, K, {0: amp * np.exp(-rate * z)})
    if name == "shear-compatible":
        amp = float(params.get("amplitude", 1.0))
        rate = float(params.get("rate", 1.0))
        return SpectralField.from_modes(grid, K, {0: amp * (1.0 + rate * z) * np.exp(-rate * z)})
    if name == "prepared-pulse":
        amp = float(params.get("amplitude", 0.8))
        m = int(params.get("mode", 1))
        if not 1 <= m <= K:
            raise ValueError(f"pulse mode {m} outside truncation K={K}")
        profile = np.exp(-z) - (m + 2.0) / (m + 1.0) * np.exp(-2.0 * z)
        return SpectralField.from_modes(
            grid, K, {m: 0.5 * amp * profile, -m: 0.5 * amp * profile})
    if name == "prandtl-pulse":
        if nu is None or nu <= 0:
            raise ValueError("prandtl-pulse needs the run viscosity (delta = sqrt(nu))")
        layer = float(params.get("layer", 1.0))
        amp = float(params.get("amplitude", 0.4))
        m = int(params.get("mode", 1))
        delta = math.sqrt(nu)
        # omega_0 = d/dz [U (1 - e^{-z/delta}) e^{-z}]
        shear = layer * (np.exp(-z / delta) * np.exp(-z) / delta
                         - (1.0 - np.exp(-z / delta)) * np.exp(-z))
        pulse = np.exp(-z) - (m + 2.0) / (m + 1.0) * np.exp(-2.0 * z)
        return SpectralField.from_modes(
            grid, K, {0: shear, m: 0.5 * amp * pulse, -m: 0.5 * amp * pulse})
    if name == "checkpoint":
        fld, meta = load_checkpoint(params["path"])
        if fld.grid.n_nodes != grid.n_nodes or fld.K != K:
            raise ValueError("checkpoint resolution does not match the configured grid")
        return SpectralField(grid, fld.coeffs, fld.real)
    raise ValueError(f"unknown datum {name!r}")
