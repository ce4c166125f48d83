"""Graded half-line grids, partial Fourier transforms in x, and field containers.

Everything downstream (elliptic solves, Stokes kernels, norms) works per Fourier
mode on a shared boundary-refined z-grid, so this module owns the grid geometry,
its quadrature rule, finite differences in z, and the physical <-> spectral
transform pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

_grid_counter = itertools.count()

#: conormal weight psi(z) = z / (1 + z); degenerate at the boundary
def psi(z):
    z = np.asarray(z, dtype=float)
    return z / (1.0 + z)


# ---------------------------------------------------------------------------
# graded grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradedGrid:
    """Boundary-refined nodes on [0, z_max] with composite quadrature weights.

    Nodes follow a geometric stretching z_i = z_max*(e^{s u_i}-1)/(e^s-1),
    u_i = i/(n-1), with the stretch s chosen so the first cell is at most
    delta_ref/8 and at least 8 nodes land inside [0, delta_ref].

    Weights integrate the averaged-parabola interpolant (exact on quadratics);
    on these smoothly graded grids the composite rule converges at order ~3,
    which plain trapezoid cannot deliver at the node counts used here.
    """

    nodes: np.ndarray
    weights: np.ndarray
    z_max: float
    delta_ref: float
    # per-cell data for the averaged-parabola rule; offsets are node indices
    # cell k touches nodes k + (-1, 0, 1, 2)
    cell_weights: np.ndarray = field(repr=False)      # (n-1, 4)
    cell_quad_coeffs: np.ndarray = field(repr=False)  # (n-1, 3, 4)
    key: int = field(default_factory=lambda: next(_grid_counter), compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    def integrate(self, values: np.ndarray) -> complex | float:
        """Integral over [0, z_max] of the sampled profile."""
        values = np.asarray(values)
        return values @ self.weights

    def cell_integrals(self, values: np.ndarray) -> np.ndarray:
        """Per-cell integrals of the averaged-parabola interpolant, shape (n-1,)."""
        return _apply_cell_table(self.cell_weights, values)

    def cumulative_integral(self, values: np.ndarray) -> np.ndarray:
        """Cumulative integral from 0 to each node, shape (n,)."""
        out = np.zeros(self.n_nodes, dtype=np.result_type(values, float))
        np.cumsum(self.cell_integrals(values), out=out[1:])
        return out

    def quadratic_cells(self, values: np.ndarray) -> np.ndarray:
        """Local quadratic pieces c0 + c1*x + c2*x^2 per cell, x = y - nodes[k].

        Returns shape (3, n-1).  This is the interpolant the quadrature weights
        integrate; kernel modules use it for product integration.
        """
        c = np.empty((3, self.n_nodes - 1), dtype=np.result_type(values, float))
        for m in range(3):
            c[m] = _apply_cell_table(self.cell_quad_coeffs[:, m, :], values)
        return c

def _apply_cell_table(table: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Contract an (n-1, 4) per-cell table against node values with offsets -1..2."""
    n = values.shape[-1]
    out = table[:, 1] * values[:-1] + table[:, 2] * values[1:]
    out[1:] += table[1:, 0] * values[:-2]
    out[: n - 2] += table[: n - 2, 3] * values[2:]
    return out


def _lagrange_weights(xa, xb, xc, p, q):
    """Integrals over [p, q] of the Lagrange basis on nodes (xa, xb, xc).

    Evaluated in coordinates local to p to keep cancellation at the h^3 scale.
    """
    d = q - p
    a, b, c = xa - p, xb - p, xc - p

    def poly_int(u, v):
        # integral of (x-u)(x-v) over [0, d]
        return d ** 3 / 3.0 - (u + v) * d ** 2 / 2.0 + u * v * d

    wa = poly_int(b, c) / ((a - b) * (a - c))
    wb = poly_int(a, c) / ((b - a) * (b - c))
    wc = poly_int(a, b) / ((c - a) * (c - b))
    return np.array([wa, wb, wc])


def _monomial_coeffs(xa, xb, xc, shift):
    """Monomial coefficients (c0, c1, c2) in x = y - shift of the Lagrange basis.

    Returns a (3, 3) array: row m gives the x^m coefficient of the basis
    functions at (xa, xb, xc).
    """
    a, b, c = xa - shift, xb - shift, xc - shift
    out = np.zeros((3, 3))
    for col, (x0, u, v) in enumerate(((a, b, c), (b, a, c), (c, a, b))):
        den = (x0 - u) * (x0 - v)
        out[2, col] = 1.0 / den
        out[1, col] = -(u + v) / den
        out[0, col] = u * v / den
    return out


def _solve_stretch(z_max: float, n: int, delta_ref: float) -> float:
    """Smallest stretch s meeting the first-cell and node-count constraints."""

    def violation(s):
        denom = np.expm1(s)
        first = z_max * np.expm1(s / (n - 1)) / denom
        eighth = z_max * np.expm1(8.0 * s / (n - 1)) / denom
        return max(first * 8.0 / delta_ref, eighth / delta_ref) - 1.0

    if violation(1e-9) <= 0.0:
        return 0.0  # uniform grid already satisfies the constraints
    lo, hi = 1e-9, 1.0
    while violation(hi) > 0.0:
        hi *= 2.0
        if hi > 1e4:
            raise ValueError("cannot satisfy grid constraints; increase n_nodes")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if violation(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 1.02 * hi


def build_graded_grid(z_max: float, n_nodes: int, delta_ref: float) -> GradedGrid:
    """Build the boundary-refined grid with its quadrature tables.

    Guarantees nodes[0]=0, nodes strictly increasing, nodes[1] <= delta_ref/8,
    at least 8 nodes in [0, delta_ref], positive weights summing to z_max.
    """
    for name, val in (("z_max", z_max), ("n_nodes", n_nodes), ("delta_ref", delta_ref)):
        if not np.isfinite(val) or val <= 0:
            raise ValueError(f"{name} must be positive and finite, got {val}")
    n_nodes = int(n_nodes)
    if n_nodes < 32:
        raise ValueError(f"n_nodes must be >= 32, got {n_nodes}")
    if not delta_ref < z_max:
        raise ValueError("delta_ref must be smaller than z_max")

    s = _solve_stretch(z_max, n_nodes, delta_ref)
    u = np.linspace(0.0, 1.0, n_nodes)
    if s == 0.0:
        nodes = z_max * u
    else:
        nodes = z_max * np.expm1(s * u) / np.expm1(s)
    nodes[0], nodes[-1] = 0.0, z_max

    cell_w, cell_c = _build_cell_tables(nodes)
    weights = np.zeros(n_nodes)
    for off in range(4):
        lo = max(0, 1 - off)
        hi = min(n_nodes - 1, n_nodes - off + 1)
        np.add.at(weights, np.arange(lo, hi) + off - 1, cell_w[lo:hi, off])

    grid = GradedGrid(
        nodes=nodes, weights=weights, z_max=float(z_max), delta_ref=float(delta_ref),
        cell_weights=cell_w, cell_quad_coeffs=cell_c,
    )
    _validate_grid(grid)
    return grid


def _build_cell_tables(nodes: np.ndarray):
    n = nodes.size
    cell_w = np.zeros((n - 1, 4))
    cell_c = np.zeros((n - 1, 3, 4))
    for k in range(n - 1):
        p, q = nodes[k], nodes[k + 1]
        stencils = []
        if k >= 1:
            stencils.append((k - 1, k, k + 1))
        if k <= n - 3:
            stencils.append((k, k + 1, k + 2))
        frac = 1.0 / len(stencils)
        for (ia, ib, ic) in stencils:
            w3 = _lagrange_weights(nodes[ia], nodes[ib], nodes[ic], p, q)
            c3 = _monomial_coeffs(nodes[ia], nodes[ib], nodes[ic], shift=p)
            for j, node in enumerate((ia, ib, ic)):
                off = node - k + 1
                cell_w[k, off] += frac * w3[j]
                cell_c[k, :, off] += frac * c3[:, j]
    return cell_w, cell_c


def _validate_grid(grid: GradedGrid) -> None:
    z, w = grid.nodes, grid.weights
    if not (z[0] == 0.0 and np.all(np.diff(z) > 0)):
        raise ValueError("grid nodes must start at 0 and increase strictly")
    if z[1] > grid.delta_ref / 8.0 * (1.0 + 1e-12):
        raise ValueError("first cell exceeds delta_ref/8")
    if np.count_nonzero(z <= grid.delta_ref) < 8:
        raise ValueError("fewer than 8 nodes resolve delta_ref")
    if np.any(w <= 0):
        raise ValueError("quadrature weights must be positive (grading too aggressive)")
    if abs(w.sum() - grid.z_max) > 1e-12 * grid.z_max:
        raise ValueError("weights do not integrate the constant 1 to z_max")


# ---------------------------------------------------------------------------
# finite differences in z
# ---------------------------------------------------------------------------

def ddz(values: np.ndarray, grid: GradedGrid) -> np.ndarray:
    """Second-order first derivative on the graded grid (one-sided at the ends)."""
    z = grid.nodes
    if z.size < 3:
        raise ValueError("ddz needs at least 3 nodes")
    f = np.asarray(values)
    out = np.empty_like(f, dtype=np.result_type(f, float))
    h1 = z[1:-1] - z[:-2]
    h2 = z[2:] - z[1:-1]
    out[..., 1:-1] = (
        -h2 / (h1 * (h1 + h2)) * f[..., :-2]
        + (h2 - h1) / (h1 * h2) * f[..., 1:-1]
        + h1 / (h2 * (h1 + h2)) * f[..., 2:]
    )
    wl = _one_sided_weights(z[:4] - z[0])
    out[..., 0] = np.tensordot(f[..., :4], wl, axes=([-1], [0]))
    wr = _one_sided_weights(z[-4:][::-1] - z[-1])
    out[..., -1] = np.tensordot(f[..., -1:-5:-1], wr, axes=([-1], [0]))
    return out


def _one_sided_weights(t: np.ndarray) -> np.ndarray:
    """Weights for f'(0) from nodes at offsets t (t[0]=0), exact on cubics."""
    m = t.size
    vand = np.vander(t, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(vand, rhs)


def d2dz(values: np.ndarray, grid: GradedGrid) -> np.ndarray:
    """Three-point second derivative; end values copied from their neighbors."""
    z = grid.nodes
    f = np.asarray(values)
    out = np.empty_like(f, dtype=np.result_type(f, float))
    h1 = z[1:-1] - z[:-2]
    h2 = z[2:] - z[1:-1]
    out[..., 1:-1] = 2.0 * (
        f[..., :-2] / (h1 * (h1 + h2))
        - f[..., 1:-1] / (h1 * h2)
        + f[..., 2:] / (h2 * (h1 + h2))
    )
    out[..., 0] = out[..., 1]
    out[..., -1] = out[..., -2]
    return out


def conormal_derivative(values: np.ndarray, grid: GradedGrid) -> np.ndarray:
    """psi(z) * d/dz on the graded grid, psi(z) = z/(1+z)."""
    return psi(grid.nodes) * ddz(values, grid)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass
class SpectralField:
    """Truncated Fourier family {f_alpha(z)}_{|alpha|<=K} on a shared grid.

    coeffs[k] holds the profile of mode alpha = k - K.  When ``real`` is set,
    modes -alpha and alpha are complex conjugates (within roundoff).
    """

    grid: GradedGrid
    coeffs: np.ndarray  # complex, shape (2K+1, n_nodes)
    real: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] % 2 != 1:
            raise ValueError("coeffs must have shape (2K+1, n_nodes)")
        if self.coeffs.shape[1] != self.grid.n_nodes:
            raise ValueError("profile length does not match grid")

    @property
    def K(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def alphas(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def mode(self, alpha: int) -> np.ndarray:
        if abs(alpha) > self.K:
            raise KeyError(f"mode {alpha} outside truncation K={self.K}")
        return self.coeffs[alpha + self.K]

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), self.real)

    @classmethod
    def zeros(cls, grid: GradedGrid, K: int, real: bool = True) -> "SpectralField":
        return cls(grid, np.zeros((2 * K + 1, grid.n_nodes), dtype=complex), real)

    @classmethod
    def from_modes(cls, grid: GradedGrid, K: int, modes: dict, real: bool | None = None):
        """Build from a {alpha: profile} mapping; unlisted modes are zero."""
        f = cls.zeros(grid, K)
        for alpha, prof in modes.items():
            f.coeffs[alpha + K] = np.asarray(prof, dtype=complex)
        if real is None:
            real = _is_conjugate_symmetric(f.coeffs, K)
        f.real = real
        return f

    def reality_defect(self) -> float:
        """Max relative mismatch between modes -alpha and conj(modes alpha)."""
        scale = np.abs(self.coeffs).max()
        if scale == 0.0:
            return 0.0
        K = self.K
        worst = 0.0
        for a in range(1, K + 1):
            worst = max(worst, np.abs(self.coeffs[K - a] - np.conj(self.coeffs[K + a])).max())
        worst = max(worst, np.abs(self.coeffs[K].imag).max())
        return worst / scale


def _is_conjugate_symmetric(coeffs: np.ndarray, K: int, tol: float = 1e-12) -> bool:
    scale = np.abs(coeffs).max()
    if scale == 0.0:
        return True
    for a in range(0, K + 1):
        if np.abs(coeffs[K - a] - np.conj(coeffs[K + a])).max() > tol * scale:
            return False
    return True


@dataclass
class PhysicalField:
    """Samples on the tensor grid (x_i, z_j); x uniform on [0, 2*pi)."""

    grid: GradedGrid
    values: np.ndarray  # (n_x, n_nodes)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        n_x = self.values.shape[0]
        if n_x < 4 or (n_x & (n_x - 1)) != 0:
            raise ValueError(f"x-count must be a power of two >= 4, got {n_x}")
        if self.values.shape[1] != self.grid.n_nodes:
            raise ValueError("z extent does not match grid")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_x) / self.n_x


def to_spectral(phys: PhysicalField, K: int) -> SpectralField:
    """Forward partial Fourier transform in x, truncated to |alpha| <= K."""
    n_x = phys.n_x
    if n_x < 2 * K + 1:
        raise ValueError(f"x-resolution {n_x} below 2K+1={2*K+1}")
    hat = np.fft.fft(phys.values, axis=0) / n_x
    coeffs = np.empty((2 * K + 1, phys.grid.n_nodes), dtype=complex)
    for alpha in range(-K, K + 1):
        coeffs[alpha + K] = hat[alpha % n_x]
    real = bool(np.max(np.abs(phys.values.imag)) <= 1e-13 * max(1.0, np.max(np.abs(phys.values)))) \
        if np.iscomplexobj(phys.values) else True
    return SpectralField(phys.grid, coeffs, real=real)


def to_physical(spec: SpectralField, n_x: int) -> PhysicalField:
    """Inverse transform onto n_x uniform x-points (n_x >= 2K+1)."""
    K = spec.K
    if n_x < 2 * K + 1:
        raise ValueError(f"x-resolution {n_x} below 2K+1={2*K+1}")
    hat = np.zeros((n_x, spec.grid.n_nodes), dtype=complex)
    for alpha in range(-K, K + 1):
        hat[alpha % n_x] = spec.coeffs[alpha + K]
    vals = np.fft.ifft(hat, axis=0) * n_x
    if spec.real:
        vals = vals.real
    return PhysicalField(spec.grid, vals)


def dealias_size(K: int, fraction: float = 2.0 / 3.0) -> int:
    """Power-of-two x resolution with dealiasing headroom for quadratic products.

    Guarantees n >= 4K and K <= fraction * (n/2), so retained modes of a
    product of two truncated fields are alias-free.
    """
    need = max(16, 4 * K, int(np.ceil(2 * K / fraction)))
    n = 16
    while n < need:
        n *= 2
    return n
