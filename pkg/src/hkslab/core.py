"""Uniform periodic grids, field containers, discrete calculus, and norm diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform isotropic periodic lattice on [-L, L]^d with cell-averaged values."""

    dim: int
    cells_per_axis: int
    domain_half_width: float
    boundary: str = "periodic"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.cells_per_axis < 8 or self.cells_per_axis % 2 != 0:
            raise ValueError(
                f"cells_per_axis must be even and >= 8, got {self.cells_per_axis}"
            )
        if self.domain_half_width <= 0:
            raise ValueError(f"domain_half_width must be > 0, got {self.domain_half_width}")
        if self.boundary != "periodic":
            raise ValueError(f"only periodic boundaries are supported, got {self.boundary!r}")

    @property
    def n(self) -> int:
        return self.cells_per_axis

    @property
    def L(self) -> float:
        return self.domain_half_width

    @property
    def h(self) -> float:
        return 2.0 * self.domain_half_width / self.cells_per_axis

    @property
    def shape(self) -> tuple:
        return (self.cells_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def centers(self) -> np.ndarray:
        """Cell centers along one axis: -L + (i + 1/2) h."""
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self) -> tuple:
        axes = [self.centers()] * self.dim
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def index_of(self, x: float, axis: int = 0) -> int:
        """Index of the cell containing coordinate x (periodic wrap)."""
        i = int(np.floor((x + self.L) / self.h))
        return i % self.n


def make_grid(d: int, n: int, L: float, boundary: str = "periodic") -> Grid:
    return Grid(dim=d, cells_per_axis=n, domain_half_width=L, boundary=boundary)


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"scalar field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains nonfinite values")


@dataclass
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (dim,) + grid.shape

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(
                f"vector field shape {self.values.shape} does not match grid "
                f"{(self.grid.dim,) + self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("vector field contains nonfinite values")


@dataclass
class PhysParams:
    chi: float = 1.0
    mu: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.chi <= 0 or self.mu <= 0:
            raise ValueError("chi and mu must be strictly positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class SimState:
    """Evolving state in solver convention: q = +grad(log c), scaled time.

    rho, log_c have shape grid.shape; q has shape (dim,) + grid.shape.
    """

    grid: Grid
    rho: np.ndarray
    q: np.ndarray
    log_c: np.ndarray
    t_scaled: float = 0.0

    def validate(self) -> None:
        if self.rho.shape != self.grid.shape or self.log_c.shape != self.grid.shape:
            raise ValueError("rho/log_c shape does not match grid")
        if self.q.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError("q shape does not match grid")
        if not (np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.q))
                and np.all(np.isfinite(self.log_c))):
            raise ValueError("state contains nonfinite values")
        if np.min(self.rho) <= 0:
            raise ValueError("rho must be strictly positive")

    def copy(self) -> "SimState":
        return SimState(self.grid, self.rho.copy(), self.q.copy(),
                        self.log_c.copy(), self.t_scaled)

    @property
    def c(self) -> np.ndarray:
        return np.exp(self.log_c)


def derivative(values: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """2nd-order central difference along an axis with periodic wrap."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    h = grid.h
    up = np.roll(values, -1, axis=axis)
    dn = np.roll(values, 1, axis=axis)
    if order == 1:
        return (up - dn) / (2.0 * h)
    return (up - 2.0 * values + dn) / (h * h)


def discrete_derivative(field: ScalarField, axis: int, order: int = 1) -> ScalarField:
    return ScalarField(field.grid, derivative(field.values, field.grid, axis, order))


def gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete gradient, shape (dim,) + grid.shape."""
    return np.stack([derivative(values, grid, a, 1) for a in range(grid.dim)])


def divergence(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Discrete divergence of a (dim,)+shape vector array."""
    return sum(derivative(values[a], grid, a, 1) for a in range(grid.dim))


def laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(derivative(values, grid, a, 2) for a in range(grid.dim))


def curl_max(q: np.ndarray, grid: Grid) -> float:
    """Max magnitude of the discrete curl (mixed-partial differences); 0.0 in 1D."""
    if grid.dim < 2:
        return 0.0
    worst = 0.0
    for a in range(grid.dim):
        for b in range(a + 1, grid.dim):
            mixed = derivative(q[b], grid, a, 1) - derivative(q[a], grid, b, 1)
            worst = max(worst, float(np.max(np.abs(mixed))))
    return worst


def _grad_magnitude(values: np.ndarray, grid: Grid) -> np.ndarray:
    g = gradient(values, grid)
    return np.sqrt(np.sum(g * g, axis=0))


def _hess_max(values: np.ndarray, grid: Grid) -> float:
    """Sup over cells and index pairs of |second derivatives| (mixed via nested D1)."""
    worst = 0.0
    for a in range(grid.dim):
        worst = max(worst, float(np.max(np.abs(derivative(values, grid, a, 2)))))
        for b in range(a + 1, grid.dim):
            mixed = derivative(derivative(values, grid, a, 1), grid, b, 1)
            worst = max(worst, float(np.max(np.abs(mixed))))
    return worst


@dataclass
class NormReport:
    sup_rho: float
    sup_c: float
    sup_inv_rho: float
    sup_inv_c: float
    sup_grad_rho: float
    sup_grad_c: float
    sup_hess_c: float
    sup_grad_log_c: float
    X_m: float
    m: int
    finite: bool = True

    def as_dict(self) -> dict:
        return {
            "sup_rho": self.sup_rho,
            "sup_c": self.sup_c,
            "sup_inv_rho": self.sup_inv_rho,
            "sup_inv_c": self.sup_inv_c,
            "sup_grad_rho": self.sup_grad_rho,
            "sup_grad_c": self.sup_grad_c,
            "sup_hess_c": self.sup_hess_c,
            "sup_grad_log_c": self.sup_grad_log_c,
            "X_m": self.X_m,
            "m": self.m,
            "finite": self.finite,
        }


def _axis_deriv_k(values: np.ndarray, grid: Grid, axis: int, k: int) -> np.ndarray:
    out = values
    for _ in range(k):
        out = derivative(out, grid, axis, 1)
    return out


def norm_report(state: SimState, params: PhysParams, m: int = 2) -> NormReport:
    """Sup norms, gradient/Hessian sups, and the discrete energy functional.

    The energy is 1 + ||rho|| + ||c|| + ||1/rho|| + ||1/c|| + ||q||_2
    + sum_{k=1..m} (|rho|_{H^k}^2 + |sqrt(rho) q|_{H^k}^2), with discrete
    H^k seminorms from repeated centered differences weighted by h^d.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    grid = state.grid
    vol = grid.cell_volume
    c = np.exp(state.log_c)
    rho = state.rho

    sup_rho = float(np.max(np.abs(rho)))
    sup_c = float(np.max(c))
    with np.errstate(divide="ignore", over="ignore"):
        sup_inv_rho = float(np.max(1.0 / rho)) if np.min(rho) > 0 else np.inf
        sup_inv_c = float(np.max(1.0 / c))
    sup_grad_rho = float(np.max(_grad_magnitude(rho, grid)))
    sup_grad_c = float(np.max(_grad_magnitude(c, grid)))
    sup_hess_c = _hess_max(c, grid)
    sup_grad_log_c = float(np.max(np.sqrt(np.sum(state.q * state.q, axis=0))))

    q_l2 = float(np.sqrt(np.sum(state.q * state.q) * vol))
    semi = 0.0
    for k in range(1, m + 1):
        for a in range(grid.dim):
            dr = _axis_deriv_k(rho, grid, a, k)
            semi += float(np.sum(dr * dr) * vol)
            for comp in range(grid.dim):
                dq = _axis_deriv_k(state.q[comp], grid, a, k)
                semi += float(np.sum(rho * dq * dq) * vol)
    x_m = 1.0 + sup_rho + sup_c + sup_inv_rho + sup_inv_c + q_l2 + semi

    entries = [sup_rho, sup_c, sup_inv_rho, sup_inv_c, sup_grad_rho,
               sup_grad_c, sup_hess_c, sup_grad_log_c, x_m]
    finite = all(np.isfinite(e) for e in entries)
    return NormReport(sup_rho, sup_c, sup_inv_rho, sup_inv_c, sup_grad_rho,
                      sup_grad_c, sup_hess_c, sup_grad_log_c, x_m, m, finite)
