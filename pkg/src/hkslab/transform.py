"""Gradient-of-log substitution, parameter scalings, and the parabolic rescaling family."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .core import Grid, SimState, gradient


@dataclass(frozen=True)
class ScalingMap:
    chi: float
    mu: float

    def __post_init__(self):
        if self.chi <= 0 or self.mu <= 0:
            raise ValueError("chi and mu must be strictly positive")

    @property
    def time_factor(self) -> float:
        return float(np.sqrt(self.chi * self.mu))

    @property
    def q_factor(self) -> float:
        return float(np.sqrt(self.chi / self.mu))


@dataclass(frozen=True)
class RescaleParam:
    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("rescale parameter a must be > 0")


def cole_hopf(log_c: np.ndarray, grid: Grid) -> np.ndarray:
    """q = discrete gradient of log c (solver sign convention)."""
    if not np.all(np.isfinite(log_c)):
        raise ValueError("log_c must be finite")
    return gradient(log_c, grid)


def to_scaled(t_phys, q_phys, smap: ScalingMap):
    """(t, q) -> (sqrt(chi mu) t, sqrt(chi/mu) q)."""
    return smap.time_factor * t_phys, smap.q_factor * np.asarray(q_phys)


def from_scaled(t_scaled, q_scaled, smap: ScalingMap):
    return t_scaled / smap.time_factor, np.asarray(q_scaled) / smap.q_factor


def _resample(values: np.ndarray, grid: Grid, a: float) -> np.ndarray:
    """Periodic cubic resampling of f(x) -> f(a x) on the same lattice."""
    centers = grid.centers()
    # fractional index of coordinate a*x on the lattice
    idx_1d = (a * centers + grid.L) / grid.h - 0.5
    if grid.dim == 1:
        coords = idx_1d[np.newaxis, :]
    else:
        mesh = np.meshgrid(*([idx_1d] * grid.dim), indexing="ij")
        coords = np.stack([m.ravel() for m in mesh])
    out = map_coordinates(values, coords, order=3, mode="grid-wrap")
    return out.reshape(grid.shape)


def _check_rescale_support(values: np.ndarray, grid: Grid, a: float) -> None:
    """For a > 1 the sample points a*x leave [-L, L]; require the field to be
    constant (far-field) on the band that wraps around, so the wrap is harmless."""
    if a <= 1.0:
        return
    centers = grid.centers()
    band_1d = np.abs(centers) >= grid.L / a
    if grid.dim == 1:
        band = band_1d
    else:
        mesh = np.meshgrid(*([band_1d] * grid.dim), indexing="ij")
        band = np.zeros(grid.shape, dtype=bool)
        for m in mesh:
            band |= m
    band_vals = values[band]
    spread = float(np.max(band_vals) - np.min(band_vals))
    scale = max(1.0, float(np.max(np.abs(values))))
    if spread > 1e-10 * scale:
        raise ValueError(
            f"rescale with a={a} maps support outside the domain "
            f"(far-field band is not constant, spread={spread:.3e})"
        )


def parabolic_rescale(state: SimState, param: RescaleParam) -> SimState:
    """Self-similar rescaling: rho_a(x) = a^2 rho(ax), q_a(x) = a q(ax),
    log_c_a(x) = log_c(ax), t_a = t / a^2."""
    a = param.a
    grid = state.grid
    if a == 1.0:
        return state.copy()
    for field in (state.rho, state.log_c):
        _check_rescale_support(field, grid, a)
    for comp in range(grid.dim):
        _check_rescale_support(state.q[comp], grid, a)
    rho_a = a * a * _resample(state.rho, grid, a)
    log_c_a = _resample(state.log_c, grid, a)
    q_a = np.stack([a * _resample(state.q[comp], grid, a) for comp in range(grid.dim)])
    return SimState(grid, rho_a, q_a, log_c_a, state.t_scaled / (a * a))
