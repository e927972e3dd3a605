"""Finite-speed-of-propagation experiments.

Two runs whose initial data agree on a ball must stay identical inside the
shrinking cone |x - x_bar| <= 6 A d (T* - t), with A = 1 + sup over time of
(sup rho of run 2 + sup |grad log c| of run 1). This module computes A,
checks the cone, and measures the empirical front speed of the difference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import RunResult, max_char_speed


@dataclass
class ConeSpec:
    center: float
    A: float
    T_star: float

    def __post_init__(self):
        if self.A < 1.0:
            raise ValueError("A is 1 + nonnegative sup-norms, so A >= 1")
        if self.T_star <= 0:
            raise ValueError("T_star must be positive")

    def speed(self, dim: int) -> float:
        return 6.0 * self.A * dim

    def radius(self, t: float, dim: int) -> float:
        return self.speed(dim) * (self.T_star - t)


@dataclass
class ConeReport:
    cone_violation: bool
    max_interior_diff: float
    empirical_front_speed: float
    lambda_max_observed: float

    def __post_init__(self):
        if self.empirical_front_speed < 0:
            raise ValueError("empirical front speed must be >= 0")


def compute_A(run1: RunResult, run2: RunResult) -> float:
    """A = 1 + max over recorded steps of (sup rho_2 + sup |grad log c_1|).

    Deliberately asymmetric: density bound from the second run, drift bound
    from the first.
    """
    if run1.grid != run2.grid:
        raise ValueError("paired runs must share a grid")
    sup_rho2 = max(r.norms.sup_rho for r in _recorded(run2))
    sup_drift1 = max(r.norms.sup_grad_log_c for r in _recorded(run1))
    return 1.0 + sup_rho2 + sup_drift1


def _recorded(run: RunResult):
    return [r for r in run.records if r.norms is not None]


def empirical_speed_bound(run: RunResult) -> float:
    """Max over snapshots and cells of max(|lambda_1|, |lambda_2|)."""
    smax = max(r.max_abs_lambda for r in run.records)
    for s in run.snapshots:
        for a in range(run.grid.dim):
            smax = max(smax, float(np.max(max_char_speed(s.rho, s.q[a]))))
    return float(smax)


def _pair_snapshots(run1: RunResult, run2: RunResult):
    """Snapshot pairs at (nearly) common times, up to the shorter run."""
    t2 = np.array([s.t_scaled for s in run2.snapshots])
    pairs = []
    for s1 in run1.snapshots:
        j = int(np.argmin(np.abs(t2 - s1.t_scaled)))
        if abs(t2[j] - s1.t_scaled) <= 1e-9 * (1.0 + abs(s1.t_scaled)):
            pairs.append((s1, run2.snapshots[j]))
    return pairs


def _field_diff(s1, s2):
    d = np.abs(s1.rho - s2.rho)
    d = np.maximum(d, np.max(np.abs(s1.q - s2.q), axis=0))
    return np.maximum(d, np.abs(s1.log_c - s2.log_c))


def _radial_distance(grid, center: float):
    mesh = grid.meshgrid()
    r2 = (mesh[0] - center) ** 2
    for ax in mesh[1:]:
        r2 = r2 + ax * ax  # cone centered on the first axis; x_bar on axis 1
    return np.sqrt(r2)


def _theil_sen(ts, xs):
    """Median-of-pairwise-slopes line fit; robust to single-cell front noise."""
    ts = np.asarray(ts)
    xs = np.asarray(xs)
    slopes = []
    n = len(ts)
    for i in range(n):
        for j in range(i + 1, n):
            if ts[j] > ts[i]:
                slopes.append((xs[j] - xs[i]) / (ts[j] - ts[i]))
    return float(np.median(slopes)) if slopes else 0.0


def verify_cone(run1: RunResult, run2: RunResult, cone: ConeSpec,
                tol: float) -> ConeReport:
    """Check that the two runs agree inside the cone and measure the front.

    At each paired snapshot the max difference of (rho, q, log_c) over cells
    with |x - center| <= speed * (T* - t) is compared against tol; the
    empirical front speed is a robust line fit of the outermost position where
    |rho_1 - rho_2| exceeds tol (per side, relative to its initial position)
    versus time.
    """
    if run1.grid != run2.grid:
        raise ValueError("paired runs must share a grid")
    grid = run1.grid
    dist = _radial_distance(grid, cone.center)
    pairs = _pair_snapshots(run1, run2)
    if not pairs:
        raise ValueError("runs share no snapshot times")

    max_inside = 0.0
    violation = False
    front_t, front_r = [], []
    for s1, s2 in pairs:
        t = s1.t_scaled
        diff = _field_diff(s1, s2)
        radius = cone.radius(t, grid.dim)
        if radius > 0:
            inside = dist <= radius
            if np.any(inside):
                local = float(np.max(diff[inside]))
                max_inside = max(max_inside, local)
                if local > tol:
                    violation = True
        crossed = np.abs(s1.rho - s2.rho) > tol
        if np.any(crossed):
            front_t.append(t)
            front_r.append(float(np.max(dist[crossed])))

    if len(front_t) >= 2:
        speed = max(_theil_sen(front_t, front_r), 0.0)
    else:
        speed = 0.0
    lam = max(empirical_speed_bound(run1), empirical_speed_bound(run2))
    return ConeReport(violation, max_inside, speed, lam)
