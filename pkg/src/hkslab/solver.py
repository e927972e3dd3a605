"""Conservative finite-volume evolution of the scaled hyperbolic system.

Per axis the system is a 2x2 conservation law in (rho, q_axis) with flux
F = (rho * q_axis, rho); log c is advanced by an exact exponential rule so
that c stays positive and monotonically decaying.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Grid, NormReport, PhysParams, SimState, derivative, laplacian, norm_report


class PositivityError(RuntimeError):
    """rho became nonpositive and halving the step once did not recover it."""


@dataclass
class SolverConfig:
    cfl: float = 0.45
    scheme: str = "rusanov"  # or "hll"
    time_integrator: str = "ssp_rk2"
    epsilon: float = 0.0
    max_steps: int = 200_000
    gradient_abort_factor: float = 1.0e6
    reconstruction: str = "first_order"  # or "minmod"
    norm_order: int = 2
    snapshot_every: int = 1  # 0 disables snapshots
    record_every: int = 1  # full norm reports every k-th step

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.scheme not in ("rusanov", "hll"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.time_integrator != "ssp_rk2":
            raise ValueError(f"unknown time integrator {self.time_integrator!r}")
        if self.reconstruction not in ("first_order", "minmod"):
            raise ValueError(f"unknown reconstruction {self.reconstruction!r}")
        if self.gradient_abort_factor <= 1.0:
            raise ValueError("gradient_abort_factor must be > 1")


@dataclass
class StepRecord:
    t_scaled: float
    dt: float
    max_abs_lambda: float
    norms: NormReport


@dataclass
class Snapshot:
    t_scaled: float
    rho: np.ndarray
    q: np.ndarray
    log_c: np.ndarray


@dataclass
class RunResult:
    records: list  # list[StepRecord]
    snapshots: list  # list[Snapshot]
    final_state: SimState
    verdict: str  # completed | gradient_abort | positivity_failure | step_limit
    under_resolved: bool
    t_abort: float
    initial_norms: NormReport
    params: PhysParams = None
    config: SolverConfig = None
    grid: Grid = None


def flux(rho, q_axis):
    """Physical flux of the per-axis 2x2 system: F(rho, q) = (rho*q, rho)."""
    return rho * q_axis, rho


def max_char_speed(rho, q_axis):
    """max(|lambda_1|, |lambda_2|) = (|q| + sqrt(q^2 + 4 rho)) / 2."""
    return 0.5 * (np.abs(q_axis) + np.sqrt(q_axis * q_axis + 4.0 * rho))


def numerical_flux_rusanov(rho_l, q_l, rho_r, q_r):
    """Local Lax-Friedrichs interface flux for the per-axis pair (rho, q_axis)."""
    if np.any(rho_l <= 0) or np.any(rho_r <= 0):
        raise ValueError("rusanov flux requires positive rho on both sides")
    f_rho_l, f_q_l = flux(rho_l, q_l)
    f_rho_r, f_q_r = flux(rho_r, q_r)
    s = np.maximum(max_char_speed(rho_l, q_l), max_char_speed(rho_r, q_r))
    f_rho = 0.5 * (f_rho_l + f_rho_r) - 0.5 * s * (rho_r - rho_l)
    f_q = 0.5 * (f_q_l + f_q_r) - 0.5 * s * (q_r - q_l)
    return f_rho, f_q


def numerical_flux_hll(rho_l, q_l, rho_r, q_r):
    if np.any(rho_l <= 0) or np.any(rho_r <= 0):
        raise ValueError("hll flux requires positive rho on both sides")
    sqrt_l = np.sqrt(q_l * q_l + 4.0 * rho_l)
    sqrt_r = np.sqrt(q_r * q_r + 4.0 * rho_r)
    s_l = np.minimum(0.5 * (q_l - sqrt_l), 0.5 * (q_r - sqrt_r))
    s_r = np.maximum(0.5 * (q_l + sqrt_l), 0.5 * (q_r + sqrt_r))
    f_rho_l, f_q_l = flux(rho_l, q_l)
    f_rho_r, f_q_r = flux(rho_r, q_r)
    # s_l < 0 < s_r always for this system (lambda_1 < 0 < lambda_2)
    denom = s_r - s_l
    f_rho = (s_r * f_rho_l - s_l * f_rho_r + s_l * s_r * (rho_r - rho_l)) / denom
    f_q = (s_r * f_q_l - s_l * f_q_r + s_l * s_r * (q_r - q_l)) / denom
    return f_rho, f_q


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _interface_states(u: np.ndarray, axis: int, reconstruction: str):
    """Left/right states at interface i+1/2 (index i)."""
    u_r = np.roll(u, -1, axis=axis)
    if reconstruction == "first_order":
        return u, u_r
    d_minus = u - np.roll(u, 1, axis=axis)
    d_plus = u_r - u
    slope = _minmod(d_minus, d_plus)
    slope_r = np.roll(slope, -1, axis=axis)
    return u + 0.5 * slope, u_r - 0.5 * slope_r


def _rhs(rho, q, grid: Grid, params: PhysParams, config: SolverConfig):
    """Semi-discrete right-hand side for (rho, q)."""
    h = grid.h
    drho = np.zeros_like(rho)
    dq = np.zeros_like(q)
    num_flux = numerical_flux_rusanov if config.scheme == "rusanov" else numerical_flux_hll
    for a in range(grid.dim):
        rho_l, rho_r = _interface_states(rho, a, config.reconstruction)
        qa_l, qa_r = _interface_states(q[a], a, config.reconstruction)
        rho_l = np.maximum(rho_l, 1e-14)
        rho_r = np.maximum(rho_r, 1e-14)
        f_rho, f_q = num_flux(rho_l, qa_l, rho_r, qa_r)
        drho -= (f_rho - np.roll(f_rho, 1, axis=a)) / h
        dq[a] -= (f_q - np.roll(f_q, 1, axis=a)) / h
    if config.epsilon > 0:
        drho += config.epsilon / np.sqrt(params.chi * params.mu) * laplacian(rho, grid)
    return drho, dq


def cfl_dt(state: SimState, params: PhysParams, config: SolverConfig) -> float:
    """Hyperbolic CFL step, further restricted parabolically when epsilon > 0."""
    smax = 0.0
    for a in range(state.grid.dim):
        smax = max(smax, float(np.max(max_char_speed(state.rho, state.q[a]))))
    if not np.isfinite(smax):
        raise FloatingPointError("nonfinite characteristic speed")
    h = state.grid.h
    d = state.grid.dim
    dt = config.cfl * h / (d * smax)
    if config.epsilon > 0:
        dt = min(dt, config.cfl * h * h * np.sqrt(params.chi * params.mu)
                 / (2.0 * d * config.epsilon))
    return dt


def observed_max_speed(state: SimState) -> float:
    smax = 0.0
    for a in range(state.grid.dim):
        smax = max(smax, float(np.max(max_char_speed(state.rho, state.q[a]))))
    return smax


def _advance(rho, q, log_c, grid, params, config, dt):
    """One SSP-RK2 step; returns updated arrays (may produce nonpositive rho)."""
    k1_rho, k1_q = _rhs(rho, q, grid, params, config)
    rho1 = rho + dt * k1_rho
    q1 = q + dt * k1_q
    if np.min(rho1) <= 0:
        return rho1, q1, log_c
    k2_rho, k2_q = _rhs(rho1, q1, grid, params, config)
    rho_new = 0.5 * (rho + rho1 + dt * k2_rho)
    q_new = 0.5 * (q + q1 + dt * k2_q)
    # exact exponential consumption update with the RK-consistent average of rho
    rho_bar = 0.5 * (rho + rho1)
    log_c_new = log_c - np.sqrt(params.mu / params.chi) * rho_bar * dt
    return rho_new, q_new, log_c_new


def step(state: SimState, params: PhysParams, config: SolverConfig,
         dt: float | None = None, with_norms: bool = True):
    """Advance one step. Retries once with dt/2 on positivity failure."""
    if dt is None:
        dt = cfl_dt(state, params, config)
    grid = state.grid
    smax = observed_max_speed(state)
    for attempt in range(2):
        rho_new, q_new, log_c_new = _advance(
            state.rho, state.q, state.log_c, grid, params, config, dt)
        if np.min(rho_new) > 0:
            break
        dt *= 0.5
    else:
        raise PositivityError(
            f"positivity failure at t={state.t_scaled:.6g} (min rho "
            f"{float(np.min(rho_new)):.3e} after dt halving)")
    new_state = SimState(grid, rho_new, q_new, log_c_new, state.t_scaled + dt)
    norms = norm_report(new_state, params, config.norm_order) if with_norms else None
    return new_state, StepRecord(new_state.t_scaled, dt, smax, norms)


def _sup_grad_rho(rho, grid) -> float:
    g2 = np.zeros_like(rho)
    for a in range(grid.dim):
        d1 = derivative(rho, grid, a, 1)
        g2 += d1 * d1
    return float(np.sqrt(np.max(g2)))


def run(state0: SimState, params: PhysParams, config: SolverConfig,
        t_end: float | None = None, stop_predicate=None) -> RunResult:
    """Step until t_end, a stop predicate, the gradient-abort guard, the step
    limit, or a positivity failure.

    The gradient guard fires when sup|grad rho| >= factor * its initial value;
    it doubles as the numerical blow-up-indicated event. The run is flagged
    under-resolved if sup|grad rho| ever exceeds 0.5/h.
    """
    state0.validate()
    state = state0.copy()
    grid = state.grid
    initial_norms = norm_report(state, params, config.norm_order)
    grad0 = max(_sup_grad_rho(state.rho, grid), 1e-8)
    abort_level = config.gradient_abort_factor * grad0
    resolution_level = 0.5 / grid.h

    records = [StepRecord(state.t_scaled, 0.0, observed_max_speed(state), initial_norms)]
    snapshots = []
    if config.snapshot_every > 0:
        snapshots.append(Snapshot(state.t_scaled, state.rho.copy(),
                                  state.q.copy(), state.log_c.copy()))
    verdict = "step_limit"
    under_resolved = False

    for k in range(1, config.max_steps + 1):
        dt = cfl_dt(state, params, config)
        hit_end = t_end is not None and state.t_scaled + dt >= t_end
        if hit_end:
            dt = t_end - state.t_scaled
            if dt <= 0:
                verdict = "completed"
                break
        want_norms = hit_end or (k % config.record_every == 0)
        try:
            state, rec = step(state, params, config, dt, with_norms=want_norms)
        except PositivityError:
            verdict = "positivity_failure"
            break
        grad_now = _sup_grad_rho(state.rho, grid)
        if grad_now >= resolution_level:
            under_resolved = True
        if want_norms:
            records.append(rec)
        if config.snapshot_every > 0 and (k % config.snapshot_every == 0 or hit_end):
            snapshots.append(Snapshot(state.t_scaled, state.rho.copy(),
                                      state.q.copy(), state.log_c.copy()))
        if grad_now >= abort_level:
            verdict = "gradient_abort"
            break
        if hit_end:
            verdict = "completed"
            break
        if stop_predicate is not None and rec.norms is not None and stop_predicate(rec):
            verdict = "completed"
            break

    if records[-1].norms is None or records[-1].t_scaled < state.t_scaled:
        records.append(StepRecord(state.t_scaled, 0.0, observed_max_speed(state),
                                  norm_report(state, params, config.norm_order)))
    if config.snapshot_every > 0 and snapshots[-1].t_scaled < state.t_scaled:
        snapshots.append(Snapshot(state.t_scaled, state.rho.copy(),
                                  state.q.copy(), state.log_c.copy()))
    return RunResult(records, snapshots, state, verdict, under_resolved,
                     state.t_scaled, initial_norms, params, config, grid)
