"""Initial-data builders, experiment orchestration, config, and report output.

Each scenario builds initial data around a constant equilibrium (rho_bar,
c_bar), runs the finite-volume solver, and post-processes with the invariant
and blow-up machinery. Reports serialize to JSON; time series to CSV.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .blowup import (BlowupReport, CharTrace, DataCheckReport,
                     build_invariant_table, check_blowup_data, classify_blowup,
                     estimate_blowup_time, riccati_bound, trace_lambda2)
from .core import Grid, PhysParams, SimState, derivative, make_grid
from .riemann import ImageBounds, InvariantMap
from .solver import RunResult, SolverConfig, run
from .transform import RescaleParam, cole_hopf, parabolic_rescale

SCENARIOS = ("constant", "remark11", "thm13_case1", "thm13_case2",
             "corollary14", "custom")


@dataclass
class BumpSpec:
    inner_radius: float = 1.0
    outer_radius: float = 2.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (0 < self.inner_radius < self.outer_radius):
            raise ValueError("need 0 < inner_radius < outer_radius")
        if not (0 < self.amplitude <= 1):
            raise ValueError("amplitude must lie in (0, 1]")


def _smoothstep(s):
    """C-infinity monotone step: 0 for s<=0, 1 for s>=1, exp(-1/s) based."""
    s = np.asarray(s, dtype=float)
    g = np.zeros_like(s)
    pos = s > 0
    g[pos] = np.exp(-1.0 / s[pos])
    g1 = np.zeros_like(s)
    pos1 = s < 1
    g1[pos1] = np.exp(-1.0 / (1.0 - s[pos1]))
    return g / (g + g1)


def bump(x, spec: BumpSpec | None = None):
    """Even C-infinity bump: amplitude on |x| <= inner, 0 beyond outer."""
    spec = spec or BumpSpec()
    r = np.abs(np.asarray(x, dtype=float))
    s = (spec.outer_radius - r) / (spec.outer_radius - spec.inner_radius)
    return spec.amplitude * _smoothstep(np.clip(s, 0.0, 1.0))


@dataclass
class ScenarioConfig:
    """Full experiment description; the JSON config mirrors these fields.

    c_bar defaults to 2: bump data over a background chemical level must keep
    every phase point strictly above the characteristic-domain separatrix
    rho > (3/4) q^2, and with the unit bump that requires c_bar >= ~1.7.
    """

    scenario: str = "remark11"
    rho_bar: float = 1.0
    c_bar: float = 2.0
    a: float = 1.0
    delta: float = 0.2
    N: int = 1
    params: PhysParams = field(default_factory=PhysParams)
    grid: Grid = field(default_factory=lambda: make_grid(1, 1024, 16.0))
    solver: SolverConfig = field(default_factory=SolverConfig)
    target_interval: tuple | None = None
    t_end: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.rho_bar <= 0 or self.c_bar <= 0:
            raise ValueError("rho_bar and c_bar must be positive")
        if self.a <= 0:
            raise ValueError("a must be positive")
        if not (0 < self.delta <= 1):
            raise ValueError("delta must lie in (0, 1]")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.target_interval is not None:
            lo, hi = self.target_interval
            if not (0 < lo < hi):
                raise ValueError("target_interval must satisfy 0 < lo < hi")


def _state_from_rho_c(grid: Grid, rho0: np.ndarray, c0: np.ndarray) -> SimState:
    if np.min(c0) <= 0 or np.min(rho0) <= 0:
        raise ValueError("initial rho and c must be strictly positive")
    log_c = np.log(c0)
    return SimState(grid, np.asarray(rho0, dtype=float),
                    cole_hopf(log_c, grid), log_c, 0.0)


def build_data(config: ScenarioConfig, custom_fields=None) -> SimState:
    """Initial state for a scenario; see each branch for the data formula."""
    grid = config.grid
    spec = BumpSpec()

    if config.scenario == "constant":
        rho0 = np.full(grid.shape, config.rho_bar)
        c0 = np.full(grid.shape, config.c_bar)
        return _state_from_rho_c(grid, rho0, c0)

    if config.scenario == "custom":
        if custom_fields is None:
            raise ValueError("custom scenario needs (rho0, c0) arrays")
        rho0, c0 = custom_fields
        return _state_from_rho_c(grid, np.asarray(rho0), np.asarray(c0))

    if config.scenario in ("remark11", "thm13_case1"):
        if grid.dim != 1:
            raise ValueError(f"{config.scenario} is one-dimensional")
        if grid.L < spec.outer_radius + 1.0:
            raise ValueError("domain too small for the bump support")
        x = grid.centers()
        psi = bump(x, spec)
        state = _state_from_rho_c(grid, config.rho_bar + psi, config.c_bar + psi)
        if config.scenario == "thm13_case1":
            if config.target_interval is not None:
                lo, hi = config.target_interval
                if 2.0 / config.a + config.rho_bar >= hi:
                    raise ValueError(
                        "2/a + rho_bar already exceeds the target interval; "
                        "increase a or decrease rho_bar")
            state = parabolic_rescale(state, RescaleParam(config.a))
            state.t_scaled = 0.0
        return state

    if config.scenario == "thm13_case2":
        if grid.dim < 2:
            raise ValueError("thm13_case2 needs dim >= 2")
        if grid.L < 1.0 / config.delta + 2.0:
            raise ValueError(
                f"need L >= 1/delta + 2 = {1.0 / config.delta + 2.0} for the "
                "transverse plateau plus margin")
        mesh = grid.meshgrid()
        prof = bump(mesh[0], spec)
        for ax in mesh[1:]:
            prof = prof * bump(config.delta * np.abs(ax),
                               BumpSpec(1.0, 2.0, 1.0))
        return _state_from_rho_c(grid, config.rho_bar + prof,
                                 config.c_bar + prof)

    if config.scenario == "corollary14":
        amp = config.delta ** config.N
        mesh = grid.meshgrid()
        prof = bump(mesh[0], spec)
        for ax in mesh[1:]:
            prof = prof * bump(config.delta * np.abs(ax), BumpSpec(1.0, 2.0, 1.0))
        prof = amp * prof
        return _state_from_rho_c(grid, config.rho_bar + prof,
                                 config.c_bar + prof)

    raise AssertionError("unreachable")


def perturbation_norm(state: SimState, rho_bar: float, m: int = 2) -> float:
    """Discrete H^m size of the data: ||rho0 - rho_bar||_{H^m} + ||q0||_{H^m}."""
    grid = state.grid
    vol = grid.cell_volume

    def h_norm(values):
        total = float(np.sum(values * values) * vol)
        for k in range(1, m + 1):
            for a in range(grid.dim):
                d = values
                for _ in range(k):
                    d = derivative(d, grid, a, 1)
                total += float(np.sum(d * d) * vol)
        return np.sqrt(total)

    q_part = np.sqrt(sum(h_norm(state.q[a]) ** 2 for a in range(grid.dim)))
    return h_norm(state.rho - rho_bar) + q_part


@dataclass
class ExperimentReport:
    scenario: str
    verdict: str
    t_final: float
    seam_ok: bool
    provenance: dict
    norms_series: list
    data_check: DataCheckReport | None = None
    image_bounds: ImageBounds | None = None
    blowup: BlowupReport | None = None
    trace: CharTrace | None = None
    t_estimate: float | None = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "verdict": self.verdict,
            "t_final": self.t_final,
            "seam_ok": self.seam_ok,
            "provenance": self.provenance,
            "t_estimate": self.t_estimate,
            "extras": _plain({k: v for k, v in self.extras.items()
                              if k != "result"}),
        }
        for name in ("data_check", "image_bounds", "blowup"):
            obj = getattr(self, name)
            out[name] = _plain(asdict(obj)) if obj is not None else None
        if self.trace is not None:
            out["trace"] = {
                "truncated": bool(self.trace.truncated),
                "n_points": int(len(self.trace.times)),
                "t_last": float(self.trace.times[-1]) if len(self.trace.times) else None,
            }
        else:
            out["trace"] = None
        return out


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def config_hash(config: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def config_to_dict(config: ScenarioConfig) -> dict:
    d = {
        "scenario": config.scenario,
        "rho_bar": config.rho_bar,
        "c_bar": config.c_bar,
        "a": config.a,
        "delta": config.delta,
        "N": config.N,
        "params": asdict(config.params),
        "grid": asdict(config.grid),
        "solver": asdict(config.solver),
        "target_interval": list(config.target_interval) if config.target_interval else None,
        "t_end": config.t_end,
    }
    return d


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a config from a JSON dict; unknown keys anywhere are rejected."""
    allowed = {"scenario", "rho_bar", "c_bar", "a", "delta", "N", "params",
               "grid", "solver", "target_interval", "t_end"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in data.items() if k in
              {"scenario", "rho_bar", "c_bar", "a", "delta", "N", "t_end"}}
    if data.get("target_interval") is not None:
        kwargs["target_interval"] = tuple(data["target_interval"])
    for key, cls in (("params", PhysParams), ("grid", Grid), ("solver", SolverConfig)):
        if key in data and data[key] is not None:
            sub = data[key]
            valid = set(cls.__dataclass_fields__)
            bad = set(sub) - valid
            if bad:
                raise ValueError(f"unknown {key} keys: {sorted(bad)}")
            kwargs[key] = cls(**sub)
    return ScenarioConfig(**kwargs)


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def _seam_ok(result: RunResult) -> bool:
    """Waves from the bump must not wrap around the torus before the abort."""
    from .propagation import empirical_speed_bound
    lam = empirical_speed_bound(result)
    return lam * result.t_abort < result.grid.L - 2.0


def run_scenario(config: ScenarioConfig, out_dir: str | None = None,
                 custom_fields=None) -> ExperimentReport:
    """Build data, run the solver, post-process, and optionally write reports."""
    state0 = build_data(config, custom_fields)
    t_end = config.t_end
    if t_end is None and config.scenario == "constant":
        t_end = 1.0
    result = run(state0, config.params, config.solver, t_end=t_end)

    norms_series = [
        {"t": r.t_scaled, **r.norms.as_dict()}
        for r in result.records if r.norms is not None
    ]
    seam = _seam_ok(result)
    report = ExperimentReport(
        scenario=config.scenario,
        verdict=result.verdict,
        t_final=result.final_state.t_scaled,
        seam_ok=seam,
        provenance={
            "config_hash": config_hash(config),
            "config": config_to_dict(config),
            "grid_shape": list(config.grid.shape),
            "h": config.grid.h,
        },
        norms_series=norms_series,
    )
    report.extras["result"] = result  # in-memory only; not serialized

    if config.scenario in ("remark11", "thm13_case1", "corollary14") \
            and config.grid.dim == 1:
        if result.verdict == "gradient_abort" and not seam \
                and config.scenario != "corollary14":
            raise RuntimeError(
                "domain seam reached before abort; enlarge the domain")
        _postprocess_blowup(config, result, report)
    elif config.scenario == "thm13_case2":
        _postprocess_case2(config, result, report)
    elif config.scenario == "constant":
        report.blowup = classify_blowup(result)

    if out_dir is not None:
        write_outputs(out_dir, report, result)
    return report


def _postprocess_blowup(config: ScenarioConfig, result: RunResult,
                        report: ExperimentReport) -> None:
    state0 = result.snapshots[0] if result.snapshots else None
    grid = config.grid
    rho0 = state0.rho if state0 else None
    c0 = np.exp(state0.log_c) if state0 else None
    report.data_check = check_blowup_data(rho0, c0, grid)

    imap = InvariantMap()
    try:
        table = build_invariant_table(result, imap)
    except Exception as exc:  # outside the invariant domain: record and stop
        report.extras["invariant_error"] = str(exc)
        report.blowup = classify_blowup(result)
        return
    P0, Q0 = table.pq(rho0, state0.q[0])
    bounds = imap.image_bounds(P0, Q0)
    report.image_bounds = bounds

    if report.data_check.asm4_ok and len(result.snapshots) >= 6:
        try:
            trace = trace_lambda2(result, report.data_check.x0, imap, table)
        except Exception as exc:  # tracing is best-effort diagnostics
            report.extras["trace_error"] = str(exc)
            report.blowup = classify_blowup(result)
            return
        report.trace = trace
        T_upper = riccati_bound(trace.P_tilde[0], bounds)
        report.blowup = classify_blowup(result, T_upper)
        try:
            report.t_estimate = estimate_blowup_time(trace)
        except ValueError as exc:
            report.extras["t_estimate_error"] = str(exc)
    else:
        report.blowup = classify_blowup(result)


def _postprocess_case2(config: ScenarioConfig, result: RunResult,
                       report: ExperimentReport) -> None:
    """Compare the d-dimensional tensor run against the 1D run extended
    constantly in the transverse directions, on the central slice.

    The 1D companion is stepped with the d-dimensional run's dt sequence so
    the two trajectories share snapshot times exactly.
    """
    from .solver import step as solver_step

    grid = config.grid
    cfg1 = ScenarioConfig(
        scenario="remark11", rho_bar=config.rho_bar, c_bar=config.c_bar,
        params=config.params,
        grid=make_grid(1, grid.n, grid.L),
        solver=config.solver, t_end=config.t_end)
    state1 = build_data(cfg1)

    centers = grid.centers()
    slice_mask = np.abs(centers) <= 0.5  # transverse cells well inside the plateau
    idx = [np.arange(grid.n)] + [np.where(slice_mask)[0]] * (grid.dim - 1)
    expand = (slice(None),) + (np.newaxis,) * (grid.dim - 1)

    def slice_diff(snap_d, state_1d):
        d = np.max(np.abs(snap_d.rho[np.ix_(*idx)] - state_1d.rho[expand]))
        d = max(d, np.max(np.abs(snap_d.q[0][np.ix_(*idx)] - state_1d.q[0][expand])))
        d = max(d, np.max(np.abs(snap_d.log_c[np.ix_(*idx)] - state_1d.log_c[expand])))
        return float(d)

    max_diff = slice_diff(result.snapshots[0], state1)
    diffs = [max_diff]
    from .solver import cfl_dt

    for prev, snap in zip(result.snapshots, result.snapshots[1:]):
        remaining = snap.t_scaled - prev.t_scaled
        while remaining > 1e-14:
            dt = min(remaining, cfl_dt(state1, cfg1.params, cfg1.solver))
            state1, _ = solver_step(state1, cfg1.params, cfg1.solver, dt=dt,
                                    with_norms=False)
            remaining -= dt
        d = slice_diff(snap, state1)
        diffs.append(d)
        max_diff = max(max_diff, d)
    report.extras["slice_max_diff"] = max_diff
    report.extras["slice_diffs"] = diffs
    report.extras["slice_times_compared"] = len(diffs)
    report.blowup = classify_blowup(result)


# -- structured output -------------------------------------------------------------

def write_outputs(out_dir: str, report: ExperimentReport, result: RunResult,
                  field_times=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
    write_norms_csv(os.path.join(out_dir, "norms.csv"), result)
    if report.trace is not None:
        write_trace_csv(os.path.join(out_dir, "trace.csv"), report.trace)
    if field_times is None:
        field_times = [result.snapshots[0].t_scaled,
                       result.snapshots[-1].t_scaled] if result.snapshots else []
    for t in field_times:
        write_fields_csv(out_dir, result, t)


def write_norms_csv(path: str, result: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sup_rho", "sup_c", "sup_grad_rho", "sup_hess_c",
                    "sup_grad_log_c", "X_m"])
        for r in result.records:
            if r.norms is None:
                continue
            n = r.norms
            w.writerow([r.t_scaled, n.sup_rho, n.sup_c, n.sup_grad_rho,
                        n.sup_hess_c, n.sup_grad_log_c, n.X_m])


def write_trace_csv(path: str, trace: CharTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "P", "Q", "P_tilde", "Phi"])
        for row in zip(trace.times, trace.positions, trace.P, trace.Q,
                       trace.P_tilde, trace.Phi):
            w.writerow(list(row))


def write_fields_csv(out_dir: str, result: RunResult, t: float) -> None:
    """Cellwise dump of the snapshot nearest to t."""
    if not result.snapshots:
        raise ValueError("run has no snapshots")
    ts = np.array([s.t_scaled for s in result.snapshots])
    snap = result.snapshots[int(np.argmin(np.abs(ts - t)))]
    grid = result.grid
    path = os.path.join(out_dir, f"fields_{snap.t_scaled:.6f}.csv")
    mesh = grid.meshgrid()
    cols = [m.ravel() for m in mesh]
    header = [f"x{i + 1}" for i in range(grid.dim)]
    cols.append(snap.rho.ravel())
    header.append("rho")
    for a in range(grid.dim):
        cols.append(snap.q[a].ravel())
        header.append(f"q{a + 1}")
    cols.append(snap.log_c.ravel())
    header.append("log_c")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow(list(row))
