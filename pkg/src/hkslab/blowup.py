"""Gradient blow-up machinery for the 1D system.

Admissibility checks on initial data, tracing of the fast (lambda_2)
characteristic through a recorded run, the Riccati upper bound on the blow-up
time, the blow-up classifier, and a divergence-time estimator exploiting the
Riccati structure (1/|P_tilde| is asymptotically affine in t).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Grid, derivative
from .riemann import ImageBounds, InvariantMap, InvariantTable, PsiTable
from .solver import RunResult


@dataclass
class DataCheckReport:
    """Admissibility of 1D initial data for the gradient blow-up argument."""

    asm1_ok: bool
    asm2_ok: bool
    asm3_ok: bool
    asm4_ok: bool
    x0: float | None
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.asm4_ok and self.x0 is None:
            raise ValueError("asm4_ok requires a witness position x0")

    @property
    def all_ok(self) -> bool:
        return self.asm1_ok and self.asm2_ok and self.asm3_ok and self.asm4_ok


@dataclass
class CharTrace:
    times: np.ndarray
    positions: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    P_tilde: np.ndarray
    Phi: np.ndarray
    dlam2_dw1: np.ndarray
    truncated: bool = False

    def __post_init__(self):
        if len(self.times) >= 2 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")


@dataclass
class BlowupReport:
    t_abort: float
    riccati_T_upper: float
    bounded_norms_max: tuple  # (sup rho, sup c, sup dx c, sup dx log c)
    diverging_norms_final: tuple  # (sup dx rho, sup dxx c)
    classification: str  # gradient_blowup | sup_norm_blowup | log_c_blowup | none
    resolution_limited: bool


def check_blowup_data(rho0: np.ndarray, c0: np.ndarray, grid: Grid,
                      margin_factor: float = 10.0) -> DataCheckReport:
    """Check the four structural hypotheses on 1D data (rho0, c0).

    asm1: uniform positivity (beta1 = min rho0, beta2 = min c0).
    asm2: smoothness proxy — repeated centered differences up to 4th order
          stay finite and do not saturate the grid scale.
    asm3: extrema attained — automatic on a periodic lattice.
    asm4: some cell has dx(rho0) <= 0 together with c0 * dxx(c0) < (dx c0)^2,
          the latter strict by margin_factor * h^2 to absorb discretization
          error of the second difference; x0 is the first qualifying cell.
    """
    if grid.dim != 1:
        raise ValueError("blow-up admissibility check is one-dimensional")
    rho0 = np.asarray(rho0, dtype=float)
    c0 = np.asarray(c0, dtype=float)
    beta1 = float(np.min(rho0))
    beta2 = float(np.min(c0))
    asm1 = beta1 > 0 and beta2 > 0

    d4r = rho0
    d4c = c0
    for _ in range(4):
        d4r = derivative(d4r, grid, 0, 1)
        d4c = derivative(d4c, grid, 0, 1)
    # Smooth data has grid-independent 4th differences; rough data scales like
    # h^-4, so a 1/h^3 ceiling separates the two across desk-scale grids.
    asm2 = bool(np.all(np.isfinite(d4r)) and np.all(np.isfinite(d4c))
                and np.max(np.abs(d4r)) < 1.0 / grid.h ** 3
                and np.max(np.abs(d4c)) < 1.0 / grid.h ** 3)
    asm3 = True

    dxr = derivative(rho0, grid, 0, 1)
    dxc = derivative(c0, grid, 0, 1)
    dxxc = derivative(c0, grid, 0, 2)
    margin = margin_factor * grid.h ** 2
    qualifies = (dxr <= 0.0) & (c0 * dxxc < dxc * dxc - margin)
    asm4 = bool(np.any(qualifies))
    x0 = float(grid.centers()[int(np.argmax(qualifies))]) if asm4 else None
    return DataCheckReport(asm1, asm2, asm3, asm4, x0, beta1, beta2)


def _lambda2(rho, q):
    return 0.5 * (q + np.sqrt(q * q + 4.0 * rho))


class _SnapshotInterp:
    """Cubic local interpolants of one 1D snapshot around a moving position."""

    WINDOW = 8

    def __init__(self, snap, grid: Grid, table: InvariantTable):
        self.snap = snap
        self.grid = grid
        self.table = table

    def _window(self, x):
        g = self.grid
        i = g.index_of(x)
        offs = np.arange(-self.WINDOW, self.WINDOW + 1)
        idx = (i + offs) % g.n
        xs = (-g.L + (i + 0.5) * g.h) + offs * g.h  # unwrapped coordinates
        return idx, xs

    def lam2(self, x):
        idx, xs = self._window(x)
        rho = CubicSpline(xs, self.snap.rho[idx])(x)
        q = CubicSpline(xs, self.snap.q[0][idx])(x)
        return float(_lambda2(rho, q))

    def invariants(self, x):
        """(P, Q, P_tilde, dlam2/dw1) at position x."""
        idx, xs = self._window(x)
        rho_w = self.snap.rho[idx]
        q_w = self.snap.q[0][idx]
        P_w, Q_w = self.table.pq(rho_w, q_w)
        p_spline = CubicSpline(xs, P_w)
        P = float(p_spline(x))
        Q = float(CubicSpline(xs, Q_w)(x))
        P_tilde = float(p_spline(x, 1))
        rho_x = float(CubicSpline(xs, rho_w)(x))
        q_x = float(CubicSpline(xs, q_w)(x))
        dl = float(self.table.dlambda2_dw1(rho_x, q_x))
        return P, Q, P_tilde, dl


def _phase_box(run: RunResult, pad: float = 0.05):
    """Bounding box of (rho, q) over all snapshots, padded and clamped.

    Post-shock states can fall outside the region the invariant construction
    covers (rho > (3/4) q^2), so the box is intersected with that region:
    the rho floor is raised above the worst corner, and if necessary the q
    range is shrunk toward zero. A characteristic trace that reaches such
    states truncates at the box edge, which is the intended behaviour.
    """
    z1_lo, z1_hi = np.inf, -np.inf
    z2_lo, z2_hi = np.inf, -np.inf
    for s in run.snapshots:
        z1_lo = min(z1_lo, float(np.min(s.rho)))
        z1_hi = max(z1_hi, float(np.max(s.rho)))
        z2_lo = min(z2_lo, float(np.min(s.q)))
        z2_hi = max(z2_hi, float(np.max(s.q)))
    s1 = max(z1_hi - z1_lo, 1e-3)
    s2 = max(z2_hi - z2_lo, 1e-3)
    z1_lo = max(z1_lo - pad * s1, 0.5 * z1_lo)
    z1_hi = z1_hi + pad * s1
    z2_lo = z2_lo - pad * s2
    z2_hi = z2_hi + pad * s2
    margin = 1.1
    floor = margin * 0.75 * max(z2_lo * z2_lo, z2_hi * z2_hi)
    if floor >= z1_hi:
        # even the rho ceiling sits below the separatrix at the q extremes;
        # shrink the q range until the corners fit under it
        q_max = np.sqrt(z1_hi / (margin * 0.75)) * 0.99
        z2_lo = max(z2_lo, -q_max)
        z2_hi = min(z2_hi, q_max)
        floor = margin * 0.75 * max(z2_lo * z2_lo, z2_hi * z2_hi)
    z1_lo = max(z1_lo, floor)
    return ((z1_lo, z1_hi), (z2_lo, z2_hi))


def build_invariant_table(run: RunResult, imap: InvariantMap | None = None,
                          n1: int = 64, n2: int = 64) -> InvariantTable:
    """Spline surrogate of the invariant map covering a whole recorded run."""
    imap = imap or InvariantMap()
    z1r, z2r = _phase_box(run)
    return InvariantTable(imap, z1r, z2r, n1, n2)


def trace_lambda2(run: RunResult, x0: float,
                  imap: InvariantMap | None = None,
                  table: InvariantTable | None = None,
                  psi: PsiTable | None = None) -> CharTrace:
    """Trace dx/dt = lambda_2(rho, q) through the run's snapshots from x0.

    Heun stepping between consecutive snapshots with cubic spatial
    interpolation; samples P, Q (through the invariant spline table), the
    discrete P_tilde = dP/dx, the transport multiplier
    Phi(t) = exp(Psi(Q(x(t), t)) - Psi(Q(x0, 0))), and dlambda2/dw1.
    The trace truncates (flagged) if the characteristic leaves the region
    the invariant table covers.
    """
    if run.grid.dim != 1:
        raise ValueError("characteristic tracing is one-dimensional")
    if len(run.snapshots) < 2:
        raise ValueError("tracing needs snapshots at every step")
    imap = imap or InvariantMap()
    if table is None:
        table = build_invariant_table(run, imap)

    interp0 = _SnapshotInterp(run.snapshots[0], run.grid, table)
    P0, Q0, _, _ = interp0.invariants(x0)
    if psi is None:
        q_vals = [table.pq(s.rho, s.q[0])[1] for s in run.snapshots]
        q_lo = min(float(np.min(v)) for v in q_vals)
        q_hi = max(float(np.max(v)) for v in q_vals)
        pad = max(1e-6, 0.01 * (q_hi - q_lo))
        psi = imap.psi_table(P0, q_lo - pad, min(q_hi + pad, -1.0 - 1e-9))
    psi0 = float(psi(Q0))

    times, xs, Ps, Qs, Pts, Phis, dls = [], [], [], [], [], [], []
    x = float(x0)
    truncated = False
    for k, snap in enumerate(run.snapshots):
        interp = _SnapshotInterp(snap, run.grid, table) if k else interp0
        clip_before = table.clipped
        P, Q, Pt, dl = interp.invariants(x)
        if table.clipped > clip_before or abs(x) > run.grid.L:
            truncated = True
            break
        times.append(snap.t_scaled)
        xs.append(x)
        Ps.append(P)
        Qs.append(Q)
        Pts.append(Pt)
        Phis.append(float(np.exp(psi(Q) - psi0)))
        dls.append(dl)
        if k + 1 < len(run.snapshots):
            nxt = run.snapshots[k + 1]
            dt = nxt.t_scaled - snap.t_scaled
            interp_next = _SnapshotInterp(nxt, run.grid, table)
            s1 = interp.lam2(x)
            s2 = interp_next.lam2(x + dt * s1)
            x = x + 0.5 * dt * (s1 + s2)
    return CharTrace(np.array(times), np.array(xs), np.array(Ps), np.array(Qs),
                     np.array(Pts), np.array(Phis), np.array(dls), truncated)


def riccati_bound(P_tilde0: float, bounds: ImageBounds) -> float:
    """Divergence time of the Riccati envelope: M_Phi / (delta0 * |P_tilde0|).

    The comparison ODE y' = -(delta0/M_Phi) y^2 started from y(0) =
    P_tilde0 * Phi(0) < 0 reaches -infinity at this time; the gradient of the
    transported invariant does so no later.
    """
    if P_tilde0 >= 0:
        raise ValueError(f"Riccati bound needs P_tilde0 < 0, got {P_tilde0}")
    return bounds.M_phi / (bounds.delta0 * abs(P_tilde0))


_BOUNDED_KEYS = ("sup_rho", "sup_c", "sup_grad_c", "sup_grad_log_c")
_DIVERGING_KEYS = ("sup_grad_rho", "sup_hess_c")


def classify_blowup(run: RunResult, riccati_T_upper: float = float("nan"),
                    bounded_ratio: float = 3.0) -> BlowupReport:
    """Classify how a run terminated by comparing norm growth patterns.

    gradient_blowup: the derivative pair (sup|dx rho|, sup|dxx c|) grew by at
    least the solver's gradient_abort_factor while the four pointwise-bounded
    norms (sup rho, sup c, sup|dx c|, sup|dx log c|) each varied by less than
    bounded_ratio in the growth direction (the exponential decay of c is by
    design and does not count as variation).
    """
    recs = [r for r in run.records if r.norms is not None]
    first = recs[0].norms.as_dict()

    def growth(key):
        base = max(abs(first[key]), 1e-300)
        return max(abs(r.norms.as_dict()[key]) for r in recs) / base

    bounded_max = tuple(max(abs(r.norms.as_dict()[k]) for r in recs)
                        for k in _BOUNDED_KEYS)
    final = recs[-1].norms.as_dict()
    diverging_final = tuple(abs(final[k]) for k in _DIVERGING_KEYS)

    if run.verdict != "gradient_abort":
        cls = "none"
    elif growth("sup_rho") >= bounded_ratio or growth("sup_c") >= bounded_ratio \
            or growth("sup_grad_c") >= bounded_ratio:
        cls = "sup_norm_blowup"
    elif growth("sup_grad_log_c") >= bounded_ratio:
        cls = "log_c_blowup"
    elif max(growth(k) for k in _DIVERGING_KEYS) >= run.config.gradient_abort_factor:
        cls = "gradient_blowup"
    else:
        cls = "none"
    return BlowupReport(run.t_abort, riccati_T_upper, bounded_max,
                        diverging_final, cls, run.under_resolved)


def estimate_blowup_time(trace: CharTrace) -> float:
    """Root of the affine fit of 1/|P_tilde| on the final third of the trace.

    Valid because P_tilde * Phi obeys a Riccati equation, making 1/|P_tilde|
    asymptotically affine in t with negative slope as blow-up is approached.
    Once the characteristic is absorbed into a shock, the discrete P_tilde
    saturates at the resolution ceiling and 1/|P_tilde| plateaus, so the fit
    window is the final third of the decaying phase: the prefix ending at
    the global minimum of 1/|P_tilde|.
    """
    n = len(trace.times)
    if n < 6:
        raise ValueError("trace too short for a tail fit")
    with np.errstate(divide="ignore"):
        inv_all = 1.0 / np.abs(np.asarray(trace.P_tilde))
    stop = int(np.argmin(inv_all)) + 1
    if stop < 6:
        raise ValueError("1/|P_tilde| stops decreasing too early for a tail fit")
    k = 2 * stop // 3
    t = trace.times[k:stop]
    pt = trace.P_tilde[k:stop]
    if np.any(pt >= 0):
        raise ValueError("P_tilde must be negative on the tail window")
    y = 1.0 / np.abs(pt)
    if y[-1] >= y[0]:
        raise ValueError("1/|P_tilde| is nondecreasing on the tail; no estimate")
    slope, intercept = np.polyfit(t, y, 1)
    if slope >= 0:
        raise ValueError("tail fit has nonnegative slope; no estimate")
    return float(-intercept / slope)
