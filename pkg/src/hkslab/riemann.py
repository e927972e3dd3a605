"""Riemann-invariant coordinates for the 2x2 system, built from characteristic ODEs.

The phase plane is Omega = {(z1, z2): z1 > 0} with z1 the density slot and z2
the log-gradient slot. The invariant map is

    w1(z1, z2) = exp(foot_1),   w2(z1, z2) = -exp(foot_2),

where foot_i is the value at z2 = 0 of the family-i characteristic through
(z1, z2):

    d(phi_1)/d(z2) = (z2 - sqrt(z2^2 + 4 phi_1)) / 2,
    d(phi_2)/d(z2) = (z2 + sqrt(z2^2 + 4 phi_2)) / 2.

The gradient fields are f1 = exp(foot_1 + J1), f2 = -exp(foot_2 - J2) with
J_i = int_0^{z2} ds / sqrt(s^2 + 4 phi_i(s)) along the backtraced curve.

Domain caveat: characteristics anchored on the z2 = 0 axis only reach points
with z1 > (3/4) z2^2 on the relevant side (z2 < 0 for family 1, z2 > 0 for
family 2); phi = (3/4) z2^2 is an exact separatrix solution. Evaluations below
the separatrix raise InvariantDomainError; admissible data must stay above it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, RectBivariateSpline

SEPARATRIX_FACTOR = 0.75


class InvariantDomainError(ValueError):
    """Phase point lies outside the region reachable from the z2 = 0 axis."""


class InversionError(RuntimeError):
    """Newton inversion of the invariant map failed to converge."""


@dataclass(frozen=True)
class PhasePoint:
    z1: float
    z2: float

    def __post_init__(self):
        if self.z1 <= 0:
            raise ValueError(f"z1 must be > 0, got {self.z1}")


@dataclass(frozen=True)
class InvariantPoint:
    w1: float
    w2: float

    def __post_init__(self):
        if not (self.w1 > 0 > self.w2):
            raise ValueError(f"need w1 > 0 > w2, got ({self.w1}, {self.w2})")


@dataclass
class CharODEConfig:
    integrator: str = "rk4_adaptive"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_z2_span: float = 60.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.integrator != "rk4_adaptive":
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass
class ImageBounds:
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    delta0: float
    m_phi: float
    M_phi: float

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ValueError("delta0 must be > 0")
        if not (0 < self.m_phi <= self.M_phi):
            raise ValueError("need 0 < m_phi <= M_phi")


def eigen(p: PhasePoint):
    """Eigenvalues and eigenvectors of [[z2, z1], [1, 0]]; lambda1 < 0 < lambda2."""
    s = np.sqrt(p.z2 * p.z2 + 4.0 * p.z1)
    lam1 = 0.5 * (p.z2 - s)
    lam2 = 0.5 * (p.z2 + s)
    return lam1, lam2, (lam1, 1.0), (lam2, 1.0)


def _check_covered(z1s, z2s):
    z1s = np.atleast_1d(np.asarray(z1s, dtype=float))
    z2s = np.atleast_1d(np.asarray(z2s, dtype=float))
    if np.any(z1s <= 0):
        raise InvariantDomainError("z1 must be > 0")
    bad = z1s <= SEPARATRIX_FACTOR * z2s * z2s
    if np.any(bad & (z2s != 0.0)):
        i = int(np.argmax(bad & (z2s != 0.0)))
        raise InvariantDomainError(
            f"point (z1={z1s[i]:.6g}, z2={z2s[i]:.6g}) lies below the separatrix "
            f"z1 = {SEPARATRIX_FACTOR} z2^2; characteristic backtrace exits Omega")


class InvariantMap:
    """On-demand evaluation of the invariant map and its derivative fields.

    Scalar evaluations are exact (adaptive embedded Runge-Kutta at the
    configured tolerances). Batch evaluations memoize results on a quantized
    (z1, z2) key so repeated field sweeps over near-constant regions are cheap.
    """

    CACHE_QUANTUM = 1e-6

    def __init__(self, config: CharODEConfig | None = None):
        self.config = config or CharODEConfig()
        self._cache = {}

    # -- characteristic backtracing -------------------------------------------------

    def _backtrace_arrays(self, z1s, z2s, family: int):
        """Feet and quadratures int_0^{z2} ds/sqrt(s^2+4 phi) for many points.

        Integrates all points simultaneously in the shared parameter
        sigma in [1, 0], z2(sigma) = sigma * z2_point.
        """
        z1s = np.asarray(z1s, dtype=float)
        z2s = np.asarray(z2s, dtype=float)
        _check_covered(z1s, z2s)
        n = z1s.size
        if n == 0:
            return np.empty(0), np.empty(0)
        sign = -1.0 if family == 1 else 1.0
        if np.all(z2s == 0.0):
            return z1s.copy(), np.zeros(n)

        def rhs(sigma, y):
            phi = np.maximum(y[:n], 1e-300)
            zz = sigma * z2s
            s = np.sqrt(zz * zz + 4.0 * phi)
            dphi = z2s * 0.5 * (zz + sign * s)
            dquad = z2s / s
            return np.concatenate([dphi, dquad])

        y0 = np.concatenate([z1s, np.zeros(n)])
        sol = solve_ivp(rhs, (1.0, 0.0), y0, method="RK45",
                        rtol=self.config.rel_tol, atol=self.config.abs_tol)
        if not sol.success:
            raise RuntimeError(f"characteristic backtrace failed: {sol.message}")
        feet = sol.y[:n, -1]
        quads = -sol.y[n:, -1]  # integrated 1 -> 0, flip to get int_0^{z2}
        if np.any(feet <= 0):
            raise InvariantDomainError("characteristic backtrace reached z1 <= 0")
        return feet, quads

    def _backtrace_point(self, z1: float, z2: float, family: int):
        if z2 == 0.0:
            return float(z1), 0.0
        feet, quads = self._backtrace_arrays(np.array([z1]), np.array([z2]), family)
        return float(feet[0]), float(quads[0])

    def _backtrace_cached(self, z1s, z2s, family: int):
        """Batch backtrace with memoization on quantized keys."""
        z1s = np.asarray(z1s, dtype=float).ravel()
        z2s = np.asarray(z2s, dtype=float).ravel()
        q = self.CACHE_QUANTUM
        feet = np.empty_like(z1s)
        quads = np.empty_like(z1s)
        missing = []
        keys = []
        for i in range(z1s.size):
            key = (family, round(z1s[i] / q), round(z2s[i] / q))
            keys.append(key)
            hit = self._cache.get(key)
            if hit is None:
                missing.append(i)
            else:
                feet[i], quads[i] = hit
        if missing:
            idx = np.array(missing)
            f_new, q_new = self._backtrace_arrays(z1s[idx], z2s[idx], family)
            for j, i in enumerate(missing):
                feet[i] = f_new[j]
                quads[i] = q_new[j]
                self._cache[keys[i]] = (f_new[j], q_new[j])
        return feet, quads

    # -- map, derivative fields, inverse --------------------------------------------

    def backtrace_foot(self, p: PhasePoint, family: int) -> float:
        foot, _ = self._backtrace_point(p.z1, p.z2, family)
        return foot

    def f_eval(self, p: PhasePoint, family: int) -> float:
        foot, quad = self._backtrace_point(p.z1, p.z2, family)
        if family == 1:
            return float(np.exp(foot + quad))
        return float(-np.exp(foot - quad))

    def w_eval(self, p: PhasePoint) -> InvariantPoint:
        foot1, _ = self._backtrace_point(p.z1, p.z2, 1)
        foot2, _ = self._backtrace_point(p.z1, p.z2, 2)
        return InvariantPoint(float(np.exp(foot1)), float(-np.exp(foot2)))

    def w_eval_many(self, z1s, z2s, cached: bool = True):
        """Vectorized map evaluation; returns (w1, w2) arrays of the input shape."""
        z1s = np.asarray(z1s, dtype=float)
        shape = z1s.shape
        z1f = z1s.ravel()
        z2f = np.asarray(z2s, dtype=float).ravel()
        back = self._backtrace_cached if cached else self._backtrace_arrays
        feet1, _ = back(z1f, z2f, 1)
        feet2, _ = back(z1f, z2f, 2)
        return np.exp(feet1).reshape(shape), -np.exp(feet2).reshape(shape)

    def grad_w(self, p: PhasePoint) -> np.ndarray:
        """Closed-form Jacobian of w at p (2x2, rows w1, w2)."""
        f1 = self.f_eval(p, 1)
        f2 = self.f_eval(p, 2)
        s = np.sqrt(p.z2 * p.z2 + 4.0 * p.z1)
        return np.array([
            [f1, f1 * 0.5 * (-p.z2 + s)],
            [f2, -f2 * 0.5 * (p.z2 + s)],
        ])

    def det_grad_w(self, p: PhasePoint) -> float:
        f1 = self.f_eval(p, 1)
        f2 = self.f_eval(p, 2)
        s = np.sqrt(p.z2 * p.z2 + 4.0 * p.z1)
        return float(-f1 * f2 * s)

    def invert_w(self, target: InvariantPoint, max_iter: int = 60,
                 residual_tol: float = 1e-9) -> PhasePoint:
        """Newton iteration with the closed-form Jacobian."""
        z1 = max(np.log(target.w1), 1e-6)
        z2 = 0.0
        tw = np.array([target.w1, target.w2])
        scale = 1.0 + np.max(np.abs(tw))
        for _ in range(max_iter):
            p = PhasePoint(z1, z2)
            w = self.w_eval(p)
            r = np.array([w.w1 - target.w1, w.w2 - target.w2])
            if np.max(np.abs(r)) <= residual_tol * scale:
                return p
            delta = np.linalg.solve(self.grad_w(p), r)
            lam = 1.0
            while lam > 1e-4:
                cand1 = z1 - lam * delta[0]
                cand2 = z2 - lam * delta[1]
                if cand1 > 0 and cand1 > SEPARATRIX_FACTOR * cand2 * cand2 * 1.0001:
                    z1, z2 = cand1, cand2
                    break
                lam *= 0.5
            else:
                raise InversionError(
                    f"inversion stalled at ({z1:.6g}, {z2:.6g}) for target "
                    f"({target.w1:.6g}, {target.w2:.6g})")
        raise InversionError(
            f"no convergence after {max_iter} iterations for target "
            f"({target.w1:.6g}, {target.w2:.6g})")

    def dlambda2_dw1(self, p: PhasePoint) -> float:
        """(z2 + sqrt(z2^2+4z1)) / (f1 * (z2^2+4z1)); strictly positive."""
        f1 = self.f_eval(p, 1)
        s2 = p.z2 * p.z2 + 4.0 * p.z1
        return float((p.z2 + np.sqrt(s2)) / (f1 * s2))

    def dlambda2_dw2(self, p: PhasePoint) -> float:
        """-z2 / (f2 * (z2^2+4z1)), by the chain rule through the inverse Jacobian."""
        f2 = self.f_eval(p, 2)
        s2 = p.z2 * p.z2 + 4.0 * p.z1
        return float(-p.z2 / (f2 * s2))

    # -- the transport multiplier table ---------------------------------------------

    def _family1_curve(self, foot: float, z2_lo: float, z2_hi: float):
        """Family-1 characteristic through (foot, 0) with the Psi quadrature.

        Returns a callable z2 -> (phi, psi) with psi(z2) = int_0^{z2}
        v/(v^2+4 phi(v)) dv, the exponent increment of the transport
        multiplier expressed in the curve parameter.
        """
        def rhs(z2, y):
            phi = max(y[0], 1e-300)
            s = np.sqrt(z2 * z2 + 4.0 * phi)
            return [0.5 * (z2 - s), z2 / (z2 * z2 + 4.0 * phi)]

        def near_separatrix(z2, y):
            # stop before the curve crosses into the region where the
            # family-2 backtrace (needed to evaluate w2) is undefined
            return y[0] - 1.05 * SEPARATRIX_FACTOR * z2 * z2
        near_separatrix.terminal = True
        near_separatrix.direction = -1.0

        sols = {}
        reached_hi = z2_hi
        for a, b in ((0.0, z2_hi), (0.0, z2_lo)):
            if b == a:
                continue
            events = near_separatrix if b > 0 else None
            sol = solve_ivp(rhs, (a, b), [foot, 0.0], method="RK45",
                            dense_output=True, events=events,
                            rtol=self.config.rel_tol, atol=self.config.abs_tol)
            sols[np.sign(b - a)] = sol
            if b > 0:
                reached_hi = float(sol.t[-1])

        def evaluate(z2):
            if z2 == 0.0:
                return foot, 0.0
            sol = sols[np.sign(z2)]
            y = sol.sol(z2)
            return float(y[0]), float(y[1])

        return evaluate, reached_hi

    def psi_table(self, p_ref: float, q_lo: float, q_hi: float, nodes: int = 65):
        """Tabulate Psi(v) on [q_lo, q_hi] for the invariant level w1 = p_ref.

        The curve {w1 = p_ref} is the family-1 characteristic through
        (log p_ref, 0), and along it dPsi/dz2 = z2/(z2^2 + 4 phi), so a single
        characteristic solve plus one batch w2 sweep yields the whole table.
        Psi is normalized to zero at the midpoint of [q_lo, q_hi]; only Psi
        differences are ever used.
        """
        if p_ref <= 1.0:
            raise ValueError("p_ref must exceed 1 (w1 = exp(foot) with foot > 0)")
        if not (q_lo <= q_hi < 0.0):
            raise ValueError("need q_lo <= q_hi < 0")
        foot = float(np.log(p_ref))

        def w2_at(curve, z2):
            phi, _ = curve(z2)
            return float(self.w_eval_many(np.array([phi]), np.array([z2]),
                                          cached=False)[1][0])

        span = 1.0
        while span <= self.config.max_z2_span:
            curve, z2_top = self._family1_curve(foot, -span, span)
            z2_top *= 0.999  # keep the endpoint strictly inside the covered region
            if w2_at(curve, -span) <= q_lo and w2_at(curve, z2_top) >= q_hi:
                break
            if z2_top < 0.999 * span and w2_at(curve, z2_top) < q_hi:
                raise RuntimeError(
                    f"w2 range [{q_lo}, {q_hi}] not attainable on the level set "
                    f"w1 = {p_ref} (separatrix reached at z2 = {z2_top:.4g})")
            span *= 1.6
        else:
            raise RuntimeError("could not bracket the requested w2 range")

        z2_nodes = np.linspace(-span, z2_top, nodes)
        phis = np.empty(nodes)
        psis = np.empty(nodes)
        for i, z2 in enumerate(z2_nodes):
            phis[i], psis[i] = curve(z2)
        _, v_nodes = self.w_eval_many(phis, z2_nodes, cached=False)
        # v is strictly increasing in z2 along the curve
        spline = CubicSpline(v_nodes, psis)
        mid = 0.5 * (q_lo + q_hi)
        offset = float(spline(mid))
        return PsiTable(spline, float(v_nodes[0]), float(v_nodes[-1]), offset)

    def image_bounds(self, P0, Q0, grid_samples: int = 12) -> ImageBounds:
        """Compact-image bounds for transported invariants built from initial data.

        delta0 is 99% of the minimum of d(lambda2)/d(w1) over the sampled
        invariant rectangle; m_phi/M_phi bound the transport multiplier
        exp(Psi difference) over the Q-range, minimized/maximized over
        sampled P-levels.
        """
        P0 = np.asarray(P0, dtype=float).ravel()
        Q0 = np.asarray(Q0, dtype=float).ravel()
        p_min, p_max = float(np.min(P0)), float(np.max(P0))
        q_min, q_max = float(np.min(Q0)), float(np.max(Q0))

        ps = np.linspace(p_min, p_max, grid_samples)
        qs = np.linspace(q_min, q_max, grid_samples)
        dmin = np.inf
        for p in ps:
            for qv in qs:
                z = self.invert_w(InvariantPoint(p, qv))
                dmin = min(dmin, self.dlambda2_dw1(z))
        delta0 = 0.99 * dmin

        if q_max - q_min < 1e-14:
            m_phi = M_phi = 1.0
        else:
            lo, hi = np.inf, -np.inf
            n_levels = min(5, grid_samples)
            for p in np.linspace(p_min, p_max, n_levels):
                table = self.psi_table(p, q_min, q_max)
                vals = table(np.linspace(q_min, q_max, 101))
                lo = min(lo, float(np.min(vals) - np.max(vals)))
                hi = max(hi, float(np.max(vals) - np.min(vals)))
            m_phi, M_phi = float(np.exp(lo)), float(np.exp(hi))
        return ImageBounds(p_min, p_max, q_min, q_max, delta0, m_phi, M_phi)


class PsiTable:
    """Cubic-spline antiderivative of the transport-multiplier integrand."""

    def __init__(self, spline, v_lo: float, v_hi: float, offset: float):
        self._spline = spline
        self.v_lo = v_lo
        self.v_hi = v_hi
        self._offset = offset

    def __call__(self, v):
        v = np.clip(v, self.v_lo, self.v_hi)
        return self._spline(v) - self._offset


class InvariantTable:
    """Bivariate-spline surrogate of the invariant map over a phase rectangle.

    Exact to spline accuracy (quartic in the node spacing); used for whole-field
    P/Q sweeps where per-cell ODE backtracing would dominate the runtime.
    """

    def __init__(self, imap: InvariantMap, z1_range, z2_range,
                 n1: int = 64, n2: int = 64):
        z1_lo, z1_hi = z1_range
        z2_lo, z2_hi = z2_range
        _check_covered(np.array([z1_lo, z1_lo]), np.array([z2_lo, z2_hi]))
        self.z1_lo, self.z1_hi = float(z1_lo), float(z1_hi)
        self.z2_lo, self.z2_hi = float(z2_lo), float(z2_hi)
        z1n = np.linspace(z1_lo, z1_hi, n1)
        z2n = np.linspace(z2_lo, z2_hi, n2)
        Z1, Z2 = np.meshgrid(z1n, z2n, indexing="ij")
        feet1, quads1 = imap._backtrace_arrays(Z1.ravel(), Z2.ravel(), 1)
        feet2, quads2 = imap._backtrace_arrays(Z1.ravel(), Z2.ravel(), 2)
        self._s1 = RectBivariateSpline(z1n, z2n, np.exp(feet1).reshape(n1, n2))
        self._s2 = RectBivariateSpline(z1n, z2n, -np.exp(feet2).reshape(n1, n2))
        self._f1 = RectBivariateSpline(z1n, z2n, np.exp(feet1 + quads1).reshape(n1, n2))
        self._f2 = RectBivariateSpline(z1n, z2n, -np.exp(feet2 - quads2).reshape(n1, n2))
        self.clipped = 0

    def pq(self, z1, z2):
        """(w1, w2) arrays; inputs clamped to the table box (clamp count kept)."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        out1 = np.clip(z1, self.z1_lo, self.z1_hi)
        out2 = np.clip(z2, self.z2_lo, self.z2_hi)
        self.clipped += int(np.sum((out1 != z1) | (out2 != z2)))
        return self._s1.ev(out1, out2), self._s2.ev(out1, out2)

    def _clamp(self, z1, z2):
        return (np.clip(np.asarray(z1, dtype=float), self.z1_lo, self.z1_hi),
                np.clip(np.asarray(z2, dtype=float), self.z2_lo, self.z2_hi))

    def f1(self, z1, z2):
        z1, z2 = self._clamp(z1, z2)
        return self._f1.ev(z1, z2)

    def f2(self, z1, z2):
        z1, z2 = self._clamp(z1, z2)
        return self._f2.ev(z1, z2)

    def dlambda2_dw1(self, z1, z2):
        z1c, z2c = self._clamp(z1, z2)
        s2 = z2c * z2c + 4.0 * z1c
        return (z2c + np.sqrt(s2)) / (self._f1.ev(z1c, z2c) * s2)


_DEFAULT_MAP = InvariantMap()


def backtrace_foot(p: PhasePoint, family: int, config: CharODEConfig | None = None) -> float:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.backtrace_foot(p, family)


def f_eval(p: PhasePoint, family: int, config: CharODEConfig | None = None) -> float:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.f_eval(p, family)


def w_eval(p: PhasePoint, config: CharODEConfig | None = None) -> InvariantPoint:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.w_eval(p)


def det_grad_w(p: PhasePoint, config: CharODEConfig | None = None) -> float:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.det_grad_w(p)


def invert_w(target: InvariantPoint, config: CharODEConfig | None = None) -> PhasePoint:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.invert_w(target)


def dlambda2_dw1(p: PhasePoint, config: CharODEConfig | None = None) -> float:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.dlambda2_dw1(p)


def dlambda2_dw2(p: PhasePoint, config: CharODEConfig | None = None) -> float:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.dlambda2_dw2(p)


def image_bounds(P0, Q0, grid_samples: int = 12,
                 config: CharODEConfig | None = None) -> ImageBounds:
    imap = InvariantMap(config) if config else _DEFAULT_MAP
    return imap.image_bounds(P0, Q0, grid_samples)
