"""Classical-path boundary-value solver and action evaluation.

The Euler-Lagrange problem for the effective Lagrangian

    L = y'^2 / 2 + rho(y, s) y' + V(y, s)

in Euclidean time is y'' = dV/dy - drho/ds, solved as a two-point boundary
value problem by shooting on the initial velocity.  The Newton derivative
comes from the variational (tangent) equation integrated jointly with the
state, which makes it the exact Jacobian of the discrete Runge-Kutta flow;
the same tangent is the Gelfand-Yaglom solution along the discrete path.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import MultipleSolutionsError, NonConvergenceError

__all__ = [
    "EffectiveProblem",
    "ClassicalSolution",
    "solve_classical_path",
    "evaluate_action",
]

_EPS = float(np.finfo(float).eps)
_Y_CAP = 1e8  # trajectories beyond this are treated as escaped during scans
_MAX_NEWTON = 50
_SCAN_POINTS = 81
_FLOOR_SAFETY = 8.0


@dataclass(frozen=True)
class EffectiveProblem:
    """Data of one Euler-Lagrange boundary-value problem.

    Parameters
    ----------
    V, V_y, V_yy : callable
        Potential V(y, s) and its first and second y-derivatives,
        vectorized in y.
    t, T : float
        Time interval, T > t.
    y_start, y_end : float
        Dirichlet boundary data.
    rho : callable, optional
        Velocity-coupling weight rho(y, s).  When present, ``rho_s`` (its
        s-derivative) is required; ``rho_ys`` (the mixed derivative) may be
        omitted when it vanishes.
    """

    V: Callable
    V_y: Callable
    V_yy: Callable
    t: float
    T: float
    y_start: float
    y_end: float
    rho: Callable | None = None
    rho_s: Callable | None = None
    rho_ys: Callable | None = None

    def __post_init__(self):
        if not (self.T > self.t):
            raise ValueError(f"require T > t, got t={self.t}, T={self.T}")
        for name in ("V", "V_y", "V_yy"):
            if not callable(getattr(self, name)):
                raise ValueError(f"{name} must be callable")
        if self.rho is not None and self.rho_s is None:
            raise ValueError("rho_s is required when rho is given")

    def force(self, y, s):
        """Right-hand side of y'' = dV/dy - drho/ds."""
        g = self.V_y(y, s)
        if self.rho_s is not None:
            g = g - self.rho_s(y, s)
        return g

    def curvature(self, y, s):
        """U(s) = d2V/dy2 - d2rho/dyds along a path value y."""
        u = self.V_yy(y, s)
        if self.rho_ys is not None:
            u = u - self.rho_ys(y, s)
        return u

    def lagrangian(self, y, w, s):
        ell = 0.5 * w * w + self.V(y, s)
        if self.rho is not None:
            ell = ell + self.rho(y, s) * w
        return ell


@dataclass(frozen=True)
class ClassicalSolution:
    """A converged classical path on a uniform grid.

    Attributes
    ----------
    s, y, ydot : ndarray
        Grid times, path values, and path velocities.
    action : float
        Value of the classical action along the samples.
    initial_velocity : float
        Shooting parameter found.
    energy : float or None
        First integral ydot^2/2 - V(y) for time-homogeneous problems
        without a rho term, else None.
    residual : float
        Terminal boundary residual |y(T) - y_end| actually achieved.
    floor_limited : bool
        True when the residual met only the conditioning floor of the
        shooting map (long horizons with exponentially growing tangents)
        rather than the requested tolerance.
    """

    s: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    action: float
    initial_velocity: float
    energy: float | None
    residual: float
    floor_limited: bool

    @property
    def samples(self) -> np.ndarray:
        """Samples as an (M, 3) array of rows (s, y, ydot)."""
        return np.stack([self.s, self.y, self.ydot], axis=1)

    def interpolate(self) -> CubicHermiteSpline:
        """Cubic Hermite interpolant through (s, y) with slopes ydot."""
        return CubicHermiteSpline(self.s, self.y, self.ydot)


def _composite_simpson(vals: np.ndarray, h: float, axis: int = 0) -> np.ndarray | float:
    """Composite Simpson rule on a uniform grid.

    Handles an odd number of intervals by closing with the 3/8 rule, which
    preserves fourth-order accuracy.
    """
    vals = np.asarray(vals, dtype=float)
    n = vals.shape[axis] - 1
    if n < 3:
        raise ValueError("need at least 4 samples for the composite rule")
    v = np.moveaxis(vals, axis, 0)
    if n % 2 == 0:
        core, tail = v, 0.0
    else:
        core = v[: n - 2]
        tail = 3.0 * h / 8.0 * (v[n - 3] + 3.0 * v[n - 2] + 3.0 * v[n - 1] + v[n])
    m = core.shape[0] - 1
    main = h / 3.0 * (core[0] + core[-1] + 4.0 * core[1:-1:2].sum(axis=0) + 2.0 * core[2:-2:2].sum(axis=0))
    out = main + tail
    return float(out) if np.ndim(out) == 0 else out


def _rk4_terminal(p: EffectiveProblem, s: np.ndarray, y0: float, v0: np.ndarray):
    """Terminal state of the joint (path, tangent) integration.

    Returns (yT, wT, eT, min_e, escaped) where e is the tangent dy/dv0 with
    e(t) = 0, e'(t) = 1, and min_e tracks the minimum of e over grid nodes
    past the start (the tangent doubles as the fluctuation solution).
    """
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    y = np.full_like(v0, float(y0))
    w = v0.copy()
    e = np.zeros_like(v0)
    d = np.ones_like(v0)
    esc = np.zeros(v0.shape, dtype=bool)
    min_e = np.full_like(v0, np.inf)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(len(s) - 1):
            h = s[i + 1] - s[i]
            sm = s[i] + 0.5 * h
            k1y, k1w = w, p.force(y, s[i])
            k1e, k1d = d, p.curvature(y, s[i]) * e
            y2 = y + 0.5 * h * k1y
            k2y, k2w = w + 0.5 * h * k1w, p.force(y2, sm)
            e2 = e + 0.5 * h * k1e
            k2e, k2d = d + 0.5 * h * k1d, p.curvature(y2, sm) * e2
            y3 = y + 0.5 * h * k2y
            k3y, k3w = w + 0.5 * h * k2w, p.force(y3, sm)
            e3 = e + 0.5 * h * k2e
            k3e, k3d = d + 0.5 * h * k2d, p.curvature(y3, sm) * e3
            y4 = y + h * k3y
            k4y, k4w = w + h * k3w, p.force(y4, s[i + 1])
            e4 = e + h * k3e
            k4e, k4d = d + h * k3d, p.curvature(y4, s[i + 1]) * e4
            yn = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            wn = w + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
            en = e + h / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
            dn = d + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
            bad = ~np.isfinite(yn) | (np.abs(yn) > _Y_CAP)
            if bad.any():
                with np.errstate(invalid="ignore"):
                    fallback = np.where(np.isfinite(yn), np.clip(yn, -_Y_CAP, _Y_CAP),
                                        np.where(y >= 0.0, _Y_CAP, -_Y_CAP))
                yn = np.where(bad & ~esc, fallback, np.where(esc, y, yn))
                wn = np.where(bad | esc, w, wn)
                en = np.where(bad | esc, e, en)
                dn = np.where(bad | esc, d, dn)
                esc = esc | bad
            y, w, e, d = yn, wn, en, dn
            min_e = np.minimum(min_e, np.where(np.isfinite(e), e, -np.inf))
    return y, w, e, min_e, esc


def _rk4_full(p: EffectiveProblem, s: np.ndarray, y0: float, v0: np.ndarray):
    """Joint integration storing all samples; used once per converged solve.

    Returns arrays of shape (M, K): path, velocity, tangent, tangent rate.
    """
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    M, K = len(s), v0.size
    Y = np.empty((M, K))
    W = np.empty((M, K))
    E = np.empty((M, K))
    D = np.empty((M, K))
    Y[0], W[0], E[0], D[0] = float(y0), v0, 0.0, 1.0
    y, w, e, d = Y[0].copy(), W[0].copy(), E[0].copy(), D[0].copy()
    for i in range(M - 1):
        h = s[i + 1] - s[i]
        sm = s[i] + 0.5 * h
        k1y, k1w = w, p.force(y, s[i])
        k1e, k1d = d, p.curvature(y, s[i]) * e
        y2 = y + 0.5 * h * k1y
        k2y, k2w = w + 0.5 * h * k1w, p.force(y2, sm)
        e2 = e + 0.5 * h * k1e
        k2e, k2d = d + 0.5 * h * k1d, p.curvature(y2, sm) * e2
        y3 = y + 0.5 * h * k2y
        k3y, k3w = w + 0.5 * h * k2w, p.force(y3, sm)
        e3 = e + 0.5 * h * k2e
        k3e, k3d = d + 0.5 * h * k2d, p.curvature(y3, sm) * e3
        y4 = y + h * k3y
        k4y, k4w = w + h * k3w, p.force(y4, s[i + 1])
        e4 = e + h * k3e
        k4e, k4d = d + h * k3d, p.curvature(y4, s[i + 1]) * e4
        y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        w = w + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        e = e + h / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
        d = d + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        Y[i + 1], W[i + 1], E[i + 1], D[i + 1] = y, w, e, d
    return Y, W, E, D


def _conditioning_floor(eT, v, y_end):
    """Smallest terminal residual resolvable by perturbing v0 in doubles."""
    return _FLOOR_SAFETY * _EPS * (np.abs(eT) * (1.0 + np.abs(v)) + 1.0 + np.abs(y_end))


def _newton_batch(p, s, y0, y_end, v0, tol, max_iter=_MAX_NEWTON):
    """Damped Newton iteration on the shooting residual, vectorized over nodes.

    Returns (v, absF, floor_limited).  Raises NonConvergenceError when any
    node fails to reach max(tol*(1+|y_end|), conditioning floor).
    """
    y_end = np.atleast_1d(np.asarray(y_end, dtype=float))
    v = np.atleast_1d(np.asarray(v0, dtype=float)).copy()
    tolv = tol * (1.0 + np.abs(y_end))
    yT, _, eT, _, _ = _rk4_terminal(p, s, y0, v)
    F = yT - y_end
    lam = np.ones_like(v)
    for _ in range(max_iter):
        floor = _conditioning_floor(eT, v, y_end)
        done = np.abs(F) < np.maximum(tolv, floor)
        if done.all():
            break
        dF = np.where(np.abs(eT) > 1e-300, eT, np.copysign(1e-300, eT))
        v_prop = np.where(done, v, v - lam * F / dF)
        yT_n, _, eT_n, _, _ = _rk4_terminal(p, s, y0, v_prop)
        F_n = yT_n - y_end
        improved = (np.abs(F_n) <= np.abs(F)) | done
        v = np.where(improved, v_prop, v)
        F = np.where(improved, F_n, F)
        eT = np.where(improved, eT_n, eT)
        lam = np.where(improved, np.minimum(1.0, 2.0 * lam), 0.5 * lam)
        if (lam < 2.0**-12).all():
            break
    floor = _conditioning_floor(eT, v, y_end)
    ok = np.abs(F) < np.maximum(tolv, floor)
    if not ok.all():
        j = int(np.argmax(np.abs(F) * ~ok))
        raise NonConvergenceError(
            f"shooting failed at boundary value y_end={y_end[j]:.6g}: "
            f"residual {abs(F[j]):.3e} after {max_iter} Newton steps",
            residual=float(abs(F[j])),
        )
    floor_limited = ok & ~(np.abs(F) < tolv)
    return v, np.abs(F), floor_limited


def _scan_candidates(p, s, y0, y_end, tol):
    """Bracket scan over initial velocities; returns converged velocities."""
    dy = y_end - y0
    dt = p.T - p.t
    scale = 10.0 * (abs(dy) / dt + 1.0)
    grid = np.linspace(-scale, scale, _SCAN_POINTS)
    yT, _, _, _, _ = _rk4_terminal(p, s, y0, grid)
    F = yT - y_end
    finite = np.isfinite(F)
    candidates = []
    exact = np.nonzero(finite & (F == 0.0))[0]
    candidates.extend(grid[j] for j in exact)
    sign = np.sign(F)
    flips = np.nonzero(finite[:-1] & finite[1:] & (sign[:-1] * sign[1:] < 0))[0]
    lo, hi = grid[flips].copy(), grid[flips + 1].copy()
    Flo = F[flips].copy()
    for _ in range(24):  # batch bisection narrows every bracket
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        yT_m, _, _, _, _ = _rk4_terminal(p, s, y0, mid)
        Fm = yT_m - y_end
        left = Flo * Fm <= 0.0
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
        Flo = np.where(left, Flo, Fm)
    candidates.extend(0.5 * (lo + hi))
    if not candidates:
        # no bracket: polish from the least-bad scan point
        j = int(np.nanargmin(np.where(finite, np.abs(F), np.nan)))
        candidates.append(grid[j])
    converged = []
    for c in candidates:
        try:
            v, _, _ = _newton_batch(p, s, y0, np.array([y_end]), np.array([c]), tol)
        except NonConvergenceError:
            continue
        converged.append(float(v[0]))
    converged.sort()
    unique = []
    for v in converged:
        if not unique or abs(v - unique[-1]) > 1e-6 * (1.0 + abs(v)):
            unique.append(v)
    return unique


def _is_time_homogeneous(p: EffectiveProblem, y_probe: np.ndarray) -> bool:
    if p.rho is not None:
        return False
    ts = (p.t, 0.5 * (p.t + p.T), p.T)
    for y in y_probe:
        vals = [float(p.V(y, s)) for s in ts]
        scale = 1.0 + max(abs(v) for v in vals)
        if max(vals) - min(vals) > 1e-10 * scale:
            return False
    return True


def _build_solution(p, s, v0, tol):
    Y, W, E, D = _rk4_full(p, s, p.y_start, np.array([v0]))
    y, w = Y[:, 0], W[:, 0]
    residual = abs(y[-1] - p.y_end)
    eT = E[-1, 0]
    floor = float(_conditioning_floor(np.array([eT]), np.array([v0]), np.array([p.y_end]))[0])
    floor_limited = residual >= tol * (1.0 + abs(p.y_end)) and residual < max(
        tol * (1.0 + abs(p.y_end)), floor
    )
    probe = np.linspace(y.min(), y.max(), 3)
    energy = None
    if _is_time_homogeneous(p, probe):
        energy = float(0.5 * v0 * v0 - p.V(p.y_start, p.t))
    ell = np.asarray(p.lagrangian(y, w, s), dtype=float)
    action = float(_composite_simpson(ell, float(s[1] - s[0])))
    return ClassicalSolution(
        s=s,
        y=y,
        ydot=w,
        action=action,
        initial_velocity=float(v0),
        energy=energy,
        residual=float(residual),
        floor_limited=bool(floor_limited),
    )


def solve_classical_path(
    p: EffectiveProblem,
    grid_points: int,
    v0_guess: float | None = None,
    tol: float = 1e-10,
) -> ClassicalSolution:
    """Solve the two-point boundary-value problem by shooting.

    Integrates y'' = dV/dy - drho/ds with classic fourth-order Runge-Kutta
    on a fixed grid of ``grid_points`` samples and iterates the initial
    velocity with a damped Newton method whose derivative comes from the
    variational equation.  Convergence requires the terminal residual to
    fall below ``tol * (1 + |y_end|)``; on long horizons where the tangent
    grows exponentially, the achievable floor is eps * |dy_T/dv0| and the
    solution is flagged ``floor_limited`` instead of failing.

    Parameters
    ----------
    p : EffectiveProblem
    grid_points : int
        Number of grid samples, at least 64.
    v0_guess : float, optional
        Warm start for the initial velocity.  When it converges, the
        bracket scan is skipped.
    tol : float
        Base terminal residual tolerance.

    Raises
    ------
    NonConvergenceError
        No converged velocity after the bracket scan and Newton damping.
    MultipleSolutionsError
        Two or more distinct converged velocities; all solutions attached.
    """
    if grid_points < 64:
        raise ValueError(f"grid_points must be at least 64, got {grid_points}")
    s = np.linspace(p.t, p.T, int(grid_points))
    if v0_guess is not None:
        try:
            v, _, _ = _newton_batch(
                p, s, p.y_start, np.array([p.y_end]), np.array([float(v0_guess)]), tol
            )
            return _build_solution(p, s, float(v[0]), tol)
        except NonConvergenceError:
            pass
    roots = _scan_candidates(p, s, p.y_start, p.y_end, tol)
    if not roots:
        yT, _, _, _, _ = _rk4_terminal(p, s, p.y_start, np.array([0.0]))
        raise NonConvergenceError(
            f"no converged shooting velocity for y_end={p.y_end}; "
            f"residual from rest start {abs(float(yT[0]) - p.y_end):.3e}",
            residual=float(abs(float(yT[0]) - p.y_end)),
        )
    if len(roots) > 1:
        sols = [_build_solution(p, s, v, tol) for v in roots]
        raise MultipleSolutionsError(
            f"found {len(roots)} distinct classical solutions "
            f"(initial velocities {roots}); caller decides how to combine them",
            solutions=sols,
        )
    return _build_solution(p, s, roots[0], tol)


def evaluate_action(p: EffectiveProblem, sol: ClassicalSolution) -> float:
    """Classical action along a solution by composite Simpson integration.

    The samples must live on p's interval on a uniform grid; relative
    accuracy is fourth order in the grid spacing.
    """
    s = sol.s
    if abs(s[0] - p.t) > 1e-12 * (1.0 + abs(p.t)) or abs(s[-1] - p.T) > 1e-12 * (
        1.0 + abs(p.T)
    ):
        raise ValueError("solution grid does not span the problem interval")
    h = s[1] - s[0]
    if not np.allclose(np.diff(s), h, rtol=1e-9, atol=1e-12):
        raise ValueError("solution grid is not uniform")
    ell = p.lagrangian(sol.y, sol.ydot, s)
    return float(_composite_simpson(np.asarray(ell, dtype=float), float(h)))
