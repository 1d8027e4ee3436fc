"""Gaussian fluctuation prefactor for the semiclassical approximation.

The determinant of the second-variation operator -d^2/ds^2 + U(s) with
Dirichlet conditions is phi(T), where phi solves the initial-value problem

    phi'' = U(s) phi,   phi(t) = 0,   phi'(t) = 1,

so a single forward integration replaces an eigenvalue product.  The
Van Vleck-Pauli-Morette identity 1/phi(T) = -d2S_cl/dy_start dy_end gives
an independent route to the same number and is used as a cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .classical import ClassicalSolution, EffectiveProblem, solve_classical_path
from .errors import FocalPointError

__all__ = [
    "FluctuationResult",
    "gelfand_yaglom",
    "curvature_along_path",
    "van_vleck_check",
]


@dataclass(frozen=True)
class FluctuationResult:
    """Solution of the fluctuation initial-value problem.

    Attributes
    ----------
    phi_T : float
        phi(T), the functional determinant up to the free-particle ratio.
    phi_samples : ndarray
        (M, 2) array of rows (s, phi(s)) on the integration grid.
    min_phi_interior : float
        Minimum of phi over the grid nodes in (t, T].  Positive for a
        valid Gaussian prefactor.
    """

    phi_T: float
    phi_samples: np.ndarray
    min_phi_interior: float


def _eval_u(U: Callable, s: np.ndarray) -> np.ndarray:
    """Evaluate U on an array, accepting scalar-only callables."""
    try:
        out = np.asarray(U(s), dtype=float)
        if out.shape == s.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(U(si)) for si in s], dtype=float)


def gelfand_yaglom(U: Callable, t: float, T: float, grid_points: int) -> FluctuationResult:
    """Integrate the fluctuation problem phi'' = U phi by fixed-step RK4.

    Parameters
    ----------
    U : callable
        Curvature U(s) along the classical path, finite on [t, T].
    t, T : float
        Interval, T > t.
    grid_points : int
        Grid samples, at least 64.  U is evaluated at nodes and midpoints.

    Returns
    -------
    FluctuationResult

    Raises
    ------
    FocalPointError
        phi reached zero or below on (t, T]; the Gaussian fluctuation
        integral is divergent there and the prefactor is meaningless.
    """
    if not (T > t):
        raise ValueError(f"require T > t, got t={t}, T={T}")
    if grid_points < 64:
        raise ValueError(f"grid_points must be at least 64, got {grid_points}")
    s = np.linspace(t, T, int(grid_points))
    h = s[1] - s[0]
    u_node = _eval_u(U, s)
    u_mid = _eval_u(U, s[:-1] + 0.5 * h)
    if not (np.isfinite(u_node).all() and np.isfinite(u_mid).all()):
        raise ValueError("U must be finite on [t, T]")
    phi = np.empty(len(s))
    phi[0] = 0.0
    p, q = 0.0, 1.0
    for i in range(len(s) - 1):
        u0, um, u1 = u_node[i], u_mid[i], u_node[i + 1]
        k1p, k1q = q, u0 * p
        p2, q2 = p + 0.5 * h * k1p, q + 0.5 * h * k1q
        k2p, k2q = q2, um * p2
        p3, q3 = p + 0.5 * h * k2p, q + 0.5 * h * k2q
        k3p, k3q = q3, um * p3
        p4, q4 = p + h * k3p, q + h * k3q
        k4p, k4q = q4, u1 * p4
        p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        q = q + h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        phi[i + 1] = p
    interior = phi[1:]
    if (interior <= 0.0).any():
        j = int(np.argmax(interior <= 0.0)) + 1
        raise FocalPointError(
            f"fluctuation solution crossed zero near s={s[j]:.6g}; "
            "Gaussian prefactor breaks down",
            s_cross=float(s[j]),
        )
    return FluctuationResult(
        phi_T=float(phi[-1]),
        phi_samples=np.stack([s, phi], axis=1),
        min_phi_interior=float(interior.min()),
    )


def curvature_along_path(p: EffectiveProblem, sol: ClassicalSolution) -> Callable:
    """U(s) evaluated on the classical path, as a callable of time.

    Uses the cubic Hermite interpolant of the solution, so the returned
    function is smooth between grid nodes and vectorized.
    """
    path = sol.interpolate()

    def U(s):
        return p.curvature(path(s), s)

    return U


def van_vleck_check(
    p: EffectiveProblem,
    sol: ClassicalSolution,
    fr: FluctuationResult,
    h: float | None = None,
) -> float:
    """Residual of the Van Vleck-Pauli-Morette identity.

    Re-solves the boundary-value problem at the four endpoint combinations
    (y_start +- h, y_end +- h) and forms the mixed second derivative of the
    classical action by central differences.  Returns

        | 1/phi(T) + d2S_cl / dy_start dy_end |,

    which vanishes for the exact determinant.  The velocity coupling rho
    adds no mixed endpoint curvature when it does not depend on the path
    value, so the identity applies to the action as evaluated.

    Parameters
    ----------
    h : float, optional
        Endpoint displacement.  Defaults to 1e-4 * (1 + |y_end - y_start|).
    """
    if h is None:
        h = 1e-4 * (1.0 + abs(p.y_end - p.y_start))
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    grid_points = len(sol.s)
    actions = {}
    for a in (+1, -1):
        for b in (+1, -1):
            pp = replace(p, y_start=p.y_start + a * h, y_end=p.y_end + b * h)
            # endpoint shifts move the velocity by about (a-b)h/(T-t)
            guess = sol.initial_velocity + (b - a) * h / (p.T - p.t)
            s_ab = solve_classical_path(pp, grid_points, v0_guess=guess)
            actions[(a, b)] = s_ab.action
    mixed = (
        actions[(1, 1)] - actions[(1, -1)] - actions[(-1, 1)] + actions[(-1, -1)]
    ) / (4.0 * h * h)
    return float(abs(1.0 / fr.phi_T + mixed))
