"""Closed-form Gaussian kernels and conditional expectations.

These expressions are exact for free, harmonic, and linear-drift weightings
of Brownian paths, and serve as golden references for every numerical
component in the package.  History factors accumulated before t0 are not
included; each kernel is a pure function of its endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .models import Curve

__all__ = [
    "KernelQuery",
    "free_kernel",
    "ho_kernel_fixed",
    "ho_kernel_free",
    "drift_expectation",
    "measure_change_kernel",
]

# below this value of omega*(tf-t0) the sinh/cosh ratios switch to series
# expansions to avoid 0/0 at the free-particle boundary
_SERIES_EPS = 1e-6


@dataclass(frozen=True)
class KernelQuery:
    """Endpoint data for a kernel evaluation.

    Parameters
    ----------
    x0, t0 : float
        Start point and time.
    xf, tf : float
        End point and time, tf > t0.
    omega : float, optional
        Harmonic frequency for the oscillator kernels, nonnegative.
    rho : Curve or callable, optional
        Time-dependent drift weight rho(t) for ``drift_expectation``.
    """

    x0: float
    t0: float
    xf: float
    tf: float
    omega: float | None = None
    rho: Curve | Callable | None = None

    def __post_init__(self):
        if not (self.tf > self.t0):
            raise ValueError(f"require tf > t0, got t0={self.t0}, tf={self.tf}")
        if self.omega is not None and self.omega < 0.0:
            raise ValueError(f"omega must be nonnegative, got {self.omega}")

    @property
    def dt(self) -> float:
        return self.tf - self.t0


def free_kernel(q: KernelQuery) -> float:
    """Brownian transition density between the query endpoints.

    Returns (2 pi (tf-t0))^{-1/2} exp(-(xf-x0)^2 / 2(tf-t0)); integrates
    to one over xf.
    """
    d = q.xf - q.x0
    return math.exp(-d * d / (2.0 * q.dt)) / math.sqrt(2.0 * math.pi * q.dt)


def _sinh_over_omega(omega: float, dt: float) -> float:
    """sinh(omega*dt)/omega, finite as omega -> 0."""
    wd = omega * dt
    if wd < _SERIES_EPS:
        return dt * (1.0 + wd * wd / 6.0)
    return math.sinh(wd) / omega


def ho_kernel_fixed(q: KernelQuery) -> float:
    """Fixed-endpoint harmonic-oscillator kernel.

    Value of sqrt(omega / 2 pi sinh(omega dt)) *
    exp(-(omega/2) [(x0^2+xf^2) cosh(omega dt) - 2 x0 xf] / sinh(omega dt)).
    Reduces to the free kernel as omega -> 0.
    """
    if q.omega is None:
        raise ValueError("ho_kernel_fixed requires omega")
    s_w = _sinh_over_omega(q.omega, q.dt)
    c = math.cosh(q.omega * q.dt)
    expo = ((q.x0 * q.x0 + q.xf * q.xf) * c - 2.0 * q.x0 * q.xf) / (2.0 * s_w)
    return math.exp(-expo) / math.sqrt(2.0 * math.pi * s_w)


def ho_kernel_free(q: KernelQuery) -> float:
    """Free-endpoint harmonic expectation from start point x0.

    Value of cosh(omega dt)^{-1/2} exp(-(omega x0^2 / 2) tanh(omega dt)).
    Equals the xf-integral of ``ho_kernel_fixed``.  The expression is
    regular at omega = 0, where it equals one.
    """
    if q.omega is None:
        raise ValueError("ho_kernel_free requires omega")
    wd = q.omega * q.dt
    return math.exp(-0.5 * q.omega * q.x0 * q.x0 * math.tanh(wd)) / math.sqrt(
        math.cosh(wd)
    )


def _rho_integrals(q: KernelQuery) -> tuple[float, float]:
    """(int rho dt, int rho^2 dt) over [t0, tf]."""
    rho = q.rho
    if isinstance(rho, Curve):
        rho.require_domain(q.t0, q.tf)
        R = rho.integral(q.t0, q.tf)
        pts = rho.interior_knots(q.t0, q.tf)
        Q, _ = quad(
            lambda s: rho(s) ** 2, q.t0, q.tf,
            points=pts if pts.size else None, epsrel=1e-12, epsabs=1e-15, limit=200,
        )
        return R, float(Q)
    R, _ = quad(rho, q.t0, q.tf, epsrel=1e-12, epsabs=1e-15, limit=200)
    Q, _ = quad(lambda s: rho(s) ** 2, q.t0, q.tf, epsrel=1e-12, epsabs=1e-15, limit=200)
    return float(R), float(Q)


def drift_expectation(q: KernelQuery, fixed_endpoint: bool) -> float:
    """Expectation of exp(-int rho(t) dx_t) over Brownian paths.

    With the endpoint free the well-known result exp(int rho^2 dt / 2) is
    returned.  With the endpoint fixed at xf the value is

        (2 pi dt)^{-1/2} exp(-(xf - x0 + int rho dt)^2 / 2 dt
                             + int rho^2 dt / 2).

    The sign of the mean shift follows from completing the square in the
    Gaussian weight: a positive rho penalizes upward endpoint displacement,
    so the density maximum sits at xf = x0 - int rho dt.  For constant rho
    this reproduces the exact identity
    E[e^{-rho (xf - x0)} delta(x(tf) - xf)] = e^{-rho d} P_free(d).
    """
    if q.rho is None:
        raise ValueError("drift_expectation requires rho")
    R, Q = _rho_integrals(q)
    if not fixed_endpoint:
        return math.exp(0.5 * Q)
    d = q.xf - q.x0
    return math.exp(-(d + R) ** 2 / (2.0 * q.dt) + 0.5 * Q) / math.sqrt(
        2.0 * math.pi * q.dt
    )


def measure_change_kernel(y0: float, t0: float, yf: float, tf: float, alpha: float) -> float:
    """Transition kernel of the mean-reverting measure change.

    Returns sqrt(alpha / 2 pi sinh(alpha dt)) *
    exp(-alpha (yhat_f - yhat_0)^2 / 2 sinh(alpha dt)) with the scaled
    endpoints yhat_f = yf e^{alpha dt / 2} and yhat_0 = y0 e^{-alpha dt / 2}.
    Integrates to one over the scaled endpoint variable yhat_f, which is the
    identity fixing the e^{alpha dt / 2} normalization factor of the pricer.
    """
    if not (tf > t0):
        raise ValueError(f"require tf > t0, got t0={t0}, tf={tf}")
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    dt = tf - t0
    s_a = _sinh_over_omega(alpha, dt)
    yhf = yf * math.exp(0.5 * alpha * dt)
    yh0 = y0 * math.exp(-0.5 * alpha * dt)
    d = yhf - yh0
    return math.exp(-d * d / (2.0 * s_a)) / math.sqrt(2.0 * math.pi * s_a)
