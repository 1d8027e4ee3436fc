"""Short-rate model definitions, rate maps, and state-root solving.

Two model families are supported.  A linear Gaussian family with
time-dependent coefficient curves (``HullWhiteParams``), and a family of
positive models obtained by mapping an Ornstein-Uhlenbeck state through a
function f, with the short rate r_t = r0 * f(X_t, t) and f(0, 0) = 1
(``MappedModel``).  A third form specifies the short rate directly as a
potential of a Brownian state, r_t = V(W_t, t) (``PotentialModel``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, ClassVar

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import NoRootError

__all__ = [
    "Curve",
    "HullWhiteParams",
    "RateMap",
    "LinearMap",
    "ExponentialMap",
    "QuadraticMap",
    "CustomMap",
    "MappedModel",
    "PotentialModel",
    "StateRoots",
    "eta",
    "solve_state_roots",
    "as_curve",
]


@dataclass(frozen=True)
class Curve:
    """Piecewise-linear curve t -> value on [times[0], times[-1]].

    A single-knot curve is constant and is treated as defined on
    [times[0], infinity).

    Parameters
    ----------
    times : array_like
        Knot abscissae, strictly increasing, finite.
    values : array_like
        Knot ordinates, same length as ``times``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if t.ndim != 1 or v.ndim != 1:
            raise ValueError("curve knots must be one-dimensional")
        if t.size == 0 or t.size != v.size:
            raise ValueError(
                f"times and values must have equal nonzero length, got {t.size} and {v.size}"
            )
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("curve knots must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float) -> "Curve":
        """Constant curve defined on [0, infinity)."""
        return cls(np.array([0.0]), np.array([float(value)]))

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return math.inf if self.times.size == 1 else float(self.times[-1])

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def require_domain(self, a: float, b: float) -> None:
        """Raise unless [a, b] lies inside the curve's domain."""
        if a < self.t_min - 1e-12 or b > self.t_max + 1e-12:
            raise ValueError(
                f"curve defined on [{self.t_min}, {self.t_max}] does not cover [{a}, {b}]"
            )

    def __call__(self, t):
        if self.times.size == 1:
            if np.ndim(t) == 0:
                return float(self.values[0])
            return np.full(np.shape(t), self.values[0])
        out = np.interp(t, self.times, self.values)
        return float(out) if np.ndim(t) == 0 else out

    def interior_knots(self, a: float, b: float) -> np.ndarray:
        """Knot locations strictly inside (a, b)."""
        t = self.times
        return t[(t > a) & (t < b)]

    def integral(self, a: float, b: float) -> float:
        """Exact integral over [a, b]; the integrand is piecewise linear."""
        if b < a:
            raise ValueError(f"integration bounds out of order: [{a}, {b}]")
        self.require_domain(a, b)
        if self.times.size == 1:
            return float(self.values[0]) * (b - a)
        pts = np.concatenate(([a], self.interior_knots(a, b), [b]))
        vals = self(pts)
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)))

    def derivative(self, t: float) -> float:
        """Right-continuous slope at t; zero for constant curves."""
        if self.times.size == 1:
            return 0.0
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), self.times.size - 2)
        return float(
            (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
        )


def as_curve(obj) -> Curve:
    """Coerce a float or a Curve into a Curve."""
    if isinstance(obj, Curve):
        return obj
    if np.ndim(obj) == 0:
        return Curve.constant(float(obj))
    raise TypeError(f"cannot interpret {obj!r} as a curve")


@dataclass(frozen=True)
class HullWhiteParams:
    """Coefficient curves for dr = [theta(t) - alpha(t) r] dt + sigma(t) dW.

    Parameters
    ----------
    sigma : Curve or float
        Volatility, nonnegative over its knots.
    theta : Curve or float
        Drift level.
    alpha : Curve or float
        Mean-reversion speed.

    Notes
    -----
    Scalars are promoted to constant curves.  Every curve must cover t = 0,
    and the common horizon ``t_max`` (the smallest of the three curve
    horizons) must be positive.  sigma = 0 is allowed so the deterministic
    limit can be expressed.
    """

    sigma: Curve
    theta: Curve
    alpha: Curve

    def __post_init__(self):
        for name in ("sigma", "theta", "alpha"):
            object.__setattr__(self, name, as_curve(getattr(self, name)))
        if np.any(self.sigma.values < 0.0):
            raise ValueError("sigma(t) must be nonnegative at every knot")
        for name in ("sigma", "theta", "alpha"):
            if getattr(self, name).t_min > 0.0:
                raise ValueError(f"{name} curve must be defined at t=0")
        if self.t_max <= 0.0:
            raise ValueError("curves must extend beyond t=0")

    @classmethod
    def constant(cls, sigma: float, theta: float, alpha: float) -> "HullWhiteParams":
        return cls(Curve.constant(sigma), Curve.constant(theta), Curve.constant(alpha))

    @property
    def t_max(self) -> float:
        return min(self.sigma.t_max, self.theta.t_max, self.alpha.t_max)

    def is_constant(self) -> bool:
        return (
            self.sigma.is_constant()
            and self.theta.is_constant()
            and self.alpha.is_constant()
        )


class RateMap:
    """Map f(x, t) with f(0, 0) = 1 defining the short rate r = r0 * f(X, t).

    Subclasses provide ``f`` and its first and second x-derivatives as
    vectorized callables.
    """

    kind: ClassVar[str] = "abstract"

    def f(self, x, t):
        raise NotImplementedError

    def f_x(self, x, t):
        raise NotImplementedError

    def f_xx(self, x, t):
        raise NotImplementedError


@dataclass(frozen=True)
class LinearMap(RateMap):
    """f(x) = 1 + slope * x.  Exact Gaussian pricing; the rate may go negative."""

    slope: float
    kind: ClassVar[str] = "linear"

    def __post_init__(self):
        if self.slope == 0.0 or not math.isfinite(self.slope):
            raise ValueError("slope must be finite and nonzero")

    def f(self, x, t):
        return 1.0 + self.slope * x

    def f_x(self, x, t):
        return self.slope * np.ones_like(np.asarray(x, dtype=float))

    def f_xx(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ExponentialMap(RateMap):
    """f(x) = exp(x), the lognormal (Black-Karasinski) map."""

    kind: ClassVar[str] = "exp"

    def f(self, x, t):
        return np.exp(x)

    def f_x(self, x, t):
        return np.exp(x)

    def f_xx(self, x, t):
        return np.exp(x)


@dataclass(frozen=True)
class QuadraticMap(RateMap):
    """f(x) = 1 + b*x + a*x^2 with a > 0 and b^2 < 4a.

    The positivity condition keeps r0 * f strictly positive for all real x.
    """

    a: float
    b: float = 0.0
    kind: ClassVar[str] = "quadratic"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("a and b must be finite")
        if self.a <= 0.0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.b * self.b >= 4.0 * self.a:
            raise ValueError(
                f"strict positivity requires b^2 < 4a, got b^2={self.b**2}, 4a={4 * self.a}"
            )

    def f(self, x, t):
        return 1.0 + self.b * x + self.a * x * x

    def f_x(self, x, t):
        return self.b + 2.0 * self.a * x

    def f_xx(self, x, t):
        return 2.0 * self.a * np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CustomMap(RateMap):
    """User-supplied map with analytic first and second x-derivatives.

    No automatic differentiation is attempted; all three callables must be
    provided and f must satisfy f(0, 0) = 1.
    """

    f_impl: Callable
    f_x_impl: Callable
    f_xx_impl: Callable
    kind: ClassVar[str] = "custom"

    def __post_init__(self):
        for name in ("f_impl", "f_x_impl", "f_xx_impl"):
            if not callable(getattr(self, name)):
                raise ValueError(f"{name} must be callable")
        f00 = float(self.f_impl(0.0, 0.0))
        if abs(f00 - 1.0) > 1e-9:
            raise ValueError(f"map must satisfy f(0,0)=1, got {f00}")

    def f(self, x, t):
        return self.f_impl(x, t)

    def f_x(self, x, t):
        return self.f_x_impl(x, t)

    def f_xx(self, x, t):
        return self.f_xx_impl(x, t)


@dataclass(frozen=True)
class MappedModel:
    """Ornstein-Uhlenbeck state mapped to a short rate.

    The state follows dX = sigma dW + (theta - alpha X) dt with X_0 = 0 and
    the short rate is r_t = r0 * f(X_t, t).

    Parameters
    ----------
    sigma : float
        State volatility, positive.
    theta : float
        State drift level.
    alpha : float
        Mean-reversion speed, positive.  Time-dependent alpha is not
        supported in this family.
    r0 : float
        Initial short rate, positive.
    map : RateMap
        The rate map f.
    """

    sigma: float
    theta: float
    alpha: float
    r0: float
    map: RateMap

    def __post_init__(self):
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (self.r0 > 0.0 and math.isfinite(self.r0)):
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if not isinstance(self.map, RateMap):
            raise ValueError("map must be a RateMap instance")

    @property
    def nu(self) -> float:
        """Drift in Brownian units, theta / sigma."""
        return self.theta / self.sigma

    @property
    def r_star(self) -> float:
        """Rate scale r0 * exp(theta / alpha) of the centered state."""
        return self.r0 * math.exp(self.theta / self.alpha)

    def short_rate(self, x_state, t):
        """Short rate r = r0 * f(X, t) at state value(s) X."""
        return self.r0 * self.map.f(x_state, t)


_PROBE_X = (-1.0, -0.35, 0.0, 0.4, 1.1)


@dataclass(frozen=True)
class PotentialModel:
    """Short rate given directly as a potential of Brownian motion.

    r_t = V(W_t, t).  The callables ``V_x`` and ``V_xx`` must be the exact
    first and second x-derivatives of ``V``; they are spot-checked against
    finite differences at construction (tolerance 1e-6).
    """

    V: Callable
    V_x: Callable
    V_xx: Callable

    def __post_init__(self):
        for name in ("V", "V_x", "V_xx"):
            if not callable(getattr(self, name)):
                raise ValueError(f"{name} must be callable")
        h1, h2 = 1e-5, 1e-4
        for x in _PROBE_X:
            fd1 = (self.V(x + h1, 0.0) - self.V(x - h1, 0.0)) / (2.0 * h1)
            d1 = float(self.V_x(x, 0.0))
            if abs(fd1 - d1) > 1e-6 * (1.0 + abs(d1)):
                raise ValueError(
                    f"V_x inconsistent with V at x={x}: analytic {d1}, finite difference {fd1}"
                )
            fd2 = (
                self.V(x + h2, 0.0) - 2.0 * self.V(x, 0.0) + self.V(x - h2, 0.0)
            ) / (h2 * h2)
            d2 = float(self.V_xx(x, 0.0))
            if abs(fd2 - d2) > 1e-6 * (1.0 + abs(d2)):
                raise ValueError(
                    f"V_xx inconsistent with V at x={x}: analytic {d2}, finite difference {fd2}"
                )

    @classmethod
    def harmonic(cls, omega: float, v0: float = 0.0) -> "PotentialModel":
        """V(x) = omega^2 x^2 / 2 - v0."""
        if omega <= 0.0:
            raise ValueError(f"omega must be positive, got {omega}")
        w2 = float(omega) * float(omega)
        return cls(
            V=lambda x, t: 0.5 * w2 * np.asarray(x, dtype=float) ** 2 - v0,
            V_x=lambda x, t: w2 * np.asarray(x, dtype=float),
            V_xx=lambda x, t: w2 * np.ones_like(np.asarray(x, dtype=float)),
        )


@dataclass(frozen=True)
class StateRoots:
    """Solutions x* of r0 * f(sigma * x*, t) = z, in increasing order."""

    roots: tuple

    def __post_init__(self):
        if len(self.roots) == 0:
            raise ValueError("StateRoots requires at least one root")
        object.__setattr__(self, "roots", tuple(float(r) for r in self.roots))


def eta(alpha_curve, t: float, T: float) -> float:
    """Mean-reversion discounting kernel integral.

    Computes eta(t, T) = int_t^T beta(t, u) du with
    beta(t, u) = exp(-int_t^u alpha(s) ds), by adaptive quadrature to
    relative tolerance 1e-10.  The inner integral of the piecewise-linear
    alpha curve is exact.

    Parameters
    ----------
    alpha_curve : Curve or float
        Mean-reversion speed curve.
    t, T : float
        Interval with 0 <= t <= T inside the curve domain.

    Returns
    -------
    float
        eta(t, T), nonnegative for nonnegative alpha horizons.
    """
    c = as_curve(alpha_curve)
    if T < t:
        raise ValueError(f"require T >= t, got t={t}, T={T}")
    c.require_domain(t, T)
    if T == t:
        return 0.0

    def beta(u):
        return math.exp(-c.integral(t, float(u)))

    pts = c.interior_knots(t, T)
    val, _ = quad(
        beta, t, T, points=pts if pts.size else None,
        epsrel=1e-10, epsabs=1e-14, limit=200,
    )
    return float(val)


_BRACKET_SCALE = 50.0
_N_SCAN = 4001


def _closed_form_roots(model: MappedModel, z: float, t: float):
    m = model.map
    if isinstance(m, ExponentialMap):
        if z <= 0.0:
            raise NoRootError(
                f"exponential map attains only positive rates, requested z={z}",
                min_attained=0.0,
            )
        return [math.log(z / model.r0) / model.sigma]
    if isinstance(m, LinearMap):
        return [(z / model.r0 - 1.0) / (m.slope * model.sigma)]
    if isinstance(m, QuadraticMap):
        # a u^2 + b u + (1 - z/r0) = 0 in u = sigma * x
        a, b = m.a, m.b
        c0 = 1.0 - z / model.r0
        disc = b * b - 4.0 * a * c0
        z_min = model.r0 * (1.0 - b * b / (4.0 * a))
        if disc < 0.0:
            raise NoRootError(
                f"z={z} below the quadratic map minimum {z_min}",
                min_attained=z_min,
            )
        if disc == 0.0:
            return [-b / (2.0 * a) / model.sigma]
        sq = math.sqrt(disc)
        # numerically stable pair of quadratic roots
        if b == 0.0:
            u1, u2 = -0.5 * sq / a, 0.5 * sq / a
        else:
            qq = -0.5 * (b + math.copysign(sq, b))
            u1, u2 = qq / a, c0 / qq
        return sorted([u1 / model.sigma, u2 / model.sigma])
    return None


def _scan_roots(model: MappedModel, z: float, t: float):
    g = lambda x: model.r0 * float(model.map.f(model.sigma * x, t)) - z
    half = _BRACKET_SCALE / model.sigma
    min_seen = math.inf
    for _ in range(3):  # initial bracket plus two geometric expansions
        xs = np.linspace(-half, half, _N_SCAN)
        vals = model.r0 * np.asarray(model.map.f(model.sigma * xs, t), dtype=float) - z
        min_seen = min(min_seen, float(np.min(vals) + z))
        sign = np.sign(vals)
        idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        roots = [float(xs[j]) for j in np.nonzero(sign == 0)[0]]
        for j in idx:
            roots.append(brentq(g, xs[j], xs[j + 1], xtol=1e-14, rtol=8.9e-16))
        if roots:
            return sorted(roots)
        half *= 4.0
    raise NoRootError(
        f"no root of r0*f(sigma*x, t)=z for z={z} within |x| <= {half / 4.0}; "
        f"minimum attained was {min_seen}",
        min_attained=min_seen,
    )


def solve_state_roots(model: MappedModel, z: float, t: float = 0.0) -> StateRoots:
    """All real solutions x* of r0 * f(sigma * x*, t) = z.

    Closed forms are used for the built-in maps; custom maps are scanned
    over |x| <= 50/sigma (expanded geometrically twice) and refined by
    bracketed iteration.  Every returned root satisfies
    |r0 f(sigma x*, t) - z| < 1e-12 |z|.

    Raises
    ------
    NoRootError
        If z is not attainable; the error reports the attainable minimum.
    """
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    roots = _closed_form_roots(model, z, t)
    if roots is None:
        roots = _scan_roots(model, z, t)
    tol = 1e-12 * abs(z) if z != 0.0 else 1e-15
    polished = []
    for x in roots:
        res = model.r0 * float(model.map.f(model.sigma * x, t)) - z
        if abs(res) > tol:
            g = lambda u: model.r0 * float(model.map.f(model.sigma * u, t)) - z
            w = 1e-6 * (1.0 + abs(x))
            lo, hi = x - w, x + w
            for _ in range(60):
                if g(lo) * g(hi) <= 0.0:
                    break
                w *= 2.0
                lo, hi = x - w, x + w
            x = brentq(g, lo, hi, xtol=1e-15, rtol=8.9e-16)
        polished.append(x)
    polished.sort()
    unique = [polished[0]]
    for x in polished[1:]:
        if abs(x - unique[-1]) > 1e-9 * (1.0 + abs(x)):
            unique.append(x)
    return StateRoots(tuple(unique))
