"""Bond pricing: exact Hull-White formulas and the semiclassical engine.

The semiclassical price of a zero-coupon bond under a mapped short-rate
model r = r0 f(X, t) is an endpoint integral over classical paths,

    v = e^{alpha (T-t)/2} * sum_roots int dy'
        (2 pi phi(T))^{-1/2} e^{-(alpha/2)(y'^2 - y*^2) - S_cl(y* -> y')},

with S_cl the action of the effective potential
V(y, s) = alpha^2 y^2 / 2 + r0 f(sigma y + theta/alpha, s), phi the
fluctuation determinant along each path, and y* the shifted state root.
The exponential prefactor restores the risk-neutral normalization after
the change of measure.  The approximation is exact when f is linear or
quadratic; its error parameter is epsilon = sigma sqrt(T - t).

Everything is assembled in the log domain so that long horizons neither
overflow the measure factor nor underflow the integrand.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import logsumexp

from .classical import (
    EffectiveProblem,
    _composite_simpson,
    _newton_batch,
    _rk4_full,
    solve_classical_path,
)
from .errors import (
    FocalPointError,
    MultipleSolutionsError,
    NoRootError,
    NonConvergenceError,
)
from .fluctuation import curvature_along_path, gelfand_yaglom
from .models import (
    HullWhiteParams,
    LinearMap,
    MappedModel,
    PotentialModel,
    QuadraticMap,
    eta,
    solve_state_roots,
)

__all__ = [
    "PriceQuery",
    "PriceResult",
    "price_hull_white_exact",
    "price_semiclassical",
    "conditional_expectation_semiclassical",
    "price_potential_model",
    "yield_from_price",
]

_SERIES_X = 1e-4
_EPSILON_WARN = 0.3
_QUAD_RTOL = 1e-8
_ANALYTIC_THRESHOLD = 12.0  # omega*(T-t) beyond which shooting is hopeless in doubles
_WINDOW_WIDTHS = 10.0
_MAX_REFINES = 6
_EDGE_DECAY = math.log(1e-13)
_METHODS = ("exact", "semiclassical", "mc", "lattice", "pde")


@dataclass(frozen=True)
class PriceQuery:
    """A single bond-price request: short rate z at time t, maturity T."""

    z: float
    t: float
    T: float

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z}")
        if not (self.T >= self.t):
            raise ValueError(f"require T >= t, got t={self.t}, T={self.T}")


@dataclass(frozen=True)
class PriceResult:
    """Price plus derived yield and method-specific diagnostics.

    The continuously compounded yield is stored as ``yield_`` (trailing
    underscore: the plain name is reserved in Python); serialized output
    uses the key "yield".  Diagnostics vary by method: quadrature error
    estimate, the phi(T) range over quadrature nodes, number of state
    roots summed, the validity parameter epsilon, a standard error for
    Monte Carlo.
    """

    price: float
    yield_: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.price > 0.0 and math.isfinite(self.price)):
            raise ValueError(f"price must be positive and finite, got {self.price}")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")


def yield_from_price(v: float, t: float, T: float) -> float:
    """Continuously compounded yield -ln(v)/(T-t); zero at T = t."""
    if not (v > 0.0):
        raise ValueError(f"price must be positive, got {v}")
    if T < t:
        raise ValueError(f"require T >= t, got t={t}, T={T}")
    if T == t:
        return 0.0
    return -math.log(v) / (T - t)


def _h1(x: float) -> float:
    """(1 - e^{-x}) / x, series-safe near zero."""
    if abs(x) < _SERIES_X:
        return 1.0 - x / 2.0 + x * x / 6.0 - x**3 / 24.0
    return -math.expm1(-x) / x


def _f2(x: float) -> float:
    """(x - 1 + e^{-x}) / x^2, series-safe near zero."""
    if abs(x) < _SERIES_X:
        return 0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0
    return (x - 1.0 + math.exp(-x)) / (x * x)


def _q3(x: float) -> float:
    """(f2(x) - h1(x)^2 / 2) / x, series-safe near zero."""
    if abs(x) < _SERIES_X:
        return 1.0 / 3.0 - x / 4.0 + 7.0 * x * x / 60.0 - x**3 / 24.0
    h = _h1(x)
    return (_f2(x) - 0.5 * h * h) / x


def _vasicek_log_price(z: float, th: float, sg: float, al: float, dt: float) -> float:
    """Log price for constant parameters.

    Equivalent to -z*eta - (th/al)(dt - eta) + (sg^2/2al^2)(dt - eta
    - (al/2) eta^2) with eta = (1 - e^{-al dt})/al, rewritten through
    series-safe kernels so al -> 0 is regular.
    """
    x = al * dt
    return -z * dt * _h1(x) - th * dt * dt * _f2(x) + 0.5 * sg * sg * dt**3 * _q3(x)


def price_hull_white_exact(p: HullWhiteParams, q: PriceQuery) -> PriceResult:
    """Exact Hull-White / Vasicek bond price.

    Evaluates exp(-z eta(t,T) - int_t^T [eta(s,T) theta(s)
    - eta(s,T)^2 sigma(s)^2 / 2] ds).  Constant parameters use the closed
    algebraic form; curve parameters use nested adaptive quadrature at
    1e-10 relative tolerance.
    """
    dt = q.T - q.t
    if dt == 0.0:
        return PriceResult(1.0, 0.0, "exact", {"route": "boundary"})
    for name in ("sigma", "theta", "alpha"):
        getattr(p, name).require_domain(q.t, q.T)
    if p.is_constant():
        log_v = _vasicek_log_price(
            q.z,
            float(p.theta.values[0]),
            float(p.sigma.values[0]),
            float(p.alpha.values[0]),
            dt,
        )
        price = math.exp(log_v)
        return PriceResult(
            price, yield_from_price(price, q.t, q.T), "exact", {"route": "closed-form"}
        )

    def integrand(s):
        e = eta(p.alpha, float(s), q.T)
        return e * p.theta(s) - 0.5 * e * e * p.sigma(s) ** 2

    pts = np.unique(
        np.concatenate(
            [c.interior_knots(q.t, q.T) for c in (p.sigma, p.theta, p.alpha)]
        )
    )
    integral, err = quad(
        integrand,
        q.t,
        q.T,
        points=pts if pts.size else None,
        epsrel=1e-10,
        epsabs=1e-14,
        limit=300,
    )
    log_v = -q.z * eta(p.alpha, q.t, q.T) - integral
    price = math.exp(log_v)
    return PriceResult(
        price,
        yield_from_price(price, q.t, q.T),
        "exact",
        {"route": "quadrature", "quad_error": float(err)},
    )


def _coth(x: float) -> float:
    if x < 1e-6:
        return 1.0 / x + x / 3.0
    e = math.exp(-2.0 * x)
    return (1.0 + e) / (1.0 - e)


def _csch(x: float) -> float:
    if x < 1e-6:
        return 1.0 / x - x / 6.0
    return 2.0 * math.exp(-x) / (1.0 - math.exp(-2.0 * x))


def _log_sinh(x: float) -> float:
    if x < 1e-6:
        return math.log(x) + x * x / 6.0
    return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x))


def _sech(x: float) -> float:
    return 2.0 * math.exp(-x) / (1.0 + math.exp(-2.0 * x))


def _harmonic_seed(om: float, dt: float, y_start: float, y_nodes: np.ndarray) -> np.ndarray:
    """Shooting velocity of the harmonic BVP, the warm start for Newton."""
    x = om * dt
    return om * _csch(x) * y_nodes - om * _coth(x) * y_start


def _solve_nodes(p: EffectiveProblem, s, y_nodes, seeds, tol=1e-10):
    """Batch shooting for many terminal values; falls back to per-node scans."""
    try:
        v, _, fl = _newton_batch(p, s, p.y_start, y_nodes, seeds, tol)
        return v, fl
    except NonConvergenceError:
        pass
    v = np.empty_like(y_nodes)
    fl = np.zeros(y_nodes.shape, dtype=bool)
    for i, ye in enumerate(y_nodes):
        pp = replace(p, y_end=float(ye))
        try:
            sol = solve_classical_path(pp, len(s), v0_guess=float(seeds[i]), tol=tol)
        except MultipleSolutionsError as exc:
            sol = min(exc.solutions, key=lambda c: c.action)  # dominant saddle
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"shooting failed at quadrature node y'={float(ye):.6g}: {exc}",
                residual=exc.residual,
            ) from exc
        v[i] = sol.initial_velocity
        fl[i] = sol.floor_limited
    return v, fl


def _evaluate_nodes(p: EffectiveProblem, s, v0, y_nodes):
    """Actions and fluctuation determinants along converged node paths."""
    Y, W, E, _ = _rk4_full(p, s, p.y_start, v0)
    min_e = E[1:].min(axis=0)
    if (min_e <= 0.0).any():
        j = int(np.argmax(min_e <= 0.0))
        k = int(np.argmax(E[1:, j] <= 0.0)) + 1
        raise FocalPointError(
            f"fluctuation determinant crossed zero at quadrature node "
            f"y'={float(y_nodes[j]):.6g}",
            s_cross=float(s[k]),
        )
    ell = np.asarray(p.lagrangian(Y, W, s[:, None]), dtype=float)
    actions = _composite_simpson(ell, float(s[1] - s[0]), axis=0)
    return np.asarray(actions), E[-1].copy()


def _interleave(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    out = np.empty(coarse.size + fine.size)
    out[0::2] = coarse
    out[1::2] = fine
    return out


def _semiclassical_integral(
    p: EffectiveProblem,
    window: tuple[float, float],
    seed_omega: float,
    extra_log_weight,
    quad_nodes: int,
    grid_points: int,
    tol: float = 1e-10,
):
    """Adaptive endpoint integral of the semiclassical integrand, in logs.

    Returns (log_value, info) where info collects the final relative
    change, the phi(T) range, node count, and the floor-limited count.
    The node count doubles until the integral moves by less than
    _QUAD_RTOL relative; the window widens if the integrand has not
    decayed at its edges.
    """
    dt = p.T - p.t
    s = np.linspace(p.t, p.T, grid_points)
    a, b = window
    for _widen in range(3):
        n = max(17, int(quad_nodes)) | 1
        ys = np.linspace(a, b, n)
        v0, fl = _solve_nodes(p, s, ys, _harmonic_seed(seed_omega, dt, p.y_start, ys))
        S, phi = _evaluate_nodes(p, s, v0, ys)
        L = extra_log_weight(ys) - 0.5 * np.log(2.0 * math.pi * phi) - S
        if max(L[0], L[-1]) > L.max() + _EDGE_DECAY:
            half = 0.5 * (b - a)
            mid = 0.5 * (a + b)
            a, b = mid - 1.5 * half, mid + 1.5 * half
            continue
        hmax = L.max()
        log_val = hmax + math.log(
            _composite_simpson(np.exp(L - hmax), float(ys[1] - ys[0]))
        )
        rel = math.inf
        for _level in range(_MAX_REFINES):
            mids = 0.5 * (ys[:-1] + ys[1:])
            seeds_new = 0.5 * (v0[:-1] + v0[1:])
            v0_new, fl_new = _solve_nodes(p, s, mids, seeds_new)
            S_new, phi_new = _evaluate_nodes(p, s, v0_new, mids)
            L_new = (
                extra_log_weight(mids) - 0.5 * np.log(2.0 * math.pi * phi_new) - S_new
            )
            ys = _interleave(ys, mids)
            v0 = _interleave(v0, v0_new)
            L = _interleave(L, L_new)
            phi = _interleave(phi, phi_new)
            fl = _interleave(fl.astype(float), fl_new.astype(float)) > 0.5
            hmax = L.max()
            log_new = hmax + math.log(
                _composite_simpson(np.exp(L - hmax), float(ys[1] - ys[0]))
            )
            rel = abs(math.expm1(log_new - log_val))
            log_val = log_new
            if rel < _QUAD_RTOL:
                break
        info = {
            "quad_error": float(rel),
            "phi_range": (float(phi.min()), float(phi.max())),
            "quad_nodes_final": int(ys.size),
            "floor_limited_nodes": int(fl.sum()),
        }
        return log_val, info
    raise NonConvergenceError(
        f"quadrature window failed to contain the integrand after widening to "
        f"[{a:.6g}, {b:.6g}]"
    )


def _analytic_log_contribution(
    y_star: float, al: float, om: float, g: float, c_tilde: float, dt: float
) -> float:
    """Log endpoint integral for an exactly quadratic effective potential.

    V(y) = om^2 (y - g)^2 / 2 + c_tilde.  Gaussian integrals done in
    closed form, stable for arbitrarily large om*dt.  Excludes the
    overall measure factor alpha*dt/2.
    """
    x = om * dt
    coth = _coth(x)
    a2 = 0.5 * (al + om * coth)
    ybar = y_star - g
    b_lin = -al * g + om * ybar * _csch(x)
    const = (
        -0.5 * al * g * g
        + 0.5 * al * y_star * y_star
        - c_tilde * dt
        - 0.5 * om * coth * ybar * ybar
    )
    return (
        0.5 * (math.log(om) - math.log(2.0) - _log_sinh(x) - math.log(a2))
        + b_lin * b_lin / (4.0 * a2)
        + const
    )


def _quadratic_coefficients(m: MappedModel, include_rate_term: bool):
    """(omega, g, c_tilde) of the effective potential when it is quadratic."""
    al, sg, r0 = m.alpha, m.sigma, m.r0
    p0 = m.theta / m.alpha
    if not include_rate_term:
        return al, 0.0, 0.0
    if isinstance(m.map, LinearMap):
        a_c, b_c = 0.0, m.map.slope
    elif isinstance(m.map, QuadraticMap):
        a_c, b_c = m.map.a, m.map.b
    else:
        return None
    om = math.sqrt(al * al + 2.0 * r0 * a_c * sg * sg)
    lin = r0 * sg * (b_c + 2.0 * a_c * p0)
    g = -lin / (om * om)
    c0 = r0 * (1.0 + b_c * p0 + a_c * p0 * p0)
    return om, g, c0 - 0.5 * om * om * g * g


def price_semiclassical(
    m: MappedModel,
    q: PriceQuery,
    quad_nodes: int = 65,
    grid_points: int | None = None,
    include_rate_term: bool = True,
) -> PriceResult:
    """Semiclassical bond price for a mapped short-rate model.

    For each state root y* the endpoint integral is evaluated by solving
    the classical boundary-value problem at every quadrature node,
    attaching the Gelfand-Yaglom determinant of that node's path, and
    refining the composite Simpson rule until the result is stable to
    1e-8 relative.  Root contributions are summed.  When the effective
    potential is exactly quadratic (linear and quadratic maps) and
    omega*(T-t) exceeds the double-precision shooting horizon, the
    algebraically identical Gaussian closed form is used instead; the
    diagnostics report which route ran.

    Parameters
    ----------
    quad_nodes : int
        Starting number of endpoint quadrature nodes (forced odd).
    grid_points : int, optional
        Time-grid samples for the shooting integrator.  Default scales
        with the horizon, max(257, 48 per year).  Fourth-order accurate,
        so tight tolerances at long horizons need more.
    include_rate_term : bool
        With False, the rate term r0 f is dropped from the effective
        potential, leaving the pure measure-change integral whose exact
        value is 1; this is the engine's normalization self-test.

    Raises
    ------
    NoRootError, FocalPointError, NonConvergenceError
        Propagated from state-root solving and the per-node BVPs.
    """
    dt = q.T - q.t
    if dt == 0.0:
        return PriceResult(1.0, 0.0, "semiclassical", {"route": "boundary", "n_roots": 0})
    al, sg, th, r0 = m.alpha, m.sigma, m.theta, m.r0
    p0 = th / al
    epsilon = sg * math.sqrt(dt)
    if epsilon > _EPSILON_WARN:
        warnings.warn(
            f"semiclassical validity parameter epsilon = sigma*sqrt(T-t) = "
            f"{epsilon:.3g} exceeds {_EPSILON_WARN}; the Gaussian approximation "
            "may be poor",
            RuntimeWarning,
            stacklevel=2,
        )
    roots = solve_state_roots(m, q.z, q.t).roots
    if not include_rate_term:
        roots = roots[:1]
    y_stars = [x - th / (sg * al) for x in roots]
    if grid_points is None:
        grid_points = max(257, int(48.0 * dt) + 1) | 1

    if include_rate_term:
        mp = m.map

        def V(y, s):
            return 0.5 * al * al * y * y + r0 * mp.f(sg * y + p0, s)

        def V_y(y, s):
            return al * al * y + r0 * sg * mp.f_x(sg * y + p0, s)

        def V_yy(y, s):
            return al * al + r0 * sg * sg * mp.f_xx(sg * y + p0, s)

    else:

        def V(y, s):
            return 0.5 * al * al * y * y

        def V_y(y, s):
            return al * al * y

        def V_yy(y, s):
            return al * al + 0.0 * y

    quad_coeffs = _quadratic_coefficients(m, include_rate_term)
    log_contribs = []
    info = {
        "n_roots": len(y_stars),
        "epsilon": epsilon,
        "quad_error": 0.0,
        "floor_limited_nodes": 0,
    }
    if quad_coeffs is not None and quad_coeffs[0] * dt > _ANALYTIC_THRESHOLD:
        om, g, c_t = quad_coeffs
        for y_star in y_stars:
            log_contribs.append(_analytic_log_contribution(y_star, al, om, g, c_t, dt))
        info["route"] = "analytic"
    else:
        info["route"] = "quadrature"
        phi_lo, phi_hi = math.inf, -math.inf
        for y_star in y_stars:
            p = EffectiveProblem(
                V=V, V_y=V_y, V_yy=V_yy, t=q.t, T=q.T, y_start=y_star, y_end=y_star
            )
            mu = y_star * math.exp(-al * dt)
            wq = math.sqrt((1.0 - math.exp(-2.0 * al * dt)) / (2.0 * al))
            window = (mu - _WINDOW_WIDTHS * wq, mu + _WINDOW_WIDTHS * wq)
            om_seed = math.sqrt(max(float(V_yy(y_star, q.t)), 1e-4))

            def extra(ys, ystar=y_star):
                return -0.5 * al * (ys * ys - ystar * ystar)

            log_val, node_info = _semiclassical_integral(
                p, window, om_seed, extra, quad_nodes, grid_points
            )
            log_contribs.append(log_val)
            info["quad_error"] = max(info["quad_error"], node_info["quad_error"])
            phi_lo = min(phi_lo, node_info["phi_range"][0])
            phi_hi = max(phi_hi, node_info["phi_range"][1])
            info["floor_limited_nodes"] += node_info["floor_limited_nodes"]
            info["quad_nodes_final"] = node_info["quad_nodes_final"]
        info["phi_range"] = (phi_lo, phi_hi)
    log_price = 0.5 * al * dt + float(logsumexp(log_contribs))
    price = math.exp(log_price)
    return PriceResult(price, yield_from_price(price, q.t, q.T), "semiclassical", info)


def _unpack_potential(V):
    """Accept a PotentialModel, a (V, V_x, V_xx) triple, or a like object."""
    if isinstance(V, PotentialModel):
        return V.V, V.V_x, V.V_xx
    if isinstance(V, (tuple, list)) and len(V) == 3 and all(callable(f) for f in V):
        return V[0], V[1], V[2]
    if all(callable(getattr(V, n, None)) for n in ("V", "V_x", "V_xx")):
        return V.V, V.V_x, V.V_xx
    raise TypeError(
        "V must supply the potential and its first two derivatives: a "
        "PotentialModel, a (V, V_x, V_xx) triple, or an object with those attributes"
    )


def _zero(y, s):
    return 0.0 * np.asarray(y, dtype=float)


def conditional_expectation_semiclassical(
    rho,
    V,
    x0: float,
    t0: float,
    xf: float,
    tf: float,
    grid_points: int = 257,
    rho_t=None,
    rho_xt=None,
) -> float:
    """Fixed-endpoint semiclassical expectation of exp(-int [rho xdot + V]).

    Solves the Euler-Lagrange problem x'' = dV/dx - drho/dt between the
    endpoints, then attaches the Gaussian prefactor from the fluctuation
    determinant with curvature U = d2V/dx2 - d2rho/dxdt along the path:
    the value is (2 pi phi(tf))^{-1/2} exp(-S_cl).  If several classical
    paths connect the endpoints, their contributions are summed.

    Parameters
    ----------
    rho : callable or None
        Velocity weight rho(x, t); None means absent.  ``rho_t`` and
        ``rho_xt`` supply its time and mixed derivatives; both default to
        zero, which is exact for time-independent rho.
    V : PotentialModel or (V, V_x, V_xx)
        Potential with first and second x-derivatives, callables of (x, t).
    """
    if not (tf > t0):
        raise ValueError(f"require tf > t0, got t0={t0}, tf={tf}")
    Vf, Vx, Vxx = _unpack_potential(V)
    kwargs = {}
    if rho is not None:
        kwargs = {
            "rho": rho,
            "rho_s": rho_t if rho_t is not None else _zero,
            "rho_ys": rho_xt,
        }
    p = EffectiveProblem(
        V=Vf, V_y=Vx, V_yy=Vxx, t=t0, T=tf, y_start=x0, y_end=xf, **kwargs
    )
    try:
        sols = [solve_classical_path(p, grid_points)]
    except MultipleSolutionsError as exc:
        sols = list(exc.solutions)
    total = 0.0
    for sol in sols:
        fr = gelfand_yaglom(curvature_along_path(p, sol), t0, tf, len(sol.s))
        total += math.exp(-sol.action) / math.sqrt(2.0 * math.pi * fr.phi_T)
    return total


_POTENTIAL_SCAN_HALF = 50.0
_POTENTIAL_SCAN_N = 4001


def _potential_roots(Vf, z: float, t: float):
    """Solutions of V(x, t) = z by scan plus bracketed refinement."""
    half = _POTENTIAL_SCAN_HALF
    best = math.inf
    for _ in range(3):
        xs = np.linspace(-half, half, _POTENTIAL_SCAN_N)
        vals = np.asarray(Vf(xs, t), dtype=float) - z
        best = min(best, float(vals.min() + z))
        if (np.abs(vals) <= 1e-9 * (1.0 + abs(z))).all():
            # level set is the whole line (constant potential): one
            # representative near the origin carries the full integral
            return [0.0]
        sign = np.sign(vals)
        roots = []
        zero_idx = np.nonzero(sign == 0.0)[0]
        if zero_idx.size:
            # collapse plateaus where V touches z over consecutive samples
            groups = np.split(zero_idx, np.nonzero(np.diff(zero_idx) > 1)[0] + 1)
            roots.extend(float(xs[g[len(g) // 2]]) for g in groups)
        for j in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            roots.append(
                brentq(
                    lambda x: float(Vf(x, t)) - z,
                    xs[j],
                    xs[j + 1],
                    xtol=1e-14,
                    rtol=8.9e-16,
                )
            )
        if roots:
            roots.sort()
            unique = [roots[0]]
            for x in roots[1:]:
                if abs(x - unique[-1]) > 1e-9 * (1.0 + abs(x)):
                    unique.append(x)
            return unique
        half *= 4.0
    raise NoRootError(
        f"short-rate level z={z} not attained by the potential; "
        f"minimum found was {best}",
        min_attained=best,
    )


def price_potential_model(
    pm: PotentialModel,
    q: PriceQuery,
    quad_nodes: int = 65,
    grid_points: int | None = None,
) -> PriceResult:
    """Bond price when the short rate is a potential of Brownian motion.

    Starting points are the roots of V(x, t) = z; each contributes a
    free-endpoint semiclassical integral int dx' (2 pi phi)^{-1/2}
    e^{-S_cl(x_r -> x')}, and contributions are summed.  As T grows the
    yield approaches the ground-state energy of the Schrodinger problem
    in V.
    """
    dt = q.T - q.t
    if dt == 0.0:
        return PriceResult(1.0, 0.0, "semiclassical", {"route": "boundary", "n_roots": 0})
    epsilon = math.sqrt(dt)  # the Brownian state has unit volatility
    if epsilon > _EPSILON_WARN:
        warnings.warn(
            f"validity parameter epsilon = sqrt(T-t) = {epsilon:.3g} exceeds "
            f"{_EPSILON_WARN}; treat long-horizon potential prices as asymptotics",
            RuntimeWarning,
            stacklevel=2,
        )
    roots = _potential_roots(pm.V, q.z, q.t)
    if grid_points is None:
        grid_points = max(257, int(48.0 * dt) + 1) | 1
    log_contribs = []
    info = {
        "n_roots": len(roots),
        "epsilon": epsilon,
        "route": "quadrature",
        "quad_error": 0.0,
        "floor_limited_nodes": 0,
    }
    phi_lo, phi_hi = math.inf, -math.inf
    for x_r in roots:
        p = EffectiveProblem(
            V=pm.V, V_y=pm.V_x, V_yy=pm.V_xx, t=q.t, T=q.T, y_start=x_r, y_end=x_r
        )
        om = math.sqrt(max(float(pm.V_xx(x_r, q.t)), 0.04))
        x = om * dt
        mu = x_r * _sech(x)
        width = math.sqrt(math.tanh(x) / om)
        window = (mu - _WINDOW_WIDTHS * width, mu + _WINDOW_WIDTHS * width)
        log_val, node_info = _semiclassical_integral(
            p, window, om, lambda ys: np.zeros_like(ys), quad_nodes, grid_points
        )
        log_contribs.append(log_val)
        info["quad_error"] = max(info["quad_error"], node_info["quad_error"])
        phi_lo = min(phi_lo, node_info["phi_range"][0])
        phi_hi = max(phi_hi, node_info["phi_range"][1])
        info["floor_limited_nodes"] += node_info["floor_limited_nodes"]
        info["quad_nodes_final"] = node_info["quad_nodes_final"]
    info["phi_range"] = (phi_lo, phi_hi)
    price = math.exp(float(logsumexp(log_contribs)))
    return PriceResult(price, yield_from_price(price, q.t, q.T), "semiclassical", info)
