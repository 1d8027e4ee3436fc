"""Independent numerical oracles for validating the semiclassical pricer.

Three routes to the same expectations, sharing nothing with the pricing
modules beyond the model types:

* Monte Carlo simulation of the state SDE under the risk-neutral measure,
  with counter-based substreams so results are bit-identical regardless of
  how many workers split the path chunks.
* A lattice transfer-matrix evaluation of the discretized path integral,
  first-order accurate in the slice width.
* Backward finite-difference integration of the pricing equation
  nu dv/dz + dv/dt + D d2v/dz2 - z v = 0, v(z, T, T) = 1.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import InstabilityError
from .models import (
    ExponentialMap,
    HullWhiteParams,
    LinearMap,
    MappedModel,
    QuadraticMap,
    solve_state_roots,
)

__all__ = [
    "McConfig",
    "LatticeConfig",
    "PdeConfig",
    "mc_price",
    "lattice_expectation",
    "pde_price",
    "richardson_first_order",
]

_CHUNK = 4096  # paths (or antithetic pairs) per counter-based substream
_BOUNDARY_CELLS = 4
_BOUNDARY_MASS_TOL = 1e-10


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    n_paths counts simulated paths in total; with antithetic variates it
    must be even and is interpreted as n_paths/2 mirrored pairs.
    """

    n_paths: int = 100_000
    n_steps: int = 200
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 1000:
            raise ValueError(f"n_paths must be at least 1000, got {self.n_paths}")
        if self.n_steps < 50:
            raise ValueError(f"n_steps must be at least 50, got {self.n_steps}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic variates need an even n_paths")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class LatticeConfig:
    """Lattice transfer-matrix settings.

    n_space must be odd so composite Simpson weights apply; the spatial
    bounds must cover eight standard deviations of the free process around
    the start point, checked at call time against the actual horizon.
    """

    n_time_slices: int
    x_min: float
    x_max: float
    n_space: int = 301

    def __post_init__(self):
        if self.n_time_slices < 1:
            raise ValueError(f"n_time_slices must be positive, got {self.n_time_slices}")
        if not (self.x_max > self.x_min):
            raise ValueError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.n_space < 101 or self.n_space % 2 == 0:
            raise ValueError(f"n_space must be odd and at least 101, got {self.n_space}")


@dataclass(frozen=True)
class PdeConfig:
    """Finite-difference settings for the pricing equation."""

    z_min: float
    z_max: float
    n_z: int = 400
    n_t: int = 400
    scheme: str = "crank-nicolson"

    def __post_init__(self):
        if not (self.z_max > self.z_min):
            raise ValueError(f"need z_max > z_min, got [{self.z_min}, {self.z_max}]")
        if self.n_z < 100:
            raise ValueError(f"n_z must be at least 100, got {self.n_z}")
        if self.n_t < 100:
            raise ValueError(f"n_t must be at least 100, got {self.n_t}")
        if self.scheme not in ("implicit", "crank-nicolson"):
            raise ValueError(
                f"scheme must be 'implicit' or 'crank-nicolson', got {self.scheme!r}"
            )


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("PATHINT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _chunk_normals(seed: int, chunk_index: int, n_steps: int, m: int) -> np.ndarray:
    """Standard normals for one chunk from its own Philox counter block."""
    bit = np.random.Philox(key=int(seed), counter=[0, 0, int(chunk_index), 0])
    return np.random.Generator(bit).standard_normal((n_steps, m))


def _hw_constants(model: HullWhiteParams):
    return (
        float(model.sigma.values[0]),
        float(model.theta.values[0]),
        float(model.alpha.values[0]),
    )


def _simulate_chunk_rates(model, q, c, chunk_index, m, sign=1.0):
    """Rate samples r[k, path] on the time grid for one chunk of paths.

    ``sign = -1`` negates every normal increment (antithetic mirror).
    """
    dt = (q.T - q.t) / c.n_steps
    times = q.t + dt * np.arange(c.n_steps + 1)
    xi = sign * _chunk_normals(c.seed, chunk_index, c.n_steps, m)
    if isinstance(model, HullWhiteParams):
        if model.is_constant():
            sg, th, al = _hw_constants(model)
            if al > 1e-12:
                e = math.exp(-al * dt)
                mu_inf = th / al
                sd = sg * math.sqrt((1.0 - e * e) / (2.0 * al))
            else:
                e, mu_inf, sd = 1.0, 0.0, sg * math.sqrt(dt)
            r = np.empty((c.n_steps + 1, m))
            r[0] = q.z
            for k in range(c.n_steps):
                if al > 1e-12:
                    r[k + 1] = mu_inf + (r[k] - mu_inf) * e + sd * xi[k]
                else:
                    r[k + 1] = r[k] + th * dt + sd * xi[k]
            return r, times
        r = np.empty((c.n_steps + 1, m))
        r[0] = q.z
        sqdt = math.sqrt(dt)
        for k in range(c.n_steps):
            tk = times[k]
            r[k + 1] = (
                r[k]
                + (model.theta(tk) - model.alpha(tk) * r[k]) * dt
                + model.sigma(tk) * sqdt * xi[k]
            )
        return r, times
    roots = solve_state_roots(model, q.z, q.t).roots
    if len(roots) > 1:
        raise ValueError(
            f"initial state not determined: {len(roots)} roots solve r0*f(x)=z"
        )
    x0 = model.sigma * roots[0]  # roots are scaled by 1/sigma
    e = math.exp(-model.alpha * dt)
    mu_inf = model.theta / model.alpha
    sd = model.sigma * math.sqrt((1.0 - e * e) / (2.0 * model.alpha))
    x = np.empty((c.n_steps + 1, m))
    x[0] = x0
    for k in range(c.n_steps):
        x[k + 1] = mu_inf + (x[k] - mu_inf) * e + sd * xi[k]
    r = model.r0 * model.map.f(x, times[:, None])
    return r, times


def _chunk_discounts(model, q, c, chunk_index, m):
    dt = (q.T - q.t) / c.n_steps
    w = np.full(c.n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    if c.antithetic:
        r_plus, _ = _simulate_chunk_rates(model, q, c, chunk_index, m)
        d_plus = np.exp(-np.tensordot(w, r_plus, axes=1))
        r_minus, _ = _simulate_chunk_rates(model, q, c, chunk_index, m, sign=-1.0)
        d_minus = np.exp(-np.tensordot(w, r_minus, axes=1))
        return 0.5 * (d_plus + d_minus)
    r, _ = _simulate_chunk_rates(model, q, c, chunk_index, m)
    return np.exp(-np.tensordot(w, r, axes=1))


def mc_price(
    model: HullWhiteParams | MappedModel,
    q,
    c: McConfig,
    workers: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo bond price and standard error.

    Simulates the short rate on a uniform grid (exact Ornstein-Uhlenbeck
    transitions where the model permits, Euler steps otherwise), discounts
    each path by the trapezoid rule, and averages.  Paths are generated in
    fixed chunks with independent counter-based substreams and reduced in
    chunk order, so the result depends only on the seed, never on the
    worker count.

    Parameters
    ----------
    workers : int, optional
        Thread count; defaults to the PATHINT_THREADS environment
        variable, else 1.

    Returns
    -------
    (price, std_error)
    """
    if q.T == q.t:
        return 1.0, 0.0
    n_entities = c.n_paths // 2 if c.antithetic else c.n_paths
    n_chunks = (n_entities + _CHUNK - 1) // _CHUNK
    sizes = [min(_CHUNK, n_entities - i * _CHUNK) for i in range(n_chunks)]

    def work(i: int):
        return _chunk_discounts(model, q, c, i, sizes[i])

    nw = _worker_count(workers)
    if nw == 1:
        discounts = [work(i) for i in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            discounts = list(pool.map(work, range(n_chunks)))
    total = 0.0
    total_sq = 0.0
    for d in discounts:  # fixed chunk order keeps the reduction deterministic
        total += float(d.sum())
        total_sq += float(np.dot(d, d))
    mean = total / n_entities
    if n_entities > 1:
        var = max(0.0, (total_sq - n_entities * mean * mean) / (n_entities - 1))
    else:
        var = 0.0
    return mean, math.sqrt(var / n_entities)


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-2:2] = 2.0
    return w * (h / 3.0)


def _eval_xt(fn, x: np.ndarray, t: float) -> np.ndarray:
    out = np.asarray(fn(x, t), dtype=float)
    return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out


def lattice_expectation(rho, V, x0, t0, xf_spec, tf, c: LatticeConfig) -> float:
    """Discretized path-integral expectation by transfer-matrix propagation.

    Evaluates the product of Gaussian step factors times
    exp(-dt V(x_i, t_i) - rho(x_i, t_i) dx_i) with the potential and the
    velocity weight taken at the earlier slice point, applying Simpson
    weights for the spatial integrals.  ``xf_spec`` is either a float
    (fixed endpoint: the propagated slice is read out at that point by
    cubic-spline interpolation) or the string ``"free"`` (the final slice
    is integrated).

    First-order accurate in 1/n_time_slices; Richardson extrapolation over
    a doubling sequence recovers higher order, see
    ``richardson_first_order``.
    """
    if not (tf > t0):
        raise ValueError(f"require tf > t0, got t0={t0}, tf={tf}")
    fixed = not (isinstance(xf_spec, str))
    if isinstance(xf_spec, str) and xf_spec != "free":
        raise ValueError(f"xf_spec must be a float or 'free', got {xf_spec!r}")
    span = 8.0 * math.sqrt(tf - t0)
    if c.x_min > x0 - span or c.x_max < x0 + span:
        raise ValueError(
            f"lattice bounds [{c.x_min}, {c.x_max}] must cover "
            f"x0 +- 8 sqrt(tf-t0) = [{x0 - span:.6g}, {x0 + span:.6g}]"
        )
    if fixed:
        xf = float(xf_spec)
        if not (c.x_min < xf < c.x_max):
            raise ValueError(f"fixed endpoint {xf} outside lattice bounds")
    grid = np.linspace(c.x_min, c.x_max, c.n_space)
    h = grid[1] - grid[0]
    sw = _simpson_weights(c.n_space, h)
    N = c.n_time_slices
    dt = (tf - t0) / N
    if h > math.sqrt(dt) / 2.5:
        warnings.warn(
            f"spatial step {h:.4g} resolves the kernel width {math.sqrt(dt):.4g} "
            "with fewer than 2.5 points; expect aliasing error. Increase n_space.",
            RuntimeWarning,
            stacklevel=2,
        )
    norm = 1.0 / math.sqrt(2.0 * math.pi * dt)
    diff = grid[:, None] - grid[None, :]  # diff[j, i] = x_j - x_i
    gauss = norm * np.exp(-diff * diff / (2.0 * dt))
    rho_static = None
    if rho is not None:
        probes = [_eval_xt(rho, grid, s) for s in (t0, 0.5 * (t0 + tf), tf - dt)]
        if all(np.array_equal(probes[0], pr) for pr in probes[1:]):
            rho_static = gauss * np.exp(-probes[0][None, :] * diff)

    # first step leaves the delta function analytically
    d0 = grid - x0
    psi = norm * np.exp(-d0 * d0 / (2.0 * dt) - dt * float(V(x0, t0)))
    if rho is not None:
        psi = psi * np.exp(-float(rho(x0, t0)) * d0)
    for k in range(1, N):
        tk = t0 + k * dt
        wgt = sw * np.exp(-dt * _eval_xt(V, grid, tk)) * psi
        if rho is None:
            psi = gauss @ wgt
        elif rho_static is not None:
            psi = rho_static @ wgt
        else:
            psi = (gauss * np.exp(-_eval_xt(rho, grid, tk)[None, :] * diff)) @ wgt
    mass = sw * np.abs(psi)
    edge = mass[:_BOUNDARY_CELLS].sum() + mass[-_BOUNDARY_CELLS:].sum()
    if edge > _BOUNDARY_MASS_TOL * max(mass.sum(), np.finfo(float).tiny):
        warnings.warn(
            f"lattice boundary holds a mass fraction {edge / mass.sum():.2e}; "
            "widen [x_min, x_max]",
            RuntimeWarning,
            stacklevel=2,
        )
    if fixed:
        return float(CubicSpline(grid, psi)(xf))
    return float(np.dot(sw, psi))


def richardson_first_order(values) -> float:
    """Two-level Richardson extrapolation of a first-order sequence.

    ``values`` are the results at slice counts N, 2N, 4N.  The first level
    cancels the 1/N term, the second the 1/N^2 remainder.
    """
    vals = [float(v) for v in values]
    if len(vals) != 3:
        raise ValueError(f"need exactly three values (N, 2N, 4N), got {len(vals)}")
    v1, v2, v3 = vals
    e1 = 2.0 * v2 - v1
    e2 = 2.0 * v3 - v2
    return (4.0 * e2 - e1) / 3.0


def _pde_coefficients(model, z: np.ndarray, t: float):
    """Drift nu(z, t) and diffusion D(z, t) of the short rate itself."""
    if isinstance(model, HullWhiteParams):
        nu = model.theta(t) - model.alpha(t) * z
        D = np.full_like(z, 0.5 * float(model.sigma(t)) ** 2)
        return nu, D
    mp = model.map
    if isinstance(mp, LinearMap):
        lam = mp.slope
        nu = model.r0 * lam * model.theta - model.alpha * (z - model.r0)
        D = np.full_like(z, 0.5 * (model.r0 * lam * model.sigma) ** 2)
        return np.broadcast_to(nu, z.shape) if np.ndim(nu) == 0 else nu, D
    if isinstance(mp, ExponentialMap):
        x = np.log(z / model.r0)
        nu = z * (model.theta + 0.5 * model.sigma**2 - model.alpha * x)
        D = 0.5 * model.sigma**2 * z * z
        return nu, D
    if isinstance(mp, QuadraticMap):
        if mp.b != 0.0 or model.theta != 0.0:
            raise ValueError(
                "quadratic-map PDE needs b = 0 and theta = 0; otherwise the "
                "short rate does not determine the state"
            )
        a = mp.a
        nu = a * model.r0 * model.sigma**2 - 2.0 * model.alpha * (z - model.r0)
        D = 2.0 * a * model.r0 * model.sigma**2 * (z - model.r0)
        return nu, np.maximum(D, 0.0)
    raise ValueError(f"no PDE coefficients for map kind {mp.kind!r}")


def pde_price(model, q, c: PdeConfig) -> float:
    """Bond price from the pricing equation by backward finite differences.

    Central differences in z with linear-extrapolation boundary rows
    (v_zz = 0 at both edges), theta-weighted time stepping: Crank-Nicolson
    by default, fully implicit as a fallback for rough coefficients.

    Raises
    ------
    InstabilityError
        Result outside (0, 1.05]; with strongly negative rates on the grid
        a legitimate price can trip this guard, in which case shrink the
        domain or the query horizon.
    """
    if q.T == q.t:
        return 1.0
    if not (c.z_min <= q.z <= c.z_max):
        raise ValueError(f"query z={q.z} not inside PDE domain [{c.z_min}, {c.z_max}]")
    if isinstance(model, MappedModel):
        if isinstance(model.map, ExponentialMap) and c.z_min <= 0.0:
            raise ValueError("exponential map needs z_min > 0")
        if isinstance(model.map, QuadraticMap) and c.z_min < model.r0 * (
            1.0 - 1e-12
        ):
            raise ValueError(
                f"quadratic map rate never falls below r0={model.r0}; "
                f"set z_min = r0, got {c.z_min}"
            )
    z = np.linspace(c.z_min, c.z_max, c.n_z)
    hz = z[1] - z[0]
    dt = (q.T - q.t) / c.n_t
    theta_w = 1.0 if c.scheme == "implicit" else 0.5
    v = np.ones(c.n_z)

    def operator_bands(t: float):
        """Tridiagonal bands of L v = nu v_z + D v_zz - z v at time t."""
        nu, D = _pde_coefficients(model, z, t)
        lo = D / (hz * hz) - nu / (2.0 * hz)
        mid = -2.0 * D / (hz * hz) - z
        up = D / (hz * hz) + nu / (2.0 * hz)
        return lo, mid, up

    n = c.n_z
    for k in range(c.n_t):
        t_new = q.T - (k + 1) * dt
        t_old = q.T - k * dt
        lo_o, mid_o, up_o = operator_bands(t_old)
        # explicit part (I + (1-theta) dt L) applied to the old slice
        rhs = v.copy()
        rhs[1:-1] += (1.0 - theta_w) * dt * (
            lo_o[1:-1] * v[:-2] + mid_o[1:-1] * v[1:-1] + up_o[1:-1] * v[2:]
        )
        lo_n, mid_n, up_n = operator_bands(t_new)
        ab = np.zeros((5, n))  # banded (2, 2): extrapolation rows reach 2 cells in
        ab[2, 1:-1] = 1.0 - theta_w * dt * mid_n[1:-1]
        ab[1, 2:] = -theta_w * dt * up_n[1:-1]
        ab[3, :-2] = -theta_w * dt * lo_n[1:-1]
        # boundary rows: v0 - 2 v1 + v2 = 0 and v_{n-3} - 2 v_{n-2} + v_{n-1} = 0
        ab[2, 0] = 1.0
        ab[1, 1] = -2.0
        ab[0, 2] = 1.0
        rhs[0] = 0.0
        ab[2, n - 1] = 1.0
        ab[3, n - 2] = -2.0
        ab[4, n - 3] = 1.0
        rhs[n - 1] = 0.0
        v = solve_banded((2, 2), ab, rhs)
    out = float(CubicSpline(z, v)(q.z))
    if not (0.0 < out <= 1.05):
        raise InstabilityError(
            f"PDE value {out:.6g} outside (0, 1.05]; refine the grid or domain",
            value=out,
        )
    return out
