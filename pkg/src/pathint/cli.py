"""Command-line interface: load model files, price bonds, emit curves and reports.

Model files are TOML with exactly one of the sections ``[hull_white]``,
``[mapped]`` or ``[potential]``; numbers are in years and absolute rates
(0.05 means five percent).  Reports go to standard output as JSON (with a
top-level ``"schema": "1"`` field) or CSV with columns
``T,price,yield,method,err_estimate``.  Exit status is 0 on success, 1 when
a validation check fails, 2 on configuration or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from pathint.classical import EffectiveProblem, solve_classical_path
from pathint.errors import PathintError
from pathint.fluctuation import curvature_along_path, gelfand_yaglom, van_vleck_check
from pathint.kernels import (
    KernelQuery,
    drift_expectation,
    ho_kernel_fixed,
    ho_kernel_free,
)
from pathint.models import (
    Curve,
    ExponentialMap,
    HullWhiteParams,
    LinearMap,
    MappedModel,
    PotentialModel,
    QuadraticMap,
    solve_state_roots,
)
from pathint.oracles import (
    LatticeConfig,
    McConfig,
    PdeConfig,
    lattice_expectation,
    mc_price,
    pde_price,
    richardson_first_order,
)
from pathint.pricing import (
    PriceQuery,
    PriceResult,
    _potential_roots,
    conditional_expectation_semiclassical,
    price_hull_white_exact,
    price_potential_model,
    price_semiclassical,
    yield_from_price,
)

_COMMANDS = ("price", "curve", "validate", "oracle")
_OUTPUTS = ("csv", "json")
_SPEC_METHODS = ("exact", "semiclassical", "mc", "lattice", "pde", "all")
_ORACLE_METHODS = ("mc", "lattice", "pde")
_METHOD_ORDER = ("exact", "semiclassical", "mc", "lattice", "pde")
_CSV_HEADER = ("T", "price", "yield", "method", "err_estimate")


class ConfigError(Exception):
    """A configuration or model-file problem; maps to exit status 2."""


@dataclass(frozen=True)
class RunSpec:
    """One complete CLI invocation, validated at construction.

    Parameters
    ----------
    command : str
        One of ``price``, ``curve``, ``validate``, ``oracle``.
    model_path : str
        Path to a TOML model file; must exist.
    z : float, optional
        Short rate observed at the valuation time.  Required for
        ``price``, ``curve`` and ``oracle``; ``validate`` picks a
        model-appropriate default when omitted.
    t : float
        Valuation time in years.
    T : float, optional
        Maturity for ``price`` and ``oracle``.
    maturities : tuple of float
        Strictly increasing maturities for ``curve``.
    method : str, optional
        Pricing method, or ``"all"`` for every method the model supports.
        When omitted a model-appropriate default is chosen.
    output : str, optional
        ``json`` or ``csv``; defaults depend on the command.

    Notes
    -----
    The numeric knobs mirror the underlying engines: quadrature nodes and
    time-grid points for the semiclassical pricer, path/step counts and
    seed for Monte Carlo, slice and cell counts for the lattice, grid
    shape and scheme for the PDE.  Identical specs produce byte-identical
    output.
    """

    command: str
    model_path: str
    z: float | None = None
    t: float = 0.0
    T: float | None = None
    maturities: tuple[float, ...] = ()
    method: str | None = None
    output: str | None = None
    quad_nodes: int = 65
    grid_points: int | None = None
    mc_paths: int = 100_000
    mc_steps: int = 200
    seed: int = 0
    antithetic: bool = False
    workers: int | None = None
    lattice_slices: int = 256
    lattice_space: int | None = None
    pde_nz: int = 400
    pde_nt: int = 400
    pde_zmin: float | None = None
    pde_zmax: float | None = None
    pde_scheme: str = "crank-nicolson"

    def __post_init__(self):
        if self.command not in _COMMANDS:
            raise ValueError(f"command must be one of {_COMMANDS}, got {self.command!r}")
        if not os.path.isfile(self.model_path):
            raise ValueError(f"model file not found: {self.model_path}")
        if self.method is not None and self.method not in _SPEC_METHODS:
            raise ValueError(f"method must be one of {_SPEC_METHODS}, got {self.method!r}")
        if self.output is not None and self.output not in _OUTPUTS:
            raise ValueError(f"output must be one of {_OUTPUTS}, got {self.output!r}")
        if self.command in ("price", "oracle"):
            if self.z is None:
                raise ValueError(f"--z is required for '{self.command}'")
            if self.T is None:
                raise ValueError(f"--T is required for '{self.command}'")
        if self.command == "curve":
            if self.z is None:
                raise ValueError("--z is required for 'curve'")
            if not self.maturities:
                raise ValueError("'curve' needs --maturities")
            mats = tuple(float(m) for m in self.maturities)
            if any(b <= a for a, b in zip(mats, mats[1:])):
                raise ValueError(f"maturities must be strictly increasing, got {mats}")
            object.__setattr__(self, "maturities", mats)
        if self.command == "oracle" and self.method is not None:
            if self.method not in _ORACLE_METHODS:
                raise ValueError(
                    f"oracle method must be one of {_ORACLE_METHODS}, got {self.method!r}"
                )


# -- model files --------------------------------------------------------------

_HW_KEYS = {"t", "sigma", "theta", "alpha"}
_MAPPED_KEYS = {"sigma", "theta", "alpha", "r0", "map", "a", "b", "slope"}
_POTENTIAL_KEYS = {"builtin", "omega", "v0"}


def _section_line(text: str, section: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(f"[{section}]"):
            return i
    return 1


def _build_hull_white(body: dict) -> HullWhiteParams:
    missing = [k for k in ("sigma", "theta", "alpha") if k not in body]
    if missing:
        raise ValueError(f"missing required keys: {', '.join(missing)}")
    arrays = [k for k in ("sigma", "theta", "alpha") if isinstance(body[k], list)]
    if arrays:
        if "t" not in body:
            raise ValueError(
                f"keys {', '.join(arrays)} are arrays, so a knot array 't' is required"
            )
        t = np.array([float(v) for v in body["t"]])
        curves = {}
        for k in ("sigma", "theta", "alpha"):
            v = body[k]
            if isinstance(v, list):
                curves[k] = Curve(t, np.array([float(x) for x in v]))
            else:
                curves[k] = Curve.constant(float(v))
        return HullWhiteParams(**curves)
    if "t" in body:
        raise ValueError("'t' was given but sigma, theta, alpha are all scalars")
    return HullWhiteParams.constant(
        float(body["sigma"]), float(body["theta"]), float(body["alpha"])
    )


def _build_mapped(body: dict) -> MappedModel:
    missing = [k for k in ("sigma", "theta", "alpha", "r0", "map") if k not in body]
    if missing:
        raise ValueError(f"missing required keys: {', '.join(missing)}")
    kind = body["map"]
    if kind == "exp":
        stray = sorted({"a", "b", "slope"} & set(body))
        if stray:
            raise ValueError(f"map 'exp' takes no shape keys, got {', '.join(stray)}")
        mp = ExponentialMap()
    elif kind == "quadratic":
        if "a" not in body:
            raise ValueError("map 'quadratic' needs key 'a'")
        if "slope" in body:
            raise ValueError("map 'quadratic' does not take 'slope'")
        mp = QuadraticMap(a=float(body["a"]), b=float(body.get("b", 0.0)))
    elif kind == "linear":
        if "slope" not in body:
            raise ValueError("map 'linear' needs key 'slope'")
        stray = sorted({"a", "b"} & set(body))
        if stray:
            raise ValueError(f"map 'linear' does not take {', '.join(stray)}")
        mp = LinearMap(slope=float(body["slope"]))
    else:
        raise ValueError(f"map must be 'exp', 'quadratic' or 'linear', got {kind!r}")
    return MappedModel(
        sigma=float(body["sigma"]),
        theta=float(body["theta"]),
        alpha=float(body["alpha"]),
        r0=float(body["r0"]),
        map=mp,
    )


def _build_potential(body: dict) -> PotentialModel:
    builtin = body.get("builtin")
    if builtin != "harmonic":
        raise ValueError(f"builtin must be 'harmonic', got {builtin!r}")
    if "omega" not in body:
        raise ValueError("builtin 'harmonic' needs key 'omega'")
    return PotentialModel.harmonic(float(body["omega"]), float(body.get("v0", 0.0)))


def load_model(path: str):
    """Parse a TOML model file into a model object.

    Raises
    ------
    ConfigError
        On unreadable files, TOML syntax errors, or schema violations;
        the message carries the file name and, where known, the line.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    present = [k for k in ("hull_white", "mapped", "potential") if k in data]
    if len(present) != 1:
        found = ", ".join(present) if present else "none"
        raise ConfigError(
            f"{path}:1: expected exactly one of [hull_white], [mapped], "
            f"[potential]; found {found}"
        )
    stray = sorted(set(data) - {present[0]})
    if stray:
        raise ConfigError(f"{path}:1: unknown top-level keys: {', '.join(stray)}")
    section = present[0]
    body = data[section]
    where = f"{path}:{_section_line(text, section)}: [{section}]"
    if not isinstance(body, dict):
        raise ConfigError(f"{where} must be a table")
    allowed = {"hull_white": _HW_KEYS, "mapped": _MAPPED_KEYS, "potential": _POTENTIAL_KEYS}
    unknown = sorted(set(body) - allowed[section])
    if unknown:
        raise ConfigError(f"{where} unknown keys: {', '.join(unknown)}")
    builder = {
        "hull_white": _build_hull_white,
        "mapped": _build_mapped,
        "potential": _build_potential,
    }[section]
    try:
        return builder(body)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} {exc}") from exc


# -- method dispatch ----------------------------------------------------------


def _applicable_methods(model) -> list[str]:
    if isinstance(model, HullWhiteParams):
        out = ["exact"]
        if model.is_constant() and model.sigma(0.0) > 0.0 and model.alpha(0.0) > 0.0:
            out.append("semiclassical")
        out += ["mc", "pde"]
        return out
    if isinstance(model, MappedModel):
        out = ["semiclassical", "mc"]
        quad_ok = (
            isinstance(model.map, QuadraticMap)
            and model.map.b == 0.0
            and model.theta == 0.0
        )
        if isinstance(model.map, (LinearMap, ExponentialMap)) or quad_ok:
            out.append("pde")
        return out
    return ["semiclassical", "lattice"]


def _resolve_methods(model, spec: RunSpec) -> list[str]:
    avail = _applicable_methods(model)
    if spec.command == "oracle":
        m = spec.method
        if m is None:
            m = "lattice" if isinstance(model, PotentialModel) else "mc"
        return [m]
    m = spec.method
    if m is None:
        m = "exact" if isinstance(model, HullWhiteParams) else "semiclassical"
    if m == "all":
        return [k for k in _METHOD_ORDER if k in avail]
    return [m]


def _hull_white_as_mapped(p: HullWhiteParams) -> MappedModel:
    """Constant Hull-White as the linear map r = 1 + X over an OU state.

    dX = sigma dW + [(theta - alpha) - alpha X] dt reproduces the short
    rate SDE exactly, so the semiclassical pricer (exact on linear maps)
    can be pointed at Hull-White files.
    """
    if not p.is_constant():
        raise ConfigError(
            "semiclassical pricing of hull_white models needs constant coefficients"
        )
    sig, th, al = float(p.sigma(0.0)), float(p.theta(0.0)), float(p.alpha(0.0))
    return MappedModel(sigma=sig, theta=th - al, alpha=al, r0=1.0, map=LinearMap(slope=1.0))


def _auto_pde_bounds(model, q: PriceQuery) -> tuple[float, float]:
    dt = q.T - q.t
    if isinstance(model, HullWhiteParams):
        s = np.linspace(q.t, q.T, 101)
        sig = float(np.max(model.sigma(s)))
        abar = float(np.mean(model.alpha(s)))
        if abar > 1e-12:
            mean_level = float(np.mean(model.theta(s))) / abar
            sd = sig * math.sqrt(min(dt, 0.5 / abar))
        else:
            mean_level = q.z
            sd = sig * math.sqrt(dt)
        pad = 12.0 * sd + 1e-3
        return min(q.z, mean_level) - pad, max(q.z, mean_level) + pad
    roots = solve_state_roots(model, q.z, q.t).roots
    xs = [model.sigma * r for r in roots] + [model.theta / model.alpha]
    sd = model.sigma * math.sqrt(min(dt, 0.5 / model.alpha))
    x_lo = min(xs) - 12.0 * sd
    x_hi = max(xs) + 12.0 * sd
    mp = model.map
    if isinstance(mp, LinearMap):
        a = model.r0 * (1.0 + mp.slope * x_lo)
        b = model.r0 * (1.0 + mp.slope * x_hi)
        return min(a, b), max(a, b)
    if isinstance(mp, ExponentialMap):
        return model.r0 * math.exp(x_lo), model.r0 * math.exp(x_hi)
    # quadratic with b = 0: the z-domain is one-sided with floor r0
    hi = model.r0 * (1.0 + mp.a * max(x_lo * x_lo, x_hi * x_hi))
    if x_lo <= 0.0 <= x_hi:
        lo = model.r0
    else:
        lo = model.r0 * (1.0 + mp.a * min(x_lo * x_lo, x_hi * x_hi))
    return lo, hi


def _lattice_price_result(model: PotentialModel, q: PriceQuery, spec: RunSpec) -> PriceResult:
    dt = q.T - q.t
    roots = _potential_roots(model.V, q.z, q.t)
    pad = 10.0 * math.sqrt(dt)
    lo, hi = min(roots) - pad, max(roots) + pad
    if spec.lattice_space is None:
        # spatial step below the kernel-width floor sqrt(dt/N)/2.5
        target = math.sqrt(dt / spec.lattice_slices) / 2.5
        n_space = max(301, int(math.ceil((hi - lo) / target)) + 1)
        n_space += 1 - n_space % 2
    else:
        n_space = spec.lattice_space
    cfg = LatticeConfig(
        n_time_slices=spec.lattice_slices, x_min=lo, x_max=hi, n_space=n_space
    )
    total = 0.0
    for x0 in roots:
        total += lattice_expectation(None, model.V, x0, q.t, "free", q.T, cfg)
    return PriceResult(
        total,
        yield_from_price(total, q.t, q.T),
        "lattice",
        {
            "n_time_slices": cfg.n_time_slices,
            "n_space": cfg.n_space,
            "x_min": cfg.x_min,
            "x_max": cfg.x_max,
            "n_roots": len(roots),
        },
    )


def _pde_price_result(model, q: PriceQuery, spec: RunSpec) -> PriceResult:
    lo, hi = spec.pde_zmin, spec.pde_zmax
    if lo is None or hi is None:
        auto_lo, auto_hi = _auto_pde_bounds(model, q)
        lo = auto_lo if lo is None else lo
        hi = auto_hi if hi is None else hi
    cfg = PdeConfig(z_min=lo, z_max=hi, n_z=spec.pde_nz, n_t=spec.pde_nt, scheme=spec.pde_scheme)
    price = pde_price(model, q, cfg)
    return PriceResult(
        price,
        yield_from_price(price, q.t, q.T),
        "pde",
        {
            "z_min": cfg.z_min,
            "z_max": cfg.z_max,
            "n_z": cfg.n_z,
            "n_t": cfg.n_t,
            "scheme": cfg.scheme,
        },
    )


def _price_one(model, q: PriceQuery, method: str, spec: RunSpec) -> PriceResult:
    avail = _applicable_methods(model)
    if method not in avail:
        raise ConfigError(
            f"method {method!r} does not apply to this model; "
            f"available: {', '.join(avail)}"
        )
    if q.T == q.t:
        return PriceResult(1.0, 0.0, method, {"route": "boundary"})
    if method == "exact":
        return price_hull_white_exact(model, q)
    if method == "semiclassical":
        if isinstance(model, HullWhiteParams):
            model = _hull_white_as_mapped(model)
        if isinstance(model, MappedModel):
            return price_semiclassical(
                model, q, quad_nodes=spec.quad_nodes, grid_points=spec.grid_points
            )
        return price_potential_model(
            model, q, quad_nodes=spec.quad_nodes, grid_points=spec.grid_points
        )
    if method == "mc":
        cfg = McConfig(
            n_paths=spec.mc_paths,
            n_steps=spec.mc_steps,
            seed=spec.seed,
            antithetic=spec.antithetic,
        )
        price, se = mc_price(model, q, cfg, workers=spec.workers)
        return PriceResult(
            price,
            yield_from_price(price, q.t, q.T),
            "mc",
            {
                "std_error": se,
                "n_paths": cfg.n_paths,
                "n_steps": cfg.n_steps,
                "seed": cfg.seed,
                "antithetic": cfg.antithetic,
            },
        )
    if method == "lattice":
        return _lattice_price_result(model, q, spec)
    return _pde_price_result(model, q, spec)


# -- output -------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _err_estimate(r: PriceResult):
    for key in ("std_error", "quad_error"):
        if key in r.diagnostics:
            return float(r.diagnostics[key])
    return None


def _result_dict(r: PriceResult) -> dict:
    return {
        "price": r.price,
        "yield": r.yield_,
        "method": r.method,
        "diagnostics": _jsonable(r.diagnostics),
    }


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _print_csv(rows: list[tuple], header: tuple) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v if isinstance(v, str) else _fmt(v) for v in row])


def _emit_price(results: list[PriceResult], q: PriceQuery, spec: RunSpec, output: str) -> None:
    if output == "csv":
        rows = [(q.T, r.price, r.yield_, r.method, _err_estimate(r)) for r in results]
        _print_csv(rows, _CSV_HEADER)
        return
    head = {"schema": "1", "command": spec.command, "z": q.z, "t": q.t, "T": q.T}
    if len(results) == 1:
        _print_json({**head, **_result_dict(results[0])})
    else:
        _print_json({**head, "results": [_result_dict(r) for r in results]})


def _emit_curve(rows: list[tuple[float, PriceResult]], spec: RunSpec, output: str) -> None:
    if output == "csv":
        flat = [(T, r.price, r.yield_, r.method, _err_estimate(r)) for T, r in rows]
        _print_csv(flat, _CSV_HEADER)
        return
    _print_json(
        {
            "schema": "1",
            "command": "curve",
            "z": spec.z,
            "t": spec.t,
            "rows": [
                {
                    "T": T,
                    "price": r.price,
                    "yield": r.yield_,
                    "method": r.method,
                    "err_estimate": _err_estimate(r),
                }
                for T, r in rows
            ],
        }
    )


# -- validation suite ---------------------------------------------------------


def _check(name: str, measured: float, tol: float) -> dict:
    return {
        "name": name,
        "measured": float(measured),
        "tolerance": float(tol),
        "status": "pass" if measured <= tol else "fail",
    }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _harmonic_v(x, t):
    return 0.5 * np.asarray(x, dtype=float) ** 2


def _unit_rho(x, t):
    return np.ones_like(np.asarray(x, dtype=float))


def _zero_v(x, t):
    return np.zeros_like(np.asarray(x, dtype=float))


def _kernel_checks() -> list[dict]:
    cfgs = [LatticeConfig(n, -10.0, 10.0, 1601) for n in (64, 128, 256)]
    out = []
    target = ho_kernel_fixed(KernelQuery(0.0, 0.0, 0.0, 1.0, omega=1.0))
    vals = [lattice_expectation(None, _harmonic_v, 0.0, 0.0, 0.0, 1.0, c) for c in cfgs]
    out.append(_check("lattice-ho-fixed", _rel(richardson_first_order(vals), target), 1e-4))
    target = ho_kernel_free(KernelQuery(0.0, 0.0, 0.0, 1.0, omega=1.0))
    vals = [lattice_expectation(None, _harmonic_v, 0.0, 0.0, "free", 1.0, c) for c in cfgs]
    out.append(_check("lattice-ho-free", _rel(richardson_first_order(vals), target), 1e-4))
    target = drift_expectation(
        KernelQuery(0.0, 0.0, 1.0, 1.0, rho=Curve.constant(1.0)), fixed_endpoint=True
    )
    vals = [lattice_expectation(_unit_rho, _zero_v, 0.0, 0.0, 1.0, 1.0, c) for c in cfgs]
    out.append(_check("lattice-drift", _rel(richardson_first_order(vals), target), 1e-4))
    target = ho_kernel_fixed(KernelQuery(0.0, 0.0, 0.0, 1.0, omega=1.0))
    got = conditional_expectation_semiclassical(
        None, PotentialModel.harmonic(1.0), 0.0, 0.0, 0.0, 1.0
    )
    out.append(_check("conditional-ho-fixed", _rel(got, target), 1e-8))
    return out


def _fluctuation_checks() -> list[dict]:
    out = []
    fr = gelfand_yaglom(lambda s: 1.0, 0.0, 1.0, 257)
    out.append(_check("gelfand-yaglom-sinh", _rel(fr.phi_T, math.sinh(1.0)), 1e-8))
    p = EffectiveProblem(
        V=lambda y, s: 0.5 * np.asarray(y, dtype=float) ** 2,
        V_y=lambda y, s: np.asarray(y, dtype=float),
        V_yy=lambda y, s: np.ones_like(np.asarray(y, dtype=float)),
        t=0.0,
        T=1.0,
        y_start=0.0,
        y_end=1.0,
    )
    sol = solve_classical_path(p, grid_points=257)
    fr = gelfand_yaglom(curvature_along_path(p, sol), 0.0, 1.0, 257)
    out.append(_check("van-vleck-harmonic", van_vleck_check(p, sol, fr), 1e-5))
    return out


def _normalization_checks() -> list[dict]:
    worst = 0.0
    for al in (0.5, 2.0):
        for horizon in (1.0, 5.0):
            m = MappedModel(sigma=0.1, theta=0.0, alpha=al, r0=0.05, map=ExponentialMap())
            r = price_semiclassical(
                m,
                PriceQuery(0.05, 0.0, horizon),
                grid_points=2049,
                include_rate_term=False,
            )
            worst = max(worst, abs(r.price - 1.0))
    return [_check("measure-normalization", worst, 1e-8)]


def _model_checks(model, q: PriceQuery, spec: RunSpec) -> list[dict]:
    out = []
    avail = _applicable_methods(model)
    if isinstance(model, HullWhiteParams):
        ex = price_hull_white_exact(model, q)
        if "semiclassical" in avail:
            semi = _price_one(model, q, "semiclassical", spec)
            out.append(_check("exact-vs-semiclassical", _rel(semi.price, ex.price), 1e-7))
        mc = _price_one(model, q, "mc", spec)
        se = mc.diagnostics["std_error"]
        out.append(_check("exact-vs-mc", abs(mc.price - ex.price), max(3.0 * se, 1e-10)))
        pde = _price_one(model, q, "pde", spec)
        out.append(_check("exact-vs-pde", _rel(pde.price, ex.price), 1e-5))
        return out
    if isinstance(model, MappedModel):
        semi = _price_one(model, q, "semiclassical", spec)
        mc = _price_one(model, q, "mc", spec)
        se = mc.diagnostics["std_error"]
        tol = max(5e-3 * mc.price, 3.0 * se)
        out.append(_check("semiclassical-vs-mc", abs(semi.price - mc.price), tol))
        if "pde" in avail:
            pde = _price_one(model, q, "pde", spec)
            out.append(_check("semiclassical-vs-pde", _rel(semi.price, pde.price), 1e-4))
        return out
    semi = price_potential_model(model, q, quad_nodes=spec.quad_nodes)
    roots = _potential_roots(model.V, q.z, q.t)
    pad = 10.0 * math.sqrt(q.T - q.t)
    lo, hi = min(roots) - pad, max(roots) + pad
    target = math.sqrt((q.T - q.t) / 256.0) / 2.5
    n_space = max(301, int(math.ceil((hi - lo) / target)) + 1)
    n_space += 1 - n_space % 2
    vals = []
    for n_t in (64, 128, 256):
        cfg = LatticeConfig(n_time_slices=n_t, x_min=lo, x_max=hi, n_space=n_space)
        vals.append(
            sum(lattice_expectation(None, model.V, x0, q.t, "free", q.T, cfg) for x0 in roots)
        )
    out.append(
        _check("semiclassical-vs-lattice", _rel(semi.price, richardson_first_order(vals)), 1e-4)
    )
    return out


def _default_query(model, spec: RunSpec) -> PriceQuery:
    z = spec.z
    if z is None:
        if isinstance(model, HullWhiteParams):
            z = 0.05
        elif isinstance(model, MappedModel):
            z = model.r0
        else:
            z = float(model.V(1.0, spec.t))
    horizon = 1.0 if spec.T is None else spec.T
    return PriceQuery(z, spec.t, horizon)


def _run_validate(model, spec: RunSpec, output: str) -> int:
    q = _default_query(model, spec)
    if q.T == q.t:
        raise ConfigError("validate needs T > t")
    checks = []
    checks += _kernel_checks()
    checks += _fluctuation_checks()
    checks += _normalization_checks()
    checks += _model_checks(model, q, spec)
    passed = all(c["status"] == "pass" for c in checks)
    if output == "json":
        _print_json(
            {"schema": "1", "command": "validate", "checks": checks, "passed": passed}
        )
    else:
        rows = [(c["name"], c["measured"], c["tolerance"], c["status"]) for c in checks]
        _print_csv(rows, ("check", "measured", "tolerance", "status"))
    return 0 if passed else 1


# -- driver -------------------------------------------------------------------


def _run(spec: RunSpec) -> int:
    model = load_model(spec.model_path)
    output = spec.output
    if output is None:
        output = {"price": "json", "oracle": "json", "curve": "csv", "validate": "csv"}[
            spec.command
        ]
    if spec.command == "validate":
        return _run_validate(model, spec, output)
    methods = _resolve_methods(model, spec)
    if spec.command in ("price", "oracle"):
        q = PriceQuery(spec.z, spec.t, spec.T)
        results = [_price_one(model, q, m, spec) for m in methods]
        _emit_price(results, q, spec, output)
        return 0
    rows = []
    for horizon in spec.maturities:
        q = PriceQuery(spec.z, spec.t, horizon)
        for m in methods:
            rows.append((horizon, _price_one(model, q, m, spec)))
    _emit_curve(rows, spec, output)
    return 0


def run(spec: RunSpec) -> int:
    """Execute a RunSpec, writing the report to standard output.

    Returns the process exit status: 0 on success, 1 when a validation
    check fails or the numerics signal a hard error, 2 on configuration
    problems.
    """
    try:
        return _run(spec)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PathintError as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, metavar="FILE", help="TOML model file")
    p.add_argument("--output", choices=_OUTPUTS, default=None, help="report format")
    p.add_argument("--z", type=float, default=None, help="short rate at the valuation time")
    p.add_argument("--t", type=float, default=0.0, help="valuation time in years")
    p.add_argument("--quad-nodes", type=int, default=65, help="endpoint quadrature nodes")
    p.add_argument("--grid-points", type=int, default=None, help="time-grid points per path solve")
    p.add_argument("--mc-paths", type=int, default=100_000)
    p.add_argument("--mc-steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--workers", type=int, default=None, help="MC worker threads")
    p.add_argument("--lattice-slices", type=int, default=256)
    p.add_argument("--lattice-space", type=int, default=None, help="lattice cells (odd)")
    p.add_argument("--pde-nz", type=int, default=400)
    p.add_argument("--pde-nt", type=int, default=400)
    p.add_argument("--pde-zmin", type=float, default=None)
    p.add_argument("--pde-zmax", type=float, default=None)
    p.add_argument("--pde-scheme", choices=("implicit", "crank-nicolson"), default="crank-nicolson")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathint",
        description="Zero-coupon bond pricing under short-rate models.",
    )
    from pathint import __version__

    parser.add_argument("--version", action="version", version=f"pathint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one bond")
    _add_common(p)
    p.add_argument("--T", type=float, required=True, help="maturity in years")
    p.add_argument("--method", choices=_SPEC_METHODS, default=None)

    p = sub.add_parser("curve", help="price a strip of maturities")
    _add_common(p)
    p.add_argument("--maturities", required=True, help="comma-separated maturities")
    p.add_argument("--method", choices=_SPEC_METHODS, default=None)

    p = sub.add_parser("validate", help="run the golden validation suite")
    _add_common(p)
    p.add_argument("--T", type=float, default=None, help="horizon for model cross-checks")

    p = sub.add_parser("oracle", help="run a single numerical oracle")
    _add_common(p)
    p.add_argument("--T", type=float, required=True, help="maturity in years")
    p.add_argument("--method", choices=_ORACLE_METHODS, default=None)
    return parser


def main(argv=None) -> None:
    """Console entry point."""
    args = _build_parser().parse_args(argv)
    maturities: tuple[float, ...] = ()
    raw = getattr(args, "maturities", None)
    if raw is not None:
        try:
            maturities = tuple(float(v) for v in raw.split(",") if v.strip())
        except ValueError:
            print(f"error: could not parse maturities {raw!r}", file=sys.stderr)
            sys.exit(2)
    try:
        spec = RunSpec(
            command=args.command,
            model_path=args.model,
            z=args.z,
            t=args.t,
            T=getattr(args, "T", None),
            maturities=maturities,
            method=getattr(args, "method", None),
            output=args.output,
            quad_nodes=args.quad_nodes,
            grid_points=args.grid_points,
            mc_paths=args.mc_paths,
            mc_steps=args.mc_steps,
            seed=args.seed,
            antithetic=args.antithetic,
            workers=args.workers,
            lattice_slices=args.lattice_slices,
            lattice_space=args.lattice_space,
            pde_nz=args.pde_nz,
            pde_nt=args.pde_nt,
            pde_zmin=args.pde_zmin,
            pde_zmax=args.pde_zmax,
            pde_scheme=args.pde_scheme,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(run(spec))


if __name__ == "__main__":
    main()
