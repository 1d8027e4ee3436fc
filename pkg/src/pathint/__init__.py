"""Zero-coupon bond pricing under short-rate models via Euclidean path integrals.

The package prices v(z, t, T) = E_Q[exp(-int_t^T r_s ds)] three ways: exact
closed forms for the linear Gaussian (Hull-White / Vasicek) family, a
semiclassical approximation built from the classical action and the
Gelfand-Yaglom fluctuation determinant for mapped and potential models, and
independent numerical oracles (Monte Carlo, transfer-matrix lattice,
Crank-Nicolson PDE) used for cross-validation.
"""

from __future__ import annotations

from pathint.classical import (
    ClassicalSolution,
    EffectiveProblem,
    evaluate_action,
    solve_classical_path,
)
from pathint.errors import (
    FocalPointError,
    InstabilityError,
    MultipleSolutionsError,
    NoRootError,
    NonConvergenceError,
    PathintError,
)
from pathint.fluctuation import (
    FluctuationResult,
    curvature_along_path,
    gelfand_yaglom,
    van_vleck_check,
)
from pathint.kernels import (
    KernelQuery,
    drift_expectation,
    free_kernel,
    ho_kernel_fixed,
    ho_kernel_free,
    measure_change_kernel,
)
from pathint.models import (
    Curve,
    CustomMap,
    ExponentialMap,
    HullWhiteParams,
    LinearMap,
    MappedModel,
    PotentialModel,
    QuadraticMap,
    RateMap,
    StateRoots,
    as_curve,
    eta,
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
    conditional_expectation_semiclassical,
    price_hull_white_exact,
    price_potential_model,
    price_semiclassical,
    yield_from_price,
)

__version__ = "0.1.0"

__all__ = [
    "ClassicalSolution",
    "Curve",
    "CustomMap",
    "EffectiveProblem",
    "ExponentialMap",
    "FluctuationResult",
    "FocalPointError",
    "HullWhiteParams",
    "InstabilityError",
    "KernelQuery",
    "LatticeConfig",
    "LinearMap",
    "MappedModel",
    "McConfig",
    "MultipleSolutionsError",
    "NoRootError",
    "NonConvergenceError",
    "PathintError",
    "PdeConfig",
    "PotentialModel",
    "PriceQuery",
    "PriceResult",
    "QuadraticMap",
    "RateMap",
    "StateRoots",
    "as_curve",
    "conditional_expectation_semiclassical",
    "curvature_along_path",
    "drift_expectation",
    "eta",
    "evaluate_action",
    "free_kernel",
    "gelfand_yaglom",
    "ho_kernel_fixed",
    "ho_kernel_free",
    "lattice_expectation",
    "mc_price",
    "measure_change_kernel",
    "pde_price",
    "price_hull_white_exact",
    "price_potential_model",
    "price_semiclassical",
    "richardson_first_order",
    "solve_classical_path",
    "solve_state_roots",
    "van_vleck_check",
    "yield_from_price",
    "__version__",
]
