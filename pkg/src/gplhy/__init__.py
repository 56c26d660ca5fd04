"""Self-bound droplets of the dipolar Gross-Pitaevskii energy with a quintic
(Lee-Huang-Yang) term.

Subpackages are plain modules:

- :mod:`gplhy.params`       physical <-> reduced parameters
- :mod:`gplhy.grid`         periodic grids, fields and spectral operations
- :mod:`gplhy.kernel`       interaction kernels, multipliers and quadrature oracles
- :mod:`gplhy.energy`       the energy, its breakdown and the Euler-Lagrange operator
- :mod:`gplhy.minimize`     constrained minimization, energy curves, critical mass
- :mod:`gplhy.bounds`       variational lower and upper bounds on the critical mass
- :mod:`gplhy.diagnostics`  virial, Yukawa, decay and curve checks
- :mod:`gplhy.io`           snapshots and reports
"""

__version__ = "0.1.0"

from .params import PhysicalParams, ReducedParams, ScaleFactors, to_physical, to_reduced  # noqa: E402
from .grid import Field, GridSpec, sample  # noqa: E402
from .kernel import KernelSpec  # noqa: E402
from .energy import EnergyBreakdown, el_apply, energy, energy_breakdown  # noqa: E402
from .minimize import MinimizeOptions, MinimizeResult, critical_mass, energy_curve, minimize  # noqa: E402
from .bounds import bounds_report, sobolev_lower_bound, upper_bound  # noqa: E402

__all__ = [
    "__version__",
    "PhysicalParams",
    "ReducedParams",
    "ScaleFactors",
    "to_physical",
    "to_reduced",
    "Field",
    "GridSpec",
    "sample",
    "KernelSpec",
    "EnergyBreakdown",
    "el_apply",
    "energy",
    "energy_breakdown",
    "MinimizeOptions",
    "MinimizeResult",
    "critical_mass",
    "energy_curve",
    "minimize",
    "bounds_report",
    "sobolev_lower_bound",
    "upper_bound",
]
