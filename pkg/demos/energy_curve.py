"""Energy curve across the critical mass at b = 5.

Below the critical mass the minimiser spreads the field over the whole box
and the energy stays at the (tiny, positive) value of the uniform state;
above it a droplet forms and the energy turns negative and keeps falling.

    python demos/energy_curve.py
"""

import numpy as np

from gplhy import KernelSpec, MinimizeOptions, energy_curve
from gplhy.bounds import sobolev_lower_bound, upper_bound
from gplhy.diagnostics import curve_checks
from gplhy.minimize import auto_grid


def main():
    b = 5.0
    up = upper_bound(b)[0]
    print(f"b = {b}: lower bound {sobolev_lower_bound(b):.4g}, ansatz upper bound {up:.4g}")
    lams = np.linspace(0.25 * up, 2.0 * up, 8)
    grid = auto_grid(lams[-1], b, n=(32, 32, 48), radial_factor=16.0)
    curve = energy_curve(b, lams, grid, KernelSpec.dipolar(), MinimizeOptions())
    print(f"{'lambda':>10} {'E':>12} {'mu':>12} converged")
    for p in curve:
        print(f"{p.lam:10.4g} {p.E:12.5g} {p.mu:12.5g} {p.converged}")
    rep = curve_checks(curve)
    print("curve checks:", "ok" if rep.ok else rep.as_dict())
    for p in curve:
        if p.E > 0 and p.mu < 0:
            # a localized critical point whose energy lies above the spreading
            # value 0; the minimizer stops there, and the checks flag it
            print(f"lambda = {p.lam:.4g}: localized state with E > 0 (not the infimum)")


if __name__ == "__main__":
    main()
