"""Compute a self-bound droplet and run the diagnostics on it.

Uses b = 5, where the critical mass is small and a modest grid resolves the
droplet in a few seconds.  Pass ``--full`` to run the b = 2 acceptance case
on the default grid instead (a few minutes on one core).

    python demos/droplet.py [--full]
"""

import argparse
import math

import numpy as np

from gplhy import KernelSpec, MinimizeOptions, minimize
from gplhy.bounds import upper_bound
from gplhy.diagnostics import decay_fit, radial_max_profile, center_field, virial_check, yukawa_residual
from gplhy.minimize import auto_grid
from gplhy.params import ReducedParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    if args.full:
        b = 2.0
        lam = 2 * upper_bound(b)[0]
        grid = auto_grid(lam, b)
    else:
        b = 5.0
        lam = 2 * upper_bound(b)[0]
        grid = auto_grid(lam, b, n=(48, 48, 64), radial_factor=16.0)

    print(f"b = {b}, lambda = {lam:.4g}, grid {grid.n}, box {tuple(round(L, 2) for L in grid.L)}")
    res = minimize(ReducedParams(b=b, lam=lam), grid, KernelSpec.dipolar(), MinimizeOptions())
    print(f"{res.message} after {res.iterations} iterations ({res.seconds:.1f}s)")
    br = res.breakdown
    print(f"E = {br.E:.6g}  (T {br.T:.4g}, I4 {br.I4:.4g}, Idd {br.Idd:.4g}, Q {br.Q:.4g})")
    print(f"mu = {res.mu:.6g}, residual = {res.residual:.2e}")

    vir = virial_check(br, res.mu, lam)
    print(f"virial residuals: {vir.res_identity1:.2e} {vir.res_identity2:.2e} "
          f"{vir.res_identity3:.2e} {vir.res_dilation:.2e}")
    print(f"Yukawa residual (t^2 = -mu/4): {yukawa_residual(res.field, res.mu, b, KernelSpec.dipolar()):.2e}")

    psi = center_field(res.field)
    radii, prof = radial_max_profile(psi)
    print("shell maxima of |psi|:")
    for r, p in list(zip(radii, prof))[:: max(1, len(radii) // 12)]:
        print(f"  r = {r:7.2f}   {p:.3e}")
    try:
        d = decay_fit(res.field, res.mu)
        print(f"decay fit: t = {d.t_fit:.4g} (sqrt(-mu) = {math.sqrt(-res.mu):.4g}), R^2 = {d.r_squared:.5f}")
    except ValueError as exc:
        print(f"decay fit not available on this grid: {exc}")
    print(f"peak density {np.max(psi.density):.4g}")


if __name__ == "__main__":
    main()
