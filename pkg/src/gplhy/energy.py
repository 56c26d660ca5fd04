"""Reduced energy, its four-term breakdown and the Euler-Lagrange operator.

    E_b(psi) = int |grad psi|^2 + 1/2 int |psi|^4
               + b/2 int (K * |psi|^2) |psi|^2 + 2/5 int |psi|^5

The operator ``H psi = (-Delta + |psi|^2 + b K*|psi|^2 + |psi|^3) psi`` is
half the L2 gradient: ``dE[h] = 2 Re <H psi, h>`` holds exactly for the
discrete energy below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import Field, GridSpec, convolve_kernel, inner, kinetic_energy, workers
from .kernel import KernelSpec, Multiplier
from .params import PhysicalParams, to_reduced

__all__ = [
    "EnergyBreakdown",
    "ELResult",
    "energy_breakdown",
    "energy",
    "el_apply",
    "evaluate_physical_energy",
    "dealias_mask",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    T: float
    I4: float
    Idd: float
    Q: float

    @property
    def I(self) -> float:
        return self.I4 + self.Idd

    @property
    def E(self) -> float:
        return self.T + self.I4 + self.Idd + self.Q

    def as_dict(self) -> dict:
        return {
            "total": self.E,
            "kinetic": self.T,
            "quartic": self.I4,
            "dipolar": self.Idd,
            "quintic": self.Q,
        }


@dataclass(frozen=True)
class ELResult:
    h_psi: Field
    mu: float
    residual: float


def _as_multiplier(m) -> Multiplier:
    if isinstance(m, KernelSpec):
        return m.multiplier()
    return m


def dealias_mask(grid: GridSpec, real: bool) -> np.ndarray:
    """2/3-rule spectral mask."""
    kx, ky, kz = grid.wavenumbers(real)
    out = np.ones(np.broadcast_shapes(kx.shape, ky.shape, kz.shape), dtype=bool)
    for k, n, L in zip((kx, ky, kz), grid.n, grid.L):
        kmax = np.pi * n / L
        out = out & (np.abs(k) <= (2.0 / 3.0) * kmax)
    return out


def _filtered(psi: Field) -> Field:
    vals = psi.values
    if np.iscomplexobj(vals):
        spec = sfft.fftn(vals, workers=workers())
        spec *= dealias_mask(psi.grid, False)
        return psi.with_values(sfft.ifftn(spec, workers=workers()))
    spec = sfft.rfftn(vals, workers=workers())
    spec *= dealias_mask(psi.grid, True)
    return psi.with_values(sfft.irfftn(spec, s=psi.grid.shape, workers=workers()))


def _check_finite(psi: Field) -> None:
    if not np.all(np.isfinite(psi.values)):
        raise FloatingPointError("field contains non-finite values")


def _terms(psi: Field, b: float, m: Multiplier):
    """Interaction densities shared by the energy and the operator."""
    rho = psi.density
    phi = convolve_kernel(Field(psi.grid, rho), m).values
    rho15 = rho * np.sqrt(rho)
    return rho, phi, rho15


def energy_breakdown(psi: Field, b: float, m, dealias: bool = False) -> EnergyBreakdown:
    """Kinetic, quartic, dipolar and quintic terms of ``E_b(psi)``.

    With ``dealias=True`` the interaction terms are evaluated on the
    2/3-rule filtered field.
    """
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    _check_finite(psi)
    m = _as_multiplier(m)
    h = psi.grid.cell_volume
    T = kinetic_energy(psi)
    src = _filtered(psi) if dealias else psi
    rho, phi, rho15 = _terms(src, b, m)
    I4 = 0.5 * h * float(np.sum(rho * rho))
    Idd = 0.5 * b * h * float(np.sum(phi * rho))
    Q = 0.4 * h * float(np.sum(rho * rho15))
    return EnergyBreakdown(T=T, I4=I4, Idd=Idd, Q=Q)


def energy(psi: Field, b: float, m, dealias: bool = False) -> float:
    return energy_breakdown(psi, b, m, dealias).E


def _apply(psi: Field, b: float, m: Multiplier, dealias: bool):
    grid = psi.grid
    vals = psi.values
    real = not np.iscomplexobj(vals)
    if real:
        spec = sfft.rfftn(vals, workers=workers())
        lap = sfft.irfftn(grid.k_squared(True) * spec, s=grid.shape, workers=workers())
    else:
        spec = sfft.fftn(vals, workers=workers())
        lap = sfft.ifftn(grid.k_squared(False) * spec, workers=workers())
    src = _filtered(psi) if dealias else psi
    rho, phi, rho15 = _terms(src, b, m)
    pot = rho + b * phi + rho15
    nl = pot * src.values
    if dealias:
        nl = _filtered(psi.with_values(nl)).values
    return lap + nl, pot


def el_apply(psi: Field, b: float, m, dealias: bool = False) -> ELResult:
    """Apply the Euler-Lagrange operator and form the Rayleigh quotient.

    ``mu = <psi, H psi> / lambda`` and ``residual = ||H psi - mu psi|| / ||psi||``.
    A zero-mass field has a well-defined image but no ``mu``; that case
    raises ``ValueError``.
    """
    if b <= 0:
        raise ValueError(f"b must be positive, got {b}")
    _check_finite(psi)
    m = _as_multiplier(m)
    hv, _ = _apply(psi, b, m, dealias)
    h_psi = psi.with_values(hv)
    lam = psi.mass()
    if lam <= 0:
        raise ValueError("mu is undefined for a zero-mass field")
    q = inner(psi, h_psi) / lam
    if abs(q.imag) > 1e-10 * max(1.0, abs(q.real)):
        raise ArithmeticError(f"Rayleigh quotient is not real: {q}")
    mu = q.real
    r = hv - mu * psi.values
    residual = float(np.sqrt(psi.grid.cell_volume * np.vdot(r, r).real / lam))
    return ELResult(h_psi=h_psi, mu=mu, residual=residual)


def el_image(psi: Field, b: float, m, dealias: bool = False) -> Field:
    """``H psi`` alone; defined for every field, including zero."""
    _check_finite(psi)
    hv, _ = _apply(psi, b, _as_multiplier(m), dealias)
    return psi.with_values(hv)


def evaluate_physical_energy(psi: Field, p: PhysicalParams, spec: KernelSpec | None = None) -> float:
    """Unreduced functional with physical coefficients, on the field ``psi`` as given.

    ``int |grad psi|^2 + a_s/2 int |psi|^4 + a_dd/2 int (K*|psi|^2)|psi|^2
    + 2/5 gamma_QF int |psi|^5``.
    """
    spec = KernelSpec.dipolar() if spec is None else spec
    _check_finite(psi)
    m = spec.multiplier()
    h = psi.grid.cell_volume
    rho, phi, rho15 = _terms(psi, 1.0, m)
    return (
        kinetic_energy(psi)
        + 0.5 * p.a_s * h * float(np.sum(rho * rho))
        + 0.5 * p.a_dd * h * float(np.sum(phi * rho))
        + 0.4 * p.gamma_QF * h * float(np.sum(rho * rho15))
    )


def rescale_to_physical(psi: Field, p: PhysicalParams) -> Field:
    """Map a reduced field to ``psi_phys(x) = alpha^1/2 ell^3/2 psi(ell x)``.

    The physical field lives on the grid with box lengths ``L / ell``.
    """
    _, s = to_reduced(p)
    grid = psi.grid
    g2 = GridSpec(grid.n, tuple(L / s.ell for L in grid.L))
    return Field(g2, np.sqrt(s.alpha) * s.ell**1.5 * psi.values)
