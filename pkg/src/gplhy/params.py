"""Physical <-> reduced parameter map.

The reduced problem depends only on the ratio ``b = a_dd / a_s`` and the
rescaled mass ``lambda``.  The field is rescaled as
``psi_phys(x) = alpha**0.5 * ell**1.5 * psi(ell * x)`` with the two scale
factors fixed by ``alpha * ell * a_s = 1`` and
``alpha**1.5 * ell**2.5 * gamma_QF = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PhysicalParams",
    "ReducedParams",
    "ScaleFactors",
    "to_reduced",
    "to_physical",
]

_REL_TOL = 1e-12


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return value


@dataclass(frozen=True)
class PhysicalParams:
    a_s: float
    a_dd: float
    gamma_QF: float
    N: float

    def __post_init__(self):
        for name in ("a_s", "a_dd", "gamma_QF", "N"):
            object.__setattr__(self, name, _check_positive(name, getattr(self, name)))


@dataclass(frozen=True)
class ReducedParams:
    b: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "b", _check_positive("b", self.b))
        object.__setattr__(self, "lam", _check_positive("lambda", self.lam))


@dataclass(frozen=True)
class ScaleFactors:
    alpha: float
    ell: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_positive("alpha", self.alpha))
        object.__setattr__(self, "ell", _check_positive("ell", self.ell))

    @property
    def energy_scale(self) -> float:
        return self.alpha * self.ell**2

    # The two constraints determine a_s and gamma_QF from (alpha, ell).
    @property
    def a_s(self) -> float:
        return 1.0 / (self.alpha * self.ell)

    @property
    def gamma_QF(self) -> float:
        return 1.0 / (self.alpha**1.5 * self.ell**2.5)


def scale_factors(a_s: float, gamma_QF: float) -> ScaleFactors:
    a_s = _check_positive("a_s", a_s)
    gamma_QF = _check_positive("gamma_QF", gamma_QF)
    return ScaleFactors(alpha=gamma_QF * a_s**-2.5, ell=a_s**1.5 / gamma_QF)


def to_reduced(p: PhysicalParams) -> tuple[ReducedParams, ScaleFactors]:
    """Return ``(ReducedParams, ScaleFactors)`` for physical parameters ``p``.

    ``N = alpha * lambda`` links the two mass constraints.
    """
    s = scale_factors(p.a_s, p.gamma_QF)
    return ReducedParams(b=p.a_dd / p.a_s, lam=p.N / s.alpha), s


def to_physical(r: ReducedParams, s: ScaleFactors) -> PhysicalParams:
    """Inverse of :func:`to_reduced`.

    Any positive ``(alpha, ell)`` pair is consistent: it fixes ``a_s`` and
    ``gamma_QF`` through the two scaling constraints.
    """
    if not (math.isfinite(s.a_s) and math.isfinite(s.gamma_QF)):
        raise ValueError("scale factors do not define finite a_s, gamma_QF")
    a_s = s.a_s
    return PhysicalParams(a_s=a_s, a_dd=r.b * a_s, gamma_QF=s.gamma_QF, N=s.alpha * r.lam)


def check_scale_factors(s: ScaleFactors, a_s: float, gamma_QF: float) -> None:
    """Raise ``ValueError`` unless ``s`` satisfies both scaling constraints."""
    c1 = s.alpha * s.ell * a_s
    c2 = s.alpha**1.5 * s.ell**2.5 * gamma_QF
    if abs(c1 - 1.0) > 1e3 * _REL_TOL or abs(c2 - 1.0) > 1e3 * _REL_TOL:
        raise ValueError(
            f"inconsistent scale factors: alpha*ell*a_s={c1!r}, "
            f"alpha^1.5*ell^2.5*gamma_QF={c2!r}"
        )
