"""Checks that a computed state behaves like a critical point.

For a solution with mass ``lambda`` and chemical potential ``mu`` the three
relations

    T + I + Q           = E
    I + 3/2 Q           = -E + mu lambda
    2T + 3I + 9/2 Q     = 0

hold, giving ``T = 3/2 (E - mu lambda)``, ``I = (E + 5 lambda mu)/2`` and
``Q = -(mu lambda + E)``.  :func:`virial_check` reports how far a state is
from each of them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.fft as sfft

from .energy import EnergyBreakdown, _apply, _as_multiplier
from .grid import Field, workers

__all__ = [
    "VirialReport",
    "DecayReport",
    "CurveReport",
    "virial_check",
    "virial_solution",
    "yukawa_residual",
    "center_field",
    "radial_max_profile",
    "decay_fit",
    "half_max_radius",
    "curve_checks",
]


@dataclass(frozen=True)
class VirialReport:
    T: float
    I: float
    Q: float
    E: float
    mu: float
    lam: float
    res_identity1: float
    res_identity2: float
    res_identity3: float
    res_dilation: float
    mu_sign_ok: bool

    @property
    def max_residual(self) -> float:
        return max(self.res_identity1, self.res_identity2, self.res_identity3, self.res_dilation)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def virial_check(breakdown: EnergyBreakdown, mu: float, lam: float) -> VirialReport:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    T, I, Q, E = breakdown.T, breakdown.I, breakdown.Q, breakdown.E
    scale = T + abs(I) + Q
    scale = scale if scale > 0 else 1.0
    return VirialReport(
        T=T,
        I=I,
        Q=Q,
        E=E,
        mu=mu,
        lam=lam,
        res_identity1=abs(T - 1.5 * (E - mu * lam)) / scale,
        res_identity2=abs(I - 0.5 * (E + 5.0 * lam * mu)) / scale,
        res_identity3=abs(Q + (mu * lam + E)) / scale,
        res_dilation=abs(2.0 * T + 3.0 * I + 4.5 * Q) / scale,
        mu_sign_ok=not (E <= 0.0 and mu >= 0.0),
    )


def virial_solution(E: float, mu: float, lam: float) -> tuple[float, float, float]:
    """Solve the 3x3 linear system for ``(T, I, Q)`` given ``(E, mu, lambda)``."""
    A = np.array([[1.0, 1.0, 1.0], [0.0, 1.0, 1.5], [2.0, 3.0, 4.5]])
    rhs = np.array([E, -E + mu * lam, 0.0])
    T, I, Q = np.linalg.solve(A, rhs)
    return float(T), float(I), float(Q)


def yukawa_residual(psi: Field, mu: float, b: float, m, t: float | None = None) -> float:
    """Relative L2 size of ``psi - G_t * [(mu + t^2 - W) psi]``.

    ``W = psi^2 + b K*psi^2 + psi^3`` and ``G_t`` has symbol
    ``1/(|k|^2 + t^2)``; this is the Euler-Lagrange residual preconditioned
    by the Yukawa resolvent.  ``t`` defaults to ``sqrt(-mu)/2``.
    """
    if not mu < 0:
        raise ValueError(f"yukawa_residual needs mu < 0, got {mu}")
    if t is None:
        t = 0.5 * math.sqrt(-mu)
    if not (t > 0 and t * t < -mu):
        raise ValueError(f"need 0 < t^2 < -mu, got t^2={t * t}, mu={mu}")
    m = _as_multiplier(m)
    grid = psi.grid
    _, W = _apply(psi, b, m, False)
    rhs = (mu + t * t - W) * psi.values
    real = not np.iscomplexobj(rhs)
    k2 = grid.k_squared(real)
    if real:
        g = sfft.irfftn(sfft.rfftn(rhs, workers=workers()) / (k2 + t * t), s=grid.shape, workers=workers())
    else:
        g = sfft.ifftn(sfft.fftn(rhs, workers=workers()) / (k2 + t * t), workers=workers())
    diff = psi.values - g
    num = np.vdot(diff, diff).real
    den = np.vdot(psi.values, psi.values).real
    return float(math.sqrt(num / den)) if den > 0 else 0.0


# ------------------------------------------------------------------ decay


@dataclass(frozen=True)
class DecayReport:
    t_fit: float
    r_squared: float
    window: tuple[float, float]
    mu: float
    n_shells: int
    rate_ratio: float  # t_fit / sqrt(-mu), a measurement only

    def as_dict(self) -> dict:
        return {
            "t_fit": self.t_fit,
            "r2": self.r_squared,
            "window": list(self.window),
            "mu": self.mu,
            "n_shells": self.n_shells,
            "rate_ratio": self.rate_ratio,
        }


def center_field(psi: Field) -> Field:
    """Cyclically shift so the density centroid sits on the origin node.

    The centroid is taken along each axis with the circular mean, which is
    insensitive to where the droplet sits relative to the box faces.
    """
    grid = psi.grid
    rho = psi.density
    shifts = []
    for ax, n in enumerate(grid.n):
        other = tuple(j for j in range(3) if j != ax)
        line = rho.sum(axis=other)
        ang = 2 * np.pi * np.arange(n) / n
        c = np.angle(np.sum(line * np.exp(1j * ang)))
        idx = int(round(c / (2 * np.pi) * n)) % n
        shifts.append(n // 2 - idx)
    return Field(grid, np.roll(psi.values, shifts, axis=(0, 1, 2)))


def radial_max_profile(psi: Field, dr: float | None = None):
    """``(r, max |psi| on the shell [r - dr/2, r + dr/2))`` about the origin node."""
    grid = psi.grid
    dr = max(grid.spacing) if dr is None else dr
    r = grid.radius()
    amp = np.abs(psi.values)
    idx = np.floor(r / dr + 0.5).astype(int).ravel()
    out = np.zeros(idx.max() + 1)
    np.maximum.at(out, idx, amp.ravel())
    radii = np.arange(out.size) * dr
    return radii, out


def _half_mass_radius(psi: Field) -> float:
    r = psi.grid.radius().ravel()
    rho = psi.density.ravel()
    order = np.argsort(r)
    cum = np.cumsum(rho[order])
    return float(r[order][np.searchsorted(cum, 0.5 * cum[-1])])


def half_max_radius(radii: np.ndarray, profile: np.ndarray) -> float:
    """First radius at which a radial profile drops below half its peak."""
    peak = int(np.argmax(profile))
    below = np.nonzero(profile[peak:] < 0.5 * profile[peak])[0]
    if below.size == 0:
        return float(radii[-1])
    return float(radii[peak + below[0]])


def decay_fit(psi: Field, mu: float, r_min: float | None = None, r_max: float | None = None,
              r_half: str = "half_max") -> DecayReport:
    """Fit ``log max|psi|`` on radial shells to a straight line.

    The field is centred first.  Default window: from twice ``r_half`` to
    80% of the largest half box length.  ``r_half`` is the radius where the
    shell-maximum profile falls to half its peak (``"half_max"``, default)
    or the radius of the ball holding half the mass (``"half_mass"``).  For
    elongated droplets the half-mass radius lies well inside the flat core
    along the long axis, so the window would start before the tail does.
    """
    if not mu < 0:
        raise ValueError(f"decay_fit needs mu < 0, got {mu}")
    c = center_field(psi)
    radii, prof = radial_max_profile(c)
    if r_half == "half_max":
        rh = half_max_radius(radii, prof)
    elif r_half == "half_mass":
        rh = _half_mass_radius(c)
    else:
        raise ValueError(f"unknown r_half rule {r_half!r}")
    lo = 2.0 * rh if r_min is None else r_min
    hi = 0.8 * 0.5 * max(c.grid.L) if r_max is None else r_max
    sel = (radii >= lo) & (radii <= hi) & (prof > 0)
    if sel.sum() < 5:
        raise ValueError(f"decay window [{lo:.3g}, {hi:.3g}] holds fewer than 5 radial shells")
    x = radii[sel]
    y = np.log(prof[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    t_fit = -float(slope)
    return DecayReport(
        t_fit=t_fit,
        r_squared=max(0.0, min(1.0, r2)),
        window=(float(lo), float(hi)),
        mu=mu,
        n_shells=int(sel.sum()),
        rate_ratio=t_fit / math.sqrt(-mu),
    )


# ------------------------------------------------------------------ curves


@dataclass
class CurveReport:
    monotonicity_violations: list = field(default_factory=list)
    subadditivity_violations: list = field(default_factory=list)
    mu_sign_violations: list = field(default_factory=list)
    subadditivity_pairs_checked: int = 0

    @property
    def ok(self) -> bool:
        return not (self.monotonicity_violations or self.subadditivity_violations or self.mu_sign_violations)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "monotonicity_violations": self.monotonicity_violations,
            "subadditivity_violations": self.subadditivity_violations,
            "mu_sign_violations": self.mu_sign_violations,
            "subadditivity_pairs_checked": self.subadditivity_pairs_checked,
        }


def curve_checks(curve, slack: float = 1e-3, rel_match: float = 1e-9) -> CurveReport:
    """Scan a table of ``(lambda, E, mu)`` rows sorted by ``lambda``.

    Flags ``E`` increasing by more than ``slack * (1 + |E|)``, pairs with
    ``lambda_i + lambda_j`` in the table where
    ``E(lambda_i + lambda_j) > E(lambda_i) + E(lambda_j) + slack``, and rows
    with ``E < 0`` but ``mu >= 0``.  ``mu`` may be ``None`` (not computed).
    """
    rows = [(float(r[0]), float(r[1]), None if r[2] is None else float(r[2])) for r in curve]
    lams = [r[0] for r in rows]
    if any(b < a for a, b in zip(lams, lams[1:])):
        raise ValueError("curve must be sorted by lambda")
    rep = CurveReport()
    for (l0, e0, _), (l1, e1, _) in zip(rows, rows[1:]):
        if e1 > e0 + slack * (1.0 + abs(e0)):
            rep.monotonicity_violations.append((l0, e0, l1, e1))
    for lam, e, mu in rows:
        if mu is not None and e < 0 and mu >= 0:
            rep.mu_sign_violations.append((lam, e, mu))
    by_lam = {lam: e for lam, e, _ in rows}
    for i, (li, ei, _) in enumerate(rows):
        for lj, ej, _ in rows[i:]:
            target = li + lj
            match = next((l for l in by_lam if abs(l - target) <= rel_match * max(1.0, target)), None)
            if match is None:
                continue
            rep.subadditivity_pairs_checked += 1
            if by_lam[match] > ei + ej + slack:
                rep.subadditivity_violations.append((li, lj, by_lam[match], ei + ej))
    return rep
