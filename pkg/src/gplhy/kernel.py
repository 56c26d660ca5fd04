"""Homogeneous singular kernels ``K(x) = Omega(x/|x|) / |x|^3`` and their symbols.

Two variants are supported: the dipolar kernel with a unit axis ``n``,
``Omega(u) = 3/(4 pi) * (1 - 3 (n.u)^2)``, whose Fourier multiplier is
``3 (k.n)^2 / |k|^2 - 1``, and a general even, mean-zero ``Omega`` given as a
vectorised callable on unit vectors.

For a general ``Omega`` the symbol is

    m(u) = int_{S^2} Omega(v) log(1 / |u.v|) dsigma(v)

which :func:`multiplier_from_omega` evaluates by direct spherical quadrature.
Grid multipliers use the Funk-Hecke form of the same integral: ``Omega`` is
projected on spherical harmonics and degree ``l`` is scaled by
``c_l = 2 pi int_{-1}^{1} P_l(t) log(1/|t|) dt``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .grid import Field, GridSpec

__all__ = [
    "KernelSpec",
    "Multiplier",
    "omega_value",
    "multiplier_value",
    "multiplier_from_omega",
    "kernel_value",
    "pv_convolve_direct",
    "pv_convolve_extrapolated",
    "pv_convolve_smooth",
    "far_field_check",
    "FarFieldTable",
    "truncated_multiplier_oracle",
    "sphere_quadrature",
    "load_omega_csv",
]

OMEGA_DIP_AXIS = -3.0 / (2.0 * np.pi)
OMEGA_DIP_EQUATOR = 3.0 / (4.0 * np.pi)


def _unit(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise ValueError(f"{name} must have unit length (got |.|={norm})")
    return v


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Kernel description; construct with :meth:`dipolar` or :meth:`general`.

    ``omega`` takes an array of unit vectors with shape ``(..., 3)`` and
    returns values with shape ``(...)``.
    """

    kind: str
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    omega: Callable[[np.ndarray], np.ndarray] | None = None
    lmax: int = 16
    _mult: "Multiplier" = field(default=None, repr=False, compare=False)
    _state: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def dipolar(cls, axis=(0.0, 0.0, 1.0)) -> "KernelSpec":
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a) if abs(np.linalg.norm(a) - 1.0) < 1e-9 else _unit(a, "axis")
        return cls("dipolar", axis=tuple(float(c) for c in a))

    @classmethod
    def general(cls, omega, lmax: int = 16, validate: bool = True) -> "KernelSpec":
        spec = cls("general", omega=omega, lmax=int(lmax))
        if validate:
            spec.validate()
        return spec

    def __post_init__(self):
        if self.kind not in ("dipolar", "general"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "general" and self.omega is None:
            raise ValueError("general kernels need an omega callable")
        if self.kind == "dipolar":
            _unit(self.axis, "axis")
        object.__setattr__(self, "_mult", Multiplier(self))

    def multiplier(self) -> "Multiplier":
        return self._mult

    def validate(self, rng=None) -> None:
        """Check evenness on random antipodal pairs and zero spherical mean."""
        rng = np.random.default_rng(0) if rng is None else rng
        u = rng.normal(size=(256, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        a = omega_value(self, u)
        b = omega_value(self, -u)
        scale = max(1.0, float(np.abs(a).max()))
        if np.abs(a - b).max() > 1e-10 * scale:
            raise ValueError("Omega must be even: Omega(-u) != Omega(u)")
        nodes, w = sphere_quadrature(48, 96)
        mean = float(w @ omega_value(self, nodes))
        if abs(mean) > 1e-8 * scale:
            raise ValueError(f"Omega must have zero spherical mean, got {mean:.3e}")


def omega_value(spec: KernelSpec, u) -> np.ndarray | float:
    """Angular profile ``Omega(u)`` for unit vectors ``u`` of shape ``(..., 3)``."""
    u = _unit(u, "u")
    if spec.kind == "dipolar":
        c = u @ np.asarray(spec.axis)
        out = 3.0 / (4.0 * np.pi) * (1.0 - 3.0 * c * c)
    else:
        out = np.asarray(spec.omega(u), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def kernel_value(spec: KernelSpec, x) -> np.ndarray:
    """``K(x)`` for ``x != 0``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    u = x / r[..., None]
    if spec.kind == "dipolar":
        c = u @ np.asarray(spec.axis)
        om = 3.0 / (4.0 * np.pi) * (1.0 - 3.0 * c * c)
    else:
        om = np.asarray(spec.omega(u), dtype=float)
    return om / r**3


def multiplier_value(spec: KernelSpec, k) -> np.ndarray | float:
    """Fourier symbol ``m(k)``, with ``m(0) = 0``."""
    k = np.asarray(k, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    if spec.kind == "dipolar":
        kn = k @ np.asarray(spec.axis)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(k2 > 0, 3.0 * kn * kn / np.where(k2 > 0, k2, 1.0) - 1.0, 0.0)
    else:
        safe = np.where(k2 > 0, np.sqrt(k2), 1.0)
        u = k / safe[..., None]
        out = np.where(k2 > 0, _harmonic_symbol(spec)(u), 0.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- quadrature


def sphere_quadrature(n_theta: int, n_phi: int, pole=(0.0, 0.0, 1.0)):
    """Gauss-Legendre in ``cos(theta)`` times uniform ``phi`` about ``pole``.

    Returns ``(nodes, weights)`` with weights summing to ``4 pi``.
    """
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    return _product_rule(t, wt, n_phi, pole)


def _frame(pole):
    e3 = np.asarray(pole, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    trial = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _product_rule(t, wt, n_phi, pole):
    e1, e2, e3 = _frame(pole)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    s = np.sqrt(np.clip(1 - t * t, 0.0, None))
    cp, sp = np.cos(phi), np.sin(phi)
    nodes = (
        (s[:, None] * cp[None, :])[..., None] * e1
        + (s[:, None] * sp[None, :])[..., None] * e2
        + t[:, None, None] * e3
    ).reshape(-1, 3)
    w = np.repeat(wt, n_phi) * (2 * np.pi / n_phi)
    return nodes, w


def _log_rule(n: int):
    """Nodes/weights on ``t in (-1, 1)`` graded towards ``t = 0``.

    Uses ``t = +-s^3`` on each half so that ``log|t|`` singular integrands
    become smooth enough for Gauss-Legendre.
    """
    s, ws = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    t = s**3
    wt = 3 * s * s * ws
    return np.concatenate([-t[::-1], t]), np.concatenate([wt[::-1], wt])


def multiplier_from_omega(
    spec: KernelSpec,
    u,
    n_theta: int = 48,
    n_phi: int = 64,
    tol: float | None = None,
    return_error: bool = False,
):
    """``m(u) = int Omega(v) log(1/|u.v|) dsigma(v)`` by spherical quadrature.

    The rule is a product rule about the pole ``u``: ``2 * n_theta`` graded
    nodes in ``t = u.v`` and ``n_phi`` azimuthal nodes (6144 by default).  The
    error estimate compares against a rule with half as many nodes per
    direction; with ``tol`` set, an estimate above ``tol`` raises
    ``ArithmeticError``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    norms = np.linalg.norm(u, axis=1)
    u = u / norms[:, None]

    def rule(nt, nphi):
        t, wt = _log_rule(nt)
        vals = np.empty(len(u))
        for i, ui in enumerate(u):
            nodes, w = _product_rule(t, wt, nphi, ui)
            om = omega_value(spec, nodes) if spec.kind == "dipolar" else np.asarray(spec.omega(nodes))
            vals[i] = w @ (om * -np.log(np.abs(nodes @ ui)))
        return vals

    fine = rule(n_theta, n_phi)
    err = None
    if tol is not None or return_error:
        coarse = rule(max(n_theta // 2, 4), max(n_phi // 2, 8))
        err = np.abs(fine - coarse)
        if tol is not None and np.any(err > tol):
            raise ArithmeticError(
                f"spherical quadrature did not reach tol={tol:.1e}; achieved {err.max():.2e}"
            )
    out = fine[0] if len(fine) == 1 else fine
    if return_error:
        return out, (err[0] if len(err) == 1 else err)
    return out


# ------------------------------------------------------ harmonic (grid) path


@lru_cache(maxsize=None)
def _funk_hecke_log(lmax: int) -> np.ndarray:
    """``c_l = 2 pi int_{-1}^{1} P_l(t) log(1/|t|) dt`` for ``l <= lmax``."""
    t, w = _log_rule(200)
    c = np.empty(lmax + 1)
    for l in range(lmax + 1):
        c[l] = 2 * np.pi * (w @ (special.eval_legendre(l, t) * -np.log(np.abs(t))))
    return c


def _angles(u):
    theta = np.arccos(np.clip(u[..., 2], -1.0, 1.0))
    phi = np.arctan2(u[..., 1], u[..., 0])
    return theta, phi


def _sh_coefficients(omega, lmax: int):
    """Projection of an even ``omega`` on ``Y_lm``, even ``l <= lmax`` only."""
    nth = lmax + 8
    nph = 2 * lmax + 16
    nodes, w = sphere_quadrature(nth, nph)
    vals = np.asarray(omega(nodes), dtype=float)
    theta, phi = _angles(nodes)
    coeffs = {}
    for l in range(0, lmax + 1, 2):
        for m in range(-l, l + 1):
            y = special.sph_harm_y(l, m, theta, phi)
            coeffs[(l, m)] = complex(np.sum(w * vals * np.conj(y)))
    return coeffs


def _eval_sh(coeffs, scale, u):
    theta, phi = _angles(u)
    out = np.zeros(theta.shape, dtype=complex)
    for (l, m), a in coeffs.items():
        if abs(a) < 1e-15 or scale[l] == 0.0:
            continue
        out += scale[l] * a * special.sph_harm_y(l, m, theta, phi)
    return out.real


def _harmonic_symbol(spec: KernelSpec):
    sym = spec._state.get("symbol")
    if sym is None:
        coeffs = _sh_coefficients(spec.omega, spec.lmax)
        c = _funk_hecke_log(spec.lmax)

        def sym(u, _coeffs=coeffs, _c=c):
            return _eval_sh(_coeffs, _c, np.asarray(u, dtype=float))

        sym = spec._state.setdefault("symbol", sym)
    return sym


class Multiplier:
    """Fourier symbol of a :class:`KernelSpec`, with per-grid caching."""

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self._cache: dict = {}

    def __call__(self, k):
        return multiplier_value(self.spec, k)

    def grid_values(self, grid: GridSpec, real: bool = False) -> np.ndarray:
        key = (grid, real)
        arr = self._cache.get(key)
        if arr is None:
            kx, ky, kz = grid.wavenumbers(real)
            k = np.stack(np.broadcast_arrays(kx, ky, kz), axis=-1)
            arr = np.asarray(multiplier_value(self.spec, k), dtype=float)
            arr.setflags(write=False)
            # setdefault keeps the first array if two threads race here
            arr = self._cache.setdefault(key, arr)
        return arr


# ---------------------------------------------------------- direct quadrature


def _node_positions(grid: GridSpec):
    x, y, z = grid.coords()
    return np.broadcast_arrays(x, y, z)


def pv_convolve_direct(spec: KernelSpec, density: Field, x, eps: float) -> float:
    """``int_{|x-y|>eps} K(x-y) rho(y) dy`` as a sum over grid cells.

    ``rho`` is taken as zero outside the box.  When ``x`` is inside the box
    the lattice sum of ``K`` over the shell ``eps < |x-y| < R`` (``R`` the
    distance to the box wall) is subtracted times ``rho(x)``; that shell
    integral is exactly zero in the continuum, so this only removes lattice
    error.
    """
    grid = density.grid
    hmax = max(grid.spacing)
    if eps < hmax:
        raise ValueError(f"eps={eps} is smaller than the cell size {hmax}")
    x = np.asarray(x, dtype=float)
    X, Y, Z = _node_positions(grid)
    d = np.stack([x[0] - X, x[1] - Y, x[2] - Z], axis=-1)
    r = np.linalg.norm(d, axis=-1)
    mask = r > eps
    K = kernel_value(spec, d[mask])
    rho = np.asarray(density.values.real if np.iscomplexobj(density.values) else density.values)
    total = float(K @ rho[mask]) * grid.cell_volume
    lo = np.array([-L / 2 for L in grid.L])
    hi = np.array([L / 2 - L / n for L, n in zip(grid.L, grid.n)])
    if np.all(x >= lo) and np.all(x <= hi):
        R = float(min(np.min(x - lo), np.min(hi - x)))
        if R > eps:
            shell = mask & (r < R)
            rho_x = _interp(density, x)
            total -= rho_x * float(kernel_value(spec, d[shell]).sum()) * grid.cell_volume
    return total


def _interp(density: Field, x) -> float:
    from scipy.ndimage import map_coordinates

    grid = density.grid
    idx = [(xi + L / 2) / (L / n) for xi, L, n in zip(x, grid.L, grid.n)]
    vals = density.values.real if np.iscomplexobj(density.values) else density.values
    return float(map_coordinates(vals, np.array(idx)[:, None], order=1, mode="grid-wrap")[0])


def _smooth_cutoff(s):
    """C2 step: 0 for s <= 1/2, 1 for s >= 3/2."""
    t = np.clip(s - 0.5, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def pv_convolve_smooth(spec: KernelSpec, density: Field, x, eps: float) -> float:
    """Like :func:`pv_convolve_direct` with a smooth radial cutoff of width ``eps``.

    The kernel is multiplied by ``chi(|x-y|/eps)`` with ``chi`` rising from 0
    at ``eps/2`` to 1 at ``3 eps/2``.  A sharp cutoff cuts through lattice
    cells at random, which adds an ``O(eps h)`` error of the same order as
    the ``O(eps^2)`` truncation error; the smooth cutoff keeps the error a
    clean power series in ``eps``.
    """
    grid = density.grid
    hmax = max(grid.spacing)
    if eps < hmax:
        raise ValueError(f"eps={eps} is smaller than the cell size {hmax}")
    x = np.asarray(x, dtype=float)
    X, Y, Z = _node_positions(grid)
    d = np.stack([x[0] - X, x[1] - Y, x[2] - Z], axis=-1)
    r = np.linalg.norm(d, axis=-1)
    w = _smooth_cutoff(r / eps)
    mask = w > 0
    Kw = kernel_value(spec, d[mask]) * w[mask]
    rho = np.asarray(density.values.real if np.iscomplexobj(density.values) else density.values)
    total = float(Kw @ rho[mask]) * grid.cell_volume
    lo = np.array([-L / 2 for L in grid.L])
    hi = np.array([L / 2 - L / n for L, n in zip(grid.L, grid.n)])
    if np.all(x >= lo) and np.all(x <= hi):
        R = float(min(np.min(x - lo), np.min(hi - x)))
        if R > 1.5 * eps:
            shell = (r < R)[mask]
            total -= _interp(density, x) * float(Kw[shell].sum()) * grid.cell_volume
    return total


def pv_convolve_extrapolated(spec: KernelSpec, density: Field, x, eps: float, order: int = 2) -> float:
    """Richardson extrapolation to ``eps -> 0`` from cutoffs ``eps`` and ``2 eps``.

    Uses the smooth cutoff of :func:`pv_convolve_smooth`.  For smooth
    densities the truncation error is ``c eps^2 + O(eps^4)``: the linear
    Taylor term cancels because ``Omega`` is even.
    """
    s1 = pv_convolve_smooth(spec, density, x, eps)
    s2 = pv_convolve_smooth(spec, density, x, 2 * eps)
    f = 2.0**order
    return (f * s1 - s2) / (f - 1.0)


@dataclass
class FarFieldTable:
    rows: list  # (R, R^3 * (K * rho)(R u), Omega(u) * mass)
    passed: bool
    monotone: bool
    rel_dev: float


def far_field_check(spec: KernelSpec, density: Field, u, radii, eps: float | None = None) -> FarFieldTable:
    """Compare ``R^3 (K * rho)(R u)`` against ``Omega(u) * int rho`` for growing ``R``.

    Passes when the relative deviation at the largest radius is below 5%
    (absolute when the target is zero).  ``monotone`` reports whether the
    deviation shrinks over the last three radii.
    """
    u = _unit(u, "u")
    grid = density.grid
    eps = max(grid.spacing) if eps is None else eps
    m = float(np.sum(density.values.real) * grid.cell_volume)
    target = omega_value(spec, u) * m
    rows = []
    devs = []
    for R in sorted(float(r) for r in radii):
        val = R**3 * pv_convolve_direct(spec, density, R * u, eps)
        rows.append((R, val, target))
        if target != 0.0:
            devs.append(abs(val - target) / abs(target))
        else:
            devs.append(abs(val))
    tail = devs[-3:]
    monotone = all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))
    return FarFieldTable(rows=rows, passed=devs[-1] < 0.05, monotone=monotone, rel_dev=devs[-1])


# --------------------------------------------------------- symbol oracle


def truncated_multiplier_oracle(
    spec: KernelSpec,
    k,
    eps: float,
    n: int = 96,
    h: float = 1.0,
    taper: float = 0.7,
) -> float:
    """DFT at ``k`` of the sampled kernel ``1_{|x|>eps} K(x)`` on an ``n^3`` lattice.

    The kernel is cut off smoothly (cosine taper between ``taper * R`` and
    ``R = n h / 2``) so the box edge does not leak into the angular
    structure.  Only the even part ``cos(k.x)`` survives since ``K`` is even.
    """
    k = np.asarray(k, dtype=float)
    ax = (np.arange(n) - n // 2) * h
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij", sparse=True)
    r = np.sqrt(X * X + Y * Y + Z * Z)
    R = 0.5 * n * h
    w = np.where(r <= taper * R, 1.0, 0.5 * (1 + np.cos(np.pi * np.clip((r - taper * R) / ((1 - taper) * R), 0, 1))))
    mask = (r > eps) & (w > 0)
    pts = np.stack(np.broadcast_arrays(X, Y, Z), axis=-1)[mask]
    Kv = kernel_value(spec, pts)
    phase = np.cos(pts @ k)
    return float(np.sum(Kv * phase * w[mask]) * h**3)


# ----------------------------------------------------------------- CSV input


def load_omega_csv(path, lmax: int = 8) -> KernelSpec:
    """Build a general kernel from ``theta,phi,value`` rows (radians).

    ``Omega`` is fitted by least squares on real-valued even spherical
    harmonics up to ``lmax``; odd components are discarded, which enforces
    evenness.  The fitted profile must still pass the zero-mean check.
    """
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec[:3]])
            except ValueError:
                continue  # header line
    data = np.asarray(rows)
    if data.ndim != 2 or data.shape[1] != 3 or len(data) == 0:
        raise ValueError(f"{path}: expected rows of theta,phi,value")
    theta, phi, vals = data.T
    basis = []
    labels = []
    for l in range(0, lmax + 1, 2):
        for m in range(-l, l + 1):
            y = special.sph_harm_y(l, m, theta, phi)
            basis.append(y)
            labels.append((l, m))
    A = np.stack(basis, axis=1)
    coef, *_ = np.linalg.lstsq(A, vals.astype(complex), rcond=None)
    fitted = dict(zip(labels, coef))
    ones = np.ones(lmax + 1)

    def omega(u, _c=fitted, _s=ones):
        return _eval_sh(_c, _s, np.asarray(u, dtype=float))

    return KernelSpec.general(omega, lmax=lmax)
