"""Uniform periodic 3D grids, sampled fields and spectral operations.

Nodes sit at ``x_i = (i - n/2) * h`` for ``i = 0..n-1`` so the origin is a
node and the box covers ``[-L/2, L/2)``.  Sample arrays have shape
``(n_x, n_y, n_z)`` in C order, which makes z the fastest index: the flat
index of ``(i_x, i_y, i_z)`` is ``(i_x * n_y + i_y) * n_z + i_z``.

Transform convention::

    forward   psi_hat(k) = h * sum_x psi(x) exp(-i k.x)
    inverse   psi(x)     = (1/V) * sum_k psi_hat(k) exp(i k.x)

with ``h`` the cell volume and ``V`` the box volume, so that
``h * sum |psi|^2 == (1/V) * sum |psi_hat|^2``.  Phases are referenced to the
first node; they cancel in every quadratic quantity used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "Field",
    "sample",
    "mass",
    "integrate_power",
    "kinetic_energy",
    "forward",
    "inverse",
    "convolve_kernel",
    "inner",
    "workers",
]


def workers() -> int:
    """Worker count for scipy.fft, capped by ``GPLHY_THREADS`` when set."""
    import os

    cap = os.environ.get("GPLHY_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class GridSpec:
    n: tuple[int, int, int]
    L: tuple[float, float, float]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        L = tuple(float(v) for v in self.L)
        if len(n) != 3 or len(L) != 3:
            raise ValueError("GridSpec needs three sizes and three box lengths")
        for v in n:
            if v < 8 or v % 2:
                raise ValueError(f"grid sizes must be even and >= 8, got {n}")
        for v in L:
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"box lengths must be finite and positive, got {L}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)

    @classmethod
    def cube(cls, n: int, L: float) -> "GridSpec":
        return cls((n, n, n), (L, L, L))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.L, self.n))

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    @property
    def volume(self) -> float:
        return self.L[0] * self.L[1] * self.L[2]

    def axes(self) -> list[np.ndarray]:
        return [(np.arange(n) - n // 2) * (L / n) for n, L in zip(self.n, self.L)]

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable node coordinates ``(x, y, z)``."""
        x, y, z = self.axes()
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def radius(self) -> np.ndarray:
        x, y, z = self.coords()
        return np.sqrt(x * x + y * y + z * z)

    def wavenumbers(self, real: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable angular wavenumbers, full or half (``rfftn``) layout."""
        ks = []
        for j, (n, L) in enumerate(zip(self.n, self.L)):
            if real and j == 2:
                k = sfft.rfftfreq(n, d=L / n) * 2 * np.pi
            else:
                k = sfft.fftfreq(n, d=L / n) * 2 * np.pi
            shape = [1, 1, 1]
            shape[j] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    def k_squared(self, real: bool = False) -> np.ndarray:
        kx, ky, kz = self.wavenumbers(real)
        return kx * kx + ky * ky + kz * kz


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a scalar field on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            values = values.reshape(self.grid.shape)
        if not np.iscomplexobj(values):
            values = values.astype(np.float64, copy=False)
        else:
            values = values.astype(np.complex128, copy=False)
        object.__setattr__(self, "values", values)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    @cached_property
    def density(self) -> np.ndarray:
        v = self.values
        return v * v if self.is_real else (v.real**2 + v.imag**2)

    def mass(self) -> float:
        return mass(self)

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)

    def __mul__(self, c) -> "Field":
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__


def sample(grid: GridSpec, f, dtype=None) -> Field:
    """Evaluate ``f(x, y, z)`` (broadcasting) on the grid nodes."""
    x, y, z = grid.coords()
    values = np.broadcast_to(np.asarray(f(x, y, z)), grid.shape)
    if dtype is not None:
        values = values.astype(dtype)
    values = np.array(values)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite sample produced by f")
    return Field(grid, values)


def mass(psi: Field) -> float:
    return float(psi.grid.cell_volume * psi.density.sum())


def integrate_power(psi: Field, p: float) -> float:
    """``h * sum |psi|^p``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    rho = psi.density
    if p == 2:
        s = rho.sum()
    elif p == 4:
        s = (rho * rho).sum()
    else:
        s = (rho ** (0.5 * p)).sum()
    return float(psi.grid.cell_volume * s)


def forward(psi: Field) -> np.ndarray:
    """Full-layout transform ``h * fftn(psi)``."""
    return psi.grid.cell_volume * sfft.fftn(psi.values, workers=workers())


def inverse(grid: GridSpec, psi_hat: np.ndarray) -> Field:
    return Field(grid, sfft.ifftn(psi_hat, workers=workers()) / grid.cell_volume)


def _fft(values: np.ndarray):
    if np.iscomplexobj(values):
        return sfft.fftn(values, workers=workers()), False
    return sfft.rfftn(values, workers=workers()), True


def _ifft(spec: np.ndarray, real: bool, shape) -> np.ndarray:
    if real:
        return sfft.irfftn(spec, s=shape, workers=workers())
    return sfft.ifftn(spec, workers=workers())


def _half_weights(grid: GridSpec) -> np.ndarray:
    """Multiplicity of each rfftn coefficient in the full spectrum."""
    nz = grid.n[2]
    w = np.full(nz // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0  # Nyquist plane, nz even
    return w[None, None, :]


def kinetic_energy(psi: Field) -> float:
    """``(1/V) * sum_k |k|^2 |psi_hat(k)|^2``, i.e. ``int |grad psi|^2``."""
    grid = psi.grid
    spec, real = _fft(psi.values)
    k2 = grid.k_squared(real)
    power = spec.real**2 + spec.imag**2
    if real:
        power = power * _half_weights(grid)
    # |psi_hat|^2 = h^2 |fft|^2, and h^2 / V = h / N
    return float((k2 * power).sum() * grid.cell_volume / np.prod(grid.n))


def laplacian(psi: Field) -> Field:
    """Spectral ``Delta psi``."""
    grid = psi.grid
    spec, real = _fft(psi.values)
    return Field(grid, _ifft(-grid.k_squared(real) * spec, real, grid.shape))


def convolve_kernel(density, m, pad: bool = False) -> Field:
    """Spectral ``K * density`` for the multiplier ``m``.

    ``density`` is a real :class:`Field` (or array with ``grid`` given by ``m``
    callers); ``m`` is a :class:`gplhy.kernel.Multiplier`.  With ``pad=True``
    the density is zero-padded to twice the box per axis before transforming,
    which suppresses the periodic images of the ``|x|^-3`` tail.
    """
    grid = density.grid
    rho = density.values
    if np.iscomplexobj(rho):
        imag = np.abs(rho.imag).max()
        if imag > 1e-10 * max(np.abs(rho.real).max(), 1e-300):
            raise ValueError("density must be real")
        rho = rho.real
    if pad:
        big = GridSpec(tuple(2 * n for n in grid.n), tuple(2 * L for L in grid.L))
        work = np.zeros(big.shape)
        nx, ny, nz = grid.n
        # keep the origin node at the centre of the padded box
        sl = tuple(slice(n // 2, n // 2 + n) for n in grid.n)
        work[sl] = rho
        out = sfft.irfftn(
            m.grid_values(big, real=True) * sfft.rfftn(work, workers=workers()),
            s=big.shape,
            workers=workers(),
        )
        return Field(grid, out[sl])
    out = sfft.irfftn(
        m.grid_values(grid, real=True) * sfft.rfftn(rho, workers=workers()),
        s=grid.shape,
        workers=workers(),
    )
    return Field(grid, out)


def inner(f: Field, g: Field) -> complex:
    """``<f, g> = h * sum conj(f) g``."""
    return complex(f.grid.cell_volume * np.vdot(f.values, g.values))


def shift(psi: Field, steps) -> Field:
    """Cyclic translation by whole grid steps along each axis."""
    return Field(psi.grid, np.roll(psi.values, tuple(int(s) for s in steps), axis=(0, 1, 2)))
