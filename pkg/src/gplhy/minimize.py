"""Mass-constrained minimization of the reduced energy.

The solver is a preconditioned projected gradient descent on the sphere
``{psi real : int psi^2 = lambda}``::

    g   = H psi - mu psi                       (tangent gradient / 2)
    d   = (-Delta + c)^-1 g,  projected so <d, psi> = 0
    psi <- sqrt(lambda) (psi - tau d) / ||psi - tau d||

with backtracking on ``tau`` until the energy strictly decreases.  The shift
``c = max(-mu, c_min)`` makes the preconditioner the Yukawa resolvent used
by :func:`gplhy.diagnostics.yukawa_residual`, so a unit step is close to a
fixed-point iteration near a bound state.

:func:`energy_curve` sweeps a sorted list of masses with warm starts and
:func:`critical_mass` bisects (in log scale) on the predicate
``E_min(lambda) < -eps_neg`` with ``eps_neg = 1e-5 lambda``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from . import bounds
from .energy import EnergyBreakdown, energy_breakdown, el_apply
from .grid import Field, GridSpec, _half_weights, sample, workers
from .kernel import KernelSpec
from .params import ReducedParams

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_N",
    "CurvePoint",
    "MinimizeOptions",
    "MinimizeResult",
    "CriticalMassResult",
    "BracketError",
    "auto_grid",
    "initial_field",
    "minimize",
    "energy_curve",
    "critical_mass",
    "eps_neg",
]

INIT_MODES = ("ansatz", "file", "random")


def eps_neg(lam: float) -> float:
    """Binding threshold used by the critical-mass predicate."""
    return 1e-5 * lam


@dataclass
class MinimizeOptions:
    tol: float = 1e-6
    max_iter: int = 50000
    step0: float = 1e-2
    backtrack: float = 0.5
    init: str = "ansatz"
    seed: int = 0
    init_path: Optional[str] = None
    # step growth after an accepted step, and its cap
    grow: float = 1.3
    max_step: float = 4.0
    precondition: bool = True
    # stop once E < -eps_neg(lambda); used by the bisection predicate
    stop_when_bound: bool = False
    # optional wall-clock budget in seconds
    max_time: Optional[float] = None
    # subcritical detection: stop after this many iterations with E >= 0
    # and mu >= 0 once the relative energy decrease per iteration falls
    # below ``vanish_rate``
    vanish_rate: float = 1e-4
    vanish_patience: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        mode = self.init.split("(")[0]
        if mode not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if mode == "random" and "(" in self.init:
            self.seed = int(self.init.split("(")[1].rstrip(")"))
            self.init = "random"
        if mode == "file" and self.init_path is None:
            raise ValueError("init='file' needs init_path")


@dataclass
class MinimizeResult:
    field: Field
    breakdown: EnergyBreakdown
    mu: float
    residual: float
    iterations: int
    converged: bool
    b: float = float("nan")
    lam: float = float("nan")
    energies: list = field(default_factory=list, repr=False)
    message: str = ""
    seconds: float = 0.0

    @property
    def energy(self) -> float:
        return self.breakdown.E

    @property
    def bound(self) -> bool:
        """Whether the state certifies binding, ``E < -eps_neg(lambda)``."""
        return self.breakdown.E < -eps_neg(self.lam)


@dataclass
class CriticalMassResult:
    lambda_c_estimate: float
    bracket: tuple
    predicate_evaluations: list
    rel_width: float

    def as_rows(self):
        return [{"lambda": lam, "E_min": e, "bound": e < -eps_neg(lam)} for lam, e in self.predicate_evaluations]


class BracketError(RuntimeError):
    """The critical-mass predicate does not change sign on the bracket."""

    def __init__(self, message, evaluations):
        super().__init__(message)
        self.evaluations = evaluations


# ------------------------------------------------------------------ geometry


DEFAULT_N = (160, 160, 192)


def auto_grid(lam: float, b: float, n=DEFAULT_N, radial_factor: float = 25.0, axial_factor: float = 4.0,
              axis: int = 2) -> GridSpec:
    """Box sized on the Gaussian ansatz optimum for ``(b, lambda)``.

    The box is ``radial_factor * sigma_rho`` across and ``axial_factor *
    sigma_z`` along the dipole axis.  The wide transverse box keeps the
    periodic images of the dipolar tail small, and since the box scales with
    the ansatz widths a fixed ``n`` gives a fixed number of points per width
    (about 6.4 per ``sigma_rho`` and 48 per ``sigma_z`` with the defaults).
    When the ansatz does not bind, the marginal profile at the ansatz
    threshold is used instead.
    """
    if isinstance(n, int):
        n = (n, n, n)
    n = list(n)
    if axis != 2 and tuple(n) == DEFAULT_N:
        n[axis], n[2] = n[2], n[axis]
    a = bounds.optimal_ansatz(lam, b)
    L = [radial_factor * a.sigma_rho] * 3
    L[axis] = axial_factor * a.sigma_z
    return GridSpec(tuple(n), tuple(L))


def initial_field(r: ReducedParams, grid: GridSpec, opts: MinimizeOptions, axis: int = 2) -> Field:
    from .io import read_snapshot

    mode = opts.init
    if mode == "file":
        snap = read_snapshot(opts.init_path)
        psi = snap.field
        if psi.grid.shape != grid.shape:
            raise ValueError(f"snapshot grid {psi.grid.shape} does not match {grid.shape}")
        if np.iscomplexobj(psi.values):
            psi = Field(grid, np.abs(psi.values))
        else:
            # a real snapshot is typically a previous iterate; taking magnitudes
            # would put kinks into its round-off tails and undo convergence
            psi = Field(grid, psi.values.copy())
    else:
        a = bounds.optimal_ansatz(r.lam, r.b)
        psi = sample(grid, bounds.gaussian_ansatz(r.lam, a, axis=axis))
        if mode == "random":
            rng = np.random.default_rng(opts.seed)
            noise = rng.standard_normal(grid.shape)
            # smooth the noise on the scale of a few cells
            k2 = grid.k_squared(True)
            hmax = max(grid.spacing)
            noise = sfft.irfftn(sfft.rfftn(noise) * np.exp(-k2 * (2 * hmax) ** 2), s=grid.shape)
            noise /= max(noise.std(), 1e-300)
            psi = psi.with_values(psi.values * np.exp(0.3 * noise))
    return _renormalize(psi.values, grid, r.lam, grid)


def _renormalize(values: np.ndarray, grid: GridSpec, lam: float, _g=None) -> Field:
    s = grid.cell_volume * float(np.sum(values * values))
    if not s > 0 or not math.isfinite(s):
        raise FloatingPointError("cannot renormalize a zero or non-finite field")
    return Field(grid, values * math.sqrt(lam / s))


# ------------------------------------------------------------------ evaluator


class _Evaluator:
    """Energy and gradient on a fixed grid sharing transforms between them."""

    def __init__(self, grid: GridSpec, b: float, spec: KernelSpec):
        self.grid = grid
        self.b = b
        self.h = grid.cell_volume
        self.k2 = grid.k_squared(True)
        self.kw = self.k2 * _half_weights(grid) * (self.h / np.prod(grid.n))
        self.mult = spec.multiplier().grid_values(grid, real=True)
        self.kmin2 = min((2 * np.pi / L) ** 2 for L in grid.L)

    def terms(self, v: np.ndarray):
        spec = sfft.rfftn(v, workers=workers())
        T = float(np.sum(self.kw * (spec.real**2 + spec.imag**2)))
        rho = v * v
        phi = sfft.irfftn(self.mult * sfft.rfftn(rho, workers=workers()), s=self.grid.shape, workers=workers())
        rho15 = rho * np.sqrt(rho)
        h = self.h
        eb = EnergyBreakdown(
            T=T,
            I4=0.5 * h * float(np.sum(rho * rho)),
            Idd=0.5 * self.b * h * float(np.sum(phi * rho)),
            Q=0.4 * h * float(np.sum(rho * rho15)),
        )
        return eb, (spec, rho, phi, rho15)

    def gradient(self, v: np.ndarray, cache, lam: float):
        spec, rho, phi, rho15 = cache
        lap = sfft.irfftn(self.k2 * spec, s=self.grid.shape, workers=workers())
        hv = lap + (rho + self.b * phi + rho15) * v
        mu = self.h * float(np.sum(v * hv)) / lam
        g = hv - mu * v
        residual = math.sqrt(self.h * float(np.sum(g * g)) / lam)
        return g, mu, residual

    def direction(self, g: np.ndarray, v: np.ndarray, mu: float, lam: float, precondition: bool):
        if precondition:
            c = max(-mu, self.kmin2)
            d = sfft.irfftn(sfft.rfftn(g, workers=workers()) / (self.k2 + c), s=self.grid.shape, workers=workers())
        else:
            d = g.copy()
        d -= (self.h * float(np.sum(d * v)) / lam) * v
        return d


# ------------------------------------------------------------------ solver


def minimize(
    r: ReducedParams,
    grid: Optional[GridSpec] = None,
    spec: Optional[KernelSpec] = None,
    opts: Optional[MinimizeOptions] = None,
    initial: Optional[Field] = None,
    callback: Optional[Callable[[int, float, float, float], None]] = None,
) -> MinimizeResult:
    """Minimize ``E_b`` over real fields of mass ``r.lam`` on ``grid``.

    ``initial`` overrides ``opts.init`` (used for warm starts).  Returns the
    last accepted iterate, which is also the lowest-energy one.
    Non-convergence is reported through ``converged=False``.
    """
    spec = KernelSpec.dipolar() if spec is None else spec
    opts = MinimizeOptions() if opts is None else opts
    grid = auto_grid(r.lam, r.b) if grid is None else grid
    lam, b = r.lam, r.b
    t0 = time.perf_counter()

    if initial is not None:
        if initial.grid.shape != grid.shape:
            raise ValueError("initial field lives on a different grid")
        psi = _renormalize(np.abs(initial.values), grid, lam)
    else:
        psi = initial_field(r, grid, opts)
    ev = _Evaluator(grid, b, spec)
    v = psi.values
    eb, cache = ev.terms(v)
    E = eb.E
    if not math.isfinite(E):
        raise FloatingPointError("initial energy is not finite")
    energies = [E]
    tau = opts.step0
    converged = False
    message = "max_iter reached"
    slow = 0
    it = 0
    g, mu, residual = ev.gradient(v, cache, lam)
    for it in range(1, int(opts.max_iter) + 1):
        if residual <= opts.tol:
            converged = True
            message = "residual below tolerance"
            it -= 1
            break
        if opts.stop_when_bound and E < -eps_neg(lam):
            message = "binding certified"
            it -= 1
            break
        if opts.max_time is not None and time.perf_counter() - t0 > opts.max_time:
            message = "time budget exhausted"
            it -= 1
            break
        d = ev.direction(g, v, mu, lam, opts.precondition)
        accepted = False
        while tau > 1e-14:
            trial = v - tau * d
            s = ev.h * float(np.sum(trial * trial))
            trial *= math.sqrt(lam / s)
            eb_t, cache_t = ev.terms(trial)
            E_t = eb_t.E
            if not math.isfinite(E_t):
                raise FloatingPointError("energy became non-finite")
            if E_t < E:
                accepted = True
                break
            tau *= opts.backtrack
        if not accepted:
            message = "line search failed"
            it -= 1
            break
        drop = E - E_t
        v, eb, cache, E = trial, eb_t, cache_t, E_t
        energies.append(E)
        tau = min(tau * opts.grow, opts.max_step)
        g, mu, residual = ev.gradient(v, cache, lam)
        if callback is not None:
            callback(it, E, mu, residual)
        # a spreading (vanishing) sequence: positive energy sliding to 0
        if E >= 0 and mu >= 0 and drop < opts.vanish_rate * max(abs(E), 1e-300):
            slow += 1
            if slow >= opts.vanish_patience:
                message = "vanishing: energy non-negative and stalling"
                break
        else:
            slow = 0
    else:
        it = int(opts.max_iter)
        converged = residual <= opts.tol
        if converged:
            message = "residual below tolerance"

    psi = Field(grid, v)
    log.info("minimize b=%g lam=%g: E=%.10g mu=%.6g res=%.3g it=%d (%s)", b, lam, E, mu, residual, it, message)
    return MinimizeResult(
        field=psi,
        breakdown=eb,
        mu=mu,
        residual=residual,
        iterations=it,
        converged=converged,
        b=b,
        lam=lam,
        energies=energies,
        message=message,
        seconds=time.perf_counter() - t0,
    )


# ------------------------------------------------------------------ sweeps


class CurvePoint(tuple):
    """Row ``(lambda, E, mu, converged)`` of an energy curve, with the full result attached."""

    def __new__(cls, lam, E, mu, converged, result=None):
        self = super().__new__(cls, (float(lam), float(E), float(mu), bool(converged)))
        self.result = result
        return self

    lam = property(lambda self: self[0])
    E = property(lambda self: self[1])
    mu = property(lambda self: self[2])
    converged = property(lambda self: self[3])


def _rescaled(prev: MinimizeResult, lam: float) -> Field:
    return prev.field * math.sqrt(lam / prev.lam)


def energy_curve(b: float, lambdas, grid: Optional[GridSpec] = None, spec: Optional[KernelSpec] = None,
                 opts: Optional[MinimizeOptions] = None, keep_fields: bool = False):
    """Minimum energy for each mass in ``lambdas`` (sorted, increasing).

    All points share one grid (by default sized for the largest mass).  A
    point is warm-started from the previous solution with its amplitude
    scaled by ``sqrt(lambda_next / lambda_prev)`` when that solution is bound;
    after an unbound point the next one restarts from ``opts.init``.
    """
    lams = [float(x) for x in lambdas]
    if not lams or any(x <= 0 for x in lams):
        raise ValueError("masses must be positive")
    if any(y <= x for x, y in zip(lams, lams[1:])):
        raise ValueError("masses must be strictly increasing")
    spec = KernelSpec.dipolar() if spec is None else spec
    opts = MinimizeOptions() if opts is None else opts
    grid = auto_grid(lams[-1], b) if grid is None else grid
    out = []
    prev = None
    for lam in lams:
        init = _rescaled(prev, lam) if prev is not None and prev.bound else None
        res = minimize(ReducedParams(b, lam), grid, spec, opts, initial=init)
        out.append(CurvePoint(lam, res.breakdown.E, res.mu, res.converged, res if keep_fields else None))
        prev = res
    return out


def critical_mass(b: float, grid=None, spec: Optional[KernelSpec] = None, opts: Optional[MinimizeOptions] = None,
                  rel_tol: float = 0.02, bracket: Optional[tuple] = None) -> CriticalMassResult:
    """Log-scale bisection on ``E_min(lambda) < -eps_neg(lambda)``.

    ``grid`` is a :class:`GridSpec` shared by every evaluation, a callable
    ``lambda -> GridSpec``, or ``None`` for one grid sized at the upper end
    of the bracket.  The default bracket is
    ``[sobolev_lower_bound(b) / 2, 2 upper_bound(b)]``.  Each evaluation stops
    as soon as a state with ``E < -eps_neg`` is found, since any such state
    certifies ``E_min < 0``.  Evaluations are warm-started from the smallest
    bound state found so far, rescaled to the new mass.
    """
    if not b > 1:
        raise ValueError(f"critical mass needs b > 1, got b={b}")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    spec = KernelSpec.dipolar() if spec is None else spec
    base = MinimizeOptions() if opts is None else opts
    popts = MinimizeOptions(**{**base.__dict__, "stop_when_bound": True})
    if bracket is None:
        lo, hi = 0.5 * bounds.sobolev_lower_bound(b), 2.0 * bounds.upper_bound(b)[0]
    else:
        lo, hi = (float(x) for x in bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    if grid is None:
        grid = auto_grid(hi, b)
    grid_for = grid if callable(grid) else (lambda lam, g=grid: g)

    evals = []
    best: Optional[MinimizeResult] = None

    def bound_at(lam):
        nonlocal best
        g = grid_for(lam)
        init = None
        if best is not None and best.field.grid == g:
            init = _rescaled(best, lam)
        res = minimize(ReducedParams(b, lam), g, spec, popts, initial=init)
        evals.append((lam, res.breakdown.E))
        ok = res.bound
        if ok and (best is None or lam < best.lam):
            best = res
        log.info("critical_mass: lambda=%.6g E=%.6g bound=%s", lam, res.breakdown.E, ok)
        return ok

    if not bound_at(hi):
        raise BracketError(f"no binding detected at the upper end lambda={hi:.6g}", evals)
    if bound_at(lo):
        raise BracketError(f"binding detected at the lower end lambda={lo:.6g}", evals)
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if bound_at(mid):
            hi = mid
        else:
            lo = mid
    return CriticalMassResult(
        lambda_c_estimate=math.sqrt(lo * hi),
        bracket=(lo, hi),
        predicate_evaluations=evals,
        rel_width=hi / lo - 1.0,
    )
