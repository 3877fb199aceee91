"""Average excitation number N(t) = <a^dag(t) a(t)> and derived diagnostics.

    N(t) = |A(t)|^2 nbar(beta_s, omega0) + int dw' J(w') f(w', t) nbar(beta_b, w')

By default the frequency integral runs over w' in [omega_min, omega_max]
with omega_min = 1e-6 omega0.  The Bose factor grows like T/w' as w' -> 0
while J(0) > 0, so this positive-frequency value depends logarithmically on
``omega_min``.  ``domain="full"`` instead integrates over the real line with
the Bose factor continued to w' < 0 and a principal value through w' = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .analytic import amplitude_solution, bath_kernel_solution, steady_kernel
from .errors import ConvergenceError, ParameterError
from .model import ModelParams, bose_occupation, default_scale, grid_scale, lorentzian_modes, spectral_density


FULL_WINDOW = 1000.0


class Provenance(str, Enum):
    ANALYTIC = "analytic"
    LOCAL_ODE = "local-ode-oracle"
    DISCRETE_BATH = "discrete-bath-oracle"


@dataclass(frozen=True)
class QuadratureConfig:
    """Frequency-integration settings; ``None`` bounds resolve per model."""

    omega_min: float | None = None
    omega_max: float | None = None
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    domain: str = "positive"
    limit: int = 20000
    # a non-converged result is still accepted when its error estimate is
    # below accept_tol * max(1, |value|)
    accept_tol: float = 1e-6

    def __post_init__(self):
        if self.domain not in ("positive", "full"):
            raise ParameterError(f"domain must be 'positive' or 'full', got {self.domain!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.omega_min is not None and self.omega_min <= 0:
            raise ParameterError("omega_min must be positive")
        if (self.omega_min is not None and self.omega_max is not None
                and not self.omega_min < self.omega_max):
            raise ParameterError("omega_min must be below omega_max")

    def bounds(self, params: ModelParams) -> tuple[float, float]:
        lo = 1e-6 * params.omega0 if self.omega_min is None else self.omega_min
        if self.omega_max is None:
            hi = max(params.Omega + 50 * max(params.gamma, params.Gamma),
                     params.omega0 + 50 * params.Gamma)
        else:
            hi = self.omega_max
        return lo, hi

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def breakpoints(params: ModelParams, lo: float, hi: float) -> list[float]:
    """Known peak locations of the integrand strictly inside (lo, hi)."""
    w0, Om, g = params.omega0, params.Omega, params.gamma
    split = math.sqrt(0.5 * params.Gamma * g)
    pts = {w0, Om, w0 + split, w0 - split, Om - g, Om + g, w0 - params.Gamma, w0 + params.Gamma}
    # decade ladder for the 1/w' growth of the Bose factor near zero
    w = 10 * lo
    while 0 < w < 0.1 * w0:
        pts.add(w)
        w *= 10
    return sorted(p for p in pts if lo < p < hi)


def _continued_nbar(beta: float, w):
    with np.errstate(divide="ignore", over="ignore"):
        return 1.0 / np.expm1(beta * w)


def _quad_vec(fn, lo, hi, quad: QuadratureConfig, points=None, what="integral"):
    pts = None
    if points and math.isfinite(lo) and math.isfinite(hi):
        pts = [p for p in points if lo < p < hi] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err, info = integrate.quad_vec(
            fn, lo, hi, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.limit,
            points=pts, norm="max", full_output=True)
    if not info.success:
        scale = max(1.0, float(np.max(np.abs(value))))
        if err > quad.accept_tol * scale:
            raise ConvergenceError(
                f"{what}: frequency quadrature did not converge (error estimate {err:.3g})",
                estimate=float(err))
    return value


def integrate_spectrum(weight, params: ModelParams, quad: QuadratureConfig,
                       thermal: bool = True, domain: str | None = None, what: str = "integral"):
    """int dw J(w) weight(w) [nbar(beta_b, w)] over the configured domain.

    ``weight`` maps a scalar frequency to a real scalar or a 1-d array (one
    entry per time sample); the result has the same shape.
    """
    beta = params.beta_b
    domain = domain or quad.domain
    lo, hi = quad.bounds(params)

    def G(w):
        val = spectral_density(params, w) * weight(w)
        return val * _continued_nbar(beta, w) if thermal else val

    if domain == "positive":
        return _quad_vec(G, lo, hi, quad, breakpoints(params, lo, hi), what)

    # the real line is cut at Omega -+ FULL_WINDOW * scale; J ~ 1/w^2 and
    # f ~ 1/w^2 there, so the dropped tails are O(FULL_WINDOW^-3)
    eps = 0.5 * min(params.omega0, params.Omega)
    far = FULL_WINDOW * default_scale(params)
    right_edge = max(hi, params.Omega + far)
    left_edge = min(params.Omega - far, -2 * eps)
    pts = breakpoints(params, left_edge, right_edge)
    total = _quad_vec(G, left_edge, -eps, quad, pts, what)
    # principal value through w = 0 by folding the symmetric interval
    total = total + _quad_vec(lambda w: G(w) + G(-w), 0.0, eps, quad, None, what)
    return total + _quad_vec(G, eps, right_edge, quad, pts, what)


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled N(t) plus the run's metadata."""

    times: np.ndarray
    aen: np.ndarray
    params: ModelParams
    pulse: object | None = None
    provenance: Provenance = Provenance.ANALYTIC
    amplitude: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        aen = np.asarray(self.aen, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "aen", aen)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if times.ndim != 1 or times.shape != aen.shape:
            raise ParameterError("times and aen must be 1-d arrays of equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ParameterError("times must be strictly increasing")
        if np.any(aen < -1e-9):
            raise ParameterError("negative excitation number in trajectory")

    def __len__(self):
        return self.times.size


def initial_aen(params: ModelParams) -> float:
    """Thermal occupation of the system at t = 0."""
    return float(bose_occupation(params.beta_s, params.omega0))


def _time_array(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ParameterError("empty time grid")
    if np.any(times < 0):
        raise ParameterError("times must be non-negative")
    return times


def bath_term(params: ModelParams, times, quad: QuadratureConfig | None = None,
              thermal: bool = True, domain: str | None = None):
    """int J(w') f(w', t) [nbar] dw' for each t in ``times``."""
    quad = quad or QuadratureConfig()
    times = _time_array(times)
    amp = amplitude_solution(params)

    def weight(w):
        return bath_kernel_solution(params, w, amp=amp).f(times)[:, 0]

    return integrate_spectrum(weight, params, quad, thermal, domain, "bath term")


def aen_trajectory(params: ModelParams, times, quad: QuadratureConfig | None = None) -> Trajectory:
    """N(t) on a grid from the closed-form amplitudes."""
    quad = quad or QuadratureConfig()
    times = _time_array(times)
    A = np.asarray(amplitude_solution(params)(times))
    bath = bath_term(params, times, quad)
    aen = np.abs(A) ** 2 * initial_aen(params) + bath
    # the bath integrand is non-negative on the positive domain; clip round-off
    if quad.domain == "positive":
        aen = np.maximum(aen, 0.0)
    return Trajectory(times, aen, params, provenance=Provenance.ANALYTIC, amplitude=A)


def aen_at(params: ModelParams, t: float, quad: QuadratureConfig | None = None) -> float:
    """N(t) at one time."""
    if t == 0:
        return initial_aen(params)
    return float(aen_trajectory(params, [t], quad).aen[0])


def norm_nodes(params: ModelParams, t_max: float) -> int:
    """Node count for the full-line rule in :func:`norm_defect`."""
    wanted = 8 * grid_scale(params) * max(t_max, 0.0)
    return int(min(max(8000, math.ceil(wanted)), 400000))


def norm_defect(params: ModelParams, times, n_nodes: int | None = None,
                tol: float | None = 1e-6):
    """|A(t)|^2 + int J f dw' - 1 over the full real line (zero when unitary).

    The integral uses the midpoint rule in theta with w = Omega + L tan(theta),
    which absorbs the Lorentzian exactly and reaches both infinities.  The
    rule is repeated on half the nodes; if the two disagree by more than
    ``tol`` a :class:`ConvergenceError` is raised.
    """
    times = _time_array(times)
    n = n_nodes or norm_nodes(params, float(times.max()))
    amp = amplitude_solution(params)
    A2 = np.abs(np.asarray(amp(times))) ** 2

    def rule(count):
        modes = lorentzian_modes(params, count, scale=grid_scale(params))
        f = bath_kernel_solution(params, modes.omega, amp=amp).f(times)
        return f @ modes.weights

    fine = A2 + rule(n) - 1.0
    if tol is not None:
        # midpoint error drops ~4x per doubling, so fine - coarse ~ 3x the error
        est = float(np.max(np.abs(fine - (A2 + rule(n // 2) - 1.0)))) / 3
        if est > tol:
            raise ConvergenceError(
                f"norm check: full-line rule error estimate {est:.3g} exceeds {tol:g}",
                estimate=est)
    return fine


def steady_state_aen(params: ModelParams, quad: QuadratureConfig | None = None) -> float:
    """t -> inf limit of N; only the |C3|^2 part of f survives, so Ts never enters."""
    if params.gamma <= 0:
        raise ParameterError("steady state requires gamma > 0")
    quad = quad or QuadratureConfig()
    value = integrate_spectrum(lambda w: steady_kernel(params, w), params, quad, what="steady state")
    return float(value)


def markovian_limit_aen(params: ModelParams) -> float:
    """gamma -> inf closed form: the bath occupation at omega0."""
    return float(bose_occupation(params.beta_b, params.omega0))


def gamma_zero_limit_aen(params: ModelParams) -> float:
    """Small-gamma closed form (4 gamma / Gamma) nbar(beta_b, omega0)."""
    if params.gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if params.gamma == 0:
        return 0.0
    return 4 * params.gamma / params.Gamma * float(bose_occupation(params.beta_b, params.omega0))


def relaxation_time(traj: Trajectory, steady_value: float, band: float,
                    floor: float = 1e-6) -> float | None:
    """Earliest sample time after which N stays within ``band`` (relative) of
    ``steady_value``; ``None`` if the final sample is still outside."""
    if not 0 < band < 1:
        raise ParameterError("band must lie in (0, 1)")
    tol = band * max(abs(steady_value), floor)
    outside = np.abs(traj.aen - steady_value) > tol
    if outside[-1]:
        return None
    if not outside.any():
        return float(traj.times[0])
    last = np.flatnonzero(outside)[-1]
    return float(traj.times[last + 1])


def local_maxima(values) -> np.ndarray:
    """Indices of strict interior local maxima."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return np.empty(0, dtype=int)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])
    return np.flatnonzero(inner) + 1
