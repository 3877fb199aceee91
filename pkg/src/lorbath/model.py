"""Physical parameters, the Lorentzian bath, and regime classification.

Units: hbar = k_B = 1, every frequency is measured in the same (arbitrary)
reference unit.  The system oscillator at ``omega0`` couples bilinearly to a
bosonic bath whose spectral density is a Lorentzian of width ``gamma``
centred at ``Omega`` with total weight ``Gamma * gamma / 2``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import NearPoleWarning, ParameterError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter set of the oscillator + Lorentzian bath model.

    ``h`` is not stored; it is always ``omega0 / Omega``.  Use
    :meth:`from_h` to build a parameter set from the detuning ratio.
    """

    omega0: float = 1.0
    Omega: float = 1.0
    gamma: float = 1.0
    Gamma: float = 1.0
    Ts: float = 1.0
    Tb: float = 1.0

    def __post_init__(self):
        for name in ("omega0", "Omega", "gamma", "Gamma", "Ts", "Tb"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega0 <= 0:
            raise ParameterError(f"omega0 must be positive, got {self.omega0}")
        if self.Omega <= 0:
            raise ParameterError(f"Omega must be positive, got {self.Omega}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be non-negative, got {self.gamma}")
        # Gamma = 0 is the decoupled limit, kept legal for oracle checks.
        if self.Gamma < 0:
            raise ParameterError(f"Gamma must be non-negative, got {self.Gamma}")
        if self.Ts <= 0:
            raise ParameterError(f"Ts: temperature must be positive, got {self.Ts}")
        if self.Tb <= 0:
            raise ParameterError(f"Tb: temperature must be positive, got {self.Tb}")

    @classmethod
    def from_h(cls, Omega: float, h: float, **kwargs) -> "ModelParams":
        if h <= 0:
            raise ParameterError(f"h must be positive, got {h}")
        return cls(omega0=h * Omega, Omega=Omega, **kwargs)

    @property
    def h(self) -> float:
        return self.omega0 / self.Omega

    @property
    def beta_s(self) -> float:
        return 1.0 / self.Ts

    @property
    def beta_b(self) -> float:
        return 1.0 / self.Tb

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def scaled(self, factor: float) -> "ModelParams":
        """All rates and frequencies (not temperatures) multiplied by ``factor``."""
        return self.replace(omega0=self.omega0 * factor, Omega=self.Omega * factor,
                            gamma=self.gamma * factor, Gamma=self.Gamma * factor)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# bath functions
# ---------------------------------------------------------------------------

def spectral_density(params: ModelParams, omega):
    """Lorentzian J(w) = (Gamma gamma^2 / 2 pi) / ((w - Omega)^2 + gamma^2)."""
    if params.gamma == 0:
        raise ParameterError("gamma = 0 is a delta-function bath; use discrete single-mode path")
    g = params.gamma
    return params.Gamma * g * g / (2 * np.pi) / ((np.asarray(omega) - params.Omega) ** 2 + g * g)


def correlation_kernel(params: ModelParams, tau):
    """Memory kernel G(tau) = (Gamma gamma / 2) exp(-(gamma + i Omega) |tau|)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ParameterError("correlation_kernel requires tau >= 0")
    out = 0.5 * params.Gamma * params.gamma * np.exp(-(params.gamma + 1j * params.Omega) * tau)
    return out[()] if out.ndim == 0 else out


def bose_occupation(beta, omega, near_pole: float = 1e-12):
    """Thermal occupation 1 / (exp(beta * omega) - 1).

    ``beta = inf`` (zero temperature) gives exactly 0.  ``beta * omega <= 0``
    raises; values below ``near_pole`` emit :class:`NearPoleWarning` and are
    still evaluated.
    """
    beta = np.asarray(beta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    with np.errstate(invalid="ignore"):
        x = beta * omega
    zero_t = np.isinf(beta) & (omega > 0)
    x = np.where(zero_t, np.inf, x)
    if np.any(~(x > 0)):
        raise ParameterError("bose_occupation requires beta * omega > 0")
    if np.any(x < near_pole):
        warnings.warn(f"beta*omega below {near_pole:g}: occupation near its pole",
                      NearPoleWarning, stacklevel=2)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return out[()] if out.ndim == 0 else out


def bose_cell_average(beta: float, lo, hi):
    """Mean of the Bose occupation over [lo, hi] (lo, hi >= 0, inf allowed).

    Uses the antiderivative ln(1 - exp(-beta w)) / beta, which stays finite
    away from w = 0; a cell touching zero gets an infinite average.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def prim(w):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(np.isinf(w), 0.0, np.log(-np.expm1(-beta * w)) / beta)

    width = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (prim(hi) - prim(lo)) / width
    out = np.where(width > 0, out, 0.0)
    out = np.where(np.isinf(hi) & np.isfinite(lo), 0.0, out)
    return out


# ---------------------------------------------------------------------------
# ODE coefficients and regimes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ODECoefficients:
    """Coefficients of  A'' + (a + ib) A' + (c + id) A = 0."""

    a: float
    b: float
    c: float
    d: float

    @property
    def delta1(self) -> float:
        return self.a * self.b - 2 * self.d

    @property
    def delta2(self) -> float:
        return 4 * self.c + self.b ** 2 - self.a ** 2

    @property
    def delta3(self) -> float:
        return self.delta1

    @property
    def p1(self) -> complex:
        return complex(self.a, self.b)

    @property
    def p2(self) -> complex:
        return complex(self.c, self.d)

    @property
    def lambda1(self) -> float:
        """delta2 / (2 delta1); infinite when delta1 = 0."""
        if self.delta1 == 0:
            return math.copysign(math.inf, self.delta2)
        return self.delta2 / (2 * self.delta1)


def ode_coefficients(params: ModelParams) -> ODECoefficients:
    """Map model parameters onto the second-order ODE obeyed by A(t)."""
    w0, Om, g = params.omega0, params.Omega, params.gamma
    return ODECoefficients(a=g, b=w0 + Om, c=0.5 * params.Gamma * g - w0 * Om, d=g * w0)


class Branch(str, enum.Enum):
    RESONANT_MARKOVIAN = "resonant-markovian"
    RESONANT_CRITICAL = "resonant-critical"
    RESONANT_NON_MARKOVIAN = "resonant-non-markovian"
    OFFRESONANT_DELTA1_NEG = "offresonant-delta1-neg"
    OFFRESONANT_DELTA1_POS = "offresonant-delta1-pos"
    APPENDIX = "appendix"


# sub-case ids of the general homogeneous solver, in guard order
APPENDIX_CASES = (
    "2:delta2=0", "2:delta2>0", "2:delta2<0",
    "3:delta3=0", "3:delta3>0", "3:delta3<0",
    "1:delta1>0", "1:delta1<0",
)


@dataclass(frozen=True)
class RegimeClass:
    branch: Branch
    discriminant: float
    case: str

    @property
    def resonant(self) -> bool:
        return self.branch in (Branch.RESONANT_MARKOVIAN, Branch.RESONANT_CRITICAL,
                               Branch.RESONANT_NON_MARKOVIAN)


def _sign_case(prefix: str, name: str, value: float, scale: float, tol: float) -> str:
    if abs(value) <= tol * scale:
        return f"{prefix}:{name}=0"
    return f"{prefix}:{name}{'>' if value > 0 else '<'}0"


def appendix_case(a: float, b: float, c: float, d: float, tol: float = DEFAULT_TOL) -> tuple[str, float]:
    """Select the sub-case of the general homogeneous solution.

    Guards are tested in fixed priority: d = ab/2 first, then
    c = (a^2 - b^2)/4, then the generic case.  Returns ``(case_id,
    discriminant)``.
    """
    delta1 = a * b - 2 * d
    delta2 = 4 * c + b * b - a * a
    scale1 = abs(a * b) + 2 * abs(d)
    scale2 = 4 * abs(c) + b * b + a * a
    if abs(delta1) <= tol * scale1 or scale1 == 0:
        return _sign_case("2", "delta2", delta2, scale2, tol), delta2
    if abs(delta2) <= tol * scale2:
        return _sign_case("3", "delta3", delta1, scale1, tol), delta1
    return _sign_case("1", "delta1", delta1, scale1, tol), delta1


def classify_regime(params: ModelParams, tol: float = DEFAULT_TOL) -> RegimeClass:
    """Decide which closed-form branch describes A(t) for ``params``."""
    if not tol > 0:
        raise ParameterError("classification tolerance must be positive")
    w0, Om, g, G = params.omega0, params.Omega, params.gamma, params.Gamma
    coeffs = ode_coefficients(params)
    if abs(w0 - Om) <= tol * max(w0, Om):
        delta2 = g * (2 * G - g)
        if g == 0:
            return RegimeClass(Branch.APPENDIX, 0.0, "2:delta2=0")
        if abs(g - 2 * G) <= tol * max(g, 2 * G):
            return RegimeClass(Branch.RESONANT_CRITICAL, delta2, "2:delta2=0")
        if g > 2 * G:
            return RegimeClass(Branch.RESONANT_MARKOVIAN, delta2, "2:delta2<0")
        return RegimeClass(Branch.RESONANT_NON_MARKOVIAN, delta2, "2:delta2>0")
    case, disc = appendix_case(coeffs.a, coeffs.b, coeffs.c, coeffs.d, tol)
    if case == "1:delta1<0":
        return RegimeClass(Branch.OFFRESONANT_DELTA1_NEG, disc, case)
    if case == "1:delta1>0":
        return RegimeClass(Branch.OFFRESONANT_DELTA1_POS, disc, case)
    return RegimeClass(Branch.APPENDIX, disc, case)


# ---------------------------------------------------------------------------
# bath discretisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BathMode:
    omega: float
    g: float


@dataclass(frozen=True, eq=False)
class BathModes:
    """A finite bath: mode frequencies, real couplings, and the frequency cell
    each mode stands for (``edges`` has one more entry than ``omega``)."""

    omega: np.ndarray
    g: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        if self.omega.shape != self.g.shape or self.edges.shape != (self.omega.size + 1,):
            raise ParameterError("inconsistent bath arrays")
        if np.any(self.g < 0):
            raise ParameterError("couplings must be non-negative")

    def __len__(self) -> int:
        return self.omega.size

    def __iter__(self) -> Iterator[BathMode]:
        for w, g in zip(self.omega, self.g):
            yield BathMode(float(w), float(g))

    def __getitem__(self, i) -> BathMode:
        return BathMode(float(self.omega[i]), float(self.g[i]))

    @property
    def weights(self) -> np.ndarray:
        """g_j^2, the discrete analogue of J(w) dw."""
        return self.g ** 2

    @property
    def recurrence_time(self) -> float:
        """2 pi / (smallest spacing) -- the earliest possible revival."""
        if self.omega.size < 2:
            return math.inf
        return 2 * np.pi / np.min(np.diff(np.sort(self.omega)))

    @classmethod
    def from_modes(cls, modes) -> "BathModes":
        modes = list(modes)
        w = np.array([m.omega for m in modes], dtype=float)
        g = np.array([m.g for m in modes], dtype=float)
        order = np.argsort(w)
        w, g = w[order], g[order]
        mid = 0.5 * (w[1:] + w[:-1]) if w.size > 1 else np.empty(0)
        edges = np.concatenate([[w[0] - (mid[0] - w[0] if mid.size else 0.5)], mid,
                                [w[-1] + (w[-1] - mid[-1] if mid.size else 0.5)]])
        return cls(w, g, edges)


def discretize_bath(params: ModelParams, n_modes: int = 2000, window_halfwidth: float = 20.0) -> BathModes:
    """Uniform midpoint sampling of J on [Omega - K gamma, Omega + K gamma] ∩ (0, inf).

    Each mode carries g_j^2 = J(w_j) dw.  Note that clipping at zero removes
    Lorentzian weight, so this bath does *not* reproduce the full-line memory
    kernel; see :func:`lorentzian_modes` for the oracle grid.
    """
    if n_modes < 2:
        raise ParameterError("need at least two bath modes")
    if window_halfwidth <= 0:
        raise ParameterError("window_halfwidth must be positive")
    lo = max(params.Omega - window_halfwidth * params.gamma, 0.0)
    hi = params.Omega + window_halfwidth * params.gamma
    if not hi > lo:
        raise ParameterError("empty discretisation window after clipping at zero")
    edges = np.linspace(lo, hi, n_modes + 1)
    w = 0.5 * (edges[1:] + edges[:-1])
    g2 = spectral_density(params, w) * np.diff(edges)
    return BathModes(w, np.sqrt(g2), edges)


def default_scale(params: ModelParams) -> float:
    """Frequency scale of the coupled spectrum.

    The largest of min(gamma, Gamma) (line width in the Markovian regime or
    bath width in the non-Markovian one), half the splitting between the two
    characteristic frequencies, and the detuning |omega0 - Omega|.
    """
    co = ode_coefficients(params)
    r = np.roots([1.0, co.p1, co.p2])
    split = 0.5 * abs(r[0].imag - r[1].imag)
    L = max(min(params.gamma, params.Gamma), split, abs(params.omega0 - params.Omega))
    if not L > 0:
        L = max(params.gamma, params.Gamma)
    if not L > 0:
        raise ParameterError("no spectral scale: gamma = Gamma = 0 on resonance")
    return float(L)


def grid_scale(params: ModelParams, frequencies=()) -> float:
    """Tan-map scale for bath grids: the bath width or the coupled scale,
    whichever is larger, so that J itself sits in the dense core.

    ``frequencies`` lists system frequencies visited under control; the
    scale grows to a quarter of the largest offset from Omega so that the
    grid also resolves the bath where the driven system sits.
    """
    far = max((abs(c - params.Omega) for c in frequencies), default=0.0)
    return max(params.gamma, default_scale(params), 0.25 * far)


def lorentzian_modes(params: ModelParams, n_modes: int, scale: float | None = None) -> BathModes:
    """Full-line discretisation w = Omega + L tan(theta), theta on a midpoint grid.

    Mode density is highest within ~L of Omega and the Lorentzian tails are
    covered out to |w| ~ L n_modes, so the discrete kernel sum_j g_j^2
    exp(-i w_j t) tracks G(t) until the revival time ~ 2 n_modes / L.
    Weights are J(w_j) dw/dtheta dtheta, so sum_j g_j^2 -> Gamma gamma / 2.
    """
    if n_modes < 2:
        raise ParameterError("need at least two bath modes")
    L = grid_scale(params) if scale is None else float(scale)
    if not L > 0:
        raise ParameterError("discretisation scale must be positive")
    dth = np.pi / n_modes
    th_edges = -np.pi / 2 + dth * np.arange(n_modes + 1)
    th = th_edges[:-1] + 0.5 * dth
    w = params.Omega + L * np.tan(th)
    with np.errstate(over="ignore"):
        edges = params.Omega + L * np.tan(th_edges)
    edges[0], edges[-1] = -np.inf, np.inf
    g2 = spectral_density(params, w) * L / np.cos(th) ** 2 * dth
    return BathModes(w, np.sqrt(g2), edges)


def quadrature_modes(params: ModelParams, t_max: float, n_modes: int | None = None,
                     thermal: bool = True, omega_min: float | None = None,
                     scale: float | None = None) -> BathModes:
    """Frequency nodes for sampled-continuum sums.

    Same grid as :func:`oracle_modes` but with at least 4000 nodes and at
    most 16000: the nodes only serve as quadrature points, so there is no
    revival to avoid, only resolution to buy.
    """
    n = n_modes or int(min(16000, max(4000, oracle_mode_demand(params, t_max, scale))))
    modes = lorentzian_modes(params, n, scale)
    return infrared_ladder(params, modes, omega_min) if thermal else modes


def _cumulative_weight(params: ModelParams, w):
    """int_{-inf}^{w} J, used for exact cell weights."""
    g = params.gamma
    return 0.5 * params.Gamma * g * (np.arctan((np.asarray(w) - params.Omega) / g) / np.pi + 0.5)


def infrared_ladder(params: ModelParams, modes: BathModes, omega_min: float | None = None,
                    ratio: float = 1.005, top: float | None = None) -> BathModes:
    """Replace the cells between 0 and ``top`` by geometric cells starting at ``omega_min``.

    ``top`` defaults to the first edge above omega0/4 from which the grid's
    own cells are narrower than one rung, ``(ratio - 1) * w``.

    The Bose factor grows like T/w below ~T, so a uniform-ish grid near zero
    resolves the thermal weight poorly.  Cells [w, ratio*w] carry equal
    shares of that weight; each mode sits at the 1/w-weighted mean of its
    cell and carries the exact Lorentzian mass of the cell.  Everything at
    or below zero is merged into one cell.

    The tan-mapped grid owes its accuracy for A(t) to error cancellation
    between cells; any local refinement breaks it at the level of one cell's
    midpoint error, so A-only checks should use the unrefined grid.
    """
    cut = 1e-6 * params.omega0 if omega_min is None else float(omega_min)
    e = np.asarray(modes.edges, dtype=float)
    if top is None:
        # climb until the grid's own cells are finer than a ladder rung
        width = np.diff(e)
        fine = (e[:-1] >= 0.25 * params.omega0) & (width <= (ratio - 1) * e[:-1])
        top = float(e[:-1][fine].min()) if fine.any() else 0.25 * params.omega0
    top = float(top)
    if not (ratio > 1 and 0 < cut < top):
        raise ParameterError("ladder needs ratio > 1 and 0 < omega_min < top")
    below = e[e <= 0]
    above = e[e >= top]
    if below.size == 0 or above.size == 0:
        return modes
    lo, hi = below.max(), above.min()
    rungs = cut * ratio ** np.arange(int(math.floor(math.log(hi / cut) / math.log(ratio))) + 1)
    rungs = rungs[rungs < hi * (1 - 1e-9)]
    ge = np.concatenate([[lo], rungs, [hi]])
    gw = 0.5 * (ge[1:] + ge[:-1])
    a, b = ge[1:-1], ge[2:]
    gw[1:] = (b - a) / np.log(b / a)
    g2 = _cumulative_weight(params, ge[1:]) - _cumulative_weight(params, ge[:-1])
    left = e[1:] <= lo
    right = e[:-1] >= hi
    w = np.concatenate([modes.omega[left], gw, modes.omega[right]])
    g = np.concatenate([modes.g[left], np.sqrt(np.maximum(g2, 0.0)), modes.g[right]])
    edges = np.concatenate([e[:-1][left], ge, e[1:][right]])
    return BathModes(w, g, edges)


def oracle_modes(params: ModelParams, t_max: float, n_modes: int | None = None,
                 thermal: bool = True, omega_min: float | None = None,
                 scale: float | None = None) -> BathModes:
    """Finite bath used by the oracles: tan-mapped Lorentzian grid whose
    revival lies beyond ``t_max``.  ``thermal=True`` adds the infrared
    ladder needed for thermal sums; use ``False`` when only A(t) matters."""
    n = n_modes or oracle_mode_count(params, t_max, scale)
    modes = lorentzian_modes(params, n, scale)
    return infrared_ladder(params, modes, omega_min) if thermal else modes


def oracle_mode_count(params: ModelParams, t_max: float, scale: float | None = None,
                      minimum: int = 400, maximum: int = 4000, safety: float = 1.5) -> int:
    """Mode count keeping the revival time of :func:`lorentzian_modes` past
    ``t_max``, clipped to [minimum, maximum]; see :func:`oracle_mode_demand`."""
    return int(min(maximum, max(minimum, oracle_mode_demand(params, t_max, scale, safety))))


def oracle_mode_demand(params: ModelParams, t_max: float, scale: float | None = None,
                       safety: float = 1.5) -> int:
    """Unclipped mode count for a revival beyond ``t_max``."""
    L = grid_scale(params) if scale is None else scale
    return int(math.ceil(safety * L * t_max))
