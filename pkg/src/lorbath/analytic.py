"""Closed-form solutions for the system amplitude A(t) and the bath kernel f(w', t).

Both amplitudes obey a second-order linear ODE with complex constant
coefficients,

    y'' + p1 y' + p2 y = F exp(lam t),   p1 = a + ib,  p2 = c + id,

homogeneous for A(t) (A(0) = 1, A'(0) = -i omega0) and exponentially forced
for B_j(t) / g_j (B(0) = 0, B'(0) = -i).  The homogeneous exponents are
written per sub-case of the discriminants (see ``model.APPENDIX_CASES``);
the integration constants always come from the initial data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, RegimeError
from .model import (
    DEFAULT_TOL,
    Branch,
    ModelParams,
    ODECoefficients,
    RegimeClass,
    appendix_case,
    classify_regime,
    ode_coefficients,
)


@dataclass(frozen=True)
class GeneralODEProblem:
    """y'' + p1 y' + p2 y = forcing_amplitude * exp(forcing_exponent * t)."""

    p1: complex
    p2: complex
    forcing_amplitude: complex = 0j
    forcing_exponent: complex = 0j
    initial_value: complex = 1 + 0j
    initial_derivative: complex = 0j

    @classmethod
    def from_coefficients(cls, coeffs: ODECoefficients, **kwargs) -> "GeneralODEProblem":
        return cls(p1=coeffs.p1, p2=coeffs.p2, **kwargs)

    @property
    def coefficients(self) -> ODECoefficients:
        p1, p2 = complex(self.p1), complex(self.p2)
        return ODECoefficients(p1.real, p1.imag, p2.real, p2.imag)

    def characteristic(self, r):
        return r * r + self.p1 * r + self.p2

    def characteristic_derivative(self, r):
        return 2 * r + self.p1


def _stable_s(lam: float) -> float:
    """sqrt(sqrt(lam^2 + 1) - lam) without cancellation for large positive lam."""
    root = math.hypot(lam, 1.0)
    if lam > 0:
        return 1.0 / math.sqrt(root + lam)
    return math.sqrt(root - lam)


def homogeneous_exponents(a: float, b: float, c: float, d: float, case: str) -> tuple[complex, complex]:
    """Characteristic exponents (r1, r2) for one sub-case; r1 == r2 when degenerate."""
    half = complex(a, b) / 2
    if case in ("2:delta2=0", "3:delta3=0"):
        return -half, -half
    if case.startswith("2:"):
        delta2 = 4 * c + b * b - a * a
        if case == "2:delta2>0":
            q = math.sqrt(delta2)
            return -complex(a / 2, (b - q) / 2), -complex(a / 2, (b + q) / 2)
        q = math.sqrt(-delta2)
        return complex((-a + q) / 2, -b / 2), complex(-(a + q) / 2, -b / 2)
    if case.startswith("3:"):
        delta3 = a * b - 2 * d
        if case == "3:delta3>0":
            q = math.sqrt(delta3)
            return complex((-a + q) / 2, (-b + q) / 2), -complex((a + q) / 2, (b + q) / 2)
        q = math.sqrt(-delta3)
        return -complex((a - q) / 2, (b + q) / 2), complex((-a - q) / 2, (-b + q) / 2)
    delta1 = a * b - 2 * d
    delta2 = 4 * c + b * b - a * a
    # lambda1 is normalised by |delta1|: with the signed value the
    # delta1 < 0 exponents are not roots of the characteristic polynomial.
    s = _stable_s(delta2 / (2 * abs(delta1)))
    q = math.sqrt(abs(delta1))
    if case == "1:delta1>0":
        return (complex(-a / 2 + q * s / 2, -(b - q / s) / 2),
                complex(-a / 2 - q * s / 2, -(b + q / s) / 2))
    if case == "1:delta1<0":
        return (complex(-a / 2 - q * s / 2, -(b - q / s) / 2),
                complex(-a / 2 + q * s / 2, -(b + q / s) / 2))
    raise ParameterError(f"unknown sub-case {case!r}")


def fit_constants(r1: complex, r2: complex, degenerate: bool, v0, v1):
    """Constants matching y(0) = v0, y'(0) = v1.

    Distinct roots: y = C1 e^{r1 t} + C2 e^{r2 t}.
    Degenerate:     y = (C1 t + C2) e^{r t}.
    """
    if degenerate:
        return v1 - r1 * v0, v0 + 0j * v1
    C1 = (v1 - r2 * v0) / (r1 - r2)
    return C1, v0 - C1


@dataclass(frozen=True, eq=False)
class HomogeneousSolution:
    """Evaluator for the homogeneous solution of one sub-case.

    ``C1`` and ``C2`` may be arrays (one pair per forcing frequency); they
    broadcast against ``t`` with the usual numpy rules.
    """

    case: str
    r1: complex
    r2: complex
    C1: complex | np.ndarray
    C2: complex | np.ndarray
    degenerate: bool

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            return (self.C1 * t + self.C2) * np.exp(self.r1 * t)
        return self.C1 * np.exp(self.r1 * t) + self.C2 * np.exp(self.r2 * t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            return (self.C1 + self.r1 * (self.C1 * t + self.C2)) * np.exp(self.r1 * t)
        return self.C1 * self.r1 * np.exp(self.r1 * t) + self.C2 * self.r2 * np.exp(self.r2 * t)


def solve_homogeneous(problem: GeneralODEProblem, tol: float = DEFAULT_TOL,
                      case: str | None = None) -> HomogeneousSolution:
    co = problem.coefficients
    if case is None:
        case, _ = appendix_case(co.a, co.b, co.c, co.d, tol)
    r1, r2 = homogeneous_exponents(co.a, co.b, co.c, co.d, case)
    degenerate = case.endswith("=0")
    C1, C2 = fit_constants(r1, r2, degenerate, complex(problem.initial_value),
                           complex(problem.initial_derivative))
    return HomogeneousSolution(case, r1, r2, C1, C2, degenerate)


def general_homogeneous(problem: GeneralODEProblem, t, tol: float = DEFAULT_TOL):
    """Solution of the homogeneous equation with the problem's initial data."""
    return solve_homogeneous(problem, tol)(t)


@dataclass(frozen=True, eq=False)
class ParticularSolution:
    """K e^{lam t} (regular) or K t e^{lam t} (forcing on a root)."""

    K: complex | np.ndarray
    lam: complex | np.ndarray
    resonant: bool | np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        e = np.exp(self.lam * t)
        return np.where(self.resonant, self.K * t * e, self.K * e)

    def initial(self):
        """(y_p(0), y_p'(0))."""
        zero = np.zeros_like(self.K)
        return (np.where(self.resonant, zero, self.K),
                np.where(self.resonant, self.K, self.lam * self.K))


def particular(p1: complex, p2: complex, f, lam, tol: float = DEFAULT_TOL) -> ParticularSolution:
    f = np.asarray(f, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    phi = lam * lam + p1 * lam + p2
    dphi = 2 * lam + p1
    scale = np.abs(lam) ** 2 + abs(p1) * np.abs(lam) + abs(p2)
    on_root = np.abs(phi) <= tol * scale
    if np.any(on_root & (np.abs(dphi) <= tol * np.sqrt(scale))):
        raise ParameterError("forcing exponent is a double root of the characteristic "
                             "polynomial; unsupported")
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(on_root, f / dphi, f / phi)
    if K.ndim == 0:
        return ParticularSolution(complex(K), complex(lam), bool(on_root))
    return ParticularSolution(K, lam, on_root)


def particular_solution(problem: GeneralODEProblem, t, tol: float = DEFAULT_TOL):
    """A particular solution of the forced equation (zero when there is no forcing)."""
    if problem.forcing_amplitude == 0:
        return np.zeros_like(np.asarray(t, dtype=float), dtype=complex)
    return particular(problem.p1, problem.p2, problem.forcing_amplitude,
                      problem.forcing_exponent, tol)(t)


@dataclass(frozen=True, eq=False)
class ForcedSolution:
    homogeneous: HomogeneousSolution
    particular: ParticularSolution | None

    def __call__(self, t):
        out = self.homogeneous(t)
        if self.particular is not None:
            out = out + self.particular(t)
        return out


def solve(problem: GeneralODEProblem, tol: float = DEFAULT_TOL) -> ForcedSolution:
    """Full solution of the (possibly forced) problem with its initial data."""
    if problem.forcing_amplitude == 0:
        return ForcedSolution(solve_homogeneous(problem, tol), None)
    part = particular(problem.p1, problem.p2, problem.forcing_amplitude,
                      problem.forcing_exponent, tol)
    y0, y1 = part.initial()
    shifted = GeneralODEProblem(problem.p1, problem.p2,
                                initial_value=problem.initial_value - complex(y0),
                                initial_derivative=problem.initial_derivative - complex(y1))
    return ForcedSolution(solve_homogeneous(shifted, tol), part)


# ---------------------------------------------------------------------------
# system amplitude A(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AmplitudeSolution:
    regime: RegimeClass
    coefficients: ODECoefficients
    solution: HomogeneousSolution = field(repr=False)

    @property
    def roots(self) -> tuple[complex, complex]:
        return self.solution.r1, self.solution.r2

    @property
    def constants(self) -> tuple[complex, complex]:
        return self.solution.C1, self.solution.C2

    def __call__(self, t):
        return self.solution(t)

    def derivative(self, t):
        return self.solution.derivative(t)


def _resonant_solution(params: ModelParams, regime: RegimeClass) -> HomogeneousSolution:
    g, w0 = params.gamma, params.omega0
    if regime.branch is Branch.RESONANT_CRITICAL:
        r = complex(-g / 2, -w0)
        return HomogeneousSolution(regime.case, r, r, g / 2 + 0j, 1 + 0j, True)
    if regime.branch is Branch.RESONANT_MARKOVIAN:
        q = math.sqrt(-regime.discriminant)
        C1 = (g + q) / (2 * q)
        return HomogeneousSolution(regime.case, complex((-g + q) / 2, -w0),
                                   complex(-(g + q) / 2, -w0), C1 + 0j, 1 - C1 + 0j, False)
    q = math.sqrt(regime.discriminant)
    # equivalently A = e^{-(g/2 + i w0) t} [cos(q t/2) + (g/q) sin(q t/2)]
    C1 = complex(0.5, -g / (2 * q))
    return HomogeneousSolution(regime.case, -complex(g / 2, w0 - q / 2),
                               -complex(g / 2, w0 + q / 2), C1, 1 - C1, False)


def amplitude_solution(params: ModelParams, tol: float = DEFAULT_TOL) -> AmplitudeSolution:
    """Closed-form A(t) for whichever regime ``params`` falls in."""
    regime = classify_regime(params, tol)
    coeffs = ode_coefficients(params)
    if regime.resonant:
        sol = _resonant_solution(params, regime)
    else:
        problem = GeneralODEProblem.from_coefficients(
            coeffs, initial_value=1 + 0j, initial_derivative=-1j * params.omega0)
        sol = solve_homogeneous(problem, tol, case=regime.case)
    return AmplitudeSolution(regime, coeffs, sol)


def amplitude(params: ModelParams, t, tol: float = DEFAULT_TOL):
    return amplitude_solution(params, tol)(t)


def amplitude_resonant(params: ModelParams, t, tol: float = DEFAULT_TOL):
    """A(t) on resonance (omega0 == Omega)."""
    sol = amplitude_solution(params, tol)
    if not sol.regime.resonant:
        raise RegimeError(f"parameters are off resonance (h = {params.h:.12g}); "
                          "use amplitude_offresonant")
    return sol(t)


def amplitude_offresonant(params: ModelParams, t, tol: float = DEFAULT_TOL):
    """A(t) off resonance.  The degenerate c = (a^2 - b^2)/4 structure is
    handled by the general sub-case 3 solution."""
    sol = amplitude_solution(params, tol)
    if sol.regime.resonant:
        raise RegimeError("parameters are on resonance; use amplitude_resonant")
    return sol(t)


# ---------------------------------------------------------------------------
# bath kernel  B_j(t) / g_j  and  f(w', t) = |B_j(t) / g_j|^2
# ---------------------------------------------------------------------------

def bath_forcing(params: ModelParams, omega):
    """Forcing amplitude per unit coupling: -(w - Omega + i gamma).

    Obtained by differentiating the first-order B_j equation and eliminating
    the memory integral with G' = -(gamma + i Omega) G.
    """
    return -(np.asarray(omega, dtype=float) - params.Omega + 1j * params.gamma)


def characteristic_at(params: ModelParams, omega):
    """Phi(-i w) = -w^2 - i w p1 + p2."""
    co = ode_coefficients(params)
    lam = -1j * np.asarray(omega, dtype=float)
    return lam * lam + co.p1 * lam + co.p2


def steady_kernel(params: ModelParams, omega):
    """|C3(w)|^2 = |forcing|^2 / |Phi(-i w)|^2, the t -> inf limit of f."""
    num = np.abs(bath_forcing(params, omega)) ** 2
    return num / np.abs(characteristic_at(params, omega)) ** 2


@dataclass(frozen=True, eq=False)
class BathKernelSolution:
    """B(w', t) / g for an array of bath frequencies ``omega``."""

    regime: RegimeClass
    omega: np.ndarray
    homogeneous: HomogeneousSolution = field(repr=False)
    particular: ParticularSolution = field(repr=False)

    @property
    def C3(self):
        return self.particular.K

    def amplitude(self, t):
        """B/g with shape broadcast(t[..., None], omega)."""
        t = np.asarray(t, dtype=float)[..., None]
        return self.homogeneous(t) + self.particular(t)

    def f(self, t):
        return np.abs(self.amplitude(t)) ** 2


def bath_kernel_solution(params: ModelParams, omega, tol: float = DEFAULT_TOL,
                         amp: AmplitudeSolution | None = None) -> BathKernelSolution:
    """Pass ``amp`` (from :func:`amplitude_solution`) to skip re-classification
    when solving repeatedly for the same parameters."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    amp = amp or amplitude_solution(params, tol)
    co = amp.coefficients
    part = particular(co.p1, co.p2, bath_forcing(params, omega), -1j * omega, tol)
    y0, y1 = part.initial()
    hs = amp.solution
    C1, C2 = fit_constants(hs.r1, hs.r2, hs.degenerate, -y0, -1j - y1)
    hom = HomogeneousSolution(hs.case, hs.r1, hs.r2, C1, C2, hs.degenerate)
    return BathKernelSolution(amp.regime, omega, hom, part)


def bath_kernel_f(params: ModelParams, omega_prime, t, tol: float = DEFAULT_TOL):
    """f(w', t) = |B(w', t) / g|^2 for scalar or array ``omega_prime`` and ``t``.

    Output shape is ``broadcast(t[..., None], omega_prime)`` squeezed for
    scalar inputs.
    """
    scalar = np.ndim(omega_prime) == 0 and np.ndim(t) == 0
    out = bath_kernel_solution(params, omega_prime, tol).f(t)
    return float(out.ravel()[0]) if scalar else out
