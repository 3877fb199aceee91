"""Numerical oracles that check the closed forms independently.

Two routes are provided:

* the local-ODE reduction.  For the exponential kernel the memory integral
  z(t) = int_0^t G(t-s) A(s) ds obeys dz/dt = (Gamma gamma/2) A - (gamma + i Omega) z,
  so A and z form a two-component linear ODE that an adaptive Runge-Kutta
  pair integrates directly;
* a finite bath.  The single-particle Hamiltonian of the oscillator plus
  sampled modes is real symmetric.  Each constant-frequency stretch is
  propagated exactly through its eigendecomposition.

Control enters only through the system frequency C(t).  Any object with a
``segments(t_end, omega0)`` method returning ``(start, stop, C)`` triples can
be passed as ``control``; see :class:`lorbath.control.PulseSchedule`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .errors import ConvergenceError, ParameterError
from .model import BathModes, ModelParams, bose_cell_average, bose_occupation
from .observables import Provenance, Trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive integrator settings.

    ``restart_at`` lists extra times at which integration is restarted, on
    top of the pulse edges reported by the control schedule.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    restart_at: tuple = ()

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("integrator tolerances must be positive")
        if not self.max_step > 0:
            raise ParameterError("max_step must be positive")
        object.__setattr__(self, "restart_at", tuple(float(t) for t in self.restart_at))

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["restart_at"] = list(self.restart_at)
        if math.isinf(self.max_step):
            out["max_step"] = None
        return out


@dataclass(frozen=True)
class LocalODEState:
    A: complex
    z: complex


@dataclass(frozen=True)
class DiscreteBathState:
    A: complex
    B: np.ndarray = field(repr=False)

    @property
    def norm(self) -> float:
        return float(abs(self.A) ** 2 + np.sum(np.abs(self.B) ** 2))


def _check_grid(t_grid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ParameterError("time grid must be a non-empty 1-d sequence")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ParameterError("time grid must start at t >= 0 and increase strictly")
    return t


def _segments(params: ModelParams, control, t_end: float, extra=()) -> list[tuple[float, float, float]]:
    """Constant-frequency pieces covering [0, t_end], split at ``extra`` too."""
    if control is None:
        segs = [(0.0, t_end, params.omega0)]
    else:
        segs = list(control.segments(t_end, params.omega0))
    cuts = sorted(t for t in extra if 0 < t < t_end)
    if not cuts:
        return segs
    out = []
    for a, b, c in segs:
        inner = [t for t in cuts if a < t < b]
        pts = [a, *inner, b]
        out.extend((pts[i], pts[i + 1], c) for i in range(len(pts) - 1))
    return out


# ---------------------------------------------------------------------------
# local-ODE reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalODERun:
    times: np.ndarray
    A: np.ndarray
    z: np.ndarray

    def states(self) -> list[LocalODEState]:
        return [LocalODEState(complex(a), complex(z)) for a, z in zip(self.A, self.z)]


def local_ode_run(params: ModelParams, control=None, t_grid=(0.0,),
                  cfg: IntegratorConfig | None = None) -> LocalODERun:
    """Integrate (A, z) with DOP853, restarting at every frequency change."""
    cfg = cfg or IntegratorConfig()
    t = _check_grid(t_grid)
    g2 = 0.5 * params.Gamma * params.gamma
    mem = params.gamma + 1j * params.Omega
    A_out = np.empty(t.size, dtype=complex)
    z_out = np.empty(t.size, dtype=complex)
    y = np.array([1.0 + 0j, 0j])
    done = t <= 0
    A_out[done], z_out[done] = y[0], y[1]

    for a, b, c in _segments(params, control, float(t[-1]), cfg.restart_at):
        if b <= a:
            continue
        M = np.array([[-1j * c, -1.0], [g2, -mem]])
        mask = (t > a) & (t <= b)
        t_eval = np.union1d(t[mask], [b])
        sol = integrate.solve_ivp(lambda _, v: M @ v, (a, b), y, method="DOP853", t_eval=t_eval,
                                  rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step)
        if sol.status != 0:
            last = float(sol.t[-1]) if sol.t.size else a
            raise ConvergenceError(f"local-ODE integration failed near t={last:.6g}: {sol.message}",
                                   estimate=last)
        if mask.any():
            A_out[mask], z_out[mask] = sol.y[0, :mask.sum()], sol.y[1, :mask.sum()]
        y = sol.y[:, -1]
    return LocalODERun(t, A_out, z_out)


def evolve_local_ode(params: ModelParams, control=None, t_grid=(0.0,),
                     cfg: IntegratorConfig | None = None) -> np.ndarray:
    """A(t) on ``t_grid`` from the local-ODE reduction of the memory integral."""
    return local_ode_run(params, control, t_grid, cfg).A


def volterra_residual(params: ModelParams, times, A, control=None) -> np.ndarray:
    """Residual of the integrated Volterra equation on a sampled A.

    R(t) = A(t) - 1 + i int_0^t C(s) A(s) ds + int_0^t K(t - u) A(u) du with
    K(tau) = int_0^tau G, evaluated by the trapezoidal rule on ``times``
    (which must start at 0).  Accuracy is O(dt^2).
    """
    t = _check_grid(times)
    if t[0] != 0:
        raise ParameterError("residual grid must start at t = 0")
    A = np.asarray(A, dtype=complex)
    mem = params.gamma + 1j * params.Omega
    g2 = 0.5 * params.Gamma * params.gamma
    # C taken at interval midpoints: exact when pulse edges lie on the grid
    mid = 0.5 * (t[1:] + t[:-1])
    if control is None:
        C = np.full(mid.size, params.omega0)
    else:
        C = np.array([control.frequency(s, params.omega0) for s in mid])
    steps = 0.5j * C * (A[1:] + A[:-1]) * np.diff(t)
    res = A - 1.0 + np.concatenate([[0.0], np.cumsum(steps)])
    for k in range(1, t.size):
        tau = t[k] - t[: k + 1]
        K = g2 * (-np.expm1(-mem * tau)) / mem
        res[k] += integrate.trapezoid(K * A[: k + 1], t[: k + 1])
    return res


# ---------------------------------------------------------------------------
# finite bath
# ---------------------------------------------------------------------------

class _SpectralPropagator:
    """Exact e^{-i H tau} for the single-particle Hamiltonian at system frequency C."""

    def __init__(self, modes: BathModes):
        self.w = np.asarray(modes.omega, dtype=float)
        self.g = np.asarray(modes.g, dtype=float)
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def hamiltonian(self, c: float) -> np.ndarray:
        n = self.w.size
        H = np.zeros((n + 1, n + 1))
        H[0, 0] = c
        H[0, 1:] = H[1:, 0] = self.g
        H[np.arange(1, n + 1), np.arange(1, n + 1)] = self.w
        return H

    def eig(self, c: float):
        if c not in self._cache:
            self._cache[c] = linalg.eigh(self.hamiltonian(c))
        return self._cache[c]

    def apply(self, c: float, tau, v: np.ndarray) -> np.ndarray:
        """e^{-iH tau} v; with an array ``tau`` returns one column per entry."""
        E, V = self.eig(c)
        phase = np.exp(-1j * np.multiply.outer(E, tau))
        if np.ndim(tau) == 0:
            return V @ (phase * (V.T @ v))
        return V @ (phase * (V.T @ v)[:, None])

    def apply_block(self, c: float, tau: float, X: np.ndarray) -> np.ndarray:
        E, V = self.eig(c)
        return V @ (np.exp(-1j * E * tau)[:, None] * (V.T @ X))

    def matrix(self, c: float, tau: float) -> np.ndarray:
        E, V = self.eig(c)
        return (V * np.exp(-1j * E * tau)) @ V.T


@dataclass(frozen=True, eq=False)
class DiscreteBathRun:
    """Samples of a finite-bath evolution: A(t) and B_j(t) for every mode."""

    times: np.ndarray
    A: np.ndarray
    B: np.ndarray = field(repr=False)
    modes: BathModes = field(repr=False)

    def __len__(self):
        return self.times.size

    def __getitem__(self, k) -> DiscreteBathState:
        return DiscreteBathState(complex(self.A[k]), self.B[k])

    def states(self) -> list[DiscreteBathState]:
        return [self[k] for k in range(self.times.size)]

    @property
    def norm(self) -> np.ndarray:
        return np.abs(self.A) ** 2 + np.sum(np.abs(self.B) ** 2, axis=1)

    def kernel(self) -> np.ndarray:
        """|B_j|^2 / g_j^2, the finite-bath image of f(w_j, t)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.B) ** 2 / self.modes.weights


def _row_from_segments(prop: _SpectralPropagator, segs, t: float, n: int) -> np.ndarray:
    # row 0 of U(t, 0) = U_k ... U_1; each U_i is symmetric, so its transpose
    # U_1 ... U_k e_0 is built by applying the latest segment first
    v = np.zeros(n + 1, dtype=complex)
    v[0] = 1.0
    for a, b, c in reversed(segs):
        if a >= t:
            continue
        v = prop.apply(c, min(b, t) - a, v)
    return v


def evolve_discrete_bath(params: ModelParams, modes: BathModes, control=None, t_grid=(0.0,),
                         cfg: IntegratorConfig | None = None) -> DiscreteBathRun:
    """Exact propagation of the oscillator plus a finite bath.

    Returns A(t) = U_00 and B_j(t) = U_0j, the coefficients of a(0) and b_j(0)
    in the Heisenberg operator a(t).  ``cfg`` only contributes restart
    times; the propagation itself is exact up to round-off.
    """
    cfg = cfg or IntegratorConfig()
    if len(modes) < 2:
        raise ParameterError("the finite bath needs at least two modes")
    t = _check_grid(t_grid)
    n = len(modes)
    prop = _SpectralPropagator(modes)
    rows = np.empty((t.size, n + 1), dtype=complex)
    period = getattr(control, "period", None)
    if period:
        _periodic_rows(prop, control, params, t, rows)
    else:
        segs = _segments(params, control, float(t[-1]), cfg.restart_at)
        _block_rows(prop, segs, t, rows)
    return DiscreteBathRun(t, rows[:, 0].copy(), rows[:, 1:].copy(), modes)


def _block_rows(prop: _SpectralPropagator, segs, t, rows):
    """Samples grouped by segment; each group is carried back to t = 0 as a block."""
    e0 = np.zeros(rows.shape[1])
    e0[0] = 1.0
    starts = np.array([a for a, _, _ in segs])
    idx = np.clip(np.searchsorted(starts, t, side="left") - 1, 0, len(segs) - 1)
    for k in np.unique(idx):
        sel = np.flatnonzero(idx == k)
        a, _, c = segs[k]
        X = prop.apply(c, t[sel] - a, e0)
        for a_j, b_j, c_j in reversed(segs[:k]):
            X = prop.apply_block(c_j, b_j - a_j, X)
        rows[sel] = X.T


def _periodic_rows(prop: _SpectralPropagator, control, params: ModelParams, t, rows):
    """Floquet route for periodic schedules: U(n T + s) = U_s P^n."""
    T = control.period
    one_period = list(control.segments(T, params.omega0))
    # transpose of the one-period propagator, P^T = U_1 U_2 ... (first piece leftmost)
    Q = np.eye(rows.shape[1], dtype=complex)
    for a, b, c in one_period:
        Q = Q @ prop.matrix(c, b - a)
    lam, Z = _unitary_eig(Q)
    n_periods = np.floor(t / T + 1e-12)
    phase = t - n_periods * T
    n = rows.shape[1] - 1
    for k in range(t.size):
        w = _row_from_segments(prop, one_period, phase[k], n)
        rows[k] = Z @ (lam ** n_periods[k] * (Z.conj().T @ w))


def _unitary_eig(Q):
    T, Z = linalg.schur(Q, output="complex")
    return np.diag(T).copy(), Z


def discrete_norm_drift(run: DiscreteBathRun) -> float:
    """Largest |norm - 1| over the samples."""
    return float(np.max(np.abs(run.norm - 1.0)))


def reversal_error(params: ModelParams, modes: BathModes, control=None, t_end: float = 10.0) -> float:
    """|A(0) - 1| after evolving forward to ``t_end`` and back with negated time."""
    prop = _SpectralPropagator(modes)
    segs = _segments(params, control, t_end)
    v = np.zeros(len(modes) + 1, dtype=complex)
    v[0] = 1.0
    for a, b, c in segs:
        v = prop.apply(c, b - a, v)
    for a, b, c in reversed(segs):
        v = prop.apply(c, -(b - a), v)
    return float(abs(v[0] - 1.0))


def mode_occupations(params: ModelParams, modes: BathModes, omega_min: float | None = None) -> np.ndarray:
    """Thermal occupation assigned to each mode.

    A mode stands for its frequency cell; it carries the Bose factor averaged
    over the part of the cell above ``omega_min`` (default 1e-6 omega0, the
    same cutoff as the frequency quadrature).  Modes below the cutoff are
    treated as empty.
    """
    lo_cut = 1e-6 * params.omega0 if omega_min is None else float(omega_min)
    edges = np.asarray(modes.edges, dtype=float)
    lo = np.maximum(edges[:-1], lo_cut)
    hi = edges[1:]
    occ = np.zeros(len(modes))
    live = hi > lo
    occ[live] = bose_cell_average(params.beta_b, lo[live], hi[live])
    # a cell cut by omega_min keeps only the share of its width above the cut
    full = hi - edges[:-1]
    share = np.ones(len(modes))
    cut = live & np.isfinite(full)
    share[cut] = (hi[cut] - lo[cut]) / full[cut]
    return occ * share


def aen_from_discrete(states, params: ModelParams, modes: BathModes,
                      omega_min: float | None = None) -> Trajectory:
    """N(t) = |A|^2 nbar(beta_s, omega0) + sum_j |B_j|^2 n_j from a finite-bath run."""
    if isinstance(states, DiscreteBathRun):
        run = states
    else:
        raise ParameterError("aen_from_discrete expects the run returned by evolve_discrete_bath")
    if run.B.shape[1] != len(modes):
        raise ParameterError("states and modes are not aligned")
    occ = mode_occupations(params, modes, omega_min)
    n_s = float(bose_occupation(params.beta_s, params.omega0))
    aen = np.abs(run.A) ** 2 * n_s + (np.abs(run.B) ** 2) @ occ
    return Trajectory(run.times, aen, params, provenance=Provenance.DISCRETE_BATH, amplitude=run.A)


# ---------------------------------------------------------------------------
# sampled continuum
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContinuumRun:
    """A(t) and f(w_j, t) = |B_w / g_w|^2 at quadrature nodes of the continuum.

    Each node follows the continuum equations exactly, so unlike the finite
    bath there is no recurrence and no back-action of sampling on A.
    """

    times: np.ndarray
    A: np.ndarray
    f: np.ndarray = field(repr=False)
    modes: BathModes = field(repr=False)


def _generator(params: ModelParams, c: float) -> np.ndarray:
    return np.array([[-1j * c, -1.0], [0.5 * params.Gamma * params.gamma,
                                        -(params.gamma + 1j * params.Omega)]])


def evolve_continuum_nodes(params: ModelParams, modes: BathModes, control=None, t_grid=(0.0,),
                           cfg: IntegratorConfig | None = None, chunk: int = 64) -> ContinuumRun:
    """Exact piecewise propagation of (A, z) and of (b_w, y_w) at each node w.

    With b_w = B_w / g_w the pair obeys
    db/dt = -i C b - y - i exp(-i w t),  dy/dt = (Gamma gamma / 2) b - (gamma + i Omega) y,
    starting from zero.  On a constant-C stretch the solution is
    x(t) = E(t - a) (x(a) - u exp(-i w a)) + u exp(-i w t) with E = expm(M tau)
    and u = -(M + i w)^-1 (-i, 0).
    """
    cfg = cfg or IntegratorConfig()
    t = _check_grid(t_grid)
    w = np.asarray(modes.omega, dtype=float)
    K = 0.5 * params.Gamma * params.gamma
    mem = params.gamma + 1j * params.Omega
    A = np.empty(t.size, dtype=complex)
    f = np.empty((t.size, w.size))
    xa = np.array([1.0 + 0j, 0j])
    xb = np.zeros((2, w.size), dtype=complex)
    done = t <= 0
    A[done] = 1.0
    f[done] = 0.0
    for a, b, c in _segments(params, control, float(t[-1]), cfg.restart_at):
        if b <= a:
            continue
        M = _generator(params, c)
        det = 1j * (w - c) * (1j * w - mem) + K
        if np.any(det == 0):
            raise ParameterError("node frequency coincides with an undamped system frequency")
        u = np.stack([1j * (1j * w - mem) / det, -1j * K / det])
        d = xb - u * np.exp(-1j * w * a)
        sel = np.flatnonzero((t > a) & (t <= b))
        for lo in range(0, sel.size, chunk):
            idx = sel[lo:lo + chunk]
            E = linalg.expm(M[None] * (t[idx] - a)[:, None, None])
            A[idx] = E[:, 0] @ xa
            b_w = E[:, 0] @ d + u[0][None] * np.exp(-1j * np.outer(t[idx], w))
            f[idx] = np.abs(b_w) ** 2
        E = linalg.expm(M * (b - a))
        xa = E @ xa
        xb = E @ d + u * np.exp(-1j * w * b)
    return ContinuumRun(t, A, f, modes)


def aen_from_continuum(run: ContinuumRun, params: ModelParams,
                       omega_min: float | None = None) -> Trajectory:
    """N(t) = |A|^2 nbar(beta_s, omega0) + sum_j g_j^2 f(w_j, t) n_j."""
    occ = mode_occupations(params, run.modes, omega_min)
    n_s = float(bose_occupation(params.beta_s, params.omega0))
    aen = np.abs(run.A) ** 2 * n_s + run.f @ (run.modes.weights * occ)
    return Trajectory(run.times, aen, params, provenance=Provenance.LOCAL_ODE, amplitude=run.A)
