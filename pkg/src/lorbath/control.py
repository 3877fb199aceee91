"""Rectangular control of the system frequency and the Mpemba experiment.

A control schedule replaces omega0 by a piecewise-constant C(t):

* ``leo_train``: C = omega1 on (n t_c, n t_c + t_p], omega0 elsewhere;
* ``kick``: C = omega_k on (t0, t0 + dt], omega0 elsewhere.

Intervals are half-open on the left, so the value at a pulse edge is the
one of the interval the edge closes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .errors import ParameterError
from .model import ModelParams, grid_scale, oracle_modes, quadrature_modes
from .observables import Trajectory, relaxation_time, steady_state_aen
from .oracle import (IntegratorConfig, aen_from_continuum, aen_from_discrete,
                     evolve_continuum_nodes, evolve_discrete_bath, local_ode_run)


class PulseKind(str, Enum):
    NONE = "none"
    LEO_TRAIN = "leo_train"
    KICK = "kick"


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant system frequency C(t); unused fields stay ``None``."""

    kind: PulseKind = PulseKind.NONE
    omega1: float | None = None
    t_c: float | None = None
    t_p: float | None = None
    omega_k: float | None = None
    t0: float | None = None
    dt: float | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", PulseKind(self.kind))
        except ValueError:
            raise ParameterError(f"pulse.kind={self.kind!r}: unknown pulse kind") from None
        problems = self.problems()
        if problems:
            raise ParameterError("; ".join(problems))

    @classmethod
    def none(cls) -> "PulseSchedule":
        return cls()

    @classmethod
    def leo_train(cls, omega1: float, t_c: float, t_p: float) -> "PulseSchedule":
        return cls(PulseKind.LEO_TRAIN, omega1=omega1, t_c=t_c, t_p=t_p)

    @classmethod
    def kick(cls, omega_k: float, t0: float, dt: float) -> "PulseSchedule":
        return cls(PulseKind.KICK, omega_k=omega_k, t0=t0, dt=dt)

    def problems(self, omega0: float | None = None) -> list[str]:
        """Violated invariants, one message each (empty when valid).

        ``omega0`` enables the check omega1 > omega0 for pulse trains.
        """
        out = []

        def need(name, positive=True):
            v = getattr(self, name)
            if v is None or not math.isfinite(v):
                out.append(f"pulse.{name}={v!r}: required for kind {self.kind.value}")
                return False
            if positive and v <= 0:
                out.append(f"pulse.{name}={v!r}: must be positive")
                return False
            if not positive and v < 0:
                out.append(f"pulse.{name}={v!r}: must be non-negative")
                return False
            return True

        if self.kind is PulseKind.LEO_TRAIN:
            ok = need("omega1") & need("t_c") & need("t_p")
            if ok and self.t_p > self.t_c:
                out.append(f"pulse.t_p={self.t_p!r}: pulse width must not exceed the period t_c={self.t_c!r}")
            if ok and omega0 is not None and not self.omega1 > omega0:
                out.append(f"pulse.omega1={self.omega1!r}: must exceed omega0={omega0!r}")
        elif self.kind is PulseKind.KICK:
            need("omega_k")
            need("t0", positive=False)
            need("dt")
        return out

    @property
    def period(self) -> float | None:
        return self.t_c if self.kind is PulseKind.LEO_TRAIN else None

    def frequency(self, t: float, omega0: float) -> float:
        if t < 0:
            raise ParameterError("control frequency requested at negative time")
        if self.kind is PulseKind.LEO_TRAIN:
            n = math.ceil(t / self.t_c) - 1
            if n >= 0 and t <= n * self.t_c + self.t_p:
                return float(self.omega1)
            return float(omega0)
        if self.kind is PulseKind.KICK:
            return float(self.omega_k) if self.t0 < t <= self.t0 + self.dt else float(omega0)
        return float(omega0)

    def edges(self, t_end: float) -> list[float]:
        """Times in (0, t_end) at which C(t) jumps."""
        if self.kind is PulseKind.LEO_TRAIN:
            if self.t_p >= self.t_c:
                return []
            n_max = int(math.floor(t_end / self.t_c)) + 1
            cand = []
            for n in range(n_max + 1):
                cand.extend((n * self.t_c, n * self.t_c + self.t_p))
        elif self.kind is PulseKind.KICK:
            cand = [self.t0, self.t0 + self.dt]
        else:
            cand = []
        return sorted({float(x) for x in cand if 0 < x < t_end})

    def segments(self, t_end: float, omega0: float) -> list[tuple[float, float, float]]:
        """(start, stop, C) triples covering [0, t_end] with C constant on (start, stop]."""
        pts = [0.0, *self.edges(t_end), float(t_end)]
        segs = []
        for a, b in zip(pts[:-1], pts[1:]):
            c = self.frequency(0.5 * (a + b), omega0)
            if segs and segs[-1][2] == c:
                segs[-1] = (segs[-1][0], b, c)
            else:
                segs.append((a, b, c))
        return segs

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        for name in ("omega1", "t_c", "t_p", "omega_k", "t0", "dt"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSchedule":
        return cls(**data)


def control_frequency(schedule: PulseSchedule, t: float, omega0: float = 1.0) -> float:
    """C(t) for ``schedule`` with rest frequency ``omega0``."""
    return schedule.frequency(t, omega0)


def with_edges(schedule: PulseSchedule | None, t_grid) -> np.ndarray:
    """``t_grid`` with every pulse edge inside its span inserted."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ParameterError("empty time grid")
    if schedule is None:
        return t
    return np.union1d(t, schedule.edges(float(t[-1])))


def control_scale(params: ModelParams, schedule: PulseSchedule | None, t_end: float) -> float:
    """Bath-grid scale covering every frequency the schedule visits before ``t_end``."""
    freqs = [] if schedule is None else [c for _, _, c in schedule.segments(t_end, params.omega0)]
    return grid_scale(params, freqs)


def evolve_with_control(params: ModelParams, schedule: PulseSchedule | None, t_grid,
                        cfg: IntegratorConfig | None = None, n_modes: int | None = None,
                        bath: str = "continuum") -> Trajectory:
    """N(t) under control; the amplitude comes from the local-ODE run.

    ``bath="continuum"`` sums f(w, t) over sampled-continuum nodes, each
    propagated exactly through the schedule.  ``bath="discrete"`` uses a
    finite bath instead, which is limited by its revival time and by the
    sampling error of A fed back into every mode.  Missing pulse edges are
    inserted into the grid.
    """
    if bath not in ("continuum", "discrete"):
        raise ParameterError(f"bath must be 'continuum' or 'discrete', got {bath!r}")
    if schedule is not None:
        problems = schedule.problems(params.omega0)
        if problems:
            raise ParameterError("; ".join(problems))
        if schedule.kind is PulseKind.NONE:
            schedule = None
    t = with_edges(schedule, t_grid)
    local = local_ode_run(params, schedule, t, cfg)
    t_end = float(t[-1])
    scale = control_scale(params, schedule, t_end)
    if bath == "continuum":
        modes = quadrature_modes(params, t_end, n_modes, scale=scale)
        traj = aen_from_continuum(evolve_continuum_nodes(params, modes, schedule, t, cfg), params)
    else:
        modes = oracle_modes(params, t_end, n_modes, scale=scale)
        traj = aen_from_discrete(evolve_discrete_bath(params, modes, schedule, t, cfg), params, modes)
    return Trajectory(t, traj.aen, params, pulse=schedule, provenance=traj.provenance,
                      amplitude=local.A)


def suggest_kick_end(params: ModelParams, omega_k: float, t0: float, t_max: float,
                     cfg: IntegratorConfig | None = None) -> float | None:
    """First time after ``t0`` at which d|A|^2/dt = -2 Re(A* z) turns from
    negative to positive while the system sits at ``omega_k``.

    This is one reading of "end the kick when the decay strength becomes
    negative".  The crossing is located by an integrator event, so it is
    exact to the integrator tolerance.  ``None`` if no sign change occurs
    before ``t_max``.
    """
    if not t_max > t0:
        raise ParameterError("t_max must exceed the kick start")
    cfg = cfg or IntegratorConfig()
    start = local_ode_run(params, None, [0.0, t0] if t0 > 0 else [0.0], cfg)
    y0 = np.array([start.A[-1], start.z[-1]])
    M = np.array([[-1j * omega_k, -1.0],
                  [0.5 * params.Gamma * params.gamma, -(params.gamma + 1j * params.Omega)]])

    def rate(_, v):
        return -2.0 * np.real(np.conj(v[0]) * v[1])

    rate.terminal = True
    rate.direction = 1.0
    sol = integrate.solve_ivp(lambda _, v: M @ v, (t0, t_max), y0, method="DOP853",
                              events=rate, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                              max_step=cfg.max_step)
    hits = sol.t_events[0]
    return float(hits[0]) if hits.size else None


@dataclass(frozen=True)
class MpembaReport:
    hot_relaxation: float | None
    cold_relaxation: float | None
    crossing_times: list = field(default_factory=list)
    effect_detected: bool = False
    reason: str = ""
    steady_value: float = math.nan
    hot: Trajectory | None = field(default=None, repr=False)
    cold: Trajectory | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "hot_relaxation": self.hot_relaxation,
            "cold_relaxation": self.cold_relaxation,
            "crossing_times": list(self.crossing_times),
            "effect_detected": self.effect_detected,
            "reason": self.reason,
            "steady_value": self.steady_value,
        }


def crossing_times(times, first, second, rel_floor: float = 1e-9) -> list[float]:
    """Interpolated times where ``first - second`` changes sign.

    Differences below ``rel_floor`` times the curve scale are treated as
    ties, so round-off between converged curves does not count.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(first, dtype=float)
    d = a - np.asarray(second, dtype=float)
    floor = rel_floor * max(1.0, float(np.max(np.abs(a))))
    sig = np.flatnonzero(np.abs(d) > floor)
    out = []
    for i, j in zip(sig[:-1], sig[1:]):
        if d[i] * d[j] < 0:
            if j == i + 1:
                out.append(float(t[i] - d[i] * (t[j] - t[i]) / (d[j] - d[i])))
            else:
                # the curves touched over a run of ties; report its midpoint
                out.append(float(0.5 * (t[i + 1] + t[j - 1])))
    return out


def default_final_time(params: ModelParams) -> float:
    """t_f = 50 / min(gamma, Gamma, omega0)."""
    return 50.0 / min(params.gamma, params.Gamma, params.omega0)


def mpemba_experiment(params_hot: ModelParams, params_cold: ModelParams,
                      schedule: PulseSchedule | None, target: str, t_grid,
                      band: float = 0.02, cfg: IntegratorConfig | None = None,
                      n_modes: int | None = None, bath: str = "continuum") -> MpembaReport:
    """Run hot and cold samples on a shared bath; the kick goes to ``target``.

    Relaxation times are measured against the common steady state.
    """
    if target not in ("hot", "cold"):
        raise ParameterError(f"target must be 'hot' or 'cold', got {target!r}")
    if params_hot.replace(Ts=params_cold.Ts) != params_cold:
        raise ParameterError("hot and cold samples may differ only in Ts")
    if not params_hot.Ts > params_cold.Ts:
        raise ParameterError("the hot sample must have the higher Ts")
    t = with_edges(schedule, t_grid)
    hot = evolve_with_control(params_hot, schedule if target == "hot" else None, t, cfg, n_modes, bath)
    cold = evolve_with_control(params_cold, schedule if target == "cold" else None, t, cfg, n_modes, bath)
    steady = steady_state_aen(params_hot)
    t_hot = relaxation_time(hot, steady, band)
    t_cold = relaxation_time(cold, steady, band)
    if t_hot is None or t_cold is None:
        which = [n for n, v in (("hot", t_hot), ("cold", t_cold)) if v is None]
        reason = f"{' and '.join(which)} sample not relaxed within the window"
        detected = False
    else:
        detected = t_hot < t_cold
        reason = "hot sample relaxes first" if detected else "cold sample relaxes first or together"
    return MpembaReport(t_hot, t_cold, crossing_times(t, hot.aen, cold.aen), detected,
                        reason, steady, hot, cold)
