"""Command-line front end: experiments, figure presets, CSV/JSON output.

Every output echoes the fully resolved configuration, so feeding the echo
back through ``--config`` reproduces the run.  Data sections are
deterministic; the wall time and other run metadata live only in ``# meta:``
header lines (CSV) or the ``meta`` object (JSON).

Exit codes: 0 success, 2 invalid configuration, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .control import (PulseKind, PulseSchedule, evolve_with_control, mpemba_experiment,
                      suggest_kick_end)
from .errors import ConvergenceError, ParameterError, RegimeError
from .model import ModelParams
from .observables import (Provenance, QuadratureConfig, aen_trajectory, gamma_zero_limit_aen,
                          markovian_limit_aen, steady_state_aen)
from .oracle import IntegratorConfig

EXPERIMENTS = ("evolve", "steady", "sweep", "pulse", "mpemba")
ORACLES = ("local", "discrete", "both", "none")
FORMATS = ("csv", "json")
QUANTITIES = ("trajectory", "steady")
MODEL_FIELDS = tuple(f.name for f in dataclasses.fields(ModelParams))
PULSE_FIELDS = ("omega1", "t_c", "t_p", "omega_k", "t0", "dt")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform sample grid on [0, t_max] (t in units of 1/frequency unit)."""

    t_max: float = 20.0
    n_samples: int = 401

    def problems(self) -> list[str]:
        out = []
        if not (isinstance(self.t_max, (int, float)) and math.isfinite(self.t_max) and self.t_max > 0):
            out.append(f"grid.t_max={self.t_max!r}: must be a positive finite time")
        if not (isinstance(self.n_samples, int) and self.n_samples >= 1):
            out.append(f"grid.n_samples={self.n_samples!r}: time grid must not be empty")
        return out

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_samples)


@dataclass(frozen=True)
class SweepAxis:
    """A parameter and the values it takes.

    ``name`` is a :class:`ModelParams` field or a pulse field, optionally
    written ``pulse.<field>``.
    """

    name: str
    values: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def key(self) -> str:
        return self.name.removeprefix("pulse.")

    @property
    def on_pulse(self) -> bool:
        return self.key in PULSE_FIELDS

    def problems(self, label: str) -> list[str]:
        out = []
        if self.key not in MODEL_FIELDS and not self.on_pulse:
            out.append(f"{label}.name={self.name!r}: not a model or pulse parameter")
        if not self.values:
            out.append(f"{label}.values=[]: needs at least one value")
        return out

    def to_dict(self) -> dict:
        return {"name": self.name, "values": list(self.values)}


@dataclass(frozen=True)
class MpembaSpec:
    """Hot/cold pair and kick target; ``kick_end="auto"`` sets the kick
    width from the first sign change of d|A|^2/dt under the kick."""

    Ts_hot: float = 8.0
    Ts_cold: float = 6.0
    target: str = "cold"
    band: float = 0.02
    kick_end: str = "fixed"

    def problems(self) -> list[str]:
        out = []
        if not self.Ts_hot > self.Ts_cold:
            out.append(f"mpemba.Ts_hot={self.Ts_hot!r}: must exceed Ts_cold={self.Ts_cold!r}")
        if not self.Ts_cold > 0:
            out.append(f"mpemba.Ts_cold={self.Ts_cold!r}: temperature must be positive")
        if self.target not in ("hot", "cold"):
            out.append(f"mpemba.target={self.target!r}: must be 'hot' or 'cold'")
        if not 0 < self.band < 1:
            out.append(f"mpemba.band={self.band!r}: must lie in (0, 1)")
        if self.kick_end not in ("fixed", "auto"):
            out.append(f"mpemba.kick_end={self.kick_end!r}: must be 'fixed' or 'auto'")
        return out


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully specified run."""

    experiment: str = "evolve"
    model: ModelParams = field(default_factory=ModelParams)
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    integ: IntegratorConfig = field(default_factory=IntegratorConfig)
    pulse: PulseSchedule | None = None
    grid: GridSpec = field(default_factory=GridSpec)
    sweep_axis: SweepAxis | None = None
    series_axis: SweepAxis | None = None
    quantity: str = "trajectory"
    mpemba: MpembaSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)
    oracle: str = "none"
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "name": self.name,
            "model": self.model.to_dict(),
            "quad": self.quad.to_dict(),
            "integ": self.integ.to_dict(),
            "pulse": None if self.pulse is None else self.pulse.to_dict(),
            "grid": dataclasses.asdict(self.grid),
            "sweep_axis": None if self.sweep_axis is None else self.sweep_axis.to_dict(),
            "series_axis": None if self.series_axis is None else self.series_axis.to_dict(),
            "quantity": self.quantity,
            "mpemba": None if self.mpemba is None else dataclasses.asdict(self.mpemba),
            "output": dataclasses.asdict(self.output),
            "oracle": self.oracle,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build a config; raises :class:`ParameterError` listing every problem."""
        config, problems = _build(data)
        if problems:
            raise ParameterError("; ".join(problems))
        return config

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()[:16]


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def _part(data: dict, key: str, build, problems: list, default=None):
    raw = data.get(key)
    if raw is None:
        return default
    if not isinstance(raw, dict):
        problems.append(f"{key}={raw!r}: must be an object")
        return default
    try:
        return build(**raw)
    except ParameterError as exc:
        problems.extend(f"{key}: {msg}" for msg in str(exc).split("; "))
    except TypeError as exc:
        problems.append(f"{key}: {exc}")
    return default


def _integ(**raw):
    if raw.get("max_step") is None:
        raw["max_step"] = math.inf
    return IntegratorConfig(**raw)


def _build(data: dict) -> tuple[ExperimentConfig | None, list[str]]:
    problems: list[str] = []
    if not isinstance(data, dict):
        return None, [f"config={data!r}: must be an object"]
    unknown = set(data) - {f.name for f in dataclasses.fields(ExperimentConfig)}
    problems.extend(f"{k}: unknown configuration key" for k in sorted(unknown))
    model = _part(data, "model", ModelParams, problems, ModelParams())
    quad = _part(data, "quad", QuadratureConfig, problems, QuadratureConfig())
    integ = _part(data, "integ", _integ, problems, IntegratorConfig())
    pulse = _part(data, "pulse", PulseSchedule, problems)
    grid = _part(data, "grid", GridSpec, problems, GridSpec())
    sweep = _part(data, "sweep_axis", SweepAxis, problems)
    series = _part(data, "series_axis", SweepAxis, problems)
    mp = _part(data, "mpemba", MpembaSpec, problems)
    output = _part(data, "output", OutputSpec, problems, OutputSpec())
    experiment = data.get("experiment", "evolve")
    quantity = data.get("quantity", "trajectory")
    oracle = data.get("oracle", "none")

    if experiment not in EXPERIMENTS:
        problems.append(f"experiment={experiment!r}: must be one of {', '.join(EXPERIMENTS)}")
    if quantity not in QUANTITIES:
        problems.append(f"quantity={quantity!r}: must be one of {', '.join(QUANTITIES)}")
    if oracle not in ORACLES:
        problems.append(f"oracle={oracle!r}: must be one of {', '.join(ORACLES)}")
    if output is not None and output.format not in FORMATS:
        problems.append(f"output.format={output.format!r}: must be csv or json")
    if grid is not None:
        problems.extend(grid.problems())
    for label, axis in (("sweep_axis", sweep), ("series_axis", series)):
        if axis is not None:
            problems.extend(axis.problems(label))
    if mp is not None:
        problems.extend(mp.problems())

    if experiment == "sweep" and sweep is None:
        problems.append("sweep_axis=None: a sweep needs a sweep axis")
    if experiment == "pulse" and (pulse is None or pulse.kind is PulseKind.NONE):
        problems.append("pulse=None: a pulse experiment needs a pulse schedule")
    if experiment == "mpemba" and mp is None:
        mp = MpembaSpec()
    if pulse is not None and model is not None:
        problems.extend(pulse.problems(model.omega0))
    for label, axis in (("sweep_axis", sweep), ("series_axis", series)):
        if axis is not None and axis.on_pulse and pulse is None:
            problems.append(f"{label}.name={axis.name!r}: pulse parameter swept without a pulse schedule")
    if series is not None and quantity != "steady":
        problems.append("series_axis: only steady-state sweeps take a series axis")
    if model is not None and experiment == "steady" and model.gamma <= 0:
        problems.append(f"model.gamma={model.gamma!r}: steady state requires gamma > 0")
    if mp is not None and mp.kick_end == "auto" and (pulse is None or pulse.kind is not PulseKind.KICK):
        problems.append("mpemba.kick_end='auto': needs a kick schedule")
    if problems:
        return None, problems
    return ExperimentConfig(experiment, model, quad, integ, pulse, grid, sweep, series, quantity,
                            mp, output, oracle, data.get("name", "")), []


def validate(config) -> list[str]:
    """Diagnostics for ``config`` (an :class:`ExperimentConfig` or a dict);
    empty iff :func:`run` would accept it.  Each names field, value and rule."""
    data = config.to_dict() if isinstance(config, ExperimentConfig) else config
    return _build(data)[1]


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _preset_table() -> dict[str, dict]:
    base = {"model": {"omega0": 1.0, "Omega": 1.0, "gamma": 1.0, "Gamma": 1.0, "Ts": 5.0, "Tb": 1.0}}

    def cfg(**kw):
        out = json.loads(json.dumps(base))
        model = kw.pop("model", {})
        out["model"].update(model)
        out.update(kw)
        return out

    traj = {"experiment": "sweep", "quantity": "trajectory"}
    steady = {"experiment": "sweep", "quantity": "steady"}
    leo = {"model": {"Omega": 1.2, "gamma": 0.1, "Gamma": 1.0, "Ts": 5.0},
           "grid": {"t_max": 20.0, "n_samples": 401}}
    return {
        "fig1a": cfg(**traj, model={"Ts": 5.0}, sweep_axis={"name": "Tb", "values": [0.5, 1.0, 2.0]}),
        "fig1b": cfg(**traj, model={"Ts": 10.0}, sweep_axis={"name": "Ts", "values": [2.0, 5.0, 10.0]}),
        "fig1c": cfg(**traj, sweep_axis={"name": "gamma", "values": [0.2, 1.0, 5.0]}),
        "fig1d": cfg(**traj, sweep_axis={"name": "Gamma", "values": [0.5, 1.0, 2.0]}),
        "fig2a": cfg(**traj, model={"Ts": 10.0}, grid={"t_max": 50.0, "n_samples": 1001},
                     sweep_axis={"name": "gamma", "values": [0.01, 0.1, 0.5, 1.0]}),
        "fig2b": cfg(experiment="evolve", model={"Ts": 10.0, "gamma": 2.0, "Gamma": 1.0},
                     grid={"t_max": 50.0, "n_samples": 1001}),
        "fig3": cfg(**steady, sweep_axis={"name": "gamma", "values": np.geomspace(0.01, 100, 21).tolist()}),
        "fig5a": cfg(**traj, model={"gamma": 0.01}, grid={"t_max": 200.0, "n_samples": 2001},
                     sweep_axis={"name": "Omega", "values": [1.0, 1.2, 1.5, 2.0]}),
        "fig5b": cfg(**traj, sweep_axis={"name": "Omega", "values": [1.0, 1.2, 1.5, 2.0]}),
        "fig5c": cfg(**steady, sweep_axis={"name": "Omega", "values": np.linspace(0.25, 3.0, 12).tolist()},
                     series_axis={"name": "gamma", "values": [0.01, 1.0]}),
        "fig6a": cfg(**traj, model={"Omega": 1.2}, grid={"t_max": 100.0, "n_samples": 1001},
                     sweep_axis={"name": "gamma", "values": [0.01, 0.1, 1.0, 10.0]}),
        "fig6b": cfg(**steady, model={"Omega": 1.2},
                     sweep_axis={"name": "gamma", "values": np.geomspace(0.01, 100, 21).tolist()}),
        "fig8a": cfg(**traj, **leo, pulse={"kind": "leo_train", "omega1": 8.0, "t_c": 0.2, "t_p": 0.16},
                     sweep_axis={"name": "pulse.t_p", "values": [0.16, 0.12, 0.08, 0.04]}),
        "fig8b": cfg(**traj, **leo, pulse={"kind": "leo_train", "omega1": 8.0, "t_c": 0.2, "t_p": 0.12},
                     sweep_axis={"name": "pulse.omega1", "values": [2.0, 4.0, 8.0, 16.0]}),
        "fig8c": cfg(**traj, **leo, pulse={"kind": "leo_train", "omega1": 8.0, "t_c": 0.2, "t_p": 0.16},
                     sweep_axis={"name": "gamma", "values": [0.02, 0.1, 0.5, 1.0]}),
        "fig9a": cfg(experiment="mpemba", grid={"t_max": 50.0, "n_samples": 1001},
                     pulse={"kind": "kick", "omega_k": 5.0, "t0": 1.0, "dt": 2.0},
                     mpemba={"Ts_hot": 8.0, "Ts_cold": 6.0, "target": "cold"}),
        "fig9b": cfg(experiment="mpemba", model={"gamma": 500.0, "Gamma": 5.0},
                     grid={"t_max": 50.0, "n_samples": 1001},
                     pulse={"kind": "kick", "omega_k": 5.0, "t0": 1.0, "dt": 2.0},
                     mpemba={"Ts_hot": 8.0, "Ts_cold": 6.0, "target": "cold"}),
        "fig9c": cfg(experiment="mpemba", model={"gamma": 0.01}, grid={"t_max": 5000.0, "n_samples": 5001},
                     pulse={"kind": "kick", "omega_k": 3.0, "t0": 100.0, "dt": 1.0},
                     mpemba={"Ts_hot": 8.0, "Ts_cold": 6.0, "target": "hot", "kick_end": "auto"}),
    }


PRESETS = tuple(sorted(_preset_table()))


def preset(name: str) -> ExperimentConfig:
    """Configuration of a named figure preset."""
    table = _preset_table()
    if name not in table:
        raise ParameterError(f"preset={name!r}: unknown preset; choose from {', '.join(PRESETS)}")
    data = table[name]
    data["name"] = name
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    """Ordered columns plus provenance per series and the resolved config."""

    config: dict
    columns: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float = 0.0

    def add(self, name: str, values, tag: str | None = None):
        self.columns[name] = [float(v) for v in np.asarray(values, dtype=float).ravel()]
        if tag is not None:
            self.provenance[name] = tag

    def to_json(self) -> str:
        body = {
            "meta": {"version": self.version, "config_hash": _hash(self.config),
                     "wall_time": self.wall_time},
            "config": self.config,
            "provenance": self.provenance,
            "scalars": self.scalars,
            "columns": self.columns,
        }
        return json.dumps(body, indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# meta: version={self.version}\n")
        buf.write(f"# meta: config_hash={_hash(self.config)}\n")
        buf.write(f"# meta: wall_time={self.wall_time:.3f}\n")
        buf.write(f"# meta: config={canonical_json(self.config)}\n")
        buf.write(f"# meta: provenance={canonical_json(self.provenance)}\n")
        if self.scalars:
            buf.write(f"# meta: scalars={canonical_json(self.scalars)}\n")
        names = list(self.columns)
        if names:
            buf.write(",".join(names) + "\n")
            rows = max(len(v) for v in self.columns.values())
            for i in range(rows):
                cells = [format(self.columns[n][i], ".17g") if i < len(self.columns[n]) else ""
                         for n in names]
                buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        body = json.loads(text)
        return cls(body["config"], body["columns"], body["provenance"], body.get("scalars", {}),
                   body["meta"]["version"], body["meta"]["wall_time"])

    @classmethod
    def from_csv(cls, text: str) -> "ResultRecord":
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("# meta: "):
                key, _, value = line[len("# meta: "):].partition("=")
                meta[key] = value
            elif line.strip():
                rows.append(line.split(","))
        columns = {}
        if rows:
            header, data = rows[0], rows[1:]
            for j, name in enumerate(header):
                columns[name] = [float(r[j]) for r in data if j < len(r) and r[j] != ""]
        return cls(json.loads(meta["config"]), columns, json.loads(meta.get("provenance", "{}")),
                   json.loads(meta.get("scalars", "{}")), meta.get("version", ""),
                   float(meta.get("wall_time", "nan")))


def _hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

_ORACLE_BATHS = {"local": ("continuum",), "discrete": ("discrete",), "both": ("continuum", "discrete"),
                 "none": ()}
_TAGS = {"continuum": Provenance.LOCAL_ODE.value, "discrete": Provenance.DISCRETE_BATH.value}
_SUFFIX = {"continuum": "local_ode", "discrete": "discrete_bath"}


def _with(config: ExperimentConfig, axis: SweepAxis, value: float):
    """(model, pulse) with ``axis`` set to ``value``."""
    if axis.on_pulse:
        return config.model, dataclasses.replace(config.pulse, **{axis.key: value})
    return config.model.replace(**{axis.key: value}), config.pulse


def _label(axis: SweepAxis, value: float) -> str:
    return f"[{axis.key}={float(value)!r}]"


def _series(config: ExperimentConfig, model: ModelParams, pulse, times, label: str = ""):
    """Columns for one parameter set: analytic N (uncontrolled only) and oracle N."""
    out = []
    controlled = pulse is not None and pulse.kind is not PulseKind.NONE
    baths = _ORACLE_BATHS[config.oracle]
    if controlled:
        traj = aen_trajectory(model, times, config.quad)
        out.append((f"N_free_analytic{label}", traj.aen, Provenance.ANALYTIC.value))
        for bath in baths or ("continuum",):
            run = evolve_with_control(model, pulse, times, config.integ, bath=bath)
            keep = np.isin(run.times, times)
            out.append((f"N_pulse_{_SUFFIX[bath]}{label}", run.aen[keep], _TAGS[bath]))
        return out
    traj = aen_trajectory(model, times, config.quad)
    out.append((f"N_analytic{label}", traj.aen, Provenance.ANALYTIC.value))
    for bath in baths:
        run = evolve_with_control(model, None, times, config.integ, bath=bath)
        out.append((f"N_{_SUFFIX[bath]}{label}", run.aen, _TAGS[bath]))
    return out


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Replace data-dependent settings (an automatic kick end) by numbers."""
    mp = config.mpemba
    if config.experiment != "mpemba" or mp is None or mp.kick_end != "auto":
        return config
    pulse = config.pulse
    hot = config.model.replace(Ts=mp.Ts_hot)
    end = suggest_kick_end(hot, pulse.omega_k, pulse.t0, config.grid.t_max, config.integ)
    if end is None:
        raise ParameterError("mpemba.kick_end='auto': no sign change of d|A|^2/dt inside the window")
    return dataclasses.replace(config, pulse=dataclasses.replace(pulse, dt=end - pulse.t0),
                               mpemba=dataclasses.replace(mp, kick_end="fixed"))


def run(config: ExperimentConfig, jobs: int = 1) -> ResultRecord:
    """Execute ``config``; the record's config echo is the resolved config."""
    problems = validate(config)
    if problems:
        raise ParameterError("; ".join(problems))
    start = time.perf_counter()
    config = resolve(config)
    record = ResultRecord(config.to_dict())
    times = config.grid.times()
    w0 = config.model.omega0

    if config.experiment in ("evolve", "pulse"):
        record.add("t", w0 * times)
        pulse = config.pulse if config.experiment == "pulse" else None
        for name, values, tag in _series(config, config.model, pulse, times):
            record.add(name, values, tag)
    elif config.experiment == "steady":
        m = config.model
        record.add("N_steady", [steady_state_aen(m, config.quad)], Provenance.ANALYTIC.value)
        record.scalars = {"markovian_limit": markovian_limit_aen(m),
                          "gamma_zero_limit": gamma_zero_limit_aen(m)}
    elif config.experiment == "sweep":
        _run_sweep(config, record, times, jobs)
    else:
        _run_mpemba(config, record, times)
    record.wall_time = time.perf_counter() - start
    return record


def _run_sweep(config: ExperimentConfig, record: ResultRecord, times, jobs: int):
    axis = config.sweep_axis
    if config.quantity == "steady":
        record.add(axis.key, axis.values)
        series = config.series_axis
        groups = [(None, "")] if series is None else [(v, _label(series, v)) for v in series.values]
        for value, label in groups:
            base = config if value is None else dataclasses.replace(
                config, model=_with(config, series, value)[0])

            def one(v, base=base):
                return steady_state_aen(_with(base, axis, v)[0], config.quad)

            record.add(f"N_steady{label}", _map(one, list(axis.values), jobs), Provenance.ANALYTIC.value)
        return
    record.add("t", config.model.omega0 * times)

    def one(v):
        model, pulse = _with(config, axis, v)
        return _series(config, model, pulse, times, _label(axis, v))

    for cols in _map(one, list(axis.values), jobs):
        for name, values, tag in cols:
            record.add(name, values, tag)


def _run_mpemba(config: ExperimentConfig, record: ResultRecord, times):
    mp = config.mpemba
    hot = config.model.replace(Ts=mp.Ts_hot)
    cold = config.model.replace(Ts=mp.Ts_cold)
    bath = "discrete" if config.oracle == "discrete" else "continuum"
    free = mpemba_experiment(hot, cold, None, mp.target, times, mp.band, config.integ, bath=bath)
    report = mpemba_experiment(hot, cold, config.pulse, mp.target, times, mp.band, config.integ,
                               bath=bath)
    keep = np.isin(report.hot.times, times)
    tag = _TAGS[bath]
    record.add("t", config.model.omega0 * times)
    record.add("N_hot", report.hot.aen[keep], tag)
    record.add("N_cold", report.cold.aen[keep], tag)
    record.add("N_hot_free", free.hot.aen, tag)
    record.add("N_cold_free", free.cold.aen, tag)
    record.scalars = {"report": report.to_dict(), "free_report": free.to_dict()}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--config", help="JSON configuration file; flags override its values")
    g.add_argument("--out", help="output path (default: standard output)")
    g.add_argument("--format", choices=FORMATS, help="output format (default csv)")
    g.add_argument("--oracle", choices=ORACLES, help="oracle series to add next to the analytic one")
    g.add_argument("--tol", type=float, help="relative tolerance for quadrature and integration")
    g.add_argument("--seed", type=int, help="reserved; every pipeline is deterministic")
    g.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    m = p.add_argument_group("model")
    for name in MODEL_FIELDS:
        m.add_argument(f"--{name}", type=float, dest=f"model_{name}")
    t = p.add_argument_group("time grid")
    t.add_argument("--t-max", type=float, dest="grid_t_max")
    t.add_argument("--samples", type=int, dest="grid_n_samples")
    return p


def _pulse_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("pulse")
    g.add_argument("--kind", choices=[k.value for k in PulseKind], dest="pulse_kind")
    g.add_argument("--omega1", type=float, dest="pulse_omega1")
    g.add_argument("--t-c", type=float, dest="pulse_t_c")
    g.add_argument("--t-p", type=float, dest="pulse_t_p")
    g.add_argument("--omega-k", type=float, dest="pulse_omega_k")
    g.add_argument("--t0", type=float, dest="pulse_t0")
    g.add_argument("--dt", type=float, dest="pulse_dt")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="lorbath", description="Exact dynamics of an oscillator in a Lorentzian bath.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("evolve", parents=[common], help="N(t) on a time grid")
    sub.add_parser("steady", parents=[common], help="steady-state N")
    sp = sub.add_parser("sweep", parents=[common], help="N(t) or steady N over a parameter list")
    sp.add_argument("--param", help="parameter to sweep (model field or pulse.<field>)")
    sp.add_argument("--values", help="comma-separated values")
    sp.add_argument("--quantity", choices=QUANTITIES)
    _pulse_args(sp)
    pp = sub.add_parser("pulse", parents=[common], help="N(t) under a pulse schedule")
    _pulse_args(pp)
    mp = sub.add_parser("mpemba", parents=[common], help="hot/cold relaxation with a kick")
    _pulse_args(mp)
    mp.add_argument("--Ts-hot", type=float, dest="mpemba_Ts_hot")
    mp.add_argument("--Ts-cold", type=float, dest="mpemba_Ts_cold")
    mp.add_argument("--target", choices=("hot", "cold"), dest="mpemba_target")
    mp.add_argument("--band", type=float, dest="mpemba_band")
    mp.add_argument("--kick-end", choices=("fixed", "auto"), dest="mpemba_kick_end")
    vp = sub.add_parser("validate", parents=[common], help="check a configuration without running it")
    _pulse_args(vp)
    pr = sub.add_parser("preset", parents=[common], help="run a figure preset")
    pr.add_argument("name", choices=PRESETS)
    return parser


def _load(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    # a result file (JSON) carries its config under "config"
    if isinstance(data, dict) and "config" in data and "columns" in data:
        data = data["config"]
        # never write over the file the run came from
        if isinstance(data.get("output"), dict):
            data["output"] = {**data["output"], "path": None}
    return data


def config_from_args(args: argparse.Namespace) -> dict:
    """Raw configuration dict: preset or file, then command, then flags."""
    if args.command == "preset":
        data = preset(args.name).to_dict()
    elif args.config:
        data = _load(args.config)
    else:
        data = {}
    if args.command not in ("preset", "validate"):
        data["experiment"] = args.command
    elif args.command == "validate":
        data.setdefault("experiment", "evolve")
    opts = vars(args)
    for section in ("model", "grid", "pulse", "mpemba"):
        prefix = section + "_"
        given = {k[len(prefix):]: v for k, v in opts.items() if k.startswith(prefix) and v is not None}
        if given:
            part = dict(data.get(section) or {})
            part.update(given)
            data[section] = part
    if data.get("pulse") and "kind" not in data["pulse"]:
        data["pulse"]["kind"] = "kick" if "omega_k" in data["pulse"] else "leo_train"
    if args.command == "mpemba":
        data.setdefault("mpemba", {})
    if getattr(args, "param", None):
        values = [float(v) for v in (args.values or "").split(",") if v.strip()]
        data["sweep_axis"] = {"name": args.param, "values": values}
    if getattr(args, "quantity", None):
        data["quantity"] = args.quantity
    if args.oracle:
        data["oracle"] = args.oracle
    if args.tol is not None:
        data["quad"] = {**(data.get("quad") or {}), "rel_tol": args.tol}
        data["integ"] = {**(data.get("integ") or {}), "rel_tol": args.tol}
    if args.format or args.out:
        out = dict(data.get("output") or {})
        if args.format:
            out["format"] = args.format
        if args.out:
            out["path"] = args.out
        data["output"] = out
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = config_from_args(args)
    except (OSError, json.JSONDecodeError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    problems = validate(data)
    if args.command == "validate":
        for line in problems:
            print(line)
        if not problems:
            print("ok")
        return EXIT_INVALID if problems else EXIT_OK
    if problems:
        for line in problems:
            print(f"invalid: {line}", file=sys.stderr)
        return EXIT_INVALID
    config = ExperimentConfig.from_dict(data)
    try:
        record = run(config, jobs=max(1, args.jobs))
    except ConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ParameterError, RegimeError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = record.render(config.output.format)
    if config.output.path:
        with open(config.output.path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
