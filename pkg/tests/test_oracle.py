import numpy as np
import pytest

from lorbath.analytic import amplitude, bath_kernel_f
from lorbath.control import PulseSchedule, control_scale
from lorbath.errors import ParameterError
from lorbath.model import BathModes, ModelParams, lorentzian_modes, oracle_modes, quadrature_modes
from lorbath.observables import Provenance, aen_at, aen_trajectory, initial_aen
from lorbath.oracle import (
    IntegratorConfig,
    aen_from_continuum,
    aen_from_discrete,
    discrete_norm_drift,
    evolve_continuum_nodes,
    evolve_discrete_bath,
    evolve_local_ode,
    local_ode_run,
    reversal_error,
    volterra_residual,
)


def test_decoupled_system_rotates_freely():
    p = ModelParams(Gamma=0.0)
    t = np.linspace(0, 10, 11)
    np.testing.assert_allclose(evolve_local_ode(p, None, t), np.exp(-1j * t), atol=1e-9)


def test_critical_closed_form():
    p = ModelParams(gamma=2.0)
    A = evolve_local_ode(p, None, [0.0, 1.0])[-1]
    assert A == pytest.approx(2 * np.exp(-(1 + 1j)), abs=1e-8)


def test_markovian_decay():
    p = ModelParams(gamma=100.0)
    A = evolve_local_ode(p, None, [0.0, 3.0])[-1]
    assert abs(A) ** 2 == pytest.approx(np.exp(-3.0), rel=2e-2)


@pytest.mark.parametrize("p", [ModelParams(gamma=0.3), ModelParams.from_h(1.0, 1.4, gamma=2.0)])
def test_local_ode_matches_closed_form(p):
    t = np.linspace(0, 30, 301)
    assert np.max(np.abs(evolve_local_ode(p, None, t) - amplitude(p, t))) < 1e-6


def test_volterra_residual_small():
    p = ModelParams(gamma=0.5)
    t = np.linspace(0, 10, 4001)
    A = evolve_local_ode(p, None, t)
    assert np.max(np.abs(volterra_residual(p, t, A))) < 1e-5


def test_volterra_residual_under_control():
    p = ModelParams(gamma=0.5)
    kick = PulseSchedule.kick(3.0, 1.0, 2.0)
    t = np.union1d(np.linspace(0, 6, 6001), kick.edges(6.0))
    A = evolve_local_ode(p, kick, t)
    assert np.max(np.abs(volterra_residual(p, t, A, kick))) < 1e-5


def test_single_mode_rabi():
    g = 0.3
    modes = BathModes(np.array([1.0, 5.0]), np.array([g, 0.0]), np.array([0.0, 3.0, 7.0]))
    t = np.linspace(0, 20, 41)
    run = evolve_discrete_bath(ModelParams(), modes, None, t)
    np.testing.assert_allclose(np.abs(run.A) ** 2, np.cos(g * t) ** 2, atol=1e-12)


def test_finite_bath_tracks_local_ode():
    p = ModelParams()
    t = np.linspace(0, 10, 101)
    modes = lorentzian_modes(p, 2000)
    run = evolve_discrete_bath(p, modes, None, t)
    assert np.max(np.abs(run.A - evolve_local_ode(p, None, t))) < 1e-3
    assert np.max(np.abs(run.B[0])) < 1e-12
    assert discrete_norm_drift(run) < 1e-6


def test_finite_bath_kernel_matches_closed_form():
    p = ModelParams()
    t = np.linspace(0, 8, 17)
    modes = lorentzian_modes(p, 2000)
    run = evolve_discrete_bath(p, modes, None, t)
    assert np.max(np.abs(run.kernel() - bath_kernel_f(p, modes.omega, t))) < 1e-3


def test_reversal():
    p = ModelParams(gamma=0.5)
    assert reversal_error(p, lorentzian_modes(p, 800), None, 10.0) < 1e-6


def test_needs_two_modes():
    modes = BathModes(np.array([1.0]), np.array([0.1]), np.array([0.5, 1.5]))
    with pytest.raises(ParameterError):
        evolve_discrete_bath(ModelParams(), modes, None, [0.0, 1.0])


def test_discrete_aen():
    p = ModelParams(gamma=0.5, Ts=5.0)
    t = np.linspace(0, 20, 41)
    modes = oracle_modes(p, 20.0)
    traj = aen_from_discrete(evolve_discrete_bath(p, modes, None, t), p, modes)
    assert traj.provenance is Provenance.DISCRETE_BATH
    assert traj.aen[0] == pytest.approx(initial_aen(p), abs=1e-12)
    assert traj.aen[-1] == pytest.approx(aen_at(p, 20.0), abs=1e-3)


def test_continuum_nodes_reproduce_closed_form():
    p = ModelParams(gamma=0.5, Ts=5.0)
    t = np.linspace(0, 30, 31)
    modes = quadrature_modes(p, 30.0)
    run = evolve_continuum_nodes(p, modes, None, t)
    np.testing.assert_allclose(run.A, amplitude(p, t), atol=1e-10)
    live = np.isfinite(modes.omega) & (modes.omega > 0.05)
    np.testing.assert_allclose(run.f[:, live], bath_kernel_f(p, modes.omega[live], t), atol=1e-9, rtol=1e-7)
    traj = aen_from_continuum(run, p)
    assert np.max(np.abs(traj.aen - aen_trajectory(p, t).aen)) < 1e-4


def test_trivial_pulse_is_identity():
    p = ModelParams(gamma=0.4)
    t = np.linspace(0, 20, 201)
    free = evolve_local_ode(p, None, t)
    same = PulseSchedule.leo_train(p.omega0, 0.2, 0.1)
    np.testing.assert_allclose(evolve_local_ode(p, same, t), free, atol=1e-9)
    modes = oracle_modes(p, 20.0, 600, thermal=False)
    np.testing.assert_allclose(evolve_discrete_bath(p, modes, same, t).A,
                               evolve_discrete_bath(p, modes, None, t).A, atol=1e-9)


def test_controlled_oracles_agree():
    p = ModelParams(Omega=1.2, gamma=0.1)
    leo = PulseSchedule.leo_train(8.0, 0.2, 0.12)
    t = np.linspace(0, 20, 101)
    local = evolve_local_ode(p, leo, t)
    scale = control_scale(p, leo, 20.0)
    modes = oracle_modes(p, 20.0, thermal=False, scale=scale)
    discrete = evolve_discrete_bath(p, modes, leo, t).A
    assert np.max(np.abs(np.abs(local) - np.abs(discrete))) < 1e-3
    cont = evolve_continuum_nodes(p, quadrature_modes(p, 20.0, scale=scale), leo, t)
    assert np.max(np.abs(cont.A - local)) < 1e-8


def test_restart_points_do_not_change_result():
    p = ModelParams(gamma=0.7)
    t = np.linspace(0, 10, 21)
    cfg = IntegratorConfig(restart_at=(2.5, 7.1))
    np.testing.assert_allclose(local_ode_run(p, None, t, cfg).A, evolve_local_ode(p, None, t), atol=1e-9)


def test_grid_validation():
    with pytest.raises(ParameterError):
        evolve_local_ode(ModelParams(), None, [1.0, 0.5])
    with pytest.raises(ParameterError):
        IntegratorConfig(rel_tol=0.0)
