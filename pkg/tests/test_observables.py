import numpy as np
import pytest

from lorbath.errors import ParameterError
from lorbath.model import ModelParams, bose_occupation, oracle_modes
from lorbath.observables import (
    Provenance,
    QuadratureConfig,
    Trajectory,
    aen_at,
    aen_trajectory,
    gamma_zero_limit_aen,
    local_maxima,
    markovian_limit_aen,
    norm_defect,
    relaxation_time,
    steady_state_aen,
)
from lorbath.oracle import aen_from_discrete, evolve_discrete_bath

NBAR = 1 / np.expm1(1.0)


def test_initial_value_is_system_occupation():
    p = ModelParams(Ts=3.0)
    assert aen_at(p, 0.0) == bose_occupation(1 / 3.0, 1.0)
    traj = aen_trajectory(p, [0.0, 1.0])
    assert traj.aen[0] == pytest.approx(bose_occupation(1 / 3.0, 1.0), abs=1e-12)


@pytest.mark.xfail(strict=True, reason="wide flat bath adds infrared thermal weight; "
                   "exact integral is 2.14, not nbar(omega0)")
def test_markovian_time_domain_reaches_bath_occupation():
    p = ModelParams(gamma=100.0)
    assert aen_at(p, 20.0) == pytest.approx(NBAR, rel=2e-2)


def test_matches_finite_bath():
    p = ModelParams(Ts=10.0)
    t = np.linspace(0, 20, 81)
    modes = oracle_modes(p, 20.0)
    oracle = aen_from_discrete(evolve_discrete_bath(p, modes, None, t), p, modes)
    assert np.max(np.abs(oracle.aen - aen_trajectory(p, t).aen)) < 1e-3


def test_steady_state_equals_long_time_value():
    p = ModelParams()
    assert aen_at(p, 200.0) == pytest.approx(steady_state_aen(p), abs=1e-3)


def test_limit_formulas():
    p = ModelParams()
    assert markovian_limit_aen(p) == pytest.approx(0.5819767068693265, rel=1e-12)
    assert markovian_limit_aen(ModelParams(Tb=1e-3)) == 0.0
    assert markovian_limit_aen(ModelParams(gamma=7.0, Gamma=0.2, Ts=9.0)) == markovian_limit_aen(p)
    assert gamma_zero_limit_aen(p.replace(gamma=0.0)) == 0.0
    assert gamma_zero_limit_aen(p.replace(gamma=0.01)) == pytest.approx(0.04 * NBAR, rel=1e-12)
    assert gamma_zero_limit_aen(p.replace(gamma=0.02)) / gamma_zero_limit_aen(p.replace(gamma=0.01)) == 2.0


def test_steady_state_ignores_system_temperature():
    values = {steady_state_aen(ModelParams(Ts=ts)) for ts in (1.0, 5.0, 10.0)}
    assert len(values) == 1


def test_steady_state_increases_with_bath_temperature():
    values = [steady_state_aen(ModelParams(Tb=tb)) for tb in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(values) > 0)


def test_steady_state_requires_memory():
    with pytest.raises(ParameterError):
        steady_state_aen(ModelParams(gamma=0.0))


def test_full_domain_option_runs():
    p = ModelParams()
    full = steady_state_aen(p, QuadratureConfig(domain="full"))
    assert np.isfinite(full)
    assert full != steady_state_aen(p)


def test_normalisation():
    t = np.linspace(0, 20, 41)
    for p in (ModelParams(), ModelParams(gamma=0.05), ModelParams.from_h(1.0, 0.8, gamma=3.0)):
        assert np.max(np.abs(norm_defect(p, t))) < 1e-5


def test_quadrature_config_validation():
    with pytest.raises(ParameterError):
        QuadratureConfig(domain="half")
    with pytest.raises(ParameterError):
        QuadratureConfig(omega_min=2.0, omega_max=1.0)


def test_trajectory_invariants():
    p = ModelParams()
    with pytest.raises(ParameterError):
        Trajectory([0.0, 0.0], [1.0, 1.0], p)
    with pytest.raises(ParameterError):
        Trajectory([0.0, 1.0], [1.0, -1.0], p)
    assert Trajectory([0.0], [0.1], p, provenance="local-ode-oracle").provenance is Provenance.LOCAL_ODE


def test_relaxation_time_cases():
    p = ModelParams()
    t = np.linspace(0, 10, 1001)
    assert relaxation_time(Trajectory(t, np.full_like(t, 0.3), p), 0.3, 0.02) == 0.0
    decay = Trajectory(t, np.exp(-2.0 * t), p)
    expected = np.log(1 / 0.02) / 2.0
    # steady value 0 falls back to the absolute floor, so use a band on a shifted curve
    shifted = Trajectory(t, 1.0 + np.exp(-2.0 * t), p)
    assert relaxation_time(shifted, 1.0, 0.02) == pytest.approx(expected, abs=t[1] - t[0])
    assert relaxation_time(decay, 0.5, 0.02) is None
    with pytest.raises(ParameterError):
        relaxation_time(decay, 0.0, 1.5)


def test_local_maxima():
    assert list(local_maxima([0, 1, 0, 2, 2, 1, 3])) == [1]
    assert local_maxima([1.0, 2.0]).size == 0
