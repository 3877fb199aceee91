import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorbath.analytic import (
    GeneralODEProblem,
    amplitude,
    amplitude_offresonant,
    amplitude_resonant,
    amplitude_solution,
    bath_kernel_f,
    general_homogeneous,
    particular,
    particular_solution,
    solve,
    solve_homogeneous,
    steady_kernel,
)
from lorbath.errors import ParameterError, RegimeError
from lorbath.model import Branch, ModelParams, ode_coefficients, oracle_modes
from lorbath.observables import norm_defect
from lorbath.oracle import evolve_discrete_bath, evolve_local_ode


def fd_residual(fn, p1, p2, t, forcing=lambda t: 0.0, h=1e-2):
    """max |y'' + p1 y' + p2 y - forcing| / max(1, |y|) by fourth-order central differences."""
    t = np.asarray(t, dtype=float)
    y0, yp, ym, yp2, ym2 = fn(t), fn(t + h), fn(t - h), fn(t + 2 * h), fn(t - 2 * h)
    d1 = (8 * (yp - ym) - (yp2 - ym2)) / (12 * h)
    d2 = (16 * (yp + ym) - (yp2 + ym2) - 30 * y0) / (12 * h ** 2)
    res = d2 + p1 * d1 + p2 * y0 - forcing(t)
    return float(np.max(np.abs(res) / np.maximum(1.0, np.abs(y0))))


def test_initial_condition_every_branch():
    for p in (ModelParams(gamma=1.0), ModelParams(gamma=2.0), ModelParams(gamma=9.0),
              ModelParams.from_h(1.0, 1.2), ModelParams.from_h(1.0, 0.7)):
        sol = amplitude_solution(p)
        assert sol(0.0) == pytest.approx(1.0, abs=1e-14)
        assert sol.derivative(0.0) == pytest.approx(-1j * p.omega0, abs=1e-13)


def test_critical_closed_form():
    p = ModelParams(gamma=2.0)
    t = np.linspace(0, 10, 51)
    expected = (p.gamma / 2 * t + 1) * np.exp(-(p.gamma / 2 + 1j * p.omega0) * t)
    np.testing.assert_allclose(amplitude_resonant(p, t), expected, atol=1e-14)


def test_markovian_decay_rate():
    p = ModelParams(gamma=100.0)
    assert abs(amplitude(p, 1.0)) ** 2 == pytest.approx(np.exp(-1.0), rel=2e-2)


def test_offresonant_matches_integration():
    p = ModelParams.from_h(1.0, 1.2)
    t = np.array([0.0, 2.0])
    assert amplitude_offresonant(p, 2.0) == pytest.approx(evolve_local_ode(p, None, t)[-1], abs=1e-8)


def test_offresonant_continuous_at_resonance():
    ref = amplitude_resonant(ModelParams(), 3.0)
    for h in (1 - 1e-4, 1 + 1e-4):
        assert abs(amplitude_offresonant(ModelParams.from_h(1.0, h), 3.0) - ref) < 1e-3
    # the distance shrinks linearly with |h - 1|
    near = amplitude_offresonant(ModelParams.from_h(1.0, 1 + 1e-7), 3.0)
    assert abs(near - ref) < 1e-6


def test_wrong_branch_raises():
    with pytest.raises(RegimeError):
        amplitude_resonant(ModelParams.from_h(1.0, 1.2), 1.0)
    with pytest.raises(RegimeError):
        amplitude_offresonant(ModelParams(), 1.0)


def test_undamped_oscillator():
    w = 1.7
    prob = GeneralODEProblem(0j, w * w + 0j, initial_value=1, initial_derivative=0)
    t = np.linspace(0, 10, 101)
    np.testing.assert_allclose(general_homogeneous(prob, t), np.cos(w * t), atol=1e-12)


def test_general_solution_reproduces_resonant_branch():
    p = ModelParams()
    co = ode_coefficients(p)
    prob = GeneralODEProblem.from_coefficients(co, initial_value=1, initial_derivative=-1j)
    t = np.linspace(0, 20, 201)
    assert np.max(np.abs(general_homogeneous(prob, t) - amplitude_resonant(p, t))) < 1e-10


def test_delta2_zero_picks_degenerate_form():
    # d = ab/2 with 4c + b^2 - a^2 = 0
    prob = GeneralODEProblem(complex(1, 2), complex(-0.75, 1), initial_value=1, initial_derivative=0)
    sol = solve_homogeneous(prob)
    assert sol.case == "2:delta2=0"
    assert sol.degenerate


def test_particular_zero_forcing():
    prob = GeneralODEProblem(complex(1, 2), complex(0.3, 1))
    assert np.all(particular_solution(prob, np.linspace(0, 3, 7)) == 0)


def test_particular_regular_residual():
    p1, p2, f, lam = complex(0.4, 1.3), complex(-0.2, 0.9), complex(0.7, -0.5), complex(-0.3, -2.0)
    part = particular(p1, p2, f, lam)
    assert not part.resonant
    t = np.linspace(0, 5, 101)
    assert fd_residual(part, p1, p2, t, lambda s: f * np.exp(lam * s)) < 1e-7


def test_particular_on_a_root():
    r1, r2 = complex(-0.5, -1.0), complex(-1.0, 2.0)
    p1, p2 = -(r1 + r2), r1 * r2
    f = complex(1.0, 0.5)
    part = particular(p1, p2, f, r1)
    assert part.resonant
    t = np.linspace(0, 5, 101)
    np.testing.assert_allclose(part(t), part.K * t * np.exp(r1 * t))
    assert fd_residual(part, p1, p2, t, lambda s: f * np.exp(r1 * s)) < 1e-7


def test_particular_double_root_rejected():
    r = complex(-0.5, 1.0)
    with pytest.raises(ParameterError, match="double root"):
        particular(-2 * r, r * r, 1.0, r)


def test_forced_solution_keeps_initial_data():
    prob = GeneralODEProblem(complex(1, 2), complex(0.5, 1), forcing_amplitude=2 - 1j,
                             forcing_exponent=-1.5j, initial_value=0.3, initial_derivative=-1j)
    sol = solve(prob)
    assert sol(0.0) == pytest.approx(0.3, abs=1e-13)
    t = np.linspace(0, 6, 61)
    assert fd_residual(sol, prob.p1, prob.p2, t, lambda s: (2 - 1j) * np.exp(-1.5j * s)) < 1e-6


def test_bath_kernel_limits():
    p = ModelParams()
    w = np.linspace(0.1, 3, 7)
    np.testing.assert_allclose(bath_kernel_f(p, w, 0.0), 0.0, atol=1e-28)
    assert bath_kernel_f(p, 1.0, 200.0) == pytest.approx(4.0, rel=1e-9)
    assert steady_kernel(p, 1.0) == pytest.approx(4.0, rel=1e-12)


def test_bath_kernel_matches_finite_bath():
    p = ModelParams()
    t = np.linspace(0, 5, 26)
    modes = oracle_modes(p, 5.0, 2000, thermal=False)
    run = evolve_discrete_bath(p, modes, None, t)
    core = np.abs(modes.omega - p.Omega) < 5
    f = bath_kernel_f(p, modes.omega[core], t)
    assert np.max(np.abs(run.kernel()[:, core] - f)) < 1e-4


params_strategy = st.builds(
    lambda g, G, h: ModelParams.from_h(1.0, h, gamma=g, Gamma=G),
    st.floats(-2, 2).map(lambda x: 10 ** x),
    st.floats(-2, 2).map(lambda x: 10 ** x),
    st.floats(0.5, 2.0),
)


@settings(max_examples=100, deadline=None)
@given(params_strategy)
def test_amplitude_satisfies_ode(p):
    co = ode_coefficients(p)
    sol = amplitude_solution(p)
    t_end = min(10 / min(p.gamma, p.Gamma), 200.0)
    # step scaled to the fastest rate keeps the difference quotient accurate
    fast = max(abs(r) for r in sol.roots)
    t = np.linspace(0, t_end, 400)
    assert fd_residual(sol, co.p1, co.p2, t, h=1e-2 / max(1.0, fast)) < 1e-5


@settings(max_examples=30, deadline=None)
@given(params_strategy)
def test_amplitude_decays(p):
    sol = amplitude_solution(p)
    slowest = max(r.real for r in sol.roots)
    assert slowest < 0
    assert abs(sol(40 / -slowest)) < 1e-3


@pytest.mark.parametrize("p", [ModelParams(gamma=0.5), ModelParams(gamma=2.0),
                               ModelParams.from_h(1.0, 1.3, gamma=0.2)])
def test_unitarity(p):
    t = np.linspace(0, 10, 21)
    assert np.max(np.abs(norm_defect(p, t))) < 1e-5


def test_branch_continuity_around_critical():
    t = np.linspace(0, 10, 201)
    crit = amplitude(ModelParams(gamma=2.0), t)
    for g in (2 - 2e-6, 2 + 2e-6):
        p = ModelParams(gamma=g)
        assert amplitude_solution(p).regime.branch is not Branch.RESONANT_CRITICAL
        assert np.max(np.abs(amplitude(p, t) - crit)) < 1e-4
