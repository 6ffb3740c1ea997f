import math
import unittest

import numpy as np
import pydantic
import pytest
from numpy.testing import assert_allclose

from fracmem.fracops import TimeGrid, TimeSeries, rl_left
from fracmem.testfn import TestFunctionSpec
from fracmem.wavesim import (DataSpec, HistoryBuffer, IntegrationFailure, ModelParams, Outcome,
                             SimResult, SimState, critical_exponent, dealias_mask,
                             fit_linear_coefficient, frac_laplacian_apply, gaussian_data,
                             grid_axis, linear_energy, memory_term, moment_balance,
                             moment_inequality_monitor, run, step, threshold_sweep)

CHI = TestFunctionSpec()


def periodic_params(**kwargs) -> ModelParams:
    """[−π, π) box, so integer wavenumbers."""
    return ModelParams(**{'L': math.pi, 'M': 16, 'dt': 0.01, 'T_max': 1.0, **kwargs})


def march(state: SimState, params: ModelParams, steps: int, with_memory: bool = False) -> SimState:
    for _ in range(steps):
        state = step(state, params, with_memory=with_memory)
    return state


class TestModelParams(unittest.TestCase):
    def test_defaults(self):
        params = ModelParams()
        self.assertEqual(params.n_steps, 50000)
        self.assertAlmostEqual(params.alpha, 0.5)
        self.assertEqual(params.shape, (256,))

    def test_domain_rules(self):
        for bad in ({'M': 100}, {'gamma': 1.0}, {'p': 1.0}, {'sigma': 0.0}, {'eta': -0.1},
                    {'dt': 0.0}, {'output_every': 0}):
            with self.assertRaises(pydantic.ValidationError):
                ModelParams(**bad)

    def test_two_dimensional_shape(self):
        params = ModelParams(N=2, M=8)
        self.assertEqual(params.shape, (8, 8))
        self.assertEqual(gaussian_data(params)[0].shape, (8, 8))


def test_grid_axis():
    params = periodic_params()
    axis = grid_axis(params)
    assert axis[0] == pytest.approx(-math.pi)
    assert axis[-1] == pytest.approx(math.pi - 2 * math.pi / 16)


def test_frac_laplacian_of_cosine():
    params = periodic_params()
    x = grid_axis(params)
    assert_allclose(frac_laplacian_apply(np.cos(2 * x), 0.5, params), 2 * np.cos(2 * x), atol=1e-12)
    assert_allclose(frac_laplacian_apply(np.cos(2 * x), 1.0, params), 4 * np.cos(2 * x), atol=1e-12)
    assert_allclose(frac_laplacian_apply(np.cos(x), 0.0, params), np.cos(x))
    with pytest.raises(ValueError):
        frac_laplacian_apply(np.zeros(8), 0.5, params)


def test_dealias_mask():
    mask = dealias_mask(periodic_params())
    assert mask.tolist() == [True] * 6 + [False] * 3


def test_undamped_mode_oscillates():
    """μ=0, σ=½: û'' = −|ξ|û, so cos(2x) oscillates at √2"""
    params = periodic_params(sigma=0.5, mu=0.0)
    x = grid_axis(params)
    state = march(SimState.initial(params, np.cos(2 * x), np.zeros(16)), params, 100)
    assert state.t == pytest.approx(1.0)
    assert_allclose(state.u, math.cos(math.sqrt(2)) * np.cos(2 * x), atol=1e-9)
    assert_allclose(state.v, -math.sqrt(2) * math.sin(math.sqrt(2)) * np.cos(2 * x), atol=1e-9)


def test_critically_damped_mode():
    """σ=η=1, μ=2 on cos x: u'' + 2u' + u = 0 gives (1+t)e^{−t}"""
    params = periodic_params(sigma=1.0, eta=1.0, mu=2.0)
    x = grid_axis(params)
    state = march(SimState.initial(params, np.cos(x), np.zeros(16)), params, 100)
    assert_allclose(state.u, 2 * math.exp(-1) * np.cos(x), atol=1e-9)


def test_history_buffer_grows():
    buffer = HistoryBuffer((3,), capacity=2)
    for i in range(5):
        buffer.append(np.full(3, float(i)))
    assert len(buffer) == 5
    assert buffer.view()[:, 0].tolist() == [0, 1, 2, 3, 4]


def test_memory_term_of_constant_history():
    """|u|^p ≡ 1 gives t^{1−γ}/Γ(2−γ)"""
    params = periodic_params(gamma=0.5)
    history = HistoryBuffer(params.shape)
    n = 40
    for _ in range(n):
        history.append(np.ones(params.shape))
    state = SimState(u=np.ones(params.shape), v=np.zeros(params.shape), history=history,
                     t=n * params.dt, step_index=n)
    expected = (n * params.dt) ** 0.5 / math.gamma(1.5)
    assert_allclose(memory_term(state, params), expected, rtol=1e-12)


def test_memory_term_history_length():
    params = periodic_params()
    state = SimState.initial(params, np.ones(16), np.zeros(16))
    assert not np.any(memory_term(state, params))
    state.step_index = 3
    with pytest.raises(ValueError):
        memory_term(state, params)


def test_history_tracks_steps():
    params = periodic_params()
    x = grid_axis(params)
    state = march(SimState.initial(params, 0.1 * np.cos(x), np.zeros(16)), params, 7, with_memory=True)
    assert state.step_index == 7
    assert len(state.history) == 7


def test_memory_term_matches_rl_left_at_a_grid_point():
    params = periodic_params(gamma=0.3, p=2.0)
    x = grid_axis(params)
    state = SimState.initial(params, 0.5 * np.exp(-x ** 2), 0.2 * np.cos(x))
    trace = [state.u[5]]
    for _ in range(60):
        state = step(state, params)
        trace.append(state.u[5])
    series = TimeSeries(TimeGrid(60, params.dt), np.abs(np.array(trace)) ** params.p)
    expected = rl_left(series, 1 - params.gamma).values[-1]
    assert memory_term(state, params)[5] == pytest.approx(expected, abs=1e-10)


def test_spectral_laplacian_beats_finite_differences():
    """−Δe^{cos x} = (cos x − sin²x)e^{cos x}"""
    errors = []
    for M in (32, 64):
        params = periodic_params(M=M)
        x = grid_axis(params)
        f = np.exp(np.cos(x))
        exact = (np.cos(x) - np.sin(x) ** 2) * f
        spectral = frac_laplacian_apply(f, 1.0, params)
        finite = -(np.roll(f, -1) - 2 * f + np.roll(f, 1)) / params.spacing ** 2
        assert np.max(np.abs(spectral - exact)) <= 1e-10
        errors.append(np.max(np.abs(finite - exact)))
        assert np.max(np.abs(spectral - finite)) <= 2 * params.spacing ** 2
    assert errors[0] / errors[1] >= 3.5


def test_translation_equivariance():
    params = periodic_params(M=32)
    x = grid_axis(params)
    u0, u1 = np.exp(-(x - 0.5) ** 2), 0.3 * np.sin(x)
    state = march(SimState.initial(params, u0, u1), params, 20, with_memory=True)
    shifted = march(SimState.initial(params, np.roll(u0, 7), np.roll(u1, 7)), params, 20,
                    with_memory=True)
    assert_allclose(shifted.u, np.roll(state.u, 7), atol=1e-12)
    assert_allclose(shifted.v, np.roll(state.v, 7), atol=1e-12)


def test_parity_and_zero_preserved():
    params = periodic_params(M=32)
    mirror = (-np.arange(32)) % 32
    u0, u1 = gaussian_data(params)
    state = march(SimState.initial(params, u0, u1), params, 20, with_memory=True)
    assert_allclose(state.u[mirror], state.u, atol=1e-12)
    assert_allclose(state.v[mirror], state.v, atol=1e-12)
    zero = march(SimState.initial(params, np.zeros(32), np.zeros(32)), params, 5, with_memory=True)
    assert not np.any(zero.u) and not np.any(zero.v)


def test_initial_data_validation():
    params = periodic_params()
    with pytest.raises(ValueError):
        SimState.initial(params, np.full(16, np.nan), np.zeros(16))
    with pytest.raises(ValueError):
        SimState.initial(params, np.zeros(8), np.zeros(8))


def test_linear_energy_nonincreasing():
    params = ModelParams(M=64, L=10.0, dt=0.01, T_max=1.0)
    u0, u1 = gaussian_data(params)
    state = SimState.initial(params, u0, u1)
    energies = [linear_energy(state.u, state.v, params)]
    for _ in range(50):
        state = step(state, params, with_memory=False)
        energies.append(linear_energy(state.u, state.v, params))
    assert np.all(np.diff(energies) <= 1e-12 * energies[0])
    assert energies[-1] < energies[0]


def test_zero_data_is_global():
    params = ModelParams(M=32, L=10.0, T_max=0.1)
    result = run(params, np.zeros(32), np.zeros(32), CHI)
    assert result.outcome is Outcome.GLOBAL
    assert [r.t for r in result.records] == pytest.approx([0.01 * k for k in range(11)])
    assert result.records[-1].u_sup == 0.0


def test_zero_data_monitor_is_zero():
    params = ModelParams(M=32, L=10.0, T_max=0.1)
    result = run(params, np.zeros(32), np.zeros(32), CHI)
    assert (result.A, result.B) == (0.0, 0.0)
    monitor = moment_inequality_monitor(result, params, 1.0)
    assert monitor.grid.n_steps == 10
    assert monitor.max_norm() == 0.0
    assert moment_balance(result, params).max_norm() == 0.0


def test_run_rejects_dimension_mismatch():
    params = ModelParams(M=32, L=10.0, T_max=0.1)
    chi = TestFunctionSpec(N=2, q=3.0, sigma=1.0, eta=0.5)
    with pytest.raises(ValueError):
        run(params, np.zeros(32), np.zeros(32), chi)


def test_small_data_moment_balance():
    params = ModelParams(M=128, L=20.0, dt=1e-3, T_max=1.0, output_every=10)
    u0, u1 = gaussian_data(params, DataSpec(amplitude=0.1))
    result = run(params, u0, u1, CHI)
    assert result.outcome is Outcome.BOUNDED
    assert len(result.records) == 101
    intercept, slope = fit_linear_coefficient(moment_balance(result, params))
    assert intercept == pytest.approx(result.A, abs=0.05 * max(1.0, abs(result.A)))
    assert slope == pytest.approx(result.B, abs=0.05 * max(1.0, abs(result.B)))


def test_large_data_blows_up():
    params = ModelParams(M=32, L=10.0, dt=1e-3, T_max=3.0, blowup_threshold=1e4, p=1.5, gamma=0.5)
    u0, u1 = gaussian_data(params, DataSpec(amplitude=200.0))
    result = run(params, u0, u1, CHI)
    assert result.outcome is Outcome.BLOWUP
    assert 0 < result.blowup_time < params.T_max
    assert result.end_time == result.blowup_time
    assert result.records[-1].u_sup > params.blowup_threshold


def test_monitor_requires_constant():
    params = ModelParams(M=32, L=10.0, T_max=0.1)
    result = run(params, np.zeros(32), np.zeros(32), CHI)
    with pytest.raises(ValueError):
        moment_inequality_monitor(result, params, None)


def test_fit_linear_coefficient():
    series = TimeSeries.sample(TimeGrid.over(1.0, 99), lambda t: 2 + 3 * t)
    intercept, slope = fit_linear_coefficient(series)
    assert intercept == pytest.approx(2.0)
    assert slope == pytest.approx(3.0)


def test_critical_exponent():
    assert critical_exponent(0.5) == 2.0
    assert critical_exponent(0.0) == math.inf


def test_gaussian_data_scaling():
    params = ModelParams(M=64, L=10.0)
    u0, u1 = gaussian_data(params, DataSpec(amplitude=2.0, u1_scale=-0.5))
    assert np.max(u0) == pytest.approx(2.0)
    assert_allclose(u1, -0.5 * u0)


class TestThresholdSweep(unittest.TestCase):
    base = ModelParams(M=32, L=10.0, T_max=0.1)

    def fake_runner(self, failing: frozenset = frozenset()):
        seen: list[int] = []

        def runner(tasks):
            seen.append(len(tasks))
            outcomes = []
            for index, _ in enumerate(tasks):
                if index in failing:
                    outcomes.append(IntegrationFailure('non-finite field'))
                else:
                    outcomes.append(SimResult(self.base, Outcome.BOUNDED, [], 0.0, 0.0, final_sup=1.0))
            return outcomes
        return runner, seen

    def test_empty(self):
        runner, seen = self.fake_runner()
        self.assertEqual(threshold_sweep(self.base, [], runner=runner), [])
        self.assertEqual(seen, [0])

    def test_unsorted_rejected(self):
        with self.assertRaises(ValueError):
            threshold_sweep(self.base, [2.0, 1.5])

    def test_duplicates_run_once(self):
        runner, seen = self.fake_runner()
        rows = threshold_sweep(self.base, [1.5, 1.5, 2.5], runner=runner)
        self.assertEqual(seen, [2])
        self.assertEqual([row.classification for row in rows],
                         ['NOT-BLOWN-UP-BY-T_max', 'NOT-BLOWN-UP-BY-T_max', 'DUPLICATE'])
        self.assertEqual([row.predicted_blowup for row in rows], [True, False, True])
        self.assertEqual(rows[0].time, self.base.T_max)

    def test_failure_row(self):
        runner, _ = self.fake_runner(frozenset({1}))
        rows = threshold_sweep(self.base, [1.5, 2.0, 3.0], runner=runner)
        self.assertEqual(rows[1].classification, 'FAILED')
        self.assertIn('non-finite', rows[1].note)
        self.assertTrue(math.isnan(rows[1].time))
        self.assertEqual(rows[2].classification, 'NOT-BLOWN-UP-BY-T_max')

    def test_real_runs(self):
        rows = threshold_sweep(self.base, [1.5, 3.0], data=DataSpec(amplitude=0.1))
        self.assertEqual(len(rows), 2)
        self.assertTrue(all(row.result is not None for row in rows))
        self.assertEqual(rows[1].p_gamma, 1.5)


@pytest.mark.slow
class TestDeskScaleDichotomy(unittest.TestCase):
    """Reference runs: N=1, γ=½, M=256, L=20, dt=10⁻³, unit Gaussian data."""
    base = ModelParams()

    def test_sweep_blows_up_below_threshold(self):
        rows = threshold_sweep(self.base, [1.2, 1.5, 1.9, 2.0])
        self.assertEqual([row.classification for row in rows], ['BLOWUP'] * 4)
        self.assertTrue(all(row.predicted_blowup for row in rows))

    def test_blowup_time_stable(self):
        reference = threshold_sweep(self.base, [1.5])[0]
        for update in ({'blowup_threshold': 1e12}, {'dt': 5e-4}):
            row = threshold_sweep(self.base.model_copy(update=update), [1.5])[0]
            self.assertEqual(row.classification, 'BLOWUP')
            self.assertLess(abs(row.time - reference.time), 0.1 * reference.time)

    def test_small_data_control_stays_bounded(self):
        rows = threshold_sweep(self.base, [6.0], data=DataSpec(amplitude=1e-3))
        self.assertEqual(rows[0].classification, 'NOT-BLOWN-UP-BY-T_max')
