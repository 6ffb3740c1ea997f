import math
import unittest

import numpy as np
import pydantic
import pytest
from numpy.testing import assert_allclose
from scipy.special import gamma as gamma_fn

from fracmem.fracops import TimeGrid, TimeSeries, rl_left
from fracmem.volterra import (CertificateReport, ExponentRegime, InequalityParams, StepSizeError,
                              bound_i_exponents, certify_bound_i, classify_exponent, closed_form_v,
                              construct_inequality_solution, exp_frac_integral_limits,
                              exp_limit_triple, inequality_residual, kernel_difference, l_threshold,
                              liminf_growth_estimate, reduced_bound_i, solve_linear_volterra,
                              weighted_hardy_check, weighted_hardy_constant, young_constants)


def zero_forcing(T: float = 1.0, n_steps: int = 2000) -> TimeSeries:
    return TimeSeries.sample(TimeGrid.over(T, n_steps), np.zeros_like)


class TestInequalityParams(unittest.TestCase):
    def test_defaults(self):
        params = InequalityParams()
        self.assertEqual(params.roots, (-2.0, -1.0))

    def test_gamma_must_stay_below_one(self):
        with self.assertRaises(pydantic.ValidationError) as cm:
            InequalityParams(gamma=1.0)
        self.assertIn('γ<1', str(cm.exception))

    def test_complex_roots_rejected(self):
        with self.assertRaises(pydantic.ValidationError) as cm:
            InequalityParams(b=1.0, c=2.0)
        self.assertIn('b²−4c>0', str(cm.exception))

    def test_other_domain_rules(self):
        for bad in ({'p': 1.0}, {'a': 0.0}, {'c': -1.0}):
            with self.assertRaises(pydantic.ValidationError):
                InequalityParams(**bad)

    def test_frozen(self):
        with self.assertRaises(pydantic.ValidationError):
            InequalityParams().A = 2.0  # type: ignore


def test_classify_exponent():
    assert classify_exponent(1.5, 0.5) is ExponentRegime.SUBCRITICAL
    assert classify_exponent(2.0, 0.5) is ExponentRegime.CRITICAL
    assert classify_exponent(3.0, 0.5) is ExponentRegime.SUPERCRITICAL


def test_linear_solution_defaults():
    """A=B=1, b=3, c=2 gives w = e^{−2t}"""
    w = solve_linear_volterra(InequalityParams(), zero_forcing())
    assert_allclose(w.values, np.exp(-2 * w.t), atol=1e-6)


def test_linear_solution_constant_source():
    """A=1, B=0 gives w = 2e^{−2t} − e^{−t}"""
    w = solve_linear_volterra(InequalityParams(B=0.0), zero_forcing())
    assert_allclose(w.values, 2 * np.exp(-2 * w.t) - np.exp(-w.t), atol=1e-6)


def test_zero_data_gives_zero():
    w = solve_linear_volterra(InequalityParams(A=0.0, B=0.0), zero_forcing(10.0, 500))
    assert w.max_norm() == 0.0


def test_step_size_error():
    # b < 0 keeps the roots real and makes 1+bh/2+ch²/4 negative on a coarse grid
    params = InequalityParams(b=-30.0, c=1.0)
    with pytest.raises(StepSizeError):
        solve_linear_volterra(params, zero_forcing(1.0, 10))


def test_closed_form_matches_second_integral():
    params = InequalityParams()
    v = closed_form_v(params, zero_forcing())
    expected = v.t / 2 - (1 - np.exp(-2 * v.t)) / 4
    assert_allclose(v.values, expected, atol=1e-12)


def test_closed_form_spot_value():
    params = InequalityParams(B=0.0)
    v = closed_form_v(params, zero_forcing(math.log(2), 100))
    assert v.values[-1] == pytest.approx(0.125, abs=1e-12)


def test_closed_form_with_forcing():
    params = InequalityParams()
    f = TimeSeries.sample(TimeGrid.over(2.0, 2000), np.sin)
    numeric = rl_left(solve_linear_volterra(params, f), 2.0)
    assert (numeric - closed_form_v(params, f)).max_norm() <= 1e-5


@pytest.mark.parametrize('A, B, b, c', [(1.0, 0.0, 3.0, 2.0), (0.0, 1.0, 3.0, 2.0),
                                        (1.0, 1.0, 5.0, 4.0)])
def test_consistency_gap_shrinks_under_refinement(A, B, b, c):
    params = InequalityParams(A=A, B=B, b=b, c=c)
    gaps = []
    for n_steps in (1000, 2000, 4000):
        zero = zero_forcing(10.0, n_steps)
        numeric = rl_left(solve_linear_volterra(params, zero), 2.0)
        gaps.append((numeric - closed_form_v(params, zero)).max_norm())
    assert gaps[-1] <= 1e-4
    assert gaps[0] / gaps[1] >= 2.0
    assert gaps[1] / gaps[2] >= 2.0


def test_trapezoid_equations_hold_exactly():
    """w_n + b·V_n + c·U_n = A + B·t_n, with V and U the nested trapezoid sums"""
    params = InequalityParams()
    w = solve_linear_volterra(params, zero_forcing(1.0, 200))
    h = w.grid.h
    V = np.concatenate([[0.0], np.cumsum(h / 2 * (w.values[1:] + w.values[:-1]))])
    U = np.concatenate([[0.0], np.cumsum(h / 2 * (V[1:] + V[:-1]))])
    assert_allclose(w.values + params.b * V + params.c * U, params.A + params.B * w.t, atol=1e-12)


def test_kernel_positive():
    t = np.linspace(0, 10, 101)
    kernel = kernel_difference(InequalityParams(), t)
    assert kernel[0] == 0.0
    assert np.all(kernel[1:] > 0)


def test_exp_limit_triple():
    limits = exp_limit_triple(-1.0, 0.5)
    assert limits[:2] == (1.0, 1.0)
    assert limits[2] == pytest.approx(1 / gamma_fn(2.5))


def test_exp_limits_approach_triple():
    values = exp_frac_integral_limits(-1.0, 0.5, 100.0)
    limits = exp_limit_triple(-1.0, 0.5)
    assert values[0] == pytest.approx(limits[0], abs=1e-3)
    assert values[1] == pytest.approx(limits[1], abs=2e-2)
    assert values[2] == pytest.approx(limits[2], rel=2e-2)


def test_exp_limits_reject_bad_arguments():
    with pytest.raises(ValueError):
        exp_frac_integral_limits(1.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        exp_frac_integral_limits(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        exp_frac_integral_limits(-1.0, 0.5, 0.0)


def test_bound_i_exponents():
    assert bound_i_exponents(3.0, 0.5) == pytest.approx((-2.75, -1.25, 0.25))
    assert l_threshold(3.0, 0.5) == pytest.approx(3.75)


def test_young_constants_positive():
    constants = young_constants(InequalityParams(), 16.0)
    assert len(constants) == 3
    assert all(c > 0 for c in constants)


def test_certificate_rejects_small_l():
    with pytest.raises(ValueError):
        certify_bound_i(zero_forcing(), InequalityParams(), 3.0)
    with pytest.raises(ValueError):
        reduced_bound_i(InequalityParams(), 3.0, 1.0)


@pytest.mark.parametrize('T', [1.0, 2.0, 4.0])
def test_certificate_holds_for_fixed_point(T):
    params = InequalityParams()
    outcome = construct_inequality_solution(params, TimeGrid.over(T, 1000))
    assert outcome.converged and not outcome.diverged
    report = certify_bound_i(outcome.w, params, 16.0)
    assert report.satisfied
    assert report.T_used == pytest.approx(T)


def test_certificate_report_consistency():
    with pytest.raises(ValueError):
        CertificateReport(lhs=2.0, rhs=1.0, satisfied=True, l_used=16.0, T_used=1.0, constant=1.0)


def test_reduced_certificate():
    lhs, rhs = reduced_bound_i(InequalityParams(), 16.0, 1.0)
    assert lhs == pytest.approx(16.5)
    assert lhs <= rhs


def test_fixed_point_residual_small():
    params = InequalityParams()
    outcome = construct_inequality_solution(params, TimeGrid.over(1.0, 2000))
    assert outcome.converged
    residual = inequality_residual(outcome.w, params)
    assert np.max(np.abs(residual.values)) <= 1e-4


def test_fixed_point_converges_on_long_horizons():
    params = InequalityParams()
    outcome = construct_inequality_solution(params, TimeGrid.over(4.0, 2000))
    assert outcome.converged and not outcome.diverged
    assert np.min(inequality_residual(outcome.w, params).values) >= -1e-4
    outcome = construct_inequality_solution(params, TimeGrid.over(50.0, 4000))
    assert outcome.converged and not outcome.diverged
    assert outcome.w.max_norm() <= 2.0
    assert liminf_growth_estimate(outcome.w, params.gamma) > 0


def test_fixed_point_starts_from_linear_solution():
    params = InequalityParams()
    grid = TimeGrid.over(1.0, 200)
    first = construct_inequality_solution(params, grid, max_iter=1)
    linear = solve_linear_volterra(params, zero_forcing(1.0, 200))
    forced = solve_linear_volterra(
        params, rl_left(TimeSeries(grid, np.abs(linear.values) ** params.p), 2.5))
    assert_allclose(first.w.values, forced.values, atol=1e-14)


def test_hardy_constant():
    assert weighted_hardy_constant(2.0) == pytest.approx(4 / 3)


def test_hardy_check_constant_function():
    w = TimeSeries.sample(TimeGrid.over(1.0, 1000), np.ones_like)
    lhs, rhs = weighted_hardy_check(w, 2.0)
    assert lhs == pytest.approx(0.5, rel=1e-2)
    assert rhs == pytest.approx(4 / 3)
    with pytest.raises(ValueError):
        weighted_hardy_check(w, 1.0)


def test_liminf_constant():
    """t^{γ−2}·I²1 = t^γ/2, smallest at the start of the tail"""
    w = TimeSeries.sample(TimeGrid.over(4.0, 400), np.ones_like)
    assert liminf_growth_estimate(w, 0.0) == pytest.approx(0.5, abs=1e-9)
    assert liminf_growth_estimate(w, 0.5) == pytest.approx(math.sqrt(3) / 2, rel=1e-9)
