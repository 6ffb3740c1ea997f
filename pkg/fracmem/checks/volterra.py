import math
from typing import Annotated, Optional

import numpy as np

from ..annotation import Check
from ..fracops import TimeGrid, TimeSeries, random_piecewise_linear, rl_left
from ..registry import CheckContext, CheckOutcome
from ..volterra import (FixedPointOutcome, InequalityParams, bound_i_exponents,
                        certify_bound_i, closed_form_v, construct_inequality_solution,
                        exp_frac_integral_limits, exp_limit_triple, inequality_residual,
                        kernel_difference, liminf_growth_estimate, reduced_bound_i,
                        solve_linear_volterra, weighted_hardy_check, weighted_hardy_constant)

LAPLACE_STEPS = 4000
LAPLACE_HORIZON = 10.0
LIMIT_RATES = (-0.5, -1.0, -2.0)
LIMIT_GAMMAS = (-1.0, 0.0, 0.5)
CERTIFICATE_HORIZONS = (1.0, 2.0, 4.0)
LIMINF_HORIZON = 50.0
# slack on top of the first-order correction (β−1)/(|λ|t), β the integral order
LIMIT_SLACK = 1.05
LIMIT_FLOOR = 1e-3


def _laplace_gap(A: float, B: float, b: float, c: float) -> CheckOutcome:
    params = InequalityParams(A=A, B=B, b=b, c=c)
    grid = TimeGrid.over(LAPLACE_HORIZON, LAPLACE_STEPS)
    zero = TimeSeries.sample(grid, np.zeros_like)
    numeric = rl_left(solve_linear_volterra(params, zero), 2.0)
    exact = closed_form_v(params, zero)
    residual = (numeric - exact).max_norm()
    return CheckOutcome(numeric.max_norm(), exact.max_norm(), residual)


def laplace_solution_a(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.laplace.A', 1e-4)]:
    return _laplace_gap(1.0, 0.0, 3.0, 2.0)


def laplace_solution_b(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.laplace.B', 1e-4)]:
    return _laplace_gap(0.0, 1.0, 3.0, 2.0)


def laplace_solution_ab(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.laplace.AB', 1e-4)]:
    return _laplace_gap(1.0, 1.0, 5.0, 4.0)


def closed_form_spot_value(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.closed_form.ln2', 1e-12)]:
    params = InequalityParams(A=1.0, B=0.0, b=3.0, c=2.0)
    grid = TimeGrid.over(math.log(2), 1000)
    value = closed_form_v(params, TimeSeries.sample(grid, np.zeros_like)).values[-1]
    return CheckOutcome.agreement(float(value), 0.125)


def zero_solution(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.zero')]:
    params = InequalityParams(A=0.0, B=0.0)
    grid = TimeGrid.over(LAPLACE_HORIZON, ctx.n_steps)
    residual = solve_linear_volterra(params, TimeSeries.sample(grid, np.zeros_like)).max_norm()
    return CheckOutcome(residual, 0.0, residual)


def kernel_sign(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.kernel.sign')]:
    grid = TimeGrid.over(LAPLACE_HORIZON, ctx.n_steps)
    smallest = float(np.min(kernel_difference(ctx.inequality, grid.nodes)))
    return CheckOutcome.inequality(0.0, smallest)


def memory_monotone(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.kernel.monotone_memory', 1e-12)]:
    grid = TimeGrid.over(LAPLACE_HORIZON, ctx.n_steps)
    kernel = TimeSeries(grid, kernel_difference(ctx.inequality, grid.nodes))
    memory = rl_left(kernel, 3 - ctx.inequality.gamma).values
    smallest = float(np.min(np.diff(memory)))
    return CheckOutcome.inequality(0.0, smallest)


def _limit_errors(t: float) -> list[tuple[float, float, float, float]]:
    """(|error|, |limit|, order, |λ|) for every component of every (λ, γ) pair."""
    rows = []
    for lam in LIMIT_RATES:
        for gamma in LIMIT_GAMMAS:
            values = exp_frac_integral_limits(lam, gamma, t)
            limits = exp_limit_triple(lam, gamma)
            for value, limit, order in zip(values, limits, (1.0, 2.0, 3 - gamma)):
                rows.append((abs(value - limit), abs(limit), order, abs(lam)))
    return rows


def exp_limits_at_100(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.exp_limits.t100')]:
    t = 100.0
    worst_error = worst_bound = excess = 0.0
    for error, limit, order, rate in _limit_errors(t):
        bound = LIMIT_SLACK * limit * (order - 1) / (rate * t) + LIMIT_FLOOR * limit
        if error / bound > worst_error / max(worst_bound, 1e-300):
            worst_error, worst_bound = error, bound
        excess = max(excess, error - bound)
    return CheckOutcome(worst_error, worst_bound, excess)


def exp_limits_converge(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.exp_limits.converge')]:
    near = max(error / limit for error, limit, _, _ in _limit_errors(10.0))
    far = max(error / limit for error, limit, _, _ in _limit_errors(100.0))
    return CheckOutcome.inequality(far, near)


def exponents_sanity(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.bound_i.exponents', 1e-12)]:
    exponents = bound_i_exponents(3.0, 0.5)
    residual = max(abs(e - x) for e, x in zip(exponents, (-2.75, -1.25, 0.25)))
    return CheckOutcome(exponents[0], -2.75, residual)


def certificate_trivial(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.bound_i.trivial')]:
    params = InequalityParams(A=-1.0, B=0.0, gamma=0.5, p=3.0)
    grid = TimeGrid.over(2.0, ctx.n_steps)
    report = certify_bound_i(TimeSeries.sample(grid, np.zeros_like), params, ctx.l)
    return CheckOutcome.inequality(report.lhs, report.rhs)


def _fixed_point(ctx: CheckContext, T: float,
                 n_steps: Optional[int] = None) -> FixedPointOutcome:
    grid = TimeGrid.over(T, n_steps or ctx.n_steps)
    outcome = construct_inequality_solution(ctx.inequality, grid)
    if not outcome.converged:
        raise ValueError(
            f'fixed point did not converge on T={T} after {outcome.iterations} iterations')
    return outcome


def certificate_fixed_point(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.bound_i.fixed_point')]:
    worst = None
    for T in CERTIFICATE_HORIZONS:
        report = certify_bound_i(_fixed_point(ctx, T).w, ctx.inequality, ctx.l)
        if worst is None or report.lhs / report.rhs > worst.lhs / worst.rhs:
            worst = report
    assert worst is not None
    return CheckOutcome.inequality(worst.lhs, worst.rhs)


def reduced_certificate(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.bound_i.reduced')]:
    sides = [reduced_bound_i(ctx.inequality, ctx.l, T) for T in CERTIFICATE_HORIZONS]
    lhs, rhs = max(sides, key=lambda pair: pair[0] - pair[1])
    return CheckOutcome.inequality(lhs, rhs)


def fixed_point_residual(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.fixed_point.residual', 1e-4)]:
    outcome = _fixed_point(ctx, CERTIFICATE_HORIZONS[-1])
    smallest = float(np.min(inequality_residual(outcome.w, ctx.inequality).values))
    return CheckOutcome.inequality(0.0, smallest)


def hardy_constant_p2(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.hardy.constant_p2', 1e-12)]:
    return CheckOutcome.agreement(weighted_hardy_constant(2.0), 4 / 3)


def hardy_random(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.hardy.random')]:
    grid = TimeGrid.over(LAPLACE_HORIZON, ctx.n_steps)
    worst = (0.0, 1.0)
    for p in (1.5, 2.0, 3.0):
        for _ in range(100):
            lhs, rhs = weighted_hardy_check(random_piecewise_linear(grid, ctx.rng), p)
            if lhs / rhs > worst[0] / worst[1]:
                worst = (lhs, rhs)
    return CheckOutcome.inequality(*worst)


def liminf_constant(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.liminf.constant', 1e-9)]:
    grid = TimeGrid.over(LAPLACE_HORIZON, ctx.n_steps)
    estimate = liminf_growth_estimate(TimeSeries.sample(grid, np.ones_like), 0.0)
    return CheckOutcome.agreement(estimate, 0.5)


def liminf_fixed_point(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('volterra.liminf.fixed_point')]:
    outcome = _fixed_point(ctx, LIMINF_HORIZON, LAPLACE_STEPS)
    estimate = liminf_growth_estimate(outcome.w, ctx.inequality.gamma)
    return CheckOutcome(estimate, 0.0, 0.0 if estimate > 0 else 1.0 - estimate)
