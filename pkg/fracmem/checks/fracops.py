from typing import Annotated

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..annotation import Check
from ..fracops import (TimeGrid, TimeSeries, check_adjoint, check_semigroup, gamma_checked,
                       laplace_check_exp, lp_bound_ratio, random_piecewise_linear, rl_left,
                       rl_power_closed_form, rl_right)
from ..registry import CheckContext, CheckOutcome

IDENTITY_TOLERANCE = 5e-4
REFINEMENT_FACTOR = 1.7


def _grid(ctx: CheckContext, factor: int = 1) -> TimeGrid:
    return TimeGrid.over(1.0, factor * ctx.n_steps)


def _semigroup(ctx: CheckContext, fn) -> CheckOutcome:
    residual = check_semigroup(TimeSeries.sample(_grid(ctx), fn), 0.5, 0.7)
    return CheckOutcome(residual, 0.0, residual)


def semigroup_power(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.semigroup.power', IDENTITY_TOLERANCE)]:
    return _semigroup(ctx, lambda t: t ** 2)


def semigroup_exp(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.semigroup.exp', IDENTITY_TOLERANCE)]:
    return _semigroup(ctx, lambda t: np.exp(-t))


def semigroup_sin(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.semigroup.sin', IDENTITY_TOLERANCE)]:
    return _semigroup(ctx, lambda t: np.sin(3 * t))


def semigroup_refinement(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.semigroup.refinement')]:
    coarse, fine = (check_semigroup(TimeSeries.sample(_grid(ctx, k), lambda t: t ** 2), 0.5, 0.7)
                    for k in (1, 2))
    ratio = coarse / fine
    return CheckOutcome(ratio, REFINEMENT_FACTOR, max(0.0, REFINEMENT_FACTOR - ratio))


def adjoint_random(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.adjoint.random', IDENTITY_TOLERANCE)]:
    grid = _grid(ctx)
    residual = max(check_adjoint(random_piecewise_linear(grid, ctx.rng),
                                 random_piecewise_linear(grid, ctx.rng), alpha)
                   for alpha in (0.3, 0.5, 1.5))
    return CheckOutcome(residual, 0.0, residual)


def adjoint_refinement(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.adjoint.refinement')]:
    def gap(grid: TimeGrid) -> float:
        return check_adjoint(TimeSeries.sample(grid, np.ones_like), TimeSeries.sample(grid, lambda t: t), 0.5)
    ratio = gap(_grid(ctx)) / gap(_grid(ctx, 2))
    return CheckOutcome(ratio, REFINEMENT_FACTOR, max(0.0, REFINEMENT_FACTOR - ratio))


def power_closed_form(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.rl_right.power_closed_form', 1e-3)]:
    grid = _grid(ctx)
    interior = grid.nodes <= 0.95 * grid.T
    worst = 0.0
    for _ in range(10):
        gamma = ctx.rng.uniform(-1.0, 0.9)
        beta = ctx.rng.uniform(0.2, 2.0)
        l = ctx.rng.uniform(0.5, 3.0) + 3 - gamma
        profile = TimeSeries.sample(grid, lambda t: (1 - t / grid.T) ** (l - 3 + gamma))
        exact = rl_power_closed_form(l, gamma, beta, grid).values
        numeric = rl_right(profile, beta).values
        error = np.max(np.abs(numeric - exact)[interior]) / np.max(np.abs(exact[interior]))
        worst = max(worst, float(error))
    return CheckOutcome(worst, 0.0, worst)


def laplace_fractional(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.laplace.alpha_half', 1e-4)]:
    numeric, exact = laplace_check_exp(0.5, -1.0, 1.0)
    return CheckOutcome.agreement(numeric, exact, relative=True)


def laplace_fractional_s2(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.laplace.alpha_half_s2', 1e-4)]:
    numeric, exact = laplace_check_exp(0.5, -1.0, 2.0)
    return CheckOutcome.agreement(numeric, exact, relative=True)


def laplace_above_one(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.laplace.alpha_three_halves', 1e-4)]:
    numeric, exact = laplace_check_exp(1.5, -2.0, 0.5)
    return CheckOutcome.agreement(numeric, exact, relative=True)


def lp_boundedness(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.lp_bound', 1e-9)]:
    alpha = 0.5
    grid = _grid(ctx)
    ratio = lp_bound_ratio(alpha, 2.0, grid, ctx.rng)
    return CheckOutcome.inequality(ratio, grid.T ** alpha / gamma_checked(alpha + 1))


def unit_order_is_trapezoid(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.alpha_one.trapezoid', 1e-10)]:
    f = TimeSeries.sample(_grid(ctx), lambda t: np.cos(5 * t))
    expected = cumulative_trapezoid(f.values, dx=f.grid.h, initial=0.0)
    residual = float(np.max(np.abs(rl_left(f, 1.0).values - expected)))
    return CheckOutcome(residual, 0.0, residual)


def constant_exact(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.constant.exact', 1e-9)]:
    f = TimeSeries.sample(_grid(ctx), np.ones_like)
    alpha = 0.7
    expected = f.t ** alpha / gamma_checked(alpha + 1)
    residual = float(np.max(np.abs(rl_left(f, alpha).values - expected)))
    return CheckOutcome(residual, 0.0, residual)


def linear_exact(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.linear.exact', 1e-9)]:
    f = TimeSeries.sample(_grid(ctx), lambda t: t)
    alpha = 1.3
    expected = f.t ** (alpha + 1) / gamma_checked(alpha + 2)
    residual = float(np.max(np.abs(rl_left(f, alpha).values - expected)))
    return CheckOutcome(residual, 0.0, residual)


def zero_preserved(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('fracops.zero')]:
    zero = TimeSeries.sample(_grid(ctx), np.zeros_like)
    residual = max(rl_left(zero, 0.5).max_norm(), rl_right(zero, 2.5).max_norm())
    return CheckOutcome(residual, 0.0, residual)
