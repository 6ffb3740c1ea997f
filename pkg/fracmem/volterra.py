import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
import pydantic
from scipy.integrate import trapezoid

from .fracops import TimeGrid, TimeSeries, gamma_checked, rl_left

FIXED_POINT_TOLERANCE = 1e-8
FIXED_POINT_MAX_ITER = 100
DIVERGENCE_NORM = 1e10
LIMINF_TAIL = 0.25


class StepSizeError(ValueError):
    pass


class InequalityParams(pydantic.BaseModel):
    """
    w + b·I¹w + c·I²w − A − Bt ≥ a·I^{3−γ}|w|^p
    """
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    A: float = 1.0
    B: float = 1.0
    a: float = 1.0
    b: float = 3.0
    c: float = 2.0
    gamma: float = 0.5
    p: float = 3.0

    @pydantic.field_validator('a')
    @classmethod
    def _source_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f'a>0 required (a={value})')
        return value

    @pydantic.field_validator('c')
    @classmethod
    def _c_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f'c>0 required (c={value})')
        return value

    @pydantic.field_validator('gamma')
    @classmethod
    def _gamma_below_one(cls, value: float) -> float:
        if not value < 1:
            raise ValueError(f'γ<1 required (gamma={value})')
        return value

    @pydantic.field_validator('p')
    @classmethod
    def _p_above_one(cls, value: float) -> float:
        if not value > 1:
            raise ValueError(f'p>1 required (p={value})')
        return value

    @pydantic.model_validator(mode='after')
    def _real_roots(self) -> 'InequalityParams':
        if not self.b ** 2 - 4 * self.c > 0:
            raise ValueError(
                f'b²−4c>0 required (b={self.b}, c={self.c}, b²−4c={self.b ** 2 - 4 * self.c})')
        return self

    @property
    def roots(self) -> tuple[float, float]:
        disc = math.sqrt(self.b ** 2 - 4 * self.c)
        return (-self.b - disc) / 2, (-self.b + disc) / 2


@dataclass(frozen=True)
class CertificateReport:
    lhs: float
    rhs: float
    satisfied: bool
    l_used: float
    T_used: float
    constant: float

    def __post_init__(self) -> None:
        if self.satisfied != (self.lhs <= self.rhs):
            raise ValueError(
                f'satisfied={self.satisfied} disagrees with lhs={self.lhs} <= rhs={self.rhs}')


@dataclass(frozen=True)
class FixedPointOutcome:
    w: TimeSeries
    iterations: int
    converged: bool
    diverged: bool


class ExponentRegime(enum.Enum):
    SUBCRITICAL = 'subcritical'
    CRITICAL = 'critical'
    SUPERCRITICAL = 'supercritical'


def classify_exponent(p: float, gamma: float) -> ExponentRegime:
    """
    pγ<1 and pγ=1 both force T<+∞; only pγ>1 leaves room for global solutions.
    """
    product = p * gamma
    if math.isclose(product, 1.0, rel_tol=1e-12, abs_tol=1e-12):
        return ExponentRegime.CRITICAL
    return ExponentRegime.SUBCRITICAL if product < 1 else ExponentRegime.SUPERCRITICAL


def solve_linear_volterra(params: InequalityParams, f: TimeSeries) -> TimeSeries:
    """
    Marches w + b·I¹w + c·I²w = A + Bt + f(t) with nested trapezoidal memory:
    V = I¹w and U = I²w = I¹V are both advanced by the trapezoid rule.
    """
    h = f.grid.h
    b, c = params.b, params.c
    diagonal = 1 + b * h / 2 + c * h * h / 4
    if not diagonal > 0:
        raise StepSizeError(
            f'diagonal coefficient 1+bh/2+ch²/4={diagonal} is not positive; reduce the step ({h=})')
    t = f.t
    rhs = params.A + params.B * t + f.values
    w = np.empty_like(rhs)
    w[0] = rhs[0]
    V = U = 0.0
    for n in range(1, len(rhs)):
        prev = w[n - 1]
        known = rhs[n] - b * (V + h / 2 * prev) - c * (U + h * V + h * h / 4 * prev)
        w[n] = known / diagonal
        V_next = V + h / 2 * (prev + w[n])
        U += h / 2 * (V + V_next)
        V = V_next
    return TimeSeries(f.grid, w)


def _exp_integral_1(lam: float, t: np.ndarray) -> np.ndarray:
    return np.expm1(lam * t) / lam


def _exp_integral_2(lam: float, t: np.ndarray) -> np.ndarray:
    return (np.expm1(lam * t) - lam * t) / lam ** 2


def kernel_difference(params: InequalityParams, t: np.ndarray) -> np.ndarray:
    lam1, lam2 = params.roots
    return np.exp(lam2 * t) - np.exp(lam1 * t)


def closed_form_v(params: InequalityParams, f: TimeSeries) -> TimeSeries:
    """
    Laplace-inversion solution v = I²w of the linear equation driven by f.
    """
    lam1, lam2 = params.roots
    t = f.t
    h = f.grid.h
    i1 = _exp_integral_1(lam2, t) - _exp_integral_1(lam1, t)
    i2 = _exp_integral_2(lam2, t) - _exp_integral_2(lam1, t)
    kernel = kernel_difference(params, t)
    full = np.convolve(kernel, f.values)[:len(t)]
    # kernel vanishes at 0, so only the s = 0 endpoint needs the half weight
    convolution = h * (full - 0.5 * kernel * f.values[0])
    v = (params.A * i1 + params.B * i2 + convolution) / (lam2 - lam1)
    return TimeSeries(f.grid, v)


def exp_frac_integral_limits(lam: float, gamma: float, t: float,
                             n_steps: int = 4000) -> tuple[float, float, float]:
    """
    (I¹e^{λ·}, t^{−1}I²e^{λ·}, t^{γ−2}I^{3−γ}e^{λ·}) at time t, all by product quadrature.
    """
    if not lam < 0:
        raise ValueError(f'λ<0 required ({lam=})')
    if not gamma < 1:
        raise ValueError(f'γ<1 required ({gamma=})')
    if not t > 0:
        raise ValueError(f't>0 required ({t=})')
    grid = TimeGrid.over(t, n_steps)
    exp = TimeSeries.sample(grid, lambda s: np.exp(lam * s))
    first = rl_left(exp, 1.0).values[-1]
    second = rl_left(exp, 2.0).values[-1] / t
    third = rl_left(exp, 3 - gamma).values[-1] * t ** (gamma - 2)
    return float(first), float(second), float(third)


def exp_limit_triple(lam: float, gamma: float) -> tuple[float, float, float]:
    return -1 / lam, -1 / lam, -1 / (lam * gamma_checked(3 - gamma))


def bound_i_exponents(p: float, gamma: float) -> tuple[float, float, float]:
    return tuple(1 - p * (k - gamma) / (p - 1) for k in (3, 2, 1))  # type: ignore


def l_threshold(p: float, gamma: float) -> float:
    return p * (3 - gamma) / (p - 1)


def young_constants(params: InequalityParams, l: float) -> tuple[float, float, float]:
    """
    Constants C₀, C₁, C₂ with ∫|w|·|g_k| ≤ (a/6)∫|w|^p ψ_T + C_k T^{e_k}, where g_k is
    the test function φ, b·ₜI_T¹φ, c·ₜI_T²φ respectively.
    """
    p, gamma, a = params.p, params.gamma, params.a
    q = p / (p - 1)
    eps = a / 6
    young = (p - 1) / p * (eps * p) ** (-1 / (p - 1))
    lgamma = gamma_checked(l + 1)
    constants = []
    for k, coefficient in enumerate((1.0, abs(params.b), params.c)):
        if coefficient == 0:
            constants.append(0.0)
            continue
        m_k = coefficient * lgamma / gamma_checked(l + gamma + k - 2)
        exponent = l - p * (3 - gamma - k) / (p - 1)
        constants.append(young * m_k ** q / (exponent + 1))
    return tuple(constants)  # type: ignore


def certify_bound_i(w: TimeSeries, params: InequalityParams, l: float) -> CertificateReport:
    """
    Evaluates both sides of

        (a/2)∫|w|^pψ_T + A·Γ(l+1)/Γ(l+γ−1)·T^{γ−2} + B·Γ(l+1)/Γ(l+γ)·T^{γ−1}
            ≤ C·(T^{e₃} + T^{e₂} + T^{e₁})

    with ψ_T = (1−t/T)^l and C the largest Young constant.
    """
    p, gamma = params.p, params.gamma
    if not l > l_threshold(p, gamma):
        raise ValueError(f'l>p(3−γ)/(p−1)={l_threshold(p, gamma)} required ({l=})')
    T = w.grid.T
    psi = (1 - w.t / T) ** l
    weighted = trapezoid(np.abs(w.values) ** p * psi, dx=w.grid.h)
    lgamma = gamma_checked(l + 1)
    lhs = (params.a / 2 * weighted
           + params.A * lgamma / gamma_checked(l + gamma - 1) * T ** (gamma - 2)
           + params.B * lgamma / gamma_checked(l + gamma) * T ** (gamma - 1))
    constant = max(young_constants(params, l))
    rhs = constant * sum(T ** e for e in bound_i_exponents(p, gamma))
    logging.debug('certify_bound_i T=%s lhs=%s rhs=%s', T, lhs, rhs)
    return CertificateReport(lhs=float(lhs), rhs=float(rhs), satisfied=bool(lhs <= rhs),
                             l_used=l, T_used=T, constant=constant)


def reduced_bound_i(params: InequalityParams, l: float, T: float) -> tuple[float, float]:
    """
    Both sides of A(l+γ−1)+BT ≤ K(T^{−(3−γ)/(p−1)} + T^{1−(2−γ)/(p−1)} + T^{2−(1−γ)/(p−1)}),
    obtained from the certificate by dropping the |w|^p term and multiplying by
    Γ(l+γ)/Γ(l+1)·T^{2−γ}, so K = Γ(l+γ)/Γ(l+1)·C.
    """
    p, gamma = params.p, params.gamma
    if not l > l_threshold(p, gamma):
        raise ValueError(f'l>p(3−γ)/(p−1)={l_threshold(p, gamma)} required ({l=})')
    K = gamma_checked(l + gamma) / gamma_checked(l + 1) * max(young_constants(params, l))
    lhs = params.A * (l + gamma - 1) + params.B * T
    rhs = K * (T ** (-(3 - gamma) / (p - 1))
               + T ** (1 - (2 - gamma) / (p - 1))
               + T ** (2 - (1 - gamma) / (p - 1)))
    return float(lhs), float(rhs)


def weighted_hardy_constant(p: float) -> float:
    return gamma_checked(1 - 1 / p) / gamma_checked(3 - 1 / p)


def weighted_hardy_check(w: TimeSeries, p: float) -> tuple[float, float]:
    """
    (‖t^{−2}I²w‖_p, Γ(1−1/p)/Γ(3−1/p)·‖w‖_p) on the grid horizon; the weighted
    integrand starts at the first node after t = 0.
    """
    if not p > 1:
        raise ValueError(f'p>1 required ({p=})')
    t = w.t[1:]
    second = rl_left(w, 2.0).values[1:]
    lhs = trapezoid(t ** (-2 * p) * np.abs(second) ** p, x=t) ** (1 / p)
    rhs = weighted_hardy_constant(p) * trapezoid(np.abs(w.values) ** p, dx=w.grid.h) ** (1 / p)
    return float(lhs), float(rhs)


def liminf_growth_estimate(w: TimeSeries, gamma: float) -> float:
    """
    Tail minimum of t^{γ−2}·I²w over the last quarter of the grid, a proxy for the liminf.
    """
    if not gamma < 1:
        raise ValueError(f'γ<1 required ({gamma=})')
    n = w.grid.n_steps
    start = max(1, int(math.floor(n * (1 - LIMINF_TAIL))))
    t = w.t[start:]
    second = rl_left(w, 2.0).values[start:]
    return float(np.min(t ** (gamma - 2) * second))


def construct_inequality_solution(params: InequalityParams, grid: TimeGrid,
                                  tolerance: float = FIXED_POINT_TOLERANCE,
                                  max_iter: int = FIXED_POINT_MAX_ITER,
                                  divergence: float = DIVERGENCE_NORM) -> FixedPointOutcome:
    """
    Iterates w ← solve_linear_volterra(params, a·I^{3−γ}|w|^p), starting from the
    linear solution (the first iterate from w ≡ 0). The limit satisfies the integral
    inequality with equality.
    """
    w = solve_linear_volterra(params, TimeSeries.sample(grid, np.zeros_like))
    order = 3 - params.gamma
    for iteration in range(1, max_iter + 1):
        try:
            power = TimeSeries(grid, np.abs(w.values) ** params.p)
            updated = solve_linear_volterra(params, rl_left(power, order).scale(params.a))
        except ValueError:
            # non-finite iterate
            logging.info('fixed point diverged at iteration %s', iteration)
            return FixedPointOutcome(w, iteration, converged=False, diverged=True)
        change = (updated - w).max_norm()
        w = updated
        if w.max_norm() > divergence:
            logging.info('fixed point diverged at iteration %s', iteration)
            return FixedPointOutcome(w, iteration, converged=False, diverged=True)
        if change < tolerance:
            return FixedPointOutcome(w, iteration, converged=True, diverged=False)
    return FixedPointOutcome(w, max_iter, converged=False, diverged=False)


def inequality_residual(w: TimeSeries, params: InequalityParams) -> TimeSeries:
    """
    w + b·I¹w + c·I²w − A − Bt − a·I^{3−γ}|w|^p, nonnegative for solutions of the inequality.
    """
    memory = rl_left(TimeSeries(w.grid, np.abs(w.values) ** params.p), 3 - params.gamma)
    values = (w.values + params.b * rl_left(w, 1.0).values + params.c * rl_left(w, 2.0).values
              - params.A - params.B * w.t - params.a * memory.values)
    return TimeSeries(w.grid, values)
