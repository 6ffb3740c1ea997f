import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma as _gamma


class GridError(ValueError):
    pass


def gamma_checked(x: float) -> float:
    """
    Γ(x) with the poles rejected before evaluation.
    >>> gamma_checked(2.5)
    1.329340388179137
    """
    if x <= 0 and float(x).is_integer():
        raise GridError(f'Γ has a pole at {x=}')
    return float(_gamma(x))


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    h: float

    def __post_init__(self) -> None:
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps <= 0:
            raise GridError(f'n_steps must be a positive integer: {self.n_steps=}')
        if not self.h > 0 or not math.isfinite(self.h):
            raise GridError(f'step size must be positive: {self.h=}')

    @classmethod
    def over(cls, T: float, n_steps: int) -> 'TimeGrid':
        if not T > 0:
            raise GridError(f'horizon must be positive: {T=}')
        return cls(n_steps=n_steps, h=T / n_steps)

    @property
    def T(self) -> float:
        return self.n_steps * self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_steps + 1,):
            raise GridError(
                f'series length {values.shape} does not match grid of {self.grid.n_steps} steps')
        if not np.all(np.isfinite(values)):
            raise GridError('series contains NaN or Inf')
        object.__setattr__(self, 'values', values)

    @classmethod
    def sample(cls, grid: TimeGrid, fn) -> 'TimeSeries':
        return cls(grid, fn(grid.nodes))

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def __add__(self, other: 'TimeSeries') -> 'TimeSeries':
        check_same_grid(self, other)
        return TimeSeries(self.grid, self.values + other.values)

    def __sub__(self, other: 'TimeSeries') -> 'TimeSeries':
        check_same_grid(self, other)
        return TimeSeries(self.grid, self.values - other.values)

    def scale(self, factor: float) -> 'TimeSeries':
        return TimeSeries(self.grid, factor * self.values)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0 or not math.isfinite(self.alpha):
            raise GridError(f'fractional order must be positive: {self.alpha=}')

    @classmethod
    def of(cls, value: Union['FracOrder', float]) -> 'FracOrder':
        return value if isinstance(value, FracOrder) else cls(float(value))


ORDER_TYPE = Union[FracOrder, float]


def check_same_grid(f: TimeSeries, g: TimeSeries) -> None:
    if f.grid != g.grid:
        raise GridError(f'grid mismatch: {f.grid} vs {g.grid}')


def _interior_weights(n_steps: int, alpha: float) -> np.ndarray:
    # c_0 = 1, c_k = (k+1)^{a+1} - 2k^{a+1} + (k-1)^{a+1}
    k = np.arange(n_steps + 1, dtype=float)
    a1 = alpha + 1
    c = np.empty(n_steps + 1)
    c[0] = 1.0
    c[1:] = (k[1:] + 1) ** a1 - 2 * k[1:] ** a1 + (k[1:] - 1) ** a1
    return c


def _start_weights(n_steps: int, alpha: float) -> np.ndarray:
    n = np.arange(n_steps + 1, dtype=float)
    a0 = np.zeros(n_steps + 1)
    a0[1:] = (n[1:] - 1) ** (alpha + 1) - (n[1:] - 1 - alpha) * n[1:] ** alpha
    return a0


def product_weights(n: int, alpha: ORDER_TYPE, h: float) -> np.ndarray:
    """
    Weights w_j, j = 0..n, with (I^α f)(t_n) ≈ Σ w_j f(t_j) for the piecewise-linear
    interpolant of f. The kernel moments are integrated exactly on every cell.
    """
    a = FracOrder.of(alpha).alpha
    if n == 0:
        return np.zeros(1)
    scale = h ** a / gamma_checked(a + 2)
    c = _interior_weights(n, a)
    weights = np.empty(n + 1)
    weights[0] = _start_weights(n, a)[n]
    weights[1:] = c[n - 1::-1]
    return scale * weights


def rl_left(f: TimeSeries, alpha: ORDER_TYPE) -> TimeSeries:
    """
    Left Riemann-Liouville integral (1/Γ(α))∫₀ᵗ (t−s)^{α−1} f(s) ds at every node.
    """
    a = FracOrder.of(alpha).alpha
    n_steps, h = f.grid.n_steps, f.grid.h
    c = _interior_weights(n_steps, a)
    shifted = f.values.copy()
    shifted[0] = 0.0
    history = np.convolve(c, shifted)[:n_steps + 1]
    values = _start_weights(n_steps, a) * f.values[0] + history
    values[0] = 0.0
    return TimeSeries(f.grid, values * h ** a / gamma_checked(a + 2))


def rl_right(f: TimeSeries, alpha: ORDER_TYPE) -> TimeSeries:
    """
    Right Riemann-Liouville integral (1/Γ(α))∫ₜᵀ (s−t)^{α−1} f(s) ds, by reflection s ↦ T−s.
    """
    mirrored = rl_left(TimeSeries(f.grid, f.values[::-1]), alpha)
    return TimeSeries(f.grid, mirrored.values[::-1])


def rl_power_closed_form(l: float, gamma: float, beta: ORDER_TYPE, grid: TimeGrid) -> TimeSeries:
    """
    Exact right integral of the power profile (1−t/T)^{l−(3−γ)}:

        ₜI_T^β (1−t/T)^{l−(3−γ)} = Γ(l+γ−2)/Γ(l+γ+β−2) · T^β (1−t/T)^{l−(3−γ)+β}
    """
    b = FracOrder.of(beta).alpha
    exponent = l - (3 - gamma)
    if not exponent > -1:
        raise GridError(f'profile exponent l-(3-γ)={exponent} must exceed -1')
    factor = gamma_checked(l + gamma - 2) / gamma_checked(l + gamma + b - 2)
    T = grid.T
    base = np.clip(1 - grid.nodes / T, 0.0, None)
    return TimeSeries(grid, factor * T ** b * base ** (exponent + b))


def integrate(f: TimeSeries) -> float:
    return float(trapezoid(f.values, dx=f.grid.h))


def check_semigroup(f: TimeSeries, alpha: ORDER_TYPE, beta: ORDER_TYPE) -> float:
    a, b = FracOrder.of(alpha), FracOrder.of(beta)
    both = FracOrder(a.alpha + b.alpha)
    left = rl_left(rl_left(f, a), b) - rl_left(f, both)
    right = rl_right(rl_right(f, a), b) - rl_right(f, both)
    return max(left.max_norm(), right.max_norm())


def check_adjoint(f: TimeSeries, g: TimeSeries, alpha: ORDER_TYPE) -> float:
    check_same_grid(f, g)
    lhs = trapezoid(rl_left(f, alpha).values * g.values, dx=f.grid.h)
    rhs = trapezoid(rl_right(g, alpha).values * f.values, dx=f.grid.h)
    return float(abs(lhs - rhs))


LAPLACE_TRUNCATION = 1e-12
LAPLACE_STEP = 0.005


def laplace_pl(f: TimeSeries, s: float) -> float:
    """
    ∫₀ᵀ e^{−st} f(t) dt, exact for the piecewise-linear interpolant of f.
    """
    h = f.grid.h
    sh = s * h
    e0 = -math.expm1(-sh) / s
    e1 = (1 - math.exp(-sh) * (1 + sh)) / s ** 2
    decay = np.exp(-s * f.t[:-1])
    left, right = e0 - e1 / h, e1 / h
    return float(np.sum(decay * (left * f.values[:-1] + right * f.values[1:])))


def laplace_check_exp(alpha: ORDER_TYPE, lam: float, s: float) -> tuple[float, float]:
    """
    Returns (𝓛(₀I_t^α e^{λ·})(s) by quadrature, s^{−α}/(s−λ)).

    The t^α/Γ(α+1) start of the integral is not piecewise linear, so it is split off
    as I^α1 with transform s^{−α−1}; only I^α(e^{λt}−1), which vanishes like t^{α+1},
    goes through the quadrature.
    """
    a = FracOrder.of(alpha).alpha
    if not s > 0:
        raise GridError(f'Laplace variable must be positive: {s=}')
    if not lam < 0:
        raise GridError(f'exponential rate must be negative: {lam=}')
    T = -math.log(LAPLACE_TRUNCATION) / min(-lam, s)
    grid = TimeGrid.over(T, int(math.ceil(T / LAPLACE_STEP)))
    remainder = rl_left(TimeSeries.sample(grid, lambda t: np.expm1(lam * t)), a)
    return laplace_pl(remainder, s) + s ** (-a - 1), s ** (-a) / (s - lam)


def lp_norm(f: TimeSeries, p: float) -> float:
    return float(trapezoid(np.abs(f.values) ** p, dx=f.grid.h) ** (1 / p))


def lp_bound_ratio(alpha: ORDER_TYPE, p: float, grid: TimeGrid,
                   rng: np.random.Generator, samples: int = 20) -> float:
    """
    Largest observed ‖I^α f‖_p / ‖f‖_p over random piecewise-linear f.
    """
    ratio = 0.0
    for _ in range(samples):
        f = random_piecewise_linear(grid, rng)
        norm = lp_norm(f, p)
        if norm > 0:
            ratio = max(ratio, lp_norm(rl_left(f, alpha), p) / norm)
    return ratio


def random_piecewise_linear(grid: TimeGrid, rng: np.random.Generator, knots: int = 10) -> TimeSeries:
    knot_t = np.linspace(0, grid.T, knots + 1)
    knot_v = rng.standard_normal(knots + 1)
    return TimeSeries(grid, np.interp(grid.nodes, knot_t, knot_v))
