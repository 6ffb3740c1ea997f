import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
import pydantic
from scipy.linalg import expm

from .fracops import TimeGrid, TimeSeries, gamma_checked, product_weights, rl_left
from .testfn import TestFunctionSpec, chi_eval

BOUNDARY_FRACTION = 0.9
BOUNDARY_LEAK_LIMIT = 1e-8


class IntegrationFailure(RuntimeError):
    def __init__(self, message: str, result: Optional['SimResult'] = None) -> None:
        super().__init__(message)
        self.result = result


class ModelParams(pydantic.BaseModel):
    """
    u_tt + (−Δ)^σ u + μ(−Δ)^η u_t = ₀I_t^{1−γ}(|u|^p) on the periodic box [−L, L)^N.
    """
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    sigma: float = 1.0
    eta: float = 0.5
    mu: float = 2.0
    gamma: float = 0.5
    p: float = 1.5
    N: Literal[1, 2] = 1
    L: float = 20.0
    M: int = 256
    dt: float = 1e-3
    T_max: float = 50.0
    blowup_threshold: float = 1e6
    output_every: int = 10

    @pydantic.field_validator('sigma')
    @classmethod
    def _sigma_range(cls, value: float) -> float:
        if not 0 < value <= 1:
            raise ValueError(f'0<σ≤1 required (sigma={value})')
        return value

    @pydantic.field_validator('eta')
    @classmethod
    def _eta_range(cls, value: float) -> float:
        if not 0 <= value <= 1:
            raise ValueError(f'0≤η≤1 required (eta={value})')
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

    @pydantic.field_validator('M')
    @classmethod
    def _modes_power_of_two(cls, value: int) -> int:
        if value < 4 or value & (value - 1):
            raise ValueError(f'M must be a power of two ≥ 4 (M={value})')
        return value

    @pydantic.field_validator('L', 'dt', 'T_max', 'blowup_threshold')
    @classmethod
    def _positive(cls, value: float, info: pydantic.ValidationInfo) -> float:
        if not value > 0 or not math.isfinite(value):
            raise ValueError(f'{info.field_name} must be positive and finite ({value})')
        return value

    @pydantic.field_validator('output_every')
    @classmethod
    def _positive_interval(cls, value: int) -> int:
        if value <= 0:
            raise ValueError(f'output_every must be positive ({value})')
        return value

    @property
    def alpha(self) -> float:
        """Order 1−γ of the memory integral."""
        return 1 - self.gamma

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.N

    @property
    def spacing(self) -> float:
        return 2 * self.L / self.M

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.N

    @property
    def n_steps(self) -> int:
        return int(round(self.T_max / self.dt))


class DataSpec(pydantic.BaseModel):
    """
    Gaussian seed data u₀ = amplitude·exp(−|x|²/width²), u₁ = u1_scale·u₀.
    """
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')

    amplitude: float = 1.0
    width: float = 1.0
    u1_scale: float = 1.0

    @pydantic.field_validator('width')
    @classmethod
    def _width_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f'width must be positive ({value})')
        return value


class Outcome(str, enum.Enum):
    BLOWUP = 'BLOWUP'
    BOUNDED = 'NOT-BLOWN-UP-BY-T_max'
    GLOBAL = 'GLOBAL'
    FAILED = 'FAILED'


def grid_axis(params: ModelParams) -> np.ndarray:
    return -params.L + np.arange(params.M) * params.spacing


def grid_points(params: ModelParams) -> np.ndarray:
    """
    Grid coordinates with a trailing axis of length N.
    """
    axes = [grid_axis(params)] * params.N
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)


def wavenumbers(params: ModelParams) -> list[np.ndarray]:
    """
    Periodic wavenumbers ξ = πk/L broadcast onto the rfftn layout.
    """
    d = params.spacing
    full = 2 * math.pi * np.fft.fftfreq(params.M, d=d)
    half = 2 * math.pi * np.fft.rfftfreq(params.M, d=d)
    axes = [full] * (params.N - 1) + [half]
    return list(np.meshgrid(*axes, indexing='ij'))


@lru_cache(maxsize=16)
def _wavenumber_sq(params: ModelParams) -> np.ndarray:
    return sum(k ** 2 for k in wavenumbers(params))  # type: ignore


@lru_cache(maxsize=16)
def dealias_mask(params: ModelParams) -> np.ndarray:
    """
    2/3 rule: keep modes with |k| < M/3 along every axis.
    """
    cutoff = params.M / 3 * (math.pi / params.L)
    mask = np.ones(_wavenumber_sq(params).shape, dtype=bool)
    for k in wavenumbers(params):
        mask &= np.abs(k) < cutoff
    return mask


def check_field(f: np.ndarray, params: ModelParams) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != params.shape:
        raise ValueError(f'field shape {f.shape} does not match grid {params.shape}')
    return f


def frac_laplacian_apply(f: np.ndarray, s: float, params: ModelParams) -> np.ndarray:
    """
    (−Δ)^s on the periodic grid through the multiplier |ξ|^{2s}.
    """
    f = check_field(f, params)
    if not 0 <= s <= 1:
        raise ValueError(f'0≤s≤1 required ({s=})')
    if s == 0:
        return f.copy()
    symbol = _wavenumber_sq(params) ** s
    return np.fft.irfftn(symbol * np.fft.rfftn(f), s=params.shape)


class HistoryBuffer:
    """
    Dense store of |u|^p at past steps, grown by doubling.
    """
    _data: np.ndarray
    _size: int

    def __init__(self, shape: tuple[int, ...], capacity: int = 64) -> None:
        self._data = np.empty((capacity, *shape))
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def append(self, values: np.ndarray) -> None:
        if self._size == len(self._data):
            grown = np.empty((2 * len(self._data), *self._data.shape[1:]))
            grown[:self._size] = self._data[:self._size]
            self._data = grown
        self._data[self._size] = values
        self._size += 1

    def view(self) -> np.ndarray:
        return self._data[:self._size]


@dataclass
class SimState:
    u: np.ndarray
    v: np.ndarray
    history: HistoryBuffer
    t: float = 0.0
    step_index: int = 0
    last_forcing: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, params: ModelParams, u0: np.ndarray, u1: np.ndarray) -> 'SimState':
        u0, u1 = check_field(u0, params), check_field(u1, params)
        if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(u1))):
            raise ValueError('initial data contain NaN or Inf')
        return cls(u=u0.copy(), v=u1.copy(), history=HistoryBuffer(params.shape))


def nonlinearity(u: np.ndarray, params: ModelParams) -> np.ndarray:
    return np.abs(u) ** params.p


def memory_term(state: SimState, params: ModelParams) -> np.ndarray:
    """
    (1/Γ(1−γ))∫₀ᵗ(t−s)^{−γ}|u(s,x)|^p ds at t = t_n per grid point, with the product
    weights of rl_left over the stored history plus the current |u_n|^p.
    """
    n = state.step_index
    if len(state.history) != n:
        raise ValueError(f'history holds {len(state.history)} steps, expected {n}')
    if n == 0:
        return np.zeros(params.shape)
    weights = product_weights(n, params.alpha, params.dt)
    past = np.tensordot(weights[:-1], state.history.view(), axes=1)
    return past + weights[-1] * nonlinearity(state.u, params)


@dataclass(frozen=True)
class ModePropagator:
    """
    Rows of exp(dt·A) for the augmented mode system [û, v̂, F̂, Ŝ]' = A[û, v̂, F̂, Ŝ],
    A = [[0,1,0,0],[−|ξ|^{2σ},−μ|ξ|^{2η},1,0],[0,0,0,1],[0,0,0,0]], with the forcing
    F̂ linear in time over the step.
    """
    u_row: tuple[np.ndarray, ...]
    v_row: tuple[np.ndarray, ...]


@lru_cache(maxsize=16)
def mode_propagator(params: ModelParams) -> ModePropagator:
    k2 = _wavenumber_sq(params)
    unique, inverse = np.unique(k2, return_inverse=True)
    stiffness = unique ** params.sigma
    damping = params.mu * unique ** params.eta
    generator = np.zeros((len(unique), 4, 4))
    generator[:, 0, 1] = 1.0
    generator[:, 1, 0] = -stiffness
    generator[:, 1, 1] = -damping
    generator[:, 1, 2] = 1.0
    generator[:, 2, 3] = 1.0
    exp_a = expm(generator * params.dt)
    inverse = inverse.reshape(k2.shape)
    u_row = tuple(exp_a[:, 0, j][inverse] for j in range(4))
    v_row = tuple(exp_a[:, 1, j][inverse] for j in range(4))
    logging.debug('mode propagator built for %s distinct |ξ|²', len(unique))
    return ModePropagator(u_row=u_row, v_row=v_row)


def step(state: SimState, params: ModelParams, with_memory: bool = True) -> SimState:
    """
    Advances one dt: the linear part exactly per Fourier mode, the memory forcing
    extrapolated linearly from the last two forcing values.
    """
    n = state.step_index
    g_now = nonlinearity(state.u, params)
    if with_memory:
        forcing = memory_term(state, params)
        if n == 0:
            a = params.alpha
            slope = params.dt ** (a - 1) / gamma_checked(a + 1) * g_now
        else:
            assert state.last_forcing is not None
            slope = (forcing - state.last_forcing) / params.dt
    else:
        forcing = np.zeros(params.shape)
        slope = forcing
    mask = dealias_mask(params)
    hats = (np.fft.rfftn(state.u), np.fft.rfftn(state.v),
            mask * np.fft.rfftn(forcing), mask * np.fft.rfftn(slope))
    prop = mode_propagator(params)
    u_hat = sum(c * h for c, h in zip(prop.u_row, hats))
    v_hat = sum(c * h for c, h in zip(prop.v_row, hats))
    u_new = np.fft.irfftn(u_hat, s=params.shape)
    v_new = np.fft.irfftn(v_hat, s=params.shape)
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise IntegrationFailure(f'non-finite field at step {n + 1} (t={(n + 1) * params.dt})')
    state.history.append(g_now)
    return SimState(u=u_new, v=v_new, history=state.history, t=(n + 1) * params.dt,
                    step_index=n + 1, last_forcing=forcing)


@dataclass(frozen=True)
class MomentRecord:
    t: float
    w: float
    m: float
    u_sup: float
    energy_proxy: float
    g_sigma: float
    g_eta: float
    n_p: float


@dataclass
class SimResult:
    params: ModelParams
    outcome: Outcome
    records: list[MomentRecord]
    A: float
    B: float
    blowup_time: Optional[float] = None
    final_sup: float = 0.0
    boundary_leak: float = 0.0
    steps: int = 0

    @property
    def end_time(self) -> float:
        return self.blowup_time if self.blowup_time is not None else self.params.T_max


@dataclass(frozen=True)
class _MomentWeights:
    chi: np.ndarray
    chi_sigma: np.ndarray
    chi_eta: np.ndarray
    boundary: np.ndarray


def _moment_weights(params: ModelParams, spec: TestFunctionSpec) -> _MomentWeights:
    points = grid_points(params)
    chi = chi_eval(spec, points)
    return _MomentWeights(
        chi=chi,
        chi_sigma=frac_laplacian_apply(chi, params.sigma, params),
        chi_eta=frac_laplacian_apply(chi, params.eta, params),
        boundary=np.max(np.abs(points), axis=-1) > BOUNDARY_FRACTION * params.L,
    )


def _moment_record(state: SimState, params: ModelParams, weights: _MomentWeights) -> MomentRecord:
    vol = params.cell_volume
    u, v = state.u, state.v
    return MomentRecord(
        t=state.t,
        w=float(np.sum(np.abs(u) * weights.chi) * vol),
        m=float(np.sum(u * weights.chi) * vol),
        u_sup=float(np.max(np.abs(u))),
        energy_proxy=float((np.sum(u ** 2) + np.sum(v ** 2)) * vol),
        g_sigma=float(np.sum(u * weights.chi_sigma) * vol),
        g_eta=float(np.sum(u * weights.chi_eta) * vol),
        n_p=float(np.sum(nonlinearity(u, params) * weights.chi) * vol),
    )


def _boundary_leak(u: np.ndarray, weights: _MomentWeights) -> float:
    total = float(np.sum(np.abs(u)))
    return float(np.sum(np.abs(u[weights.boundary]))) / total if total > 0 else 0.0


def linear_energy(u: np.ndarray, v: np.ndarray, params: ModelParams) -> float:
    """
    ‖v‖² + ‖(−Δ)^{σ/2}u‖², nonincreasing for the unforced damped flow with μ ≥ 0.
    """
    half = frac_laplacian_apply(u, params.sigma / 2, params)
    return float((np.sum(v ** 2) + np.sum(half ** 2)) * params.cell_volume)


def initial_moments(params: ModelParams, u0: np.ndarray, u1: np.ndarray,
                    chi: TestFunctionSpec) -> tuple[float, float]:
    """
    A = ∫u₀χ, B = ∫[u₁χ + μu₀(−Δ)^ηχ].
    """
    weights = _moment_weights(params, chi)
    vol = params.cell_volume
    A = float(np.sum(u0 * weights.chi) * vol)
    B = float((np.sum(u1 * weights.chi) + params.mu * np.sum(u0 * weights.chi_eta)) * vol)
    return A, B


def _zero_records(params: ModelParams) -> list[MomentRecord]:
    # same output times as a marched run
    steps = [n for n in range(1, params.n_steps + 1)
             if n % params.output_every == 0 or n == params.n_steps]
    return [MomentRecord(n * params.dt, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0) for n in steps]


def run(params: ModelParams, u0: np.ndarray, u1: np.ndarray, chi: TestFunctionSpec,
        with_memory: bool = True) -> SimResult:
    if chi.N != params.N:
        raise ValueError(f'test function dimension {chi.N} differs from model dimension {params.N}')
    state = SimState.initial(params, u0, u1)
    weights = _moment_weights(params, chi)
    A, B = initial_moments(params, state.u, state.v, chi)
    records = [_moment_record(state, params, weights)]
    result = SimResult(params=params, outcome=Outcome.BOUNDED, records=records, A=A, B=B,
                       final_sup=records[0].u_sup)
    if not (np.any(state.u) or np.any(state.v)):
        records.extend(_zero_records(params))
        result.outcome = Outcome.GLOBAL
        result.steps = params.n_steps
        logging.info('zero data: solution is identically zero')
        return result

    leak_warned = False
    previous_sup = records[0].u_sup
    for n in range(params.n_steps):
        try:
            state = step(state, params, with_memory=with_memory)
        except IntegrationFailure as e:
            result.outcome = Outcome.FAILED
            result.steps = n
            e.result = result
            raise
        sup = float(np.max(np.abs(state.u)))
        result.steps, result.final_sup = state.step_index, sup
        blown = sup > params.blowup_threshold
        if blown or state.step_index % params.output_every == 0 or state.step_index == params.n_steps:
            record = _moment_record(state, params, weights)
            records.append(record)
            leak = _boundary_leak(state.u, weights)
            result.boundary_leak = max(result.boundary_leak, leak)
            if leak > BOUNDARY_LEAK_LIMIT and not leak_warned:
                leak_warned = True
                logging.warning('boundary leak %.3g exceeds %.0e at t=%s', leak, BOUNDARY_LEAK_LIMIT, state.t)
            logging.debug('t=%.6g w=%.6g sup=%.6g', record.t, record.w, record.u_sup)
        if blown:
            fraction = (params.blowup_threshold - previous_sup) / (sup - previous_sup)
            result.outcome = Outcome.BLOWUP
            result.blowup_time = state.t - params.dt + fraction * params.dt
            logging.info('blow-up at t≈%.6g (p=%s, γ=%s)', result.blowup_time, params.p, params.gamma)
            break
        previous_sup = sup
    return result


def _uniform_records(result: SimResult) -> tuple[TimeGrid, list[MomentRecord]]:
    interval = result.params.output_every * result.params.dt
    uniform = []
    for i, record in enumerate(result.records):
        if abs(record.t - i * interval) > 1e-9 * max(1.0, record.t):
            break
        uniform.append(record)
    if len(uniform) < 2:
        raise ValueError('at least two evenly spaced moment records are required')
    return TimeGrid(len(uniform) - 1, interval), uniform


def moment_inequality_monitor(result: SimResult, params: ModelParams,
                              c_hat: Optional[float]) -> TimeSeries:
    """
    RHS − LHS of ₀I_t^{3−γ}w^p ≤ w + κ₀I_t¹w + Ĉ₀I_t²w − A − Bt with κ = max(2√Ĉ+1, |μ|Ĉ).
    """
    if c_hat is None:
        raise ValueError('comparability constant Ĉ is required')
    grid, records = _uniform_records(result)
    w = TimeSeries(grid, np.array([r.w for r in records]))
    kappa = max(2 * math.sqrt(c_hat) + 1, abs(params.mu) * c_hat)
    lhs = rl_left(TimeSeries(grid, w.values ** params.p), 3 - params.gamma)
    rhs = w + rl_left(w, 1).scale(kappa) + rl_left(w, 2).scale(c_hat)
    return TimeSeries(grid, rhs.values - result.A - result.B * grid.nodes - lhs.values)


def moment_balance(result: SimResult, params: ModelParams) -> TimeSeries:
    """
    m + μ₀I_t¹g_η + ₀I_t²g_σ − ₀I_t^{3−γ}n_p, which equals A + Bt along exact solutions.
    """
    grid, records = _uniform_records(result)

    def series(name: str) -> TimeSeries:
        return TimeSeries(grid, np.array([getattr(r, name) for r in records]))
    total = series('m') + rl_left(series('g_eta'), 1).scale(params.mu) + rl_left(series('g_sigma'), 2)
    return total - rl_left(series('n_p'), 3 - params.gamma)


def fit_linear_coefficient(series: TimeSeries, fraction: float = 0.1) -> tuple[float, float]:
    """
    Least-squares (intercept, slope) on the leading fraction of the series.
    """
    count = max(2, int(round(fraction * (series.grid.n_steps + 1))))
    slope, intercept = np.polyfit(series.t[:count], series.values[:count], 1)
    return float(intercept), float(slope)


def critical_exponent(gamma: float) -> float:
    return 1 / gamma if gamma > 0 else math.inf


def gaussian_data(params: ModelParams, data: Optional[DataSpec] = None) -> tuple[np.ndarray, np.ndarray]:
    data = data or DataSpec()
    r2 = np.sum(grid_points(params) ** 2, axis=-1)
    u0 = data.amplitude * np.exp(-r2 / data.width ** 2)
    outside = np.sqrt(r2) >= params.L / 2
    if np.any(np.abs(u0[outside]) > BOUNDARY_LEAK_LIMIT * max(abs(data.amplitude), 1e-300)):
        logging.warning('initial data are not supported in |x| < L/2 (L=%s, width=%s)', params.L, data.width)
    return u0, data.u1_scale * u0


@dataclass
class SweepRow:
    p: float
    p_gamma: float
    classification: str
    time: float
    final_sup: float
    predicted_blowup: bool
    note: str = ''
    result: Optional[SimResult] = field(default=None, repr=False)


SWEEP_TASK = Callable[[], SimResult]
SWEEP_RUNNER = Callable[[Sequence[SWEEP_TASK]], list[Union[SimResult, BaseException]]]


def run_sequential(tasks: Sequence[SWEEP_TASK]) -> list[Union[SimResult, BaseException]]:
    outcomes: list[Union[SimResult, BaseException]] = []
    for task in tasks:
        try:
            outcomes.append(task())
        except Exception as e:
            outcomes.append(e)
    return outcomes


def threshold_sweep(base: ModelParams, p_values: Sequence[float], data: Optional[DataSpec] = None,
                    chi: Optional[TestFunctionSpec] = None,
                    runner: SWEEP_RUNNER = run_sequential) -> list[SweepRow]:
    """
    One run per distinct p in ascending order; failed runs become FAILED rows.
    """
    values = [float(p) for p in p_values]
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError(f'p_values must be sorted ascending: {values}')
    chi = chi or TestFunctionSpec.default_for(base.N, base.sigma, base.eta)
    distinct: list[float] = []
    duplicates: list[float] = []
    for p in values:
        if distinct and distinct[-1] == p:
            duplicates.append(p)
            logging.warning('duplicate sweep value p=%s dropped', p)
        else:
            distinct.append(p)

    def task(p: float) -> SWEEP_TASK:
        def run_one() -> SimResult:
            params = base.model_copy(update={'p': p})
            u0, u1 = gaussian_data(params, data)
            return run(params, u0, u1, chi)  # type: ignore
        return run_one

    outcomes = runner([task(p) for p in distinct])
    rows = []
    for p, outcome in zip(distinct, outcomes):
        predicted = p * base.gamma <= 1
        if isinstance(outcome, BaseException):
            logging.error('sweep row p=%s failed: %s', p, outcome)
            partial = getattr(outcome, 'result', None)
            rows.append(SweepRow(p, p * base.gamma, Outcome.FAILED.value, math.nan,
                                 partial.final_sup if partial else math.nan, predicted,
                                 note=str(outcome), result=partial))
            continue
        rows.append(SweepRow(p, p * base.gamma, outcome.outcome.value, outcome.end_time,
                             outcome.final_sup, predicted, result=outcome))
    for p in duplicates:
        rows.append(SweepRow(p, p * base.gamma, 'DUPLICATE', math.nan, math.nan,
                             p * base.gamma <= 1, note=f'duplicate of p={p}'))
    return rows
