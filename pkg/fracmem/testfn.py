import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import pydantic
from scipy.integrate import quad
from scipy.special import j0, kv

from .fracops import gamma_checked

SUP_SPACING = 0.05
ANGULAR_NODES = 512
TAYLOR_RADIUS = 1e-4
FOURIER_CUTOFF = 60.0
QUAD_OPTIONS = {'epsabs': 1e-13, 'epsrel': 1e-10, 'limit': 400}


class AdmissibilityError(ValueError):
    pass


def fractional_orders(sigma: float, eta: float) -> list[float]:
    return [s for s in (sigma, eta) if 0 < s < 1]


def q_window(N: int, sigma: float, eta: float) -> tuple[float, float]:
    """
    Admissible decay exponents (N, upper]: every order s∈(0,1) among σ, η caps q at N+2s,
    integer orders impose only q>N.
    """
    orders = fractional_orders(sigma, eta)
    upper = N + 2 * min(orders) if orders else math.inf
    return float(N), upper


class TestFunctionSpec(pydantic.BaseModel):
    """
    χ(x) = (1+|x|²)^{−q/2} / ∫(1+|y|²)^{−q/2}dy
    """
    model_config = pydantic.ConfigDict(frozen=True, extra='forbid')
    __test__ = False

    N: Literal[1, 2] = 1
    q: float = 2.0
    sigma: float = 1.0
    eta: float = 0.5

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

    @pydantic.model_validator(mode='after')
    def _q_admissible(self) -> 'TestFunctionSpec':
        lower, upper = q_window(self.N, self.sigma, self.eta)
        if not lower < self.q <= upper:
            window = f'(N, N+2·min(σ,η)] = ({lower}, {upper}]' if math.isfinite(upper) \
                else f'q>N={lower}'
            raise AdmissibilityError(f'q must lie in {window} (q={self.q})')
        return self

    @classmethod
    def default_for(cls, N: int, sigma: float, eta: float) -> 'TestFunctionSpec':
        _, upper = q_window(N, sigma, eta)
        q = upper if math.isfinite(upper) else N + 1.0
        return cls(N=N, q=q, sigma=sigma, eta=eta)  # type: ignore

    @property
    def norm_const(self) -> float:
        """
        π^{N/2}Γ((q−N)/2)/Γ(q/2)
        """
        return math.pi ** (self.N / 2) * gamma_checked((self.q - self.N) / 2) / gamma_checked(self.q / 2)


@dataclass(frozen=True)
class CutoffSpec:
    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n <= 0:
            raise ValueError(f'cutoff scale must be a positive integer: {self.n=}')


def sphere_area(N: int) -> float:
    return 2 * math.pi ** (N / 2) / gamma_checked(N / 2)


def _points(spec: TestFunctionSpec, x) -> np.ndarray:
    points = np.asarray(x, dtype=float)
    if spec.N == 1 and (points.ndim == 0 or points.shape[-1] != 1):
        points = points[..., np.newaxis]
    if points.shape[-1] != spec.N:
        raise ValueError(f'points of shape {points.shape} do not live in dimension {spec.N}')
    return points


def chi_radial(spec: TestFunctionSpec, r) -> np.ndarray:
    return (1 + np.asarray(r, dtype=float) ** 2) ** (-spec.q / 2) / spec.norm_const


def chi_eval(spec: TestFunctionSpec, x) -> np.ndarray:
    points = _points(spec, x)
    return chi_radial(spec, np.sqrt(np.sum(points ** 2, axis=-1)))


def chi_derivatives(spec: TestFunctionSpec, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Radial profile χ(r) with its first and second r-derivatives.
    """
    r = np.asarray(r, dtype=float)
    q, base = spec.q, 1 + r ** 2
    value = base ** (-q / 2) / spec.norm_const
    first = -q * r * base ** (-q / 2 - 1) / spec.norm_const
    second = (-q * base ** (-q / 2 - 1) + q * (q + 2) * r ** 2 * base ** (-q / 2 - 2)) / spec.norm_const
    return value, first, second


def chi_laplacian(spec: TestFunctionSpec, r) -> np.ndarray:
    """
    Δχ = −q(1+r²)^{−q/2−2}[N(1+r²) − (q+2)r²] / norm_const
    """
    r = np.asarray(r, dtype=float)
    q, base = spec.q, 1 + r ** 2
    return -q * base ** (-q / 2 - 2) * (spec.N * base - (q + 2) * r ** 2) / spec.norm_const


def chi_mass(spec: TestFunctionSpec) -> float:
    """
    ∫χ by radial quadrature, independent of the closed-form normalisation.
    """
    value, _ = quad(lambda r: r ** (spec.N - 1) * chi_radial(spec, r), 0, math.inf,
                    epsabs=1e-13, epsrel=1e-12, limit=400)
    return sphere_area(spec.N) * value


def frac_laplacian_constant(N: int, s: float) -> float:
    return s * 2 ** (2 * s - 1) * gamma_checked((N + 2 * s) / 2) / (math.pi ** (N / 2) * gamma_checked(1 - s))


def _directions(N: int) -> tuple[np.ndarray, np.ndarray]:
    if N == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    theta = np.arange(ANGULAR_NODES) * (2 * math.pi / ANGULAR_NODES)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return dirs, np.full(ANGULAR_NODES, 2 * math.pi / ANGULAR_NODES)


def _check_order(s: float) -> None:
    if not 0 < s < 1:
        raise ValueError(f'singular-integral form needs 0<s<1 ({s=}); use the exact multiplier at s∈{{0,1}}')


def _singular_integral(spec: TestFunctionSpec, s: float, x: np.ndarray) -> float:
    dirs, weights = _directions(spec.N)
    g_x = float(chi_eval(spec, x))
    radius = float(np.linalg.norm(x))
    area = sphere_area(spec.N)
    taylor = -area / spec.N * float(chi_laplacian(spec, radius))

    def second_difference(rho: float) -> float:
        # angular sum of 2g(x) − g(x+ρe) − g(x−ρe), divided by ρ²
        if rho < TAYLOR_RADIUS:
            return taylor
        plus = chi_eval(spec, x + rho * dirs)
        minus = chi_eval(spec, x - rho * dirs)
        return float(np.dot(weights, 2 * g_x - plus - minus)) / rho ** 2

    def far_field(rho: float) -> float:
        plus = chi_eval(spec, x + rho * dirs)
        minus = chi_eval(spec, x - rho * dirs)
        return float(np.dot(weights, plus + minus)) * rho ** (-1 - 2 * s)

    inner, _ = quad(second_difference, 0, 1, weight='alg', wvar=(1 - 2 * s, 0), **QUAD_OPTIONS)
    split = radius + 20
    points = [radius] if 1 < radius < split else None
    near, _ = quad(far_field, 1, split, points=points, **QUAD_OPTIONS)
    tail, _ = quad(far_field, split, math.inf, **QUAD_OPTIONS)
    outer = area * g_x / s - near - tail
    return frac_laplacian_constant(spec.N, s) * (inner + outer)


def frac_laplacian_radial(spec: TestFunctionSpec, s: float, x_grid) -> np.ndarray:
    """
    (−Δ)^s χ at every point of x_grid through the second-difference singular integral,
    split at |y| = 1: the inner part carries the algebraic weight |y|^{1−2s} analytically,
    the outer part separates the 2χ(x) term in closed form.
    """
    _check_order(s)
    points = _points(spec, x_grid)
    flat = points.reshape(-1, spec.N)
    values = np.array([_singular_integral(spec, s, point) for point in flat])
    return values.reshape(points.shape[:-1])


def chi_hat(spec: TestFunctionSpec, xi) -> np.ndarray:
    """
    Fourier transform of χ: (2π)^{N/2}2^{1−q/2}|ξ|^ν K_ν(|ξ|)/Γ(q/2) / norm_const, ν=(q−N)/2.
    """
    xi = np.asarray(xi, dtype=float)
    nu = (spec.q - spec.N) / 2
    factor = (2 * math.pi) ** (spec.N / 2) * 2 ** (1 - spec.q / 2) / gamma_checked(spec.q / 2)
    safe = np.where(xi > 0, xi, 1.0)
    # ξ^ν K_ν(ξ) → 2^{ν−1}Γ(ν) as ξ → 0
    bessel = np.where(xi > 0, safe ** nu * kv(nu, safe), 2 ** (nu - 1) * gamma_checked(nu))
    return factor * bessel / spec.norm_const


def _fourier_value(spec: TestFunctionSpec, s: float, radius: float) -> float:
    if spec.N == 1:
        def integrand(xi: float) -> float:
            return xi ** (2 * s) * float(chi_hat(spec, xi))
        if radius > 0:
            value, _ = quad(integrand, 0, FOURIER_CUTOFF, weight='cos', wvar=radius, **QUAD_OPTIONS)
        else:
            value, _ = quad(integrand, 0, FOURIER_CUTOFF, **QUAD_OPTIONS)
        return value / math.pi

    def hankel(xi: float) -> float:
        return xi ** (2 * s + 1) * float(chi_hat(spec, xi)) * float(j0(xi * radius))
    value, _ = quad(hankel, 0, FOURIER_CUTOFF, **{**QUAD_OPTIONS, 'limit': 2000})
    return value / (2 * math.pi)


def frac_laplacian_fourier(spec: TestFunctionSpec, s: float, x_grid) -> np.ndarray:
    """
    (−Δ)^s χ through the multiplier |ξ|^{2s} and the inverse cosine (N=1) or Hankel (N=2)
    transform; independent of frac_laplacian_radial.
    """
    if not 0 <= s <= 1:
        raise ValueError(f'0≤s≤1 required ({s=})')
    points = _points(spec, x_grid)
    radii = np.sqrt(np.sum(points ** 2, axis=-1))
    flat = radii.reshape(-1)
    return np.array([_fourier_value(spec, s, r) for r in flat]).reshape(radii.shape)


def check_order_admissible(spec: TestFunctionSpec, s: float) -> None:
    if 0 < s < 1 and spec.q > spec.N + 2 * s:
        raise AdmissibilityError(
            f'q must lie in (N, N+2s] = ({spec.N}, {spec.N + 2 * s}] for s={s} (q={spec.q})')


def comparability_profile(spec: TestFunctionSpec, s: float, radii: np.ndarray,
                          direction: float = 1.0) -> np.ndarray:
    """
    |(−Δ)^s χ(x)|/χ(x) along the first axis at the given radii.
    """
    check_order_admissible(spec, s)
    radii = np.asarray(radii, dtype=float)
    points = np.zeros((len(radii), spec.N))
    points[:, 0] = direction * radii
    if s == 0:
        return np.ones(len(radii))
    if s == 1:
        operator = -chi_laplacian(spec, radii)
    else:
        operator = frac_laplacian_radial(spec, s, points)
    return np.abs(operator) / chi_eval(spec, points)


def verify_comparability(spec: TestFunctionSpec, s: float, radius: float,
                         samples: Optional[int] = None, direction: float = 1.0) -> float:
    """
    Empirical Ĉ = max_{|x|≤radius} |(−Δ)^s χ(x)|/χ(x) on an evenly spaced radial sample.
    """
    if samples is None:
        samples = int(round(radius / SUP_SPACING)) + 1
    ratio = comparability_profile(spec, s, np.linspace(0, radius, samples), direction)
    c_hat = float(np.max(ratio))
    logging.debug('comparability N=%s q=%s s=%s radius=%s Ĉ=%s', spec.N, spec.q, s, radius, c_hat)
    return c_hat


def comparability_constant(spec: TestFunctionSpec, radius: float = 20.0) -> float:
    """
    Ĉ covering both orders σ and η of the model.
    """
    return max(verify_comparability(spec, s, radius) for s in (spec.sigma, spec.eta))


def smoothstep(t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    C² quintic ramp θ(t) = 6t⁵ − 15t⁴ + 10t³ clamped to [0, 1], with θ' and θ''.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    value = t ** 3 * (10 - 15 * t + 6 * t ** 2)
    first = 30 * t ** 2 * (1 - t) ** 2
    second = 60 * t * (1 - t) * (1 - 2 * t)
    return value, first, second


def cutoff_profile(cut: CutoffSpec, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    ψ_n(r) = Ψ(r/n) with Ψ(r) = θ(2−r): one on r<n, zero on r>2n.
    """
    r = np.asarray(r, dtype=float)
    value, first, second = smoothstep(2 - r / cut.n)
    return value, -first / cut.n, second / cut.n ** 2


def _hessian_abs_sum(N: int, f1: np.ndarray, f2: np.ndarray, r: np.ndarray) -> np.ndarray:
    if N == 1:
        return np.abs(f2)
    tangential = np.divide(f1, r, out=f2.copy(), where=r > 0)
    theta = np.linspace(0, math.pi / 2, 33)[:, np.newaxis]
    c2, s2, cs = np.cos(theta) ** 2, np.sin(theta) ** 2, np.cos(theta) * np.sin(theta)
    dxx = f2 * c2 + tangential * s2
    dyy = f2 * s2 + tangential * c2
    dxy = (f2 - tangential) * cs
    return np.max(np.abs(dxx) + np.abs(dyy) + np.abs(dxy), axis=0)


def _constant_terms(spec: TestFunctionSpec, radius: float, cut: Optional[CutoffSpec]) -> tuple[float, float, float]:
    N = spec.N
    r = np.arange(0, radius + SUP_SPACING / 2, SUP_SPACING)
    chi, chi1, chi2 = chi_derivatives(spec, r)
    if cut is None:
        f, f1, f2 = chi, chi1, chi2
    else:
        psi, psi1, psi2 = cutoff_profile(cut, r)
        f = psi * chi
        f1 = psi1 * chi + psi * chi1
        f2 = psi2 * chi + 2 * psi1 * chi1 + psi * chi2
    second = float(np.max((1 + r) ** (N + 2) * _hessian_abs_sum(N, f1, f2, r)))
    weighted = float(np.max((1 + r) ** N * np.abs(f)))

    def density(rho: float) -> float:
        value = chi_radial(spec, rho)
        if cut is not None:
            value = value * cutoff_profile(cut, rho)[0]
        return float(rho ** (N - 1) * value)
    if cut is None:
        mass, _ = quad(density, 0, math.inf, **QUAD_OPTIONS)
    else:
        mass, _ = quad(density, 0, 2 * cut.n, points=[cut.n], **QUAD_OPTIONS)
    return second, weighted, sphere_area(N) * mass


def cutoff_constant_terms(spec: TestFunctionSpec, cut: CutoffSpec) -> tuple[float, float, float]:
    """
    (sup(1+|x|)^{N+2}Σ_{|α|=2}|∂^α(ψ_nχ)|, sup(1+|x|)^N|ψ_nχ|, ‖ψ_nχ‖_{L¹}) on a dense grid.
    """
    return _constant_terms(spec, 2.0 * cut.n, cut)


def chi_constant_terms(spec: TestFunctionSpec, radius: float = 200.0) -> tuple[float, float, float]:
    return _constant_terms(spec, radius, None)


def cutoff_constants(spec: TestFunctionSpec, cut: CutoffSpec, s: float) -> float:
    _check_order(s)
    return sum(cutoff_constant_terms(spec, cut))
