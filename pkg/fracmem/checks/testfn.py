import math
from typing import Annotated

import numpy as np

from ..annotation import Check
from ..registry import CheckContext, CheckOutcome
from ..testfn import (AdmissibilityError, CutoffSpec, TestFunctionSpec, chi_constant_terms,
                      chi_eval, chi_mass, cutoff_constant_terms, cutoff_constants, cutoff_profile,
                      frac_laplacian_fourier, frac_laplacian_radial, verify_comparability)

AGREEMENT_RADIUS = 10.0
CUTOFF_SCALES = (1, 2, 4, 8, 16)
# the transition layer of ψ₁ sits where (1+|x|)^{N+2} is largest relative to χ
FIRST_SCALE_FACTOR = 6.0
# two-oracle and closed-form cases: (N, q, s)
ORACLE_CASES = ((1, 2.0, 0.5), (1, 1.8, 0.5), (2, 3.0, 0.5))


def _spec(N: int, q: float, s: float) -> TestFunctionSpec:
    return TestFunctionSpec(N=N, q=q, sigma=s, eta=s)


def _axis(N: int, count: int = 11) -> np.ndarray:
    points = np.zeros((count, N))
    points[:, 0] = np.linspace(0.0, AGREEMENT_RADIUS, count)
    return points


def poisson_half_laplacian(N: int, r: np.ndarray) -> np.ndarray:
    """
    (−Δ)^{1/2} of the Poisson kernel at height one, which is χ for q = N+1.
    """
    if N == 1:
        return (1 - r ** 2) / (math.pi * (1 + r ** 2) ** 2)
    return (2 - r ** 2) / (2 * math.pi * (1 + r ** 2) ** 2.5)


def _relative_to_sup(values: np.ndarray, reference: np.ndarray) -> float:
    return float(np.max(np.abs(values - reference)) / np.max(np.abs(reference)))


def mass_one(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.chi.mass', 1e-6)]:
    masses = [chi_mass(ctx.testfn), chi_mass(_spec(2, 3.0, 0.5))]
    worst = max(masses, key=lambda m: abs(m - 1))
    return CheckOutcome.agreement(worst, 1.0)


def norm_const_line(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.chi.norm_const', 1e-12)]:
    spec = _spec(1, 2.0, 0.5)
    return CheckOutcome.agreement(float(chi_eval(spec, 0.0)), 1 / math.pi)


def radially_nonincreasing(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.chi.monotone')]:
    values = chi_eval(ctx.testfn, _axis(ctx.testfn.N, 401))
    largest_rise = float(np.max(np.diff(values)))
    return CheckOutcome.inequality(largest_rise, 0.0)


def singular_closed_form(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.radial.closed_form', 1e-3)]:
    worst = 0.0
    for N, q in ((1, 2.0), (2, 3.0)):
        points = _axis(N)
        exact = poisson_half_laplacian(N, points[:, 0])
        worst = max(worst, _relative_to_sup(frac_laplacian_radial(_spec(N, q, 0.5), 0.5, points), exact))
    return CheckOutcome(worst, 0.0, worst)


def fourier_closed_form(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.fourier.closed_form', 1e-3)]:
    worst = 0.0
    for N, q in ((1, 2.0), (2, 3.0)):
        points = _axis(N)
        exact = poisson_half_laplacian(N, points[:, 0])
        worst = max(worst, _relative_to_sup(frac_laplacian_fourier(_spec(N, q, 0.5), 0.5, points), exact))
    return CheckOutcome(worst, 0.0, worst)


def two_oracle_agreement(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.two_oracle', 1e-3)]:
    worst = 0.0
    for N, q, s in ORACLE_CASES:
        spec, points = _spec(N, q, s), _axis(N)
        singular = frac_laplacian_radial(spec, s, points)
        worst = max(worst, _relative_to_sup(singular, frac_laplacian_fourier(spec, s, points)))
    return CheckOutcome(worst, 0.0, worst)


def symmetric_in_x(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.radial.symmetry', 1e-9)]:
    spec = _spec(1, 2.0, 0.5)
    points = _axis(1, 5)[1:]
    plus = frac_laplacian_radial(spec, 0.5, points)
    minus = frac_laplacian_radial(spec, 0.5, -points)
    return CheckOutcome(float(plus[-1]), float(minus[-1]), _relative_to_sup(minus, plus))


def positive_at_origin(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.radial.origin_sign')]:
    value = float(frac_laplacian_radial(_spec(1, 1.8, 0.5), 0.5, 0.0))
    return CheckOutcome.inequality(0.0, value)


def comparability_stable(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.comparability.stable', 0.1)]:
    worst = (1.0, 1.0, 0.0)
    for N, q, s in ORACLE_CASES:
        spec = _spec(N, q, s)
        near, far = verify_comparability(spec, s, 10.0), verify_comparability(spec, s, 20.0)
        gap = abs(far - near) / near
        if gap >= worst[2]:
            worst = (far, near, gap)
    return CheckOutcome(*worst)


def comparability_axis_sign(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.comparability.axis_sign', 1e-9)]:
    spec = _spec(1, 1.8, 0.5)
    plus = verify_comparability(spec, 0.5, 5.0, samples=21)
    minus = verify_comparability(spec, 0.5, 5.0, samples=21, direction=-1.0)
    return CheckOutcome.agreement(plus, minus, relative=True)


def comparability_laplacian(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.comparability.laplacian', 1e-12)]:
    spec = _spec(1, 2.0, 0.5)
    c_hat = verify_comparability(spec, 1.0, 20.0)
    return CheckOutcome.agreement(c_hat, spec.q * spec.N)


def admissibility_enforced(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.admissibility')]:
    q = 1 + 2 * 0.5 + 1
    try:
        TestFunctionSpec(N=1, q=q, sigma=0.5, eta=0.5)
    except (AdmissibilityError, ValueError):
        return CheckOutcome(q, 2.0, 0.0)
    return CheckOutcome(q, 2.0, 1.0)


def cutoff_mass(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.cutoff.mass', 1e-9)]:
    largest = max(cutoff_constant_terms(ctx.testfn, CutoffSpec(n))[2] for n in CUTOFF_SCALES)
    return CheckOutcome.inequality(largest, 1.0)


def cutoff_derivative_bounds(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.cutoff.derivatives', 1e-12)]:
    excess = 0.0
    gradient = hessian = 0.0
    for n in CUTOFF_SCALES:
        _, first, second = cutoff_profile(CutoffSpec(n), np.linspace(0, 3 * n, 6001))
        gradient = max(gradient, n * float(np.max(np.abs(first))))
        hessian = max(hessian, n * n * float(np.max(np.abs(second))))
        excess = max(excess, gradient - 1.875, hessian - 10 / math.sqrt(3))
    return CheckOutcome(gradient, hessian, max(0.0, excess))


def cutoff_limit(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.cutoff.limit', 0.1)]:
    scaled = sum(cutoff_constant_terms(ctx.testfn, CutoffSpec(CUTOFF_SCALES[-1])))
    alone = sum(chi_constant_terms(ctx.testfn))
    return CheckOutcome(scaled, alone, abs(scaled - alone) / alone)


def _cutoff_sweep(ctx: CheckContext) -> dict[int, float]:
    return {n: cutoff_constants(ctx.testfn, CutoffSpec(n), 0.5) for n in CUTOFF_SCALES}


def cutoff_uniform(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.cutoff.uniform')]:
    constants = _cutoff_sweep(ctx)
    reference = constants[CUTOFF_SCALES[-1]]
    largest = max(constants[n] for n in CUTOFF_SCALES[1:])
    return CheckOutcome.inequality(largest / reference, 2.0)


def cutoff_first_scale(ctx: CheckContext) -> Annotated[
        CheckOutcome, Check('testfn.cutoff.first_scale')]:
    constants = _cutoff_sweep(ctx)
    ratio = constants[1] / constants[CUTOFF_SCALES[-1]]
    return CheckOutcome.inequality(ratio, FIRST_SCALE_FACTOR)
