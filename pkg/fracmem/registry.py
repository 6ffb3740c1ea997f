import logging
import math
import time
from dataclasses import dataclass
from typing import Annotated, Any, Callable, Optional, get_origin, get_type_hints

import numpy as np

from .annotation import Check
from .testfn import TestFunctionSpec
from .utils import scan_import
from .volterra import InequalityParams

SUITES = {
    'verify-fracops': 'fracmem.checks.fracops',
    'verify-volterra': 'fracmem.checks.volterra',
    'verify-testfn': 'fracmem.checks.testfn',
}


@dataclass(frozen=True)
class CheckOutcome:
    lhs: float
    rhs: float
    residual: float

    @classmethod
    def inequality(cls, lhs: float, rhs: float) -> 'CheckOutcome':
        """lhs ≤ rhs, with the excess as residual."""
        return cls(lhs, rhs, max(0.0, lhs - rhs))

    @classmethod
    def agreement(cls, lhs: float, rhs: float, relative: bool = False) -> 'CheckOutcome':
        gap = abs(lhs - rhs)
        if relative:
            gap /= max(abs(rhs), 1e-300)
        return cls(lhs, rhs, gap)


@dataclass(frozen=True)
class CheckContext:
    rng: np.random.Generator
    n_steps: int
    inequality: InequalityParams
    testfn: TestFunctionSpec
    l: float


@dataclass(frozen=True)
class RegisteredCheck:
    name: str
    tolerance: float
    fn: Callable[[CheckContext], CheckOutcome]


@dataclass(frozen=True)
class CheckResult:
    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    seconds: float
    error: Optional[str] = None


def func_annotated_metas(fn) -> tuple[Any, tuple]:
    """
    Example:
    >>> def foo(a: int) -> Annotated[bool, 'meta']:
    ...   pass
    ...
    >>> func_annotated_metas(foo)
    (<class 'bool'>, ('meta',))
    """
    anno = get_type_hints(fn, include_extras=True).get('return', Any)
    if get_origin(anno) == Annotated:
        return anno.__origin__, anno.__metadata__
    return anno, tuple()


def get_check_metas(fn) -> list[Check]:
    _, func_metas = func_annotated_metas(fn)
    return [meta for meta in func_metas if isinstance(meta, Check)]


def discover_checks(*packages) -> list[RegisteredCheck]:
    checks: list[RegisteredCheck] = []
    seen: set[str] = set()
    for ref, fn in scan_import(packages).items():
        metas = get_check_metas(fn)
        if not metas:
            continue
        if len(metas) > 1:
            raise TypeError(f'check declares more than one Check marker: {ref}')
        meta = metas[0]
        if meta.name in seen:
            raise TypeError(f'duplicate check name {meta.name!r}: {ref}')
        seen.add(meta.name)
        checks.append(RegisteredCheck(name=meta.name, tolerance=meta.tolerance, fn=fn))
    return checks


def suite_checks(mode: str) -> list[RegisteredCheck]:
    if mode not in SUITES:
        raise ValueError(f'no verification suite for mode {mode!r}')
    return discover_checks(SUITES[mode])


def evaluate(check: RegisteredCheck, ctx: CheckContext, inverted: bool = False) -> CheckResult:
    """
    Runs one check; an inverted check passes only when its residual exceeds the tolerance.
    """
    start = time.perf_counter()
    try:
        outcome = check.fn(ctx)
    except Exception as e:
        logging.error('check %s raised %s: %s', check.name, type(e).__name__, e)
        return CheckResult(check.name, math.nan, math.nan, math.nan, check.tolerance,
                           passed=False, seconds=time.perf_counter() - start, error=str(e))
    seconds = time.perf_counter() - start
    within = bool(outcome.residual <= check.tolerance)
    passed = not within if inverted else within
    logging.info('check %s residual=%.3g tolerance=%.3g %s', check.name, outcome.residual,
                 check.tolerance, 'pass' if passed else 'FAIL')
    return CheckResult(check.name, float(outcome.lhs), float(outcome.rhs), float(outcome.residual),
                       check.tolerance, passed, seconds)
