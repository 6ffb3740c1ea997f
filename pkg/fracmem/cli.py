import argparse
import hashlib
import logging
import math
import sys
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bridge import Bridge
from .config import VERIFY_MODES, ConfigError, RunConfig, dump_config
from .emit import (ResultRecord, atomic_write, emit_plot_data, emit_results, emit_sweep_summary,
                   plot_file_name)
from .registry import CheckContext, CheckResult, evaluate, suite_checks
from .testfn import comparability_constant
from .wavesim import (IntegrationFailure, Outcome, SimResult, SweepRow, critical_exponent,
                      fit_linear_coefficient, gaussian_data, moment_balance,
                      moment_inequality_monitor, run, threshold_sweep)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
BALANCE_TOLERANCE = 0.05
MONITOR_TOLERANCE = 1e-3


def run_id(config: RunConfig) -> str:
    return hashlib.sha256(dump_config(config).encode('utf-8')).hexdigest()[:12]


def prepare_out(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / 'config.toml', dump_config(config).encode('utf-8'))
    return out


def _seconds(config: RunConfig, seconds: float) -> float:
    return seconds if config.record_timing else 0.0


def _record(config: RunConfig, result: CheckResult) -> ResultRecord:
    return ResultRecord(run_id(config), config.mode, result.name, result.lhs, result.rhs, result.residual,
                        result.tolerance, result.passed, _seconds(config, result.seconds))


def verify_all(bridge: Bridge) -> int:
    config = bridge.config
    checks = suite_checks(config.mode)
    contexts = [CheckContext(rng=np.random.default_rng([config.seed, index]),
                             n_steps=config.verify.n_steps,
                             inequality=config.inequality.params(),
                             testfn=config.test_function,
                             l=config.inequality.l)
                for index in range(len(checks))]
    tasks = [partial(evaluate, check, ctx, config.verify.force_failure and index == 0)
             for index, (check, ctx) in enumerate(zip(checks, contexts))]
    results = bridge.run_tasks(tasks)
    records = []
    for check, result in zip(checks, results):
        if isinstance(result, BaseException):
            result = CheckResult(check.name, math.nan, math.nan, math.nan, check.tolerance, False, 0.0, str(result))
        records.append(_record(config, result))
        print(f'{"PASS" if result.passed else "FAIL"} {result.name} residual={result.residual:.3g} '
              f'tolerance={result.tolerance:.3g}')
    emit_results(prepare_out(config), records)
    failed = sum(not r.passed for r in records)
    print(f'{config.mode}: {len(records) - failed}/{len(records)} checks passed')
    return EXIT_OK if failed == 0 else EXIT_FAILED


def simulation_checks(config: RunConfig, result: SimResult) -> list[ResultRecord]:
    """
    Moment identity and reduced-inequality monitor on a finished trajectory.
    """
    rid, params = run_id(config), result.params
    records = []
    if result.outcome == Outcome.GLOBAL or len(result.records) < 3:
        return records
    balance = moment_balance(result, params)
    intercept, slope = fit_linear_coefficient(balance)
    scale = max(abs(result.B), 1e-12)
    gap = abs(slope - result.B) / scale
    records.append(ResultRecord(rid, config.mode, 'simulate.moment_balance.B', slope, result.B, gap,
                                BALANCE_TOLERANCE, gap <= BALANCE_TOLERANCE, 0.0))
    c_hat = comparability_constant(config.test_function)
    monitor = moment_inequality_monitor(result, params, c_hat)
    lowest = float(np.min(monitor.values))
    excess = max(0.0, -lowest) / max(float(np.max(np.abs(monitor.values))), 1e-300)
    records.append(ResultRecord(rid, config.mode, 'simulate.moment_monitor', lowest, 0.0, excess,
                                MONITOR_TOLERANCE, excess <= MONITOR_TOLERANCE, 0.0))
    logging.info('moment monitor: Ĉ=%.6g lowest residual %.6g, balance slope %.6g vs B=%.6g',
                 c_hat, lowest, slope, result.B)
    return records


def _summary_row(result: SimResult) -> SweepRow:
    params = result.params
    return SweepRow(params.p, params.p * params.gamma, result.outcome.value, result.end_time,
                    result.final_sup, params.p <= critical_exponent(params.gamma), result=result)


def simulate(bridge: Bridge) -> int:
    config = bridge.config
    params = config.model
    u0, u1 = gaussian_data(params, config.data)
    out = prepare_out(config)
    exit_code = EXIT_OK
    try:
        result = run(params, u0, u1, config.test_function)
    except IntegrationFailure as e:
        logging.error('simulation failed: %s', e)
        if e.result is None:
            return EXIT_FAILED
        result, exit_code = e.result, EXIT_FAILED
    records = simulation_checks(config, result) if exit_code == EXIT_OK else []
    emit_results(out, records)
    emit_plot_data(out / plot_file_name(0, params.p), result.records)
    emit_sweep_summary(out / 'summary.csv', [_summary_row(result)])
    print(f'simulate p={params.p} γ={params.gamma}: {result.outcome.value} at t={result.end_time:.6g}')
    if any(not r.passed for r in records):
        exit_code = EXIT_FAILED
    return exit_code


def sweep(bridge: Bridge) -> int:
    config = bridge.config
    rows = threshold_sweep(config.model, config.sweep.p_values, config.data, config.test_function,
                           runner=bridge.run_tasks)
    out = prepare_out(config)
    rid = run_id(config)
    records = []
    for index, row in enumerate(rows):
        if row.result is not None:
            emit_plot_data(out / plot_file_name(index, row.p), row.result.records)
        failed = row.classification == Outcome.FAILED.value
        records.append(ResultRecord(rid, config.mode, f'sweep.p={format(row.p, "g")}', row.time,
                                    config.model.T_max, math.inf if failed else 0.0, 0.0, not failed, 0.0))
        print(f'p={row.p:g} pγ={row.p_gamma:.6g} {row.classification} t={row.time:.6g}')
    emit_results(out, records)
    emit_sweep_summary(out / 'summary.csv', rows)
    return EXIT_FAILED if any(not r.passed for r in records) else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='fracmem',
        description='Fractional integral toolkit and damped fractional wave simulator with memory.',
        epilog='Every config key can be overridden by FRACMEM_<TABLE>_<KEY>, e.g. FRACMEM_MODEL_P=1.5.')
    parser.add_argument('mode', nargs='?', choices=[*VERIFY_MODES, 'simulate', 'sweep'],
                        help='overrides the mode key of the config')
    parser.add_argument('--config', help='TOML config file')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--seed', type=int, help='seed for randomized checks')
    parser.add_argument('--jobs', type=int, help='concurrent checks or sweep rows')
    parser.add_argument('--dump-config', action='store_true', help='print the effective config and exit')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {'mode': args.mode, 'out': args.out, 'seed': args.seed, 'jobs': args.jobs}
    try:
        bridge = Bridge(config=args.config, overrides=overrides)
    except ConfigError as e:
        for violation in e.violations:
            where = f'line {e.lineno}: ' if e.lineno is not None else ''
            print(f'config error: {where}{violation}', file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        sys.stdout.write(dump_config(bridge.config))
        return EXIT_OK
    mode = bridge.config.mode
    try:
        if mode in VERIFY_MODES:
            return verify_all(bridge)
        if mode == 'simulate':
            return simulate(bridge)
        return sweep(bridge)
    except OSError as e:
        logging.error('cannot write results: %s', e)
        print(f'error: {e}', file=sys.stderr)
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
