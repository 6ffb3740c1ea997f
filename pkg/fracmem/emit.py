import csv
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import orjson

from .wavesim import MomentRecord, SweepRow

RESULT_HEADER = ('run_id', 'mode', 'check', 'lhs', 'rhs', 'residual', 'tolerance', 'pass', 'seconds')
PLOT_HEADER = ('t', 'w', 'u_sup', 'energy_proxy')
SUMMARY_HEADER = ('p', 'p_gamma', 'classification', 'time', 'final_sup', 'predicted_blowup', 'note')
PARTIAL_SUFFIX = '.partial'


@dataclass(frozen=True)
class ResultRecord:
    run_id: str
    mode: str
    check: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    seconds: float

    def row(self) -> list[str]:
        return [self.run_id, self.mode, self.check, format_number(self.lhs), format_number(self.rhs),
                format_number(self.residual), format_number(self.tolerance),
                format_bool(self.passed), format_number(self.seconds)]


def format_number(value: float) -> str:
    """
    >>> format_number(0.1)
    '0.10000000000000001'
    """
    return format(float(value), '.17g')


def format_bool(value: bool) -> str:
    return 'true' if value else 'false'


def atomic_write(path: Path, data: bytes) -> Path:
    """
    Writes next to the target with a .partial suffix and renames on success; a failed
    write leaves only the .partial file behind.
    """
    path = Path(path)
    partial = path.with_name(path.name + PARTIAL_SUFFIX)
    with open(partial, 'wb') as f:
        f.write(data)
    os.replace(partial, path)
    return path


def _csv_bytes(header: Sequence[str], rows: Iterable[Sequence[str]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue().encode('utf-8')


def emit_results(out_dir: Path, records: Sequence[ResultRecord], stem: str = 'results') -> tuple[Path, Path]:
    """
    CSV plus JSON mirror; the mirror carries the same decimal strings as the CSV.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [record.row() for record in records]
    csv_path = atomic_write(out_dir / f'{stem}.csv', _csv_bytes(RESULT_HEADER, rows))
    mirror = [dict(zip(RESULT_HEADER, row)) for row in rows]
    json_path = atomic_write(out_dir / f'{stem}.json', orjson.dumps(mirror, option=orjson.OPT_INDENT_2))
    return csv_path, json_path


def emit_plot_data(path: Path, records: Sequence[MomentRecord]) -> Path:
    rows = [[format_number(r.t), format_number(r.w), format_number(r.u_sup), format_number(r.energy_proxy)]
            for r in records]
    return atomic_write(path, _csv_bytes(PLOT_HEADER, rows))


def emit_sweep_summary(path: Path, rows: Sequence[SweepRow]) -> Path:
    table = [[format_number(r.p), format_number(r.p_gamma), r.classification, format_number(r.time),
              format_number(r.final_sup), format_bool(r.predicted_blowup), r.note] for r in rows]
    return atomic_write(path, _csv_bytes(SUMMARY_HEADER, table))


def plot_file_name(index: int, p: float) -> str:
    return f'plot-{index:03d}-p{format(p, "g")}.csv'
