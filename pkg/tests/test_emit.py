import csv
import math

import orjson

from fracmem.emit import (PLOT_HEADER, RESULT_HEADER, ResultRecord, atomic_write,
                          emit_plot_data, emit_results, emit_sweep_summary, format_bool,
                          format_number, plot_file_name)
from fracmem.wavesim import MomentRecord, SweepRow


def test_format_number():
    assert format_number(0.1) == '0.10000000000000001'
    assert format_number(2) == '2'
    assert format_number(math.inf) == 'inf'
    assert format_bool(True) == 'true' and format_bool(False) == 'false'


def test_plot_file_name():
    assert plot_file_name(0, 1.5) == 'plot-000-p1.5.csv'
    assert plot_file_name(12, 2.0) == 'plot-012-p2.csv'


def test_atomic_write_replaces(tmp_path):
    target = tmp_path / 'a.csv'
    target.write_text('old')
    atomic_write(target, b'new')
    assert target.read_bytes() == b'new'
    assert not (tmp_path / 'a.csv.partial').exists()


def test_empty_results_are_header_only(tmp_path):
    csv_path, json_path = emit_results(tmp_path / 'out', [])
    assert csv_path.read_text() == ','.join(RESULT_HEADER) + '\n'
    assert orjson.loads(json_path.read_bytes()) == []


def test_results_mirror(tmp_path):
    record = ResultRecord('abc', 'verify-fracops', 'fracops.zero', 0.0, 0.0, 0.0, 1e-9, True, 0.0)
    csv_path, json_path = emit_results(tmp_path, [record])
    with open(csv_path, newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == list(RESULT_HEADER)
    assert rows[1] == ['abc', 'verify-fracops', 'fracops.zero', '0', '0', '0', '1.0000000000000001e-09',
                       'true', '0']
    assert orjson.loads(json_path.read_bytes()) == [dict(zip(RESULT_HEADER, rows[1]))]


def test_plot_and_summary(tmp_path):
    records = [MomentRecord(0.0, 1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0),
               MomentRecord(0.01, 1.5, 1.5, 1.2, 2.5, 0.0, 0.0, 1.0)]
    plot = emit_plot_data(tmp_path / 'plot.csv', records)
    lines = plot.read_text().splitlines()
    assert lines[0] == ','.join(PLOT_HEADER)
    assert lines[2] == '0.01,1.5,1.2,2.5'
    summary = emit_sweep_summary(tmp_path / 'summary.csv',
                                 [SweepRow(1.5, 0.75, 'BLOWUP', 0.5, 1e6, True)])
    assert summary.read_text().splitlines()[1] == '1.5,0.75,BLOWUP,0.5,1000000,true,'
