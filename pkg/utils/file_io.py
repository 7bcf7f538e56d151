import csv
import io
import json
import os
from typing import Dict, Iterable, List, Sequence


def open_file(filepath):
    with open(filepath, 'r', encoding='utf-8') as infile:
        return infile.read()


def save_file(filepath, content):
    _ensure_parent(filepath)
    with open(filepath, 'w', encoding='utf-8', newline='\n') as outfile:
        outfile.write(content)


def load_json(filepath):
    with open(filepath, 'r', encoding='utf-8') as infile:
        return json.load(infile)


def dump_json(payload) -> str:
    # sorted keys + fixed indent keep reports byte-identical for identical runs
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + '\n'


def save_json(filepath, payload):
    save_file(filepath, dump_json(payload))


def dump_json_lines(records: Iterable[Dict]) -> str:
    return ''.join(json.dumps(record, ensure_ascii=False, sort_keys=True) + '\n' for record in records)


def save_json_lines(filepath, records: Iterable[Dict]):
    save_file(filepath, dump_json_lines(records))


def dump_csv(rows: Sequence[Dict], columns: List[str] = None) -> str:
    """
    Render a list of flat dicts as CSV text

    Parameters:
    rows (list of dict): one dict per row
    columns (list of str or None): column order, defaults to the keys of the first row

    Returns:
    str: CSV text with a header line
    """
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def save_csv(filepath, rows: Sequence[Dict], columns: List[str] = None):
    save_file(filepath, dump_csv(rows, columns))


def _ensure_parent(filepath):
    parent = os.path.dirname(os.path.abspath(filepath))
    if not os.path.isdir(parent):
        os.makedirs(parent)
