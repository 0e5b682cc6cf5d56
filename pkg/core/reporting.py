import csv
import io
import json
import logging
import math
import time
from datetime import datetime
from os import path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

from openpyxl import Workbook

from .configuration import config
from .utilities import encode_real, format_real, random_suffix

log = logging.getLogger(__name__)

##
# Fixed CSV columns
##
HITTING_COLUMNS: List[str] = ["spec_id", "a", "x", "b", "n", "p_hat", "ci", "formula_p", "pass"]
EXIT_TIME_COLUMNS: List[str] = ["spec_id", "a", "x", "b", "n", "mean", "stderr", "formula_mean"]
SURVIVAL_COLUMNS: List[str] = ["spec_id", "x", "horizon", "n", "fraction", "killed", "absorbed"]
PATH_COLUMNS: List[str] = ["spec_id", "path", "terminal", "lifetime", "steps"]


def _csv_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(rows: Sequence[Dict[str, Any]], columns: List[str], stream: TextIO):
    """
    Write rows with a header. Floats use their shortest round-trip repr, so equal values give equal bytes.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(column)) for column in columns])


def rows_to_csv(rows: Sequence[Dict[str, Any]], columns: List[str]) -> str:
    buffer = io.StringIO()
    write_csv(rows, columns, buffer)
    return buffer.getvalue()


def _json_safe(value: Any) -> Any:
    if isinstance(value, float):
        return encode_real(value)
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def report_to_json(report: Dict[str, Any]) -> str:
    return json.dumps(_json_safe(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


##
# Human-readable tables
##
def _table_cell(value: Any) -> str:
    if isinstance(value, float):
        return format_real(value, digits=8)
    if isinstance(value, bool):
        return "yes" if value else "no"
    if value is None:
        return "-"
    return str(value)


def format_table(rows: Sequence[Dict[str, Any]], columns: List[str]) -> str:
    """
    Left-aligned text columns and right-aligned numbers, separated by two spaces.
    """
    cells = [[_table_cell(row.get(column)) for column in columns] for row in rows]
    widths = [
        max([len(column)] + [len(line[index]) for line in cells])
        for index, column in enumerate(columns)
    ]

    def render(line: List[str], numeric: List[bool]) -> str:
        return "  ".join(
            cell.rjust(width) if is_number else cell.ljust(width)
            for cell, width, is_number in zip(line, widths, numeric)
        ).rstrip()

    numeric_columns = [
        bool(rows) and all(isinstance(row.get(column), (int, float)) and not isinstance(row.get(column), bool)
                           for row in rows)
        for column in columns
    ]
    lines = [render(list(columns), numeric_columns), render(["-" * width for width in widths], numeric_columns)]
    lines.extend(render(line, numeric_columns) for line in cells)
    return "\n".join(lines) + "\n"


def flatten_report(report: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    """
    Nested report dictionaries as (dotted.key, value) pairs, in key order.
    """
    pairs: List[Tuple[str, Any]] = []
    for key in sorted(report):
        value = report[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            pairs.extend(flatten_report(value, f"{name}."))
        else:
            pairs.append((name, value))
    return pairs


def format_report(report: Dict[str, Any]) -> str:
    rows = [{"field": key, "value": value} for key, value in flatten_report(report)]
    return format_table(rows, ["field", "value"])


##
# Spreadsheet
##
def _xlsx_cell(value: Any) -> Any:
    # openpyxl can not store infinite floats
    if isinstance(value, float) and math.isinf(value):
        return format_real(value)
    return value


def resolve_xlsx_path(path_template: Optional[str] = None) -> str:
    """
    Fill in {DATETIME} and, if that file already exists, append a random suffix before the extension.
    """
    human_datetime = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    output_path = (path_template or config.XLSX_OUTPUT_PATH).replace("{DATETIME}", human_datetime)

    if path.isfile(output_path):
        suffix: str = random_suffix()
        log.warning(f"Spreadsheet output path is \"{output_path}\", but that file already exists. "
                    f"Appending \"_{suffix}\" to the filename.")
        # Tuple[path without extension, ext]
        split_output: Tuple[str, str] = path.splitext(output_path)
        output_path = f"{split_output[0]}_{suffix}{split_output[1]}"

    return output_path


def save_xlsx(rows: Sequence[Dict[str, Any]], columns: List[str], path_template: Optional[str] = None) -> Optional[str]:
    """
    Save the rows into a spreadsheet with a single "Data" sheet.

    Returns:
        The written path, or None when the file stayed locked through every retry.
    """
    xl_workbook = Workbook()
    sheet = xl_workbook.active
    sheet.title = "Data"

    sheet.append(columns)
    for row in rows:
        sheet.append([_xlsx_cell(row.get(column)) for column in columns])

    output_path = resolve_xlsx_path(path_template)

    # Exponential backoff, starting at 2s, up to 7 retries (2^7 = 128)
    retries_current_wait = 2
    while retries_current_wait <= 128:
        try:
            xl_workbook.save(filename=output_path)
            log.info(f"Spreadsheet location: \"{output_path}\"")
            return output_path
        except PermissionError:
            log.warning(f"PermissionError while trying to open spreadsheet file, "
                        f"retrying in {retries_current_wait} seconds.")

            time.sleep(retries_current_wait)
            retries_current_wait *= 2

    log.critical(f"Failed to write spreadsheet file to \"{output_path}\".")
    return None
