import math

from openpyxl import load_workbook

from core.montecarlo import PathResult, Terminal
from core.reporting import (
    HITTING_COLUMNS,
    flatten_report,
    format_report,
    format_table,
    report_to_json,
    rows_to_csv,
    save_xlsx,
)
from core.state import RunState, SimulationStatisticsState
from core.utilities import format_real, random_suffix

ROW = {"spec_id": "brownian_line", "a": 0.0, "x": 0.25, "b": 1.0, "n": 10,
       "p_hat": 0.3, "ci": 0.1, "formula_p": 0.25, "pass": True}


class TestCsv:
    def test_fixed_columns(self):
        text = rows_to_csv([ROW], HITTING_COLUMNS)
        assert text == "spec_id,a,x,b,n,p_hat,ci,formula_p,pass\nbrownian_line,0.0,0.25,1.0,10,0.3,0.1,0.25,true\n"

    def test_infinities(self):
        assert rows_to_csv([{"v": math.inf}], ["v"]) == "v\ninf\n"


class TestTables:
    def test_numbers_align_right(self):
        lines = format_table([{"name": "a", "value": 1.5}, {"name": "bb", "value": 10.25}], ["name", "value"])
        first, second = lines.splitlines()[2:]
        assert first.endswith("  1.5")
        assert len(first) == len(second)

    def test_flattened_report(self):
        report = {"left": {"class": "first"}, "name": "x"}
        assert flatten_report(report) == [("left.class", "first"), ("name", "x")]
        assert "left.class" in format_report(report)

    def test_json_report(self):
        assert report_to_json({"bound": math.inf}) == '{\n  "bound": "inf"\n}\n'


class TestSpreadsheet:
    def test_data_sheet(self, tmp_path):
        written = save_xlsx([ROW], HITTING_COLUMNS, str(tmp_path / "out-{DATETIME}.xlsx"))
        sheet = load_workbook(written)["Data"]
        assert [cell.value for cell in sheet[1]] == HITTING_COLUMNS
        assert sheet["A2"].value == "brownian_line"

    def test_existing_file_gets_a_suffix(self, tmp_path):
        template = str(tmp_path / "out.xlsx")
        first = save_xlsx([ROW], HITTING_COLUMNS, template)
        second = save_xlsx([ROW], HITTING_COLUMNS, template)
        assert first != second


class TestState:
    def test_attribute_access(self):
        state = RunState("classify")
        state.report = {"a": 1}
        assert state["report"] == {"a": 1}
        assert state.exit_code == 0

    def test_statistics(self):
        stats = SimulationStatisticsState()
        stats.record_all([
            PathResult(Terminal.HIT_LEFT, 1.0, 10),
            PathResult(Terminal.HIT_RIGHT, 2.0, 5),
            PathResult(Terminal.HIT_RIGHT, 0.5, 1),
        ])
        assert (stats.paths, stats.hit_left, stats.hit_right, stats.total_steps) == (3, 1, 2, 16)


class TestUtilities:
    def test_format_real(self):
        assert format_real(-math.inf) == "-inf"
        assert format_real(0.25) == "0.25"

    def test_random_suffix(self):
        suffix = random_suffix(6)
        assert len(suffix) == 6
        assert suffix.isalnum() and suffix == suffix.lower()
