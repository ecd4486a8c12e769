"""
Tests for CSV/JSON artifact writing
"""

import json

import numpy as np
import pytest

from RisAlign import __version__
from RisAlign.artifacts import (
    OUTAGE_COLUMNS,
    format_value,
    metadata_lines,
    outage_rows,
    read_csv,
    render_csv,
    write_csv,
    write_json,
)
from RisAlign.outage import OutageCurve, Provenance, SnrGrid


class TestFormatValue:
    @pytest.mark.parametrize(
        "value,expected",
        [
            (True, "true"),
            (np.bool_(False), "false"),
            (3, "3"),
            (np.int64(7), "7"),
            (0.1, "0.10000000000000001"),
            (np.float64(2.5), "2.5"),
            ("n/a", "n/a"),
        ],
    )
    def test_cells(self, value, expected):
        assert format_value(value) == expected

    def test_float_round_trips(self):
        value = 1 / 3
        assert float(format_value(value)) == value


class TestMetadata:
    def test_layout(self):
        lines = metadata_lines("outage", 42, {"trials": 10, "geometry": {"M": 4}}, {"b": 1.5, "a": True})
        assert lines == [
            "# tool: risalign",
            f"# version: {__version__}",
            "# command: outage",
            "# seed: 42",
            '# config: {"geometry":{"M":4},"trials":10}',
            "# a: true",
            "# b: 1.5",
        ]

    def test_missing_seed(self):
        assert "# seed: none" in metadata_lines("spacing", None, {})


class TestCsv:
    def test_render(self):
        text = render_csv(["x", "flag"], [[0.5, False]], ["# tool: risalign"])
        assert text == "# tool: risalign\nx,flag\n0.5,false\n"

    def test_read_back(self, tmp_path):
        path = tmp_path / "nested" / "out.csv"
        write_csv(str(path), ["n", "value"], [[1, 0.25], [2, 0.125]], metadata_lines("series", 3, {"M": 2}))
        metadata, rows = read_csv(path)
        assert metadata["command"] == "series"
        assert metadata["seed"] == "3"
        assert json.loads(metadata["config"]) == {"M": 2}
        assert rows == [{"n": "1", "value": "0.25"}, {"n": "2", "value": "0.125"}]

    def test_stdout(self, capsys):
        write_csv(None, ["a"], [[1]], [])
        assert capsys.readouterr().out == "a\n1\n"
        write_csv("-", ["a"], [[2]], [])
        assert capsys.readouterr().out == "a\n2\n"


class TestJson:
    def test_numpy_values(self, tmp_path):
        path = tmp_path / "budget.json"
        payload = {"powers": np.array([1.0, 3.0]), "total": np.float64(4.0), "users": np.int32(2)}
        write_json(str(path), payload, ["# tool: risalign"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# tool: risalign"
        assert json.loads("\n".join(lines[1:])) == {"powers": [1.0, 3.0], "total": 4.0, "users": 2}

    def test_unserializable(self, tmp_path):
        with pytest.raises(TypeError):
            write_json(str(tmp_path / "x.json"), {"bad": object()}, [])


class TestOutageRows:
    def test_columns(self):
        grid = SnrGrid((0.0, 10.0))
        curve = OutageCurve(
            grid,
            np.array([0.5, 0.0]),
            Provenance.MONTE_CARLO,
            ci_low=np.array([0.4, 0.0]),
            ci_high=np.array([0.6, 1e-5]),
            trials=np.array([1000, 1000]),
            hits=np.array([500, 0]),
        )
        rows = outage_rows(curve, prefix=(15.0,))
        assert len(rows) == 2
        assert len(rows[0]) == len(OUTAGE_COLUMNS) + 1
        assert rows[0][:3] == [15.0, 0.0, 0.5]
        assert rows[0][6] == "monte_carlo"
        assert rows[1][-1] is True
