import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cocoacl.output import emit, parse_csv, parse_json, read_table, to_csv, to_json

cell = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6),
                 st.floats(allow_nan=False), st.sampled_from(["cocoa", "offline_ls", "a b"]))
rows_strategy = st.lists(st.fixed_dictionaries({"a": cell, "b": cell, "c": cell}), min_size=1, max_size=6)


class TestRoundTrip:
    @settings(max_examples=100, deadline=None)
    @given(rows_strategy)
    def test_csv(self, rows):
        assert parse_csv(to_csv(rows)) == rows

    @settings(max_examples=100, deadline=None)
    @given(rows_strategy)
    def test_json(self, rows):
        assert parse_json(to_json(rows)) == rows

    def test_float_bits_preserved(self):
        x = 0.1 + 0.2
        assert parse_csv(to_csv([{"v": x}]))[0]["v"] == x

    def test_infinity(self):
        rows = [{"v": math.inf}]
        assert parse_csv(to_csv(rows))[0]["v"] == math.inf
        assert json.loads(to_json(rows))["rows"][0]["v"] == "inf"


class TestEmit:
    def test_csv_with_sidecar(self, tmp_path):
        path = emit([{"K": 1, "g": 0.5}], "csv", tmp_path / "sub" / "out.csv", metadata={"preset": "fig2"})
        assert read_table(path) == [{"K": 1, "g": 0.5}]
        assert json.loads((tmp_path / "sub" / "out.csv.meta.json").read_text())["preset"] == "fig2"

    def test_json_document(self, tmp_path):
        path = emit([{"K": 2}], "json", tmp_path / "out.json", metadata={"seed": 3})
        doc = json.loads(path.read_text())
        assert doc["metadata"]["seed"] == 3 and doc["columns"] == ["K"]
        assert read_table(path) == [{"K": 2}]

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit([], "xml", tmp_path / "x")

    def test_unwritable_path_named(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError, match="file"):
            emit([{"a": 1}], "csv", blocker / "out.csv")
