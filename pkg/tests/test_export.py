"""报告导出与内容哈希"""

import csv
import json
from enum import Enum

import numpy as np
import pytest

from kahler_toolkit import __version__
from kahler_toolkit.utils.export_utils import (
    build_report,
    content_hash,
    export_to_csv,
    flatten_dict,
    format_table,
    save_report,
    to_serializable,
)
from kahler_toolkit.utils.parallel import deterministic_map, resolve_threads


class Colour(Enum):
    RED = "red"


def sample_report(**changes):
    kwargs = dict(
        experiment="laplacian_comparison",
        plan={"manifold": "cp2", "samples": {"radii": 6}},
        measured={"k": np.float64(1.0)},
        aggregates={"worst_margin": 0.125, "holds": np.bool_(True)},
        verdict="PASS",
        notes=["equality case"],
        config={"command": "verify comparison"},
    )
    kwargs.update(changes)
    return build_report(**kwargs)


def test_to_serializable_native_types():
    data = to_serializable({"a": np.arange(3), "b": np.int64(2), "c": Colour.RED, "d": (1.5, np.bool_(False))})
    assert data == {"a": [0, 1, 2], "b": 2, "c": "red", "d": [1.5, False]}
    json.dumps(data)


def test_hash_ignores_volatile_keys():
    first = sample_report()
    second = sample_report()
    assert first["provenance"]["hash"] == second["provenance"]["hash"]
    assert first["provenance"]["version"] == __version__
    assert "generated_at" in first
    assert content_hash({"x": 1, "duration": 3.0}) == content_hash({"x": 1, "duration": 9.0})


def test_hash_depends_on_content():
    assert sample_report()["provenance"]["hash"] != sample_report(verdict="FAIL")["provenance"]["hash"]


def test_hash_is_key_order_independent():
    assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})


def test_save_report_json(reports_dir):
    report = sample_report()
    path = save_report(report, reports_dir, "cp2_laplacian_comparison", "json")
    assert path == reports_dir / "cp2_laplacian_comparison.json"
    loaded = json.loads(path.read_text(encoding="utf-8"))
    assert loaded["verdict"] == "PASS"
    assert loaded["aggregates"]["holds"] is True
    assert loaded["provenance"]["hash"] == report["provenance"]["hash"]


def test_save_report_markdown(reports_dir):
    path = save_report(sample_report(), reports_dir, "summary", "md")
    text = path.read_text(encoding="utf-8")
    assert text.startswith("# laplacian_comparison")
    assert "worst_margin" in text
    assert "- equality case" in text


def test_csv_keeps_full_precision(reports_dir):
    value = 0.1 + 0.2
    rows = [{"r": value, "lhs": 1.0 / 3.0, "hit": np.bool_(False)}, {"r": 2.0, "lhs": -1e-300, "hit": True}]
    path = save_report(rows, reports_dir, "series", "csv", ["r", "lhs", "hit"])
    with open(path, newline="", encoding="utf-8") as f:
        read = list(csv.DictReader(f))
    assert list(read[0]) == ["r", "lhs", "hit"]
    assert float(read[0]["r"]) == value
    assert float(read[0]["lhs"]) == 1.0 / 3.0
    assert float(read[1]["lhs"]) == -1e-300
    assert read[0]["hit"] == "False"


def test_csv_empty_rows(reports_dir):
    assert not export_to_csv([], reports_dir / "empty.csv")
    assert save_report([], reports_dir, "empty", "csv") is None


def test_unknown_format(reports_dir):
    assert save_report({}, reports_dir, "x", "xlsx") is None


def test_flatten_and_table():
    flat = flatten_dict({"a": {"b": 1, "c": {"d": 2}}, "e": 3})
    assert flat == {"a.b": 1, "a.c.d": 2, "e": 3}
    table = format_table([{"key": "a.b", "value": 1.5}])
    assert "key" in table and "1.5" in table
    assert format_table([]) == ""


class TestDeterministicMap:
    def test_order_is_preserved(self):
        assert deterministic_map(lambda x: x * x, range(10), threads=4) == [x * x for x in range(10)]

    def test_lowest_index_error_wins(self):
        def work(i):
            if i in (3, 7):
                raise ValueError(str(i))
            return i

        with pytest.raises(ValueError, match="^3$"):
            deterministic_map(work, range(10), threads=4)

    def test_resolve_threads(self):
        assert resolve_threads(None) == 1
        assert resolve_threads(0) == 1
        assert resolve_threads(3) == 3
