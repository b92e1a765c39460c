"""Tests for result-file writing."""

import json

import pytest

from smoothclimb.utils.results import (
    OutputError,
    ResultHeader,
    format_vector,
    read_csv,
    write_csv,
    write_json,
)

HEADER = ResultHeader(seed=4, config_sha256="ab" * 32, command="sweep")


def test_comment_line():
    assert HEADER.comment() == f"# smoothclimb command=sweep seed=4 config_sha256={'ab' * 32}"


def test_format_vector():
    assert format_vector([1, -0.5, 1e-20]) == "1.0 -0.5 1e-20"


def test_csv(tmp_path):
    path = write_csv(tmp_path / "t.csv", HEADER, ("a", "b"), [(1, 0.1), (2, "")])
    comment, rows = read_csv(path)
    assert comment == HEADER.comment()
    assert rows == [{"a": "1", "b": "0.1"}, {"a": "2", "b": ""}]
    assert path.read_bytes().count(b"\r") == 0


def test_csv_row_width(tmp_path):
    with pytest.raises(OutputError, match="row has 1 cells"):
        write_csv(tmp_path / "t.csv", HEADER, ("a", "b"), [(1,)])


def test_unwritable(tmp_path):
    with pytest.raises(OutputError):
        write_csv(tmp_path / "missing" / "t.csv", HEADER, ("a",), [])
    with pytest.raises(OutputError):
        write_json(tmp_path / "missing" / "t.json", HEADER, {})


def test_json(tmp_path):
    path = write_json(tmp_path / "r.json", HEADER, {"passed": True, "checks": []})
    document = json.loads(path.read_text())
    assert list(document) == ["header", "passed", "checks"]
    assert document["header"] == {"command": "sweep", "seed": 4, "config_sha256": "ab" * 32}


def test_json_rejects_unserializable(tmp_path):
    with pytest.raises(OutputError):
        write_json(tmp_path / "r.json", HEADER, {"value": object()})
