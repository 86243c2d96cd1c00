import json

import pytest

from cannav.core.errors import OutputLockedError
from cannav.schemas.artifact_schemas import ArtifactStamp
from cannav.services.artifact_service import LOCK_NAME, ArtifactService, read_csv, read_stamp, stamp_line

STAMP = ArtifactStamp(config_hash="0123abcd", seed=4, code_version="1.0.0")


def test_stamp_line():
    assert stamp_line(STAMP) == "# config_hash=0123abcd,seed=4,code_version=1.0.0"
    assert stamp_line(STAMP, workers=2).endswith(",workers=2")


def test_csv_starts_with_stamp_then_header(tmp_path):
    service = ArtifactService(tmp_path, STAMP)
    path = service.write_csv("log.csv", ["step", "sr"], [[1, 0.5], [2, 0.25]])
    lines = path.read_text().splitlines()
    assert lines[0] == stamp_line(STAMP)
    assert lines[1] == "step,sr"
    header, rows = read_csv(path)
    assert header == ["step", "sr"]
    assert rows == [{"step": "1", "sr": "0.5"}, {"step": "2", "sr": "0.25"}]
    assert read_stamp(path) == {"config_hash": "0123abcd", "seed": "4", "code_version": "1.0.0"}


def test_floats_use_round_trip_repr(tmp_path):
    path = ArtifactService(tmp_path, STAMP).write_csv("x.csv", ["v"], [[0.1 + 0.2]])
    _, rows = read_csv(path)
    assert float(rows[0]["v"]) == 0.1 + 0.2


def test_equal_stamps_give_identical_bytes(tmp_path):
    a = ArtifactService(tmp_path / "a", STAMP)
    b = ArtifactService(tmp_path / "b", STAMP)
    for service in (a, b):
        service.write_json("report.json", {"sr": 0.5, "n": 3})
        service.write_csv("log.csv", ["step"], [[1]])
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "log.csv").read_bytes() == (tmp_path / "b" / "log.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "report.json").read_text())["stamp"]["seed"] == 4


def test_append_creates_then_extends(tmp_path):
    service = ArtifactService(tmp_path, STAMP)
    service.append_csv("eval.csv", ["checkpoint", "sr"], ["a.json", 0.5])
    service.append_csv("eval.csv", ["checkpoint", "sr"], ["b.json", 1.0])
    _, rows = read_csv(tmp_path / "eval.csv")
    assert [r["checkpoint"] for r in rows] == ["a.json", "b.json"]


def test_csv_log_rows_are_readable_while_open(tmp_path):
    service = ArtifactService(tmp_path, STAMP)
    with service.open_csv_log("train.csv", ["step", "sr"]) as log:
        log.append({"step": 16, "sr": 0.0, "ignored": 1})
        _, rows = read_csv(tmp_path / "train.csv")
        assert rows == [{"step": "16", "sr": "0.0"}]


def test_directory_lock(tmp_path):
    first = ArtifactService(tmp_path, STAMP)
    with first:
        assert (tmp_path / LOCK_NAME).exists()
        with pytest.raises(OutputLockedError):
            ArtifactService(tmp_path, STAMP).acquire()
    assert not (tmp_path / LOCK_NAME).exists()
    with ArtifactService(tmp_path, STAMP):
        pass


def test_stamp_absent(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("step,sr\n1,0.5\n")
    assert read_stamp(path) is None
    assert read_csv(path)[1] == [{"step": "1", "sr": "0.5"}]
