# test_storage.py - JSON and CSV result files

import csv
import json
import os

import numpy as np
import pytest

from detection import build_histogram, empty_histogram
from storage import ResultStorage


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestResultStorage:
    def test_default_folder(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        storage = ResultStorage()
        assert storage.out_dir == os.path.join(str(tmp_path), "results")
        assert os.path.isdir(storage.out_dir)

    def test_json_is_plain_and_sorted(self, tmp_path):
        storage = ResultStorage(str(tmp_path))
        path = storage.write_json("report.json", {
            "b": np.float64(1.5),
            "a": [np.int64(3), np.bool_(True)],
            "bad": float("nan"),
            "big": np.inf,
            "array": np.array([1.0, 2.0]),
        })
        with open(path) as f:
            text = f.read()
        data = json.loads(text)
        assert data == {"a": [3, True], "array": [1.0, 2.0], "b": 1.5, "bad": None, "big": None}
        assert text.index('"a"') < text.index('"b"')
        assert storage.written == [path]

    def test_csv_cells(self, tmp_path):
        storage = ResultStorage(str(tmp_path))
        path = storage.write_csv("table.csv", ["x", "flag", "value"], [[1, True, None], ["t", False, 0.25],
                                                                      [2, np.bool_(False), float("inf")]])
        assert read_csv(path) == [["x", "flag", "value"], ["1", "true", ""], ["t", "false", "0.25"],
                                  ["2", "false", ""]]

    def test_histograms(self, tmp_path):
        storage = ResultStorage(str(tmp_path))
        histograms = {
            ("stored", "D1s", "D1i"): build_histogram([50e-9], [0.0], 24e-9, 0.1e-9, 5.5e-9, center=50e-9),
            ("transmitted", "D1s", "D1i"): empty_histogram(24e-9, 0.1e-9, 5.5e-9),
        }
        rows = read_csv(storage.write_histograms("histograms.csv", histograms))
        assert rows[0] == ["branch", "signal_detector", "idler_detector", "bin_center_s", "counts"]
        assert len(rows) == 1 + 2 * 241
        peak = [r for r in rows[1:] if r[4] == "1"]
        assert len(peak) == 1
        assert peak[0][0] == "stored"
        assert float(peak[0][3]) == pytest.approx(50e-9)

    def test_timestamps(self, tmp_path):
        storage = ResultStorage(str(tmp_path))
        rows = read_csv(storage.write_timestamps("t.csv", {"D1s": np.array([1e-6]), "D2i": np.array([2e-6, 3e-6])}))
        assert rows == [["detector_label", "time_s"], ["D1s", "1e-06"], ["D2i", "2e-06"], ["D2i", "3e-06"]]
