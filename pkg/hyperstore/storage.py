# storage.py - Result files: output folder, JSON reports and CSV tables

import csv
import json
import logging
import math
import os
from typing import Optional

import numpy as np

from config import OUTPUT_FOLDER

logger = logging.getLogger(__name__)


def _plain(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ""
    return str(value)


class ResultStorage:
    def __init__(self, out_dir: Optional[str] = None):
        if out_dir is None:
            out_dir = os.path.join(os.getcwd(), OUTPUT_FOLDER)
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.written = []

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_json(self, name: str, data: dict) -> str:
        """Write `data` with sorted keys; NaN and infinities become null."""
        path = self.path(name)
        with open(path, "w", encoding="utf8", newline="\n") as f:
            json.dump(_plain(data), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
        self._record(path)
        return path

    def write_csv(self, name: str, header: list, rows) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        self._record(path)
        return path

    def write_histograms(self, name: str, histograms: dict) -> str:
        """One row per bin: branch, detector pair, bin centre (s), counts."""
        rows = []
        for (branch, signal, idler), hist in sorted(histograms.items()):
            for center, count in zip(hist.bin_centers + hist.center, hist.bins):
                rows.append([branch, signal, idler, float(center), int(count)])
        return self.write_csv(name, ["branch", "signal_detector", "idler_detector", "bin_center_s", "counts"], rows)

    def write_timestamps(self, name: str, streams: dict) -> str:
        rows = [[label, float(t)] for label, times in streams.items() for t in times]
        return self.write_csv(name, ["detector_label", "time_s"], rows)

    def _record(self, path: str):
        self.written.append(path)
        logger.info("[OUT] wrote %s", path)
