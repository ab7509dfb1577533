import csv
import json
import logging
import math
from datetime import datetime
from pathlib import Path

import numpy as np

from modules.hivemind import RunBorg


def sanitize(value):
    """
    Plain JSON values: numpy scalars and arrays unwrapped, sets sorted,
    non-finite floats spelled out as strings.
    """
    if hasattr(value, "to_dict"):
        return sanitize(value.to_dict())
    if isinstance(value, dict):
        return {str(key): sanitize(item) for key, item in value.items()}
    if isinstance(value, (set, frozenset)):
        return [sanitize(item) for item in sorted(value)]
    if isinstance(value, (list, tuple)):
        return [sanitize(item) for item in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": sanitize(value.real), "im": sanitize(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


class DataWriter:
    """
    Writes one experiment folder: report.json, metadata.json and CSV tables.

    report.json carries no timestamps so identical configs give identical
    bytes; the session date goes to metadata.json.
    """

    def __init__(self, directory: str, experiment: str = None):
        self.hivemind = RunBorg()
        self.folder = Path(directory) / (experiment or self.hivemind.experiment or "run")
        self.folder.mkdir(parents=True, exist_ok=True)
        self.written: list = []

    def _path(self, name: str) -> Path:
        path = self.folder / name
        self.written.append(path.name)
        return path

    def write_csv(self, name: str, header, rows) -> Path:
        path = self._path(f"{name}.csv")
        with open(path, "w", newline="") as data_file:
            writer = csv.writer(data_file)
            writer.writerow(header)
            for row in rows:
                writer.writerow([sanitize(item) for item in row])
        logging.debug(f"wrote {path}")
        return path

    def write_json(self, name: str, payload: dict) -> Path:
        path = self._path(f"{name}.json")
        with open(path, "w") as data_file:
            json.dump(sanitize(payload), data_file, indent=2, sort_keys=True)
            data_file.write("\n")
        return path

    def write_report(self, report: dict) -> Path:
        path = self.write_json("report", {**report, "passed": self.hivemind.passed,
                                          "outcomes": self.hivemind.certificates})
        logging.info(f"report written to {path}")
        return path

    def write_metadata(self) -> Path:
        return self.write_json("metadata", {"session_date": self.hivemind.session_date,
                                            "written_at": datetime.now().isoformat(),
                                            "command": self.hivemind.command,
                                            "experiment": self.hivemind.experiment,
                                            "config": self.hivemind.config,
                                            "files": sorted(set(self.written))})
