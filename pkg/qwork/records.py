import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
import pandas as pd

from qwork import __version__

log = logging.getLogger(__name__)


def format_number(x) -> str:
    """17 significant digits; scientific below 1e-4 and from 1e6 up."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if 0 < abs(x) < 1e-4 or abs(x) >= 1e6:
        return f"{x:.16e}"
    return f"{x:.17g}"


def _plain(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


@dataclass
class ResultRecord:
    experiment: str
    parameters: dict
    seed: Optional[int] = None
    version: str = __version__
    operations: list = field(default_factory=list)
    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)

    def scalar(self, section: str, name: str, value):
        self.scalars.setdefault(section, {})[name] = _plain(value)

    def table(self, name: str, columns: list[str], rows):
        self.tables[name] = {
            "columns": list(columns),
            "rows": [[_plain(v) for v in row] for row in rows],
        }

    def sample(self, name: str, values):
        self.samples[name] = [float(v) for v in np.asarray(values, dtype=float).ravel()]

    def used(self, *operations: str):
        for op in operations:
            if op not in self.operations:
                self.operations.append(op)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ResultRecord":
        return cls(**data)


def _flatten(prefix: str, value: Any):
    if isinstance(value, dict):
        for key, inner in value.items():
            yield from _flatten(f"{prefix}.{key}", inner)
    else:
        yield prefix, value


def _cell(value) -> str:
    if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
        return format_number(value)
    if value is None:
        return ""
    return str(value)


def render_json(record: ResultRecord) -> str:
    return json.dumps(record.to_dict(), indent=2, ensure_ascii=False) + "\n"


def render_csv(record: ResultRecord) -> str:
    rows = [("record", "experiment", record.experiment),
            ("record", "version", record.version),
            ("record", "seed", _cell(record.seed))]
    rows += [("record", "operation", op) for op in record.operations]
    for key, value in record.parameters.items():
        rows += [("parameters", name, _cell(v)) for name, v in _flatten(key, value)]
    for section, values in record.scalars.items():
        rows += [(section, name, _cell(v)) for name, v in values.items()]

    buf = io.StringIO()
    pd.DataFrame(rows, columns=["section", "name", "value"]).to_csv(buf, index=False, lineterminator="\n")

    for name, table in record.tables.items():
        columns = [f"{name}.{c}" for c in table["columns"]]
        frame = pd.DataFrame([[_cell(v) for v in row] for row in table["rows"]], columns=columns)
        buf.write("\n")
        frame.to_csv(buf, index=False, lineterminator="\n")

    for name, values in record.samples.items():
        if not values:
            continue
        buf.write("\n")
        pd.DataFrame({f"samples.{name}": [_cell(v) for v in values]}).to_csv(buf, index=False, lineterminator="\n")

    return buf.getvalue()


def emit(record: ResultRecord, fmt: str = "json", path: Optional[str] = None):
    text = render_csv(record) if fmt == "csv" else render_json(record)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    log.info(f"Wrote {fmt} record for {record.experiment} to {path}")
