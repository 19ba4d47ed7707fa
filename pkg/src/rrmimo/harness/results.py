"""Long-format result rows and their CSV serialization."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("experiment", "scenario", "basis", "eta", "alpha_db", "m", "x", "metric",
           "value", "stderr", "note", "seed", "config_hash")

FAILURE_MARKER = "NO_PROPER_ESTIMATE"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(round(v, 12)) if v != int(v) or abs(v) >= 1e15 else str(int(v))
    return str(v)


@dataclass
class ResultTable:
    experiment: str
    seed: int
    config_hash: str
    rows: list[dict] = field(default_factory=list)

    def add(self, metric: str, value, *, scenario: str = "", basis: str = "", eta=None,
            alpha_db=None, m=None, x=None, stderr=None, note: str = "") -> None:
        self.rows.append(dict(experiment=self.experiment, scenario=scenario, basis=basis,
                              eta=eta, alpha_db=alpha_db, m=m, x=x, metric=metric, value=value,
                              stderr=stderr, note=note, seed=self.seed,
                              config_hash=self.config_hash))

    def extend(self, other: "ResultTable") -> None:
        self.rows.extend(other.rows)

    def select(self, **where) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in where.items())]

    def value(self, **where):
        hits = self.select(**where)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {where}")
        return hits[0]["value"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def __len__(self) -> int:
        return len(self.rows)


def batch_mean_se(samples, num_batches: int = 10) -> tuple[float, float]:
    """Mean and the standard error from ``num_batches`` contiguous trial batches."""
    x = np.asarray(samples, dtype=float)
    mean = float(x.mean())
    if x.size < num_batches:
        return mean, float("nan")
    means = np.array([b.mean() for b in np.array_split(x, num_batches)])
    return mean, float(means.std(ddof=1) / np.sqrt(num_batches))
