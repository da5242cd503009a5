"""Evaluation report container and its two serializations.

Text form (UTF-8, one ``key = value`` per line):

    hpnet eval report v1
    <blank>
    aggregate.<metric> = <float>
    row.<i>.<field> = <value>        # one block per time step

CSV form: header row then one row per time step; missing values are empty
cells. Both forms round-trip floats through repr and are byte-stable.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

HEADER = "hpnet eval report v1"
CSV_FIELDS = (
    "step", "agents", "min_ade", "min_fde", "miss_rate", "b_min_fde",
    "min_joint_ade", "min_joint_fde", "stability",
)


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)       # per-step dicts
    aggregate: dict = field(default_factory=dict)  # overall means / counts

    @classmethod
    def from_rollout(cls, rollout):
        rows = [dict(r) for r in rollout["accuracy"]]
        for s in rollout["stability"]:
            rows[s["step"]]["stability"] = s["stability"]
        agg = {}
        for key in ("min_ade", "min_fde", "miss_rate", "b_min_fde",
                    "min_joint_ade", "min_joint_fde", "stability"):
            vals = [r[key] for r in rows if key in r and np.isfinite(r[key])]
            if vals:
                agg[key] = float(np.mean(vals))
        agg["steps"] = len(rows)
        return cls(rows=rows, aggregate=agg)

    def to_text(self):
        lines = [HEADER, ""]
        for key in sorted(self.aggregate):
            lines.append(f"aggregate.{key} = {self.aggregate[key]!r}")
        for i, row in enumerate(self.rows):
            for key in sorted(row):
                lines.append(f"row.{i}.{key} = {row[key]!r}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k]
                             for k in row if k in CSV_FIELDS})
        return buf.getvalue()

    def save(self, stem):
        with open(f"{stem}.txt", "w", encoding="utf-8") as fh:
            fh.write(self.to_text())
        with open(f"{stem}.csv", "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())
